//! High-order spatial features: travel motifs and radius of gyration.
//!
//! A motif is the directed graph of transitions between a user's distinct
//! stay locations. Isomorphic motifs are identified by an exact canonical
//! code (the lexicographically minimal row-major adjacency bit string over
//! all node permutations), which is feasible because daily motifs are tiny.

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::Error;
use crate::geo::GridSpec;
use crate::ingest::CleanTrajectory;
use crate::stays::StayList;
use crate::Result;

/// Default cap on exact canonicalization; larger graphs collapse straight
/// into the "others" feature bucket.
pub const DEFAULT_MAX_MOTIF_NODES: usize = 10;

/// Directed transition graph over a user's distinct stay cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MotifGraph {
    n: usize,
    adjacency: Vec<bool>,
}

impl MotifGraph {
    /// Build from an explicit edge list (mainly for tests and enumeration).
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = Self { n, adjacency: vec![false; n * n] };
        for &(u, v) in edges {
            assert!(u != v, "self-loops are not representable");
            g.adjacency[u * n + v] = true;
        }
        g
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().filter(|&&b| b).count()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u * self.n + v]
    }

    /// Apply a node relabeling: node `i` of the result is node `perm[i]`
    /// of the original.
    pub fn relabel(&self, perm: &[usize]) -> Self {
        let n = self.n;
        let mut adjacency = vec![false; n * n];
        for i in 0..n {
            for j in 0..n {
                adjacency[i * n + j] = self.has_edge(perm[i], perm[j]);
            }
        }
        Self { n, adjacency }
    }
}

/// Canonical identity of a motif's isomorphism class.
///
/// Layout: first byte is the node count, followed by the minimal row-major
/// adjacency bits packed MSB-first. Oversize graphs share the sentinel
/// `[0xFF]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalCode(Vec<u8>);

impl CanonicalCode {
    pub fn is_oversize(&self) -> bool {
        self.0 == [0xFF]
    }

    /// Node count, if this is not the oversize sentinel.
    pub fn node_count(&self) -> Option<usize> {
        if self.is_oversize() {
            None
        } else {
            Some(self.0[0] as usize)
        }
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_hex(hex: &str) -> Option<Self> {
        if !hex.len().is_multiple_of(2) {
            return None;
        }
        let bytes: Option<Vec<u8>> = (0..hex.len())
            .step_by(2)
            .map(|i| u8::from_str_radix(&hex[i..i + 2], 16).ok())
            .collect();
        bytes.map(CanonicalCode)
    }
}

fn pack_bits(graph: &MotifGraph, perm: &[usize], out: &mut Vec<u8>) {
    out.clear();
    let n = graph.node_count();
    out.resize(n.pow(2).div_ceil(8), 0);
    let mut bit = 0usize;
    for &pi in perm {
        for &pj in perm {
            if pi != pj && graph.has_edge(pi, pj) {
                out[bit / 8] |= 0x80 >> (bit % 8);
            }
            bit += 1;
        }
    }
}

/// Exact canonical code by minimizing over all node permutations.
pub fn canonical_code(graph: &MotifGraph, max_nodes: usize) -> CanonicalCode {
    let n = graph.node_count();
    if n > max_nodes {
        return CanonicalCode(vec![0xFF]);
    }

    let mut best: Option<Vec<u8>> = None;
    let mut scratch = Vec::new();
    let mut perm: Vec<usize> = (0..n).collect();

    // Heap's algorithm enumerates every permutation in place.
    let consider = |perm: &[usize], scratch: &mut Vec<u8>, best: &mut Option<Vec<u8>>| {
        pack_bits(graph, perm, scratch);
        match best {
            Some(b) if scratch.as_slice() >= b.as_slice() => {}
            _ => *best = Some(scratch.clone()),
        }
    };
    consider(&perm, &mut scratch, &mut best);
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            consider(&perm, &mut scratch, &mut best);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }

    let mut bytes = vec![n as u8];
    bytes.extend(best.unwrap_or_default());
    CanonicalCode(bytes)
}

/// Build a user's motif from their stay list: nodes are distinct stay
/// cells, with one edge per observed transition direction.
pub fn build_motif(stay_list: &StayList) -> Result<MotifGraph> {
    if stay_list.is_empty() {
        return Err(Error::NoStays);
    }
    let mut node_of: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    let mut order = Vec::new();
    for stay in &stay_list.stays {
        let id = stay.cell.id();
        let next = node_of.len();
        let idx = *node_of.entry(id).or_insert(next);
        order.push(idx);
    }
    let n = node_of.len();
    let mut edges = Vec::new();
    for pair in order.windows(2) {
        if pair[0] != pair[1] {
            edges.push((pair[0], pair[1]));
        }
    }
    Ok(MotifGraph::from_edges(n, &edges))
}

/// One-hot motif feature: the four dominant cohort classes plus "others".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotifFeature {
    pub one_hot: [f64; 5],
}

/// Encode a class against the cohort's four most frequent classes.
pub fn motif_one_hot(class: &CanonicalCode, cohort_top4: &[CanonicalCode]) -> MotifFeature {
    debug_assert!(cohort_top4.len() <= 4);
    let mut one_hot = [0.0; 5];
    match cohort_top4.iter().position(|c| c == class) {
        Some(i) => one_hot[i] = 1.0,
        None => one_hot[4] = 1.0,
    }
    MotifFeature { one_hot }
}

/// A motif class with its cohort-relative label and frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct MotifClass {
    pub canonical_code: CanonicalCode,
    pub label: String,
    pub count: usize,
}

/// Cohort-level motif census: classes ranked by frequency, labels of the
/// form `MT {n}-{rank}` where rank orders classes of the same node count.
#[derive(Debug, Clone, PartialEq)]
pub struct MotifTable {
    pub classes: Vec<MotifClass>,
}

impl MotifTable {
    /// Count classes over a cohort of canonical codes.
    pub fn from_codes<'a, I: IntoIterator<Item = &'a CanonicalCode>>(codes: I) -> Self {
        let mut counts: BTreeMap<CanonicalCode, usize> = BTreeMap::new();
        for code in codes {
            *counts.entry(code.clone()).or_insert(0) += 1;
        }
        let mut entries: Vec<(CanonicalCode, usize)> = counts.into_iter().collect();
        // Frequency rank with a total, reproducible order.
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

        let mut rank_within_n: BTreeMap<usize, usize> = BTreeMap::new();
        let classes = entries
            .into_iter()
            .map(|(code, count)| {
                let label = match code.node_count() {
                    None => "MT others".to_string(),
                    Some(n) => {
                        let rank = rank_within_n.entry(n).or_insert(0);
                        let label = format!("MT {n}-{rank}");
                        *rank += 1;
                        label
                    }
                };
                MotifClass { canonical_code: code, label, count }
            })
            .collect();
        Self { classes }
    }

    /// The four most frequent classes, oversize sentinel excluded.
    pub fn top4(&self) -> Vec<CanonicalCode> {
        self.classes
            .iter()
            .filter(|c| !c.canonical_code.is_oversize())
            .take(4)
            .map(|c| c.canonical_code.clone())
            .collect()
    }

    pub fn label_of(&self, code: &CanonicalCode) -> Option<&str> {
        self.classes
            .iter()
            .find(|c| &c.canonical_code == code)
            .map(|c| c.label.as_str())
    }

    /// Fraction of users covered by the top four classes.
    pub fn top4_coverage(&self) -> f64 {
        let total: usize = self.classes.iter().map(|c| c.count).sum();
        if total == 0 {
            return 0.0;
        }
        let top4 = self.top4();
        let covered: usize = self
            .classes
            .iter()
            .filter(|c| top4.contains(&c.canonical_code))
            .map(|c| c.count)
            .sum();
        covered as f64 / total as f64
    }

    /// Serialize as `canonical_code_hex,n,label,count` rows.
    pub fn write<W: Write>(&self, mut writer: W, delimiter: char) -> Result<()> {
        for class in &self.classes {
            writeln!(
                writer,
                "{}{d}{}{d}{}{d}{}",
                class.canonical_code.hex(),
                class.canonical_code.node_count().unwrap_or(0),
                class.label,
                class.count,
                d = delimiter
            )?;
        }
        Ok(())
    }
}

/// Radius of gyration over planar km coordinates: the RMS distance of the
/// points from their centroid.
pub fn radius_of_gyration_km(points: &[(f64, f64)]) -> f64 {
    assert!(!points.is_empty());
    let n = points.len() as f64;
    let (mut cx, mut cy) = (0.0, 0.0);
    for &(x, y) in points {
        cx += x;
        cy += y;
    }
    cx /= n;
    cy /= n;
    let mean_sq = points
        .iter()
        .map(|&(x, y)| (x - cx).powi(2) + (y - cy).powi(2))
        .sum::<f64>()
        / n;
    mean_sq.sqrt()
}

/// Radius of gyration of a snapped trajectory, projecting cell centers
/// with the run's grid.
pub fn rog_of_trajectory(traj: &CleanTrajectory, grid: &GridSpec) -> f64 {
    let points: Vec<(f64, f64)> = traj
        .points
        .iter()
        .map(|p| grid.to_planar_km(p.cell.center_lon, p.cell.center_lat))
        .collect();
    radius_of_gyration_km(&points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::SnappedPoint;
    use crate::stays::{detect_stays, StayParams};
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid() -> GridSpec {
        GridSpec::new(150.0, 113.0, 22.0)
    }

    fn stay_list(cells: &[i64]) -> StayList {
        let g = grid();
        let points: Vec<SnappedPoint> = cells
            .iter()
            .enumerate()
            .flat_map(|(i, &ix)| {
                let base = i as i64 * 3600;
                [
                    SnappedPoint { cell: g.cell(ix, 0), t: base },
                    SnappedPoint { cell: g.cell(ix, 0), t: base + 2400 },
                ]
            })
            .collect();
        let traj = CleanTrajectory { user_id: "u".into(), points };
        detect_stays(&traj, &StayParams::default())
    }

    #[test]
    fn commuter_motif_is_two_nodes_both_ways() {
        let g = build_motif(&stay_list(&[0, 5, 0])).unwrap();
        assert_eq!(g.node_count(), 2);
        assert!(g.has_edge(0, 1));
        assert!(g.has_edge(1, 0));
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn single_stay_is_a_lone_node() {
        let g = build_motif(&stay_list(&[3])).unwrap();
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn three_anchor_loop_is_a_directed_cycle() {
        let g = build_motif(&stay_list(&[0, 5, 9, 0])).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 3);
        // One outgoing and one incoming edge per node.
        for u in 0..3 {
            let out: usize = (0..3).filter(|&v| g.has_edge(u, v)).count();
            let inc: usize = (0..3).filter(|&v| g.has_edge(v, u)).count();
            assert_eq!((out, inc), (1, 1));
        }
    }

    #[test]
    fn empty_stay_list_is_an_error() {
        let empty = StayList { user_id: "u".into(), stays: Vec::new() };
        assert!(matches!(build_motif(&empty), Err(Error::NoStays)));
    }

    #[test]
    fn repeated_transitions_collapse() {
        let g = build_motif(&stay_list(&[0, 5, 0, 5, 0])).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn relabeling_preserves_the_code() {
        let g = MotifGraph::from_edges(4, &[(0, 1), (1, 2), (2, 0), (2, 3)]);
        let code = canonical_code(&g, DEFAULT_MAX_MOTIF_NODES);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut perm: Vec<usize> = (0..4).collect();
        for _ in 0..100 {
            perm.shuffle(&mut rng);
            let relabeled = g.relabel(&perm);
            assert_eq!(canonical_code(&relabeled, DEFAULT_MAX_MOTIF_NODES), code);
        }
    }

    #[test]
    fn one_way_and_two_way_pairs_differ() {
        let one_way = MotifGraph::from_edges(2, &[(0, 1)]);
        let two_way = MotifGraph::from_edges(2, &[(0, 1), (1, 0)]);
        assert_ne!(
            canonical_code(&one_way, DEFAULT_MAX_MOTIF_NODES),
            canonical_code(&two_way, DEFAULT_MAX_MOTIF_NODES)
        );
    }

    #[test]
    fn oversize_graph_gets_the_sentinel() {
        let n = DEFAULT_MAX_MOTIF_NODES + 1;
        let edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        let g = MotifGraph::from_edges(n, &edges);
        let code = canonical_code(&g, DEFAULT_MAX_MOTIF_NODES);
        assert!(code.is_oversize());
        assert_eq!(code.node_count(), None);
    }

    #[test]
    fn one_hot_hits_the_matching_slot() {
        let codes: Vec<CanonicalCode> = [
            MotifGraph::from_edges(2, &[(0, 1), (1, 0)]),
            MotifGraph::from_edges(2, &[(0, 1)]),
            MotifGraph::from_edges(3, &[(0, 1), (1, 2), (2, 0)]),
            MotifGraph::from_edges(1, &[]),
        ]
        .iter()
        .map(|g| canonical_code(g, DEFAULT_MAX_MOTIF_NODES))
        .collect();

        let hit = motif_one_hot(&codes[0], &codes);
        assert_eq!(hit.one_hot, [1.0, 0.0, 0.0, 0.0, 0.0]);

        let absent = canonical_code(
            &MotifGraph::from_edges(3, &[(0, 1), (1, 2)]),
            DEFAULT_MAX_MOTIF_NODES,
        );
        let miss = motif_one_hot(&absent, &codes);
        assert_eq!(miss.one_hot, [0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(miss.one_hot.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn table_labels_rank_within_node_count() {
        let two_loop = canonical_code(
            &MotifGraph::from_edges(2, &[(0, 1), (1, 0)]),
            DEFAULT_MAX_MOTIF_NODES,
        );
        let two_arrow =
            canonical_code(&MotifGraph::from_edges(2, &[(0, 1)]), DEFAULT_MAX_MOTIF_NODES);
        let three_cycle = canonical_code(
            &MotifGraph::from_edges(3, &[(0, 1), (1, 2), (2, 0)]),
            DEFAULT_MAX_MOTIF_NODES,
        );
        let codes = [
            two_loop.clone(),
            two_loop.clone(),
            two_loop.clone(),
            three_cycle.clone(),
            three_cycle.clone(),
            two_arrow.clone(),
        ];
        let table = MotifTable::from_codes(codes.iter());
        assert_eq!(table.label_of(&two_loop), Some("MT 2-0"));
        assert_eq!(table.label_of(&two_arrow), Some("MT 2-1"));
        assert_eq!(table.label_of(&three_cycle), Some("MT 3-0"));
        assert_eq!(table.top4().len(), 3);
        assert_eq!(table.top4_coverage(), 1.0);

        let mut buf = Vec::new();
        table.write(&mut buf, ',').unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().count() == 3);
        assert!(text.contains("MT 2-0,3"));
    }

    #[test]
    fn identical_points_have_zero_gyration() {
        assert_eq!(radius_of_gyration_km(&[(3.0, 4.0); 7]), 0.0);
    }

    #[test]
    fn two_points_two_km_apart_give_one_km() {
        let r = radius_of_gyration_km(&[(0.0, 0.0), (2.0, 0.0)]);
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gyration_is_translation_invariant() {
        let pts = [(0.1, 0.4), (2.7, -1.3), (5.0, 8.0), (-3.3, 0.0)];
        let shifted: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (x + 100.0, y - 55.0)).collect();
        let a = radius_of_gyration_km(&pts);
        let b = radius_of_gyration_km(&shifted);
        assert!((a - b).abs() < 1e-9);
    }
}
