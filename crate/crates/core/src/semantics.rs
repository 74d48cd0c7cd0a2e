//! Activity semantics: stay-to-place matching, tag embeddings, and the
//! per-user semantic features built on them.
//!
//! Stays are matched to POI/AOI tags by spatial proximity (AOI containment
//! first, nearest in-radius POI otherwise). Per-user tag sequences form the
//! corpus for a CBOW embedding with negative sampling, trained from scratch
//! in a single-threaded deterministic pass so fixed seeds give bitwise
//! reproducible tables.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::geo::{haversine_km, GridSpec};
use crate::ingest::PoiRecord;
use crate::stays::StayList;
use crate::Result;

/// Tag recorded for stays with no POI or AOI nearby. It participates in
/// embedding training like any other tag.
pub const UNKNOWN_TAG: &str = "unknown";

/// A user's chronological stay tags, one per stay.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivitySemantic {
    pub user_id: String,
    pub tags: Vec<String>,
}

/// Even-odd point-in-polygon test on raw lon/lat coordinates.
fn point_in_ring(px: f64, py: f64, ring: &[(f64, f64)]) -> bool {
    let mut inside = false;
    let n = ring.len();
    for i in 0..n {
        let (x1, y1) = ring[i];
        let (x2, y2) = ring[(i + 1) % n];
        if (y1 > py) != (y2 > py) && px < (x2 - x1) * (py - y1) / (y2 - y1) + x1 {
            inside = !inside;
        }
    }
    inside
}

/// Absolute ring area in square meters, via the shoelace formula in the
/// run's planar projection.
fn ring_area_m2(ring: &[(f64, f64)], grid: &GridSpec) -> f64 {
    let pts: Vec<(f64, f64)> = ring.iter().map(|&(lon, lat)| grid.to_planar_m(lon, lat)).collect();
    let mut acc = 0.0;
    for i in 0..pts.len() {
        let (x1, y1) = pts[i];
        let (x2, y2) = pts[(i + 1) % pts.len()];
        acc += x1 * y2 - x2 * y1;
    }
    acc.abs() / 2.0
}

/// Match each stay to a semantic tag.
///
/// An AOI containing the stay's cell center always wins, the smallest such
/// area first; otherwise the nearest point POI within `search_radius_m`;
/// otherwise [`UNKNOWN_TAG`]. All ties break lexicographically by tag so
/// fixed inputs give fixed outputs.
pub fn match_semantics(
    stay_list: &StayList,
    pois: &[PoiRecord],
    search_radius_m: f64,
    grid: &GridSpec,
) -> ActivitySemantic {
    let tags = stay_list
        .stays
        .iter()
        .map(|stay| {
            let (cx, cy) = (stay.cell.center_lon, stay.cell.center_lat);

            let mut best_aoi: Option<(f64, &str)> = None;
            for poi in pois {
                if let Some(ring) = &poi.polygon {
                    if point_in_ring(cx, cy, ring) {
                        let key = (ring_area_m2(ring, grid), poi.tag.as_str());
                        best_aoi = Some(match best_aoi {
                            Some(b) if b <= key => b,
                            _ => key,
                        });
                    }
                }
            }
            if let Some((_, tag)) = best_aoi {
                return tag.to_string();
            }

            let mut best_poi: Option<(f64, &str)> = None;
            for poi in pois {
                if poi.polygon.is_some() {
                    continue;
                }
                let d = haversine_km(cx, cy, poi.lon, poi.lat) * 1000.0;
                if d <= search_radius_m {
                    let key = (d, poi.tag.as_str());
                    best_poi = Some(match best_poi {
                        Some(b) if b <= key => b,
                        _ => key,
                    });
                }
            }
            match best_poi {
                Some((_, tag)) => tag.to_string(),
                None => UNKNOWN_TAG.to_string(),
            }
        })
        .collect();
    ActivitySemantic { user_id: stay_list.user_id.clone(), tags }
}

/// Tag vectors from CBOW training; the input-side table.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub dim: usize,
    pub seed: u64,
    pub vectors: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn get(&self, tag: &str) -> Option<&[f64]> {
        self.vectors.get(tag).map(|v| v.as_slice())
    }

    /// Serialize as a `dim=.. vocab=.. seed=..` header followed by one
    /// `tag v_1 .. v_dim` row per tag.
    pub fn write<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "dim={} vocab={} seed={}", self.dim, self.vectors.len(), self.seed)?;
        for (tag, vector) in &self.vectors {
            write!(writer, "{tag}")?;
            for v in vector {
                write!(writer, " {v}")?;
            }
            writeln!(writer)?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse { line: 1, message: "missing header".into() })??;
        let mut dim = None;
        let mut seed = None;
        for token in header.split_whitespace() {
            match token.split_once('=') {
                Some(("dim", v)) => dim = v.parse::<usize>().ok(),
                Some(("seed", v)) => seed = v.parse::<u64>().ok(),
                Some(("vocab", _)) => {}
                _ => {
                    return Err(Error::Parse {
                        line: 1,
                        message: format!("bad header token {token:?}"),
                    })
                }
            }
        }
        let dim = dim.ok_or_else(|| Error::Parse { line: 1, message: "missing dim".into() })?;
        let seed = seed.ok_or_else(|| Error::Parse { line: 1, message: "missing seed".into() })?;

        let mut vectors = BTreeMap::new();
        for (idx, line) in lines.enumerate() {
            let line = line?;
            let lineno = idx + 2;
            if line.trim().is_empty() {
                continue;
            }
            // Tags may contain spaces; the vector is the trailing `dim`
            // whitespace-separated tokens.
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() <= dim {
                return Err(Error::Parse { line: lineno, message: "row shorter than dim".into() });
            }
            let split = tokens.len() - dim;
            let tag = tokens[..split].join(" ");
            let vector: Option<Vec<f64>> =
                tokens[split..].iter().map(|t| t.parse::<f64>().ok()).collect();
            let vector = vector
                .ok_or_else(|| Error::Parse { line: lineno, message: "bad vector value".into() })?;
            vectors.insert(tag, vector);
        }
        Ok(Self { dim, seed, vectors })
    }
}

/// CBOW training hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct CbowParams {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr0: f64,
    pub seed: u64,
}

impl Default for CbowParams {
    fn default() -> Self {
        Self { dim: 80, window: 2, negatives: 5, epochs: 10, lr0: 0.025, seed: 1 }
    }
}

/// A trained model: the embedding table plus per-epoch mean loss for
/// convergence diagnostics.
#[derive(Debug, Clone)]
pub struct CbowModel {
    pub table: EmbeddingTable,
    pub epoch_loss: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Numerically stable `-ln(sigmoid(x))`.
fn neg_log_sigmoid(x: f64) -> f64 {
    (-x).max(0.0) + (1.0 + (-x.abs()).exp()).ln()
}

/// Train CBOW-with-negative-sampling embeddings over per-user tag
/// sequences.
///
/// The context is the mean input vector of tags within `window` positions
/// on either side of the center, inside one sequence. Noise tags follow
/// the unigram distribution raised to 0.75, the learning rate decays
/// linearly from `lr0` to `lr0 / 100`, and the input table initializes
/// uniformly in `[-0.5/dim, 0.5/dim]` from the seed. The pass is strictly
/// sequential, so equal seeds give bitwise-identical tables.
pub fn train_cbow(corpus: &[Vec<String>], params: &CbowParams) -> Result<CbowModel> {
    let dim = params.dim;
    let mut vocab: Vec<String> = corpus.iter().flatten().cloned().collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    vocab.sort();
    if vocab.len() < 2 {
        return Err(Error::DegenerateVocabulary);
    }
    let index_of: BTreeMap<&str, usize> =
        vocab.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();

    let mut counts = vec![0u64; vocab.len()];
    for seq in corpus {
        for tag in seq {
            counts[index_of[tag.as_str()]] += 1;
        }
    }
    // Cumulative unigram^0.75 noise distribution.
    let mut noise_cdf = Vec::with_capacity(vocab.len());
    let mut acc = 0.0;
    for &c in &counts {
        acc += (c as f64).powf(0.75);
        noise_cdf.push(acc);
    }
    let noise_total = acc;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let span = 0.5 / dim as f64;
    let mut input: Vec<f64> = (0..vocab.len() * dim)
        .map(|_| rng.random_range(-span..span))
        .collect();
    let mut output = vec![0.0f64; vocab.len() * dim];

    let sequences: Vec<Vec<usize>> = corpus
        .iter()
        .filter(|seq| seq.len() >= 2)
        .map(|seq| seq.iter().map(|t| index_of[t.as_str()]).collect())
        .collect();
    let centers_per_epoch: usize = sequences.iter().map(|s| s.len()).sum();
    let total_centers = (params.epochs * centers_per_epoch).max(1);

    let mut epoch_loss = Vec::with_capacity(params.epochs);
    let mut processed = 0usize;
    let mut hidden = vec![0.0f64; dim];
    let mut error = vec![0.0f64; dim];

    for _ in 0..params.epochs {
        let mut loss_sum = 0.0;
        let mut loss_count = 0usize;
        for seq in &sequences {
            for (i, &center) in seq.iter().enumerate() {
                let lr = params.lr0
                    * (1.0 - 0.99 * processed as f64 / total_centers as f64);
                processed += 1;

                let lo = i.saturating_sub(params.window);
                let hi = (i + params.window).min(seq.len() - 1);
                let context: Vec<usize> =
                    (lo..=hi).filter(|&j| j != i).map(|j| seq[j]).collect();
                if context.is_empty() {
                    continue;
                }

                hidden.iter_mut().for_each(|h| *h = 0.0);
                for &c in &context {
                    for d in 0..dim {
                        hidden[d] += input[c * dim + d];
                    }
                }
                let inv = 1.0 / context.len() as f64;
                hidden.iter_mut().for_each(|h| *h *= inv);

                error.iter_mut().for_each(|e| *e = 0.0);
                for sample in 0..=params.negatives {
                    let (target, label) = if sample == 0 {
                        (center, 1.0)
                    } else {
                        let draw = rng.random::<f64>() * noise_total;
                        let target = noise_cdf.partition_point(|&c| c < draw).min(vocab.len() - 1);
                        if target == center {
                            continue;
                        }
                        (target, 0.0)
                    };
                    let f: f64 =
                        (0..dim).map(|d| hidden[d] * output[target * dim + d]).sum();
                    loss_sum += if label == 1.0 { neg_log_sigmoid(f) } else { neg_log_sigmoid(-f) };
                    let g = (label - sigmoid(f)) * lr;
                    for d in 0..dim {
                        error[d] += g * output[target * dim + d];
                        output[target * dim + d] += g * hidden[d];
                    }
                }
                loss_count += 1;
                for &c in &context {
                    for d in 0..dim {
                        input[c * dim + d] += error[d];
                    }
                }
            }
        }
        epoch_loss.push(if loss_count == 0 { 0.0 } else { loss_sum / loss_count as f64 });
    }

    let vectors = vocab
        .iter()
        .enumerate()
        .map(|(i, tag)| (tag.clone(), input[i * dim..(i + 1) * dim].to_vec()))
        .collect();
    Ok(CbowModel {
        table: EmbeddingTable { dim, seed: params.seed, vectors },
        epoch_loss,
    })
}

/// Per-user semantic features over the embedding table.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticFeatures {
    /// Number of distinct tags in the user's list.
    pub n_uas: usize,
    /// Mean of the per-stay vectors, duplicates weighted by occurrence.
    pub m_as: Vec<f64>,
    /// Maximum Euclidean distance between any two distinct tags' vectors.
    pub m_sd: f64,
}

/// Distance used for the max-semantic-distance feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MsdMetric {
    /// Euclidean distance, consistent with the k-means geometry downstream.
    #[default]
    Euclidean,
    /// Cosine distance (1 - cosine similarity).
    Cosine,
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    1.0 - dot / (na * nb)
}

/// Compute `n_uas`, `m_as` and `m_sd` for one user (Euclidean `m_sd`).
pub fn semantic_features(
    semantic: &ActivitySemantic,
    table: &EmbeddingTable,
) -> Result<SemanticFeatures> {
    semantic_features_with(semantic, table, MsdMetric::Euclidean)
}

/// As [`semantic_features`], with an explicit `m_sd` metric.
pub fn semantic_features_with(
    semantic: &ActivitySemantic,
    table: &EmbeddingTable,
    metric: MsdMetric,
) -> Result<SemanticFeatures> {
    if semantic.tags.is_empty() {
        return Err(Error::NoStays);
    }
    let mut m_as = vec![0.0; table.dim];
    for tag in &semantic.tags {
        let v = table.get(tag).ok_or_else(|| Error::MissingTag(tag.clone()))?;
        for (acc, x) in m_as.iter_mut().zip(v) {
            *acc += x;
        }
    }
    let inv = 1.0 / semantic.tags.len() as f64;
    m_as.iter_mut().for_each(|x| *x *= inv);

    let unique: Vec<&str> = {
        let set: std::collections::BTreeSet<&str> =
            semantic.tags.iter().map(|t| t.as_str()).collect();
        set.into_iter().collect()
    };
    let mut m_sd = 0.0f64;
    for i in 0..unique.len() {
        for j in i + 1..unique.len() {
            let (a, b) = (table.get(unique[i]).unwrap(), table.get(unique[j]).unwrap());
            let d = match metric {
                MsdMetric::Euclidean => euclidean(a, b),
                MsdMetric::Cosine => cosine_distance(a, b),
            };
            m_sd = m_sd.max(d);
        }
    }
    Ok(SemanticFeatures { n_uas: unique.len(), m_as, m_sd })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GridSpec;
    use crate::ingest::SnappedPoint;
    use crate::stays::{detect_stays, StayParams};
    use crate::ingest::CleanTrajectory;

    fn grid() -> GridSpec {
        GridSpec::new(150.0, 113.0, 22.0)
    }

    fn one_stay_at(ix: i64, iy: i64) -> StayList {
        let g = grid();
        let traj = CleanTrajectory {
            user_id: "u".into(),
            points: vec![
                SnappedPoint { cell: g.cell(ix, iy), t: 0 },
                SnappedPoint { cell: g.cell(ix, iy), t: 3600 },
            ],
        };
        detect_stays(&traj, &StayParams::default())
    }

    fn square_around(lon: f64, lat: f64, half_m: f64) -> Vec<(f64, f64)> {
        let g = grid();
        let (x, y) = g.to_planar_m(lon, lat);
        [
            (x - half_m, y - half_m),
            (x + half_m, y - half_m),
            (x + half_m, y + half_m),
            (x - half_m, y + half_m),
        ]
        .iter()
        .map(|&(px, py)| g.to_lon_lat(px, py))
        .collect()
    }

    #[test]
    fn aoi_containment_beats_nearer_pois() {
        let g = grid();
        let stays = one_stay_at(2, 2);
        let center = stays.stays[0].cell;
        let ring = square_around(center.center_lon, center.center_lat, 400.0);
        let pois = vec![
            PoiRecord {
                tag: "industrial park".into(),
                lon: center.center_lon,
                lat: center.center_lat,
                polygon: Some(ring),
            },
            // A point POI essentially on top of the stay.
            PoiRecord {
                tag: "residence".into(),
                lon: center.center_lon,
                lat: center.center_lat,
                polygon: None,
            },
        ];
        let semantic = match_semantics(&stays, &pois, 200.0, &g);
        assert_eq!(semantic.tags, vec!["industrial park".to_string()]);
    }

    #[test]
    fn smallest_containing_aoi_wins() {
        let g = grid();
        let stays = one_stay_at(2, 2);
        let center = stays.stays[0].cell;
        let pois = vec![
            PoiRecord {
                tag: "campus".into(),
                lon: center.center_lon,
                lat: center.center_lat,
                polygon: Some(square_around(center.center_lon, center.center_lat, 800.0)),
            },
            PoiRecord {
                tag: "library".into(),
                lon: center.center_lon,
                lat: center.center_lat,
                polygon: Some(square_around(center.center_lon, center.center_lat, 100.0)),
            },
        ];
        let semantic = match_semantics(&stays, &pois, 200.0, &g);
        assert_eq!(semantic.tags, vec!["library".to_string()]);
    }

    #[test]
    fn nearest_poi_within_radius_wins() {
        let g = grid();
        let stays = one_stay_at(0, 0);
        let center = stays.stays[0].cell;
        let (cx, cy) = g.to_planar_m(center.center_lon, center.center_lat);
        let at = |dx: f64| g.to_lon_lat(cx + dx, cy);
        let pois = vec![
            PoiRecord { tag: "residence".into(), lon: at(50.0).0, lat: at(50.0).1, polygon: None },
            PoiRecord { tag: "park".into(), lon: at(120.0).0, lat: at(120.0).1, polygon: None },
        ];
        let semantic = match_semantics(&stays, &pois, 200.0, &g);
        assert_eq!(semantic.tags, vec!["residence".to_string()]);
    }

    #[test]
    fn out_of_radius_poi_is_unknown() {
        let g = grid();
        let stays = one_stay_at(0, 0);
        let center = stays.stays[0].cell;
        let (cx, cy) = g.to_planar_m(center.center_lon, center.center_lat);
        let (lon, lat) = g.to_lon_lat(cx + 350.0, cy);
        let pois = vec![PoiRecord { tag: "park".into(), lon, lat, polygon: None }];
        let semantic = match_semantics(&stays, &pois, 200.0, &g);
        assert_eq!(semantic.tags, vec![UNKNOWN_TAG.to_string()]);
    }

    #[test]
    fn empty_poi_set_matches_all_unknown() {
        let g = grid();
        let stays = one_stay_at(0, 0);
        let semantic = match_semantics(&stays, &[], 200.0, &g);
        assert_eq!(semantic.tags, vec![UNKNOWN_TAG.to_string()]);
    }

    fn two_community_corpus(seqs_per_side: usize, seq_len: usize) -> Vec<Vec<String>> {
        // Tags co-occur only within their community.
        let a: Vec<String> = (0..4).map(|i| format!("a{i}")).collect();
        let b: Vec<String> = (0..4).map(|i| format!("b{i}")).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut corpus = Vec::new();
        for s in 0..seqs_per_side * 2 {
            let side = if s % 2 == 0 { &a } else { &b };
            let seq: Vec<String> =
                (0..seq_len).map(|_| side[rng.random_range(0..side.len())].clone()).collect();
            corpus.push(seq);
        }
        corpus
    }

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    #[test]
    fn fixed_seed_training_is_bitwise_reproducible() {
        let corpus = two_community_corpus(20, 6);
        let params = CbowParams { dim: 16, epochs: 2, ..CbowParams::default() };
        let a = train_cbow(&corpus, &params).unwrap();
        let b = train_cbow(&corpus, &params).unwrap();
        assert_eq!(a.table, b.table);
    }

    #[test]
    fn communities_separate_in_cosine_similarity() {
        let corpus = two_community_corpus(100, 8);
        let params = CbowParams { dim: 32, epochs: 8, ..CbowParams::default() };
        let model = train_cbow(&corpus, &params).unwrap();
        let table = &model.table;

        let tags: Vec<&String> = table.vectors.keys().collect();
        let mut intra = Vec::new();
        let mut inter = Vec::new();
        for i in 0..tags.len() {
            for j in i + 1..tags.len() {
                let c = cosine(table.get(tags[i]).unwrap(), table.get(tags[j]).unwrap());
                if tags[i].as_bytes()[0] == tags[j].as_bytes()[0] {
                    intra.push(c);
                } else {
                    inter.push(c);
                }
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(
            mean(&intra) - mean(&inter) >= 0.2,
            "intra {} inter {}",
            mean(&intra),
            mean(&inter)
        );
    }

    #[test]
    fn epoch_loss_does_not_increase_early() {
        let corpus = two_community_corpus(100, 8);
        let params = CbowParams { dim: 32, epochs: 3, ..CbowParams::default() };
        let model = train_cbow(&corpus, &params).unwrap();
        assert!(model.epoch_loss.len() == 3);
        assert!(model.epoch_loss[1] <= model.epoch_loss[0] * 1.01);
        assert!(model.epoch_loss[2] <= model.epoch_loss[1] * 1.01);
    }

    #[test]
    fn vectors_have_the_requested_dim() {
        let corpus = two_community_corpus(10, 5);
        let model = train_cbow(&corpus, &CbowParams::default()).unwrap();
        assert!(model.table.vectors.values().all(|v| v.len() == 80));
    }

    #[test]
    fn degenerate_vocabulary_is_an_error() {
        let corpus = vec![vec!["only".to_string(), "only".to_string()]];
        assert!(matches!(
            train_cbow(&corpus, &CbowParams::default()),
            Err(Error::DegenerateVocabulary)
        ));
    }

    #[test]
    fn table_roundtrips_through_text() {
        let corpus = two_community_corpus(10, 5);
        let params = CbowParams { dim: 8, epochs: 1, ..CbowParams::default() };
        let model = train_cbow(&corpus, &params).unwrap();
        let mut buf = Vec::new();
        model.table.write(&mut buf).unwrap();
        let back = EmbeddingTable::read(std::io::Cursor::new(&buf)).unwrap();
        assert_eq!(back, model.table);
    }

    #[test]
    fn tags_with_spaces_roundtrip() {
        let table = EmbeddingTable {
            dim: 3,
            seed: 5,
            vectors: [
                ("quick service restaurant".to_string(), vec![0.125, -1.5, 3.0]),
                ("park".to_string(), vec![1.0, 2.0, -0.25]),
            ]
            .into_iter()
            .collect(),
        };
        let mut buf = Vec::new();
        table.write(&mut buf).unwrap();
        let back = EmbeddingTable::read(std::io::Cursor::new(&buf)).unwrap();
        assert_eq!(back, table);
    }

    fn tiny_table() -> EmbeddingTable {
        EmbeddingTable {
            dim: 2,
            seed: 0,
            vectors: [
                ("a".to_string(), vec![1.0, 0.0]),
                ("b".to_string(), vec![0.0, 1.0]),
                ("c".to_string(), vec![-1.0, 0.0]),
            ]
            .into_iter()
            .collect(),
        }
    }

    #[test]
    fn single_tag_features_are_degenerate() {
        let semantic = ActivitySemantic {
            user_id: "u".into(),
            tags: vec!["a".into(), "a".into(), "a".into()],
        };
        let f = semantic_features(&semantic, &tiny_table()).unwrap();
        assert_eq!(f.n_uas, 1);
        assert_eq!(f.m_as, vec![1.0, 0.0]);
        assert_eq!(f.m_sd, 0.0);
    }

    #[test]
    fn duplicates_weight_the_mean() {
        let semantic = ActivitySemantic {
            user_id: "u".into(),
            tags: vec!["a".into(), "a".into(), "b".into()],
        };
        let f = semantic_features(&semantic, &tiny_table()).unwrap();
        assert_eq!(f.n_uas, 2);
        assert!((f.m_as[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((f.m_as[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn max_distance_over_distinct_tags() {
        let semantic = ActivitySemantic {
            user_id: "u".into(),
            tags: vec!["a".into(), "b".into(), "c".into(), "b".into()],
        };
        let f = semantic_features(&semantic, &tiny_table()).unwrap();
        // a-c are 2 apart, the largest pair.
        assert_eq!(f.m_sd, 2.0);
    }

    #[test]
    fn cosine_metric_is_available() {
        let semantic = ActivitySemantic {
            user_id: "u".into(),
            tags: vec!["a".into(), "b".into(), "c".into()],
        };
        let f =
            semantic_features_with(&semantic, &tiny_table(), MsdMetric::Cosine).unwrap();
        // a and c are antipodal: cosine distance 2.
        assert!((f.m_sd - 2.0).abs() < 1e-12);
    }

    #[test]
    fn missing_tag_is_reported_by_name() {
        let semantic = ActivitySemantic { user_id: "u".into(), tags: vec!["zz".into()] };
        match semantic_features(&semantic, &tiny_table()) {
            Err(Error::MissingTag(tag)) => assert_eq!(tag, "zz"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_semantic_is_an_error() {
        let semantic = ActivitySemantic { user_id: "u".into(), tags: Vec::new() };
        assert!(matches!(semantic_features(&semantic, &tiny_table()), Err(Error::NoStays)));
    }
}
