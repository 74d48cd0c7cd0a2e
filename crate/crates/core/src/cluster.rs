//! Clustering: single-view k-means (k-means++ / Lloyd), the two-view co-EM
//! variant, and evaluation metrics.
//!
//! The co-EM loop alternates E and M steps across the two feature views:
//! the semantic view's assignments drive the spatiotemporal centroids and
//! vice versa, so each view's structure regularizes the other. The final
//! per-user label is a consensus over both views' distances, normalized by
//! each view's within-cluster variance at termination.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::features::Matrix;
use crate::Result;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// k-means++ seeding: the first center uniform, later centers drawn with
/// probability proportional to squared distance from the chosen set.
fn kmeanspp_init(data: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let n = data.rows;
    let mut centroids = Matrix::zeros(k, data.cols);
    let first = rng.random_range(0..n);
    centroids.row_mut(0).copy_from_slice(data.row(first));

    let mut best_d2: Vec<f64> = (0..n).map(|i| sq_dist(data.row(i), centroids.row(0))).collect();
    for c in 1..k {
        let total: f64 = best_d2.iter().sum();
        let pick = if total > 0.0 {
            let draw = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in best_d2.iter().enumerate() {
                acc += d;
                if draw < acc {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).copy_from_slice(data.row(pick));
        for (i, d) in best_d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(data.row(i), centroids.row(c)));
        }
    }
    centroids
}

/// Nearest-centroid assignment; ties break toward the lower cluster id.
fn assign(data: &Matrix, centroids: &Matrix) -> Vec<usize> {
    (0..data.rows)
        .map(|i| {
            let row = data.row(i);
            let mut best = (0usize, f64::INFINITY);
            for c in 0..centroids.rows {
                let d = sq_dist(row, centroids.row(c));
                if d < best.1 {
                    best = (c, d);
                }
            }
            best.0
        })
        .collect()
}

/// Give every empty cluster the farthest point of the (currently) largest
/// cluster, measured from that cluster's centroid. Keeps k fixed and is
/// deterministic.
fn repair_empty(data: &Matrix, centroids: &Matrix, assignments: &mut [usize], k: usize) {
    loop {
        let mut sizes = vec![0usize; k];
        for &a in assignments.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else { return };
        let donor = (0..k)
            .filter(|&c| sizes[c] >= 2)
            .max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a)))
            .expect("some cluster must have >=2 members when another is empty");
        let farthest = (0..data.rows)
            .filter(|&i| assignments[i] == donor)
            .max_by(|&a, &b| {
                sq_dist(data.row(a), centroids.row(donor))
                    .total_cmp(&sq_dist(data.row(b), centroids.row(donor)))
                    .then(b.cmp(&a))
            })
            .expect("donor cluster is non-empty");
        assignments[farthest] = empty;
    }
}

/// Mean of each cluster's rows, accumulated in fixed row order.
fn update_centroids(data: &Matrix, assignments: &[usize], k: usize) -> Matrix {
    let mut centroids = Matrix::zeros(k, data.cols);
    let mut counts = vec![0usize; k];
    for (i, &a) in assignments.iter().enumerate() {
        counts[a] += 1;
        let row = data.row(i);
        let c = centroids.row_mut(a);
        for j in 0..row.len() {
            c[j] += row[j];
        }
    }
    for (c, &count) in counts.iter().enumerate() {
        if count > 0 {
            let inv = 1.0 / count as f64;
            centroids.row_mut(c).iter_mut().for_each(|v| *v *= inv);
        }
    }
    centroids
}

fn wcss(data: &Matrix, assignments: &[usize], centroids: &Matrix) -> f64 {
    (0..data.rows).map(|i| sq_dist(data.row(i), centroids.row(assignments[i]))).sum()
}

/// Result of a single-view k-means run.
#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub centroids: Matrix,
    pub assignments: Vec<usize>,
    pub iterations: usize,
    /// Within-cluster sum of squares after each Lloyd iteration.
    pub objective_history: Vec<f64>,
}

/// Lloyd's algorithm with k-means++ initialization.
pub fn kmeans(
    data: &Matrix,
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<KMeansResult> {
    if k > data.rows || k == 0 {
        return Err(Error::TooManyClusters { k, rows: data.rows });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeanspp_init(data, k, &mut rng);
    let mut assignments: Vec<usize> = Vec::new();
    let mut history = Vec::new();
    let mut iterations = 0;

    for _ in 0..max_iter {
        iterations += 1;
        let mut next = assign(data, &centroids);
        repair_empty(data, &centroids, &mut next, k);
        let next_centroids = update_centroids(data, &next, k);
        history.push(wcss(data, &next, &next_centroids));

        let shift = (0..k)
            .map(|c| sq_dist(centroids.row(c), next_centroids.row(c)).sqrt())
            .fold(0.0, f64::max);
        let stable = assignments == next;
        assignments = next;
        centroids = next_centroids;
        if stable || shift < tol {
            break;
        }
    }
    Ok(KMeansResult { centroids, assignments, iterations, objective_history: history })
}

/// Fitted two-view model: per-view centroids, consensus labels and the
/// per-view objective traces.
#[derive(Debug, Clone)]
pub struct ClusterModel {
    pub k: usize,
    pub seed: u64,
    pub centroids_st: Matrix,
    pub centroids_sem: Matrix,
    pub assignments: Vec<usize>,
    pub iterations_run: usize,
    pub objective_history_st: Vec<f64>,
    pub objective_history_sem: Vec<f64>,
}

/// Joint nearest-centroid rule: each view's squared distance is weighted by
/// the inverse of that view's mean within-cluster variance. Ties break
/// toward the lower cluster id.
pub fn consensus_assignments(
    view_st: &Matrix,
    view_sem: &Matrix,
    centroids_st: &Matrix,
    centroids_sem: &Matrix,
    sigma2_st: f64,
    sigma2_sem: f64,
) -> Vec<usize> {
    let k = centroids_st.rows;
    let (w_st, w_sem) = (1.0 / sigma2_st.max(1e-12), 1.0 / sigma2_sem.max(1e-12));
    (0..view_st.rows)
        .map(|i| {
            let mut best = (0usize, f64::INFINITY);
            for c in 0..k {
                let d = w_st * sq_dist(view_st.row(i), centroids_st.row(c))
                    + w_sem * sq_dist(view_sem.row(i), centroids_sem.row(c));
                if d < best.1 {
                    best = (c, d);
                }
            }
            best.0
        })
        .collect()
}

/// Two-view k-means via co-EM alternation.
///
/// Centroids initialize in the semantic view (k-means++). Each iteration
/// assigns by the semantic centroids, recomputes the spatiotemporal
/// centroids from that assignment, assigns by those, and closes the loop by
/// recomputing the semantic centroids. The loop stops when the
/// spatiotemporal assignment repeats (or after `max_iter`); the returned
/// labels are the variance-normalized consensus over both views.
pub fn multiview_kmeans(
    view_st: &Matrix,
    view_sem: &Matrix,
    k: usize,
    seed: u64,
    max_iter: usize,
    _tol: f64,
) -> Result<ClusterModel> {
    assert_eq!(view_st.rows, view_sem.rows, "views must be row-aligned");
    if k > view_st.rows || k == 0 {
        return Err(Error::TooManyClusters { k, rows: view_st.rows });
    }
    let n = view_st.rows;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids_sem = kmeanspp_init(view_sem, k, &mut rng);
    let mut centroids_st = Matrix::zeros(k, view_st.cols);
    let mut a_st_prev: Option<Vec<usize>> = None;
    let mut a_st: Vec<usize> = vec![0; n];
    let mut history_st = Vec::new();
    let mut history_sem = Vec::new();
    let mut iterations_run = 0;

    for _ in 0..max_iter {
        iterations_run += 1;

        let mut a_sem = assign(view_sem, &centroids_sem);
        repair_empty(view_sem, &centroids_sem, &mut a_sem, k);
        centroids_st = update_centroids(view_st, &a_sem, k);

        a_st = assign(view_st, &centroids_st);
        repair_empty(view_st, &centroids_st, &mut a_st, k);
        centroids_sem = update_centroids(view_sem, &a_st, k);

        history_st.push(wcss(view_st, &a_st, &centroids_st));
        history_sem.push(wcss(view_sem, &a_st, &centroids_sem));

        if a_st_prev.as_deref() == Some(a_st.as_slice()) {
            break;
        }
        a_st_prev = Some(a_st.clone());
    }

    let sigma2_st = wcss(view_st, &a_st, &centroids_st) / n as f64;
    let sigma2_sem = wcss(view_sem, &a_st, &centroids_sem) / n as f64;
    let assignments = consensus_assignments(
        view_st,
        view_sem,
        &centroids_st,
        &centroids_sem,
        sigma2_st,
        sigma2_sem,
    );

    Ok(ClusterModel {
        k,
        seed,
        centroids_st,
        centroids_sem,
        assignments,
        iterations_run,
        objective_history_st: history_st,
        objective_history_sem: history_sem,
    })
}

/// Adjusted Rand index between two labelings of the same points.
pub fn adjusted_rand_index(labels_a: &[usize], labels_b: &[usize]) -> Result<f64> {
    if labels_a.len() != labels_b.len() {
        return Err(Error::LabelLengthMismatch(labels_a.len(), labels_b.len()));
    }
    let n = labels_a.len();
    assert!(n >= 2, "ARI needs at least 2 points");

    let mut contingency: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut sum_a: BTreeMap<usize, u64> = BTreeMap::new();
    let mut sum_b: BTreeMap<usize, u64> = BTreeMap::new();
    for (&a, &b) in labels_a.iter().zip(labels_b) {
        *contingency.entry((a, b)).or_insert(0) += 1;
        *sum_a.entry(a).or_insert(0) += 1;
        *sum_b.entry(b).or_insert(0) += 1;
    }
    let choose2 = |x: u64| (x * (x - 1) / 2) as f64;
    let index: f64 = contingency.values().map(|&c| choose2(c)).sum();
    let sa: f64 = sum_a.values().map(|&c| choose2(c)).sum();
    let sb: f64 = sum_b.values().map(|&c| choose2(c)).sum();
    let total = choose2(n as u64);
    let expected = sa * sb / total;
    let max_index = (sa + sb) / 2.0;
    if (max_index - expected).abs() < f64::EPSILON {
        // Both partitions are trivially identical in pair structure.
        return Ok(1.0);
    }
    Ok((index - expected) / (max_index - expected))
}

/// Mean silhouette coefficient with Euclidean distance. Singleton-cluster
/// points score 0, as do points with no distance contrast.
pub fn silhouette(view: &Matrix, assignments: &[usize]) -> f64 {
    let n = view.rows;
    assert_eq!(assignments.len(), n);
    let k = assignments.iter().copied().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &a in assignments {
        sizes[a] += 1;
    }

    let mut total = 0.0;
    for i in 0..n {
        let own = assignments[i];
        if sizes[own] <= 1 {
            continue; // scores 0
        }
        let mut sums = vec![0.0f64; k];
        for j in 0..n {
            if i == j {
                continue;
            }
            let d = sq_dist(view.row(i), view.row(j)).sqrt();
            sums[assignments[j]] += d;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        if !b.is_finite() {
            continue;
        }
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    total / n as f64
}

impl ClusterModel {
    /// Persist as a text document: a header line, the per-view centroid
    /// matrices, and the consensus assignment vector.
    pub fn write<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(
            writer,
            "k={} st_cols={} sem_cols={} seed={} iterations={} n={}",
            self.k,
            self.centroids_st.cols,
            self.centroids_sem.cols,
            self.seed,
            self.iterations_run,
            self.assignments.len()
        )?;
        self.centroids_st.write(&mut writer, ',')?;
        self.centroids_sem.write(&mut writer, ',')?;
        let labels: Vec<String> = self.assignments.iter().map(|a| a.to_string()).collect();
        writeln!(writer, "{}", labels.join(","))?;
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse { line: 1, message: "missing model header".into() })??;
        let mut fields: BTreeMap<&str, u64> = BTreeMap::new();
        for token in header.split_whitespace() {
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: 1, message: "bad header".into() })?;
            let v = value
                .parse::<u64>()
                .map_err(|_| Error::Parse { line: 1, message: "bad header value".into() })?;
            fields.insert(key, v);
        }
        let need = |k: &str| -> Result<u64> {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::Parse { line: 1, message: format!("missing {k}") })
        };
        let k = need("k")? as usize;
        let seed = need("seed")?;
        let iterations_run = need("iterations")? as usize;

        let mut read_matrix = |rows: usize| -> Result<Matrix> {
            let mut rws = Vec::with_capacity(rows);
            for _ in 0..rows {
                let line = lines
                    .next()
                    .ok_or_else(|| Error::Parse { line: 0, message: "truncated model".into() })??;
                let row: Option<Vec<f64>> =
                    line.split(',').map(|t| t.trim().parse::<f64>().ok()).collect();
                rws.push(row.ok_or_else(|| Error::Parse {
                    line: 0,
                    message: "bad centroid value".into(),
                })?);
            }
            Ok(Matrix::from_rows(&rws))
        };
        let centroids_st = read_matrix(k)?;
        let centroids_sem = read_matrix(k)?;
        let assignment_line = lines
            .next()
            .ok_or_else(|| Error::Parse { line: 0, message: "missing assignments".into() })??;
        let assignments: Option<Vec<usize>> =
            assignment_line.split(',').map(|t| t.trim().parse::<usize>().ok()).collect();
        let assignments = assignments
            .ok_or_else(|| Error::Parse { line: 0, message: "bad assignment value".into() })?;

        Ok(Self {
            k,
            seed,
            centroids_st,
            centroids_sem,
            assignments,
            iterations_run,
            objective_history_st: Vec::new(),
            objective_history_sem: Vec::new(),
        })
    }
}
