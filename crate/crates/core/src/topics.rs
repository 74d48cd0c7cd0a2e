//! LDA topic model over activity semantics, trained by collapsed Gibbs
//! sampling, plus the per-cluster topic report used to validate cluster
//! interpretations.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::features::Matrix;
use crate::Result;

/// LDA hyperparameters. `alpha` defaults to `50 / n_topics` when unset.
#[derive(Debug, Clone, Copy)]
pub struct LdaParams {
    pub n_topics: usize,
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iters: usize,
    pub burn_in: usize,
    pub sample_every: usize,
    pub seed: u64,
}

impl Default for LdaParams {
    fn default() -> Self {
        Self {
            n_topics: 12,
            alpha: None,
            beta: 0.01,
            iters: 1000,
            burn_in: 500,
            sample_every: 10,
            seed: 1,
        }
    }
}

/// A fitted topic model. Rows of both distributions sum to 1.
#[derive(Debug, Clone)]
pub struct TopicModel {
    pub n_topics: usize,
    pub vocab: Vec<String>,
    /// `n_topics x vocab` row-stochastic matrix.
    pub topic_word: Matrix,
    /// `n_docs x n_topics` row-stochastic matrix.
    pub doc_topic: Matrix,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
}

struct GibbsState {
    n_topics: usize,
    vocab_size: usize,
    alpha: f64,
    beta: f64,
    docs: Vec<Vec<usize>>,
    topic_of: Vec<Vec<usize>>,
    n_dk: Vec<u64>,
    n_kw: Vec<u64>,
    n_k: Vec<u64>,
}

impl GibbsState {
    fn init(docs: Vec<Vec<usize>>, n_topics: usize, vocab_size: usize, alpha: f64, beta: f64, rng: &mut ChaCha8Rng) -> Self {
        let n_docs = docs.len();
        let mut state = Self {
            n_topics,
            vocab_size,
            alpha,
            beta,
            topic_of: docs.iter().map(|d| vec![0; d.len()]).collect(),
            docs,
            n_dk: vec![0; n_docs * n_topics],
            n_kw: vec![0; n_topics * vocab_size],
            n_k: vec![0; n_topics],
        };
        for d in 0..state.docs.len() {
            for pos in 0..state.docs[d].len() {
                let k = rng.random_range(0..n_topics);
                state.topic_of[d][pos] = k;
                state.add(d, pos, k);
            }
        }
        state
    }

    fn add(&mut self, d: usize, pos: usize, k: usize) {
        let w = self.docs[d][pos];
        self.n_dk[d * self.n_topics + k] += 1;
        self.n_kw[k * self.vocab_size + w] += 1;
        self.n_k[k] += 1;
    }

    fn remove(&mut self, d: usize, pos: usize, k: usize) {
        let w = self.docs[d][pos];
        self.n_dk[d * self.n_topics + k] -= 1;
        self.n_kw[k * self.vocab_size + w] -= 1;
        self.n_k[k] -= 1;
    }

    /// One full sweep over every token's topic assignment.
    fn sweep(&mut self, rng: &mut ChaCha8Rng, weights: &mut Vec<f64>) {
        let v_beta = self.vocab_size as f64 * self.beta;
        for d in 0..self.docs.len() {
            for pos in 0..self.docs[d].len() {
                let old = self.topic_of[d][pos];
                self.remove(d, pos, old);
                let w = self.docs[d][pos];

                weights.clear();
                let mut total = 0.0;
                for k in 0..self.n_topics {
                    let p = (self.n_dk[d * self.n_topics + k] as f64 + self.alpha)
                        * (self.n_kw[k * self.vocab_size + w] as f64 + self.beta)
                        / (self.n_k[k] as f64 + v_beta);
                    total += p;
                    weights.push(total);
                }
                let draw = rng.random::<f64>() * total;
                let new = weights.partition_point(|&c| c <= draw).min(self.n_topics - 1);
                self.topic_of[d][pos] = new;
                self.add(d, pos, new);
            }
        }
    }

    #[cfg(test)]
    fn total_tokens(&self) -> (u64, u64, u64) {
        (
            self.n_dk.iter().sum(),
            self.n_kw.iter().sum(),
            self.n_k.iter().sum(),
        )
    }

    /// Current posterior point estimates (phi, theta).
    fn estimate(&self) -> (Matrix, Matrix) {
        let v_beta = self.vocab_size as f64 * self.beta;
        let k_alpha = self.n_topics as f64 * self.alpha;
        let mut phi = Matrix::zeros(self.n_topics, self.vocab_size);
        for k in 0..self.n_topics {
            let denom = self.n_k[k] as f64 + v_beta;
            for (w, v) in phi.row_mut(k).iter_mut().enumerate() {
                *v = (self.n_kw[k * self.vocab_size + w] as f64 + self.beta) / denom;
            }
        }
        let mut theta = Matrix::zeros(self.docs.len(), self.n_topics);
        for d in 0..self.docs.len() {
            let n_d: u64 = (0..self.n_topics).map(|k| self.n_dk[d * self.n_topics + k]).sum();
            let denom = n_d as f64 + k_alpha;
            for (k, v) in theta.row_mut(d).iter_mut().enumerate() {
                *v = (self.n_dk[d * self.n_topics + k] as f64 + self.alpha) / denom;
            }
        }
        (phi, theta)
    }
}

fn normalize_rows(m: &mut Matrix) {
    for i in 0..m.rows {
        let row = m.row_mut(i);
        let sum: f64 = row.iter().sum();
        if sum > 0.0 {
            row.iter_mut().for_each(|x| *x /= sum);
        }
    }
}

/// Train an LDA model over per-user tag documents with collapsed Gibbs
/// sampling. Distributions are averaged over every `sample_every`-th sweep
/// after burn-in; fixed seeds give identical models.
pub fn train_lda(corpus: &[Vec<String>], params: &LdaParams) -> Result<TopicModel> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let vocab: Vec<String> = corpus
        .iter()
        .flatten()
        .cloned()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    if vocab.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let index_of: BTreeMap<&str, usize> =
        vocab.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let docs: Vec<Vec<usize>> =
        corpus.iter().map(|doc| doc.iter().map(|t| index_of[t.as_str()]).collect()).collect();

    let alpha = params.alpha.unwrap_or(50.0 / params.n_topics as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut state =
        GibbsState::init(docs, params.n_topics, vocab.len(), alpha, params.beta, &mut rng);

    let mut phi_acc = Matrix::zeros(params.n_topics, vocab.len());
    let mut theta_acc = Matrix::zeros(corpus.len(), params.n_topics);
    let mut samples = 0usize;
    let mut weights = Vec::with_capacity(params.n_topics);

    for sweep in 1..=params.iters {
        state.sweep(&mut rng, &mut weights);
        if sweep > params.burn_in && (sweep - params.burn_in).is_multiple_of(params.sample_every) {
            let (phi, theta) = state.estimate();
            for (a, x) in phi_acc.data.iter_mut().zip(&phi.data) {
                *a += x;
            }
            for (a, x) in theta_acc.data.iter_mut().zip(&theta.data) {
                *a += x;
            }
            samples += 1;
        }
    }
    let (mut topic_word, mut doc_topic) = if samples == 0 {
        state.estimate()
    } else {
        let inv = 1.0 / samples as f64;
        phi_acc.data.iter_mut().for_each(|x| *x *= inv);
        theta_acc.data.iter_mut().for_each(|x| *x *= inv);
        (phi_acc, theta_acc)
    };
    normalize_rows(&mut topic_word);
    normalize_rows(&mut doc_topic);

    Ok(TopicModel {
        n_topics: params.n_topics,
        vocab,
        topic_word,
        doc_topic,
        alpha,
        beta: params.beta,
        seed: params.seed,
    })
}

impl TopicModel {
    /// Default display label per topic: its highest-probability tag.
    pub fn default_labels(&self) -> Vec<String> {
        (0..self.n_topics)
            .map(|k| {
                let row = self.topic_word.row(k);
                let best = (0..self.vocab.len())
                    .max_by(|&a, &b| row[a].total_cmp(&row[b]).then(b.cmp(&a)))
                    .unwrap_or(0);
                self.vocab[best].clone()
            })
            .collect()
    }
}

/// One cluster's dominant topics.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterTopicRow {
    pub cluster: usize,
    /// Top topics as (label, weight), weights descending, at most four.
    pub top: Vec<(String, f64)>,
    /// Sum of the listed weights.
    pub aggregate: f64,
    pub empty: bool,
}

/// Per-cluster topic weights in the order of cluster ids.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterTopicReport {
    pub rows: Vec<ClusterTopicRow>,
}

/// Average members' topic mixtures per cluster and keep each cluster's top
/// four topics. Labels default to each topic's most probable tag.
pub fn cluster_topic_report(
    model: &TopicModel,
    assignments: &[usize],
    topic_labels: Option<&[String]>,
) -> ClusterTopicReport {
    assert_eq!(assignments.len(), model.doc_topic.rows, "assignments must align with documents");
    let labels = match topic_labels {
        Some(l) => l.to_vec(),
        None => model.default_labels(),
    };
    let k_clusters = assignments.iter().copied().max().map_or(0, |m| m + 1);
    let mut rows = Vec::with_capacity(k_clusters);
    for c in 0..k_clusters {
        let members: Vec<usize> =
            (0..assignments.len()).filter(|&i| assignments[i] == c).collect();
        if members.is_empty() {
            rows.push(ClusterTopicRow { cluster: c, top: Vec::new(), aggregate: 0.0, empty: true });
            continue;
        }
        let mut mean = vec![0.0; model.n_topics];
        for &d in &members {
            for (m, x) in mean.iter_mut().zip(model.doc_topic.row(d)) {
                *m += x;
            }
        }
        let inv = 1.0 / members.len() as f64;
        mean.iter_mut().for_each(|x| *x *= inv);

        let mut order: Vec<usize> = (0..model.n_topics).collect();
        order.sort_by(|&a, &b| mean[b].total_cmp(&mean[a]).then(a.cmp(&b)));
        let top: Vec<(String, f64)> =
            order.iter().take(4).map(|&k| (labels[k].clone(), mean[k])).collect();
        let aggregate = top.iter().map(|(_, w)| w).sum();
        rows.push(ClusterTopicRow { cluster: c, top, aggregate, empty: false });
    }
    ClusterTopicReport { rows }
}

impl ClusterTopicReport {
    /// Human-readable table in the style `cluster | label (w), ... | sum`.
    pub fn to_table_text(&self) -> String {
        let mut s = String::from("cluster | four most significant topics | aggregate weight\n");
        for row in &self.rows {
            if row.empty {
                s.push_str(&format!("{} | (empty) | 0\n", row.cluster));
                continue;
            }
            let tops: Vec<String> =
                row.top.iter().map(|(l, w)| format!("{l} ({w:.3})")).collect();
            s.push_str(&format!("{} | {} | {:.3}\n", row.cluster, tops.join(", "), row.aggregate));
        }
        s
    }

    /// Machine rows `cluster,topic_label,weight`.
    pub fn write_rows<W: Write>(&self, mut writer: W, delimiter: char) -> Result<()> {
        for row in &self.rows {
            for (label, weight) in &row.top {
                writeln!(writer, "{}{d}{}{d}{}", row.cluster, label, weight, d = delimiter)?;
            }
        }
        Ok(())
    }
}
