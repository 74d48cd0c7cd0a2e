//! Pipeline configuration: one TOML document holding every tunable
//! parameter, with defaults matching the pipeline's reference constants
//! (150 m grid, 30 min stay threshold, 12 rhythm bins, dim-80 window-2
//! embeddings, 7 clusters).
//!
//! Unknown keys are rejected so typos fail loudly instead of silently
//! falling back to defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

fn default_delimiter() -> char {
    ','
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub size_m: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { size_m: 150.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub speed_quantile: f64,
    pub duration_quantile: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { speed_quantile: 0.99, duration_quantile: 0.01 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct StayConfig {
    pub t_minutes: f64,
    pub max_gap_minutes: f64,
}

impl Default for StayConfig {
    fn default() -> Self {
        Self { t_minutes: 30.0, max_gap_minutes: 120.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RhythmConfig {
    pub bins: usize,
    pub tz_offset_secs: i64,
}

impl Default for RhythmConfig {
    fn default() -> Self {
        Self { bins: 12, tz_offset_secs: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct MotifConfig {
    pub max_nodes: usize,
}

impl Default for MotifConfig {
    fn default() -> Self {
        Self { max_nodes: 10 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig {
    pub search_radius_m: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self { search_radius_m: 200.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SemanticConfig {
    /// Distance for the max-semantic-distance feature: "euclidean" or
    /// "cosine".
    pub m_sd_metric: String,
}

impl Default for SemanticConfig {
    fn default() -> Self {
        Self { m_sd_metric: "euclidean".to_string() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr0: f64,
    pub seed: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self { dim: 80, window: 2, negatives: 5, epochs: 10, lr0: 0.025, seed: 1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub k: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    /// Final labeling rule; "variance-normalized" is the only rule
    /// implemented so far, the key exists so alternates can be added
    /// without breaking configs.
    pub consensus: String,
    /// Also report single-view silhouettes over a k sweep (diagnostic).
    pub silhouette_sweep: bool,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            k: 7,
            max_iter: 100,
            tol: 0.0,
            seed: 1,
            consensus: "variance-normalized".to_string(),
            silhouette_sweep: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct LdaConfig {
    pub n_topics: usize,
    /// Defaults to `50 / n_topics` when unset.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iters: usize,
    pub burn_in: usize,
    pub sample_every: usize,
    pub seed: u64,
}

impl Default for LdaConfig {
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

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_users: usize,
    pub extent_km: f64,
    pub poi_noise_per_km2: f64,
    pub seed: u64,
    /// Archetype mix; empty means the built-in default mix.
    pub mix: Vec<MixEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MixEntry {
    pub archetype: String,
    pub fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { n_users: 500, extent_km: 25.0, poi_noise_per_km2: 3.0, seed: 1, mix: Vec::new() }
    }
}

/// Full pipeline configuration.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub delimiter: char,
    pub threads: usize,
    /// Artifact directory; the CLI flag takes precedence when given.
    pub out_dir: Option<String>,
    pub grid: GridConfig,
    pub filter: FilterConfig,
    pub stays: StayConfig,
    pub rhythm: RhythmConfig,
    pub motif: MotifConfig,
    pub matching: MatchConfig,
    pub semantic: SemanticConfig,
    pub embedding: EmbeddingConfig,
    pub cluster: ClusterConfig,
    pub lda: LdaConfig,
    pub synth: SynthConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            delimiter: default_delimiter(),
            threads: 1,
            out_dir: None,
            grid: GridConfig::default(),
            filter: FilterConfig::default(),
            stays: StayConfig::default(),
            rhythm: RhythmConfig::default(),
            motif: MotifConfig::default(),
            matching: MatchConfig::default(),
            semantic: SemanticConfig::default(),
            embedding: EmbeddingConfig::default(),
            cluster: ClusterConfig::default(),
            lda: LdaConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut config: Config =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        if config.threads == 0 {
            config.threads = 1;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.semantic.m_sd_metric.as_str(), "euclidean" | "cosine") {
            return Err(Error::InvalidConfig(format!(
                "semantic.m_sd_metric must be \"euclidean\" or \"cosine\", got {:?}",
                self.semantic.m_sd_metric
            )));
        }
        if self.cluster.consensus != "variance-normalized" {
            return Err(Error::InvalidConfig(format!(
                "cluster.consensus supports only \"variance-normalized\", got {:?}",
                self.cluster.consensus
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let config = Config::from_toml_str("").unwrap();
        assert_eq!(config.grid.size_m, 150.0);
        assert_eq!(config.stays.t_minutes, 30.0);
        assert_eq!(config.rhythm.bins, 12);
        assert_eq!(config.embedding.dim, 80);
        assert_eq!(config.embedding.window, 2);
        assert_eq!(config.cluster.k, 7);
        assert_eq!(config.threads, 1);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = Config::from_toml_str("[cluster]\nnot_a_key = 3\n").unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }

    #[test]
    fn bad_enum_values_are_rejected() {
        assert!(matches!(
            Config::from_toml_str("[semantic]\nm_sd_metric = \"manhattan\"\n"),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            Config::from_toml_str("[cluster]\nconsensus = \"intersection\"\n"),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn roundtrips_through_toml() {
        let mut config = Config::from_toml_str("[cluster]\nk = 5\nseed = 42\n").unwrap();
        config.synth.mix.push(MixEntry { archetype: "explorer".into(), fraction: 1.0 });
        let text = config.to_toml_string();
        let back = Config::from_toml_str(&text).unwrap();
        assert_eq!(back, config);
    }
}
