//! Feature extraction and clustering for anonymized mobility trajectories.
//!
//! The crate turns per-user location records into two numeric feature views
//! (a spatiotemporal view built from travel motifs, radius of gyration and
//! spectral rhythm features, and a semantic view built from place-tag
//! embeddings), clusters users with a two-view co-EM k-means, and validates
//! the clusters with an LDA topic model. A deterministic synthetic-cohort
//! generator provides labeled input so the whole pipeline can be exercised
//! end to end.
//!
//! Modules follow the pipeline order: [`ingest`] -> [`stays`] -> [`spatial`] /
//! [`temporal`] / [`semantics`] -> [`features`] -> [`cluster`] -> [`topics`].
//! [`synth`] generates input data and [`pipeline`] orchestrates the stages
//! over an artifact directory.

pub mod cluster;
pub mod config;
pub mod error;
pub mod features;
pub mod geo;
pub mod ingest;
pub mod pipeline;
pub mod semantics;
pub mod spatial;
pub mod stays;
pub mod synth;
pub mod temporal;
pub mod topics;

pub use cluster::{ClusterModel, KMeansResult};
pub use config::Config;
pub use error::Error;
pub use features::{FeatureViews, ScalingParams};
pub use geo::{GridCell, GridSpec};
pub use ingest::{CleanTrajectory, FilterReport, PoiRecord, RawTrajectory};
pub use semantics::{ActivitySemantic, EmbeddingTable, SemanticFeatures};
pub use spatial::{MotifClass, MotifFeature, MotifGraph};
pub use stays::{Stay, StayList, Trip};
pub use temporal::{MobilityRhythm, Spectrum, TemporalFeature};
pub use topics::{ClusterTopicReport, TopicModel};

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
