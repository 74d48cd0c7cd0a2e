//! Stage orchestration over a flat artifact directory.
//!
//! Every stage reads its predecessors' files from the same directory and
//! writes its own, so stages can run separately, be re-run, and be diffed.
//! All stages are deterministic given the configuration (seeds included);
//! `threads = 1` is the reference path, larger values only parallelize the
//! pure per-user feature extraction.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::cluster;
use crate::config::Config;
use crate::error::Error;
use crate::features::{self, Matrix, UserFeatureRecord};
use crate::geo::GridSpec;
use crate::ingest::{self, CleanTrajectory, FormatDescriptor, PoiRecord};
use crate::semantics::{self, CbowParams, MsdMetric};
use crate::spatial::{self, CanonicalCode};
use crate::stays::{self, StayParams};
use crate::synth::{self, CohortSpec};
use crate::temporal::{self, RhythmParams};
use crate::topics::{self, LdaParams};
use crate::Result;

pub const TRAJECTORIES_FILE: &str = "trajectories.csv";
pub const POI_FILE: &str = "poi.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const CLEAN_FILE: &str = "clean.csv";
pub const GRID_FILE: &str = "grid.txt";
pub const FILTER_REPORT_FILE: &str = "filter_report.txt";
pub const STAYS_FILE: &str = "stays.csv";
pub const MOTIF_CLASSES_FILE: &str = "motif_classes.csv";
pub const TEMPORAL_FILE: &str = "temporal.csv";
pub const SEMANTICS_FILE: &str = "semantics.csv";
pub const EMBEDDING_FILE: &str = "embedding.txt";
pub const USER_FEATURES_FILE: &str = "user_features.csv";
pub const VIEW_ST_FILE: &str = "view_st.csv";
pub const VIEW_SEM_FILE: &str = "view_sem.csv";
pub const USER_IDS_FILE: &str = "user_ids.txt";
pub const EXCLUDED_FILE: &str = "excluded_users.txt";
pub const MODEL_FILE: &str = "model.txt";
pub const ASSIGNMENTS_FILE: &str = "assignments.csv";
pub const SILHOUETTE_FILE: &str = "silhouette.csv";
pub const TOPIC_WORD_FILE: &str = "topic_word.csv";
pub const DOC_TOPIC_FILE: &str = "doc_topic.csv";
pub const TOPIC_LABELS_FILE: &str = "topic_labels.txt";
pub const CLUSTER_TOPICS_FILE: &str = "cluster_topics.csv";
pub const CLUSTER_TOPICS_TABLE_FILE: &str = "cluster_topics.txt";
pub const CLUSTER_MEANS_FILE: &str = "cluster_feature_means.csv";
pub const MOTIF_DISTRIBUTION_FILE: &str = "motif_distribution.csv";
pub const ARI_FILE: &str = "ari.txt";
pub const REPORT_FILE: &str = "report.txt";

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Synth,
    Ingest,
    Features,
    Cluster,
    Topics,
    Report,
    Pipeline,
}

fn require(dir: &Path, name: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    if !path.is_file() {
        return Err(Error::MissingArtifact(path));
    }
    Ok(path)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(dir.join(name))?))
}

fn open(path: &Path) -> Result<BufReader<fs::File>> {
    Ok(BufReader::new(fs::File::open(path)?))
}

/// Run one stage (or the whole pipeline) against an artifact directory.
pub fn run_stage(stage: Stage, config: &Config, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    match stage {
        Stage::Synth => run_synth(config, dir),
        Stage::Ingest => run_ingest(config, dir),
        Stage::Features => run_features(config, dir),
        Stage::Cluster => run_cluster(config, dir),
        Stage::Topics => run_topics(config, dir),
        Stage::Report => run_report(config, dir),
        Stage::Pipeline => {
            run_synth(config, dir)?;
            run_ingest(config, dir)?;
            run_features(config, dir)?;
            run_cluster(config, dir)?;
            run_topics(config, dir)?;
            run_report(config, dir)
        }
    }
}

fn cohort_spec(config: &Config) -> CohortSpec {
    let mix = if config.synth.mix.is_empty() {
        CohortSpec::default_mix()
    } else {
        config.synth.mix.iter().map(|m| (m.archetype.clone(), m.fraction)).collect()
    };
    CohortSpec {
        n_users: config.synth.n_users,
        extent_km: config.synth.extent_km,
        poi_noise_per_km2: config.synth.poi_noise_per_km2,
        seed: config.synth.seed,
        mix,
    }
}

fn run_synth(config: &Config, dir: &Path) -> Result<()> {
    let cohort = synth::generate_cohort(&cohort_spec(config))?;
    let d = config.delimiter;
    ingest::write_trajectories(&cohort.trajectories, create(dir, TRAJECTORIES_FILE)?, d)?;
    ingest::write_pois(&cohort.pois, create(dir, POI_FILE)?, d)?;
    synth::write_labels(&cohort.labels, create(dir, LABELS_FILE)?, d)?;
    Ok(())
}

fn run_ingest(config: &Config, dir: &Path) -> Result<()> {
    let d = config.delimiter;
    let path = require(dir, TRAJECTORIES_FILE)?;
    let format = FormatDescriptor { delimiter: d, has_header: false };
    let raw = ingest::parse_trajectories(open(&path)?, format)?;

    let (ref_lon, ref_lat) = ingest::bounding_box_reference(&raw).unwrap_or((0.0, 0.0));
    let grid = GridSpec::new(config.grid.size_m, ref_lon, ref_lat);
    let snapped = ingest::snap_trajectories(&raw, &grid);
    let (retained, report) = ingest::filter_cohort(
        &snapped,
        config.filter.speed_quantile,
        config.filter.duration_quantile,
    );

    ingest::write_clean(&retained, create(dir, CLEAN_FILE)?, d)?;
    write!(create(dir, GRID_FILE)?, "{}", ingest::grid_to_text(&grid))?;
    write!(create(dir, FILTER_REPORT_FILE)?, "{}", report.to_text())?;
    Ok(())
}

/// Per-user features computed before assembly.
struct UserDerived {
    user_id: String,
    stay_list: stays::StayList,
    code: Option<CanonicalCode>,
    rog_km: f64,
    temporal: temporal::TemporalFeature,
    stationary: bool,
    tags: Vec<String>,
}

fn derive_user(
    traj: &CleanTrajectory,
    pois: &[PoiRecord],
    grid: &GridSpec,
    config: &Config,
) -> UserDerived {
    let stay_params = StayParams {
        t_minutes: config.stays.t_minutes,
        max_gap_minutes: config.stays.max_gap_minutes,
    };
    let stay_list = stays::detect_stays(traj, &stay_params);
    let code = spatial::build_motif(&stay_list)
        .ok()
        .map(|g| spatial::canonical_code(&g, config.motif.max_nodes));
    let rog_km = spatial::rog_of_trajectory(traj, grid);
    let rhythm_params =
        RhythmParams { bins: config.rhythm.bins, tz_offset_secs: config.rhythm.tz_offset_secs };
    let rhythm = temporal::mobility_rhythm(traj, &rhythm_params);
    let temporal_feature = temporal::temporal_feature(&rhythm);
    let semantic =
        semantics::match_semantics(&stay_list, pois, config.matching.search_radius_m, grid);
    UserDerived {
        user_id: traj.user_id.clone(),
        stay_list,
        code,
        rog_km,
        temporal: temporal_feature,
        stationary: rhythm.stationary,
        tags: semantic.tags,
    }
}

fn msd_metric(config: &Config) -> Result<MsdMetric> {
    match config.semantic.m_sd_metric.as_str() {
        "euclidean" => Ok(MsdMetric::Euclidean),
        "cosine" => Ok(MsdMetric::Cosine),
        other => Err(Error::InvalidConfig(format!("unknown m_sd metric {other:?}"))),
    }
}

fn run_features(config: &Config, dir: &Path) -> Result<()> {
    let d = config.delimiter;
    let metric = msd_metric(config)?;
    let grid = ingest::grid_from_text(&fs::read_to_string(require(dir, GRID_FILE)?)?)?;
    let clean = ingest::read_clean(open(&require(dir, CLEAN_FILE)?)?, &grid, d)?;
    let format = FormatDescriptor { delimiter: d, has_header: false };
    let pois = ingest::parse_pois(open(&require(dir, POI_FILE)?)?, format)?;

    let trajs: Vec<&CleanTrajectory> = clean.values().collect();
    let derived: Vec<UserDerived> = if config.threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .expect("thread pool");
        pool.install(|| {
            use rayon::prelude::*;
            trajs.par_iter().map(|t| derive_user(t, &pois, &grid, config)).collect()
        })
    } else {
        trajs.iter().map(|t| derive_user(t, &pois, &grid, config)).collect()
    };

    // Cohort-level motif census over users that have a motif at all.
    let codes: Vec<CanonicalCode> = derived.iter().filter_map(|u| u.code.clone()).collect();
    let table = spatial::MotifTable::from_codes(codes.iter());
    let top4 = table.top4();

    // Embedding corpus: every user with at least one stay, in user order.
    let corpus: Vec<Vec<String>> = derived
        .iter()
        .filter(|u| !u.tags.is_empty())
        .map(|u| u.tags.clone())
        .collect();
    let cbow = semantics::train_cbow(
        &corpus,
        &CbowParams {
            dim: config.embedding.dim,
            window: config.embedding.window,
            negatives: config.embedding.negatives,
            epochs: config.embedding.epochs,
            lr0: config.embedding.lr0,
            seed: config.embedding.seed,
        },
    )?;

    let mut semantic_features = Vec::with_capacity(derived.len());
    for u in &derived {
        semantic_features.push(if u.tags.is_empty() {
            None
        } else {
            let s = semantics::ActivitySemantic { user_id: u.user_id.clone(), tags: u.tags.clone() };
            Some(semantics::semantic_features_with(&s, &cbow.table, metric)?)
        });
    }
    let records: Vec<UserFeatureRecord> = derived
        .iter()
        .zip(&semantic_features)
        .map(|(u, sem)| UserFeatureRecord {
            user_id: u.user_id.clone(),
            motif: u.code.as_ref().map(|c| spatial::motif_one_hot(c, &top4)),
            rog_km: Some(u.rog_km),
            temporal: Some(u.temporal),
            semantic: sem.clone(),
        })
        .collect();
    let (views, excluded) = features::assemble_views(&records, config.embedding.dim)?;
    let (scaled, _params) = features::standardize(&views);

    let stay_lists: Vec<&stays::StayList> = derived.iter().map(|u| &u.stay_list).collect();
    stays::write_stays(&stay_lists, create(dir, STAYS_FILE)?, d)?;
    table.write(create(dir, MOTIF_CLASSES_FILE)?, d)?;

    let mut temporal_out = create(dir, TEMPORAL_FILE)?;
    for u in &derived {
        writeln!(
            temporal_out,
            "{}{d}{}{d}{}{d}{}",
            u.user_id, u.temporal.lfer, u.temporal.dcfr, u.stationary as u8
        )?;
    }

    let mut semantics_out = create(dir, SEMANTICS_FILE)?;
    for u in &derived {
        if !u.tags.is_empty() {
            writeln!(semantics_out, "{}{d}{}", u.user_id, u.tags.join("|"))?;
        }
    }

    cbow.table.write(create(dir, EMBEDDING_FILE)?)?;

    let mut feat_out = create(dir, USER_FEATURES_FILE)?;
    writeln!(
        feat_out,
        "user_id{d}mt_0{d}mt_1{d}mt_2{d}mt_3{d}mt_others{d}rog_km{d}lfer{d}dcfr{d}n_uas{d}m_sd{d}stationary"
    )?;
    for (u, sem) in derived.iter().zip(&semantic_features) {
        let (Some(code), Some(sem)) = (&u.code, sem) else { continue };
        let one_hot = spatial::motif_one_hot(code, &top4).one_hot;
        writeln!(
            feat_out,
            "{}{d}{}{d}{}{d}{}{d}{}{d}{}{d}{}{d}{}{d}{}{d}{}{d}{}{d}{}",
            u.user_id,
            one_hot[0],
            one_hot[1],
            one_hot[2],
            one_hot[3],
            one_hot[4],
            u.rog_km,
            u.temporal.lfer,
            u.temporal.dcfr,
            sem.n_uas,
            sem.m_sd,
            u.stationary as u8
        )?;
    }

    scaled.view_st.write(create(dir, VIEW_ST_FILE)?, d)?;
    scaled.view_sem.write(create(dir, VIEW_SEM_FILE)?, d)?;
    let mut ids_out = create(dir, USER_IDS_FILE)?;
    for id in &scaled.user_ids {
        writeln!(ids_out, "{id}")?;
    }
    let mut excluded_out = create(dir, EXCLUDED_FILE)?;
    for id in &excluded {
        writeln!(excluded_out, "{id}{d}no stays")?;
    }
    Ok(())
}

pub fn read_user_ids(dir: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(require(dir, USER_IDS_FILE)?)?;
    Ok(text.lines().map(|l| l.to_string()).collect())
}

pub fn read_assignments(dir: &Path, delimiter: char) -> Result<Vec<(String, usize)>> {
    let path = require(dir, ASSIGNMENTS_FILE)?;
    let text = fs::read_to_string(&path)?;
    let mut out = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let (user, cluster) = line.split_once(delimiter).ok_or_else(|| {
            Error::MalformedArtifact { path: path.clone(), message: "expected user,cluster".into() }
        })?;
        let cluster = cluster.trim().parse::<usize>().map_err(|_| Error::MalformedArtifact {
            path: path.clone(),
            message: format!("bad cluster id {cluster:?}"),
        })?;
        out.push((user.to_string(), cluster));
    }
    Ok(out)
}

fn run_cluster(config: &Config, dir: &Path) -> Result<()> {
    let d = config.delimiter;
    let view_st = Matrix::read(open(&require(dir, VIEW_ST_FILE)?)?, d)?;
    let view_sem = Matrix::read(open(&require(dir, VIEW_SEM_FILE)?)?, d)?;
    let user_ids = read_user_ids(dir)?;

    let model = cluster::multiview_kmeans(
        &view_st,
        &view_sem,
        config.cluster.k,
        config.cluster.seed,
        config.cluster.max_iter,
        config.cluster.tol,
    )?;
    model.write(create(dir, MODEL_FILE)?)?;

    let mut out = create(dir, ASSIGNMENTS_FILE)?;
    for (user, &a) in user_ids.iter().zip(&model.assignments) {
        writeln!(out, "{user}{d}{a}")?;
    }

    if config.cluster.silhouette_sweep {
        let mut sweep = create(dir, SILHOUETTE_FILE)?;
        writeln!(sweep, "k{d}silhouette_st{d}silhouette_sem")?;
        for k in 2..=12.min(view_st.rows) {
            let m = cluster::multiview_kmeans(
                &view_st,
                &view_sem,
                k,
                config.cluster.seed,
                config.cluster.max_iter,
                config.cluster.tol,
            )?;
            let s_st = cluster::silhouette(&view_st, &m.assignments);
            let s_sem = cluster::silhouette(&view_sem, &m.assignments);
            writeln!(sweep, "{k}{d}{s_st}{d}{s_sem}")?;
        }
    }
    Ok(())
}

fn read_semantic_docs(dir: &Path, delimiter: char) -> Result<BTreeMap<String, Vec<String>>> {
    let path = require(dir, SEMANTICS_FILE)?;
    let text = fs::read_to_string(&path)?;
    let mut docs = BTreeMap::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let (user, tags) = line.split_once(delimiter).ok_or_else(|| {
            Error::MalformedArtifact { path: path.clone(), message: "expected user,tags".into() }
        })?;
        docs.insert(user.to_string(), tags.split('|').map(|t| t.to_string()).collect());
    }
    Ok(docs)
}

fn run_topics(config: &Config, dir: &Path) -> Result<()> {
    let d = config.delimiter;
    let docs = read_semantic_docs(dir, d)?;
    let user_ids = read_user_ids(dir)?;
    let assignments = read_assignments(dir, d)?;
    let corpus: Vec<Vec<String>> = user_ids
        .iter()
        .map(|u| docs.get(u).cloned().unwrap_or_default())
        .collect();

    let model = topics::train_lda(
        &corpus,
        &LdaParams {
            n_topics: config.lda.n_topics,
            alpha: config.lda.alpha,
            beta: config.lda.beta,
            iters: config.lda.iters,
            burn_in: config.lda.burn_in,
            sample_every: config.lda.sample_every,
            seed: config.lda.seed,
        },
    )?;

    let labels = model.default_labels();
    let cluster_ids: Vec<usize> = assignments.iter().map(|(_, c)| *c).collect();
    let report = topics::cluster_topic_report(&model, &cluster_ids, Some(&labels));

    model.topic_word.write(create(dir, TOPIC_WORD_FILE)?, d)?;
    model.doc_topic.write(create(dir, DOC_TOPIC_FILE)?, d)?;
    let mut labels_out = create(dir, TOPIC_LABELS_FILE)?;
    for label in &labels {
        writeln!(labels_out, "{label}")?;
    }
    report.write_rows(create(dir, CLUSTER_TOPICS_FILE)?, d)?;
    write!(create(dir, CLUSTER_TOPICS_TABLE_FILE)?, "{}", report.to_table_text())?;
    Ok(())
}

fn run_report(config: &Config, dir: &Path) -> Result<()> {
    let d = config.delimiter;
    let features_path = require(dir, USER_FEATURES_FILE)?;
    let assignments = read_assignments(dir, d)?;
    let cluster_of: BTreeMap<&str, usize> =
        assignments.iter().map(|(u, c)| (u.as_str(), *c)).collect();
    let k = assignments.iter().map(|(_, c)| *c).max().map_or(0, |m| m + 1);

    // Unscaled per-user features, grouped into per-cluster means.
    const NUMERIC_COLS: usize = 10;
    let mut sums = vec![vec![0.0f64; NUMERIC_COLS]; k];
    let mut counts = vec![0usize; k];
    let text = fs::read_to_string(&features_path)?;
    for line in text.lines().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(d).collect();
        let user = fields[0];
        let Some(&c) = cluster_of.get(user) else { continue };
        counts[c] += 1;
        for j in 0..NUMERIC_COLS {
            let v: f64 = fields[1 + j].parse().map_err(|_| Error::MalformedArtifact {
                path: features_path.clone(),
                message: format!("bad feature value {:?}", fields[1 + j]),
            })?;
            sums[c][j] += v;
        }
    }

    let mut means_out = create(dir, CLUSTER_MEANS_FILE)?;
    writeln!(
        means_out,
        "cluster{d}count{d}mt_0{d}mt_1{d}mt_2{d}mt_3{d}mt_others{d}rog_km{d}lfer{d}dcfr{d}n_uas{d}m_sd"
    )?;
    let mut means_rows = Vec::new();
    for c in 0..k {
        let n = counts[c].max(1) as f64;
        let means: Vec<f64> = sums[c].iter().map(|s| s / n).collect();
        let cols: Vec<String> = means.iter().map(|v| v.to_string()).collect();
        writeln!(means_out, "{c}{d}{}{d}{}", counts[c], cols.join(&d.to_string()))?;
        means_rows.push((c, counts[c], means));
    }

    // Motif distribution: re-emit the cohort census.
    let motif_text = fs::read_to_string(require(dir, MOTIF_CLASSES_FILE)?)?;
    write!(create(dir, MOTIF_DISTRIBUTION_FILE)?, "{motif_text}")?;

    let topics_table = fs::read_to_string(require(dir, CLUSTER_TOPICS_TABLE_FILE)?)?;

    // ARI against ground-truth labels when they exist.
    let mut ari_line = None;
    if dir.join(LABELS_FILE).is_file() {
        let labels = synth::read_labels(open(&dir.join(LABELS_FILE))?, d)?;
        let mut name_ids: BTreeMap<&str, usize> = BTreeMap::new();
        let mut truth = Vec::new();
        let mut predicted = Vec::new();
        for (user, c) in &assignments {
            if let Some(name) = labels.get(user) {
                let next = name_ids.len();
                truth.push(*name_ids.entry(name).or_insert(next));
                predicted.push(*c);
            }
        }
        if truth.len() >= 2 {
            let ari = cluster::adjusted_rand_index(&predicted, &truth)?;
            let mut ari_out = create(dir, ARI_FILE)?;
            writeln!(ari_out, "ari={ari}")?;
            writeln!(ari_out, "users={}", truth.len())?;
            ari_line = Some((ari, truth.len()));
        }
    }

    let mut report = String::new();
    report.push_str("pipeline report\n===============\n\n");
    report.push_str(&format!("users clustered: {}\n", assignments.len()));
    let non_empty = counts.iter().filter(|&&c| c > 0).count();
    report.push_str(&format!("clusters: {k} ({non_empty} non-empty)\n"));
    if let Some((ari, n)) = ari_line {
        report.push_str(&format!("ARI vs ground-truth labels over {n} users: {ari:.4}\n"));
    }
    report.push_str("\nper-cluster feature means\n-------------------------\n");
    report.push_str("cluster  count  rog_km   lfer    dcfr    n_uas   m_sd\n");
    for (c, count, means) in &means_rows {
        report.push_str(&format!(
            "{c:<7}  {count:<5}  {:<7.3} {:<7.3} {:<7.3} {:<7.3} {:<7.3}\n",
            means[5], means[6], means[7], means[8], means[9]
        ));
    }
    report.push_str("\nmotif distribution (cohort)\n---------------------------\n");
    report.push_str(&motif_text);
    report.push_str("\ncluster topics\n--------------\n");
    report.push_str(&topics_table);
    if let Ok(filter_text) = fs::read_to_string(dir.join(FILTER_REPORT_FILE)) {
        report.push_str("\ningest filter report\n--------------------\n");
        report.push_str(&filter_text);
    }
    write!(create(dir, REPORT_FILE)?, "{report}")?;
    Ok(())
}
