//! Glue between the file formats and the evaluation protocol: input
//! loading, per-second preprocessing, dataset assembly for either raw
//! inputs or the window cache, fold-model artifacts, and report output.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::derive::merge_landmark_features;
use crate::eval::{EvalConfig, EvalDataset, EvalReport, FoldModels, SkippedFold, WindowFeatures};
use crate::fuse::FeatureMode;
use crate::globalfeat::global_features;
use crate::ingest::{
    self, parse_attention_stream, parse_frame_features, parse_landmarks, AttentionSeries,
    FrameFeatureStream,
};
use crate::types::Category;
use crate::window::{
    compute_label_thresholds, extract_candidates, extract_windows, label_for, per_second_average,
    read_windows_jsonl, write_windows_jsonl, Candidate, LabelingConfig, SecondFeatureSeries,
    WindowSample,
};

pub const CACHE_WINDOWS_FILE: &str = "windows.jsonl";
pub const CACHE_META_FILE: &str = "meta.json";
pub const MODELS_FILE: &str = "models.json";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error(transparent)]
    Ingest(#[from] ingest::IngestError),
    #[error(transparent)]
    Window(#[from] crate::window::WindowError),
    #[error(transparent)]
    Feat(#[from] crate::globalfeat::FeatError),
    #[error(transparent)]
    Eval(#[from] crate::eval::EvalError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cache mismatch: {0}")]
    CacheMismatch(String),
}

impl PipelineError {
    /// Process exit code: 1 validation, 2 data, 3 training divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Input(_) | PipelineError::CacheMismatch(_) => 1,
            PipelineError::Eval(crate::eval::EvalError::FoldTraining { .. }) => 3,
            PipelineError::Window(crate::window::WindowError::InvalidConfig(_)) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;

/// Parsed and merged raw inputs.
pub struct RawInputs {
    pub stream: FrameFeatureStream,
    /// One series per user, sorted by user id.
    pub attention: Vec<AttentionSeries>,
}

/// Load the frame-feature CSV, one attention file per user from a
/// directory (`<user_id>.txt`), and optionally a landmark CSV whose
/// derived EAR/HS/NS tracks replace same-category streams.
pub fn load_inputs(
    features: &Path,
    attention_dir: &Path,
    landmarks: Option<&Path>,
) -> Result<RawInputs> {
    let mut stream = parse_frame_features(features)?;
    if let Some(lm_path) = landmarks {
        let frames = parse_landmarks(lm_path)?;
        let mut session_of_user = BTreeMap::new();
        for user in stream.users().map(str::to_string).collect::<Vec<_>>() {
            let sessions: Vec<String> = stream.sessions(&user).map(str::to_string).collect();
            if let Some(first) = sessions.first() {
                session_of_user.insert(user, first.clone());
            }
        }
        let skipped = merge_landmark_features(&mut stream, &frames, &session_of_user);
        if skipped > 0 {
            eprintln!("landmarks: skipped {skipped} invalid or degenerate frames");
        }
    }
    let mut attention = Vec::new();
    let mut entries: Vec<_> = fs::read_dir(attention_dir)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "txt"))
        .collect();
    entries.sort();
    for path in entries {
        attention.push(parse_attention_stream(&path)?);
    }
    if attention.is_empty() {
        return Err(PipelineError::Input(format!(
            "no attention files (*.txt) in {}",
            attention_dir.display()
        )));
    }
    let stream_users: Vec<String> = stream.users().map(str::to_string).collect();
    let attention_users: Vec<String> = attention.iter().map(|a| a.user_id.clone()).collect();
    if stream_users != attention_users {
        return Err(PipelineError::Input(format!(
            "feature users {stream_users:?} do not match attention users {attention_users:?}"
        )));
    }
    Ok(RawInputs { stream, attention })
}

/// One user's preprocessed session: per-second series per category,
/// attention, and every candidate window position.
pub struct SessionData {
    pub user_id: String,
    pub seconds: BTreeMap<Category, SecondFeatureSeries>,
    pub attention: AttentionSeries,
    pub candidates: Vec<Candidate>,
}

/// Per-second averaging and candidate extraction for every user.
/// Each user must have exactly one session.
pub fn preprocess(inputs: &RawInputs, labeling: &LabelingConfig) -> Result<Vec<SessionData>> {
    labeling.validate()?;
    let mut out = Vec::new();
    for attention in &inputs.attention {
        let user = &attention.user_id;
        let sessions: Vec<String> = inputs.stream.sessions(user).map(str::to_string).collect();
        if sessions.len() != 1 {
            return Err(PipelineError::Input(format!(
                "user {user} has {} sessions; expected exactly 1",
                sessions.len()
            )));
        }
        let session = &sessions[0];
        let mut seconds = BTreeMap::new();
        for cat in inputs.stream.categories(user, session) {
            let track = inputs.stream.track(user, session, cat).expect("listed category");
            seconds.insert(cat, per_second_average(user, cat, track)?);
        }
        let candidates = extract_candidates(&seconds, attention, labeling)?;
        out.push(SessionData {
            user_id: user.clone(),
            seconds,
            attention: attention.clone(),
            candidates,
        });
    }
    Ok(out)
}

fn sorted_pool(attention: &AttentionSeries) -> Vec<f64> {
    let mut pool = attention.values.clone();
    pool.sort_by(|a, b| a.partial_cmp(b).expect("finite attention"));
    pool
}

/// Thresholds over the concatenation of all pools except `exclude`.
fn pool_thresholds(
    pools: &[Vec<f64>],
    labeling: &LabelingConfig,
    exclude: Option<usize>,
) -> Result<(f64, f64)> {
    let mut all = Vec::new();
    for (i, p) in pools.iter().enumerate() {
        if Some(i) != exclude {
            all.extend_from_slice(p);
        }
    }
    Ok(compute_label_thresholds(&all, labeling)?)
}

/// The widest thresholds any evaluation over these pools can use: the
/// full-pool pair plus every leave-one-user-out pair.
fn threshold_envelope(
    pools: &[Vec<f64>],
    labeling: &LabelingConfig,
) -> Result<(f64, f64)> {
    let (mut lo, mut hi) = pool_thresholds(pools, labeling, None)?;
    for i in 0..pools.len() {
        if pools.len() > 1 {
            let (l, h) = pool_thresholds(pools, labeling, Some(i))?;
            lo = lo.max(l);
            hi = hi.min(h);
        }
    }
    Ok((lo, hi))
}

fn window_feats(
    seconds: &BTreeMap<Category, SecondFeatureSeries>,
    categories: &[Category],
    mode: FeatureMode,
    start: usize,
    window_length: usize,
    user: &str,
) -> Result<BTreeMap<Category, Vec<f64>>> {
    let mut feats = BTreeMap::new();
    for &cat in categories {
        let series = seconds.get(&cat).ok_or_else(|| {
            PipelineError::Input(format!("user {user} has no {cat} stream"))
        })?;
        let dim = cat.dim();
        let mut flat = Vec::with_capacity(match mode {
            FeatureMode::Local => dim * window_length,
            FeatureMode::Global => dim * crate::globalfeat::GLOBAL_FEATURES,
        });
        let mut channel = vec![0.0; window_length];
        for d in 0..dim {
            for (k, slot) in channel.iter_mut().enumerate() {
                *slot = series.values.get(d, start + k);
            }
            match mode {
                FeatureMode::Local => flat.extend_from_slice(&channel),
                FeatureMode::Global => flat.extend_from_slice(&global_features(&channel)?),
            }
        }
        feats.insert(cat, flat);
    }
    Ok(feats)
}

/// Assemble the evaluation dataset from preprocessed sessions: every
/// candidate that passes the missing filter and could be labeled under
/// the full pool or any fold's thresholds gets its features materialized.
pub fn build_dataset(
    sessions: &[SessionData],
    labeling: &LabelingConfig,
    categories: &[Category],
    mode: FeatureMode,
) -> Result<EvalDataset> {
    if mode == FeatureMode::Global && labeling.window_length < 4 {
        return Err(PipelineError::Input(
            "global features need a window of at least 4 seconds".into(),
        ));
    }
    let pools: Vec<Vec<f64>> = sessions.iter().map(|s| sorted_pool(&s.attention)).collect();
    let (env_lo, env_hi) = threshold_envelope(&pools, labeling)?;
    let mut windows = Vec::new();
    for (user_idx, session) in sessions.iter().enumerate() {
        for cand in &session.candidates {
            if cand.missing_fraction > labeling.max_missing_fraction {
                continue;
            }
            if label_for(cand.band_attention, (env_lo, env_hi)).is_none() {
                continue;
            }
            windows.push(WindowFeatures {
                user_idx,
                start: cand.start,
                band_attention: cand.band_attention,
                feats: window_feats(
                    &session.seconds,
                    categories,
                    mode,
                    cand.start,
                    labeling.window_length,
                    &session.user_id,
                )?,
            });
        }
    }
    Ok(EvalDataset {
        users: sessions.iter().map(|s| s.user_id.clone()).collect(),
        pools,
        windows,
        feature_mode: mode,
        window_length: labeling.window_length,
    })
}

/// Sidecar metadata of a window cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheMeta {
    pub schema_version: u32,
    pub labeling: LabelingConfig,
    /// True when the dump was labeled under the leave-one-out threshold
    /// envelope rather than the plain full-pool thresholds.
    pub strict_dump: bool,
    pub tau_low: f64,
    pub tau_high: f64,
    /// Sorted per-user attention values; fold thresholds are recomputed
    /// from these at evaluation time.
    pub pools: BTreeMap<String, Vec<f64>>,
    pub candidate_counts: BTreeMap<String, usize>,
    pub labeled_counts: BTreeMap<String, usize>,
}

/// Label and dump every session's windows plus the metadata needed to
/// replay any threshold mode later. In strict mode the dump is labeled
/// under the threshold envelope so per-fold relabeling finds every
/// window it needs.
pub fn write_cache(
    dir: &Path,
    sessions: &[SessionData],
    labeling: &LabelingConfig,
    strict: bool,
) -> Result<CacheMeta> {
    fs::create_dir_all(dir)?;
    let pools_vec: Vec<Vec<f64>> = sessions.iter().map(|s| sorted_pool(&s.attention)).collect();
    let thresholds = if strict {
        threshold_envelope(&pools_vec, labeling)?
    } else {
        pool_thresholds(&pools_vec, labeling, None)?
    };
    let mut windows_file = BufWriter::new(File::create(dir.join(CACHE_WINDOWS_FILE))?);
    let mut candidate_counts = BTreeMap::new();
    let mut labeled_counts = BTreeMap::new();
    for session in sessions {
        let samples = extract_windows(&session.seconds, &session.attention, labeling, thresholds)?;
        candidate_counts.insert(session.user_id.clone(), session.candidates.len());
        labeled_counts.insert(session.user_id.clone(), samples.len());
        write_windows_jsonl(&samples, &mut windows_file)?;
    }
    windows_file.flush()?;
    let meta = CacheMeta {
        schema_version: 1,
        labeling: labeling.clone(),
        strict_dump: strict,
        tau_low: thresholds.0,
        tau_high: thresholds.1,
        pools: sessions
            .iter()
            .zip(&pools_vec)
            .map(|(s, p)| (s.user_id.clone(), p.clone()))
            .collect(),
        candidate_counts,
        labeled_counts,
    };
    let mut meta_file = BufWriter::new(File::create(dir.join(CACHE_META_FILE))?);
    serde_json::to_writer_pretty(&mut meta_file, &meta)?;
    meta_file.flush()?;
    Ok(meta)
}

pub fn load_cache(dir: &Path) -> Result<(Vec<WindowSample>, CacheMeta)> {
    let meta: CacheMeta =
        serde_json::from_reader(BufReader::new(File::open(dir.join(CACHE_META_FILE))?))?;
    if meta.schema_version != 1 {
        return Err(PipelineError::CacheMismatch(format!(
            "unsupported cache schema version {}",
            meta.schema_version
        )));
    }
    let windows = read_windows_jsonl(BufReader::new(File::open(dir.join(CACHE_WINDOWS_FILE))?))?;
    Ok((windows, meta))
}

/// Verify that an evaluation with `labeling`/`strict` can be replayed
/// exactly from a cache: same windowing parameters, and every threshold
/// pair the evaluation will use must lie inside the dump's labeled range.
pub fn check_cache_coverage(
    meta: &CacheMeta,
    labeling: &LabelingConfig,
    strict: bool,
) -> Result<()> {
    if meta.labeling.window_length != labeling.window_length
        || meta.labeling.max_missing_fraction != labeling.max_missing_fraction
    {
        return Err(PipelineError::CacheMismatch(format!(
            "cache was built with window {}s / max missing {}, requested {}s / {}",
            meta.labeling.window_length,
            meta.labeling.max_missing_fraction,
            labeling.window_length,
            labeling.max_missing_fraction
        )));
    }
    let pools: Vec<Vec<f64>> = meta.pools.values().cloned().collect();
    let needed = if strict {
        threshold_envelope(&pools, labeling)?
    } else {
        pool_thresholds(&pools, labeling, None)?
    };
    if needed.0 > meta.tau_low || needed.1 < meta.tau_high {
        return Err(PipelineError::CacheMismatch(format!(
            "cache labeled at thresholds ({}, {}) cannot cover requested thresholds ({}, {}); \
             rebuild the cache with the windows stage",
            meta.tau_low, meta.tau_high, needed.0, needed.1
        )));
    }
    Ok(())
}

/// Dataset from a window cache. Features are recomputed from the dumped
/// local vectors for the requested categories and mode.
pub fn dataset_from_cache(
    windows: &[WindowSample],
    meta: &CacheMeta,
    categories: &[Category],
    mode: FeatureMode,
) -> Result<EvalDataset> {
    if mode == FeatureMode::Global && meta.labeling.window_length < 4 {
        return Err(PipelineError::Input(
            "global features need a window of at least 4 seconds".into(),
        ));
    }
    let users: Vec<String> = meta.pools.keys().cloned().collect();
    let index_of: BTreeMap<&str, usize> =
        users.iter().enumerate().map(|(i, u)| (u.as_str(), i)).collect();
    let mut out = Vec::with_capacity(windows.len());
    for sample in windows {
        let user_idx = *index_of.get(sample.user_id.as_str()).ok_or_else(|| {
            PipelineError::CacheMismatch(format!(
                "window for user {} not present in cache metadata",
                sample.user_id
            ))
        })?;
        let mut feats = BTreeMap::new();
        for &cat in categories {
            let local = sample.locals.get(&cat).ok_or_else(|| {
                PipelineError::Input(format!("cached window lacks category {cat}"))
            })?;
            let flat = match mode {
                FeatureMode::Local => local.data().to_vec(),
                FeatureMode::Global => {
                    let mut v = Vec::with_capacity(local.rows() * crate::globalfeat::GLOBAL_FEATURES);
                    for row in local.iter_rows() {
                        v.extend_from_slice(&global_features(row)?);
                    }
                    v
                }
            };
            feats.insert(cat, flat);
        }
        out.push(WindowFeatures {
            user_idx,
            start: sample.start_second,
            band_attention: sample.band_attention,
            feats,
        });
    }
    out.sort_by_key(|w| (w.user_idx, w.start));
    Ok(EvalDataset {
        users,
        pools: meta.pools.values().cloned().collect(),
        windows: out,
        feature_mode: mode,
        window_length: meta.labeling.window_length,
    })
}

/// Serialized outcome of the train stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainArtifacts {
    pub config: EvalConfig,
    pub folds: Vec<TrainedFold>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum TrainedFold {
    Trained(FoldModels),
    Skipped(SkippedFold),
}

pub fn write_models(dir: &Path, artifacts: &TrainArtifacts) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut f = BufWriter::new(File::create(dir.join(MODELS_FILE))?);
    serde_json::to_writer(&mut f, artifacts)?;
    f.flush()?;
    Ok(())
}

pub fn load_models(dir: &Path, expected: &EvalConfig) -> Result<BTreeMap<String, FoldModels>> {
    let artifacts: TrainArtifacts =
        serde_json::from_reader(BufReader::new(File::open(dir.join(MODELS_FILE))?))?;
    if &artifacts.config != expected {
        return Err(PipelineError::CacheMismatch(
            "fold models were trained under a different configuration".into(),
        ));
    }
    Ok(artifacts
        .folds
        .into_iter()
        .filter_map(|f| match f {
            TrainedFold::Trained(m) => Some((m.held_out_user.clone(), m)),
            TrainedFold::Skipped(_) => None,
        })
        .collect())
}

/// Plain-text report summary.
pub fn render_text(report: &EvalReport) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    let cats: Vec<&str> = report.config.fusion.categories.iter().map(|c| c.name()).collect();
    let _ = writeln!(s, "attention evaluation report");
    let _ = writeln!(s, "===========================");
    let _ = writeln!(s, "config hash     : {}", report.config_hash);
    let _ = writeln!(s, "seed            : {}", report.seed);
    let _ = writeln!(s, "strategy        : {:?}", report.config.fusion.strategy);
    let _ = writeln!(s, "feature mode    : {:?}", report.config.fusion.feature_mode);
    let _ = writeln!(s, "categories      : {}", cats.join(","));
    let _ = writeln!(s, "window          : {} s", report.window_length);
    let _ = writeln!(
        s,
        "percentiles     : {} / {}",
        report.config.labeling.low_percentile, report.config.labeling.high_percentile
    );
    let _ = writeln!(s, "strict leakage  : {}", report.config.strict_leakage);
    let _ = writeln!(s, "users           : {}", report.n_users);
    let _ = writeln!(s, "windows scored  : {}", report.pooled.n_windows);
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "pooled accuracy : {:.4} (max-accuracy threshold {:.6})",
        report.pooled.oracle_accuracy, report.pooled.oracle_threshold
    );
    let _ = writeln!(
        s,
        "held-out mode   : {:.4} (thresholds chosen on training folds)",
        report.pooled.heldout_accuracy
    );
    let _ = writeln!(s, "pooled AUC      : {:.4}", report.pooled.auc);
    let _ = writeln!(s);
    let _ = writeln!(s, "fold  user        n_test  oracle  heldout");
    for (i, fold) in report.folds.iter().enumerate() {
        let _ = writeln!(
            s,
            "{:<5} {:<11} {:<7} {:.4}  {:.4}",
            i, fold.held_out_user, fold.n_test, fold.oracle_accuracy, fold.heldout_accuracy
        );
    }
    for skip in &report.skipped_folds {
        let _ = writeln!(s, "skipped {}: {}", skip.held_out_user, skip.reason);
    }
    s
}

/// Write the subset-enumeration outcome as JSON plus a text table.
pub fn write_subsets(dir: &Path, subsets: &[crate::eval::SubsetOutcome]) -> Result<()> {
    use std::fmt::Write as _;
    fs::create_dir_all(dir)?;
    let mut json = BufWriter::new(File::create(dir.join("subsets.json"))?);
    serde_json::to_writer_pretty(&mut json, subsets)?;
    json.flush()?;
    let mut s = String::new();
    let _ = writeln!(s, "{:<36} {:>8} {:>8} {:>8} {:>8}", "categories", "n", "acc", "heldout", "auc");
    for entry in subsets {
        let cats: Vec<&str> = entry.categories.iter().map(|c| c.name()).collect();
        let _ = writeln!(
            s,
            "{:<36} {:>8} {:>8.4} {:>8.4} {:>8.4}",
            cats.join("+"),
            entry.pooled.n_windows,
            entry.pooled.oracle_accuracy,
            entry.pooled.heldout_accuracy,
            entry.pooled.auc
        );
    }
    fs::write(dir.join("subsets.txt"), s)?;
    Ok(())
}

/// Write report.json, report.txt, and roc.csv into a directory.
pub fn write_report(dir: &Path, report: &EvalReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut json = BufWriter::new(File::create(dir.join("report.json"))?);
    serde_json::to_writer_pretty(&mut json, report)?;
    json.flush()?;
    fs::write(dir.join("report.txt"), render_text(report))?;
    let mut roc = String::from("fpr,tpr\n");
    for (fpr, tpr) in &report.roc_points {
        roc.push_str(&format!("{fpr},{tpr}\n"));
    }
    fs::write(dir.join("roc.csv"), roc)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_streams, SynthSpec};

    fn synth_sessions(n_users: usize, seed: u64) -> (Vec<SessionData>, LabelingConfig) {
        let spec = SynthSpec {
            n_users,
            session_seconds_min: 120,
            session_seconds_max: 160,
            frame_rate: 3.0,
            attention: SynthSpec::regimes(20),
            ..Default::default()
        };
        let (stream, attention, _) = generate_streams(&spec, seed).unwrap();
        let inputs = RawInputs { stream, attention };
        let labeling = LabelingConfig {
            window_length: 10,
            ..Default::default()
        };
        (preprocess(&inputs, &labeling).unwrap(), labeling)
    }

    #[test]
    fn preprocess_counts_candidates() {
        let (sessions, labeling) = synth_sessions(2, 3);
        for s in &sessions {
            let t = s.attention.values.len();
            assert_eq!(s.candidates.len(), t - labeling.window_length + 1);
            assert_eq!(s.seconds.len(), 7);
        }
    }

    #[test]
    fn dataset_has_sorted_window_features() {
        let (sessions, labeling) = synth_sessions(2, 5);
        let cats = [Category::Eb, Category::Exp];
        let ds = build_dataset(&sessions, &labeling, &cats, FeatureMode::Local).unwrap();
        assert_eq!(ds.users.len(), 2);
        assert!(!ds.windows.is_empty());
        for w in &ds.windows {
            assert_eq!(w.feats[&Category::Eb].len(), 10);
            assert_eq!(w.feats[&Category::Exp].len(), 160);
        }
        for pair in ds.windows.windows(2) {
            assert!((pair[0].user_idx, pair[0].start) < (pair[1].user_idx, pair[1].start));
        }
    }

    #[test]
    fn global_mode_shapes() {
        let (sessions, labeling) = synth_sessions(2, 7);
        let cats = [Category::Exp];
        let ds = build_dataset(&sessions, &labeling, &cats, FeatureMode::Global).unwrap();
        for w in &ds.windows {
            assert_eq!(w.feats[&Category::Exp].len(), 16 * 28);
        }
    }

    #[test]
    fn cache_round_trip_matches_raw_dataset() {
        let (sessions, labeling) = synth_sessions(3, 11);
        let dir = tempfile::tempdir().unwrap();
        let meta = write_cache(dir.path(), &sessions, &labeling, true).unwrap();
        let (windows, meta_back) = load_cache(dir.path()).unwrap();
        assert_eq!(meta, meta_back);
        check_cache_coverage(&meta_back, &labeling, true).unwrap();
        check_cache_coverage(&meta_back, &labeling, false).unwrap();

        let cats = [Category::Eb, Category::H];
        let raw = build_dataset(&sessions, &labeling, &cats, FeatureMode::Local).unwrap();
        let cached = dataset_from_cache(&windows, &meta_back, &cats, FeatureMode::Local).unwrap();
        assert_eq!(raw.users, cached.users);
        assert_eq!(raw.pools, cached.pools);
        // regime data keeps bands far from the thresholds, so both
        // construction paths materialize exactly the same windows
        assert_eq!(raw.windows, cached.windows);
    }

    #[test]
    fn coverage_rejects_changed_window() {
        let (sessions, labeling) = synth_sessions(2, 13);
        let dir = tempfile::tempdir().unwrap();
        let meta = write_cache(dir.path(), &sessions, &labeling, false).unwrap();
        let other = LabelingConfig {
            window_length: 20,
            ..labeling
        };
        assert!(check_cache_coverage(&meta, &other, false).is_err());
    }
}
