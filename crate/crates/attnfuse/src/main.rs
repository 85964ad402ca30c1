//! Command-line pipeline: synthetic data generation, window extraction
//! with caching, fold training, leave-one-user-out evaluation, and
//! cross-run report tables.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use attnfuse::config::FileConfig;
use attnfuse::eval::{
    loocv, loocv_sum_subsets, loocv_with_models, train_all_folds, EvalConfig, TrainParams,
};
use attnfuse::fuse::{FeatureMode, FusionSpec, FusionStrategy};
use attnfuse::pipeline::{
    build_dataset, check_cache_coverage, dataset_from_cache, load_cache, load_inputs, load_models,
    preprocess, write_cache, write_models, write_report, write_subsets, PipelineError,
    TrainArtifacts, TrainedFold,
};
use attnfuse::synth::{generate, AttentionModel, SynthSpec};
use attnfuse::types::Category;
use attnfuse::window::LabelingConfig;

#[derive(Parser)]
#[command(
    name = "attnfuse",
    about = "Windowed facial-feature attention classification with multimodal score fusion",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-user dataset with known structure.
    Synth(SynthArgs),
    /// Extract labeled windows into a cache directory.
    Windows(ExperimentArgs),
    /// Train per-fold models and store them.
    Train(ExperimentArgs),
    /// Run the leave-one-user-out evaluation and write a report.
    Evaluate(ExperimentArgs),
    /// Render a comparison table from several report.json files.
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory (features.csv, attention/, truth.json).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 8)]
    users: usize,
    #[arg(long, default_value_t = 900)]
    session_min: usize,
    #[arg(long, default_value_t = 1800)]
    session_max: usize,
    #[arg(long, default_value_t = 5.0)]
    frame_rate: f64,
    /// Attention model: walk | regimes
    #[arg(long, default_value = "walk")]
    attention: String,
    #[arg(long, default_value_t = 60)]
    episode_seconds: usize,
    /// Full generator spec as JSON; overrides the flags above.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Key = value config file; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Frame-feature CSV.
    #[arg(long)]
    features: Option<PathBuf>,
    /// Directory of per-user attention files (<user>.txt).
    #[arg(long)]
    attention_dir: Option<PathBuf>,
    /// Landmark CSV; derived EAR/HS/NS replace same-category streams.
    #[arg(long)]
    landmarks: Option<PathBuf>,
    /// Window cache directory (windows.jsonl + meta.json).
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Directory with fold models from the train stage.
    #[arg(long)]
    models: Option<PathBuf>,
    /// Output directory of this stage.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Window length in seconds: 30, 60, or 120.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    tau_low: Option<f64>,
    #[arg(long)]
    tau_high: Option<f64>,
    #[arg(long)]
    max_missing: Option<f64>,
    /// local | global
    #[arg(long)]
    feature_mode: Option<String>,
    /// sum | nn | dp | none
    #[arg(long)]
    fusion: Option<String>,
    /// Comma-separated subset of EB,EAR,HS,NS,HP,Exp,H (default: all).
    #[arg(long)]
    categories: Option<String>,
    /// Selected fraction for dp fusion.
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 means all cores. Results are identical for any
    /// thread count.
    #[arg(long)]
    threads: Option<usize>,
    /// Compute label thresholds from training users only (leakage-free).
    #[arg(long)]
    strict_leakage: Option<bool>,
    #[arg(long)]
    svm_tol: Option<f64>,
    #[arg(long)]
    svm_max_passes: Option<usize>,
    #[arg(long)]
    mlp_lr: Option<f64>,
    #[arg(long)]
    mlp_epochs: Option<usize>,
    #[arg(long)]
    mlp_dropout: Option<f64>,
    /// With score-sum fusion: also evaluate every non-empty subset of
    /// the requested categories (shared per-fold models).
    #[arg(long, default_value_t = false)]
    all_subsets: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// report.json files to compare.
    #[arg(long, num_args = 1.., required = true)]
    inputs: Vec<PathBuf>,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Everything an experiment stage needs after merging config file,
/// flags, defaults, and the environment.
struct Resolved {
    features: Option<PathBuf>,
    attention_dir: Option<PathBuf>,
    landmarks: Option<PathBuf>,
    cache: Option<PathBuf>,
    models: Option<PathBuf>,
    out: Option<PathBuf>,
    window: Option<usize>,
    labeling_partial: (f64, f64, f64), // tau_low, tau_high, max_missing
    feature_mode: FeatureMode,
    strategy: FusionStrategy,
    categories: Vec<Category>,
    fraction: f64,
    seed: u64,
    threads: usize,
    strict_leakage: bool,
    train: TrainParams,
    all_subsets: bool,
}

fn fail(msg: &str, code: u8) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn parse_categories(text: &str) -> Result<Vec<Category>, String> {
    let mut out = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        match part.parse::<Category>() {
            Ok(c) => {
                if !out.contains(&c) {
                    out.push(c);
                }
            }
            Err(e) => return Err(e.to_string()),
        }
    }
    if out.is_empty() {
        return Err("no categories given".into());
    }
    Ok(out)
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<Resolved, String> {
        let file = match &self.config {
            Some(path) => FileConfig::load(path).map_err(|e| e.to_string())?,
            None => FileConfig::default(),
        };
        let path_of = |flag: &Option<PathBuf>, key: &str| -> Option<PathBuf> {
            flag.clone().or_else(|| file.get(key).map(PathBuf::from))
        };
        let parse_or = |flag: Option<f64>, key: &str, default: f64| -> Result<f64, String> {
            Ok(flag
                .or(file.get_parsed::<f64>(key, "number").map_err(|e| e.to_string())?)
                .unwrap_or(default))
        };

        let cache = path_of(&self.cache, "cache_dir")
            .or_else(|| std::env::var_os("ATTNFUSE_CACHE_DIR").map(PathBuf::from));
        let fusion_name = self
            .fusion
            .clone()
            .or_else(|| file.get("fusion").map(str::to_string))
            .unwrap_or_else(|| "sum".into());
        let strategy = match fusion_name.as_str() {
            "sum" => FusionStrategy::Sum,
            "nn" => FusionStrategy::NeuralNet,
            "dp" => FusionStrategy::DpSelect,
            "none" => FusionStrategy::Sum, // unimodal: mean of one category
            other => return Err(format!("unknown fusion strategy `{other}`")),
        };
        let categories = match self.categories.as_deref().or_else(|| file.get("categories")) {
            Some(text) => parse_categories(text)?,
            None => Category::ALL.to_vec(),
        };
        if fusion_name == "none" && categories.len() != 1 {
            return Err("fusion `none` expects exactly one category".into());
        }
        let feature_mode = match self
            .feature_mode
            .as_deref()
            .or_else(|| file.get("feature_mode"))
            .unwrap_or("local")
        {
            "local" => FeatureMode::Local,
            "global" => FeatureMode::Global,
            other => return Err(format!("unknown feature mode `{other}`")),
        };
        let window = match self.window {
            Some(w) => Some(w),
            None => file
                .get_parsed::<usize>("window", "integer")
                .map_err(|e| e.to_string())?,
        };
        if let Some(w) = window {
            if ![30, 60, 120].contains(&w) {
                return Err(format!("window must be one of 30, 60, 120 (got {w})"));
            }
        }
        let defaults = TrainParams::default();
        Ok(Resolved {
            features: path_of(&self.features, "features"),
            attention_dir: path_of(&self.attention_dir, "attention_dir"),
            landmarks: path_of(&self.landmarks, "landmarks"),
            cache,
            models: path_of(&self.models, "models_dir"),
            out: path_of(&self.out, "out_dir"),
            window,
            labeling_partial: (
                parse_or(self.tau_low, "tau_low", 10.0)?,
                parse_or(self.tau_high, "tau_high", 90.0)?,
                parse_or(self.max_missing, "max_missing", 0.1)?,
            ),
            feature_mode,
            strategy,
            categories,
            fraction: parse_or(self.fraction, "fraction", 0.10)?,
            seed: self
                .seed
                .or(file.get_parsed::<u64>("seed", "integer").map_err(|e| e.to_string())?)
                .unwrap_or(0),
            threads: self
                .threads
                .or(file
                    .get_parsed::<usize>("threads", "integer")
                    .map_err(|e| e.to_string())?)
                .unwrap_or(0),
            strict_leakage: self
                .strict_leakage
                .or(file.get_bool("strict_leakage").map_err(|e| e.to_string())?)
                .unwrap_or(true),
            all_subsets: self.all_subsets
                || file.get_bool("all_subsets").map_err(|e| e.to_string())?.unwrap_or(false),
            train: TrainParams {
                svm_tol: parse_or(self.svm_tol, "svm_tol", defaults.svm_tol)?,
                svm_max_passes: self
                    .svm_max_passes
                    .or(file
                        .get_parsed::<usize>("svm_max_passes", "integer")
                        .map_err(|e| e.to_string())?)
                    .unwrap_or(defaults.svm_max_passes),
                mlp_lr: parse_or(self.mlp_lr, "mlp_lr", defaults.mlp_lr)?,
                mlp_epochs: self
                    .mlp_epochs
                    .or(file
                        .get_parsed::<usize>("mlp_epochs", "integer")
                        .map_err(|e| e.to_string())?)
                    .unwrap_or(defaults.mlp_epochs),
                mlp_dropout: parse_or(self.mlp_dropout, "mlp_dropout", defaults.mlp_dropout)?,
            },
        })
    }
}

impl Resolved {
    fn labeling(&self, window: usize) -> LabelingConfig {
        LabelingConfig {
            window_length: window,
            low_percentile: self.labeling_partial.0,
            high_percentile: self.labeling_partial.1,
            max_missing_fraction: self.labeling_partial.2,
        }
    }

    fn eval_config(&self, window: usize) -> EvalConfig {
        EvalConfig {
            fusion: FusionSpec {
                strategy: self.strategy,
                categories: self.categories.clone(),
                feature_mode: self.feature_mode,
                dp_fraction: self.fraction,
            },
            labeling: self.labeling(window),
            strict_leakage: self.strict_leakage,
            seed: self.seed,
            train: self.train.clone(),
        }
    }

    fn init_threads(&self) {
        if self.threads > 0 {
            // double initialization (e.g. in tests) is harmless
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(self.threads)
                .build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // clap usage problems are validation failures
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match cli.command {
        Command::Synth(args) => run_synth(&args),
        Command::Windows(args) => run_windows(&args),
        Command::Train(args) => run_train(&args),
        Command::Evaluate(args) => run_evaluate(&args),
        Command::Report(args) => run_report(&args),
    }
}

fn run_synth(args: &SynthArgs) -> ExitCode {
    let spec = if let Some(path) = &args.spec {
        match std::fs::read_to_string(path)
            .map_err(|e| e.to_string())
            .and_then(|text| serde_json::from_str::<SynthSpec>(&text).map_err(|e| e.to_string()))
        {
            Ok(spec) => spec,
            Err(e) => return fail(&format!("cannot load synth spec: {e}"), 1),
        }
    } else {
        let attention = match args.attention.as_str() {
            "walk" => AttentionModel::RandomWalk { step_std: 4.0 },
            "regimes" => SynthSpec::regimes(args.episode_seconds),
            other => return fail(&format!("unknown attention model `{other}`"), 1),
        };
        SynthSpec {
            n_users: args.users,
            session_seconds_min: args.session_min,
            session_seconds_max: args.session_max,
            frame_rate: args.frame_rate,
            attention,
            ..Default::default()
        }
    };
    let started = Instant::now();
    match generate(&spec, args.seed, &args.out) {
        Ok(truth) => {
            eprintln!(
                "synth: wrote {} users to {} in {:.2?}",
                truth.session_seconds.len(),
                args.out.display(),
                started.elapsed()
            );
            ExitCode::SUCCESS
        }
        Err(attnfuse::synth::SynthError::InvalidSpec(msg)) => fail(&msg, 1),
        Err(e) => fail(&e.to_string(), 2),
    }
}

fn pipeline_fail(e: PipelineError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn load_sessions(
    resolved: &Resolved,
    window: usize,
) -> Result<Vec<attnfuse::pipeline::SessionData>, PipelineError> {
    let features = resolved.features.as_ref().ok_or_else(|| {
        PipelineError::Input("missing --features (or `features` in the config file)".into())
    })?;
    let attention_dir = resolved.attention_dir.as_ref().ok_or_else(|| {
        PipelineError::Input("missing --attention-dir (or `attention_dir`)".into())
    })?;
    let inputs = load_inputs(features, attention_dir, resolved.landmarks.as_deref())?;
    preprocess(&inputs, &resolved.labeling(window))
}

fn run_windows(args: &ExperimentArgs) -> ExitCode {
    let resolved = match args.resolve() {
        Ok(r) => r,
        Err(e) => return fail(&e, 1),
    };
    resolved.init_threads();
    let Some(window) = resolved.window else {
        return fail("the windows stage needs --window", 1);
    };
    let Some(out) = resolved.out.clone().or_else(|| resolved.cache.clone()) else {
        return fail("need --out or --cache (or ATTNFUSE_CACHE_DIR) for the window cache", 1);
    };
    let started = Instant::now();
    let sessions = match load_sessions(&resolved, window) {
        Ok(s) => s,
        Err(e) => return pipeline_fail(e),
    };
    match write_cache(&out, &sessions, &resolved.labeling(window), resolved.strict_leakage) {
        Ok(meta) => {
            let labeled: usize = meta.labeled_counts.values().sum();
            let candidates: usize = meta.candidate_counts.values().sum();
            eprintln!(
                "windows: {labeled} labeled of {candidates} candidates ({} users) -> {} in {:.2?}",
                meta.pools.len(),
                out.display(),
                started.elapsed()
            );
            ExitCode::SUCCESS
        }
        Err(e) => pipeline_fail(e),
    }
}

/// Build the evaluation dataset from the cache when available, otherwise
/// from raw inputs. Returns the dataset and the effective window length.
fn build_eval_dataset(
    resolved: &Resolved,
) -> Result<(attnfuse::eval::EvalDataset, usize), PipelineError> {
    let use_cache = resolved.cache.is_some() && resolved.features.is_none();
    if use_cache {
        let dir = resolved.cache.clone().expect("checked above");
        let (windows, meta) = load_cache(&dir)?;
        let window = resolved.window.unwrap_or(meta.labeling.window_length);
        if window != meta.labeling.window_length {
            return Err(PipelineError::CacheMismatch(format!(
                "cache window is {}s but {window}s was requested",
                meta.labeling.window_length
            )));
        }
        let labeling = resolved.labeling(window);
        check_cache_coverage(&meta, &labeling, resolved.strict_leakage)?;
        let dataset =
            dataset_from_cache(&windows, &meta, &resolved.categories, resolved.feature_mode)?;
        Ok((dataset, window))
    } else {
        let window = resolved.window.ok_or_else(|| {
            PipelineError::Input("need --window when evaluating from raw inputs".into())
        })?;
        let sessions = load_sessions(resolved, window)?;
        let dataset = build_dataset(
            &sessions,
            &resolved.labeling(window),
            &resolved.categories,
            resolved.feature_mode,
        )?;
        Ok((dataset, window))
    }
}

fn run_train(args: &ExperimentArgs) -> ExitCode {
    let resolved = match args.resolve() {
        Ok(r) => r,
        Err(e) => return fail(&e, 1),
    };
    resolved.init_threads();
    let Some(out) = resolved.out.clone() else {
        return fail("the train stage needs --out for its models", 1);
    };
    let started = Instant::now();
    let (dataset, window) = match build_eval_dataset(&resolved) {
        Ok(v) => v,
        Err(e) => return pipeline_fail(e),
    };
    let config = resolved.eval_config(window);
    let folds = match train_all_folds(&dataset, &config) {
        Ok(f) => f,
        Err(e) => return pipeline_fail(PipelineError::Eval(e)),
    };
    let artifacts = TrainArtifacts {
        config,
        folds: folds
            .into_iter()
            .map(|f| match f {
                Ok(m) => TrainedFold::Trained(m),
                Err(s) => TrainedFold::Skipped(s),
            })
            .collect(),
    };
    match write_models(&out, &artifacts) {
        Ok(()) => {
            eprintln!(
                "train: {} folds -> {} in {:.2?}",
                artifacts.folds.len(),
                out.display(),
                started.elapsed()
            );
            ExitCode::SUCCESS
        }
        Err(e) => pipeline_fail(e),
    }
}

fn run_evaluate(args: &ExperimentArgs) -> ExitCode {
    let resolved = match args.resolve() {
        Ok(r) => r,
        Err(e) => return fail(&e, 1),
    };
    resolved.init_threads();
    let Some(out) = resolved.out.clone() else {
        return fail("the evaluate stage needs --out for its report", 1);
    };
    let started = Instant::now();
    let (dataset, window) = match build_eval_dataset(&resolved) {
        Ok(v) => v,
        Err(e) => return pipeline_fail(e),
    };
    let config = resolved.eval_config(window);
    let report = if let Some(models_dir) = &resolved.models {
        match load_models(models_dir, &config) {
            Ok(models) => loocv_with_models(&dataset, &config, &models),
            Err(e) => return pipeline_fail(e),
        }
    } else {
        loocv(&dataset, &config)
    };
    let report = match report {
        Ok(r) => r,
        Err(e) => return pipeline_fail(PipelineError::Eval(e)),
    };
    if resolved.all_subsets {
        let subsets = match loocv_sum_subsets(&dataset, &config) {
            Ok(s) => s,
            Err(e) => return pipeline_fail(PipelineError::Eval(e)),
        };
        if let Err(e) = write_subsets(&out, &subsets) {
            return pipeline_fail(e);
        }
        eprintln!("evaluate: wrote {} category subsets", subsets.len());
    }
    match write_report(&out, &report) {
        Ok(()) => {
            eprintln!(
                "evaluate: {} windows, pooled accuracy {:.4} (held-out {:.4}, AUC {:.4}) -> {} in {:.2?}",
                report.pooled.n_windows,
                report.pooled.oracle_accuracy,
                report.pooled.heldout_accuracy,
                report.pooled.auc,
                out.display(),
                started.elapsed()
            );
            ExitCode::SUCCESS
        }
        Err(e) => pipeline_fail(e),
    }
}

fn run_report(args: &ReportArgs) -> ExitCode {
    let mut reports = Vec::new();
    for path in &args.inputs {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => return fail(&format!("{}: {e}", path.display()), 2),
        };
        match serde_json::from_str::<attnfuse::eval::EvalReport>(&text) {
            Ok(r) => reports.push(r),
            Err(e) => return fail(&format!("{}: {e}", path.display()), 2),
        }
    }
    let table = comparison_table(&reports);
    match &args.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, table) {
                return fail(&e.to_string(), 2);
            }
        }
        None => print!("{table}"),
    }
    ExitCode::SUCCESS
}

/// Rows are fusion configurations, columns are window lengths, cells are
/// pooled max-accuracy percentages.
fn comparison_table(reports: &[attnfuse::eval::EvalReport]) -> String {
    use std::fmt::Write as _;
    let mut windows: Vec<usize> = reports.iter().map(|r| r.window_length).collect();
    windows.sort_unstable();
    windows.dedup();
    let mut rows: BTreeMap<String, BTreeMap<usize, f64>> = BTreeMap::new();
    for r in reports {
        let cats: Vec<&str> = r.config.fusion.categories.iter().map(|c| c.name()).collect();
        let label = format!(
            "{:?}/{:?} {}",
            r.config.fusion.strategy,
            r.config.fusion.feature_mode,
            cats.join("+")
        );
        rows.entry(label)
            .or_default()
            .insert(r.window_length, r.pooled.oracle_accuracy);
    }
    let mut s = String::new();
    let _ = write!(s, "{:<44}", "configuration");
    for w in &windows {
        let _ = write!(s, "  W={w:<4}");
    }
    let _ = writeln!(s);
    for (label, cells) in rows {
        let _ = write!(s, "{label:<44}");
        for w in &windows {
            match cells.get(w) {
                Some(acc) => {
                    let _ = write!(s, "  {:<6.2}", acc * 100.0);
                }
                None => {
                    let _ = write!(s, "  {:<6}", "-");
                }
            }
        }
        let _ = writeln!(s);
    }
    s
}
