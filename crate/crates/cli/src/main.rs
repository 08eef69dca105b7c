//! `sqlsess`: extract features from SQL query logs and segment sessions into
//! explorations.

mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sqlsess_core::baselines;
use sqlsess_core::classifier::{self, LinearModel};
use sqlsess_core::config::Config;
use sqlsess_core::evaluation;
use sqlsess_core::features;
use sqlsess_core::fragments::{fragment_workload, SchemaCatalog};
use sqlsess_core::indexes::{self, ThresholdSet};
use sqlsess_core::vote;
use sqlsess_core::weak::{self, LabelModel};
use sqlsess_core::workload::{self, Workload};

use report::Format;

#[derive(Debug, Parser)]
#[command(name = "sqlsess", version, about = "SQL workload features and session segmentation")]
struct Cli {
    /// JSON configuration file (falls back to $SQLSESS_CONFIG)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for every randomized step (overrides the config)
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Keep SELECT statements of a raw log and group them into sessions
    Extract(ExtractArgs),
    /// Parse queries and compute metrics and similarity indexes
    Features(FeaturesArgs),
    /// Label every query SEGMENT or CONTINUE
    Segment(SegmentArgs),
    /// Score a prediction column against ground truth
    Evaluate(EvaluateArgs),
    /// Agreement statistics between prediction columns
    Agree(AgreeArgs),
    /// Descriptive statistics and feature correlations
    Profile(ProfileArgs),
}

#[derive(Debug, Args)]
struct ExtractArgs {
    /// Raw log CSV (user and statement columns, optional timestamp)
    #[arg(long)]
    input: PathBuf,
    /// Canonical CSV to write (stdout when absent)
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also compute features and indexes, expanding `*` through this catalog
    #[arg(long)]
    catalog: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FeaturesArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Table-to-attributes JSON used to expand `*`
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Estimate NoP/NCP of queries whose `*` could not be expanded
    #[arg(long)]
    impute: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Vote,
    Classifier,
    Weak,
    Timestamp,
    Clustering,
    Majority,
}

#[derive(Debug, Args)]
struct SegmentArgs {
    #[arg(long, value_enum)]
    method: Method,
    /// Workload to label (same as --apply)
    #[arg(long)]
    input: Option<PathBuf>,
    /// Workload to label
    #[arg(long, conflicts_with = "input")]
    apply: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Calibration percentile for vote thresholds
    #[arg(long)]
    percentile: Option<f64>,
    /// Threshold JSON for the vote method
    #[arg(long)]
    thresholds: Option<PathBuf>,
    /// Labeled workload for the classifier and weak methods
    #[arg(long)]
    train: Option<PathBuf>,
    /// Previously saved classifier or label model
    #[arg(long)]
    model: Option<PathBuf>,
    /// Reweight training rows towards the target by kernel mean matching
    #[arg(long)]
    kmm: bool,
    /// Where to save the thresholds or the fitted model
    #[arg(long)]
    model_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    input: PathBuf,
    /// Prediction column, e.g. pred_vote
    #[arg(long)]
    pred: String,
    #[arg(long, default_value = "ground_truth")]
    truth: String,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Debug, Args)]
struct AgreeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated prediction columns
    #[arg(long, value_delimiter = ',', required = true)]
    methods: Vec<String>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Debug, Args)]
struct ProfileArgs {
    #[arg(long)]
    input: PathBuf,
    /// Group by explorations of this label column instead of sessions
    #[arg(long)]
    split_by: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

enum Failure {
    Usage(String),
    Data(sqlsess_core::Error),
}

impl From<sqlsess_core::Error> for Failure {
    fn from(e: sqlsess_core::Error) -> Self {
        Failure::Data(e)
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn load_config(cli: &Cli) -> CliResult<Config> {
    let path = cli
        .config
        .clone()
        .or_else(|| std::env::var_os("SQLSESS_CONFIG").map(PathBuf::from));
    let mut config = match path {
        Some(p) => {
            require_file(&p)?;
            Config::load(&p)?
        }
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn require_file(path: &Path) -> CliResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("{}: no such file", path.display())))
    }
}

fn read_workload(path: &Path) -> CliResult<Workload> {
    require_file(path)?;
    Ok(workload::read_csv(path)?)
}

fn write_workload(w: &Workload, path: Option<&Path>) -> CliResult {
    match path {
        Some(p) => workload::write_csv(w, p)?,
        None => workload::write_csv_to(w, std::io::stdout().lock())?,
    }
    Ok(())
}

fn write_json(value: &impl serde::Serialize, path: &Path) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(sqlsess_core::Error::from)?;
    std::fs::write(path, text + "\n").map_err(|e| {
        Failure::Data(sqlsess_core::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })
}

fn run(cli: Cli) -> CliResult {
    let config = load_config(&cli)?;
    match cli.command {
        Command::Extract(a) => extract(a, &config),
        Command::Features(a) => compute_features(a, &config),
        Command::Segment(a) => segment(a, &config),
        Command::Evaluate(a) => {
            let w = read_workload(&a.input)?;
            let pred = w.require_labels(&a.pred)?;
            let truth = w.require_labels(&a.truth)?;
            let r = evaluation::score(&pred, &truth)?;
            print!("{}", report::evaluation(&r, a.format));
            Ok(())
        }
        Command::Agree(a) => {
            let w = read_workload(&a.input)?;
            let r = evaluation::agreement(&w, &a.methods)?;
            print!("{}", report::agreement(&r, a.format));
            Ok(())
        }
        Command::Profile(a) => {
            let w = read_workload(&a.input)?;
            let p = evaluation::profile(&w, a.split_by.as_deref())?;
            let c = evaluation::correlate(&w)?;
            print!("{}", report::profile(&p, &c, a.format));
            Ok(())
        }
    }
}

fn extract(a: ExtractArgs, config: &Config) -> CliResult {
    require_file(&a.input)?;
    let log = workload::read_raw_log(&a.input)?;
    let total = log.len();
    let selects = workload::filter_selects(log);
    log::info!("kept {} of {} statements", selects.len(), total);
    let sessions = workload::assemble_sessions(selects);
    let mut w = Workload::new(sessions);
    eprintln!(
        "{} statements, {} SELECT, {} sessions",
        total,
        w.num_queries(),
        w.sessions.len()
    );
    if let Some(p) = &a.catalog {
        add_features(&mut w, Some(p), false, config)?;
    }
    write_workload(&w, a.output.as_deref())
}

fn compute_features(a: FeaturesArgs, config: &Config) -> CliResult {
    let mut w = read_workload(&a.input)?;
    add_features(&mut w, a.catalog.as_deref(), a.impute, config)?;
    write_workload(&w, a.output.as_deref())
}

fn add_features(w: &mut Workload, catalog: Option<&Path>, impute: bool, config: &Config) -> CliResult {
    let catalog = match catalog {
        Some(p) => {
            require_file(p)?;
            SchemaCatalog::load(p)?
        }
        None => SchemaCatalog::new(),
    };
    let failures = fragment_workload(w, &catalog);
    if failures > 0 {
        eprintln!("{failures} statements could not be parsed");
    }
    features::compute_features(w)?;
    if impute {
        let model = features::fit_imputation(w, config.seed)?;
        let n = features::impute(w, &model);
        eprintln!(
            "imputed {n} queries (holdout R2: NoP {:.3}, NCP {:.3})",
            model.nop.r2_holdout, model.ncp.r2_holdout
        );
    }
    indexes::compute_indexes(w, &config.indexes)?;
    Ok(())
}

/// Indexes are derived from features; fill them in when a file lacks them.
fn ensure_indexes(w: &mut Workload, config: &Config) -> CliResult {
    if w.queries().any(|q| q.indexes.is_none()) {
        indexes::compute_indexes(w, &config.indexes)?;
    }
    Ok(())
}

fn segment(a: SegmentArgs, config: &Config) -> CliResult {
    let target_path = a
        .input
        .clone()
        .or_else(|| a.apply.clone())
        .ok_or_else(|| usage("segment needs --input or --apply"))?;
    let mut target = read_workload(&target_path)?;
    let needs_indexes = !matches!(a.method, Method::Timestamp | Method::Majority);
    if needs_indexes {
        ensure_indexes(&mut target, config)?;
    }

    match a.method {
        Method::Vote => {
            let thresholds = match (&a.thresholds, &config.vote.thresholds) {
                (Some(p), _) => {
                    require_file(p)?;
                    ThresholdSet::load(p)?
                }
                (None, Some(t)) if a.percentile.is_none() => *t,
                _ => {
                    let k = a.percentile.unwrap_or(config.vote.percentile);
                    indexes::calibrate_thresholds(&target, k)?
                }
            };
            log::info!("thresholds {thresholds:?}");
            vote::vote_segment(&mut target, &thresholds, config.vote.strict)?;
            if let Some(p) = &a.model_out {
                write_json(&thresholds, p)?;
            }
        }
        Method::Classifier => {
            let model = match (&a.model, &a.train) {
                (Some(p), _) => {
                    require_file(p)?;
                    LinearModel::load(p)?
                }
                (None, Some(train)) => {
                    let mut labeled = read_workload(train)?;
                    ensure_indexes(&mut labeled, config)?;
                    let t = a.kmm.then_some(&target);
                    let out = classifier::fit_classifier(&labeled, t, &config.classifier, config.seed)?;
                    if let Some(r) = &out.test_report {
                        eprintln!(
                            "held-out: accuracy {:.3} precision {:.3} recall {:.3} F {:.3}",
                            r.accuracy, r.precision, r.recall, r.f_measure
                        );
                    }
                    out.model
                }
                (None, None) => return Err(usage("classifier needs --train or --model")),
            };
            classifier::predict(&mut target, &model)?;
            if let Some(p) = &a.model_out {
                write_json(&model, p)?;
            }
        }
        Method::Weak => {
            let model = match (&a.model, &a.train) {
                (Some(p), _) => {
                    require_file(p)?;
                    LabelModel::load(p)?
                }
                (None, Some(train)) => {
                    let mut labeled = read_workload(train)?;
                    ensure_indexes(&mut labeled, config)?;
                    let t = weak::fit_weak(&labeled, &config.weak)?;
                    eprintln!(
                        "labeling functions: {} (F on training data {:.3})",
                        t.model.lfs.join(", "),
                        t.f_measure
                    );
                    t.model
                }
                (None, None) => return Err(usage("weak needs --train or --model")),
            };
            weak::apply_weak(&mut target, &model)?;
            if let Some(p) = &a.model_out {
                write_json(&model, p)?;
            }
        }
        Method::Timestamp => {
            let labels = baselines::timestamp_segment(&target, config.baselines.gap_minutes)?;
            target.set_predictions("timestamp", &labels)?;
        }
        Method::Clustering => {
            let labels = baselines::clustering_segment(&target)?;
            target.set_predictions("clustering", &labels)?;
        }
        Method::Majority => {
            let labels = baselines::majority_class_baseline(&target);
            target.set_predictions("majority", &labels)?;
        }
    }
    let column = format!("pred_{}", method_name(a.method));
    let n = vote::explorations(&target, &column)?.len();
    eprintln!("{n} explorations in {} sessions", target.sessions.len());
    write_workload(&target, a.output.as_deref())
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Vote => "vote",
        Method::Classifier => "classifier",
        Method::Weak => "weak",
        Method::Timestamp => "timestamp",
        Method::Clustering => "clustering",
        Method::Majority => "majority",
    }
}
