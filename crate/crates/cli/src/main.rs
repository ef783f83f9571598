mod artifact;
mod commands;
mod config;
mod error;

use clap::{Args, Parser, Subcommand};
use config::RunConfig;
use error::CliError;
use graphomotor::stats::{Confound, Target};
use std::path::PathBuf;
use std::process::ExitCode;

/// Dysgraphia assessment from online handwriting recordings.
#[derive(Parser)]
#[command(name = "graphomotor", version)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (defaults to the number of cores).
    #[arg(short = 'j', long, global = true)]
    jobs: Option<usize>,
    /// Repeat for more log output.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate SVC sessions and compute the feature matrix.
    Extract(ExtractArgs),
    /// Group comparisons and score correlations with FDR control.
    Analyze(AnalyzeArgs),
    /// Hyperparameter search and a final model on all rows.
    Train(TrainArgs),
    /// Cross-validate a saved model's configuration and predict every row.
    Evaluate(ModelArgs),
    /// SHAP attributions of a saved model.
    Explain(ExplainArgs),
    /// Generate a synthetic cohort with known group differences.
    Synth(SynthArgs),
    /// Markdown summary of the artifacts in a run directory.
    Report(ReportArgs),
}

fn parse_target(s: &str) -> Result<Target, String> {
    Target::parse(s).ok_or_else(|| {
        let names: Vec<&str> = Target::ALL.iter().map(|t| t.name()).collect();
        format!("unknown target {s:?}; expected one of {}", names.join(", "))
    })
}

fn parse_confound(s: &str) -> Result<Confound, String> {
    [Confound::Sex, Confound::ClassYear]
        .into_iter()
        .find(|c| c.name() == s)
        .ok_or_else(|| format!("unknown confound {s:?}; expected sex or class_year"))
}

#[derive(Args)]
struct OutputArg {
    /// Output directory.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct FilterArgs {
    /// Keep only rows of this class year.
    #[arg(long)]
    class_year: Option<u8>,
}

#[derive(Args)]
struct ExtractArgs {
    /// SVC files or directories containing them.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[command(flatten)]
    output: OutputArg,
    #[arg(long)]
    entropy_bins: Option<usize>,
    /// Pen-stop threshold as a fraction of the p95 on-surface speed.
    #[arg(long)]
    pen_stop_fraction: Option<f64>,
    /// Minimum pen-stop duration in seconds.
    #[arg(long)]
    pen_stop_min_duration: Option<f64>,
    /// Count hover before the first and after the last stroke as in-air movement.
    #[arg(long)]
    include_boundary_air: bool,
    /// Report spatial features in millimetres.
    #[arg(long)]
    units_per_mm: Option<f64>,
    /// Moving-average window applied to positions.
    #[arg(long)]
    smoothing_window: Option<usize>,
    /// Skip unreadable or invalid files instead of stopping (exit code 7).
    #[arg(long)]
    keep_going: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Feature matrix (CSV or JSON).
    matrix: PathBuf,
    #[command(flatten)]
    output: OutputArg,
    #[command(flatten)]
    filter: FilterArgs,
    /// Target to analyse; repeat for several (default: all).
    #[arg(long = "target", value_parser = parse_target)]
    targets: Vec<Target>,
    /// FDR level.
    #[arg(long)]
    alpha: Option<f64>,
    /// Regress this covariate out of every feature first.
    #[arg(long, value_parser = parse_confound)]
    confound: Option<Confound>,
    /// Features listed per target in the summary.
    #[arg(long)]
    top_k: Option<usize>,
}

#[derive(Args)]
struct CvArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Regress this covariate out of the whole matrix first.
    #[arg(long, value_parser = parse_confound)]
    confound: Option<Confound>,
    /// Regress this covariate out inside each training fold.
    #[arg(long, value_parser = parse_confound)]
    confound_within_folds: Option<Confound>,
}

#[derive(Args)]
struct TrainArgs {
    /// Feature matrix (CSV or JSON).
    matrix: PathBuf,
    #[command(flatten)]
    output: OutputArg,
    #[command(flatten)]
    filter: FilterArgs,
    #[arg(long, value_parser = parse_target)]
    target: Option<Target>,
    /// Random-search iterations.
    #[arg(long)]
    n_iter: Option<usize>,
    #[command(flatten)]
    cv: CvArgs,
}

#[derive(Args)]
struct ModelArgs {
    /// Feature matrix (CSV or JSON).
    matrix: PathBuf,
    /// Model file written by `train`.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    output: OutputArg,
    #[command(flatten)]
    filter: FilterArgs,
    #[command(flatten)]
    cv: CvArgs,
}

#[derive(Args)]
struct ExplainArgs {
    /// Feature matrix (CSV or JSON).
    matrix: PathBuf,
    /// Model file written by `train`.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    output: OutputArg,
    #[command(flatten)]
    filter: FilterArgs,
    /// Regress this covariate out of the whole matrix first.
    #[arg(long, value_parser = parse_confound)]
    confound: Option<Confound>,
    /// Features in the summary.
    #[arg(long)]
    top_k: Option<usize>,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    output: OutputArg,
    #[arg(long)]
    n_intact: Option<usize>,
    #[arg(long)]
    n_dd: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Total in-air time of a fully affected child relative to a typical one.
    #[arg(long)]
    in_air_duration_factor: Option<f64>,
    #[arg(long)]
    interruption_factor: Option<f64>,
    #[arg(long)]
    stroke_height_factor: Option<f64>,
    #[arg(long)]
    angular_velocity_ncv_factor: Option<f64>,
    #[arg(long)]
    in_air_tempo_factor: Option<f64>,
    /// Set every effect factor to 1.
    #[arg(long)]
    null: bool,
    #[arg(long)]
    subject_noise: Option<f64>,
    #[arg(long)]
    stroke_noise: Option<f64>,
    #[arg(long)]
    hpsqc_noise: Option<f64>,
    #[arg(long)]
    strokes_per_session: Option<usize>,
    #[arg(long)]
    sampling_rate: Option<f64>,
    #[arg(long)]
    units_per_mm: Option<f64>,
    #[arg(long)]
    tick_rate: Option<f64>,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory holding analysis, evaluation and importance JSON files.
    dir: PathBuf,
    /// Write the report here instead of standard output.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl OutputArg {
    fn apply(self, cfg: &mut RunConfig) {
        set(&mut cfg.output, self.output);
    }
}

impl FilterArgs {
    fn apply(self, cfg: &mut RunConfig) {
        if self.class_year.is_some() {
            cfg.class_year = self.class_year;
        }
    }
}

impl CvArgs {
    fn apply(self, cfg: &mut RunConfig) {
        let m = &mut cfg.model;
        set(&mut m.seed, self.seed);
        set(&mut m.folds, self.folds);
        set(&mut m.repeats, self.repeats);
        if self.confound.is_some() {
            m.confound = self.confound;
        }
        if self.confound_within_folds.is_some() {
            m.confound_within_folds = self.confound_within_folds;
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Extract(a) => {
            cfg.inputs = a.inputs;
            a.output.apply(&mut cfg);
            let f = &mut cfg.features;
            set(&mut f.entropy_bins, a.entropy_bins);
            set(&mut f.pen_stop_speed_fraction, a.pen_stop_fraction);
            set(&mut f.pen_stop_min_duration, a.pen_stop_min_duration);
            f.include_boundary_air |= a.include_boundary_air;
            if a.units_per_mm.is_some() {
                f.units_per_mm = a.units_per_mm;
            }
            if a.smoothing_window.is_some() {
                f.smoothing_window = a.smoothing_window;
            }
            cfg.check()?;
            commands::extract(&cfg, a.keep_going)
        }
        Command::Analyze(a) => {
            cfg.inputs = vec![a.matrix];
            a.output.apply(&mut cfg);
            a.filter.apply(&mut cfg);
            let explicit = !a.targets.is_empty();
            if explicit {
                cfg.stats.targets = a.targets;
            }
            set(&mut cfg.stats.alpha, a.alpha);
            set(&mut cfg.stats.top_k, a.top_k);
            if a.confound.is_some() {
                cfg.stats.confound = a.confound;
            }
            cfg.check()?;
            commands::analyze(&cfg, explicit)
        }
        Command::Train(a) => {
            cfg.inputs = vec![a.matrix];
            a.output.apply(&mut cfg);
            a.filter.apply(&mut cfg);
            set(&mut cfg.model.target, a.target);
            set(&mut cfg.model.n_iter, a.n_iter);
            a.cv.apply(&mut cfg);
            cfg.check()?;
            commands::train_cmd(&cfg)
        }
        Command::Evaluate(a) => {
            cfg.inputs = vec![a.matrix];
            a.output.apply(&mut cfg);
            a.filter.apply(&mut cfg);
            a.cv.apply(&mut cfg);
            cfg.check()?;
            commands::evaluate(&cfg, &a.model)
        }
        Command::Explain(a) => {
            cfg.inputs = vec![a.matrix];
            a.output.apply(&mut cfg);
            a.filter.apply(&mut cfg);
            if a.confound.is_some() {
                cfg.model.confound = a.confound;
            }
            set(&mut cfg.model.shap_top_k, a.top_k);
            cfg.check()?;
            commands::explain(&cfg, &a.model)
        }
        Command::Synth(a) => {
            a.output.apply(&mut cfg);
            let s = &mut cfg.synth;
            if a.null {
                s.factors = graphomotor::synth::EffectFactors::NULL;
            }
            set(&mut s.n_intact, a.n_intact);
            set(&mut s.n_dd, a.n_dd);
            set(&mut s.seed, a.seed);
            set(&mut s.factors.in_air_duration, a.in_air_duration_factor);
            set(&mut s.factors.interruption_rate, a.interruption_factor);
            set(&mut s.factors.stroke_height, a.stroke_height_factor);
            set(&mut s.factors.angular_velocity_ncv, a.angular_velocity_ncv_factor);
            set(&mut s.factors.in_air_tempo, a.in_air_tempo_factor);
            set(&mut s.subject_noise, a.subject_noise);
            set(&mut s.stroke_noise, a.stroke_noise);
            set(&mut s.hpsqc_noise, a.hpsqc_noise);
            set(&mut s.strokes_per_session, a.strokes_per_session);
            set(&mut s.sampling_rate, a.sampling_rate);
            set(&mut s.units_per_mm, a.units_per_mm);
            set(&mut s.tick_rate, a.tick_rate);
            cfg.check()?;
            commands::synth(&cfg)
        }
        Command::Report(a) => {
            cfg.check()?;
            commands::report(&cfg, &a.dir, a.output.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
