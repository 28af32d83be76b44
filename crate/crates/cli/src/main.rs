use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use hpscope_core::advisor::render_text;
use hpscope_core::bench::{
    analyze, render_svgs, run_analyze, simulate_study, AnalyzeOptions, BenchError, Formats, PlotBundle, Sampler,
    SyntheticSpec, PRESETS,
};
use hpscope_core::forest::{ForestError, RegressionForest};
use hpscope_core::shap::{explain_all, rank_features};
use hpscope_core::study::{
    aggregate_duplicates, encode, filter_by_objective, parse_study_with, Fixture, ObjectiveSense, SearchSpace,
    StudyError, FILTER_THRESHOLDS,
};
use hpscope_core::tpe::TpeConfig;

// A closed pipe (`hpscope advise | head`) is not an error worth reporting.
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Parser)]
#[command(
    name = "hpscope",
    version,
    about = "Surrogate-based interpretability for HPO studies"
)]
struct Cli {
    /// Master seed for simulation and analysis.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Trials must score strictly above this to count as successful.
    #[arg(long, global = true, default_value_t = 0.8)]
    filter_threshold: f64,
    /// Output directory.
    #[arg(long, global = true, default_value = "hpscope-out")]
    out: PathBuf,
    /// Artifact formats to write (comma separated).
    #[arg(long, global = true, value_delimiter = ',', default_values_t = [Format::Csv, Format::Json, Format::Svg])]
    format: Vec<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Debug)]
enum Format {
    Csv,
    Json,
    Svg,
}

impl std::fmt::Display for Format {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Svg => "svg",
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplerKind {
    Random,
    Tpe,
}

#[derive(clap::Args)]
struct StudyArgs {
    /// Search space: `initial`, `intermediate`, `final` or a JSON file.
    #[arg(long)]
    space: String,
    /// JSON-lines trial file.
    #[arg(long)]
    trials: PathBuf,
    /// Objectives in the file are losses to minimize.
    #[arg(long)]
    minimize: bool,
}

#[derive(clap::Args)]
struct AnalysisArgs {
    #[command(flatten)]
    study: StudyArgs,
    /// Fewest successful trials the analysis accepts.
    #[arg(long, default_value_t = 50)]
    min_trials: usize,
    /// Trees in the surrogate forest.
    #[arg(long, default_value_t = 200)]
    trees: usize,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a trial file and summarize it.
    Ingest(StudyArgs),
    /// Generate a study against a synthetic objective.
    Simulate {
        /// Built-in objective.
        #[arg(long, conflicts_with = "spec", default_value = "planted")]
        preset: String,
        /// Synthetic spec JSON file.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "random")]
        sampler: SamplerKind,
        #[arg(long, default_value_t = 800)]
        trials: usize,
    },
    /// Compare TPE with random sampling over paired seeds.
    TpeDemo {
        #[arg(long, default_value = "quadratic")]
        preset: String,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 20)]
        seeds: u64,
    },
    /// Run the full analysis and write a report bundle.
    Analyze(AnalysisArgs),
    /// Print bound recommendations without writing a bundle.
    Advise(AnalysisArgs),
    /// Attribute a saved forest's predictions for each trial.
    Explain {
        #[command(flatten)]
        study: StudyArgs,
        /// Forest document written by `analyze`.
        #[arg(long)]
        forest: PathBuf,
    },
    /// Re-render the SVG figures from a bundle's `plots.json`.
    Render {
        /// `plots.json` from an analysis bundle.
        #[arg(long)]
        plots: PathBuf,
    },
}

#[derive(Debug)]
enum CliError {
    Bench(BenchError),
    Usage(String),
    Io(PathBuf, std::io::Error),
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        CliError::Bench(e)
    }
}

impl From<StudyError> for CliError {
    fn from(e: StudyError) -> Self {
        CliError::Bench(e.into())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Bench(e) => write!(f, "{e}"),
            CliError::Usage(m) => f.write_str(m),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(..) => 1,
            CliError::Bench(e) => match e {
                BenchError::InsufficientData { .. } => 3,
                BenchError::Study(StudyError::Io(_)) | BenchError::Io(_) => 1,
                BenchError::Study(_) | BenchError::Spec(_) | BenchError::Json(_) | BenchError::Shap(_) => 2,
                BenchError::Forest(ForestError::Format(_) | ForestError::DimensionMismatch { .. }) => 2,
                _ => 1,
            },
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn write(path: &Path, content: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::Io(parent.to_path_buf(), e))?;
    }
    fs::write(path, content).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn load_space(arg: &str) -> Result<SearchSpace, CliError> {
    for f in Fixture::ALL {
        if f.file_name().trim_end_matches("_space.json") == arg {
            return Ok(f.space());
        }
    }
    Ok(SearchSpace::from_json_reader(open(Path::new(arg))?)?)
}

fn load_study(args: &StudyArgs) -> Result<hpscope_core::study::Study, CliError> {
    let space = load_space(&args.space)?;
    let sense = if args.minimize {
        ObjectiveSense::Minimize
    } else {
        ObjectiveSense::Maximize
    };
    Ok(parse_study_with(open(&args.trials)?, space, sense)?)
}

fn formats(list: &[Format]) -> Formats {
    Formats {
        csv: list.contains(&Format::Csv),
        json: list.contains(&Format::Json),
        svg: list.contains(&Format::Svg),
    }
}

fn options(cli: &Cli, a: &AnalysisArgs) -> Result<AnalyzeOptions, CliError> {
    if !(0.0..=1.0).contains(&cli.filter_threshold) {
        return Err(CliError::Usage(format!(
            "--filter-threshold must lie in [0, 1], got {}",
            cli.filter_threshold
        )));
    }
    let mut opts = AnalyzeOptions {
        filter_threshold: cli.filter_threshold,
        min_trials: a.min_trials,
        test_fraction: a.test_fraction,
        seed: cli.seed,
        formats: formats(&cli.format),
        ..AnalyzeOptions::default()
    };
    opts.forest.n_trees = a.trees;
    opts.forest.seed = cli.seed;
    Ok(opts)
}

fn spec_from(preset: &str, spec: Option<&Path>, seed: u64) -> Result<SyntheticSpec, CliError> {
    match spec {
        Some(path) => {
            let spec: SyntheticSpec = serde_json::from_reader(open(path)?)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            spec.validate()?;
            Ok(spec)
        }
        None => SyntheticSpec::preset(preset, seed).ok_or_else(|| {
            CliError::Usage(format!(
                "unknown preset `{preset}`; expected one of {}",
                PRESETS.join(", ")
            ))
        }),
    }
}

fn best(study: &hpscope_core::study::Study) -> f64 {
    study.best().map_or(0.0, |t| t.objective)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Ingest(args) => {
            let study = load_study(args)?;
            let aggregated = aggregate_duplicates(&study);
            say!("trials: {}", study.len());
            say!("distinct configurations: {}", aggregated.len());
            for t in FILTER_THRESHOLDS {
                say!("above {t}: {}", filter_by_objective(&aggregated, t).len());
            }
            let mut jsonl = Vec::new();
            study.write_jsonl(&mut jsonl)?;
            write(&cli.out.join("trials.jsonl"), &String::from_utf8_lossy(&jsonl))?;
            if cli.format.contains(&Format::Csv) {
                write(&cli.out.join("encoded.csv"), &encode(&study)?.to_csv())?;
            }
            say!("wrote {}", cli.out.display());
        }
        Command::Simulate {
            preset,
            spec,
            sampler,
            trials,
        } => {
            let spec = spec_from(preset, spec.as_deref(), cli.seed)?;
            let sampler = match sampler {
                SamplerKind::Random => Sampler::Random,
                SamplerKind::Tpe => Sampler::Tpe(TpeConfig {
                    seed: cli.seed,
                    ..TpeConfig::default()
                }),
            };
            let study = simulate_study(&spec, &sampler, *trials, cli.seed)?;
            let mut jsonl = Vec::new();
            study.write_jsonl(&mut jsonl)?;
            write(&cli.out.join("space.json"), &(spec.space.to_json_pretty() + "\n"))?;
            write(&cli.out.join("trials.jsonl"), &String::from_utf8_lossy(&jsonl))?;
            say!(
                "{} trials ({}), best objective {:.6}, wrote {}",
                study.len(),
                sampler.name(),
                best(&study),
                cli.out.display()
            );
        }
        Command::TpeDemo { preset, trials, seeds } => {
            let spec = spec_from(preset, None, cli.seed)?;
            let (mut tpe_best, mut rand_best) = (Vec::new(), Vec::new());
            say!("{:>6} {:>12} {:>12}", "seed", "tpe", "random");
            for s in 0..*seeds {
                let seed = cli.seed.wrapping_add(s);
                let t = simulate_study(&spec, &Sampler::Tpe(TpeConfig::default()), *trials, seed)?;
                let r = simulate_study(&spec, &Sampler::Random, *trials, seed)?;
                say!("{seed:>6} {:>12.6} {:>12.6}", best(&t), best(&r));
                tpe_best.push(best(&t));
                rand_best.push(best(&r));
            }
            say!("{:>6} {:>12.6} {:>12.6}", "median", median(tpe_best), median(rand_best));
        }
        Command::Analyze(args) => {
            let study = load_study(&args.study)?;
            let opts = options(cli, args)?;
            let bundle = run_analyze(&study, &opts, &cli.out)?;
            let a = &bundle.analysis;
            say!(
                "trials {} / distinct {} / above {}: {}",
                a.n_trials,
                a.n_aggregated,
                a.filter_threshold,
                a.n_filtered
            );
            say!(
                "surrogate: train {} test {} mse {:.6} r2 {}",
                a.surrogate.n_train,
                a.surrogate.n_test,
                a.surrogate.test_mse,
                a.surrogate.test_r2.map_or("n/a".into(), |r| format!("{r:.4}"))
            );
            for (name, v) in a.ranking.iter().take(5) {
                say!("  {name:<24} {v:.6}");
            }
            say!("{} files in {}", bundle.manifest.files.len() + 1, cli.out.display());
        }
        Command::Advise(args) => {
            let study = load_study(&args.study)?;
            let opts = options(cli, args)?;
            let a = analyze(&study, &opts)?;
            if cli.format == [Format::Json] {
                let json = serde_json::to_string_pretty(&a.recommendations).map_err(BenchError::from)?;
                say!("{json}");
            } else {
                let _ = write!(std::io::stdout(), "{}", render_text(&a.recommendations));
            }
        }
        Command::Explain { study, forest } => {
            let study = load_study(study)?;
            let text = fs::read_to_string(forest).map_err(|e| CliError::Io(forest.clone(), e))?;
            let forest = RegressionForest::from_json(&text).map_err(BenchError::from)?;
            let m = encode(&study)?;
            if m.columns != forest.columns {
                return Err(CliError::Usage(
                    "forest columns do not match the search space".to_string(),
                ));
            }
            let shap = explain_all(&forest, &m.x, Some(&m.trial_ids)).map_err(BenchError::from)?;
            write(&cli.out.join("shap_values.csv"), &shap.to_csv())?;
            for (name, v) in rank_features(&shap).map_err(BenchError::from)? {
                say!("{name:<24} {v:.6}");
            }
        }
        Command::Render { plots } => {
            let bundle: PlotBundle = serde_json::from_reader(open(plots)?)
                .map_err(|e| CliError::Usage(format!("{}: {e}", plots.display())))?;
            let svgs = render_svgs(&bundle);
            for (path, doc) in &svgs {
                write(&cli.out.join(path), doc)?;
            }
            say!("rendered {} figures into {}", svgs.len(), cli.out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
