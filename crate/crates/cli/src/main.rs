//! `powertail`: fit power-law tails, compare tail estimators, simulate growth
//! models and run the earnings pipeline.
//!
//! Exit codes: 0 success, 1 other failure, 2 invalid input or configuration,
//! 3 sample too small, 4 degenerate data. Data goes to stdout, diagnostics to
//! stderr. `POWERTAIL_THREADS` sets the worker thread count.

mod input;
mod manifest;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use powertail::earnings::{self, FixtureConfig, Floor};
use powertail::fit::{select_xmin, DEFAULT_MIN_TAIL};
use powertail::gof::{gof_pvalue, FitReport};
use powertail::growth::{self, GrowthConfig, GrowthModel, SweepOptions};
use powertail::pipeline::{run_pipeline, PipelineOptions};
use powertail::powerlaw::{pl_sample, PowerLawModel};
use powertail::rng::DEFAULT_SEED;
use powertail::tail_index::{estimator_comparison_with, ComparisonOptions};
use powertail::{Error, FitOptions, Kind, Result, Sample};
use serde::Serialize;

use manifest::Recorder;

pub const THREADS_ENV: &str = "POWERTAIL_THREADS";

#[derive(Parser)]
#[command(name = "powertail", version, about = "Power-law tail analysis of earnings and attention data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum KindArg {
    Continuous,
    Discrete,
}

impl From<KindArg> for Kind {
    fn from(k: KindArg) -> Kind {
        match k {
            KindArg::Continuous => Kind::Continuous,
            KindArg::Discrete => Kind::Discrete,
        }
    }
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ModelArg {
    Copy,
    Ba,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum FixtureArg {
    /// Creator-earnings records in the pipeline schema.
    Earnings,
    /// One column of continuous power-law draws.
    Pareto,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a power-law tail to one numeric column.
    Fit(FitArgs),
    /// Simulate the copying or Barabási–Albert growth model.
    Simulate(SimulateArgs),
    /// Run the earnings pipeline and write tables, figures and a manifest.
    Pipeline(PipelineArgs),
    /// Compare CNS, Hill, adjusted Hill and moments exponents.
    Compare(CompareArgs),
    /// Measure the copying-model exponent over a range of exploration rates.
    Sweep(SweepArgs),
    /// Write a deterministic synthetic input file.
    GenFixture(GenFixtureArgs),
}

#[derive(clap::Args, Serialize)]
struct FitArgs {
    input: PathBuf,
    /// Column to read when the file has a header.
    #[arg(long)]
    column: Option<String>,
    #[arg(long, value_enum, default_value = "continuous")]
    kind: KindArg,
    /// Fixed threshold; skips the threshold scan.
    #[arg(long)]
    xmin: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MIN_TAIL)]
    min_tail: usize,
    /// Goodness-of-fit bootstrap replicates (0 = off, otherwise at least 100).
    #[arg(long, default_value_t = 0)]
    bootstrap: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Write a run manifest here.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(clap::Args, Serialize)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    #[arg(long)]
    nodes: usize,
    /// Exploration probability (copying model).
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    /// Edges per new node (BA model).
    #[arg(long, default_value_t = 2)]
    m: usize,
    /// Attention events per arriving creator (copying model).
    #[arg(long, default_value_t = growth::DEFAULT_EVENTS_PER_NODE)]
    events_per_node: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Fit the degree sequence and print measured and predicted exponents.
    #[arg(long)]
    fit: bool,
    /// Degree CSV destination. Defaults to stdout unless --fit is given.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(clap::Args, Serialize)]
struct PipelineArgs {
    input: PathBuf,
    #[arg(long, default_value_t = earnings::DEFAULT_FLOOR)]
    floor: f64,
    /// Keep earnings equal to the floor.
    #[arg(long)]
    floor_inclusive: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    bootstrap: usize,
    #[arg(long, default_value_t = DEFAULT_MIN_TAIL)]
    min_tail: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(clap::Args, Serialize)]
struct CompareArgs {
    input: PathBuf,
    #[arg(long)]
    column: Option<String>,
    /// Use this number of order statistics instead of the double bootstrap.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(clap::Args, Serialize)]
struct SweepArgs {
    /// Comma-separated exploration probabilities in [0, 0.9].
    #[arg(long, value_delimiter = ',', default_value = "0,0.2,0.5")]
    gammas: Vec<f64>,
    #[arg(long, default_value_t = 200_000)]
    nodes: usize,
    #[arg(long, default_value_t = 5)]
    seeds: usize,
    #[arg(long, default_value_t = growth::DEFAULT_EVENTS_PER_NODE)]
    events_per_node: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(clap::Args, Serialize)]
struct GenFixtureArgs {
    #[arg(value_enum)]
    what: FixtureArg,
    #[arg(long)]
    out: PathBuf,
    /// Earnings: fraction of the reference creator counts.
    #[arg(long, default_value_t = 0.05)]
    scale: f64,
    /// Pareto: number of draws.
    #[arg(long, default_value_t = 5_000)]
    n: usize,
    /// Pareto: density exponent.
    #[arg(long, default_value_t = 2.5)]
    alpha: f64,
    /// Pareto: lower bound.
    #[arg(long, default_value_t = 1.0)]
    xmin: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Schema(_)
        | Error::InvalidArgument(_)
        | Error::Domain(_)
        | Error::KindMismatch(_)
        | Error::Csv(_)
        | Error::Json(_) => 2,
        Error::SampleTooSmall { .. } | Error::EmptySample | Error::InsufficientGrid { .. } => 3,
        Error::DegenerateTail(_) | Error::SingularDesign(_) | Error::ExponentialRegime => 4,
        Error::Io { .. } | Error::Render { .. } => 1,
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        let n: usize = raw.trim().parse().map_err(|_| {
            Error::InvalidArgument(format!("{THREADS_ENV} must be a positive integer, got '{raw}'"))
        })?;
        if n == 0 {
            return Err(Error::InvalidArgument(format!("{THREADS_ENV} must be positive")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Pipeline(a) => cmd_pipeline(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::GenFixture(a) => cmd_gen_fixture(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    std::fs::write(path, contents).map_err(io_err(path))
}

fn stdout_bytes(contents: &[u8]) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(contents)
        .and_then(|()| out.flush())
        .map_err(io_err(Path::new("<stdout>")))
}

fn json_line<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut buf = serde_json::to_vec_pretty(value)?;
    buf.push(b'\n');
    Ok(buf)
}

fn load_sample(path: &Path, column: Option<&str>, kind: Kind) -> Result<Sample> {
    let col = input::read_column(path, column)?;
    if let Some(name) = &col.name {
        eprintln!("note: reading column '{name}'");
    }
    if col.skipped_empty > 0 {
        eprintln!("note: skipped {} empty cells", col.skipped_empty);
    }
    let (sample, rejected) = Sample::with_rejections(col.values, kind)?;
    if rejected > 0 {
        eprintln!("note: dropped {rejected} values outside the domain of a {kind} power law");
    }
    Ok(sample)
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    let mut rec = Recorder::new("fit", &a, Some(a.seed));
    rec.input(&a.input)?;
    let kind: Kind = a.kind.into();
    let sample = load_sample(&a.input, a.column.as_deref(), kind)?;
    let mut opts = FitOptions {
        kind,
        ..FitOptions::default()
    }
    .with_min_tail(a.min_tail);
    if let Some(x) = a.xmin {
        opts = opts.with_xmin(x);
    }
    let fit = select_xmin(&sample, &opts)?;
    let gof = if a.bootstrap > 0 {
        Some(gof_pvalue(&sample, &fit, a.bootstrap, a.seed, &opts)?)
    } else {
        None
    };
    let buf = json_line(&FitReport::new(&fit, gof.as_ref()))?;
    stdout_bytes(&buf)?;
    if let Some(path) = &a.manifest {
        rec.output("<stdout>", &buf);
        rec.finish(path)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulationSummary {
    model: GrowthModel,
    nodes: usize,
    gamma: Option<f64>,
    m: Option<usize>,
    events_per_node: Option<usize>,
    seed: u64,
    total: u64,
    expected_total: u64,
    /// Density exponent predicted by `1 + 1/(1 − gamma)`; null at gamma = 1.
    predicted_alpha: Option<f64>,
    /// Prediction including the finite number of events per arrival.
    predicted_alpha_finite_batch: Option<f64>,
    regime: &'static str,
    measured: FitReport,
    measured_ccdf_alpha: f64,
    /// Log-log CCDF slope over the BA degree window.
    ccdf_slope: Option<f64>,
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let mut rec = Recorder::new("simulate", &a, Some(a.seed));
    let cfg = match a.model {
        ModelArg::Copy => {
            GrowthConfig::copy(a.nodes, a.gamma, a.seed).with_events_per_node(a.events_per_node)
        }
        ModelArg::Ba => GrowthConfig::ba(a.nodes, a.m, a.seed),
    };
    let d = growth::simulate(&cfg)?;
    let mut csv = Vec::new();
    d.write_csv(&mut csv)?;
    match (&a.out, a.fit) {
        (Some(path), _) => {
            write_file(path, &csv)?;
            rec.output(&path.display().to_string(), &csv);
        }
        (None, false) => {
            stdout_bytes(&csv)?;
            rec.output("<stdout>", &csv);
        }
        (None, true) => eprintln!("note: degree sequence not written; pass --out to keep it"),
    }
    if a.fit {
        let fit = growth::measure_exponent(&d, &FitOptions::discrete())?;
        let copy = cfg.model == GrowthModel::Copy;
        let predicted = if copy {
            match growth::theoretical_alpha(cfg.gamma) {
                Ok(v) => Some(v),
                Err(Error::ExponentialRegime) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        let summary = SimulationSummary {
            model: cfg.model,
            nodes: cfg.n_nodes,
            gamma: copy.then_some(cfg.gamma),
            m: (!copy).then_some(cfg.m),
            events_per_node: copy.then_some(cfg.events_per_node),
            seed: cfg.seed,
            total: d.total(),
            expected_total: d.expected_total(),
            predicted_alpha: predicted,
            predicted_alpha_finite_batch: if copy && predicted.is_some() {
                Some(growth::finite_batch_alpha(cfg.gamma, cfg.events_per_node)?)
            } else {
                None
            },
            regime: if copy && predicted.is_none() {
                "exponential"
            } else {
                "power-law"
            },
            measured_ccdf_alpha: fit.ccdf_alpha(),
            measured: FitReport::new(&fit, None),
            ccdf_slope: if copy {
                None
            } else {
                let (lo, hi) = growth::BA_SLOPE_WINDOW;
                Some(growth::ccdf_slope(&d.counts, lo, hi)?)
            },
        };
        let buf = json_line(&summary)?;
        stdout_bytes(&buf)?;
        rec.output("<stdout>", &buf);
    }
    if let Some(path) = &a.manifest {
        rec.finish(path)?;
    }
    Ok(())
}

fn cmd_pipeline(a: PipelineArgs) -> Result<()> {
    let mut rec = Recorder::new("pipeline", &a, Some(a.seed));
    rec.input(&a.input)?;
    let opts = PipelineOptions {
        floor: Floor {
            value: a.floor,
            inclusive: a.floor_inclusive,
        },
        min_tail: a.min_tail,
        bootstrap: a.bootstrap,
        seed: a.seed,
    };
    std::fs::create_dir_all(&a.out).map_err(io_err(&a.out))?;
    let run = run_pipeline(&a.input, &a.out, &opts)?;
    for w in &run.warnings {
        eprintln!("warning: {w}");
    }
    if run.counts.rejected > 0 {
        eprintln!(
            "warning: {} malformed rows rejected (see diagnostics.log)",
            run.counts.rejected
        );
    }
    rec.outputs(run.artifacts.artifacts.iter().cloned());
    rec.finish(&a.out.join("manifest.json"))?;
    #[derive(Serialize)]
    struct Summary<'a> {
        counts: &'a powertail::pipeline::Counts,
        fits: &'a std::collections::BTreeMap<String, FitReport>,
        spearman: Option<f64>,
        outputs: usize,
    }
    stdout_bytes(&json_line(&Summary {
        counts: &run.counts,
        fits: &run.fits,
        spearman: run.spearman,
        outputs: run.artifacts.len(),
    })?)
}

fn cmd_compare(a: CompareArgs) -> Result<()> {
    let mut rec = Recorder::new("compare", &a, Some(a.seed));
    rec.input(&a.input)?;
    let sample = load_sample(&a.input, a.column.as_deref(), Kind::Continuous)?;
    let opts = ComparisonOptions {
        k_override: a.k,
        ..ComparisonOptions::default()
    };
    let cmp = estimator_comparison_with(&sample, a.seed, &opts)?;
    if cmp.flagged {
        eprintln!("warning: CNS and Hill exponents disagree by more than the flag threshold");
    }
    let mut buf = Vec::new();
    cmp.write_csv(&mut buf)?;
    emit(&a.out, &buf, &mut rec)?;
    if let Some(path) = &a.manifest {
        rec.finish(path)?;
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let mut rec = Recorder::new("sweep", &a, Some(a.seed));
    let opts = SweepOptions {
        events_per_node: a.events_per_node,
        ..SweepOptions::default()
    };
    let rows = growth::gamma_sweep_with(&a.gammas, a.nodes, a.seeds, a.seed, &opts)?;
    let mut buf = Vec::new();
    growth::write_sweep_csv(&rows, &mut buf)?;
    emit(&a.out, &buf, &mut rec)?;
    if let Some(path) = &a.manifest {
        rec.finish(path)?;
    }
    Ok(())
}

fn emit(out: &Option<PathBuf>, buf: &[u8], rec: &mut Recorder) -> Result<()> {
    match out {
        Some(path) => {
            write_file(path, buf)?;
            rec.output(&path.display().to_string(), buf);
        }
        None => {
            stdout_bytes(buf)?;
            rec.output("<stdout>", buf);
        }
    }
    Ok(())
}

fn cmd_gen_fixture(a: GenFixtureArgs) -> Result<()> {
    let mut buf = Vec::new();
    match a.what {
        FixtureArg::Earnings => {
            let records = earnings::generate_fixture(&FixtureConfig {
                scale: a.scale,
                seed: a.seed,
                ..FixtureConfig::default()
            })?;
            earnings::write_records_csv(&records, &mut buf)?;
        }
        FixtureArg::Pareto => {
            let model = PowerLawModel::continuous(a.alpha, a.xmin)?;
            let sample = pl_sample(&model, a.n, a.seed)?;
            buf.extend_from_slice(b"value\n");
            for v in sample.values() {
                buf.extend_from_slice(format!("{v}\n").as_bytes());
            }
        }
    }
    write_file(&a.out, &buf)
}
