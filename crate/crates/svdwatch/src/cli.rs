//! Command-line interface over the library: stream simulation, streaming
//! detection, bound evaluation, experiment reproduction, and grid
//! inspection.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on runtime errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bounds::{self, BoundParams};
use crate::detector::{
    estimate_noise_std, estimate_stream, write_verdicts, write_verdicts_csv, DetectorConfig,
    DetectorState, Source, Verdict,
};
use crate::error::{Error, Result};
use crate::grid::{build_h_matrix, make_unobservable_attack};
use crate::harness::{
    run_fig1, run_fig2, run_fig3, run_tail_validation, AttackSpec, ExperimentResult,
    ExperimentSpec, GridSource, Sweep,
};
use crate::numerics::{self, Vector};
use crate::sim::{self, AttackScenario, NoiseModel, Signature, TrajectoryConfig};

#[derive(Parser)]
#[command(
    name = "svdwatch",
    version,
    about = "Sliding-window singular-value monitoring for abrupt changes in linear measurement streams"
)]
struct Cli {
    /// Base seed for anything randomized.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a measurement stream CSV from a grid and noise/trajectory settings.
    Simulate(SimulateArgs),
    /// Run the sliding-window spectral detector over a measurement CSV.
    Detect(DetectArgs),
    /// Evaluate thresholds, tail probabilities, and the detectability condition.
    Bounds(BoundsArgs),
    /// Reproduce the bundled experiments.
    Experiment(ExperimentArgs),
    /// Inspect grids.
    Grid(GridArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Grid source: "bundled" or a grid JSON path.
    #[arg(long, default_value = "bundled")]
    grid: GridSource,

    /// Simulation config JSON ({"gamma", "nu", "T", "seed"}); flags override fields.
    #[arg(long)]
    config: Option<PathBuf>,

    /// State-variation radius.
    #[arg(long)]
    gamma: Option<f64>,

    /// Noise standard deviation.
    #[arg(long)]
    nu: Option<f64>,

    /// Number of samples.
    #[arg(long, visible_alias = "t")]
    horizon: Option<usize>,

    /// Attack JSON ({"support", "norm", "t_a", "signature"}).
    #[arg(long, conflicts_with_all = ["attack_support", "attack_norm", "attack_at"])]
    attack: Option<PathBuf>,

    /// Support buses of an inline step attack.
    #[arg(long, value_delimiter = ',')]
    attack_support: Vec<u32>,

    /// 2-norm of the inline attack.
    #[arg(long, requires = "attack_support")]
    attack_norm: Option<f64>,

    /// Onset time of the inline attack.
    #[arg(long, requires = "attack_support")]
    attack_at: Option<usize>,

    /// Drop the truth columns from the CSV.
    #[arg(long)]
    no_truth: bool,

    /// Output CSV path, or "-" for stdout.
    #[arg(long, short, default_value = "-")]
    output: String,
}

#[derive(Args)]
struct DetectArgs {
    /// Measurement CSV with header t,y1,...,yM.
    #[arg(long, short)]
    input: PathBuf,

    /// Window size.
    #[arg(long, default_value_t = 16)]
    w: usize,

    /// Alarm threshold: a number, or "auto" to derive it from the noise level.
    #[arg(long, default_value = "auto", value_parser = parse_threshold)]
    threshold: Threshold,

    /// Monitor raw measurements or state estimates.
    #[arg(long, value_enum, default_value_t = SourceArg::Measurements)]
    source: SourceArg,

    /// Grid source; required for --source estimates and for --gamma > 0.
    #[arg(long)]
    grid: Option<GridSource>,

    /// Known noise standard deviation for the auto threshold (estimated from
    /// the stream when omitted).
    #[arg(long)]
    nu: Option<f64>,

    /// State-variation radius entering the auto threshold.
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,

    #[arg(long, default_value_t = bounds::DEFAULT_TAU)]
    tau: f64,

    #[arg(long, default_value_t = bounds::DEFAULT_EPS)]
    eps: f64,

    /// Output verdict CSV path, or "-" for stdout.
    #[arg(long, short, default_value = "-")]
    output: String,
}

#[derive(Clone, Copy, Debug)]
enum Threshold {
    Auto,
    Fixed(f64),
}

fn parse_threshold(s: &str) -> std::result::Result<Threshold, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(Threshold::Auto);
    }
    s.parse::<f64>()
        .map(Threshold::Fixed)
        .map_err(|_| format!("expected a number or \"auto\", got {s:?}"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SourceArg {
    Measurements,
    Estimates,
}

#[derive(Args)]
struct BoundsArgs {
    /// Parameter JSON with keys nu, m, w, tau, eps, gamma, h_norm; flags override.
    #[arg(long)]
    params: Option<PathBuf>,

    #[arg(long)]
    nu: Option<f64>,

    /// Number of measurements per sample.
    #[arg(long)]
    m: Option<usize>,

    /// Window size.
    #[arg(long)]
    w: Option<usize>,

    #[arg(long)]
    tau: Option<f64>,

    #[arg(long)]
    eps: Option<f64>,

    #[arg(long)]
    gamma: Option<f64>,

    /// Spectral norm of the measurement matrix (used by the gamma term).
    #[arg(long)]
    h_norm: Option<f64>,

    /// Attack magnitude to test for detectability.
    #[arg(long)]
    a_norm: Option<f64>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(subcommand)]
    which: ExperimentCmd,
}

#[derive(Subcommand)]
enum ExperimentCmd {
    /// Single-realization σ₁ trace, measurement- and estimate-sourced.
    Fig1(ExperimentTuning),
    /// Monte Carlo σ₁ sweep against the envelopes.
    Fig2(Fig2Args),
    /// Minimum-window curves over noise level and attack magnitude.
    Fig3(Fig3Args),
    /// Monte Carlo validation of the two tail bounds.
    Tails(ExperimentTuning),
}

#[derive(Args)]
struct ExperimentTuning {
    /// Output directory for the result CSV and metadata JSON.
    #[arg(long, short, default_value = "out")]
    out: PathBuf,

    #[arg(long)]
    w: Option<usize>,

    #[arg(long)]
    nu: Option<f64>,

    #[arg(long)]
    gamma: Option<f64>,

    #[arg(long)]
    horizon: Option<usize>,

    /// Attack onset time.
    #[arg(long)]
    t_a: Option<usize>,

    /// Attack magnitude.
    #[arg(long)]
    a_norm: Option<f64>,

    /// Attack support buses.
    #[arg(long, value_delimiter = ',')]
    support: Vec<u32>,

    #[arg(long)]
    realizations: Option<usize>,

    /// Grid source: "bundled" or a grid JSON path.
    #[arg(long)]
    grid: Option<GridSource>,
}

#[derive(Args)]
struct Fig2Args {
    #[command(flatten)]
    tuning: ExperimentTuning,

    /// Parameter variant: a = (w=8, nu=0.01), b = (w=64, nu=0.04).
    #[arg(long, value_enum, default_value_t = Fig2Variant::A)]
    variant: Fig2Variant,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Fig2Variant {
    A,
    B,
}

#[derive(Args)]
struct Fig3Args {
    #[command(flatten)]
    tuning: ExperimentTuning,

    /// Which parameter to sweep.
    #[arg(long, value_enum, default_value_t = SweepArg::Both)]
    sweep: SweepArg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SweepArg {
    Nu,
    ANorm,
    Both,
}

#[derive(Args)]
struct GridArgs {
    #[command(subcommand)]
    which: GridCmd,
}

#[derive(Subcommand)]
enum GridCmd {
    /// Print the structural summary of a grid.
    Info {
        /// "bundled" (or "default"), or a grid JSON path.
        source: GridSource,
    },
}

/// Parses `args` and runs the selected command. Returns the process exit
/// code: 0 success, 1 usage error, 2 runtime error.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => simulate(args, cli.seed),
        Command::Detect(args) => detect(args),
        Command::Bounds(args) => bounds_report(args),
        Command::Experiment(args) => experiment(args, cli.seed),
        Command::Grid(args) => grid_info(args),
    }
}

fn simulate(args: SimulateArgs, seed: Option<u64>) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => sim::SimConfig {
            gamma: 0.0,
            nu: 0.05,
            horizon: 256,
            seed: 42,
        },
    };
    if let Some(gamma) = args.gamma {
        config.gamma = gamma;
    }
    if let Some(nu) = args.nu {
        config.nu = nu;
    }
    if let Some(horizon) = args.horizon {
        config.horizon = horizon;
    }
    if let Some(seed) = seed {
        config.seed = seed;
    }

    let grid = args.grid.load()?;
    let h = build_h_matrix(&grid)?;
    let states = sim::generate_states(&TrajectoryConfig {
        x0: Vector::zeros(h.state_count()),
        gamma: config.gamma,
        horizon: config.horizon,
        seed: sim::derive_seed(config.seed, 1),
    });
    let mut frames = sim::generate_measurements(
        &states,
        &h,
        &NoiseModel {
            nu: config.nu,
            seed: sim::derive_seed(config.seed, 2),
        },
    )?;

    let attack_spec: Option<AttackSpec> = match (&args.attack, args.attack_support.is_empty()) {
        (Some(path), _) => Some(serde_json::from_str(&std::fs::read_to_string(path)?)?),
        (None, false) => Some(AttackSpec {
            support: args.attack_support.clone(),
            norm: args.attack_norm.unwrap_or(2.0),
            t_a: args.attack_at.unwrap_or(config.horizon / 2 + 1),
            signature: Signature::Step,
        }),
        (None, true) => None,
    };
    if let Some(spec) = attack_spec {
        let attack = make_unobservable_attack(&h, &spec.support, spec.norm)?;
        frames = sim::apply_attack(
            &frames,
            &AttackScenario {
                attack,
                t_a: spec.t_a,
                signature: spec.signature,
            },
        )?;
    }
    if args.no_truth {
        for frame in &mut frames {
            frame.x = None;
        }
    }

    if args.output == "-" {
        let stdout = std::io::stdout();
        sim::write_stream(&mut stdout.lock(), &frames)
    } else {
        sim::write_stream_csv(&args.output, &frames)
    }
}

fn detect(args: DetectArgs) -> Result<()> {
    let frames = sim::read_stream_csv(&args.input)?;
    if frames.is_empty() {
        return Err(Error::InvalidInput("input stream is empty".into()));
    }

    let vectors: Vec<Vector> = match args.source {
        SourceArg::Measurements => frames.iter().map(|f| f.y.clone()).collect(),
        SourceArg::Estimates => {
            let grid_source = args
                .grid
                .clone()
                .ok_or_else(|| Error::InvalidInput("--source estimates requires --grid".into()))?;
            let h = build_h_matrix(&grid_source.load()?)?;
            let ones = Vector::from_element(h.measurement_count(), 1.0);
            estimate_stream(&frames, &h, &ones)?
        }
    };

    let threshold = match args.threshold {
        Threshold::Fixed(value) => value,
        Threshold::Auto => {
            let nu = match args.nu {
                Some(nu) => nu,
                None => estimate_noise_std(&vectors).ok_or_else(|| {
                    Error::InvalidInput(
                        "cannot estimate the noise level from this stream; pass --nu".into(),
                    )
                })?,
            };
            let h_norm = match (&args.grid, args.gamma > 0.0) {
                (Some(src), _) => numerics::spectral_norm(&build_h_matrix(&src.load()?)?.h)?,
                (None, true) => {
                    return Err(Error::InvalidInput(
                        "--gamma > 0 needs --grid to evaluate the threshold".into(),
                    ))
                }
                (None, false) => 0.0,
            };
            bounds::threshold_ell(&BoundParams {
                nu,
                m: vectors[0].len(),
                w: args.w,
                tau: args.tau,
                eps: args.eps,
                gamma: args.gamma,
                h_norm,
            })
        }
    };

    let mut detector = DetectorState::new(DetectorConfig {
        w: args.w,
        threshold,
        source: match args.source {
            SourceArg::Measurements => Source::Measurements,
            SourceArg::Estimates => Source::Estimates,
        },
    })?;
    let mut verdicts: Vec<Verdict> = Vec::new();
    for v in vectors {
        if let Some(verdict) = detector.step(v)? {
            verdicts.push(verdict);
        }
    }

    if args.output == "-" {
        let stdout = std::io::stdout();
        write_verdicts(&mut stdout.lock(), &verdicts)
    } else {
        write_verdicts_csv(&args.output, &verdicts)
    }
}

#[derive(Serialize)]
struct BoundsReport {
    params: BoundParams,
    ell: f64,
    tail_raw: f64,
    tail: f64,
    detection_probability: f64,
    min_attack_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    a_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    u: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    detectable: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    min_window: Option<Option<usize>>,
}

fn bounds_report(args: BoundsArgs) -> Result<()> {
    let mut params = match &args.params {
        Some(path) => serde_json::from_str::<BoundParams>(&std::fs::read_to_string(path)?)?,
        None => {
            let (nu, m, w) = match (args.nu, args.m, args.w) {
                (Some(nu), Some(m), Some(w)) => (nu, m, w),
                _ => {
                    return Err(Error::InvalidInput(
                        "pass --nu, --m and --w (or --params with a JSON file)".into(),
                    ))
                }
            };
            BoundParams::new(nu, m, w)
        }
    };
    if let Some(nu) = args.nu {
        params.nu = nu;
    }
    if let Some(m) = args.m {
        params.m = m;
    }
    if let Some(w) = args.w {
        params.w = w;
    }
    if let Some(tau) = args.tau {
        params.tau = tau;
    }
    if let Some(eps) = args.eps {
        params.eps = eps;
    }
    if let Some(gamma) = args.gamma {
        params.gamma = gamma;
    }
    if let Some(h_norm) = args.h_norm {
        params.h_norm = h_norm;
    }
    params.validate()?;

    let mut report = BoundsReport {
        params,
        ell: bounds::threshold_ell(&params),
        tail_raw: bounds::tail_probability_raw(&params),
        tail: bounds::tail_probability(&params),
        detection_probability: bounds::detection_probability_lower_bound(&params),
        min_attack_norm: bounds::min_attack_norm(&params),
        a_norm: args.a_norm,
        u: None,
        detectable: None,
        min_window: None,
    };
    if let Some(a_norm) = args.a_norm {
        report.u = Some(bounds::threshold_u(a_norm, &params));
        report.detectable = Some(bounds::detectability_condition(a_norm, &params));
        report.min_window = Some(match bounds::min_window(a_norm, &params) {
            Ok(w) => Some(w),
            Err(Error::NoSolution(_)) => None,
            Err(e) => return Err(e),
        });
    }

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    serde_json::to_writer_pretty(&mut out, &report)?;
    writeln!(out)?;
    Ok(())
}

fn apply_tuning(spec: &mut ExperimentSpec, tuning: &ExperimentTuning, seed: Option<u64>) {
    spec.out_dir = tuning.out.clone();
    if let Some(w) = tuning.w {
        spec.w = w;
    }
    if let Some(nu) = tuning.nu {
        spec.sim.nu = nu;
    }
    if let Some(gamma) = tuning.gamma {
        spec.sim.gamma = gamma;
    }
    if let Some(horizon) = tuning.horizon {
        spec.sim.horizon = horizon;
    }
    if let Some(t_a) = tuning.t_a {
        spec.attack.t_a = t_a;
    }
    if let Some(a_norm) = tuning.a_norm {
        spec.attack.norm = a_norm;
    }
    if !tuning.support.is_empty() {
        spec.attack.support = tuning.support.clone();
    }
    if let Some(realizations) = tuning.realizations {
        spec.realizations = realizations;
    }
    if let Some(grid) = &tuning.grid {
        spec.grid = grid.clone();
    }
    if let Some(seed) = seed {
        spec.sim.seed = seed;
    }
}

fn report_written(result: &ExperimentResult) -> Result<()> {
    let (csv, meta) = result.write(&result.spec.out_dir)?;
    println!("wrote {}", csv.display());
    println!("wrote {}", meta.display());
    for (key, value) in &result.summary {
        println!("{key} = {}", sim::format_float(*value));
    }
    Ok(())
}

fn experiment(args: ExperimentArgs, seed: Option<u64>) -> Result<()> {
    match args.which {
        ExperimentCmd::Fig1(tuning) => {
            let mut spec = ExperimentSpec::fig1();
            apply_tuning(&mut spec, &tuning, seed);
            report_written(&run_fig1(&spec)?)
        }
        ExperimentCmd::Fig2(args) => {
            let mut spec = match args.variant {
                Fig2Variant::A => ExperimentSpec::fig2a(),
                Fig2Variant::B => ExperimentSpec::fig2b(),
            };
            apply_tuning(&mut spec, &args.tuning, seed);
            report_written(&run_fig2(&spec)?)
        }
        ExperimentCmd::Fig3(args) => {
            let mut spec = ExperimentSpec::default();
            apply_tuning(&mut spec, &args.tuning, seed);
            match args.sweep {
                SweepArg::Nu => report_written(&run_fig3(&spec, &Sweep::default_nu())?),
                SweepArg::ANorm => report_written(&run_fig3(&spec, &Sweep::default_a_norm())?),
                SweepArg::Both => {
                    report_written(&run_fig3(&spec, &Sweep::default_nu())?)?;
                    report_written(&run_fig3(&spec, &Sweep::default_a_norm())?)
                }
            }
        }
        ExperimentCmd::Tails(tuning) => {
            let mut spec = ExperimentSpec::tails();
            apply_tuning(&mut spec, &tuning, seed);
            report_written(&run_tail_validation(&spec)?)
        }
    }
}

fn grid_info(args: GridArgs) -> Result<()> {
    match args.which {
        GridCmd::Info { source } => {
            let grid = source.load()?;
            let h = build_h_matrix(&grid)?;
            let h_norm = numerics::spectral_norm(&h.h)?;
            println!("source: {}", String::from(source));
            println!("buses: {}", grid.bus_count());
            println!("branches (m): {}", grid.branch_count());
            println!("measurements (M): {}", h.measurement_count());
            println!("states (N): {}", h.state_count());
            println!("slack: {}", grid.slack);
            println!("h_norm: {}", sim::format_float(h_norm));
            Ok(())
        }
    }
}
