use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dc_pension::config::{load_config, Config};
use dc_pension::policy::{guarded_optimal_policy, optimal_policy};
use dc_pension::simulation::{run_paths, SimConfig, WealthScheme};
use dc_pension::sweep::{emit_csv, run_sweep, Preset, SweepParameter, SweepSpec, PRESET_POINTS};
use dc_pension::verification::{run_verify, Budget};
use dc_pension::{Error, PriceStepper, StatePoint};

/// Wealth used by `verify` when the config has no `v0`.
const VERIFY_V0: f64 = 1200.0;

#[derive(Parser)]
#[command(version, about = "Optimal DC pension investment with a deposit-loan rate spread")]
struct Cli {
    /// Worker threads for Monte Carlo runs (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the optimal decision at a state as JSON.
    Policy {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        s: Option<f64>,
        #[arg(long)]
        v: Option<f64>,
    },
    /// Simulate the optimal policy and print path statistics as JSON.
    Simulate(SimulateArgs),
    /// Scan one parameter and write the decisions as CSV.
    Sweep(SweepArgs),
    /// Run the verification suite and print a JSON report.
    Verify {
        #[arg(long)]
        config: PathBuf,
        /// Include the Monte Carlo checks.
        #[arg(long)]
        full: bool,
    },
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Per-path terminal wealth (columns path, terminal_wealth, log_terminal_wealth).
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "exponential")]
    scheme: SchemeArg,
    #[arg(long, value_enum, default_value = "exact")]
    stepper: StepperArg,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, conflicts_with = "param")]
    preset: Option<String>,
    #[arg(long)]
    param: Option<String>,
    #[arg(long)]
    from: Option<f64>,
    #[arg(long)]
    to: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    /// Wealth of the fixed state (defaults to the config's v0).
    #[arg(long)]
    v: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SchemeArg {
    Linear,
    Exponential,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum StepperArg {
    Exact,
    Euler,
}

/// Errors split by exit status.
enum Failure {
    Usage(Error),
    Runtime(Error),
    ChecksFailed,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidParameter { .. } | Error::Json(_) | Error::Io(_) => {
                Failure::Usage(e)
            }
            other => Failure::Runtime(other),
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(Error::Config(msg.into()))
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}").map_err(Error::from)?;
    Ok(())
}

fn policy(config: &Config, t: Option<f64>, s: Option<f64>, v: Option<f64>) -> Result<(), Failure> {
    let v = match v {
        Some(v) => v,
        None => config.require_v0()?,
    };
    let state = StatePoint::new(t.unwrap_or(config.t0), s.unwrap_or(config.s0), v, &config.params)
        .map_err(|e| usage(e.to_string()))?;
    print_json(&optimal_policy(&state, &config.params)?)
}

fn simulate(config: &Config, args: &SimulateArgs) -> Result<(), Failure> {
    let sim = SimConfig {
        n_paths: args.paths.unwrap_or(config.paths),
        n_steps: args.steps.unwrap_or(config.steps),
        t0: config.t0,
        s0: config.s0,
        v0: config.require_v0()?,
        seed: args.seed.unwrap_or(config.seed),
        stepper: match args.stepper {
            StepperArg::Exact => PriceStepper::Exact,
            StepperArg::Euler => PriceStepper::Euler,
        },
        scheme: match args.scheme {
            SchemeArg::Linear => WealthScheme::Linear,
            SchemeArg::Exponential => WealthScheme::Exponential,
        },
    };
    sim.validate(&config.params).map_err(|e| usage(e.to_string()))?;
    let params = config.params;
    let run = run_paths(&|s: &StatePoint| guarded_optimal_policy(s, &params), &sim, &params)?;
    if let Some(path) = &args.csv {
        let mut out = BufWriter::new(File::create(path).map_err(Error::from)?);
        let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
            writeln!(out, "path,terminal_wealth,log_terminal_wealth")?;
            for (i, v) in run.terminal_wealth.iter().enumerate() {
                writeln!(out, "{i},{v},{}", v.ln())?;
            }
            out.flush()
        };
        write(&mut out).map_err(|e| Failure::Runtime(e.into()))?;
    }
    print_json(&run.stats)
}

fn sweep(config: &Config, args: &SweepArgs) -> Result<(), Failure> {
    let v = args.v.or(config.v0);
    let spec = match (&args.preset, &args.param) {
        (Some(name), _) => match name.parse::<Preset>()? {
            Preset::Fig5 => {
                let (Some(from), Some(to), Some(v)) = (args.from, args.to, v) else {
                    return Err(usage("fig5 needs --from, --to and a wealth (--v or v0)"));
                };
                SweepSpec::fig5(from, to, args.points.unwrap_or(PRESET_POINTS), config.s0, v)
            }
            preset => SweepSpec::preset(preset, config.s0),
        },
        (None, Some(param)) => {
            let parameter: SweepParameter = param.parse()?;
            let (Some(from), Some(to)) = (args.from, args.to) else {
                return Err(usage("--param needs --from and --to"));
            };
            let v = match (parameter, v) {
                (SweepParameter::V, _) => from,
                (_, Some(v)) => v,
                (_, None) => return Err(usage("sweep needs a wealth (--v or v0)")),
            };
            let state = StatePoint { t: config.t0, s: config.s0, v };
            SweepSpec::new(parameter, from, to, args.points.unwrap_or(PRESET_POINTS), state)
        }
        (None, None) => return Err(usage("sweep needs --preset or --param")),
    }
    .map_err(|e| usage(e.to_string()))?;
    let rows = run_sweep(&spec, &config.params)?;
    let file = File::create(&args.out).map_err(Error::from)?;
    emit_csv(&rows, BufWriter::new(file)).map_err(Failure::Runtime)?;
    Ok(())
}

fn verify(config: &Config, full: bool) -> Result<(), Failure> {
    let state = StatePoint::new(config.t0, config.s0, config.v0.unwrap_or(VERIFY_V0), &config.params)
        .map_err(|e| usage(e.to_string()))?;
    let budget = if full { Budget::Full } else { Budget::Quick };
    let report = run_verify(&config.params, &state, budget, config.seed)?;
    print_json(&report)?;
    if report.all_passed() {
        Ok(())
    } else {
        Err(Failure::ChecksFailed)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Policy { config, t, s, v } => policy(&load_config(config)?, *t, *s, *v),
        Command::Simulate(args) => simulate(&load_config(&args.config)?, args),
        Command::Sweep(args) => sweep(&load_config(&args.config)?, args),
        Command::Verify { config, full } => verify(&load_config(config)?, *full),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(cli)),
            Err(e) => Err(usage(format!("cannot build thread pool: {e}"))),
        },
        None => run(cli),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::ChecksFailed) => {
            eprintln!("verification failed");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
