mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hyperpol::analytic;
use hyperpol::catalog::{self, catalog};
use hyperpol::exact::{self, cycle_unitary, kraus, simulate, DensityMatrix2, EngineError};
use hyperpol::sweep::{find_tau_res, robustness_scan, run_sweep, Engine, SweepError, SweepSpec};
use serde_json::json;

use config::{load, RobustnessInput, RunConfig, TauResConfig};

#[derive(Parser)]
#[command(name = "hyperpol", version, about = "Pulsed nuclear-spin polarization simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Engine to run; overrides the engine named in a sweep file.
    #[arg(long, global = true, value_enum)]
    engine: Option<EngineArg>,
    /// Worker threads for sweeps and scans.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Polarization after each cycle, as CSV.
    Simulate,
    /// Stable polarization, contraction factor and rate, as JSON.
    Steady,
    /// Magic timings for n_p = 1..=max-np.
    MagicTable {
        #[arg(long, default_value_t = 8)]
        max_np: u32,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Grid sweep over one or two parameters, as CSV.
    Sweep,
    /// Pulse spacing with the fastest buildup for finite pulses, as JSON.
    FindTauRes,
    /// |P_s| and rate of magic sequences against pulse length, as CSV.
    Robustness,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Exact,
    Analytic,
    Both,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Exact => Engine::Exact,
            EngineArg::Analytic => Engine::Analytic,
            EngineArg::Both => Engine::Both,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

enum Failure {
    Config(String),
    Convergence(String),
    Io(io::Error),
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Sequence(s) => Failure::Config(s.to_string()),
            EngineError::InvalidOptions(m) => Failure::Config(m),
            other => Failure::Convergence(other.to_string()),
        }
    }
}

impl From<SweepError> for Failure {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::NoResonance => Failure::Convergence(e.to_string()),
            SweepError::Pool(m) => Failure::Io(io::Error::other(m)),
            other => Failure::Config(other.to_string()),
        }
    }
}

fn config_path(cli: &Cli) -> Result<&Path, Failure> {
    cli.config.as_deref().ok_or_else(|| Failure::Config("--config <path> is required".into()))
}

fn output(cli: &Cli) -> Result<Box<dyn Write>, Failure> {
    Ok(match &cli.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn jobs(cli: &Cli) -> usize {
    cli.jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
        .max(1)
}

fn run_config(cli: &Cli) -> Result<RunConfig, Failure> {
    load(config_path(cli)?).map_err(Failure::Config)
}

fn cmd_simulate(cli: &Cli) -> Result<(), Failure> {
    let cfg = run_config(cli)?;
    let (sys, seq) = cfg.resolve().map_err(|e| Failure::Config(e.to_string()))?;
    let engine = cli.engine.map(Engine::from).unwrap_or_default();
    let header = json!({ "system": sys, "sequence": seq, "cycles": cfg.cycles, "engine": engine });
    let exact_series = || -> Result<_, Failure> {
        let k = kraus(&cycle_unitary(&sys, &seq)?)?;
        Ok(simulate(&k, &DensityMatrix2::maximally_mixed(), cfg.cycles))
    };
    let analytic_series = || {
        let a = analytic::evaluate(&sys, &seq);
        analytic::polarization_series(a.p_s, a.lambda, cfg.cycles)
    };
    let mut w = output(cli)?;
    match engine {
        Engine::Exact => exact_series()?.write_csv(&mut w, &header)?,
        Engine::Analytic => analytic_series().write_csv(&mut w, &header)?,
        Engine::Both => {
            let (e, a) = (exact_series()?, analytic_series());
            writeln!(w, "# {header}")?;
            writeln!(w, "cycle,polarization_exact,polarization_analytic")?;
            for (i, (x, y)) in e.values.iter().zip(&a.values).enumerate() {
                writeln!(w, "{},{x:.15e},{y:.15e}", i + 1)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_steady(cli: &Cli) -> Result<(), Failure> {
    let cfg = run_config(cli)?;
    let (sys, seq) = cfg.resolve().map_err(|e| Failure::Config(e.to_string()))?;
    let engine = cli.engine.map(Engine::from).unwrap_or_default();
    let mut doc = json!({ "system": sys, "sequence": seq });
    // the analytic summary goes alongside every exact run
    doc["analytic"] = serde_json::to_value(analytic::evaluate(&sys, &seq)).expect("serializable");
    if engine != Engine::Analytic {
        let s = exact::evaluate(&sys, &seq, &cfg.exact)?;
        doc["exact"] = serde_json::to_value(s).expect("serializable");
    }
    let mut w = output(cli)?;
    serde_json::to_writer_pretty(&mut w, &doc).map_err(io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn cmd_magic_table(cli: &Cli, max_np: u32, format: Format) -> Result<(), Failure> {
    let rows = catalog(max_np).map_err(|e| Failure::Config(e.to_string()))?;
    let mut w = output(cli)?;
    match format {
        Format::Csv => catalog::write_csv(&rows, &mut w)?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, &rows).map_err(io::Error::from)?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_sweep(cli: &Cli) -> Result<(), Failure> {
    let mut spec: SweepSpec = load(config_path(cli)?).map_err(Failure::Config)?;
    if let Some(e) = cli.engine {
        spec.engine = e.into();
    }
    let table = run_sweep(&spec, jobs(cli))?;
    let mut w = output(cli)?;
    table.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn cmd_find_tau_res(cli: &Cli) -> Result<(), Failure> {
    let cfg: TauResConfig = load(config_path(cli)?).map_err(Failure::Config)?;
    let omega = cfg.system.omega;
    cfg.system.validate().map_err(|e| Failure::Config(e.to_string()))?;
    let resolve = |t: &hyperpol::timeexpr::TimeValue| t.resolve(omega).map_err(Failure::Config);
    let seq = cfg.sequence.resolve(omega).map_err(|e| Failure::Config(e.to_string()))?;
    let (tau_pi, half, step) = (resolve(&cfg.tau_pi)?, resolve(&cfg.search_halfwidth)?, resolve(&cfg.grid_step)?);
    let r = find_tau_res(&cfg.system, &seq, tau_pi, half, step, &cfg.exact)?;
    let doc = json!({
        "system": cfg.system,
        "sequence": seq,
        "tau_pi": tau_pi,
        "tau_res": r.tau_res,
        "tau_tilde": r.tau_tilde,
        "gamma_max": r.gamma_max,
        "grid": r.grid,
    });
    let mut w = output(cli)?;
    serde_json::to_writer_pretty(&mut w, &doc).map_err(io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn cmd_robustness(cli: &Cli) -> Result<(), Failure> {
    let cfg: RobustnessInput = load(config_path(cli)?).map_err(Failure::Config)?;
    let axis = cfg
        .tau_pi
        .iter()
        .map(|t| t.resolve(cfg.system.omega))
        .collect::<Result<Vec<f64>, String>>()
        .map_err(Failure::Config)?;
    let mut table = robustness_scan(&cfg.system, &cfg.configs, &axis, &cfg.exact, jobs(cli))?;
    table.header = serde_json::to_value(&cfg).expect("serializable");
    let mut w = output(cli)?;
    table.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate => cmd_simulate(&cli),
        Command::Steady => cmd_steady(&cli),
        Command::MagicTable { max_np, format } => cmd_magic_table(&cli, *max_np, *format),
        Command::Sweep => cmd_sweep(&cli),
        Command::FindTauRes => cmd_find_tau_res(&cli),
        Command::Robustness => cmd_robustness(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Convergence(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
