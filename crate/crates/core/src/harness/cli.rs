use crate::error::{Error, Result};
use crate::harness::checks::{mc_validate, oracle_checks};
use crate::harness::config::{parse_float_list, parse_int_list, RunConfig};
use crate::harness::scenario::{is_discrete, Protocol, Scenario};
use crate::harness::search::{
    bisect_threshold, optimize, sweep, AxisScale, ContinuousAxis, DiscreteAxis, Optimum, Threshold, ThresholdQuery, ThresholdTarget,
    MIN_GRID,
};
use crate::harness::table::{Cell, Format, Table};
use crate::states::QkdProtocol;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "qrepeater", version, about = "Secret key rates of quantum repeater protocols")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// csv or json
    #[arg(long, default_value = "csv")]
    pub format: Format,
    /// Write to this file instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    #[arg(long, default_value = "original")]
    pub protocol: Protocol,
    #[arg(long, default_value = "bb84")]
    pub qkd: QkdProtocol,
    /// Nesting levels, e.g. 0..7 or 1,3
    #[arg(long = "n", default_value = "0..7")]
    pub nesting: String,
    /// Distillation rounds, e.g. 0..3
    #[arg(long = "k", default_value = "0..3")]
    pub rounds: String,
    /// Bisection tolerance.
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    /// Base parameters for the fixed quantities.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Extra KEY=VALUE overrides.
    #[arg(long = "set")]
    pub overrides: Vec<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the protocol of the config.
    #[arg(long)]
    pub protocol: Option<Protocol>,
    /// KEY=VALUE overrides applied after the config.
    #[arg(long = "set")]
    pub overrides: Vec<String>,
    /// NAME=LO..HI[:SCALE] with SCALE linear, log or log-upper; NAME=1..4 for N or k.
    #[arg(long = "optimize")]
    pub optimize: Vec<String>,
    /// Grid points per continuous axis.
    #[arg(long)]
    pub grid: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimal initial fidelity for a positive secret fraction, with perfect gates by default.
    TableMinFidelity(ThresholdArgs),
    /// Minimal gate quality for a positive secret fraction, with perfect initial pairs by default.
    TableMinGate(ThresholdArgs),
    /// Initial fidelity maximizing the key rate for each (N, k).
    TableOptFidelity {
        #[arg(long, default_value = "hybrid")]
        protocol: Protocol,
        #[arg(long = "n", default_value = "1..4")]
        nesting: String,
        #[arg(long = "k", default_value = "0..3")]
        rounds: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set")]
        overrides: Vec<String>,
        #[arg(long, default_value_t = MIN_GRID)]
        grid: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Key rate along one swept parameter, optimizing the others per row.
    RateSweep {
        #[command(flatten)]
        run: RunArgs,
        /// NAME=VALUES with VALUES a comma list or LO..HI:STEPS[:log]
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Maximize the key rate over the selected parameters.
    Optimize(RunArgs),
    /// Compare the average waiting time formula with Monte Carlo.
    McValidate {
        #[arg(long = "n", default_value = "2")]
        nesting: String,
        #[arg(long = "p", default_value = "0.5")]
        p: String,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Compare analytic maps with independent simulations.
    OracleCheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
}

/// Parses arguments, runs the subcommand and returns the process exit code. Diagnostics go to
/// standard error.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Domain { .. } => EXIT_CONFIG,
                _ => EXIT_FAILURE,
            }
        }
    }
}

pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::TableMinFidelity(args) => threshold_table(args, ThresholdTarget::InitialFidelity),
        Command::TableMinGate(args) => threshold_table(args, ThresholdTarget::GateQuality),
        Command::TableOptFidelity {
            protocol,
            nesting,
            rounds,
            config,
            overrides,
            grid,
            output,
        } => {
            let mut cfg = load(config.as_deref(), Some(protocol), &overrides)?;
            cfg.spec.grid = grid;
            let table = opt_fidelity_table(&cfg, &parse_int_list(&nesting)?, &parse_int_list(&rounds)?)?;
            emit(&table, &output)?;
            Ok(EXIT_OK)
        }
        Command::RateSweep { run, sweep: swept } => {
            let mut cfg = run_config(&run)?;
            if let Some(s) = swept {
                let (name, values) = split_assignment(&s)?;
                cfg.spec.base.get(name)?;
                cfg.sweep = Some((name.to_string(), parse_float_list(values)?));
            }
            let spec = cfg.sweep_spec()?;
            let rows = sweep(&spec)?;
            let names: Vec<String> = spec.optimize.names().iter().map(|s| s.to_string()).collect();
            let mut table = Table::new(std::iter::once(spec.swept.clone()).chain(names.iter().cloned()).chain(rate_columns()));
            for row in &rows {
                let mut cells = vec![Cell::Num(row.value)];
                cells.extend(names.iter().map(|n| Cell::Num(row.optimum.params[n])));
                cells.extend(rate_cells(&row.optimum));
                table.push(cells);
            }
            emit(&table, &run.output)?;
            Ok(EXIT_OK)
        }
        Command::Optimize(run) => {
            let cfg = run_config(&run)?;
            let opt = optimize(&cfg.spec)?;
            let names: Vec<String> = cfg.spec.names().iter().map(|s| s.to_string()).collect();
            let mut table = Table::new(names.iter().cloned().chain(rate_columns()));
            let mut cells: Vec<Cell> = names.iter().map(|n| Cell::Num(opt.params[n])).collect();
            cells.extend(rate_cells(&opt));
            table.push(cells);
            emit(&table, &run.output)?;
            if opt.rate().r_qkd > 0.0 {
                Ok(EXIT_OK)
            } else {
                eprintln!(
                    "no positive key rate over {} evaluations ({} failed)",
                    opt.evaluations, opt.failed_evaluations
                );
                Ok(EXIT_INFEASIBLE)
            }
        }
        Command::McValidate {
            nesting,
            p,
            trials,
            seed,
            output,
        } => {
            let mut table = Table::new(["N", "P", "analytic", "mc_mean", "std_error", "trials", "deviation_se"]);
            for n in parse_int_list(&nesting)? {
                for &prob in &parse_float_list(&p)? {
                    let c = mc_validate(n, prob, trials, seed)?;
                    table.push(vec![
                        n.into(),
                        prob.into(),
                        c.analytic.into(),
                        c.mean.into(),
                        c.std_error.into(),
                        Cell::Int(c.trials as i64),
                        c.deviation().into(),
                    ]);
                }
            }
            emit(&table, &output)?;
            Ok(EXIT_OK)
        }
        Command::OracleCheck { seed, output } => {
            let checks = oracle_checks(seed)?;
            let mut table = Table::new(["check", "cases", "max_deviation", "tolerance", "pass"]);
            for c in &checks {
                table.push(vec![
                    c.name.clone().into(),
                    c.cases.into(),
                    c.max_deviation.into(),
                    c.tolerance.into(),
                    Cell::Text(c.passed().to_string()),
                ]);
            }
            emit(&table, &output)?;
            Ok(if checks.iter().all(|c| c.passed()) { EXIT_OK } else { EXIT_FAILURE })
        }
    }
}

fn load(config: Option<&std::path::Path>, protocol: Option<Protocol>, overrides: &[String]) -> Result<RunConfig> {
    let mut cfg = match config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::new(Scenario::new(protocol.unwrap_or(Protocol::Original))),
    };
    if let Some(p) = protocol {
        cfg.spec.base.protocol = p;
    }
    for o in overrides {
        apply_override(&mut cfg, o)?;
    }
    Ok(cfg)
}

fn run_config(run: &RunArgs) -> Result<RunConfig> {
    let mut cfg = load(run.config.as_deref(), run.protocol, &run.overrides)?;
    if !run.optimize.is_empty() {
        cfg.spec.continuous.clear();
        cfg.spec.discrete.clear();
    }
    for o in &run.optimize {
        let (name, range) = split_assignment(o)?;
        if is_discrete(name) {
            cfg.spec.discrete.push(DiscreteAxis::new(name, parse_int_list(range)?)?);
        } else {
            let (bounds, scale) = match range.split_once(':') {
                Some((b, s)) => (b, s.parse()?),
                None => (range, AxisScale::Linear),
            };
            let (lo, hi) = bounds.split_once("..").ok_or_else(|| Error::Config(format!("expected LO..HI in '{o}'")))?;
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad bound in '{o}'")));
            cfg.spec.base.get(name)?;
            cfg.spec.continuous.push(ContinuousAxis::new(name, parse(lo)?, parse(hi)?, scale)?);
        }
    }
    if let Some(g) = run.grid {
        cfg.spec.grid = g;
    }
    Ok(cfg)
}

fn split_assignment(s: &str) -> Result<(&str, &str)> {
    s.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| Error::Config(format!("expected NAME=VALUE, got '{s}'")))
}

fn apply_override(cfg: &mut RunConfig, assignment: &str) -> Result<()> {
    let (key, raw) = split_assignment(assignment)?;
    if key == "protocol" {
        cfg.spec.base.protocol = raw.parse()?;
        return Ok(());
    }
    let value = match raw {
        "inf" | "infinity" => toml::Value::Float(f64::INFINITY),
        "true" => toml::Value::Boolean(true),
        "false" => toml::Value::Boolean(false),
        _ => match raw.parse::<f64>() {
            Ok(x) => toml::Value::Float(x),
            Err(_) => toml::Value::String(raw.to_string()),
        },
    };
    cfg.apply_key(key, &value)
}

fn threshold_table(args: ThresholdArgs, target: ThresholdTarget) -> Result<i32> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => {
            let mut base = Scenario::new(args.protocol);
            base.f0 = 1.0;
            base.p_g = 1.0;
            RunConfig::new(base)
        }
    };
    cfg.spec.base.protocol = args.protocol;
    cfg.spec.base.qkd = args.qkd;
    for o in &args.overrides {
        apply_override(&mut cfg, o)?;
    }
    let base = cfg.spec.base;
    let rounds = parse_int_list(&args.rounds)?;
    let cells: Vec<(u32, u32)> = parse_int_list(&args.nesting)?
        .into_iter()
        .flat_map(|n| rounds.iter().map(move |&k| (n, k)))
        .collect();
    let results: Vec<Result<Threshold>> = cells
        .par_iter()
        .map(|&(n, k)| {
            let mut base = base.clone();
            base.nesting = n;
            base.rounds = k;
            bisect_threshold(&ThresholdQuery { target, base }, args.tol)
        })
        .collect();
    let mut table = Table::new(["protocol", "qkd", "N", "k", "parameter", "status", "threshold", "rounded"]);
    let mut infeasible = false;
    for (&(n, k), res) in cells.iter().zip(results) {
        let (status, value) = match res? {
            Threshold::Value(v) => ("value", Some(v)),
            Threshold::NoConstraint => ("no-constraint", None),
            Threshold::Infeasible => {
                infeasible = true;
                ("infeasible", None)
            }
        };
        table.push(vec![
            base.protocol.name().into(),
            base.qkd.name().into(),
            n.into(),
            k.into(),
            target.parameter().into(),
            status.into(),
            value.into(),
            value.map(round3).into(),
        ]);
    }
    emit(&table, &args.output)?;
    if infeasible {
        eprintln!("some cells admit no positive secret fraction");
        return Ok(EXIT_INFEASIBLE);
    }
    Ok(EXIT_OK)
}

pub fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// Optimal initial fidelity per (N, k) cell with everything else taken from `cfg`.
pub fn opt_fidelity_table(cfg: &RunConfig, nesting: &[u32], rounds: &[u32]) -> Result<Table> {
    let lo = match cfg.spec.base.protocol {
        Protocol::Hybrid => 0.5,
        Protocol::Original => 0.25,
        Protocol::Ensemble => return Err(Error::Config("the ensemble protocol has no initial-fidelity knob".into())),
    };
    let cells: Vec<(u32, u32)> = nesting.iter().flat_map(|&n| rounds.iter().map(move |&k| (n, k))).collect();
    let results: Vec<Result<Optimum>> = cells
        .par_iter()
        .map(|&(n, k)| {
            let mut spec = cfg.spec.clone();
            spec.base.nesting = n;
            spec.base.rounds = k;
            spec.continuous = vec![ContinuousAxis::new("F0", lo, 1.0, AxisScale::LogUpper)?];
            spec.discrete.clear();
            optimize(&spec)
        })
        .collect();
    let mut table = Table::new(["protocol", "N", "k", "F0_opt", "rounded", "r_qkd"]);
    for (&(n, k), res) in cells.iter().zip(results) {
        let opt = res?;
        let f0 = opt.params["F0"];
        table.push(vec![
            cfg.spec.base.protocol.name().into(),
            n.into(),
            k.into(),
            f0.into(),
            round3(f0).into(),
            opt.rate().r_qkd.into(),
        ]);
    }
    Ok(table)
}

fn rate_columns() -> impl Iterator<Item = String> {
    ["r_rep", "p_click", "r_sift", "r_secret_fraction", "r_qkd", "a_factor", "loose_bound", "diagnostic"]
        .into_iter()
        .map(String::from)
}

fn rate_cells(opt: &Optimum) -> Vec<Cell> {
    let r = opt.rate();
    vec![
        r.r_rep.into(),
        r.p_click.into(),
        r.r_sift.into(),
        r.r_secret_fraction.into(),
        r.r_qkd.into(),
        r.a_factor.into(),
        Cell::Text(r.loose_bound().to_string()),
        Cell::Text(opt.evaluation.diagnostic.clone().unwrap_or_default()),
    ]
}

fn emit(table: &Table, output: &OutputArgs) -> Result<()> {
    match &output.out {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(|e| Error::Config(format!("creating {}: {e}", path.display())))?;
            table.write(output.format, std::io::BufWriter::new(file))
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            table.write(output.format, &mut lock)?;
            lock.flush().map_err(|e| Error::Config(format!("writing output: {e}")))
        }
    }
}
