use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cogmac::dp::{bisection_lambda, build_grids, backward_induction, DpConfig, Hook, PolicyTable};
use cogmac::experiment::{
    evaluate_policy, run_experiment, write_csv, write_trials_csv, ExperimentConfig, LambdaChoice, Mode, ResultRow,
    TrialRecord,
};
use cogmac::Error;

#[derive(Parser)]
#[command(name = "cogmac", version, about = "Energy-harvesting cognitive radio access: solvers and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the non-causal benchmark (or its heuristic) on fresh realizations.
    SolveNoncausal(Common),
    /// Train a causal policy table by backward induction.
    TrainDp {
        #[command(flatten)]
        common: Common,
        /// Fixed interference multiplier.
        #[arg(long, conflicts_with = "bisect_eps")]
        lambda: Option<f64>,
        /// Search the multiplier by bisection until |lambda G| < EPS.
        #[arg(long, value_name = "EPS")]
        bisect_eps: Option<f64>,
        /// Where to write the policy table (defaults to --out, then stdout).
        #[arg(long, value_name = "PATH")]
        table_out: Option<PathBuf>,
    },
    /// Roll out a trained policy table on fresh realizations.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        table: PathBuf,
    },
    /// Run every configured mode over the configured sweep.
    Sweep(Common),
    /// Print the effective configuration as a config file.
    EmitDefaultConfig(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "K")]
    trials: Option<usize>,
    /// One mode, or a comma-separated list for `sweep`.
    #[arg(long, value_name = "NAME")]
    mode: Option<String>,
    /// Override a config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Also write one line per trial to this file.
    #[arg(long, value_name = "PATH")]
    trials_out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Infeasible(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Infeasible(_) => 3,
            Failure::Numerical(_) => 4,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Infeasible { .. } | Error::Causality { .. } => Failure::Infeasible(msg),
            Error::Numerical(_) | Error::Domain(_) => Failure::Numerical(msg),
            Error::InvalidParameter { .. } | Error::Parse { .. } | Error::EnumerationCap { .. } | Error::Io(_) => {
                Failure::Config(msg)
            }
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))
}

fn parse_modes(list: &str) -> CliResult<Vec<Mode>> {
    list.split(',')
        .map(|s| {
            Mode::parse(s.trim()).ok_or_else(|| {
                let known: Vec<_> = Mode::ALL.iter().map(|m| m.name()).collect();
                Failure::Config(format!("unknown mode `{}` (expected one of {})", s.trim(), known.join(", ")))
            })
        })
        .collect()
}

impl Common {
    fn load(&self) -> CliResult<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::parse(&read(path)?)
                .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?,
            None => ExperimentConfig::default(),
        };
        let mut overrides = self.overrides.clone();
        if let Some(seed) = self.seed {
            overrides.push(format!("seed={seed}"));
        }
        if let Some(trials) = self.trials {
            overrides.push(format!("trials={trials}"));
        }
        cfg.apply_overrides(&overrides)?;
        if let Some(list) = &self.mode {
            cfg.modes = parse_modes(list)?;
        }
        Ok(cfg)
    }

    /// The single mode a subcommand acts on, restricted to `allowed`.
    fn single_mode(&self, cfg: &ExperimentConfig, allowed: &[Mode], fallback: Mode) -> CliResult<Mode> {
        let mode = match &self.mode {
            Some(_) if cfg.modes.len() != 1 => return Err(Failure::Config("expected a single --mode".into())),
            Some(_) => cfg.modes[0],
            None => cfg.modes.iter().copied().find(|m| allowed.contains(m)).unwrap_or(fallback),
        };
        if !allowed.contains(&mode) {
            return Err(Failure::Config(format!("mode `{mode}` is not valid for this command")));
        }
        Ok(mode)
    }
}

fn open_out(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Config(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit(common: &Common, cfg: &ExperimentConfig, rows: &[ResultRow], trials: &[TrialRecord]) -> CliResult<()> {
    let mut out = open_out(common.out.as_deref())?;
    write_csv(&mut out, cfg, rows)?;
    out.flush()?;
    if let Some(path) = &common.trials_out {
        let mut t = open_out(Some(path))?;
        write_trials_csv(&mut t, trials)?;
        t.flush()?;
    }
    Ok(())
}

fn solve_noncausal(common: &Common) -> CliResult<()> {
    let mut cfg = common.load()?;
    let mode = common.single_mode(
        &cfg,
        &[Mode::NoncausalExhaustive, Mode::NoncausalHeuristic],
        Mode::NoncausalExhaustive,
    )?;
    cfg.modes = vec![mode];
    cfg.sweep = None;
    let (rows, trials) = run_experiment(&cfg)?;
    emit(common, &cfg, &rows, &trials)?;
    if rows.iter().all(|r| r.infeasible == r.n_trials) {
        return Err(Failure::Infeasible("no trial admitted a feasible solution".into()));
    }
    Ok(())
}

fn train_dp(common: &Common, lambda: Option<f64>, bisect_eps: Option<f64>, table_out: Option<&Path>) -> CliResult<()> {
    let cfg = common.load()?;
    let mode = common.single_mode(
        &cfg,
        &[Mode::CausalDpExhaustive, Mode::CausalDpHeuristic],
        Mode::CausalDpHeuristic,
    )?;
    let hook = mode.hook().unwrap_or(Hook::Heuristic);
    let dp = DpConfig { hook, ..cfg.dp };
    let choice = match (lambda, bisect_eps) {
        (Some(l), _) => LambdaChoice::Fixed(l),
        (None, Some(eps)) => LambdaChoice::Bisect { eps },
        (None, None) => cfg.lambda,
    };
    let table = match choice {
        LambdaChoice::Fixed(l) => {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Failure::Config(format!("--lambda must be finite and non-negative, got {l}")));
            }
            backward_induction(&cfg.params, l, &build_grids(&cfg.params, &dp)?, &dp)?
        }
        LambdaChoice::Bisect { eps } => {
            if !(eps > 0.0) {
                return Err(Failure::Config(format!("--bisect-eps must be positive, got {eps}")));
            }
            let b = bisection_lambda(&cfg.params, &dp, eps)?;
            eprintln!(
                "lambda = {:.6e}, G = {:.6e}, {} programs solved{}",
                b.lambda,
                b.gap,
                b.evaluations,
                if b.converged { "" } else { ", |lambda G| < eps not reached (G jumps across zero)" }
            );
            b.table
        }
    };
    let mut out = open_out(table_out.or(common.out.as_deref()))?;
    out.write_all(table.to_text().as_bytes())?;
    out.flush()?;
    Ok(())
}

fn simulate(common: &Common, table_path: &Path) -> CliResult<()> {
    let cfg = common.load()?;
    let table = PolicyTable::from_text(&read(table_path)?)
        .map_err(|e| Failure::Config(format!("{}: {e}", table_path.display())))?;
    let (row, trials) = evaluate_policy(&cfg, &table)?;
    emit(common, &cfg, &[row], &trials)
}

fn sweep(common: &Common) -> CliResult<()> {
    let cfg = common.load()?;
    let (rows, trials) = run_experiment(&cfg)?;
    emit(common, &cfg, &rows, &trials)
}

fn emit_config(common: &Common) -> CliResult<()> {
    let cfg = common.load()?;
    let mut out = open_out(common.out.as_deref())?;
    out.write_all(cfg.to_text().as_bytes())?;
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::SolveNoncausal(c) => solve_noncausal(c),
        Command::TrainDp {
            common,
            lambda,
            bisect_eps,
            table_out,
        } => train_dp(common, *lambda, *bisect_eps, table_out.as_deref()),
        Command::Simulate { common, table } => simulate(common, table),
        Command::Sweep(c) => sweep(c),
        Command::EmitDefaultConfig(c) => emit_config(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let msg = match &f {
                Failure::Config(m) => format!("configuration error: {m}"),
                Failure::Infeasible(m) | Failure::Numerical(m) => m.clone(),
            };
            eprintln!("cogmac: {msg}");
            ExitCode::from(f.code())
        }
    }
}
