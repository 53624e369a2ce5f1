//! Monte Carlo runner and CSV output.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use crate::boolean::{exhaustive_solve, heuristic_assign};
use crate::dp::{backward_induction, bisection_lambda, build_grids, simulate_policy, DpConfig, Hook, PolicyTable};
use crate::error::{Error, Result};
use crate::model::{evaluate_objective, DecisionSet, Evaluation};
use crate::params::SystemParams;
use crate::rng::{trial_seed, RNG_NAME};

use super::config::{ExperimentConfig, LambdaChoice, Mode};
use super::generate_realization;

/// First token of every result file.
pub const CSV_MAGIC: &str = "#cogmac-csv v1";

pub const CSV_HEADER: &str = "sweep_var,sweep_value,mode,M,n_trials,n_used,avg_throughput,se_throughput,avg_tau,se_tau,avg_interference,violations,infeasible,lambda,wall_ms";

/// One aggregated line of the result file.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    /// `None` when no sweep is configured.
    pub sweep_var: Option<&'static str>,
    pub sweep_value: f64,
    pub mode: Mode,
    pub horizon: usize,
    pub n_trials: usize,
    /// Trials that produced a solution without violations; only these
    /// enter the averages.
    pub n_used: usize,
    pub avg_throughput: f64,
    pub se_throughput: f64,
    /// Mean of `tau / T`.
    pub avg_tau: f64,
    pub se_tau: f64,
    pub avg_interference: f64,
    /// Trials with a battery-causality violation (noncausal modes) or with
    /// a slot whose action was unaffordable and replaced by idling (policy
    /// modes).
    pub violations: usize,
    pub infeasible: usize,
    /// Interference multiplier of the policy modes.
    pub lambda: Option<f64>,
    pub wall_ms: f64,
}

/// One trial of one row.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub sweep_value: f64,
    pub mode: Mode,
    pub trial: usize,
    /// `None` when the solver found no feasible decision.
    pub throughput: Option<f64>,
    pub interference: Option<f64>,
    pub avg_tau: Option<f64>,
    pub violations: usize,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn tau_share(dec: &DecisionSet, params: &SystemParams) -> f64 {
    dec.tau.iter().sum::<f64>() / (dec.tau.len() as f64 * params.slot_ms)
}

fn noncausal_trial(mode: Mode, params: &SystemParams, seed: u64) -> Result<Option<(Evaluation, f64)>> {
    let rz = generate_realization(params, seed);
    let dec = match mode {
        Mode::NoncausalExhaustive => match exhaustive_solve(&rz, params) {
            Ok(r) => r.decisions(),
            Err(e) if e.is_infeasible() => return Ok(None),
            Err(e) => return Err(e),
        },
        Mode::NoncausalHeuristic => match heuristic_assign(&rz, params) {
            Ok(h) => h.decisions,
            Err(e) if e.is_infeasible() => return Ok(None),
            Err(e) => return Err(e),
        },
        _ => unreachable!("policy modes are simulated elsewhere"),
    };
    let ev = evaluate_objective(params, &rz, &dec)?;
    Ok(Some((ev, tau_share(&dec, params))))
}

/// Train a policy table with a fixed or bisected multiplier.
pub fn train(params: &SystemParams, dp: &DpConfig, lambda: LambdaChoice) -> Result<PolicyTable> {
    match lambda {
        LambdaChoice::Fixed(l) => {
            let grids = build_grids(params, dp)?;
            backward_induction(params, l, &grids, dp)
        }
        LambdaChoice::Bisect { eps } => Ok(bisection_lambda(params, dp, eps)?.table),
    }
}

type Outcomes = Vec<(Option<(f64, f64, f64)>, usize)>;

fn run_mode(
    cfg: &ExperimentConfig,
    params: &SystemParams,
    mode: Mode,
    sweep_value: f64,
) -> Result<(ResultRow, Vec<TrialRecord>)> {
    let start = Instant::now();
    let n = cfg.n_trials;
    match mode.hook() {
        None => {
            let params = match mode {
                Mode::NoncausalExhaustive => params.with_unbounded_battery(),
                _ => params.clone(),
            };
            let outcomes: Outcomes = (0..n)
                .into_par_iter()
                .map(|j| {
                    noncausal_trial(mode, &params, trial_seed(cfg.seed, j)).map(|r| match r {
                        Some((ev, tau)) => (
                            Some((ev.throughput, ev.avg_interference, tau)),
                            usize::from(!ev.causality_ok),
                        ),
                        None => (None, 0),
                    })
                })
                .collect::<Result<_>>()?;
            Ok(aggregate(cfg, &params, mode, sweep_value, outcomes, None, start))
        }
        Some(hook) => {
            let dp = DpConfig { hook, ..cfg.dp };
            let table = train(params, &dp, cfg.lambda)?;
            policy_rows(cfg, params, &table, sweep_value, start)
        }
    }
}

fn policy_rows(
    cfg: &ExperimentConfig,
    params: &SystemParams,
    table: &PolicyTable,
    sweep_value: f64,
    start: Instant,
) -> Result<(ResultRow, Vec<TrialRecord>)> {
    let mode = match table.config.hook {
        Hook::Exhaustive => Mode::CausalDpExhaustive,
        Hook::Heuristic => Mode::CausalDpHeuristic,
    };
    let outcomes: Outcomes = simulate_policy(table, params, cfg.n_trials, cfg.seed)?
        .trials
        .into_iter()
        .map(|t| (Some((t.throughput, t.interference, t.avg_tau)), t.clipped))
        .collect();
    Ok(aggregate(cfg, params, mode, sweep_value, outcomes, Some(table.lambda), start))
}

/// Simulate a trained policy on `cfg.n_trials` realizations of `cfg.params`.
pub fn evaluate_policy(cfg: &ExperimentConfig, table: &PolicyTable) -> Result<(ResultRow, Vec<TrialRecord>)> {
    if table.n_users != cfg.params.n_users || table.horizon != cfg.params.horizon {
        return Err(Error::InvalidParameter {
            name: "table",
            reason: format!(
                "table is for N={} M={}, configuration has N={} M={}",
                table.n_users, table.horizon, cfg.params.n_users, cfg.params.horizon
            ),
        });
    }
    policy_rows(cfg, &cfg.params, table, f64::NAN, Instant::now())
}

fn aggregate(
    cfg: &ExperimentConfig,
    params: &SystemParams,
    mode: Mode,
    sweep_value: f64,
    outcomes: Outcomes,
    lambda: Option<f64>,
    start: Instant,
) -> (ResultRow, Vec<TrialRecord>) {
    let n = outcomes.len();
    let used: Vec<(f64, f64, f64)> = outcomes.iter().filter(|o| o.1 == 0).filter_map(|o| o.0).collect();
    let (avg_throughput, se_throughput) = mean_se(&used.iter().map(|u| u.0).collect::<Vec<_>>());
    let (avg_interference, _) = mean_se(&used.iter().map(|u| u.1).collect::<Vec<_>>());
    let (avg_tau, se_tau) = mean_se(&used.iter().map(|u| u.2).collect::<Vec<_>>());
    let records = outcomes
        .iter()
        .enumerate()
        .map(|(j, (o, v))| TrialRecord {
            sweep_value,
            mode,
            trial: j,
            throughput: o.map(|u| u.0),
            interference: o.map(|u| u.1),
            avg_tau: o.map(|u| u.2),
            violations: *v,
        })
        .collect();
    let row = ResultRow {
        sweep_var: cfg.sweep.as_ref().map(|s| s.var.name()),
        sweep_value,
        mode,
        horizon: params.horizon,
        n_trials: n,
        n_used: used.len(),
        avg_throughput,
        se_throughput,
        avg_tau,
        se_tau,
        avg_interference,
        violations: outcomes.iter().filter(|o| o.1 > 0).count(),
        infeasible: outcomes.iter().filter(|o| o.0.is_none()).count(),
        lambda,
        wall_ms: if cfg.timing {
            start.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        },
    };
    (row, records)
}

/// Run every (sweep value, mode) pair. Trial `j` of every pair sees the
/// realization seeded by `trial_seed(cfg.seed, j)`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(Vec<ResultRow>, Vec<TrialRecord>)> {
    let points: Vec<(f64, SystemParams)> = match &cfg.sweep {
        None => vec![(f64::NAN, cfg.params.clone())],
        Some(s) => s
            .values
            .iter()
            .map(|&v| s.var.apply(&cfg.params, v).map(|p| (v, p)))
            .collect::<Result<_>>()?,
    };
    let mut rows = Vec::new();
    let mut trials = Vec::new();
    for (value, params) in &points {
        for &mode in &cfg.modes {
            let (row, recs) = run_mode(cfg, params, mode, *value)?;
            rows.push(row);
            trials.extend(recs);
        }
    }
    Ok((rows, trials))
}

fn real(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:.10e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(real).unwrap_or_default()
}

fn io(e: std::io::Error) -> Error {
    Error::Io(e.to_string())
}

/// Write the aggregated rows with a magic comment line and a header.
pub fn write_csv<W: Write>(out: &mut W, cfg: &ExperimentConfig, rows: &[ResultRow]) -> Result<()> {
    writeln!(out, "{CSV_MAGIC} seed={} trials={} rng={RNG_NAME}", cfg.seed, cfg.n_trials).map_err(io)?;
    writeln!(out, "{CSV_HEADER}").map_err(io)?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.3}",
            r.sweep_var.unwrap_or("none"),
            real(r.sweep_value),
            r.mode,
            r.horizon,
            r.n_trials,
            r.n_used,
            real(r.avg_throughput),
            real(r.se_throughput),
            real(r.avg_tau),
            real(r.se_tau),
            real(r.avg_interference),
            r.violations,
            r.infeasible,
            opt(r.lambda),
            r.wall_ms
        )
        .map_err(io)?;
    }
    Ok(())
}

/// Write one line per trial.
pub fn write_trials_csv<W: Write>(out: &mut W, trials: &[TrialRecord]) -> Result<()> {
    writeln!(out, "sweep_value,mode,trial,throughput,interference,avg_tau,violations").map_err(io)?;
    for t in trials {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            real(t.sweep_value),
            t.mode,
            t.trial,
            opt(t.throughput),
            opt(t.interference),
            opt(t.avg_tau),
            t.violations
        )
        .map_err(io)?;
    }
    Ok(())
}
