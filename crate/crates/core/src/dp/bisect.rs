//! Tuning the interference multiplier.

use crate::error::{Error, Result};
use crate::params::SystemParams;

use super::grid::{build_grids, DpConfig};
use super::simulate::simulate_policy;
use super::solve::backward_induction;
use super::table::PolicyTable;

/// Largest multiplier tried while looking for a feasible upper bracket.
const LAMBDA_CEILING: f64 = 65536.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Bisection {
    pub lambda: f64,
    /// Expected interference excess `G(lambda)` of the returned policy.
    pub gap: f64,
    pub table: PolicyTable,
    /// Number of dynamic programs solved.
    pub evaluations: usize,
    /// Whether `|lambda G(lambda)| < eps` was reached. When `G` jumps across
    /// zero no multiplier achieves it and the smallest feasible one found is
    /// returned instead.
    pub converged: bool,
}

/// Expected horizon-averaged interference of a freshly solved table minus
/// `Q_avg`, exact under the quantized model.
pub fn interference_gap(table: &PolicyTable, params: &SystemParams) -> Result<f64> {
    let stats = table
        .stats
        .ok_or_else(|| Error::Domain("table carries no expected statistics; solve it again".into()))?;
    Ok(stats.interference - params.q_avg())
}

/// Monte Carlo estimate of the same excess from `trials` rollouts, with its
/// standard error. Equal seeds give common random numbers across tables.
pub fn rollout_interference_gap(table: &PolicyTable, params: &SystemParams, trials: usize, seed: u64) -> Result<(f64, f64)> {
    let sim = simulate_policy(table, params, trials, seed)?;
    let n = sim.trials.len() as f64;
    let mean = sim.avg_interference;
    let var = sim.trials.iter().map(|t| (t.interference - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok((mean - params.q_avg(), (var / n).sqrt()))
}

/// Find `lambda >= 0` with `|lambda G(lambda)| < eps`, or zero when the
/// unpriced policy already meets the limit.
pub fn bisection_lambda(params: &SystemParams, cfg: &DpConfig, eps: f64) -> Result<Bisection> {
    if !(eps > 0.0) {
        return Err(Error::Domain("bisection tolerance must be positive".into()));
    }
    let grids = build_grids(params, cfg)?;
    let mut evaluations = 0;
    let mut solve = |lambda: f64| -> Result<(PolicyTable, f64)> {
        evaluations += 1;
        let t = backward_induction(params, lambda, &grids, cfg)?;
        let g = interference_gap(&t, params)?;
        Ok((t, g))
    };

    let (table, gap) = solve(0.0)?;
    if gap <= 0.0 {
        return Ok(Bisection {
            lambda: 0.0,
            gap,
            table,
            evaluations,
            converged: true,
        });
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let (mut best, mut best_gap) = loop {
        let (t, g) = solve(hi)?;
        if g <= 0.0 {
            break (t, g);
        }
        lo = hi;
        hi *= 2.0;
        if hi > LAMBDA_CEILING {
            return Err(Error::Numerical(format!(
                "no multiplier up to {LAMBDA_CEILING} meets the interference limit"
            )));
        }
    };
    let done = |lambda: f64, gap: f64| (lambda * gap).abs() < eps;
    let mut converged = done(hi, best_gap);
    while !converged && hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        let (t, g) = solve(mid)?;
        if done(mid, g) {
            hi = mid;
            best = t;
            best_gap = g;
            converged = true;
        } else if g > 0.0 {
            lo = mid;
        } else {
            hi = mid;
            best = t;
            best_gap = g;
        }
    }
    Ok(Bisection {
        lambda: hi,
        gap: best_gap,
        table: best,
        evaluations,
        converged,
    })
}
