//! Rollouts of a policy table on continuous realizations.

use crate::error::Result;
use crate::experiment::generate_realization;
use crate::model::{evaluate_objective, DecisionSet, Realization, TOL};
use crate::params::SystemParams;
use crate::rng::{keyed, trial_seed, Stream};
use crate::sensing::{or_fusion, simulate_local_decision, SensingConfig};

use super::table::{policy_lookup, PolicyTable};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub throughput: f64,
    /// Horizon-averaged interference.
    pub interference: f64,
    /// Mean of `tau_k / T` over the horizon.
    pub avg_tau: f64,
    /// Slots whose table action exceeded the true battery and was replaced
    /// by the idle action.
    pub clipped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicySimulation {
    pub trials: Vec<TrialOutcome>,
    pub avg_throughput: f64,
    pub avg_interference: f64,
    pub causality_violations: usize,
}

/// Run the policy on one realization.
pub fn run_policy(table: &PolicyTable, params: &SystemParams, rz: &Realization) -> Result<(DecisionSet, usize)> {
    let n = params.n_users;
    let m = params.horizon;
    let t = params.slot_ms;
    let cfg = SensingConfig::from_params(params);
    let mut battery = params.battery_init.clone();
    let mut dec = DecisionSet::idle(n, m, params.tau_min);
    let mut clipped = 0;
    for k in 0..m {
        let g: Vec<f64> = rz.g.iter().map(|r| r[k]).collect();
        let h: Vec<f64> = rz.h.iter().map(|r| r[k]).collect();
        let mut act = policy_lookup(table, &g, &h, &battery, k);
        let affordable = (0..n).all(|i| !act.a[i] || params.p_sense * act.tau + act.p[i] * (t - act.tau) <= battery[i] + TOL);
        if !affordable {
            clipped += 1;
            act.a.fill(false);
            act.p.fill(0.0);
            act.tau = params.tau_min;
        }
        let mut local = Vec::new();
        for i in (0..n).filter(|&i| act.a[i]) {
            let mut noise = keyed(rz.seed, Stream::Sensing, i, k);
            local.push(simulate_local_decision(act.tau, cfg.gains[i], rz.pu_active[k], &cfg, &mut noise)?);
        }
        let theta = or_fusion(&local);
        for i in 0..n {
            let spent = if act.a[i] {
                params.p_sense * act.tau + if theta { 0.0 } else { act.p[i] * (t - act.tau) }
            } else {
                0.0
            };
            battery[i] = params.battery_max.clip((battery[i] - spent).max(0.0) + rz.harvest[i][k]);
            dec.a[i][k] = act.a[i];
            dec.p[i][k] = act.p[i];
        }
        dec.theta[k] = theta;
        dec.tau[k] = act.tau;
    }
    Ok((dec, clipped))
}

/// Average the policy over `n_trials` seeded realizations. Trial `j` uses
/// the same realization as every other mode run with the same seed.
pub fn simulate_policy(table: &PolicyTable, params: &SystemParams, n_trials: usize, seed: u64) -> Result<PolicySimulation> {
    let mut trials = Vec::with_capacity(n_trials);
    for j in 0..n_trials {
        let rz = generate_realization(params, trial_seed(seed, j));
        let (dec, clipped) = run_policy(table, params, &rz)?;
        let ev = evaluate_objective(params, &rz, &dec)?;
        trials.push(TrialOutcome {
            throughput: ev.throughput,
            interference: ev.avg_interference,
            avg_tau: dec.tau.iter().sum::<f64>() / (params.horizon as f64 * params.slot_ms),
            clipped,
        });
    }
    let count = n_trials.max(1) as f64;
    Ok(PolicySimulation {
        avg_throughput: trials.iter().map(|t| t.throughput).sum::<f64>() / count,
        avg_interference: trials.iter().map(|t| t.interference).sum::<f64>() / count,
        causality_violations: trials.iter().map(|t| t.clipped).sum(),
        trials,
    })
}
