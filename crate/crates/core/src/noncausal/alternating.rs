//! Block-coordinate ascent over powers and sensing times.

use crate::error::Result;
use crate::model::{DualSet, Realization};
use crate::params::SystemParams;

use super::lp::{build_sensing_time_lp, solve_lp};
use super::power::{solve_power_subproblem, KktReport};
use super::Instance;

const MAX_ROUNDS: usize = 100;
const REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct AlternatingResult {
    pub p: Vec<Vec<f64>>,
    pub tau: Vec<f64>,
    pub objective: f64,
    /// Objective after every half step (power, then sensing time).
    pub trace: Vec<f64>,
    pub rounds: usize,
    /// Multipliers of the last power step.
    pub duals: DualSet,
    pub kkt: KktReport,
}

/// Alternate the power and sensing-time steps from `tau_init` (default
/// `tau_l` in every slot) until the objective gains less than `1e-6`
/// relative in a round, or 100 rounds.
pub fn alternating_optimize(inst: &Instance, tau_init: Option<&[f64]>) -> Result<AlternatingResult> {
    let mut tau = match tau_init {
        Some(t) => t.to_vec(),
        None => vec![inst.tau_min; inst.n_slots()],
    };
    let mut trace = Vec::new();
    let mut previous: Option<f64> = None;
    let mut rounds = 0;
    loop {
        rounds += 1;
        let power = solve_power_subproblem(inst, &tau)?;
        trace.push(power.objective);
        let start = previous.unwrap_or(power.objective);

        let lp = build_sensing_time_lp(inst, &power.p);
        let candidate = solve_lp(&lp)?;
        let moved = inst.throughput(&power.p, &candidate);
        // The current times are feasible for the program, so a drop can only
        // be round-off; keep the old point in that case.
        let objective = if moved >= power.objective && inst.max_violation(&power.p, &candidate) <= 1e-9 {
            tau = candidate;
            moved
        } else {
            power.objective
        };
        trace.push(objective);

        let gain = objective - start;
        if gain <= REL_TOL * objective.abs() || rounds >= MAX_ROUNDS {
            return Ok(AlternatingResult {
                p: power.p,
                tau,
                objective,
                trace,
                rounds,
                duals: power.duals,
                kkt: power.kkt,
            });
        }
        previous = Some(objective);
    }
}

/// Throughput ceiling with every user at `P_max`, zero sensing time and the
/// mean direct gain: `log2(1 + N P_max mu_h)`.
pub fn jensen_upper_bound(params: &SystemParams) -> f64 {
    (params.n_users as f64 * params.p_max * params.mu_h).ln_1p() / std::f64::consts::LN_2
}

/// The same ceiling for one realization: `(1/M) sum_k log2(1 + sum_i P_max h_ik)`.
pub fn realized_jensen_bound(params: &SystemParams, realization: &Realization) -> f64 {
    let m = realization.horizon();
    (0..m)
        .map(|k| {
            let x: f64 = realization.h.iter().map(|r| params.p_max * r[k]).sum();
            x.ln_1p() / std::f64::consts::LN_2
        })
        .sum::<f64>()
        / params.horizon as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noncausal::{solve_power_subproblem, Assignment};

    fn realization(n: usize, m: usize) -> Realization {
        Realization {
            g: vec![vec![0.7; m]; n],
            h: (0..n).map(|i| (0..m).map(|k| 0.5 + 0.3 * (i + 2 * k) as f64).collect()).collect(),
            harvest: vec![vec![0.3; m]; n],
            pu_active: vec![false; m],
            seed: 0,
        }
    }

    #[test]
    fn jensen_examples() {
        let p = SystemParams::default();
        assert!((jensen_upper_bound(&p) - 3f64.log2()).abs() < 1e-15);
        let mut one = p.clone();
        one.set_users(1);
        assert!((jensen_upper_bound(&one) - 1.0).abs() < 1e-15);
        let zero = SystemParams { p_max: 0.0, ..p };
        assert_eq!(jensen_upper_bound(&zero), 0.0);
    }

    #[test]
    fn busy_everywhere_gives_zero_in_one_round() {
        let params = SystemParams::default();
        let inst = Instance::new(&params, &realization(2, 2), &Assignment::all(2, 2, true, true));
        let r = alternating_optimize(&inst, None).unwrap();
        assert_eq!(r.objective, 0.0);
        assert_eq!(r.rounds, 1);
    }

    #[test]
    fn single_user_unconstrained_saturates() {
        let mut params = SystemParams::default();
        params.set_users(1);
        params.horizon = 1;
        params.battery_init = vec![100.0];
        params.q_limit = 100.0;
        let inst = Instance::new(&params, &realization(1, 1), &Assignment::all(1, 1, true, false));
        let r = alternating_optimize(&inst, None).unwrap();
        assert!((r.p[0][0] - params.p_max).abs() < 1e-9);
        assert!((r.tau[0] - params.tau_min).abs() < 1e-12);
    }

    #[test]
    fn fixed_point_is_self_consistent() {
        let params = SystemParams::default();
        let rz = realization(2, 2);
        let inst = Instance::new(&params, &rz, &Assignment::all(2, 2, true, false));
        let r = alternating_optimize(&inst, None).unwrap();
        let again = solve_power_subproblem(&inst, &r.tau).unwrap();
        assert!((again.objective - r.objective).abs() < 1e-8);
        let tau = solve_lp(&build_sensing_time_lp(&inst, &r.p)).unwrap();
        assert!((inst.throughput(&r.p, &tau) - r.objective).abs() < 1e-8);
        for w in r.trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9);
        }
        assert!(r.objective <= realized_jensen_bound(&params, &rz) + 1e-12);
    }
}
