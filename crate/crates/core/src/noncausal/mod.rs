//! Non-causal benchmark: with every gain and harvest known in advance and the
//! Boolean decisions fixed, alternate between a convex power problem (solved
//! through its KKT structure) and a linear program in the sensing times.
//!
//! The benchmark uses the unbounded-battery form of energy causality: the
//! cumulative energy spent up to slot `k` never exceeds the initial battery
//! plus everything harvested before slot `k`.

pub mod alternating;
pub mod lp;
pub mod power;
pub mod simplex;

pub use alternating::{alternating_optimize, jensen_upper_bound, realized_jensen_bound, AlternatingResult};
pub use lp::{build_sensing_time_lp, solve_lp, two_horizon_sensing_time, LpProblem};
pub use power::{
    kkt_residuals, power_allocation_given_duals, rank_users, ratio_triples, solve_power_subproblem, KktReport,
    PowerSolution, RatioTriple,
};

use crate::model::{DecisionSet, Realization};
use crate::params::SystemParams;

/// Fixed values of the Boolean variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    /// `a[i][k]`: user `i` senses in slot `k`.
    pub a: Vec<Vec<bool>>,
    /// `theta[k]`: the band is declared busy in slot `k`.
    pub theta: Vec<bool>,
}

impl Assignment {
    pub fn all(n: usize, m: usize, a: bool, theta: bool) -> Self {
        Assignment {
            a: vec![vec![a; m]; n],
            theta: vec![theta; m],
        }
    }
}

/// Everything the continuous solvers need for one fixed assignment.
///
/// Slots are numbered from zero within the instance. `norm_m` is the horizon
/// length used in the `1/(M T)` normalization, which differs from
/// `n_slots()` when the instance covers only the tail of a longer horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub slot_ms: f64,
    pub norm_m: f64,
    pub p_max: f64,
    pub p_sense: f64,
    pub tau_min: f64,
    /// Right-hand side of `sum_k (T - tau_k)/(M T) sum_i p g a (1 - theta) <= budget`.
    /// Equal to `Q_avg` for a full horizon.
    pub interference_budget: f64,
    pub battery0: Vec<f64>,
    pub h: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
    pub harvest: Vec<Vec<f64>>,
    pub a: Vec<Vec<bool>>,
    pub theta: Vec<bool>,
}

impl Instance {
    pub fn new(params: &SystemParams, realization: &Realization, assignment: &Assignment) -> Self {
        Instance {
            slot_ms: params.slot_ms,
            norm_m: params.horizon as f64,
            p_max: params.p_max,
            p_sense: params.p_sense,
            tau_min: params.tau_min,
            interference_budget: params.q_avg(),
            battery0: params.battery_init.clone(),
            h: realization.h.clone(),
            g: realization.g.clone(),
            harvest: realization.harvest.clone(),
            a: assignment.a.clone(),
            theta: assignment.theta.clone(),
        }
    }

    pub fn n_users(&self) -> usize {
        self.battery0.len()
    }

    pub fn n_slots(&self) -> usize {
        self.theta.len()
    }

    /// `a[i][k] (1 - theta[k])`.
    pub fn transmits(&self, i: usize, k: usize) -> bool {
        self.a[i][k] && !self.theta[k]
    }

    /// Objective: `sum_k (T - tau_k)/(M T) log2(1 + sum_i p h a (1 - theta))`.
    pub fn throughput(&self, p: &[Vec<f64>], tau: &[f64]) -> f64 {
        (0..self.n_slots())
            .map(|k| {
                let x: f64 = (0..self.n_users())
                    .filter(|&i| self.transmits(i, k))
                    .map(|i| p[i][k] * self.h[i][k])
                    .sum();
                (self.slot_ms - tau[k]) / (self.norm_m * self.slot_ms) * x.ln_1p() / std::f64::consts::LN_2
            })
            .sum()
    }

    /// Left-hand side of the interference constraint.
    pub fn interference(&self, p: &[Vec<f64>], tau: &[f64]) -> f64 {
        (0..self.n_slots())
            .map(|k| {
                let w: f64 = (0..self.n_users())
                    .filter(|&i| self.transmits(i, k))
                    .map(|i| p[i][k] * self.g[i][k])
                    .sum();
                (self.slot_ms - tau[k]) / (self.norm_m * self.slot_ms) * w
            })
            .sum()
    }

    /// Energy available to user `i` through slot `k` minus what it spends,
    /// `B_i + sum_{r<k} H - sum_{r<=k} a (p_s tau_r + p (T - tau_r)(1 - theta_r))`.
    pub fn energy_slack(&self, i: usize, k: usize, p: &[Vec<f64>], tau: &[f64]) -> f64 {
        let mut slack = self.battery0[i];
        for r in 0..=k {
            if r < k {
                slack += self.harvest[i][r];
            }
            if self.a[i][r] {
                slack -= self.p_sense * tau[r];
                if !self.theta[r] {
                    slack -= p[i][r] * (self.slot_ms - tau[r]);
                }
            }
        }
        slack
    }

    /// Largest violation of any constraint (zero when feasible).
    pub fn max_violation(&self, p: &[Vec<f64>], tau: &[f64]) -> f64 {
        let mut worst = (self.interference(p, tau) - self.interference_budget).max(0.0);
        for i in 0..self.n_users() {
            for k in 0..self.n_slots() {
                worst = worst.max(-self.energy_slack(i, k, p, tau));
                worst = worst.max(-p[i][k]).max(p[i][k] - self.p_max);
            }
        }
        for &t in tau {
            worst = worst.max(self.tau_min - t).max(t - self.slot_ms);
        }
        worst
    }

    pub fn decisions(&self, p: Vec<Vec<f64>>, tau: Vec<f64>) -> DecisionSet {
        DecisionSet {
            a: self.a.clone(),
            theta: self.theta.clone(),
            p,
            tau,
        }
    }
}
