//! Causal finite-battery policy by dynamic programming on a quantized state.
//!
//! The interference constraint is dualized with a multiplier `lambda`, the
//! resulting per-slot Lagrangian is maximized by backward induction over
//! quantized channel gains and battery levels, and `lambda` is tuned by
//! bisection until the policy meets the average-interference limit.

mod bisect;
mod grid;
mod simulate;
mod solve;
mod table;

pub use bisect::{bisection_lambda, interference_gap, rollout_interference_gap, Bisection};
pub use grid::{
    build_grids, exponential_boundaries, exponential_midpoints, floor_index, nearest_index, DpConfig, Hook,
    QuantizationGrid,
};
pub use simulate::{simulate_policy, PolicySimulation, TrialOutcome};
pub use solve::{action_list, backward_induction, Action, PolicyStats, StateSpace};
pub use table::{policy_lookup, LookupAction, PolicyTable};

use crate::model::{slot_interference, slot_throughput};
use crate::params::SystemParams;

/// Per-slot Lagrangian
/// `((T - tau)/(M T)) log2(1 + sum p h a (1 - theta)) - lambda (((T - tau)/(M T)) sum p g a (1 - theta) - Q_avg / M)`.
///
/// The `Q_avg / M` share makes the rewards of the `M` slots add up to the
/// horizon Lagrangian.
#[allow(clippy::too_many_arguments)]
pub fn lagrangian_reward(
    p: &[f64],
    tau: f64,
    g: &[f64],
    h: &[f64],
    a: &[bool],
    theta: bool,
    lambda: f64,
    params: &SystemParams,
) -> f64 {
    let m = params.horizon as f64;
    let rate = slot_throughput(p, h, a, theta, tau, params);
    let interference = slot_interference(p, g, a, theta, tau, params) / m;
    rate - lambda * (interference - params.q_avg() / m)
}
