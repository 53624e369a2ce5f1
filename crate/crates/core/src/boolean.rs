//! The Boolean decisions: who senses (`a`) and whether the band is declared
//! busy (`theta`). Short horizons are searched exhaustively; long ones use a
//! battery-threshold rule with simulated sensing.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{battery_trajectory, evaluate_objective, BatteryTrajectory, DecisionSet, Evaluation, Realization};
use crate::noncausal::{alternating_optimize, Assignment, Instance};
use crate::params::SystemParams;
use crate::rng::{keyed, Stream};
use crate::sensing::{or_fusion, simulate_local_decision, SensingConfig};

/// Default cap on the number of enumerated assignments, as a power of two.
pub const DEFAULT_CAP_BITS: u32 = 20;

/// An assignment together with the value of its continuous subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct BooleanAssignment {
    pub a: Vec<Vec<bool>>,
    pub theta: Vec<bool>,
    pub feasible: bool,
    /// Optimal throughput, `-inf` when infeasible.
    pub objective: f64,
}

/// Every `(a, theta)` in lexicographic order of the bit string
/// `a[0][0] .. a[0][M-1] a[1][0] .. a[N-1][M-1] theta[0] .. theta[M-1]`,
/// most significant bit first.
pub fn enumerate_assignments(n: usize, m: usize, cap_bits: u32) -> Result<impl Iterator<Item = Assignment>> {
    let bits = ((n + 1) * m) as u32;
    if bits > cap_bits || bits >= 64 {
        return Err(Error::EnumerationCap { bits, cap_bits });
    }
    Ok((0..1u64 << bits).map(move |x| decode(x, n, m, None)))
}

fn decode(x: u64, n: usize, m: usize, theta: Option<&[bool]>) -> Assignment {
    let a_bits = n * m;
    let bits = a_bits + if theta.is_some() { 0 } else { m };
    let bit = |b: usize| (x >> (bits - 1 - b)) & 1 == 1;
    Assignment {
        a: (0..n).map(|i| (0..m).map(|k| bit(i * m + k)).collect()).collect(),
        theta: match theta {
            Some(t) => t.to_vec(),
            None => (0..m).map(|k| bit(a_bits + k)).collect(),
        },
    }
}

/// How `theta` is treated by [`exhaustive_solve_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThetaMode {
    /// `theta` is a free decision variable.
    #[default]
    Free,
    /// `theta[k]` equals the realized PU activity; only `a` is searched.
    Observed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExhaustiveOptions {
    pub theta: ThetaMode,
    pub cap_bits: u32,
}

impl Default for ExhaustiveOptions {
    fn default() -> Self {
        ExhaustiveOptions {
            theta: ThetaMode::Free,
            cap_bits: DEFAULT_CAP_BITS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustiveResult {
    pub best: BooleanAssignment,
    pub p: Vec<Vec<f64>>,
    pub tau: Vec<f64>,
    /// Number of assignments examined.
    pub evaluated: usize,
    /// Number of those with a feasible continuous subproblem.
    pub feasible: usize,
}

impl ExhaustiveResult {
    pub fn decisions(&self) -> DecisionSet {
        DecisionSet {
            a: self.best.a.clone(),
            theta: self.best.theta.clone(),
            p: self.p.clone(),
            tau: self.tau.clone(),
        }
    }
}

/// Solve the continuous subproblem of one assignment; infeasible
/// assignments get `-inf`.
pub fn evaluate_assignment(
    params: &SystemParams,
    realization: &Realization,
    assignment: &Assignment,
) -> Result<Option<(f64, Vec<Vec<f64>>, Vec<f64>)>> {
    let inst = Instance::new(params, realization, assignment);
    match alternating_optimize(&inst, None) {
        Ok(r) => Ok(Some((r.objective, r.p, r.tau))),
        Err(e) if e.is_infeasible() => Ok(None),
        Err(e) => Err(e),
    }
}

/// Exhaustive search with `theta` free and the default cap.
pub fn exhaustive_solve(realization: &Realization, params: &SystemParams) -> Result<ExhaustiveResult> {
    exhaustive_solve_with(realization, params, &ExhaustiveOptions::default())
}

pub fn exhaustive_solve_with(
    realization: &Realization,
    params: &SystemParams,
    opts: &ExhaustiveOptions,
) -> Result<ExhaustiveResult> {
    let n = params.n_users;
    let m = params.horizon;
    realization.check_shape(n, m)?;
    let observed = match opts.theta {
        ThetaMode::Free => None,
        ThetaMode::Observed => Some(realization.pu_active.clone()),
    };
    let bits = (n * m + if observed.is_some() { 0 } else { m }) as u32;
    if bits > opts.cap_bits || bits >= 64 {
        return Err(Error::EnumerationCap {
            bits,
            cap_bits: opts.cap_bits,
        });
    }
    let total = 1u64 << bits;
    let outcomes: Vec<Option<(f64, Vec<Vec<f64>>, Vec<f64>)>> = (0..total)
        .into_par_iter()
        .map(|x| evaluate_assignment(params, realization, &decode(x, n, m, observed.as_deref())))
        .collect::<Result<_>>()?;

    let mut best: Option<(u64, f64)> = None;
    let mut feasible = 0;
    for (x, out) in outcomes.iter().enumerate() {
        if let Some((obj, _, _)) = out {
            feasible += 1;
            if best.is_none_or(|(_, b)| *obj > b) {
                best = Some((x as u64, *obj));
            }
        }
    }
    let Some((x, objective)) = best else {
        return Err(Error::infeasible("no Boolean assignment admits a feasible point"));
    };
    let assignment = decode(x, n, m, observed.as_deref());
    let (_, p, tau) = outcomes[x as usize].clone().expect("best assignment is feasible");
    Ok(ExhaustiveResult {
        best: BooleanAssignment {
            a: assignment.a,
            theta: assignment.theta,
            feasible: true,
            objective,
        },
        p,
        tau,
        evaluated: total as usize,
        feasible,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicOutcome {
    pub decisions: DecisionSet,
    pub evaluation: Evaluation,
    pub trajectory: BatteryTrajectory,
}

/// Slot-by-slot forward pass: sense when the battery covers the minimum
/// sensing energy, plan the rest of the horizon as if the band were free,
/// sense and fuse, then commit the slot.
///
/// The plan for the remaining slots assumes the current sensing pattern is
/// kept; when that is infeasible the future slots are planned idle.
pub fn heuristic_assign(realization: &Realization, params: &SystemParams) -> Result<HeuristicOutcome> {
    let n = params.n_users;
    let m = params.horizon;
    realization.check_shape(n, m)?;
    let cfg = SensingConfig::from_params(params);
    let t = params.slot_ms;
    let mut battery = params.battery_init.clone();
    let mut used = 0.0;
    let mut dec = DecisionSet::idle(n, m, params.tau_min);

    for k in 0..m {
        let a_now: Vec<bool> = battery.iter().map(|&b| b > params.p_sense * params.tau_min).collect();
        let mut plan = Instance {
            slot_ms: t,
            norm_m: m as f64,
            p_max: params.p_max,
            p_sense: params.p_sense,
            tau_min: params.tau_min,
            interference_budget: (params.q_avg() - used).max(0.0),
            battery0: battery.clone(),
            h: realization.h.iter().map(|r| r[k..].to_vec()).collect(),
            g: realization.g.iter().map(|r| r[k..].to_vec()).collect(),
            harvest: realization.harvest.iter().map(|r| r[k..].to_vec()).collect(),
            a: a_now.iter().map(|&a| vec![a; m - k]).collect(),
            theta: vec![false; m - k],
        };
        let solved = match alternating_optimize(&plan, None) {
            Err(e) if e.is_infeasible() => {
                for row in plan.a.iter_mut() {
                    row[1..].fill(false);
                }
                match alternating_optimize(&plan, None) {
                    Err(e) if e.is_infeasible() => None,
                    other => Some(other?),
                }
            }
            other => Some(other?),
        };
        let (tau, mut p): (f64, Vec<f64>) = match solved {
            Some(r) => (r.tau[0], r.p.iter().map(|row| row[0]).collect()),
            None => (params.tau_min, vec![0.0; n]),
        };

        let mut local = Vec::new();
        for i in (0..n).filter(|&i| a_now[i]) {
            let mut noise = keyed(realization.seed, Stream::Sensing, i, k);
            local.push(simulate_local_decision(
                tau,
                cfg.gains[i],
                realization.pu_active[k],
                &cfg,
                &mut noise,
            )?);
        }
        let theta = or_fusion(&local);
        if theta {
            p.fill(0.0);
        }
        for i in 0..n {
            if !a_now[i] {
                p[i] = 0.0;
            }
            let spent = if a_now[i] {
                params.p_sense * tau + if theta { 0.0 } else { p[i] * (t - tau) }
            } else {
                0.0
            };
            battery[i] = params
                .battery_max
                .clip((battery[i] - spent).max(0.0) + realization.harvest[i][k]);
            if !theta && a_now[i] {
                used += (t - tau) / (m as f64 * t) * p[i] * realization.g[i][k];
            }
            dec.a[i][k] = a_now[i];
            dec.p[i][k] = p[i];
        }
        dec.theta[k] = theta;
        dec.tau[k] = tau;
    }
    let evaluation = evaluate_objective(params, realization, &dec)?;
    let trajectory = battery_trajectory(params, realization, &dec)?;
    Ok(HeuristicOutcome {
        decisions: dec,
        evaluation,
        trajectory,
    })
}
