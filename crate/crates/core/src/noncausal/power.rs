//! Power allocation for fixed sensing times and Boolean decisions.
//!
//! For fixed multipliers, each slot decouples: users are ranked by
//! `c / (lambda d + e)` and filled water-style, the leading users at `P_max`,
//! one user in the interior and the rest silent. The multipliers themselves
//! are located with a primal log-barrier method, after which the slot
//! allocator is evaluated at those multipliers to recover an exact
//! vertex-structured primal point.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::DualSet;

use super::Instance;

/// Coefficients of one `(user, slot)` power variable in the Lagrangian:
/// `c ln(1 + x) - (lambda d + e) p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioTriple {
    /// `(T - tau_k) h a (1 - theta) / (M T ln 2)`.
    pub c: f64,
    /// `(T - tau_k) g a (1 - theta) / (M T)`.
    pub d: f64,
    /// `a (1 - theta) (T - tau_k) sum_{r >= k} mu_r`.
    pub e: f64,
}

impl RatioTriple {
    /// `c / (lambda d + e)`, infinite when the price is zero and `c > 0`.
    pub fn ratio(&self, lambda: f64) -> f64 {
        if self.c <= 0.0 {
            return 0.0;
        }
        let price = lambda * self.d + self.e;
        if price <= 0.0 {
            f64::INFINITY
        } else {
            self.c / price
        }
    }
}

/// Triples for every `(user, slot)`, indexed `[i][k]`.
pub fn ratio_triples(inst: &Instance, tau: &[f64], mu: &[Vec<f64>]) -> Vec<Vec<RatioTriple>> {
    let n = inst.n_users();
    let m = inst.n_slots();
    let t = inst.slot_ms;
    (0..n)
        .map(|i| {
            let mut tail = vec![0.0; m + 1];
            for k in (0..m).rev() {
                tail[k] = tail[k + 1] + mu[i][k];
            }
            (0..m)
                .map(|k| {
                    if !inst.transmits(i, k) {
                        return RatioTriple { c: 0.0, d: 0.0, e: 0.0 };
                    }
                    let share = (t - tau[k]) / (inst.norm_m * t);
                    RatioTriple {
                        c: share * inst.h[i][k] / std::f64::consts::LN_2,
                        d: share * inst.g[i][k],
                        e: (t - tau[k]) * tail[k],
                    }
                })
                .collect()
        })
        .collect()
}

/// User indices ordered by non-increasing `c / (lambda d + e)`; ties keep
/// index order.
pub fn rank_users(triples: &[RatioTriple], lambda: f64) -> Vec<usize> {
    let ratios: Vec<f64> = triples.iter().map(|t| t.ratio(lambda)).collect();
    let mut order: Vec<usize> = (0..triples.len()).collect();
    order.sort_by(|&x, &y| ratios[y].total_cmp(&ratios[x]));
    order
}

/// Optimal powers of one slot for fixed multipliers.
///
/// `h_eff[i]` is the direct gain of user `i` when it transmits in this slot
/// and zero otherwise.
pub fn allocate_slot(triples: &[RatioTriple], h_eff: &[f64], lambda: f64, p_max: f64) -> Vec<f64> {
    let order = rank_users(triples, lambda);
    let mut p = vec![0.0; triples.len()];
    let mut prefix = 0.0;
    let mut count = 0;
    for (x, &u) in order.iter().enumerate() {
        if triples[u].ratio(lambda) > 1.0 + prefix {
            count = x + 1;
            prefix += p_max * h_eff[u];
        } else {
            break;
        }
    }
    if count == 0 {
        return p;
    }
    for &u in &order[..count - 1] {
        p[u] = p_max;
    }
    let last = order[count - 1];
    let before = prefix - p_max * h_eff[last];
    let r = triples[last].ratio(lambda);
    p[last] = if r.is_infinite() {
        p_max
    } else {
        ((r - 1.0 - before) / h_eff[last]).clamp(0.0, p_max)
    };
    p
}

/// Powers of slot `k` (one per user) for fixed multipliers.
pub fn power_allocation_given_duals(inst: &Instance, tau: &[f64], lambda: f64, mu: &[Vec<f64>], k: usize) -> Vec<f64> {
    let triples = ratio_triples(inst, tau, mu);
    slot_from_triples(inst, &triples, lambda, k)
}

fn slot_from_triples(inst: &Instance, triples: &[Vec<RatioTriple>], lambda: f64, k: usize) -> Vec<f64> {
    let column: Vec<RatioTriple> = triples.iter().map(|row| row[k]).collect();
    let h_eff: Vec<f64> = (0..inst.n_users())
        .map(|i| if inst.transmits(i, k) { inst.h[i][k] } else { 0.0 })
        .collect();
    allocate_slot(&column, &h_eff, lambda, inst.p_max)
}

/// Largest violations of the four KKT condition groups.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktReport {
    pub stationarity: f64,
    pub complementarity: f64,
    pub primal: f64,
    pub dual: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.complementarity).max(self.primal).max(self.dual)
    }
}

/// Bound tolerance used to decide whether a power sits at `0` or `P_max`.
const AT_BOUND: f64 = 1e-9;

/// Largest constraint violation accepted in a returned allocation.
const FEAS_TOL: f64 = 1e-9;

/// Remove a rounding-level overshoot of the allocator output by lowering
/// powers, interior powers first, until every constraint holds.
fn trim_overshoot(inst: &Instance, tau: &[f64], p: &mut [Vec<f64>]) {
    let n = inst.n_users();
    let m = inst.n_slots();
    let pick = |p: &[Vec<f64>], slots: &mut dyn Iterator<Item = (usize, usize)>| -> Option<(usize, usize)> {
        let cands: Vec<(usize, usize)> = slots.filter(|&(i, k)| inst.transmits(i, k) && p[i][k] > 0.0).collect();
        cands
            .iter()
            .copied()
            .find(|&(i, k)| p[i][k] < inst.p_max)
            .or_else(|| cands.first().copied())
    };
    for _ in 0..4 * n * m + 4 {
        let mut changed = false;
        for i in 0..n {
            for k in 0..m {
                let deficit = -inst.energy_slack(i, k, p, tau);
                if deficit > 0.0 {
                    if let Some((_, r)) = pick(p, &mut (0..=k).rev().map(|r| (i, r))) {
                        p[i][r] = (p[i][r] - deficit / (inst.slot_ms - tau[r]) * (1.0 + 1e-12)).max(0.0);
                        changed = true;
                    }
                }
            }
        }
        let excess = inst.interference(p, tau) - inst.interference_budget;
        if excess > 0.0 {
            let mut all = (0..m).flat_map(|k| (0..n).map(move |i| (i, k))).filter(|&(i, k)| inst.g[i][k] > 0.0);
            if let Some((i, k)) = pick(p, &mut all) {
                let coef = (inst.slot_ms - tau[k]) / (inst.norm_m * inst.slot_ms) * inst.g[i][k];
                p[i][k] = (p[i][k] - excess / coef * (1.0 + 1e-12)).max(0.0);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
}

/// Complete `(lambda, mu)` with the bound multipliers implied by
/// stationarity and measure every KKT condition at `p`.
pub fn kkt_residuals(inst: &Instance, tau: &[f64], p: &[Vec<f64>], lambda: f64, mu: &[Vec<f64>]) -> (DualSet, KktReport) {
    let n = inst.n_users();
    let m = inst.n_slots();
    let triples = ratio_triples(inst, tau, mu);
    let mut duals = DualSet {
        lambda,
        mu: mu.to_vec(),
        ..DualSet::zeros(n, m)
    };
    let mut rep = KktReport::default();
    for k in 0..m {
        let x: f64 = (0..n).filter(|&i| inst.transmits(i, k)).map(|i| p[i][k] * inst.h[i][k]).sum();
        for i in 0..n {
            let t = triples[i][k];
            let r = t.c / (1.0 + x) - lambda * t.d - t.e;
            let v = p[i][k];
            if v <= AT_BOUND {
                duals.eta[i][k] = (-r).max(0.0);
                rep.stationarity = rep.stationarity.max(r.max(0.0));
            } else if v >= inst.p_max - AT_BOUND {
                duals.delta[i][k] = r.max(0.0);
                rep.stationarity = rep.stationarity.max((-r).max(0.0));
            } else {
                rep.stationarity = rep.stationarity.max(r.abs());
            }
            rep.complementarity = rep
                .complementarity
                .max((duals.eta[i][k] * v).abs())
                .max((duals.delta[i][k] * (inst.p_max - v)).abs());
            rep.complementarity = rep
                .complementarity
                .max((mu[i][k] * inst.energy_slack(i, k, p, tau)).abs());
            rep.dual = rep.dual.max((-mu[i][k]).max(0.0));
        }
    }
    rep.complementarity = rep
        .complementarity
        .max((lambda * (inst.interference_budget - inst.interference(p, tau))).abs());
    rep.dual = rep.dual.max((-lambda).max(0.0));
    rep.primal = inst.max_violation(p, tau);
    (duals, rep)
}

/// How the returned primal point was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recovery {
    /// Every slot allocated by the ranking rule at the computed multipliers.
    Allocator,
    /// The barrier iterate with near-bound entries snapped to their bounds.
    Barrier,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerSolution {
    /// Powers `p[i][k]`.
    pub p: Vec<Vec<f64>>,
    pub duals: DualSet,
    pub objective: f64,
    pub kkt: KktReport,
    pub recovery: Recovery,
}

#[derive(Debug, Clone, Copy)]
struct Var {
    i: usize,
    k: usize,
    h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum RowKind {
    Interference,
    Energy(usize, usize),
}

#[derive(Debug, Clone)]
struct Row {
    kind: RowKind,
    coefs: Vec<(usize, f64)>,
    rhs: f64,
}

/// Right-hand sides of the energy rows once the sensing energy is moved
/// over: `B_i + sum_{r<k} H - sum_{r<=k} a p_s tau_r`.
fn energy_rhs(inst: &Instance, tau: &[f64]) -> Vec<Vec<f64>> {
    let zero = vec![vec![0.0; inst.n_slots()]; inst.n_users()];
    (0..inst.n_users())
        .map(|i| (0..inst.n_slots()).map(|k| inst.energy_slack(i, k, &zero, tau)).collect())
        .collect()
}

/// Maximize throughput over the powers with `tau`, `a` and `theta` fixed.
pub fn solve_power_subproblem(inst: &Instance, tau: &[f64]) -> Result<PowerSolution> {
    let n = inst.n_users();
    let m = inst.n_slots();
    if tau.len() != m {
        return Err(Error::Domain("sensing-time vector length differs from the horizon".into()));
    }
    let t_slot = inst.slot_ms;
    let rhs = energy_rhs(inst, tau);
    for i in 0..n {
        for k in 0..m {
            if rhs[i][k] < -1e-9 {
                return Err(Error::Infeasible {
                    reason: format!("sensing energy alone exceeds the energy available by {:.3e} uJ", -rhs[i][k]),
                    user: Some(i),
                    slot: Some(k),
                });
            }
        }
    }
    if inst.interference_budget < -1e-9 {
        return Err(Error::infeasible("negative interference budget"));
    }

    // Variables that can carry throughput; every other power is zero.
    let mut forced = vec![vec![false; m]; n];
    for i in 0..n {
        if let Some(last) = (0..m).rev().find(|&k| rhs[i][k] <= 1e-12) {
            forced[i][..=last].fill(true);
        }
    }
    let budget_dead = inst.interference_budget <= 1e-12;
    let mut vars = Vec::new();
    let mut index = vec![vec![usize::MAX; m]; n];
    for i in 0..n {
        for k in 0..m {
            let usable = inst.transmits(i, k) && inst.h[i][k] > 0.0 && tau[k] < t_slot && !forced[i][k];
            let blocked = budget_dead && inst.g[i][k] > 0.0;
            if usable && !blocked {
                index[i][k] = vars.len();
                vars.push(Var { i, k, h: inst.h[i][k] });
            }
        }
    }

    let mut rows = Vec::new();
    let interference: Vec<(usize, f64)> = vars
        .iter()
        .enumerate()
        .map(|(j, v)| (j, (t_slot - tau[v.k]) / (inst.norm_m * t_slot) * inst.g[v.i][v.k]))
        .filter(|(_, d)| *d > 0.0)
        .collect();
    if !interference.is_empty() {
        rows.push(Row {
            kind: RowKind::Interference,
            coefs: interference,
            rhs: inst.interference_budget,
        });
    }
    for i in 0..n {
        let mut coefs = Vec::new();
        for k in 0..m {
            let j = index[i][k];
            if j != usize::MAX {
                coefs.push((j, t_slot - tau[k]));
            }
            if !coefs.is_empty() {
                rows.push(Row {
                    kind: RowKind::Energy(i, k),
                    coefs: coefs.clone(),
                    rhs: rhs[i][k],
                });
            }
        }
    }

    let weights: Vec<f64> = (0..m)
        .map(|k| (t_slot - tau[k]) / (inst.norm_m * t_slot * std::f64::consts::LN_2))
        .collect();
    let mut p = vec![vec![0.0; m]; n];
    let mut lambda = 0.0;
    let mut mu = vec![vec![0.0; m]; n];
    if !vars.is_empty() {
        let (x, y) = barrier(&vars, &rows, &weights, inst.p_max)?;
        for (v, &val) in vars.iter().zip(&x) {
            p[v.i][v.k] = val;
        }
        for (row, &dual) in rows.iter().zip(&y) {
            match row.kind {
                RowKind::Interference => lambda = dual,
                RowKind::Energy(i, k) => mu[i][k] = dual,
            }
        }
    }
    complete_forced_duals(inst, tau, &p, &forced, budget_dead, &mut lambda, &mut mu);

    let barrier_obj = inst.throughput(&p, tau);
    let triples = ratio_triples(inst, tau, &mu);
    let mut recovered = vec![vec![0.0; m]; n];
    for k in 0..m {
        let col = slot_from_triples(inst, &triples, lambda, k);
        for i in 0..n {
            recovered[i][k] = if forced[i][k] { 0.0 } else { col[i] };
        }
    }
    let scale = 1.0 + inst.interference_budget.abs() + inst.battery0.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    if inst.max_violation(&recovered, tau) <= 1e-8 * scale {
        trim_overshoot(inst, tau, &mut recovered);
    }
    let (p, recovery) = if inst.max_violation(&recovered, tau) <= FEAS_TOL
        && inst.throughput(&recovered, tau) >= barrier_obj - 1e-9
    {
        (recovered, Recovery::Allocator)
    } else {
        let mut snapped = p.clone();
        for row in snapped.iter_mut() {
            for v in row.iter_mut() {
                if *v < AT_BOUND {
                    *v = 0.0;
                } else if *v > inst.p_max - AT_BOUND {
                    *v = inst.p_max;
                }
            }
        }
        if inst.max_violation(&snapped, tau) <= inst.max_violation(&p, tau).max(FEAS_TOL) {
            (snapped, Recovery::Barrier)
        } else {
            (p, Recovery::Barrier)
        }
    };
    let (duals, kkt) = kkt_residuals(inst, tau, &p, lambda, &mu);
    Ok(PowerSolution {
        objective: inst.throughput(&p, tau),
        p,
        duals,
        kkt,
        recovery,
    })
}

/// Multipliers for constraints that pin powers at zero before the barrier
/// runs. A battery that is exactly empty through slot `k` gets the smallest
/// `mu[i][k]` that makes every pinned power stationary; an exhausted
/// interference budget does the same for `lambda`.
fn complete_forced_duals(
    inst: &Instance,
    tau: &[f64],
    p: &[Vec<f64>],
    forced: &[Vec<bool>],
    budget_dead: bool,
    lambda: &mut f64,
    mu: &mut [Vec<f64>],
) {
    let n = inst.n_users();
    let m = inst.n_slots();
    let x: Vec<f64> = (0..m)
        .map(|k| (0..n).filter(|&i| inst.transmits(i, k)).map(|i| p[i][k] * inst.h[i][k]).sum())
        .collect();
    if budget_dead {
        let triples = ratio_triples(inst, tau, mu);
        let mut need: f64 = 0.0;
        for i in 0..n {
            for k in 0..m {
                let t = triples[i][k];
                if t.d > 0.0 && !forced[i][k] {
                    let r = t.c / (1.0 + x[k]) - *lambda * t.d - t.e;
                    need = need.max(r / t.d);
                }
            }
        }
        *lambda += need.max(0.0);
    }
    for i in 0..n {
        let Some(last) = (0..m).rev().find(|&k| forced[i][k]) else {
            continue;
        };
        let triples = ratio_triples(inst, tau, mu);
        let mut need: f64 = 0.0;
        for k in 0..=last {
            let t = triples[i][k];
            let gamma = inst.slot_ms - tau[k];
            if t.c > 0.0 && gamma > 0.0 {
                let r = t.c / (1.0 + x[k]) - *lambda * t.d - t.e;
                need = need.max(r / gamma);
            }
        }
        mu[i][last] += need.max(0.0);
    }
}

/// Log-barrier maximization of `sum_k w_k ln(1 + sum_{j in k} h_j x_j)` over
/// `rows` and the box `[0, p_max]`. Returns the final iterate and the row
/// multipliers `1 / (t slack)`.
///
/// Row slacks and upper-box gaps are carried along with `x` and updated by
/// each step rather than recomputed, so that they keep full relative
/// precision when they shrink far below the right-hand sides.
fn barrier(vars: &[Var], rows: &[Row], weights: &[f64], p_max: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let nv = vars.len();
    let mut shrink: f64 = 1.0;
    for row in rows {
        let full: f64 = row.coefs.iter().map(|(_, c)| c * 0.5 * p_max).sum();
        if full > 0.0 {
            shrink = shrink.min(0.5 * row.rhs / full);
        }
    }
    let mut x = vec![0.5 * p_max * shrink; nv];
    let mut gap: Vec<f64> = x.iter().map(|v| p_max - v).collect();
    let mut slack: Vec<f64> = rows
        .iter()
        .map(|r| r.rhs - r.coefs.iter().map(|&(j, c)| c * x[j]).sum::<f64>())
        .collect();
    let n_constraints = (rows.len() + 2 * nv) as f64;
    let mut t = n_constraints.max(1.0);
    let slots = weights.len();

    loop {
        for _ in 0..200 {
            let mut sum = vec![0.0; slots];
            for (v, &val) in vars.iter().zip(&x) {
                sum[v.k] += v.h * val;
            }
            let mut grad = DVector::<f64>::zeros(nv);
            let mut hess = DMatrix::<f64>::zeros(nv, nv);
            for (j, v) in vars.iter().enumerate() {
                let den = 1.0 + sum[v.k];
                grad[j] = t * weights[v.k] * v.h / den + 1.0 / x[j] - 1.0 / gap[j];
                hess[(j, j)] += 1.0 / (x[j] * x[j]) + 1.0 / (gap[j] * gap[j]);
                for (l, w) in vars.iter().enumerate() {
                    if w.k == v.k {
                        hess[(j, l)] += t * weights[v.k] * v.h * w.h / (den * den);
                    }
                }
            }
            for (row, &sr) in rows.iter().zip(&slack) {
                for &(j, cj) in &row.coefs {
                    grad[j] -= cj / sr;
                    for &(l, cl) in &row.coefs {
                        hess[(j, l)] += cj * cl / (sr * sr);
                    }
                }
            }
            // hess holds the negated Hessian, which is positive definite.
            let Some(chol) = hess.cholesky() else {
                break;
            };
            let step = chol.solve(&grad);
            let dec2 = grad.dot(&step);
            if !dec2.is_finite() || dec2 <= 1e-16 {
                break;
            }
            let dec = dec2.sqrt();
            let row_step: Vec<f64> = rows
                .iter()
                .map(|r| r.coefs.iter().map(|&(j, c)| c * step[j]).sum::<f64>())
                .collect();
            let mut len = if dec > 0.25 { 1.0 / (1.0 + dec) } else { 1.0 };
            let mut tries = 0;
            loop {
                let ok = (0..nv).all(|j| x[j] + len * step[j] > 0.0 && gap[j] - len * step[j] > 0.0)
                    && slack.iter().zip(&row_step).all(|(s, d)| s - len * d > 0.0);
                if ok {
                    break;
                }
                len *= 0.5;
                tries += 1;
                if tries > 60 {
                    return Err(Error::Numerical("barrier line search stalled".into()));
                }
            }
            for j in 0..nv {
                x[j] += len * step[j];
                gap[j] -= len * step[j];
            }
            for (s, d) in slack.iter_mut().zip(&row_step) {
                *s -= len * d;
            }
        }
        if n_constraints / t < 1e-11 {
            break;
        }
        t *= 20.0;
    }
    let y = slack.iter().map(|&sr| 1.0 / (t * sr)).collect();
    Ok((x, y))
}
