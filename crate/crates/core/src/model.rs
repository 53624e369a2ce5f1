//! Domain types and the deterministic bookkeeping of the model: energy use,
//! the battery recursion, per-slot rate and interference.
//!
//! Per-user, per-slot arrays are stored user-major: `x[i][k]` is user `i` in
//! slot `k` (zero based).

use crate::error::{Error, Result};
use crate::params::{Capacity, SystemParams};

/// Absolute tolerance for floating comparisons in model units.
pub const TOL: f64 = 1e-9;

/// One draw of every random quantity over the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    /// SU-Tx to PU-Rx gains.
    pub g: Vec<Vec<f64>>,
    /// SU-Tx to fusion-center gains.
    pub h: Vec<Vec<f64>>,
    /// Harvested energy in each slot (uJ).
    pub harvest: Vec<Vec<f64>>,
    pub pu_active: Vec<bool>,
    /// Seed the realization was drawn from. Sensing noise streams are keyed
    /// off the same seed.
    pub seed: u64,
}

impl Realization {
    pub fn n_users(&self) -> usize {
        self.g.len()
    }

    pub fn horizon(&self) -> usize {
        self.pu_active.len()
    }

    pub fn check_shape(&self, n: usize, m: usize) -> Result<()> {
        let ok = |x: &Vec<Vec<f64>>| x.len() == n && x.iter().all(|r| r.len() == m);
        if !(ok(&self.g) && ok(&self.h) && ok(&self.harvest) && self.pu_active.len() == m) {
            return Err(Error::Domain(format!(
                "realization shape does not match N={n}, M={m}"
            )));
        }
        let finite_nonneg = |x: &Vec<Vec<f64>>| x.iter().flatten().all(|v| v.is_finite() && *v >= 0.0);
        if !(finite_nonneg(&self.g) && finite_nonneg(&self.h) && finite_nonneg(&self.harvest)) {
            return Err(Error::Domain(
                "gains and harvests must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// The sub-realization covering slots `from..`.
    pub fn tail(&self, from: usize) -> Realization {
        let cut = |x: &Vec<Vec<f64>>| x.iter().map(|r| r[from..].to_vec()).collect();
        Realization {
            g: cut(&self.g),
            h: cut(&self.h),
            harvest: cut(&self.harvest),
            pu_active: self.pu_active[from..].to_vec(),
            seed: self.seed,
        }
    }
}

/// The four decision variables of the problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionSet {
    /// Sensing participation `a[i][k]`.
    pub a: Vec<Vec<bool>>,
    /// Fused access decision; `true` means the PU was declared present.
    pub theta: Vec<bool>,
    /// Transmit powers (mW).
    pub p: Vec<Vec<f64>>,
    /// Sensing times (ms).
    pub tau: Vec<f64>,
}

impl DecisionSet {
    /// Nobody senses, nobody transmits, sensing time at its lower bound.
    pub fn idle(n: usize, m: usize, tau: f64) -> Self {
        DecisionSet {
            a: vec![vec![false; m]; n],
            theta: vec![true; m],
            p: vec![vec![0.0; m]; n],
            tau: vec![tau; m],
        }
    }

    pub fn check(&self, params: &SystemParams) -> Result<()> {
        let n = params.n_users;
        let m = self.tau.len();
        if self.a.len() != n
            || self.p.len() != n
            || self.theta.len() != m
            || self.a.iter().any(|r| r.len() != m)
            || self.p.iter().any(|r| r.len() != m)
        {
            return Err(Error::Domain("decision set shape mismatch".into()));
        }
        for row in &self.p {
            for &p in row {
                if p < -TOL || p > params.p_max + TOL {
                    return Err(Error::Domain(format!("power {p} outside [0, P_max]")));
                }
            }
        }
        for &t in &self.tau {
            if t < params.tau_min - TOL || t > params.slot_ms + TOL {
                return Err(Error::Domain(format!("sensing time {t} outside [tau_l, T]")));
            }
        }
        Ok(())
    }

    pub fn user_powers(&self, k: usize) -> Vec<f64> {
        self.p.iter().map(|r| r[k]).collect()
    }

    pub fn user_access(&self, k: usize) -> Vec<bool> {
        self.a.iter().map(|r| r[k]).collect()
    }
}

/// Battery level at the start of each slot and the energy spent in it.
#[derive(Debug, Clone, PartialEq)]
pub struct BatteryTrajectory {
    pub level: Vec<Vec<f64>>,
    pub consumed: Vec<Vec<f64>>,
    /// First `(user, slot)` whose consumption exceeded its battery.
    pub violation: Option<(usize, usize)>,
}

impl BatteryTrajectory {
    pub fn is_causal(&self) -> bool {
        self.violation.is_none()
    }
}

/// Multipliers of the power subproblem.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DualSet {
    /// Average-interference multiplier.
    pub lambda: f64,
    /// Energy-causality multipliers `mu[i][k]`.
    pub mu: Vec<Vec<f64>>,
    /// Lower-bound (p >= 0) multipliers.
    pub eta: Vec<Vec<f64>>,
    /// Upper-bound (p <= P_max) multipliers.
    pub delta: Vec<Vec<f64>>,
}

impl DualSet {
    pub fn zeros(n: usize, m: usize) -> Self {
        DualSet {
            lambda: 0.0,
            mu: vec![vec![0.0; m]; n],
            eta: vec![vec![0.0; m]; n],
            delta: vec![vec![0.0; m]; n],
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.lambda >= 0.0
            && [&self.mu, &self.eta, &self.delta]
                .iter()
                .all(|x| x.iter().flatten().all(|v| *v >= 0.0))
    }
}

/// Energy spent by one user in one slot: sensing for `tau`, then
/// transmitting for `T - tau` when the band was declared free.
pub fn energy_consumed(a: bool, theta: bool, p: f64, tau: f64, params: &SystemParams) -> Result<f64> {
    if p < 0.0 {
        return Err(Error::Domain(format!("negative power {p}")));
    }
    if tau < 0.0 || tau > params.slot_ms + TOL {
        return Err(Error::Domain(format!("sensing time {tau} outside [0, T]")));
    }
    if !a {
        return Ok(0.0);
    }
    let transmit = if theta { 0.0 } else { p * (params.slot_ms - tau) };
    Ok(params.p_sense * tau + transmit)
}

/// One step of the battery recursion `min(B_max, B - E + H)`.
pub fn battery_step(level: f64, energy: f64, harvest: f64, cap: Capacity) -> Result<f64> {
    if energy > level + TOL {
        return Err(Error::Causality {
            user: 0,
            slot: 0,
            energy,
            battery: level,
        });
    }
    Ok(cap.clip(level - energy + harvest))
}

/// Forward battery recursion. Causality violations are reported, not clipped.
pub fn battery_trajectory(
    params: &SystemParams,
    realization: &Realization,
    decisions: &DecisionSet,
) -> Result<BatteryTrajectory> {
    let n = params.n_users;
    let m = decisions.tau.len();
    realization.check_shape(n, m)?;
    decisions.check(params)?;

    let mut level = vec![vec![0.0; m]; n];
    let mut consumed = vec![vec![0.0; m]; n];
    let mut violation = None;
    for i in 0..n {
        let mut b = params.battery_init[i];
        for k in 0..m {
            level[i][k] = b;
            let e = energy_consumed(
                decisions.a[i][k],
                decisions.theta[k],
                decisions.p[i][k],
                decisions.tau[k],
                params,
            )?;
            consumed[i][k] = e;
            if e > b + TOL {
                let first = match violation {
                    None => true,
                    Some((_, slot)) => k < slot,
                };
                if first {
                    violation = Some((i, k));
                }
            }
            b = params.battery_max.clip(b - e + realization.harvest[i][k]);
        }
    }
    Ok(BatteryTrajectory {
        level,
        consumed,
        violation,
    })
}

/// Horizon-normalized rate of one slot,
/// `((T - tau) / (M T)) log2(1 + sum_i p_i h_i a_i (1 - theta))`.
pub fn slot_throughput(p: &[f64], h: &[f64], a: &[bool], theta: bool, tau: f64, params: &SystemParams) -> f64 {
    if theta {
        return 0.0;
    }
    let snr: f64 = p
        .iter()
        .zip(h)
        .zip(a)
        .filter(|(_, &a)| a)
        .map(|((p, h), _)| p * h)
        .sum();
    (params.slot_ms - tau) / (params.horizon as f64 * params.slot_ms) * snr.ln_1p() / std::f64::consts::LN_2
}

/// Per-slot interference term `((T - tau) / T) sum_i p_i g_i a_i (1 - theta)`
/// before the `1/M` horizon average.
pub fn slot_interference(p: &[f64], g: &[f64], a: &[bool], theta: bool, tau: f64, params: &SystemParams) -> f64 {
    if theta {
        return 0.0;
    }
    let w: f64 = p
        .iter()
        .zip(g)
        .zip(a)
        .filter(|(_, &a)| a)
        .map(|((p, g), _)| p * g)
        .sum();
    (params.slot_ms - tau) / params.slot_ms * w
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub throughput: f64,
    pub avg_interference: f64,
    pub causality_ok: bool,
}

/// Objective, average interference and causality of a full decision set.
pub fn evaluate_objective(
    params: &SystemParams,
    realization: &Realization,
    decisions: &DecisionSet,
) -> Result<Evaluation> {
    let traj = battery_trajectory(params, realization, decisions)?;
    let m = decisions.tau.len();
    let mut throughput = 0.0;
    let mut interference = 0.0;
    for k in 0..m {
        let p = decisions.user_powers(k);
        let a = decisions.user_access(k);
        let h: Vec<f64> = realization.h.iter().map(|r| r[k]).collect();
        let g: Vec<f64> = realization.g.iter().map(|r| r[k]).collect();
        throughput += slot_throughput(&p, &h, &a, decisions.theta[k], decisions.tau[k], params);
        interference += slot_interference(&p, &g, &a, decisions.theta[k], decisions.tau[k], params);
    }
    Ok(Evaluation {
        throughput,
        avg_interference: interference / params.horizon as f64,
        causality_ok: traj.is_causal(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> SystemParams {
        SystemParams::default()
    }

    #[test]
    fn energy_examples() {
        let p = params();
        assert_eq!(energy_consumed(false, false, 1.0, 0.5, &p).unwrap(), 0.0);
        assert!((energy_consumed(true, true, 1.0, 0.5, &p).unwrap() - 0.05).abs() < 1e-15);
        assert!((energy_consumed(true, false, 1.0, 0.5, &p).unwrap() - 1.55).abs() < 1e-12);
        assert!(energy_consumed(true, false, 1.0, 2.5, &p).is_err());
        assert!(energy_consumed(true, false, -1.0, 0.5, &p).is_err());
    }

    #[test]
    fn battery_step_examples() {
        assert_eq!(battery_step(0.4, 0.2, 0.3, Capacity::Finite(0.4)).unwrap(), 0.4);
        assert_eq!(battery_step(0.4, 0.4, 0.0, Capacity::Finite(0.4)).unwrap(), 0.0);
        assert!((battery_step(0.4, 0.2, 0.1, Capacity::Unbounded).unwrap() - 0.3).abs() < 1e-15);
        assert!(matches!(
            battery_step(0.4, 0.5, 0.0, Capacity::Unbounded),
            Err(Error::Causality { .. })
        ));
    }

    fn random_instance(seed: u64, n: usize, m: usize) -> (SystemParams, Realization, DecisionSet) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = params();
        p.set_users(n);
        p.horizon = m;
        let draw = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
            (0..n).map(|_| (0..m).map(|_| rng.random::<f64>() * 2.0).collect()).collect()
        };
        let r = Realization {
            g: draw(&mut rng),
            h: draw(&mut rng),
            harvest: draw(&mut rng),
            pu_active: (0..m).map(|_| rng.random::<bool>()).collect(),
            seed,
        };
        let d = DecisionSet {
            a: (0..n).map(|_| (0..m).map(|_| rng.random::<bool>()).collect()).collect(),
            theta: (0..m).map(|_| rng.random::<bool>()).collect(),
            p: (0..n).map(|_| (0..m).map(|_| rng.random::<f64>() * 0.3).collect()).collect(),
            tau: (0..m).map(|_| 0.1 + rng.random::<f64>() * 1.9).collect(),
        };
        (p, r, d)
    }

    #[test]
    fn trajectory_idle_accumulates_harvest() {
        let (p, r, mut d) = random_instance(3, 2, 4);
        for row in &mut d.a {
            row.iter_mut().for_each(|a| *a = false);
        }
        let t = battery_trajectory(&p, &r, &d).unwrap();
        let cap = p.battery_max.finite().unwrap();
        for i in 0..2 {
            for k in 0..4 {
                // Per-step clipping composes to a running min once nothing is spent.
                let mut b = p.battery_init[i];
                for j in 0..k {
                    b = (b + r.harvest[i][j]).min(cap);
                }
                assert!((t.level[i][k] - b).abs() < 1e-12);
            }
        }
        assert!(t.is_causal());
    }

    #[test]
    fn trajectory_single_slot_is_initial_battery() {
        let (p, r, d) = random_instance(5, 3, 1);
        let t = battery_trajectory(&p, &r, &d).unwrap();
        for i in 0..3 {
            assert_eq!(t.level[i][0], p.battery_init[i]);
        }
    }

    #[test]
    fn trajectory_matches_hand_recursion() {
        let (p, r, d) = random_instance(11, 2, 3);
        let t = battery_trajectory(&p, &r, &d).unwrap();
        let cap = p.battery_max.finite().unwrap();
        for i in 0..2 {
            let mut b = p.battery_init[i];
            for k in 0..3 {
                assert!((t.level[i][k] - b).abs() < 1e-12);
                let mut e = 0.0;
                if d.a[i][k] {
                    e = p.p_sense * d.tau[k];
                    if !d.theta[k] {
                        e += d.p[i][k] * (p.slot_ms - d.tau[k]);
                    }
                }
                assert!((t.consumed[i][k] - e).abs() < 1e-12);
                b = (b - e + r.harvest[i][k]).min(cap);
            }
        }
    }

    #[test]
    fn trajectory_reports_violation() {
        let mut p = params();
        p.horizon = 1;
        let r = Realization {
            g: vec![vec![1.0]; 2],
            h: vec![vec![1.0]; 2],
            harvest: vec![vec![0.0]; 2],
            pu_active: vec![false],
            seed: 0,
        };
        let d = DecisionSet {
            a: vec![vec![true]; 2],
            theta: vec![false],
            p: vec![vec![0.0], vec![1.0]],
            tau: vec![0.1],
        };
        let t = battery_trajectory(&p, &r, &d).unwrap();
        assert_eq!(t.violation, Some((1, 0)));
    }

    #[test]
    fn throughput_examples() {
        let mut p = params();
        p.horizon = 1;
        p.slot_ms = 2.0;
        assert_eq!(slot_throughput(&[1.0], &[1.0], &[true], true, 0.5, &p), 0.0);
        assert!((slot_throughput(&[1.0], &[1.0], &[true], false, 0.0, &p) - 1.0).abs() < 1e-15);
        p.horizon = 2;
        let v = slot_throughput(&[1.0, 1.0], &[0.5, 1.5], &[true, true], false, 1.0, &p);
        assert!((v - 0.25 * 3f64.log2()).abs() < 1e-15);
        assert!((v - 0.3962).abs() < 1e-4);
    }

    #[test]
    fn interference_examples() {
        let p = params();
        assert_eq!(slot_interference(&[1.0], &[1.0], &[true], true, 0.5, &p), 0.0);
        assert_eq!(slot_interference(&[1.0], &[1.0], &[true], false, 2.0, &p), 0.0);
        let v = slot_interference(&[1.0, 0.5], &[1.0, 2.0], &[true, true], false, 0.5, &p);
        assert!((v - 1.5).abs() < 1e-15);
    }

    #[test]
    fn objective_all_detected_is_zero() {
        let (p, r, mut d) = random_instance(17, 2, 3);
        d.theta = vec![true; 3];
        let e = evaluate_objective(&p, &r, &d).unwrap();
        assert_eq!(e.throughput, 0.0);
        assert_eq!(e.avg_interference, 0.0);
    }

    #[test]
    fn objective_single_slot_equals_slot_throughput() {
        let (p, r, d) = random_instance(19, 2, 1);
        let e = evaluate_objective(&p, &r, &d).unwrap();
        let direct = slot_throughput(
            &d.user_powers(0),
            &[r.h[0][0], r.h[1][0]],
            &d.user_access(0),
            d.theta[0],
            d.tau[0],
            &p,
        );
        assert_eq!(e.throughput, direct);
    }

    #[test]
    fn objective_matches_term_by_term() {
        let (p, r, d) = random_instance(23, 2, 2);
        let e = evaluate_objective(&p, &r, &d).unwrap();
        let (mut thr, mut itf) = (0.0, 0.0);
        for k in 0..2 {
            if d.theta[k] {
                continue;
            }
            let mut snr = 0.0;
            let mut w = 0.0;
            for i in 0..2 {
                if d.a[i][k] {
                    snr += d.p[i][k] * r.h[i][k];
                    w += d.p[i][k] * r.g[i][k];
                }
            }
            thr += (2.0 - d.tau[k]) / (2.0 * 2.0) * (1.0 + snr).log2();
            itf += (2.0 - d.tau[k]) / 2.0 * w / 2.0;
        }
        assert!((e.throughput - thr).abs() < 1e-12);
        assert!((e.avg_interference - itf).abs() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn throughput_monotone(p0 in 0.0..1.0f64, dp in 0.0..0.5f64, tau in 0.1..1.9f64, dt in 0.0..0.1f64, h in 0.0..3.0f64) {
            let params = params();
            let base = slot_throughput(&[p0, 0.3], &[h, 1.0], &[true, true], false, tau, &params);
            let more_p = slot_throughput(&[p0 + dp, 0.3], &[h, 1.0], &[true, true], false, tau, &params);
            let more_tau = slot_throughput(&[p0, 0.3], &[h, 1.0], &[true, true], false, tau + dt, &params);
            proptest::prop_assert!(more_p >= base - 1e-15);
            proptest::prop_assert!(more_tau <= base + 1e-15);
        }

        #[test]
        fn idle_slots_are_silent(p0 in 0.0..1.0f64, g in 0.0..3.0f64, tau in 0.1..2.0f64) {
            let params = params();
            proptest::prop_assert_eq!(slot_throughput(&[p0], &[g], &[false], false, tau, &params), 0.0);
            proptest::prop_assert_eq!(slot_interference(&[p0], &[g], &[false], false, tau, &params), 0.0);
        }
    }
}
