//! Sensing-time step: with powers and Boolean decisions fixed, throughput,
//! interference and every energy constraint are linear in `tau`.

use crate::error::{Error, Result};

use super::simplex;
use super::Instance;

/// `min s' tau  s.t.  w' tau >= q_tilde,  Y tau >= z,  lower <= tau <= upper`.
///
/// Row `i * M + k` of `y` is the energy constraint of user `i` through slot
/// `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub s: Vec<f64>,
    pub w: Vec<f64>,
    pub q_tilde: f64,
    pub y: Vec<Vec<f64>>,
    pub z: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Assemble the sensing-time program for fixed powers `p`.
pub fn build_sensing_time_lp(inst: &Instance, p: &[Vec<f64>]) -> LpProblem {
    let n = inst.n_users();
    let m = inst.n_slots();
    let t = inst.slot_ms;
    let mm = inst.norm_m;
    let mut s = vec![0.0; m];
    let mut w = vec![0.0; m];
    for k in 0..m {
        let mut x = 0.0;
        for i in 0..n {
            if inst.transmits(i, k) {
                x += p[i][k] * inst.h[i][k];
                w[k] += p[i][k] * inst.g[i][k];
            }
        }
        s[k] = x.ln_1p() / std::f64::consts::LN_2 / (mm * t);
    }
    let q_tilde = t * w.iter().sum::<f64>() - mm * t * inst.interference_budget;

    let mut y = Vec::with_capacity(n * m);
    let mut z = Vec::with_capacity(n * m);
    for i in 0..n {
        let mut row = vec![0.0; m];
        let mut spend = 0.0;
        let mut income = inst.battery0[i];
        for k in 0..m {
            if k > 0 {
                income += inst.harvest[i][k - 1];
            }
            if inst.a[i][k] {
                let pk = if inst.theta[k] { 0.0 } else { p[i][k] };
                row[k] = pk - inst.p_sense;
                spend += pk * t;
            }
            y.push(row.clone());
            z.push(spend - income);
        }
    }
    LpProblem {
        s,
        w,
        q_tilde,
        y,
        z,
        lower: vec![inst.tau_min; m],
        upper: vec![t; m],
    }
}

/// Optimal sensing times of `lp`.
pub fn solve_lp(lp: &LpProblem) -> Result<Vec<f64>> {
    let mut a = Vec::with_capacity(lp.y.len() + 1);
    let mut b = Vec::with_capacity(lp.y.len() + 1);
    a.push(lp.w.clone());
    b.push(lp.q_tilde);
    for (row, &zr) in lp.y.iter().zip(&lp.z) {
        if row.iter().all(|&v| v == 0.0) {
            if zr > 1e-9 * (1.0 + zr.abs()) {
                return Err(Error::infeasible("energy constraint independent of sensing time is violated"));
            }
            continue;
        }
        a.push(row.clone());
        b.push(zr);
    }
    Ok(simplex::minimize(&lp.s, &a, &b, &lp.lower, &lp.upper)?.x)
}

/// Closed-form second sensing time of a two-slot instance when the first is
/// held at `tau1`: the smallest `tau2` meeting every constraint.
pub fn two_horizon_sensing_time(inst: &Instance, p: &[Vec<f64>], tau1: f64) -> Result<f64> {
    if inst.n_slots() != 2 {
        return Err(Error::Domain("closed form needs exactly two slots".into()));
    }
    let lp = build_sensing_time_lp(inst, p);
    let mut lo = inst.tau_min;
    let mut hi = inst.slot_ms;
    let mut need = |coef1: f64, coef2: f64, rhs: f64| -> Result<()> {
        let rest = rhs - coef1 * tau1;
        if coef2 > 0.0 {
            lo = lo.max(rest / coef2);
        } else if coef2 < 0.0 {
            hi = hi.min(rest / coef2);
        } else if rest > 1e-12 {
            return Err(Error::infeasible("constraint cannot be met by the second sensing time"));
        }
        Ok(())
    };
    need(lp.w[0], lp.w[1], lp.q_tilde)?;
    for (row, &zr) in lp.y.iter().zip(&lp.z) {
        need(row[0], row[1], zr)?;
    }
    if lo > hi + 1e-12 {
        return Err(Error::infeasible(format!("second sensing time interval [{lo}, {hi}] is empty")));
    }
    Ok(lo.min(hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Realization;
    use crate::noncausal::Assignment;
    use crate::params::SystemParams;

    fn inst() -> Instance {
        let params = SystemParams::default();
        let rz = Realization {
            g: vec![vec![0.5, 1.5], vec![1.0, 0.2]],
            h: vec![vec![1.0, 2.0], vec![0.3, 1.1]],
            harvest: vec![vec![0.2, 0.1], vec![0.5, 0.0]],
            pu_active: vec![false, false],
            seed: 0,
        };
        Instance::new(&params, &rz, &Assignment::all(2, 2, true, false))
    }

    #[test]
    fn rows_reproduce_constraint_values() {
        let inst = inst();
        let p = vec![vec![0.1, 0.05], vec![0.12, 0.2]];
        let tau = vec![0.3, 0.7];
        let lp = build_sensing_time_lp(&inst, &p);
        for i in 0..2 {
            for k in 0..2 {
                let row = &lp.y[i * 2 + k];
                let lhs: f64 = row.iter().zip(&tau).map(|(a, b)| a * b).sum();
                // Y tau - z is exactly the energy slack.
                let slack = lhs - lp.z[i * 2 + k];
                assert!((slack - inst.energy_slack(i, k, &p, &tau)).abs() < 1e-12);
            }
        }
        let wt: f64 = lp.w.iter().zip(&tau).map(|(a, b)| a * b).sum();
        let margin = (wt - lp.q_tilde) / (inst.norm_m * inst.slot_ms);
        assert!((margin - (inst.interference_budget - inst.interference(&p, &tau))).abs() < 1e-12);
    }

    #[test]
    fn closed_form_matches_simplex_with_first_time_fixed() {
        let inst = inst();
        let p = vec![vec![0.15, 0.2], vec![0.2, 0.25]];
        let tau1 = 0.4;
        let mut lp = build_sensing_time_lp(&inst, &p);
        lp.lower[0] = tau1;
        lp.upper[0] = tau1;
        let tau = solve_lp(&lp).unwrap();
        let t2 = two_horizon_sensing_time(&inst, &p, tau1).unwrap();
        assert!((tau[1] - t2).abs() < 1e-9, "{} vs {t2}", tau[1]);
    }
}
