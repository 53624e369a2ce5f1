//! Dense two-phase simplex for small bounded linear programs
//! `min c'x  s.t.  A x >= b,  l <= x <= u` with finite bounds.
//!
//! Pivoting follows Bland's rule so degenerate vertices cannot cycle.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

const PIVOT_EPS: f64 = 1e-11;
const COST_EPS: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Status {
    Basic(usize),
    AtLower,
    AtUpper,
}

struct Tableau {
    /// `rows x cols`, always `B^{-1} A`.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    status: Vec<Status>,
    value: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Tableau {
    fn run(&mut self, cost: &[f64]) -> Result<()> {
        let rows = self.t.len();
        let cols = cost.len();
        let cap = 50 * (rows + cols) * (rows + cols) + 1000;
        for _ in 0..cap {
            // Reduced costs, entering column by Bland's rule.
            let mut entering = None;
            for j in 0..cols {
                let st = self.status[j];
                if matches!(st, Status::Basic(_)) || self.upper[j] - self.lower[j] <= 0.0 {
                    continue;
                }
                let mut d = cost[j];
                for r in 0..rows {
                    d -= cost[self.basis[r]] * self.t[r][j];
                }
                let improves = match st {
                    Status::AtLower => d < -COST_EPS,
                    Status::AtUpper => d > COST_EPS,
                    Status::Basic(_) => false,
                };
                if improves {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else {
                return Ok(());
            };
            let dir = if self.status[j] == Status::AtLower { 1.0 } else { -1.0 };

            // Ratio test: the entering variable's own bound, then each basic variable.
            let mut step = self.upper[j] - self.lower[j];
            let mut leave: Option<(usize, bool)> = None;
            for r in 0..rows {
                let alpha = self.t[r][j] * dir;
                let b = self.basis[r];
                let (limit, to_upper) = if alpha > PIVOT_EPS {
                    ((self.value[b] - self.lower[b]) / alpha, false)
                } else if alpha < -PIVOT_EPS && self.upper[b].is_finite() {
                    ((self.upper[b] - self.value[b]) / -alpha, true)
                } else {
                    continue;
                };
                let limit = limit.max(0.0);
                let better = match leave {
                    None => limit < step || (limit == step && step.is_finite() && b < j),
                    Some((r0, _)) => limit < step || (limit == step && b < self.basis[r0]),
                };
                if better {
                    step = limit;
                    leave = Some((r, to_upper));
                }
            }
            if !step.is_finite() {
                return Err(Error::Numerical("linear program is unbounded".into()));
            }

            for r in 0..rows {
                let b = self.basis[r];
                self.value[b] -= self.t[r][j] * dir * step;
            }
            self.value[j] += dir * step;

            match leave {
                None => {
                    self.status[j] = if dir > 0.0 { Status::AtUpper } else { Status::AtLower };
                    self.value[j] = if dir > 0.0 { self.upper[j] } else { self.lower[j] };
                }
                Some((r, to_upper)) => {
                    let b = self.basis[r];
                    self.status[b] = if to_upper { Status::AtUpper } else { Status::AtLower };
                    self.value[b] = if to_upper { self.upper[b] } else { self.lower[b] };
                    let piv = self.t[r][j];
                    for v in self.t[r].iter_mut() {
                        *v /= piv;
                    }
                    let pivot_row = self.t[r].clone();
                    for (q, row) in self.t.iter_mut().enumerate() {
                        if q == r {
                            continue;
                        }
                        let f = row[j];
                        if f != 0.0 {
                            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                                *v -= f * pv;
                            }
                        }
                    }
                    self.basis[r] = j;
                    self.status[j] = Status::Basic(r);
                }
            }
        }
        Err(Error::Numerical("simplex iteration cap reached".into()))
    }
}

/// Solve `min c'x` subject to `a[r] . x >= b[r]` and `lower <= x <= upper`.
pub fn minimize(c: &[f64], a: &[Vec<f64>], b: &[f64], lower: &[f64], upper: &[f64]) -> Result<LpSolution> {
    let n = c.len();
    let m = a.len();
    if b.len() != m || lower.len() != n || upper.len() != n || a.iter().any(|r| r.len() != n) {
        return Err(Error::Domain("linear program dimensions disagree".into()));
    }
    for j in 0..n {
        if !(lower[j].is_finite() && upper[j].is_finite()) {
            return Err(Error::Domain("linear program bounds must be finite".into()));
        }
        if lower[j] > upper[j] {
            return Err(Error::infeasible(format!("empty bound interval for variable {j}")));
        }
    }

    // Columns: shifted structurals x' = x - l, surpluses s, artificials.
    let cols = n + 2 * m;
    let mut t = vec![vec![0.0; cols]; m];
    let mut value = vec![0.0; cols];
    let lo = vec![0.0; cols];
    let mut up = vec![f64::INFINITY; cols];
    let mut status = vec![Status::AtLower; cols];
    let mut basis = vec![0; m];
    for j in 0..n {
        up[j] = upper[j] - lower[j];
    }
    let mut scale: f64 = 1.0;
    for r in 0..m {
        let shifted = b[r] - a[r].iter().zip(lower).map(|(x, y)| x * y).sum::<f64>();
        scale = scale.max(shifted.abs());
        let sign = if shifted < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[r][j] = sign * a[r][j];
        }
        t[r][n + r] = -sign;
        t[r][n + m + r] = 1.0;
        if shifted < 0.0 {
            basis[r] = n + r;
            value[n + r] = -shifted;
            up[n + m + r] = 0.0;
        } else {
            basis[r] = n + m + r;
            value[n + m + r] = shifted;
        }
        status[basis[r]] = Status::Basic(r);
    }
    let mut tab = Tableau {
        t,
        basis,
        status,
        value,
        lower: lo,
        upper: up.clone(),
    };

    let mut phase1 = vec![0.0; cols];
    for r in 0..m {
        phase1[n + m + r] = 1.0;
    }
    tab.run(&phase1)?;
    let residual: f64 = (0..m).map(|r| tab.value[n + m + r]).sum();
    if residual > 1e-9 * scale {
        return Err(Error::infeasible(format!(
            "linear constraints cannot be met (phase-one residual {residual:.3e})"
        )));
    }
    for r in 0..m {
        let j = n + m + r;
        up[j] = 0.0;
        tab.value[j] = 0.0;
    }
    tab.upper = up;

    let mut phase2 = vec![0.0; cols];
    phase2[..n].copy_from_slice(c);
    tab.run(&phase2)?;

    let x: Vec<f64> = (0..n).map(|j| (lower[j] + tab.value[j]).clamp(lower[j], upper[j])).collect();
    let objective = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    Ok(LpSolution { x, objective })
}
