//! Backward induction over the quantized state.

use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::sensing::SensingConfig;

use super::grid::{floor_index, DpConfig, Hook, QuantizationGrid};
use super::table::PolicyTable;

/// One point of the action grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Action {
    /// Sensing participation.
    pub a: Vec<bool>,
    /// Power-grid index per user; zero for users that do not sense.
    pub p_idx: Vec<usize>,
    /// Sensing-time grid index; zero when nobody senses.
    pub tau_idx: usize,
}

/// Every action, ordered by sensing pattern (`a[0]` most significant), then
/// sensing time, then the powers of the sensing users (`p[0]` most
/// significant). When nobody senses only the shortest sensing time is kept.
pub fn action_list(n: usize, power_levels: usize, tau_levels: usize) -> Vec<Action> {
    let mut out = Vec::new();
    for pattern in 0..1usize << n {
        let a: Vec<bool> = (0..n).map(|i| (pattern >> (n - 1 - i)) & 1 == 1).collect();
        let senders: Vec<usize> = (0..n).filter(|&i| a[i]).collect();
        if senders.is_empty() {
            out.push(Action {
                a,
                p_idx: vec![0; n],
                tau_idx: 0,
            });
            continue;
        }
        let combos = power_levels.pow(senders.len() as u32);
        for tau_idx in 0..tau_levels {
            for c in 0..combos {
                let mut p_idx = vec![0; n];
                let mut rest = c;
                for &i in senders.iter().rev() {
                    p_idx[i] = rest % power_levels;
                    rest /= power_levels;
                }
                out.push(Action {
                    a: a.clone(),
                    p_idx,
                    tau_idx,
                });
            }
        }
    }
    out
}

/// Mixed-radix indexing of `(g_1..g_N, h_1..h_N, B_1..B_N)`, the last digit
/// least significant. A state index is `channel * n_battery() + battery`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateSpace {
    pub n_users: usize,
    pub levels: usize,
    pub battery_levels: usize,
}

impl StateSpace {
    /// Number of `(g, h)` combinations.
    pub fn n_channel(&self) -> usize {
        self.levels.pow(2 * self.n_users as u32)
    }

    /// Number of `g` (or `h`) combinations alone.
    pub fn n_half(&self) -> usize {
        self.levels.pow(self.n_users as u32)
    }

    pub fn n_battery(&self) -> usize {
        self.battery_levels.pow(self.n_users as u32)
    }

    pub fn n_states(&self) -> usize {
        self.n_channel() * self.n_battery()
    }

    pub fn index(&self, g: &[usize], h: &[usize], b: &[usize]) -> usize {
        let gi = digits_to_index(g, self.levels);
        let hi = digits_to_index(h, self.levels);
        (gi * self.n_half() + hi) * self.n_battery() + digits_to_index(b, self.battery_levels)
    }

    /// `(g, h, B)` digits of a state.
    pub fn digits(&self, idx: usize) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
        let b = idx % self.n_battery();
        let ch = idx / self.n_battery();
        (
            index_to_digits(ch / self.n_half(), self.levels, self.n_users),
            index_to_digits(ch % self.n_half(), self.levels, self.n_users),
            index_to_digits(b, self.battery_levels, self.n_users),
        )
    }
}

pub(crate) fn digits_to_index(d: &[usize], base: usize) -> usize {
    d.iter().fold(0, |acc, &x| acc * base + x)
}

pub(crate) fn index_to_digits(mut idx: usize, base: usize, len: usize) -> Vec<usize> {
    let mut d = vec![0; len];
    for slot in d.iter_mut().rev() {
        *slot = idx % base;
        idx /= base;
    }
    d
}

/// Expected performance of a policy from the initial battery, averaged over
/// the first slot's channel cells, under the quantized model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyStats {
    /// Expected Lagrangian (the value function).
    pub value: f64,
    pub throughput: f64,
    /// Expected horizon-averaged interference.
    pub interference: f64,
}

/// Sensing pattern the heuristic hook imposes at a quantized battery.
pub(crate) fn heuristic_pattern(params: &SystemParams, battery: &[f64]) -> Vec<bool> {
    battery.iter().map(|&b| b > params.p_sense * params.tau_min).collect()
}

/// Solve the dynamic program for a fixed multiplier.
pub fn backward_induction(
    params: &SystemParams,
    lambda: f64,
    grids: &QuantizationGrid,
    cfg: &DpConfig,
) -> Result<PolicyTable> {
    params.validate()?;
    if cfg.hook == Hook::Exhaustive && params.horizon > 3 {
        return Err(Error::InvalidParameter {
            name: "hook",
            reason: "the exhaustive sensing hook is limited to horizons of at most 3 slots".into(),
        });
    }
    if !(lambda >= 0.0) {
        return Err(Error::Domain(format!("multiplier must be nonnegative, got {lambda}")));
    }
    let n = params.n_users;
    let m = params.horizon;
    let t = params.slot_ms;
    let space = StateSpace {
        n_users: n,
        levels: grids.g.len(),
        battery_levels: grids.battery.len(),
    };
    let actions = action_list(n, grids.power.len(), grids.tau.len());
    let na = actions.len();
    let nb = space.n_battery();
    let nhalf = space.n_half();
    let nch = space.n_channel();
    let mass = 1.0 / nhalf as f64;
    let sensing = SensingConfig::from_params(params);

    // Per action: powers, sensing time, probability of a free band, slot weight.
    let power: Vec<Vec<f64>> = actions
        .iter()
        .map(|ac| (0..n).map(|i| if ac.a[i] { grids.power[ac.p_idx[i]] } else { 0.0 }).collect())
        .collect();
    let tau: Vec<f64> = actions.iter().map(|ac| grids.tau[ac.tau_idx]).collect();
    let clear: Vec<f64> = actions
        .iter()
        .zip(&tau)
        .map(|(ac, &tk)| {
            let who: Vec<usize> = (0..n).filter(|&i| ac.a[i]).collect();
            let (c0, c1) = sensing.fused_clear(tk, &who);
            (1.0 - params.kappa) * c0 + params.kappa * c1
        })
        .collect();
    let weight: Vec<f64> = (0..na).map(|x| clear[x] * (t - tau[x]) / (m as f64 * t)).collect();

    // Rate and interference sums per (h or g combination, action).
    let mut log_rate = vec![0.0; nhalf * na];
    let mut gain_sum = vec![0.0; nhalf * na];
    for c in 0..nhalf {
        let d = index_to_digits(c, space.levels, n);
        for x in 0..na {
            let mut sh = 0.0;
            let mut sg = 0.0;
            for i in 0..n {
                sh += power[x][i] * grids.h[d[i]];
                sg += power[x][i] * grids.g[d[i]];
            }
            log_rate[c * na + x] = sh.ln_1p() / std::f64::consts::LN_2;
            gain_sum[c * na + x] = sg;
        }
    }

    // Feasible actions per battery combination and the battery transitions.
    let cap = grids.battery[grids.battery.len() - 1];
    let mut allowed: Vec<Vec<u32>> = vec![Vec::new(); nb];
    // next[(b * na + x) * 2 * nhalf + theta * nhalf + harvest]
    let mut next = vec![0u32; nb * na * 2 * nhalf];
    for b in 0..nb {
        let bd = index_to_digits(b, space.battery_levels, n);
        let level: Vec<f64> = bd.iter().map(|&j| grids.battery[j]).collect();
        let rule = heuristic_pattern(params, &level);
        for x in 0..na {
            let ac = &actions[x];
            if cfg.hook == Hook::Heuristic && ac.a != rule {
                continue;
            }
            let fits = (0..n).all(|i| {
                !ac.a[i] || params.p_sense * tau[x] + power[x][i] * (t - tau[x]) <= level[i] + 1e-12
            });
            if !fits {
                continue;
            }
            allowed[b].push(x as u32);
            for theta in 0..2 {
                for hc in 0..nhalf {
                    let hd = index_to_digits(hc, space.levels, n);
                    let nd: Vec<usize> = (0..n)
                        .map(|i| {
                            let spent = if ac.a[i] {
                                params.p_sense * tau[x] + if theta == 1 { 0.0 } else { power[x][i] * (t - tau[x]) }
                            } else {
                                0.0
                            };
                            let after = ((level[i] - spent).max(0.0) + grids.harvest[hd[i]]).min(cap);
                            floor_index(&grids.battery, after)
                        })
                        .collect();
                    next[((b * na + x) * 2 + theta) * nhalf + hc] = digits_to_index(&nd, space.battery_levels) as u32;
                }
            }
        }
    }

    let offset = lambda * params.q_avg() / m as f64;
    let mut choice = vec![vec![0u32; space.n_states()]; m];
    let mut value = vec![vec![0.0; space.n_states()]; m];
    let mut w_val = vec![0.0; nb];
    let mut w_thr = vec![0.0; nb];
    let mut w_int = vec![0.0; nb];
    let mut cont_val = vec![0.0; nb * na];
    let mut cont_thr = vec![0.0; nb * na];
    let mut cont_int = vec![0.0; nb * na];
    let mut thr = vec![0.0; space.n_states()];
    let mut int = vec![0.0; space.n_states()];

    for k in (0..m).rev() {
        for b in 0..nb {
            for &x in &allowed[b] {
                let x = x as usize;
                let (mut cv, mut ct, mut ci) = (0.0, 0.0, 0.0);
                for theta in 0..2 {
                    let pr = if theta == 0 { clear[x] } else { 1.0 - clear[x] };
                    if pr == 0.0 {
                        continue;
                    }
                    let base = ((b * na + x) * 2 + theta) * nhalf;
                    let (mut sv, mut st, mut si) = (0.0, 0.0, 0.0);
                    for &nbx in &next[base..base + nhalf] {
                        let nbx = nbx as usize;
                        sv += w_val[nbx];
                        st += w_thr[nbx];
                        si += w_int[nbx];
                    }
                    cv += pr * sv * mass;
                    ct += pr * st * mass;
                    ci += pr * si * mass;
                }
                cont_val[b * na + x] = cv;
                cont_thr[b * na + x] = ct;
                cont_int[b * na + x] = ci;
            }
        }
        let stage_choice = &mut choice[k];
        let stage_value = &mut value[k];
        for ch in 0..nch {
            let gc = ch / nhalf;
            let hc = ch % nhalf;
            let lr = &log_rate[hc * na..(hc + 1) * na];
            let gs = &gain_sum[gc * na..(gc + 1) * na];
            for b in 0..nb {
                let s = ch * nb + b;
                let mut best = f64::NEG_INFINITY;
                let mut arg = 0usize;
                for &x in &allowed[b] {
                    let x = x as usize;
                    let v = weight[x] * (lr[x] - lambda * gs[x]) + cont_val[b * na + x];
                    if v > best {
                        best = v;
                        arg = x;
                    }
                }
                stage_choice[s] = arg as u32;
                stage_value[s] = best + offset;
                thr[s] = weight[arg] * lr[arg] + cont_thr[b * na + arg];
                int[s] = weight[arg] * gs[arg] + cont_int[b * na + arg];
            }
        }
        w_val.fill(0.0);
        w_thr.fill(0.0);
        w_int.fill(0.0);
        for ch in 0..nch {
            for b in 0..nb {
                let s = ch * nb + b;
                w_val[b] += stage_value[s];
                w_thr[b] += thr[s];
                w_int[b] += int[s];
            }
        }
        for b in 0..nb {
            w_val[b] /= nch as f64;
            w_thr[b] /= nch as f64;
            w_int[b] /= nch as f64;
        }
    }

    let start: Vec<usize> = params
        .battery_init
        .iter()
        .map(|&b0| floor_index(&grids.battery, b0.min(cap)))
        .collect();
    let b0 = digits_to_index(&start, space.battery_levels);
    let stats = PolicyStats {
        value: w_val[b0],
        throughput: w_thr[b0],
        interference: w_int[b0],
    };
    Ok(PolicyTable {
        n_users: n,
        horizon: m,
        config: *cfg,
        lambda,
        grids: grids.clone(),
        actions,
        choice,
        value,
        stats: Some(stats),
    })
}
