//! Policy tables: lookup and a versioned plain-text format.
//!
//! ```text
//! cogmac-dp v1 N M L A_p A_tau lambda
//! hook heuristic
//! battery_levels L_B
//! grid g ...
//! grid h ...
//! grid harvest ...
//! grid battery ...
//! grid power ...
//! grid tau ...
//! k idx p_1 ... p_N tau V a_1...a_N
//! ```
//!
//! Reals are written with 17 significant digits so a table survives a round
//! trip bit for bit. The trailing sensing pattern is needed because a user
//! may sense without transmitting.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

use super::grid::{floor_index, nearest_index, DpConfig, Hook, QuantizationGrid};
use super::solve::{action_list, Action, PolicyStats, StateSpace};

const MAGIC: &str = "cogmac-dp";
const VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    pub n_users: usize,
    pub horizon: usize,
    pub config: DpConfig,
    pub lambda: f64,
    pub grids: QuantizationGrid,
    pub actions: Vec<Action>,
    /// Chosen action index per stage and state.
    pub choice: Vec<Vec<u32>>,
    /// Value function per stage and state.
    pub value: Vec<Vec<f64>>,
    /// Expected performance under the quantized model; not stored on disk.
    pub stats: Option<PolicyStats>,
}

/// The concrete decision a table prescribes.
#[derive(Debug, Clone, PartialEq)]
pub struct LookupAction {
    pub a: Vec<bool>,
    pub p: Vec<f64>,
    pub tau: f64,
}

impl PolicyTable {
    pub fn space(&self) -> StateSpace {
        StateSpace {
            n_users: self.n_users,
            levels: self.grids.g.len(),
            battery_levels: self.grids.battery.len(),
        }
    }

    pub fn action(&self, x: usize) -> LookupAction {
        let ac = &self.actions[x];
        LookupAction {
            a: ac.a.clone(),
            p: (0..self.n_users)
                .map(|i| if ac.a[i] { self.grids.power[ac.p_idx[i]] } else { 0.0 })
                .collect(),
            tau: self.grids.tau[ac.tau_idx],
        }
    }

    /// Serialize to the text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let cfg = &self.config;
        let _ = writeln!(
            out,
            "{MAGIC} {VERSION} {} {} {} {} {} {}",
            self.n_users,
            self.horizon,
            cfg.levels,
            cfg.power_levels,
            cfg.tau_levels,
            real(self.lambda)
        );
        let _ = writeln!(out, "hook {}", cfg.hook.name());
        let _ = writeln!(out, "battery_levels {}", cfg.battery_levels);
        for (name, v) in self.grid_rows() {
            let _ = write!(out, "grid {name}");
            for x in v {
                let _ = write!(out, " {}", real(*x));
            }
            out.push('\n');
        }
        for (k, stage) in self.choice.iter().enumerate() {
            for (s, &x) in stage.iter().enumerate() {
                let act = self.action(x as usize);
                let _ = write!(out, "{k} {s}");
                for p in &act.p {
                    let _ = write!(out, " {}", real(*p));
                }
                let _ = write!(out, " {} {} ", real(act.tau), real(self.value[k][s]));
                for &a in &act.a {
                    out.push(if a { '1' } else { '0' });
                }
                out.push('\n');
            }
        }
        out
    }

    fn grid_rows(&self) -> [(&'static str, &Vec<f64>); 6] {
        [
            ("g", &self.grids.g),
            ("h", &self.grids.h),
            ("harvest", &self.grids.harvest),
            ("battery", &self.grids.battery),
            ("power", &self.grids.power),
            ("tau", &self.grids.tau),
        ]
    }

    /// Parse the text format.
    pub fn from_text(text: &str) -> Result<PolicyTable> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let perr = |line: usize, message: String| Error::Parse { line, message };

        let (ln, header) = lines.next().ok_or_else(|| perr(1, "empty policy table".into()))?;
        let f: Vec<&str> = header.split_whitespace().collect();
        if f.len() != 8 || f[0] != MAGIC || f[1] != VERSION {
            return Err(perr(ln, format!("expected `{MAGIC} {VERSION} N M L A_p A_tau lambda`")));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|e| perr(ln, format!("bad integer `{s}`: {e}")));
        let n = int(f[2])?;
        let m = int(f[3])?;
        let levels = int(f[4])?;
        let power_levels = int(f[5])?;
        let tau_levels = int(f[6])?;
        let lambda = parse_real(f[7]).map_err(|e| perr(ln, e))?;

        let mut keyed = |key: &str| -> Result<(usize, Vec<String>)> {
            let (ln, l) = lines.next().ok_or_else(|| perr(0, format!("missing `{key}` line")))?;
            let mut it = l.split_whitespace();
            if it.next() != Some(key) {
                return Err(perr(ln, format!("expected `{key}`")));
            }
            Ok((ln, it.map(str::to_string).collect()))
        };
        let (ln, hook) = keyed("hook")?;
        let hook = hook
            .first()
            .and_then(|h| Hook::parse(h))
            .ok_or_else(|| perr(ln, "unknown hook".into()))?;
        let (ln, bl) = keyed("battery_levels")?;
        let battery_levels = bl
            .first()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| perr(ln, "bad battery level count".into()))?;
        let mut grids = Vec::new();
        for name in ["g", "h", "harvest", "battery", "power", "tau"] {
            let (ln, rest) = keyed("grid")?;
            if rest.first().map(String::as_str) != Some(name) {
                return Err(perr(ln, format!("expected grid `{name}`")));
            }
            let v = rest[1..]
                .iter()
                .map(|s| parse_real(s))
                .collect::<std::result::Result<Vec<f64>, String>>()
                .map_err(|e| perr(ln, e))?;
            grids.push(v);
        }
        let grids = QuantizationGrid {
            tau: grids.pop().unwrap(),
            power: grids.pop().unwrap(),
            battery: grids.pop().unwrap(),
            harvest: grids.pop().unwrap(),
            h: grids.pop().unwrap(),
            g: grids.pop().unwrap(),
        };
        if grids.g.len() != levels
            || grids.h.len() != levels
            || grids.harvest.len() != levels
            || grids.battery.len() != battery_levels
            || grids.power.len() != power_levels
            || grids.tau.len() != tau_levels
        {
            return Err(perr(0, "grid lengths disagree with the header".into()));
        }
        let config = DpConfig {
            levels,
            battery_levels,
            power_levels,
            tau_levels,
            hook,
        };
        let actions = action_list(n, power_levels, tau_levels);
        let lookup: HashMap<&Action, u32> = actions.iter().enumerate().map(|(i, a)| (a, i as u32)).collect();
        let space = StateSpace {
            n_users: n,
            levels,
            battery_levels,
        };
        let ns = space.n_states();
        let mut choice = vec![vec![u32::MAX; ns]; m];
        let mut value = vec![vec![f64::NAN; ns]; m];
        for (ln, l) in lines {
            if l.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != n + 5 {
                return Err(perr(ln, format!("expected {} fields", n + 5)));
            }
            let k: usize = f[0].parse().map_err(|_| perr(ln, "bad stage".into()))?;
            let s: usize = f[1].parse().map_err(|_| perr(ln, "bad state index".into()))?;
            if k >= m || s >= ns {
                return Err(perr(ln, "stage or state out of range".into()));
            }
            let bits = f[n + 4];
            if bits.len() != n || bits.chars().any(|c| c != '0' && c != '1') {
                return Err(perr(ln, "bad sensing pattern".into()));
            }
            let a: Vec<bool> = bits.chars().map(|c| c == '1').collect();
            let mut p_idx = vec![0; n];
            for i in 0..n {
                let p = parse_real(f[2 + i]).map_err(|e| perr(ln, e))?;
                if a[i] {
                    p_idx[i] = grids
                        .power
                        .iter()
                        .position(|&x| x == p)
                        .ok_or_else(|| perr(ln, format!("power {p} is not on the grid")))?;
                } else if p != 0.0 {
                    return Err(perr(ln, "non-sensing user with nonzero power".into()));
                }
            }
            let tau = parse_real(f[2 + n]).map_err(|e| perr(ln, e))?;
            let tau_idx = if a.iter().any(|&x| x) {
                grids
                    .tau
                    .iter()
                    .position(|&x| x == tau)
                    .ok_or_else(|| perr(ln, format!("sensing time {tau} is not on the grid")))?
            } else {
                0
            };
            let key = Action { a, p_idx, tau_idx };
            let x = *lookup
                .get(&key)
                .ok_or_else(|| perr(ln, "action is not on the action grid".into()))?;
            choice[k][s] = x;
            value[k][s] = parse_real(f[3 + n]).map_err(|e| perr(ln, e))?;
        }
        if choice.iter().flatten().any(|&x| x == u32::MAX) {
            return Err(perr(0, "policy table is missing states".into()));
        }
        Ok(PolicyTable {
            n_users: n,
            horizon: m,
            config,
            lambda,
            grids,
            actions,
            choice,
            value,
            stats: None,
        })
    }
}

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_real(s: &str) -> std::result::Result<f64, String> {
    s.parse::<f64>().map_err(|e| format!("bad number `{s}`: {e}"))
}

/// Action for observed gains and battery levels at `stage`. Gains go to the
/// nearest grid point; batteries round down so the action stays affordable.
pub fn policy_lookup(table: &PolicyTable, g: &[f64], h: &[f64], battery: &[f64], stage: usize) -> LookupAction {
    let gi: Vec<usize> = g.iter().map(|&v| nearest_index(&table.grids.g, v)).collect();
    let hi: Vec<usize> = h.iter().map(|&v| nearest_index(&table.grids.h, v)).collect();
    let bi: Vec<usize> = battery.iter().map(|&v| floor_index(&table.grids.battery, v)).collect();
    let s = table.space().index(&gi, &hi, &bi);
    table.action(table.choice[stage][s] as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::{backward_induction, build_grids};
    use crate::params::SystemParams;

    fn table() -> PolicyTable {
        let params = SystemParams::default();
        let cfg = DpConfig {
            levels: 3,
            battery_levels: 4,
            ..DpConfig::default()
        };
        let grids = build_grids(&params, &cfg).unwrap();
        backward_induction(&params, 0.37, &grids, &cfg).unwrap()
    }

    #[test]
    fn text_round_trip_is_exact() {
        let t = table();
        let text = t.to_text();
        assert!(text.starts_with("cogmac-dp v1 2 2 3 6 5 "));
        let back = PolicyTable::from_text(&text).unwrap();
        assert_eq!(back.choice, t.choice);
        assert_eq!(back.lambda.to_bits(), t.lambda.to_bits());
        for (a, b) in back.value.iter().flatten().zip(t.value.iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back.grids, t.grids);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(PolicyTable::from_text("something else\n").is_err());
        let t = table().to_text();
        let truncated: String = t.lines().take(20).map(|l| format!("{l}\n")).collect();
        assert!(PolicyTable::from_text(&truncated).is_err());
    }

    #[test]
    fn lookup_on_grid_and_beyond() {
        let t = table();
        let sp = t.space();
        let g = &t.grids.g;
        let h = &t.grids.h;
        let b = &t.grids.battery;
        let s = sp.index(&[1, 2], &[0, 1], &[3, 2]);
        let want = t.action(t.choice[0][s] as usize);
        assert_eq!(policy_lookup(&t, &[g[1], g[2]], &[h[0], h[1]], &[b[3], b[2]], 0), want);
        // Far beyond the outermost points.
        let s = sp.index(&[2, 2], &[2, 2], &[3, 3]);
        let want = t.action(t.choice[1][s] as usize);
        assert_eq!(policy_lookup(&t, &[50.0, 50.0], &[50.0, 50.0], &[9.0, 9.0], 1), want);
    }
}
