//! State quantization and the action grids.

use crate::error::{Error, Result};
use crate::params::SystemParams;

/// Tolerance for placing a value onto a grid point it equals up to round-off.
const SNAP: f64 = 1e-12;

/// Grid sizes and the Boolean policy of the causal solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DpConfig {
    /// Levels per channel gain and per harvest draw.
    pub levels: usize,
    /// Battery levels.
    pub battery_levels: usize,
    /// Power levels on `[0, P_max]`.
    pub power_levels: usize,
    /// Sensing-time levels on `[tau_l, T]`.
    pub tau_levels: usize,
    pub hook: Hook,
}

impl Default for DpConfig {
    fn default() -> Self {
        DpConfig {
            levels: 5,
            battery_levels: 5,
            power_levels: 6,
            tau_levels: 5,
            hook: Hook::Heuristic,
        }
    }
}

/// How the sensing decisions `a` are set inside the dynamic program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hook {
    /// `a_i = 1` exactly when the quantized battery exceeds `p_s tau_l`.
    Heuristic,
    /// `a` is optimized jointly with the powers; a transmitting user must
    /// sense.
    Exhaustive,
}

impl Hook {
    pub fn name(self) -> &'static str {
        match self {
            Hook::Heuristic => "heuristic",
            Hook::Exhaustive => "exhaustive",
        }
    }

    pub fn parse(s: &str) -> Option<Hook> {
        match s {
            "heuristic" => Some(Hook::Heuristic),
            "exhaustive" => Some(Hook::Exhaustive),
            _ => None,
        }
    }
}

/// Grid points of every quantized quantity. Channel and harvest cells have
/// probability `1 / levels` each.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizationGrid {
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    pub harvest: Vec<f64>,
    pub battery: Vec<f64>,
    pub power: Vec<f64>,
    pub tau: Vec<f64>,
}

impl QuantizationGrid {
    /// Probability of each channel or harvest cell.
    pub fn cell_mass(&self) -> f64 {
        1.0 / self.g.len() as f64
    }
}

/// Boundaries between `levels` equal-probability cells of an exponential
/// distribution with the given mean.
pub fn exponential_boundaries(mean: f64, levels: usize) -> Vec<f64> {
    (1..levels)
        .map(|j| -mean * (1.0 - j as f64 / levels as f64).ln())
        .collect()
}

/// Representative point of each cell: the quantile at the cell's
/// probability midpoint.
pub fn exponential_midpoints(mean: f64, levels: usize) -> Vec<f64> {
    (0..levels)
        .map(|j| -mean * (1.0 - (j as f64 + 0.5) / levels as f64).ln())
        .collect()
}

fn uniform(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|j| if j + 1 == n { hi } else { lo + (hi - lo) * j as f64 / (n - 1) as f64 })
        .collect()
}

pub fn build_grids(params: &SystemParams, cfg: &DpConfig) -> Result<QuantizationGrid> {
    let bad = |name: &'static str, reason: &str| Error::InvalidParameter {
        name,
        reason: reason.into(),
    };
    if cfg.levels < 2 {
        return Err(bad("L", "need at least two quantization levels"));
    }
    if cfg.battery_levels < 2 {
        return Err(bad("L_B", "need at least two battery levels"));
    }
    if cfg.power_levels < 2 {
        return Err(bad("A_p", "need at least two power levels"));
    }
    if cfg.tau_levels < 1 {
        return Err(bad("A_tau", "need at least one sensing-time level"));
    }
    let Some(cap) = params.battery_max.finite() else {
        return Err(bad("B_max", "the causal policy needs a finite battery"));
    };
    Ok(QuantizationGrid {
        g: exponential_midpoints(params.mu_g, cfg.levels),
        h: exponential_midpoints(params.mu_h, cfg.levels),
        harvest: exponential_midpoints(params.mu_harvest, cfg.levels),
        battery: uniform(0.0, cap, cfg.battery_levels),
        power: uniform(0.0, params.p_max, cfg.power_levels),
        tau: uniform(params.tau_min, params.slot_ms, cfg.tau_levels),
    })
}

/// Index of the largest grid point not above `value` (zero below the grid).
pub fn floor_index(grid: &[f64], value: f64) -> usize {
    let tol = SNAP * (1.0 + value.abs());
    grid.iter().rposition(|&x| x <= value + tol).unwrap_or(0)
}

/// Index of the nearest grid point; ties go to the lower index.
pub fn nearest_index(grid: &[f64], value: f64) -> usize {
    let mut best = 0;
    for (j, &x) in grid.iter().enumerate() {
        if (x - value).abs() < (grid[best] - value).abs() {
            best = j;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_split() {
        let b = exponential_boundaries(1.0, 2);
        assert!((b[0] - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn five_level_boundaries() {
        let b = exponential_boundaries(1.0, 5);
        for (got, q) in b.iter().zip([0.2f64, 0.4, 0.6, 0.8]) {
            assert!((got + (1.0 - q).ln()).abs() < 1e-15);
        }
        let want = [0.2231, 0.5108, 0.9163, 1.6094];
        for (got, w) in b.iter().zip(want) {
            assert!((got - w).abs() < 1e-4);
        }
    }

    #[test]
    fn midpoints_sit_inside_their_cells() {
        let b = exponential_boundaries(2.0, 5);
        let m = exponential_midpoints(2.0, 5);
        for j in 0..5 {
            if j > 0 {
                assert!(m[j] > b[j - 1]);
            }
            if j < 4 {
                assert!(m[j] < b[j]);
            }
        }
    }

    #[test]
    fn rejects_single_level() {
        let cfg = DpConfig { levels: 1, ..DpConfig::default() };
        assert!(build_grids(&SystemParams::default(), &cfg).is_err());
    }

    #[test]
    fn default_grids() {
        let g = build_grids(&SystemParams::default(), &DpConfig::default()).unwrap();
        assert_eq!(g.battery, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(g.power.len(), 6);
        assert_eq!(*g.power.last().unwrap(), 1.0);
        assert_eq!(g.tau[0], 0.1);
        assert_eq!(*g.tau.last().unwrap(), 2.0);
        assert!((g.cell_mass() * 5.0 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn projections() {
        let grid = [0.0, 0.25, 0.5];
        assert_eq!(floor_index(&grid, 0.49), 1);
        assert_eq!(floor_index(&grid, 0.5), 2);
        assert_eq!(floor_index(&grid, 0.25 - 1e-14), 1);
        assert_eq!(floor_index(&grid, 7.0), 2);
        assert_eq!(nearest_index(&grid, 0.125), 0);
        assert_eq!(nearest_index(&grid, 0.2), 1);
        assert_eq!(nearest_index(&grid, 9.0), 2);
    }
}
