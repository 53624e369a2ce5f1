//! Flat `key = value` experiment configuration.

use std::fmt;

use crate::dp::{DpConfig, Hook};
use crate::error::{Error, Result};
use crate::params::{sensing_snr_linear, Capacity, SystemParams};

/// Solver pipeline of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    /// Full knowledge, unbounded battery, every Boolean assignment searched.
    NoncausalExhaustive,
    /// Battery-threshold sensing with simulated sensing and re-planning.
    NoncausalHeuristic,
    /// Dynamic-programming policy with sensing chosen jointly with power.
    CausalDpExhaustive,
    /// Dynamic-programming policy with threshold sensing.
    CausalDpHeuristic,
}

impl Mode {
    pub const ALL: [Mode; 4] = [
        Mode::NoncausalExhaustive,
        Mode::NoncausalHeuristic,
        Mode::CausalDpExhaustive,
        Mode::CausalDpHeuristic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::NoncausalExhaustive => "noncausal-exhaustive",
            Mode::NoncausalHeuristic => "noncausal-heuristic",
            Mode::CausalDpExhaustive => "causal-dp-exhaustive",
            Mode::CausalDpHeuristic => "causal-dp-heuristic",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.name() == s)
    }

    pub fn hook(self) -> Option<Hook> {
        match self {
            Mode::CausalDpExhaustive => Some(Hook::Exhaustive),
            Mode::CausalDpHeuristic => Some(Hook::Heuristic),
            _ => None,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A parameter that can be swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVar {
    MuHarvest,
    /// `mu_h / mu_g` with `mu_g` held fixed.
    MuRatio,
    MuH,
    MuG,
    BatteryMax,
    Horizon,
    Q,
    PSense,
    Kappa,
}

impl SweepVar {
    const ALL: [SweepVar; 9] = [
        SweepVar::MuHarvest,
        SweepVar::MuRatio,
        SweepVar::MuH,
        SweepVar::MuG,
        SweepVar::BatteryMax,
        SweepVar::Horizon,
        SweepVar::Q,
        SweepVar::PSense,
        SweepVar::Kappa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepVar::MuHarvest => "mu_H",
            SweepVar::MuRatio => "mu_h_over_mu_g",
            SweepVar::MuH => "mu_h",
            SweepVar::MuG => "mu_g",
            SweepVar::BatteryMax => "B_max",
            SweepVar::Horizon => "M",
            SweepVar::Q => "Q",
            SweepVar::PSense => "p_s",
            SweepVar::Kappa => "kappa",
        }
    }

    pub fn parse(s: &str) -> Option<SweepVar> {
        SweepVar::ALL.into_iter().find(|v| v.name() == s)
    }

    /// `params` with this variable set to `value`.
    pub fn apply(self, params: &SystemParams, value: f64) -> Result<SystemParams> {
        let mut p = params.clone();
        match self {
            SweepVar::MuHarvest => p.mu_harvest = value,
            SweepVar::MuRatio => p.mu_h = value * p.mu_g,
            SweepVar::MuH => p.mu_h = value,
            SweepVar::MuG => p.mu_g = value,
            SweepVar::BatteryMax => p.battery_max = Capacity::Finite(value),
            SweepVar::Horizon => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::InvalidParameter {
                        name: "M",
                        reason: format!("horizon must be a positive integer, got {value}"),
                    });
                }
                p.horizon = value as usize;
            }
            SweepVar::Q => p.q_limit = value,
            SweepVar::PSense => p.p_sense = value,
            SweepVar::Kappa => p.kappa = value,
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub var: SweepVar,
    pub values: Vec<f64>,
}

/// How the causal policy's interference multiplier is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaChoice {
    Fixed(f64),
    Bisect { eps: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub params: SystemParams,
    /// Sensing SNR in dB; sets the sensing gains.
    pub snr_db: f64,
    pub modes: Vec<Mode>,
    pub sweep: Option<Sweep>,
    pub n_trials: usize,
    pub seed: u64,
    pub dp: DpConfig,
    pub lambda: LambdaChoice,
    /// Record wall-clock time per row. Off by default so that output files
    /// are reproducible byte for byte.
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            params: SystemParams::default(),
            snr_db: -15.0,
            modes: vec![Mode::NoncausalExhaustive],
            sweep: None,
            n_trials: 50,
            seed: 1,
            dp: DpConfig::default(),
            lambda: LambdaChoice::Bisect { eps: 1e-3 },
            timing: false,
        }
    }
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Render as a config file that parses back to the same value.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut lines = vec![
            "# cogmac experiment configuration".to_string(),
            "# time in ms, power in mW, energy in uJ".to_string(),
            format!("N = {}", p.n_users),
            format!("M = {}", p.horizon),
            format!("T = {}", p.slot_ms),
            format!("P_max = {}", p.p_max),
            format!("p_s = {}", p.p_sense),
            format!("B_init = {}", list(&p.battery_init)),
            format!(
                "B_max = {}",
                match p.battery_max {
                    Capacity::Finite(c) => c.to_string(),
                    Capacity::Unbounded => "inf".into(),
                }
            ),
            format!("Q = {}", p.q_limit),
            format!("kappa = {}", p.kappa),
            format!("tau_l = {}", p.tau_min),
            format!("f_s = {}", p.sample_rate),
            format!("gamma_norm = {}", p.gamma_norm),
            format!("sigma_n2 = {}", p.sigma_n2),
            format!("sigma_x2 = {}", p.sigma_x2),
            format!("snr_db = {}", self.snr_db),
            format!("alpha = {}", p.alpha),
            format!("mu_g = {}", p.mu_g),
            format!("mu_h = {}", p.mu_h),
            format!("mu_H = {}", p.mu_harvest),
            format!("mode = {}", self.modes.iter().map(|m| m.name()).collect::<Vec<_>>().join(",")),
        ];
        match &self.sweep {
            Some(s) => {
                lines.push(format!("sweep = {}", s.var.name()));
                lines.push(format!("sweep_values = {}", list(&s.values)));
            }
            None => lines.push("sweep = none".into()),
        }
        lines.push(format!("trials = {}", self.n_trials));
        lines.push(format!("seed = {}", self.seed));
        lines.push(format!("dp_levels = {}", self.dp.levels));
        lines.push(format!("dp_battery_levels = {}", self.dp.battery_levels));
        lines.push(format!("dp_power_levels = {}", self.dp.power_levels));
        lines.push(format!("dp_tau_levels = {}", self.dp.tau_levels));
        lines.push(match self.lambda {
            LambdaChoice::Fixed(l) => format!("lambda = {l}"),
            LambdaChoice::Bisect { eps } => format!("lambda = auto\nbisect_eps = {eps}"),
        });
        lines.push(format!("timing = {}", self.timing));
        let mut s = lines.join("\n");
        s.push('\n');
        s
    }

    /// Parse a config file on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            cfg.set(k.trim(), v.trim()).map_err(|e| match e {
                Error::Parse { message, .. } => Error::Parse { line: i + 1, message },
                other => other,
            })?;
        }
        cfg.finish()
    }

    /// Apply a `key=value` override, then re-derive dependent fields.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        self.apply_overrides(&[assignment])
    }

    /// Apply several `key=value` overrides, validating once at the end so
    /// that keys which depend on each other can be given together.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, assignments: &[S]) -> Result<()> {
        let mut next = self.clone();
        for a in assignments {
            let a = a.as_ref();
            let (k, v) = a.split_once('=').ok_or_else(|| Error::Parse {
                line: 0,
                message: format!("override `{a}` is not `key=value`"),
            })?;
            next.set(k.trim(), v.trim())?;
        }
        *self = next.finish()?;
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let perr = |message: String| Error::Parse { line: 0, message };
        let num = |v: &str| -> Result<f64> {
            v.parse::<f64>()
                .map_err(|_| perr(format!("`{key}` expects a number, got `{v}`")))
        };
        let int = |v: &str| -> Result<usize> {
            v.parse::<usize>()
                .map_err(|_| perr(format!("`{key}` expects a non-negative integer, got `{v}`")))
        };
        let nums = |v: &str| -> Result<Vec<f64>> { v.split(',').map(|x| num(x.trim())).collect() };
        let p = &mut self.params;
        match key {
            "N" => p.n_users = int(value)?,
            "M" => p.horizon = int(value)?,
            "T" => p.slot_ms = num(value)?,
            "P_max" => p.p_max = num(value)?,
            "p_s" => p.p_sense = num(value)?,
            "B_init" => p.battery_init = nums(value)?,
            "B_max" => {
                p.battery_max = if value == "inf" {
                    Capacity::Unbounded
                } else {
                    Capacity::Finite(num(value)?)
                }
            }
            "Q" => p.q_limit = num(value)?,
            "kappa" => p.kappa = num(value)?,
            "tau_l" => p.tau_min = num(value)?,
            "f_s" => p.sample_rate = num(value)?,
            "gamma_norm" => p.gamma_norm = num(value)?,
            "sigma_n2" => p.sigma_n2 = num(value)?,
            "sigma_x2" => p.sigma_x2 = num(value)?,
            "snr_db" => self.snr_db = num(value)?,
            "alpha" => p.alpha = num(value)?,
            "mu_g" => p.mu_g = num(value)?,
            "mu_h" => p.mu_h = num(value)?,
            "mu_H" => p.mu_harvest = num(value)?,
            "mode" => {
                self.modes = value
                    .split(',')
                    .map(|s| Mode::parse(s.trim()).ok_or_else(|| perr(format!("unknown mode `{}`", s.trim()))))
                    .collect::<Result<_>>()?;
            }
            "sweep" => {
                if value == "none" {
                    self.sweep = None;
                } else {
                    let var = SweepVar::parse(value).ok_or_else(|| perr(format!("unknown sweep variable `{value}`")))?;
                    let values = self.sweep.take().map(|s| s.values).unwrap_or_default();
                    self.sweep = Some(Sweep { var, values });
                }
            }
            "sweep_values" => {
                let values = nums(value)?;
                match &mut self.sweep {
                    Some(s) => s.values = values,
                    None => {
                        self.sweep = Some(Sweep {
                            var: SweepVar::BatteryMax,
                            values,
                        })
                    }
                }
            }
            "trials" => self.n_trials = int(value)?,
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| perr(format!("`seed` expects an unsigned integer, got `{value}`")))?
            }
            "dp_levels" => self.dp.levels = int(value)?,
            "dp_battery_levels" => self.dp.battery_levels = int(value)?,
            "dp_power_levels" => self.dp.power_levels = int(value)?,
            "dp_tau_levels" => self.dp.tau_levels = int(value)?,
            "lambda" => {
                self.lambda = if value == "auto" {
                    match self.lambda {
                        LambdaChoice::Bisect { eps } => LambdaChoice::Bisect { eps },
                        LambdaChoice::Fixed(_) => LambdaChoice::Bisect { eps: 1e-3 },
                    }
                } else {
                    LambdaChoice::Fixed(num(value)?)
                }
            }
            "bisect_eps" => self.lambda = LambdaChoice::Bisect { eps: num(value)? },
            "timing" => {
                self.timing = value
                    .parse()
                    .map_err(|_| perr(format!("`timing` expects true or false, got `{value}`")))?
            }
            _ => return Err(perr(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Broadcast a uniform `B_init` to `N` users, derive the sensing gains and validate.
    fn finish(mut self) -> Result<Self> {
        let n = self.params.n_users;
        let init = &self.params.battery_init;
        if init.len() != n && !init.is_empty() && init.iter().all(|b| *b == init[0]) {
            let b = init[0];
            self.params.battery_init = vec![b; n];
        }
        let snr = sensing_snr_linear(self.snr_db);
        self.params.sensing_gain = vec![(snr * self.params.sigma_n2 / self.params.sigma_x2).sqrt(); n];
        self.params.validate()?;
        if self.modes.is_empty() {
            return Err(Error::InvalidParameter {
                name: "mode",
                reason: "at least one mode is required".into(),
            });
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() || s.values.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::InvalidParameter {
                    name: "sweep_values",
                    reason: "sweep values must be a non-empty list of positive numbers".into(),
                });
            }
        }
        if self.n_trials == 0 {
            return Err(Error::InvalidParameter {
                name: "trials",
                reason: "need at least one trial".into(),
            });
        }
        Ok(self)
    }
}
