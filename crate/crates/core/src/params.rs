//! Static system parameters.
//!
//! Units throughout the crate: time in milliseconds, power in milliwatts and
//! energy in microjoules (1 mW x 1 ms = 1 uJ).

use crate::error::{Error, Result};

/// Battery capacity: either a finite `B_max` or the unbounded-storage variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Capacity {
    Finite(f64),
    Unbounded,
}

impl Capacity {
    /// Clip a battery level to the capacity.
    pub fn clip(self, level: f64) -> f64 {
        match self {
            Capacity::Finite(cap) => level.min(cap),
            Capacity::Unbounded => level,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Capacity::Finite(cap) => Some(cap),
            Capacity::Unbounded => None,
        }
    }
}

/// All scalars of the network model.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Number of secondary users `N`.
    pub n_users: usize,
    /// Horizon length `M` in slots.
    pub horizon: usize,
    /// Slot length `T` (ms).
    pub slot_ms: f64,
    /// Peak transmit power (mW).
    pub p_max: f64,
    /// Sensing power (mW).
    pub p_sense: f64,
    /// Initial battery per user (uJ).
    pub battery_init: Vec<f64>,
    pub battery_max: Capacity,
    /// Interference limit `Q` (mW) before normalization by the activity factor.
    pub q_limit: f64,
    /// Probability that the primary user occupies a slot.
    pub kappa: f64,
    /// Minimum sensing time `tau_l` (ms).
    pub tau_min: f64,
    /// Sampling rate (samples per ms).
    pub sample_rate: f64,
    /// Detection threshold normalized by the noise power.
    pub gamma_norm: f64,
    pub sigma_n2: f64,
    pub sigma_x2: f64,
    /// Target local false-alarm cap.
    pub alpha: f64,
    /// Mean SU-Tx to PU-Rx gain.
    pub mu_g: f64,
    /// Mean SU-Tx to fusion-center gain.
    pub mu_h: f64,
    /// Mean harvested energy per slot (uJ).
    pub mu_harvest: f64,
    /// PU-Tx to SU sensing-channel amplitude gains `q_i`.
    pub sensing_gain: Vec<f64>,
}

impl Default for SystemParams {
    fn default() -> Self {
        let n = 2;
        let snr = sensing_snr_linear(-15.0);
        let q = (snr * 1.0 / 1.0_f64).sqrt();
        SystemParams {
            n_users: n,
            horizon: 2,
            slot_ms: 2.0,
            p_max: 1.0,
            p_sense: 0.1,
            battery_init: vec![0.4; n],
            battery_max: Capacity::Finite(1.0),
            q_limit: 0.4,
            kappa: 0.8,
            tau_min: 0.1,
            sample_rate: 1e3,
            gamma_norm: 1.006,
            sigma_n2: 1.0,
            sigma_x2: 1.0,
            alpha: 0.03,
            mu_g: 1.0,
            mu_h: 1.0,
            mu_harvest: 1.0,
            sensing_gain: vec![q; n],
        }
    }
}

/// Convert a sensing SNR in dB to the linear ratio `q^2 sigma_x^2 / sigma_n^2`.
pub fn sensing_snr_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl SystemParams {
    /// `Q_avg = Q / kappa`.
    pub fn q_avg(&self) -> f64 {
        self.q_limit / self.kappa
    }

    /// Set every user's sensing gain from a common sensing SNR.
    pub fn set_sensing_snr_db(&mut self, db: f64) {
        let q = (sensing_snr_linear(db) * self.sigma_n2 / self.sigma_x2).sqrt();
        self.sensing_gain = vec![q; self.n_users];
    }

    /// Resize the per-user vectors, repeating the first entry.
    pub fn set_users(&mut self, n: usize) {
        let b = self.battery_init.first().copied().unwrap_or(0.0);
        let q = self.sensing_gain.first().copied().unwrap_or(0.0);
        self.n_users = n;
        self.battery_init.resize(n, b);
        self.sensing_gain.resize(n, q);
    }

    pub fn with_horizon(&self, m: usize) -> Self {
        SystemParams {
            horizon: m,
            ..self.clone()
        }
    }

    pub fn with_unbounded_battery(&self) -> Self {
        SystemParams {
            battery_max: Capacity::Unbounded,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn bad(name: &'static str, reason: impl Into<String>) -> Error {
            Error::InvalidParameter {
                name,
                reason: reason.into(),
            }
        }
        if self.n_users == 0 {
            return Err(bad("N", "need at least one user"));
        }
        if self.horizon == 0 {
            return Err(bad("M", "need at least one slot"));
        }
        if !(self.slot_ms > 0.0) {
            return Err(bad("T", "slot length must be positive"));
        }
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(bad("kappa", "must lie in (0, 1]"));
        }
        if !(self.tau_min >= 0.0 && self.tau_min <= self.slot_ms) {
            return Err(bad("tau_l", "must lie in [0, T]"));
        }
        if !(self.p_max > 0.0) {
            return Err(bad("P_max", "must be positive"));
        }
        if !(self.p_sense >= 0.0) {
            return Err(bad("p_s", "must be nonnegative"));
        }
        if let Capacity::Finite(cap) = self.battery_max {
            if !(cap > 0.0) {
                return Err(bad("B_max", "must be positive or unbounded"));
            }
        }
        if !(self.q_limit >= 0.0) {
            return Err(bad("Q", "must be nonnegative"));
        }
        if self.battery_init.len() != self.n_users {
            return Err(bad("B_init", format!("expected {} entries", self.n_users)));
        }
        if self.battery_init.iter().any(|b| !(*b >= 0.0)) {
            return Err(bad("B_init", "must be nonnegative"));
        }
        if self.sensing_gain.len() != self.n_users {
            return Err(bad("q", format!("expected {} entries", self.n_users)));
        }
        for (name, v) in [
            ("mu_g", self.mu_g),
            ("mu_h", self.mu_h),
            ("mu_H", self.mu_harvest),
            ("f_s", self.sample_rate),
            ("sigma_n2", self.sigma_n2),
        ] {
            if !(v > 0.0) {
                return Err(bad(name, "must be positive"));
            }
        }
        if !(self.sigma_x2 >= 0.0) {
            return Err(bad("sigma_x2", "must be nonnegative"));
        }
        Ok(())
    }
}
