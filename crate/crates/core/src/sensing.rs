//! Energy-detection spectrum sensing and OR fusion at the fusion center.
//!
//! A participating user collects `S = floor(f_s tau)` samples
//! `y = q x + n` (PU present) or `y = n` (PU absent) and reports `1` when the
//! mean sample energy reaches the threshold `gamma`. With a Gaussian PU
//! signal drawn per sample, the statistic is a scaled chi-square variable, so
//! the detection and false-alarm probabilities have exact closed forms that
//! the causal policy uses for its expectation over the access decision.

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::params::SystemParams;

#[derive(Debug, Clone, PartialEq)]
pub struct SensingConfig {
    /// Samples per millisecond.
    pub sample_rate: f64,
    /// `gamma / sigma_n^2`.
    pub gamma_norm: f64,
    pub sigma_n2: f64,
    pub sigma_x2: f64,
    /// False-alarm cap used by [`min_sensing_time`].
    pub alpha: f64,
    pub gains: Vec<f64>,
}

impl SensingConfig {
    pub fn from_params(params: &SystemParams) -> Self {
        SensingConfig {
            sample_rate: params.sample_rate,
            gamma_norm: params.gamma_norm,
            sigma_n2: params.sigma_n2,
            sigma_x2: params.sigma_x2,
            alpha: params.alpha,
            gains: params.sensing_gain.clone(),
        }
    }

    /// Absolute detection threshold `gamma`.
    pub fn threshold(&self) -> f64 {
        self.gamma_norm * self.sigma_n2
    }

    /// Number of mini-slot samples collected in `tau` ms.
    pub fn samples(&self, tau: f64) -> u64 {
        // The nudge keeps products like 0.3 * 1000 from flooring to 299.
        (self.sample_rate * tau * (1.0 + 1e-12)).floor().max(0.0) as u64
    }

    /// Local false-alarm probability `P(stat >= gamma | H0)` with `s` samples.
    pub fn false_alarm(&self, s: u64) -> f64 {
        chi_square_tail(s, s as f64 * self.gamma_norm)
    }

    /// Local detection probability `P(stat >= gamma | H1)` for sensing gain `q`.
    pub fn detection(&self, s: u64, q: f64) -> f64 {
        let var_h1 = q * q * self.sigma_x2 + self.sigma_n2;
        chi_square_tail(s, s as f64 * self.threshold() / var_h1)
    }

    /// Probabilities that the fused decision is "free" (`theta = 0`) under H0
    /// and under H1 when the users in `participants` sense for `tau`.
    /// An empty participant set never clears the band.
    pub fn fused_clear(&self, tau: f64, participants: &[usize]) -> (f64, f64) {
        if participants.is_empty() {
            return (0.0, 0.0);
        }
        let s = self.samples(tau);
        if s == 0 {
            return (0.0, 0.0);
        }
        let pfa = self.false_alarm(s);
        let mut clear_h0 = 1.0;
        let mut clear_h1 = 1.0;
        for &i in participants {
            clear_h0 *= 1.0 - pfa;
            clear_h1 *= 1.0 - self.detection(s, self.gains[i]);
        }
        (clear_h0, clear_h1)
    }
}

/// `P(chi2_s >= x)`.
fn chi_square_tail(s: u64, x: f64) -> f64 {
    if s == 0 {
        return 0.0;
    }
    let dist = ChiSquared::new(s as f64).expect("positive degrees of freedom");
    dist.sf(x)
}

/// Gaussian tail `Q(x) = P(Z > x)`.
pub fn q_function(x: f64) -> f64 {
    standard_normal().sf(x)
}

/// Inverse of [`q_function`].
pub fn q_inverse(p: f64) -> f64 {
    standard_normal().inverse_cdf(1.0 - p)
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

/// Minimum sensing time that keeps the local false alarm at `alpha`,
/// `(1/f_s) (Q^{-1}(alpha) / (gamma/sigma_n^2 - 1))^2`.
pub fn min_sensing_time(alpha: f64, gamma_norm: f64, sample_rate: f64) -> Result<f64> {
    if !(gamma_norm > 1.0) {
        return Err(Error::Domain(format!(
            "normalized threshold must exceed 1, got {gamma_norm}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !(sample_rate > 0.0) {
        return Err(Error::Domain("sample rate must be positive".into()));
    }
    let r = q_inverse(alpha) / (gamma_norm - 1.0);
    Ok(r * r / sample_rate)
}

/// Run one energy detector for `tau` ms and return the local decision.
pub fn simulate_local_decision<R: Rng + ?Sized>(
    tau: f64,
    gain: f64,
    pu_active: bool,
    cfg: &SensingConfig,
    noise: &mut R,
) -> Result<bool> {
    if tau < 0.0 {
        return Err(Error::Domain(format!("negative sensing time {tau}")));
    }
    let s = cfg.samples(tau);
    if s == 0 {
        return Err(Error::Domain(format!(
            "sensing time {tau} ms yields no samples at {} samples/ms",
            cfg.sample_rate
        )));
    }
    let sn = cfg.sigma_n2.sqrt();
    let sx = cfg.sigma_x2.sqrt();
    let mut energy = 0.0;
    for _ in 0..s {
        let n: f64 = noise.sample::<f64, _>(StandardNormal) * sn;
        let y = if pu_active {
            let x: f64 = noise.sample::<f64, _>(StandardNormal) * sx;
            gain * x + n
        } else {
            n
        };
        energy += y * y;
    }
    Ok(energy / s as f64 >= cfg.threshold())
}

/// OR fusion of the participating users' local decisions. No participants
/// means no sensing, which never grants access.
pub fn or_fusion(local: &[bool]) -> bool {
    local.is_empty() || local.iter().any(|&d| d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> SensingConfig {
        SensingConfig::from_params(&SystemParams::default())
    }

    #[test]
    fn min_sensing_time_examples() {
        assert!(min_sensing_time(0.5, 1.006, 1e3).unwrap().abs() < 1e-12);
        let t = min_sensing_time(0.03, 1.006, 1e3).unwrap();
        // Q^{-1}(0.03) = 1.880794 from the normal quantile, giving about
        // 98260 samples, which is 98.26 ms at 1000 samples per ms.
        let expected = (1.880_793_6f64 / 0.006).powi(2) / 1e3;
        assert!((t - expected).abs() / expected < 1e-6, "{t} vs {expected}");
        assert!((t - 98.26).abs() < 5e-3, "{t}");
        let half = min_sensing_time(0.03, 1.006, 2e3).unwrap();
        assert!((half - t / 2.0).abs() < 1e-9);
        assert!(min_sensing_time(0.03, 1.0, 1e3).is_err());
        assert!(min_sensing_time(0.03, 0.9, 1e3).is_err());
    }

    #[test]
    fn q_inverse_round_trip() {
        for p in [0.01, 0.03, 0.2, 0.5, 0.9] {
            assert!((q_function(q_inverse(p)) - p).abs() < 1e-10);
        }
        assert!((q_inverse(0.03) - 1.880_793_608_151_25).abs() < 1e-12);
    }

    #[test]
    fn fusion_examples() {
        assert!(!or_fusion(&[false, false]));
        assert!(or_fusion(&[true, false]));
        assert!(or_fusion(&[]));
    }

    #[test]
    fn sample_count_floors() {
        let c = cfg();
        assert_eq!(c.samples(0.1), 100);
        assert_eq!(c.samples(0.3), 300);
        assert_eq!(c.samples(0.0004), 0);
    }

    #[test]
    fn zero_samples_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(simulate_local_decision(0.0, 0.2, false, &cfg(), &mut rng).is_err());
    }

    #[test]
    fn h0_large_sample_declares_absent() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut c = cfg();
        c.sample_rate = 1e6; // S = 10^6 at tau = 1 ms
        // Statistic sd is sqrt(2e-6) ~ 1.4e-3, threshold is 4.2 sd above the mean.
        assert!(!simulate_local_decision(1.0, 0.2, false, &c, &mut rng).unwrap());
    }

    #[test]
    fn h1_strong_signal_detected() {
        let mut c = cfg();
        let q = 10f64.sqrt(); // +10 dB with unit powers
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let trials = 10_000;
        let hits = (0..trials)
            .filter(|_| simulate_local_decision(1.0, q, true, &c, &mut rng).unwrap())
            .count();
        assert!(hits as f64 / trials as f64 > 0.99);
        c.sample_rate = 1e3;
        assert!(c.detection(1000, q) > 0.99);
    }

    #[test]
    fn deterministic_given_seed() {
        let c = cfg();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50)
                .map(|_| simulate_local_decision(0.1, c.gains[0], true, &c, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(3), run(3));
    }

    #[test]
    fn fused_false_alarm_matches_monte_carlo() {
        let c = cfg();
        let tau = 0.2;
        let s = c.samples(tau);
        let pfa = c.false_alarm(s);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let trials = 20_000;
        let mut alarms = 0;
        for _ in 0..trials {
            let d: Vec<bool> = (0..2)
                .map(|i| simulate_local_decision(tau, c.gains[i], false, &c, &mut rng).unwrap())
                .collect();
            if or_fusion(&d) {
                alarms += 1;
            }
        }
        let expect = 1.0 - (1.0 - pfa).powi(2);
        let se = (expect * (1.0 - expect) / trials as f64).sqrt();
        let got = alarms as f64 / trials as f64;
        assert!((got - expect).abs() < 4.0 * se, "{got} vs {expect}");
        let (clear0, _) = c.fused_clear(tau, &[0, 1]);
        assert!((1.0 - clear0 - expect).abs() < 1e-15);
    }

    proptest::proptest! {
        #[test]
        fn fusion_is_monotone(bits in proptest::collection::vec(proptest::bool::ANY, 1..6), flip in 0usize..6) {
            let before = or_fusion(&bits);
            let mut after = bits.clone();
            let j = flip % after.len();
            after[j] = true;
            proptest::prop_assert!(!before || or_fusion(&after));
        }
    }
}
