//! Seeded realizations, experiment configuration and the Monte Carlo runner.

mod config;
mod run;

pub use config::{ExperimentConfig, LambdaChoice, Mode, Sweep, SweepVar};
pub use run::{
    evaluate_policy, run_experiment, train, write_csv, write_trials_csv, ResultRow, TrialRecord, CSV_HEADER, CSV_MAGIC,
};

use rand::Rng;

use crate::model::Realization;
use crate::params::SystemParams;
use crate::rng::{keyed, Stream};

/// Draw all random quantities of one horizon.
///
/// Each quantity comes from its own `(stream, user, slot)` generator, so the
/// draws of user `i` in slot `k` do not depend on `N` or `M`.
pub fn generate_realization(params: &SystemParams, seed: u64) -> Realization {
    let n = params.n_users;
    let m = params.horizon;
    let exp = |stream: Stream, mean: f64| -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| {
                (0..m)
                    .map(|k| {
                        let u: f64 = keyed(seed, stream, i, k).random();
                        -mean * (-u).ln_1p()
                    })
                    .collect()
            })
            .collect()
    };
    Realization {
        g: exp(Stream::Interference, params.mu_g),
        h: exp(Stream::Direct, params.mu_h),
        harvest: exp(Stream::Harvest, params.mu_harvest),
        pu_active: (0..m)
            .map(|k| keyed(seed, Stream::PuActivity, 0, k).random::<f64>() < params.kappa)
            .collect(),
        seed,
    }
}
