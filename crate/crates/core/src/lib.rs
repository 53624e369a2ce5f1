//! Sensing-throughput optimization for an energy-harvesting cognitive
//! multiple-access network.

pub mod boolean;
pub mod dp;
pub mod error;
pub mod experiment;
pub mod model;
pub mod noncausal;
pub mod params;
pub mod rng;
pub mod sensing;

pub use error::{Error, Result};
pub use model::{DecisionSet, DualSet, Realization};
pub use params::{Capacity, SystemParams};

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../README.md")]
    struct Readme;
    #[doc = include_str!("../../../book/src/intro.md")]
    struct Intro;
    #[doc = include_str!("../../../book/src/model.md")]
    struct Model;
    #[doc = include_str!("../../../book/src/sensing.md")]
    struct Sensing;
    #[doc = include_str!("../../../book/src/noncausal.md")]
    struct Noncausal;
    #[doc = include_str!("../../../book/src/boolean.md")]
    struct Boolean;
    #[doc = include_str!("../../../book/src/dp.md")]
    struct Dp;
    #[doc = include_str!("../../../book/src/experiments.md")]
    struct Experiments;
}
