//! Sparse variational Gaussian processes whose inducing points are chosen by
//! greedy MAP inference in quality-weighted determinantal point processes,
//! plus the batch Bayesian-optimisation machinery around them.

pub mod acq;
pub mod benchmarks;
pub mod data;
pub mod engine;
pub mod error;
pub mod gp;
pub mod ipa;
pub mod numerics;
pub mod optim;
pub mod stats;
pub mod svgp;

pub use data::{Bounds, Dataset};
pub use error::{Error, Result};
pub use gp::{ExactGp, KernelFamily, KernelParams, OutputTransform, RffBasis};
pub use numerics::{factorize, solve, GreedySelectionState, SpdFactor};
pub use svgp::{Likelihood, SvgpState, TrainSchedule};
pub use ipa::{allocate, Allocation, IpaStrategy, IpaVariant, QualitySpec};
