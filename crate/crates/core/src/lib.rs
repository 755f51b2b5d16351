//! Model selection for offline reinforcement learning with value-function
//! approximation.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every numerical piece:
//!
//! * [`mdp`]: exact finite-horizon tabular MDPs and their dynamic-programming
//!   oracles (optimal values, policy values, occupancies, concentrability).
//! * [`funcclass`]: finite, state-abstraction and linear function classes with
//!   squared-loss ERM, and nested sequences of them.
//! * [`dataset`]: per-step i.i.d. offline datasets and the 80/20 split.
//! * [`basealg`]: the base-algorithm contract, Fitted Q-Iteration and its
//!   estimation-error function.
//! * [`modbe`]: the Bellman-error model selection loop and its tolerances.
//! * [`baselines`] and [`diagnostics`]: hold-out and hindsight selectors,
//!   completeness errors computed from ground truth.
//!
//! Step and class indices are zero-based throughout the API. File formats and
//! human-readable output (in the `modbe` crate) use one-based indices.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod basealg;
pub mod baselines;
pub mod dataset;
pub mod diagnostics;
pub mod error;
pub mod funcclass;
mod linalg;
pub mod mdp;
pub mod modbe;
pub mod rng;

pub use basealg::{fitted_q_discounted, fqi, fqi_oracle, omega_fqi, BaseAlgorithm, DiscountedFqi, Fqi, FqiOracle, QSequence};
pub use dataset::{generate_from_behavior, generate_from_mu, split, DataSplit, DatasetMeta, OfflineDataset, Transition};
pub use error::{Error, Result};
pub use funcclass::{FeatureMap, FunctionClass, NestedSequence, QFunction, Ridge, Sample, TableFeatures};
pub use mdp::{DataDistribution, OccupancyMeasure, Policy, QTable, TabularMdp};
pub use modbe::{modbe, modbe_discounted, ScheduleMode, SelectionTrace, TestEvent, TestOutcome, ToleranceSchedule};

/// Slack allowed when validating user-supplied probability vectors.
pub const PROB_TOL: f64 = 1e-12;

/// Slack allowed on sums that the library derives itself.
pub const DERIVED_TOL: f64 = 1e-10;
