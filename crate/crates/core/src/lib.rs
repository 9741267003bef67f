//! Random permutations built by card picking with a decreasing weight
//! function `g`, their permuton limits, and the logistic band around the
//! diagonal.
//!
//! The sampler draws `sigma` from `PERM(g, n)` in `O(n log n)`; the
//! [`permuton`] module evaluates the limit `mu_g` through `u(x) = int_0^x 1/g`;
//! [`stats`], [`band`] and [`exact`] hold the statistics used to compare the
//! two.

pub mod band;
pub mod deck;
pub mod defaults;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod figure;
pub mod model;
pub mod numeric;
pub mod permutation;
pub mod permuton;
pub mod rng;
pub mod sampler;
pub mod stats;

pub use error::{Error, Result};
pub use model::{make_kcm, make_mallows, make_uniform, GModel};
pub use permutation::Permutation;
pub use permuton::{build_evaluator, PermutonEvaluator};
pub use rng::RngStream;
pub use sampler::{sample_permutation, StepSampler};
