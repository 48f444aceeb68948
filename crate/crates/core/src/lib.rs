//! Energy-constrained sparse training for systolic-array accelerators.
//!
//! - [`energy`]: closed-form access counts and energy per layer.
//! - [`constraint`]: linearized energy constraint and its knapsack image.
//! - [`knapsack`]: greedy, exact and approximate solvers, weight projection.
//! - [`approx`]: step-function machinery behind the approximate solver.
//! - [`masking`], [`nn`], [`trainer`]: input masks, a small network with
//!   hand-written gradients, and the alternating training loop.

pub mod approx;
pub mod checkpoint;
pub mod constraint;
pub mod data;
pub mod energy;
pub mod error;
pub mod knapsack;
pub mod masking;
pub mod nn;
pub mod rational;
pub mod trainer;

pub use error::{Error, Result};
pub use rational::Rational;
