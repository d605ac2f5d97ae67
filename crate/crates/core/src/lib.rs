//! Online optimization for cost functions whose minimiser drifts linearly in time.
//!
//! The tracker is a two-step gradient recursion with unit momentum,
//!
//! ```text
//! x(t+1) = 2 x(t) - x(t-1) - alpha * grad f(x(t), t) + gamma * grad f(x(t-1), t-1)
//! ```
//!
//! whose linear part contains a double integrator, so a ramp in the optimum is
//! tracked with zero steady-state error. The crate also carries the machinery
//! used to certify a parameter choice: spectral-radius rates over the sector
//! `[m, L]`, the Jury triangle in the coefficient plane, and the discrete-time
//! circle criterion.
//!
//! Modules:
//!
//! * [`sector`]: cost oracles and the sector-bounded function class.
//! * [`tracker`]: the recursion and its Luré state-space twin.
//! * [`cert`]: rate, Jury and circle-criterion certification, optimal design.
//! * [`baselines`]: gradient descent, heavy ball and triple momentum.
//! * [`toa`]: time-of-arrival localisation of a moving source.
//! * [`cli`]: the `ramptrack` command-line harness.

pub mod baselines;
pub mod cert;
pub mod cli;
mod error;
pub mod io;
pub mod plot;
pub mod sampling;
pub mod sector;
pub mod toa;
pub mod tracker;
pub mod trajectory;

pub use error::{Error, Result};

pub use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64;
