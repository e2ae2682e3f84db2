//! Sliding-window singular-value monitoring for abrupt-change detection in
//! linear measurement streams.
//!
//! A system with bounded state variation produces measurements
//! `y^t = H x^t + e^t`. Stacking the changes `y^t - y^{t-k}` for
//! `k = 1..w` into a history matrix, an abrupt additive change of magnitude
//! `‖a‖₂` lifts the largest singular value by roughly `√w · ‖a‖₂` at onset
//! while Gaussian noise keeps it below a closed-form envelope — so tracking
//! σ₁ of that matrix detects changes that classical residual tests miss,
//! including measurement attacks crafted inside the column space of `H`.
//!
//! The crate splits into:
//!
//! - [`numerics`]: dense σ₁ / spectral norm / weighted pseudo-inverse.
//! - [`grid`]: DC power-flow grids, the measurement matrix, WLS state
//!   estimation, unobservable-attack construction. A 39-bus test system is
//!   bundled.
//! - [`sim`]: bounded-variation trajectories, Gaussian noise, attack
//!   injection, stream CSV I/O.
//! - [`detector`]: the history matrix and the streaming σ₁ monitor.
//! - [`bounds`]: closed-form envelopes `ℓ` and `u`, tail probabilities, the
//!   detectability condition, and minimum-window / minimum-magnitude solvers.
//! - [`harness`]: deterministic experiment runs over the bundled grid.
//! - [`cli`]: the `svdwatch` command-line tool built on all of the above.
//!
//! The `examples/` directory walks through each capability; `README.md`
//! documents the CLI and file formats.

pub mod bounds;
pub mod cli;
pub mod detector;
pub mod error;
pub mod grid;
pub mod harness;
pub mod numerics;
pub mod sim;

pub use error::{Error, Result};
