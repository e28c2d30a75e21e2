//! Shallow ReLU networks trained under weight decay, compared against known
//! minimum Barron-norm interpolants.
//!
//! The crate is organised by concern:
//!
//! - [`nn_model`]: one-hidden-layer (and deeper) ReLU networks, hand-written
//!   backpropagation, weight-decay and path norms, checkpoint I/O.
//! - [`losses`]: MSE, L1, Huber and pseudo-Huber losses.
//! - [`initializers`]: seeded Xavier / He initialization.
//! - [`optimizers`]: GD, SGD, momentum, Adam, L-BFGS and step schedules.
//! - [`datagen`]: the 1D `|x|` grid, the radial bump mixture, sphere sampling.
//! - [`analysis_1d`]: exact piecewise-linear extraction, minimum-norm defects,
//!   natural cubic splines.
//! - [`analysis_radial`]: Monte-Carlo radial profiles and rescale fitting.
//! - [`theory_checks`]: numerical checks of the approximation, Rademacher and
//!   sub-Gaussian bounds.
//!
//! All arithmetic is `f64`. Every random draw is addressed by a
//! [`rng::StreamKey`] so results do not depend on thread count.

pub mod analysis_1d;
pub mod analysis_radial;
pub mod datagen;
pub mod error;
pub mod initializers;
pub mod losses;
pub mod matrix;
pub mod nn_model;
pub mod optimizers;
pub mod rng;
pub mod text;
pub mod theory_checks;

pub use error::{Error, Result};
pub use matrix::Matrix;
