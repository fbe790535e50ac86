//! Non-local transport for the fractional porous medium equation on the torus.
//!
//! The crate discretizes the torus `[0,1)^d` (`d = 1, 2`) into `n^d` cells and
//! provides the periodized fractional kernel, the `m`-means and entropies, the
//! non-local action and distance `W` with its geodesics, the minimizing-movement
//! scheme for `∂_t ρ + (-Δ)^σ ρ^m = 0`, and independent reference solvers.

pub mod action;
pub mod cli;
pub mod entropy;
pub mod error;
pub mod grid;
pub mod init;
pub mod io;
pub mod jko;
pub mod kernel;
pub mod means;
pub mod oracles;
pub mod special;
pub mod transport;
pub mod validate;

pub use error::{FpmeError, Result};
pub use grid::{make_grid, DensityField, GridSpec, NodeField, PairField};
pub use kernel::{kernel_matrix, KernelConfig, KernelMatrix};
