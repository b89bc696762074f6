//! Numerical core for the reduced nonlocal Peierls-Nabarro dislocation model.
//!
//! The crate covers the whole pipeline from elastic constants to stability
//! certificates:
//!
//! - [`params`]: elastic constants, misfit potentials, validation.
//! - [`grid`] / [`spectral`]: truncated 1D grids, periodic 2D grids, and the
//!   FFT plumbing with a single fixed transform convention.
//! - [`kernel`]: the pi-periodic angular profile `v(theta)` and the
//!   anisotropic degree `-3` kernels built from it.
//! - [`symbols`]: Dirichlet-to-Neumann matrix symbol, the reduced scalar
//!   multiplier, and the effective 1D coefficient for rotated profiles.
//! - [`operator`]: spectral application of the nonlocal operator, the
//!   real-space singular-integral quadrature used to cross-validate it, and
//!   the tail-corrected 1D half-Laplacian.
//! - [`profile1d`]: the 1D bistable profile solver with the exact sinusoidal
//!   solution as oracle.
//! - [`solver2d`]: the 2D solver on a background-plus-periodic-perturbation
//!   decomposition, plus flatness diagnostics.
//! - [`stability`]: ball-localized energies, pushforward perturbations,
//!   discrete second variations, BV quantities, and eigenvalue certificates.
//! - [`elastic3d`]: per-mode half-space elastic extension from slip-plane
//!   traces and the traction/boundary-condition checks.
//!
//! The default `parallel` feature routes the heavy inner loops (pair
//! quadratures, matrix assembly, batched transforms) through rayon with
//! order-fixed reductions so results are bit-identical to the sequential
//! fallback built with `--no-default-features`.

pub mod elastic3d;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod operator;
pub mod params;
mod par;
pub mod profile1d;
pub mod quad;
pub mod solver2d;
pub mod spectral;
pub mod stability;
pub mod symbols;

pub use error::{Error, Result};
pub use grid::{Grid1D, Grid2D};
pub use kernel::{AngularKernel, KernelEval};
pub use params::{ElasticParams, MisfitPotential};
pub use spectral::SpectralField2D;
pub use symbols::SymbolContext;
