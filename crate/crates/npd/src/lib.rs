//! Pseudo-spectral solver for ionic electrodiffusion through a porous
//! medium: N ionic species drift-diffusing in a Darcy flow, coupled to the
//! electric potential they generate. The box is periodic and large, standing
//! in for free space, and the crate's focus is the long-time behaviour of
//! solutions: Sobolev-norm decay, comparison against the free heat flow,
//! entropy growth, and the exact energy identities the system satisfies.
//!
//! The governing system for concentrations `c_i` with valences `z_i` and
//! common diffusivity `D` is
//!
//! ```text
//! dc_i/dt + u.grad(c_i) = D div(grad(c_i) + z_i c_i grad(phi))
//! u = -P(rho grad(phi)),    -laplace(phi) = rho,    rho = sum_i z_i c_i
//! ```
//!
//! where `P` is the projection onto divergence-free fields (Darcy velocity
//! with the pressure gradient eliminated).
//!
//! # Layout
//!
//! - [`grid`] - periodic box, real/spectral fields, forward/inverse transforms
//! - [`operators`] - Fourier multipliers: fractional Laplacian, gradient,
//!   Poisson inverse, divergence-free projection, dealiasing
//! - [`model`] - charge density, potential, Darcy velocity, species tendencies
//! - [`integrator`] - integrating-factor RK4 with exact diffusion
//! - [`heat`] - exact heat-flow baseline and difference norms
//! - [`diagnostics`] - norms, entropies, moments, identity residuals
//! - [`rates`] - power-law / log-law fitting and verdicts
//! - [`config`], [`series`], [`checkpoint`], [`report`], [`commands`] - run
//!   configuration, CSV time series, binary restarts, reports, and the
//!   orchestration behind the `npd` binary
//!
//! # Examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run --release --example spectral_toolbox
//! cargo run --release --example electrodiffusion_fields
//! cargo run --release --example decay_rates
//! cargo run --release --example heat_comparison
//! cargo run --release --example entropy_growth
//! cargo run --release --example convergence_order
//! cargo run --release --example checkpoint_restart
//! ```
//!
//! The `npd` binary drives full runs from TOML configs:
//!
//! ```bash
//! npd run --config configs/dipole_small.toml --out out/
//! npd fit --series out/series.csv
//! ```

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod fft;
pub mod grid;
pub mod heat;
pub mod integrator;
pub mod model;
pub mod operators;
pub mod rates;
pub mod report;
pub mod series;

pub use error::Error;
pub use grid::{GridSpec, RealField, SpectralField};
pub use model::{DerivedFields, NpdState, SpeciesParams};

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;
