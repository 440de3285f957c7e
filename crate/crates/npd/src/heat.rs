//! Exact heat-flow baseline: the same initial data evolved by the linear
//! heat equation, evaluated by the exact Fourier propagator. Difference
//! norms against the coupled dynamics quantify how much the nonlinear
//! electromigration and advection actually change the decay.

use std::f64::consts::PI;

use crate::error::Error;
use crate::grid::{same_grid, SpectralField};
use crate::model::NpdState;
use crate::Result;

/// Stored initial spectra plus the diffusivity; evaluation at any `t` is a
/// diagonal multiplier, exact to roundoff, so the baseline is computed on
/// demand instead of co-stepped.
#[derive(Debug, Clone)]
pub struct HeatBaseline {
    initial: Vec<SpectralField>,
    diffusivity: f64,
}

impl HeatBaseline {
    /// Capture the initial data of a run (bitwise).
    pub fn new(state: &NpdState) -> Self {
        Self {
            initial: state.concentrations().to_vec(),
            diffusivity: state.params().diffusivity(),
        }
    }

    pub fn from_parts(initial: Vec<SpectralField>, diffusivity: f64) -> Self {
        Self {
            initial,
            diffusivity,
        }
    }

    pub fn initial(&self) -> &[SpectralField] {
        &self.initial
    }

    pub fn diffusivity(&self) -> f64 {
        self.diffusivity
    }

    /// Heat flow of every species to time `t`:
    /// `c_hat(k, t) = c_hat(k, 0) exp(-4 pi^2 D |k|^2 t / L^2)`.
    pub fn heat_evolve(&self, t: f64) -> Result<Vec<SpectralField>> {
        if t < 0.0 || !t.is_finite() {
            return Err(Error::InvalidState(format!(
                "heat evolution time must be finite and nonnegative, got {t}"
            )));
        }
        let out = self
            .initial
            .iter()
            .map(|c| {
                let l = c.grid().box_length();
                let rate = 4.0 * PI * PI * self.diffusivity * t / (l * l);
                let mut evolved = c.clone();
                evolved.scale_by(|kx, ky, kz| {
                    let k2 = (kx * kx + ky * ky + kz * kz) as f64;
                    ((-rate * k2).exp()).into()
                });
                evolved
            })
            .collect();
        Ok(out)
    }
}

/// Difference norms `||Lambda^k (c_i - heat_i(t))||_2^2` for `k = 0..=k_max`
/// (at most 3), per species, via Parseval.
pub fn sharpness_norms(
    state: &NpdState,
    baseline: &HeatBaseline,
    k_max: usize,
) -> Result<Vec<Vec<f64>>> {
    if k_max > 3 {
        return Err(Error::InvalidState(format!(
            "sharpness k_max {k_max} exceeds the supported maximum 3"
        )));
    }
    if baseline.initial.len() != state.species_count() {
        return Err(Error::GridMismatch(format!(
            "baseline has {} species, state has {}",
            baseline.initial.len(),
            state.species_count()
        )));
    }
    for c in baseline.initial.iter() {
        same_grid(c.grid(), state.grid())?;
    }
    let evolved = baseline.heat_evolve(state.time())?;
    let grid = *state.grid();
    let l = grid.box_length();
    let mut out = Vec::with_capacity(state.species_count());
    for (c, heat) in state.concentrations().iter().zip(evolved.iter()) {
        let mut norms = vec![0.0; k_max + 1];
        for ((i, j, m), v) in c.coeffs().indexed_iter() {
            let diff = (v - heat.coeffs()[[i, j, m]]).norm_sqr();
            let kx = grid.wavenumber(i) as f64;
            let ky = grid.wavenumber(j) as f64;
            let kz = grid.wavenumber(m) as f64;
            let lambda_sq = (2.0 * PI / l).powi(2) * (kx * kx + ky * ky + kz * kz);
            let mut weight = 1.0;
            for norm in norms.iter_mut() {
                *norm += weight * diff;
                weight *= lambda_sq;
            }
        }
        for norm in norms.iter_mut() {
            *norm *= grid.volume();
        }
        out.push(norms);
    }
    Ok(out)
}
