//! Fourier multiplier operators on spectral fields.
//!
//! All operators act mode-by-mode on the integer wavevector `k`, with the
//! continuum frequency `xi = k/L`:
//!
//! - fractional Laplacian powers: multiplier `(2 pi |k| / L)^s`
//! - gradient / divergence: multiplier `2 pi i k_j / L`
//! - Poisson inverse for `-laplace(phi) = rho`: multiplier `L^2 / (4 pi^2 |k|^2)`
//! - divergence-free (Leray) projection: `I - k k^T / |k|^2`
//! - dealiasing: zero every mode with `|k_j|` above the grid's cutoff

use std::f64::consts::PI;

use ndrustfft::Complex;

use crate::error::Error;
use crate::grid::{same_grid, SpectralField};
use crate::Result;

/// Relative tolerance on the zero mode for operators requiring mean-zero
/// input.
pub const MEAN_ZERO_TOL: f64 = 1e-12;

fn check_mean_zero(f: &SpectralField, context: &'static str) -> Result<()> {
    let mean = f.mean().norm();
    let scale = f.max_coeff().max(f64::MIN_POSITIVE);
    if mean > MEAN_ZERO_TOL * scale {
        return Err(Error::MeanZeroViolation {
            context,
            mean,
            tol: MEAN_ZERO_TOL * scale,
        });
    }
    Ok(())
}

/// Apply `Lambda^s = (-laplace)^{s/2}`.
///
/// `s = 0` is the identity. For `s < 0` the field must be mean-zero; the
/// zero mode is annihilated in that case (legitimate because mean-zero is
/// enforced), and multiplied by zero for `s > 0`.
pub fn apply_lambda(f: &SpectralField, s: f64) -> Result<SpectralField> {
    if s == 0.0 {
        return Ok(f.clone());
    }
    if s < 0.0 {
        check_mean_zero(f, "apply_lambda with negative exponent")?;
    }
    let l = f.grid().box_length();
    let mut out = f.clone();
    out.scale_by(|kx, ky, kz| {
        let k2 = (kx * kx + ky * ky + kz * kz) as f64;
        if k2 == 0.0 {
            Complex::new(0.0, 0.0)
        } else {
            Complex::new((2.0 * PI * k2.sqrt() / l).powf(s), 0.0)
        }
    });
    Ok(out)
}

/// Spectral gradient: component `j` carries the multiplier `2 pi i k_j / L`.
pub fn gradient(f: &SpectralField) -> [SpectralField; 3] {
    let l = f.grid().box_length();
    let make = |axis: usize| {
        let mut out = f.clone();
        out.scale_by(|kx, ky, kz| {
            let k = [kx, ky, kz][axis] as f64;
            Complex::new(0.0, 2.0 * PI * k / l)
        });
        out
    };
    [make(0), make(1), make(2)]
}

/// Spectral divergence of a vector field.
pub fn divergence(v: &[SpectralField; 3]) -> Result<SpectralField> {
    same_grid(v[0].grid(), v[1].grid())?;
    same_grid(v[0].grid(), v[2].grid())?;
    let grid = *v[0].grid();
    let l = grid.box_length();
    let mut out = SpectralField::zeros(grid);
    let two_pi_over_l = 2.0 * PI / l;
    {
        let coeffs = out.coeffs_mut();
        for ((i, j, m), c) in coeffs.indexed_iter_mut() {
            let kx = grid.wavenumber(i) as f64;
            let ky = grid.wavenumber(j) as f64;
            let kz = grid.wavenumber(m) as f64;
            let dot = v[0].coeffs()[[i, j, m]] * kx
                + v[1].coeffs()[[i, j, m]] * ky
                + v[2].coeffs()[[i, j, m]] * kz;
            *c = Complex::new(0.0, two_pi_over_l) * dot;
        }
    }
    Ok(out)
}

/// Solve `-laplace(phi) = rho` for mean-zero `rho`; the zero mode of `phi`
/// is set to zero.
pub fn solve_poisson(rho: &SpectralField) -> Result<SpectralField> {
    check_mean_zero(rho, "solve_poisson compatibility condition")?;
    let l = rho.grid().box_length();
    let mut out = rho.clone();
    let factor = l * l / (4.0 * PI * PI);
    out.scale_by(|kx, ky, kz| {
        let k2 = (kx * kx + ky * ky + kz * kz) as f64;
        if k2 == 0.0 {
            Complex::new(0.0, 0.0)
        } else {
            Complex::new(factor / k2, 0.0)
        }
    });
    Ok(out)
}

/// Project onto divergence-free fields: `v - k (k.v) / |k|^2` per mode.
/// The zero mode (a constant vector field, trivially divergence-free) is
/// left unchanged.
pub fn leray_project(v: &[SpectralField; 3]) -> Result<[SpectralField; 3]> {
    same_grid(v[0].grid(), v[1].grid())?;
    same_grid(v[0].grid(), v[2].grid())?;
    let grid = *v[0].grid();
    let mut out = [v[0].clone(), v[1].clone(), v[2].clone()];
    let n = grid.resolution();
    for i in 0..n {
        let kx = grid.wavenumber(i) as f64;
        for j in 0..n {
            let ky = grid.wavenumber(j) as f64;
            for m in 0..n {
                let kz = grid.wavenumber(m) as f64;
                let k2 = kx * kx + ky * ky + kz * kz;
                if k2 == 0.0 {
                    continue;
                }
                let dot = out[0].coeffs()[[i, j, m]] * kx
                    + out[1].coeffs()[[i, j, m]] * ky
                    + out[2].coeffs()[[i, j, m]] * kz;
                let scale = dot / k2;
                out[0].coeffs_mut()[[i, j, m]] -= scale * kx;
                out[1].coeffs_mut()[[i, j, m]] -= scale * ky;
                out[2].coeffs_mut()[[i, j, m]] -= scale * kz;
            }
        }
    }
    Ok(out)
}

/// Zero every mode with any `|k_j|` beyond the grid's dealiasing cutoff.
/// Idempotent.
pub fn dealias(f: &SpectralField) -> SpectralField {
    let mut out = f.clone();
    dealias_in_place(&mut out);
    out
}

/// In-place variant of [`dealias`].
pub fn dealias_in_place(f: &mut SpectralField) {
    let cutoff = f.grid().dealias_cutoff();
    f.scale_by(|kx, ky, kz| {
        if kx.abs() > cutoff || ky.abs() > cutoff || kz.abs() > cutoff {
            Complex::new(0.0, 0.0)
        } else {
            Complex::new(1.0, 0.0)
        }
    });
}
