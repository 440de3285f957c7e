//! Measurements: Sobolev and L^p norms, entropies, moments, pointwise
//! Fourier-shell bounds, elliptic-estimate ratios, exact-identity residuals,
//! and the per-record bundle of all of them.

use ndarray::Array3;

use crate::error::Error;
use crate::grid::{GridSpec, RealField, SpectralField};
use crate::heat::HeatBaseline;
use crate::model::{NpdState, RhsBundle};
use crate::Result;

use std::f64::consts::PI;

/// Relative floor below which the entropy integrand is taken as zero:
/// `x log x -> 0` as `x -> 0+`, so truncating at `1e-30 max(c)` changes the
/// integral by a negligible amount while avoiding log of zero.
pub const ENTROPY_FLOOR_REL: f64 = 1e-30;

/// Squared Sobolev seminorm `||Lambda^k c||_2^2` by Parseval:
/// `L^3 sum (2 pi |k| / L)^{2k} |c_hat(k)|^2`.
///
/// Negative `k` requires a mean-zero field.
pub fn sobolev_norm_sq(c: &SpectralField, k: f64) -> Result<f64> {
    if k < 0.0 {
        let mean = c.mean().norm();
        let scale = c.max_coeff().max(f64::MIN_POSITIVE);
        if mean > 1e-12 * scale {
            return Err(Error::MeanZeroViolation {
                context: "sobolev_norm_sq with negative order",
                mean,
                tol: 1e-12 * scale,
            });
        }
    }
    let grid = *c.grid();
    let l = grid.box_length();
    let mut sum = 0.0;
    for ((i, j, m), v) in c.coeffs().indexed_iter() {
        let kx = grid.wavenumber(i) as f64;
        let ky = grid.wavenumber(j) as f64;
        let kz = grid.wavenumber(m) as f64;
        let k2 = kx * kx + ky * ky + kz * kz;
        let weight = if k2 == 0.0 {
            if k == 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            (2.0 * PI * k2.sqrt() / l).powf(2.0 * k)
        };
        sum += weight * v.norm_sqr();
    }
    Ok(sum * grid.volume())
}

fn lp_norm_raw(data: &Array3<f64>, cell: f64, p: f64) -> Result<f64> {
    if p == f64::INFINITY {
        return Ok(data.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    }
    let supported = [1.0, 2.0, 3.0, 4.0, 6.0];
    if !supported.contains(&p) {
        return Err(Error::UnsupportedExponent(p));
    }
    let sum: f64 = match p as u32 {
        1 => data.iter().map(|v| v.abs()).sum(),
        2 => data.iter().map(|v| v * v).sum(),
        3 => data.iter().map(|v| v.abs().powi(3)).sum(),
        4 => data.iter().map(|v| v.powi(4)).sum(),
        6 => data.iter().map(|v| v.powi(6)).sum(),
        _ => unreachable!(),
    };
    Ok((sum * cell).powf(1.0 / p))
}

/// Quadrature L^p norm, `p` in {1, 2, 3, 4, 6, inf}.
pub fn lp_norm(c: &RealField, p: f64) -> Result<f64> {
    lp_norm_raw(c.data(), c.grid().cell_volume(), p)
}

fn region_mask(grid: GridSpec, radius: Option<f64>) -> impl Fn(usize, usize, usize) -> bool {
    let half = 0.5 * grid.box_length();
    move |i, j, k| match radius {
        None => true,
        Some(a) => {
            let dx = grid.min_image(grid.coordinate(i) - half);
            let dy = grid.min_image(grid.coordinate(j) - half);
            let dz = grid.min_image(grid.coordinate(k) - half);
            dx * dx + dy * dy + dz * dz <= a * a
        }
    }
}

/// Relative entropy `integral c log c` over the box, or over the ball
/// `|x - center| <= region_radius` (minimum-image distance).
///
/// The integrand is taken as zero where `c` is below `1e-30 max(c)`.
/// Samples below `-negativity_tol` are an error: the state left the domain
/// where the entropy diagnostics make sense.
pub fn entropy(c: &RealField, region_radius: Option<f64>, negativity_tol: f64) -> Result<f64> {
    let min = c.min();
    if min < -negativity_tol {
        return Err(Error::InvalidState(format!(
            "entropy input has min {min:.3e} below -{negativity_tol:.3e}"
        )));
    }
    let max = c.max();
    if max <= 0.0 {
        return Ok(0.0);
    }
    let floor = ENTROPY_FLOOR_REL * max;
    let grid = *c.grid();
    let inside = region_mask(grid, region_radius);
    let mut sum = 0.0;
    for ((i, j, k), &v) in c.data().indexed_iter() {
        if v > floor && inside(i, j, k) {
            sum += v * v.ln();
        }
    }
    Ok(sum * grid.cell_volume())
}

/// Exponential entropy `exp(-2 E / (3 ||c||_1))`; errors on zero mass.
pub fn exp_entropy(c: &RealField, negativity_tol: f64) -> Result<f64> {
    let mass = lp_norm(c, 1.0)?;
    if mass <= 0.0 {
        return Err(Error::ZeroMass);
    }
    let e = entropy(c, None, negativity_tol)?;
    Ok((-2.0 * e / (3.0 * mass)).exp())
}

/// Sixth-order moment `integral r^6 c^2` with `r` the minimum-image distance
/// to the box center.
pub fn moment6(c: &RealField) -> f64 {
    let grid = *c.grid();
    let half = 0.5 * grid.box_length();
    let n = grid.resolution();
    // Per-axis squared distances, precomputed.
    let d2: Vec<f64> = (0..n)
        .map(|i| {
            let d = grid.min_image(grid.coordinate(i) - half);
            d * d
        })
        .collect();
    let mut sum = 0.0;
    for ((i, j, k), &v) in c.data().indexed_iter() {
        let r2 = d2[i] + d2[j] + d2[k];
        sum += r2.powi(3) * v * v;
    }
    sum * grid.cell_volume()
}

/// Residuals of the two exact energy identities, normalised by the sum of
/// the absolute values of their terms.
///
/// `r_energy`: `<d_t rho, Lambda^-2 rho> + D ||rho||_2^2
///             + D z^2 ||sqrt(sigma) grad phi||_2^2 + ||u||_2^2 = 0`
/// `r_l2`: `(1/2) d/dt (||rho||^2 + z^2 ||sigma||^2) + D ||grad rho||^2
///             + D z^2 ||grad sigma||^2 + D z^2 ||rho sqrt(sigma)||^2 = 0`
///
/// The square roots are formed with `sigma` clamped below at zero; spectral
/// roundoff can push `sigma` marginally negative and the clamp keeps the
/// diagnostics defined without touching the dynamics.
pub fn identity_residuals(state: &NpdState, bundle: &RhsBundle) -> (f64, f64) {
    let grid = *state.grid();
    let vol = grid.volume();
    let cell = grid.cell_volume();
    let d = state.params().diffusivity();
    let z = state.params().z();

    // d_t rho and d_t sigma from the species tendencies.
    let mut drho = SpectralField::zeros(grid);
    let mut dsigma = SpectralField::zeros(grid);
    for (t, &zi) in bundle
        .tendencies
        .iter()
        .zip(state.params().valences().iter())
    {
        for ((r, s), x) in drho
            .coeffs_mut()
            .iter_mut()
            .zip(dsigma.coeffs_mut().iter_mut())
            .zip(t.coeffs().iter())
        {
            *r += zi * x;
            *s += x;
        }
    }

    let spectral_inner = |a: &SpectralField, b: &SpectralField| -> f64 {
        a.coeffs()
            .iter()
            .zip(b.coeffs().iter())
            .map(|(x, y)| (x * y.conj()).re)
            .sum::<f64>()
            * vol
    };

    // Energy identity. Lambda^-2 rho is exactly phi.
    let t1 = spectral_inner(&drho, &bundle.derived.phi);
    let t2 = d * bundle.derived.rho.l2_norm_sq();
    let mut t3 = 0.0;
    for axis in 0..3 {
        for (&s, &g) in bundle
            .physical
            .sigma
            .iter()
            .zip(bundle.physical.grad_phi[axis].iter())
        {
            t3 += s.max(0.0) * g * g;
        }
    }
    t3 *= d * z * z * cell;
    let t4: f64 = bundle.derived.u.iter().map(|c| c.l2_norm_sq()).sum();
    let norm_energy = t1.abs() + t2.abs() + t3.abs() + t4.abs();
    let r_energy = if norm_energy == 0.0 {
        0.0
    } else {
        (t1 + t2 + t3 + t4).abs() / norm_energy
    };

    // L^2 identity.
    let s1 = spectral_inner(&drho, &bundle.derived.rho)
        + z * z * spectral_inner(&dsigma, &bundle.derived.sigma);
    let s2 = d * sobolev_norm_sq(&bundle.derived.rho, 1.0).unwrap_or(f64::NAN);
    let s3 = d * z * z * sobolev_norm_sq(&bundle.derived.sigma, 1.0).unwrap_or(f64::NAN);
    let mut s4 = 0.0;
    for (&r, &s) in bundle.physical.rho.iter().zip(bundle.physical.sigma.iter()) {
        s4 += r * r * s.max(0.0);
    }
    s4 *= d * z * z * cell;
    let norm_l2 = s1.abs() + s2.abs() + s3.abs() + s4.abs();
    let r_l2 = if norm_l2 == 0.0 {
        0.0
    } else {
        (s1 + s2 + s3 + s4).abs() / norm_l2
    };

    (r_energy, r_l2)
}

/// Worst ratio of `|sigma_hat(xi, t)|` against the calibrated bound
/// `C (||sigma_0||_1 + |xi| sqrt(t))`, over all modes. The continuum-scale
/// transform is `L^3` times the stored coefficients. A run satisfies the
/// bound while the returned ratio stays at or below one.
pub fn shell_bound_check(sigma_hat: &SpectralField, t: f64, c_const: f64, sigma0_l1: f64) -> f64 {
    let grid = *sigma_hat.grid();
    let l = grid.box_length();
    let vol = grid.volume();
    let sqrt_t = t.max(0.0).sqrt();
    let mut worst = 0.0f64;
    for ((i, j, m), v) in sigma_hat.coeffs().indexed_iter() {
        let kx = grid.wavenumber(i) as f64;
        let ky = grid.wavenumber(j) as f64;
        let kz = grid.wavenumber(m) as f64;
        let xi = (kx * kx + ky * ky + kz * kz).sqrt() / l;
        let bound = c_const * (sigma0_l1 + xi * sqrt_t);
        worst = worst.max(v.norm() * vol / bound);
    }
    worst
}

/// The four elliptic-estimate ratios for the potential of a mean-zero
/// charge density:
///
/// 1. `||grad phi||_2 / (||rho||_1^{2/3} ||rho||_2^{1/3})`
/// 2. `||grad phi||_6 / ||rho||_2`
/// 3. `||grad phi||_inf / (||grad phi||_2^{1/4} ||rho||_2^{3/4} + ||rho||_4)`
/// 4. `||grad phi||_inf / (||rho||_2 + ||grad rho||_2)`
///
/// Vector L^p norms use the pointwise Euclidean magnitude. A zero charge
/// density reports all ratios as zero.
pub fn elliptic_ratios(rho: &SpectralField) -> Result<[f64; 4]> {
    if rho.max_coeff() == 0.0 {
        return Ok([0.0; 4]);
    }
    let grid = *rho.grid();
    let cell = grid.cell_volume();
    let phi = crate::operators::solve_poisson(rho)?;
    let grad_phi_hat = crate::operators::gradient(&phi);
    let (g0, g1) = crate::fft::inverse_real_pair(grad_phi_hat[0].coeffs(), grad_phi_hat[1].coeffs());
    let (g2, rho_phys) = crate::fft::inverse_real_pair(grad_phi_hat[2].coeffs(), rho.coeffs());

    let mut gp_mag = Array3::zeros(g0.dim());
    for (((out, &a), &b), &c) in gp_mag.iter_mut().zip(g0.iter()).zip(g1.iter()).zip(g2.iter()) {
        *out = (a * a + b * b + c * c).sqrt();
    }

    let gp_l2 = lp_norm_raw(&gp_mag, cell, 2.0)?;
    let gp_l6 = lp_norm_raw(&gp_mag, cell, 6.0)?;
    let gp_inf = lp_norm_raw(&gp_mag, cell, f64::INFINITY)?;
    let rho_l1 = lp_norm_raw(&rho_phys, cell, 1.0)?;
    let rho_l2 = lp_norm_raw(&rho_phys, cell, 2.0)?;
    let rho_l4 = lp_norm_raw(&rho_phys, cell, 4.0)?;
    let grad_rho_l2 = sobolev_norm_sq(rho, 1.0)?.sqrt();

    Ok([
        gp_l2 / (rho_l1.powf(2.0 / 3.0) * rho_l2.powf(1.0 / 3.0)),
        gp_l6 / rho_l2,
        gp_inf / (gp_l2.powf(0.25) * rho_l2.powf(0.75) + rho_l4),
        gp_inf / (rho_l2 + grad_rho_l2),
    ])
}

/// Knobs for per-record measurement.
#[derive(Debug, Clone)]
pub struct DiagSettings {
    /// Highest Sobolev order tracked (`<= 3`).
    pub k_max: usize,
    /// Radius of the local-entropy ball.
    pub local_radius: f64,
    /// Calibration constant of the Fourier-shell bound.
    pub shell_constant: f64,
    /// Absolute negativity floor for entropy-type diagnostics.
    pub negativity_tol: f64,
    /// Whether the (relatively expensive) sixth moment is measured.
    pub moment_enabled: bool,
}

/// Per-run context the measurements need beyond the state itself.
pub struct DiagContext<'a> {
    pub settings: DiagSettings,
    pub baseline: Option<&'a HeatBaseline>,
    pub sigma0_l1: f64,
}

/// One timestamped row of all measured quantities.
#[derive(Debug, Clone)]
pub struct DiagRecord {
    pub t: f64,
    pub masses: Vec<f64>,
    pub charge_total: f64,
    /// `||c_i||_2^2` per species.
    pub l2sq: Vec<f64>,
    /// `||Lambda^k c_i||_2^2`, outer index `k - 1` for `k = 1..=k_max`.
    pub hksq: Vec<Vec<f64>>,
    /// `||sigma||_p` for p in {1, 2, 3, 4, 6}.
    pub lp_sigma: [f64; 5],
    pub rho_l2sq: f64,
    pub u_l2sq: f64,
    pub u_inf: f64,
    pub gradphi_l2: f64,
    pub gradphi_inf: f64,
    pub entropy: Vec<f64>,
    pub entropy_total: f64,
    pub exp_entropy: Vec<f64>,
    pub moment6: Vec<f64>,
    pub local_entropy: Vec<f64>,
    pub r_energy: f64,
    pub r_l2: f64,
    pub shell_ratio_max: f64,
    pub ell_ratios: [f64; 4],
    /// `||Lambda^k (c_i - heat_i)||_2^2`, outer index `k = 0..=k_max`;
    /// NaN-filled when no baseline is attached.
    pub sharp: Vec<Vec<f64>>,
    pub min_c: Vec<f64>,
}

/// Measure everything at once from a fresh right-hand-side evaluation.
pub fn measure(state: &NpdState, bundle: &RhsBundle, ctx: &DiagContext) -> Result<DiagRecord> {
    let n = state.species_count();
    let settings = &ctx.settings;
    if settings.k_max > 3 {
        return Err(Error::InvalidState(format!(
            "k_max {} exceeds the supported maximum 3",
            settings.k_max
        )));
    }
    let grid = *state.grid();
    let cell = grid.cell_volume();

    let masses: Vec<f64> = (0..n).map(|i| state.mass(i)).collect();
    let charge_total = state.total_charge();

    let l2sq: Vec<f64> = state.concentrations().iter().map(|c| c.l2_norm_sq()).collect();
    let mut hksq = Vec::with_capacity(settings.k_max);
    for k in 1..=settings.k_max {
        let row: Vec<f64> = state
            .concentrations()
            .iter()
            .map(|c| sobolev_norm_sq(c, k as f64))
            .collect::<Result<_>>()?;
        hksq.push(row);
    }

    let mut lp_sigma = [0.0; 5];
    for (slot, p) in lp_sigma.iter_mut().zip([1.0, 2.0, 3.0, 4.0, 6.0]) {
        *slot = lp_norm_raw(&bundle.physical.sigma, cell, p)?;
    }

    let rho_l2sq = bundle.derived.rho.l2_norm_sq();
    let u_l2sq: f64 = bundle.derived.u.iter().map(|c| c.l2_norm_sq()).sum();
    let u_inf = bundle.physical.u_inf();
    let gradphi_l2 = sobolev_norm_sq(&bundle.derived.phi, 1.0)?.sqrt();
    let gradphi_inf = bundle.physical.grad_phi_inf();

    let mut entropies = Vec::with_capacity(n);
    let mut exp_entropies = Vec::with_capacity(n);
    let mut local_entropies = Vec::with_capacity(n);
    let mut moments = Vec::with_capacity(n);
    let mut min_c = Vec::with_capacity(n);
    for c_phys in &bundle.physical.concentrations {
        let f = RealField::from_data(grid, c_phys.clone()).map_err(|_| {
            Error::InvalidState("non-finite concentration samples in diagnostics".into())
        })?;
        entropies.push(entropy(&f, None, settings.negativity_tol)?);
        exp_entropies.push(exp_entropy(&f, settings.negativity_tol)?);
        local_entropies.push(entropy(
            &f,
            Some(settings.local_radius),
            settings.negativity_tol,
        )?);
        moments.push(if settings.moment_enabled {
            moment6(&f)
        } else {
            f64::NAN
        });
        min_c.push(f.min());
    }
    let entropy_total = entropies.iter().sum();

    let (r_energy, r_l2) = identity_residuals(state, bundle);
    let shell_ratio_max = shell_bound_check(
        &bundle.derived.sigma,
        state.time(),
        settings.shell_constant,
        ctx.sigma0_l1,
    );
    let ell_ratios = elliptic_ratios(&bundle.derived.rho)?;

    let sharp = match ctx.baseline {
        Some(baseline) => crate::heat::sharpness_norms(state, baseline, settings.k_max)?,
        None => vec![vec![f64::NAN; settings.k_max + 1]; n],
    };

    Ok(DiagRecord {
        t: state.time(),
        masses,
        charge_total,
        l2sq,
        hksq,
        lp_sigma,
        rho_l2sq,
        u_l2sq,
        u_inf,
        gradphi_l2,
        gradphi_inf,
        entropy: entropies,
        entropy_total,
        exp_entropy: exp_entropies,
        moment6: moments,
        local_entropy: local_entropies,
        r_energy,
        r_l2,
        shell_ratio_max,
        ell_ratios,
        sharp,
        min_c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{forward_transform, GridSpec};
    use crate::model::{self, GaussianBump, SpeciesParams};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize, l: f64) -> GridSpec {
        GridSpec::with_default_dealiasing(l, n).unwrap()
    }

    fn centered_gaussian(g: GridSpec, mass: f64, s: f64) -> RealField {
        let l = g.box_length();
        let amp = mass / (2.0 * PI * s * s).powf(1.5);
        RealField::from_fn(g, |x, y, z| {
            let dx = g.min_image(x - 0.5 * l);
            let dy = g.min_image(y - 0.5 * l);
            let dz = g.min_image(z - 0.5 * l);
            amp * (-(dx * dx + dy * dy + dz * dz) / (2.0 * s * s)).exp()
        })
    }

    fn random_nonneg(g: GridSpec, seed: u64) -> RealField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RealField::from_fn(g, |_, _, _| rng.gen_range(0.0..1.0))
    }

    #[test]
    fn sobolev_zero_order_is_l2() {
        let g = grid(16, 5.0);
        let f = random_nonneg(g, 1);
        let c = forward_transform(&f).unwrap();
        let s0 = sobolev_norm_sq(&c, 0.0).unwrap();
        let l2 = lp_norm(&f, 2.0).unwrap();
        assert!(((s0 - l2 * l2) / s0).abs() < 1e-10);
    }

    #[test]
    fn sobolev_single_mode_closed_form() {
        // cos mode amplitude a at |k| = 1: ||Lambda^k c||^2
        //   = a^2 (2 pi / L)^{2k} L^3 / 2.
        let l = 5.0;
        let g = grid(16, l);
        let a = 0.7;
        let f = RealField::from_fn(g, |x, _, _| a * (2.0 * PI * x / l).cos());
        let c = forward_transform(&f).unwrap();
        for k in [0.0, 1.0, 2.0, 1.5] {
            let got = sobolev_norm_sq(&c, k).unwrap();
            let expected = a * a * (2.0 * PI / l).powf(2.0 * k) * l.powi(3) / 2.0;
            assert!(((got - expected) / expected).abs() < 1e-12, "k = {k}");
        }
    }

    #[test]
    fn sobolev_first_order_matches_gradient_route() {
        let g = grid(16, 3.0);
        let f = random_nonneg(g, 2);
        let c = forward_transform(&f).unwrap();
        let s1 = sobolev_norm_sq(&c, 1.0).unwrap();
        let grad = crate::operators::gradient(&c);
        let via_grad: f64 = grad.iter().map(|d| d.l2_norm_sq()).sum();
        assert!(((s1 - via_grad) / s1).abs() < 1e-10);
    }

    #[test]
    fn lp_norms_of_indicator_and_gaussian() {
        let g = grid(32, 20.0);
        let f = centered_gaussian(g, 5.0, 1.4);
        // ||c||_1 is the mass.
        let l1 = lp_norm(&f, 1.0).unwrap();
        assert!(((l1 - 5.0) / 5.0).abs() < 1e-8);
        // Gaussian L^4 closed form: for c = A exp(-r^2 / 2 s^2),
        // integral c^4 = A^4 (pi s^2 / 2)^{3/2}.
        let a = 5.0 / (2.0 * PI * 1.4 * 1.4).powf(1.5);
        let expected = (a.powi(4) * (PI * 1.4 * 1.4 / 2.0).powf(1.5)).powf(0.25);
        let l4 = lp_norm(&f, 4.0).unwrap();
        assert!(((l4 - expected) / expected).abs() < 1e-6);
        // Unsupported exponent errors.
        assert!(matches!(
            lp_norm(&f, 5.0),
            Err(Error::UnsupportedExponent(_))
        ));
    }

    #[test]
    fn lp_log_convexity() {
        // ||c||_2 <= ||c||_1^{1/4} ||c||_3^{3/4} on nonnegative fields.
        let g = grid(16, 4.0);
        for seed in 3..8 {
            let f = random_nonneg(g, seed);
            let l1 = lp_norm(&f, 1.0).unwrap();
            let l2 = lp_norm(&f, 2.0).unwrap();
            let l3 = lp_norm(&f, 3.0).unwrap();
            assert!(l2 <= l1.powf(0.25) * l3.powf(0.75) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn entropy_gaussian_closed_form() {
        // E = M log(M (2 pi s^2)^{-3/2}) - 3 M / 2.
        let g = grid(48, 24.0);
        let mass = 3.0;
        let s = 1.3;
        let f = centered_gaussian(g, mass, s);
        let got = entropy(&f, None, 0.0).unwrap();
        let expected = mass * (mass * (2.0 * PI * s * s).powf(-1.5)).ln() - 1.5 * mass;
        assert!(
            ((got - expected) / expected.abs()).abs() < 1e-6,
            "entropy {got:.8} vs {expected:.8}"
        );
        // Whole-box region radius reproduces the unrestricted value: with
        // radius L/2 the minimum-image ball is the whole box up to corners;
        // use a radius covering the diagonal.
        let whole = entropy(&f, Some(g.box_length()), 0.0).unwrap();
        assert!((whole - got).abs() <= 1e-12 * got.abs());
    }

    #[test]
    fn entropy_amplitude_scaling_identity() {
        // integral 2c log(2c) = 2 integral c log c + 2 M log 2.
        let g = grid(24, 12.0);
        let f = centered_gaussian(g, 1.7, 1.0);
        let mass = lp_norm(&f, 1.0).unwrap();
        let e1 = entropy(&f, None, 0.0).unwrap();
        let doubled = RealField::from_data(g, f.data().mapv(|v| 2.0 * v)).unwrap();
        let e2 = entropy(&doubled, None, 0.0).unwrap();
        let expected = 2.0 * e1 + 2.0 * mass * 2.0f64.ln();
        assert!(((e2 - expected) / expected.abs()).abs() < 1e-9);
    }

    #[test]
    fn entropy_of_unit_plateau_is_zero_there() {
        // c = 1 contributes 1 log 1 = 0; only the off-plateau cells count.
        let g = grid(16, 8.0);
        let f = RealField::from_fn(g, |x, _, _| if x < 4.0 { 1.0 } else { 0.0 });
        let e = entropy(&f, None, 0.0).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn entropy_negative_for_small_amplitude_fields() {
        // Nonnegative c with sup < 1: every term c log c <= 0.
        let g = grid(16, 4.0);
        let mut f = random_nonneg(g, 9);
        f.data_mut().mapv_inplace(|v| 0.49 * v);
        let e = entropy(&f, None, 0.0).unwrap();
        assert!(e < 0.0);
    }

    #[test]
    fn entropy_rejects_negative_fields() {
        let g = grid(16, 4.0);
        let f = RealField::from_fn(g, |x, _, _| if x < 2.0 { 1.0 } else { -1e-3 });
        assert!(entropy(&f, None, 1e-6).is_err());
        assert!(entropy(&f, None, 1e-2).is_ok());
    }

    #[test]
    fn jensen_bound_on_entropy() {
        // E_i <= ||c||_1 log(||c||_2^2 / ||c||_1) for nonnegative fields.
        let g = grid(16, 4.0);
        for seed in 10..15 {
            let f = random_nonneg(g, seed);
            let e = entropy(&f, None, 0.0).unwrap();
            let l1 = lp_norm(&f, 1.0).unwrap();
            let l2 = lp_norm(&f, 2.0).unwrap();
            let bound = l1 * (l2 * l2 / l1).ln();
            assert!(e <= bound + 1e-9, "e = {e}, bound = {bound}");
        }
    }

    #[test]
    fn exp_entropy_values() {
        // Entropy zero -> N = 1 (construct c = 1 on the whole box: E = 0).
        let g = grid(16, 4.0);
        let ones = RealField::from_fn(g, |_, _, _| 1.0);
        let n = exp_entropy(&ones, 0.0).unwrap();
        assert!((n - 1.0).abs() < 1e-12);
        // Gaussian case: composition of the entropy closed form.
        let g2 = grid(48, 24.0);
        let mass = 3.0;
        let s = 1.3;
        let f = centered_gaussian(g2, mass, s);
        let e = mass * (mass * (2.0 * PI * s * s).powf(-1.5)).ln() - 1.5 * mass;
        let expected = (-2.0 * e / (3.0 * mass)).exp();
        let got = exp_entropy(&f, 0.0).unwrap();
        assert!(((got - expected) / expected).abs() < 1e-6);
        // Zero mass errors.
        let zero = RealField::zeros(g);
        assert!(matches!(exp_entropy(&zero, 0.0), Err(Error::ZeroMass)));
    }

    #[test]
    fn moment6_gaussian_closed_form() {
        // integral r^6 c^2 = 105 M^2 s^3 / (64 pi^{3/2}) for a centered
        // Gaussian of mass M and width s.
        let g = grid(48, 30.0);
        let mass = 2.0;
        let s = 1.5;
        let f = centered_gaussian(g, mass, s);
        let got = moment6(&f);
        let expected = 105.0 * mass * mass * s.powi(3) / (64.0 * PI.powf(1.5));
        assert!(
            ((got - expected) / expected).abs() < 1e-5,
            "moment {got:.6e} vs {expected:.6e}"
        );
    }

    #[test]
    fn moment6_delta_bump_near_zero() {
        let g = grid(16, 8.0);
        let mut f = RealField::zeros(g);
        let n = g.resolution();
        f.data_mut()[[n / 2, n / 2, n / 2]] = 10.0;
        let got = moment6(&f);
        // Bounded by spacing^6 ||c||_2^2 (the bump sits at the center).
        let bound = g.spacing().powi(6) * lp_norm(&f, 2.0).unwrap().powi(2);
        assert!(got <= bound);
    }

    #[test]
    fn moment6_translation_monotone() {
        let g = grid(24, 16.0);
        let l = g.box_length();
        let mut last = -1.0;
        for step in 0..5 {
            let dshift = step as f64 * l / 16.0;
            let f = RealField::from_fn(g, |x, y, z| {
                let dx = g.min_image(x - 0.5 * l - dshift);
                let dy = g.min_image(y - 0.5 * l);
                let dz = g.min_image(z - 0.5 * l);
                (-(dx * dx + dy * dy + dz * dz) / 2.0).exp()
            });
            let m = moment6(&f);
            assert!(m > last, "moment should grow with displacement");
            last = m;
        }
    }

    #[test]
    fn residuals_trivial_for_neutral_states() {
        // Uniform neutral state: every term vanishes, residuals are zero.
        let g = grid(16, 4.0);
        let params = SpeciesParams::new(vec![1.0, -1.0], 1.0).unwrap();
        let c = forward_transform(&RealField::from_fn(g, |_, _, _| 0.3)).unwrap();
        let state = model::NpdState::new(0.0, vec![c.clone(), c], params).unwrap();
        let bundle = model::rhs_full(&state, false).unwrap();
        let (re, rl2) = identity_residuals(&state, &bundle);
        assert_eq!(re, 0.0);
        // The L2 identity keeps its sigma diffusion terms for a nonzero
        // sigma, but a uniform sigma has no gradients either.
        assert!(rl2 < 1e-12);
    }

    #[test]
    fn residuals_small_for_charged_dipole() {
        let g = grid(32, 16.0);
        let params = SpeciesParams::new(vec![1.0, -1.0], 1.0).unwrap();
        let bumps = vec![
            vec![GaussianBump {
                amplitude: 1.0,
                center: [7.0, 8.0, 8.0],
                width: 1.2,
            }],
            vec![GaussianBump {
                amplitude: 1.0,
                center: [9.0, 8.0, 8.0],
                width: 1.2,
            }],
        ];
        let (state, _) = model::make_initial_state(g, params, &bumps).unwrap();
        let bundle = model::rhs_full(&state, false).unwrap();
        let (re, rl2) = identity_residuals(&state, &bundle);
        assert!(re < 1e-6, "r_energy = {re:.3e}");
        assert!(rl2 < 1e-6, "r_l2 = {rl2:.3e}");
    }

    #[test]
    fn shell_bound_at_initial_time() {
        // |sigma_hat(xi, 0)| <= ||sigma_0||_1, so the worst ratio with C = 1
        // is exactly 1 at xi = 0 for nonnegative data.
        let g = grid(24, 16.0);
        let f = centered_gaussian(g, 4.0, 1.5);
        let c = forward_transform(&f).unwrap();
        let sigma0_l1 = lp_norm(&f, 1.0).unwrap();
        let ratio = shell_bound_check(&c, 0.0, 1.0, sigma0_l1);
        assert!((ratio - 1.0).abs() < 1e-10);
        let ratio_cal = shell_bound_check(&c, 0.0, 1.1, sigma0_l1);
        assert!(ratio_cal <= 1.0);
    }

    #[test]
    fn shell_ratio_nonincreasing_under_heat_flow() {
        let g = grid(24, 16.0);
        let f = centered_gaussian(g, 4.0, 1.5);
        let c = forward_transform(&f).unwrap();
        let sigma0_l1 = lp_norm(&f, 1.0).unwrap();
        let baseline = crate::heat::HeatBaseline::from_parts(vec![c], 1.0);
        let mut last = f64::INFINITY;
        for step in 0..5 {
            let t = step as f64 * 2.0;
            let evolved = baseline.heat_evolve(t).unwrap();
            let ratio = shell_bound_check(&evolved[0], t, 1.1, sigma0_l1);
            assert!(ratio <= last + 1e-12);
            last = ratio;
        }
    }

    #[test]
    fn elliptic_ratios_zero_charge() {
        let g = grid(16, 4.0);
        let rho = SpectralField::zeros(g);
        assert_eq!(elliptic_ratios(&rho).unwrap(), [0.0; 4]);
    }

    #[test]
    fn elliptic_ratio2_single_mode_closed_form() {
        // For rho = cos(2 pi x / L): grad phi = (L / 2 pi) sin(...) e_x, so
        // ratio2 = (sqrt(2) / 2 pi) (5/16)^{1/6}, independent of L.
        let l = 9.0;
        let g = grid(32, l);
        let f = RealField::from_fn(g, |x, _, _| (2.0 * PI * x / l).cos());
        let rho = forward_transform(&f).unwrap();
        let ratios = elliptic_ratios(&rho).unwrap();
        let expected = (2.0f64.sqrt() / (2.0 * PI)) * (5.0f64 / 16.0).powf(1.0 / 6.0);
        assert!(
            ((ratios[1] - expected) / expected).abs() < 1e-10,
            "ratio2 = {:.12} vs {:.12}",
            ratios[1],
            expected
        );
        for r in ratios {
            assert!(r.is_finite() && r > 0.0);
        }
    }
}
