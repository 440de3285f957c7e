//! Model assembly: charge density, total concentration, electric potential,
//! Darcy velocity, and the full tendency of each ionic species.
//!
//! For species concentrations `c_i` with valences `z_i` and common
//! diffusivity `D`:
//!
//! ```text
//! rho = sum_i z_i c_i          -laplace(phi) = rho
//! u   = -P(rho grad(phi))      (P = divergence-free projection)
//! dc_i/dt = D laplace(c_i) + div(c_i (z_i D grad(phi) - u))
//! ```
//!
//! Both nonlinear products (advective flux and electromigration flux) are
//! formed pseudo-spectrally and dealiased. Writing the whole nonlinearity in
//! flux form makes the zero mode of every tendency vanish identically, so
//! species masses and total charge are conserved to roundoff by
//! construction.

use ndarray::Array3;
use ndrustfft::Complex;
use std::f64::consts::PI;

use crate::diagnostics;
use crate::error::Error;
use crate::fft;
use crate::grid::{forward_transform, same_grid, GridSpec, RealField, SpectralField};
use crate::operators::{dealias_in_place, gradient, leray_project, solve_poisson, MEAN_ZERO_TOL};
use crate::Result;

/// Valences and the common diffusivity of the ionic species.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesParams {
    valences: Vec<f64>,
    diffusivity: f64,
}

impl SpeciesParams {
    /// Validates `D > 0` and at least one species. Equal-magnitude valences
    /// are checked separately via [`SpeciesParams::check_equal_valences`]
    /// because configs may override that gate.
    pub fn new(valences: Vec<f64>, diffusivity: f64) -> Result<Self> {
        if valences.is_empty() {
            return Err(Error::Config {
                path: "species".into(),
                message: "at least one species is required".into(),
            });
        }
        if !(diffusivity > 0.0) || !diffusivity.is_finite() {
            return Err(Error::Config {
                path: "physics.diffusivity".into(),
                message: format!("must be positive and finite, got {diffusivity}"),
            });
        }
        if !valences.iter().all(|z| z.is_finite()) {
            return Err(Error::Config {
                path: "species.valence".into(),
                message: "valences must be finite".into(),
            });
        }
        Ok(Self {
            valences,
            diffusivity,
        })
    }

    /// The analysis behind the diagnostics assumes `|z_1| = ... = |z_N|`;
    /// reject unequal magnitudes unless the caller explicitly allows them.
    pub fn check_equal_valences(&self, allow_unequal: bool) -> Result<()> {
        if allow_unequal {
            return Ok(());
        }
        let z0 = self.valences[0].abs();
        for (i, z) in self.valences.iter().enumerate() {
            if (z.abs() - z0).abs() > 1e-12 * z0.max(1.0) {
                return Err(Error::Config {
                    path: format!("species[{i}].valence"),
                    message: format!(
                        "|z| must be equal across species (got |{}| vs |{}|); \
                         set allow_unequal_valences to override",
                        z, self.valences[0]
                    ),
                });
            }
        }
        Ok(())
    }

    pub fn species_count(&self) -> usize {
        self.valences.len()
    }

    pub fn valences(&self) -> &[f64] {
        &self.valences
    }

    pub fn valence(&self, i: usize) -> f64 {
        self.valences[i]
    }

    pub fn diffusivity(&self) -> f64 {
        self.diffusivity
    }

    /// Common valence magnitude `z` used in the exact identities.
    pub fn z(&self) -> f64 {
        self.valences.iter().fold(0.0f64, |a, z| a.max(z.abs()))
    }
}

/// The N concentration fields plus species parameters at one time instant.
#[derive(Debug, Clone)]
pub struct NpdState {
    time: f64,
    concentrations: Vec<SpectralField>,
    params: SpeciesParams,
}

impl NpdState {
    pub fn new(time: f64, concentrations: Vec<SpectralField>, params: SpeciesParams) -> Result<Self> {
        if concentrations.len() != params.species_count() {
            return Err(Error::InvalidState(format!(
                "{} concentration fields for {} species",
                concentrations.len(),
                params.species_count()
            )));
        }
        for pair in concentrations.windows(2) {
            same_grid(pair[0].grid(), pair[1].grid())?;
        }
        Ok(Self {
            time,
            concentrations,
            params,
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    pub fn grid(&self) -> &GridSpec {
        self.concentrations[0].grid()
    }

    pub fn species_count(&self) -> usize {
        self.params.species_count()
    }

    pub fn params(&self) -> &SpeciesParams {
        &self.params
    }

    pub fn concentrations(&self) -> &[SpectralField] {
        &self.concentrations
    }

    pub fn concentrations_mut(&mut self) -> &mut [SpectralField] {
        &mut self.concentrations
    }

    /// Mass of species `i`, read off the zero mode.
    pub fn mass(&self, i: usize) -> f64 {
        self.concentrations[i].integral()
    }

    /// Total charge `integral rho`.
    pub fn total_charge(&self) -> f64 {
        self.concentrations
            .iter()
            .zip(self.params.valences.iter())
            .map(|(c, z)| z * c.integral())
            .sum()
    }

    /// True when every coefficient of every species is finite.
    pub fn is_finite(&self) -> bool {
        self.concentrations.iter().all(|c| c.is_finite())
    }
}

/// Spectral fields derived from a state: charge density, total
/// concentration, potential, velocity, and optionally the pressure.
#[derive(Debug, Clone)]
pub struct DerivedFields {
    pub rho: SpectralField,
    pub sigma: SpectralField,
    pub phi: SpectralField,
    pub u: [SpectralField; 3],
    pub pressure: Option<SpectralField>,
}

/// Physical-space companions produced while assembling the tendencies.
/// Reused by the diagnostics so record-time measurements cost no extra
/// transforms beyond the tendency evaluation itself.
#[derive(Debug, Clone)]
pub struct DerivedPhysical {
    pub rho: Array3<f64>,
    pub sigma: Array3<f64>,
    pub grad_phi: [Array3<f64>; 3],
    pub u: [Array3<f64>; 3],
    pub concentrations: Vec<Array3<f64>>,
}

impl DerivedPhysical {
    /// Sup of the pointwise velocity magnitude.
    pub fn u_inf(&self) -> f64 {
        vector_sup(&self.u)
    }

    /// Sup of the pointwise potential-gradient magnitude.
    pub fn grad_phi_inf(&self) -> f64 {
        vector_sup(&self.grad_phi)
    }

    /// Minimum grid value of species `i`.
    pub fn min_c(&self, i: usize) -> f64 {
        self.concentrations[i]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

fn vector_sup(v: &[Array3<f64>; 3]) -> f64 {
    let mut sup = 0.0f64;
    for ((a, b), c) in v[0].iter().zip(v[1].iter()).zip(v[2].iter()) {
        sup = sup.max((a * a + b * b + c * c).sqrt());
    }
    sup
}

/// Tendencies plus every intermediate field of one right-hand-side
/// evaluation.
#[derive(Debug, Clone)]
pub struct RhsBundle {
    /// Full tendencies `D laplace(c_i) + div(flux_i)`.
    pub tendencies: Vec<SpectralField>,
    /// Flux divergences alone, the part the integrating-factor scheme
    /// advances explicitly (diffusion is applied exactly by multiplier).
    pub nonlinear: Vec<SpectralField>,
    pub derived: DerivedFields,
    pub physical: DerivedPhysical,
}

fn charge_and_total(state: &NpdState) -> (SpectralField, SpectralField) {
    let grid = *state.grid();
    let mut rho = SpectralField::zeros(grid);
    let mut sigma = SpectralField::zeros(grid);
    for (c, &z) in state.concentrations.iter().zip(state.params.valences.iter()) {
        for ((r, s), x) in rho
            .coeffs_mut()
            .iter_mut()
            .zip(sigma.coeffs_mut().iter_mut())
            .zip(c.coeffs().iter())
        {
            *r += z * x;
            *s += x;
        }
    }
    (rho, sigma)
}

fn check_compatibility(rho: &SpectralField, sigma: &SpectralField) -> Result<()> {
    let charge = rho.mean().norm();
    let scale = sigma.mean().re.abs().max(rho.max_coeff()).max(f64::MIN_POSITIVE);
    if charge > MEAN_ZERO_TOL * scale {
        return Err(Error::Compatibility(format!(
            "integral of rho = {:.3e} relative to total mass scale {:.3e}",
            charge * rho.grid().volume(),
            scale * rho.grid().volume()
        )));
    }
    Ok(())
}

/// Evaluate the full right-hand side together with all derived fields.
pub fn rhs_full(state: &NpdState, with_pressure: bool) -> Result<RhsBundle> {
    let grid = *state.grid();
    let n_species = state.species_count();
    let d = state.params.diffusivity();
    let l = grid.box_length();

    let (rho, sigma) = charge_and_total(state);
    check_compatibility(&rho, &sigma)?;

    let phi = solve_poisson(&rho)?;
    let grad_phi_hat = gradient(&phi);

    // Physical space: grad(phi) paired with rho, two packed inverses.
    let (gp0, gp1) = fft::inverse_real_pair(grad_phi_hat[0].coeffs(), grad_phi_hat[1].coeffs());
    let (gp2, rho_phys) = fft::inverse_real_pair(grad_phi_hat[2].coeffs(), rho.coeffs());
    let grad_phi_phys = [gp0, gp1, gp2];

    // Electric forcing rho grad(phi), forward, dealiased, projected.
    let w = [
        &rho_phys * &grad_phi_phys[0],
        &rho_phys * &grad_phi_phys[1],
        &rho_phys * &grad_phi_phys[2],
    ];
    let (w0h, w1h) = fft::forward_real_pair(&w[0], &w[1]);
    let w2h = fft::forward_real(&w[2]);
    let mut w_hat = [
        SpectralField::from_coeffs(grid, w0h)?,
        SpectralField::from_coeffs(grid, w1h)?,
        SpectralField::from_coeffs(grid, w2h)?,
    ];
    for c in w_hat.iter_mut() {
        dealias_in_place(c);
    }
    let pressure = if with_pressure {
        // Darcy: u + grad(p) = -rho grad(phi), div u = 0, hence
        // -laplace(p) = div(rho grad(phi)).
        Some(solve_poisson(&crate::operators::divergence(&w_hat)?)?)
    } else {
        None
    };
    let mut u = leray_project(&w_hat)?;
    for comp in u.iter_mut() {
        for c in comp.coeffs_mut().iter_mut() {
            *c = -*c;
        }
    }

    // Physical space: velocity and concentrations, packed in pairs.
    let mut to_invert: Vec<&Array3<Complex<f64>>> =
        vec![u[0].coeffs(), u[1].coeffs(), u[2].coeffs()];
    for c in &state.concentrations {
        to_invert.push(c.coeffs());
    }
    let mut inverted: Vec<Array3<f64>> = Vec::with_capacity(to_invert.len());
    let mut iter = to_invert.chunks_exact(2);
    for pair in &mut iter {
        let (a, b) = fft::inverse_real_pair(pair[0], pair[1]);
        inverted.push(a);
        inverted.push(b);
    }
    if let [last] = iter.remainder() {
        inverted.push(fft::inverse_real(last));
    }
    let mut drain = inverted.into_iter();
    let u_phys = [
        drain.next().unwrap(),
        drain.next().unwrap(),
        drain.next().unwrap(),
    ];
    let c_phys: Vec<Array3<f64>> = drain.collect();

    let mut sigma_phys = c_phys[0].clone();
    for c in &c_phys[1..] {
        sigma_phys += c;
    }

    // Fluxes c_i (z_i D grad(phi) - u), all 3N components through packed
    // forward transforms.
    let mut flux_phys: Vec<Array3<f64>> = Vec::with_capacity(3 * n_species);
    for (i, c) in c_phys.iter().enumerate() {
        let zd = state.params.valence(i) * d;
        for axis in 0..3 {
            let mut f = Array3::zeros(c.dim());
            for ((out, (&g, &uu)), &cc) in f
                .iter_mut()
                .zip(grad_phi_phys[axis].iter().zip(u_phys[axis].iter()))
                .zip(c.iter())
            {
                *out = cc * (zd * g - uu);
            }
            flux_phys.push(f);
        }
    }
    let mut flux_hat: Vec<Array3<Complex<f64>>> = Vec::with_capacity(3 * n_species);
    let mut iter = flux_phys.chunks_exact(2);
    for pair in &mut iter {
        let (a, b) = fft::forward_real_pair(&pair[0], &pair[1]);
        flux_hat.push(a);
        flux_hat.push(b);
    }
    if let [last] = iter.remainder() {
        flux_hat.push(fft::forward_real(last));
    }

    // tendency_i = D laplace(c_i) + div(flux_i), dealiasing the flux.
    let cutoff = grid.dealias_cutoff();
    let two_pi_over_l = 2.0 * PI / l;
    let nu = d * two_pi_over_l * two_pi_over_l;
    let mut tendencies = Vec::with_capacity(n_species);
    let mut nonlinear = Vec::with_capacity(n_species);
    for i in 0..n_species {
        let mut t = SpectralField::zeros(grid);
        let mut nl = SpectralField::zeros(grid);
        let fx = &flux_hat[3 * i];
        let fy = &flux_hat[3 * i + 1];
        let fz = &flux_hat[3 * i + 2];
        let c = state.concentrations[i].coeffs();
        for (((ix, iy, iz), out), out_nl) in t
            .coeffs_mut()
            .indexed_iter_mut()
            .zip(nl.coeffs_mut().iter_mut())
        {
            let kx = grid.wavenumber(ix);
            let ky = grid.wavenumber(iy);
            let kz = grid.wavenumber(iz);
            let k2 = (kx * kx + ky * ky + kz * kz) as f64;
            let mut flux_div = Complex::new(0.0, 0.0);
            if kx.abs() <= cutoff && ky.abs() <= cutoff && kz.abs() <= cutoff {
                let dot = fx[[ix, iy, iz]] * kx as f64
                    + fy[[ix, iy, iz]] * ky as f64
                    + fz[[ix, iy, iz]] * kz as f64;
                flux_div = Complex::new(0.0, two_pi_over_l) * dot;
            }
            *out_nl = flux_div;
            *out = c[[ix, iy, iz]] * (-nu * k2) + flux_div;
        }
        tendencies.push(t);
        nonlinear.push(nl);
    }

    Ok(RhsBundle {
        tendencies,
        nonlinear,
        derived: DerivedFields {
            rho,
            sigma,
            phi,
            u,
            pressure,
        },
        physical: DerivedPhysical {
            rho: rho_phys,
            sigma: sigma_phys,
            grad_phi: grad_phi_phys,
            u: u_phys,
            concentrations: c_phys,
        },
    })
}

/// Charge density, total concentration, potential, and Darcy velocity for a
/// state (pressure omitted; see [`rhs_full`] for pressure recovery).
pub fn derive_fields(state: &NpdState) -> Result<DerivedFields> {
    Ok(rhs_full(state, false)?.derived)
}

/// Tendencies of all species.
pub fn compute_rhs(state: &NpdState) -> Result<Vec<SpectralField>> {
    Ok(rhs_full(state, false)?.tendencies)
}

/// One Gaussian bump of the initial data.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBump {
    pub amplitude: f64,
    pub center: [f64; 3],
    pub width: f64,
}

/// Evaluate a sum of Gaussian bumps on the grid using minimum-image
/// distances; exactly nonnegative for nonnegative amplitudes.
pub fn evaluate_bumps(grid: GridSpec, bumps: &[GaussianBump]) -> RealField {
    RealField::from_fn(grid, |x, y, z| {
        bumps
            .iter()
            .map(|b| {
                let dx = grid.min_image(x - b.center[0]);
                let dy = grid.min_image(y - b.center[1]);
                let dz = grid.min_image(z - b.center[2]);
                b.amplitude * (-(dx * dx + dy * dy + dz * dz) / (2.0 * b.width * b.width)).exp()
            })
            .sum()
    })
}

/// Everything recorded about the constructed initial state.
#[derive(Debug, Clone)]
pub struct InitReport {
    pub masses: Vec<f64>,
    pub neutralization_factor: f64,
    pub residual_charge: f64,
    pub rho0_l1: f64,
    pub sigma0_l1: f64,
    pub max_c0: f64,
    pub min_c0: Vec<f64>,
    pub entropies: Vec<f64>,
    pub moments: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Build the initial state from per-species Gaussian bumps.
///
/// The last charged species is rescaled so the initial charge vanishes
/// exactly (up to roundoff); the applied factor is reported. Bumps narrower
/// than three grid spacings produce a resolution warning.
pub fn make_initial_state(
    grid: GridSpec,
    params: SpeciesParams,
    bumps: &[Vec<GaussianBump>],
) -> Result<(NpdState, InitReport)> {
    let n = params.species_count();
    if bumps.len() != n {
        return Err(Error::Config {
            path: "species".into(),
            message: format!("{} bump lists for {} species", bumps.len(), n),
        });
    }
    let mut warnings = Vec::new();
    for (i, species_bumps) in bumps.iter().enumerate() {
        for (j, b) in species_bumps.iter().enumerate() {
            if b.amplitude < 0.0 || !b.amplitude.is_finite() {
                return Err(Error::Config {
                    path: format!("species[{i}].bumps[{j}].amplitude"),
                    message: format!("must be nonnegative and finite, got {}", b.amplitude),
                });
            }
            if !(b.width > 0.0) || !b.width.is_finite() {
                return Err(Error::Config {
                    path: format!("species[{i}].bumps[{j}].width"),
                    message: format!("must be positive, got {}", b.width),
                });
            }
            if b.width < 3.0 * grid.spacing() {
                warnings.push(format!(
                    "species {i} bump {j}: width {} under 3 grid spacings ({:.4}); \
                     the bump is marginally resolved",
                    b.width,
                    3.0 * grid.spacing()
                ));
            }
        }
    }

    let mut phys: Vec<RealField> = bumps
        .iter()
        .map(|species_bumps| evaluate_bumps(grid, species_bumps))
        .collect();
    let mut fields: Vec<SpectralField> = phys
        .iter()
        .map(forward_transform)
        .collect::<Result<_>>()?;
    let mut masses: Vec<f64> = fields.iter().map(|c| c.integral()).collect();

    // Neutralize by rescaling the last species' amplitude.
    let charge: f64 = masses
        .iter()
        .zip(params.valences().iter())
        .map(|(m, z)| m * z)
        .sum();
    let abs_charge_scale: f64 = masses
        .iter()
        .zip(params.valences().iter())
        .map(|(m, z)| (m * z).abs())
        .sum();
    let mut factor = 1.0;
    if charge.abs() > 1e-14 * abs_charge_scale.max(f64::MIN_POSITIVE) {
        let last = n - 1;
        let anchor = params.valence(last) * masses[last];
        if anchor == 0.0 {
            return Err(Error::Compatibility(format!(
                "initial charge {charge:.6e} cannot be neutralized: \
                 the last species carries no charge to rescale"
            )));
        }
        factor = (anchor - charge) / anchor;
        if factor <= 0.0 {
            return Err(Error::Compatibility(format!(
                "initial charge {charge:.6e} cannot be neutralized: \
                 rescaling the last species would require factor {factor:.6e} <= 0 \
                 (the compatibility condition needs integral rho_0 = 0)"
            )));
        }
        for c in fields[last].coeffs_mut().iter_mut() {
            *c *= factor;
        }
        phys[last].data_mut().mapv_inplace(|v| v * factor);
        masses[last] *= factor;
    }

    let state = NpdState::new(0.0, fields, params)?;
    let residual_charge = state.total_charge();

    let cell = grid.cell_volume();
    let rho0_l1 = {
        let mut acc = 0.0;
        let n_grid = phys[0].data().len();
        for idx in 0..n_grid {
            let mut r = 0.0;
            for (f, &z) in phys.iter().zip(state.params().valences().iter()) {
                r += z * f.data().as_slice().unwrap()[idx];
            }
            acc += r.abs();
        }
        acc * cell
    };
    let sigma0_l1: f64 = masses.iter().sum(); // c_i >= 0 pointwise
    let max_c0 = phys.iter().map(|f| f.max()).fold(0.0f64, f64::max);
    let min_c0: Vec<f64> = phys.iter().map(|f| f.min()).collect();
    let entropies: Vec<f64> = phys
        .iter()
        .map(|f| diagnostics::entropy(f, None, 0.0))
        .collect::<Result<_>>()?;
    let moments: Vec<f64> = phys.iter().map(diagnostics::moment6).collect();

    Ok((
        state,
        InitReport {
            masses,
            neutralization_factor: factor,
            residual_charge,
            rho0_l1,
            sigma0_l1,
            max_c0,
            min_c0,
            entropies,
            moments,
            warnings,
        },
    ))
}
