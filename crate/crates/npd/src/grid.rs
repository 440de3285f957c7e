//! Periodic cubic box, real-space and spectral fields, and the transforms
//! between them.
//!
//! Conventions, fixed once for the whole crate:
//!
//! - Grid points `x_j = j L / N`, `j = 0..N`, per axis.
//! - Integer wavevectors `k` run over `[-N/2, N/2)` per axis; the continuum
//!   frequency is `xi = k / L`, matching the transform
//!   `f_hat(xi) = integral f(x) e^{-2 pi i x.xi} dx`.
//! - The forward transform carries the `1/N^3` factor, so `coeffs(0)` is the
//!   field mean and the physical integral of `f` is `coeffs(0) * L^3`.
//! - Physical quadrature weight is `(L/N)^3`; Parseval then reads
//!   `||f||_2^2 = L^3 sum_k |coeffs(k)|^2`.

use ndarray::Array3;
use ndrustfft::Complex;

use crate::error::Error;
use crate::fft;
use crate::Result;

/// Geometry and resolution of the periodic box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    box_length: f64,
    resolution: usize,
    dealias_fraction: f64,
}

impl GridSpec {
    /// A cube of side `box_length` with `resolution` points per axis.
    ///
    /// `resolution` must be even and at least 8; `dealias_fraction` in (0, 1]
    /// sets the fraction of the Nyquist wavenumber kept after nonlinear
    /// products (2/3 by default via [`GridSpec::with_default_dealiasing`]).
    pub fn new(box_length: f64, resolution: usize, dealias_fraction: f64) -> Result<Self> {
        if !(box_length > 0.0) || !box_length.is_finite() {
            return Err(Error::Config {
                path: "grid.box_length".into(),
                message: format!("must be positive and finite, got {box_length}"),
            });
        }
        if resolution < 8 || resolution % 2 != 0 {
            return Err(Error::Config {
                path: "grid.resolution".into(),
                message: format!("must be even and >= 8, got {resolution}"),
            });
        }
        if !(dealias_fraction > 0.0 && dealias_fraction <= 1.0) {
            return Err(Error::Config {
                path: "grid.dealias_fraction".into(),
                message: format!("must lie in (0, 1], got {dealias_fraction}"),
            });
        }
        Ok(Self {
            box_length,
            resolution,
            dealias_fraction,
        })
    }

    /// Grid with the standard 2/3-rule dealiasing.
    pub fn with_default_dealiasing(box_length: f64, resolution: usize) -> Result<Self> {
        Self::new(box_length, resolution, 2.0 / 3.0)
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn dealias_fraction(&self) -> f64 {
        self.dealias_fraction
    }

    /// Grid spacing `L / N`.
    pub fn spacing(&self) -> f64 {
        self.box_length / self.resolution as f64
    }

    /// Volume of one quadrature cell, `(L/N)^3`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    /// Box volume `L^3`.
    pub fn volume(&self) -> f64 {
        self.box_length.powi(3)
    }

    /// Integer wavenumber for a storage index along one axis.
    #[inline]
    pub fn wavenumber(&self, index: usize) -> i64 {
        let n = self.resolution as i64;
        let i = index as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    /// Largest integer wavenumber kept by the dealiasing mask.
    pub fn dealias_cutoff(&self) -> i64 {
        (self.dealias_fraction * (self.resolution as f64) / 2.0).floor() as i64
    }

    /// Physical coordinate of grid index `j` along one axis.
    #[inline]
    pub fn coordinate(&self, index: usize) -> f64 {
        index as f64 * self.spacing()
    }

    /// Signed wavenumbers for all storage indices, as `f64`.
    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.resolution)
            .map(|i| self.wavenumber(i) as f64)
            .collect()
    }

    /// Minimum-image distance between two coordinates along one axis.
    #[inline]
    pub fn min_image(&self, dx: f64) -> f64 {
        let l = self.box_length;
        let d = (dx % l + l) % l;
        d.min(l - d)
    }
}

/// Scalar samples on the grid.
#[derive(Debug, Clone)]
pub struct RealField {
    grid: GridSpec,
    data: Array3<f64>,
}

impl RealField {
    /// Zero field.
    pub fn zeros(grid: GridSpec) -> Self {
        let n = grid.resolution();
        Self {
            grid,
            data: Array3::zeros((n, n, n)),
        }
    }

    /// Wrap existing samples; rejects non-finite values and shape mismatch.
    pub fn from_data(grid: GridSpec, data: Array3<f64>) -> Result<Self> {
        let n = grid.resolution();
        if data.dim() != (n, n, n) {
            return Err(Error::GridMismatch(format!(
                "data shape {:?} does not match resolution {n}",
                data.dim()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidField(
                "real field contains NaN or infinite samples".into(),
            ));
        }
        Ok(Self { grid, data })
    }

    /// Evaluate `f(x, y, z)` at every grid point.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(f64, f64, f64) -> f64) -> Self {
        let n = grid.resolution();
        let mut data = Array3::zeros((n, n, n));
        for ((i, j, k), v) in data.indexed_iter_mut() {
            *v = f(grid.coordinate(i), grid.coordinate(j), grid.coordinate(k));
        }
        Self { grid, data }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array3<f64> {
        &mut self.data
    }

    /// Quadrature integral over the box, weight `(L/N)^3`.
    pub fn integral(&self) -> f64 {
        self.data.sum() * self.grid.cell_volume()
    }

    /// Minimum sample value.
    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Maximum sample value.
    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Quadrature L^2 norm.
    pub fn l2_norm(&self) -> f64 {
        (self.data.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }
}

/// Complex Fourier coefficients of a scalar field.
///
/// Storage is row-major over `(ix, iy, iz)`, with axis index `i` carrying
/// integer wavenumber `GridSpec::wavenumber(i)`. Fields representing real
/// data satisfy `coeffs(-k) = conj(coeffs(k))`.
#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: GridSpec,
    coeffs: Array3<Complex<f64>>,
}

impl SpectralField {
    /// Zero field.
    pub fn zeros(grid: GridSpec) -> Self {
        let n = grid.resolution();
        Self {
            grid,
            coeffs: Array3::zeros((n, n, n)),
        }
    }

    /// Wrap existing coefficients (shape-checked).
    pub fn from_coeffs(grid: GridSpec, coeffs: Array3<Complex<f64>>) -> Result<Self> {
        let n = grid.resolution();
        if coeffs.dim() != (n, n, n) {
            return Err(Error::GridMismatch(format!(
                "coefficient shape {:?} does not match resolution {n}",
                coeffs.dim()
            )));
        }
        Ok(Self { grid, coeffs })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn coeffs(&self) -> &Array3<Complex<f64>> {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut Array3<Complex<f64>> {
        &mut self.coeffs
    }

    /// The zero mode, i.e. the field mean.
    pub fn mean(&self) -> Complex<f64> {
        self.coeffs[[0, 0, 0]]
    }

    /// Physical integral over the box, `coeffs(0) * L^3`.
    pub fn integral(&self) -> f64 {
        self.mean().re * self.grid.volume()
    }

    /// Spectral L^2 norm squared, `L^3 sum_k |coeffs(k)|^2` (Parseval).
    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.volume()
    }

    /// Spectral L^2 norm.
    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    /// Largest coefficient magnitude.
    pub fn max_coeff(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|c| c.norm())
            .fold(0.0f64, f64::max)
    }

    /// True when all coefficients are finite.
    pub fn is_finite(&self) -> bool {
        self.coeffs
            .iter()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Apply a multiplier `m(kx, ky, kz)` to every coefficient in place.
    pub fn scale_by<F>(&mut self, mut m: F)
    where
        F: FnMut(i64, i64, i64) -> Complex<f64>,
    {
        let grid = self.grid;
        for ((i, j, l), c) in self.coeffs.indexed_iter_mut() {
            *c *= m(grid.wavenumber(i), grid.wavenumber(j), grid.wavenumber(l));
        }
    }

    /// Maximum relative breach of conjugate symmetry, for tests and
    /// validation of real-data fields.
    pub fn conjugate_asymmetry(&self) -> f64 {
        let n = self.grid.resolution();
        let scale = self.max_coeff().max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for ((i, j, l), c) in self.coeffs.indexed_iter() {
            let (mi, mj, ml) = ((n - i) % n, (n - j) % n, (n - l) % n);
            let mirror = self.coeffs[[mi, mj, ml]];
            worst = worst.max((c - mirror.conj()).norm() / scale);
        }
        worst
    }
}

/// Forward transform. Errors on non-finite input.
pub fn forward_transform(f: &RealField) -> Result<SpectralField> {
    if !f.data.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidField(
            "forward transform input contains NaN or infinite samples".into(),
        ));
    }
    Ok(SpectralField {
        grid: f.grid,
        coeffs: fft::forward_real(&f.data),
    })
}

/// Inverse transform, returning the real part of the reconstruction.
pub fn inverse_transform(f: &SpectralField) -> RealField {
    RealField {
        grid: f.grid,
        data: fft::inverse_real(&f.coeffs),
    }
}

/// Check that two fields live on the same grid.
pub fn same_grid(a: &GridSpec, b: &GridSpec) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch(format!(
            "L = {} N = {} vs L = {} N = {}",
            a.box_length(),
            a.resolution(),
            b.box_length(),
            b.resolution()
        )))
    }
}
