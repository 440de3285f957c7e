//! Thin wrapper over complex-to-complex 3-D FFTs with cached plans.
//!
//! Normalisation is chosen so that the forward transform carries the 1/N^3
//! factor: the zero mode of a transformed field equals the field mean, and
//! `inverse(forward(f)) == f` to roundoff.

use std::cell::RefCell;
use std::collections::HashMap;

use ndarray::Array3;
use ndrustfft::{ndfft, ndifft, Complex, FftHandler};

thread_local! {
    static HANDLERS: RefCell<HashMap<usize, FftHandler<f64>>> = RefCell::new(HashMap::new());
}

fn with_handler<R>(n: usize, f: impl FnOnce(&mut FftHandler<f64>) -> R) -> R {
    HANDLERS.with(|cell| {
        let mut map = cell.borrow_mut();
        let handler = map.entry(n).or_insert_with(|| FftHandler::new(n));
        f(handler)
    })
}

/// Unnormalised forward DFT along all three axes, then scaled by 1/N^3 so
/// the zero mode is the mean.
pub fn forward_c2c(data: &Array3<Complex<f64>>) -> Array3<Complex<f64>> {
    let (nx, ny, nz) = data.dim();
    let mut a = Array3::zeros((nx, ny, nz));
    let mut b = Array3::zeros((nx, ny, nz));
    with_handler(nz, |h| ndfft(data, &mut a, h, 2));
    with_handler(ny, |h| ndfft(&a, &mut b, h, 1));
    with_handler(nx, |h| ndfft(&b, &mut a, h, 0));
    let scale = 1.0 / (nx as f64 * ny as f64 * nz as f64);
    a.mapv_inplace(|c| c * scale);
    a
}

/// Inverse of [`forward_c2c`]: undoes the 1/N^3 forward scaling.
pub fn inverse_c2c(coeffs: &Array3<Complex<f64>>) -> Array3<Complex<f64>> {
    let (nx, ny, nz) = coeffs.dim();
    let mut a = Array3::zeros((nx, ny, nz));
    let mut b = Array3::zeros((nx, ny, nz));
    with_handler(nx, |h| ndifft(coeffs, &mut a, h, 0));
    with_handler(ny, |h| ndifft(&a, &mut b, h, 1));
    with_handler(nz, |h| ndifft(&b, &mut a, h, 2));
    // ndifft normalises by 1/N per axis; our coefficients already carry the
    // full 1/N^3, so scale back up.
    let scale = nx as f64 * ny as f64 * nz as f64;
    a.mapv_inplace(|c| c * scale);
    a
}

/// Forward transform of real samples.
pub fn forward_real(data: &Array3<f64>) -> Array3<Complex<f64>> {
    let complex = data.mapv(|v| Complex::new(v, 0.0));
    forward_c2c(&complex)
}

/// Inverse transform, keeping the real part. For coefficients with conjugate
/// symmetry the imaginary part is roundoff noise.
pub fn inverse_real(coeffs: &Array3<Complex<f64>>) -> Array3<f64> {
    inverse_c2c(coeffs).mapv(|c| c.re)
}

/// Transform two real fields with a single complex FFT.
///
/// Packs `a + i b`, transforms once, and splits the spectrum into the two
/// Hermitian halves: `a_hat(k) = (c(k) + conj(c(-k)))/2`,
/// `b_hat(k) = -i (c(k) - conj(c(-k)))/2`.
pub fn forward_real_pair(
    a: &Array3<f64>,
    b: &Array3<f64>,
) -> (Array3<Complex<f64>>, Array3<Complex<f64>>) {
    let (nx, ny, nz) = a.dim();
    debug_assert_eq!(a.dim(), b.dim());
    let mut packed = Array3::zeros((nx, ny, nz));
    for ((p, &x), &y) in packed.iter_mut().zip(a.iter()).zip(b.iter()) {
        *p = Complex::new(x, y);
    }
    let c = forward_c2c(&packed);
    let mut ah = Array3::zeros((nx, ny, nz));
    let mut bh = Array3::zeros((nx, ny, nz));
    for i in 0..nx {
        let mi = (nx - i) % nx;
        for j in 0..ny {
            let mj = (ny - j) % ny;
            for k in 0..nz {
                let mk = (nz - k) % nz;
                let fwd = c[[i, j, k]];
                let rev = c[[mi, mj, mk]].conj();
                ah[[i, j, k]] = 0.5 * (fwd + rev);
                bh[[i, j, k]] = Complex::new(0.0, -0.5) * (fwd - rev);
            }
        }
    }
    (ah, bh)
}

/// Inverse-transform two spectra of real fields with a single complex FFT.
///
/// Requires both inputs to carry conjugate symmetry; then the inverse of
/// `a_hat + i b_hat` is exactly `a + i b`.
pub fn inverse_real_pair(
    a_hat: &Array3<Complex<f64>>,
    b_hat: &Array3<Complex<f64>>,
) -> (Array3<f64>, Array3<f64>) {
    let (nx, ny, nz) = a_hat.dim();
    debug_assert_eq!(a_hat.dim(), b_hat.dim());
    let mut packed = Array3::zeros((nx, ny, nz));
    for ((p, &x), &y) in packed.iter_mut().zip(a_hat.iter()).zip(b_hat.iter()) {
        *p = x + Complex::new(0.0, 1.0) * y;
    }
    let back = inverse_c2c(&packed);
    let a = back.mapv(|c| c.re);
    let b = back.mapv(|c| c.im);
    (a, b)
}
