//! Tour of the spectral toolbox: transforms, multiplier operators, Poisson
//! inversion, divergence-free projection, and dealiasing, with the identities
//! each one satisfies checked numerically.
//!
//! ```bash
//! cargo run --release --example spectral_toolbox
//! ```

use npd::grid::{forward_transform, inverse_transform, GridSpec, RealField};
use npd::operators::{apply_lambda, dealias, divergence, gradient, leray_project, solve_poisson};

fn main() -> npd::Result<()> {
    let l = 16.0;
    let grid = GridSpec::with_default_dealiasing(l, 32)?;
    println!(
        "grid: L = {l}, N = {}, dealias cutoff |k_j| <= {}",
        grid.resolution(),
        grid.dealias_cutoff()
    );

    // A smooth compactly-concentrated field.
    let f = RealField::from_fn(grid, |x, y, z| {
        let dx = grid.min_image(x - 7.0);
        let dy = grid.min_image(y - 8.0);
        let dz = grid.min_image(z - 8.0);
        (-(dx * dx + dy * dy + dz * dz) / 3.0).exp()
    });
    let f_hat = forward_transform(&f)?;

    // Round trip and Parseval.
    let back = inverse_transform(&f_hat);
    let mut worst = 0.0f64;
    for (a, b) in f.data().iter().zip(back.data().iter()) {
        worst = worst.max((a - b).abs());
    }
    println!("round trip max error:         {worst:.3e}");
    println!(
        "Parseval |quad - spectral|:   {:.3e}",
        (f.l2_norm() - f_hat.l2_norm()).abs() / f.l2_norm()
    );
    println!(
        "mass from zero mode:          {:.6} (quadrature {:.6})",
        f_hat.integral(),
        f.integral()
    );

    // Gradient route equals the Lambda multiplier route.
    let mut g = f_hat.clone();
    g.coeffs_mut()[[0, 0, 0]] = 0.0.into(); // mean-zero for Lambda^{-1}
    let grad = gradient(&g);
    let via_grad: f64 = grad.iter().map(|c| c.l2_norm_sq()).sum();
    let via_lambda = apply_lambda(&g, 1.0)?.l2_norm_sq();
    println!(
        "|grad f|^2 vs |Lambda f|^2:   {:.3e} relative",
        (via_grad - via_lambda).abs() / via_lambda
    );

    // Lambda^1 then Lambda^{-1} restores the field.
    let restored = apply_lambda(&apply_lambda(&g, 1.0)?, -1.0)?;
    let mut worst = 0.0f64;
    for (a, b) in g.coeffs().iter().zip(restored.coeffs().iter()) {
        worst = worst.max((a - b).norm());
    }
    println!("Lambda inverse pair error:    {worst:.3e}");

    // Poisson: -laplace(phi) = rho reproduces rho.
    let phi = solve_poisson(&g)?;
    let rho_back = apply_lambda(&phi, 2.0)?;
    let mut worst = 0.0f64;
    for (a, b) in g.coeffs().iter().zip(rho_back.coeffs().iter()) {
        worst = worst.max((a - b).norm());
    }
    println!("Poisson round trip error:     {worst:.3e}");

    // The projection annihilates gradients and fixes solenoidal fields.
    let projected = leray_project(&grad)?;
    let grad_scale: f64 = grad.iter().map(|c| c.l2_norm_sq()).sum::<f64>().sqrt();
    let leftover: f64 = projected.iter().map(|c| c.l2_norm_sq()).sum::<f64>().sqrt();
    println!("P applied to a gradient:      {:.3e} relative", leftover / grad_scale);
    let random = [g.clone(), apply_lambda(&g, 1.0)?, phi.clone()];
    let p = leray_project(&random)?;
    let div = divergence(&p)?;
    let p_scale: f64 = p.iter().map(|c| c.l2_norm_sq()).sum::<f64>().sqrt();
    println!("div(P v) for generic v:       {:.3e} relative", div.l2_norm() / p_scale);

    // Dealiasing is idempotent and only touches the top third of modes.
    let once = dealias(&f_hat);
    let twice = dealias(&once);
    let identical = once
        .coeffs()
        .iter()
        .zip(twice.coeffs().iter())
        .all(|(a, b)| a == b);
    println!("dealias idempotent:           {identical}");
    Ok(())
}
