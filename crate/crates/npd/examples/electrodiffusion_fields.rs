//! Derived fields of a charged dipole: charge density, potential, Darcy
//! velocity, and the exact energy identities the semi-discrete tendencies
//! satisfy.
//!
//! ```bash
//! cargo run --release --example electrodiffusion_fields
//! ```

use npd::diagnostics::identity_residuals;
use npd::grid::GridSpec;
use npd::model::{make_initial_state, rhs_full, GaussianBump, SpeciesParams};
use npd::operators::divergence;

fn main() -> npd::Result<()> {
    let l = 24.0;
    let grid = GridSpec::with_default_dealiasing(l, 32)?;
    let params = SpeciesParams::new(vec![1.0, -1.0], 1.0)?;
    let bump = |cx: f64| {
        vec![GaussianBump {
            amplitude: 1.0,
            center: [cx, 0.5 * l, 0.5 * l],
            width: 1.5,
        }]
    };
    let (state, report) =
        make_initial_state(grid, params, &[bump(0.5 * l - 1.0), bump(0.5 * l + 1.0)])?;

    println!("species masses:        {:?}", report.masses);
    println!("neutralization factor: {}", report.neutralization_factor);
    println!("residual charge:       {:.3e}", report.residual_charge);
    for w in &report.warnings {
        println!("warning: {w}");
    }

    let bundle = rhs_full(&state, true)?;
    let rho_l2 = bundle.derived.rho.l2_norm();
    let u_l2_sq: f64 = bundle.derived.u.iter().map(|c| c.l2_norm_sq()).sum();
    let div_u = divergence(&bundle.derived.u)?.l2_norm();
    println!("|rho|_2 = {rho_l2:.6}");
    println!("|u|_2^2 = {u_l2_sq:.6e}, |div u|_2 / |u|_2 = {:.3e}", div_u / u_l2_sq.sqrt());
    println!("max |u| = {:.4e}, max |grad phi| = {:.4e}",
        bundle.physical.u_inf(),
        bundle.physical.grad_phi_inf());

    // The velocity identity |u|_2^2 = -integral rho grad(phi) . u, both
    // sides measured independently.
    let mut forcing = 0.0;
    for axis in 0..3 {
        for ((&r, &g), &u) in bundle
            .physical
            .rho
            .iter()
            .zip(bundle.physical.grad_phi[axis].iter())
            .zip(bundle.physical.u[axis].iter())
        {
            forcing += r * g * u;
        }
    }
    forcing *= -grid.cell_volume();
    println!(
        "velocity identity:     |u|^2 = {u_l2_sq:.6e} vs -<rho grad phi, u> = {forcing:.6e}"
    );

    // Residuals of the two exact energy identities for the tendencies.
    let (r_energy, r_l2) = identity_residuals(&state, &bundle);
    println!("identity residuals:    R_energy = {r_energy:.3e}, R_L2 = {r_l2:.3e}");

    // Pressure recovered from the Darcy balance.
    let p = bundle.derived.pressure.as_ref().unwrap();
    println!("|p|_2 = {:.6e} (recovered from -laplace p = div(rho grad phi))", p.l2_norm());
    Ok(())
}
