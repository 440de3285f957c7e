//! Self-convergence of the integrating-factor RK4 stepper on a nonlinear
//! dipole burst: halving the step should shrink successive differences by
//! about 2^4.
//!
//! ```bash
//! cargo run --release --example convergence_order
//! ```

use npd::grid::GridSpec;
use npd::integrator::{cfl_dt, self_convergence_order};
use npd::model::{make_initial_state, GaussianBump, SpeciesParams};

fn main() -> npd::Result<()> {
    let l = 20.0;
    let grid = GridSpec::with_default_dealiasing(l, 32)?;
    let params = SpeciesParams::new(vec![1.0, -1.0], 1.0)?;
    let bump = |cx: f64| {
        vec![GaussianBump {
            amplitude: 1.0,
            center: [cx, 0.5 * l, 0.5 * l],
            width: 1.5,
        }]
    };
    let (state, _) = make_initial_state(grid, params, &[bump(9.0), bump(11.0)])?;

    let bound = cfl_dt(&state, 0.4, 1.0)?;
    println!("CFL-limited step at t = 0: {bound:.4}");
    println!("\n{:>8} {:>12}", "dt", "order");
    for dt in [0.2, 0.1, 0.05] {
        let order = self_convergence_order(&state, dt, 2)?;
        println!("{dt:>8} {order:>12.3}");
    }
    println!("\nclassical four-stage scheme: expect orders close to 4.");
    Ok(())
}
