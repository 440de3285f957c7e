//! Run a small dipole scenario and fit the long-time decay exponents of
//! the species norms against the predicted rates. The squared L^2 norm
//! decays like (t+1)^{-3/2}, each extra derivative steepens the rate by
//! one power, and the nonlinear coupling does not change the exponents.
//!
//! ```bash
//! cargo run --release --example decay_rates
//! ```

use npd::commands::{cmd_run, ExecOpts};
use npd::config::reference_scenario;
use npd::rates::{fit_power_law, FitWindow};
use npd::series::read_table;

fn main() -> npd::Result<()> {
    let mut config = reference_scenario(24.0, 32, 12.0);
    config.diagnostics.positivity_tolerance = 1e-3;

    let dir = std::env::temp_dir().join("npd_decay_rates_example");
    let artifacts = cmd_run(&config, &ExecOpts::new(&dir))?;
    println!(
        "ran {} steps (dt = {}), {} records -> {}",
        artifacts.steps,
        artifacts.dt,
        artifacts.records,
        artifacts.series_path.display()
    );

    let table = read_table(&artifacts.series_path)?;
    let window = FitWindow::new(4.0, 10.0);
    println!("fit window: [{}, {}]\n", window.t_start, window.t_end);
    println!("{:<12} {:>10} {:>10}", "column", "measured", "predicted");
    for (column, predicted) in [
        ("l2sq_c1", -1.5),
        ("l2sq_c2", -1.5),
        ("hksq_1_c1", -2.5),
        ("hksq_1_c2", -2.5),
        ("hksq_2_c1", -3.5),
        ("hksq_2_c2", -3.5),
    ] {
        let fit = fit_power_law(&table.series(column)?, window)?;
        println!(
            "{:<12} {:>10.3} {:>10.1}   (rms {:.2e})",
            column, fit.exponent, predicted, fit.rms_residual
        );
    }
    println!("\nmass drift check: mass_1(t_end) - mass_1(0) = {:+.3e}", {
        let m = table.column("mass_1")?;
        m[m.len() - 1] - m[0]
    });
    Ok(())
}
