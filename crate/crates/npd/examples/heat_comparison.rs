//! Sharpness of the decay rates: compare the coupled dynamics against the
//! exact heat flow of the same initial data. The difference norms
//! |Lambda^k (c_i - heat_i)|_2^2 decay a full power faster than the field
//! norms themselves, which is what pins the field decay from below.
//!
//! ```bash
//! cargo run --release --example heat_comparison
//! ```

use npd::commands::{cmd_baseline, cmd_run, ExecOpts};
use npd::config::reference_scenario;
use npd::rates::{fit_power_law, FitWindow};
use npd::series::read_table;

fn main() -> npd::Result<()> {
    let mut config = reference_scenario(24.0, 32, 12.0);
    config.diagnostics.positivity_tolerance = 1e-3;

    let dir = std::env::temp_dir().join("npd_heat_comparison_example");
    let artifacts = cmd_run(&config, &ExecOpts::new(&dir))?;
    let table = read_table(&artifacts.series_path)?;
    let window = FitWindow::new(4.0, 10.0);

    println!("difference-norm decay vs field-norm decay on [4, 10]:\n");
    println!("{:<12} {:>10}    {:<12} {:>10}", "field", "exponent", "difference", "exponent");
    for (i, k) in [(1, 0), (1, 1), (2, 0), (2, 1)] {
        let field_col = if k == 0 {
            format!("l2sq_c{i}")
        } else {
            format!("hksq_{k}_c{i}")
        };
        let diff_col = format!("sharp_{k}_c{i}");
        let field_fit = fit_power_law(&table.series(&field_col)?, window)?;
        let diff_fit = fit_power_law(&table.series(&diff_col)?, window)?;
        println!(
            "{:<12} {:>10.3}    {:<12} {:>10.3}",
            field_col, field_fit.exponent, diff_col, diff_fit.exponent
        );
    }

    // The replayed heat baseline as its own series.
    let baseline_path = cmd_baseline(
        &artifacts.series_path,
        artifacts.init_checkpoint.as_ref().unwrap(),
        &dir,
    )?;
    let baseline = read_table(&baseline_path)?;
    let heat = fit_power_law(&baseline.series("heatsq_0_c1")?, window)?;
    println!(
        "\nheat-flow norm |heat_1|_2^2 exponent: {:.3} (same -3/2 rate as the coupled run)",
        heat.exponent
    );
    println!("baseline series -> {}", baseline_path.display());
    Ok(())
}
