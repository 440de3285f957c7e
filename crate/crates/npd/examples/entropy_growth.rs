//! Entropy diagnostics: the total entropy integral c log c drifts to
//! minus infinity logarithmically in time with slope -(3/2) of the total
//! mass, the exponential entropy grows linearly, and the entropy content
//! of any fixed ball dies out.
//!
//! ```bash
//! cargo run --release --example entropy_growth
//! ```

use npd::commands::{cmd_run, ExecOpts};
use npd::config::reference_scenario;
use npd::rates::{fit_log_law, fit_power_law, FitWindow};
use npd::series::read_table;

fn main() -> npd::Result<()> {
    let mut config = reference_scenario(24.0, 32, 12.0);
    config.diagnostics.positivity_tolerance = 1e-3;

    let dir = std::env::temp_dir().join("npd_entropy_example");
    let artifacts = cmd_run(&config, &ExecOpts::new(&dir))?;
    let table = read_table(&artifacts.series_path)?;
    let window = FitWindow::new(4.0, 10.0);

    let mass_total = table.column("mass_1")?[0] + table.column("mass_2")?[0];
    let entropy_fit = fit_log_law(&table.series("entropy_total")?, window)?;
    println!("total mass M = {mass_total:.4}");
    println!(
        "entropy slope vs log(1+t):  {:.3}  (heat-flow prediction -(3/2) M = {:.3})",
        entropy_fit.exponent,
        -1.5 * mass_total
    );

    let n_fit = fit_power_law(&table.series("exp_entropy_1")?, window)?;
    println!(
        "exponential entropy N_1:    log-log slope {:.3} (linear growth has slope 1)",
        n_fit.exponent
    );

    // Local entropy over the ball of radius L/8 around the center: rises,
    // peaks, and drains away as mass leaves the core.
    let local = table.series("local_entropy_1")?;
    let peak = local
        .iter()
        .map(|(t, v)| (*t, v.abs()))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let last = local.last().unwrap();
    println!(
        "local entropy |E_A|:        peak {:.4} at t = {:.2}, final {:.4} at t = {:.2}",
        peak.1,
        peak.0,
        last.1.abs(),
        last.0
    );

    println!("\nentropy sample (t, E_total, N_1, local_1):");
    for (t, e) in table.series("entropy_total")? {
        if (t * 4.0).round() as i64 % 8 == 0 {
            let n1 = table.series("exp_entropy_1")?;
            let l1 = table.series("local_entropy_1")?;
            let idx = n1.iter().position(|(tt, _)| *tt == t).unwrap();
            println!("  t = {t:5.2}   {e:10.4}   {:8.4}   {:8.4}", n1[idx].1, l1[idx].1);
        }
    }
    Ok(())
}
