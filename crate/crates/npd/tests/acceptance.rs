//! Acceptance suite for the reference two-Gaussian scenario: box L = 50,
//! two species with valences +1/-1, D = 1, opposite Gaussian bumps of width
//! 1.5 offset by 2, t_end = 60, records every 0.25.
//!
//! By default the scenario runs at the 64^3 CI reduction; set
//! `NPD_ACCEPTANCE_FULL=1` to run the full 128^3 reference (slower by
//! roughly an order of magnitude). The identity-residual criterion is
//! always checked at 128^3 on an early-window burst, where the unresolved
//! spectral tail (and hence the residual) is largest, together with the
//! 64 -> 128 refinement ratio at fixed dt*N.
//!
//! One line is printed per criterion; run with `--nocapture` to see them
//! all. The test fails if any criterion fails.

use npd::commands::{cmd_run, ExecOpts};
use npd::config::{reference_scenario, RunConfig};
use npd::integrator::self_convergence_order;
use npd::model::make_initial_state;
use npd::rates::{fit_log_law, fit_power_law, verdict, BoundMode, FitWindow};
use npd::series::{read_table, Table};

struct Scorecard {
    lines: Vec<(String, bool, String)>,
}

impl Scorecard {
    fn new() -> Self {
        Self { lines: vec![] }
    }

    fn record(&mut self, name: &str, pass: bool, detail: String) {
        println!(
            "criterion {:<28} {}  {}",
            name,
            if pass { "PASS" } else { "FAIL" },
            detail
        );
        self.lines.push((name.to_string(), pass, detail));
    }

    fn finish(self) {
        let failures: Vec<String> = self
            .lines
            .iter()
            .filter(|(_, pass, _)| !pass)
            .map(|(name, _, detail)| format!("{name}: {detail}"))
            .collect();
        assert!(
            failures.is_empty(),
            "{} acceptance criteria failed:\n{}",
            failures.len(),
            failures.join("\n")
        );
    }
}

fn ci_reduced() -> bool {
    std::env::var("NPD_ACCEPTANCE_FULL").map_or(true, |v| v != "1")
}

/// Reference scenario with the acceptance fit window pinned to [15, 50].
///
/// Positivity floors: the monitor flags resolution loss, and the scenario
/// has known truncation transients that are benign but nonzero. At 64^3
/// the initial bumps themselves sit under two grid spacings (observed
/// minimum about -1e-4 of the peak); at 128^3 the fields are resolved but
/// the dealiased nonlinear products still ring at about -1.4e-8 during the
/// first few steps. The shipped reference configs carry the same floors.
fn scenario(resolution: usize) -> RunConfig {
    let mut config = reference_scenario(50.0, resolution, 60.0);
    config.fits.window = Some([15.0, 50.0]);
    config.diagnostics.positivity_tolerance = if resolution < 128 { 1e-3 } else { 1e-6 };
    config
}

fn series_pairs(table: &Table, column: &str) -> Vec<(f64, f64)> {
    table.series(column).expect(column)
}

#[test]
fn acceptance_reference_scenario() {
    let mut card = Scorecard::new();
    let resolution = if ci_reduced() { 64 } else { 128 };
    let window = FitWindow {
        t_start: 15.0,
        t_end: 50.0,
        min_points: 5,
    };

    let config = scenario(resolution);
    let dir = tempfile::tempdir().unwrap();

    // Primary run (deterministic), reused by most criteria.
    let out1 = dir.path().join("run1");
    let mut opts1 = ExecOpts::new(&out1);
    opts1.deterministic = true;
    let artifacts = cmd_run(&config, &opts1).expect("reference run failed");
    let table = read_table(&artifacts.series_path).unwrap();
    let species = 2usize;

    // Initial-state facts for the conservation and entropy criteria.
    let (_, init_report) = make_initial_state(
        config.grid_spec().unwrap(),
        config.species_params().unwrap(),
        &config.bumps(),
    )
    .unwrap();

    // 1. Exact-identity suite at 128^3 on the early window, plus the
    //    refinement ratio between 64^3 and 128^3 at fixed dt*N.
    {
        let mut burst64 = scenario(64);
        burst64.stepper.t_end = 1.0;
        burst64.stepper.dt = Some(0.125);
        burst64.fits.window = None;
        let mut burst128 = scenario(128);
        burst128.stepper.t_end = 1.0;
        burst128.stepper.dt = Some(0.0625);
        burst128.fits.window = None;

        let out64 = dir.path().join("burst64");
        let out128 = dir.path().join("burst128");
        let a64 = cmd_run(&burst64, &ExecOpts::new(&out64)).expect("64^3 burst failed");
        let a128 = cmd_run(&burst128, &ExecOpts::new(&out128)).expect("128^3 burst failed");
        let t64 = read_table(&a64.series_path).unwrap();
        let t128 = read_table(&a128.series_path).unwrap();

        let re128 = column_values(&t128, "R_energy");
        let rl128 = column_values(&t128, "R_L2");
        let worst128 = re128
            .iter()
            .chain(rl128.iter())
            .fold(0.0f64, |a, &v| a.max(v));
        let every_under = worst128 <= 1e-6;

        // Residuals measure the unresolved spectral tail, which the first
        // half time unit dominates; compare the early-window maxima.
        let early_max = |tab: &Table, col: &str| -> f64 {
            tab.series(col)
                .unwrap()
                .iter()
                .filter(|(t, _)| *t <= 0.5)
                .map(|(_, v)| *v)
                .fold(0.0f64, f64::max)
        };
        let re_ratio = early_max(&t64, "R_energy") / early_max(&t128, "R_energy").max(1e-300);
        let rl_ratio = early_max(&t64, "R_L2") / early_max(&t128, "R_L2").max(1e-300);
        let shrink = re_ratio >= 3.0 && rl_ratio >= 3.0;

        // In full mode the main run is itself 128^3: gate all its records.
        let main_ok = if resolution == 128 {
            let re = column_values(&table, "R_energy");
            let rl = column_values(&table, "R_L2");
            re.iter().chain(rl.iter()).all(|&v| v <= 1e-6)
        } else {
            true
        };

        card.record(
            "01-exact-identities",
            every_under && shrink && main_ok,
            format!(
                "max residual at 128^3 = {worst128:.2e} (gate 1e-6); \
                 refinement shrink x{re_ratio:.1} (energy), x{rl_ratio:.1} (L2), gate 3x"
            ),
        );
    }

    // 2. Conservation over the full run.
    {
        let mut mass_drift = 0.0f64;
        for i in 1..=species {
            let col = series_pairs(&table, &format!("mass_{i}"));
            let m0 = col[0].1;
            for (_, m) in &col {
                mass_drift = mass_drift.max(((m - m0) / m0).abs());
            }
        }
        let charge_max = series_pairs(&table, "charge_total")
            .iter()
            .map(|(_, v)| v.abs())
            .fold(0.0f64, f64::max);
        let charge_gate = 1e-9 * init_report.rho0_l1;
        card.record(
            "02-conservation",
            mass_drift <= 1e-9 && charge_max <= charge_gate,
            format!(
                "mass drift {mass_drift:.2e} (gate 1e-9); |charge| {charge_max:.2e} \
                 (gate {charge_gate:.2e})"
            ),
        );
    }

    // 3-6. Decay exponents and two-sided sharpness.
    let mut sharp_two_sided = true;
    let mut sharp_detail = String::new();
    for (criterion, predicted, tol, k) in [
        ("03-l2-decay", -1.5, 0.2, None),
        ("04-gradient-decay", -2.5, 0.3, Some(1)),
        ("05-second-derivative-decay", -3.5, 0.4, Some(2)),
    ] {
        let mut pass = true;
        let mut details = Vec::new();
        for i in 1..=species {
            let column = match k {
                None => format!("l2sq_c{i}"),
                Some(k) => format!("hksq_{k}_c{i}"),
            };
            let fit = fit_power_law(&series_pairs(&table, &column), window).unwrap();
            let v = verdict(&fit, predicted, tol, BoundMode::TwoSided).unwrap();
            pass &= v.pass;
            details.push(format!("c{i}: {:.3}", fit.exponent));
            if k != Some(2) {
                sharp_two_sided &= v.pass;
                sharp_detail.push_str(&format!("{column} {:.3}; ", fit.exponent));
            }
        }
        card.record(
            criterion,
            pass,
            format!("{} vs {predicted} +- {tol}", details.join(", ")),
        );
    }
    card.record(
        "06-sharpness-two-sided",
        sharp_two_sided,
        format!("k = 0, 1 exponents attained from both sides: {sharp_detail}"),
    );

    // 7. Heat-flow comparison: difference norms decay at least one power
    //    faster than the fields themselves.
    {
        let mut pass = true;
        let mut details = Vec::new();
        for i in 1..=species {
            let f0 = fit_power_law(&series_pairs(&table, &format!("sharp_0_c{i}")), window).unwrap();
            let v0 = verdict(&f0, -2.0, 0.2, BoundMode::UpperBound).unwrap();
            let f1 = fit_power_law(&series_pairs(&table, &format!("sharp_1_c{i}")), window).unwrap();
            let v1 = verdict(&f1, -3.0, 0.3, BoundMode::UpperBound).unwrap();
            pass &= v0.pass && v1.pass;
            details.push(format!(
                "c{i}: k0 {:.3} (gate -1.8), k1 {:.3} (gate -2.7)",
                f0.exponent, f1.exponent
            ));
        }
        card.record("07-heat-comparison", pass, details.join("; "));
    }

    // 8. Entropy log-law slope within 30 percent of -(3/2) total mass.
    {
        let m_total: f64 = init_report.masses.iter().sum();
        let fit = fit_log_law(&series_pairs(&table, "entropy_total"), window).unwrap();
        let center = -1.5 * m_total;
        let lo = center * 1.3;
        let hi = center * 0.7;
        let pass = fit.exponent < 0.0 && fit.exponent >= lo && fit.exponent <= hi;
        card.record(
            "08-entropy-log-growth",
            pass,
            format!(
                "slope {:.2} within [{lo:.2}, {hi:.2}] (center {center:.2})",
                fit.exponent
            ),
        );
    }

    // 9. Exponential entropy grows at least linearly in time.
    {
        let mut pass = true;
        let mut details = Vec::new();
        for i in 1..=species {
            let series: Vec<(f64, f64)> = series_pairs(&table, &format!("exp_entropy_{i}"))
                .into_iter()
                .filter(|(t, _)| *t >= window.t_start && *t <= window.t_end)
                .collect();
            let min_ratio = series
                .iter()
                .map(|(t, n)| n / t)
                .fold(f64::INFINITY, f64::min);
            // Slope of N against t by least squares.
            let n = series.len() as f64;
            let mean_t: f64 = series.iter().map(|(t, _)| t).sum::<f64>() / n;
            let mean_n: f64 = series.iter().map(|(_, v)| v).sum::<f64>() / n;
            let sxx: f64 = series.iter().map(|(t, _)| (t - mean_t).powi(2)).sum();
            let sxy: f64 = series
                .iter()
                .map(|(t, v)| (t - mean_t) * (v - mean_n))
                .sum();
            let slope = sxy / sxx;
            pass &= min_ratio > 0.0 && slope > 0.0;
            details.push(format!("c{i}: min N/t = {min_ratio:.3}, slope {slope:.3}"));
        }
        card.record("09-exp-entropy-linear", pass, details.join("; "));
    }

    // 10. Moment growth bounded by (t+1)^{5/2}.
    {
        let mut pass = true;
        let mut details = Vec::new();
        for i in 1..=species {
            let fit =
                fit_power_law(&series_pairs(&table, &format!("moment6_{i}")), window).unwrap();
            let v = verdict(&fit, 2.5, 0.2, BoundMode::UpperBound).unwrap();
            pass &= v.pass;
            details.push(format!("c{i}: {:.3}", fit.exponent));
        }
        card.record(
            "10-moment-growth-bound",
            pass,
            format!("{} vs upper bound 2.7", details.join(", ")),
        );
    }

    // 11. Local entropy vanishes: the t = 50 value is well below the peak
    //     and the tail decreases monotonically after it.
    {
        let mut pass = true;
        let mut details = Vec::new();
        for i in 1..=species {
            let series = series_pairs(&table, &format!("local_entropy_{i}"));
            let abs: Vec<(f64, f64)> = series.iter().map(|(t, v)| (*t, v.abs())).collect();
            let (peak_idx, peak) = abs
                .iter()
                .enumerate()
                .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
                .map(|(idx, (_, v))| (idx, *v))
                .unwrap();
            let at_50 = abs
                .iter()
                .min_by(|a, b| (a.0 - 50.0).abs().total_cmp(&(b.0 - 50.0).abs()))
                .unwrap()
                .1;
            let late_ok = at_50 <= 0.25 * peak;
            // Monotone decrease after the peak, within 1 percent of the
            // peak for sampling noise.
            let slack = 0.01 * peak;
            let mut monotone = true;
            for w in abs[peak_idx..].windows(2) {
                if w[1].1 > w[0].1 + slack {
                    monotone = false;
                }
            }
            pass &= late_ok && monotone;
            details.push(format!(
                "c{i}: |loc(50)| = {at_50:.3} vs peak {peak:.3}, monotone = {monotone}"
            ));
        }
        card.record("11-local-entropy-vanishing", pass, details.join("; "));
    }

    // 12. Pointwise Fourier-shell bound with the calibrated constant.
    {
        let worst = series_pairs(&table, "shell_ratio_max")
            .iter()
            .map(|(_, v)| *v)
            .fold(0.0f64, f64::max);
        card.record(
            "12-fourier-shell-bound",
            worst <= 1.0,
            format!("max shell ratio {worst:.4} (gate 1 with C = 1.1)"),
        );
    }

    // 13. Elliptic-estimate ratios bounded over the run.
    {
        let mut pass = true;
        let mut details = Vec::new();
        for j in 1..=4 {
            let series = series_pairs(&table, &format!("ell_ratio_{j}"));
            let r0 = series[0].1;
            let sup = series.iter().map(|(_, v)| *v).fold(0.0f64, f64::max);
            let ok = sup.is_finite() && sup <= 10.0 * r0;
            pass &= ok;
            details.push(format!("r{j}: sup {sup:.3} vs 10x t0 {:.3}", 10.0 * r0));
        }
        card.record("13-elliptic-ratios-bounded", pass, details.join("; "));
    }

    // 14. Integrator self-convergence on a short nonlinear burst of the
    //     same scenario.
    {
        let (state, _) = make_initial_state(
            config.grid_spec().unwrap(),
            config.species_params().unwrap(),
            &config.bumps(),
        )
        .unwrap();
        let order = self_convergence_order(&state, 0.125, 2).unwrap();
        card.record(
            "14-integrator-order",
            order >= 3.7,
            format!("measured order {order:.2} (gate 3.7)"),
        );
    }

    // 15. Determinism: an identical second run produces a byte-identical
    //     series file.
    {
        let out2 = dir.path().join("run2");
        let mut opts2 = ExecOpts::new(&out2);
        opts2.deterministic = true;
        let artifacts2 = cmd_run(&config, &opts2).expect("determinism rerun failed");
        let bytes1 = std::fs::read(&artifacts.series_path).unwrap();
        let bytes2 = std::fs::read(&artifacts2.series_path).unwrap();
        card.record(
            "15-determinism",
            bytes1 == bytes2,
            format!(
                "series files {} bytes vs {} bytes, identical = {}",
                bytes1.len(),
                bytes2.len(),
                bytes1 == bytes2
            ),
        );
    }

    card.finish();
}

fn column_values(table: &Table, name: &str) -> Vec<f64> {
    table.column(name).unwrap()
}
