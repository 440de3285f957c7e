//! Reports: the run summary document, fit specifications and verdict
//! tables, and emitted plot scripts with plain-text data extracts.
//!
//! All report documents are nested key-value TOML, human-readable and
//! trivially machine-parseable.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::diagnostics::DiagRecord;
use crate::error::Error;
use crate::model::InitReport;
use crate::rates::{fit_log_law, fit_power_law, verdict, BoundMode, FitWindow};
use crate::series::Table;
use crate::Result;

/// Facts about how a run executed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSection {
    pub config_hash: String,
    pub code_version: String,
    pub started_at_unix: u64,
    pub wall_seconds: f64,
    pub dt: f64,
    pub steps: u64,
    pub records: u64,
    pub record_every_steps: u64,
    pub deterministic: bool,
    pub resumed_from: Option<String>,
}

/// Echo of the constructed initial state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitSection {
    pub masses: Vec<f64>,
    pub neutralization_factor: f64,
    pub residual_charge: f64,
    pub rho0_l1: f64,
    pub sigma0_l1: f64,
    pub max_c0: f64,
    pub entropies: Vec<f64>,
    pub moments: Vec<f64>,
    pub warnings: Vec<String>,
}

impl From<&InitReport> for InitSection {
    fn from(r: &InitReport) -> Self {
        Self {
            masses: r.masses.clone(),
            neutralization_factor: r.neutralization_factor,
            residual_charge: r.residual_charge,
            rho0_l1: r.rho0_l1,
            sigma0_l1: r.sigma0_l1,
            max_c0: r.max_c0,
            entropies: r.entropies.clone(),
            moments: r.moments.clone(),
            warnings: r.warnings.clone(),
        }
    }
}

/// Condensed view of the last record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FinalSection {
    pub t: f64,
    pub masses: Vec<f64>,
    pub charge_total: f64,
    pub l2sq: Vec<f64>,
    pub entropy_total: f64,
    pub rho_l2sq: f64,
    pub u_l2sq: f64,
    pub r_energy: f64,
    pub r_l2: f64,
    pub shell_ratio_max: f64,
    pub min_c: Vec<f64>,
}

impl From<&DiagRecord> for FinalSection {
    fn from(r: &DiagRecord) -> Self {
        Self {
            t: r.t,
            masses: r.masses.clone(),
            charge_total: r.charge_total,
            l2sq: r.l2sq.clone(),
            entropy_total: r.entropy_total,
            rho_l2sq: r.rho_l2sq,
            u_l2sq: r.u_l2sq,
            r_energy: r.r_energy,
            r_l2: r.r_l2,
            shell_ratio_max: r.shell_ratio_max,
            min_c: r.min_c.clone(),
        }
    }
}

/// The summary document written next to the series file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryDoc {
    pub run: RunSection,
    pub init: InitSection,
    #[serde(rename = "final")]
    pub final_record: FinalSection,
    pub config: RunConfig,
}

pub fn write_summary(path: &Path, doc: &SummaryDoc) -> Result<()> {
    let text = toml::to_string_pretty(doc).map_err(|e| Error::Format {
        path: path.display().to_string(),
        message: format!("summary serialization failed: {e}"),
    })?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Machine-readable failure record for aborted runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FailureDoc {
    pub kind: String,
    pub message: String,
}

pub fn write_failure(path: &Path, err: &Error) -> Result<()> {
    let kind = match err {
        Error::PositivityAbort { .. } => "positivity_abort",
        Error::BlowUp { .. } => "blow_up",
        Error::Compatibility(_) => "compatibility",
        Error::Config { .. } => "config",
        _ => "error",
    };
    let doc = FailureDoc {
        kind: kind.into(),
        message: format!("{err}"),
    };
    let text = toml::to_string_pretty(&doc).map_err(|e| Error::Format {
        path: path.display().to_string(),
        message: format!("failure serialization failed: {e}"),
    })?;
    std::fs::write(path, text)?;
    Ok(())
}

/// One claim of a fit specification: which column, which law, and what the
/// verdict compares against.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitClaim {
    pub id: String,
    pub column: String,
    /// "power" or "log".
    pub model: String,
    pub predicted: f64,
    pub tolerance: f64,
    /// "two-sided", "upper-bound", or "lower-bound".
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitSpec {
    pub claims: Vec<FitClaim>,
}

fn parse_mode(s: &str) -> Result<BoundMode> {
    match s {
        "two-sided" => Ok(BoundMode::TwoSided),
        "upper-bound" => Ok(BoundMode::UpperBound),
        "lower-bound" => Ok(BoundMode::LowerBound),
        other => Err(Error::Fit(format!(
            "unknown verdict mode `{other}`; use two-sided, upper-bound, or lower-bound"
        ))),
    }
}

/// Outcome row of one claim.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitOutcome {
    pub id: String,
    pub column: String,
    pub model: String,
    pub measured: f64,
    pub predicted: f64,
    pub tolerance: f64,
    pub mode: String,
    pub rms_residual: f64,
    pub points: usize,
    pub window: [f64; 2],
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub series_config_hash: Option<String>,
    pub outcomes: Vec<FitOutcome>,
    pub all_pass: bool,
}

/// Run every claim of a spec against a series table.
pub fn run_fit_spec(table: &Table, spec: &FitSpec, default_window: FitWindow) -> Result<FitReport> {
    let mut outcomes = Vec::with_capacity(spec.claims.len());
    for claim in &spec.claims {
        let series = table.series(&claim.column)?;
        let window = match claim.window {
            Some([a, b]) => FitWindow {
                t_start: a,
                t_end: b,
                min_points: default_window.min_points,
            },
            None => default_window,
        };
        let fit = match claim.model.as_str() {
            "power" => fit_power_law(&series, window)?,
            "log" => fit_log_law(&series, window)?,
            other => {
                return Err(Error::Fit(format!(
                    "unknown fit model `{other}` in claim `{}`; use power or log",
                    claim.id
                )))
            }
        };
        let mode = parse_mode(&claim.mode)?;
        let v = verdict(&fit, claim.predicted, claim.tolerance, mode)?;
        outcomes.push(FitOutcome {
            id: claim.id.clone(),
            column: claim.column.clone(),
            model: claim.model.clone(),
            measured: v.measured,
            predicted: v.predicted,
            tolerance: v.tolerance,
            mode: claim.mode.clone(),
            rms_residual: fit.rms_residual,
            points: fit.points,
            window: [window.t_start, window.t_end],
            pass: v.pass,
        });
    }
    let all_pass = outcomes.iter().all(|o| o.pass);
    Ok(FitReport {
        series_config_hash: table.meta.get("config_hash").cloned(),
        outcomes,
        all_pass,
    })
}

/// The built-in claims for a series: decay exponents of every species'
/// norms, the heat-difference exponents when present, the entropy log law,
/// moment growth, and the linear lower growth of the exponential entropy.
pub fn default_fit_spec(table: &Table) -> Result<FitSpec> {
    let species: usize = table
        .meta
        .get("species")
        .and_then(|s| s.parse().ok())
        .unwrap_or(1);
    let k_max: usize = table
        .meta
        .get("k_max")
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let mut claims = Vec::new();
    for i in 1..=species {
        claims.push(FitClaim {
            id: format!("l2-decay-c{i}"),
            column: format!("l2sq_c{i}"),
            model: "power".into(),
            predicted: -1.5,
            tolerance: 0.2,
            mode: "two-sided".into(),
            window: None,
        });
        if k_max >= 1 && table.column_index(&format!("hksq_1_c{i}")).is_ok() {
            claims.push(FitClaim {
                id: format!("grad-decay-c{i}"),
                column: format!("hksq_1_c{i}"),
                model: "power".into(),
                predicted: -2.5,
                tolerance: 0.3,
                mode: "two-sided".into(),
                window: None,
            });
        }
        if k_max >= 2 && table.column_index(&format!("hksq_2_c{i}")).is_ok() {
            claims.push(FitClaim {
                id: format!("lambda2-decay-c{i}"),
                column: format!("hksq_2_c{i}"),
                model: "power".into(),
                predicted: -3.5,
                tolerance: 0.4,
                mode: "two-sided".into(),
                window: None,
            });
        }
    }
    // Heat-difference claims only when the sharpness columns carry data.
    let have_sharp = table
        .column(&format!("sharp_0_c1"))
        .map(|col| col.iter().any(|v| v.is_finite()))
        .unwrap_or(false);
    if have_sharp {
        for i in 1..=species {
            claims.push(FitClaim {
                id: format!("heat-diff-k0-c{i}"),
                column: format!("sharp_0_c{i}"),
                model: "power".into(),
                predicted: -2.0,
                tolerance: 0.2,
                mode: "upper-bound".into(),
                window: None,
            });
            if k_max >= 1 && table.column_index(&format!("sharp_1_c{i}")).is_ok() {
                claims.push(FitClaim {
                    id: format!("heat-diff-k1-c{i}"),
                    column: format!("sharp_1_c{i}"),
                    model: "power".into(),
                    predicted: -3.0,
                    tolerance: 0.3,
                    mode: "upper-bound".into(),
                    window: None,
                });
            }
        }
    }
    // Entropy log-law: the expected slope is -(3/2) of the total mass, read
    // from the first record.
    if !table.rows.is_empty() {
        let mut m_total = 0.0;
        for i in 1..=species {
            m_total += table.column(&format!("mass_{i}"))?[0];
        }
        claims.push(FitClaim {
            id: "entropy-log".into(),
            column: "entropy_total".into(),
            model: "log".into(),
            predicted: -1.5 * m_total,
            tolerance: 0.3 * 1.5 * m_total,
            mode: "two-sided".into(),
            window: None,
        });
    }
    for i in 1..=species {
        let moment_col = format!("moment6_{i}");
        let has_moment = table
            .column(&moment_col)
            .map(|col| col.iter().any(|v| v.is_finite()))
            .unwrap_or(false);
        if has_moment {
            claims.push(FitClaim {
                id: format!("moment-growth-c{i}"),
                column: moment_col,
                model: "power".into(),
                predicted: 2.5,
                tolerance: 0.2,
                mode: "upper-bound".into(),
                window: None,
            });
        }
        if table.column_index(&format!("exp_entropy_{i}")).is_ok() {
            claims.push(FitClaim {
                id: format!("exp-entropy-growth-c{i}"),
                column: format!("exp_entropy_{i}"),
                model: "power".into(),
                predicted: 1.0,
                tolerance: 0.35,
                mode: "lower-bound".into(),
                window: None,
            });
        }
    }
    Ok(FitSpec { claims })
}

/// Fixed-width pass/fail table for terminals and logs.
pub fn fit_table(report: &FitReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<24} {:<14} {:>10} {:>10} {:>6} {:<12} {:>8}  {}\n",
        "claim", "column", "measured", "predicted", "tol", "mode", "rms", "verdict"
    ));
    for o in &report.outcomes {
        out.push_str(&format!(
            "{:<24} {:<14} {:>10.4} {:>10.4} {:>6.3} {:<12} {:>8.2e}  {}\n",
            o.id,
            o.column,
            o.measured,
            o.predicted,
            o.tolerance,
            o.mode,
            o.rms_residual,
            if o.pass { "pass" } else { "FAIL" }
        ));
    }
    out
}

pub fn write_fit_report(path: &Path, report: &FitReport) -> Result<()> {
    let text = toml::to_string_pretty(report).map_err(|e| Error::Format {
        path: path.display().to_string(),
        message: format!("fit report serialization failed: {e}"),
    })?;
    std::fs::write(path, text)?;
    Ok(())
}

fn write_extract(path: &Path, table: &Table, columns: &[&str]) -> Result<()> {
    let mut selected = Vec::new();
    for name in columns {
        if table.column_index(name).is_ok() {
            selected.push(*name);
        }
    }
    let mut text = String::new();
    text.push_str(&format!("# {}\n", selected.join(" ")));
    let idx: Vec<usize> = selected
        .iter()
        .map(|c| table.column_index(c).unwrap())
        .collect();
    for row in &table.rows {
        let fields: Vec<String> = idx
            .iter()
            .map(|&i| crate::series::format_value(row[i]))
            .collect();
        text.push_str(&fields.join(" "));
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Emit plain-text extracts and matplotlib scripts: log-log norm decay with
/// reference slopes, entropy against log(1+t), moment growth, and identity
/// residuals.
pub fn emit_plots(table: &Table, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let plots = out_dir.join("plots");
    std::fs::create_dir_all(&plots)?;
    let species: usize = table
        .meta
        .get("species")
        .and_then(|s| s.parse().ok())
        .unwrap_or(1);
    let k_max: usize = table
        .meta
        .get("k_max")
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);

    let mut norm_cols: Vec<String> = vec!["t".into()];
    for i in 1..=species {
        norm_cols.push(format!("l2sq_c{i}"));
    }
    for k in 1..=k_max {
        for i in 1..=species {
            norm_cols.push(format!("hksq_{k}_c{i}"));
        }
    }
    for k in 0..=k_max {
        for i in 1..=species {
            norm_cols.push(format!("sharp_{k}_c{i}"));
        }
    }
    let norm_refs: Vec<&str> = norm_cols.iter().map(|s| s.as_str()).collect();
    write_extract(&plots.join("norms.dat"), table, &norm_refs)?;

    let mut entropy_cols: Vec<String> = vec!["t".into(), "entropy_total".into()];
    for i in 1..=species {
        entropy_cols.push(format!("entropy_{i}"));
        entropy_cols.push(format!("exp_entropy_{i}"));
        entropy_cols.push(format!("local_entropy_{i}"));
    }
    let entropy_refs: Vec<&str> = entropy_cols.iter().map(|s| s.as_str()).collect();
    write_extract(&plots.join("entropy.dat"), table, &entropy_refs)?;

    let mut moment_cols: Vec<String> = vec!["t".into()];
    for i in 1..=species {
        moment_cols.push(format!("moment6_{i}"));
    }
    let moment_refs: Vec<&str> = moment_cols.iter().map(|s| s.as_str()).collect();
    write_extract(&plots.join("moment.dat"), table, &moment_refs)?;

    write_extract(
        &plots.join("residuals.dat"),
        table,
        &[
            "t",
            "R_energy",
            "R_L2",
            "shell_ratio_max",
            "ell_ratio_1",
            "ell_ratio_2",
            "ell_ratio_3",
            "ell_ratio_4",
        ],
    )?;

    let norms_py = format!(
        r#"#!/usr/bin/env python3
"""Log-log decay of species norms with reference slopes."""
import numpy as np
import matplotlib.pyplot as plt

data = np.genfromtxt("norms.dat", names=True)
t1 = data["t"] + 1.0
fig, ax = plt.subplots(figsize=(7, 5))
species = {species}
k_max = {k_max}
for i in range(1, species + 1):
    ax.loglog(t1, data[f"l2sq_c{{i}}"], label=f"||c{{i}}||^2")
    for k in range(1, k_max + 1):
        ax.loglog(t1, data[f"hksq_{{k}}_c{{i}}"], label=f"||D^{{k}} c{{i}}||^2")
for slope, style in [(-1.5, "--"), (-2.5, ":"), (-3.5, "-.")]:
    ref = t1 ** slope * data["l2sq_c1"][0] / t1[0] ** slope
    ax.loglog(t1, ref, style, color="gray", lw=1, label=f"slope {{slope}}")
ax.set_xlabel("t + 1")
ax.set_ylabel("squared norm")
ax.legend(fontsize=7)
fig.tight_layout()
fig.savefig("norms_loglog.png", dpi=150)
print("wrote norms_loglog.png")
"#
    );
    std::fs::write(plots.join("norms_loglog.py"), norms_py)?;

    let entropy_py = format!(
        r#"#!/usr/bin/env python3
"""Entropy against log(1+t); the late-time slope approaches -(3/2) total mass."""
import numpy as np
import matplotlib.pyplot as plt

data = np.genfromtxt("entropy.dat", names=True)
x = np.log1p(data["t"])
fig, axes = plt.subplots(1, 2, figsize=(11, 4.5))
axes[0].plot(x, data["entropy_total"], label="total")
species = {species}
for i in range(1, species + 1):
    axes[0].plot(x, data[f"entropy_{{i}}"], "--", label=f"species {{i}}")
axes[0].set_xlabel("log(1 + t)")
axes[0].set_ylabel("entropy")
axes[0].legend(fontsize=8)
for i in range(1, species + 1):
    axes[1].plot(data["t"], data[f"exp_entropy_{{i}}"], label=f"N_{{i}}")
axes[1].set_xlabel("t")
axes[1].set_ylabel("exponential entropy")
axes[1].legend(fontsize=8)
fig.tight_layout()
fig.savefig("entropy.png", dpi=150)
print("wrote entropy.png")
"#
    );
    std::fs::write(plots.join("entropy_log.py"), entropy_py)?;

    let moment_py = format!(
        r#"#!/usr/bin/env python3
"""Sixth-moment growth against the (t+1)^{{5/2}} envelope."""
import numpy as np
import matplotlib.pyplot as plt

data = np.genfromtxt("moment.dat", names=True)
t1 = data["t"] + 1.0
fig, ax = plt.subplots(figsize=(7, 5))
species = {species}
for i in range(1, species + 1):
    ax.loglog(t1, data[f"moment6_{{i}}"], label=f"moment6 c{{i}}")
ref = t1 ** 2.5 * data["moment6_1"][1] / t1[1] ** 2.5
ax.loglog(t1, ref, "--", color="gray", label="slope 2.5 (bound)")
ref15 = t1 ** 1.5 * data["moment6_1"][1] / t1[1] ** 1.5
ax.loglog(t1, ref15, ":", color="gray", label="slope 1.5 (heat)")
ax.set_xlabel("t + 1")
ax.set_ylabel("integral r^6 c^2")
ax.legend(fontsize=8)
fig.tight_layout()
fig.savefig("moment.png", dpi=150)
print("wrote moment.png")
"#
    );
    std::fs::write(plots.join("moment_growth.py"), moment_py)?;

    let residuals_py = r#"#!/usr/bin/env python3
"""Exact-identity residuals, shell-bound ratio, and elliptic ratios."""
import numpy as np
import matplotlib.pyplot as plt

data = np.genfromtxt("residuals.dat", names=True)
fig, axes = plt.subplots(1, 2, figsize=(11, 4.5))
axes[0].semilogy(data["t"], data["R_energy"], label="R_energy")
axes[0].semilogy(data["t"], data["R_L2"], label="R_L2")
axes[0].set_xlabel("t")
axes[0].set_ylabel("relative residual")
axes[0].legend(fontsize=8)
axes[1].plot(data["t"], data["shell_ratio_max"], label="shell ratio")
for j in range(1, 5):
    axes[1].plot(data["t"], data[f"ell_ratio_{j}"], "--", label=f"elliptic {j}")
axes[1].set_xlabel("t")
axes[1].legend(fontsize=8)
fig.tight_layout()
fig.savefig("residuals.png", dpi=150)
print("wrote residuals.png")
"#;
    std::fs::write(plots.join("residuals.py"), residuals_py)?;

    Ok(vec![
        plots.join("norms.dat"),
        plots.join("entropy.dat"),
        plots.join("moment.dat"),
        plots.join("residuals.dat"),
        plots.join("norms_loglog.py"),
        plots.join("entropy_log.py"),
        plots.join("moment_growth.py"),
        plots.join("residuals.py"),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn synthetic_table() -> Table {
        let columns: Vec<String> = [
            "t",
            "mass_1",
            "l2sq_c1",
            "hksq_1_c1",
            "sharp_0_c1",
            "moment6_1",
            "exp_entropy_1",
            "entropy_total",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let mut rows = Vec::new();
        for step in 0..40 {
            let t = step as f64;
            let t1 = t + 1.0;
            rows.push(vec![
                t,
                2.0,
                3.0 * t1.powf(-1.5),
                1.0 * t1.powf(-2.5),
                0.5 * t1.powf(-2.2),
                0.1 * t1.powf(1.5),
                2.0 * t1.powf(1.0),
                1.0 - 3.0 * t1.ln(),
            ]);
        }
        let mut meta = BTreeMap::new();
        meta.insert("species".into(), "1".into());
        meta.insert("k_max".into(), "1".into());
        meta.insert("config_hash".into(), "cafe".into());
        Table {
            meta,
            columns,
            rows,
        }
    }

    #[test]
    fn default_spec_and_verdicts() {
        let table = synthetic_table();
        let spec = default_fit_spec(&table).unwrap();
        let ids: Vec<&str> = spec.claims.iter().map(|c| c.id.as_str()).collect();
        assert!(ids.contains(&"l2-decay-c1"));
        assert!(ids.contains(&"grad-decay-c1"));
        assert!(ids.contains(&"heat-diff-k0-c1"));
        assert!(ids.contains(&"entropy-log"));
        let window = FitWindow::new(10.0, 35.0);
        let report = run_fit_spec(&table, &spec, window).unwrap();
        assert!(report.all_pass, "table:\n{}", fit_table(&report));
        // entropy-log predicted slope is -1.5 * mass = -3.0, matching the
        // synthetic series exactly.
        let entropy = report
            .outcomes
            .iter()
            .find(|o| o.id == "entropy-log")
            .unwrap();
        assert!((entropy.measured + 3.0).abs() < 1e-9);
    }

    #[test]
    fn failed_claim_reported() {
        let table = synthetic_table();
        let spec = FitSpec {
            claims: vec![FitClaim {
                id: "wrong".into(),
                column: "l2sq_c1".into(),
                model: "power".into(),
                predicted: -3.0,
                tolerance: 0.1,
                mode: "two-sided".into(),
                window: None,
            }],
        };
        let report = run_fit_spec(&table, &spec, FitWindow::new(5.0, 35.0)).unwrap();
        assert!(!report.all_pass);
        assert!(fit_table(&report).contains("FAIL"));
    }

    #[test]
    fn spec_round_trips_through_toml() {
        let table = synthetic_table();
        let spec = default_fit_spec(&table).unwrap();
        let text = toml::to_string_pretty(&spec).unwrap();
        let back: FitSpec = toml::from_str(&text).unwrap();
        assert_eq!(back.claims.len(), spec.claims.len());
    }

    #[test]
    fn plots_emitted() {
        let table = synthetic_table();
        let dir = tempfile::tempdir().unwrap();
        let files = emit_plots(&table, dir.path()).unwrap();
        for f in files {
            assert!(f.exists(), "{f:?} missing");
        }
    }
}
