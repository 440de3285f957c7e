//! Orchestration behind the `npd` binary: run, baseline, fit, check, plot.
//! Each command is an ordinary library function so tests and examples can
//! drive the same paths end to end.

use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::checkpoint::{read_checkpoint, write_checkpoint};
use crate::config::RunConfig;
use crate::diagnostics::{measure, DiagContext, DiagRecord, DiagSettings};
use crate::error::Error;
use crate::heat::HeatBaseline;
use crate::integrator::{
    cfl_dt, run_until, self_convergence_order, CflParams, Observer, StepGuards, StepInfo,
};
use crate::model::{make_initial_state, rhs_full, InitReport, NpdState, RhsBundle};
use crate::report::{
    default_fit_spec, emit_plots, run_fit_spec, write_failure, write_fit_report,
    write_summary, FinalSection, FitReport, FitSpec, InitSection, RunSection, SummaryDoc,
};
use crate::series::{read_table, SeriesMeta, SeriesWriter, Table};
use crate::Result;

/// Execution options shared by the subcommands.
#[derive(Debug, Clone)]
pub struct ExecOpts {
    pub out_dir: PathBuf,
    /// Intra-run worker count; 0 selects automatically. The current build
    /// evaluates transforms sequentially, so any value yields identical
    /// results; the flag is honored for interface stability.
    pub threads: usize,
    /// Force sequential reductions for bitwise-reproducible series files.
    /// Reductions are always sequential in this build, so this only marks
    /// the run metadata.
    pub deterministic: bool,
    pub resume: Option<PathBuf>,
}

impl ExecOpts {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            out_dir: out_dir.into(),
            threads: 0,
            deterministic: false,
            resume: None,
        }
    }
}

/// What `run` leaves on disk.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub series_path: PathBuf,
    pub summary_path: Option<PathBuf>,
    pub init_checkpoint: Option<PathBuf>,
    pub final_checkpoint: PathBuf,
    pub dt: f64,
    pub steps: u64,
    pub records: u64,
}

/// Step size and record cadence resolved from config and initial state:
/// automatic `dt` picks the CFL bound at `t = 0`, then shrinks so a whole
/// number of steps spans one diagnostic interval.
pub fn resolve_dt(config: &RunConfig, state: &NpdState) -> Result<(f64, u64)> {
    let stepper = config.stepper();
    let cadence = config.diagnostics.cadence;
    let dt = match stepper.dt {
        Some(dt) => dt,
        None => {
            let bound = cfl_dt(state, stepper.cfl_safety, stepper.dt_max)?;
            cadence / (cadence / bound).ceil().max(1.0)
        }
    };
    let record_every = (cadence / dt).round().max(1.0) as u64;
    Ok((dt, record_every))
}

struct RunObserver {
    writer: SeriesWriter<BufWriter<std::fs::File>>,
    settings: DiagSettings,
    baseline: Option<HeatBaseline>,
    sigma0_l1: f64,
    checkpoint_times: Vec<f64>,
    written_checkpoints: Vec<bool>,
    dt: f64,
    out_dir: PathBuf,
    last_record: Option<DiagRecord>,
    records: u64,
}

impl Observer for RunObserver {
    fn record(&mut self, state: &NpdState, bundle: &RhsBundle, _step_index: u64) -> Result<()> {
        let ctx = DiagContext {
            settings: self.settings.clone(),
            baseline: self.baseline.as_ref(),
            sigma0_l1: self.sigma0_l1,
        };
        let record = measure(state, bundle, &ctx)?;
        self.writer.write_record(&record)?;
        self.last_record = Some(record);
        self.records += 1;
        for (i, &t_ckpt) in self.checkpoint_times.iter().enumerate() {
            if !self.written_checkpoints[i] && (state.time() - t_ckpt).abs() <= self.dt / 2.0 {
                let path = self.out_dir.join(format!("ckpt_{:09.3}.ckpt", state.time()));
                write_checkpoint(&path, state)?;
                self.written_checkpoints[i] = true;
            }
        }
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        self.writer.flush()
    }

    fn on_step(&mut self, _info: &StepInfo, _step_index: u64) -> Result<()> {
        Ok(())
    }
}

/// Execute a configured run end to end: initial state (or resume), time
/// stepping with per-record diagnostics streamed to `series.csv`,
/// checkpoints, and the summary document. On abort, partial series data is
/// flushed and a machine-readable `failure.toml` is written before the
/// error is returned.
pub fn cmd_run(config: &RunConfig, opts: &ExecOpts) -> Result<RunArtifacts> {
    config.validate()?;
    let started = Instant::now();
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    std::fs::create_dir_all(&opts.out_dir)?;
    std::fs::write(
        opts.out_dir.join("config.normalized.toml"),
        config.normalized(),
    )?;

    let grid = config.grid_spec()?;
    let params = config.species_params()?;

    // Fresh start or resume.
    let (state, init_report, init_ckpt_path) = match &opts.resume {
        None => {
            let (state, report) = make_initial_state(grid, params, &config.bumps())?;
            let path = opts.out_dir.join("init.ckpt");
            write_checkpoint(&path, &state)?;
            (state, report, Some(path))
        }
        Some(ckpt) => {
            let state = read_checkpoint(ckpt)?;
            crate::grid::same_grid(state.grid(), &grid)?;
            let report = resumed_report(&state)?;
            (state, report, None)
        }
    };

    // The heat baseline shares the run's initial data; on resume it is
    // recovered from the original init checkpoint when available.
    let baseline = match &opts.resume {
        None => Some(HeatBaseline::new(&state)),
        Some(_) => {
            let candidate = opts.out_dir.join("init.ckpt");
            if candidate.exists() {
                Some(HeatBaseline::new(&read_checkpoint(&candidate)?))
            } else {
                None
            }
        }
    };

    let (dt, record_every) = resolve_dt(config, &state)?;
    let stepper = config.stepper();
    let positivity_floor = config.diagnostics.positivity_tolerance * init_report.max_c0;
    let guards = StepGuards {
        positivity_floor: Some(positivity_floor),
        cfl: Some(CflParams {
            cfl_safety: stepper.cfl_safety,
            dt_max: stepper.dt_max,
        }),
    };

    let series_path = opts.out_dir.join("series.csv");
    let meta = SeriesMeta {
        config_hash: config.hash(),
        code_version: env!("CARGO_PKG_VERSION").into(),
        box_length: config.grid.box_length,
        resolution: config.grid.resolution,
        species: config.species.len(),
        k_max: config.diagnostics.k_max,
    };
    // The series file is the primary artifact and is always produced; the
    // formats list controls the optional summary document.
    let want_summary = config.output.formats.iter().any(|f| f == "summary");
    let file = std::fs::File::create(&series_path)?;
    let writer = SeriesWriter::new(BufWriter::new(file), &meta)?;
    let n_ckpts = config.output.checkpoint_times.len();
    let mut observer = RunObserver {
        writer,
        settings: DiagSettings {
            k_max: config.diagnostics.k_max,
            local_radius: config.local_radius(),
            shell_constant: config.diagnostics.shell_constant,
            negativity_tol: positivity_floor,
            moment_enabled: config.diagnostics.moment,
        },
        baseline,
        sigma0_l1: init_report.sigma0_l1,
        checkpoint_times: config.output.checkpoint_times.clone(),
        written_checkpoints: vec![false; n_ckpts],
        dt,
        out_dir: opts.out_dir.clone(),
        last_record: None,
        records: 0,
    };

    let final_state = match run_until(
        state,
        dt,
        stepper.t_end,
        record_every,
        &guards,
        config.diagnostics.pressure,
        &mut observer,
    ) {
        Ok(s) => s,
        Err(e) => {
            write_failure(&opts.out_dir.join("failure.toml"), &e)?;
            return Err(e);
        }
    };
    let final_ckpt = opts.out_dir.join("final.ckpt");
    write_checkpoint(&final_ckpt, &final_state)?;

    let steps = ((stepper.t_end - 0.0) / dt).round().max(0.0) as u64;
    let summary_path = if want_summary {
        let doc = SummaryDoc {
            run: RunSection {
                config_hash: config.hash(),
                code_version: env!("CARGO_PKG_VERSION").into(),
                started_at_unix: started_unix,
                wall_seconds: started.elapsed().as_secs_f64(),
                dt,
                steps,
                records: observer.records,
                record_every_steps: record_every,
                deterministic: opts.deterministic,
                resumed_from: opts
                    .resume
                    .as_ref()
                    .map(|p| p.display().to_string()),
            },
            init: InitSection::from(&init_report),
            final_record: observer
                .last_record
                .as_ref()
                .map(FinalSection::from)
                .ok_or_else(|| Error::InvalidState("run produced no records".into()))?,
            config: config.clone(),
        };
        let path = opts.out_dir.join("summary.toml");
        write_summary(&path, &doc)?;
        Some(path)
    } else {
        None
    };

    Ok(RunArtifacts {
        series_path,
        summary_path,
        init_checkpoint: init_ckpt_path,
        final_checkpoint: final_ckpt,
        dt,
        steps,
        records: observer.records,
    })
}

fn resumed_report(state: &NpdState) -> Result<InitReport> {
    // Minimal facts recomputed from the resumed state; entropy and moments
    // are filled by the first record instead.
    let bundle = rhs_full(state, false)?;
    let cell = state.grid().cell_volume();
    let masses: Vec<f64> = (0..state.species_count()).map(|i| state.mass(i)).collect();
    let rho0_l1 = bundle.physical.rho.iter().map(|v| v.abs()).sum::<f64>() * cell;
    let sigma0_l1 = bundle
        .physical
        .sigma
        .iter()
        .map(|v| v.abs())
        .sum::<f64>()
        * cell;
    let max_c0 = bundle
        .physical
        .concentrations
        .iter()
        .flat_map(|c| c.iter())
        .fold(0.0f64, |a, &v| a.max(v));
    let min_c0 = (0..state.species_count())
        .map(|i| bundle.physical.min_c(i))
        .collect();
    Ok(InitReport {
        masses,
        neutralization_factor: 1.0,
        residual_charge: state.total_charge(),
        rho0_l1,
        sigma0_l1,
        max_c0,
        min_c0,
        entropies: vec![],
        moments: vec![],
        warnings: vec!["resumed from checkpoint; initial entropies not recomputed".into()],
    })
}

/// Replay the exact heat flow of the run's initial data at every recorded
/// time and write a companion series: heat-side norms `heatsq_k_ci` next to
/// the run's difference norms `sharp_k_ci`.
pub fn cmd_baseline(series_path: &Path, init_checkpoint: &Path, out_dir: &Path) -> Result<PathBuf> {
    let table = read_table(series_path)?;
    let init = read_checkpoint(init_checkpoint)?;
    let baseline = HeatBaseline::new(&init);
    let species = init.species_count();
    let k_max: usize = table
        .meta
        .get("k_max")
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);

    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join("baseline.csv");
    let mut text = String::new();
    for (k, v) in &table.meta {
        text.push_str(&format!("# {k} = {v}\n"));
    }
    let mut cols = vec!["t".to_string()];
    for k in 0..=k_max {
        for i in 1..=species {
            cols.push(format!("heatsq_{k}_c{i}"));
        }
    }
    for k in 0..=k_max {
        for i in 1..=species {
            cols.push(format!("sharp_{k}_c{i}"));
        }
    }
    text.push_str(&cols.join(","));
    text.push('\n');

    let times = table.times()?;
    for (row_idx, &t) in times.iter().enumerate() {
        let evolved = baseline.heat_evolve(t)?;
        let mut row: Vec<f64> = vec![t];
        for k in 0..=k_max {
            for c in &evolved {
                row.push(crate::diagnostics::sobolev_norm_sq(c, k as f64)?);
            }
        }
        for k in 0..=k_max {
            for i in 1..=species {
                let name = format!("sharp_{k}_c{i}");
                let v = match table.column_index(&name) {
                    Ok(idx) => table.rows[row_idx][idx],
                    Err(_) => f64::NAN,
                };
                row.push(v);
            }
        }
        let fields: Vec<String> = row.iter().map(|v| crate::series::format_value(*v)).collect();
        text.push_str(&fields.join(","));
        text.push('\n');
    }
    std::fs::write(&path, text)?;
    Ok(path)
}

/// Fit every claim of the spec (or the built-in defaults) against a series
/// and write the verdict table.
pub fn cmd_fit(
    series_path: &Path,
    fit_spec_path: Option<&Path>,
    out_dir: &Path,
) -> Result<(FitReport, PathBuf)> {
    let table = read_table(series_path)?;
    let spec: FitSpec = match fit_spec_path {
        Some(p) => toml::from_str(&std::fs::read_to_string(p)?).map_err(|e| Error::Config {
            path: p.display().to_string(),
            message: e.to_string(),
        })?,
        None => default_fit_spec(&table)?,
    };
    let times = table.times()?;
    let t_last = *times.last().ok_or_else(|| Error::Format {
        path: series_path.display().to_string(),
        message: "series has no records".into(),
    })?;
    let window = crate::rates::FitWindow {
        t_start: 0.3 * t_last,
        t_end: 0.9 * t_last,
        min_points: 5,
    };
    let report = run_fit_spec(&table, &spec, window)?;
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join("fits.toml");
    write_fit_report(&path, &report)?;
    Ok((report, path))
}

/// One verification gate of `check`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateOutcome {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckReport {
    pub gates: Vec<GateOutcome>,
    pub pass: bool,
}

/// Collects records in memory.
pub struct VecObserver {
    pub records: Vec<DiagRecord>,
    pub settings: DiagSettings,
    pub baseline: Option<HeatBaseline>,
    pub sigma0_l1: f64,
}

impl Observer for VecObserver {
    fn record(&mut self, state: &NpdState, bundle: &RhsBundle, _step_index: u64) -> Result<()> {
        let ctx = DiagContext {
            settings: self.settings.clone(),
            baseline: self.baseline.as_ref(),
            sigma0_l1: self.sigma0_l1,
        };
        self.records.push(measure(state, bundle, &ctx)?);
        Ok(())
    }
}

/// Short verification burst: identity residuals, conservation drift,
/// self-convergence order, and boundedness of the elliptic ratios on the
/// configured scenario. Fails (returns `CheckFailed`) if any gate fails.
pub fn cmd_check(config: &RunConfig, out_dir: &Path) -> Result<CheckReport> {
    config.validate()?;
    let grid = config.grid_spec()?;
    let params = config.species_params()?;
    let (state, init_report) = make_initial_state(grid, params, &config.bumps())?;
    let (dt, _) = resolve_dt(config, &state)?;

    const BURST_STEPS: u64 = 12;
    const RECORD_EVERY: u64 = 3;
    let t_end = state.time() + BURST_STEPS as f64 * dt;
    let positivity_floor = config.diagnostics.positivity_tolerance * init_report.max_c0;
    let guards = StepGuards {
        positivity_floor: Some(positivity_floor),
        cfl: None,
    };
    let mut observer = VecObserver {
        records: vec![],
        settings: DiagSettings {
            k_max: config.diagnostics.k_max,
            local_radius: config.local_radius(),
            shell_constant: config.diagnostics.shell_constant,
            negativity_tol: positivity_floor,
            moment_enabled: false,
        },
        baseline: None,
        sigma0_l1: init_report.sigma0_l1,
    };
    let start_state = state.clone();
    run_until(
        state,
        dt,
        t_end,
        RECORD_EVERY,
        &guards,
        false,
        &mut observer,
    )?;

    let mut gates = Vec::new();

    let worst_residual = observer
        .records
        .iter()
        .map(|r| r.r_energy.max(r.r_l2))
        .fold(0.0f64, f64::max);
    gates.push(GateOutcome {
        name: "identity_residuals".into(),
        pass: worst_residual <= 1e-6,
        detail: format!("max(R_energy, R_L2) = {worst_residual:.3e}, gate 1e-6"),
    });

    let mass_drift = observer
        .records
        .iter()
        .flat_map(|r| {
            r.masses
                .iter()
                .zip(init_report.masses.iter())
                .map(|(m, m0)| ((m - m0) / m0).abs())
        })
        .fold(0.0f64, f64::max);
    let charge_max = observer
        .records
        .iter()
        .map(|r| r.charge_total.abs())
        .fold(0.0f64, f64::max);
    let charge_gate = 1e-9 * init_report.rho0_l1.max(f64::MIN_POSITIVE);
    gates.push(GateOutcome {
        name: "conservation".into(),
        pass: mass_drift <= 1e-9 && charge_max <= charge_gate,
        detail: format!(
            "mass drift {mass_drift:.3e} (gate 1e-9), |charge| {charge_max:.3e} (gate {charge_gate:.3e})"
        ),
    });

    let order = self_convergence_order(&start_state, dt, 2)?;
    gates.push(GateOutcome {
        name: "self_convergence".into(),
        pass: order >= 3.7,
        detail: format!("measured order {order:.2}, gate 3.7"),
    });

    let r0 = observer.records[0].ell_ratios;
    let mut sup = [0.0f64; 4];
    for r in &observer.records {
        for j in 0..4 {
            sup[j] = sup[j].max(r.ell_ratios[j]);
        }
    }
    let finite = sup.iter().all(|v| v.is_finite());
    let bounded = (0..4).all(|j| r0[j] == 0.0 || sup[j] <= 10.0 * r0[j]);
    gates.push(GateOutcome {
        name: "elliptic_ratios".into(),
        pass: finite && bounded,
        detail: format!("sup over burst {sup:?} vs t=0 {r0:?} (gate 10x)"),
    });

    let pass = gates.iter().all(|g| g.pass);
    let report = CheckReport { gates, pass };
    std::fs::create_dir_all(out_dir)?;
    let text = toml::to_string_pretty(&report).map_err(|e| Error::Format {
        path: "check.toml".into(),
        message: e.to_string(),
    })?;
    std::fs::write(out_dir.join("check.toml"), text)?;
    if !pass {
        let failing: Vec<&str> = report
            .gates
            .iter()
            .filter(|g| !g.pass)
            .map(|g| g.name.as_str())
            .collect();
        return Err(Error::CheckFailed(format!(
            "gates failed: {}",
            failing.join(", ")
        )));
    }
    Ok(report)
}

/// Emit plot scripts and data extracts for a series.
pub fn cmd_plot(series_path: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let table = read_table(series_path)?;
    emit_plots(&table, out_dir)
}

/// Pretty gate table for terminals.
pub fn check_table(report: &CheckReport) -> String {
    let mut out = String::new();
    for g in &report.gates {
        out.push_str(&format!(
            "{:<20} {}  {}\n",
            g.name,
            if g.pass { "pass" } else { "FAIL" },
            g.detail
        ));
    }
    out
}

/// Load a series table (re-exported convenience for binaries and tests).
pub fn load_series(path: &Path) -> Result<Table> {
    read_table(path)
}
