//! Time integration: integrating-factor RK4 with the diffusion semigroup
//! applied exactly as a Fourier multiplier and the nonlinear terms advanced
//! by classical four-stage Runge-Kutta in the transformed frame.
//!
//! With `E = exp(L dt/2)` for the diagonal diffusion operator `L`, one step
//! reads
//!
//! ```text
//! k1 = N(c)
//! k2 = N(E (c + dt/2 k1))
//! k3 = N(E c + dt/2 k2)
//! k4 = N(E^2 c + dt E k3)
//! c' = E^2 c + dt/6 (E^2 k1 + 2 E (k2 + k3) + k4)
//! ```
//!
//! Pure diffusion is advanced exactly (`N = 0` gives `c' = E^2 c`), and the
//! zero mode is untouched since every tendency has zero mean, so species
//! masses are conserved bitwise.

use std::f64::consts::PI;

use crate::error::Error;
use crate::grid::SpectralField;
use crate::model::{rhs_full, NpdState};
use crate::Result;

/// Time-stepping parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct StepperConfig {
    /// Fixed step; `None` selects it from the CFL bound at `t = 0`, rounded
    /// down so the diagnostic cadence is an integer number of steps.
    pub dt: Option<f64>,
    pub t_end: f64,
    /// Safety factor applied to the advective CFL bound.
    pub cfl_safety: f64,
    /// Upper cap on the step, also returned when the fields are quiescent.
    pub dt_max: f64,
    /// Only the classical 4-stage scheme is implemented.
    pub scheme_order: u32,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            dt: None,
            t_end: 1.0,
            cfl_safety: 0.4,
            dt_max: 0.25,
            scheme_order: 4,
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::Config {
                path: "stepper.t_end".into(),
                message: format!("must be finite and nonnegative, got {}", self.t_end),
            });
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return Err(Error::Config {
                    path: "stepper.dt".into(),
                    message: format!("must be positive, got {dt}"),
                });
            }
            if self.t_end > 0.0 && dt > self.t_end {
                return Err(Error::Config {
                    path: "stepper.dt".into(),
                    message: format!("dt = {dt} exceeds t_end = {}", self.t_end),
                });
            }
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::Config {
                path: "stepper.cfl_safety".into(),
                message: format!("must lie in (0, 1], got {}", self.cfl_safety),
            });
        }
        if !(self.dt_max > 0.0) || !self.dt_max.is_finite() {
            return Err(Error::Config {
                path: "stepper.dt_max".into(),
                message: format!("must be positive, got {}", self.dt_max),
            });
        }
        if self.scheme_order != 4 {
            return Err(Error::Config {
                path: "stepper.scheme_order".into(),
                message: format!("only order 4 is implemented, got {}", self.scheme_order),
            });
        }
        Ok(())
    }
}

/// Abort thresholds checked while stepping.
#[derive(Debug, Clone, Default)]
pub struct StepGuards {
    /// Absolute floor on `min c_i`; `None` disables the monitor.
    pub positivity_floor: Option<f64>,
    /// Step size is revalidated against this CFL bound each step when set.
    pub cfl: Option<CflParams>,
}

/// Parameters of the CFL revalidation.
#[derive(Debug, Clone)]
pub struct CflParams {
    pub cfl_safety: f64,
    pub dt_max: f64,
}

/// Quantities observed during one step, measured on the step's starting
/// state (they come for free from the first stage evaluation).
#[derive(Debug, Clone)]
pub struct StepInfo {
    pub u_inf: f64,
    pub grad_phi_inf: f64,
    pub min_c: Vec<f64>,
    pub masses: Vec<f64>,
}

fn cfl_from_sups(grid_spacing: f64, u_inf: f64, drift_inf: f64, safety: f64, dt_max: f64) -> f64 {
    let dt_u = if u_inf > 0.0 {
        grid_spacing / u_inf
    } else {
        f64::INFINITY
    };
    let dt_drift = if drift_inf > 0.0 {
        grid_spacing / drift_inf
    } else {
        f64::INFINITY
    };
    (safety * dt_u.min(dt_drift)).min(dt_max)
}

/// Advective CFL bound for a state: `safety * min(dx / ||u||_inf,
/// dx / (z D ||grad phi||_inf))`, capped at (and defaulting to) `dt_max`.
pub fn cfl_dt(state: &NpdState, safety: f64, dt_max: f64) -> Result<f64> {
    let bundle = rhs_full(state, false)?;
    let z = state.params().z();
    let d = state.params().diffusivity();
    Ok(cfl_from_sups(
        state.grid().spacing(),
        bundle.physical.u_inf(),
        z * d * bundle.physical.grad_phi_inf(),
        safety,
        dt_max,
    ))
}

fn apply_exp(c: &SpectralField, rate: f64) -> SpectralField {
    // rate = D dt_fraction (2 pi / L)^2; multiplier exp(-rate |k|^2).
    let mut out = c.clone();
    out.scale_by(|kx, ky, kz| {
        let k2 = (kx * kx + ky * ky + kz * kz) as f64;
        ((-rate * k2).exp()).into()
    });
    out
}

fn lin_comb(base: &[SpectralField], scale: f64, add: &[SpectralField]) -> Vec<SpectralField> {
    base.iter()
        .zip(add.iter())
        .map(|(b, a)| {
            let mut out = b.clone();
            for (x, y) in out.coeffs_mut().iter_mut().zip(a.coeffs().iter()) {
                *x += scale * y;
            }
            out
        })
        .collect()
}

/// One integrating-factor RK4 step of size `dt`.
///
/// Returns the advanced state together with sups and minima of the starting
/// state, and fails on NaN (blow-up) or a positivity-floor breach.
pub fn step(state: &NpdState, dt: f64, guards: &StepGuards) -> Result<(NpdState, StepInfo)> {
    let stage1 = rhs_full(state, false)?;
    if let Some(floor) = guards.positivity_floor {
        check_positivity(state, &stage1, floor, 0)?;
    }
    step_with_stage1(state, &stage1, dt, guards)
}

/// Check the positivity monitor on a freshly evaluated bundle.
pub fn check_positivity(
    state: &NpdState,
    bundle: &crate::model::RhsBundle,
    floor: f64,
    step_index: u64,
) -> Result<()> {
    for i in 0..state.species_count() {
        let m = bundle.physical.min_c(i);
        if m < -floor {
            return Err(Error::PositivityAbort {
                time: state.time(),
                step: step_index,
                species: i,
                min_value: m,
                floor,
            });
        }
    }
    Ok(())
}

/// RK4 step reusing an already-computed first-stage evaluation of `state`.
pub fn step_with_stage1(
    state: &NpdState,
    stage1: &crate::model::RhsBundle,
    dt: f64,
    guards: &StepGuards,
) -> Result<(NpdState, StepInfo)> {
    let grid = *state.grid();
    let d = state.params().diffusivity();
    let half_rate = d * (dt / 2.0) * (2.0 * PI / grid.box_length()).powi(2);

    let info = StepInfo {
        u_inf: stage1.physical.u_inf(),
        grad_phi_inf: stage1.physical.grad_phi_inf(),
        min_c: (0..state.species_count())
            .map(|i| stage1.physical.min_c(i))
            .collect(),
        masses: (0..state.species_count()).map(|i| state.mass(i)).collect(),
    };
    if let Some(cfl) = &guards.cfl {
        let z = state.params().z();
        let bound = cfl_from_sups(
            grid.spacing(),
            info.u_inf,
            z * d * info.grad_phi_inf,
            cfl.cfl_safety,
            cfl.dt_max,
        );
        if dt > bound * (1.0 + 1e-9) {
            return Err(Error::InvalidState(format!(
                "dt = {dt:.6e} exceeds the revalidated CFL bound {bound:.6e} at t = {:.6}",
                state.time()
            )));
        }
    }

    let c0 = state.concentrations();
    let k1 = &stage1.nonlinear;

    // a2 = E (c + dt/2 k1)
    let a2: Vec<SpectralField> = lin_comb(c0, dt / 2.0, k1)
        .iter()
        .map(|c| apply_exp(c, half_rate))
        .collect();
    let k2 = rhs_full(
        &NpdState::new(state.time() + dt / 2.0, a2, state.params().clone())?,
        false,
    )?
    .nonlinear;

    // a3 = E c + dt/2 k2
    let ec: Vec<SpectralField> = c0.iter().map(|c| apply_exp(c, half_rate)).collect();
    let a3 = lin_comb(&ec, dt / 2.0, &k2);
    let k3 = rhs_full(
        &NpdState::new(state.time() + dt / 2.0, a3, state.params().clone())?,
        false,
    )?
    .nonlinear;

    // a4 = E^2 c + dt E k3
    let e2c: Vec<SpectralField> = ec.iter().map(|c| apply_exp(c, half_rate)).collect();
    let ek3: Vec<SpectralField> = k3.iter().map(|c| apply_exp(c, half_rate)).collect();
    let a4 = lin_comb(&e2c, dt, &ek3);
    let k4 = rhs_full(
        &NpdState::new(state.time() + dt, a4, state.params().clone())?,
        false,
    )?
    .nonlinear;

    // c' = E^2 c + dt/6 (E^2 k1 + 2 E (k2 + k3) + k4)
    let mut new_fields = Vec::with_capacity(c0.len());
    for i in 0..c0.len() {
        let mut acc = e2c[i].clone();
        let e2k1 = apply_exp(&apply_exp(&k1[i], half_rate), half_rate);
        let ek2 = apply_exp(&k2[i], half_rate);
        let ek3 = apply_exp(&k3[i], half_rate);
        for ((((x, a), b), c), dcoef) in acc
            .coeffs_mut()
            .iter_mut()
            .zip(e2k1.coeffs().iter())
            .zip(ek2.coeffs().iter())
            .zip(ek3.coeffs().iter())
            .zip(k4[i].coeffs().iter())
        {
            *x += dt / 6.0 * (a + 2.0 * (b + c) + dcoef);
        }
        new_fields.push(acc);
    }

    let new_state = NpdState::new(state.time() + dt, new_fields, state.params().clone())?;
    if !new_state.is_finite() {
        return Err(Error::BlowUp {
            time: new_state.time(),
            step: 0,
            details: "non-finite coefficients after step".into(),
        });
    }
    Ok((new_state, info))
}

/// Observer invoked at the configured cadence during a run. The freshly
/// evaluated right-hand-side bundle of the recorded state is passed along
/// so diagnostics cost no extra transforms.
pub trait Observer {
    /// Called with the current state at step 0, every `record_every` steps,
    /// and after the final step.
    fn record(
        &mut self,
        state: &NpdState,
        bundle: &crate::model::RhsBundle,
        step_index: u64,
    ) -> Result<()>;
    /// Flush any buffered output; called before an abort surfaces.
    fn flush(&mut self) -> Result<()> {
        Ok(())
    }
    /// Per-step hook for cheap bookkeeping (masses, minima).
    fn on_step(&mut self, _info: &StepInfo, _step_index: u64) -> Result<()> {
        Ok(())
    }
}

/// Advance to `t_end` with a fixed step, invoking the observer every
/// `record_every` steps. The step count is `round(t_end / dt)`; the caller
/// is responsible for choosing `dt` commensurate with `t_end`.
///
/// Each state's right-hand side is evaluated exactly once: it serves as the
/// record bundle and as the first Runge-Kutta stage of the following step.
/// On abort the observer is flushed before the error is returned.
pub fn run_until<O: Observer>(
    state: NpdState,
    dt: f64,
    t_end: f64,
    record_every: u64,
    guards: &StepGuards,
    with_pressure: bool,
    observer: &mut O,
) -> Result<NpdState> {
    let total_steps = if t_end <= state.time() {
        0
    } else {
        ((t_end - state.time()) / dt).round().max(0.0) as u64
    };
    let record_every = record_every.max(1);

    let run = |state: NpdState, observer: &mut O| -> Result<NpdState> {
        let mut current = state;
        let mut bundle = rhs_full(&current, with_pressure)?;
        if let Some(floor) = guards.positivity_floor {
            check_positivity(&current, &bundle, floor, 0)?;
        }
        observer.record(&current, &bundle, 0)?;
        for step_index in 1..=total_steps {
            let (next, info) = step_with_stage1(&current, &bundle, dt, guards)
                .map_err(|e| at_step(e, step_index))?;
            observer.on_step(&info, step_index)?;
            current = next;
            bundle = rhs_full(&current, with_pressure)?;
            if let Some(floor) = guards.positivity_floor {
                check_positivity(&current, &bundle, floor, step_index)
                    .map_err(|e| at_step(e, step_index))?;
            }
            if step_index % record_every == 0 || step_index == total_steps {
                observer.record(&current, &bundle, step_index)?;
            }
        }
        Ok(current)
    };

    match run(state, observer) {
        Ok(s) => {
            observer.flush()?;
            Ok(s)
        }
        Err(e) => {
            // Flush partial results; the original error wins.
            let _ = observer.flush();
            Err(e)
        }
    }
}

fn at_step(e: Error, step_index: u64) -> Error {
    match e {
        Error::PositivityAbort {
            time,
            species,
            min_value,
            floor,
            ..
        } => Error::PositivityAbort {
            time,
            step: step_index,
            species,
            min_value,
            floor,
        },
        Error::BlowUp { time, details, .. } => Error::BlowUp {
            time,
            step: step_index,
            details,
        },
        other => other,
    }
}

/// Measured self-convergence order from a Richardson triple: advance the
/// state over the same horizon with steps `dt`, `dt/2`, `dt/4` and compare
/// successive differences, `order = log2(|c_dt - c_dt/2| / |c_dt/2 - c_dt/4|)`.
pub fn self_convergence_order(state: &NpdState, dt: f64, steps: u64) -> Result<f64> {
    let advance = |substeps_per_dt: u64| -> Result<NpdState> {
        let mut current = state.clone();
        let h = dt / substeps_per_dt as f64;
        for _ in 0..steps * substeps_per_dt {
            current = step(&current, h, &StepGuards::default())?.0;
        }
        Ok(current)
    };
    let coarse = advance(1)?;
    let medium = advance(2)?;
    let fine = advance(4)?;
    let diff = |a: &NpdState, b: &NpdState| -> f64 {
        a.concentrations()
            .iter()
            .zip(b.concentrations().iter())
            .map(|(x, y)| {
                x.coeffs()
                    .iter()
                    .zip(y.coeffs().iter())
                    .map(|(p, q)| (p - q).norm_sqr())
                    .sum::<f64>()
            })
            .sum::<f64>()
            .sqrt()
    };
    let d1 = diff(&coarse, &medium);
    let d2 = diff(&medium, &fine);
    if d2 == 0.0 {
        return Err(Error::InvalidState(
            "refinement differences vanished; cannot estimate order".into(),
        ));
    }
    Ok((d1 / d2).log2())
}
