//! Power-law and logarithmic-law fits over windows of diagnostic time
//! series, and pass/fail verdicts against predicted exponents.
//!
//! Power laws are fit by ordinary least squares of `log y` against
//! `log(t + 1)`; log laws by least squares of `y` against `log(1 + t)`.
//! No weighting: series are uniformly sampled in `t` and reproducibility
//! beats statistical optimality here.

use crate::error::Error;
use crate::Result;

/// Time window of a fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitWindow {
    pub t_start: f64,
    pub t_end: f64,
    pub min_points: usize,
}

impl FitWindow {
    pub fn new(t_start: f64, t_end: f64) -> Self {
        Self {
            t_start,
            t_end,
            min_points: 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_start < self.t_end) {
            return Err(Error::Fit(format!(
                "window start {} must precede end {}",
                self.t_start, self.t_end
            )));
        }
        if self.min_points < 2 {
            return Err(Error::Fit("min_points must be at least 2".into()));
        }
        Ok(())
    }

    fn select<'a>(&self, series: &'a [(f64, f64)]) -> Vec<&'a (f64, f64)> {
        series
            .iter()
            .filter(|(t, _)| *t >= self.t_start && *t <= self.t_end)
            .collect()
    }
}

/// Which functional form a fit used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitModel {
    /// `y ~ exp(prefactor_log) (t + 1)^exponent`
    PowerLaw,
    /// `y ~ prefactor_log + exponent log(1 + t)` (the "exponent" is the
    /// log-law slope)
    LogLaw,
}

/// Exponent (or slope), intercept, and residual of a windowed regression.
#[derive(Debug, Clone)]
pub struct RateFit {
    pub exponent: f64,
    pub prefactor_log: f64,
    pub rms_residual: f64,
    pub window: FitWindow,
    pub model: FitModel,
    pub points: usize,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys.iter()) {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let mut ss = 0.0;
    for (x, y) in xs.iter().zip(ys.iter()) {
        let r = y - (intercept + slope * x);
        ss += r * r;
    }
    (slope, intercept, (ss / n).sqrt())
}

/// Fit `log y = prefactor_log + exponent log(t + 1)` on the window.
/// All selected `y` must be strictly positive.
pub fn fit_power_law(series: &[(f64, f64)], window: FitWindow) -> Result<RateFit> {
    window.validate()?;
    let selected = window.select(series);
    if selected.len() < window.min_points {
        return Err(Error::Fit(format!(
            "window [{}, {}] holds {} samples, fewer than min_points = {}",
            window.t_start,
            window.t_end,
            selected.len(),
            window.min_points
        )));
    }
    let mut xs = Vec::with_capacity(selected.len());
    let mut ys = Vec::with_capacity(selected.len());
    for (t, y) in selected {
        if !(*y > 0.0) || !y.is_finite() {
            return Err(Error::Fit(format!(
                "power-law fit requires positive finite samples, got y = {y} at t = {t}"
            )));
        }
        xs.push((t + 1.0).ln());
        ys.push(y.ln());
    }
    let (slope, intercept, rms) = least_squares(&xs, &ys);
    Ok(RateFit {
        exponent: slope,
        prefactor_log: intercept,
        rms_residual: rms,
        window,
        model: FitModel::PowerLaw,
        points: xs.len(),
    })
}

/// Fit `y = prefactor_log + exponent log(1 + t)` on the window.
pub fn fit_log_law(series: &[(f64, f64)], window: FitWindow) -> Result<RateFit> {
    window.validate()?;
    let selected = window.select(series);
    if selected.len() < window.min_points {
        return Err(Error::Fit(format!(
            "window [{}, {}] holds {} samples, fewer than min_points = {}",
            window.t_start,
            window.t_end,
            selected.len(),
            window.min_points
        )));
    }
    let mut xs = Vec::with_capacity(selected.len());
    let mut ys = Vec::with_capacity(selected.len());
    for (t, y) in selected {
        if !y.is_finite() {
            return Err(Error::Fit(format!(
                "log-law fit requires finite samples, got y = {y} at t = {t}"
            )));
        }
        xs.push((1.0 + t).ln());
        ys.push(*y);
    }
    let (slope, intercept, rms) = least_squares(&xs, &ys);
    Ok(RateFit {
        exponent: slope,
        prefactor_log: intercept,
        rms_residual: rms,
        window,
        model: FitModel::LogLaw,
        points: xs.len(),
    })
}

/// How a measured exponent is compared against a prediction: two-sided for
/// sharp rates, one-sided for bounds that need not be attained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMode {
    TwoSided,
    UpperBound,
    LowerBound,
}

/// Outcome of comparing one fit against a predicted exponent.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub pass: bool,
    pub measured: f64,
    pub predicted: f64,
    pub tolerance: f64,
    pub mode: BoundMode,
}

/// Compare a fitted exponent against a prediction.
pub fn verdict(fit: &RateFit, predicted: f64, tolerance: f64, mode: BoundMode) -> Result<Verdict> {
    if !(tolerance > 0.0) {
        return Err(Error::Fit(format!(
            "verdict tolerance must be positive, got {tolerance}"
        )));
    }
    let measured = fit.exponent;
    let pass = match mode {
        BoundMode::TwoSided => (measured - predicted).abs() <= tolerance,
        BoundMode::UpperBound => measured <= predicted + tolerance,
        BoundMode::LowerBound => measured >= predicted - tolerance,
    };
    Ok(Verdict {
        pass,
        measured,
        predicted,
        tolerance,
        mode,
    })
}
