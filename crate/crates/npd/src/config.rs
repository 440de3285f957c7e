//! Run configuration: TOML schema, validation, and the normalized echo.
//!
//! Unknown keys are rejected with the offending key path. `parse_config`
//! fills every default and the result can be dumped back out with
//! [`RunConfig::normalized`]; parsing that dump reproduces the same config.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::grid::GridSpec;
use crate::model::{GaussianBump, SpeciesParams};
use crate::Result;

fn default_dealias() -> f64 {
    2.0 / 3.0
}
fn default_diffusivity() -> f64 {
    1.0
}
fn default_cfl_safety() -> f64 {
    0.4
}
fn default_dt_max() -> f64 {
    0.25
}
fn default_scheme_order() -> u32 {
    4
}
fn default_k_max() -> usize {
    2
}
fn default_cadence() -> f64 {
    0.25
}
fn default_true() -> bool {
    true
}
fn default_positivity_tol() -> f64 {
    1e-8
}
fn default_shell_constant() -> f64 {
    1.1
}
fn default_min_points() -> usize {
    5
}
fn default_out_dir() -> String {
    "out".into()
}
fn default_formats() -> Vec<String> {
    vec!["csv".into(), "summary".into()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub box_length: f64,
    pub resolution: usize,
    #[serde(default = "default_dealias")]
    pub dealias_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpConfig {
    pub amplitude: f64,
    pub center: [f64; 3],
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesConfig {
    pub valence: f64,
    #[serde(default)]
    pub bumps: Vec<BumpConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    #[serde(default = "default_diffusivity")]
    pub diffusivity: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            diffusivity: default_diffusivity(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperConfigFile {
    /// Omit for automatic selection from the CFL bound at `t = 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub t_end: f64,
    #[serde(default = "default_cfl_safety")]
    pub cfl_safety: f64,
    #[serde(default = "default_dt_max")]
    pub dt_max: f64,
    #[serde(default = "default_scheme_order")]
    pub scheme_order: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    /// Time between records.
    #[serde(default = "default_cadence")]
    pub cadence: f64,
    /// Radius of the local-entropy ball; defaults to `L / 8`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_radius: Option<f64>,
    #[serde(default = "default_true")]
    pub moment: bool,
    /// Relative negativity floor, in units of `max c_i(0)`.
    #[serde(default = "default_positivity_tol")]
    pub positivity_tolerance: f64,
    #[serde(default = "default_shell_constant")]
    pub shell_constant: f64,
    /// Recover the pressure field alongside the velocity.
    #[serde(default)]
    pub pressure: bool,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            k_max: default_k_max(),
            cadence: default_cadence(),
            local_radius: None,
            moment: true,
            positivity_tolerance: default_positivity_tol(),
            shell_constant: default_shell_constant(),
            pressure: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitsConfig {
    /// Defaults to `[0.3 t_end, 0.9 t_end]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
    #[serde(default = "default_min_points")]
    pub min_points: usize,
}

impl Default for FitsConfig {
    fn default() -> Self {
        Self {
            window: None,
            min_points: default_min_points(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
    /// Times at which to write intermediate checkpoints.
    #[serde(default)]
    pub checkpoint_times: Vec<f64>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: default_out_dir(),
            formats: default_formats(),
            checkpoint_times: vec![],
        }
    }
}

/// The full, validated run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub species: Vec<SpeciesConfig>,
    #[serde(default)]
    pub physics: PhysicsConfig,
    pub stepper: StepperConfigFile,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub fits: FitsConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub allow_unequal_valences: bool,
}

impl RunConfig {
    /// Grid spec (validated).
    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(
            self.grid.box_length,
            self.grid.resolution,
            self.grid.dealias_fraction,
        )
    }

    /// Species parameters (validated, including the equal-|z| gate).
    pub fn species_params(&self) -> Result<SpeciesParams> {
        let params = SpeciesParams::new(
            self.species.iter().map(|s| s.valence).collect(),
            self.physics.diffusivity,
        )?;
        params.check_equal_valences(self.allow_unequal_valences)?;
        Ok(params)
    }

    /// Per-species bump lists for the initial state.
    pub fn bumps(&self) -> Vec<Vec<GaussianBump>> {
        self.species
            .iter()
            .map(|s| {
                s.bumps
                    .iter()
                    .map(|b| GaussianBump {
                        amplitude: b.amplitude,
                        center: b.center,
                        width: b.width,
                    })
                    .collect()
            })
            .collect()
    }

    /// Stepper settings in the integrator's terms.
    pub fn stepper(&self) -> crate::integrator::StepperConfig {
        crate::integrator::StepperConfig {
            dt: self.stepper.dt,
            t_end: self.stepper.t_end,
            cfl_safety: self.stepper.cfl_safety,
            dt_max: self.stepper.dt_max,
            scheme_order: self.stepper.scheme_order,
        }
    }

    /// Local-entropy radius with the `L / 8` default applied.
    pub fn local_radius(&self) -> f64 {
        self.diagnostics
            .local_radius
            .unwrap_or(self.grid.box_length / 8.0)
    }

    /// Fit window with the `[0.3 t_end, 0.9 t_end]` default applied.
    pub fn fit_window(&self) -> crate::rates::FitWindow {
        let [a, b] = self
            .fits
            .window
            .unwrap_or([0.3 * self.stepper.t_end, 0.9 * self.stepper.t_end]);
        crate::rates::FitWindow {
            t_start: a,
            t_end: b,
            min_points: self.fits.min_points,
        }
    }

    /// Full validation of every cross-field invariant.
    pub fn validate(&self) -> Result<()> {
        self.grid_spec()?;
        self.species_params()?;
        self.stepper().validate()?;
        if self.species.is_empty() {
            return Err(Error::Config {
                path: "species".into(),
                message: "at least one species is required".into(),
            });
        }
        for (i, s) in self.species.iter().enumerate() {
            for (j, b) in s.bumps.iter().enumerate() {
                if b.amplitude < 0.0 || !b.amplitude.is_finite() {
                    return Err(Error::Config {
                        path: format!("species[{i}].bumps[{j}].amplitude"),
                        message: format!("must be nonnegative and finite, got {}", b.amplitude),
                    });
                }
                if !(b.width > 0.0) || !b.width.is_finite() {
                    return Err(Error::Config {
                        path: format!("species[{i}].bumps[{j}].width"),
                        message: format!("must be positive, got {}", b.width),
                    });
                }
            }
        }
        if self.diagnostics.k_max > 3 {
            return Err(Error::Config {
                path: "diagnostics.k_max".into(),
                message: format!("must be at most 3, got {}", self.diagnostics.k_max),
            });
        }
        if !(self.diagnostics.cadence > 0.0) {
            return Err(Error::Config {
                path: "diagnostics.cadence".into(),
                message: format!("must be positive, got {}", self.diagnostics.cadence),
            });
        }
        if let Some(r) = self.diagnostics.local_radius {
            if !(r > 0.0) {
                return Err(Error::Config {
                    path: "diagnostics.local_radius".into(),
                    message: format!("must be positive, got {r}"),
                });
            }
        }
        if !(self.diagnostics.positivity_tolerance >= 0.0) {
            return Err(Error::Config {
                path: "diagnostics.positivity_tolerance".into(),
                message: "must be nonnegative".into(),
            });
        }
        if !(self.diagnostics.shell_constant > 0.0) {
            return Err(Error::Config {
                path: "diagnostics.shell_constant".into(),
                message: "must be positive".into(),
            });
        }
        if let Some([a, b]) = self.fits.window {
            if !(a < b) {
                return Err(Error::Config {
                    path: "fits.window".into(),
                    message: format!("start {a} must precede end {b}"),
                });
            }
        }
        if self.fits.min_points < 2 {
            return Err(Error::Config {
                path: "fits.min_points".into(),
                message: "must be at least 2".into(),
            });
        }
        for f in &self.output.formats {
            if f != "csv" && f != "summary" {
                return Err(Error::Config {
                    path: "output.formats".into(),
                    message: format!("unknown format `{f}`; supported: csv, summary"),
                });
            }
        }
        // Neutralizability gate: the rescale target must carry charge when
        // the configured masses do not cancel.
        let masses: Vec<f64> = self
            .species
            .iter()
            .map(|s| {
                s.bumps
                    .iter()
                    .map(|b| {
                        b.amplitude * (2.0 * std::f64::consts::PI * b.width * b.width).powf(1.5)
                    })
                    .sum::<f64>()
            })
            .collect();
        let charge: f64 = masses
            .iter()
            .zip(self.species.iter())
            .map(|(m, s)| m * s.valence)
            .sum();
        let scale: f64 = masses
            .iter()
            .zip(self.species.iter())
            .map(|(m, s)| (m * s.valence).abs())
            .sum();
        if charge.abs() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
            let last = self.species.len() - 1;
            let anchor = self.species[last].valence * masses[last];
            if anchor == 0.0 || (anchor - charge) / anchor <= 0.0 {
                return Err(Error::Config {
                    path: format!("species[{last}]"),
                    message: format!(
                        "initial charge {charge:.3e} cannot be neutralized by rescaling \
                         the last species (integral rho_0 = 0 is required)"
                    ),
                });
            }
        }
        Ok(())
    }

    /// Normalized TOML dump with all defaults materialized.
    pub fn normalized(&self) -> String {
        toml::to_string_pretty(self).expect("config serialization cannot fail")
    }

    /// Deterministic FNV-1a hash of the normalized dump, for provenance
    /// lines in outputs.
    pub fn hash(&self) -> String {
        let mut h: u64 = 0xcbf29ce484222325;
        for b in self.normalized().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}

/// Parse and fully validate a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config {
        path: "config".into(),
        message: e.to_string(),
    })?;
    config.validate()?;
    Ok(config)
}

/// The two-species opposite-Gaussian reference scenario on a cube of side
/// `box_length` at the given resolution: bump width 1.5, centers offset by
/// 2, equal masses, diagnostics every 0.25 time units.
pub fn reference_scenario(box_length: f64, resolution: usize, t_end: f64) -> RunConfig {
    let half = box_length / 2.0;
    let bump = |cx: f64| BumpConfig {
        amplitude: 1.0,
        center: [cx, half, half],
        width: 1.5,
    };
    RunConfig {
        grid: GridConfig {
            box_length,
            resolution,
            dealias_fraction: default_dealias(),
        },
        species: vec![
            SpeciesConfig {
                valence: 1.0,
                bumps: vec![bump(half - 1.0)],
            },
            SpeciesConfig {
                valence: -1.0,
                bumps: vec![bump(half + 1.0)],
            },
        ],
        physics: PhysicsConfig::default(),
        stepper: StepperConfigFile {
            dt: None,
            t_end,
            cfl_safety: default_cfl_safety(),
            dt_max: default_dt_max(),
            scheme_order: 4,
        },
        diagnostics: DiagnosticsConfig::default(),
        fits: FitsConfig::default(),
        output: OutputConfig::default(),
        seed: 0,
        allow_unequal_valences: false,
    }
}
