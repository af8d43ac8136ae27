//! TOML run configuration. Every physical quantity carries its unit in the
//! key name; unknown keys are rejected.

use std::f64::consts::FRAC_PI_2;

use nfloc::channel::SPEED_OF_LIGHT;
use nfloc::frontend::ArchitectureKind;
use nfloc::geometry::SourcePosition;
use nfloc::localizer::SearchGrid;
use nfloc::pipeline::{ArraySpec, ExperimentSpec, HeatmapMode, HeatmapRegion, Scheme, SchemeMode, WaveguideSpec};
use nfloc::tuning::{ArmijoSettings, RcgSettings, TuningMethod};
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

fn default_speed_of_light() -> f64 {
    SPEED_OF_LIGHT
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub physics: PhysicsConfig,
    pub array: ArrayConfig,
    #[serde(default)]
    pub waveguide: WaveguideConfig,
    pub users: Vec<UserConfig>,
    pub experiment: ExperimentConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub rcg: RcgConfig,
    pub schemes: Vec<SchemeConfig>,
    pub heatmap: Option<HeatmapConfig>,
    pub rf_sweep: Option<RfSweepConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    pub carrier_frequency_hz: f64,
    #[serde(default = "default_speed_of_light")]
    pub speed_of_light_m_per_s: f64,
}

/// Spacings are given either in meters or in carrier wavelengths.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_spacing_m: Option<f64>,
    pub row_spacing_wavelengths: Option<f64>,
    pub col_spacing_m: Option<f64>,
    pub col_spacing_wavelengths: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveguideConfig {
    pub attenuation_per_m: f64,
    pub wavenumber_rad_per_m: f64,
}

impl Default for WaveguideConfig {
    fn default() -> Self {
        let w = WaveguideSpec::default();
        Self {
            attenuation_per_m: w.attenuation,
            wavenumber_rad_per_m: w.wavenumber,
        }
    }
}

/// Distances in meters or in multiples of the array's Fraunhofer distance;
/// angles in radians or degrees. Elevation defaults to the XY plane.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserConfig {
    pub distance_m: Option<f64>,
    pub distance_fraunhofer: Option<f64>,
    pub azimuth_rad: Option<f64>,
    pub azimuth_deg: Option<f64>,
    pub elevation_rad: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub snr_db: Vec<f64>,
    pub n_snapshots: usize,
    pub n_trials: usize,
    pub max_iterations: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub distance_min_m: Option<f64>,
    pub distance_max_m: Option<f64>,
    pub distance_min_fraunhofer: Option<f64>,
    pub distance_max_fraunhofer: Option<f64>,
    pub n_distance: usize,
    pub azimuth_min_deg: f64,
    pub azimuth_max_deg: f64,
    pub n_azimuth: usize,
    pub refine_levels: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RcgConfig {
    pub max_iterations: usize,
    pub grad_tolerance: f64,
    pub armijo_initial_step: f64,
    pub armijo_shrink: f64,
    pub armijo_sufficient_decrease: f64,
    pub armijo_max_backtracks: usize,
    pub pr_restart_threshold: f64,
}

impl Default for RcgConfig {
    fn default() -> Self {
        let s = RcgSettings::default();
        Self {
            max_iterations: s.max_iters,
            grad_tolerance: s.grad_tolerance,
            armijo_initial_step: s.armijo.initial_step,
            armijo_shrink: s.armijo.shrink,
            armijo_sufficient_decrease: s.armijo.sufficient_decrease,
            armijo_max_backtracks: s.armijo.max_backtracks,
            pr_restart_threshold: s.pr_restart_threshold,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub label: String,
    pub architecture: ArchitectureKind,
    pub tuning: TuningMethod,
    pub mode: SchemeMode,
    pub array: Option<ArrayConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeatmapModeConfig {
    LocalizeEverywhere,
    FixedFocus,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatmapConfig {
    pub x_min_m: f64,
    pub x_max_m: f64,
    pub y_min_m: f64,
    pub y_max_m: f64,
    pub resolution_m: f64,
    pub snr_db: f64,
    pub mode: HeatmapModeConfig,
    /// Label of the scheme to run; the first scheme when absent.
    pub scheme: Option<String>,
    pub focus: Option<UserConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RfSweepConfig {
    pub rf_chain_counts: Vec<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory for CSV files; `--out` takes precedence.
    pub dir: Option<String>,
    /// 0 is silent; 1 reports each finished table on stderr.
    #[serde(default)]
    pub verbosity: u8,
}

fn one_of(name: &str, a: Option<f64>, a_key: &str, b: Option<f64>, b_key: &str) -> Result<(f64, bool), ConfigError> {
    match (a, b) {
        (Some(x), None) => Ok((x, true)),
        (None, Some(y)) => Ok((y, false)),
        (Some(_), Some(_)) => err(format!("{name}: give either {a_key} or {b_key}, not both")),
        (None, None) => err(format!("{name}: missing {a_key} (or {b_key})")),
    }
}

impl ArrayConfig {
    fn resolve(&self, wavelength: f64, what: &str) -> Result<ArraySpec, ConfigError> {
        let (row, in_m) = one_of(what, self.row_spacing_m, "row_spacing_m", self.row_spacing_wavelengths, "row_spacing_wavelengths")?;
        let row_spacing = if in_m { row } else { row * wavelength };
        let (col, in_m) = one_of(what, self.col_spacing_m, "col_spacing_m", self.col_spacing_wavelengths, "col_spacing_wavelengths")?;
        let col_spacing = if in_m { col } else { col * wavelength };
        Ok(ArraySpec {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_spacing,
            col_spacing,
        })
    }
}

impl UserConfig {
    fn resolve(&self, fraunhofer: f64, what: &str) -> Result<SourcePosition, ConfigError> {
        let (d, in_m) = one_of(what, self.distance_m, "distance_m", self.distance_fraunhofer, "distance_fraunhofer")?;
        let (a, in_rad) = one_of(what, self.azimuth_rad, "azimuth_rad", self.azimuth_deg, "azimuth_deg")?;
        let distance = if in_m { d } else { d * fraunhofer };
        let azimuth = if in_rad { a } else { a.to_radians() };
        if !(distance > 0.0 && distance.is_finite()) {
            return err(format!("{what}: distance must be positive, got {distance} m"));
        }
        Ok(SourcePosition::new(distance, azimuth, self.elevation_rad.unwrap_or(FRAC_PI_2)))
    }
}

/// Fully resolved inputs for one command.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub spec: ExperimentSpec,
    pub wavelength_m: f64,
    pub fraunhofer_distance_m: f64,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        let p = &self.physics;
        if !(p.carrier_frequency_hz > 0.0 && p.speed_of_light_m_per_s > 0.0) {
            return err("physics: carrier_frequency_hz and speed_of_light_m_per_s must be positive");
        }
        let wavelength = p.speed_of_light_m_per_s / p.carrier_frequency_hz;
        let array = self.array.resolve(wavelength, "array")?;
        let layout = array.build(wavelength).map_err(|e| ConfigError(format!("array: {e}")))?;
        let fraunhofer = layout.fraunhofer_distance();

        if self.users.is_empty() {
            return err("users: at least one [[users]] entry is required");
        }
        let users = self
            .users
            .iter()
            .enumerate()
            .map(|(i, u)| u.resolve(fraunhofer, &format!("users[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;

        let g = &self.grid;
        let (dmin, in_m) = one_of("grid", g.distance_min_m, "distance_min_m", g.distance_min_fraunhofer, "distance_min_fraunhofer")?;
        let dmin = if in_m { dmin } else { dmin * fraunhofer };
        let (dmax, in_m) = one_of("grid", g.distance_max_m, "distance_max_m", g.distance_max_fraunhofer, "distance_max_fraunhofer")?;
        let dmax = if in_m { dmax } else { dmax * fraunhofer };
        let grid = SearchGrid::planar(
            (dmin, dmax),
            g.n_distance,
            (g.azimuth_min_deg.to_radians(), g.azimuth_max_deg.to_radians()),
            g.n_azimuth,
            g.refine_levels,
        );

        let r = &self.rcg;
        let rcg = RcgSettings {
            max_iters: r.max_iterations,
            grad_tolerance: r.grad_tolerance,
            armijo: ArmijoSettings {
                initial_step: r.armijo_initial_step,
                shrink: r.armijo_shrink,
                sufficient_decrease: r.armijo_sufficient_decrease,
                max_backtracks: r.armijo_max_backtracks,
            },
            pr_restart_threshold: r.pr_restart_threshold,
        };

        let mut schemes = Vec::with_capacity(self.schemes.len());
        for (i, s) in self.schemes.iter().enumerate() {
            if self.schemes[..i].iter().any(|o| o.label == s.label) {
                return err(format!("schemes[{i}]: duplicate label '{}'", s.label));
            }
            let mut scheme = Scheme::new(&s.label, s.architecture, s.tuning, s.mode);
            if let Some(a) = &s.array {
                scheme.array = Some(a.resolve(wavelength, &format!("schemes[{i}].array"))?);
            }
            schemes.push(scheme);
        }

        let e = &self.experiment;
        let spec = ExperimentSpec {
            carrier_frequency: p.carrier_frequency_hz,
            speed_of_light: p.speed_of_light_m_per_s,
            array,
            waveguide: WaveguideSpec {
                attenuation: self.waveguide.attenuation_per_m,
                wavenumber: self.waveguide.wavenumber_rad_per_m,
            },
            users,
            snr_db: e.snr_db.clone(),
            n_snapshots: e.n_snapshots,
            n_trials: e.n_trials,
            grid,
            max_iters: e.max_iterations,
            rcg,
            schemes,
            base_seed: self.seed,
        };
        if spec.snr_db.is_empty() {
            return err("experiment: snr_db needs at least one value");
        }
        spec.validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(Resolved {
            spec,
            wavelength_m: wavelength,
            fraunhofer_distance_m: fraunhofer,
        })
    }

    /// Region, mode, scheme index and SNR for the heatmap command.
    pub fn heatmap(&self, resolved: &Resolved) -> Result<(HeatmapRegion, HeatmapMode, usize, f64), ConfigError> {
        let Some(h) = &self.heatmap else {
            return err("heatmap: missing [heatmap] table");
        };
        let region = HeatmapRegion {
            x_range: (h.x_min_m, h.x_max_m),
            y_range: (h.y_min_m, h.y_max_m),
            resolution: h.resolution_m,
        };
        region.validate().map_err(|e| ConfigError(format!("heatmap: {e}")))?;
        let mode = match (h.mode, &h.focus) {
            (HeatmapModeConfig::LocalizeEverywhere, None) => HeatmapMode::LocalizeEverywhere,
            (HeatmapModeConfig::LocalizeEverywhere, Some(_)) => {
                return err("heatmap: focus is only used with mode = \"fixed_focus\"")
            }
            (HeatmapModeConfig::FixedFocus, Some(f)) => {
                HeatmapMode::FixedFocus(f.resolve(resolved.fraunhofer_distance_m, "heatmap.focus")?)
            }
            (HeatmapModeConfig::FixedFocus, None) => return err("heatmap: fixed_focus mode needs a [heatmap.focus] table"),
        };
        let scheme = match &h.scheme {
            None => 0,
            Some(label) => match resolved.spec.schemes.iter().position(|s| &s.label == label) {
                Some(i) => i,
                None => return err(format!("heatmap: unknown scheme '{label}'")),
            },
        };
        if h.snr_db.is_nan() {
            return err("heatmap: snr_db must not be NaN");
        }
        Ok((region, mode, scheme, h.snr_db))
    }

    pub fn rf_counts(&self) -> Result<Vec<usize>, ConfigError> {
        match &self.rf_sweep {
            Some(r) if !r.rf_chain_counts.is_empty() => Ok(r.rf_chain_counts.clone()),
            Some(_) => err("rf_sweep: rf_chain_counts must not be empty"),
            None => err("rf_sweep: missing [rf_sweep] table"),
        }
    }
}
