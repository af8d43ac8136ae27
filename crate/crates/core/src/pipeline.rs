//! Alternating localization and tuning, and the Monte-Carlo experiments built
//! on top of it.
//!
//! Every random draw is seeded from the experiment's base seed and the
//! `(point, trial, stream)` coordinates of the draw, so all schemes see the
//! same noise for the same trial and results do not depend on scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{channel_matrix, simulate_snapshots, snr_to_noise_variance, SimulationConfig, SnapshotBatch, SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use crate::frontend::{random_weights, AnalogWeights, Architecture, ArchitectureKind, Frontend, WaveguideModel};
use crate::geometry::{build_layout, ArrayLayout, SourcePosition};
use crate::likelihood::{focusing_objective, PositionHypothesisSet};
use crate::localizer::{ap_localize, initialize_positions, refresh_pass, LocalizationResult, SearchGrid};
use crate::metrics::{mean_squared_error, summarize, RmseSummary};
use crate::tuning::{tune, RcgSettings, TuningMethod};

const STREAM_WEIGHTS: u64 = 0;
const STREAM_OBSERVATION: u64 = 1;

/// Rectangular array geometry; the wavelength comes from the carrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArraySpec {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_spacing: f64,
    pub col_spacing: f64,
}

impl ArraySpec {
    pub fn build(&self, wavelength: f64) -> Result<ArrayLayout> {
        build_layout(self.n_rows, self.n_cols, wavelength, self.row_spacing, self.col_spacing)
    }

    /// Same vertical extent split into `n_rows` strips.
    pub fn with_rf_chains(&self, n_rows: usize) -> Result<Self> {
        if n_rows == 0 {
            return Err(Error::InvalidGeometry("RF chain count must be at least 1".into()));
        }
        let row_spacing = self.n_rows as f64 * self.row_spacing / n_rows as f64;
        if row_spacing < self.col_spacing {
            return Err(Error::InvalidGeometry(format!(
                "{n_rows} strips over the aperture would sit {row_spacing} m apart, closer than the element pitch {}",
                self.col_spacing
            )));
        }
        Ok(Self {
            n_rows,
            row_spacing,
            ..*self
        })
    }
}

/// Uniform microstrip propagation constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveguideSpec {
    pub attenuation: f64,
    pub wavenumber: f64,
}

impl Default for WaveguideSpec {
    fn default() -> Self {
        Self {
            attenuation: 0.6,
            wavenumber: 827.67,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeMode {
    /// Random initial weights, then alternate localization and retuning at the
    /// current estimates.
    Alternating,
    /// Weights tuned once at the true positions, then plain localization.
    GivenPosition,
    /// Weights drawn at random (or left untuned) and held fixed.
    Fixed,
}

/// One curve of an experiment: an architecture, how its weights are chosen,
/// and optionally its own array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scheme {
    pub label: String,
    pub architecture: ArchitectureKind,
    pub tuning: TuningMethod,
    pub mode: SchemeMode,
    pub array: Option<ArraySpec>,
}

impl Scheme {
    pub fn new(label: &str, architecture: ArchitectureKind, tuning: TuningMethod, mode: SchemeMode) -> Self {
        Self {
            label: label.to_string(),
            architecture,
            tuning,
            mode,
            array: None,
        }
    }

    pub fn with_array(mut self, array: ArraySpec) -> Self {
        self.array = Some(array);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub carrier_frequency: f64,
    pub speed_of_light: f64,
    pub array: ArraySpec,
    pub waveguide: WaveguideSpec,
    pub users: Vec<SourcePosition>,
    pub snr_db: Vec<f64>,
    pub n_snapshots: usize,
    pub n_trials: usize,
    pub grid: SearchGrid,
    /// Outer iterations `K`.
    pub max_iters: usize,
    pub rcg: RcgSettings,
    pub schemes: Vec<Scheme>,
    pub base_seed: u64,
}

impl ExperimentSpec {
    pub fn wavelength(&self) -> f64 {
        self.speed_of_light / self.carrier_frequency
    }

    pub fn validate(&self) -> Result<()> {
        self.base_config().validate()?;
        if self.users.is_empty() {
            return Err(Error::InvalidConfig("at least one user is required".into()));
        }
        if self.n_trials == 0 {
            return Err(Error::InvalidConfig("at least one Monte-Carlo trial is required".into()));
        }
        if self.snr_db.iter().any(|s| s.is_nan()) {
            return Err(Error::InvalidConfig("SNR values must not be NaN".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::InvalidConfig("at least one scheme is required".into()));
        }
        self.grid.validate()?;
        self.rcg.validate()?;
        for s in &self.schemes {
            self.scheme_layout(s)?;
            match (s.architecture, s.mode, s.tuning) {
                (ArchitectureKind::FullyDigital, _, _) => {}
                (_, SchemeMode::Fixed, TuningMethod::Projection | TuningMethod::Rcg) => {
                    return Err(Error::InvalidConfig(format!(
                        "scheme '{}': fixed weights cannot use {} tuning; use given_position",
                        s.label,
                        s.tuning.name()
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn base_config(&self) -> SimulationConfig {
        let mut cfg = SimulationConfig::new(self.carrier_frequency, self.n_snapshots);
        cfg.speed_of_light = self.speed_of_light;
        cfg
    }

    fn scheme_layout(&self, scheme: &Scheme) -> Result<ArrayLayout> {
        scheme.array.unwrap_or(self.array).build(self.wavelength())
    }

    fn architecture(&self, kind: ArchitectureKind, layout: &ArrayLayout) -> Architecture {
        match kind {
            ArchitectureKind::FullyDigital => Architecture::FullyDigital,
            ArchitectureKind::Hybrid => Architecture::Hybrid,
            ArchitectureKind::Dma => Architecture::Dma(WaveguideModel::uniform(
                layout,
                self.waveguide.attenuation,
                self.waveguide.wavenumber,
            )),
        }
    }
}

/// Deterministic 64-bit seed from a base seed and coordinates (SplitMix64
/// finalizer applied after each part).
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    parts.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

/// Everything needed to run one scheme on one realization.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub layout: ArrayLayout,
    pub architecture: Architecture,
    pub cfg: SimulationConfig,
    pub users: Vec<SourcePosition>,
    pub grid: SearchGrid,
    pub max_iters: usize,
    pub rcg: RcgSettings,
    /// Seed for random weights and per-window noise.
    pub seed: u64,
}

impl Scenario {
    fn observe(&self, weights: &AnalogWeights, window: u64) -> Result<SnapshotBatch> {
        let fe = self.frontend(weights)?;
        let g = channel_matrix(&self.layout, &self.users, &self.cfg)?;
        let mut cfg = self.cfg.clone();
        cfg.rng_seed = derive_seed(self.seed, &[STREAM_OBSERVATION, window]);
        simulate_snapshots(&g, &cfg, &fe)
    }

    fn frontend(&self, weights: &AnalogWeights) -> Result<Frontend> {
        match self.architecture {
            Architecture::FullyDigital => Ok(Frontend::fully_digital(self.layout.len())),
            _ => Frontend::new(weights.clone(), self.architecture.waveguide(), &self.layout),
        }
    }

    fn random_weights(&self, draw: u64) -> AnalogWeights {
        random_weights(
            &self.layout,
            self.architecture.kind().constraint(),
            derive_seed(self.seed, &[STREAM_WEIGHTS, draw]),
        )
    }

    fn tune_at(
        &self,
        positions: &PositionHypothesisSet,
        method: TuningMethod,
        current: &AnalogWeights,
        draw: u64,
    ) -> Result<AnalogWeights> {
        let seed = derive_seed(self.seed, &[STREAM_WEIGHTS, draw]);
        Ok(tune(positions, &self.layout, &self.cfg, &self.architecture, method, &self.rcg, current, seed)?.weights)
    }
}

/// Localization track plus the weights in force at the end.
#[derive(Debug, Clone, PartialEq)]
pub struct AlternatingResult {
    pub localization: LocalizationResult,
    pub weights: AnalogWeights,
}

/// Starts from random weights, initializes greedily, then for each outer
/// iteration refreshes every hypothesis on the current window, retunes the
/// weights at the new estimates and observes a fresh window. Converges once
/// a pass under weights tuned at the current estimates moves nothing.
pub fn alternating_localize(scenario: &Scenario, method: TuningMethod) -> Result<AlternatingResult> {
    let m = scenario.users.len();
    if scenario.architecture.kind() == ArchitectureKind::FullyDigital {
        let q = AnalogWeights::identity(scenario.layout.len());
        let batch = scenario.observe(&q, 0)?;
        let fe = scenario.frontend(&q)?;
        let localization =
            ap_localize(&batch, &fe, &scenario.layout, &scenario.cfg, m, &scenario.grid, scenario.max_iters)?;
        return Ok(AlternatingResult {
            localization,
            weights: q,
        });
    }

    let mut weights = scenario.random_weights(0);
    let mut batch = scenario.observe(&weights, 0)?;
    let mut fe = scenario.frontend(&weights)?;
    let init = initialize_positions(&batch, &fe, &scenario.layout, &scenario.cfg, m, &scenario.grid)?;
    let mut estimates = init.estimates;
    let mut track = vec![estimates.clone()];
    let mut objective_track = vec![focusing_objective(&estimates, &fe, &batch, &scenario.layout, &scenario.cfg)?];
    // Estimates the current weights were tuned for; `None` when random.
    let mut tuned_for: Option<PositionHypothesisSet> = None;
    let mut converged = false;
    let mut iterations_used = 0;

    for k in 1..=scenario.max_iters {
        let moved = refresh_pass(&mut estimates, &batch, &fe, &scenario.layout, &scenario.cfg, &scenario.grid)?;
        iterations_used = k;
        track.push(estimates.clone());
        objective_track.push(focusing_objective(&estimates, &fe, &batch, &scenario.layout, &scenario.cfg)?);

        let settled = match (&tuned_for, method) {
            (_, TuningMethod::None) => true,
            (Some(t), _) => t
                .as_slice()
                .iter()
                .zip(estimates.as_slice())
                .all(|(a, b)| scenario.grid.within_final_step(a, b)),
            (None, _) => false,
        };
        if !moved && settled {
            converged = true;
            break;
        }
        if k == scenario.max_iters {
            break;
        }
        weights = scenario.tune_at(&estimates, method, &weights, k as u64)?;
        tuned_for = Some(estimates.clone());
        fe = scenario.frontend(&weights)?;
        batch = scenario.observe(&weights, k as u64)?;
    }

    Ok(AlternatingResult {
        localization: LocalizationResult {
            estimates,
            per_iteration_track: track,
            objective_track,
            iterations_used,
            converged,
            degenerate: init.degenerate,
        },
        weights,
    })
}

/// Runs one scheme on one realization.
pub fn run_scheme(scenario: &Scenario, scheme: &Scheme) -> Result<AlternatingResult> {
    let m = scenario.users.len();
    if scheme.architecture == ArchitectureKind::FullyDigital || scheme.mode == SchemeMode::Alternating {
        return alternating_localize(scenario, scheme.tuning);
    }
    let initial = scenario.random_weights(0);
    let weights = match (scheme.mode, scheme.tuning) {
        (SchemeMode::GivenPosition, TuningMethod::Projection | TuningMethod::Rcg) => {
            let truth = PositionHypothesisSet::new(scenario.users.clone());
            scenario.tune_at(&truth, scheme.tuning, &initial, 0)?
        }
        _ => initial,
    };
    let batch = scenario.observe(&weights, 0)?;
    let fe = scenario.frontend(&weights)?;
    let localization =
        ap_localize(&batch, &fe, &scenario.layout, &scenario.cfg, m, &scenario.grid, scenario.max_iters)?;
    Ok(AlternatingResult { localization, weights })
}

/// Outcome of one Monte-Carlo trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub estimates: Vec<SourcePosition>,
    /// Matched squared XY error, averaged over users, after initialization
    /// (entry 0) and each outer iteration; padded with the final value up to
    /// `K + 1` entries.
    pub squared_error_track: Vec<f64>,
    pub objective_track: Vec<f64>,
    pub iterations_used: usize,
    pub converged: bool,
    pub degenerate: bool,
}

impl TrialRecord {
    pub fn squared_error(&self) -> f64 {
        *self.squared_error_track.last().expect("track holds the initialization")
    }
}

/// Trial seed shared by every scheme (common random numbers).
pub fn trial_seed(base: u64, point: usize, trial: usize) -> u64 {
    derive_seed(base, &[point as u64, trial as u64])
}

fn record(result: &AlternatingResult, scenario: &Scenario, trial: usize) -> Result<TrialRecord> {
    let loc = &result.localization;
    let mut track = loc
        .per_iteration_track
        .iter()
        .map(|set| mean_squared_error(set.as_slice(), &scenario.users))
        .collect::<Result<Vec<_>>>()?;
    let last = *track.last().expect("track holds the initialization");
    track.resize(scenario.max_iters + 1, last);
    Ok(TrialRecord {
        trial,
        seed: scenario.seed,
        estimates: loc.estimates.as_slice().to_vec(),
        squared_error_track: track,
        objective_track: loc.objective_track.clone(),
        iterations_used: loc.iterations_used,
        converged: loc.converged,
        degenerate: loc.degenerate,
    })
}

/// Scenario for `scheme` with users `users` at `snr_db` (`+inf` is noiseless).
pub fn build_scenario(
    spec: &ExperimentSpec,
    scheme: &Scheme,
    users: &[SourcePosition],
    snr_db: f64,
    seed: u64,
) -> Result<Scenario> {
    let layout = spec.scheme_layout(scheme)?;
    let architecture = spec.architecture(scheme.architecture, &layout);
    let mut cfg = spec.base_config();
    let g = channel_matrix(&layout, users, &cfg)?;
    let x = g.noiseless_signal(cfg.pilot_symbol);
    cfg.noise_variance = snr_to_noise_variance(snr_db, &nalgebra::DMatrix::from_column_slice(x.len(), 1, x.as_slice()))?;
    Ok(Scenario {
        layout,
        architecture,
        cfg,
        users: users.to_vec(),
        grid: spec.grid.clone(),
        max_iters: spec.max_iters,
        rcg: spec.rcg,
        seed,
    })
}

/// All trials of one scheme at one SNR point, run in parallel and returned
/// in trial order.
pub fn run_trials(spec: &ExperimentSpec, scheme: &Scheme, users: &[SourcePosition], snr_db: f64, point: usize) -> Result<Vec<TrialRecord>> {
    (0..spec.n_trials)
        .into_par_iter()
        .map(|trial| {
            let seed = trial_seed(spec.base_seed, point, trial);
            let scenario = build_scenario(spec, scheme, users, snr_db, seed)?;
            let result = run_scheme(&scenario, scheme)?;
            record(&result, &scenario, trial)
        })
        .collect()
}

/// RMSE of one scheme at one SNR point over `n_trials` trials.
pub fn monte_carlo_rmse(spec: &ExperimentSpec, scheme: usize, snr: usize) -> Result<(RmseSummary, Vec<TrialRecord>)> {
    spec.validate()?;
    let records = run_trials(spec, &spec.schemes[scheme], &spec.users, spec.snr_db[snr], snr)?;
    let errs: Vec<f64> = records.iter().map(TrialRecord::squared_error).collect();
    Ok((summarize(&errs), records))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub scheme: String,
    pub snr_db: f64,
    pub summary: RmseSummary,
    /// Seed of the SNR point (trial seeds derive from it).
    pub seed: u64,
}

/// RMSE for every scheme and SNR point, ordered by scheme then ascending SNR.
pub fn snr_sweep(spec: &ExperimentSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let mut order: Vec<usize> = (0..spec.snr_db.len()).collect();
    order.sort_by(|&a, &b| spec.snr_db[a].total_cmp(&spec.snr_db[b]));
    let mut rows = Vec::new();
    for scheme in &spec.schemes {
        for &point in &order {
            let records = run_trials(spec, scheme, &spec.users, spec.snr_db[point], point)?;
            let errs: Vec<f64> = records.iter().map(TrialRecord::squared_error).collect();
            rows.push(SweepRow {
                scheme: scheme.label.clone(),
                snr_db: spec.snr_db[point],
                summary: summarize(&errs),
                seed: derive_seed(spec.base_seed, &[point as u64]),
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub scheme: String,
    pub snr_db: f64,
    pub iteration: usize,
    pub summary: RmseSummary,
}

/// RMSE after initialization (iteration 0) and after every outer iteration.
pub fn convergence_track(spec: &ExperimentSpec) -> Result<Vec<ConvergenceRow>> {
    spec.validate()?;
    let mut rows = Vec::new();
    for scheme in &spec.schemes {
        for (point, &snr) in spec.snr_db.iter().enumerate() {
            let records = run_trials(spec, scheme, &spec.users, snr, point)?;
            for it in 0..=spec.max_iters {
                let errs: Vec<f64> = records.iter().map(|r| r.squared_error_track[it]).collect();
                rows.push(ConvergenceRow {
                    scheme: scheme.label.clone(),
                    snr_db: snr,
                    iteration: it,
                    summary: summarize(&errs),
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RfRow {
    pub scheme: String,
    pub n_rf: usize,
    pub snr_db: f64,
    pub summary: RmseSummary,
}

/// RMSE against the number of RF chains at a fixed aperture.
pub fn rf_sweep(spec: &ExperimentSpec, rf_counts: &[usize]) -> Result<Vec<RfRow>> {
    spec.validate()?;
    if rf_counts.is_empty() {
        return Err(Error::InvalidConfig("rf sweep needs at least one RF chain count".into()));
    }
    let mut rows = Vec::new();
    for scheme in &spec.schemes {
        for &n_rf in rf_counts {
            let mut s = scheme.clone();
            s.array = Some(scheme.array.unwrap_or(spec.array).with_rf_chains(n_rf)?);
            for (point, &snr) in spec.snr_db.iter().enumerate() {
                let records = run_trials(spec, &s, &spec.users, snr, point)?;
                let errs: Vec<f64> = records.iter().map(TrialRecord::squared_error).collect();
                rows.push(RfRow {
                    scheme: scheme.label.clone(),
                    n_rf,
                    snr_db: snr,
                    summary: summarize(&errs),
                });
            }
        }
    }
    Ok(rows)
}

/// Axis-aligned region of the XY plane sampled at `resolution` meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatmapRegion {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub resolution: f64,
}

impl HeatmapRegion {
    fn axis(range: (f64, f64), res: f64) -> Vec<f64> {
        let n = ((range.1 - range.0) / res + 1e-9).floor() as usize + 1;
        (0..n).map(|i| range.0 + i as f64 * res).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(Error::InvalidConfig("heatmap resolution must be positive".into()));
        }
        for (name, (lo, hi)) in [("x", self.x_range), ("y", self.y_range)] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidConfig(format!("heatmap {name} range [{lo}, {hi}] is invalid")));
            }
        }
        Ok(())
    }

    /// Cell centers, `y` outer and `x` inner.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        let xs = Self::axis(self.x_range, self.resolution);
        let ys = Self::axis(self.y_range, self.resolution);
        ys.iter().flat_map(|&y| xs.iter().map(move |&x| (x, y))).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeatmapMode {
    /// Run the scheme with the user at each cell.
    LocalizeEverywhere,
    /// Tune once for this point, then localize users at every cell with those
    /// weights held fixed.
    FixedFocus(SourcePosition),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatmapCell {
    pub x: f64,
    pub y: f64,
    /// NaN for cells behind or on the array plane.
    pub rmse: f64,
}

/// Single-user RMSE at each cell of `region`, for `spec.schemes[scheme]` at
/// `spec.snr_db[snr]`.
pub fn heatmap_sweep(
    spec: &ExperimentSpec,
    region: &HeatmapRegion,
    mode: HeatmapMode,
    scheme: usize,
    snr: usize,
) -> Result<Vec<HeatmapCell>> {
    spec.validate()?;
    region.validate()?;
    let scheme = &spec.schemes[scheme];
    let snr_db = spec.snr_db[snr];
    let fixed = match mode {
        HeatmapMode::FixedFocus(focus) => {
            if scheme.architecture == ArchitectureKind::FullyDigital {
                None
            } else {
                let scenario = build_scenario(spec, scheme, &[focus], snr_db, derive_seed(spec.base_seed, &[u64::MAX]))?;
                let start = scenario.random_weights(0);
                let method = match scheme.tuning {
                    TuningMethod::None => TuningMethod::Random,
                    t => t,
                };
                Some(scenario.tune_at(&PositionHypothesisSet::new(vec![focus]), method, &start, 0)?)
            }
        }
        HeatmapMode::LocalizeEverywhere => None,
    };
    let cells = region.cells();
    cells
        .par_iter()
        .enumerate()
        .map(|(idx, &(x, y))| {
            if x <= 0.0 || (x == 0.0 && y == 0.0) {
                return Ok(HeatmapCell { x, y, rmse: f64::NAN });
            }
            let user = SourcePosition::from_cartesian(x, y, 0.0);
            let mut errs = Vec::with_capacity(spec.n_trials);
            for trial in 0..spec.n_trials {
                let seed = derive_seed(spec.base_seed, &[snr as u64, idx as u64, trial as u64]);
                let scenario = build_scenario(spec, scheme, &[user], snr_db, seed)?;
                let result = match &fixed {
                    Some(w) => {
                        let batch = scenario.observe(w, 0)?;
                        let fe = scenario.frontend(w)?;
                        ap_localize(&batch, &fe, &scenario.layout, &scenario.cfg, 1, &scenario.grid, scenario.max_iters)?
                    }
                    None => run_scheme(&scenario, scheme)?.localization,
                };
                errs.push(mean_squared_error(result.estimates.as_slice(), &[user])?);
            }
            Ok(HeatmapCell {
                x,
                y,
                rmse: summarize(&errs).rmse,
            })
        })
        .collect()
}

/// Per-iteration estimates of a single realization for every scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleRun {
    pub scheme: String,
    pub seed: u64,
    pub result: AlternatingResult,
}

/// Trial 0 at the first SNR point for each scheme.
pub fn single_run(spec: &ExperimentSpec) -> Result<Vec<SingleRun>> {
    spec.validate()?;
    let snr = *spec.snr_db.first().ok_or_else(|| Error::InvalidConfig("no SNR point".into()))?;
    spec.schemes
        .iter()
        .map(|scheme| {
            let seed = trial_seed(spec.base_seed, 0, 0);
            let scenario = build_scenario(spec, scheme, &spec.users, snr, seed)?;
            Ok(SingleRun {
                scheme: scheme.label.clone(),
                seed,
                result: run_scheme(&scenario, scheme)?,
            })
        })
        .collect()
}

/// Reduced-scale defaults: 4 microstrips of 8 elements at half-wavelength
/// pitch, 2.5 wavelengths between strips, 28 GHz.
pub mod desk {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_6};

    pub const CARRIER_HZ: f64 = 28e9;

    pub fn wavelength() -> f64 {
        SPEED_OF_LIGHT / CARRIER_HZ
    }

    pub fn array(n_cols: usize, col_spacing_wavelengths: f64) -> ArraySpec {
        let lam = wavelength();
        ArraySpec {
            n_rows: 4,
            n_cols,
            row_spacing: 2.5 * lam,
            col_spacing: col_spacing_wavelengths * lam,
        }
    }

    /// Near-field radius of the half-wavelength desk array.
    pub fn fraunhofer_distance() -> f64 {
        array(8, 0.5).build(wavelength()).expect("desk array is valid").fraunhofer_distance()
    }

    /// 40 distances from `0.05 R` to `2 R` and 61 azimuths in 3 degree steps,
    /// two refinement levels.
    pub fn grid(radius: f64) -> SearchGrid {
        SearchGrid::planar((0.05 * radius, 2.0 * radius), 40, (-FRAC_PI_2, FRAC_PI_2), 61, 2)
    }

    /// The two-user scene at a quarter of the near-field radius.
    pub fn users(radius: f64) -> Vec<SourcePosition> {
        vec![
            SourcePosition::planar(0.25 * radius, FRAC_PI_6),
            SourcePosition::planar(0.25 * radius, FRAC_PI_4),
        ]
    }

    pub fn snr_comparison_schemes() -> Vec<Scheme> {
        use ArchitectureKind::*;
        use SchemeMode::*;
        vec![
            Scheme::new("fully_digital", FullyDigital, TuningMethod::None, Fixed),
            Scheme::new("hybrid_projection", Hybrid, TuningMethod::Projection, Alternating),
            Scheme::new("dma_rcg", Dma, TuningMethod::Rcg, Alternating),
            Scheme::new("dma_projection", Dma, TuningMethod::Projection, Alternating),
            Scheme::new("dma_random", Dma, TuningMethod::Random, Fixed),
            Scheme::new("dma_rcg_quarter_wavelength", Dma, TuningMethod::Rcg, Alternating).with_array(array(16, 0.25)),
        ]
    }

    pub fn spec() -> ExperimentSpec {
        let radius = fraunhofer_distance();
        ExperimentSpec {
            carrier_frequency: CARRIER_HZ,
            speed_of_light: SPEED_OF_LIGHT,
            array: array(8, 0.5),
            waveguide: WaveguideSpec::default(),
            users: users(radius),
            snr_db: vec![-15.0, -10.0, -5.0, 0.0],
            n_snapshots: 50,
            n_trials: 50,
            grid: grid(radius),
            max_iters: 5,
            rcg: RcgSettings::default(),
            schemes: snr_comparison_schemes(),
            base_seed: 2024,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> ExperimentSpec {
        let mut spec = desk::spec();
        spec.n_trials = 3;
        spec.snr_db = vec![0.0];
        spec.n_snapshots = 10;
        spec.grid = SearchGrid::planar(
            spec.grid.distance_range,
            12,
            spec.grid.azimuth_range,
            19,
            1,
        );
        spec
    }

    #[test]
    fn seeds_are_stable_and_distinct() {
        assert_eq!(derive_seed(1, &[2, 3]), derive_seed(1, &[2, 3]));
        assert_ne!(derive_seed(1, &[2, 3]), derive_seed(1, &[3, 2]));
        assert_ne!(trial_seed(7, 0, 1), trial_seed(7, 1, 0));
    }

    #[test]
    fn rf_chain_rebuild_keeps_aperture() {
        let a = desk::array(8, 0.5);
        let b = a.with_rf_chains(2).unwrap();
        assert!((b.n_rows as f64 * b.row_spacing - a.n_rows as f64 * a.row_spacing).abs() < 1e-15);
        assert!(a.with_rf_chains(0).is_err());
        assert!(a.with_rf_chains(100).is_err());
    }

    #[test]
    fn sweep_is_deterministic() {
        let spec = small_spec();
        let a = snr_sweep(&spec).unwrap();
        let b = snr_sweep(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), spec.schemes.len());
    }

    #[test]
    fn k1_without_tuning_matches_plain_localization() {
        let mut spec = small_spec();
        spec.max_iters = 1;
        let scheme = Scheme::new("x", ArchitectureKind::Dma, TuningMethod::None, SchemeMode::Alternating);
        let scenario = build_scenario(&spec, &scheme, &spec.users, 0.0, 5).unwrap();
        let alt = alternating_localize(&scenario, TuningMethod::None).unwrap();
        let w = scenario.random_weights(0);
        let batch = scenario.observe(&w, 0).unwrap();
        let fe = scenario.frontend(&w).unwrap();
        let ap = ap_localize(&batch, &fe, &scenario.layout, &scenario.cfg, 2, &scenario.grid, 1).unwrap();
        assert_eq!(alt.localization.estimates, ap.estimates);
        assert_eq!(alt.weights, w);
    }

    #[test]
    fn fixed_mode_rejects_optimizing_tuners() {
        let mut spec = small_spec();
        spec.schemes = vec![Scheme::new("bad", ArchitectureKind::Dma, TuningMethod::Rcg, SchemeMode::Fixed)];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn heatmap_excludes_array_plane() {
        let mut spec = small_spec();
        spec.n_trials = 1;
        spec.schemes = vec![Scheme::new("fd", ArchitectureKind::FullyDigital, TuningMethod::None, SchemeMode::Fixed)];
        let region = HeatmapRegion {
            x_range: (0.0, 0.4),
            y_range: (0.0, 0.0),
            resolution: 0.4,
        };
        let cells = heatmap_sweep(&spec, &region, HeatmapMode::LocalizeEverywhere, 0, 0).unwrap();
        assert_eq!(cells.len(), 2);
        assert!(cells[0].rmse.is_nan());
        assert!(cells[1].rmse.is_finite());
    }

    #[test]
    fn single_cell_region() {
        let region = HeatmapRegion {
            x_range: (1.0, 1.0),
            y_range: (2.0, 2.0),
            resolution: 0.5,
        };
        assert_eq!(region.cells(), vec![(1.0, 2.0)]);
    }
}
