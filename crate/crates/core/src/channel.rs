//! Spherical-wave channel synthesis and noisy pilot observations.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontend::Frontend;
use crate::geometry::{ArrayLayout, SourcePosition};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Carrier, pilot and noise settings for one observation window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub carrier_frequency: f64,
    pub speed_of_light: f64,
    pub pilot_symbol: Complex64,
    pub n_snapshots: usize,
    pub noise_variance: f64,
    pub rng_seed: u64,
}

impl SimulationConfig {
    pub fn new(carrier_frequency: f64, n_snapshots: usize) -> Self {
        Self {
            carrier_frequency,
            speed_of_light: SPEED_OF_LIGHT,
            pilot_symbol: Complex64::new(1.0, 0.0),
            n_snapshots,
            noise_variance: 0.0,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_frequency > 0.0 && self.carrier_frequency.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "carrier frequency must be positive, got {}",
                self.carrier_frequency
            )));
        }
        if !(self.speed_of_light > 0.0 && self.speed_of_light.is_finite()) {
            return Err(Error::InvalidConfig("speed of light must be positive".into()));
        }
        if (self.pilot_symbol.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "pilot symbol must be unit-modulus, got |x0| = {}",
                self.pilot_symbol.norm()
            )));
        }
        if self.n_snapshots == 0 {
            return Err(Error::InvalidConfig("at least one snapshot is required".into()));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "noise variance must be finite and nonnegative, got {}",
                self.noise_variance
            )));
        }
        Ok(())
    }

    /// Carrier wavelength `c / f_p`.
    pub fn carrier_wavelength(&self) -> f64 {
        self.speed_of_light / self.carrier_frequency
    }
}

/// Propagation phase `2 pi f_p d / c`.
pub fn phase_shift(distance: f64, cfg: &SimulationConfig) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::NonPositiveDistance(distance));
    }
    Ok(2.0 * std::f64::consts::PI * cfg.carrier_frequency * distance / cfg.speed_of_light)
}

/// Free-space amplitude `c / (4 pi f_p d)`.
pub fn path_gain(distance: f64, cfg: &SimulationConfig) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::NonPositiveDistance(distance));
    }
    Ok(cfg.speed_of_light / (4.0 * std::f64::consts::PI * cfg.carrier_frequency * distance))
}

/// Element response `a(d) exp(-j v(d))` to a source at `p`.
pub fn steering_vector(
    layout: &ArrayLayout,
    p: &SourcePosition,
    cfg: &SimulationConfig,
) -> Result<DVector<Complex64>> {
    if !(p.distance > 0.0) {
        return Err(Error::NonPositiveDistance(p.distance));
    }
    let mut out = DVector::zeros(layout.len());
    fill_steering(layout, p, cfg, out.as_mut_slice())?;
    Ok(out)
}

/// Writes the steering vector into `out`; used on hot search paths to reuse
/// allocations.
pub(crate) fn fill_steering(
    layout: &ArrayLayout,
    p: &SourcePosition,
    cfg: &SimulationConfig,
    out: &mut [Complex64],
) -> Result<()> {
    let k = 2.0 * std::f64::consts::PI * cfg.carrier_frequency / cfg.speed_of_light;
    let amp = cfg.speed_of_light / (4.0 * std::f64::consts::PI * cfg.carrier_frequency);
    for (slot, el) in out.iter_mut().zip(layout.elements()) {
        let d = crate::geometry::source_element_distance(*el, p);
        if !(d > 0.0) {
            return Err(Error::NonPositiveDistance(d));
        }
        *slot = Complex64::from_polar(amp / d, -k * d);
    }
    Ok(())
}

/// `N x M` matrix whose columns are the users' element responses.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    entries: DMatrix<Complex64>,
}

impl ChannelMatrix {
    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn n_users(&self) -> usize {
        self.entries.ncols()
    }

    pub fn n_elements(&self) -> usize {
        self.entries.nrows()
    }

    pub fn column(&self, m: usize) -> DVector<Complex64> {
        self.entries.column(m).into_owned()
    }

    /// Noiseless element-level reception `G x0 1_M`.
    pub fn noiseless_signal(&self, pilot: Complex64) -> DVector<Complex64> {
        let mut x = DVector::zeros(self.n_elements());
        for col in self.entries.column_iter() {
            x += col;
        }
        x * pilot
    }
}

/// Positions closer than this (in meters) count as the same source.
const DUPLICATE_TOLERANCE: f64 = 1e-9;

pub fn channel_matrix(
    layout: &ArrayLayout,
    positions: &[SourcePosition],
    cfg: &SimulationConfig,
) -> Result<ChannelMatrix> {
    if positions.is_empty() {
        return Err(Error::InvalidConfig("at least one source is required".into()));
    }
    for (a, pa) in positions.iter().enumerate() {
        let ca = pa.to_cartesian();
        for (b, pb) in positions.iter().enumerate().skip(a + 1) {
            let cb = pb.to_cartesian();
            let dist = ((ca[0] - cb[0]).powi(2) + (ca[1] - cb[1]).powi(2) + (ca[2] - cb[2]).powi(2))
                .sqrt();
            if dist < DUPLICATE_TOLERANCE {
                return Err(Error::DuplicatePositions(a, b));
            }
        }
    }
    let mut entries = DMatrix::zeros(layout.len(), positions.len());
    for (m, p) in positions.iter().enumerate() {
        let s = steering_vector(layout, p, cfg)?;
        entries.set_column(m, &s);
    }
    Ok(ChannelMatrix { entries })
}

/// Noise variance giving `snr_db = 10 log10(|x|^2 / (N sigma^2))`, averaged
/// over the columns (snapshots) of the noiseless element signal.
pub fn snr_to_noise_variance(snr_db: f64, noiseless: &DMatrix<Complex64>) -> Result<f64> {
    let n = noiseless.nrows();
    let t = noiseless.ncols();
    if n == 0 || t == 0 {
        return Err(Error::ZeroSignal);
    }
    let energy: f64 = noiseless.column_iter().map(|c| c.norm_squared()).sum::<f64>() / t as f64;
    if energy == 0.0 {
        return Err(Error::ZeroSignal);
    }
    if snr_db == f64::INFINITY {
        return Ok(0.0);
    }
    Ok(energy / (n as f64 * 10f64.powf(snr_db / 10.0)))
}

/// RF-chain outputs for one observation window and their sample covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotBatch {
    samples: DMatrix<Complex64>,
    covariance: DMatrix<Complex64>,
}

impl SnapshotBatch {
    /// Wraps recorded samples (`channels x snapshots`) and forms `R = Y Y^H / T`.
    pub fn from_samples(samples: DMatrix<Complex64>) -> Self {
        let t = samples.ncols().max(1) as f64;
        let r = &samples * samples.adjoint() / Complex64::new(t, 0.0);
        let covariance = (&r + r.adjoint()) * Complex64::new(0.5, 0.0);
        Self {
            samples,
            covariance,
        }
    }

    pub fn samples(&self) -> &DMatrix<Complex64> {
        &self.samples
    }

    pub fn covariance(&self) -> &DMatrix<Complex64> {
        &self.covariance
    }

    pub fn channel_count(&self) -> usize {
        self.samples.nrows()
    }

    pub fn n_snapshots(&self) -> usize {
        self.samples.ncols()
    }

    /// `sum_t |y(t)|^2`.
    pub fn total_energy(&self) -> f64 {
        self.samples.norm_squared()
    }
}

/// Draws `cfg.n_snapshots` windows of `x = G x0 1 + z` and passes each through
/// the front end. Noise is circular Gaussian with variance `cfg.noise_variance`
/// per element, seeded from `cfg.rng_seed`.
pub fn simulate_snapshots(
    g: &ChannelMatrix,
    cfg: &SimulationConfig,
    frontend: &Frontend,
) -> Result<SnapshotBatch> {
    cfg.validate()?;
    if frontend.n_elements() != g.n_elements() {
        return Err(Error::DimensionMismatch {
            expected: frontend.n_elements(),
            actual: g.n_elements(),
            context: "front end vs channel elements",
        });
    }
    let clean = g.noiseless_signal(cfg.pilot_symbol);
    let n = g.n_elements();
    let t = cfg.n_snapshots;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let scale = (cfg.noise_variance / 2.0).sqrt();

    let mut samples = DMatrix::zeros(frontend.n_outputs(), t);
    let mut x = DVector::<Complex64>::zeros(n);
    for col in 0..t {
        for (xi, ci) in x.iter_mut().zip(clean.iter()) {
            if scale > 0.0 {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                *xi = ci + Complex64::new(re * scale, im * scale);
            } else {
                *xi = *ci;
            }
        }
        let y = frontend.apply(&x)?;
        samples.set_column(col, &y);
    }
    Ok(SnapshotBatch::from_samples(samples))
}
