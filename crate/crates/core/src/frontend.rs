//! Analog front ends: fully digital, phase-shifter hybrid and dynamic
//! metasurface (DMA) arrays.
//!
//! All three share the output model `y = Q H x`. Each row of `Q` combines one
//! microstrip (or phase-shifter sub-array) into a single RF chain, so only the
//! entries belonging to that row's element block may be nonzero. `H` is the
//! diagonal in-waveguide propagation of a DMA and the identity otherwise. The
//! fully digital array uses `Q = I` with one RF chain per element.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ArrayLayout;

const J: Complex64 = Complex64::new(0.0, 1.0);

/// Tolerance used when checking unit-modulus and Lorentzian membership.
pub const CONSTRAINT_TOLERANCE: f64 = 1e-9;

/// Microstrip propagation `h = exp(-rho (alpha + j beta))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveguideModel {
    /// Per-microstrip attenuation, 1/m.
    pub attenuation: Vec<f64>,
    /// Per-microstrip wavenumber, 1/m.
    pub wavenumber: Vec<f64>,
    /// Per-element distance to the microstrip output port, m.
    pub tap_positions: Vec<f64>,
}

impl WaveguideModel {
    /// Shared `alpha`, `beta` on every strip, with taps at `col * col_spacing`
    /// from the port.
    pub fn uniform(layout: &ArrayLayout, attenuation: f64, wavenumber: f64) -> Self {
        let taps = (0..layout.len())
            .map(|idx| (idx % layout.n_cols()) as f64 * layout.col_spacing())
            .collect();
        Self {
            attenuation: vec![attenuation; layout.n_rows()],
            wavenumber: vec![wavenumber; layout.n_rows()],
            tap_positions: taps,
        }
    }

    pub fn validate(&self, layout: &ArrayLayout) -> Result<()> {
        if self.attenuation.len() != layout.n_rows() || self.wavenumber.len() != layout.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: layout.n_rows(),
                actual: self.attenuation.len().min(self.wavenumber.len()),
                context: "waveguide coefficients per microstrip",
            });
        }
        if self.tap_positions.len() != layout.len() {
            return Err(Error::DimensionMismatch {
                expected: layout.len(),
                actual: self.tap_positions.len(),
                context: "waveguide tap positions",
            });
        }
        if self.attenuation.iter().any(|a| !(*a >= 0.0)) {
            return Err(Error::InvalidConfig("waveguide attenuation must be >= 0".into()));
        }
        for row in 0..layout.n_rows() {
            let strip = &self.tap_positions[row * layout.n_cols()..(row + 1) * layout.n_cols()];
            if strip.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::InvalidConfig(format!(
                    "tap positions must be nondecreasing along microstrip {row}"
                )));
            }
        }
        Ok(())
    }

    /// `rho * beta` for element `idx`.
    pub fn phase_delay(&self, layout: &ArrayLayout, idx: usize) -> f64 {
        self.tap_positions[idx] * self.wavenumber[idx / layout.n_cols()]
    }
}

/// Diagonal of `H`.
pub fn waveguide_response(layout: &ArrayLayout, model: &WaveguideModel) -> DVector<Complex64> {
    DVector::from_iterator(
        layout.len(),
        (0..layout.len()).map(|idx| {
            let row = idx / layout.n_cols();
            let rho = model.tap_positions[idx];
            (-Complex64::new(model.attenuation[row], model.wavenumber[row]) * rho).exp()
        }),
    )
}

/// Full `N x N` diagonal matrix `H`.
pub fn waveguide_response_matrix(layout: &ArrayLayout, model: &WaveguideModel) -> DMatrix<Complex64> {
    DMatrix::from_diagonal(&waveguide_response(layout, model))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchitectureKind {
    FullyDigital,
    Hybrid,
    Dma,
}

impl ArchitectureKind {
    pub fn name(self) -> &'static str {
        match self {
            ArchitectureKind::FullyDigital => "fully digital",
            ArchitectureKind::Hybrid => "hybrid",
            ArchitectureKind::Dma => "DMA",
        }
    }

    /// Feasible set of the analog weights.
    pub fn constraint(self) -> Constraint {
        match self {
            ArchitectureKind::FullyDigital => Constraint::Identity,
            ArchitectureKind::Hybrid => Constraint::PhaseOnly,
            ArchitectureKind::Dma => Constraint::Lorentzian,
        }
    }
}

/// Receiver architecture with its waveguide model where applicable.
#[derive(Debug, Clone, PartialEq)]
pub enum Architecture {
    FullyDigital,
    Hybrid,
    Dma(WaveguideModel),
}

impl Architecture {
    pub fn kind(&self) -> ArchitectureKind {
        match self {
            Architecture::FullyDigital => ArchitectureKind::FullyDigital,
            Architecture::Hybrid => ArchitectureKind::Hybrid,
            Architecture::Dma(_) => ArchitectureKind::Dma,
        }
    }

    pub fn waveguide(&self) -> Option<&WaveguideModel> {
        match self {
            Architecture::Dma(w) => Some(w),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    /// `|q| = 1`.
    PhaseOnly,
    /// `q = (j + e^{j phi}) / 2`.
    Lorentzian,
    /// `Q = I`, fully digital.
    Identity,
}

impl Constraint {
    /// Maps a unit-modulus weight into this feasible set.
    pub fn from_unit(self, unit: Complex64) -> Complex64 {
        match self {
            Constraint::Lorentzian => (J + unit) * 0.5,
            _ => unit,
        }
    }

    pub fn contains(self, q: Complex64) -> bool {
        match self {
            Constraint::PhaseOnly => (q.norm() - 1.0).abs() <= CONSTRAINT_TOLERANCE,
            Constraint::Lorentzian => ((q - J * 0.5).norm() - 0.5).abs() <= CONSTRAINT_TOLERANCE,
            Constraint::Identity => true,
        }
    }
}

/// Combining matrix `Q` together with its feasible set.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogWeights {
    values: DMatrix<Complex64>,
    constraint: Constraint,
    n_cols: usize,
}

impl AnalogWeights {
    /// `Q = I_N`.
    pub fn identity(n: usize) -> Self {
        Self {
            values: DMatrix::identity(n, n),
            constraint: Constraint::Identity,
            n_cols: 1,
        }
    }

    /// Block-sparse `Q` with element `idx` weighting row `idx / n_cols`.
    pub fn from_element_weights(
        layout: &ArrayLayout,
        weights: &[Complex64],
        constraint: Constraint,
    ) -> Result<Self> {
        if weights.len() != layout.len() {
            return Err(Error::DimensionMismatch {
                expected: layout.len(),
                actual: weights.len(),
                context: "element weights",
            });
        }
        if constraint == Constraint::Identity {
            return Ok(Self::identity(layout.len()));
        }
        let mut values = DMatrix::zeros(layout.n_rows(), layout.len());
        for (idx, w) in weights.iter().enumerate() {
            values[(idx / layout.n_cols(), idx)] = *w;
        }
        Ok(Self {
            values,
            constraint,
            n_cols: layout.n_cols(),
        })
    }

    /// Wraps an arbitrary matrix without checking it; see [`validate_weights`].
    pub fn from_matrix(values: DMatrix<Complex64>, constraint: Constraint, n_cols: usize) -> Self {
        Self {
            values,
            constraint,
            n_cols,
        }
    }

    pub fn values(&self) -> &DMatrix<Complex64> {
        &self.values
    }

    pub fn constraint(&self) -> Constraint {
        self.constraint
    }

    pub fn n_outputs(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_elements(&self) -> usize {
        self.values.ncols()
    }

    /// Elements per RF chain.
    pub fn block_len(&self) -> usize {
        self.n_cols
    }

    /// The nonzero weight of element `idx`.
    pub fn element_weight(&self, idx: usize) -> Complex64 {
        match self.constraint {
            Constraint::Identity => Complex64::new(1.0, 0.0),
            _ => self.values[(idx / self.n_cols, idx)],
        }
    }

    /// The per-element weights in element order.
    pub fn element_weights(&self) -> Vec<Complex64> {
        (0..self.n_elements()).map(|i| self.element_weight(i)).collect()
    }
}

/// First broken invariant found by [`validate_weights`].
#[derive(Debug, Clone, PartialEq)]
pub enum WeightViolation {
    Shape { rows: usize, cols: usize },
    OffBlock { row: usize, col: usize },
    Constraint { row: usize, col: usize, value: Complex64 },
    NotIdentity { row: usize, col: usize },
}

impl std::fmt::Display for WeightViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WeightViolation::Shape { rows, cols } => {
                write!(f, "{rows}x{cols} matrix is not block-structured")
            }
            WeightViolation::OffBlock { row, col } => write!(f, "nonzero off-block entry at ({row}, {col})"),
            WeightViolation::Constraint { row, col, value } => {
                write!(f, "entry ({row}, {col}) = {value} is outside the feasible set")
            }
            WeightViolation::NotIdentity { row, col } => {
                write!(f, "identity weights differ from I at ({row}, {col})")
            }
        }
    }
}

/// Checks block sparsity and the per-entry constraint.
pub fn validate_weights(w: &AnalogWeights) -> std::result::Result<(), WeightViolation> {
    let (rows, cols) = w.values.shape();
    if w.constraint == Constraint::Identity {
        for c in 0..cols {
            for r in 0..rows {
                let want = if r == c { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
                if w.values[(r, c)] != want {
                    return Err(WeightViolation::NotIdentity { row: r, col: c });
                }
            }
        }
        return Ok(());
    }
    if w.n_cols == 0 || rows * w.n_cols != cols {
        return Err(WeightViolation::Shape { rows, cols });
    }
    for c in 0..cols {
        let owner = c / w.n_cols;
        for r in 0..rows {
            let v = w.values[(r, c)];
            if r != owner {
                if v != Complex64::new(0.0, 0.0) {
                    return Err(WeightViolation::OffBlock { row: r, col: c });
                }
            } else if !w.constraint.contains(v) {
                return Err(WeightViolation::Constraint { row: r, col: c, value: v });
            }
        }
    }
    Ok(())
}

/// Maps a phase-shifter weight onto the Lorentzian circle, `(j + w) / 2`.
pub fn lorentzian_project(unit: Complex64) -> Result<Complex64> {
    if (unit.norm() - 1.0).abs() > CONSTRAINT_TOLERANCE {
        return Err(Error::NotUnitModulus(0, unit.norm()));
    }
    Ok((J + unit) * 0.5)
}

/// Uniform random phases mapped into `constraint`.
pub fn random_weights(layout: &ArrayLayout, constraint: Constraint, seed: u64) -> AnalogWeights {
    if constraint == Constraint::Identity {
        return AnalogWeights::identity(layout.len());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<Complex64> = (0..layout.len())
        .map(|_| {
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            constraint.from_unit(Complex64::from_polar(1.0, phase))
        })
        .collect();
    AnalogWeights::from_element_weights(layout, &weights, constraint)
        .expect("weight count matches layout")
}

/// `y = Q H x` for an arbitrary (possibly unvalidated) `Q`.
pub fn apply_frontend(
    w: &AnalogWeights,
    h: Option<&DVector<Complex64>>,
    x: &DVector<Complex64>,
) -> Result<DVector<Complex64>> {
    if x.len() != w.n_elements() {
        return Err(Error::DimensionMismatch {
            expected: w.n_elements(),
            actual: x.len(),
            context: "front-end input",
        });
    }
    match h {
        Some(h) if h.len() != x.len() => Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: h.len(),
            context: "waveguide response",
        }),
        Some(h) => Ok(w.values() * x.component_mul(h)),
        None => Ok(w.values() * x),
    }
}

/// Validated `Q` and `H` folded into per-element gains `q_il h_il`, applied
/// as per-strip sums.
#[derive(Debug, Clone, PartialEq)]
pub struct Frontend {
    weights: AnalogWeights,
    response: Option<DVector<Complex64>>,
    gains: Vec<Complex64>,
    n_outputs: usize,
    block: usize,
}

impl Frontend {
    pub fn new(
        weights: AnalogWeights,
        waveguide: Option<&WaveguideModel>,
        layout: &ArrayLayout,
    ) -> Result<Self> {
        validate_weights(&weights).map_err(|v| Error::InvalidConfig(v.to_string()))?;
        if weights.n_elements() != layout.len() {
            return Err(Error::DimensionMismatch {
                expected: layout.len(),
                actual: weights.n_elements(),
                context: "weights vs layout",
            });
        }
        let response = match waveguide {
            Some(wg) => {
                wg.validate(layout)?;
                Some(waveguide_response(layout, wg))
            }
            None => None,
        };
        let gains: Vec<Complex64> = (0..layout.len())
            .map(|i| {
                let q = weights.element_weight(i);
                match &response {
                    Some(h) => q * h[i],
                    None => q,
                }
            })
            .collect();
        let (n_outputs, block) = match weights.constraint() {
            Constraint::Identity => (layout.len(), 1),
            _ => (layout.n_rows(), layout.n_cols()),
        };
        Ok(Self {
            weights,
            response,
            gains,
            n_outputs,
            block,
        })
    }

    /// `Q = H = I`.
    pub fn fully_digital(n: usize) -> Self {
        Self {
            weights: AnalogWeights::identity(n),
            response: None,
            gains: vec![Complex64::new(1.0, 0.0); n],
            n_outputs: n,
            block: 1,
        }
    }

    pub fn weights(&self) -> &AnalogWeights {
        &self.weights
    }

    pub fn response(&self) -> Option<&DVector<Complex64>> {
        self.response.as_ref()
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    pub fn n_elements(&self) -> usize {
        self.gains.len()
    }

    /// Per-element `q h` products.
    pub fn gains(&self) -> &[Complex64] {
        &self.gains
    }

    pub fn apply(&self, x: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        if x.len() != self.gains.len() {
            return Err(Error::DimensionMismatch {
                expected: self.gains.len(),
                actual: x.len(),
                context: "front-end input",
            });
        }
        let mut out = DVector::zeros(self.n_outputs);
        self.apply_into(x.as_slice(), out.as_mut_slice());
        Ok(out)
    }

    pub(crate) fn apply_into(&self, x: &[Complex64], out: &mut [Complex64]) {
        for (o, (g, xs)) in out
            .iter_mut()
            .zip(self.gains.chunks(self.block).zip(x.chunks(self.block)))
        {
            *o = g.iter().zip(xs).map(|(a, b)| a * b).sum();
        }
    }
}
