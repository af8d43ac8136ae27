//! Analog weight design for hypothesized user positions.
//!
//! The relaxed design problem maximizes the received focusing energy
//! `sum_m ||Q H g_m||^2` over feasible `Q`. Because each row of `Q` touches a
//! single microstrip, the objective splits into per-strip quadratics
//! `sum_i q_i^H A_i q_i` with `A_i = sum_m conj(w_mi) w_mi^T` and
//! `w_m = h o g_m` restricted to strip `i`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{steering_vector, SimulationConfig};
use crate::error::{Error, Result};
use crate::frontend::{
    random_weights, waveguide_response, AnalogWeights, Architecture, ArchitectureKind, Constraint,
    WaveguideModel,
};
use crate::geometry::ArrayLayout;
use crate::likelihood::PositionHypothesisSet;

const J: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmijoSettings {
    pub initial_step: f64,
    pub shrink: f64,
    pub sufficient_decrease: f64,
    pub max_backtracks: usize,
}

impl Default for ArmijoSettings {
    fn default() -> Self {
        Self {
            initial_step: 1.0,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
            max_backtracks: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RcgSettings {
    pub max_iters: usize,
    /// Stop once the Riemannian gradient norm of the scaled objective drops
    /// below this.
    pub grad_tolerance: f64,
    pub armijo: ArmijoSettings,
    /// Restart with the gradient when the cosine between the conjugate
    /// direction and the gradient falls to this value or below.
    pub pr_restart_threshold: f64,
}

impl Default for RcgSettings {
    fn default() -> Self {
        Self {
            max_iters: 200,
            grad_tolerance: 1e-8,
            armijo: ArmijoSettings::default(),
            pr_restart_threshold: 0.0,
        }
    }
}

impl RcgSettings {
    pub fn validate(&self) -> Result<()> {
        let a = &self.armijo;
        if !(a.shrink > 0.0 && a.shrink < 1.0) {
            return Err(Error::InvalidConfig(format!("Armijo shrink {} not in (0, 1)", a.shrink)));
        }
        if !(a.sufficient_decrease > 0.0 && a.sufficient_decrease < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "Armijo sufficient decrease {} not in (0, 1)",
                a.sufficient_decrease
            )));
        }
        if !(a.initial_step > 0.0) {
            return Err(Error::InvalidConfig("Armijo initial step must be positive".into()));
        }
        if !(self.grad_tolerance >= 0.0) {
            return Err(Error::InvalidConfig("gradient tolerance must be >= 0".into()));
        }
        Ok(())
    }
}

/// Per-strip quadratic form of the focusing objective over the nonzero
/// entries `q_bar` of a block-sparse `Q`, stacked in element order.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedObjective {
    n_rows: usize,
    n_cols: usize,
    /// `w_m = h o g_m`, one vector of length `N` per user.
    w: Vec<DVector<Complex64>>,
    /// `A_i`, `n_cols x n_cols` per strip.
    blocks: Vec<DMatrix<Complex64>>,
}

impl ReducedObjective {
    pub fn from_element_maps(n_rows: usize, n_cols: usize, w: Vec<DVector<Complex64>>) -> Result<Self> {
        let n = n_rows * n_cols;
        if let Some(bad) = w.iter().find(|v| v.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: bad.len(),
                context: "reduced objective element map",
            });
        }
        let blocks = (0..n_rows)
            .map(|i| {
                let mut a = DMatrix::zeros(n_cols, n_cols);
                for wm in &w {
                    let seg = wm.rows(i * n_cols, n_cols);
                    a += seg.conjugate() * seg.transpose();
                }
                a
            })
            .collect();
        Ok(Self {
            n_rows,
            n_cols,
            w,
            blocks,
        })
    }

    pub fn n_users(&self) -> usize {
        self.w.len()
    }

    pub fn len(&self) -> usize {
        self.n_rows * self.n_cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `w_m` (length `N`).
    pub fn element_map(&self, m: usize) -> &DVector<Complex64> {
        &self.w[m]
    }

    pub fn block(&self, row: usize) -> &DMatrix<Complex64> {
        &self.blocks[row]
    }

    /// The `N_d x N` matrix `W_bar_m` with `W_bar_m q_bar = Q H g_m`.
    pub fn dense_w(&self, m: usize) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(self.n_rows, self.len());
        for idx in 0..self.len() {
            out[(idx / self.n_cols, idx)] = self.w[m][idx];
        }
        out
    }

    /// `sum_i q_i^H A_i q_i`.
    pub fn value(&self, q: &DVector<Complex64>) -> f64 {
        self.blocks
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let qi = q.rows(i * self.n_cols, self.n_cols);
                qi.dotc(&(a * qi)).re
            })
            .sum()
    }

    /// `A q` evaluated block by block.
    pub fn apply(&self, q: &DVector<Complex64>) -> DVector<Complex64> {
        let mut out = DVector::zeros(self.len());
        for (i, a) in self.blocks.iter().enumerate() {
            let qi = q.rows(i * self.n_cols, self.n_cols);
            out.rows_mut(i * self.n_cols, self.n_cols).copy_from(&(a * qi));
        }
        out
    }

    /// Mean diagonal of `A`; the natural magnitude of the objective per
    /// unit-modulus entry.
    pub fn scale(&self) -> f64 {
        let n = self.len().max(1) as f64;
        self.blocks.iter().map(|a| a.trace().re).sum::<f64>() / n
    }
}

/// Focusing energy `sum_m ||Q H g_m||^2` computed directly from `Q`.
pub fn weights_objective(
    weights: &AnalogWeights,
    positions: &PositionHypothesisSet,
    layout: &ArrayLayout,
    cfg: &SimulationConfig,
    waveguide: Option<&WaveguideModel>,
) -> Result<f64> {
    let h = waveguide.map(|wg| waveguide_response(layout, wg));
    let mut total = 0.0;
    for p in positions.as_slice() {
        let mut g = steering_vector(layout, p, cfg)?;
        if let Some(h) = &h {
            g.component_mul_assign(h);
        }
        total += (weights.values() * g).norm_squared();
    }
    Ok(total)
}

pub fn build_reduced_objective(
    positions: &PositionHypothesisSet,
    layout: &ArrayLayout,
    cfg: &SimulationConfig,
    waveguide: Option<&WaveguideModel>,
) -> Result<ReducedObjective> {
    let h = waveguide.map(|wg| waveguide_response(layout, wg));
    let w = positions
        .as_slice()
        .iter()
        .map(|p| {
            let mut g = steering_vector(layout, p, cfg)?;
            if let Some(h) = &h {
                g.component_mul_assign(h);
            }
            Ok(g)
        })
        .collect::<Result<Vec<_>>>()?;
    ReducedObjective::from_element_maps(layout.n_rows(), layout.n_cols(), w)
}

/// Mean over users of the propagation phase `v`, plus the in-waveguide phase
/// `rho beta` when a waveguide is present. Phases are not wrapped.
pub fn centroid_phases(
    positions: &PositionHypothesisSet,
    layout: &ArrayLayout,
    cfg: &SimulationConfig,
    waveguide: Option<&WaveguideModel>,
) -> Result<Vec<f64>> {
    if positions.is_empty() {
        return Err(Error::InvalidConfig("centroid phases need at least one position".into()));
    }
    let k = 2.0 * std::f64::consts::PI * cfg.carrier_frequency / cfg.speed_of_light;
    let m = positions.len() as f64;
    let mut psi = vec![0.0; layout.len()];
    for p in positions.as_slice() {
        if !(p.distance > 0.0) {
            return Err(Error::NonPositiveDistance(p.distance));
        }
        for (idx, slot) in psi.iter_mut().enumerate() {
            *slot += k * layout.distance_to(idx, p);
        }
    }
    for (idx, slot) in psi.iter_mut().enumerate() {
        *slot /= m;
        if let Some(wg) = waveguide {
            *slot += wg.phase_delay(layout, idx);
        }
    }
    Ok(psi)
}

/// Unit-modulus weights at the centroid phases, mapped into the
/// architecture's feasible set.
pub fn projection_tuning(
    positions: &PositionHypothesisSet,
    layout: &ArrayLayout,
    cfg: &SimulationConfig,
    architecture: &Architecture,
) -> Result<AnalogWeights> {
    let constraint = architecture.kind().constraint();
    if constraint == Constraint::Identity {
        return Ok(AnalogWeights::identity(layout.len()));
    }
    let psi = centroid_phases(positions, layout, cfg, architecture.waveguide())?;
    let q: Vec<Complex64> = psi
        .iter()
        .map(|&phase| constraint.from_unit(Complex64::from_polar(1.0, phase)))
        .collect();
    AnalogWeights::from_element_weights(layout, &q, constraint)
}

/// `q_bar = s (b + o 1)` linking the unit-circle variable `b` to feasible
/// weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub scale: Complex64,
    pub offset: Complex64,
}

impl AffineMap {
    pub fn for_constraint(c: Constraint) -> Result<Self> {
        match c {
            Constraint::Lorentzian => Ok(Self {
                scale: Complex64::new(0.5, 0.0),
                offset: J,
            }),
            Constraint::PhaseOnly => Ok(Self {
                scale: Complex64::new(1.0, 0.0),
                offset: Complex64::new(0.0, 0.0),
            }),
            Constraint::Identity => Err(Error::IncompatibleTuning {
                method: "rcg",
                architecture: "fully digital",
            }),
        }
    }

    pub fn to_weights(&self, b: &DVector<Complex64>) -> DVector<Complex64> {
        b.map(|x| self.scale * (x + self.offset))
    }

    pub fn to_unit(&self, q: &DVector<Complex64>) -> DVector<Complex64> {
        q.map(|x| x / self.scale - self.offset)
    }
}

/// `g(b) = q_bar^H A q_bar` with `q_bar = s (b + o)`.
pub fn unit_objective(b: &DVector<Complex64>, ro: &ReducedObjective, map: &AffineMap) -> f64 {
    ro.value(&map.to_weights(b))
}

/// `(d/dRe + j d/dIm) g(b) = 2 |s|^2 A (b + o 1)`; for the Lorentzian map
/// this is `(A b + j A 1) / 2`.
pub fn euclidean_gradient(b: &DVector<Complex64>, ro: &ReducedObjective, map: &AffineMap) -> DVector<Complex64> {
    let shifted = b.map(|x| x + map.offset);
    ro.apply(&shifted) * Complex64::new(2.0 * map.scale.norm_sqr(), 0.0)
}

/// Projection onto the tangent space of the product of unit circles at `b`.
pub fn riemannian_gradient(b: &DVector<Complex64>, euclid: &DVector<Complex64>) -> DVector<Complex64> {
    tangent_project(b, euclid)
}

fn tangent_project(b: &DVector<Complex64>, v: &DVector<Complex64>) -> DVector<Complex64> {
    DVector::from_iterator(
        b.len(),
        b.iter().zip(v.iter()).map(|(bi, vi)| vi - bi * (vi * bi.conj()).re),
    )
}

fn retract(v: &DVector<Complex64>, fallback: &DVector<Complex64>) -> DVector<Complex64> {
    DVector::from_iterator(
        v.len(),
        v.iter().zip(fallback.iter()).map(|(x, f)| {
            let n = x.norm();
            if n > 0.0 && n.is_finite() {
                x / n
            } else {
                *f
            }
        }),
    )
}

fn inner(a: &DVector<Complex64>, b: &DVector<Complex64>) -> f64 {
    a.dotc(b).re
}

fn max_modulus_error(b: &DVector<Complex64>) -> f64 {
    b.iter().map(|x| (x.norm() - 1.0).abs()).fold(0.0, f64::max)
}

/// Diagnostics of one RCG run.
#[derive(Debug, Clone, PartialEq)]
pub struct RcgReport {
    /// Focusing energy at the start and after each accepted step.
    pub objective_history: Vec<f64>,
    pub accepted_steps: usize,
    pub converged: bool,
    pub line_search_failed: bool,
    /// Largest `| |b_r| - 1 |` over all iterates.
    pub max_modulus_error: f64,
    pub final_gradient_norm: f64,
}

/// Riemannian conjugate gradient on the unit-circle variable `b` from a
/// feasible starting point. Returns the best feasible weights found.
pub fn rcg_tuning(
    positions: &PositionHypothesisSet,
    layout: &ArrayLayout,
    cfg: &SimulationConfig,
    architecture: &Architecture,
    settings: &RcgSettings,
    init: &AnalogWeights,
) -> Result<(AnalogWeights, RcgReport)> {
    settings.validate()?;
    let constraint = architecture.kind().constraint();
    if constraint == Constraint::Identity {
        return Ok((
            AnalogWeights::identity(layout.len()),
            RcgReport {
                objective_history: Vec::new(),
                accepted_steps: 0,
                converged: true,
                line_search_failed: false,
                max_modulus_error: 0.0,
                final_gradient_norm: 0.0,
            },
        ));
    }
    if init.constraint() != constraint || init.n_elements() != layout.len() {
        return Err(Error::IncompatibleTuning {
            method: "rcg",
            architecture: architecture.kind().name(),
        });
    }
    let map = AffineMap::for_constraint(constraint)?;
    let ro = build_reduced_objective(positions, layout, cfg, architecture.waveguide())?;
    let q0 = DVector::from_vec(init.element_weights());
    let b0 = map.to_unit(&q0);
    for (r, x) in b0.iter().enumerate() {
        if (x.norm() - 1.0).abs() > crate::frontend::CONSTRAINT_TOLERANCE {
            return Err(Error::NotUnitModulus(r, x.norm()));
        }
    }
    let b0 = retract(&b0, &b0);
    let (b, report) = rcg_on_circle(&ro, &map, b0, settings);
    let q = map.to_weights(&b);
    let weights = AnalogWeights::from_element_weights(layout, q.as_slice(), constraint)?;
    Ok((weights, report))
}

/// Core RCG loop, maximizing `g` by minimizing `-g / scale`.
pub fn rcg_on_circle(
    ro: &ReducedObjective,
    map: &AffineMap,
    b0: DVector<Complex64>,
    settings: &RcgSettings,
) -> (DVector<Complex64>, RcgReport) {
    let scale = match ro.scale() {
        s if s > 0.0 && s.is_finite() => s,
        _ => 1.0,
    };
    let cost = |b: &DVector<Complex64>| -unit_objective(b, ro, map) / scale;
    // Gradient of the cost (descent direction is its negative).
    let rgrad = |b: &DVector<Complex64>| {
        let e = euclidean_gradient(b, ro, map) * Complex64::new(-1.0 / scale, 0.0);
        riemannian_gradient(b, &e)
    };

    let mut b = b0;
    let mut f = cost(&b);
    let mut grad = rgrad(&b);
    let mut dir = -grad.clone();
    let mut report = RcgReport {
        objective_history: vec![-f * scale],
        accepted_steps: 0,
        converged: false,
        line_search_failed: false,
        max_modulus_error: max_modulus_error(&b),
        final_gradient_norm: grad.norm(),
    };
    let a = &settings.armijo;

    for _ in 0..settings.max_iters {
        let gnorm = grad.norm();
        report.final_gradient_norm = gnorm;
        if gnorm <= settings.grad_tolerance {
            report.converged = true;
            break;
        }
        let mut slope = inner(&grad, &dir);
        if !(-slope > settings.pr_restart_threshold * gnorm * dir.norm()) {
            dir = -grad.clone();
            slope = -gnorm * gnorm;
        }

        let mut step = a.initial_step;
        let mut accepted = None;
        for _ in 0..=a.max_backtracks {
            let trial = retract(&(&b + &dir * Complex64::new(step, 0.0)), &b);
            let ft = cost(&trial);
            if ft.is_finite() && ft <= f + a.sufficient_decrease * step * slope {
                accepted = Some((trial, ft));
                break;
            }
            step *= a.shrink;
        }
        let Some((b_new, f_new)) = accepted else {
            report.line_search_failed = true;
            break;
        };

        let grad_new = rgrad(&b_new);
        let moved_grad = tangent_project(&b_new, &grad);
        let moved_dir = tangent_project(&b_new, &dir);
        let prev = grad.norm_squared();
        let zeta = if prev > 0.0 {
            (inner(&grad_new, &(&grad_new - &moved_grad)) / prev).max(0.0)
        } else {
            0.0
        };
        dir = -&grad_new + moved_dir * Complex64::new(zeta, 0.0);

        b = b_new;
        f = f_new;
        grad = grad_new;
        report.accepted_steps += 1;
        report.objective_history.push(-f * scale);
        report.max_modulus_error = report.max_modulus_error.max(max_modulus_error(&b));
        report.final_gradient_norm = grad.norm();
    }
    if !report.converged && !report.line_search_failed && report.final_gradient_norm <= settings.grad_tolerance {
        report.converged = true;
    }
    (b, report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuningMethod {
    Projection,
    Rcg,
    Random,
    /// Keep the current weights.
    None,
}

impl TuningMethod {
    pub fn name(self) -> &'static str {
        match self {
            TuningMethod::Projection => "projection",
            TuningMethod::Rcg => "rcg",
            TuningMethod::Random => "random",
            TuningMethod::None => "none",
        }
    }
}

/// Result of [`tune`].
#[derive(Debug, Clone, PartialEq)]
pub struct Tuned {
    pub weights: AnalogWeights,
    pub rcg: Option<RcgReport>,
    /// The method had no effect on this architecture.
    pub ignored: bool,
}

/// Dispatches to the tuning rules. A fully digital front end always gets the
/// identity. RCG starts from the projection solution.
#[allow(clippy::too_many_arguments)]
pub fn tune(
    positions: &PositionHypothesisSet,
    layout: &ArrayLayout,
    cfg: &SimulationConfig,
    architecture: &Architecture,
    method: TuningMethod,
    settings: &RcgSettings,
    current: &AnalogWeights,
    seed: u64,
) -> Result<Tuned> {
    let kind = architecture.kind();
    if kind == ArchitectureKind::FullyDigital {
        return Ok(Tuned {
            weights: AnalogWeights::identity(layout.len()),
            rcg: None,
            ignored: method != TuningMethod::None,
        });
    }
    let constraint = kind.constraint();
    if current.constraint() != constraint || current.n_elements() != layout.len() {
        return Err(Error::IncompatibleTuning {
            method: method.name(),
            architecture: kind.name(),
        });
    }
    let (weights, rcg) = match method {
        TuningMethod::None => (current.clone(), None),
        TuningMethod::Random => (random_weights(layout, constraint, seed), None),
        TuningMethod::Projection => (projection_tuning(positions, layout, cfg, architecture)?, None),
        TuningMethod::Rcg => {
            let init = projection_tuning(positions, layout, cfg, architecture)?;
            let (w, r) = rcg_tuning(positions, layout, cfg, architecture, settings, &init)?;
            (w, Some(r))
        }
    };
    Ok(Tuned {
        weights,
        rcg,
        ignored: false,
    })
}
