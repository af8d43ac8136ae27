//! Projection log-likelihood shared by localization and tuning.
//!
//! For hypotheses `p_1..p_k` the effective steering matrix is
//! `S = Q H [s(p_1) .. s(p_k)]` and the (unnormalized) log-likelihood of the
//! observed window is `sum_t |P[S] y(t)|^2 = T tr(P[S] R)`. Alternating
//! projection splits `P[S]` into the projector onto the other hypotheses plus
//! the rank-one projector onto the residual of the hypothesis being refreshed.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{fill_steering, SimulationConfig, SnapshotBatch};
use crate::error::{Error, Result};
use crate::frontend::Frontend;
use crate::geometry::{ArrayLayout, SourcePosition};

/// Reciprocal condition number below which an unregularized Gram matrix is
/// rejected.
const MIN_RCOND: f64 = 1e-13;

/// Relative residual norm below which a hypothesis is considered to lie in the
/// span of the others.
pub const RESIDUAL_COLLAPSE: f64 = 1e-9;

/// Ordered set of hypothesized source positions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PositionHypothesisSet {
    hypotheses: Vec<SourcePosition>,
}

impl PositionHypothesisSet {
    pub fn new(hypotheses: Vec<SourcePosition>) -> Self {
        Self { hypotheses }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn as_slice(&self) -> &[SourcePosition] {
        &self.hypotheses
    }

    pub fn get(&self, m: usize) -> SourcePosition {
        self.hypotheses[m]
    }

    pub fn push(&mut self, p: SourcePosition) {
        self.hypotheses.push(p);
    }

    pub fn set(&mut self, m: usize, p: SourcePosition) {
        self.hypotheses[m] = p;
    }

    /// All hypotheses except the `m`-th.
    pub fn without(&self, m: usize) -> Self {
        let hypotheses = self
            .hypotheses
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != m)
            .map(|(_, p)| *p)
            .collect();
        Self { hypotheses }
    }

    /// Index pair of the first exact duplicate, if any.
    pub fn first_duplicate(&self) -> Option<(usize, usize)> {
        for (a, pa) in self.hypotheses.iter().enumerate() {
            for (b, pb) in self.hypotheses.iter().enumerate().skip(a + 1) {
                if pa == pb {
                    return Some((a, b));
                }
            }
        }
        None
    }
}

impl From<Vec<SourcePosition>> for PositionHypothesisSet {
    fn from(v: Vec<SourcePosition>) -> Self {
        Self::new(v)
    }
}

/// Combined front-end response `Q H s(p)` to one hypothesis.
pub fn effective_steering_vector(
    p: &SourcePosition,
    frontend: &Frontend,
    layout: &ArrayLayout,
    cfg: &SimulationConfig,
) -> Result<DVector<Complex64>> {
    if !(p.distance > 0.0) {
        return Err(Error::NonPositiveDistance(p.distance));
    }
    let mut s = vec![Complex64::new(0.0, 0.0); layout.len()];
    fill_steering(layout, p, cfg, &mut s)?;
    let mut out = DVector::zeros(frontend.n_outputs());
    frontend.apply_into(&s, out.as_mut_slice());
    Ok(out)
}

/// `S(p_set, Q) = Q H S_a(p_set)`, one column per hypothesis.
pub fn effective_steering(
    set: &PositionHypothesisSet,
    frontend: &Frontend,
    layout: &ArrayLayout,
    cfg: &SimulationConfig,
) -> Result<DMatrix<Complex64>> {
    let mut out = DMatrix::zeros(frontend.n_outputs(), set.len());
    for (m, p) in set.as_slice().iter().enumerate() {
        out.set_column(m, &effective_steering_vector(p, frontend, layout, cfg)?);
    }
    Ok(out)
}

/// Default Tikhonov ridge `1e-12 tr(X^H X) / k`.
pub fn default_ridge(x: &DMatrix<Complex64>) -> f64 {
    let k = x.ncols().max(1) as f64;
    1e-12 * x.norm_squared() / k
}

/// `P = X (X^H X + ridge I)^{-1} X^H`.
pub fn projection_operator(x: &DMatrix<Complex64>, ridge: f64) -> Result<DMatrix<Complex64>> {
    let n = x.nrows();
    let k = x.ncols();
    if k == 0 {
        return Ok(DMatrix::zeros(n, n));
    }
    let mut gram = x.adjoint() * x;
    for i in 0..k {
        gram[(i, i)] += Complex64::new(ridge, 0.0);
    }
    let chol = gram.cholesky().ok_or(Error::IllConditioned(0.0))?;
    if ridge == 0.0 {
        let diag: Vec<f64> = (0..k).map(|i| chol.l_dirty()[(i, i)].re.powi(2)).collect();
        let hi = diag.iter().cloned().fold(0.0, f64::max);
        let lo = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        let rcond = if hi > 0.0 { lo / hi } else { 0.0 };
        if !(rcond >= MIN_RCOND) {
            return Err(Error::IllConditioned(rcond));
        }
    }
    let coef = chol.solve(&x.adjoint());
    let p = x * coef;
    Ok((&p + p.adjoint()) * Complex64::new(0.5, 0.0))
}

/// Projector onto the span of `x` using the default ridge.
pub fn projection(x: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    projection_operator(x, default_ridge(x))
}

/// `(I - P[S(others)]) Q H s(p_m)`.
pub fn residual_steering(
    p_m: &SourcePosition,
    others: &PositionHypothesisSet,
    frontend: &Frontend,
    layout: &ArrayLayout,
    cfg: &SimulationConfig,
) -> Result<DVector<Complex64>> {
    let u = effective_steering_vector(p_m, frontend, layout, cfg)?;
    if others.is_empty() {
        return Ok(u);
    }
    let s = effective_steering(others, frontend, layout, cfg)?;
    let p = projection(&s)?;
    Ok(&u - p * &u)
}

/// Value of one alternating-projection sub-problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApValue {
    pub value: f64,
    /// The hypothesis lies in the span of the others; `value` is reported as 0.
    pub degenerate: bool,
}

/// Evaluates `sum_t |P[r] y(t)|^2` over many hypotheses against a fixed set of
/// other hypotheses, reusing the complement projector and scratch buffers.
#[derive(Debug, Clone)]
pub struct SubproblemObjective<'a> {
    layout: &'a ArrayLayout,
    cfg: &'a SimulationConfig,
    frontend: &'a Frontend,
    batch: &'a SnapshotBatch,
    complement: Option<DMatrix<Complex64>>,
    use_covariance: bool,
    steer: Vec<Complex64>,
    u: DVector<Complex64>,
    r: DVector<Complex64>,
}

impl<'a> SubproblemObjective<'a> {
    /// Complement of the projector onto the given others' effective steering.
    pub fn new(
        others: &PositionHypothesisSet,
        batch: &'a SnapshotBatch,
        frontend: &'a Frontend,
        layout: &'a ArrayLayout,
        cfg: &'a SimulationConfig,
    ) -> Result<Self> {
        let complement = if others.is_empty() {
            None
        } else {
            let s = effective_steering(others, frontend, layout, cfg)?;
            Some(complement_of(&projection(&s)?))
        };
        Self::with_complement(complement, batch, frontend, layout, cfg)
    }

    /// Uses `I - accumulated` as the complement, where `accumulated` is a
    /// projector built up incrementally.
    pub fn from_projector(
        accumulated: &DMatrix<Complex64>,
        batch: &'a SnapshotBatch,
        frontend: &'a Frontend,
        layout: &'a ArrayLayout,
        cfg: &'a SimulationConfig,
    ) -> Result<Self> {
        Self::with_complement(Some(complement_of(accumulated)), batch, frontend, layout, cfg)
    }

    fn with_complement(
        complement: Option<DMatrix<Complex64>>,
        batch: &'a SnapshotBatch,
        frontend: &'a Frontend,
        layout: &'a ArrayLayout,
        cfg: &'a SimulationConfig,
    ) -> Result<Self> {
        if batch.channel_count() != frontend.n_outputs() {
            return Err(Error::DimensionMismatch {
                expected: frontend.n_outputs(),
                actual: batch.channel_count(),
                context: "snapshot channels vs front-end outputs",
            });
        }
        let nd = frontend.n_outputs();
        Ok(Self {
            layout,
            cfg,
            frontend,
            batch,
            complement,
            use_covariance: batch.n_snapshots() > nd,
            steer: vec![Complex64::new(0.0, 0.0); layout.len()],
            u: DVector::zeros(nd),
            r: DVector::zeros(nd),
        })
    }

    /// Forces the snapshot-sum (`false`) or covariance (`true`) form.
    pub fn set_use_covariance(&mut self, yes: bool) {
        self.use_covariance = yes;
    }

    /// Residual steering vector for `p` (valid after `residual`).
    pub fn residual(&mut self, p: &SourcePosition) -> Result<&DVector<Complex64>> {
        fill_steering(self.layout, p, self.cfg, &mut self.steer)?;
        self.frontend.apply_into(&self.steer, self.u.as_mut_slice());
        match &self.complement {
            Some(c) => self.r.gemv(Complex64::new(1.0, 0.0), c, &self.u, Complex64::new(0.0, 0.0)),
            None => self.r.copy_from(&self.u),
        }
        Ok(&self.r)
    }

    pub fn evaluate(&mut self, p: &SourcePosition) -> Result<ApValue> {
        self.residual(p)?;
        let rr = self.r.norm_squared();
        let uu = self.u.norm_squared();
        if !(rr > RESIDUAL_COLLAPSE * RESIDUAL_COLLAPSE * uu) || rr == 0.0 {
            return Ok(ApValue {
                value: 0.0,
                degenerate: true,
            });
        }
        let value = if self.use_covariance {
            let rv = self.batch.covariance() * &self.r;
            self.r.dotc(&rv).re * self.batch.n_snapshots() as f64 / rr
        } else {
            self.batch
                .samples()
                .column_iter()
                .map(|y| self.r.dotc(&y).norm_sqr())
                .sum::<f64>()
                / rr
        };
        Ok(ApValue {
            value,
            degenerate: false,
        })
    }
}

fn complement_of(p: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    DMatrix::identity(p.nrows(), p.ncols()) - p
}

/// `sum_t |P[r] y(t)|^2` with `r` the residual of `p_m` against `others`.
pub fn ap_objective(
    p_m: &SourcePosition,
    others: &PositionHypothesisSet,
    batch: &SnapshotBatch,
    frontend: &Frontend,
    layout: &ArrayLayout,
    cfg: &SimulationConfig,
) -> Result<ApValue> {
    SubproblemObjective::new(others, batch, frontend, layout, cfg)?.evaluate(p_m)
}

/// `f(p_set, Q) = tr(P[S(p_set, Q)] R)`.
pub fn focusing_objective(
    set: &PositionHypothesisSet,
    frontend: &Frontend,
    batch: &SnapshotBatch,
    layout: &ArrayLayout,
    cfg: &SimulationConfig,
) -> Result<f64> {
    let s = effective_steering(set, frontend, layout, cfg)?;
    let p = projection(&s)?;
    Ok((p * batch.covariance()).trace().re)
}

/// `sum_t |P[S] y(t)|^2 / T`; equal to [`focusing_objective`] up to round-off.
pub fn focusing_objective_snapshots(
    set: &PositionHypothesisSet,
    frontend: &Frontend,
    batch: &SnapshotBatch,
    layout: &ArrayLayout,
    cfg: &SimulationConfig,
) -> Result<f64> {
    let s = effective_steering(set, frontend, layout, cfg)?;
    let p = projection(&s)?;
    let total: f64 = batch
        .samples()
        .column_iter()
        .map(|y| (&p * y).norm_squared())
        .sum();
    Ok(total / batch.n_snapshots() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{channel_matrix, simulate_snapshots};
    use crate::frontend::{random_weights, Constraint, WaveguideModel};
    use crate::geometry::build_layout;
    use crate::testutil::{random_matrix, Lcg};
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_6};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Explicit inverse by Gauss-Jordan elimination.
    fn inverse(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let n = a.nrows();
        let mut m = a.clone();
        let mut inv = DMatrix::<Complex64>::identity(n, n);
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| m[(i, col)].norm().total_cmp(&m[(j, col)].norm())).unwrap();
            m.swap_rows(col, piv);
            inv.swap_rows(col, piv);
            let d = m[(col, col)];
            for k in 0..n {
                m[(col, k)] /= d;
                inv[(col, k)] /= d;
            }
            for row in 0..n {
                if row != col {
                    let f = m[(row, col)];
                    for k in 0..n {
                        let a = m[(col, k)];
                        let b = inv[(col, k)];
                        m[(row, k)] -= f * a;
                        inv[(row, k)] -= f * b;
                    }
                }
            }
        }
        inv
    }

    #[test]
    fn rank_one_projector() {
        let u = DMatrix::from_column_slice(3, 1, &[c(0.6, 0.0), c(0.0, 0.8), c(0.0, 0.0)]);
        let p = projection_operator(&u, 0.0).unwrap();
        let want = &u * u.adjoint();
        assert!((p - want).norm() < 1e-14);
    }

    #[test]
    fn orthonormal_columns() {
        let mut rng = Lcg::new(3);
        let x = random_matrix(&mut rng, 6, 3);
        let q = x.qr().q();
        let p = projection_operator(&q, 0.0).unwrap();
        assert!((p - &q * q.adjoint()).norm() < 1e-12);
    }

    #[test]
    fn random_projector_matches_explicit_inverse() {
        let mut rng = Lcg::new(17);
        let x = random_matrix(&mut rng, 8, 3);
        let p = projection_operator(&x, 0.0).unwrap();
        let oracle = &x * inverse(&(x.adjoint() * &x)) * x.adjoint();
        assert!((&p - &oracle).norm() < 1e-10);
        assert!((&p * &p - &p).norm() < 1e-10);
        assert!((&p - p.adjoint()).norm() < 1e-10);
        assert!((&p * &x - &x).norm() < 1e-10 * x.norm());
    }

    #[test]
    fn singular_gram_without_ridge_is_rejected() {
        let mut rng = Lcg::new(5);
        let col = random_matrix(&mut rng, 5, 1);
        let mut x = DMatrix::zeros(5, 2);
        x.set_column(0, &col.column(0));
        x.set_column(1, &col.column(0));
        assert!(matches!(projection_operator(&x, 0.0), Err(Error::IllConditioned(_))));
        let p = projection_operator(&x, default_ridge(&x)).unwrap();
        assert!((&p * &col - &col).norm() < 1e-6 * col.norm());
    }

    struct Scene {
        layout: ArrayLayout,
        cfg: SimulationConfig,
        frontend: Frontend,
        batch: SnapshotBatch,
        truth: Vec<SourcePosition>,
    }

    fn scene(noise: f64, users: &[SourcePosition]) -> Scene {
        let layout = build_layout(4, 8, 0.01, 0.025, 0.005).unwrap();
        let mut cfg = SimulationConfig::new(28e9, 20);
        cfg.noise_variance = noise;
        cfg.rng_seed = 4;
        let wg = WaveguideModel::uniform(&layout, 0.6, 827.67);
        let q = random_weights(&layout, Constraint::Lorentzian, 12);
        let frontend = Frontend::new(q, Some(&wg), &layout).unwrap();
        let g = channel_matrix(&layout, users, &cfg).unwrap();
        let batch = simulate_snapshots(&g, &cfg, &frontend).unwrap();
        Scene {
            layout,
            cfg,
            frontend,
            batch,
            truth: users.to_vec(),
        }
    }

    #[test]
    fn empty_others_leave_steering_untouched() {
        let s = scene(0.0, &[SourcePosition::planar(0.6, 0.3)]);
        let p = SourcePosition::planar(0.4, -0.2);
        let r = residual_steering(&p, &PositionHypothesisSet::empty(), &s.frontend, &s.layout, &s.cfg).unwrap();
        let u = effective_steering_vector(&p, &s.frontend, &s.layout, &s.cfg).unwrap();
        assert_eq!(r, u);
    }

    #[test]
    fn residual_is_orthogonal_and_collapses_in_span() {
        let s = scene(0.0, &[SourcePosition::planar(0.6, 0.3)]);
        let others = PositionHypothesisSet::new(vec![
            SourcePosition::planar(0.5, 0.1),
            SourcePosition::planar(0.9, -0.4),
        ]);
        let p = SourcePosition::planar(0.7, 0.5);
        let r = residual_steering(&p, &others, &s.frontend, &s.layout, &s.cfg).unwrap();
        let so = effective_steering(&others, &s.frontend, &s.layout, &s.cfg).unwrap();
        for col in so.column_iter() {
            assert!(r.dotc(&col).norm() < 1e-10 * r.norm() * col.norm());
        }
        let inside = residual_steering(&others.get(0), &others, &s.frontend, &s.layout, &s.cfg).unwrap();
        let u = effective_steering_vector(&others.get(0), &s.frontend, &s.layout, &s.cfg).unwrap();
        assert!(inside.norm() < 1e-6 * u.norm());
        let v = ap_objective(&others.get(0), &others, &s.batch, &s.frontend, &s.layout, &s.cfg).unwrap();
        assert!(v.degenerate);
        assert_eq!(v.value, 0.0);
    }

    #[test]
    fn ap_objective_on_orthogonal_and_aligned_data() {
        let s = scene(0.0, &[SourcePosition::planar(0.6, 0.3)]);
        let p = SourcePosition::planar(0.45, -0.1);
        let u = effective_steering_vector(&p, &s.frontend, &s.layout, &s.cfg).unwrap();
        let nd = u.len();
        // Data orthogonal to u.
        let mut basis = DMatrix::zeros(nd, 1);
        basis.set_column(0, &u);
        let comp = DMatrix::identity(nd, nd) - projection_operator(&basis, 0.0).unwrap();
        let w = &comp * DVector::from_iterator(nd, (0..nd).map(|i| c(1.0 + i as f64, 0.5)));
        let ortho = SnapshotBatch::from_samples(DMatrix::from_columns(&[w.clone(), w * c(0.0, 2.0)]));
        let v = ap_objective(&p, &PositionHypothesisSet::empty(), &ortho, &s.frontend, &s.layout, &s.cfg).unwrap();
        assert!(v.value.abs() < 1e-20 * u.norm_squared().max(1.0));
        // Data parallel to u.
        let par = SnapshotBatch::from_samples(DMatrix::from_columns(&[&u * c(2.0, -1.0), &u * c(0.0, 0.3)]));
        let v = ap_objective(&p, &PositionHypothesisSet::empty(), &par, &s.frontend, &s.layout, &s.cfg).unwrap();
        assert!((v.value - par.total_energy()).abs() < 1e-10 * par.total_energy());
    }

    #[test]
    fn noiseless_single_user_at_truth() {
        let s = scene(0.0, &[SourcePosition::planar(0.6, 0.3)]);
        let v = ap_objective(&s.truth[0], &PositionHypothesisSet::empty(), &s.batch, &s.frontend, &s.layout, &s.cfg)
            .unwrap();
        let g = channel_matrix(&s.layout, &s.truth, &s.cfg).unwrap();
        let qhg = s.frontend.apply(&g.column(0)).unwrap();
        let want = s.cfg.n_snapshots as f64 * qhg.norm_squared();
        assert!((v.value - want).abs() < 1e-10 * want);
    }

    #[test]
    fn covariance_and_snapshot_forms_agree() {
        let s = scene(1e-7, &[SourcePosition::planar(0.6, FRAC_PI_6), SourcePosition::planar(0.6, FRAC_PI_4)]);
        let others = PositionHypothesisSet::new(vec![SourcePosition::planar(0.5, 0.9)]);
        let mut obj = SubproblemObjective::new(&others, &s.batch, &s.frontend, &s.layout, &s.cfg).unwrap();
        let p = SourcePosition::planar(0.55, 0.4);
        obj.set_use_covariance(true);
        let a = obj.evaluate(&p).unwrap().value;
        obj.set_use_covariance(false);
        let b = obj.evaluate(&p).unwrap().value;
        assert!((a - b).abs() < 1e-10 * a.abs());

        let set = PositionHypothesisSet::new(vec![SourcePosition::planar(0.5, 0.2), SourcePosition::planar(0.8, 0.7)]);
        let f1 = focusing_objective(&set, &s.frontend, &s.batch, &s.layout, &s.cfg).unwrap();
        let f2 = focusing_objective_snapshots(&set, &s.frontend, &s.batch, &s.layout, &s.cfg).unwrap();
        assert!((f1 - f2).abs() < 1e-10 * f1.abs());
    }

    #[test]
    fn focusing_objective_trace_identities() {
        // R = I with orthonormal S gives k.
        let mut rng = Lcg::new(8);
        let x = random_matrix(&mut rng, 6, 2).qr().q();
        let p = projection_operator(&x, 0.0).unwrap();
        assert!(((p * DMatrix::<Complex64>::identity(6, 6)).trace().re - 2.0).abs() < 1e-12);

        // Noiseless data spanned by the hypotheses: full energy captured.
        let s = scene(0.0, &[SourcePosition::planar(0.6, FRAC_PI_6), SourcePosition::planar(0.6, FRAC_PI_4)]);
        let set = PositionHypothesisSet::new(s.truth.clone());
        let f = focusing_objective(&set, &s.frontend, &s.batch, &s.layout, &s.cfg).unwrap();
        let tr = s.batch.covariance().trace().re;
        assert!((f - tr).abs() < 1e-9 * tr);
    }

    #[test]
    fn decomposition_into_others_plus_residual() {
        let s = scene(0.0, &[SourcePosition::planar(0.6, 0.3)]);
        let set = PositionHypothesisSet::new(vec![
            SourcePosition::planar(0.5, 0.1),
            SourcePosition::planar(0.9, -0.4),
            SourcePosition::planar(0.7, 0.6),
        ]);
        let full = projection(&effective_steering(&set, &s.frontend, &s.layout, &s.cfg).unwrap()).unwrap();
        for m in 0..3 {
            let others = set.without(m);
            let po = projection(&effective_steering(&others, &s.frontend, &s.layout, &s.cfg).unwrap()).unwrap();
            let r = residual_steering(&set.get(m), &others, &s.frontend, &s.layout, &s.cfg).unwrap();
            let pr = &r * r.adjoint() / Complex64::new(r.norm_squared(), 0.0);
            assert!((&full - (po + pr)).norm() < 1e-9);
        }
    }

    #[test]
    fn duplicates_are_detected() {
        let p = SourcePosition::planar(1.0, 0.2);
        let set = PositionHypothesisSet::new(vec![p, SourcePosition::planar(2.0, 0.0), p]);
        assert_eq!(set.first_duplicate(), Some((0, 2)));
        assert_eq!(set.without(1).len(), 2);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn ap_objective_is_scale_invariant(seed in 0u64..1000, re in 0.1f64..5.0, im in -5.0f64..5.0) {
                let mut rng = Lcg::new(seed);
                let y = random_matrix(&mut rng, 5, 7);
                let batch = SnapshotBatch::from_samples(y.clone());
                let sbar = random_matrix(&mut rng, 5, 1).column(0).into_owned();
                let value = |v: &DVector<Complex64>| -> f64 {
                    y.column_iter().map(|col| v.dotc(&col).norm_sqr()).sum::<f64>() / v.norm_squared()
                };
                let a = value(&sbar);
                let b = value(&(&sbar * c(re, im)));
                prop_assert!((a - b).abs() <= 1e-10 * a);
                let tr = batch.covariance().trace().re * 7.0;
                prop_assert!(a <= tr * (1.0 + 1e-12));
            }

            #[test]
            fn focusing_bounded_by_trace(seed in 0u64..1000, k in 1usize..4) {
                let mut rng = Lcg::new(seed);
                let y = random_matrix(&mut rng, 6, 9);
                let batch = SnapshotBatch::from_samples(y);
                let x = random_matrix(&mut rng, 6, k);
                let p = projection(&x).unwrap();
                let f = (p * batch.covariance()).trace().re;
                prop_assert!(f <= batch.covariance().trace().re * (1.0 + 1e-12));
                prop_assert!(f >= -1e-12);
            }
        }
    }
}
