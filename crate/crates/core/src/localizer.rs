//! Alternating-projection localization of several sources behind a fixed
//! front end.

use serde::{Deserialize, Serialize};

use crate::channel::{SimulationConfig, SnapshotBatch};
use crate::error::{Error, Result};
use crate::frontend::Frontend;
use crate::geometry::{ArrayLayout, SourcePosition};
use crate::likelihood::{focusing_objective, PositionHypothesisSet, SubproblemObjective};

/// Points per axis (either side of the incumbent) in a refinement window.
const REFINE_HALF_WIDTH: i32 = 3;

/// Best sub-problem value below this fraction of the window energy means the
/// new hypothesis explains nothing the others did not.
const INIT_COLLAPSE: f64 = 1e-9;

/// Coarse-to-fine search region in polar coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchGrid {
    pub distance_range: (f64, f64),
    pub azimuth_range: (f64, f64),
    pub elevation_range: (f64, f64),
    pub n_distance: usize,
    pub n_azimuth: usize,
    pub n_elevation: usize,
    pub refine_levels: usize,
    /// Searches only this elevation when set.
    pub fix_elevation: Option<f64>,
}

impl SearchGrid {
    /// Grid over the XY plane (`elevation = pi/2`).
    pub fn planar(
        distance_range: (f64, f64),
        n_distance: usize,
        azimuth_range: (f64, f64),
        n_azimuth: usize,
        refine_levels: usize,
    ) -> Self {
        let half_pi = std::f64::consts::FRAC_PI_2;
        Self {
            distance_range,
            azimuth_range,
            elevation_range: (half_pi, half_pi),
            n_distance,
            n_azimuth,
            n_elevation: 1,
            refine_levels,
            fix_elevation: Some(half_pi),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, (lo, hi): (f64, f64), n: usize| -> Result<()> {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidConfig(format!("{name} range [{lo}, {hi}] is empty")));
            }
            if n < 2 {
                return Err(Error::InvalidConfig(format!("{name} axis needs at least 2 points, got {n}")));
            }
            Ok(())
        };
        check("distance", self.distance_range, self.n_distance)?;
        if !(self.distance_range.0 > 0.0) {
            return Err(Error::InvalidConfig("distance range must start above zero".into()));
        }
        check("azimuth", self.azimuth_range, self.n_azimuth)?;
        if self.fix_elevation.is_none() {
            check("elevation", self.elevation_range, self.n_elevation)?;
        }
        Ok(())
    }

    fn coarse_step(range: (f64, f64), n: usize) -> f64 {
        if n < 2 {
            0.0
        } else {
            (range.1 - range.0) / (n - 1) as f64
        }
    }

    fn shrink(&self) -> f64 {
        3f64.powi(self.refine_levels as i32)
    }

    /// Final grid spacing `(distance, azimuth, elevation)` after refinement.
    pub fn final_steps(&self) -> (f64, f64, f64) {
        let s = self.shrink();
        let el = if self.fix_elevation.is_some() {
            0.0
        } else {
            Self::coarse_step(self.elevation_range, self.n_elevation) / s
        };
        (
            Self::coarse_step(self.distance_range, self.n_distance) / s,
            Self::coarse_step(self.azimuth_range, self.n_azimuth) / s,
            el,
        )
    }

    /// Largest displacement in meters of one final grid cell at distance `d`.
    pub fn final_resolution_m(&self, d: f64) -> f64 {
        let (dd, da, de) = self.final_steps();
        (dd * dd + (d * da).powi(2) + (d * de).powi(2)).sqrt()
    }

    /// `true` when `a` and `b` differ by at most one final step on every axis.
    pub fn within_final_step(&self, a: &SourcePosition, b: &SourcePosition) -> bool {
        let (dd, da, de) = self.final_steps();
        let slack = 1.0 + 1e-9;
        (a.distance - b.distance).abs() <= dd * slack
            && (a.azimuth - b.azimuth).abs() <= da * slack
            && (a.elevation - b.elevation).abs() <= de * slack + 1e-15
    }

    fn axis(range: (f64, f64), n: usize) -> Vec<f64> {
        let step = Self::coarse_step(range, n);
        (0..n).map(|i| range.0 + step * i as f64).collect()
    }

    fn elevations(&self) -> Vec<f64> {
        match self.fix_elevation {
            Some(e) => vec![e],
            None => Self::axis(self.elevation_range, self.n_elevation),
        }
    }

    /// Coarse grid points in scan order (distance, then azimuth, then elevation).
    pub fn coarse_points(&self) -> Vec<SourcePosition> {
        let ds = Self::axis(self.distance_range, self.n_distance);
        let az = Self::axis(self.azimuth_range, self.n_azimuth);
        let el = self.elevations();
        let mut out = Vec::with_capacity(ds.len() * az.len() * el.len());
        for &d in &ds {
            for &a in &az {
                for &e in &el {
                    out.push(SourcePosition::new(d, a, e));
                }
            }
        }
        out
    }
}

fn window(center: f64, step: f64, range: (f64, f64)) -> Vec<f64> {
    if step == 0.0 {
        return vec![center];
    }
    let tol = 1e-12 * (range.1 - range.0).abs();
    (-REFINE_HALF_WIDTH..=REFINE_HALF_WIDTH)
        .map(|k| if k == 0 { center } else { center + k as f64 * step })
        .filter(|v| *v >= range.0 - tol && *v <= range.1 + tol)
        .collect()
}

fn scan<F>(points: impl Iterator<Item = SourcePosition>, objective: &mut F) -> Option<(SourcePosition, f64)>
where
    F: FnMut(&SourcePosition) -> f64,
{
    let mut best: Option<(SourcePosition, f64)> = None;
    for p in points {
        let v = objective(&p);
        if !v.is_finite() {
            continue;
        }
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((p, v));
        }
    }
    best
}

/// Exhaustive coarse scan followed by `refine_levels` windows, each a third of
/// the previous spacing and centered on the incumbent. Exact ties go to the
/// smallest distance, then the smallest azimuth. Non-finite values are skipped.
pub fn grid_maximize<F>(mut objective: F, grid: &SearchGrid) -> Result<SourcePosition>
where
    F: FnMut(&SourcePosition) -> f64,
{
    grid.validate()?;
    let (mut best, _) =
        scan(grid.coarse_points().into_iter(), &mut objective).ok_or(Error::NonFiniteObjective)?;

    let mut sd = SearchGrid::coarse_step(grid.distance_range, grid.n_distance);
    let mut sa = SearchGrid::coarse_step(grid.azimuth_range, grid.n_azimuth);
    let mut se = if grid.fix_elevation.is_some() {
        0.0
    } else {
        SearchGrid::coarse_step(grid.elevation_range, grid.n_elevation)
    };
    for _ in 0..grid.refine_levels {
        sd /= 3.0;
        sa /= 3.0;
        se /= 3.0;
        let ds = window(best.distance, sd, grid.distance_range);
        let az = window(best.azimuth, sa, grid.azimuth_range);
        let el = window(best.elevation, se, grid.elevation_range);
        let mut pts = Vec::with_capacity(ds.len() * az.len() * el.len());
        for &d in &ds {
            for &a in &az {
                for &e in &el {
                    pts.push(SourcePosition::new(d, a, e));
                }
            }
        }
        if let Some((p, _)) = scan(pts.into_iter(), &mut objective) {
            best = p;
        }
    }
    Ok(best)
}

/// Greedy initialization outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Initialization {
    pub estimates: PositionHypothesisSet,
    /// Some user added nothing beyond the span of those found before it.
    pub degenerate: bool,
}

/// Adds users one at a time, each maximizing the sub-problem against the
/// accumulated projector of those already found.
pub fn initialize_positions(
    batch: &SnapshotBatch,
    frontend: &Frontend,
    layout: &ArrayLayout,
    cfg: &SimulationConfig,
    n_users: usize,
    grid: &SearchGrid,
) -> Result<Initialization> {
    if n_users == 0 {
        return Err(Error::InvalidConfig("at least one user is required".into()));
    }
    let nd = frontend.n_outputs();
    let energy = batch.total_energy();
    let mut accumulated = nalgebra::DMatrix::zeros(nd, nd);
    let mut estimates = PositionHypothesisSet::empty();
    let mut degenerate = false;
    for _ in 0..n_users {
        let mut obj = if estimates.is_empty() {
            SubproblemObjective::new(&estimates, batch, frontend, layout, cfg)?
        } else {
            SubproblemObjective::from_projector(&accumulated, batch, frontend, layout, cfg)?
        };
        let p = grid_maximize(
            |p| match obj.evaluate(p) {
                Ok(v) => v.value,
                Err(_) => f64::NAN,
            },
            grid,
        )?;
        let v = obj.evaluate(&p)?;
        if v.degenerate || v.value <= INIT_COLLAPSE * energy {
            degenerate = true;
        }
        if !v.degenerate {
            let r = obj.residual(&p)?.clone();
            let rr = r.norm_squared();
            accumulated += &r * r.adjoint() / num_complex::Complex64::new(rr, 0.0);
        }
        estimates.push(p);
    }
    Ok(Initialization {
        estimates,
        degenerate,
    })
}

/// Output of [`ap_localize`].
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationResult {
    pub estimates: PositionHypothesisSet,
    /// Hypotheses after initialization (entry 0) and after each outer pass.
    pub per_iteration_track: Vec<PositionHypothesisSet>,
    /// `tr(P[S] R)` for each entry of `per_iteration_track`.
    pub objective_track: Vec<f64>,
    pub iterations_used: usize,
    pub converged: bool,
    pub degenerate: bool,
}

/// Refreshes every hypothesis once against the others. A hypothesis only moves
/// when the grid offers a strictly better sub-problem value, so the full
/// likelihood never decreases. Returns whether any hypothesis moved by more
/// than one final grid step.
pub fn refresh_pass(
    estimates: &mut PositionHypothesisSet,
    batch: &SnapshotBatch,
    frontend: &Frontend,
    layout: &ArrayLayout,
    cfg: &SimulationConfig,
    grid: &SearchGrid,
) -> Result<bool> {
    let mut moved = false;
    for m in 0..estimates.len() {
        let others = estimates.without(m);
        let mut obj = SubproblemObjective::new(&others, batch, frontend, layout, cfg)?;
        let current = estimates.get(m);
        let candidate = grid_maximize(
            |p| match obj.evaluate(p) {
                Ok(v) => v.value,
                Err(_) => f64::NAN,
            },
            grid,
        )?;
        let v_new = obj.evaluate(&candidate)?.value;
        let v_old = obj.evaluate(&current).map(|v| v.value).unwrap_or(f64::NEG_INFINITY);
        if v_new > v_old {
            if !grid.within_final_step(&candidate, &current) {
                moved = true;
            }
            estimates.set(m, candidate);
        }
    }
    Ok(moved)
}

/// Greedy initialization followed by up to `max_iters` alternating-projection
/// passes; stops early once no hypothesis moves more than one final grid step.
pub fn ap_localize(
    batch: &SnapshotBatch,
    frontend: &Frontend,
    layout: &ArrayLayout,
    cfg: &SimulationConfig,
    n_users: usize,
    grid: &SearchGrid,
    max_iters: usize,
) -> Result<LocalizationResult> {
    let init = initialize_positions(batch, frontend, layout, cfg, n_users, grid)?;
    let mut estimates = init.estimates;
    let mut track = vec![estimates.clone()];
    let mut objective_track = vec![focusing_objective(&estimates, frontend, batch, layout, cfg)?];
    let mut converged = false;
    let mut iterations_used = 0;
    for _ in 0..max_iters {
        let moved = refresh_pass(&mut estimates, batch, frontend, layout, cfg, grid)?;
        iterations_used += 1;
        track.push(estimates.clone());
        objective_track.push(focusing_objective(&estimates, frontend, batch, layout, cfg)?);
        if !moved {
            converged = true;
            break;
        }
    }
    Ok(LocalizationResult {
        estimates,
        per_iteration_track: track,
        objective_track,
        iterations_used,
        converged,
        degenerate: init.degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{channel_matrix, simulate_snapshots};
    use crate::frontend::{Frontend, WaveguideModel};
    use crate::geometry::build_layout;
    use crate::likelihood::ap_objective;
    use crate::frontend::{random_weights, Constraint};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_6};

    fn desk_grid(radius: f64) -> SearchGrid {
        SearchGrid::planar((0.05 * radius, 2.0 * radius), 40, (-FRAC_PI_2, FRAC_PI_2), 61, 2)
    }

    #[test]
    fn planted_maximum_is_found() {
        let grid = SearchGrid::planar((1.0, 5.0), 5, (-1.0, 1.0), 5, 0);
        let target = SourcePosition::planar(3.0, 0.5);
        let got = grid_maximize(
            |p| -((p.distance - target.distance).powi(2) + (p.azimuth - target.azimuth).powi(2)),
            &grid,
        )
        .unwrap();
        assert_eq!(got, target);
    }

    #[test]
    fn constant_objective_picks_first_point() {
        let grid = SearchGrid::planar((1.0, 5.0), 5, (-1.0, 1.0), 5, 2);
        let got = grid_maximize(|_| 1.0, &grid).unwrap();
        assert_eq!(got.distance, 1.0);
        assert_eq!(got.azimuth, -1.0);
    }

    #[test]
    fn non_finite_everywhere_is_an_error() {
        let grid = SearchGrid::planar((1.0, 5.0), 3, (-1.0, 1.0), 3, 1);
        assert_eq!(grid_maximize(|_| f64::NAN, &grid).unwrap_err(), Error::NonFiniteObjective);
        // Partially non-finite is fine.
        let got = grid_maximize(|p| if p.distance > 2.0 { f64::NAN } else { p.azimuth }, &grid).unwrap();
        assert_eq!(got.azimuth, 1.0);
    }

    #[test]
    fn refinement_tracks_off_grid_optimum() {
        let grid = SearchGrid::planar((1.0, 5.0), 5, (-1.0, 1.0), 5, 3);
        let (t_d, t_a) = (2.37, 0.12);
        let got = grid_maximize(|p| -((p.distance - t_d).powi(2) + (p.azimuth - t_a).powi(2)), &grid).unwrap();
        let (dd, da, _) = grid.final_steps();
        assert!((got.distance - t_d).abs() <= dd);
        assert!((got.azimuth - t_a).abs() <= da);
    }

    #[test]
    fn invalid_grids_rejected() {
        assert!(SearchGrid::planar((2.0, 1.0), 5, (-1.0, 1.0), 5, 0).validate().is_err());
        assert!(SearchGrid::planar((1.0, 2.0), 1, (-1.0, 1.0), 5, 0).validate().is_err());
        assert!(SearchGrid::planar((0.0, 2.0), 5, (-1.0, 1.0), 5, 0).validate().is_err());
    }

    struct Scene {
        layout: ArrayLayout,
        cfg: SimulationConfig,
        grid: SearchGrid,
        truth: Vec<SourcePosition>,
    }

    fn scene(truth_frac: &[(f64, f64)]) -> Scene {
        let layout = build_layout(4, 8, 0.01, 0.025, 0.005).unwrap();
        let radius = layout.fraunhofer_distance();
        let grid = desk_grid(radius);
        let pts = grid.coarse_points();
        // Snap the requested users to the nearest coarse grid point.
        let truth = truth_frac
            .iter()
            .map(|&(f, a)| {
                let want = SourcePosition::planar(f * radius, a);
                *pts.iter()
                    .min_by(|x, y| {
                        let dx = (x.distance - want.distance).abs() / radius + (x.azimuth - want.azimuth).abs();
                        let dy = (y.distance - want.distance).abs() / radius + (y.azimuth - want.azimuth).abs();
                        dx.total_cmp(&dy)
                    })
                    .unwrap()
            })
            .collect();
        Scene {
            layout,
            cfg: SimulationConfig::new(28e9, 20),
            grid,
            truth,
        }
    }

    #[test]
    fn noiseless_single_user_recovered_digital() {
        let s = scene(&[(0.25, FRAC_PI_6)]);
        let fe = Frontend::fully_digital(s.layout.len());
        let g = channel_matrix(&s.layout, &s.truth, &s.cfg).unwrap();
        let batch = simulate_snapshots(&g, &s.cfg, &fe).unwrap();
        let p = grid_maximize(
            |p| {
                ap_objective(p, &PositionHypothesisSet::empty(), &batch, &fe, &s.layout, &s.cfg)
                    .map(|v| v.value)
                    .unwrap_or(f64::NAN)
            },
            &s.grid,
        )
        .unwrap();
        assert!(s.grid.within_final_step(&p, &s.truth[0]), "{p:?} vs {:?}", s.truth[0]);

        let init = initialize_positions(&batch, &fe, &s.layout, &s.cfg, 1, &s.grid).unwrap();
        assert_eq!(init.estimates.get(0), p);
        assert!(!init.degenerate);
    }

    #[test]
    fn noiseless_two_users_recovered_digital() {
        let s = scene(&[(0.25, FRAC_PI_6), (0.25, FRAC_PI_4)]);
        let fe = Frontend::fully_digital(s.layout.len());
        let g = channel_matrix(&s.layout, &s.truth, &s.cfg).unwrap();
        let batch = simulate_snapshots(&g, &s.cfg, &fe).unwrap();
        let res = ap_localize(&batch, &fe, &s.layout, &s.cfg, 2, &s.grid, 6).unwrap();
        let mut found = res.estimates.as_slice().to_vec();
        found.sort_by(|a, b| a.azimuth.total_cmp(&b.azimuth));
        for (f, t) in found.iter().zip(&s.truth) {
            assert!(s.grid.within_final_step(f, t), "{f:?} vs {t:?}");
        }
        for w in res.objective_track.windows(2) {
            assert!(w[1] >= w[0] * (1.0 - 1e-9), "{:?}", res.objective_track);
        }
    }

    #[test]
    fn noiseless_two_users_recovered_random_dma() {
        // Eight strips give enough RF chains for two coherent users.
        let layout = build_layout(8, 8, 0.01, 0.005, 0.005).unwrap();
        let radius = layout.fraunhofer_distance();
        let grid = desk_grid(radius);
        let pts = grid.coarse_points();
        let truth = vec![pts[4 * 61 + 40], pts[4 * 61 + 45]];
        let cfg = SimulationConfig::new(28e9, 20);
        let wg = WaveguideModel::uniform(&layout, 0.6, 827.67);
        let q = random_weights(&layout, Constraint::Lorentzian, 7);
        let fe = Frontend::new(q, Some(&wg), &layout).unwrap();
        let g = channel_matrix(&layout, &truth, &cfg).unwrap();
        let batch = simulate_snapshots(&g, &cfg, &fe).unwrap();
        let res = ap_localize(&batch, &fe, &layout, &cfg, 2, &grid, 6).unwrap();
        let mut found = res.estimates.as_slice().to_vec();
        found.sort_by(|a, b| a.azimuth.total_cmp(&b.azimuth));
        for (f, t) in found.iter().zip(&truth) {
            assert!(grid.within_final_step(f, t), "{f:?} vs {t:?}");
        }
    }

    #[test]
    fn zero_iterations_equals_initialization() {
        let s = scene(&[(0.25, FRAC_PI_6), (0.4, -0.5)]);
        let fe = Frontend::fully_digital(s.layout.len());
        let g = channel_matrix(&s.layout, &s.truth, &s.cfg).unwrap();
        let batch = simulate_snapshots(&g, &s.cfg, &fe).unwrap();
        let init = initialize_positions(&batch, &fe, &s.layout, &s.cfg, 2, &s.grid).unwrap();
        let res = ap_localize(&batch, &fe, &s.layout, &s.cfg, 2, &s.grid, 0).unwrap();
        assert_eq!(res.estimates, init.estimates);
        assert_eq!(res.iterations_used, 0);
        assert_eq!(res.per_iteration_track.len(), 1);
    }

    #[test]
    fn coincident_users_flag_degeneracy() {
        let s = scene(&[(0.25, FRAC_PI_6)]);
        let fe = Frontend::fully_digital(s.layout.len());
        // Two sources at the same spot: the pilot simply doubles.
        let g = channel_matrix(&s.layout, &s.truth, &s.cfg).unwrap();
        let x = g.column(0) * num_complex::Complex64::new(2.0, 0.0);
        let samples = nalgebra::DMatrix::from_columns(&vec![x; 4]);
        let batch = SnapshotBatch::from_samples(samples);
        let init = initialize_positions(&batch, &fe, &s.layout, &s.cfg, 2, &s.grid).unwrap();
        assert!(init.degenerate);
    }
}
