//! Estimate-to-truth matching and RMSE aggregation.

use crate::error::{Error, Result};
use crate::geometry::SourcePosition;

/// Largest user count matched by exhaustive search over permutations.
pub const MAX_MATCHED_USERS: usize = 8;

fn xy_distance_sq(a: &SourcePosition, b: &SourcePosition) -> f64 {
    let (ax, ay) = a.xy();
    let (bx, by) = b.xy();
    (ax - bx).powi(2) + (ay - by).powi(2)
}

/// Assigns estimates to truths minimizing the total XY distance and returns
/// the squared XY error of each truth, in truth order.
pub fn matched_squared_errors(estimates: &[SourcePosition], truth: &[SourcePosition]) -> Result<Vec<f64>> {
    if estimates.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: estimates.len(),
            context: "estimates vs true users",
        });
    }
    let m = truth.len();
    if m > MAX_MATCHED_USERS {
        return Err(Error::InvalidConfig(format!(
            "matching supports at most {MAX_MATCHED_USERS} users, got {m}"
        )));
    }
    let cost: Vec<Vec<f64>> = truth
        .iter()
        .map(|t| estimates.iter().map(|e| xy_distance_sq(e, t)).collect())
        .collect();
    let mut perm: Vec<usize> = (0..m).collect();
    let mut best = perm.clone();
    let mut best_total = f64::INFINITY;
    let total = |p: &[usize]| -> f64 { p.iter().enumerate().map(|(t, &e)| cost[t][e].sqrt()).sum() };
    // Heap's algorithm; the first permutation wins exact ties.
    let mut c = vec![0usize; m];
    let t0 = total(&perm);
    if t0 < best_total {
        best_total = t0;
        best.clone_from(&perm);
    }
    let mut i = 1;
    while i < m {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            let t = total(&perm);
            if t < best_total {
                best_total = t;
                best.clone_from(&perm);
            }
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(best.iter().enumerate().map(|(t, &e)| cost[t][e]).collect())
}

/// Squared error averaged over users, `e_n^2`.
pub fn mean_squared_error(estimates: &[SourcePosition], truth: &[SourcePosition]) -> Result<f64> {
    let e = matched_squared_errors(estimates, truth)?;
    Ok(e.iter().sum::<f64>() / e.len().max(1) as f64)
}

/// `sqrt(mean e_n^2)` with a delta-method 95% half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmseSummary {
    pub rmse: f64,
    pub ci95: f64,
    pub n_trials: usize,
}

pub fn summarize(squared_errors: &[f64]) -> RmseSummary {
    let n = squared_errors.len();
    if n == 0 {
        return RmseSummary {
            rmse: f64::NAN,
            ci95: f64::NAN,
            n_trials: 0,
        };
    }
    let mean = squared_errors.iter().sum::<f64>() / n as f64;
    let rmse = mean.sqrt();
    let ci95 = if n < 2 || mean == 0.0 {
        0.0
    } else {
        let var = squared_errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se_mean = (var / n as f64).sqrt();
        1.96 * se_mean / (2.0 * rmse)
    };
    RmseSummary { rmse, ci95, n_trials: n }
}
