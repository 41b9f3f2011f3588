//! The expressibility-gap curve `η(ε)`: the fraction of hidden states whose
//! Voronoi margin is strictly below `ε`, and its power-law fit.

use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::stats::{linear_fit, percentile_profile, spearman, PercentileProfile};
use crate::types::{GapCurve, LogLogFit, MarginSample};

pub const DEFAULT_GRID_MIN: f64 = 1e-3;
pub const DEFAULT_GRID_MAX: f64 = 10.0;
pub const DEFAULT_GRID_POINTS: usize = 50;
pub const DEFAULT_FIT_MIN: f64 = 0.01;
pub const DEFAULT_FIT_MAX: f64 = 0.3;

/// `points` log-spaced values from `min` to `max` inclusive.
pub fn log_grid(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    if !(min > 0.0 && max > min && points >= 2) {
        return Err(Error::BadParameters("log grid needs 0 < min < max and at least 2 points"));
    }
    let (a, b) = (min.log10(), max.log10());
    let step = (b - a) / (points - 1) as f64;
    let mut grid: Vec<f64> = (0..points).map(|i| 10f64.powf(a + step * i as f64)).collect();
    grid[0] = min;
    grid[points - 1] = max;
    Ok(grid)
}

/// `points` evenly spaced values from `min` to `max` inclusive.
pub fn linear_grid(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    if !(max > min && points >= 2) {
        return Err(Error::BadParameters("linear grid needs min < max and at least 2 points"));
    }
    let step = (max - min) / (points - 1) as f64;
    Ok((0..points).map(|i| if i + 1 == points { max } else { min + step * i as f64 }).collect())
}

pub fn default_epsilon_grid() -> Vec<f64> {
    log_grid(DEFAULT_GRID_MIN, DEFAULT_GRID_MAX, DEFAULT_GRID_POINTS).expect("valid defaults")
}

/// Empirical `η̂(ε) = |{i : mᵢ < ε}| / n` on the grid.
pub fn gap_curve(margins: &[f64], epsilon_grid: &[f64]) -> Result<GapCurve> {
    if margins.is_empty() || epsilon_grid.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(col) = margins.iter().position(|m| !(m.is_finite() && *m >= 0.0)) {
        return Err(Error::NonFiniteEntry { row: 0, col });
    }
    if epsilon_grid.iter().any(|e| !(e.is_finite() && *e >= 0.0)) || epsilon_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::BadParameters("epsilon grid must be nonnegative and strictly increasing"));
    }
    let mut sorted = margins.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let etas = epsilon_grid.iter().map(|&e| sorted.partition_point(|&m| m < e) as f64 / n).collect();
    Ok(GapCurve { epsilons: epsilon_grid.to_vec(), etas, fit: None })
}

/// Least squares of `log10 η` on `log10 ε` over grid points in
/// `[eps_min, eps_max]` with `η > 0`.
pub fn fit_loglog(curve: &GapCurve, eps_min: f64, eps_max: f64) -> Result<GapCurve> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = curve
        .epsilons
        .iter()
        .zip(&curve.etas)
        .filter(|(&e, &eta)| e > 0.0 && e >= eps_min && e <= eps_max && eta > 0.0)
        .map(|(e, eta)| (e.log10(), eta.log10()))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::InsufficientPositivePoints { found: xs.len() });
    }
    let f = linear_fit(&xs, &ys)?;
    let mut out = curve.clone();
    out.fit = Some(LogLogFit {
        beta: f.slope,
        alpha: f.intercept,
        r_squared: f.r_squared,
        eps_min,
        eps_max,
        points: f.points,
    });
    Ok(out)
}

/// Per-model gap statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct GapSummary {
    pub curve: GapCurve,
    pub fit: LogLogFit,
    /// Spearman correlation between margin and entropy.
    pub spearman: f64,
    pub percentiles: PercentileProfile,
    /// Fraction of margins below 0.5.
    pub frac_below_half: f64,
}

pub fn summarize_gap(samples: &[MarginSample], epsilon_grid: &[f64], fit_min: f64, fit_max: f64) -> Result<GapSummary> {
    let margins: Vec<f64> = samples.iter().map(|s| s.margin).collect();
    let entropies: Vec<f64> = samples.iter().map(|s| s.entropy).collect();
    let curve = fit_loglog(&gap_curve(&margins, epsilon_grid)?, fit_min, fit_max)?;
    let fit = curve.fit.expect("populated by fit_loglog");
    let below = gap_curve(&margins, &[0.5])?.etas[0];
    Ok(GapSummary {
        fit,
        spearman: spearman(&margins, &entropies)?,
        percentiles: percentile_profile(&margins)?,
        frac_below_half: below,
        curve,
    })
}
