use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};
use crate::gap::gap_curve;
use crate::par;
use crate::rng::{chunk_count, substream, CHUNK};
use crate::stats::linear_fit;
use crate::types::{GapCurve, LinearFit};

/// Measured and predicted gap curves for a margin field on the unit square.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarGap {
    pub curve: GapCurve,
    /// Tube-area prediction `2 L ε / λ` at every grid point.
    pub predicted: Vec<f64>,
    pub predicted_slope: f64,
}

impl PlanarGap {
    /// Straight-line fit of measured `η` against `ε` over `[eps_min, eps_max]`.
    pub fn measured_fit(&self, eps_min: f64, eps_max: f64) -> Result<LinearFit> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = self
            .curve
            .epsilons
            .iter()
            .zip(&self.curve.etas)
            .filter(|(&e, _)| e >= eps_min && e <= eps_max)
            .map(|(&e, &eta)| (e, eta))
            .unzip();
        linear_fit(&xs, &ys)
    }
}

/// Vertical segments of total length `boundary_length` inside the unit
/// square: `⌈L⌉` equal pieces centred vertically at `x = (j + ½)/⌈L⌉`.
fn segments(boundary_length: f64) -> Vec<(f64, f64, f64)> {
    let count = boundary_length.ceil().max(1.0) as usize;
    let piece = boundary_length / count as f64;
    let (lo, hi) = (0.5 - piece / 2.0, 0.5 + piece / 2.0);
    (0..count).map(|j| ((j as f64 + 0.5) / count as f64, lo, hi)).collect()
}

fn distance_to_segments(segs: &[(f64, f64, f64)], x: f64, y: f64) -> f64 {
    segs.iter()
        .map(|&(sx, lo, hi)| {
            let dx = x - sx;
            let dy = (lo - y).max(y - hi).max(0.0);
            (dx * dx + dy * dy).sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Monte Carlo gap curve for the margin `m(h) = λ · dist(h, boundary)` on
/// uniform samples from the unit square.
///
/// The set `{m < ε}` is a two-sided tube of half-width `ε/λ` around the
/// boundary, so while it stays inside the square its area is `2 L ε / λ`
/// plus end-cap terms of order `ε²`.
pub fn planar_gap_experiment(
    boundary_length: f64,
    lambda: f64,
    epsilon_grid: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<PlanarGap> {
    if !(boundary_length > 0.0 && lambda > 0.0 && n_samples > 0) {
        return Err(Error::BadParameters("boundary length, lambda and sample count must be positive"));
    }
    let segs = segments(boundary_length);
    let chunks: Vec<Vec<f64>> = par::map_indices(chunk_count(n_samples), |c| {
        let mut rng = substream(seed, c as u64);
        let rows = CHUNK.min(n_samples - c * CHUNK);
        (0..rows)
            .map(|_| {
                let x: f64 = rng.random();
                let y: f64 = rng.random();
                lambda * distance_to_segments(&segs, x, y)
            })
            .collect()
    });
    let margins = chunks.concat();
    let curve = gap_curve(&margins, epsilon_grid)?;
    let predicted_slope = 2.0 * boundary_length / lambda;
    let predicted = epsilon_grid.iter().map(|e| predicted_slope * e).collect();
    Ok(PlanarGap { curve, predicted, predicted_slope })
}
