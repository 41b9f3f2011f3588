use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{distance, dot, norm};

const UNIT_TOLERANCE: f64 = 1e-9;

/// Two unit vectors in `R³` separated by `angle`.
pub fn sphere_pair(angle: f64) -> (Vec<f64>, Vec<f64>) {
    (vec![1.0, 0.0, 0.0], vec![angle.cos(), angle.sin(), 0.0])
}

/// Largest distance between the chord `(1−λ)h0 + λh1` and the great-circle
/// arc at the same parameter, over `lambda_grid`.
///
/// For an angle `θ` the worst case is the midpoint, `1 − cos(θ/2)`, which is
/// second order in `θ`.
pub fn sphere_interp_error(h0: &[f64], h1: &[f64], lambda_grid: &[f64]) -> Result<f64> {
    if h0.len() != h1.len() {
        return Err(Error::LengthMismatch { left: h0.len(), right: h1.len() });
    }
    if lambda_grid.is_empty() {
        return Err(Error::EmptyInput);
    }
    if (norm(h0) - 1.0).abs() > UNIT_TOLERANCE || (norm(h1) - 1.0).abs() > UNIT_TOLERANCE {
        return Err(Error::BadParameters("endpoints must be unit vectors"));
    }
    let cos = dot(h0, h1).clamp(-1.0, 1.0);
    if cos <= -1.0 + 1e-12 {
        return Err(Error::AntipodalPoints);
    }
    // Angle from the chord length keeps small separations accurate.
    let theta = 2.0 * (0.5 * distance(h0, h1)).min(1.0).asin();
    let sin = theta.sin();
    let mut worst: f64 = 0.0;
    for &l in lambda_grid {
        let (a, b) = if theta == 0.0 {
            (1.0 - l, l)
        } else {
            (((1.0 - l) * theta).sin() / sin, (l * theta).sin() / sin)
        };
        let dev: f64 = h0
            .iter()
            .zip(h1)
            .map(|(x, y)| {
                let chord = (1.0 - l) * x + l * y;
                let arc = a * x + b * y;
                (chord - arc) * (chord - arc)
            })
            .sum::<f64>()
            .sqrt();
        worst = worst.max(dev);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<f64> {
        (0..=100).map(|i| i as f64 / 100.0).collect()
    }

    #[test]
    fn identical_points() {
        let (a, _) = sphere_pair(0.0);
        assert_eq!(sphere_interp_error(&a, &a, &grid()).unwrap(), 0.0);
    }

    #[test]
    fn midpoint_deviation() {
        let (a, b) = sphere_pair(0.2);
        let e = sphere_interp_error(&a, &b, &grid()).unwrap();
        assert!((e - (1.0 - 0.1f64.cos())).abs() < 1e-12);
        assert!((e - 0.0049958).abs() < 1e-7);
    }

    #[test]
    fn rejects_antipodes_and_non_unit() {
        let (a, _) = sphere_pair(0.0);
        let b: Vec<f64> = a.iter().map(|x| -x).collect();
        assert_eq!(sphere_interp_error(&a, &b, &grid()), Err(Error::AntipodalPoints));
        assert!(sphere_interp_error(&a, &[2.0, 0.0, 0.0], &grid()).is_err());
    }
}
