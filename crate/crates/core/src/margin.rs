//! Logits, Voronoi margins and token assignment.

use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::par;
use crate::types::{MarginSample, PointCloud, UnembeddingHead};

/// `W h + b`.
pub fn logits(head: &UnembeddingHead, h: &[f64]) -> Result<Vec<f64>> {
    if h.len() != head.d() {
        return Err(Error::DimensionMismatch { expected: head.d(), found: h.len() });
    }
    let w = head.weights();
    let mut z: Vec<f64> = (0..head.vocab_size()).map(|t| dot(w.row(t), h)).collect();
    if let Some(b) = head.bias() {
        z.iter_mut().zip(b).for_each(|(x, bt)| *x += bt);
    }
    Ok(z)
}

/// Index of the largest value, ties toward the lower index.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if best.map_or(true, |b| *v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Shannon entropy (nats) of `softmax(logits)`.
pub fn entropy(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = logits.iter().map(|x| x - max).collect();
    let z: f64 = shifted.iter().map(|s| s.exp()).sum();
    let log_z = z.ln();
    // H = ln Z − Σ p s, with s the shifted logits.
    let mean: f64 = shifted.iter().map(|s| s.exp() / z * s).sum();
    let upper = (logits.len() as f64).ln();
    (log_z - mean).clamp(0.0, upper)
}

/// Gap between the two largest logits, with the tokens that realize it.
pub fn margin_sample(logits: &[f64]) -> Result<MarginSample> {
    if logits.len() < 2 {
        return Err(Error::TooFewPoints { min: 2, found: logits.len() });
    }
    if let Some(col) = logits.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteEntry { row: 0, col });
    }
    let mut top = 0;
    let mut second: Option<usize> = None;
    for i in 1..logits.len() {
        if logits[i] > logits[top] {
            second = Some(top);
            top = i;
        } else if second.map_or(true, |s| logits[i] > logits[s]) {
            second = Some(i);
        }
    }
    let runner_up = second.expect("at least two logits");
    Ok(MarginSample {
        margin: logits[top] - logits[runner_up],
        top_token: top,
        runner_up_token: runner_up,
        entropy: entropy(logits),
    })
}

/// Margin sample at every point of a cloud.
pub fn margin_samples(head: &UnembeddingHead, cloud: &PointCloud) -> Result<Vec<MarginSample>> {
    if cloud.d() != head.d() {
        return Err(Error::DimensionMismatch { expected: head.d(), found: cloud.d() });
    }
    par::try_map_indices(cloud.n(), |i| margin_sample(&logits(head, cloud.point(i))?))
}

/// Token whose Voronoi region contains each point (arg-max logit).
pub fn voronoi_assign(head: &UnembeddingHead, cloud: &PointCloud) -> Result<Vec<usize>> {
    if cloud.d() != head.d() {
        return Err(Error::DimensionMismatch { expected: head.d(), found: cloud.d() });
    }
    par::try_map_indices(cloud.n(), |i| Ok(argmax(&logits(head, cloud.point(i))?).expect("vocab_size >= 2")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use alloc::vec;

    #[test]
    fn identity_head_logits() {
        let head = UnembeddingHead::new(Matrix::identity(3), None).unwrap();
        assert_eq!(logits(&head, &[1.0, 0.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(logits(&head, &[1.0, 0.0]), Err(Error::DimensionMismatch { expected: 3, found: 2 }));
        let biased = UnembeddingHead::new(Matrix::identity(3), Some(vec![0.5, -1.0, 2.0])).unwrap();
        assert_eq!(logits(&biased, &[1.0, 0.0, 0.0]).unwrap(), vec![1.5, -1.0, 2.0]);
    }

    #[test]
    fn margin_examples() {
        let s = margin_sample(&[3.0, 1.0, 0.5]).unwrap();
        assert_eq!((s.margin, s.top_token, s.runner_up_token), (2.0, 0, 1));
        let t = margin_sample(&[1.0, 1.0]).unwrap();
        assert_eq!((t.margin, t.top_token, t.runner_up_token), (0.0, 0, 1));
        assert!((t.entropy - core::f64::consts::LN_2).abs() < 1e-15);
        let u = margin_sample(&[0.0, 2.0, 2.0, 1.0]).unwrap();
        assert_eq!((u.top_token, u.runner_up_token), (1, 2));
        assert!(margin_sample(&[1.0]).is_err());
    }

    #[test]
    fn runner_up_after_late_top() {
        let s = margin_sample(&[1.0, 0.5, 4.0, 2.0]).unwrap();
        assert_eq!((s.top_token, s.runner_up_token, s.margin), (2, 3, 2.0));
    }

    #[test]
    fn entropy_bounds() {
        assert!((entropy(&[0.0; 8]) - 8f64.ln()).abs() < 1e-14);
        assert!(entropy(&[800.0, 0.0]) < 1e-300);
    }
}
