//! Fisher information of the softmax head and related divergences.
//!
//! For `p = softmax(W h + b)` the Fisher metric on hidden states is the
//! pull-back of the categorical covariance, `G = Wᵀ (diag p − p pᵀ) W`. It is
//! evaluated here as `Σ_t p_t (w_t − w̄)(w_t − w̄)ᵀ` with `w̄ = Wᵀp`, which is
//! the same matrix without forming the `N × N` covariance.

use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, Matrix};
use crate::margin::logits;
use crate::types::{FisherMatrix, UnembeddingHead};

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(col) = logits.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteEntry { row: 0, col });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= z);
    Ok(p)
}

/// `ln softmax(logits)`, computed without forming the probabilities.
pub fn log_softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(col) = logits.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteEntry { row: 0, col });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    Ok(logits.iter().map(|x| x - lse).collect())
}

/// Indices of the `top_k` largest logits, ties toward the lower index.
fn top_indices(logits: &[f64], top_k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..logits.len()).collect();
    order.sort_by(|&a, &b| logits[b].total_cmp(&logits[a]).then(a.cmp(&b)));
    order.truncate(top_k);
    order.sort_unstable();
    order
}

/// Fisher metric at `h`.
///
/// With `top_k`, only the `top_k` most likely tokens are kept and their
/// probabilities renormalized, so the result is still the Fisher matrix of a
/// categorical distribution.
pub fn fisher_matrix(head: &UnembeddingHead, h: &[f64], top_k: Option<usize>) -> Result<FisherMatrix> {
    let z = logits(head, h)?;
    if let Some(col) = h.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteEntry { row: 0, col });
    }
    let tokens: Vec<usize> = match top_k {
        Some(k) if k < 2 || k > head.vocab_size() => {
            return Err(Error::BadParameters("top_k must lie in [2, vocab_size]"));
        }
        Some(k) => top_indices(&z, k),
        None => (0..head.vocab_size()).collect(),
    };
    let kept: Vec<f64> = tokens.iter().map(|&t| z[t]).collect();
    let p = softmax(&kept)?;

    let d = head.d();
    let w = head.weights();
    let mut mean = vec![0.0; d];
    for (&t, &pt) in tokens.iter().zip(&p) {
        mean.iter_mut().zip(w.row(t)).for_each(|(m, x)| *m += pt * x);
    }
    let mut g = Matrix::zeros(d, d);
    let mut diff = vec![0.0; d];
    for (&t, &pt) in tokens.iter().zip(&p) {
        if pt == 0.0 {
            continue;
        }
        diff.iter_mut().zip(w.row(t)).zip(&mean).for_each(|((c, x), m)| *c = x - m);
        for a in 0..d {
            let s = pt * diff[a];
            if s == 0.0 {
                continue;
            }
            let row = g.row_mut(a);
            for b in a..d {
                row[b] += s * diff[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            g[(a, b)] = g[(b, a)];
        }
    }
    Ok(FisherMatrix { g, at_point: h.to_vec() })
}

impl FisherMatrix {
    pub fn dim(&self) -> usize {
        self.g.rows()
    }

    /// `vᵀ G v`.
    pub fn quadratic_form(&self, v: &[f64]) -> Result<f64> {
        let gv = self.g.matvec(v)?;
        Ok(gv.iter().zip(v).map(|(a, b)| a * b).sum())
    }

    /// Eigenvalues, descending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        symmetric_eigen(&self.g).expect("square").values
    }
}

/// Eigenvalue count above `rel_tol · λ_max`.
pub fn numerical_rank(eigenvalues: &[f64], rel_tol: f64) -> usize {
    let max = eigenvalues.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return 0;
    }
    eigenvalues.iter().filter(|&&v| v > rel_tol * max).count()
}

/// Metric restricted to the span of the columns of `basis`: `Jᵀ G J`.
pub fn restricted_metric(g: &FisherMatrix, basis: &Matrix) -> Result<Matrix> {
    if basis.rows() != g.dim() {
        return Err(Error::DimensionMismatch { expected: g.dim(), found: basis.rows() });
    }
    if basis.cols() == 0 {
        return Err(Error::RankDeficientBasis);
    }
    let bt = basis.transpose();
    let gram = bt.matmul(basis)?;
    let ev = symmetric_eigen(&gram)?.values;
    let max = ev[0];
    if !(max > 0.0) || *ev.last().unwrap() <= 1e-12 * max {
        return Err(Error::RankDeficientBasis);
    }
    let mut out = bt.matmul(&g.g)?.matmul(basis)?;
    let k = out.rows();
    for a in 0..k {
        for b in 0..a {
            let v = 0.5 * (out[(a, b)] + out[(b, a)]);
            out[(a, b)] = v;
            out[(b, a)] = v;
        }
    }
    Ok(out)
}

fn check_distribution(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(col) = p.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::NonFiniteEntry { row: 0, col });
    }
    Ok(())
}

/// `KL(p0 ‖ p1) = Σ p0 ln(p0/p1)` with `0 ln 0 = 0`.
pub fn kl_divergence(p0: &[f64], p1: &[f64]) -> Result<f64> {
    if p0.len() != p1.len() {
        return Err(Error::LengthMismatch { left: p0.len(), right: p1.len() });
    }
    check_distribution(p0)?;
    check_distribution(p1)?;
    let mut kl = 0.0;
    for (index, (&a, &b)) in p0.iter().zip(p1).enumerate() {
        if a == 0.0 {
            continue;
        }
        if b <= 0.0 {
            return Err(Error::SupportMismatch { index });
        }
        kl += a * (a / b).ln();
    }
    Ok(kl.max(0.0))
}

/// KL divergence between the token distributions at `h` and `h + δ`, next
/// to its quadratic approximation `½ δᵀ G(h) δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlExpansion {
    pub kl: f64,
    pub quad: f64,
    /// `kl / quad`; tends to 1 as `‖δ‖ → 0`.
    pub ratio: f64,
}

pub fn kl_quadratic_residual(head: &UnembeddingHead, h: &[f64], delta: &[f64]) -> Result<KlExpansion> {
    if delta.len() != h.len() {
        return Err(Error::LengthMismatch { left: h.len(), right: delta.len() });
    }
    if let Some(col) = delta.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteEntry { row: 0, col });
    }
    let moved: Vec<f64> = h.iter().zip(delta).map(|(a, b)| a + b).collect();
    let log0 = log_softmax(&logits(head, h)?)?;
    let log1 = log_softmax(&logits(head, &moved)?)?;
    let kl: f64 = log0.iter().zip(&log1).map(|(a, b)| a.exp() * (a - b)).sum::<f64>().max(0.0);
    let quad = 0.5 * fisher_matrix(head, h, None)?.quadratic_form(delta)?;
    if !(quad > 0.0) {
        return Err(Error::DegenerateDirection);
    }
    Ok(KlExpansion { kl, quad, ratio: kl / quad })
}

/// Bhattacharyya coefficient and the Fisher–Rao lower bound `2 arccos(BC)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherRaoBound {
    pub bc: f64,
    pub bound: f64,
}

pub fn fisher_rao_lower_bound(p0: &[f64], p1: &[f64]) -> Result<FisherRaoBound> {
    if p0.len() != p1.len() {
        return Err(Error::LengthMismatch { left: p0.len(), right: p1.len() });
    }
    check_distribution(p0)?;
    check_distribution(p1)?;
    let bc = p0.iter().zip(p1).map(|(a, b)| (a * b).sqrt()).sum::<f64>().clamp(0.0, 1.0);
    Ok(FisherRaoBound { bc, bound: 2.0 * bc.acos() })
}
