//! Codebooks on sampled manifolds: the ball-packing distortion bound, Lloyd
//! iteration and greedy single-codeword expansion.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{squared_distance, Matrix};
use crate::par;
use crate::rng::substream;
use crate::types::{Codebook, PointCloud, QuantizerMetric};

pub const DEFAULT_LLOYD_ITERATIONS: usize = 300;
const RELATIVE_TOLERANCE: f64 = 1e-6;

/// Volume of the unit ball in `R^k`.
pub fn ball_volume(k: usize) -> f64 {
    let k = k as f64;
    PI.powf(k / 2.0) / libm::tgamma(k / 2.0 + 1.0)
}

/// `c_k = k/(k+2) · ω_k^{−2/k}`: mean squared distance to the center of a
/// unit-volume ball in `R^k`.
pub fn ball_constant(k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::BadParameters("k must be at least 1"));
    }
    let kf = k as f64;
    Ok(kf / (kf + 2.0) * ball_volume(k).powf(-2.0 / kf))
}

/// Lower bound `c_k · ν_min · (volume / N)^{2/k}` on the mean squared
/// quantization error of any `N`-word codebook.
pub fn distortion_lower_bound(k: usize, volume: f64, codewords: usize, nu_min: f64) -> Result<f64> {
    if !(volume > 0.0 && nu_min > 0.0 && codewords > 0) {
        return Err(Error::BadParameters("volume, codebook size and density floor must be positive"));
    }
    Ok(ball_constant(k)? * nu_min * (volume / codewords as f64).powf(2.0 / k as f64))
}

fn metric_distance2(metric: QuantizerMetric, a: &[f64], b: &[f64]) -> f64 {
    let chord2 = squared_distance(a, b);
    match metric {
        QuantizerMetric::Euclidean => chord2,
        QuantizerMetric::Arc => {
            let arc = 2.0 * (0.5 * chord2.sqrt()).min(1.0).asin();
            arc * arc
        }
    }
}

/// Nearest codeword (ties toward the lower index) and squared distance.
fn nearest(metric: QuantizerMetric, codewords: &Matrix, x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..codewords.rows() {
        let d = squared_distance(codewords.row(c), x);
        if d < best.1 {
            best = (c, d);
        }
    }
    // Arc distance is monotone in chord distance on the sphere.
    (best.0, metric_distance2(metric, codewords.row(best.0), x))
}

fn assign(cloud: &PointCloud, codewords: &Matrix, metric: QuantizerMetric) -> (Vec<usize>, Vec<f64>) {
    par::map_indices(cloud.n(), |i| nearest(metric, codewords, cloud.point(i))).into_iter().unzip()
}

/// Nearest codeword by chord distance, its squared distance, and the
/// distance to the runner-up.
fn nearest_two(codewords: &Matrix, x: &[f64]) -> (usize, f64, f64) {
    let (mut best, mut first, mut second) = (0, f64::INFINITY, f64::INFINITY);
    for c in 0..codewords.rows() {
        let d = squared_distance(codewords.row(c), x);
        if d < first {
            second = first;
            first = d;
            best = c;
        } else if d < second {
            second = d;
        }
    }
    (best, first, second.sqrt())
}

/// Assignment state carried between Lloyd iterations: for every sample a
/// lower bound on the chord distance to any codeword other than its own.
struct Assignment {
    index: Vec<usize>,
    d2: Vec<f64>,
    lower: Vec<f64>,
}

impl Assignment {
    fn full(cloud: &PointCloud, codewords: &Matrix, metric: QuantizerMetric) -> Self {
        let rows = par::map_indices(cloud.n(), |i| nearest_two(codewords, cloud.point(i)));
        Self::collect(rows, cloud, codewords, metric)
    }

    fn collect(rows: Vec<(usize, f64, f64)>, cloud: &PointCloud, codewords: &Matrix, metric: QuantizerMetric) -> Self {
        let mut out = Self { index: Vec::with_capacity(rows.len()), d2: Vec::new(), lower: Vec::new() };
        for (i, (c, chord2, lower)) in rows.into_iter().enumerate() {
            out.index.push(c);
            out.d2.push(match metric {
                QuantizerMetric::Euclidean => chord2,
                QuantizerMetric::Arc => metric_distance2(metric, codewords.row(c), cloud.point(i)),
            });
            out.lower.push(lower);
        }
        out
    }

    /// Reassigns after the codewords moved from `old` to `new`.
    ///
    /// A sample keeps its codeword without a scan when its exact distance
    /// to it is strictly below the decayed lower bound, so the result is the
    /// same as a full scan, ties included.
    fn update(&self, cloud: &PointCloud, old: &Matrix, new: &Matrix, metric: QuantizerMetric) -> Self {
        let shifts: Vec<f64> = (0..new.rows()).map(|c| squared_distance(old.row(c), new.row(c)).sqrt()).collect();
        let mut top = (0, 0.0);
        let mut runner = 0.0;
        for (c, &s) in shifts.iter().enumerate() {
            if s > top.1 {
                runner = top.1;
                top = (c, s);
            } else if s > runner {
                runner = s;
            }
        }
        let rows = par::map_indices(cloud.n(), |i| {
            let own = self.index[i];
            let others = if own == top.0 { runner } else { top.1 };
            let lower = self.lower[i] - others;
            let x = cloud.point(i);
            let chord2 = squared_distance(new.row(own), x);
            if chord2.sqrt() < lower * (1.0 - 1e-12) {
                (own, chord2, lower)
            } else {
                nearest_two(new, x)
            }
        });
        Self::collect(rows, cloud, new, metric)
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Assigns every sample to its nearest codeword.
pub fn assign_codebook(cloud: &PointCloud, codewords: Matrix, metric: QuantizerMetric) -> Result<Codebook> {
    if codewords.rows() == 0 {
        return Err(Error::EmptyInput);
    }
    if codewords.cols() != cloud.d() {
        return Err(Error::DimensionMismatch { expected: cloud.d(), found: codewords.cols() });
    }
    let (assignment, d2) = assign(cloud, &codewords, metric);
    Ok(Codebook { codewords, assignment, distortion: mean(&d2), metric })
}

impl Codebook {
    /// Squared distance of every sample to its assigned codeword.
    pub fn sample_distances(&self, cloud: &PointCloud) -> Vec<f64> {
        par::map_indices(cloud.n(), |i| {
            metric_distance2(self.metric, self.codewords.row(self.assignment[i]), cloud.point(i))
        })
    }

    pub fn len(&self) -> usize {
        self.codewords.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.rows() == 0
    }
}

/// Result of a Lloyd run.
#[derive(Debug, Clone, PartialEq)]
pub struct LloydRun {
    pub codebook: Codebook,
    /// Distortion after every assignment step, starting with the seeding.
    pub history: Vec<f64>,
    pub converged: bool,
}

fn farthest_point_seeding(cloud: &PointCloud, m: usize, seed: u64) -> Matrix {
    let n = cloud.n();
    let mut rng = substream(seed, 0);
    let first = rng.random_range(0..n);
    let mut chosen = vec![first];
    let mut gap: Vec<f64> = (0..n).map(|i| squared_distance(cloud.point(i), cloud.point(first))).collect();
    while chosen.len() < m {
        let next = argmax_lowest(&gap);
        chosen.push(next);
        let p = cloud.point(next);
        let updated = par::map_indices(n, |i| gap[i].min(squared_distance(cloud.point(i), p)));
        gap = updated;
    }
    let mut codewords = Matrix::zeros(m, cloud.d());
    for (c, &i) in chosen.iter().enumerate() {
        codewords.row_mut(c).copy_from_slice(cloud.point(i));
    }
    codewords
}

fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Euclidean k-means with farthest-point seeding.
pub fn lloyd_quantize(cloud: &PointCloud, m: usize, max_iterations: usize, seed: u64) -> Result<LloydRun> {
    lloyd_quantize_with(cloud, m, max_iterations, seed, QuantizerMetric::Euclidean)
}

/// Lloyd iteration under `metric`.
///
/// Stops when the relative distortion change drops below 1e-6 or after
/// `max_iterations` centroid updates. An emptied cell is moved onto the
/// sample currently farthest from its codeword. With the arc metric the
/// centroid is projected back onto the sphere, and an update that would
/// raise the distortion is rolled back and ends the run.
pub fn lloyd_quantize_with(
    cloud: &PointCloud,
    m: usize,
    max_iterations: usize,
    seed: u64,
    metric: QuantizerMetric,
) -> Result<LloydRun> {
    let n = cloud.n();
    if m == 0 || m > n {
        return Err(Error::TooFewSamples { needed: m.max(1), found: n });
    }
    let d = cloud.d();
    let mut codewords = farthest_point_seeding(cloud, m, seed);
    let mut state = Assignment::full(cloud, &codewords, metric);
    let mut distortion = mean(&state.d2);
    let mut history = vec![distortion];
    let mut converged = false;

    for _ in 0..max_iterations {
        let mut sums = Matrix::zeros(m, d);
        let mut counts = vec![0usize; m];
        for i in 0..n {
            let c = state.index[i];
            counts[c] += 1;
            sums.row_mut(c).iter_mut().zip(cloud.point(i)).for_each(|(s, x)| *s += x);
        }
        let mut next = codewords.clone();
        let mut reach = state.d2.clone();
        for c in 0..m {
            if counts[c] == 0 {
                let far = argmax_lowest(&reach);
                next.row_mut(c).copy_from_slice(cloud.point(far));
                reach[far] = 0.0;
                continue;
            }
            let inv = 1.0 / counts[c] as f64;
            let row = next.row_mut(c);
            row.iter_mut().zip(sums.row(c)).for_each(|(r, s)| *r = s * inv);
            if metric == QuantizerMetric::Arc {
                let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    row.iter_mut().for_each(|x| *x /= norm);
                } else {
                    row.copy_from_slice(codewords.row(c));
                }
            }
        }
        let next_state = state.update(cloud, &codewords, &next, metric);
        let next_distortion = mean(&next_state.d2);
        if next_distortion > distortion {
            converged = true;
            break;
        }
        let change = if distortion > 0.0 { (distortion - next_distortion) / distortion } else { 0.0 };
        codewords = next;
        state = next_state;
        distortion = next_distortion;
        history.push(distortion);
        if change < RELATIVE_TOLERANCE {
            converged = true;
            break;
        }
    }
    Ok(LloydRun {
        codebook: Codebook { codewords, assignment: state.index, distortion, metric },
        history,
        converged,
    })
}

/// One greedy expansion step.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyStep {
    pub codebook: Codebook,
    /// Sample index that became the new codeword.
    pub candidate: usize,
    /// Drop in mean distortion.
    pub reduction: f64,
}

/// Adds the candidate sample that removes the most distortion from the
/// samples it would claim.
///
/// Candidates are `candidate_pool_size` distinct samples drawn with `seed`.
/// Fails with [`Error::NoImprovingCandidate`] when no candidate claims any
/// sample; the input codebook is left as it was.
pub fn greedy_expand(codebook: &Codebook, cloud: &PointCloud, candidate_pool_size: usize, seed: u64) -> Result<GreedyStep> {
    if candidate_pool_size == 0 {
        return Err(Error::BadParameters("candidate pool must be nonempty"));
    }
    if codebook.assignment.len() != cloud.n() || codebook.codewords.cols() != cloud.d() {
        return Err(Error::DimensionMismatch { expected: cloud.n(), found: codebook.assignment.len() });
    }
    let n = cloud.n();
    let metric = codebook.metric;
    let current = codebook.sample_distances(cloud);

    let pool = candidate_pool_size.min(n);
    let mut rng = substream(seed, 0);
    let mut order: Vec<usize> = (0..n).collect();
    for i in 0..pool {
        let j = rng.random_range(i..n);
        order.swap(i, j);
    }
    let candidates = &order[..pool];

    let gains = par::map_indices(pool, |c| {
        let x = cloud.point(candidates[c]);
        let mut gain = 0.0;
        for i in 0..n {
            let dn = metric_distance2(metric, x, cloud.point(i));
            if dn < current[i] {
                gain += current[i] - dn;
            }
        }
        gain
    });
    let best = argmax_lowest(&gains);
    if !(gains[best] > 0.0) {
        return Err(Error::NoImprovingCandidate);
    }
    let chosen = candidates[best];
    let x = cloud.point(chosen);
    let new_index = codebook.len();

    let mut codewords = Matrix::zeros(new_index + 1, cloud.d());
    for c in 0..new_index {
        codewords.row_mut(c).copy_from_slice(codebook.codewords.row(c));
    }
    codewords.row_mut(new_index).copy_from_slice(x);
    let mut assignment = codebook.assignment.clone();
    let mut d2 = current;
    for i in 0..n {
        let dn = metric_distance2(metric, x, cloud.point(i));
        if dn < d2[i] {
            d2[i] = dn;
            assignment[i] = new_index;
        }
    }
    let distortion = mean(&d2);
    Ok(GreedyStep {
        reduction: codebook.distortion - distortion,
        codebook: Codebook { codewords, assignment, distortion, metric },
        candidate: chosen,
    })
}
