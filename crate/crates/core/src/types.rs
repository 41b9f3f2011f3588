//! Shared domain types. Constructors validate every invariant; the stored
//! fields are read-only afterwards.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Hidden-state vectors of one layer, one row per token position.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Matrix,
    layer_index: usize,
    source_id: String,
}

impl PointCloud {
    pub fn new(points: Matrix, layer_index: usize, source_id: impl Into<String>) -> Result<Self> {
        let cloud = Self { points, layer_index, source_id: source_id.into() };
        cloud.validate()?;
        Ok(cloud)
    }

    /// Unlabelled cloud at layer 0.
    pub fn from_matrix(points: Matrix) -> Result<Self> {
        Self::new(points, 0, String::new())
    }

    /// Re-checks every invariant.
    pub fn validate(&self) -> Result<()> {
        if self.points.rows() < 2 {
            return Err(Error::TooFewPoints { min: 2, found: self.points.rows() });
        }
        if self.points.cols() < 1 {
            return Err(Error::EmptyDimension);
        }
        if let Some((row, col)) = self.points.first_non_finite() {
            return Err(Error::NonFiniteEntry { row, col });
        }
        Ok(())
    }

    pub fn points(&self) -> &Matrix {
        &self.points
    }

    pub fn n(&self) -> usize {
        self.points.rows()
    }

    pub fn d(&self) -> usize {
        self.points.cols()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.points.row(i)
    }

    pub fn layer_index(&self) -> usize {
        self.layer_index
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn with_layer(mut self, layer_index: usize) -> Self {
        self.layer_index = layer_index;
        self
    }

    pub fn into_points(self) -> Matrix {
        self.points
    }
}

/// The logit map `h -> W h + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnembeddingHead {
    weights: Matrix,
    bias: Option<Vec<f64>>,
}

impl UnembeddingHead {
    pub fn new(weights: Matrix, bias: Option<Vec<f64>>) -> Result<Self> {
        if weights.rows() < 2 {
            return Err(Error::TooFewPoints { min: 2, found: weights.rows() });
        }
        if weights.cols() < 1 {
            return Err(Error::EmptyDimension);
        }
        if let Some((row, col)) = weights.first_non_finite() {
            return Err(Error::NonFiniteEntry { row, col });
        }
        if let Some(b) = &bias {
            if b.len() != weights.rows() {
                return Err(Error::LengthMismatch { left: weights.rows(), right: b.len() });
            }
            if let Some(row) = b.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFiniteEntry { row, col: weights.cols() });
            }
        }
        Ok(Self { weights, bias })
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn bias(&self) -> Option<&[f64]> {
        self.bias.as_deref()
    }

    pub fn vocab_size(&self) -> usize {
        self.weights.rows()
    }

    pub fn d(&self) -> usize {
        self.weights.cols()
    }
}

/// Exact k-nearest neighbors of every point, nearest first.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborTable {
    k: usize,
    indices: Vec<usize>,
    distances: Vec<f64>,
}

impl NeighborTable {
    /// Assembles a table from flattened `n × k` arrays, checking that rows are
    /// sorted, self-free and index into a cloud of `source_n` points.
    pub fn from_parts(source_n: usize, k: usize, indices: Vec<usize>, distances: Vec<f64>) -> Result<Self> {
        if k == 0 || k >= source_n {
            return Err(Error::KTooLarge { k, n: source_n });
        }
        if indices.len() != source_n * k {
            return Err(Error::ShapeMismatch { expected: source_n * k, found: indices.len() });
        }
        if distances.len() != source_n * k {
            return Err(Error::ShapeMismatch { expected: source_n * k, found: distances.len() });
        }
        for i in 0..source_n {
            let idx = &indices[i * k..(i + 1) * k];
            let dist = &distances[i * k..(i + 1) * k];
            if idx.iter().any(|&j| j == i || j >= source_n) {
                return Err(Error::BadParameters("neighbor index is self or out of range"));
            }
            if let Some(col) = dist.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::NonFiniteEntry { row: i, col });
            }
            if dist.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::BadParameters("neighbor distances not sorted"));
            }
        }
        Ok(Self { k, indices, distances })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.indices.len() / self.k
    }

    pub fn indices(&self, i: usize) -> &[usize] {
        &self.indices[i * self.k..(i + 1) * self.k]
    }

    pub fn distances(&self, i: usize) -> &[f64] {
        &self.distances[i * self.k..(i + 1) * self.k]
    }

    /// Keeps only the first `k` neighbors of every point.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.k {
            return Err(Error::KTooLarge { k, n: self.k + 1 });
        }
        let n = self.n();
        let mut indices = Vec::with_capacity(n * k);
        let mut distances = Vec::with_capacity(n * k);
        for i in 0..n {
            indices.extend_from_slice(&self.indices(i)[..k]);
            distances.extend_from_slice(&self.distances(i)[..k]);
        }
        Ok(Self { k, indices, distances })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    TwoNn,
    Mle,
}

impl Estimator {
    pub fn as_str(self) -> &'static str {
        match self {
            Estimator::TwoNn => "two_nn",
            Estimator::Mle => "mle",
        }
    }
}

/// Normalization of the inner log-ratio sum of the MLE estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MleNormalization {
    /// `1/(j-1)`, the published form.
    #[default]
    Published,
    /// `1/(j-2)`, the bias-corrected variant.
    BiasCorrected,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorParams {
    TwoNn { discard_fraction: f64 },
    Mle { k1: usize, k2: usize, normalization: MleNormalization },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionEstimate {
    pub value: f64,
    pub estimator: Estimator,
    pub n_used: usize,
    pub params: EstimatorParams,
}

/// Voronoi margin and prediction entropy at one hidden state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginSample {
    pub margin: f64,
    pub top_token: usize,
    pub runner_up_token: usize,
    pub entropy: f64,
}

/// Ordinary least-squares line `y = slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Power-law fit of the gap curve over `[eps_min, eps_max]` in log10-log10.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLogFit {
    pub beta: f64,
    pub alpha: f64,
    pub r_squared: f64,
    pub eps_min: f64,
    pub eps_max: f64,
    pub points: usize,
}

/// Empirical fraction of margins below each threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct GapCurve {
    pub epsilons: Vec<f64>,
    pub etas: Vec<f64>,
    pub fit: Option<LogLogFit>,
}

/// Fisher information of the token distribution at a hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    pub g: Matrix,
    pub at_point: Vec<f64>,
}

/// Distance used to assign samples to codewords.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuantizerMetric {
    #[default]
    Euclidean,
    /// Great-circle distance on the unit sphere.
    Arc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub codewords: Matrix,
    pub assignment: Vec<usize>,
    pub distortion: f64,
    pub metric: QuantizerMetric,
}
