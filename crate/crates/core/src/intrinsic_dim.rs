//! Intrinsic dimension from nearest-neighbor distance ratios.
//!
//! Two estimators share the same [`NeighborTable`]:
//!
//! * TWO-NN: for data spread uniformly over a k-dimensional manifold the
//!   ratio `μ = ρ₂/ρ₁` of second to first neighbor distance is Pareto(1, k),
//!   whose maximum-likelihood exponent is `n / Σ ln μᵢ`.
//! * MLE over neighborhood sizes `k1..=k2`: for every point and every `j` the
//!   local estimate is `[(1/(j−1)) Σ_{l<j} ln(T_j/T_l)]⁻¹`; the result is the
//!   mean over points, then over `j`.
//!
//! Both only see ratios of distances, so they are invariant under scaling,
//! rigid motions and zero-padding of the ambient space.

use alloc::string::String;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::knn::build_neighbor_table;
use crate::par;
use crate::types::{DimensionEstimate, Estimator, EstimatorParams, MleNormalization, NeighborTable, PointCloud};

pub const DEFAULT_DISCARD_FRACTION: f64 = 0.01;
pub const DEFAULT_MLE_K1: usize = 10;
pub const DEFAULT_MLE_K2: usize = 20;

/// TWO-NN estimate, discarding the largest `⌈discard_fraction·n⌉` ratios.
pub fn two_nn(table: &NeighborTable, discard_fraction: f64) -> Result<DimensionEstimate> {
    if table.k() < 2 {
        return Err(Error::KTooLarge { k: 2, n: table.k() + 1 });
    }
    if !(0.0..1.0).contains(&discard_fraction) {
        return Err(Error::BadParameters("discard_fraction must lie in [0, 1)"));
    }
    let n = table.n();
    let mut ratios = Vec::with_capacity(n);
    for i in 0..n {
        let d = table.distances(i);
        if d[0] <= 0.0 {
            return Err(Error::DegenerateNeighborhood { point: i });
        }
        ratios.push(d[1] / d[0]);
    }
    ratios.sort_by(f64::total_cmp);
    let discard = (discard_fraction * n as f64).ceil() as usize;
    let n_used = n.saturating_sub(discard);
    if n_used == 0 {
        return Err(Error::BadParameters("discard_fraction leaves no ratios"));
    }
    let sum: f64 = ratios[..n_used].iter().map(|m| m.ln()).sum();
    if sum <= 0.0 {
        return Err(Error::AllRatiosUnity);
    }
    Ok(DimensionEstimate {
        value: n_used as f64 / sum,
        estimator: Estimator::TwoNn,
        n_used,
        params: EstimatorParams::TwoNn { discard_fraction },
    })
}

/// Levina–Bickel estimate with the published `1/(j−1)` normalization.
pub fn mle_dimension(table: &NeighborTable, k1: usize, k2: usize) -> Result<DimensionEstimate> {
    mle_dimension_with(table, k1, k2, MleNormalization::Published)
}

pub fn mle_dimension_with(
    table: &NeighborTable,
    k1: usize,
    k2: usize,
    normalization: MleNormalization,
) -> Result<DimensionEstimate> {
    let min_k1 = match normalization {
        MleNormalization::Published => 2,
        MleNormalization::BiasCorrected => 3,
    };
    if k1 < min_k1 || k1 > k2 {
        return Err(Error::BadParameters("MLE requires 2 <= k1 <= k2 (3 <= k1 when bias-corrected)"));
    }
    if k2 > table.k() {
        return Err(Error::KTooLarge { k: k2, n: table.k() + 1 });
    }
    let n = table.n();
    let span = k2 - k1 + 1;

    // Row i holds the local estimates for j = k1..=k2.
    let locals: Vec<Vec<f64>> = par::try_map_indices(n, |i| {
        let t = table.distances(i);
        if t[0] <= 0.0 {
            return Err(Error::DegenerateNeighborhood { point: i });
        }
        let logs: Vec<f64> = t[..k2].iter().map(|x| x.ln()).collect();
        let mut prefix = 0.0;
        let mut out = Vec::with_capacity(span);
        for j in 1..=k2 {
            if j >= k1 {
                let denom = match normalization {
                    MleNormalization::Published => (j - 1) as f64,
                    MleNormalization::BiasCorrected => (j - 2) as f64,
                };
                // Σ_{l<j} ln(T_j/T_l) = (j−1)·ln T_j − Σ_{l<j} ln T_l
                let s = (j - 1) as f64 * logs[j - 1] - prefix;
                if s <= 0.0 {
                    return Err(Error::DegenerateNeighborhood { point: i });
                }
                out.push(denom / s);
            }
            prefix += logs[j - 1];
        }
        Ok(out)
    })?;

    let mut total = 0.0;
    for jj in 0..span {
        let mean_j: f64 = locals.iter().map(|row| row[jj]).sum::<f64>() / n as f64;
        total += mean_j;
    }
    Ok(DimensionEstimate {
        value: total / span as f64,
        estimator: Estimator::Mle,
        n_used: n,
        params: EstimatorParams::Mle { k1, k2, normalization },
    })
}

/// Settings for a per-layer profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSettings {
    pub estimator: Estimator,
    pub discard_fraction: f64,
    pub k1: usize,
    pub k2: usize,
    pub normalization: MleNormalization,
}

impl Default for ProfileSettings {
    fn default() -> Self {
        Self {
            estimator: Estimator::TwoNn,
            discard_fraction: DEFAULT_DISCARD_FRACTION,
            k1: DEFAULT_MLE_K1,
            k2: DEFAULT_MLE_K2,
            normalization: MleNormalization::Published,
        }
    }
}

impl ProfileSettings {
    pub fn with_estimator(mut self, estimator: Estimator) -> Self {
        self.estimator = estimator;
        self
    }

    /// Neighbors the estimator needs from the table.
    pub fn neighbors_needed(&self) -> usize {
        match self.estimator {
            Estimator::TwoNn => 2,
            Estimator::Mle => self.k2,
        }
    }

    /// Runs the configured estimator on a prebuilt table.
    pub fn estimate(&self, table: &NeighborTable) -> Result<DimensionEstimate> {
        match self.estimator {
            Estimator::TwoNn => two_nn(table, self.discard_fraction),
            Estimator::Mle => mle_dimension_with(table, self.k1, self.k2, self.normalization),
        }
    }

    /// Builds the neighbor table and runs the estimator.
    pub fn estimate_cloud(&self, cloud: &PointCloud) -> Result<DimensionEstimate> {
        let table = build_neighbor_table(cloud, self.neighbors_needed())?;
        self.estimate(&table)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerEntry {
    pub layer_index: usize,
    /// Layer 0 is the embedding layer; it is reported but never the peak.
    pub is_embedding_layer: bool,
    pub estimate: core::result::Result<DimensionEstimate, Error>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerProfile {
    pub layers: Vec<LayerEntry>,
    pub ambient_d: usize,
    pub peak_layer: usize,
    pub peak_value: f64,
    /// `peak_value / ambient_d`.
    pub utilization: f64,
    /// Estimate at the deepest layer, if it succeeded.
    pub final_value: Option<f64>,
}

impl LayerProfile {
    pub fn failed_layers(&self) -> impl Iterator<Item = (usize, &Error)> {
        self.layers.iter().filter_map(|l| l.estimate.as_ref().err().map(|e| (l.layer_index, e)))
    }
}

/// Estimates every layer and locates the peak among layers `>= 1`.
///
/// A layer whose estimator fails is kept in the profile with its error; only
/// a missing peak (no successful layer past the embedding) fails the whole
/// profile.
pub fn layer_profile(clouds: &[PointCloud], settings: &ProfileSettings) -> Result<LayerProfile> {
    if clouds.len() < 2 {
        return Err(Error::TooFewPoints { min: 2, found: clouds.len() });
    }
    let ambient_d = clouds[0].d();
    if let Some(bad) = clouds.iter().find(|c| c.d() != ambient_d) {
        return Err(Error::DimensionMismatch { expected: ambient_d, found: bad.d() });
    }
    let layers: Vec<LayerEntry> = clouds
        .iter()
        .map(|c| LayerEntry {
            layer_index: c.layer_index(),
            is_embedding_layer: c.layer_index() == 0,
            estimate: settings.estimate_cloud(c),
        })
        .collect();

    let mut peak: Option<(usize, f64)> = None;
    for l in layers.iter().filter(|l| !l.is_embedding_layer) {
        if let Ok(e) = &l.estimate {
            if peak.map_or(true, |(_, v)| e.value > v) {
                peak = Some((l.layer_index, e.value));
            }
        }
    }
    let (peak_layer, peak_value) = peak.ok_or(Error::BadParameters("no layer past the embedding produced an estimate"))?;
    let deepest = layers.iter().max_by_key(|l| l.layer_index).unwrap();
    Ok(LayerProfile {
        final_value: deepest.estimate.as_ref().ok().map(|e| e.value),
        layers,
        ambient_d,
        peak_layer,
        peak_value,
        utilization: peak_value / ambient_d as f64,
    })
}

/// Rounds a dimension estimate to the nearest integer, at least 1.
pub fn rounded_dimension(estimate: &DimensionEstimate) -> usize {
    (estimate.value.round() as usize).max(1)
}

/// Short `key=value` description of estimator settings.
pub fn describe_params(params: &EstimatorParams) -> String {
    use core::fmt::Write;
    let mut s = String::new();
    match params {
        EstimatorParams::TwoNn { discard_fraction } => {
            let _ = write!(s, "discard_fraction={discard_fraction}");
        }
        EstimatorParams::Mle { k1, k2, normalization } => {
            let norm = match normalization {
                MleNormalization::Published => "published",
                MleNormalization::BiasCorrected => "bias_corrected",
            };
            let _ = write!(s, "k1={k1};k2={k2};normalization={norm}");
        }
    }
    s
}
