//! Geometry of hidden-state point clouds.
//!
//! This crate holds the numerical core: exact nearest neighbors, intrinsic
//! dimension estimators, local curvature proxies, the Fisher metric of a
//! softmax head, Voronoi margins and the expressibility-gap curve, spectral
//! embeddings, and synthetic manifolds with known ground truth for checking
//! all of the above.
//!
//! Without default features it is `no_std` and needs only `alloc`; float
//! functions then come from `libm`. The `parallel` feature (on by default,
//! implies `std`) spreads per-point work over a rayon pool; results do not
//! depend on the number of threads.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

mod par;
mod rng;

pub mod curvature;
pub mod error;
pub mod fisher;
pub mod gap;
pub mod intrinsic_dim;
pub mod knn;
pub mod linalg;
pub mod margin;
pub mod spectral;
pub mod stats;
pub mod synthetic;
pub mod types;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use types::{
    Codebook, DimensionEstimate, Estimator, EstimatorParams, FisherMatrix, GapCurve, LinearFit, LogLogFit,
    MarginSample, MleNormalization, NeighborTable, PointCloud, QuantizerMetric, UnembeddingHead,
};
