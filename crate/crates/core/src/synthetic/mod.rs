//! Ground-truth manifolds and the experiments that check the quantization
//! bound, the linear gap law and the chord-versus-geodesic error.

mod geodesic;
mod manifold;
mod planar;
mod quantize;

pub use geodesic::{sphere_interp_error, sphere_pair};
pub use manifold::{ManifoldKind, SyntheticManifold};
pub use planar::{planar_gap_experiment, PlanarGap};
pub use quantize::{
    assign_codebook, ball_constant, ball_volume, distortion_lower_bound, greedy_expand, lloyd_quantize,
    lloyd_quantize_with, GreedyStep, LloydRun, DEFAULT_LLOYD_ITERATIONS,
};
