use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{gram_schmidt, Matrix};
use crate::par;
use crate::rng::{chunk_count, substream, CHUNK};
use crate::types::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ManifoldKind {
    /// `S^k` of the given radius in `R^{k+1}`.
    Sphere { radius: f64 },
    /// `[0, side]^k`.
    Cube { side: f64 },
    /// Flat torus: product of `k` circles of the given radius in `R^{2k}`.
    Torus { radius: f64 },
    /// Rolled rectangle in `R³`, `t ∈ [1.5π, 4.5π]`; only `k = 2`.
    SwissRoll { height: f64 },
}

impl ManifoldKind {
    pub fn name(&self) -> &'static str {
        match self {
            ManifoldKind::Sphere { .. } => "sphere",
            ManifoldKind::Cube { .. } => "cube",
            ManifoldKind::Torus { .. } => "torus",
            ManifoldKind::SwissRoll { .. } => "swiss_roll",
        }
    }
}

/// A manifold with known intrinsic dimension, embedded in `ambient_d`
/// dimensions through a seeded random isometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticManifold {
    pub kind: ManifoldKind,
    pub intrinsic_k: usize,
    pub ambient_d: usize,
    /// Seed of the embedding isometry.
    pub seed: u64,
}

const SWISS_T0: f64 = 1.5 * PI;
const SWISS_T1: f64 = 4.5 * PI;

impl SyntheticManifold {
    pub fn new(kind: ManifoldKind, intrinsic_k: usize, ambient_d: usize, seed: u64) -> Result<Self> {
        let m = Self { kind, intrinsic_k, ambient_d, seed };
        m.check()?;
        Ok(m)
    }

    pub fn cube(k: usize, ambient_d: usize, seed: u64) -> Result<Self> {
        Self::new(ManifoldKind::Cube { side: 1.0 }, k, ambient_d, seed)
    }

    pub fn sphere(k: usize, radius: f64, ambient_d: usize, seed: u64) -> Result<Self> {
        Self::new(ManifoldKind::Sphere { radius }, k, ambient_d, seed)
    }

    fn check(&self) -> Result<()> {
        if self.intrinsic_k == 0 {
            return Err(Error::BadParameters("intrinsic dimension must be at least 1"));
        }
        let scale = match self.kind {
            ManifoldKind::Sphere { radius } | ManifoldKind::Torus { radius } => radius,
            ManifoldKind::Cube { side } => side,
            ManifoldKind::SwissRoll { height } => height,
        };
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::BadParameters("scale parameter must be positive and finite"));
        }
        if matches!(self.kind, ManifoldKind::SwissRoll { .. }) && self.intrinsic_k != 2 {
            return Err(Error::BadParameters("swiss roll is two-dimensional"));
        }
        if self.ambient_d < self.base_dim() {
            return Err(Error::BadParameters("ambient dimension too small for this manifold"));
        }
        Ok(())
    }

    /// Dimension of the coordinates the manifold is natively written in.
    pub fn base_dim(&self) -> usize {
        match self.kind {
            ManifoldKind::Sphere { .. } => self.intrinsic_k + 1,
            ManifoldKind::Cube { .. } => self.intrinsic_k,
            ManifoldKind::Torus { .. } => 2 * self.intrinsic_k,
            ManifoldKind::SwissRoll { .. } => 3,
        }
    }

    /// `k`-dimensional volume, where it has a closed form.
    pub fn volume(&self) -> Option<f64> {
        let k = self.intrinsic_k as f64;
        match self.kind {
            ManifoldKind::Cube { side } => Some(side.powf(k)),
            ManifoldKind::Torus { radius } => Some((2.0 * PI * radius).powf(k)),
            ManifoldKind::Sphere { radius } => {
                // |S^k| = 2 π^{(k+1)/2} / Γ((k+1)/2) · r^k
                Some(2.0 * PI.powf((k + 1.0) / 2.0) / libm::tgamma((k + 1.0) / 2.0) * radius.powf(k))
            }
            ManifoldKind::SwissRoll { .. } => None,
        }
    }

    fn draw(&self, rng: &mut impl Rng, out: &mut [f64]) {
        match self.kind {
            ManifoldKind::Sphere { radius } => loop {
                out.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
                let n = out.iter().map(|x| x * x).sum::<f64>().sqrt();
                if n > 1e-12 {
                    out.iter_mut().for_each(|x| *x *= radius / n);
                    break;
                }
            },
            ManifoldKind::Cube { side } => out.iter_mut().for_each(|x| *x = side * rng.random::<f64>()),
            ManifoldKind::Torus { radius } => {
                for pair in out.chunks_exact_mut(2) {
                    let theta = 2.0 * PI * rng.random::<f64>();
                    pair[0] = radius * theta.cos();
                    pair[1] = radius * theta.sin();
                }
            }
            ManifoldKind::SwissRoll { height } => {
                // Arc-length density along the spiral is sqrt(1 + t²).
                let max_w = (1.0 + SWISS_T1 * SWISS_T1).sqrt();
                let t = loop {
                    let t = SWISS_T0 + (SWISS_T1 - SWISS_T0) * rng.random::<f64>();
                    if rng.random::<f64>() * max_w <= (1.0 + t * t).sqrt() {
                        break t;
                    }
                };
                out[0] = t * t.cos();
                out[1] = height * rng.random::<f64>();
                out[2] = t * t.sin();
            }
        }
    }

    /// Uniform samples in native coordinates, `n × base_dim`.
    pub fn sample_base(&self, n: usize, seed: u64) -> Result<Matrix> {
        self.check()?;
        if n < 2 {
            return Err(Error::TooFewPoints { min: 2, found: n });
        }
        let b = self.base_dim();
        let chunks: Vec<Vec<f64>> = par::map_indices(chunk_count(n), |c| {
            let mut rng = substream(seed, c as u64);
            let rows = CHUNK.min(n - c * CHUNK);
            let mut out = vec![0.0; rows * b];
            for row in out.chunks_exact_mut(b) {
                self.draw(&mut rng, row);
            }
            out
        });
        Matrix::from_vec(n, b, chunks.concat())
    }

    /// Orthonormal `base_dim` frame in the ambient space.
    pub fn embedding_frame(&self) -> Vec<Vec<f64>> {
        let mut rng = substream(self.seed, u64::MAX);
        loop {
            let mut frame: Vec<Vec<f64>> = (0..self.base_dim())
                .map(|_| (0..self.ambient_d).map(|_| rng.sample(StandardNormal)).collect())
                .collect();
            if gram_schmidt(&mut frame) {
                return frame;
            }
        }
    }

    /// Maps native coordinates into the ambient space.
    pub fn embed(&self, base: &Matrix) -> Result<Matrix> {
        if base.cols() != self.base_dim() {
            return Err(Error::DimensionMismatch { expected: self.base_dim(), found: base.cols() });
        }
        let frame = self.embedding_frame();
        let mut out = Matrix::zeros(base.rows(), self.ambient_d);
        for i in 0..base.rows() {
            let row = out.row_mut(i);
            for (c, q) in frame.iter().enumerate() {
                let x = base[(i, c)];
                row.iter_mut().zip(q).for_each(|(o, qv)| *o += x * qv);
            }
        }
        Ok(out)
    }

    /// Uniform sample embedded in the ambient space.
    pub fn sample(&self, n: usize, seed: u64) -> Result<PointCloud> {
        let base = self.sample_base(n, seed)?;
        let points = self.embed(&base)?;
        PointCloud::new(points, 0, format!("synthetic:{}:k{}:seed{}", self.kind.name(), self.intrinsic_k, seed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;

    #[test]
    fn sphere_points_have_unit_norm() {
        let m = SyntheticManifold::sphere(2, 1.0, 3, 0).unwrap();
        let base = m.sample_base(4000, 1).unwrap();
        for i in 0..base.rows() {
            assert!((dot(base.row(i), base.row(i)).sqrt() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cube_mean_is_half() {
        let m = SyntheticManifold::cube(5, 5, 0).unwrap();
        let base = m.sample_base(20000, 3).unwrap();
        for c in 0..5 {
            let mean = base.column(c).iter().sum::<f64>() / base.rows() as f64;
            assert!((mean - 0.5).abs() < 0.02, "{mean}");
        }
    }

    #[test]
    fn same_seed_same_cloud() {
        let m = SyntheticManifold::new(ManifoldKind::SwissRoll { height: 21.0 }, 2, 10, 7).unwrap();
        let a = m.sample(5000, 11).unwrap();
        let b = m.sample(5000, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, m.sample(5000, 12).unwrap());
    }

    #[test]
    fn embedding_is_isometric() {
        let m = SyntheticManifold::new(ManifoldKind::Torus { radius: 1.0 }, 2, 9, 4).unwrap();
        let base = m.sample_base(50, 0).unwrap();
        let emb = m.embed(&base).unwrap();
        for i in 0..50 {
            let nb = dot(base.row(i), base.row(i));
            let ne = dot(emb.row(i), emb.row(i));
            assert!((nb - ne).abs() < 1e-12);
        }
    }

    #[test]
    fn bad_parameters() {
        assert!(SyntheticManifold::sphere(2, 1.0, 2, 0).is_err());
        assert!(SyntheticManifold::cube(0, 3, 0).is_err());
        assert!(SyntheticManifold::new(ManifoldKind::SwissRoll { height: 1.0 }, 3, 5, 0).is_err());
        assert!(SyntheticManifold::new(ManifoldKind::Torus { radius: -1.0 }, 1, 5, 0).is_err());
        let m = SyntheticManifold::cube(2, 2, 0).unwrap();
        assert!(m.sample(1, 0).is_err());
    }

    #[test]
    fn sphere_volume() {
        let s2 = SyntheticManifold::sphere(2, 1.0, 3, 0).unwrap();
        assert!((s2.volume().unwrap() - 4.0 * PI).abs() < 1e-12);
    }
}
