//! Local curvature proxies from neighborhood PCA.
//!
//! The PCA proxy is the share of neighborhood variance outside the top
//! `intrinsic_k` principal directions. The second-fundamental-form proxy is
//! the largest principal angle between the tangent planes of a point and of
//! each of its nearest neighbors, divided by their distance.

use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_4;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{dot, gram_schmidt, singular_values, symmetric_eigen, Matrix};
use crate::par;
use crate::types::{NeighborTable, PointCloud};

pub const DEFAULT_TANGENT_NEIGHBORS: usize = 5;

/// Relative eigenvalue floor below which a tangent direction is missing.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureParams {
    /// Neighbors (besides the point itself) in each local PCA.
    pub neighborhood_size: usize,
    pub intrinsic_k: usize,
    /// Neighbors whose tangent planes are compared for the rotation proxy.
    pub tangent_neighbors: usize,
}

impl CurvatureParams {
    /// Defaults for a given intrinsic dimension: `max(2k, 20)` neighbors and
    /// five tangent comparisons.
    pub fn for_dimension(intrinsic_k: usize) -> Self {
        Self {
            neighborhood_size: (2 * intrinsic_k).max(20),
            intrinsic_k,
            tangent_neighbors: DEFAULT_TANGENT_NEIGHBORS,
        }
    }

    fn check(&self, table: &NeighborTable) -> Result<()> {
        if self.intrinsic_k == 0 || self.neighborhood_size <= self.intrinsic_k {
            return Err(Error::NeighborhoodTooSmall { size: self.neighborhood_size, needed: self.intrinsic_k + 1 });
        }
        if table.k() < self.neighborhood_size {
            return Err(Error::NeighborhoodTooSmall { size: table.k(), needed: self.neighborhood_size });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureSample {
    pub point_index: usize,
    /// Fraction of local variance off the tangent plane, in `[0, 1]`.
    pub pca_curvature: f64,
    /// Tangent-plane rotation per unit distance.
    pub ii_norm: f64,
}

/// Principal components of one neighborhood.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalPca {
    /// Variances along principal directions, descending.
    pub variances: Vec<f64>,
    /// Orthonormal top-`k` directions; `None` if the neighborhood spans fewer
    /// than `k` directions.
    pub tangent: Option<Vec<Vec<f64>>>,
}

impl LocalPca {
    pub fn residual_fraction(&self, k: usize) -> f64 {
        let total: f64 = self.variances.iter().sum();
        if total <= 0.0 {
            return 0.0;
        }
        let tail: f64 = self.variances.iter().skip(k).sum();
        (tail / total).clamp(0.0, 1.0)
    }
}

/// PCA of point `i` together with its first `neighborhood_size` neighbors.
///
/// Works on the small Gram matrix of the centered neighborhood, so the cost
/// does not grow with the ambient dimension beyond one pass over the rows.
pub fn local_pca(cloud: &PointCloud, table: &NeighborTable, i: usize, neighborhood_size: usize, k: usize) -> LocalPca {
    let d = cloud.d();
    let mut members = Vec::with_capacity(neighborhood_size + 1);
    members.push(i);
    members.extend_from_slice(&table.indices(i)[..neighborhood_size]);
    let m = members.len();

    let mut mean = alloc::vec![0.0; d];
    for &j in &members {
        mean.iter_mut().zip(cloud.point(j)).for_each(|(a, x)| *a += x);
    }
    mean.iter_mut().for_each(|a| *a /= m as f64);
    let centered: Vec<Vec<f64>> =
        members.iter().map(|&j| cloud.point(j).iter().zip(&mean).map(|(x, c)| x - c).collect()).collect();

    let mut gram = Matrix::zeros(m, m);
    for a in 0..m {
        for b in a..m {
            let v = dot(&centered[a], &centered[b]);
            gram[(a, b)] = v;
            gram[(b, a)] = v;
        }
    }
    let eig = symmetric_eigen(&gram).expect("square Gram matrix");
    let variances: Vec<f64> = eig.values.iter().map(|v| v.max(0.0)).collect();

    let top = variances.first().copied().unwrap_or(0.0);
    let spans_k = k <= m && top > 0.0 && variances[k - 1] > RANK_TOLERANCE * top;
    let tangent = spans_k
        .then(|| {
            // Right singular vectors: Xᵀu / sqrt(λ).
            let mut basis: Vec<Vec<f64>> = (0..k)
                .map(|c| {
                    let scale = variances[c].sqrt();
                    let mut v = alloc::vec![0.0; d];
                    for (a, row) in centered.iter().enumerate() {
                        let w = eig.vectors[(a, c)] / scale;
                        v.iter_mut().zip(row).for_each(|(x, r)| *x += w * r);
                    }
                    v
                })
                .collect();
            gram_schmidt(&mut basis).then_some(basis)
        })
        .flatten();
    LocalPca { variances, tangent }
}

/// Largest principal angle between two subspaces with orthonormal bases.
///
/// Small angles come from the sine (residual of projecting one basis onto
/// the other), large ones from the cosine, which keeps both ends accurate.
pub fn largest_principal_angle(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let k = a.len();
    let mut cross = Matrix::zeros(k, b.len());
    for (r, u) in a.iter().enumerate() {
        for (c, v) in b.iter().enumerate() {
            cross[(r, c)] = dot(u, v);
        }
    }
    let d = b.first().map_or(0, |v| v.len());
    let mut residual = Matrix::zeros(d, b.len());
    for (c, v) in b.iter().enumerate() {
        for x in 0..d {
            let proj: f64 = a.iter().enumerate().map(|(r, u)| cross[(r, c)] * u[x]).sum();
            residual[(x, c)] = v[x] - proj;
        }
    }
    let sin_max = singular_values(&residual).first().copied().unwrap_or(0.0).min(1.0);
    let theta_sin = sin_max.asin();
    if theta_sin < FRAC_PI_4 {
        return theta_sin;
    }
    let cos_min = singular_values(&cross).last().copied().unwrap_or(0.0).clamp(0.0, 1.0);
    cos_min.acos()
}

/// Residual-variance curvature for every point.
pub fn local_pca_curvature(cloud: &PointCloud, table: &NeighborTable, params: &CurvatureParams) -> Result<Vec<f64>> {
    params.check(table)?;
    Ok(par::map_indices(cloud.n(), |i| {
        local_pca(cloud, table, i, params.neighborhood_size, params.intrinsic_k).residual_fraction(params.intrinsic_k)
    }))
}

fn tangents(cloud: &PointCloud, table: &NeighborTable, params: &CurvatureParams) -> Vec<LocalPca> {
    par::map_indices(cloud.n(), |i| local_pca(cloud, table, i, params.neighborhood_size, params.intrinsic_k))
}

fn rotation_rates(table: &NeighborTable, pcas: &[LocalPca], params: &CurvatureParams) -> Result<Vec<f64>> {
    let m = params.tangent_neighbors.min(table.k());
    if m == 0 {
        return Err(Error::NeighborhoodTooSmall { size: 0, needed: 1 });
    }
    par::try_map_indices(pcas.len(), |i| {
        let own = pcas[i].tangent.as_ref().ok_or(Error::DegenerateTangent { point: i })?;
        let mut acc = 0.0;
        for (&j, &dist) in table.indices(i)[..m].iter().zip(&table.distances(i)[..m]) {
            if dist <= 0.0 {
                return Err(Error::DegenerateTangent { point: i });
            }
            let other = pcas[j].tangent.as_ref().ok_or(Error::DegenerateTangent { point: j })?;
            acc += largest_principal_angle(own, other) / dist;
        }
        Ok(acc / m as f64)
    })
}

/// Tangent-plane rotation rate for every point.
pub fn second_fundamental_norm(cloud: &PointCloud, table: &NeighborTable, params: &CurvatureParams) -> Result<Vec<f64>> {
    params.check(table)?;
    let pcas = tangents(cloud, table, params);
    rotation_rates(table, &pcas, params)
}

/// Both proxies, sharing one PCA per point.
pub fn curvature_samples(cloud: &PointCloud, table: &NeighborTable, params: &CurvatureParams) -> Result<Vec<CurvatureSample>> {
    params.check(table)?;
    let pcas = tangents(cloud, table, params);
    let ii = rotation_rates(table, &pcas, params)?;
    Ok(pcas
        .iter()
        .zip(ii)
        .enumerate()
        .map(|(point_index, (p, ii_norm))| CurvatureSample {
            point_index,
            pca_curvature: p.residual_fraction(params.intrinsic_k),
            ii_norm,
        })
        .collect())
}

/// Orthonormal tangent basis at point `i` as a `d × k` matrix.
pub fn tangent_basis(cloud: &PointCloud, table: &NeighborTable, i: usize, params: &CurvatureParams) -> Result<Matrix> {
    params.check(table)?;
    let pca = local_pca(cloud, table, i, params.neighborhood_size, params.intrinsic_k);
    let basis = pca.tangent.ok_or(Error::DegenerateTangent { point: i })?;
    let mut out = Matrix::zeros(cloud.d(), basis.len());
    for (c, v) in basis.iter().enumerate() {
        for (r, x) in v.iter().enumerate() {
            out[(r, c)] = *x;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knn::build_neighbor_table;
    use alloc::vec;

    #[test]
    fn principal_angle_of_rotated_line() {
        let a = vec![vec![1.0, 0.0]];
        for &t in &[1e-9, 0.3, 1.2, core::f64::consts::FRAC_PI_2] {
            let b = vec![vec![t.cos(), t.sin()]];
            assert!((largest_principal_angle(&a, &b) - t).abs() < 1e-12, "{t}");
        }
    }

    #[test]
    fn coincident_points_have_no_tangent() {
        let cloud = PointCloud::from_matrix(Matrix::zeros(30, 3)).unwrap();
        let table = build_neighbor_table(&cloud, 25).unwrap();
        let params = CurvatureParams::for_dimension(2);
        assert_eq!(local_pca_curvature(&cloud, &table, &params).unwrap()[0], 0.0);
        assert!(matches!(
            second_fundamental_norm(&cloud, &table, &params),
            Err(Error::DegenerateTangent { .. })
        ));
    }

    #[test]
    fn neighborhood_must_exceed_dimension() {
        let cloud = PointCloud::from_matrix(Matrix::identity(6)).unwrap();
        let table = build_neighbor_table(&cloud, 3).unwrap();
        let p = CurvatureParams { neighborhood_size: 2, intrinsic_k: 2, tangent_neighbors: 1 };
        assert!(matches!(local_pca_curvature(&cloud, &table, &p), Err(Error::NeighborhoodTooSmall { .. })));
        let p = CurvatureParams { neighborhood_size: 4, intrinsic_k: 2, tangent_neighbors: 1 };
        assert!(matches!(local_pca_curvature(&cloud, &table, &p), Err(Error::NeighborhoodTooSmall { .. })));
    }

    #[test]
    fn default_neighborhood() {
        assert_eq!(CurvatureParams::for_dimension(3).neighborhood_size, 20);
        assert_eq!(CurvatureParams::for_dimension(15).neighborhood_size, 30);
    }
}
