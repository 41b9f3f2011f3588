//! Exact Euclidean k-nearest neighbors by blocked brute force.
//!
//! Candidates are screened with the expanded form `‖a‖² + ‖b‖² − 2a·b`
//! (clamped at zero), keeping a few spare candidates per query. The kept
//! candidates are then re-measured by direct differences and ordered by
//! `(distance, index)`, so the final table does not depend on round-off in
//! the expanded form nor on the worker count.

use alloc::vec::Vec;
use core::cmp::Ordering;
use core::ops::Range;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{distance, dot, Matrix};
use crate::par;
use crate::types::{NeighborTable, PointCloud};

const ROW_BLOCK: usize = 32;
const COL_BLOCK: usize = 512;
const SPARE_CANDIDATES: usize = 4;

/// Distances between the points of `rows` and the points of `cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceBlock {
    pub rows: Range<usize>,
    pub cols: Range<usize>,
    /// `rows.len() × cols.len()`.
    pub values: Matrix,
}

fn check_range(r: &Range<usize>, len: usize) -> Result<()> {
    if r.start > r.end || r.end > len {
        return Err(Error::RangeOutOfBounds { start: r.start, end: r.end, len });
    }
    Ok(())
}

fn squared_norms(cloud: &PointCloud) -> Vec<f64> {
    (0..cloud.n()).map(|i| dot(cloud.point(i), cloud.point(i))).collect()
}

fn squared_block(cloud: &PointCloud, norms: &[f64], rows: Range<usize>, cols: Range<usize>) -> Matrix {
    let mut out = Matrix::zeros(rows.len(), cols.len());
    for (bi, i) in rows.clone().enumerate() {
        let a = cloud.point(i);
        let o = out.row_mut(bi);
        for (bj, j) in cols.clone().enumerate() {
            let v = norms[i] + norms[j] - 2.0 * dot(a, cloud.point(j));
            o[bj] = v.max(0.0);
        }
    }
    out
}

/// Euclidean distances for a rectangular block of point pairs.
pub fn pairwise_distance_block(cloud: &PointCloud, rows: Range<usize>, cols: Range<usize>) -> Result<DistanceBlock> {
    check_range(&rows, cloud.n())?;
    check_range(&cols, cloud.n())?;
    let norms = squared_norms(cloud);
    let mut values = squared_block(cloud, &norms, rows.clone(), cols.clone());
    for i in 0..values.rows() {
        values.row_mut(i).iter_mut().for_each(|x| *x = x.sqrt());
    }
    Ok(DistanceBlock { rows, cols, values })
}

#[inline]
fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Bounded sorted candidate list.
struct Candidates {
    cap: usize,
    items: Vec<(f64, usize)>,
}

impl Candidates {
    fn new(cap: usize) -> Self {
        Self { cap, items: Vec::with_capacity(cap + 1) }
    }

    #[inline]
    fn offer(&mut self, d2: f64, j: usize) {
        let c = (d2, j);
        if self.items.len() == self.cap {
            if by_distance_then_index(&c, self.items.last().unwrap()) != Ordering::Less {
                return;
            }
            self.items.pop();
        }
        let pos = self.items.partition_point(|x| by_distance_then_index(x, &c) == Ordering::Less);
        self.items.insert(pos, c);
    }
}

/// Exact k nearest neighbors of every point, self excluded.
///
/// Ties in distance are broken toward the lower point index.
pub fn build_neighbor_table(cloud: &PointCloud, k: usize) -> Result<NeighborTable> {
    let n = cloud.n();
    if k == 0 || k >= n {
        return Err(Error::KTooLarge { k, n });
    }
    let cap = (k + SPARE_CANDIDATES).min(n - 1);
    let norms = squared_norms(cloud);
    let blocks = n.div_ceil(ROW_BLOCK);

    let per_block: Vec<Vec<Vec<(f64, usize)>>> = par::map_indices(blocks, |b| {
        let rows = b * ROW_BLOCK..((b + 1) * ROW_BLOCK).min(n);
        let mut cands: Vec<Candidates> = rows.clone().map(|_| Candidates::new(cap)).collect();
        let mut c0 = 0;
        while c0 < n {
            let cols = c0..(c0 + COL_BLOCK).min(n);
            let block = squared_block(cloud, &norms, rows.clone(), cols.clone());
            for (bi, i) in rows.clone().enumerate() {
                let r = block.row(bi);
                for (bj, j) in cols.clone().enumerate() {
                    if j != i {
                        cands[bi].offer(r[bj], j);
                    }
                }
            }
            c0 = cols.end;
        }
        rows.zip(cands)
            .map(|(i, c)| {
                let mut exact: Vec<(f64, usize)> =
                    c.items.into_iter().map(|(_, j)| (distance(cloud.point(i), cloud.point(j)), j)).collect();
                exact.sort_by(by_distance_then_index);
                exact.truncate(k);
                exact
            })
            .collect()
    });

    let mut indices = Vec::with_capacity(n * k);
    let mut distances = Vec::with_capacity(n * k);
    for row in per_block.into_iter().flatten() {
        for (d, j) in row {
            indices.push(j);
            distances.push(d);
        }
    }
    NeighborTable::from_parts(n, k, indices, distances)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> PointCloud {
        let rows: Vec<[f64; 1]> = xs.iter().map(|&x| [x]).collect();
        PointCloud::from_matrix(Matrix::from_rows(&rows).unwrap()).unwrap()
    }

    #[test]
    fn points_on_a_line() {
        let t = build_neighbor_table(&line(&[0.0, 1.0, 3.0]), 2).unwrap();
        assert_eq!(t.indices(1), &[0, 2]);
        assert_eq!(t.distances(1), &[1.0, 2.0]);
    }

    #[test]
    fn duplicates_rank_first_lower_index_first() {
        let t = build_neighbor_table(&line(&[5.0, 0.0, 5.0, 5.0]), 3).unwrap();
        assert_eq!(t.indices(3), &[0, 2, 1]);
        assert_eq!(t.distances(3), &[0.0, 0.0, 5.0]);
        assert_eq!(t.indices(0), &[2, 3, 1]);
    }

    #[test]
    fn k_must_be_below_n() {
        let c = line(&[0.0, 1.0, 2.0]);
        assert_eq!(build_neighbor_table(&c, 3), Err(Error::KTooLarge { k: 3, n: 3 }));
        assert!(build_neighbor_table(&c, 0).is_err());
    }

    #[test]
    fn block_identical_singleton_is_zero() {
        let c = PointCloud::from_matrix(Matrix::from_rows(&[[0.3, -1.7, 2.2], [1.0, 1.0, 1.0]]).unwrap()).unwrap();
        let b = pairwise_distance_block(&c, 0..1, 0..1).unwrap();
        assert_eq!(b.values[(0, 0)], 0.0);
    }

    #[test]
    fn block_orthonormal_vectors() {
        let c = PointCloud::from_matrix(Matrix::identity(4)).unwrap();
        let b = pairwise_distance_block(&c, 0..4, 0..4).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 0.0 } else { 2f64.sqrt() };
                assert!((b.values[(i, j)] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn block_range_checked() {
        let c = PointCloud::from_matrix(Matrix::identity(4)).unwrap();
        assert_eq!(
            pairwise_distance_block(&c, 2..5, 0..1),
            Err(Error::RangeOutOfBounds { start: 2, end: 5, len: 4 })
        );
    }
}
