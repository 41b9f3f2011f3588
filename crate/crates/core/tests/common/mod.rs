#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use semgeo_core::{Matrix, PointCloud};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut r = rng(seed);
    let data = (0..rows * cols).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

pub fn uniform_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut r = rng(seed);
    let data = (0..rows * cols).map(|_| r.random::<f64>()).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

pub fn cloud(m: Matrix) -> PointCloud {
    PointCloud::from_matrix(m).unwrap()
}

/// Random orthogonal `d×d` matrix from Gram-Schmidt on Gaussian columns.
pub fn random_rotation(d: usize, seed: u64) -> Matrix {
    let g = gaussian_matrix(d, d, seed);
    let mut cols: Vec<Vec<f64>> = (0..d).map(|j| g.column(j)).collect();
    assert!(semgeo_core::linalg::gram_schmidt(&mut cols));
    let mut q = Matrix::zeros(d, d);
    for (j, c) in cols.iter().enumerate() {
        for i in 0..d {
            q[(i, j)] = c[i];
        }
    }
    q
}

/// Applies `x ↦ Q x + t` to every row.
pub fn rigid_motion(points: &Matrix, q: &Matrix, t: &[f64]) -> Matrix {
    let mut out = points.matmul(&q.transpose()).unwrap();
    for i in 0..out.rows() {
        out.row_mut(i).iter_mut().zip(t).for_each(|(x, ti)| *x += ti);
    }
    out
}

pub fn pad_zeros(points: &Matrix, extra: usize) -> Matrix {
    let d = points.cols();
    let mut out = Matrix::zeros(points.rows(), d + extra);
    for i in 0..points.rows() {
        out.row_mut(i)[..d].copy_from_slice(points.row(i));
    }
    out
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
