//! Laplacian eigenmaps on the symmetrized k-nearest-neighbor graph.
//!
//! Graphs up to [`DENSE_LIMIT`] nodes are solved with a dense symmetric
//! eigendecomposition. Larger graphs use Lanczos iteration with full
//! reorthogonalization on the shifted operator `σI − L`, with the known
//! null vector of `L` projected out, and accept eigenpairs only once
//! `‖Lv − μv‖ ≤ 1e-8`.

use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, symmetric_eigen, Matrix};
use crate::par;
use crate::rng::substream;
use crate::types::NeighborTable;

pub const DENSE_LIMIT: usize = 5000;
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;

/// Undirected graph as sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from an edge list, symmetrizing and dropping loops.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::RangeOutOfBounds { start: a.min(b), end: a.max(b) + 1, len: n });
            }
            if a != b {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self { adjacency })
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }

    /// Number of connected components.
    pub fn components(&self) -> usize {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut count = 0;
        let mut stack = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            stack.push(s);
            while let Some(v) = stack.pop() {
                for &w in &self.adjacency[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        count
    }

    /// Dense Laplacian, `D − A` or `I − D^{-1/2} A D^{-1/2}`.
    pub fn laplacian(&self, normalized: bool) -> Matrix {
        let n = self.n();
        let mut l = Matrix::zeros(n, n);
        let inv_sqrt = self.inv_sqrt_degrees();
        for i in 0..n {
            if normalized {
                l[(i, i)] = if self.degree(i) > 0 { 1.0 } else { 0.0 };
            } else {
                l[(i, i)] = self.degree(i) as f64;
            }
            for &j in &self.adjacency[i] {
                l[(i, j)] = if normalized { -inv_sqrt[i] * inv_sqrt[j] } else { -1.0 };
            }
        }
        l
    }

    fn inv_sqrt_degrees(&self) -> Vec<f64> {
        (0..self.n()).map(|i| if self.degree(i) > 0 { 1.0 / (self.degree(i) as f64).sqrt() } else { 0.0 }).collect()
    }

    /// `L v` without forming `L`.
    pub fn apply_laplacian(&self, normalized: bool, v: &[f64]) -> Vec<f64> {
        let inv_sqrt = self.inv_sqrt_degrees();
        par::map_indices(self.n(), |i| {
            let adj = &self.adjacency[i];
            if normalized {
                let s: f64 = adj.iter().map(|&j| inv_sqrt[j] * v[j]).sum();
                let diag = if adj.is_empty() { 0.0 } else { v[i] };
                diag - inv_sqrt[i] * s
            } else {
                adj.len() as f64 * v[i] - adj.iter().map(|&j| v[j]).sum::<f64>()
            }
        })
    }

    /// Unit vector spanning the null space of a connected graph's Laplacian.
    fn null_vector(&self, normalized: bool) -> Vec<f64> {
        let mut v: Vec<f64> =
            (0..self.n()).map(|i| if normalized { (self.degree(i) as f64).sqrt() } else { 1.0 }).collect();
        let nv = norm(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        v
    }
}

/// Union-symmetrized kNN graph: `i ~ j` iff either lists the other.
pub fn knn_graph(table: &NeighborTable) -> Graph {
    let n = table.n();
    let mut edges = Vec::with_capacity(n * table.k());
    for i in 0..n {
        edges.extend(table.indices(i).iter().map(|&j| (i, j)));
    }
    Graph::from_edges(n, &edges).expect("table indices are in range")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    /// `n × out_dims`, one column per eigenvector.
    pub coords: Matrix,
    /// Eigenvalues of the returned columns, ascending.
    pub eigenvalues: Vec<f64>,
}

/// Coordinates from the eigenvectors of the `out_dims` smallest nonzero
/// Laplacian eigenvalues, each signed so its largest-magnitude entry is
/// positive.
pub fn spectral_embedding(graph: &Graph, out_dims: usize, normalized: bool) -> Result<Embedding> {
    spectral_embedding_with(graph, out_dims, normalized, DENSE_LIMIT)
}

/// As [`spectral_embedding`], choosing the dense solver up to `dense_limit`
/// nodes.
pub fn spectral_embedding_with(graph: &Graph, out_dims: usize, normalized: bool, dense_limit: usize) -> Result<Embedding> {
    let n = graph.n();
    if out_dims == 0 || out_dims >= n {
        return Err(Error::BadParameters("out_dims must lie in [1, n-1]"));
    }
    let components = graph.components();
    if components != 1 {
        return Err(Error::DisconnectedGraph { components });
    }
    let (eigenvalues, mut vectors) = if n <= dense_limit {
        dense_smallest(graph, out_dims, normalized)?
    } else {
        lanczos_smallest(graph, out_dims, normalized)?
    };
    for v in &mut vectors {
        fix_sign(v);
    }
    let mut coords = Matrix::zeros(n, out_dims);
    for (c, v) in vectors.iter().enumerate() {
        for (i, x) in v.iter().enumerate() {
            coords[(i, c)] = *x;
        }
    }
    Ok(Embedding { coords, eigenvalues })
}

fn fix_sign(v: &mut [f64]) {
    let mut at = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[at].abs() {
            at = i;
        }
    }
    if v[at] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

type Pairs = (Vec<f64>, Vec<Vec<f64>>);

fn dense_smallest(graph: &Graph, out_dims: usize, normalized: bool) -> Result<Pairs> {
    let n = graph.n();
    let eig = symmetric_eigen(&graph.laplacian(normalized))?;
    // Descending order: the null eigenvalue is last; take the ones above it.
    let picks: Vec<usize> = (0..out_dims).map(|j| n - 2 - j).collect();
    let values = picks.iter().map(|&c| eig.values[c]).collect();
    let vectors = picks.iter().map(|&c| eig.vectors.column(c)).collect();
    Ok((values, vectors))
}

fn orthogonalize_against(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, v);
            v.iter_mut().zip(q).for_each(|(x, qi)| *x -= c * qi);
        }
    }
}

fn lanczos_smallest(graph: &Graph, out_dims: usize, normalized: bool) -> Result<Pairs> {
    let n = graph.n();
    let null = graph.null_vector(normalized);
    // Gershgorin: spectrum of L lies in [0, 2·max degree] (or [0, 2]).
    let max_degree = (0..n).map(|i| graph.degree(i)).max().unwrap_or(0) as f64;
    let shift = if normalized { 2.0 } else { 2.0 * max_degree };
    let apply_shifted = |v: &[f64]| -> Vec<f64> {
        graph.apply_laplacian(normalized, v).iter().zip(v).map(|(lv, x)| shift * x - lv).collect()
    };

    let mut rng = substream(0x5eed, 0);
    let mut q: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let deflated = [null];
    orthogonalize_against(&mut q, &deflated);
    let qn = norm(&q);
    q.iter_mut().for_each(|x| *x /= qn);

    let max_steps = n - 1;
    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut next_check = (4 * out_dims + 40).min(max_steps);

    loop {
        let m = basis.len();
        let mut w = apply_shifted(&basis[m - 1]);
        let alpha = dot(&w, &basis[m - 1]);
        alphas.push(alpha);
        // The null vector is the dominant direction of σI − L, so round-off
        // along it grows fastest; project it out last.
        orthogonalize_against(&mut w, &basis);
        orthogonalize_against(&mut w, &deflated);
        let beta = norm(&w);
        let exhausted = !(beta > 1e-12) || m >= max_steps;

        if m >= next_check || exhausted {
            let mut t = Matrix::zeros(m, m);
            for i in 0..m {
                t[(i, i)] = alphas[i];
                if i + 1 < m {
                    t[(i, i + 1)] = betas[i];
                    t[(i + 1, i)] = betas[i];
                }
            }
            let eig = symmetric_eigen(&t)?;
            if m >= out_dims {
                let mut values = Vec::with_capacity(out_dims);
                let mut vectors = Vec::with_capacity(out_dims);
                let mut ok = true;
                for c in 0..out_dims {
                    let mut v = vec![0.0; n];
                    for (j, bj) in basis.iter().enumerate() {
                        let s = eig.vectors[(j, c)];
                        v.iter_mut().zip(bj).for_each(|(x, b)| *x += s * b);
                    }
                    let vn = norm(&v);
                    v.iter_mut().for_each(|x| *x /= vn);
                    let lv = graph.apply_laplacian(normalized, &v);
                    let mu = dot(&lv, &v);
                    let res = lv.iter().zip(&v).map(|(a, b)| (a - mu * b).powi(2)).sum::<f64>().sqrt();
                    if res > RESIDUAL_TOLERANCE {
                        ok = false;
                        break;
                    }
                    values.push(mu);
                    vectors.push(v);
                }
                if ok {
                    return Ok((values, vectors));
                }
            }
            if exhausted {
                return Err(Error::EigenSolverFailed);
            }
            next_check = (next_check + next_check / 2).min(max_steps);
        }
        betas.push(beta);
        w.iter_mut().for_each(|x| *x /= beta);
        basis.push(w);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> Graph {
        let edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        Graph::from_edges(n, &edges).unwrap()
    }

    fn complete(n: usize) -> Graph {
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                edges.push((a, b));
            }
        }
        Graph::from_edges(n, &edges).unwrap()
    }

    #[test]
    fn complete_graph_spectrum() {
        let e = spectral_embedding(&complete(5), 4, false).unwrap();
        for v in e.eigenvalues {
            assert!((v - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_cliques_are_disconnected() {
        let mut edges = Vec::new();
        for base in [0, 4] {
            for a in 0..4 {
                for b in a + 1..4 {
                    edges.push((base + a, base + b));
                }
            }
        }
        let g = Graph::from_edges(8, &edges).unwrap();
        assert_eq!(spectral_embedding(&g, 1, true), Err(Error::DisconnectedGraph { components: 2 }));
    }

    #[test]
    fn laplacian_rows_sum_to_zero() {
        let g = path(7);
        let l = g.laplacian(false);
        for i in 0..7 {
            assert!(l.row(i).iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn path_fiedler_vector_is_monotone() {
        let e = spectral_embedding(&path(10), 1, false).unwrap();
        let c = e.coords.column(0);
        let increasing = c.windows(2).all(|w| w[1] > w[0]);
        let decreasing = c.windows(2).all(|w| w[1] < w[0]);
        assert!(increasing || decreasing);
        // λ₂ of the path P_n is 2 − 2cos(π/n).
        assert!((e.eigenvalues[0] - (2.0 - 2.0 * (core::f64::consts::PI / 10.0).cos())).abs() < 1e-12);
    }

    #[test]
    fn lanczos_agrees_with_dense() {
        let mut edges: Vec<(usize, usize)> = (0..59).map(|i| (i, i + 1)).collect();
        edges.extend((0..50).map(|i| (i, (i * 7 + 3) % 60)));
        let g = Graph::from_edges(60, &edges).unwrap();
        for normalized in [false, true] {
            let dense = spectral_embedding_with(&g, 3, normalized, usize::MAX).unwrap();
            let iterative = spectral_embedding_with(&g, 3, normalized, 0).unwrap();
            for (a, b) in dense.eigenvalues.iter().zip(&iterative.eigenvalues) {
                assert!((a - b).abs() < 1e-9, "{a} {b}");
            }
        }
    }

    #[test]
    fn bad_dims() {
        assert!(spectral_embedding(&path(4), 0, false).is_err());
        assert!(spectral_embedding(&path(4), 4, false).is_err());
    }
}
