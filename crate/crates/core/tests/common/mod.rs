//! Helpers shared by the integration tests: seeded random clouds and
//! brute-force oracles that avoid the library's own code paths.
#![allow(dead_code)]

use nalgebra::DMatrix;
use qtda_core::complex::{FixedPoint, PointCloud};
use qtda_core::fixtures::Fixture;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// N points in [0, 4)^d on a 1/16 grid (ties in distances occur).
pub fn random_cloud(seed: u64, n: usize, d: usize) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(0..64) as f64 / 16.0).collect())
        .collect();
    PointCloud::from_f64(&rows, None, FixedPoint::default()).unwrap()
}

pub fn random_fixture(seed: u64, n: usize, d: usize) -> Fixture {
    Fixture::from_cloud(random_cloud(seed, n, d)).unwrap()
}

/// All increasing subsets of 0..n of the given size.
pub fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize == size {
            out.push((0..n).filter(|v| mask >> v & 1 == 1).collect());
        }
    }
    out.sort();
    out
}

/// Numerical rank by SVD with a relative cutoff.
pub fn svd_rank(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().copied().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > 1e-9 * top.max(1.0)).count()
}

/// Boundary matrix built directly from the alternating-sum definition.
pub fn boundary_oracle(rows: &[Vec<usize>], cols: &[Vec<usize>]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows.len(), cols.len());
    for (c, s) in cols.iter().enumerate() {
        for drop in 0..s.len() {
            let face: Vec<usize> = s.iter().enumerate().filter(|&(i, _)| i != drop).map(|(_, &v)| v).collect();
            if let Some(r) = rows.iter().position(|f| *f == face) {
                m[(r, c)] = if drop % 2 == 0 { 1.0 } else { -1.0 };
            }
        }
    }
    m
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Orthonormal nullspace basis (columns) of a dense matrix, via the Gram eigensystem.
pub fn nullspace(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = m.shape();
    if c == 0 {
        return DMatrix::zeros(0, 0);
    }
    if r == 0 {
        return DMatrix::identity(c, c);
    }
    let gram = m.transpose() * m;
    let eig = gram.symmetric_eigen();
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max).max(1.0);
    let cols: Vec<_> = (0..c)
        .filter(|&i| eig.eigenvalues[i].abs() <= 1e-9 * top)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(c, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// β_k^{i,j} = dim K − dim(K ∩ I) with K = ker ∂_k^i (embedded in C_k^j) and
/// I = im ∂_{k+1}^j, via dim(K ∩ I) = dim K + dim I − dim(K + I).
pub fn persistent_betti_oracle(
    cx_i: &qtda_core::complex::CliqueComplex,
    cx_j: &qtda_core::complex::CliqueComplex,
    k: usize,
) -> usize {
    let rows_i: Vec<Vec<usize>> = if k == 0 { Vec::new() } else { cx_i.simplices(k - 1).to_vec() };
    let dk = boundary_oracle(&rows_i, cx_i.simplices(k));
    let kernel = nullspace(&dk);
    let sj = cx_j.simplices(k);
    let mut padded = DMatrix::zeros(sj.len(), kernel.ncols());
    for (r, s) in cx_i.simplices(k).iter().enumerate() {
        let pos = sj.iter().position(|t| t == s).expect("nested");
        for c in 0..kernel.ncols() {
            padded[(pos, c)] = kernel[(r, c)];
        }
    }
    let upper: Vec<Vec<usize>> = if k < cx_j.top_dim() { cx_j.simplices(k + 1).to_vec() } else { Vec::new() };
    let dk1 = boundary_oracle(sj, &upper);
    let dim_k = kernel.ncols();
    let dim_i = svd_rank(&dk1);
    let joined = if dk1.ncols() == 0 {
        padded.clone()
    } else if padded.ncols() == 0 {
        dk1.clone()
    } else {
        let mut m = DMatrix::zeros(sj.len(), padded.ncols() + dk1.ncols());
        m.view_mut((0, 0), (sj.len(), padded.ncols())).copy_from(&padded);
        m.view_mut((0, padded.ncols()), (sj.len(), dk1.ncols())).copy_from(&dk1);
        m
    };
    let dim_sum = svd_rank(&joined);
    dim_k - (dim_k + dim_i - dim_sum)
}
