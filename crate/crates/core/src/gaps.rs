//! Spectral gap parameters that drive the quantum cost, empirical gap sweeps
//! over random complexes, the Zeno counterexample and harmonic representatives.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::boundary::{boundary_int_of, check_nested, combinatorial_laplacian, int_to_dmatrix, persistent_laplacian};
use crate::classical::persistent_rank_parts;
use crate::boundary::FieldTag;
use crate::complex::{
    build_clique_complex_at, filtration_scales, pairwise_distances, CliqueComplex, DistanceMatrix, FixedPoint,
    PointCloud,
};
use crate::error::{QtdaError, Result};
use crate::exact::nullspace_q;
use crate::fixtures;

/// Relative split between zero and nonzero singular values.
pub const ZERO_SPLIT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct GapReport {
    /// Smallest nonzero singular value of ∂_k^i; absent when the operator is zero.
    pub lambda_dk_i: Option<f64>,
    /// Smallest nonzero singular value of ∂_{k+1}^j.
    pub lambda_dk1_j: Option<f64>,
    pub lambda_pipi: Option<f64>,
    /// Smallest nonzero eigenvalue of the persistent Laplacian Δ_k^{i,j}.
    pub lambda_laplacian: Option<f64>,
}

/// Singular values of `m` (empty for a matrix with a zero dimension).
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    m.clone().svd(false, false).singular_values.iter().copied().collect()
}

/// Values above `rel_tol` times the largest one.
pub fn nonzero_split(values: &[f64], rel_tol: f64) -> Vec<f64> {
    let top = values.iter().copied().fold(0.0f64, f64::max);
    if top == 0.0 {
        return Vec::new();
    }
    values.iter().copied().filter(|&s| s > rel_tol * top).collect()
}

pub fn smallest_nonzero_singular(m: &DMatrix<f64>, rel_tol: f64) -> Option<f64> {
    nonzero_split(&singular_values(m), rel_tol).into_iter().reduce(f64::min)
}

/// Right singular pairs (σ_l, v_l) of `m`, one per column: v_l are the
/// eigenvectors of mᵀm and σ_l = ‖m v_l‖, so kernel vectors come out with σ at
/// rounding level. nalgebra's SVD vectors are not used; on small rank-deficient
/// integer matrices they can be off by 1e-2.
pub fn right_singular_pairs(m: &DMatrix<f64>) -> (Vec<f64>, Vec<DVector<f64>>) {
    if m.nrows() == 0 || m.ncols() == 0 {
        return (Vec::new(), Vec::new());
    }
    let eig = (m.transpose() * m).symmetric_eigen();
    let vs: Vec<DVector<f64>> = (0..m.ncols()).map(|c| eig.eigenvectors.column(c).into_owned()).collect();
    let sv = vs.iter().map(|v| (m * v).norm()).collect();
    (sv, vs)
}

/// Orthogonal projector onto Ker m (right null space), split at `rel_tol`.
pub fn ideal_kernel_projector(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = m.ncols();
    let (sv, vs) = right_singular_pairs(m);
    let top = sv.iter().copied().fold(0.0f64, f64::max);
    let mut p = DMatrix::identity(n, n);
    for (s, v) in sv.iter().zip(&vs) {
        if top > 0.0 && *s > rel_tol * top {
            p -= v * v.transpose();
        }
    }
    p
}

/// Orthogonal projector onto the column space of `m`.
pub fn ideal_image_projector(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = m.nrows();
    let mut p = DMatrix::zeros(n, n);
    let (sv, vs) = right_singular_pairs(&m.transpose());
    let top = sv.iter().copied().fold(0.0f64, f64::max);
    for (s, v) in sv.iter().zip(&vs) {
        if top > 0.0 && *s > rel_tol * top {
            p += v * v.transpose();
        }
    }
    p
}

/// Positions of S_k^i inside S_k^j (both sorted).
pub fn embedding(cx_i: &CliqueComplex, cx_j: &CliqueComplex, k: usize) -> Result<Vec<usize>> {
    cx_i.simplices(k)
        .iter()
        .map(|s| {
            cx_j.index_of(s)
                .ok_or_else(|| QtdaError::NotNested(format!("{} missing at the outer scale", cx_i.label(s))))
        })
        .collect()
}

/// Zero-pad a projector on ⟨S_k^i⟩ into ⟨S_k^j⟩.
pub fn pad(p: &DMatrix<f64>, emb: &[usize], dim: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(dim, dim);
    for (a, &ra) in emb.iter().enumerate() {
        for (b, &rb) in emb.iter().enumerate() {
            out[(ra, rb)] = p[(a, b)];
        }
    }
    out
}

pub fn boundary_gaps(cx_i: &CliqueComplex, cx_j: &CliqueComplex, k: usize) -> Result<GapReport> {
    check_nested(cx_i, cx_j)?;
    let dk = int_to_dmatrix(&boundary_int_of(cx_i, k)?);
    let dk1 = int_to_dmatrix(&boundary_int_of(cx_j, k + 1)?);
    Ok(GapReport {
        lambda_dk_i: smallest_nonzero_singular(&dk, ZERO_SPLIT),
        lambda_dk1_j: smallest_nonzero_singular(&dk1, ZERO_SPLIT),
        ..GapReport::default()
    })
}

/// Singular values of Π_Ker(∂_k^i)·Π_Im(∂_{k+1}^j) in the S_k^j basis.
pub fn pi_pi_singular_values(cx_i: &CliqueComplex, cx_j: &CliqueComplex, k: usize) -> Result<Vec<f64>> {
    check_nested(cx_i, cx_j)?;
    let dk = int_to_dmatrix(&boundary_int_of(cx_i, k)?);
    let dk1 = int_to_dmatrix(&boundary_int_of(cx_j, k + 1)?);
    let emb = embedding(cx_i, cx_j, k)?;
    let pk = pad(&ideal_kernel_projector(&dk, ZERO_SPLIT), &emb, cx_j.count(k));
    let pi = ideal_image_projector(&dk1, ZERO_SPLIT);
    Ok(singular_values(&(pk * pi)))
}

/// Λ_ΠΠ = 1 − max{σ : σ(Π_Ker Π_Im) strictly between 0 and 1}, or 1 if none.
pub fn pi_pi_gap(cx_i: &CliqueComplex, cx_j: &CliqueComplex, k: usize) -> Result<f64> {
    Ok(pi_pi_gap_from(&pi_pi_singular_values(cx_i, cx_j, k)?))
}

pub fn pi_pi_gap_from(sv: &[f64]) -> f64 {
    sv.iter()
        .copied()
        .filter(|&s| s > ZERO_SPLIT && s < 1.0 - ZERO_SPLIT)
        .reduce(f64::max)
        .map_or(1.0, |s| 1.0 - s)
}

pub fn laplacian_gap(cx_i: &CliqueComplex, cx_j: &CliqueComplex, k: usize) -> Result<Option<f64>> {
    let l = persistent_laplacian(cx_i, cx_j, k)?;
    if l.dim() == 0 {
        return Ok(None);
    }
    let eig: Vec<f64> = l.delta.symmetric_eigen().eigenvalues.iter().copied().collect();
    Ok(nonzero_split(&eig, ZERO_SPLIT).into_iter().reduce(f64::min))
}

/// Every gap the cost model needs for the pair (i, j) in dimension k.
pub fn gap_report(cx_i: &CliqueComplex, cx_j: &CliqueComplex, k: usize) -> Result<GapReport> {
    let mut r = boundary_gaps(cx_i, cx_j, k)?;
    r.lambda_pipi = Some(pi_pi_gap(cx_i, cx_j, k)?);
    r.lambda_laplacian = laplacian_gap(cx_i, cx_j, k)?;
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepGenerator {
    /// Uniform points in the unit square; scales at the 30th and 50th
    /// percentile of pairwise distances.
    RandomGeometric,
    /// Erdős–Rényi graph at μ = 1 (edge probability 1/2), half of the
    /// remaining pairs added at μ = √2.
    RandomGraph,
}

impl std::str::FromStr for SweepGenerator {
    type Err = QtdaError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random-geometric" | "geometric" => Ok(SweepGenerator::RandomGeometric),
            "random-graph" | "graph" => Ok(SweepGenerator::RandomGraph),
            other => Err(QtdaError::InvalidArgument(format!("unknown sweep generator {other:?}"))),
        }
    }
}

pub const GRAPH_EDGE_PROBABILITY: f64 = 0.5;
const GEOMETRIC_PERCENTILES: (f64, f64) = (0.3, 0.5);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub k: usize,
    pub trial: usize,
    /// Inner scale μ_i.
    pub mu: f64,
    pub mu_j: f64,
    pub s_k: usize,
    pub gaps: GapReport,
    pub beta: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSkip {
    pub n: usize,
    pub trial: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub generator: SweepGenerator,
    pub k: usize,
    pub seed: u64,
    pub rows: Vec<SweepRow>,
    pub skipped: Vec<SweepSkip>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quartiles {
    pub n: usize,
    pub field: &'static str,
    pub count: usize,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

pub const SWEEP_HEADER: &str = "N,k,trial,mu,S_k,lambda_dk,lambda_dk1,lambda_pipi,lambda_lap,beta";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.12e}")).unwrap_or_default()
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SWEEP_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.9},{},{},{},{},{},{}\n",
                r.n,
                r.k,
                r.trial,
                r.mu,
                r.s_k,
                opt(r.gaps.lambda_dk_i),
                opt(r.gaps.lambda_dk1_j),
                opt(r.gaps.lambda_pipi),
                opt(r.gaps.lambda_laplacian),
                r.beta
            ));
        }
        out
    }

    /// Quartiles of each gap field per N, over rows where the field is present.
    pub fn summary(&self) -> Vec<Quartiles> {
        let mut sizes: Vec<usize> = self.rows.iter().map(|r| r.n).collect();
        sizes.dedup();
        let fields: [(&'static str, fn(&GapReport) -> Option<f64>); 4] = [
            ("lambda_dk", |g| g.lambda_dk_i),
            ("lambda_dk1", |g| g.lambda_dk1_j),
            ("lambda_pipi", |g| g.lambda_pipi),
            ("lambda_lap", |g| g.lambda_laplacian),
        ];
        let mut out = Vec::new();
        for &n in &sizes {
            for (name, get) in fields {
                let mut vals: Vec<f64> = self.rows.iter().filter(|r| r.n == n).filter_map(|r| get(&r.gaps)).collect();
                if vals.is_empty() {
                    continue;
                }
                vals.sort_by(f64::total_cmp);
                out.push(Quartiles {
                    n,
                    field: name,
                    count: vals.len(),
                    q1: quantile(&vals, 0.25),
                    median: quantile(&vals, 0.5),
                    q3: quantile(&vals, 0.75),
                });
            }
        }
        out
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Seed for one (N, trial) cell, independent of evaluation order.
pub fn derive_seed(seed: u64, n: usize, trial: usize) -> u64 {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(((n as u64) << 32) | trial as u64);
    rng.random()
}

/// Distance matrix and the two squared thresholds for one sweep cell.
pub fn sweep_instance(generator: SweepGenerator, n: usize, seed: u64) -> Result<(DistanceMatrix, u64, u64)> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    match generator {
        SweepGenerator::RandomGeometric => {
            let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
            let cloud = PointCloud::from_f64(&rows, None, FixedPoint::default())?;
            let dm = pairwise_distances(&cloud)?;
            let mut sq: Vec<u64> = (0..n).flat_map(|a| ((a + 1)..n).map(move |b| (a, b))).map(|(a, b)| dm.sq_raw(a, b)).collect();
            if sq.is_empty() {
                return Err(QtdaError::InvalidArgument("sweep needs at least two points".into()));
            }
            sq.sort_unstable();
            let pick = |p: f64| sq[(p * (sq.len() - 1) as f64).floor() as usize];
            Ok((dm.clone(), pick(GEOMETRIC_PERCENTILES.0), pick(GEOMETRIC_PERCENTILES.1)))
        }
        SweepGenerator::RandomGraph => {
            let mut sq = vec![0u64; n * n];
            for a in 0..n {
                for b in (a + 1)..n {
                    let u: f64 = rng.random();
                    let w = if u < GRAPH_EDGE_PROBABILITY {
                        1
                    } else if u < GRAPH_EDGE_PROBABILITY + (1.0 - GRAPH_EDGE_PROBABILITY) / 2.0 {
                        2
                    } else {
                        3
                    };
                    sq[a * n + b] = w;
                    sq[b * n + a] = w;
                }
            }
            Ok((DistanceMatrix::from_raw(n, sq, 0)?, 1, 2))
        }
    }
}

fn sweep_cell(generator: SweepGenerator, n: usize, k: usize, trial: usize, seed: u64) -> std::result::Result<SweepRow, SweepSkip> {
    let skip = |reason: String| SweepSkip { n, trial, reason };
    let run = || -> Result<Option<SweepRow>> {
        let (dm, sq_i, sq_j) = sweep_instance(generator, n, derive_seed(seed, n, trial))?;
        let schedule = filtration_scales(&dm);
        let mu = |sq: u64| (sq as f64 / 4f64.powi(dm.frac_bits() as i32)).sqrt();
        let k_max = k.min(n.saturating_sub(1));
        let cx_i = build_clique_complex_at(&dm, sq_i, mu(sq_i), schedule.entry_index(sq_i), k_max)?;
        let cx_j = build_clique_complex_at(&dm, sq_j, mu(sq_j), schedule.entry_index(sq_j), k_max)?;
        if cx_i.count(k) == 0 {
            return Ok(None);
        }
        let gaps = gap_report(&cx_i, &cx_j, k)?;
        let beta = persistent_rank_parts(&cx_i, &cx_j, k, FieldTag::Rational)?.beta;
        Ok(Some(SweepRow {
            n,
            k,
            trial,
            mu: mu(sq_i),
            mu_j: mu(sq_j),
            s_k: cx_i.count(k),
            gaps,
            beta,
        }))
    };
    match run() {
        Ok(Some(row)) => Ok(row),
        Ok(None) => Err(skip(format!("empty S_{k}"))),
        Err(e) => Err(skip(e.to_string())),
    }
}

/// Gap statistics over random complexes; cells run in parallel, rows come back
/// ordered by (N, trial).
pub fn gap_scaling_sweep(generator: SweepGenerator, sizes: &[usize], k: usize, trials: usize, seed: u64) -> Result<SweepTable> {
    if let Some(&n) = sizes.iter().find(|&&n| n < 2 || n > 32) {
        return Err(QtdaError::InvalidArgument(format!("sweep size {n} outside 2..=32")));
    }
    let cells: Vec<(usize, usize)> = sizes.iter().flat_map(|&n| (0..trials).map(move |t| (n, t))).collect();
    let results: Vec<_> = cells.par_iter().map(|&(n, t)| sweep_cell(generator, n, k, t, seed)).collect();
    let mut table = SweepTable {
        generator,
        k,
        seed,
        rows: Vec::new(),
        skipped: Vec::new(),
    };
    for r in results {
        match r {
            Ok(row) => table.rows.push(row),
            Err(s) => table.skipped.push(s),
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZenoReport {
    /// S_1^j edge labels, in basis order.
    pub edges: Vec<String>,
    /// Spanning vector of ker Δ_1^j, scaled to integers.
    pub kernel_chain: Vec<i64>,
    /// 3(AB+BC+CD−AD) − ∂_2(ABX) in the same basis.
    pub reference_chain: Vec<i64>,
    pub cosine: f64,
    /// Eigenvalues of Q_0(H(1) − H(0))Q_0 on ker H(0), ascending.
    pub perturbation_eigenvalues: Vec<f64>,
    /// Squared overlaps of the initial hole state with those eigenvectors, descending.
    pub overlaps: Vec<f64>,
    pub overlap_pair: (f64, f64),
}

fn cosine(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.dot(b) / (a.norm() * b.norm())
}

/// Adiabatic path from Δ_1^i to Δ_1^j on the square with apex: the degenerate
/// first-order perturbation splits the initial hole state over two branches.
pub fn zeno_counterexample() -> Result<ZenoReport> {
    let fx = fixtures::square_apex();
    let (cx_i, cx_j) = fx.pair(fixtures::APEX_MU_I, fixtures::apex_mu_j(), 1)?;
    let edges: Vec<String> = cx_j.simplices(1).iter().map(|s| cx_j.label(s)).collect();
    let idx = |name: &str| -> Result<usize> {
        edges
            .iter()
            .position(|e| e == name)
            .ok_or_else(|| QtdaError::InvalidArgument(format!("edge {name} missing from the Zeno complex")))
    };
    let dim = edges.len();

    let lap_j = combinatorial_laplacian(&cx_j, 1)?;
    let kernel = nullspace_q(lap_j.exact.as_ref().expect("exact Laplacian"))?;
    if kernel.len() != 1 {
        return Err(QtdaError::Infeasible(format!("ker Δ_1^j has dimension {}", kernel.len())));
    }
    let mut kernel_chain = kernel[0].clone();
    let g = crate::exact::gcd_slice(&kernel_chain).max(1);
    let sign = if kernel_chain.iter().find(|&&v| v != 0).copied().unwrap_or(1) < 0 { -1 } else { 1 };
    for v in kernel_chain.iter_mut() {
        *v = sign * *v / g;
    }

    // 3(AB+BC+CD−AD) − ∂_2(ABX), with ∂_2(ABX) = BX − AX + AB.
    let mut reference_chain = vec![0i64; dim];
    for (name, c) in [("AB", 3), ("BC", 3), ("CD", 3), ("AD", -3), ("BX", -1), ("AX", 1), ("AB", -1)] {
        reference_chain[idx(name)?] += c;
    }
    let to_vec = |v: &[i64]| DVector::from_iterator(dim, v.iter().map(|&x| x as f64));
    let cos = cosine(&to_vec(&kernel_chain), &to_vec(&reference_chain));

    let emb = embedding(&cx_i, &cx_j, 1)?;
    let h0 = pad(&combinatorial_laplacian(&cx_i, 1)?.delta, &emb, dim);
    let h1 = lap_j.delta.clone();
    let eig0 = h0.clone().symmetric_eigen();
    let cut = ZERO_SPLIT * eig0.eigenvalues.iter().copied().fold(1.0f64, f64::max);
    let zero_cols: Vec<usize> = (0..dim).filter(|&c| eig0.eigenvalues[c].abs() <= cut).collect();
    let q0 = DMatrix::from_fn(dim, zero_cols.len(), |r, c| eig0.eigenvectors[(r, zero_cols[c])]);
    let g_mat = q0.transpose() * (&h1 - &h0) * &q0;
    let g_mat = (&g_mat + g_mat.transpose()) * 0.5;
    let eig_g = g_mat.symmetric_eigen();

    let mut hole = DVector::zeros(dim);
    for (name, c) in [("AB", 0.5), ("BC", 0.5), ("CD", 0.5), ("AD", -0.5)] {
        hole[idx(name)?] = c;
    }
    let mut order: Vec<usize> = (0..eig_g.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig_g.eigenvalues[a].total_cmp(&eig_g.eigenvalues[b]));
    let perturbation_eigenvalues = order.iter().map(|&c| eig_g.eigenvalues[c]).collect();
    let mut overlaps: Vec<f64> = order
        .iter()
        .map(|&c| {
            let u = &q0 * eig_g.eigenvectors.column(c);
            hole.dot(&u).powi(2)
        })
        .collect();
    overlaps.sort_by(|a, b| b.total_cmp(a));
    let pair = (overlaps[0], overlaps.get(1).copied().unwrap_or(0.0));
    Ok(ZenoReport {
        edges,
        kernel_chain,
        reference_chain,
        cosine: cos,
        perturbation_eigenvalues,
        overlaps,
        overlap_pair: pair,
    })
}

/// Orthonormal basis of ker Δ_k, each vector checked against ∂_k and ∂_{k+1}ᵀ.
pub fn harmonic_representative(cx: &CliqueComplex, k: usize) -> Result<Vec<DVector<f64>>> {
    let lap = combinatorial_laplacian(cx, k)?;
    let exact = lap.exact.as_ref().expect("exact Laplacian");
    let dim = lap.dim();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for v in nullspace_q(exact)? {
        let mut u = DVector::from_iterator(dim, v.iter().map(|&x| x as f64));
        for b in &basis {
            let proj = b.dot(&u);
            u -= b * proj;
        }
        let norm = u.norm();
        if norm > 1e-12 {
            basis.push(u / norm);
        }
    }
    let down = int_to_dmatrix(&boundary_int_of(cx, k)?);
    let up = int_to_dmatrix(&boundary_int_of(cx, k + 1)?);
    for v in &basis {
        let r = (&down * v).norm().max((up.transpose() * v).norm());
        if r > 1e-9 {
            return Err(QtdaError::Infeasible(format!("harmonic residual {r:e} above 1e-9")));
        }
    }
    Ok(basis)
}
