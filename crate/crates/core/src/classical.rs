//! Three independent classical routes to β_k^i and β_k^{i,j}: GF(2) persistence
//! column reduction, the kernel/image rank formula, and Laplacian kernels
//! (exact rank or deflated power iteration).

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::boundary::{self, boundary_int_of, check_nested, FieldTag, LaplacianBundle};
use crate::complex::{build_clique_complex, CliqueComplex, DistanceMatrix, FiltrationSchedule, Simplex};
use crate::error::{QtdaError, Result};
use crate::exact::{self, IntMatrix};

/// One persistence interval.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PersistencePair {
    pub k: usize,
    pub birth: usize,
    /// `None` for essential classes.
    pub death: Option<usize>,
    pub creator: Simplex,
    pub destroyer: Option<Simplex>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersistencePairing {
    pub pairs: Vec<PersistencePair>,
    pub k_max: usize,
    pub scales: Vec<f64>,
}

impl PersistencePairing {
    /// #{pairs of dimension k with birth ≤ i and death > j}.
    pub fn betti(&self, i: usize, j: usize, k: usize) -> usize {
        self.pairs
            .iter()
            .filter(|p| p.k == k && p.birth <= i && p.death.is_none_or(|d| d > j))
            .count()
    }

    /// `k,birth_scale,death_scale` rows, zero-length intervals omitted.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,birth_scale,death_scale\n");
        for p in &self.pairs {
            if p.death == Some(p.birth) {
                continue;
            }
            let death = match p.death {
                Some(d) => format!("{:.9}", self.scales[d]),
                None => "inf".into(),
            };
            out.push_str(&format!("{},{:.9},{}\n", p.k, self.scales[p.birth], death));
        }
        out
    }
}

/// Scale index at which a simplex enters the filtration.
pub fn entry_scale(s: &[usize], dm: &DistanceMatrix, schedule: &FiltrationSchedule) -> usize {
    let mut worst = 0u64;
    for a in 0..s.len() {
        for b in a + 1..s.len() {
            worst = worst.max(dm.sq_raw(s[a], s[b]));
        }
    }
    schedule.entry_index(worst)
}

/// Standard left-to-right GF(2) reduction of the full filtration boundary matrix,
/// ordered by (entry scale, dimension, lexicographic tuple).
pub fn persistence_column_reduction(
    schedule: &FiltrationSchedule,
    dm: &DistanceMatrix,
    k_max: usize,
) -> Result<PersistencePairing> {
    let scales = schedule.mus();
    if schedule.is_empty() || dm.n() == 0 {
        return Ok(PersistencePairing {
            pairs: Vec::new(),
            k_max,
            scales,
        });
    }
    let top = build_clique_complex(dm, schedule, schedule.len() - 1, k_max.min(dm.n() - 1))?;
    let mut order: Vec<(usize, usize, Simplex)> = Vec::new();
    for dim in 0..=top.top_dim() {
        for s in top.simplices(dim) {
            order.push((entry_scale(s, dm, schedule), dim, s.clone()));
        }
    }
    order.sort();
    let mut pos: BTreeMap<&[usize], usize> = BTreeMap::new();
    for (idx, (_, _, s)) in order.iter().enumerate() {
        pos.insert(s.as_slice(), idx);
    }
    let n = order.len();
    let mut low_owner: Vec<Option<usize>> = vec![None; n];
    let mut paired = vec![false; n];
    let mut reduced: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut pairs = Vec::new();
    for col in 0..n {
        let (_, dim, s) = &order[col];
        if *dim == 0 {
            continue;
        }
        let mut column: Vec<usize> = (0..s.len())
            .map(|l| {
                let mut f = s.clone();
                f.remove(l);
                pos[f.as_slice()]
            })
            .collect();
        column.sort_unstable();
        while let Some(&low) = column.last() {
            match low_owner[low] {
                Some(other) => column = sym_diff(&column, &reduced[other]),
                None => break,
            }
        }
        if let Some(&low) = column.last() {
            low_owner[low] = Some(col);
            paired[low] = true;
            paired[col] = true;
            reduced[col] = column;
            let (birth, bdim, creator) = &order[low];
            if *bdim <= k_max {
                pairs.push(PersistencePair {
                    k: *bdim,
                    birth: *birth,
                    death: Some(order[col].0),
                    creator: creator.clone(),
                    destroyer: Some(s.clone()),
                });
            }
        }
    }
    for idx in 0..n {
        let (birth, dim, s) = &order[idx];
        if !paired[idx] && *dim <= k_max {
            pairs.push(PersistencePair {
                k: *dim,
                birth: *birth,
                death: None,
                creator: s.clone(),
                destroyer: None,
            });
        }
    }
    pairs.sort_by(|a, b| {
        (a.k, a.birth, a.death.unwrap_or(usize::MAX), &a.creator).cmp(&(
            b.k,
            b.birth,
            b.death.unwrap_or(usize::MAX),
            &b.creator,
        ))
    });
    Ok(PersistencePairing { pairs, k_max, scales })
}

fn sym_diff(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut x, mut y) = (0, 0);
    while x < a.len() && y < b.len() {
        match a[x].cmp(&b[y]) {
            std::cmp::Ordering::Less => {
                out.push(a[x]);
                x += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[y]);
                y += 1;
            }
            std::cmp::Ordering::Equal => {
                x += 1;
                y += 1;
            }
        }
    }
    out.extend_from_slice(&a[x..]);
    out.extend_from_slice(&b[y..]);
    out
}

/// (i, j, k) ↦ β_k^{i,j}; diagonal entries are ordinary Betti numbers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BettiTable {
    pub entries: BTreeMap<(usize, usize, usize), usize>,
}

impl BettiTable {
    pub fn insert(&mut self, i: usize, j: usize, k: usize, beta: usize) {
        self.entries.insert((i, j, k), beta);
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> Option<usize> {
        self.entries.get(&(i, j, k)).copied()
    }

    pub fn from_pairing(p: &PersistencePairing, scale_pairs: &[(usize, usize)], k_max: usize) -> Self {
        let mut t = BettiTable::default();
        for &(i, j) in scale_pairs {
            for k in 0..=k_max {
                t.insert(i, j, k, p.betti(i, j, k));
            }
        }
        t
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let entries: Vec<_> = self
            .entries
            .iter()
            .map(|(&(i, j, k), &beta)| serde_json::json!({"i": i, "j": j, "k": k, "beta": beta}))
            .collect();
        serde_json::json!({ "entries": entries })
    }
}

fn rank_of(cx: &CliqueComplex, k: usize, field: FieldTag) -> Result<usize> {
    Ok(boundary::rank_over(&boundary_int_of(cx, k)?, field))
}

/// β_k = (|S_k| − rank ∂_k) − rank ∂_{k+1} over the rationals.
pub fn betti_rank_formula(cx: &CliqueComplex, k: usize) -> Result<usize> {
    betti_rank_formula_over(cx, k, FieldTag::Rational)
}

pub fn betti_rank_formula_over(cx: &CliqueComplex, k: usize, field: FieldTag) -> Result<usize> {
    if k + 1 > cx.top_dim() {
        return Err(QtdaError::InvalidArgument(format!(
            "complex must be materialized to dimension {}",
            k + 1
        )));
    }
    let kernel = cx.count(k) - rank_of(cx, k, field)?;
    Ok(kernel - rank_of(cx, k + 1, field)?)
}

/// Basis of Ker ∂_k^i written in S_k^j coordinates, as integer columns.
fn kernel_basis_padded(cx_i: &CliqueComplex, cx_j: &CliqueComplex, k: usize, field: FieldTag) -> Result<IntMatrix> {
    let d = boundary_int_of(cx_i, k)?;
    let basis: Vec<Vec<i64>> = match field {
        FieldTag::Gf2 => exact::nullspace_mod_p(&d, 2)
            .into_iter()
            .map(|v| v.into_iter().map(|x| x as i64).collect())
            .collect(),
        FieldTag::Gfp(p) => exact::nullspace_mod_p(&d, p)
            .into_iter()
            .map(|v| v.into_iter().map(|x| x as i64).collect())
            .collect(),
        FieldTag::Rational | FieldTag::Real => exact::nullspace_q(&d)?,
    };
    let sk_i = cx_i.simplices(k);
    let rows: Vec<usize> = sk_i
        .iter()
        .map(|s| cx_j.index_of(s).expect("nested complexes share simplices"))
        .collect();
    let mut m = IntMatrix::zeros(cx_j.count(k), basis.len());
    for (c, v) in basis.iter().enumerate() {
        for (r, &x) in v.iter().enumerate() {
            m.set(rows[r], c, x);
        }
    }
    Ok(m)
}

/// Pieces of the kernel/image rank identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RankFormulaParts {
    pub dim_ker: usize,
    pub rank_im: usize,
    pub dim_intersection: usize,
    pub beta: usize,
}

/// dim(U ∩ V) = dim U + dim V − rank[basis(U) | basis(V)] with U = Ker ∂_k^i
/// (padded into S^j) and V = Im ∂_{k+1}^j.
pub fn persistent_rank_parts(
    cx_i: &CliqueComplex,
    cx_j: &CliqueComplex,
    k: usize,
    field: FieldTag,
) -> Result<RankFormulaParts> {
    check_nested(cx_i, cx_j)?;
    if k + 1 > cx_j.top_dim() {
        return Err(QtdaError::InvalidArgument(format!(
            "outer complex must be materialized to dimension {}",
            k + 1
        )));
    }
    let kb = kernel_basis_padded(cx_i, cx_j, k, field)?;
    let b = boundary_int_of(cx_j, k + 1)?;
    let dim_ker = kb.cols;
    let rank_im = boundary::rank_over(&b, field);
    let joint = boundary::rank_over(&kb.hcat(&b), field);
    let dim_intersection = dim_ker + rank_im - joint;
    Ok(RankFormulaParts {
        dim_ker,
        rank_im,
        dim_intersection,
        beta: dim_ker - dim_intersection,
    })
}

pub fn persistent_betti_rank_formula(cx_i: &CliqueComplex, cx_j: &CliqueComplex, k: usize) -> Result<usize> {
    Ok(persistent_rank_parts(cx_i, cx_j, k, FieldTag::Rational)?.beta)
}

pub fn persistent_betti_rank_formula_over(
    cx_i: &CliqueComplex,
    cx_j: &CliqueComplex,
    k: usize,
    field: FieldTag,
) -> Result<usize> {
    Ok(persistent_rank_parts(cx_i, cx_j, k, field)?.beta)
}

/// The same persistent Betti number over several fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldComparison {
    pub rational: usize,
    pub gf2: usize,
    pub gf3: usize,
    /// True when any field disagrees with the rationals.
    pub torsion: bool,
}

pub fn compare_fields(cx_i: &CliqueComplex, cx_j: &CliqueComplex, k: usize) -> Result<FieldComparison> {
    let rational = persistent_betti_rank_formula_over(cx_i, cx_j, k, FieldTag::Rational)?;
    let gf2 = persistent_betti_rank_formula_over(cx_i, cx_j, k, FieldTag::Gf2)?;
    let gf3 = persistent_betti_rank_formula_over(cx_i, cx_j, k, FieldTag::Gfp(3))?;
    Ok(FieldComparison {
        rational,
        gf2,
        gf3,
        torsion: gf2 != rational || gf3 != rational,
    })
}

/// Outcome of the deflated power iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerMethodOutcome {
    pub kernel_dim: usize,
    pub matvecs: usize,
    pub shift: f64,
}

pub const POWER_REL_TOL: f64 = 1e-10;
pub const POWER_MIN_ITER: usize = 20_000;

/// Default iteration cap: 10·|S_k| with a floor of [`POWER_MIN_ITER`].
pub fn default_power_max_iter(dim: usize) -> usize {
    (10 * dim).max(POWER_MIN_ITER)
}

/// Count eigenvalues of Δ below `tol` by extracting the top eigenvectors of
/// λ_up·I − Δ one at a time (λ_up a Gershgorin bound).
pub fn betti_power_method(l: &LaplacianBundle, tol: f64, max_iter: usize, seed: u64) -> Result<PowerMethodOutcome> {
    let n = l.dim();
    let delta = &l.delta;
    let shift = (0..n)
        .map(|r| delta.row(r).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    if n == 0 {
        return Ok(PowerMethodOutcome {
            kernel_dim: 0,
            matvecs: 0,
            shift,
        });
    }
    if shift == 0.0 {
        return Ok(PowerMethodOutcome {
            kernel_dim: n,
            matvecs: 0,
            shift,
        });
    }
    let m = nalgebra::DMatrix::<f64>::identity(n, n) * shift - delta;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut found: Vec<DVector<f64>> = Vec::new();
    let mut matvecs = 0usize;
    let orth = |v: &mut DVector<f64>, found: &[DVector<f64>]| {
        for _ in 0..2 {
            for u in found {
                let c = u.dot(v);
                v.axpy(-c, u, 1.0);
            }
        }
    };
    while found.len() < n {
        let mut v = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        orth(&mut v, &found);
        let norm = v.norm();
        if norm < 1e-300 {
            break;
        }
        v /= norm;
        let mut rho_prev = f64::NAN;
        let mut converged = false;
        let mut rho = 0.0;
        for _ in 0..max_iter {
            let mut w = &m * &v;
            matvecs += 1;
            rho = v.dot(&w);
            orth(&mut w, &found);
            let wn = w.norm();
            if wn <= 1e-12 * shift {
                // Remaining space sits at eigenvalue λ_up of Δ, far from the kernel.
                converged = true;
                rho = 0.0;
                break;
            }
            v = w / wn;
            if rho_prev.is_finite() && (rho - rho_prev).abs() <= POWER_REL_TOL * rho.abs().max(1e-300) {
                converged = true;
                break;
            }
            rho_prev = rho;
        }
        if !converged {
            return Err(QtdaError::NonConvergence(max_iter));
        }
        if rho >= shift - tol {
            found.push(v);
        } else {
            break;
        }
    }
    Ok(PowerMethodOutcome {
        kernel_dim: found.len(),
        matvecs,
        shift,
    })
}

/// dim ker Δ_k^{i,j} (exact rank on the integer Laplacian).
pub fn persistent_betti_via_laplacian(cx_i: &CliqueComplex, cx_j: &CliqueComplex, k: usize) -> Result<usize> {
    Ok(boundary::persistent_laplacian(cx_i, cx_j, k)?.kernel_dim())
}

/// dim ker of the Schur-complement Laplacian (spectral count).
pub fn persistent_betti_via_schur(cx_i: &CliqueComplex, cx_j: &CliqueComplex, k: usize) -> Result<usize> {
    Ok(boundary::persistent_laplacian_schur(cx_i, cx_j, k)?.kernel_dim_spectral(1e-8))
}

/// Per-instance comparison of the three engines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Agreement {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub column_reduction: usize,
    pub rank_formula: usize,
    pub laplacian: usize,
    pub torsion: bool,
}

impl Agreement {
    pub fn agrees(&self) -> bool {
        self.column_reduction == self.rank_formula && self.rank_formula == self.laplacian
    }
}

/// Run all three engines on the requested scale pairs and dimensions.
pub fn triple_check(
    dm: &DistanceMatrix,
    schedule: &FiltrationSchedule,
    scale_pairs: &[(usize, usize)],
    k_max: usize,
) -> Result<Vec<Agreement>> {
    if dm.n() == 0 {
        return Ok(Vec::new());
    }
    let k_cap = k_max.min(dm.n() - 1);
    let pairing = persistence_column_reduction(schedule, dm, k_cap)?;
    let mut cache: BTreeMap<usize, CliqueComplex> = BTreeMap::new();
    let mut out = Vec::new();
    for &(i, j) in scale_pairs {
        for idx in [i, j] {
            if let std::collections::btree_map::Entry::Vacant(e) = cache.entry(idx) {
                e.insert(build_clique_complex(dm, schedule, idx, k_cap)?);
            }
        }
        for k in 0..=k_cap {
            let (ci, cj) = (&cache[&i], &cache[&j]);
            if k + 1 > cj.top_dim() {
                continue;
            }
            let fc = compare_fields(ci, cj, k)?;
            out.push(Agreement {
                i,
                j,
                k,
                column_reduction: pairing.betti(i, j, k),
                rank_formula: fc.rational,
                laplacian: persistent_betti_via_laplacian(ci, cj, k)?,
                torsion: fc.torsion,
            });
        }
    }
    Ok(out)
}
