//! Boundary matrices, combinatorial Laplacians, the restricted boundary
//! operator and the persistent Laplacian (chain-basis and Schur-complement routes).

use nalgebra::DMatrix;
use serde::Serialize;

use crate::complex::{CliqueComplex, Simplex};
use crate::error::{QtdaError, Result};
use crate::exact::{self, IntMatrix};

/// Coefficient field for rank computations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FieldTag {
    Gf2,
    Gfp(u64),
    Rational,
    Real,
}

impl FieldTag {
    pub fn gfp(p: u64) -> Result<FieldTag> {
        if !exact::is_prime(p) {
            return Err(QtdaError::InvalidArgument(format!("{p} is not prime")));
        }
        Ok(if p == 2 { FieldTag::Gf2 } else { FieldTag::Gfp(p) })
    }

    pub fn name(&self) -> String {
        match self {
            FieldTag::Gf2 => "GF2".into(),
            FieldTag::Gfp(p) => format!("GF{p}"),
            FieldTag::Rational => "Q".into(),
            FieldTag::Real => "R".into(),
        }
    }

    fn modulus(&self) -> Option<u64> {
        match self {
            FieldTag::Gf2 => Some(2),
            FieldTag::Gfp(p) => Some(*p),
            _ => None,
        }
    }

    /// Canonical representative of an integer in this field.
    pub fn reduce(&self, v: i64) -> i64 {
        match self.modulus() {
            Some(p) => exact::reduce_mod(v, p) as i64,
            None => v,
        }
    }
}

/// Exact rank of an integer matrix interpreted over `field`. Real ranks use the
/// rational path, which is exact for integer input.
pub fn rank_over(m: &IntMatrix, field: FieldTag) -> usize {
    match field.modulus() {
        Some(p) => exact::rank_mod_p(m, p),
        None => exact::rank_q(m),
    }
}

/// Coordinate-list matrix with labeled rows and columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSignedMatrix {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub field: FieldTag,
    /// (row, col, value) with values in canonical field representation.
    pub entries: Vec<(usize, usize, i64)>,
}

impl SparseSignedMatrix {
    pub fn from_int(m: &IntMatrix, rows: Vec<String>, cols: Vec<String>, field: FieldTag) -> Self {
        assert_eq!(m.rows, rows.len());
        assert_eq!(m.cols, cols.len());
        let mut entries = Vec::new();
        for c in 0..m.cols {
            for r in 0..m.rows {
                let v = field.reduce(m.get(r, c));
                if v != 0 {
                    entries.push((r, c, v));
                }
            }
        }
        SparseSignedMatrix {
            rows,
            cols,
            field,
            entries,
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.cols.len()
    }

    pub fn to_int(&self) -> IntMatrix {
        let mut m = IntMatrix::zeros(self.nrows(), self.ncols());
        for &(r, c, v) in &self.entries {
            m.set(r, c, v);
        }
        m
    }

    /// Real matrix; residues above p/2 are read as negative integers.
    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows(), self.ncols());
        for &(r, c, v) in &self.entries {
            let v = match self.field.modulus() {
                Some(p) if v as u64 > p / 2 => v - p as i64,
                _ => v,
            };
            m[(r, c)] = v as f64;
        }
        m
    }

    pub fn rank(&self) -> usize {
        rank_over(&self.to_int(), self.field)
    }

    /// Adjoint; over GF(p) this is the plain transpose.
    pub fn transpose(&self) -> SparseSignedMatrix {
        let mut entries: Vec<_> = self.entries.iter().map(|&(r, c, v)| (c, r, v)).collect();
        entries.sort_by_key(|&(r, c, _)| (c, r));
        SparseSignedMatrix {
            rows: self.cols.clone(),
            cols: self.rows.clone(),
            field: self.field,
            entries,
        }
    }

    /// `{"rows":[..],"cols":[..],"field":"Q|GF2|GF3|R","entries":[[r,c,"num/den"],..]}`
    pub fn dump_json(&self) -> String {
        let entries: Vec<(usize, usize, String)> = self
            .entries
            .iter()
            .map(|&(r, c, v)| (r, c, format!("{v}/1")))
            .collect();
        serde_json::to_string(&serde_json::json!({
            "rows": self.rows,
            "cols": self.cols,
            "field": self.field.name(),
            "entries": entries,
        }))
        .expect("matrix serializes")
    }
}

/// Signed incidence of `cols` (k-simplices) against `rows` ((k-1)-simplices).
/// Faces missing from `rows` are dropped.
pub fn boundary_int(rows: &[Simplex], cols: &[Simplex]) -> IntMatrix {
    let mut m = IntMatrix::zeros(rows.len(), cols.len());
    for (c, s) in cols.iter().enumerate() {
        if s.len() < 2 {
            continue;
        }
        for l in 0..s.len() {
            let mut face = s.clone();
            face.remove(l);
            if let Ok(r) = rows.binary_search(&face) {
                m.set(r, c, if l % 2 == 0 { 1 } else { -1 });
            }
        }
    }
    m
}

fn labels_of(cx: &CliqueComplex, simplices: &[Simplex]) -> Vec<String> {
    simplices.iter().map(|s| cx.label(s)).collect()
}

fn require_dim(cx: &CliqueComplex, k: usize) -> Result<()> {
    if k > cx.top_dim() {
        return Err(QtdaError::InvalidArgument(format!(
            "dimension {k} is not materialized (complex built to {})",
            cx.top_dim()
        )));
    }
    Ok(())
}

/// ∂_k as an integer matrix from ⟨S_k⟩ to ⟨S_{k-1}⟩; ∂_0 is the 0×|S_0| zero map.
pub fn boundary_int_of(cx: &CliqueComplex, k: usize) -> Result<IntMatrix> {
    require_dim(cx, k)?;
    if k == 0 {
        return Ok(IntMatrix::zeros(0, cx.count(0)));
    }
    Ok(boundary_int(cx.simplices(k - 1), cx.simplices(k)))
}

pub fn boundary_matrix(cx: &CliqueComplex, k: usize, field: FieldTag) -> Result<SparseSignedMatrix> {
    let m = boundary_int_of(cx, k)?;
    let rows = if k == 0 {
        Vec::new()
    } else {
        labels_of(cx, cx.simplices(k - 1))
    };
    Ok(SparseSignedMatrix::from_int(
        &m,
        rows,
        labels_of(cx, cx.simplices(k)),
        field,
    ))
}

/// Which Laplacian a bundle holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub i: usize,
    pub j: Option<usize>,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianBundle {
    pub delta: DMatrix<f64>,
    /// Integer form when the construction is exact.
    pub exact: Option<IntMatrix>,
    pub provenance: Provenance,
    pub basis: Vec<String>,
}

pub const PSD_TOL: f64 = 1e-9;

impl LaplacianBundle {
    fn from_exact(m: IntMatrix, provenance: Provenance, basis: Vec<String>) -> Self {
        let delta = int_to_dmatrix(&m);
        LaplacianBundle {
            delta,
            exact: Some(m),
            provenance,
            basis,
        }
    }

    pub fn dim(&self) -> usize {
        self.delta.nrows()
    }

    /// Exact nullity when the integer form is available, spectral count otherwise.
    pub fn kernel_dim(&self) -> usize {
        match &self.exact {
            Some(m) => m.rows - exact::rank_q(m),
            None => self.kernel_dim_spectral(1e-9),
        }
    }

    /// Eigenvalues at or below `rel_tol` times the largest eigenvalue (absolute
    /// when the matrix is zero).
    pub fn kernel_dim_spectral(&self, rel_tol: f64) -> usize {
        if self.dim() == 0 {
            return 0;
        }
        let eig = self.delta.clone().symmetric_eigen();
        let top = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        let tol = rel_tol * top.max(1.0);
        eig.eigenvalues.iter().filter(|&&l| l <= tol).count()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        self.delta
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn int_to_dmatrix(m: &IntMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows, m.cols, |r, c| m.get(r, c) as f64)
}

/// Δ_k = ∂_{k+1}∂_{k+1}ᵀ + ∂_kᵀ∂_k on ⟨S_k⟩, exact over the integers.
pub fn combinatorial_laplacian(cx: &CliqueComplex, k: usize) -> Result<LaplacianBundle> {
    require_dim(cx, k + 1)?;
    let up = boundary_int_of(cx, k + 1)?;
    let down = boundary_int_of(cx, k)?;
    let delta = up
        .matmul(&up.transpose())?
        .add(&down.transpose().matmul(&down)?)?;
    Ok(LaplacianBundle::from_exact(
        delta,
        Provenance {
            i: cx.scale_index(),
            j: None,
            k,
        },
        labels_of(cx, cx.simplices(k)),
    ))
}

pub fn check_nested(cx_i: &CliqueComplex, cx_j: &CliqueComplex) -> Result<()> {
    if !cx_i.is_subcomplex_of(cx_j) {
        return Err(QtdaError::NotNested(format!(
            "complex at scale {} is not contained in complex at scale {}",
            cx_i.scale_index(),
            cx_j.scale_index()
        )));
    }
    if cx_i.top_dim() > cx_j.top_dim() {
        return Err(QtdaError::NotNested(
            "outer complex is materialized to a lower dimension".into(),
        ));
    }
    Ok(())
}

/// ∂_{k+1}^{i,j} expressed in a chain basis of C_{k+1}^{i,j}(S^j).
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedBoundary {
    /// Rows labeled by S_k^i, columns by the selected chains.
    pub matrix: SparseSignedMatrix,
    /// Column operations Y on ⟨S_{k+1}^j⟩ (square, invertible over Q).
    pub change_of_basis: IntMatrix,
    /// Columns of Y spanning C_{k+1}^{i,j}.
    pub kernel_column_indices: Vec<usize>,
    /// (I - P_k^i) ∂_{k+1}^j, rows labeled by S_k^j \ S_k^i.
    pub outside_part: IntMatrix,
}

impl RestrictedBoundary {
    pub fn rank(&self) -> usize {
        self.matrix.rank()
    }
}

fn chain_label(cx: &CliqueComplex, basis: &[Simplex], coeffs: &[i64]) -> String {
    let mut out = String::new();
    for (s, &c) in basis.iter().zip(coeffs) {
        if c == 0 {
            continue;
        }
        let name = cx.label(s);
        let sign = if c < 0 { "-" } else if out.is_empty() { "" } else { "+" };
        let mag = c.unsigned_abs();
        if mag == 1 {
            out.push_str(&format!("{sign}{name}"));
        } else {
            out.push_str(&format!("{sign}{mag}{name}"));
        }
    }
    if out.is_empty() {
        "0".into()
    } else {
        out
    }
}

/// Column-reduce D = (I − P_k^i) ∂_{k+1}^j P_{k+1}^j, keep the chains D sends to
/// zero and express ∂_{k+1}^j on them in the S_k^i basis.
pub fn restricted_boundary(cx_i: &CliqueComplex, cx_j: &CliqueComplex, k: usize) -> Result<RestrictedBoundary> {
    check_nested(cx_i, cx_j)?;
    require_dim(cx_i, k)?;
    require_dim(cx_j, k + 1)?;
    let sk_j = cx_j.simplices(k);
    let sk1_j = cx_j.simplices(k + 1);
    let full = boundary_int(sk_j, sk1_j);
    let (inside, outside): (Vec<usize>, Vec<usize>) =
        (0..sk_j.len()).partition(|&r| cx_i.contains(&sk_j[r]));
    let d = full.select_rows(&outside);
    let red = exact::column_reduce_q(&d)?;
    let chains = red.y.select_cols(&red.zero_columns);
    let image = full.matmul(&chains)?.select_rows(&inside);
    let row_labels = inside.iter().map(|&r| cx_j.label(&sk_j[r])).collect();
    let col_labels = (0..chains.cols)
        .map(|c| chain_label(cx_j, sk1_j, &chains.col(c)))
        .collect();
    Ok(RestrictedBoundary {
        matrix: SparseSignedMatrix::from_int(&image, row_labels, col_labels, FieldTag::Rational),
        change_of_basis: red.y,
        kernel_column_indices: red.zero_columns,
        outside_part: d,
    })
}

/// Δ_k^{i,j} = ∂^{i,j}(∂^{i,j})ᵀ + (∂_k^i)ᵀ∂_k^i on ⟨S_k^i⟩, exact.
pub fn persistent_laplacian(cx_i: &CliqueComplex, cx_j: &CliqueComplex, k: usize) -> Result<LaplacianBundle> {
    let rb = restricted_boundary(cx_i, cx_j, k)?;
    let up = rb.matrix.to_int();
    let down = boundary_int_of(cx_i, k)?;
    let delta = up
        .matmul(&up.transpose())?
        .add(&down.transpose().matmul(&down)?)?;
    Ok(LaplacianBundle::from_exact(
        delta,
        Provenance {
            i: cx_i.scale_index(),
            j: Some(cx_j.scale_index()),
            k,
        },
        labels_of(cx_i, cx_i.simplices(k)),
    ))
}

/// Moore–Penrose pseudo-inverse of a symmetric PSD matrix via its eigendecomposition.
fn psd_pinv(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = m.nrows();
    if n == 0 {
        return m.clone();
    }
    let eig = m.clone().symmetric_eigen();
    let top = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let cut = rel_tol * top.max(1.0);
    let mut out = DMatrix::zeros(n, n);
    for (idx, &l) in eig.eigenvalues.iter().enumerate() {
        if l > cut {
            let v = eig.eigenvectors.column(idx);
            out += (v * v.transpose()) / l;
        }
    }
    out
}

/// Persistent Laplacian via the Schur complement of the up-Laplacian at scale j
/// onto the k-simplices already present at scale i.
pub fn persistent_laplacian_schur(cx_i: &CliqueComplex, cx_j: &CliqueComplex, k: usize) -> Result<LaplacianBundle> {
    check_nested(cx_i, cx_j)?;
    require_dim(cx_i, k)?;
    require_dim(cx_j, k + 1)?;
    let sk_j = cx_j.simplices(k);
    let up = int_to_dmatrix(&boundary_int(sk_j, cx_j.simplices(k + 1)));
    let l_up = &up * up.transpose();
    let (ii, jj): (Vec<usize>, Vec<usize>) = (0..sk_j.len()).partition(|&r| cx_i.contains(&sk_j[r]));
    let block = |rs: &[usize], cs: &[usize]| DMatrix::from_fn(rs.len(), cs.len(), |r, c| l_up[(rs[r], cs[c])]);
    let l_ii = block(&ii, &ii);
    let schur = if jj.is_empty() {
        l_ii
    } else {
        let l_ij = block(&ii, &jj);
        let l_jj = block(&jj, &jj);
        let pinv = psd_pinv(&l_jj, 1e-10);
        &l_ii - &l_ij * pinv * l_ij.transpose()
    };
    let down = int_to_dmatrix(&boundary_int_of(cx_i, k)?);
    let mut delta = schur + down.transpose() * down;
    delta = (&delta + delta.transpose()) * 0.5;
    Ok(LaplacianBundle {
        delta,
        exact: None,
        provenance: Provenance {
            i: cx_i.scale_index(),
            j: Some(cx_j.scale_index()),
            k,
        },
        basis: labels_of(cx_i, cx_i.simplices(k)),
    })
}

/// P_k^i ∂_{k+1}^j P_{k+1}^j: rows S_k^i, columns S_{k+1}^j, no change of basis.
pub fn naive_restricted_boundary(cx_i: &CliqueComplex, cx_j: &CliqueComplex, k: usize) -> Result<SparseSignedMatrix> {
    check_nested(cx_i, cx_j)?;
    require_dim(cx_i, k)?;
    require_dim(cx_j, k + 1)?;
    let rows = cx_i.simplices(k);
    let cols = cx_j.simplices(k + 1);
    Ok(SparseSignedMatrix::from_int(
        &boundary_int(rows, cols),
        labels_of(cx_i, rows),
        labels_of(cx_j, cols),
        FieldTag::Rational,
    ))
}
