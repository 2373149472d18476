//! Matrix-level emulation of the quantum estimator: threshold projectors built
//! by singular value transformation, purified-state overlaps, the sampled
//! amplitude binary search and the error-budget allocation.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::boundary::{boundary_int_of, check_nested, int_to_dmatrix};
use crate::classical::persistent_rank_parts;
use crate::boundary::FieldTag;
use crate::complex::{CliqueComplex, Mapping};
use crate::error::{QtdaError, Result};
use crate::gaps::{self, right_singular_pairs, GapReport, ZERO_SPLIT};
use crate::poly::{degree_bound, threshold_polynomial, Orientation, ThresholdPolynomial};
use crate::resources::binomial;

/// Smallest polynomial error the Chebyshev construction resolves in double precision.
pub const POLY_EPS_FLOOR: f64 = 1e-12;

/// Success constant used when none is given; C = 4 gives C' = 1/4.
pub const DEFAULT_SUCCESS_CONSTANT: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectorMode {
    /// Exact spectral projectors.
    Ideal,
    /// Threshold polynomials applied to singular values.
    Poly,
}

impl std::str::FromStr for ProjectorMode {
    type Err = QtdaError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ideal" => Ok(ProjectorMode::Ideal),
            "poly" => Ok(ProjectorMode::Poly),
            other => Err(QtdaError::InvalidArgument(format!("unknown projector mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ProjectorKind {
    Ker,
    Im,
    KerIm,
}

/// (α, m, ε) parameters of a projected unitary encoding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EncodingParams {
    pub alpha: f64,
    pub ancillas: f64,
    pub error: f64,
}

impl EncodingParams {
    pub fn exact(alpha: f64, ancillas: f64) -> Self {
        EncodingParams { alpha, ancillas, error: 0.0 }
    }

    /// Encoding of the product AB: (αβ, a + b, αδ + βε).
    pub fn product(&self, other: &EncodingParams) -> EncodingParams {
        EncodingParams {
            alpha: self.alpha * other.alpha,
            ancillas: self.ancillas + other.ancillas,
            error: self.alpha * other.error + other.alpha * self.error,
        }
    }
}

/// Bound 4d√(ε_L + ε_R + ε) for a degree-d transformation of the product of
/// `chain`, with C_ΠNOT errors ε_L, ε_R.
pub fn encoding_error_propagation(chain: &[EncodingParams], eps_l: f64, eps_r: f64, degree: usize) -> f64 {
    let combined = chain
        .iter()
        .copied()
        .reduce(|a, b| a.product(&b))
        .map_or(0.0, |p| p.error);
    4.0 * degree as f64 * (eps_l + eps_r + combined).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectorSpec {
    #[serde(skip)]
    pub matrix: DMatrix<f64>,
    pub kind: ProjectorKind,
    pub mode: ProjectorMode,
    pub gap: f64,
    /// Requested polynomial error.
    pub eps: f64,
    /// Error actually used (after the precision floor).
    pub eps_used: f64,
    pub alpha: f64,
    pub degree: Option<usize>,
    /// Declared bound on ‖Π − Π_ideal‖.
    pub bound: f64,
}

impl ProjectorSpec {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    /// Principal block on the given basis positions.
    pub fn restricted(&self, idx: &[usize]) -> ProjectorSpec {
        let mut out = self.clone();
        out.matrix = DMatrix::from_fn(idx.len(), idx.len(), |r, c| self.matrix[(idx[r], idx[c])]);
        out
    }
}

fn check_gap(gap: f64, alpha: f64, sv: &[f64]) -> Result<()> {
    if !(gap > 0.0 && gap.is_finite()) {
        return Err(QtdaError::InvalidArgument(format!("gap must be positive (got {gap})")));
    }
    let top = sv.iter().copied().fold(0.0f64, f64::max);
    if alpha < top * (1.0 - 1e-12) {
        return Err(QtdaError::InvalidArgument(format!(
            "normalization α = {alpha} is below the operator norm {top}"
        )));
    }
    if let Some(min_nz) = gaps::nonzero_split(sv, ZERO_SPLIT).into_iter().reduce(f64::min) {
        if gap > min_nz * (1.0 + 1e-9) {
            return Err(QtdaError::InvalidArgument(format!(
                "gap {gap} exceeds the smallest nonzero singular value {min_nz}"
            )));
        }
    }
    if gap > alpha {
        return Err(QtdaError::InvalidArgument(format!("gap {gap} exceeds α = {alpha}")));
    }
    Ok(())
}

/// Π = P(0)I + Σ_l (P(σ_l/α) − P(0)) v_l v_lᵀ over right singular pairs of `m`.
fn transform(m: &DMatrix<f64>, alpha: f64, p: &ThresholdPolynomial) -> DMatrix<f64> {
    let n = m.ncols();
    let p0 = p.eval(0.0);
    let mut out = DMatrix::identity(n, n) * p0;
    let (sv, vs) = right_singular_pairs(m);
    for (s, v) in sv.iter().zip(&vs) {
        let w = p.eval((s / alpha).min(1.0)) - p0;
        if w != 0.0 {
            out += v * v.transpose() * w;
        }
    }
    out
}

fn threshold_projector(
    m: &DMatrix<f64>,
    alpha: f64,
    gap: f64,
    eps: f64,
    mode: ProjectorMode,
    kind: ProjectorKind,
) -> Result<ProjectorSpec> {
    let (sv, _) = right_singular_pairs(m);
    check_gap(gap, alpha, &sv)?;
    let (matrix, degree, eps_used) = match mode {
        ProjectorMode::Ideal => {
            let p = match kind {
                ProjectorKind::Ker => gaps::ideal_kernel_projector(m, ZERO_SPLIT),
                _ => gaps::ideal_image_projector(&m.transpose(), ZERO_SPLIT),
            };
            (p, None, 0.0)
        }
        ProjectorMode::Poly => {
            let eps_used = eps.max(POLY_EPS_FLOOR);
            let c = gap / (2.0 * alpha);
            let orientation = if kind == ProjectorKind::Ker { Orientation::LowPass } else { Orientation::HighPass };
            let p = threshold_polynomial(c, 0.75 * c, eps_used, orientation)?;
            (transform(m, alpha, &p), Some(p.degree()), eps_used)
        }
    };
    Ok(ProjectorSpec {
        matrix,
        kind,
        mode,
        gap,
        eps,
        eps_used,
        alpha,
        degree,
        bound: eps_used,
    })
}

/// Projector onto Ker B (right singular vectors with σ = 0).
pub fn kernel_projector(b: &DMatrix<f64>, alpha: f64, gap: f64, eps: f64, mode: ProjectorMode) -> Result<ProjectorSpec> {
    threshold_projector(b, alpha, gap, eps, mode, ProjectorKind::Ker)
}

/// Projector onto Im B, given the adjoint Bᵀ (right singular vectors of Bᵀ with σ > 0).
pub fn image_projector(bt: &DMatrix<f64>, alpha: f64, gap: f64, eps: f64, mode: ProjectorMode) -> Result<ProjectorSpec> {
    threshold_projector(bt, alpha, gap, eps, mode, ProjectorKind::Im)
}

/// Projector onto the σ = 1 right singular space of Π_Ker·Π_Im, in the basis of
/// `pi`. `emb` places the basis of `pk` inside that of `pi`.
pub fn ker_im_projector(
    pk: &ProjectorSpec,
    pi: &ProjectorSpec,
    emb: &[usize],
    gap: f64,
    eps: f64,
    mode: ProjectorMode,
) -> Result<ProjectorSpec> {
    if emb.len() != pk.dim() || emb.iter().any(|&e| e >= pi.dim()) {
        return Err(QtdaError::InvalidArgument("embedding does not match projector bases".into()));
    }
    if !(gap > 0.0 && gap <= 1.0) {
        return Err(QtdaError::InvalidArgument(format!("Λ_ΠΠ must lie in (0, 1] (got {gap})")));
    }
    let m = gaps::pad(&pk.matrix, emb, pi.dim()) * &pi.matrix;
    let (sv, vs) = right_singular_pairs(&m);
    if pk.mode == ProjectorMode::Ideal && pi.mode == ProjectorMode::Ideal {
        let truth = gaps::pi_pi_gap_from(&sv);
        if gap > truth * (1.0 + 1e-9) {
            return Err(QtdaError::InvalidArgument(format!("Λ_ΠΠ = {gap} exceeds the true gap {truth}")));
        }
    }
    let n = pi.dim();
    let chain = [EncodingParams { alpha: 1.0, ancillas: 0.0, error: pk.bound }, EncodingParams {
        alpha: 1.0,
        ancillas: 0.0,
        error: pi.bound,
    }];
    let (matrix, degree, eps_used, bound) = match mode {
        ProjectorMode::Ideal => {
            let mut p = DMatrix::zeros(n, n);
            for (s, v) in sv.iter().zip(&vs) {
                if *s > 1.0 - gap / 2.0 {
                    p += v * v.transpose();
                }
            }
            (p, None, 0.0, 0.0)
        }
        ProjectorMode::Poly => {
            let eps_used = eps.max(POLY_EPS_FLOOR);
            let c = 1.0 - gap / 2.0;
            let poly = threshold_polynomial(c, 0.75 * gap / 2.0, eps_used, Orientation::HighPass)?;
            let p = transform(&m, 1.0, &poly);
            let d = poly.degree();
            (p, Some(d), eps_used, encoding_error_propagation(&chain, 0.0, 0.0, d) + eps_used)
        }
    };
    Ok(ProjectorSpec {
        matrix,
        kind: ProjectorKind::KerIm,
        mode,
        gap,
        eps,
        eps_used,
        alpha: 1.0,
        degree,
        bound,
    })
}

/// ‖(Π⊗I)|ψ_m⟩‖ with |ψ_m⟩ = Σ_s |s⟩|s⟩/√d, formed explicitly.
pub fn purified_overlap_matrix(p: &DMatrix<f64>) -> f64 {
    let d = p.nrows();
    if d == 0 {
        return 0.0;
    }
    let inv = 1.0 / (d as f64).sqrt();
    // Index (a, b) of the doubled register at a·d + b.
    let mut psi = DVector::zeros(d * d);
    for s in 0..d {
        psi[s * d + s] = inv;
    }
    let mut out = DVector::<f64>::zeros(d * d);
    for a in 0..d {
        for b in 0..d {
            let amp = psi[b * d + b];
            if amp != 0.0 {
                out[a * d + b] += p[(a, b)] * amp;
            }
        }
    }
    out.norm()
}

/// Amplitude √(trace Π / |S_k|) realized through the purified maximally mixed state.
pub fn purified_overlap(p: &ProjectorSpec, cx: &CliqueComplex, k: usize) -> Result<f64> {
    if p.dim() != cx.count(k) {
        return Err(QtdaError::InvalidArgument(format!(
            "projector acts on {} states but S_{k} has {} simplices",
            p.dim(),
            cx.count(k)
        )));
    }
    Ok(purified_overlap_matrix(&p.matrix))
}

/// Counts the per-instance accuracies depend on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InstanceCounts {
    /// |S_k^i|.
    pub s_k: f64,
    /// binom(N, k + 1).
    pub binom: f64,
    pub dim_ker: f64,
    pub dim_ker_im: f64,
    pub beta: f64,
}

impl InstanceCounts {
    /// δ_1, δ_2, δ_3 for target accuracy Δ; counts are clamped to at least 1.
    pub fn deltas(&self, delta: f64) -> [f64; 3] {
        let c = |x: f64| x.max(1.0);
        let d = self.s_k;
        [
            delta / (2.0 * 3f64.sqrt() * c(self.beta)) * (d / self.binom).sqrt(),
            delta / (2.0 * (3.0 * d * c(self.dim_ker)).sqrt()),
            delta / (2.0 * (3.0 * d * c(self.dim_ker_im)).sqrt()),
        ]
    }
}

/// Gaps entering the budget; absent operator gaps are replaced by 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BudgetGaps {
    pub dk: f64,
    pub dk1: f64,
    pub pipi: f64,
}

impl From<&GapReport> for BudgetGaps {
    fn from(g: &GapReport) -> Self {
        BudgetGaps {
            dk: g.lambda_dk_i.unwrap_or(1.0),
            dk1: g.lambda_dk1_j.unwrap_or(1.0),
            pipi: g.lambda_pipi.unwrap_or(1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorBudget {
    pub mapping: Mapping,
    pub n: usize,
    pub k: usize,
    pub s_k: f64,
    pub binom: f64,
    pub gaps: BudgetGaps,
    pub success_constant: f64,
    /// C' = (1 − 1/√C)/2.
    pub c_prime: f64,
    pub deltas: [f64; 3],
    pub delta_min: f64,
    pub eps_f: f64,
    pub eps_psi: f64,
    pub eps_p: f64,
    pub eps_k: f64,
    pub eps_i: f64,
    pub eps_m: f64,
    pub eps_s: f64,
    pub chi_psi: f64,
    pub chi_pi: f64,
    /// Propagated instance error at δ_min; equals C' by construction.
    pub eps_3: f64,
}

fn ln_inv(x: f64) -> f64 {
    (1.0 / x).ln()
}

impl ErrorBudget {
    fn sqrt_dims(&self, shift: usize) -> f64 {
        ((self.n as f64 + 1.0) * (self.k + shift) as f64).sqrt()
    }

    /// ε_ker: the kernel projector error including the membership oracle.
    pub fn eps_ker(&self) -> f64 {
        match self.mapping {
            Mapping::Direct => self.eps_k,
            Mapping::Compact => {
                self.eps_k + 2.0 * self.eps_m.sqrt() * self.sqrt_dims(1) / self.gaps.dk * ln_inv(self.eps_k)
            }
        }
    }

    pub fn eps_im(&self) -> f64 {
        match self.mapping {
            Mapping::Direct => self.eps_i,
            Mapping::Compact => {
                self.eps_i + 2.0 * self.eps_m.sqrt() * self.sqrt_dims(2) / self.gaps.dk1 * ln_inv(self.eps_i)
            }
        }
    }

    /// Error of the Ker∩Im projector encoding.
    pub fn kerim_error(&self) -> f64 {
        let extra = match self.mapping {
            Mapping::Direct => 0.0,
            Mapping::Compact => 8.0 * self.eps_m.sqrt(),
        };
        ln_inv(self.eps_p) / self.gaps.pipi * (self.eps_ker() + self.eps_im() + extra).sqrt() + self.eps_p
    }

    /// Error of the state preparation χ_ψ.
    pub fn state_error(&self) -> f64 {
        match self.mapping {
            Mapping::Direct => self.eps_psi,
            Mapping::Compact => {
                self.eps_psi
                    + 4.0 * (self.binom / self.s_k).sqrt()
                        * ln_inv(self.eps_psi)
                        * (self.eps_s.sqrt() + self.eps_m.sqrt()).sqrt()
            }
        }
    }

    /// ε_x = (4/δ)·ln(1/ε_f)·√(2χ_ψ + χ_π + Σ) + ε_f for an instance of accuracy δ.
    pub fn instance_error(&self, delta: f64) -> f64 {
        instance_error(self, self.eps_f, delta)
    }
}

fn instance_error(b: &ErrorBudget, eps_f: f64, delta: f64) -> f64 {
    let membership = match b.mapping {
        Mapping::Direct => 0.0,
        Mapping::Compact => 6.0 * b.eps_m.sqrt(),
    };
    4.0 / delta * ln_inv(eps_f) * (2.0 * b.state_error() + b.kerim_error() + membership).sqrt() + eps_f
}

/// Allocate the component errors so that the worst instance (accuracy
/// `delta_min`) has total error at most C'.
pub fn allocate_budget(
    delta_min: f64,
    mapping: Mapping,
    n: usize,
    k: usize,
    s_k: f64,
    binom: f64,
    gaps: BudgetGaps,
    success_constant: f64,
) -> Result<ErrorBudget> {
    if !(delta_min > 0.0 && delta_min.is_finite()) {
        return Err(QtdaError::InvalidArgument(format!("instance accuracy must be positive (got {delta_min})")));
    }
    if !(gaps.dk > 0.0 && gaps.dk1 > 0.0 && gaps.pipi > 0.0) {
        return Err(QtdaError::InvalidArgument("gaps must be positive".into()));
    }
    if !(success_constant > 1.0) {
        return Err(QtdaError::InvalidArgument(format!("success constant must exceed 1 (got {success_constant})")));
    }
    if !(s_k >= 1.0) {
        return Err(QtdaError::Infeasible("empty S_k".into()));
    }
    let c_prime = (1.0 - 1.0 / success_constant.sqrt()) / 2.0;
    let eps_f0 = c_prime / 2.0;
    let noise = (c_prime * delta_min / (8.0 * ln_inv(eps_f0))).powi(2);
    let mut b = ErrorBudget {
        mapping,
        n,
        k,
        s_k,
        binom,
        gaps,
        success_constant,
        c_prime,
        deltas: [delta_min; 3],
        delta_min,
        eps_f: eps_f0,
        eps_psi: 0.0,
        eps_p: 0.0,
        eps_k: 0.0,
        eps_i: 0.0,
        eps_m: 0.0,
        eps_s: 0.0,
        chi_psi: 0.0,
        chi_pi: 0.0,
        eps_3: 0.0,
    };
    match mapping {
        Mapping::Direct => {
            b.eps_psi = noise / 4.0;
            b.eps_p = noise / 4.0;
            let e = 0.5 * (gaps.pipi * noise / (4.0 * ln_inv(b.eps_p))).powi(2);
            b.eps_k = e;
            b.eps_i = e;
        }
        Mapping::Compact => {
            b.eps_psi = 3.0 * noise / 32.0;
            let q = (3.0 * noise / (128.0 * (binom / s_k).sqrt() * ln_inv(b.eps_psi))).powi(2);
            b.eps_p = noise / 4.0;
            let r = (gaps.pipi * noise / (4.0 * ln_inv(b.eps_p))).powi(2);
            b.eps_k = r / 8.0;
            b.eps_i = r / 8.0;
            let sd = |shift: usize| ((n as f64 + 1.0) * (k + shift) as f64).sqrt();
            let sqrt_m = [
                noise / 48.0,
                q / 2.0,
                r / 16.0,
                r * gaps.dk / (16.0 * sd(1) * ln_inv(b.eps_k)),
                r * gaps.dk1 / (16.0 * sd(2) * ln_inv(b.eps_i)),
            ]
            .into_iter()
            .fold(f64::INFINITY, f64::min);
            b.eps_m = sqrt_m * sqrt_m;
            b.eps_s = (q - sqrt_m).powi(2);
        }
    }
    // ε_f = C'/2; the direct split then meets ε_3 = C' exactly, the compact one stays below.
    if instance_error(&b, eps_f0, delta_min) > c_prime * (1.0 + 1e-12) {
        return Err(QtdaError::Infeasible("error split exceeds the instance budget".into()));
    }
    b.chi_psi = b.state_error();
    b.chi_pi = b.kerim_error();
    b.eps_3 = b.instance_error(delta_min);
    for (name, v) in [
        ("eps_f", b.eps_f),
        ("eps_psi", b.eps_psi),
        ("eps_p", b.eps_p),
        ("eps_k", b.eps_k),
        ("eps_i", b.eps_i),
    ] {
        if !(v > 0.0 && v < 1.0) {
            return Err(QtdaError::Infeasible(format!("{name} = {v:e} outside (0, 1)")));
        }
    }
    if mapping == Mapping::Compact && !(b.eps_m > 0.0 && b.eps_m < 1.0 && b.eps_s > 0.0 && b.eps_s < 1.0) {
        return Err(QtdaError::Infeasible(format!("eps_m = {:e}, eps_s = {:e} outside (0, 1)", b.eps_m, b.eps_s)));
    }
    Ok(b)
}

/// Budget for target accuracy Δ over the three instances.
pub fn error_budget(
    delta: f64,
    mapping: Mapping,
    n: usize,
    k: usize,
    gaps: BudgetGaps,
    counts: &InstanceCounts,
    success_constant: f64,
) -> Result<ErrorBudget> {
    if !(delta > 0.0) {
        return Err(QtdaError::InvalidArgument(format!("Δ must be positive (got {delta})")));
    }
    let deltas = counts.deltas(delta);
    let delta_min = deltas.iter().copied().fold(f64::INFINITY, f64::min);
    let mut b = allocate_budget(delta_min, mapping, n, k, counts.s_k, counts.binom, gaps, success_constant)?;
    b.deltas = deltas;
    Ok(b)
}

/// Circuit calls made by the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct CallLedger {
    #[serde(rename = "V_psi")]
    pub v_psi: u64,
    #[serde(rename = "V_Pi")]
    pub v_pi: u64,
}

impl CallLedger {
    pub fn merge(&self, other: &CallLedger) -> CallLedger {
        CallLedger {
            v_psi: self.v_psi + other.v_psi,
            v_pi: self.v_pi + other.v_pi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankEstimate {
    pub value: f64,
    pub delta: f64,
    pub eta: f64,
    /// Bernoulli trials drawn over all levels.
    pub samples: u64,
    pub levels: usize,
    pub calls: CallLedger,
    /// Largest V_Π call count of a single circuit.
    pub max_calls_per_circuit: u64,
    pub eps_f: f64,
}

impl RankEstimate {
    /// Ledger constant: a circuit at the finest level makes at most
    /// (6·C_deg/δ)·ln(1/ε_f) + 2 calls to V_Π.
    pub fn call_bound(&self) -> f64 {
        6.0 * crate::poly::DEGREE_CONSTANT / self.delta * ln_inv(self.eps_f) + 2.0
    }
}

/// Probability that the threshold circuit at `c` (half-width `h`) reports
/// "above" when the amplitude is `a`.
fn success_probability(a: f64, c: f64, h: f64, eps: f64, chi: f64) -> f64 {
    let s = if a >= c + h {
        1.0
    } else if a <= c - h {
        0.0
    } else {
        0.5 * (1.0 + libm::erf(2.0 * (a - c) / h))
    };
    ((1.0 - chi) * (eps + (1.0 - 2.0 * eps) * s)).powi(2)
}

/// Number of levels for the interval to shrink from 1 to 2δ at ratio 2/3.
pub fn binary_search_levels(delta: f64) -> usize {
    if delta >= 0.5 {
        return 0;
    }
    ((1.0 / (2.0 * delta)).ln() / 1.5f64.ln()).ceil() as usize
}

/// Incoherent binary search for the amplitude `a_true`: each level runs the
/// threshold test repeatedly and takes the majority.
pub fn amplitude_binary_search<R: Rng + ?Sized>(
    a_true: f64,
    delta: f64,
    eta: f64,
    budget: &ErrorBudget,
    rng: &mut R,
) -> Result<RankEstimate> {
    if !(0.0..=1.0).contains(&a_true) {
        return Err(QtdaError::InvalidArgument(format!("amplitude {a_true} outside [0, 1]")));
    }
    if !(delta > 0.0 && eta > 0.0 && eta < 1.0) {
        return Err(QtdaError::InvalidArgument("need δ > 0 and η in (0, 1)".into()));
    }
    let eps = budget.eps_f;
    let chi = budget.chi_psi;
    let p1 = ((1.0 - eps) * (1.0 - chi)).powi(2);
    let p2 = (eps * (1.0 - chi)).powi(2);
    if !(eps < 0.5 && chi < 1.0 && p1 > p2) {
        return Err(QtdaError::Infeasible(format!("threshold test cannot separate (ε = {eps}, χ = {chi})")));
    }
    let levels = binary_search_levels(delta);
    let theta = eta / levels.max(1) as f64;
    let reps = (6.0 * (p1 + p2) / (p1 - p2).powi(2) * ln_inv(theta)).ceil() as u64;
    let cutoff = 0.5 * (p1 + p2) * reps as f64;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut est = RankEstimate {
        value: 0.5,
        delta,
        eta,
        samples: 0,
        levels: 0,
        calls: CallLedger::default(),
        max_calls_per_circuit: 0,
        eps_f: eps,
    };
    while hi - lo > 2.0 * delta {
        if est.levels >= levels + 2 {
            return Err(QtdaError::NonConvergence(est.levels));
        }
        let c = 0.5 * (lo + hi);
        let h = (hi - lo) / 6.0;
        let p = success_probability(a_true, c, h, eps, chi).clamp(0.0, 1.0);
        let hits = Binomial::new(reps, p)
            .map_err(|e| QtdaError::InvalidArgument(e.to_string()))?
            .sample(rng);
        let degree = 2 * (degree_bound(h, eps) / 2.0).ceil() as u64;
        est.samples += reps;
        est.calls.v_pi += reps * degree;
        est.calls.v_psi += reps * (2 * degree + 1);
        est.max_calls_per_circuit = est.max_calls_per_circuit.max(degree);
        est.levels += 1;
        if hits as f64 > cutoff {
            lo = c - h;
        } else {
            hi = c + h;
        }
    }
    est.value = 0.5 * (lo + hi);
    Ok(est)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantumConfig {
    pub delta: f64,
    pub eta: f64,
    pub mode: ProjectorMode,
    pub mapping: Mapping,
    pub success_constant: f64,
}

impl Default for QuantumConfig {
    fn default() -> Self {
        QuantumConfig {
            delta: 0.4,
            eta: 0.05,
            mode: ProjectorMode::Poly,
            mapping: Mapping::Direct,
            success_constant: DEFAULT_SUCCESS_CONSTANT,
        }
    }
}

/// Boundary-encoding normalization for ∂_{k'} on N vertices.
pub fn encoding_alpha(mapping: Mapping, n: usize, k_prime: usize) -> f64 {
    match mapping {
        Mapping::Direct => (n as f64).sqrt(),
        Mapping::Compact => ((n as f64 + 1.0) * (k_prime as f64 + 1.0)).sqrt(),
    }
}

/// Everything the sampling stage needs, computed once per instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreparedInstance {
    pub config: QuantumConfig,
    pub n: usize,
    pub k: usize,
    pub counts: InstanceCounts,
    pub gaps: GapReport,
    pub budget: ErrorBudget,
    /// Amplitudes of the three instances: √(|S_k|/binom), √(dim Ker/|S_k|), √(dim Ker∩Im/|S_k|).
    pub targets: [f64; 3],
    pub beta_classical: usize,
    pub projectors: [ProjectorSpec; 3],
}

pub fn prepare_quantum_instance(
    cx_i: &CliqueComplex,
    cx_j: &CliqueComplex,
    k: usize,
    config: QuantumConfig,
) -> Result<PreparedInstance> {
    check_nested(cx_i, cx_j)?;
    let n = cx_i.n();
    let s_k = cx_i.count(k);
    if s_k == 0 {
        return Err(QtdaError::Infeasible(format!("S_{k} is empty at the inner scale")));
    }
    let parts = persistent_rank_parts(cx_i, cx_j, k, FieldTag::Rational)?;
    let counts = InstanceCounts {
        s_k: s_k as f64,
        binom: binomial(n as u64, k as u64 + 1),
        dim_ker: parts.dim_ker as f64,
        dim_ker_im: parts.dim_intersection as f64,
        beta: parts.beta as f64,
    };
    let gaps = gaps::gap_report(cx_i, cx_j, k)?;
    let budget = error_budget(config.delta, config.mapping, n, k, BudgetGaps::from(&gaps), &counts, config.success_constant)?;

    let dk = int_to_dmatrix(&boundary_int_of(cx_i, k)?);
    let dk1 = int_to_dmatrix(&boundary_int_of(cx_j, k + 1)?);
    let alpha_k = encoding_alpha(config.mapping, n, k);
    let alpha_k1 = encoding_alpha(config.mapping, n, k + 1);
    let pk = kernel_projector(&dk, alpha_k, gaps.lambda_dk_i.unwrap_or(alpha_k), budget.eps_k, config.mode)?;
    let pi = image_projector(&dk1.transpose(), alpha_k1, gaps.lambda_dk1_j.unwrap_or(alpha_k1), budget.eps_i, config.mode)?;
    let emb = gaps::embedding(cx_i, cx_j, k)?;
    let pki = ker_im_projector(&pk, &pi, &emb, gaps.lambda_pipi.unwrap_or(1.0), budget.eps_p, config.mode)?;

    let targets = [
        (counts.s_k / counts.binom).sqrt(),
        purified_overlap(&pk, cx_i, k)?.min(1.0),
        purified_overlap(&pki.restricted(&emb), cx_i, k)?.min(1.0),
    ];
    Ok(PreparedInstance {
        config,
        n,
        k,
        counts,
        gaps,
        budget,
        targets,
        beta_classical: parts.beta,
        projectors: [pk, pi, pki],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceReport {
    pub target: f64,
    pub estimate: f64,
    pub delta: f64,
    pub samples: u64,
    pub levels: usize,
    pub calls: CallLedger,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantumRun {
    pub beta_estimate: f64,
    /// Nearest non-negative integer, reported only when Δ < 0.5.
    pub beta_rounded: Option<u64>,
    pub instances: Vec<InstanceReport>,
    pub calls: CallLedger,
    pub seed: u64,
}

/// Combine W ≈ √(d/D), X ≈ √(dim Ker/d), Y ≈ √(dim Ker∩Im/d) into β = W²D(X² − Y²).
pub fn combine_estimates(w: f64, x: f64, y: f64, binom: f64) -> f64 {
    w * w * binom * (x * x - y * y)
}

pub fn run_seed(prep: &PreparedInstance, seed: u64) -> Result<QuantumRun> {
    let mut root = ChaCha20Rng::seed_from_u64(seed);
    let eta = prep.config.eta / 3.0;
    let mut instances = Vec::with_capacity(3);
    let mut calls = CallLedger::default();
    let mut values = [0.0; 3];
    for (x, &a) in prep.targets.iter().enumerate() {
        let mut rng = ChaCha20Rng::seed_from_u64(root.random());
        let est = amplitude_binary_search(a, prep.budget.deltas[x], eta, &prep.budget, &mut rng)?;
        values[x] = est.value;
        calls = calls.merge(&est.calls);
        instances.push(InstanceReport {
            target: a,
            estimate: est.value,
            delta: est.delta,
            samples: est.samples,
            levels: est.levels,
            calls: est.calls,
        });
    }
    let beta = combine_estimates(values[0], values[1], values[2], prep.counts.binom);
    let beta_rounded = (prep.config.delta < 0.5).then(|| beta.round().max(0.0) as u64);
    Ok(QuantumRun {
        beta_estimate: beta,
        beta_rounded,
        instances,
        calls,
        seed,
    })
}

/// Prepare and run one seed.
pub fn estimate_persistent_betti_quantum(
    cx_i: &CliqueComplex,
    cx_j: &CliqueComplex,
    k: usize,
    config: QuantumConfig,
    seed: u64,
) -> Result<QuantumRun> {
    run_seed(&prepare_quantum_instance(cx_i, cx_j, k, config)?, seed)
}

/// Emulation report in the documented JSON layout.
pub fn emulation_report(prep: &PreparedInstance, run: &QuantumRun) -> serde_json::Value {
    serde_json::json!({
        "beta_estimate": run.beta_estimate,
        "beta_rounded": run.beta_rounded,
        "beta_classical": prep.beta_classical,
        "rounding": if prep.config.delta < 0.5 { "nearest non-negative integer (Δ < 0.5)" } else { "none" },
        "instances": run.instances,
        "calls": run.calls,
        "budget": prep.budget,
        "gaps": prep.gaps,
        "config": prep.config,
        "projector_degrees": prep.projectors.iter().map(|p| p.degree).collect::<Vec<_>>(),
        "seed": run.seed,
    })
}
