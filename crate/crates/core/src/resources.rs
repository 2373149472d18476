//! Cost model for the quantum estimator: membership oracles, boundary
//! encodings, projectors, state preparation, the assembled circuit depth and
//! comparisons against prior quantum and classical algorithms.
//!
//! Every asymptotic expression carries a named constant (default 1) from
//! [`Constants`]. Logarithms are base 2. Figures are formula evaluations, not
//! measured runtimes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::complex::Mapping;
use crate::emulator::{allocate_budget, BudgetGaps, EncodingParams, ErrorBudget, DEFAULT_SUCCESS_CONSTANT};
use crate::error::{QtdaError, Result};

/// binom(n, r) in floating point (exact for results below 2^53).
pub fn binomial(n: u64, r: u64) -> f64 {
    if r > n {
        return 0.0;
    }
    let r = r.min(n - r);
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64).round()
}

/// log2, clamped so that arguments below 1 contribute 0.
pub fn lg(x: f64) -> f64 {
    x.max(1.0).log2()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Memory {
    Qrom,
    Qram,
}

impl std::str::FromStr for Memory {
    type Err = QtdaError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qrom" => Ok(Memory::Qrom),
            "qram" => Ok(Memory::Qram),
            other => Err(QtdaError::InvalidArgument(format!("unknown memory model {other:?}"))),
        }
    }
}

/// Big-O constants. Unknown keys in a constants file are rejected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Constants {
    pub membership: f64,
    pub boundary_encoding: f64,
    pub projector_ker: f64,
    pub projector_im: f64,
    pub projector_kerim: f64,
    pub amplification: f64,
    pub dicke: f64,
    pub permutation_state: f64,
    pub sorting_network: f64,
    pub ancillas: f64,
    pub threshold_search: f64,
    pub repetitions: f64,
    /// Matrix multiplication exponent for the optimized classical row.
    pub omega: f64,
    pub success_constant: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Constants {
            membership: 1.0,
            boundary_encoding: 1.0,
            projector_ker: 1.0,
            projector_im: 1.0,
            projector_kerim: 1.0,
            amplification: 1.0,
            dicke: 1.0,
            permutation_state: 1.0,
            sorting_network: 1.0,
            ancillas: 1.0,
            threshold_search: 1.0,
            repetitions: 1.0,
            omega: 2.4,
            success_constant: DEFAULT_SUCCESS_CONSTANT,
        }
    }
}

impl Constants {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let c: Constants = serde_json::from_str(text)?;
        for (name, v) in c.named() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(QtdaError::InvalidArgument(format!("constant {name} must be positive (got {v})")));
            }
        }
        if c.success_constant <= 1.0 {
            return Err(QtdaError::InvalidArgument("success_constant must exceed 1".into()));
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    fn named(&self) -> [(&'static str, f64); 14] {
        [
            ("membership", self.membership),
            ("boundary_encoding", self.boundary_encoding),
            ("projector_ker", self.projector_ker),
            ("projector_im", self.projector_im),
            ("projector_kerim", self.projector_kerim),
            ("amplification", self.amplification),
            ("dicke", self.dicke),
            ("permutation_state", self.permutation_state),
            ("sorting_network", self.sorting_network),
            ("ancillas", self.ancillas),
            ("threshold_search", self.threshold_search),
            ("repetitions", self.repetitions),
            ("omega", self.omega),
            ("success_constant", self.success_constant),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostGaps {
    pub dk: f64,
    pub dk1: f64,
    pub pipi: f64,
}

impl CostGaps {
    pub fn uniform(g: f64) -> Self {
        CostGaps { dk: g, dk1: g, pipi: g }
    }

    fn min_boundary(&self) -> f64 {
        self.dk.min(self.dk1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostModelInput {
    /// Number of points.
    pub n: usize,
    pub k: usize,
    /// Ambient dimension of the points.
    pub d: usize,
    /// Bits per coordinate.
    pub b: usize,
    /// |S_k^i|; defaults to binom(N, k+1).
    pub s_k: Option<f64>,
    /// |S_{k+1}^j| for classical rows; defaults to binom(N, k+1) (dense complex).
    pub s_k1: Option<f64>,
    /// Simplex count after sparsification (classical sparsification row).
    pub s_sparse: Option<f64>,
    /// Betti number (classical power-method row).
    pub beta: Option<f64>,
    pub gaps: CostGaps,
    /// Gaps Λ_1, Λ_2 of the persistent-Laplacian approach; default to our Λ_ΠΠ·min Λ_∂ split evenly.
    pub hayakawa_gaps: Option<(f64, f64)>,
    pub delta: f64,
    pub eta: f64,
    pub mapping: Mapping,
    pub memory: Memory,
    pub constants: Constants,
}

impl CostModelInput {
    pub fn new(n: usize, k: usize, mapping: Mapping) -> Self {
        CostModelInput {
            n,
            k,
            d: 2,
            b: 16,
            s_k: None,
            s_k1: None,
            s_sparse: None,
            beta: None,
            gaps: CostGaps::uniform(1.0),
            hayakawa_gaps: None,
            delta: 0.4,
            eta: 0.05,
            mapping,
            memory: Memory::Qrom,
            constants: Constants::default(),
        }
    }

    pub fn binom(&self) -> f64 {
        binomial(self.n as u64, self.k as u64 + 1)
    }

    pub fn s_k(&self) -> f64 {
        self.s_k.unwrap_or_else(|| self.binom())
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }

    fn kf(&self) -> f64 {
        self.k as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.k + 1 > self.n || self.d == 0 || self.b == 0 {
            return Err(QtdaError::InvalidArgument(format!(
                "need N ≥ 2, k + 1 ≤ N, d ≥ 1, b ≥ 1 (got N = {}, k = {}, d = {}, b = {})",
                self.n, self.k, self.d, self.b
            )));
        }
        let s = self.s_k();
        if !(s >= 1.0) {
            return Err(QtdaError::Infeasible("S_k must contain at least one simplex".into()));
        }
        if s > self.binom() {
            return Err(QtdaError::InvalidArgument(format!("S_k = {s} exceeds binom(N, k+1) = {}", self.binom())));
        }
        if !(self.delta > 0.0) || !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(QtdaError::InvalidArgument("need Δ > 0 and η in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MembershipCost {
    pub depth: f64,
    pub ancillas: f64,
}

pub fn membership_cost(input: &CostModelInput, eps_m: f64) -> Result<MembershipCost> {
    let c = &input.constants;
    let (n, k) = (input.nf(), input.kf());
    let (d, b) = (input.d as f64, input.b as f64);
    match (input.mapping, input.memory) {
        (Mapping::Direct, Memory::Qram) => Err(QtdaError::InvalidArgument(
            "the direct mapping uses a QROM membership oracle only".into(),
        )),
        (Mapping::Direct, Memory::Qrom) => Ok(MembershipCost {
            depth: c.membership * n * lg(n),
            ancillas: c.ancillas * n,
        }),
        (Mapping::Compact, memory) => {
            if !(eps_m > 0.0 && eps_m < 1.0) {
                return Err(QtdaError::InvalidArgument(format!("eps_m must lie in (0, 1) (got {eps_m})")));
            }
            let (load, anc) = match memory {
                Memory::Qrom => (n, (lg(n) + d * b * b).max(k * lg(n))),
                Memory::Qram => (lg(n), n * d * b + d * b * b),
            };
            Ok(MembershipCost {
                depth: c.membership * (k.sqrt() * lg(1.0 / eps_m) * (load + lg(d) * lg(b) + b) + k),
                ancillas: c.ancillas * anc,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundarySide {
    /// ∂_k^i.
    Lower,
    /// ∂_{k+1}^j.
    Upper,
}

/// Encoding parameters and depth of the boundary operator block encoding.
pub fn boundary_encoding_cost(input: &CostModelInput, side: BoundarySide) -> (EncodingParams, f64) {
    let n = input.nf();
    let kk = match side {
        BoundarySide::Lower => input.kf(),
        BoundarySide::Upper => input.kf() + 1.0,
    };
    let c = input.constants.boundary_encoding;
    match input.mapping {
        Mapping::Compact => (
            EncodingParams::exact(((n + 1.0) * (kk + 1.0)).sqrt(), lg(kk + 1.0)),
            c * kk * lg(lg(n + 1.0)),
        ),
        Mapping::Direct => (EncodingParams::exact(n.sqrt(), 0.0), c * lg(n)),
    }
}

/// The persistent-Laplacian construction's boundary encoding, for comparison.
pub fn hayakawa_boundary_encoding(n: usize, k: usize) -> (EncodingParams, f64) {
    let nf = n as f64;
    (EncodingParams::exact(nf * (k as f64 + 1.0), lg(nf)), nf)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ProjectorWhich {
    Ker,
    Im,
    KerIm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProjectorCost {
    /// Polynomial degree: calls to the inner encodings.
    pub calls: f64,
    /// Depth of one inner call (encoding plus membership oracles).
    pub inner_depth: f64,
    pub depth: f64,
    /// Composite error of the projector encoding.
    pub error: f64,
}

pub fn projector_cost(input: &CostModelInput, which: ProjectorWhich, budget: &ErrorBudget) -> Result<ProjectorCost> {
    let c = &input.constants;
    let g = &input.gaps;
    if !(g.dk > 0.0 && g.dk1 > 0.0 && g.pipi > 0.0) {
        return Err(QtdaError::InvalidArgument("zero gap".into()));
    }
    let m = membership_cost(input, budget.eps_m)?;
    let single = |side: BoundarySide, gap: f64, eps: f64, constant: f64, error: f64| {
        let (enc, enc_depth) = boundary_encoding_cost(input, side);
        let calls = constant * enc.alpha / gap * lg(1.0 / eps);
        let inner = enc_depth + m.depth;
        ProjectorCost {
            calls,
            inner_depth: inner,
            depth: calls * inner,
            error,
        }
    };
    let ker = single(BoundarySide::Lower, g.dk, budget.eps_k, c.projector_ker, budget.eps_ker());
    let im = single(BoundarySide::Upper, g.dk1, budget.eps_i, c.projector_im, budget.eps_im());
    Ok(match which {
        ProjectorWhich::Ker => ker,
        ProjectorWhich::Im => im,
        ProjectorWhich::KerIm => {
            let calls = c.projector_kerim / g.pipi * lg(1.0 / budget.eps_p);
            let inner = ker.depth + im.depth + 4.0 * m.depth;
            ProjectorCost {
                calls,
                inner_depth: inner,
                depth: calls * inner,
                error: budget.kerim_error(),
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StatePrepCost {
    /// Calls to U_uni and the membership oracle under amplitude amplification.
    pub calls: f64,
    pub u_uni_depth: f64,
    pub depth: f64,
    pub ancillas: f64,
}

/// √((k+1)^{k+1}/(k+1)!), the permutation-state overhead.
pub fn permutation_factor(k: usize) -> f64 {
    let m = k as f64 + 1.0;
    let log_fact: f64 = (1..=k + 1).map(|i| (i as f64).ln()).sum();
    (0.5 * (m * m.ln() - log_fact)).exp()
}

pub fn state_prep_cost(input: &CostModelInput, eps_psi: f64, eps_s: f64, membership_depth: f64) -> Result<StatePrepCost> {
    let c = &input.constants;
    let s = input.s_k();
    if !(s >= 1.0) {
        return Err(QtdaError::Infeasible("S_k = 0: nothing to prepare".into()));
    }
    let (n, k) = (input.nf(), input.kf());
    let calls = c.amplification * (input.binom() / s).sqrt() * lg(1.0 / eps_psi);
    let (u, anc) = match input.mapping {
        Mapping::Direct => (c.dicke * k * lg(n), 0.0),
        Mapping::Compact => (
            c.permutation_state * (lg(n) + k * lg(k)) * permutation_factor(input.k) * lg(1.0 / eps_s)
                + c.sorting_network * k * lg(k) * lg(lg(n)),
            c.ancillas * k * (lg(k) + lg(n)),
        ),
    };
    Ok(StatePrepCost {
        calls,
        u_uni_depth: u,
        depth: calls * (u + membership_depth),
        ancillas: anc,
    })
}

/// Main-register qubits: N (direct) or (k+1)·⌈log2(N+1)⌉ (compact).
pub fn main_register_qubits(mapping: Mapping, n: usize, k: usize) -> u64 {
    match mapping {
        Mapping::Direct => n as u64,
        Mapping::Compact => (k as u64 + 1) * crate::complex::compact_register_width(n) as u64,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Breakdown {
    pub membership: MembershipCost,
    pub boundary_lower: EncodingParams,
    pub boundary_lower_depth: f64,
    pub boundary_upper: EncodingParams,
    pub boundary_upper_depth: f64,
    pub pi_ker: ProjectorCost,
    pub pi_im: ProjectorCost,
    pub pi_pipi: ProjectorCost,
    pub state_prep: StatePrepCost,
    /// c·(1/δ_3)·log(1/ε_f): circuit calls per threshold test.
    pub search_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResourceReport {
    pub mapping: Mapping,
    pub memory: Memory,
    pub n: usize,
    pub k: usize,
    pub s_k: f64,
    pub binom: f64,
    pub delta: f64,
    pub eta: f64,
    /// δ_3 = Δ/√|S_k|.
    pub delta_3: f64,
    pub qubits: u64,
    pub ancillas: f64,
    pub non_clifford_depth: f64,
    pub depth_terms: Vec<DepthTerm>,
    pub repetitions: f64,
    pub total_cost: f64,
    /// Leading closed form with ε-dependent logarithms dropped.
    pub closed_form: f64,
    pub breakdown: Breakdown,
    pub budget: ErrorBudget,
    pub constants: Constants,
    pub note: &'static str,
}

pub const REPORT_NOTE: &str =
    "formula-level evaluation of asymptotic cost expressions with explicit constants; not a measured runtime";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DepthTerm {
    pub name: &'static str,
    pub value: f64,
}

/// The two summands of depth = search_factor·V_ψ + search_factor·V_ΠΠ.
pub fn depth_terms(b: &Breakdown) -> Vec<DepthTerm> {
    vec![
        DepthTerm {
            name: "state_prep",
            value: b.search_factor * b.state_prep.depth,
        },
        DepthTerm {
            name: "pi_pipi",
            value: b.search_factor * b.pi_pipi.depth,
        },
    ]
}

pub fn assemble_depth(b: &Breakdown) -> f64 {
    depth_terms(b).iter().map(|t| t.value).sum()
}

pub fn repetitions(input: &CostModelInput) -> f64 {
    (input.constants.repetitions * lg(input.binom().sqrt() / input.delta) * lg(1.0 / input.eta)).max(1.0)
}

pub fn total_runtime(input: &CostModelInput) -> Result<ResourceReport> {
    input.validate()?;
    let s = input.s_k();
    let binom = input.binom();
    let delta_3 = input.delta / s.sqrt();
    let gaps = BudgetGaps {
        dk: input.gaps.dk,
        dk1: input.gaps.dk1,
        pipi: input.gaps.pipi,
    };
    let budget = allocate_budget(
        delta_3,
        input.mapping,
        input.n,
        input.k,
        s,
        binom,
        gaps,
        input.constants.success_constant,
    )?;
    let membership = membership_cost(input, budget.eps_m)?;
    let (lower, lower_depth) = boundary_encoding_cost(input, BoundarySide::Lower);
    let (upper, upper_depth) = boundary_encoding_cost(input, BoundarySide::Upper);
    let pi_ker = projector_cost(input, ProjectorWhich::Ker, &budget)?;
    let pi_im = projector_cost(input, ProjectorWhich::Im, &budget)?;
    let pi_pipi = projector_cost(input, ProjectorWhich::KerIm, &budget)?;
    let state_prep = state_prep_cost(input, budget.eps_psi, budget.eps_s.max(f64::MIN_POSITIVE), membership.depth)?;
    let breakdown = Breakdown {
        membership,
        boundary_lower: lower,
        boundary_lower_depth: lower_depth,
        boundary_upper: upper,
        boundary_upper_depth: upper_depth,
        pi_ker,
        pi_im,
        pi_pipi,
        state_prep,
        search_factor: input.constants.threshold_search / delta_3 * lg(1.0 / budget.eps_f),
    };
    let terms = depth_terms(&breakdown);
    let depth = terms.iter().map(|t| t.value).sum::<f64>();
    let reps = repetitions(input);
    Ok(ResourceReport {
        mapping: input.mapping,
        memory: input.memory,
        n: input.n,
        k: input.k,
        s_k: s,
        binom,
        delta: input.delta,
        eta: input.eta,
        delta_3,
        qubits: main_register_qubits(input.mapping, input.n, input.k),
        ancillas: membership.ancillas + state_prep.ancillas + lower.ancillas + upper.ancillas,
        non_clifford_depth: depth,
        depth_terms: terms,
        repetitions: reps,
        total_cost: depth * reps,
        closed_form: closed_form(input),
        breakdown,
        budget,
        constants: input.constants,
        note: REPORT_NOTE,
    })
}

/// Leading depth with ε-dependent logarithms dropped: (√S/Δ)(√(D/S)·U + α·V/(Λ_ΠΠ min Λ_∂)).
pub fn closed_form(input: &CostModelInput) -> f64 {
    let (n, k) = (input.nf(), input.kf());
    let s = input.s_k();
    let g = &input.gaps;
    let lead = s.sqrt() / input.delta;
    let amp = (input.binom() / s).sqrt();
    let gap = g.pipi * g.min_boundary();
    match input.mapping {
        Mapping::Direct => lead * (amp + n.sqrt() / gap) * n * lg(n),
        Mapping::Compact => {
            lead * (amp * (lg(n) + k * lg(k)) * permutation_factor(input.k) + n.powf(1.5) * k.max(1.0) / gap)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    #[serde(rename = "self")]
    SelfRef,
    Hayakawa,
    Lgz,
    Gk,
    Uas,
    ClassicalTextbook,
    ClassicalOpt,
    ClassicalSparse,
    ClassicalPower,
}

impl Reference {
    pub const ALL: [Reference; 9] = [
        Reference::SelfRef,
        Reference::Hayakawa,
        Reference::Lgz,
        Reference::Gk,
        Reference::Uas,
        Reference::ClassicalTextbook,
        Reference::ClassicalOpt,
        Reference::ClassicalSparse,
        Reference::ClassicalPower,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Reference::SelfRef => "self",
            Reference::Hayakawa => "hayakawa",
            Reference::Lgz => "lgz",
            Reference::Gk => "gk",
            Reference::Uas => "uas",
            Reference::ClassicalTextbook => "classical_textbook",
            Reference::ClassicalOpt => "classical_opt",
            Reference::ClassicalSparse => "classical_sparse",
            Reference::ClassicalPower => "classical_power",
        }
    }

    /// Prior-work bounds that are estimates rather than stated results.
    pub fn estimated(&self) -> bool {
        matches!(self, Reference::Hayakawa | Reference::Lgz)
    }

    pub fn is_classical(&self) -> bool {
        matches!(
            self,
            Reference::ClassicalTextbook | Reference::ClassicalOpt | Reference::ClassicalSparse | Reference::ClassicalPower
        )
    }
}

impl std::str::FromStr for Reference {
    type Err = QtdaError;
    fn from_str(s: &str) -> Result<Self> {
        Reference::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| QtdaError::InvalidArgument(format!("unknown reference {s:?}")))
    }
}

/// Footnotes carried into comparison reports.
pub const COMPARISON_FOOTNOTES: [(&str, &str); 3] = [
    ("a", "the Zeno-effect route to persistent Betti numbers suggested for lgz could not be reproduced; see the zeno subcommand"),
    ("b", "the uas bound substitutes binom(N, k+1) for |S_k^i|"),
    ("c", "prior-work bounds marked estimated are reconstructed from the subroutines those works use"),
];

/// Our direct-mapping total cost in the two-algorithm comparison form.
pub fn pairwise_cost_ours(input: &CostModelInput) -> f64 {
    let n = input.nf();
    let s = input.s_k();
    let l = lg(s.sqrt() / input.delta);
    let g = &input.gaps;
    n * lg(n) * s.sqrt() / input.delta
        * l
        * l
        * lg(1.0 / input.eta)
        * ((input.binom() / s).sqrt() + n.sqrt() / (g.pipi * g.min_boundary()))
}

pub fn hayakawa_cost(input: &CostModelInput, l1: f64, l2: f64) -> f64 {
    let (n, k) = (input.nf(), input.kf());
    let s = input.s_k();
    let l = lg(s.sqrt() / input.delta);
    n * n * s / (input.delta * input.delta) * l * ((input.binom() / s).sqrt() + n.powi(6) * k.powi(4) / (l1 * l1 * l2) * l)
}

/// Our entry in the all-algorithms comparison (logarithms dropped).
pub fn leading_cost_ours(input: &CostModelInput) -> f64 {
    let g = &input.gaps;
    input.nf().powf(1.5) * input.binom().sqrt() / (input.delta * g.pipi * g.min_boundary())
}

/// Headline improvement N^{6.5}·√binom/Δ over the persistent-Laplacian approach.
pub fn headline_speedup(input: &CostModelInput) -> f64 {
    input.nf().powf(6.5) * input.binom().sqrt() / input.delta
}

fn hayakawa_gaps(input: &CostModelInput) -> (f64, f64) {
    input.hayakawa_gaps.unwrap_or((input.gaps.min_boundary(), input.gaps.pipi))
}

/// Cost of `reference` at the input point.
pub fn reference_cost(input: &CostModelInput, reference: Reference) -> Result<f64> {
    let (n, k) = (input.nf(), input.kf());
    let binom = input.binom();
    let delta = input.delta;
    let min_gap = input.gaps.min_boundary();
    let s1 = input.s_k1.unwrap_or(binom);
    let omega = input.constants.omega;
    Ok(match reference {
        Reference::SelfRef => pairwise_cost_ours(input),
        Reference::Hayakawa => {
            let (l1, l2) = hayakawa_gaps(input);
            hayakawa_cost(input, l1, l2)
        }
        Reference::Lgz => n.powi(3) * binom / (delta * delta * min_gap),
        Reference::Gk => n * n * k * binom.sqrt() / (delta * min_gap),
        Reference::Uas => n * binom.powf(1.5) / (delta.powi(3) * min_gap),
        Reference::ClassicalTextbook => s1.powi(3),
        Reference::ClassicalOpt => s1.powf(omega),
        Reference::ClassicalSparse => {
            let sparse = input
                .s_sparse
                .ok_or_else(|| QtdaError::InvalidArgument("classical_sparse needs the sparsified simplex count".into()))?;
            s1 + sparse.powf(omega)
        }
        Reference::ClassicalPower => {
            let beta = input
                .beta
                .ok_or_else(|| QtdaError::InvalidArgument("classical_power needs the Betti number".into()))?;
            input.s_k() * (k * k * beta + k * beta * beta) / min_gap
        }
    })
}

/// Our cost in the form matching `reference`.
pub fn our_cost_for(input: &CostModelInput, reference: Reference) -> f64 {
    match reference {
        Reference::SelfRef | Reference::Hayakawa => pairwise_cost_ours(input),
        _ => leading_cost_ours(input),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub reference: Reference,
    pub param_point: String,
    pub ours: f64,
    pub theirs: f64,
    /// theirs / ours.
    pub ratio: f64,
    pub estimated: bool,
}

pub fn param_point(input: &CostModelInput) -> String {
    format!(
        "N={};k={};S_k={};Delta={};eta={};gaps={}/{}/{}",
        input.n,
        input.k,
        input.s_k(),
        input.delta,
        input.eta,
        input.gaps.dk,
        input.gaps.dk1,
        input.gaps.pipi
    )
}

pub fn compare(input: &CostModelInput, reference: Reference) -> Result<ComparisonRow> {
    input.validate()?;
    let ours = our_cost_for(input, reference);
    let theirs = reference_cost(input, reference)?;
    Ok(ComparisonRow {
        reference,
        param_point: param_point(input),
        ours,
        theirs,
        ratio: theirs / ours,
        estimated: reference.estimated(),
    })
}

pub const COMPARISON_HEADER: &str = "reference,param_point,ours,theirs,ratio";

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from(COMPARISON_HEADER);
    out.push('\n');
    for r in rows {
        let name = if r.estimated {
            format!("{}[estimated]", r.reference.name())
        } else {
            r.reference.name().to_string()
        };
        out.push_str(&format!("{name},{},{:e},{:e},{:e}\n", r.param_point, r.ours, r.theirs, r.ratio));
    }
    out
}

/// Least-squares slope of ln(y) against ln(x).
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let m = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentFit {
    pub reference: Reference,
    pub k: usize,
    pub sizes: Vec<usize>,
    pub ours_exponent: f64,
    pub theirs_exponent: f64,
}

/// Fitted N-exponents of both sides over a dense-complex grid (S_k = binom).
pub fn exponent_fit(base: &CostModelInput, reference: Reference, sizes: &[usize]) -> Result<ExponentFit> {
    if sizes.len() < 2 {
        return Err(QtdaError::InvalidArgument("exponent fit needs at least two sizes".into()));
    }
    let mut ours = Vec::new();
    let mut theirs = Vec::new();
    for &n in sizes {
        let mut input = base.clone();
        input.n = n;
        input.s_k = None;
        input.s_k1 = None;
        let row = compare(&input, reference)?;
        ours.push(row.ours);
        theirs.push(row.theirs);
    }
    let xs: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
    Ok(ExponentFit {
        reference,
        k: base.k,
        sizes: sizes.to_vec(),
        ours_exponent: loglog_slope(&xs, &ours),
        theirs_exponent: loglog_slope(&xs, &theirs),
    })
}

/// Default grid for exponent fits: N = 2^10 … 2^16.
pub fn default_fit_sizes() -> Vec<usize> {
    (10..=16).map(|e| 1usize << e).collect()
}
