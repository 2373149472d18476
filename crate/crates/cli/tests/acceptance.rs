//! Acceptance gate: runs the eleven release criteria at their stated
//! tolerances and prints one PASS/FAIL line per criterion. Exits non-zero if
//! any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use qtda_core::boundary::{persistent_laplacian, restricted_boundary, naive_restricted_boundary};
use qtda_core::classical::{
    betti_rank_formula, persistence_column_reduction, persistent_betti_rank_formula, persistent_betti_via_laplacian,
    triple_check,
};
use qtda_core::complex::{CliqueComplex, FixedPoint, Mapping, PointCloud};
use qtda_core::emulator::{prepare_quantum_instance, purified_overlap_matrix, run_seed, ProjectorMode, QuantumConfig};
use qtda_core::fixtures::{self, Fixture};
use qtda_core::gaps::{harmonic_representative, pi_pi_gap, zeno_counterexample};
use qtda_core::poly::{threshold_polynomial, Orientation, DEGREE_CONSTANT};
use qtda_core::resources::{main_register_qubits, total_runtime, CostGaps, CostModelInput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, Failure>;

struct Failure(String);

impl From<qtda_core::QtdaError> for Failure {
    fn from(e: qtda_core::QtdaError) -> Self {
        Failure(e.to_string())
    }
}

impl From<String> for Failure {
    fn from(s: String) -> Self {
        Failure(s)
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn cloud(rng: &mut ChaCha8Rng, n: usize, d: usize) -> PointCloud {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(0..64) as f64 / 16.0).collect())
        .collect();
    PointCloud::from_f64(&rows, None, FixedPoint::default()).unwrap()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn labelled(cx: &CliqueComplex, k: usize, terms: &[(&str, f64)]) -> Vec<f64> {
    let labels: Vec<String> = cx.simplices(k).iter().map(|s| cx.label(s)).collect();
    let mut v = vec![0.0; labels.len()];
    for (name, c) in terms {
        v[labels.iter().position(|l| l == name).expect("label present")] += c;
    }
    v
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let detail = f()?;
    let took = start.elapsed();
    match limit {
        Some(l) if took > l => Err(Failure(format!("{detail}; took {took:.2?}, limit {l:?}"))),
        _ => Ok(format!("{detail} [{took:.2?}]")),
    }
}

fn c1_worked_example() -> Outcome {
    let fx = fixtures::house();
    let cx = fx.complex_at(fixtures::HOUSE_MU2, 2)?;
    let idx = fx.scale_index(fixtures::HOUSE_MU2)?;
    let pairing = persistence_column_reduction(&fx.schedule, &fx.dm, 2)?;
    for (k, want) in [(0, 1), (1, 1)] {
        let got = [
            pairing.betti(idx, idx, k),
            betti_rank_formula(&cx, k)?,
            persistent_betti_via_laplacian(&cx, &cx, k)?,
        ];
        ensure(got.iter().all(|&b| b == want), || format!("β_{k}: engines gave {got:?}, want {want}"))?;
    }
    let basis = harmonic_representative(&cx, 1)?;
    ensure(basis.len() == 1, || format!("ker Δ_1 has dimension {}", basis.len()))?;
    // −3(AB+BC+CD−AD) + ∂_2(CDE), with ∂_2(CDE) = DE − CE + CD.
    let want = labelled(&cx, 1, &[("AB", -3.0), ("BC", -3.0), ("CD", -3.0), ("AD", 3.0), ("DE", 1.0), ("CE", -1.0), ("CD", 1.0)]);
    let got: Vec<f64> = basis[0].iter().copied().collect();
    let c = cosine(&got, &want).abs();
    ensure(c >= 1.0 - 1e-9, || format!("harmonic cosine {c}"))?;
    Ok(format!("β_0 = β_1 = 1 by three engines, harmonic cosine {c:.12}"))
}

fn c2_restricted_boundary() -> Outcome {
    let fx = fixtures::square();
    let (ci, cj) = fx.pair(fixtures::SQUARE_MU_I, fixtures::SQUARE_MU_J, 2)?;
    let rb = restricted_boundary(&ci, &cj, 1)?;
    ensure(rb.matrix.ncols() == 2 && rb.matrix.rows.len() == 4, || "restricted boundary is not 4×2".into())?;
    ensure(rb.rank() == 1, || format!("rank {}", rb.rank()))?;
    let m = rb.matrix.to_dmatrix();
    // Row order AB, AD, BC, CD: the cycle AB + BC + CD − AD.
    let labels: Vec<&str> = rb.matrix.rows.iter().map(String::as_str).collect();
    let cycle: Vec<f64> = labels.iter().map(|l| if *l == "AD" { -1.0 } else { 1.0 }).collect();
    for c in 0..m.ncols() {
        let col: Vec<f64> = m.column(c).iter().copied().collect();
        ensure(cosine(&col, &cycle).abs() > 1.0 - 1e-12, || format!("column {c} not on the cycle: {col:?}"))?;
    }
    let beta = persistent_laplacian(&ci, &cj, 1)?.kernel_dim();
    ensure(beta == 0, || format!("square β_1^(i,j) = {beta}"))?;
    let naive = naive_restricted_boundary(&ci, &cj, 1)?.rank();
    ensure(naive == 3, || format!("naive rank {naive}"))?;

    let fx = fixtures::square_apex();
    let (ai, aj) = fx.pair(fixtures::APEX_MU_I, fixtures::apex_mu_j(), 2)?;
    let apex_beta = persistent_betti_rank_formula(&ai, &aj, 1)?;
    let apex_naive = naive_restricted_boundary(&ai, &aj, 1)?.rank();
    ensure(apex_beta == 1 && apex_naive == 1, || format!("apex β = {apex_beta}, naive rank {apex_naive}"))?;
    Ok("square rank 1 on the 4-cycle, β = 0, naive rank 3; apex β = 1, naive rank 1".into())
}

fn c3_zeno() -> Outcome {
    let z = zeno_counterexample()?;
    let (a, b) = z.overlap_pair;
    ensure((a - 0.945).abs() <= 1e-3 && (b - 0.055).abs() <= 1e-3, || format!("overlaps ({a}, {b})"))?;
    Ok(format!("overlaps ({a:.4}, {b:.4})"))
}

fn c4_triple_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut clouds, mut checks, mut torsion) = (0, 0, 0);
    while clouds < 200 {
        let n = rng.random_range(4..=10);
        let d = rng.random_range(2..=3);
        let fx = Fixture::from_cloud(cloud(&mut rng, n, d))?;
        let len = fx.schedule.len();
        let mut pairs: Vec<(usize, usize)> = (0..len).flat_map(|i| [(i, i), (i, i + 1)]).filter(|&(_, j)| j < len).collect();
        for _ in 0..3 {
            let i = rng.random_range(0..len);
            let j = rng.random_range(i..len);
            pairs.push((i, j));
        }
        let k_max = 3.min(n - 1);
        for a in triple_check(&fx.dm, &fx.schedule, &pairs, k_max)? {
            if a.torsion {
                torsion += 1;
                continue;
            }
            ensure(a.agrees(), || format!("cloud {clouds}: disagreement {a:?}"))?;
            checks += 1;
        }
        clouds += 1;
    }
    Ok(format!("{clouds} clouds, {checks} (i, j, k) instances agree, {torsion} torsion-flagged excluded"))
}

fn c5_emulator() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let config = QuantumConfig { delta: 0.4, eta: 0.05, mode: ProjectorMode::Poly, ..QuantumConfig::default() };
    let (mut instances, mut skipped, mut worst) = (0, 0, 100usize);
    let mut betas = Vec::new();
    while instances < 20 {
        let n = rng.random_range(5..=7);
        let fx = Fixture::from_cloud(cloud(&mut rng, n, 2))?;
        let len = fx.schedule.len();
        let i = rng.random_range(len / 4..len * 3 / 4);
        let j = rng.random_range(i..len);
        let (ci, cj) = (fx.complex(i, 2)?, fx.complex(j, 2)?);
        let prep = match prepare_quantum_instance(&ci, &cj, 1, config) {
            Ok(p) => p,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        let truth = persistent_betti_rank_formula(&ci, &cj, 1)? as u64;
        let mut hits = 0;
        for s in 0..100 {
            if run_seed(&prep, s)?.beta_rounded == Some(truth) {
                hits += 1;
            }
        }
        ensure(hits >= 93, || format!("instance {instances} (β = {truth}): {hits}/100"))?;
        worst = worst.min(hits);
        betas.push(truth);
        instances += 1;
    }
    betas.sort_unstable();
    betas.dedup();
    Ok(format!("20 instances × 100 seeds, worst {worst}/100, β values {betas:?}, {skipped} infeasible draws skipped"))
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.iter().copied().fold(0.0, f64::max)
}

fn c6_projector_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut instances, mut worst) = (0, 0.0f64);
    let mut skipped = std::collections::BTreeMap::new();
    let ideal_cfg = QuantumConfig { mode: ProjectorMode::Ideal, ..QuantumConfig::default() };
    while instances < 100 {
        let n = rng.random_range(4..=7);
        let k = rng.random_range(0..=1);
        let fx = Fixture::from_cloud(cloud(&mut rng, n, 2))?;
        let len = fx.schedule.len();
        let i = rng.random_range(0..len);
        let j = rng.random_range(i..len);
        let (ci, cj) = (fx.complex(i, k + 1)?, fx.complex(j, k + 1)?);
        let poly = match prepare_quantum_instance(&ci, &cj, k, QuantumConfig::default()) {
            Ok(p) => p,
            Err(e) => {
                let reason = if ci.count(k) == 0 { "empty S_k".to_string() } else { e.to_string() };
                *skipped.entry(reason).or_insert(0usize) += 1;
                continue;
            }
        };
        let ideal = prepare_quantum_instance(&ci, &cj, k, ideal_cfg)?;
        for (p, q) in poly.projectors.iter().zip(&ideal.projectors) {
            let dev = spectral_norm(&(&p.matrix - &q.matrix));
            ensure(dev <= p.bound, || format!("instance {instances}: {:?} deviation {dev:e} > bound {:e}", p.kind, p.bound))?;
            if p.bound > 0.0 {
                worst = worst.max(dev / p.bound);
            }
        }
        instances += 1;
    }
    Ok(format!("{instances} instances, max deviation/bound {worst:.3e}, skipped draws {skipped:?}"))
}

fn c7_purified_overlap() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = QuantumConfig { mode: ProjectorMode::Ideal, ..QuantumConfig::default() };
    let (mut pairs, mut worst) = (0, 0.0f64);
    while pairs < 50 {
        let n = rng.random_range(4..=7);
        let fx = Fixture::from_cloud(cloud(&mut rng, n, 2))?;
        let len = fx.schedule.len();
        let i = rng.random_range(0..len);
        let j = rng.random_range(i..len);
        let (ci, cj) = (fx.complex(i, 2)?, fx.complex(j, 2)?);
        let Ok(prep) = prepare_quantum_instance(&ci, &cj, 1, cfg) else { continue };
        for p in &prep.projectors {
            let d = p.matrix.nrows();
            let rank = p.matrix.trace().round();
            let mut psi = DVector::zeros(d * d);
            for s in 0..d {
                psi[s * d + s] = 1.0 / (d as f64).sqrt();
            }
            let lifted = p.matrix.kronecker(&DMatrix::<f64>::identity(d, d));
            let direct = (lifted * &psi).norm_squared();
            let err = (direct - rank / d as f64).abs().max((purified_overlap_matrix(&p.matrix).powi(2) - rank / d as f64).abs());
            ensure(err <= 1e-12, || format!("pair {pairs}: error {err:e}"))?;
            worst = worst.max(err);
        }
        pairs += 1;
    }
    Ok(format!("{pairs} pairs, max |‖(Π⊗I)ψ‖² − rank/d| = {worst:.1e}"))
}

fn c8_collapse() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cfg = QuantumConfig { mode: ProjectorMode::Ideal, ..QuantumConfig::default() };
    let mut tested = 0;
    let mut complexes: Vec<CliqueComplex> = Vec::new();
    for name in fixtures::FIXTURE_NAMES {
        let (fx, mu_i, mu_j) = fixtures::named(name)?;
        complexes.push(fx.complex_at(mu_i, 2)?);
        complexes.push(fx.complex_at(mu_j, 2)?);
    }
    for _ in 0..40 {
        let n = rng.random_range(4..=7);
        let fx = Fixture::from_cloud(cloud(&mut rng, n, 2))?;
        let i = rng.random_range(0..fx.schedule.len());
        complexes.push(fx.complex(i, 2)?);
    }
    for cx in &complexes {
        for k in 0..=1 {
            let g = pi_pi_gap(cx, cx, k)?;
            ensure(g == 1.0, || format!("Λ_ΠΠ(i, i, {k}) = {g}"))?;
            if cx.count(k) == 0 {
                continue;
            }
            let prep = prepare_quantum_instance(cx, cx, k, cfg)?;
            let [_, pi, pki] = &prep.projectors;
            let dev = (&pki.matrix - &pi.matrix).abs().max();
            ensure(dev < 1e-10, || format!("Π_KerIm differs from Π_Im by {dev:e}"))?;
            tested += 1;
        }
    }
    Ok(format!("Λ_ΠΠ = 1 and Π_KerIm = Π_Im on {tested} (complex, k) cases"))
}

fn c9_polynomials() -> Outcome {
    let mut worst_ratio = 0.0f64;
    let mut cases = 0;
    for w in [0.01, 0.02, 0.05, 0.1, 0.2, 0.3] {
        for eps in [1e-1, 1e-2, 1e-4, 1e-6, 1e-9, 1e-12] {
            for c in [w + 0.01, 0.5, 1.0 - w - 0.01] {
                if !(c > w && c + w <= 1.0) {
                    continue;
                }
                let p = threshold_polynomial(c, w, eps, Orientation::HighPass)?;
                let err = p.band_error(10_000);
                ensure(err <= eps * (1.0 + 1e-9), || format!("w = {w}, ε = {eps}: sup error {err:e}"))?;
                let bound = DEGREE_CONSTANT / w * (1.0 / eps).ln().max(std::f64::consts::LN_2);
                ensure(p.degree() as f64 <= bound, || format!("w = {w}, ε = {eps}: degree {} > {bound:.0}", p.degree()))?;
                worst_ratio = worst_ratio.max(p.degree() as f64 / bound);
                cases += 1;
            }
        }
    }
    Ok(format!("{cases} (w, ε, c) cases, C = {DEGREE_CONSTANT}, max degree/bound {worst_ratio:.3}"))
}

fn c10_resources() -> Outcome {
    let mut probes = 0;
    for mapping in [Mapping::Direct, Mapping::Compact] {
        for n in [16usize, 48, 128] {
            for k in [1usize, 2, 3] {
                for delta in [0.1, 0.4, 1.0] {
                    for eta in [0.01, 0.05, 0.2] {
                        for gap in [0.1, 0.4, 0.9] {
                            let mut base = CostModelInput::new(n, k, mapping);
                            base.delta = delta;
                            base.eta = eta;
                            base.gaps = CostGaps::uniform(gap);
                            let r = total_runtime(&base)?;
                            let sum: f64 = r.depth_terms.iter().map(|t| t.value).sum();
                            ensure(r.non_clifford_depth == sum && r.total_cost == sum * r.repetitions, || {
                                format!("assembly mismatch at {base:?}")
                            })?;
                            probes += monotone(&base)?;
                        }
                    }
                }
            }
        }
    }
    let mut crossover = 0;
    for n in 2..=512usize {
        let width = (n as f64 + 1.0).log2().ceil() as u64;
        for k in 0..n.min(16) {
            let compact = main_register_qubits(Mapping::Compact, n, k);
            let direct = main_register_qubits(Mapping::Direct, n, k);
            let want = (k as u64 + 1) * width < n as u64;
            ensure((compact < direct) == want, || format!("crossover wrong at N = {n}, k = {k}"))?;
            crossover += 1;
        }
    }
    Ok(format!(
        "3^5 grid × 2 mappings: assembly exact, {probes} monotonicity probes, crossover on {crossover} (N, k); asymptotic claims checked as formula identities only"
    ))
}

fn costs(input: &CostModelInput) -> Result<[f64; 4], Failure> {
    let r = total_runtime(input)?;
    Ok([r.non_clifford_depth, r.repetitions, r.total_cost, r.qubits as f64])
}

fn monotone(base: &CostModelInput) -> Result<usize, Failure> {
    let at = costs(base)?;
    let mut variants: Vec<(&str, CostModelInput, bool)> = Vec::new();
    let mut x = base.clone();
    x.n += 1;
    variants.push(("N", x, true));
    let mut x = base.clone();
    x.k += 1;
    variants.push(("k", x, true));
    let mut x = base.clone();
    x.delta *= 1.1;
    variants.push(("Δ", x, false));
    let mut x = base.clone();
    x.eta *= 1.1;
    variants.push(("η", x, false));
    let mut x = base.clone();
    x.gaps.dk *= 1.1;
    variants.push(("Λ_∂k", x, false));
    let mut x = base.clone();
    x.gaps.dk1 *= 1.1;
    variants.push(("Λ_∂k+1", x, false));
    let mut x = base.clone();
    x.gaps.pipi = (x.gaps.pipi * 1.1).min(1.0);
    variants.push(("Λ_ΠΠ", x, false));
    let count = variants.len();
    for (label, other, grows) in variants {
        let c = costs(&other)?;
        for (a, b) in at.iter().zip(&c) {
            let ok = if grows { *b >= a * (1.0 - 1e-12) } else { *b <= a * (1.0 + 1e-12) };
            ensure(ok, || format!("{label} probe at {base:?}: {at:?} -> {c:?}"))?;
        }
    }
    Ok(count)
}

fn c11_determinism() -> Outcome {
    let runs: [&[&str]; 6] = [
        &["persistence", "--fixture", "house", "--kmax", "2", "--scales", "all"],
        &["qtda", "--fixture", "apex", "--seed", "9", "--seeds", "5"],
        &["resources", "--n", "40", "--k", "2", "--mapping", "compact"],
        &["compare", "--n", "40", "--k", "2"],
        &["gaps", "--sizes", "6,7", "--trials", "2", "--seed", "3"],
        &["zeno"],
    ];
    for args in runs {
        let go = || Command::new(env!("CARGO_BIN_EXE_qtda")).args(args).env_remove("QTDA_CONSTANTS").output();
        let a = go().map_err(|e| e.to_string())?;
        let b = go().map_err(|e| e.to_string())?;
        ensure(a.status.success(), || format!("{args:?} failed: {}", String::from_utf8_lossy(&a.stderr)))?;
        ensure(a.stdout == b.stdout, || format!("{args:?} output differs between runs"))?;
    }
    Ok(format!("{} subcommands byte-identical across repeated runs", runs.len()))
}

fn run(name: &str, limit: Option<Duration>, f: fn() -> Outcome) -> bool {
    let result = catch_unwind(AssertUnwindSafe(|| timed(limit, f)))
        .unwrap_or_else(|p| {
        let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
        Err(Failure(format!("panicked: {}", msg.unwrap_or_default())))
    });
    match &result {
        Ok(detail) => println!("PASS  {name}: {detail}"),
        Err(Failure(detail)) => println!("FAIL  {name}: {detail}"),
    }
    result.is_ok()
}

fn main() {
    let criteria: [(&str, Option<Duration>, fn() -> Outcome); 11] = [
        ("criterion 1  worked-example fidelity", Some(Duration::from_secs(1)), c1_worked_example),
        ("criterion 2  restricted-boundary fidelity", Some(Duration::from_secs(1)), c2_restricted_boundary),
        ("criterion 3  Zeno overlaps", Some(Duration::from_secs(1)), c3_zeno),
        ("criterion 4  triple-oracle agreement", Some(Duration::from_secs(120)), c4_triple_oracle),
        ("criterion 5  emulator correctness", Some(Duration::from_secs(600)), c5_emulator),
        ("criterion 6  projector error bounds", None, c6_projector_bounds),
        ("criterion 7  purified-overlap identity", None, c7_purified_overlap),
        ("criterion 8  Λ_ΠΠ collapse", None, c8_collapse),
        ("criterion 9  threshold-polynomial contract", None, c9_polynomials),
        ("criterion 10 resource-model consistency", None, c10_resources),
        ("criterion 11 CLI determinism", None, c11_determinism),
    ];
    // Filter by substring, e.g. `cargo test --test acceptance -- 'criterion 5'`.
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, limit, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        if !run(name, limit, f) {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
