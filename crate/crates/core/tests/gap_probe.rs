mod common;

use common::{boundary_oracle, cosine, nullspace, persistent_betti_oracle, random_cloud, random_fixture};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use qtda_core::complex::{build_clique_complex_at, filtration_scales, CliqueComplex, FixedPoint, PointCloud};
use qtda_core::fixtures::{self, Fixture};
use qtda_core::gaps::{
    boundary_gaps, derive_seed, gap_report, gap_scaling_sweep, harmonic_representative, pi_pi_gap, pi_pi_gap_from,
    pi_pi_singular_values, sweep_instance, zeno_counterexample, SweepGenerator, SWEEP_HEADER,
};

fn rows_of(cx: &CliqueComplex, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        Vec::new()
    } else {
        cx.simplices(k - 1).to_vec()
    }
}

/// Square root of the smallest nonzero Gram eigenvalue. The split is made on
/// the eigenvalues, where rounding sits near 1e-16 of the top.
fn gram_gap(m: &DMatrix<f64>) -> Option<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return None;
    }
    let eig = (m.transpose() * m).symmetric_eigen().eigenvalues;
    let top = eig.iter().copied().fold(0.0, f64::max);
    eig.iter().copied().filter(|&e| e > 1e-9 * top).reduce(f64::min).map(f64::sqrt)
}

/// Orthonormal column-space basis by twice-iterated Gram-Schmidt.
fn column_basis(m: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for c in 0..m.ncols() {
        let mut v = m.column(c).into_owned();
        let scale = v.norm();
        for _ in 0..2 {
            for b in &basis {
                let p = b.dot(&v);
                v -= b * p;
            }
        }
        if v.norm() > 1e-9 * scale.max(1.0) {
            let n = v.norm();
            basis.push(v / n);
        }
    }
    basis
}

/// Cosines of the principal angles between ker ∂_k^i (padded into C_k^j) and
/// im ∂_{k+1}^j.
fn principal_cosines(cx_i: &CliqueComplex, cx_j: &CliqueComplex, k: usize) -> Vec<f64> {
    let dk = boundary_oracle(&rows_of(cx_i, k), cx_i.simplices(k));
    let ker = nullspace(&dk);
    let sj = cx_j.simplices(k);
    let pos: Vec<usize> = cx_i.simplices(k).iter().map(|s| sj.iter().position(|t| t == s).unwrap()).collect();
    let kb = DMatrix::from_fn(sj.len(), ker.ncols(), |r, c| pos.iter().position(|&p| p == r).map_or(0.0, |q| ker[(q, c)]));
    let im = column_basis(&boundary_oracle(sj, cx_j.simplices(k + 1)));
    if kb.ncols() == 0 || im.is_empty() {
        return Vec::new();
    }
    let ib = DMatrix::from_columns(&im);
    (kb.transpose() * ib).svd(false, false).singular_values.iter().copied().collect()
}

fn oracle_pipi(cos: &[f64]) -> f64 {
    cos.iter().copied().filter(|&s| s > 1e-9 && s < 1.0 - 1e-9).reduce(f64::max).map_or(1.0, |s| 1.0 - s)
}

fn permuted_fixture(seed: u64, n: usize, d: usize, perm: &[usize]) -> (Fixture, Fixture) {
    let cloud = random_cloud(seed, n, d);
    let rows: Vec<Vec<f64>> = (0..n).map(|i| cloud.coords(i)).collect();
    let shuffled: Vec<Vec<f64>> = perm.iter().map(|&p| rows[p].clone()).collect();
    let other = PointCloud::from_f64(&shuffled, None, FixedPoint::default()).unwrap();
    (Fixture::from_cloud(cloud).unwrap(), Fixture::from_cloud(other).unwrap())
}

#[test]
fn single_edge_gap_is_sqrt2() {
    let cloud = PointCloud::from_f64(&[vec![0.0, 0.0], vec![1.0, 0.0]], None, FixedPoint::default()).unwrap();
    let fx = Fixture::from_cloud(cloud).unwrap();
    let cx = fx.complex_at(1.0, 1).unwrap();
    let g = boundary_gaps(&cx, &cx, 1).unwrap();
    assert!((g.lambda_dk_i.unwrap() - 2f64.sqrt()).abs() < 1e-12);
    assert_eq!(g.lambda_dk1_j, None);
}

#[test]
fn house_gaps_are_positive() {
    let fx = fixtures::house();
    let cx = fx.complex_at(fixtures::HOUSE_MU2, 2).unwrap();
    for k in 0..=1 {
        let g = gap_report(&cx, &cx, k).unwrap();
        if k == 1 {
            assert!(g.lambda_dk_i.unwrap() > 0.0);
            assert!(g.lambda_dk1_j.unwrap() > 0.0);
        }
        assert!(g.lambda_laplacian.unwrap() > 0.0);
        assert_eq!(g.lambda_pipi, Some(1.0));
    }
}

#[test]
fn zero_operator_gap_is_absent() {
    let cloud = PointCloud::from_f64(&[vec![0.0, 0.0], vec![5.0, 0.0]], None, FixedPoint::default()).unwrap();
    let fx = Fixture::from_cloud(cloud).unwrap();
    let cx = fx.complex(0, 1).unwrap();
    assert_eq!(cx.count(1), 0);
    let g = boundary_gaps(&cx, &cx, 0).unwrap();
    assert_eq!(g.lambda_dk_i, None);
    assert_eq!(g.lambda_dk1_j, None);
}

#[test]
fn orthogonal_or_empty_product_gives_one() {
    assert_eq!(pi_pi_gap_from(&[]), 1.0);
    assert_eq!(pi_pi_gap_from(&[0.0, 0.0]), 1.0);
    assert_eq!(pi_pi_gap_from(&[1.0, 0.0]), 1.0);
    // No triangles: Im ∂_2 is zero, so the product vanishes.
    let fx = fixtures::square();
    let cx = fx.complex_at(fixtures::SQUARE_MU_I, 2).unwrap();
    assert_eq!(pi_pi_gap(&cx, &cx, 1).unwrap(), 1.0);
}

#[test]
fn fixture_pairs_match_principal_angles() {
    for name in fixtures::FIXTURE_NAMES {
        let (fx, mu_i, mu_j) = fixtures::named(name).unwrap();
        let (ci, cj) = fx.pair(mu_i, mu_j, 2).unwrap();
        let got = pi_pi_gap(&ci, &cj, 1).unwrap();
        let want = oracle_pipi(&principal_cosines(&ci, &cj, 1));
        assert!(got > 0.0 && got <= 1.0, "{name}: {got}");
        assert!((got - want).abs() < 1e-9, "{name}: {got} vs {want}");
    }
}

#[test]
fn apex_pair_gap_is_strictly_inside() {
    let fx = fixtures::square_apex();
    let (ci, cj) = fx.pair(fixtures::APEX_MU_I, fixtures::apex_mu_j(), 2).unwrap();
    let g = pi_pi_gap(&ci, &cj, 1).unwrap();
    assert!(g > 0.0 && g < 1.0, "{g}");
    // The 4-cycle and ∂(ABX) share AB only: cos θ = 1/(2·√3).
    let want = 1.0 - 1.0 / (2.0 * 3f64.sqrt());
    assert!((g - want).abs() < 1e-12, "{g} vs {want}");
}

#[test]
fn zeno_counterexample_numbers() {
    let z = zeno_counterexample().unwrap();
    let (a, b) = z.overlap_pair;
    assert!((a - 0.945).abs() < 1e-3, "{a}");
    assert!((b - 0.055).abs() < 1e-3, "{b}");
    assert!(a + b <= 1.0 + 1e-12);
    assert!(z.cosine > 1.0 - 1e-12, "{}", z.cosine);
    let g = z.reference_chain.iter().fold(0i64, |acc, &v| num_gcd(acc, v.abs()));
    let reduced: Vec<i64> = z.reference_chain.iter().map(|v| v / g).collect();
    let neg: Vec<i64> = reduced.iter().map(|v| -v).collect();
    assert!(z.kernel_chain == reduced || z.kernel_chain == neg, "{:?} vs {:?}", z.kernel_chain, reduced);
    assert!(z.overlaps.iter().sum::<f64>() <= 1.0 + 1e-12);
}

fn num_gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        num_gcd(b, a % b)
    }
}

#[test]
fn house_harmonic_representative() {
    let fx = fixtures::house();
    let cx = fx.complex_at(fixtures::HOUSE_MU2, 2).unwrap();
    let basis = harmonic_representative(&cx, 1).unwrap();
    assert_eq!(basis.len(), 1);
    let labels: Vec<String> = cx.simplices(1).iter().map(|s| cx.label(s)).collect();
    let mut want = vec![0.0; labels.len()];
    for (name, c) in [("AB", -3.0), ("BC", -3.0), ("CD", -3.0 + 1.0), ("AD", 3.0), ("DE", 1.0), ("CE", -1.0)] {
        want[labels.iter().position(|l| l == name).unwrap()] += c;
    }
    let got: Vec<f64> = basis[0].iter().copied().collect();
    assert!(cosine(&got, &want).abs() > 1.0 - 1e-9);
}

#[test]
fn connected_harmonic_zero_is_constant() {
    let fx = fixtures::house();
    let cx = fx.complex_at(fixtures::HOUSE_MU2, 1).unwrap();
    let basis = harmonic_representative(&cx, 0).unwrap();
    assert_eq!(basis.len(), 1);
    let c = basis[0][0];
    assert!(basis[0].iter().all(|&v| (v - c).abs() < 1e-12));
    assert!((c.abs() - 1.0 / (cx.count(0) as f64).sqrt()).abs() < 1e-12);
}

#[test]
fn sweep_is_deterministic() {
    let a = gap_scaling_sweep(SweepGenerator::RandomGeometric, &[8], 1, 1, 42).unwrap();
    let b = gap_scaling_sweep(SweepGenerator::RandomGeometric, &[8], 1, 1, 42).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert!(a.to_csv().starts_with(SWEEP_HEADER));
    assert_eq!(a.rows.len() + a.skipped.len(), 1);
}

#[test]
fn geometric_sweep_matches_recomputation() {
    let (n, k, seed) = (12, 1, 7);
    let table = gap_scaling_sweep(SweepGenerator::RandomGeometric, &[n], k, 4, seed).unwrap();
    assert!(!table.rows.is_empty());
    for row in &table.rows {
        let (dm, sq_i, sq_j) = sweep_instance(SweepGenerator::RandomGeometric, n, derive_seed(seed, n, row.trial)).unwrap();
        let sched = filtration_scales(&dm);
        let mu = |sq: u64| (sq as f64 / 4f64.powi(dm.frac_bits() as i32)).sqrt();
        assert!((row.mu - mu(sq_i)).abs() < 1e-12);
        let ci = build_clique_complex_at(&dm, sq_i, mu(sq_i), sched.entry_index(sq_i), k + 1).unwrap();
        let cj = build_clique_complex_at(&dm, sq_j, mu(sq_j), sched.entry_index(sq_j), k + 1).unwrap();
        let dk = boundary_oracle(&rows_of(&ci, k), ci.simplices(k));
        let dk1 = boundary_oracle(cj.simplices(k), cj.simplices(k + 1));
        let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(x), Some(y)) => (x - y).abs() < 1e-9 * y.max(1.0),
            (None, None) => true,
            _ => false,
        };
        assert!(close(row.gaps.lambda_dk_i, gram_gap(&dk)), "trial {} {:?} {:?}", row.trial, row.gaps, gram_gap(&dk));
        assert!(close(row.gaps.lambda_dk1_j, gram_gap(&dk1)), "trial {}", row.trial);
        let pipi = oracle_pipi(&principal_cosines(&ci, &cj, k));
        assert!((row.gaps.lambda_pipi.unwrap() - pipi).abs() < 1e-9);
        assert_eq!(row.beta, persistent_betti_oracle(&ci, &cj, k));
    }
    let summary = table.summary();
    assert!(summary.iter().all(|q| q.q1 <= q.median && q.median <= q.q3));
}

#[test]
fn graph_sweep_betti_matches_oracle() {
    let (n, k, seed) = (8, 1, 3);
    let table = gap_scaling_sweep(SweepGenerator::RandomGraph, &[n], k, 6, seed).unwrap();
    assert_eq!(table.rows.len() + table.skipped.len(), 6);
    for row in &table.rows {
        let (dm, sq_i, sq_j) = sweep_instance(SweepGenerator::RandomGraph, n, derive_seed(seed, n, row.trial)).unwrap();
        let sched = filtration_scales(&dm);
        let ci = build_clique_complex_at(&dm, sq_i, 1.0, sched.entry_index(sq_i), k + 1).unwrap();
        let cj = build_clique_complex_at(&dm, sq_j, 2f64.sqrt(), sched.entry_index(sq_j), k + 1).unwrap();
        assert_eq!(row.beta, persistent_betti_oracle(&ci, &cj, k), "trial {}", row.trial);
        assert_eq!(
            row.beta,
            qtda_core::classical::persistent_betti_via_laplacian(&ci, &cj, k).unwrap()
        );
    }
}

#[test]
fn sweep_rejects_oversized_input() {
    assert!(gap_scaling_sweep(SweepGenerator::RandomGraph, &[40], 1, 1, 0).is_err());
    assert!(gap_scaling_sweep(SweepGenerator::RandomGraph, &[1], 1, 1, 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gaps_match_gram_eigenvalues(seed in 0u64..10_000, n in 4usize..8, k in 0usize..3) {
        let f = random_fixture(seed, n, 2);
        let len = f.schedule.len();
        let cx = f.complex(len / 2, k + 1).unwrap();
        let g = boundary_gaps(&cx, &cx, k).unwrap();
        let dk = boundary_oracle(&rows_of(&cx, k), cx.simplices(k));
        let dk1 = boundary_oracle(cx.simplices(k), cx.simplices(k + 1));
        for (got, want) in [(g.lambda_dk_i, gram_gap(&dk)), (g.lambda_dk1_j, gram_gap(&dk1))] {
            match (got, want) {
                (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-9 * y.max(1.0), "{} vs {}", x, y),
                (None, None) => {}
                other => prop_assert!(false, "{other:?}"),
            }
        }
    }

    #[test]
    fn pipi_collapses_and_stays_in_unit_interval(seed in 0u64..10_000, n in 4usize..8, k in 0usize..3) {
        let f = random_fixture(seed, n, 2);
        let len = f.schedule.len();
        let (i, j) = (len / 3, 2 * len / 3);
        let ci = f.complex(i, k + 1).unwrap();
        let cj = f.complex(j, k + 1).unwrap();
        prop_assert_eq!(pi_pi_gap(&ci, &ci, k).unwrap(), 1.0);
        prop_assert_eq!(pi_pi_gap(&cj, &cj, k).unwrap(), 1.0);
        for s in pi_pi_singular_values(&ci, &cj, k).unwrap() {
            prop_assert!((-1e-12..=1.0 + 1e-9).contains(&s), "{}", s);
        }
        let got = pi_pi_gap(&ci, &cj, k).unwrap();
        let want = oracle_pipi(&principal_cosines(&ci, &cj, k));
        prop_assert!((got - want).abs() < 1e-8, "{} vs {}", got, want);
    }

    #[test]
    fn gaps_invariant_under_relabeling(seed in 0u64..10_000, n in 3usize..8, k in 0usize..2, rot in 1usize..7) {
        let perm: Vec<usize> = (0..n).map(|v| (v * 5 + rot) % n).collect();
        prop_assume!({
            let mut p = perm.clone();
            p.sort();
            p == (0..n).collect::<Vec<_>>()
        });
        let (a, b) = permuted_fixture(seed, n, 2, &perm);
        let len = a.schedule.len();
        prop_assert_eq!(len, b.schedule.len());
        let (i, j) = (len / 3, 2 * len / 3);
        let ga = gap_report(&a.complex(i, k + 1).unwrap(), &a.complex(j, k + 1).unwrap(), k).unwrap();
        let gb = gap_report(&b.complex(i, k + 1).unwrap(), &b.complex(j, k + 1).unwrap(), k).unwrap();
        for (x, y) in [
            (ga.lambda_dk_i, gb.lambda_dk_i),
            (ga.lambda_dk1_j, gb.lambda_dk1_j),
            (ga.lambda_pipi, gb.lambda_pipi),
            (ga.lambda_laplacian, gb.lambda_laplacian),
        ] {
            match (x, y) {
                (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-9, "{} vs {}", x, y),
                (None, None) => {}
                other => prop_assert!(false, "{other:?}"),
            }
        }
    }

    #[test]
    fn harmonic_basis_is_orthonormal_and_harmonic(seed in 0u64..10_000, n in 4usize..8, k in 0usize..3) {
        let f = random_fixture(seed, n, 3);
        let len = f.schedule.len();
        let cx = f.complex(len / 2, k + 1).unwrap();
        let basis = harmonic_representative(&cx, k).unwrap();
        let dk = boundary_oracle(&rows_of(&cx, k), cx.simplices(k));
        let dk1 = boundary_oracle(cx.simplices(k), cx.simplices(k + 1));
        for (a, u) in basis.iter().enumerate() {
            if dk.nrows() > 0 {
                prop_assert!((&dk * u).norm() < 1e-9);
            }
            if dk1.ncols() > 0 {
                prop_assert!((dk1.transpose() * u).norm() < 1e-9);
            }
            for (b, v) in basis.iter().enumerate() {
                let want = if a == b { 1.0 } else { 0.0 };
                prop_assert!((u.dot(v) - want).abs() < 1e-9);
            }
        }
        let lap_kernel = cx.count(k) - common::svd_rank(&dk) - common::svd_rank(&dk1);
        prop_assert_eq!(basis.len(), lap_kernel);
    }
}
