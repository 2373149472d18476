mod common;

use common::{boundary_oracle, cosine, persistent_betti_oracle, random_fixture, svd_rank};
use nalgebra::DMatrix;
use proptest::prelude::*;
use qtda_core::boundary::{
    boundary_int_of, boundary_matrix, check_nested, combinatorial_laplacian, naive_restricted_boundary,
    persistent_laplacian, persistent_laplacian_schur, restricted_boundary, FieldTag,
};
use qtda_core::complex::CliqueComplex;
use qtda_core::fixtures;
use qtda_core::QtdaError;

fn column(m: &DMatrix<f64>, c: usize) -> Vec<f64> {
    m.column(c).iter().copied().collect()
}

fn house_mu2() -> CliqueComplex {
    fixtures::house().complex_at(fixtures::HOUSE_MU2, 1).unwrap()
}

fn entry(cx: &CliqueComplex, m: &DMatrix<f64>, row: &[usize], col_k: usize, col: &[usize]) -> f64 {
    let r = cx.index_of(row).unwrap();
    let c = cx.index_of(col).unwrap();
    assert_eq!(col.len(), col_k + 1);
    m[(r, c)]
}

#[test]
fn edge_boundary_is_head_minus_tail() {
    let cx = house_mu2();
    let d1 = boundary_matrix(&cx, 1, FieldTag::Rational).unwrap().to_dmatrix();
    // A=0, B=1
    assert_eq!(entry(&cx, &d1, &[1], 1, &[0, 1]), 1.0);
    assert_eq!(entry(&cx, &d1, &[0], 1, &[0, 1]), -1.0);
    let col = cx.index_of(&[0, 1]).unwrap();
    assert_eq!(d1.column(col).iter().filter(|v| **v != 0.0).count(), 2);
}

#[test]
fn triangle_boundary_alternates() {
    let cx = house_mu2();
    let d2 = boundary_matrix(&cx, 2, FieldTag::Rational).unwrap();
    assert_eq!(d2.cols, vec!["CDE".to_string()]);
    let m = d2.to_dmatrix();
    // ∂[CDE] = DE − CE + CD
    assert_eq!(entry(&cx, &m, &[3, 4], 2, &[2, 3, 4]), 1.0);
    assert_eq!(entry(&cx, &m, &[2, 4], 2, &[2, 3, 4]), -1.0);
    assert_eq!(entry(&cx, &m, &[2, 3], 2, &[2, 3, 4]), 1.0);
    assert_eq!(m.iter().filter(|v| **v != 0.0).count(), 3);
}

#[test]
fn rectangle_cycle_has_zero_boundary() {
    let cx = house_mu2();
    let d1 = boundary_matrix(&cx, 1, FieldTag::Rational).unwrap().to_dmatrix();
    let mut v = DMatrix::zeros(cx.count(1), 1);
    for (e, s) in [(&[0usize, 1][..], 1.0), (&[1, 2], 1.0), (&[2, 3], 1.0), (&[0, 3], -1.0)] {
        v[(cx.index_of(e).unwrap(), 0)] = s;
    }
    assert!((d1 * v).iter().all(|x| *x == 0.0));
}

#[test]
fn vertex_boundary_is_empty_map() {
    let cx = house_mu2();
    let d0 = boundary_matrix(&cx, 0, FieldTag::Rational).unwrap();
    assert_eq!(d0.nrows(), 0);
    assert_eq!(d0.ncols(), 5);
    assert!(d0.entries.is_empty());
}

#[test]
fn unmaterialized_dimension_is_rejected() {
    let cx = house_mu2();
    assert!(matches!(
        boundary_matrix(&cx, cx.top_dim() + 1, FieldTag::Rational),
        Err(QtdaError::InvalidArgument(_))
    ));
}

#[test]
fn house_harmonic_representative() {
    let cx = house_mu2();
    let lap = combinatorial_laplacian(&cx, 1).unwrap();
    assert_eq!(lap.kernel_dim(), 1);
    assert_eq!(lap.kernel_dim_spectral(1e-9), 1);
    let eig = lap.delta.clone().symmetric_eigen();
    let idx = (0..lap.dim())
        .min_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap())
        .unwrap();
    let h = column(&eig.eigenvectors, idx);
    // −3(AB + BC + CD − AD) + (DE − CE + CD)
    let mut want = vec![0.0; cx.count(1)];
    for (e, c) in [
        (&[0usize, 1][..], -3.0),
        (&[1, 2], -3.0),
        (&[2, 3], -2.0),
        (&[0, 3], 3.0),
        (&[3, 4], 1.0),
        (&[2, 4], -1.0),
    ] {
        want[cx.index_of(e).unwrap()] = c;
    }
    assert!(cosine(&h, &want).abs() > 1.0 - 1e-9);
}

#[test]
fn square_pair_restricted_boundary() {
    let f = fixtures::square();
    let (ci, cj) = f.pair(fixtures::SQUARE_MU_I, fixtures::SQUARE_MU_J, 1).unwrap();
    let rb = restricted_boundary(&ci, &cj, 1).unwrap();
    assert_eq!(rb.matrix.rows, vec!["AB", "AD", "BC", "CD"]);
    assert_eq!(rb.matrix.ncols(), 2);
    assert_eq!(rb.rank(), 1);
    let m = rb.matrix.to_dmatrix();
    // AB + BC + CD − AD in row order (AB, AD, BC, CD)
    let cycle = [1.0, -1.0, 1.0, 1.0];
    for c in 0..m.ncols() {
        assert!(cosine(&column(&m, c), &cycle).abs() > 1.0 - 1e-12);
    }
    assert_eq!(persistent_laplacian(&ci, &cj, 1).unwrap().kernel_dim(), 0);
    assert_eq!(naive_restricted_boundary(&ci, &cj, 1).unwrap().rank(), 3);
}

#[test]
fn apex_pair_keeps_the_cycle() {
    let f = fixtures::square_apex();
    let (ci, cj) = f.pair(fixtures::APEX_MU_I, fixtures::apex_mu_j(), 1).unwrap();
    let rb = restricted_boundary(&ci, &cj, 1).unwrap();
    assert_eq!(rb.rank(), 0);
    assert_eq!(naive_restricted_boundary(&ci, &cj, 1).unwrap().rank(), 1);
    assert_eq!(persistent_laplacian(&ci, &cj, 1).unwrap().kernel_dim(), 1);
    assert_eq!(persistent_betti_oracle(&ci, &cj, 1), 1);
}

#[test]
fn equal_scales_reduce_to_combinatorial_laplacian() {
    let cx = house_mu2();
    for k in 0..=1 {
        let p = persistent_laplacian(&cx, &cx, k).unwrap();
        let c = combinatorial_laplacian(&cx, k).unwrap();
        assert_eq!(p.exact, c.exact);
        assert_eq!(p.basis, c.basis);
    }
}

#[test]
fn reversed_pair_is_not_nested() {
    let f = fixtures::house();
    let (ci, cj) = f.pair(fixtures::HOUSE_MU1, fixtures::HOUSE_MU2, 1).unwrap();
    assert!(check_nested(&ci, &cj).is_ok());
    assert!(matches!(check_nested(&cj, &ci), Err(QtdaError::NotNested(_))));
    assert!(matches!(restricted_boundary(&cj, &ci, 1), Err(QtdaError::NotNested(_))));
    assert!(matches!(persistent_laplacian_schur(&cj, &ci, 1), Err(QtdaError::NotNested(_))));
}

#[test]
fn matrix_dump_format() {
    let cx = house_mu2();
    let d2 = boundary_matrix(&cx, 2, FieldTag::Rational).unwrap();
    let v: serde_json::Value = serde_json::from_str(&d2.dump_json()).unwrap();
    assert_eq!(v["field"], "Q");
    assert_eq!(v["cols"], serde_json::json!(["CDE"]));
    assert_eq!(v["rows"].as_array().unwrap().len(), cx.count(1));
    let entries = v["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 3);
    for e in entries {
        let s = e[2].as_str().unwrap();
        assert!(s == "1/1" || s == "-1/1", "{s}");
    }
    let g2 = boundary_matrix(&cx, 2, FieldTag::Gf2).unwrap();
    assert!(g2.entries.iter().all(|&(_, _, v)| v == 1));
    assert_eq!(g2.field.name(), "GF2");
}

#[test]
fn field_constructor_rejects_composites() {
    assert!(FieldTag::gfp(4).is_err());
    assert_eq!(FieldTag::gfp(2).unwrap(), FieldTag::Gf2);
    assert_eq!(FieldTag::gfp(3).unwrap(), FieldTag::Gfp(3));
}

fn nested_pair(seed: u64, n: usize, a: usize, b: usize, k_max: usize) -> (CliqueComplex, CliqueComplex) {
    let f = random_fixture(seed, n, 2);
    let len = f.schedule.len();
    let (i, j) = (a % len, b % len);
    let (i, j) = (i.min(j), i.max(j));
    (f.complex(i, k_max).unwrap(), f.complex(j, k_max).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn boundary_squares_to_zero(seed in 0u64..10_000, n in 4usize..9, a in 0usize..64) {
        let f = random_fixture(seed, n, 2);
        let cx = f.complex(a % f.schedule.len(), 2).unwrap();
        for field in [FieldTag::Gf2, FieldTag::Gfp(3), FieldTag::Rational, FieldTag::Real] {
            for k in 1..=2 {
                let lo = boundary_matrix(&cx, k, field).unwrap().to_int();
                let hi = boundary_matrix(&cx, k + 1, field).unwrap().to_int();
                let prod = lo.matmul(&hi).unwrap();
                for r in 0..prod.rows {
                    for c in 0..prod.cols {
                        prop_assert_eq!(field.reduce(prod.get(r, c)), 0);
                    }
                }
            }
        }
    }

    #[test]
    fn boundary_matches_definition(seed in 0u64..10_000, n in 3usize..9, a in 0usize..64) {
        let f = random_fixture(seed, n, 2);
        let cx = f.complex(a % f.schedule.len(), 2).unwrap();
        for k in 1..=cx.top_dim() {
            let m = boundary_int_of(&cx, k).unwrap();
            let want = boundary_oracle(cx.simplices(k - 1), cx.simplices(k));
            for c in 0..m.cols {
                prop_assert_eq!(m.col(c).iter().filter(|v| **v != 0).count(), k + 1);
                for r in 0..m.rows {
                    let v = m.get(r, c);
                    prop_assert!(v.abs() <= 1);
                    prop_assert_eq!(v as f64, want[(r, c)]);
                }
            }
        }
    }

    #[test]
    fn laplacian_kernel_counts_homology(seed in 0u64..10_000, n in 3usize..9, a in 0usize..64) {
        let f = random_fixture(seed, n, 2);
        let cx = f.complex(a % f.schedule.len(), 1).unwrap();
        for k in 0..=1 {
            let lap = combinatorial_laplacian(&cx, k).unwrap();
            prop_assert!(lap.min_eigenvalue() >= -1e-9);
            prop_assert_eq!(&lap.delta, &lap.delta.transpose());
            let rows: Vec<Vec<usize>> = if k == 0 { Vec::new() } else { cx.simplices(k - 1).to_vec() };
            let r_k = svd_rank(&boundary_oracle(&rows, cx.simplices(k)));
            let r_k1 = svd_rank(&boundary_oracle(cx.simplices(k), cx.simplices(k + 1)));
            prop_assert_eq!(lap.kernel_dim(), cx.count(k) - r_k - r_k1);
        }
    }

    #[test]
    fn persistent_routes_agree_with_oracle(
        seed in 0u64..10_000, n in 3usize..9, a in 0usize..64, b in 0usize..64,
    ) {
        let (ci, cj) = nested_pair(seed, n, a, b, 1);
        for k in 0..=1 {
            let want = persistent_betti_oracle(&ci, &cj, k);
            let exact = persistent_laplacian(&ci, &cj, k).unwrap();
            prop_assert!(exact.min_eigenvalue() >= -1e-9);
            prop_assert_eq!(exact.kernel_dim(), want);
            let schur = persistent_laplacian_schur(&ci, &cj, k).unwrap();
            prop_assert_eq!(schur.kernel_dim_spectral(1e-8), want);
        }
    }

    #[test]
    fn kernel_columns_vanish_outside(
        seed in 0u64..10_000, n in 3usize..9, a in 0usize..64, b in 0usize..64,
    ) {
        let (ci, cj) = nested_pair(seed, n, a, b, 1);
        for k in 0..=1 {
            let rb = restricted_boundary(&ci, &cj, k).unwrap();
            let chains = rb.change_of_basis.select_cols(&rb.kernel_column_indices);
            prop_assert!(rb.outside_part.matmul(&chains).unwrap().is_zero());
            prop_assert_eq!(rb.matrix.ncols(), rb.kernel_column_indices.len());
            prop_assert_eq!(rb.matrix.nrows(), ci.count(k));
            // Y must be invertible for the selected columns to span the kernel.
            prop_assert_eq!(svd_rank(&qtda_core::boundary::int_to_dmatrix(&rb.change_of_basis)), cj.count(k + 1));
        }
    }
}
