use fhp_core::spectral::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn system_strategy() -> impl Strategy<Value = (Vec<f64>, usize)> {
    (prop::collection::vec(0.01f64..10.0, 1..10), 0usize..4).prop_map(|(mut v, d0)| {
        v.sort_by(|a, b| b.total_cmp(a));
        (v, d0)
    })
}

fn element(n: usize, d0: usize) -> impl Strategy<Value = HilbertElement> {
    (
        prop::collection::vec(-100.0f64..100.0, d0),
        prop::collection::vec(-100.0f64..100.0, n),
    )
        .prop_map(|(k, s)| HilbertElement::h1(k, s))
}

fn setup() -> impl Strategy<Value = (SingularSystem, HilbertElement, HilbertElement)> {
    system_strategy().prop_flat_map(|(v, d0)| {
        let n = v.len();
        (
            Just(SingularSystem::from_values(v, d0).unwrap()),
            element(n, d0),
            prop::collection::vec(-100.0f64..100.0, n).prop_map(HilbertElement::h2),
        )
    })
}

fn close(a: f64, b: f64, scale: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * scale.max(f64::MIN_POSITIVE)
}

proptest! {
    #[test]
    fn projector_is_idempotent((a, h, _g) in setup()) {
        let p = project_pi(&a, &h).unwrap();
        prop_assert_eq!(project_pi(&a, &p).unwrap(), p);
    }

    #[test]
    fn projector_splits_orthogonally((a, h, _g) in setup()) {
        let p = project_pi(&a, &h).unwrap();
        let q = h.sub(&p).unwrap();
        let ip = inner(&p, &q).unwrap();
        prop_assert!(ip.abs() <= 1e-14 * h.norm_sq().max(1.0));
        prop_assert_eq!(q, project_kernel(&a, &h).unwrap());
    }

    #[test]
    fn forward_and_adjoint_are_adjoint((a, h, g) in setup()) {
        let lhs = inner(&apply_forward(&a, &h).unwrap(), &g).unwrap();
        let rhs = inner(&h, &apply_adjoint(&a, &g).unwrap()).unwrap();
        let scale = h.norm() * g.norm() * a.values()[0];
        prop_assert!(close(lhs, rhs, scale, 1e-12));
    }

    #[test]
    fn min_norm_solution_round_trips((a, _h, v) in setup(), seed in 0u64..1000) {
        let y0: Vec<f64> = (0..a.kernel_dim()).map(|i| (seed + i as u64) as f64).collect();
        let y = solve_min_norm(&a, &v, &y0).unwrap();
        prop_assert_eq!(y.kernel(), &y0[..]);
        let back = apply_forward(&a, &y).unwrap();
        for (b, w) in back.span().iter().zip(v.span()) {
            prop_assert!(close(*b, *w, w.abs(), 1e-12));
        }
    }

    #[test]
    fn kernel_is_annihilated((a, h, _g) in setup()) {
        let kernel_only = project_kernel(&a, &h).unwrap();
        let out = apply_forward(&a, &kernel_only).unwrap();
        prop_assert!(out.span().iter().all(|c| *c == 0.0));
    }

    #[test]
    fn inner_is_symmetric_and_positive((_a, h, _g) in setup(), c in -3.0f64..3.0) {
        let h2 = h.scale(c);
        prop_assert_eq!(inner(&h, &h2).unwrap(), inner(&h2, &h).unwrap());
        prop_assert!(inner(&h, &h).unwrap() >= 0.0);
        prop_assert!(close(inner(&h, &h).unwrap(), h.norm_sq(), h.norm_sq(), 1e-15));
    }
}

#[test]
fn forward_matches_dense_diagonal_multiply() {
    let lam = [1.0, 0.5, 1.0 / 3.0];
    let a = SingularSystem::from_values(lam.to_vec(), 0).unwrap();
    let h = HilbertElement::h1(vec![], vec![1.0, 2.0, 3.0]);
    let dense = DMatrix::from_diagonal(&DVector::from_column_slice(&lam)) * DVector::from_vec(vec![1.0, 2.0, 3.0]);
    let out = apply_forward(&a, &h).unwrap();
    for (o, d) in out.span().iter().zip(dense.iter()) {
        assert!((o - d).abs() <= 1e-15);
        assert!((o - 1.0).abs() <= 1e-15);
    }
}

#[test]
fn adjoint_matches_dense_transpose() {
    let lam = [1.0, 0.5];
    let a = SingularSystem::from_values(lam.to_vec(), 0).unwrap();
    let dense =
        DMatrix::from_diagonal(&DVector::from_column_slice(&lam)).transpose() * DVector::from_vec(vec![2.0, 4.0]);
    let out = apply_adjoint(&a, &HilbertElement::h2(vec![2.0, 4.0])).unwrap();
    assert_eq!(out.span(), dense.as_slice());
    assert_eq!(out.span(), &[2.0, 2.0]);
}

#[test]
fn min_norm_with_kernel_component() {
    let a = SingularSystem::from_values(vec![1.0, 1.0 / 3.0], 1).unwrap();
    let v = HilbertElement::h2(vec![3.0, 1.0]);
    let y = solve_min_norm(&a, &v, &[5.0]).unwrap();
    assert_eq!(y.kernel(), &[5.0]);
    assert!((y.span()[0] - 3.0).abs() <= 1e-15 && (y.span()[1] - 3.0).abs() <= 1e-15);
    let back = apply_forward(&a, &y).unwrap();
    for (b, w) in back.span().iter().zip(v.span()) {
        assert!((b - w).abs() <= 1e-12 * w.abs());
    }
}
