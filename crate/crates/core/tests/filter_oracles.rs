use fhp_core::filter::*;
use fhp_core::gaussian::*;
use fhp_core::sequence::SequenceFamily;
use fhp_core::spectral::*;
use fhp_testkit::{dense_hp, mean_se, rel_err, rng, sorted_desc, uniform_vec, DenseModel};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::Rng;

fn explicit(lam: &[f64], mu: &[f64], tau: &[f64], y0: &[f64], kv: &[f64]) -> ModelSpec {
    ModelSpec::from_families(
        SingularSystem::from_values(lam.to_vec(), y0.len()).unwrap(),
        y0.to_vec(),
        SequenceFamily::explicit(mu.to_vec()).unwrap(),
        kv.to_vec(),
        SequenceFamily::explicit(tau.to_vec()).unwrap(),
    )
    .unwrap()
}

fn random_model(g: &mut impl Rng, n: usize, d0: usize) -> ModelSpec {
    let lam = sorted_desc(n, 0.05, 2.0, g);
    let mu = sorted_desc(n, 0.05, 2.0, g);
    let tau = sorted_desc(n, 0.05, 2.0, g);
    let kv = uniform_vec(d0, 0.1, 1.0, g);
    let y0 = uniform_vec(d0, -1.0, 1.0, g);
    explicit(&lam, &mu, &tau, &y0, &kv)
}

#[test]
fn minimize_matches_dense_solve() {
    let mut g = rng(5);
    let lam = [1.0, 0.7, 0.3, 0.1];
    let beta = [0.5, 1.0, 2.0, 4.0];
    let dense = DenseModel::new(&lam, &[1.0; 4], &[1.0; 4], &[1.0], &[0.0], &mut g);
    let a = SingularSystem::from_values(lam.to_vec(), 1).unwrap();
    let b = DiagonalOperator::span_only(Space::H2, beta.to_vec()).unwrap();
    let xs = [1.0, -2.0, 0.5, 3.0];
    let y = minimize(&a, &b, &HilbertElement::h1(vec![0.7], xs.to_vec())).unwrap();
    let (dk, ds) = dense.coords(&dense.minimize(&beta, &dense.embed(&[0.7], &xs)));
    assert!(rel_err(y.span(), &ds, 1.0) <= 1e-12);
    assert!((y.kernel()[0] - dk[0]).abs() <= 1e-12);
    assert_eq!(y.kernel(), &[0.7]);
}

#[test]
fn minimizer_is_unique_under_perturbation() {
    let mut g = rng(17);
    let m = random_model(&mut g, 6, 2);
    let b = optimal_b(&m);
    let x = HilbertElement::h1(uniform_vec(2, -2.0, 2.0, &mut g), uniform_vec(6, -2.0, 2.0, &mut g));
    let y = minimize(m.system(), &b, &x).unwrap();
    let best = evaluate_jb(m.system(), &b, &x, &y).unwrap();
    for _ in 0..1000 {
        let d = HilbertElement::h1(uniform_vec(2, -1e-3, 1e-3, &mut g), uniform_vec(6, -1e-3, 1e-3, &mut g));
        let other = evaluate_jb(m.system(), &b, &x, &y.add(&d).unwrap()).unwrap();
        assert!(other > best, "perturbation lowered the objective: {other} <= {best}");
    }
}

#[test]
fn optimal_b_matches_composition() {
    // (AA*)^-1 A Sigma_u A* Sigma_v^-1 applied to each basis vector of H2
    let m = explicit(&[2.0, 1.0, 0.5], &[1.0, 0.5, 0.25], &[4.0, 1.0, 0.5], &[], &[]);
    let a = m.system();
    let su = DiagonalOperator::span_only(Space::H1, m.sigma_u().span_vars().to_vec()).unwrap();
    let b = optimal_b(&m);
    for k in 1..=3 {
        let e = HilbertElement::basis(a, Space::H2, k);
        let g = e.scale(1.0 / m.sigma_v().span_vars()[k - 1]);
        let g = apply_forward(a, &su.apply(&apply_adjoint(a, &g).unwrap()).unwrap()).unwrap();
        let l = a.values()[k - 1];
        let composed = g.span()[k - 1] / (l * l);
        assert!((composed - b.diag()[k - 1]).abs() <= 1e-15);
    }
    assert_eq!(b.diag(), &[0.25, 0.5, 0.5]);
}

#[test]
fn residual_lives_in_kernel() {
    let mut g = rng(23);
    let m = random_model(&mut g, 6, 2);
    for _ in 0..100 {
        let x = HilbertElement::h1(uniform_vec(2, -5.0, 5.0, &mut g), uniform_vec(6, -5.0, 5.0, &mut g));
        let r = residual(&m, &x).unwrap();
        assert!(r.span().iter().all(|c| c.abs() <= 1e-12 * x.norm()));
        for ((rk, xk), y0) in r.kernel().iter().zip(x.kernel()).zip(m.y0_kernel()) {
            assert!((rk - (xk - y0)).abs() <= 1e-14 * (1.0 + xk.abs()));
        }
    }
}

#[test]
fn optimal_filter_equals_conditional_expectation_without_kernel() {
    let mut g = rng(29);
    let m = random_model(&mut g, 8, 0);
    let x = HilbertElement::h1(vec![], uniform_vec(8, -3.0, 3.0, &mut g));
    let y = minimize(m.system(), &optimal_b(&m), &x).unwrap();
    let c = conditional_expectation(&m, &x).unwrap();
    assert!(y.sub(&c).unwrap().norm() <= 1e-14 * x.norm());
}

#[test]
fn residual_trace_matches_monte_carlo() {
    let m = explicit(
        &[1.0, 0.5, 0.2],
        &[0.3, 0.2, 0.1],
        &[0.5, 0.1, 0.1],
        &[1.0, 2.0],
        &[0.5, 0.25],
    );
    let (cov, trace) = residual_covariance(&m);
    assert_eq!(trace, 0.75);
    assert!(cov.span.diag().iter().all(|v| *v == 0.0));
    let sq: Vec<f64> = (0..10_000u64)
        .map(|i| residual(&m, &sample_pair_indexed(&m, 3, i).0).unwrap().norm_sq())
        .collect();
    let (mean, se) = mean_se(&sq);
    assert!((mean - trace).abs() <= 3.0 * se, "{mean} vs {trace} (se {se})");
}

#[test]
fn no_candidate_beats_optimal() {
    let mut g = rng(31);
    for model in 0..3 {
        let m = random_model(&mut g, 5, 1);
        let cands = candidate_family(&m, 195, model);
        assert!(cands.len() >= 200);
        for _ in 0..20 {
            let x = HilbertElement::h1(uniform_vec(1, -3.0, 3.0, &mut g), uniform_vec(5, -3.0, 3.0, &mut g));
            let r = verify_optimality(&m, &x, &cands).unwrap();
            assert_eq!(r.violations(1e-14 * (1.0 + x.norm())), 0);
            assert!((r.optimal_distance - r.lower_bound).abs() <= 1e-12 * (1.0 + x.norm()));
        }
    }
}

#[test]
fn negative_candidate_is_named() {
    let m = explicit(&[1.0, 0.5], &[1.0, 1.0], &[1.0, 1.0], &[], &[]);
    let good = optimal_b(&m);
    let bad = DiagonalOperator::span_only(Space::H2, vec![1.0, -0.5]).unwrap();
    let x = HilbertElement::h1(vec![], vec![1.0, 1.0]);
    let err = verify_optimality(&m, &x, &[good, bad]).unwrap_err().to_string();
    assert!(err.contains("candidate 1"), "{err}");
}

#[test]
fn classical_hp_matches_dense_oracle_and_spectral_bridge() {
    let mut g = rng(41);
    for t in [5usize, 8, 16] {
        let x = uniform_vec(t, -2.0, 2.0, &mut g);
        for (su, sv) in [(1.0, 1.0), (4.0, 0.5), (1600.0, 1.0)] {
            let classical = fhp_core::filter::classical_hp(&x, su / sv).unwrap();
            let oracle = dense_hp(&x, su / sv);
            let spectral = SecondDifferenceBasis::new(t).unwrap().spectral_hp(&x, su, sv).unwrap();
            assert!(rel_err(&classical, &oracle, 1.0) <= 1e-10);
            assert!(rel_err(&classical, &spectral, 1.0) <= 1e-10, "T={t}");
        }
    }
}

proptest! {
    #[test]
    fn minimizer_solves_normal_equations(
        lam in prop::collection::vec(0.01f64..3.0, 1..8),
        beta in prop::collection::vec(0.0f64..10.0, 8),
        xs in prop::collection::vec(-10.0f64..10.0, 8),
    ) {
        let n = lam.len();
        let mut lam = lam;
        lam.sort_by(|a, b| b.total_cmp(a));
        let a = SingularSystem::from_values(lam.clone(), 0).unwrap();
        let b = DiagonalOperator::span_only(Space::H2, beta[..n].to_vec()).unwrap();
        let x = HilbertElement::h1(vec![], xs[..n].to_vec());
        let y = minimize(&a, &b, &x).unwrap();
        for k in 0..n {
            let lhs = y.span()[k] * (1.0 + lam[k] * lam[k] * beta[k]);
            prop_assert!((lhs - xs[k]).abs() <= 1e-12 * (1.0 + xs[k].abs()));
        }
        let xv = DVector::from_column_slice(&xs[..n]);
        prop_assert!(y.norm() <= xv.norm() * (1.0 + 1e-15));
    }
}
