//! The Gaussian signal model `x = y + u`, `A y = v` with independent
//! `u ~ N(0, Sigma_u)` and `v ~ N(0, Sigma_v)`, both covariances diagonal in
//! the singular bases of `A`.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::sequence::{combine, Decision, SequenceFamily, SeriesCheck};
use crate::spectral::{solve_min_norm, DiagonalOperator, HilbertElement, SingularSystem, Space};

/// Covariance operator diagonal in the singular basis of its space.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalCovariance {
    space: Space,
    family: SequenceFamily,
    span_vars: Vec<f64>,
    kernel_vars: Vec<f64>,
}

impl DiagonalCovariance {
    /// Covariance on `H1`: `mu_k` along `e_k`, `kernel_vars` on the kernel block.
    pub fn on_h1(family: SequenceFamily, truncation: usize, kernel_vars: Vec<f64>) -> Result<Self> {
        if let Some(i) = kernel_vars.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "kernel variance {} must be > 0 and finite, got {}",
                i + 1,
                kernel_vars[i]
            )));
        }
        let span_vars = family.realize(truncation)?;
        Ok(Self {
            space: Space::H1,
            family,
            span_vars,
            kernel_vars,
        })
    }

    /// Covariance on `H2`: `tau_k` along `d_k`.
    pub fn on_h2(family: SequenceFamily, truncation: usize) -> Result<Self> {
        let span_vars = family.realize(truncation)?;
        Ok(Self {
            space: Space::H2,
            family,
            span_vars,
            kernel_vars: Vec::new(),
        })
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn family(&self) -> &SequenceFamily {
        &self.family
    }

    pub fn span_vars(&self) -> &[f64] {
        &self.span_vars
    }

    pub fn kernel_vars(&self) -> &[f64] {
        &self.kernel_vars
    }

    /// Truncated trace: kernel block plus span block.
    pub fn trace(&self) -> f64 {
        self.kernel_vars.iter().sum::<f64>() + self.span_vars.iter().sum::<f64>()
    }
}

/// The full stochastic model: `A`, the deterministic kernel component `y0`,
/// and the noise covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    a: SingularSystem,
    y0_kernel: Vec<f64>,
    sigma_u: DiagonalCovariance,
    sigma_v: DiagonalCovariance,
}

impl ModelSpec {
    pub fn new(
        a: SingularSystem,
        y0_kernel: Vec<f64>,
        sigma_u: DiagonalCovariance,
        sigma_v: DiagonalCovariance,
    ) -> Result<Self> {
        ensure_len("y0 kernel", a.kernel_dim(), y0_kernel.len())?;
        if y0_kernel.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("y0 must be finite".into()));
        }
        if sigma_u.space != Space::H1 || sigma_v.space != Space::H2 {
            return Err(Error::InvalidParameter(
                "sigma_u must live on H1 and sigma_v on H2".into(),
            ));
        }
        ensure_len("sigma_u span", a.truncation(), sigma_u.span_vars.len())?;
        ensure_len("sigma_u kernel", a.kernel_dim(), sigma_u.kernel_vars.len())?;
        ensure_len("sigma_v span", a.truncation(), sigma_v.span_vars.len())?;
        Ok(Self {
            a,
            y0_kernel,
            sigma_u,
            sigma_v,
        })
    }

    /// Convenience constructor from sequence families.
    pub fn from_families(
        a: SingularSystem,
        y0_kernel: Vec<f64>,
        mu: SequenceFamily,
        kernel_vars: Vec<f64>,
        tau: SequenceFamily,
    ) -> Result<Self> {
        let n = a.truncation();
        let sigma_u = DiagonalCovariance::on_h1(mu, n, kernel_vars)?;
        let sigma_v = DiagonalCovariance::on_h2(tau, n)?;
        Self::new(a, y0_kernel, sigma_u, sigma_v)
    }

    pub fn system(&self) -> &SingularSystem {
        &self.a
    }

    pub fn y0_kernel(&self) -> &[f64] {
        &self.y0_kernel
    }

    pub fn sigma_u(&self) -> &DiagonalCovariance {
        &self.sigma_u
    }

    pub fn sigma_v(&self) -> &DiagonalCovariance {
        &self.sigma_v
    }

    pub fn truncation(&self) -> usize {
        self.a.truncation()
    }

    pub fn kernel_dim(&self) -> usize {
        self.a.kernel_dim()
    }

    /// The mean `E[x] = E[y] = y0`, as an element of `H1`.
    pub fn mean(&self) -> HilbertElement {
        HilbertElement::h1(self.y0_kernel.clone(), vec![0.0; self.truncation()])
    }

    /// Per-direction factors `(1 + lambda_k^2 mu_k / tau_k)^-1` of `E[y|x]`,
    /// evaluated as `tau_k / (tau_k + lambda_k^2 mu_k)`.
    pub fn conditional_multipliers(&self) -> Vec<f64> {
        self.a
            .values()
            .iter()
            .zip(&self.sigma_u.span_vars)
            .zip(&self.sigma_v.span_vars)
            .map(|((l, mu), tau)| tau / (tau + l * l * mu))
            .collect()
    }
}

/// `Q_v = A*(AA*)^-1 Sigma_v (AA*)^-1 A`, with eigenvalues `tau_k / lambda_k^2`.
pub fn compute_qv(m: &ModelSpec) -> DiagonalOperator {
    let diag =
        m.a.values()
            .iter()
            .zip(&m.sigma_v.span_vars)
            .map(|(l, tau)| tau / (l * l))
            .collect();
    DiagonalOperator::span_only(Space::H1, diag).expect("positive finite ratios")
}

/// Trace-class and Hilbert-Schmidt diagnostics for a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    /// `trace(Sigma_u)`.
    pub trace_sigma_u: SeriesCheck,
    /// `trace(Sigma_v)`.
    pub trace_sigma_v: SeriesCheck,
    /// `trace(Q_v) = sum tau_k / lambda_k^2`.
    pub trace_qv: SeriesCheck,
    /// `||T||_2^2 = sum (tau_k/lambda_k^2) (lambda_k^2 mu_k / tau_k + 1)^-1`.
    pub hilbert_schmidt_t: SeriesCheck,
}

impl AdmissibilityReport {
    pub fn decisions(&self) -> [(&'static str, Decision); 4] {
        [
            ("trace_sigma_u", self.trace_sigma_u.decision),
            ("trace_sigma_v", self.trace_sigma_v.decision),
            ("trace_qv", self.trace_qv.decision),
            ("hilbert_schmidt_t", self.hilbert_schmidt_t.decision),
        ]
    }

    pub fn all_convergent(&self) -> bool {
        self.decisions().iter().all(|(_, d)| *d == Decision::ProvenConvergent)
    }

    pub fn any_divergent(&self) -> bool {
        self.decisions().iter().any(|(_, d)| d.is_divergent())
    }
}

/// Analytic convergence decisions plus partial sums at the truncation.
///
/// The Hilbert-Schmidt summand is within a factor two of
/// `min(tau/lambda^2, tau^2/(lambda^4 mu))`, so its class is the faster
/// decaying of those two.
pub fn check_admissibility(m: &ModelSpec) -> AdmissibilityReport {
    let lam = m.a.family().decay();
    let mu = m.sigma_u.family.decay();
    let tau = m.sigma_v.family.decay();

    let qv_decay = combine(&[(tau, 1.0), (lam, -2.0)]);
    let other = combine(&[(tau, 2.0), (lam, -4.0), (mu, -1.0)]);
    let hs_decay = match (qv_decay, other) {
        (Some(a), Some(b)) => Some(a.min(b)),
        _ => None,
    };

    let qv = compute_qv(m);
    let hs_terms = qv
        .diag()
        .iter()
        .zip(m.conditional_multipliers())
        .map(|(q, f)| q * f)
        .collect::<Vec<_>>();

    let kernel_trace: f64 = m.sigma_u.kernel_vars.iter().sum();
    let mut trace_sigma_u = SeriesCheck::new(mu, m.sigma_u.span_vars.iter().copied());
    trace_sigma_u.partial_sum += kernel_trace;

    AdmissibilityReport {
        trace_sigma_u,
        trace_sigma_v: SeriesCheck::new(tau, m.sigma_v.span_vars.iter().copied()),
        trace_qv: SeriesCheck::new(qv_decay, qv.diag().iter().copied()),
        hilbert_schmidt_t: SeriesCheck::new(hs_decay, hs_terms),
    }
}

/// Random generator for sample `index` of a run seeded with `seed`.
///
/// Each index owns its own ChaCha20 stream, so samples can be drawn in any
/// order or on any number of workers with identical results.
pub fn substream(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws `(x, y)` from the model using the generator for `(seed, 0)`.
pub fn sample_pair(m: &ModelSpec, seed: u64) -> (HilbertElement, HilbertElement) {
    sample_pair_indexed(m, seed, 0)
}

/// Draws `(x, y)` using the substream `(seed, index)`.
///
/// Karhunen-Loeve sampling: `u` kernel, `u` span and `v` span coefficients
/// are independent standard normals scaled by the square root of their
/// variances, drawn in that order.
pub fn sample_pair_indexed(m: &ModelSpec, seed: u64, index: u64) -> (HilbertElement, HilbertElement) {
    let mut rng = substream(seed, index);
    let mut draw = |var: f64| -> f64 {
        let z: f64 = StandardNormal.sample(&mut rng);
        var.sqrt() * z
    };
    let u_kernel: Vec<f64> = m.sigma_u.kernel_vars.iter().map(|v| draw(*v)).collect();
    let u_span: Vec<f64> = m.sigma_u.span_vars.iter().map(|v| draw(*v)).collect();
    let v_span: Vec<f64> = m.sigma_v.span_vars.iter().map(|v| draw(*v)).collect();

    let v = HilbertElement::h2(v_span);
    let y = solve_min_norm(&m.a, &v, &m.y0_kernel).expect("model dimensions are consistent");
    let u = HilbertElement::h1(u_kernel, u_span);
    let x = y.add(&u).expect("model dimensions are consistent");
    (x, y)
}

/// `E[y|x] = y0 + sum_k <x - y0, e_k> (1 + lambda_k^2 mu_k / tau_k)^-1 e_k`.
///
/// Computed at the truncation regardless of the Hilbert-Schmidt decision;
/// callers that care inspect [`check_admissibility`].
pub fn conditional_expectation(m: &ModelSpec, x: &HilbertElement) -> Result<HilbertElement> {
    m.a.check_element(x, Space::H1, "conditional_expectation")?;
    let span = x
        .span()
        .iter()
        .zip(m.conditional_multipliers())
        .map(|(c, f)| c * f)
        .collect();
    Ok(HilbertElement::h1(m.y0_kernel.clone(), span))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn explicit_model(lam: &[f64], mu: &[f64], tau: &[f64], y0: &[f64], kv: &[f64]) -> ModelSpec {
        ModelSpec::from_families(
            SingularSystem::from_values(lam.to_vec(), y0.len()).unwrap(),
            y0.to_vec(),
            SequenceFamily::explicit(mu.to_vec()).unwrap(),
            kv.to_vec(),
            SequenceFamily::explicit(tau.to_vec()).unwrap(),
        )
        .unwrap()
    }

    fn power_model(alpha: f64, beta: f64, gamma: f64, n: usize) -> ModelSpec {
        ModelSpec::from_families(
            SingularSystem::new(SequenceFamily::power_law(alpha, 1.0).unwrap(), n, 0).unwrap(),
            vec![],
            SequenceFamily::power_law(beta, 1.0).unwrap(),
            vec![],
            SequenceFamily::power_law(gamma, 1.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn qv_cancellation_and_scalar_case() {
        let m = explicit_model(&[1.0, 0.5], &[1.0, 1.0], &[1.0, 0.25], &[], &[]);
        assert_eq!(compute_qv(&m).diag(), &[1.0, 1.0]);
        let m = explicit_model(&[0.5], &[1.0], &[0.125], &[], &[]);
        assert_eq!(compute_qv(&m).diag(), &[0.5]);
    }

    #[test]
    fn qv_power_family_ratio() {
        let m = power_model(2.0, 8.0, 8.0, 6);
        for (k, q) in compute_qv(&m).diag().iter().enumerate() {
            let expected = ((k + 1) as f64).powi(-4);
            assert!((q - expected).abs() <= 1e-14 * expected);
        }
    }

    #[test]
    fn power_family_is_admissible() {
        let r = check_admissibility(&power_model(2.0, 8.0, 6.0, 32));
        assert!(r.all_convergent(), "{r:?}");
    }

    #[test]
    fn divergent_qv_trace() {
        let r = check_admissibility(&power_model(1.0, 4.0, 1.0, 16));
        assert_eq!(r.trace_qv.decision, Decision::ProvenDivergent);
        assert!(r.any_divergent());
    }

    #[test]
    fn explicit_family_partial_sums() {
        let m = explicit_model(&[0.9, 0.5, 0.1], &[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0], &[], &[]);
        let r = check_admissibility(&m);
        for (_, d) in r.decisions() {
            assert_eq!(d, Decision::UnknownExplicitFamily);
        }
        assert_eq!(r.trace_sigma_u.partial_sum, 3.0);
        assert_eq!(r.trace_sigma_v.partial_sum, 3.0);
        let qv: f64 = [0.9f64, 0.5, 0.1].iter().map(|l| 1.0 / (l * l)).sum();
        assert!((r.trace_qv.partial_sum - qv).abs() <= 1e-12 * qv);
        let hs: f64 = [0.9f64, 0.5, 0.1].iter().map(|l| (1.0 / (l * l)) / (l * l + 1.0)).sum();
        assert!((r.hilbert_schmidt_t.partial_sum - hs).abs() <= 1e-12 * hs);
    }

    #[test]
    fn conditional_expectation_scalar() {
        let m = explicit_model(&[1.0], &[1.0], &[1.0], &[], &[]);
        let e = conditional_expectation(&m, &HilbertElement::h1(vec![], vec![2.0])).unwrap();
        assert_eq!(e.span(), &[1.0]);
    }

    #[test]
    fn conditional_expectation_noiseless_limit() {
        let m = explicit_model(&[1.0, 0.5], &[1e-300, 1e-300], &[1.0, 1.0], &[3.0], &[1.0]);
        let x = HilbertElement::h1(vec![7.0], vec![2.0, -1.0]);
        let e = conditional_expectation(&m, &x).unwrap();
        assert_eq!(e, HilbertElement::h1(vec![3.0], vec![2.0, -1.0]));
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = explicit_model(&[1.0, 0.5], &[1.0, 0.5], &[0.2, 0.1], &[1.0], &[0.3]);
        assert_eq!(sample_pair(&m, 17), sample_pair(&m, 17));
        assert_ne!(sample_pair(&m, 17), sample_pair(&m, 18));
        assert_ne!(sample_pair_indexed(&m, 17, 1), sample_pair_indexed(&m, 17, 2));
    }

    #[test]
    fn degenerate_sampling_returns_mean() {
        let tiny = 1e-300;
        let m = explicit_model(&[1.0], &[tiny], &[tiny], &[2.5], &[tiny]);
        let (x, y) = sample_pair(&m, 3);
        assert!((x.kernel()[0] - 2.5).abs() < 1e-140);
        assert!(x.span()[0].abs() < 1e-140 && y.span()[0].abs() < 1e-140);
        assert_eq!(y.kernel(), &[2.5]);
    }

    #[test]
    fn sampled_pair_satisfies_model_equations() {
        let m = explicit_model(
            &[1.0, 0.5, 0.25],
            &[1.0, 0.5, 0.2],
            &[0.3, 0.2, 0.1],
            &[1.0, -1.0],
            &[0.5, 0.25],
        );
        let (x, y) = sample_pair(&m, 99);
        assert_eq!(y.kernel(), m.y0_kernel());
        assert_ne!(x.kernel(), y.kernel());
    }

    #[test]
    fn rejects_nonpositive_kernel_variance() {
        let a = SingularSystem::from_values(vec![1.0], 1).unwrap();
        let mu = SequenceFamily::constant(1.0).unwrap();
        assert!(DiagonalCovariance::on_h1(mu, 1, vec![0.0]).is_err());
        let tau = SequenceFamily::constant(1.0).unwrap();
        assert!(ModelSpec::from_families(a, vec![], SequenceFamily::constant(1.0).unwrap(), vec![1.0], tau).is_err());
    }
}
