//! The functional Hodrick-Prescott filter: the penalized functional `J_B`,
//! its minimizer `y(B, x)`, the optimal smoothing operator `B_hat` and the
//! residual identities relating the filter to `E[y|x]`.

pub mod classical;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::gaussian::{conditional_expectation, substream, ModelSpec};
use crate::spectral::{DiagonalOperator, HilbertElement, SingularSystem, Space};

pub use classical::{classical_hp, second_difference_matrix, SecondDifferenceBasis};

fn check_smoothing(a: &SingularSystem, b: &DiagonalOperator, what: &'static str) -> Result<()> {
    a.check_operator(b, Space::H2, what)?;
    match b.first_negative() {
        Some(k) => Err(Error::Precondition(format!(
            "{what}: smoothing operator must be positive semidefinite, beta_{k} = {}",
            b.diag()[k - 1]
        ))),
        None => Ok(()),
    }
}

/// `J_B(y) = ||x - y||^2 + <Ay, B A y>`.
pub fn evaluate_jb(a: &SingularSystem, b: &DiagonalOperator, x: &HilbertElement, y: &HilbertElement) -> Result<f64> {
    check_smoothing(a, b, "evaluate_jb")?;
    a.check_element(x, Space::H1, "evaluate_jb x")?;
    a.check_element(y, Space::H1, "evaluate_jb y")?;
    let fidelity = x.sub(y)?.norm_sq();
    let penalty: f64 = y
        .span()
        .iter()
        .zip(a.values())
        .zip(b.diag())
        .map(|((c, l), beta)| beta * (l * c) * (l * c))
        .sum();
    Ok(fidelity + penalty)
}

/// Unique minimizer `y(B, x) = (I + A*BA)^-1 x`.
///
/// `A*BA` vanishes on `Ker(A)`, so the kernel block passes through unchanged.
pub fn minimize(a: &SingularSystem, b: &DiagonalOperator, x: &HilbertElement) -> Result<HilbertElement> {
    check_smoothing(a, b, "minimize")?;
    a.check_element(x, Space::H1, "minimize")?;
    let span = x
        .span()
        .iter()
        .zip(a.values())
        .zip(b.diag())
        .map(|((c, l), beta)| c / (1.0 + l * l * beta))
        .collect();
    Ok(HilbertElement::h1(x.kernel().to_vec(), span))
}

/// `B_hat = (AA*)^-1 A Sigma_u A* Sigma_v^-1`, diagonal `mu_k / tau_k`.
///
/// The action on `(Ran A)^perp` is not determined by the optimality
/// criterion; it is fixed to zero.
pub fn optimal_b(m: &ModelSpec) -> DiagonalOperator {
    let diag = m
        .sigma_u()
        .span_vars()
        .iter()
        .zip(m.sigma_v().span_vars())
        .map(|(mu, tau)| mu / tau)
        .collect();
    DiagonalOperator::span_only(Space::H2, diag).expect("ratio of positive variances")
}

/// `y(B_hat, x) - E[y|x]`, which equals `(I - Pi)(x - E[x])`.
pub fn residual(m: &ModelSpec, x: &HilbertElement) -> Result<HilbertElement> {
    let filtered = minimize(m.system(), &optimal_b(m), x)?;
    filtered.sub(&conditional_expectation(m, x)?)
}

/// Covariance `(I - Pi) Sigma_u` of the residual and its trace.
pub fn residual_covariance(m: &ModelSpec) -> (KernelCovariance, f64) {
    let vars = m.sigma_u().kernel_vars().to_vec();
    let trace = vars.iter().fold(0.0, |acc, v| acc + v);
    (
        KernelCovariance {
            span: DiagonalOperator::span_only(Space::H1, vec![0.0; m.truncation()]).expect("zero diagonal"),
            kernel_vars: vars,
        },
        trace,
    )
}

/// A covariance supported on the kernel block: the span diagonal is kept for
/// completeness and is identically zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelCovariance {
    pub span: DiagonalOperator,
    pub kernel_vars: Vec<f64>,
}

/// Distance `||y(B, x) - E[y|x]||` of one candidate smoothing operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateOutcome {
    pub index: usize,
    pub distance: f64,
    /// `distance - optimal_distance`; nonnegative up to rounding.
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityReport {
    /// `||(I - Pi) x - y0||`, the pathwise lower bound over all `B`.
    pub lower_bound: f64,
    /// Distance attained by `B_hat`.
    pub optimal_distance: f64,
    /// One entry per candidate, in input order.
    pub candidates: Vec<CandidateOutcome>,
}

impl OptimalityReport {
    /// Candidates that beat `B_hat` by more than `tol`.
    pub fn violations(&self, tol: f64) -> usize {
        self.candidates
            .iter()
            .filter(|c| c.distance < self.optimal_distance - tol)
            .count()
    }
}

fn distance_to_conditional(
    m: &ModelSpec,
    b: &DiagonalOperator,
    x: &HilbertElement,
    cond: &HilbertElement,
) -> Result<f64> {
    Ok(minimize(m.system(), b, x)?.sub(cond)?.norm())
}

/// Evaluates `||y(B, x) - E[y|x]||` for `B_hat` and every candidate.
pub fn verify_optimality(
    m: &ModelSpec,
    x: &HilbertElement,
    candidates: &[DiagonalOperator],
) -> Result<OptimalityReport> {
    for (i, b) in candidates.iter().enumerate() {
        check_smoothing(m.system(), b, "verify_optimality").map_err(|e| match e {
            Error::Precondition(msg) => Error::Precondition(format!("candidate {i}: {msg}")),
            other => other,
        })?;
    }
    let cond = conditional_expectation(m, x)?;
    let optimal_distance = distance_to_conditional(m, &optimal_b(m), x, &cond)?;
    ensure_len("x kernel", m.kernel_dim(), x.kernel().len())?;
    let lower_bound = x
        .kernel()
        .iter()
        .zip(m.y0_kernel())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let candidates = candidates
        .iter()
        .enumerate()
        .map(|(index, b)| {
            let distance = distance_to_conditional(m, b, x, &cond)?;
            Ok(CandidateOutcome {
                index,
                distance,
                excess: distance - optimal_distance,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OptimalityReport {
        lower_bound,
        optimal_distance,
        candidates,
    })
}

/// Sampled stand-in for "all bounded positive `B`": the zero operator,
/// `c * B_hat` for `c` in `{0.25, 0.5, 2, 4}`, and `random` log-normal
/// perturbations of `B_hat` drawn from the substreams of `seed`.
pub fn candidate_family(m: &ModelSpec, random: usize, seed: u64) -> Vec<DiagonalOperator> {
    use rand_distr::{Distribution, StandardNormal};

    let b_hat = optimal_b(m);
    let n = m.truncation();
    let mut out = Vec::with_capacity(5 + random);
    out.push(DiagonalOperator::span_only(Space::H2, vec![0.0; n]).expect("zero"));
    for c in [0.25, 0.5, 2.0, 4.0] {
        let diag = b_hat.diag().iter().map(|b| c * b).collect();
        out.push(DiagonalOperator::span_only(Space::H2, diag).expect("scaled"));
    }
    for i in 0..random {
        let mut rng = substream(seed, i as u64);
        let diag = b_hat
            .diag()
            .iter()
            .map(|b| {
                let z: f64 = StandardNormal.sample(&mut rng);
                b * (1.5 * z).exp()
            })
            .collect();
        out.push(DiagonalOperator::span_only(Space::H2, diag).expect("perturbed"));
    }
    out
}
