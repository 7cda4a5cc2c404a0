//! Hilbert-scale extension for covariances that are not trace class.
//!
//! `K1 = (A*A)^-1` and `K2 = (AA*)^-1` generate the scales `H1^s`, `H2^s`.
//! Elements keep their base-space coefficients; the scale enters through
//! the weights `lambda_k^(4s)` in norms and in the extended covariances
//! `(A*A)^n Sigma_u (A*A)^n` and `(AA*)^n Sigma_v (AA*)^n`. Kernel elements
//! have zero norm in every `H1^-n`, so scale-level models are span-only.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::gaussian::ModelSpec;
use crate::sequence::{combine, Decision, SeriesCheck};
use crate::spectral::{DiagonalOperator, HilbertElement, SingularSystem, Space};

/// `K1^s`, diagonal `lambda_k^(-2s)` on the span block.
///
/// The kernel block is outside the domain for `s > 0` and annihilated for
/// `s < 0`; it is reported as zero except for `s = 0`, where `K1^0 = I`.
pub fn fractional_power(a: &SingularSystem, s: f64) -> DiagonalOperator {
    let diag = a.values().iter().map(|l| l.powf(-2.0 * s)).collect();
    let kernel_action = if s == 0.0 { 1.0 } else { 0.0 };
    DiagonalOperator::new(Space::H1, diag, kernel_action).expect("finite powers of positive values")
}

/// Norm of the span part of `h` in `H^-s`: `sqrt(sum lambda_k^(4s) h_k^2)`.
///
/// Negative `s` gives the positive-index norms `||K^|s| h||`.
pub fn scale_norm(a: &SingularSystem, h: &HilbertElement, s: f64) -> Result<f64> {
    ensure_len("scale_norm", a.truncation(), h.span().len())?;
    Ok(h.span()
        .iter()
        .zip(a.values())
        .map(|(c, l)| l.powf(4.0 * s) * c * c)
        .sum::<f64>()
        .sqrt())
}

/// Convergence diagnostics at scale level `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleAdmissibility {
    /// `sum lambda_k^(4n-2) mu_k`.
    pub weighted_sigma_u: SeriesCheck,
    /// `sum lambda_k^(4n) tau_k`.
    pub weighted_sigma_v: SeriesCheck,
    /// `sum lambda_k^(4n) mu_k`, the trace of the extended `Sigma_u`.
    pub extended_trace_sigma_u: SeriesCheck,
    /// `sum lambda_k^(2(2n-1))`, the white-noise condition.
    pub white_noise_sum: SeriesCheck,
}

impl ScaleAdmissibility {
    /// Joint decision on both series of the scale condition.
    pub fn weighted_condition(&self) -> Decision {
        let a = self.weighted_sigma_u.decision;
        let b = self.weighted_sigma_v.decision;
        if a.is_divergent() || b.is_divergent() {
            Decision::ProvenDivergent
        } else if a == Decision::ProvenConvergent && b == Decision::ProvenConvergent {
            Decision::ProvenConvergent
        } else {
            Decision::UnknownExplicitFamily
        }
    }

    pub fn white_noise_condition(&self) -> Decision {
        self.white_noise_sum.decision
    }
}

/// A model lifted to the scale level `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleModel {
    base: ModelSpec,
    scale_index: u32,
    extended_sigma_u: DiagonalOperator,
    extended_sigma_v: DiagonalOperator,
    extended_qv: DiagonalOperator,
    admissibility: ScaleAdmissibility,
}

impl ScaleModel {
    pub fn base(&self) -> &ModelSpec {
        &self.base
    }

    pub fn scale_index(&self) -> u32 {
        self.scale_index
    }

    /// Diagonal `lambda_k^(4n) mu_k`.
    pub fn extended_sigma_u(&self) -> &DiagonalOperator {
        &self.extended_sigma_u
    }

    /// Diagonal `lambda_k^(4n) tau_k`.
    pub fn extended_sigma_v(&self) -> &DiagonalOperator {
        &self.extended_sigma_v
    }

    /// Diagonal `lambda_k^(2(2n-1)) tau_k`.
    pub fn extended_qv(&self) -> &DiagonalOperator {
        &self.extended_qv
    }

    pub fn admissibility(&self) -> &ScaleAdmissibility {
        &self.admissibility
    }
}

fn positive_diag(space: Space, values: Vec<f64>, what: &str) -> Result<DiagonalOperator> {
    if let Some(k) = values.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "{what} entry {} is not a positive finite number ({}); lower the scale index or the truncation",
            k + 1,
            values[k]
        )));
    }
    DiagonalOperator::span_only(space, values)
}

/// Lifts `m` to `H1^-n x H2^-n`.
pub fn extend_model(m: &ModelSpec, n: u32) -> Result<ScaleModel> {
    if n == 0 {
        return Err(Error::InvalidParameter("scale index must be >= 1".into()));
    }
    let a = m.system();
    let lam = a.values();
    let mu = m.sigma_u().span_vars();
    let tau = m.sigma_v().span_vars();
    let p4 = 4 * n as i32;

    let ext_u = lam.iter().zip(mu).map(|(l, m)| l.powi(p4) * m).collect();
    let ext_v = lam.iter().zip(tau).map(|(l, t)| l.powi(p4) * t).collect();
    let ext_q = lam.iter().zip(tau).map(|(l, t)| l.powi(p4 - 2) * t).collect();
    let extended_sigma_u = positive_diag(Space::H1, ext_u, "extended sigma_u")?;
    let extended_sigma_v = positive_diag(Space::H2, ext_v, "extended sigma_v")?;
    let extended_qv = positive_diag(Space::H1, ext_q, "extended Q_v")?;

    let ld = a.family().decay();
    let md = m.sigma_u().family().decay();
    let td = m.sigma_v().family().decay();
    let nf = n as f64;
    let w_u: Vec<f64> = lam.iter().zip(mu).map(|(l, m)| l.powi(p4 - 2) * m).collect();
    let admissibility = ScaleAdmissibility {
        weighted_sigma_u: SeriesCheck::new(combine(&[(ld, 4.0 * nf - 2.0), (md, 1.0)]), w_u),
        weighted_sigma_v: SeriesCheck::new(
            combine(&[(ld, 4.0 * nf), (td, 1.0)]),
            extended_sigma_v.diag().iter().copied(),
        ),
        extended_trace_sigma_u: SeriesCheck::new(
            combine(&[(ld, 4.0 * nf), (md, 1.0)]),
            extended_sigma_u.diag().iter().copied(),
        ),
        white_noise_sum: SeriesCheck::new(combine(&[(ld, 4.0 * nf - 2.0)]), lam.iter().map(|l| l.powi(p4 - 2))),
    };

    Ok(ScaleModel {
        base: m.clone(),
        scale_index: n,
        extended_sigma_u,
        extended_sigma_v,
        extended_qv,
        admissibility,
    })
}

/// Scale models for `n = 1..=n_max`; levels whose extended covariances
/// underflow come back as errors.
pub fn scale_levels(m: &ModelSpec, n_max: u32) -> Vec<Result<ScaleModel>> {
    (1..=n_max).map(|n| extend_model(m, n)).collect()
}

/// `||T~||^2 = sum tau_k lambda_k^(2(2n-1)) (lambda_k^2 mu_k / tau_k + 1)^-1`.
///
/// The summand is within a factor two of
/// `min(lambda^(4n-2) tau, lambda^(4n-4) tau^2 / mu)`.
pub fn check_hs_tilde(sm: &ScaleModel) -> SeriesCheck {
    let a = sm.base.system();
    let ld = a.family().decay();
    let md = sm.base.sigma_u().family().decay();
    let td = sm.base.sigma_v().family().decay();
    let nf = sm.scale_index as f64;
    let first = combine(&[(ld, 4.0 * nf - 2.0), (td, 1.0)]);
    let second = combine(&[(ld, 4.0 * nf - 4.0), (td, 2.0), (md, -1.0)]);
    let decay = match (first, second) {
        (Some(x), Some(y)) => Some(x.min(y)),
        _ => None,
    };
    let terms = sm
        .extended_qv
        .diag()
        .iter()
        .zip(sm.base.conditional_multipliers())
        .map(|(q, f)| q * f);
    SeriesCheck::new(decay, terms)
}

/// `B_hat = (AA*)^-1 A Sigma~_u A* Sigma~_v^-1` on `H2^-n`.
///
/// The diagonal is `lambda^-2 * lambda * (lambda^(4n) mu) * lambda / (lambda^(4n) tau)`;
/// the scale weights cancel exactly and are not formed.
pub fn optimal_b_scale(sm: &ScaleModel) -> DiagonalOperator {
    let diag = sm
        .base
        .sigma_u()
        .span_vars()
        .iter()
        .zip(sm.base.sigma_v().span_vars())
        .map(|(mu, tau)| mu / tau)
        .collect();
    DiagonalOperator::span_only(Space::H2, diag).expect("ratio of positive variances")
}

/// `E[y|x] = Q~_v (Sigma~_u + Q~_v)^-1 x` in `H1^-n`, where the mean vanishes.
///
/// The returned element carries a zero kernel block.
pub fn conditional_expectation_scale(sm: &ScaleModel, x: &HilbertElement) -> Result<HilbertElement> {
    let a = sm.base.system();
    ensure_len("conditional_expectation_scale", a.truncation(), x.span().len())?;
    let span = x
        .span()
        .iter()
        .zip(sm.extended_qv.diag())
        .zip(sm.extended_sigma_u.diag())
        .map(|((c, q), u)| c * (q / (u + q)))
        .collect();
    Ok(HilbertElement::h1(vec![0.0; a.kernel_dim()], span))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::SequenceFamily;

    fn white_noise(lambda_exp: f64, su: f64, sv: f64, n: usize) -> ModelSpec {
        ModelSpec::from_families(
            SingularSystem::new(SequenceFamily::power_law(lambda_exp, 1.0).unwrap(), n, 0).unwrap(),
            vec![],
            SequenceFamily::constant(su).unwrap(),
            vec![],
            SequenceFamily::constant(sv).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn fractional_power_examples() {
        let a = SingularSystem::from_values(vec![0.5], 0).unwrap();
        assert_eq!(fractional_power(&a, 0.0).diag(), &[1.0]);
        assert_eq!(fractional_power(&a, 0.0).kernel_action(), 1.0);
        assert_eq!(fractional_power(&a, 1.0).diag(), &[4.0]);
    }

    #[test]
    fn scale_norm_examples() {
        let a = SingularSystem::from_values(vec![0.5, 0.25], 1).unwrap();
        let e1 = HilbertElement::basis(&a, Space::H1, 1);
        assert_eq!(scale_norm(&a, &e1, 1.0).unwrap(), 0.25);
        let h = HilbertElement::h1(vec![9.0], vec![3.0, 4.0]);
        assert_eq!(scale_norm(&a, &h, 0.0).unwrap(), 5.0);
        let kernel_only = HilbertElement::h1(vec![9.0], vec![0.0, 0.0]);
        for s in [1.0, 2.0, 3.0] {
            assert_eq!(scale_norm(&a, &kernel_only, s).unwrap(), 0.0);
        }
    }

    #[test]
    fn white_noise_white_noise_condition_at_n1() {
        let sm = extend_model(&white_noise(1.0, 2.0, 4.0, 64), 1).unwrap();
        assert_eq!(sm.admissibility().white_noise_condition(), Decision::ProvenConvergent);
        assert_eq!(check_hs_tilde(&sm).decision, Decision::ProvenConvergent);
        assert!(optimal_b_scale(&sm).diag().iter().all(|b| *b == 0.5));
    }

    #[test]
    fn weighted_condition_boundary() {
        let sm = extend_model(&white_noise(1.0, 1.0, 1.0, 16), 1).unwrap();
        assert_eq!(sm.admissibility().weighted_sigma_u.decision, Decision::ProvenConvergent);
        // lambda_k = k^(-1/2): lambda^(4n-2) = k^(-1) at n = 1.
        let sm = extend_model(&white_noise(0.5, 1.0, 1.0, 16), 1).unwrap();
        assert_eq!(sm.admissibility().weighted_sigma_u.decision, Decision::ProvenDivergent);
        assert_eq!(sm.admissibility().weighted_condition(), Decision::ProvenDivergent);
        let sm = extend_model(&white_noise(0.5, 1.0, 1.0, 16), 2).unwrap();
        assert_eq!(sm.admissibility().weighted_condition(), Decision::ProvenConvergent);
    }

    #[test]
    fn extended_diagonal_power_family() {
        let m = ModelSpec::from_families(
            SingularSystem::new(SequenceFamily::power_law(2.0, 1.0).unwrap(), 5, 0).unwrap(),
            vec![],
            SequenceFamily::power_law(8.0, 1.0).unwrap(),
            vec![],
            SequenceFamily::power_law(6.0, 1.0).unwrap(),
        )
        .unwrap();
        let sm = extend_model(&m, 1).unwrap();
        for (k, v) in sm.extended_sigma_u().diag().iter().enumerate() {
            let expected = ((k + 1) as f64).powi(-16);
            assert!((v - expected).abs() <= 1e-14 * expected);
        }
    }

    #[test]
    fn rejects_zero_scale_index() {
        assert!(extend_model(&white_noise(1.0, 1.0, 1.0, 4), 0).is_err());
    }

    #[test]
    fn underflowing_level_is_an_error() {
        let m = ModelSpec::from_families(
            SingularSystem::new(SequenceFamily::exponential(1.0, true, 1.0).unwrap(), 12, 0).unwrap(),
            vec![],
            SequenceFamily::constant(1.0).unwrap(),
            vec![],
            SequenceFamily::constant(1.0).unwrap(),
        )
        .unwrap();
        assert!(extend_model(&m, 4).is_err());
        let levels = scale_levels(&m, 4);
        assert!(levels[0].is_ok());
    }
}
