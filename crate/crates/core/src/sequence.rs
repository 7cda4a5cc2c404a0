//! Parametric decay families for singular values and covariance spectra,
//! together with the analytic convergence calculus used by the
//! admissibility diagnostics.
//!
//! A family is realized lazily: `term(k)` is defined for every `k >= 1`
//! (or up to the length of an explicit list). Convergence of a series built
//! from families is never inferred from partial sums. Every parametric
//! family has an asymptotic class `k^(-p) * exp(-a k - b k^2)` and products,
//! powers and minima of such classes stay inside the class, which makes the
//! decision exact.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of a positive, nonincreasing sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum FamilyKind {
    /// `k^(-exponent)`.
    PowerLaw { exponent: f64 },
    /// `exp(-rate k)`, or `exp(-rate k^2)` when `quadratic` is set.
    Exponential { rate: f64, quadratic: bool },
    /// The constant sequence (white-noise spectra).
    Constant,
    /// A finite list of strictly positive, nonincreasing values.
    Explicit { values: Vec<f64> },
}

/// A scaled sequence family: `term(k) = scale * shape(k)` for `k = 1, 2, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceFamily {
    kind: FamilyKind,
    scale: f64,
}

impl SequenceFamily {
    pub fn new(kind: FamilyKind, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "scale must be > 0 and finite, got {scale}"
            )));
        }
        match &kind {
            FamilyKind::PowerLaw { exponent } => {
                if !(exponent.is_finite() && *exponent > 0.0) {
                    return Err(Error::InvalidParameter(format!("exponent must be > 0, got {exponent}")));
                }
            }
            FamilyKind::Exponential { rate, .. } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return Err(Error::InvalidParameter(format!("rate must be > 0, got {rate}")));
                }
            }
            FamilyKind::Constant => {}
            FamilyKind::Explicit { values } => {
                if values.is_empty() {
                    return Err(Error::InvalidParameter(
                        "explicit family must contain at least one value".into(),
                    ));
                }
                for (i, v) in values.iter().enumerate() {
                    if !(v.is_finite() && *v > 0.0) {
                        return Err(Error::InvalidParameter(format!(
                            "explicit value {} must be > 0 and finite, got {v}",
                            i + 1
                        )));
                    }
                    if i > 0 && *v > values[i - 1] {
                        return Err(Error::InvalidParameter(format!(
                            "explicit values must be nonincreasing, value {} ({v}) exceeds value {} ({})",
                            i + 1,
                            i,
                            values[i - 1]
                        )));
                    }
                }
            }
        }
        Ok(Self { kind, scale })
    }

    pub fn power_law(exponent: f64, scale: f64) -> Result<Self> {
        Self::new(FamilyKind::PowerLaw { exponent }, scale)
    }

    pub fn exponential(rate: f64, quadratic: bool, scale: f64) -> Result<Self> {
        Self::new(FamilyKind::Exponential { rate, quadratic }, scale)
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::new(FamilyKind::Constant, value)
    }

    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        Self::new(FamilyKind::Explicit { values }, 1.0)
    }

    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Number of available terms, `None` for infinite families.
    pub fn available(&self) -> Option<usize> {
        match &self.kind {
            FamilyKind::Explicit { values } => Some(values.len()),
            _ => None,
        }
    }

    /// The `k`-th term, `k >= 1`. Returns `None` past the end of an explicit list.
    pub fn term(&self, k: usize) -> Option<f64> {
        debug_assert!(k >= 1);
        let kf = k as f64;
        let shape = match &self.kind {
            FamilyKind::PowerLaw { exponent } => kf.powf(-exponent),
            FamilyKind::Exponential { rate, quadratic } => {
                if *quadratic {
                    (-rate * kf * kf).exp()
                } else {
                    (-rate * kf).exp()
                }
            }
            FamilyKind::Constant => 1.0,
            FamilyKind::Explicit { values } => return values.get(k - 1).map(|v| v * self.scale),
        };
        Some(self.scale * shape)
    }

    /// The first `n` terms. Fails if the family is too short or a term
    /// underflows to zero.
    pub fn realize(&self, n: usize) -> Result<Vec<f64>> {
        if let Some(len) = self.available() {
            if n > len {
                return Err(Error::InvalidParameter(format!(
                    "explicit family has {len} values but {n} were requested"
                )));
            }
        }
        let mut out = Vec::with_capacity(n);
        for k in 1..=n {
            let t = self.term(k).expect("length checked above");
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "term {k} of {:?} is not a positive finite number ({t})",
                    self.kind
                )));
            }
            out.push(t);
        }
        Ok(out)
    }

    /// Asymptotic class, `None` for explicit lists.
    pub fn decay(&self) -> Option<Decay> {
        match &self.kind {
            FamilyKind::PowerLaw { exponent } => Some(Decay::power(*exponent)),
            FamilyKind::Exponential { rate, quadratic } => Some(if *quadratic {
                Decay {
                    quadratic_rate: *rate,
                    ..Decay::ONE
                }
            } else {
                Decay {
                    linear_rate: *rate,
                    ..Decay::ONE
                }
            }),
            FamilyKind::Constant => Some(Decay::ONE),
            FamilyKind::Explicit { .. } => None,
        }
    }
}

const RATE_EPS: f64 = 1e-12;

fn sign(x: f64) -> Ordering {
    if x > RATE_EPS {
        Ordering::Greater
    } else if x < -RATE_EPS {
        Ordering::Less
    } else {
        Ordering::Equal
    }
}

/// Asymptotic class `k^(-power) * exp(-linear_rate k - quadratic_rate k^2)`
/// of a positive sequence, up to a constant factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decay {
    pub quadratic_rate: f64,
    pub linear_rate: f64,
    pub power: f64,
}

impl Decay {
    pub const ONE: Decay = Decay {
        quadratic_rate: 0.0,
        linear_rate: 0.0,
        power: 0.0,
    };

    pub fn power(p: f64) -> Self {
        Decay { power: p, ..Self::ONE }
    }

    /// Class of `a_k^e`.
    pub fn pow(self, e: f64) -> Self {
        Decay {
            quadratic_rate: self.quadratic_rate * e,
            linear_rate: self.linear_rate * e,
            power: self.power * e,
        }
    }

    /// Class of `a_k * b_k`.
    pub fn times(self, other: Decay) -> Self {
        Decay {
            quadratic_rate: self.quadratic_rate + other.quadratic_rate,
            linear_rate: self.linear_rate + other.linear_rate,
            power: self.power + other.power,
        }
    }

    /// Class of `a_k / b_k`.
    pub fn over(self, other: Decay) -> Self {
        self.times(other.pow(-1.0))
    }

    /// Compares decay speed: `Greater` means `self` tends to zero faster.
    pub fn cmp_speed(&self, other: &Decay) -> Ordering {
        sign(self.quadratic_rate - other.quadratic_rate)
            .then(sign(self.linear_rate - other.linear_rate))
            .then(sign(self.power - other.power))
    }

    /// Class of `min(a_k, b_k)`, the faster decaying of the two.
    pub fn min(self, other: Decay) -> Self {
        if self.cmp_speed(&other) == Ordering::Less {
            other
        } else {
            self
        }
    }

    /// Whether `sum_k a_k` converges.
    pub fn summable(&self) -> bool {
        match sign(self.quadratic_rate).then(sign(self.linear_rate)) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => sign(self.power - 1.0) == Ordering::Greater,
        }
    }
}

/// Outcome of an analytic series test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    ProvenConvergent,
    ProvenDivergent,
    UnknownExplicitFamily,
}

impl Decision {
    pub fn from_decay(decay: Option<Decay>) -> Self {
        match decay {
            Some(d) if d.summable() => Decision::ProvenConvergent,
            Some(_) => Decision::ProvenDivergent,
            None => Decision::UnknownExplicitFamily,
        }
    }

    pub fn is_divergent(self) -> bool {
        self == Decision::ProvenDivergent
    }
}

/// An analytic decision on an infinite series together with its partial sum
/// at the working truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesCheck {
    pub decision: Decision,
    pub partial_sum: f64,
    pub terms: usize,
}

impl SeriesCheck {
    pub fn new(decay: Option<Decay>, terms: impl IntoIterator<Item = f64>) -> Self {
        let mut partial_sum = 0.0;
        let mut count = 0;
        for t in terms {
            partial_sum += t;
            count += 1;
        }
        Self {
            decision: Decision::from_decay(decay),
            partial_sum,
            terms: count,
        }
    }
}

/// Combines optional classes, propagating "unknown".
pub(crate) fn combine(parts: &[(Option<Decay>, f64)]) -> Option<Decay> {
    parts
        .iter()
        .try_fold(Decay::ONE, |acc, (d, e)| d.map(|d| acc.times(d.pow(*e))))
}
