//! Singular-system representation of a compact operator `A: H1 -> H2`.
//!
//! Elements of `H1` are stored as a finite block of `Ker(A)` coordinates plus
//! coefficients in the right singular basis `{e_k}`; elements of `H2` carry
//! coefficients in the left singular basis `{d_k}` only. Every operator used
//! by the filter is diagonal in these bases, so truncation at `N` directions
//! commutes with all of them.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, ensure_space, Error, Result};
use crate::sequence::SequenceFamily;

/// Which Hilbert space an element or operator lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Space {
    H1,
    H2,
}

/// Truncated singular system `(lambda_k, e_k, d_k)`, `k = 1..=N`, plus a
/// `kernel_dim`-dimensional model of `Ker(A)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularSystem {
    family: SequenceFamily,
    values: Vec<f64>,
    kernel_dim: usize,
}

impl SingularSystem {
    pub fn new(family: SequenceFamily, truncation: usize, kernel_dim: usize) -> Result<Self> {
        if truncation == 0 {
            return Err(Error::InvalidParameter("truncation must be >= 1".into()));
        }
        let values = family.realize(truncation)?;
        if let Some(k) = values.windows(2).position(|w| w[1] > w[0]) {
            return Err(Error::InvalidParameter(format!(
                "singular values must be nonincreasing (lambda_{} > lambda_{})",
                k + 2,
                k + 1
            )));
        }
        Ok(Self {
            family,
            values,
            kernel_dim,
        })
    }

    /// Builds a system from explicitly listed singular values.
    pub fn from_values(values: Vec<f64>, kernel_dim: usize) -> Result<Self> {
        let n = values.len();
        Self::new(SequenceFamily::explicit(values)?, n, kernel_dim)
    }

    pub fn truncation(&self) -> usize {
        self.values.len()
    }

    pub fn kernel_dim(&self) -> usize {
        self.kernel_dim
    }

    /// Singular values `lambda_1 >= ... >= lambda_N > 0`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn family(&self) -> &SequenceFamily {
        &self.family
    }

    pub(crate) fn check_element(&self, h: &HilbertElement, space: Space, what: &'static str) -> Result<()> {
        ensure_space(what, space, h.space)?;
        ensure_len(what, self.truncation(), h.span.len())?;
        match space {
            Space::H1 => ensure_len(what, self.kernel_dim, h.kernel.len()),
            Space::H2 => ensure_len(what, 0, h.kernel.len()),
        }
    }

    pub(crate) fn check_operator(&self, op: &DiagonalOperator, space: Space, what: &'static str) -> Result<()> {
        ensure_space(what, space, op.space)?;
        ensure_len(what, self.truncation(), op.diag.len())
    }
}

/// An element of `H1` or `H2` in singular-basis coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HilbertElement {
    space: Space,
    kernel: Vec<f64>,
    span: Vec<f64>,
}

impl HilbertElement {
    /// An `H1` element with `Ker(A)` coordinates `kernel` and `<h, e_k>` = `span[k-1]`.
    pub fn h1(kernel: Vec<f64>, span: Vec<f64>) -> Self {
        Self {
            space: Space::H1,
            kernel,
            span,
        }
    }

    /// An `H2` element with `<h, d_k>` = `span[k-1]`.
    pub fn h2(span: Vec<f64>) -> Self {
        Self {
            space: Space::H2,
            kernel: Vec::new(),
            span,
        }
    }

    pub fn zero(system: &SingularSystem, space: Space) -> Self {
        let kernel = match space {
            Space::H1 => vec![0.0; system.kernel_dim()],
            Space::H2 => Vec::new(),
        };
        Self {
            space,
            kernel,
            span: vec![0.0; system.truncation()],
        }
    }

    /// The basis vector `e_k` (or `d_k`), with `k` counted from 1.
    pub fn basis(system: &SingularSystem, space: Space, k: usize) -> Self {
        let mut h = Self::zero(system, space);
        h.span[k - 1] = 1.0;
        h
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    pub fn span(&self) -> &[f64] {
        &self.span
    }

    pub fn norm_sq(&self) -> f64 {
        self.kernel.iter().chain(&self.span).map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    fn zip_with(&self, other: &Self, what: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        ensure_space(what, self.space, other.space)?;
        ensure_len(what, self.kernel.len(), other.kernel.len())?;
        ensure_len(what, self.span.len(), other.span.len())?;
        Ok(Self {
            space: self.space,
            kernel: self.kernel.iter().zip(&other.kernel).map(|(a, b)| f(*a, *b)).collect(),
            span: self.span.iter().zip(&other.span).map(|(a, b)| f(*a, *b)).collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            space: self.space,
            kernel: self.kernel.iter().map(|v| c * v).collect(),
            span: self.span.iter().map(|v| c * v).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.kernel.iter().chain(&self.span).all(|v| v.is_finite())
    }
}

/// A bounded operator that is diagonal in the singular basis of its space,
/// acting as `kernel_action * I` on the `Ker(A)` block of `H1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalOperator {
    space: Space,
    diag: Vec<f64>,
    kernel_action: f64,
}

impl DiagonalOperator {
    pub fn new(space: Space, diag: Vec<f64>, kernel_action: f64) -> Result<Self> {
        if let Some(k) = diag.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "diagonal entry {} is not finite",
                k + 1
            )));
        }
        if !(kernel_action.is_finite() && kernel_action >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kernel action must be finite and >= 0, got {kernel_action}"
            )));
        }
        Ok(Self {
            space,
            diag,
            kernel_action,
        })
    }

    /// Diagonal operator vanishing on the kernel block.
    pub fn span_only(space: Space, diag: Vec<f64>) -> Result<Self> {
        Self::new(space, diag, 0.0)
    }

    pub fn identity(space: Space, n: usize) -> Self {
        Self {
            space,
            diag: vec![1.0; n],
            kernel_action: match space {
                Space::H1 => 1.0,
                Space::H2 => 0.0,
            },
        }
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn kernel_action(&self) -> f64 {
        self.kernel_action
    }

    pub fn operator_norm(&self) -> f64 {
        self.diag.iter().fold(self.kernel_action, |m, v| m.max(v.abs()))
    }

    pub fn is_positive_semidefinite(&self) -> bool {
        self.diag.iter().all(|v| *v >= 0.0)
    }

    /// Position (1-based) of the first negative diagonal entry.
    pub(crate) fn first_negative(&self) -> Option<usize> {
        self.diag.iter().position(|v| *v < 0.0).map(|k| k + 1)
    }

    pub fn apply(&self, h: &HilbertElement) -> Result<HilbertElement> {
        ensure_space("diagonal apply", self.space, h.space)?;
        ensure_len("diagonal apply", self.diag.len(), h.span.len())?;
        Ok(HilbertElement {
            space: h.space,
            kernel: h.kernel.iter().map(|v| self.kernel_action * v).collect(),
            span: h.span.iter().zip(&self.diag).map(|(v, d)| v * d).collect(),
        })
    }

    pub fn compose(&self, other: &Self) -> Result<Self> {
        ensure_space("compose", self.space, other.space)?;
        ensure_len("compose", self.diag.len(), other.diag.len())?;
        Ok(Self {
            space: self.space,
            diag: self.diag.iter().zip(&other.diag).map(|(a, b)| a * b).collect(),
            kernel_action: self.kernel_action * other.kernel_action,
        })
    }

    /// Sum of the eigenvalues on the truncated space, including the kernel block.
    pub fn trace(&self, kernel_dim: usize) -> f64 {
        let span: f64 = self.diag.iter().sum();
        span + self.kernel_action * kernel_dim as f64
    }
}

/// `A h = sum_k lambda_k <h, e_k> d_k`.
pub fn apply_forward(a: &SingularSystem, h: &HilbertElement) -> Result<HilbertElement> {
    a.check_element(h, Space::H1, "apply_forward")?;
    Ok(HilbertElement::h2(
        h.span.iter().zip(a.values()).map(|(c, l)| l * c).collect(),
    ))
}

/// `A* g = sum_k lambda_k <g, d_k> e_k`.
pub fn apply_adjoint(a: &SingularSystem, g: &HilbertElement) -> Result<HilbertElement> {
    a.check_element(g, Space::H2, "apply_adjoint")?;
    Ok(HilbertElement::h1(
        vec![0.0; a.kernel_dim()],
        g.span.iter().zip(a.values()).map(|(c, l)| l * c).collect(),
    ))
}

/// The solution `y0 + A*(AA*)^-1 v` of `A y = v` with prescribed kernel component.
pub fn solve_min_norm(a: &SingularSystem, v: &HilbertElement, y0_kernel: &[f64]) -> Result<HilbertElement> {
    a.check_element(v, Space::H2, "solve_min_norm")?;
    ensure_len("solve_min_norm kernel", a.kernel_dim(), y0_kernel.len())?;
    Ok(HilbertElement::h1(
        y0_kernel.to_vec(),
        v.span.iter().zip(a.values()).map(|(c, l)| c / l).collect(),
    ))
}

/// Orthogonal projector `Pi = A*(AA*)^-1 A` onto `Ker(A)^perp`.
pub fn project_pi(a: &SingularSystem, h: &HilbertElement) -> Result<HilbertElement> {
    a.check_element(h, Space::H1, "project_pi")?;
    Ok(HilbertElement::h1(vec![0.0; a.kernel_dim()], h.span.clone()))
}

/// Complementary projector `I - Pi` onto `Ker(A)`.
pub fn project_kernel(a: &SingularSystem, h: &HilbertElement) -> Result<HilbertElement> {
    a.check_element(h, Space::H1, "project_kernel")?;
    Ok(HilbertElement::h1(h.kernel.clone(), vec![0.0; a.truncation()]))
}

/// Inner product on the truncated basis.
pub fn inner(h1: &HilbertElement, h2: &HilbertElement) -> Result<f64> {
    ensure_space("inner", h1.space, h2.space)?;
    ensure_len("inner kernel", h1.kernel.len(), h2.kernel.len())?;
    ensure_len("inner span", h1.span.len(), h2.span.len())?;
    Ok(h1
        .kernel
        .iter()
        .zip(&h2.kernel)
        .chain(h1.span.iter().zip(&h2.span))
        .map(|(a, b)| a * b)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys(values: &[f64], d0: usize) -> SingularSystem {
        SingularSystem::from_values(values.to_vec(), d0).unwrap()
    }

    #[test]
    fn forward_on_basis_vector() {
        let a = sys(&[0.5], 0);
        let e1 = HilbertElement::basis(&a, Space::H1, 1);
        assert_eq!(apply_forward(&a, &e1).unwrap(), HilbertElement::h2(vec![0.5]));
    }

    #[test]
    fn forward_annihilates_kernel() {
        let a = sys(&[1.0, 0.5], 2);
        let h = HilbertElement::h1(vec![3.0, -1.0], vec![0.0, 0.0]);
        assert_eq!(apply_forward(&a, &h).unwrap(), HilbertElement::zero(&a, Space::H2));
    }

    #[test]
    fn adjoint_then_forward_on_e2() {
        let a = sys(&[1.0, 0.5], 0);
        let e2 = HilbertElement::basis(&a, Space::H1, 2);
        let out = apply_adjoint(&a, &apply_forward(&a, &e2).unwrap()).unwrap();
        assert_eq!(out.span(), &[0.0, 0.25]);
        let d1 = HilbertElement::basis(&sys(&[0.5], 0), Space::H2, 1);
        assert_eq!(apply_adjoint(&sys(&[0.5], 0), &d1).unwrap().span(), &[0.5]);
    }

    #[test]
    fn solve_min_norm_examples() {
        let a = sys(&[0.5], 0);
        assert_eq!(
            solve_min_norm(&a, &HilbertElement::h2(vec![1.0]), &[]).unwrap().span(),
            &[2.0]
        );
        let a = sys(&[1.0, 0.5], 2);
        let y = solve_min_norm(&a, &HilbertElement::zero(&a, Space::H2), &[1.0, 2.0]).unwrap();
        assert_eq!(y, HilbertElement::h1(vec![1.0, 2.0], vec![0.0, 0.0]));
    }

    #[test]
    fn projectors() {
        let a = sys(&[1.0, 0.5], 1);
        let kernel_only = HilbertElement::h1(vec![2.0], vec![0.0, 0.0]);
        assert_eq!(
            project_pi(&a, &kernel_only).unwrap(),
            HilbertElement::zero(&a, Space::H1)
        );
        let span_only = HilbertElement::h1(vec![0.0], vec![1.0, -2.0]);
        assert_eq!(project_pi(&a, &span_only).unwrap(), span_only);
        let mixed = HilbertElement::h1(vec![4.0], vec![1.0, -2.0]);
        let p = project_pi(&a, &mixed).unwrap();
        let q = project_kernel(&a, &mixed).unwrap();
        assert_eq!(inner(&p, &q).unwrap(), 0.0);
        assert_eq!(p.add(&q).unwrap(), mixed);
    }

    #[test]
    fn inner_products() {
        let a = HilbertElement::h1(vec![], vec![1.0, 2.0]);
        let b = HilbertElement::h1(vec![], vec![3.0, 4.0]);
        assert_eq!(inner(&a, &b).unwrap(), 11.0);
        let s = sys(&[1.0, 0.5], 0);
        let e1 = HilbertElement::basis(&s, Space::H1, 1);
        let e2 = HilbertElement::basis(&s, Space::H1, 2);
        assert_eq!(inner(&e1, &e2).unwrap(), 0.0);
        assert_eq!(inner(&a, &a).unwrap(), a.norm_sq());
    }

    #[test]
    fn structural_errors() {
        let a = sys(&[1.0, 0.5], 1);
        let wrong_len = HilbertElement::h1(vec![0.0], vec![1.0]);
        assert!(matches!(
            apply_forward(&a, &wrong_len),
            Err(Error::DimensionMismatch { .. })
        ));
        let wrong_space = HilbertElement::h2(vec![1.0, 1.0]);
        assert!(matches!(
            apply_forward(&a, &wrong_space),
            Err(Error::SpaceMismatch { .. })
        ));
        assert!(inner(&HilbertElement::h2(vec![1.0]), &HilbertElement::h1(vec![], vec![1.0])).is_err());
        assert!(solve_min_norm(&a, &HilbertElement::h2(vec![1.0, 1.0]), &[]).is_err());
    }

    #[test]
    fn system_validation() {
        assert!(SingularSystem::from_values(vec![1.0, 2.0], 0).is_err());
        assert!(SingularSystem::from_values(vec![1.0, 0.0], 0).is_err());
        assert!(SingularSystem::from_values(vec![], 0).is_err());
        let fam = SequenceFamily::power_law(1.0, 1.0).unwrap();
        assert!(SingularSystem::new(fam, 0, 0).is_err());
    }

    #[test]
    fn diagonal_operator_basics() {
        let op = DiagonalOperator::new(Space::H1, vec![2.0, -3.0], 0.5).unwrap();
        assert_eq!(op.operator_norm(), 3.0);
        assert!(!op.is_positive_semidefinite());
        assert_eq!(op.first_negative(), Some(2));
        let h = HilbertElement::h1(vec![4.0], vec![1.0, 1.0]);
        assert_eq!(op.apply(&h).unwrap(), HilbertElement::h1(vec![2.0], vec![2.0, -3.0]));
        assert_eq!(op.trace(1), -0.5);
        assert!(DiagonalOperator::new(Space::H1, vec![f64::NAN], 0.0).is_err());
        assert!(DiagonalOperator::new(Space::H1, vec![1.0], -1.0).is_err());
    }
}
