//! Classical finite-dimensional HP filter and its spectral counterpart on the
//! singular system of the second-difference operator.

use nalgebra::{DMatrix, DVector};

use crate::error::{ensure_len, Error, Result};
use crate::filter::{minimize, optimal_b};
use crate::gaussian::ModelSpec;
use crate::sequence::SequenceFamily;
use crate::spectral::{HilbertElement, SingularSystem};

/// `P` with `(P y)_t = y_t - 2 y_{t-1} + y_{t-2}`, `t = 3..=T`, as a `(T-2) x T` matrix.
pub fn second_difference_matrix(t: usize) -> Result<DMatrix<f64>> {
    if t < 3 {
        return Err(Error::InvalidParameter(format!(
            "second differences need at least 3 points, got {t}"
        )));
    }
    let mut p = DMatrix::zeros(t - 2, t);
    for r in 0..t - 2 {
        p[(r, r)] = 1.0;
        p[(r, r + 1)] = -2.0;
        p[(r, r + 2)] = 1.0;
    }
    Ok(p)
}

/// Minimizer of `sum (x_t - y_t)^2 + alpha sum (y_t - 2y_{t-1} + y_{t-2})^2`,
/// from the dense system `(I + alpha P'P) y = x`.
pub fn classical_hp(x: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be > 0, got {alpha}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("series must be finite".into()));
    }
    let p = second_difference_matrix(x.len())?;
    let mut system = p.transpose() * &p * alpha;
    for i in 0..x.len() {
        system[(i, i)] += 1.0;
    }
    let chol = system
        .cholesky()
        .ok_or_else(|| Error::InvalidParameter("HP system is not positive definite".into()))?;
    Ok(chol.solve(&DVector::from_column_slice(x)).as_slice().to_vec())
}

/// Singular system of the second-difference operator on `T` points, with
/// the affine sequences as the two-dimensional kernel.
#[derive(Debug, Clone)]
pub struct SecondDifferenceBasis {
    system: SingularSystem,
    /// Row `k` holds the right singular vector `e_{k+1}`.
    right: DMatrix<f64>,
    /// Orthonormal basis of `Ker(P)`: constants and centered linear trend.
    kernel: DMatrix<f64>,
}

impl SecondDifferenceBasis {
    pub fn new(t: usize) -> Result<Self> {
        let p = second_difference_matrix(t)?;
        let svd = p.svd(false, true);
        let v_t = svd.v_t.expect("requested right singular vectors");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
        let values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
        let right = DMatrix::from_fn(order.len(), t, |r, c| v_t[(order[r], c)]);

        let mut kernel = DMatrix::zeros(2, t);
        let mean = (t as f64 - 1.0) / 2.0;
        let norm_trend = (0..t).map(|i| (i as f64 - mean).powi(2)).sum::<f64>().sqrt();
        for i in 0..t {
            kernel[(0, i)] = 1.0 / (t as f64).sqrt();
            kernel[(1, i)] = (i as f64 - mean) / norm_trend;
        }

        let system = SingularSystem::new(SequenceFamily::explicit(values)?, t - 2, 2)?;
        Ok(Self { system, right, kernel })
    }

    pub fn system(&self) -> &SingularSystem {
        &self.system
    }

    pub fn len(&self) -> usize {
        self.right.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coordinates of a series in the kernel and singular bases.
    pub fn analyze(&self, series: &[f64]) -> Result<HilbertElement> {
        ensure_len("series length", self.len(), series.len())?;
        let s = DVector::from_column_slice(series);
        let kernel = &self.kernel * &s;
        let span = &self.right * &s;
        Ok(HilbertElement::h1(kernel.as_slice().to_vec(), span.as_slice().to_vec()))
    }

    pub fn synthesize(&self, h: &HilbertElement) -> Result<Vec<f64>> {
        self.system.check_element(h, crate::spectral::Space::H1, "synthesize")?;
        let k = DVector::from_column_slice(h.kernel());
        let c = DVector::from_column_slice(h.span());
        let out = self.kernel.transpose() * k + self.right.transpose() * c;
        Ok(out.as_slice().to_vec())
    }

    /// White-noise model `Sigma_u = sigma_u I`, `Sigma_v = sigma_v I` on this basis.
    pub fn white_noise_model(&self, sigma_u: f64, sigma_v: f64, y0_kernel: Vec<f64>) -> Result<ModelSpec> {
        ModelSpec::from_families(
            self.system.clone(),
            y0_kernel,
            SequenceFamily::constant(sigma_u)?,
            vec![sigma_u; 2],
            SequenceFamily::constant(sigma_v)?,
        )
    }

    /// `y(B_hat, x)` for the white-noise model, mapped back to the time domain.
    pub fn spectral_hp(&self, series: &[f64], sigma_u: f64, sigma_v: f64) -> Result<Vec<f64>> {
        let model = self.white_noise_model(sigma_u, sigma_v, vec![0.0; 2])?;
        let x = self.analyze(series)?;
        let y = minimize(&self.system, &optimal_b(&model), &x)?;
        self.synthesize(&y)
    }
}
