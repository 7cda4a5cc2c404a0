//! Dense-matrix reference computations for the spectral filter tests.
//!
//! Nothing here knows about singular systems: a test describes a model by
//! its singular values and covariance spectra, the kit embeds it in a
//! randomly rotated orthonormal frame, and every quantity is computed with
//! plain matrix algebra in that frame.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random orthogonal matrix from the QR factorization of a uniform matrix.
pub fn random_orthogonal(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    m.qr().q()
}

/// Nonincreasing random positive values in `[lo, hi]`.
pub fn sorted_desc(n: usize, lo: f64, hi: f64, rng: &mut impl Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

pub fn uniform_vec(n: usize, lo: f64, hi: f64, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// A diagonal model embedded in rotated coordinates.
///
/// `H1 = R^(d0 + N)` with frame `frame1` whose first `N` columns are the
/// right singular vectors and last `d0` columns span `Ker(A)`;
/// `H2 = R^N` with frame `frame2` of left singular vectors.
pub struct DenseModel {
    pub a: DMatrix<f64>,
    pub sigma_u: DMatrix<f64>,
    pub sigma_v: DMatrix<f64>,
    pub y0: DVector<f64>,
    pub frame1: DMatrix<f64>,
    pub frame2: DMatrix<f64>,
    pub n: usize,
    pub d0: usize,
}

impl DenseModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        lambda: &[f64],
        mu: &[f64],
        tau: &[f64],
        kernel_vars: &[f64],
        y0_kernel: &[f64],
        rng: &mut impl Rng,
    ) -> Self {
        let n = lambda.len();
        let d0 = kernel_vars.len();
        let frame1 = random_orthogonal(n + d0, rng);
        let frame2 = random_orthogonal(n, rng);
        let mut sv = DMatrix::zeros(n, n + d0);
        for k in 0..n {
            sv[(k, k)] = lambda[k];
        }
        let a = &frame2 * sv * frame1.transpose();
        let mut u_diag = mu.to_vec();
        u_diag.extend_from_slice(kernel_vars);
        let sigma_u = &frame1 * DMatrix::from_diagonal(&DVector::from_vec(u_diag)) * frame1.transpose();
        let sigma_v = &frame2 * DMatrix::from_diagonal(&DVector::from_column_slice(tau)) * frame2.transpose();
        let y0 = frame1.columns(n, d0) * DVector::from_column_slice(y0_kernel);
        Self {
            a,
            sigma_u,
            sigma_v,
            y0,
            frame1,
            frame2,
            n,
            d0,
        }
    }

    /// Coordinates `(kernel, span)` to a vector of `H1`.
    pub fn embed(&self, kernel: &[f64], span: &[f64]) -> DVector<f64> {
        self.frame1.columns(0, self.n) * DVector::from_column_slice(span)
            + self.frame1.columns(self.n, self.d0) * DVector::from_column_slice(kernel)
    }

    /// A vector of `H1` to coordinates `(kernel, span)`.
    pub fn coords(&self, h: &DVector<f64>) -> (Vec<f64>, Vec<f64>) {
        let c = self.frame1.transpose() * h;
        (
            c.rows(self.n, self.d0).iter().copied().collect(),
            c.rows(0, self.n).iter().copied().collect(),
        )
    }

    /// `A^+ = A^T (A A^T)^-1`.
    pub fn pseudo_inverse(&self) -> DMatrix<f64> {
        let aat = &self.a * self.a.transpose();
        self.a.transpose() * aat.try_inverse().expect("A has full row rank")
    }

    /// Solve `(I + A^T B A) y = x` for `B` given in `H2` singular coordinates.
    pub fn minimize(&self, beta: &[f64], x: &DVector<f64>) -> DVector<f64> {
        let b = &self.frame2 * DMatrix::from_diagonal(&DVector::from_column_slice(beta)) * self.frame2.transpose();
        let m = DMatrix::identity(self.n + self.d0, self.n + self.d0) + self.a.transpose() * b * &self.a;
        m.lu().solve(x).expect("I + A'BA is invertible")
    }

    /// Gaussian conditioning `E[y|x] = E[y] + S_xy S_x^-1 (x - E[x])` with
    /// the joint covariance of `x = y0 + A^+ v + u`, `y = y0 + A^+ v`.
    pub fn conditional_expectation(&self, x: &DVector<f64>) -> DVector<f64> {
        let ap = self.pseudo_inverse();
        let cov_y = &ap * &self.sigma_v * ap.transpose();
        let cov_x = &self.sigma_u + &cov_y;
        let gain = &cov_y * cov_x.try_inverse().expect("Sigma_X is injective");
        &self.y0 + gain * (x - &self.y0)
    }

    /// `J_B(y) = |x - y|^2 + <Ay, B A y>`.
    pub fn objective(&self, beta: &[f64], x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let b = &self.frame2 * DMatrix::from_diagonal(&DVector::from_column_slice(beta)) * self.frame2.transpose();
        let ay = &self.a * y;
        (x - y).norm_squared() + ay.dot(&(b * &ay))
    }
}

/// Relative distance `|a - b| / max(|a|, |b|, floor)`.
pub fn rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(floor)
}

/// Second-difference matrix built row by row from its definition.
pub fn second_difference(t: usize) -> DMatrix<f64> {
    DMatrix::from_fn(t - 2, t, |r, c| match c as isize - r as isize {
        0 => 1.0,
        1 => -2.0,
        2 => 1.0,
        _ => 0.0,
    })
}

/// Dense HP solve `(I + alpha P'P) y = x` via LU.
pub fn dense_hp(x: &[f64], alpha: f64) -> Vec<f64> {
    let p = second_difference(x.len());
    let m = DMatrix::identity(x.len(), x.len()) + p.transpose() * &p * alpha;
    m.lu()
        .solve(&DVector::from_column_slice(x))
        .unwrap()
        .as_slice()
        .to_vec()
}

/// Mean and standard error of the mean.
pub fn mean_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
