//! Backward heat conduction on a wire of length `pi` with zero-temperature
//! ends. The forward map from the profile at `t0` to the profile at `tau`
//! is diagonal in the sine basis `e_n(s) = sqrt(2/pi) sin(n s)` with
//! singular values `exp(-n^2 (tau - t0))`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::filter::{minimize, optimal_b};
use crate::gaussian::ModelSpec;
use crate::sequence::SequenceFamily;
use crate::spectral::{HilbertElement, SingularSystem};

/// Default number of grid points for synthesis and quadrature.
pub const DEFAULT_GRID: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatProblem {
    /// Observation time.
    pub tau: f64,
    /// Target time, strictly before `tau`.
    pub t0: f64,
    /// Requested number of sine modes.
    pub truncation: usize,
    /// Number of uniformly spaced points on `[0, pi]`, endpoints included.
    pub grid: usize,
}

impl HeatProblem {
    pub fn new(tau: f64, t0: f64, truncation: usize, grid: usize) -> Result<Self> {
        let p = Self {
            tau,
            t0,
            truncation,
            grid,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.t0.is_finite()) {
            return Err(Error::InvalidParameter("tau and t0 must be finite".into()));
        }
        if self.tau - self.t0 <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "tau - t0 must be > 0, got tau = {}, t0 = {}",
                self.tau, self.t0
            )));
        }
        if self.truncation == 0 {
            return Err(Error::InvalidParameter("truncation must be >= 1".into()));
        }
        if self.grid < 2 {
            return Err(Error::InvalidParameter("grid needs at least 2 points".into()));
        }
        Ok(())
    }

    /// Elapsed time `tau - t0`.
    pub fn elapsed(&self) -> f64 {
        self.tau - self.t0
    }

    /// Number of modes actually represented: the requested truncation capped
    /// at the largest `n` with `exp(-n^2 (tau - t0))` still a normal float.
    pub fn effective_truncation(&self) -> usize {
        self.truncation.min(underflow_cap(self.elapsed()))
    }

    /// Grid abscissae `s_j = pi j / (grid - 1)`.
    pub fn grid_points(&self) -> Vec<f64> {
        let m = (self.grid - 1) as f64;
        (0..self.grid)
            .map(|j| if j + 1 == self.grid { PI } else { PI * j as f64 / m })
            .collect()
    }
}

/// Largest `n` with `exp(-n^2 dt) >= f64::MIN_POSITIVE`.
pub fn underflow_cap(dt: f64) -> usize {
    let mut n = ((-f64::MIN_POSITIVE.ln()) / dt).sqrt().floor() as usize;
    while n > 0 && (-((n * n) as f64) * dt).exp() < f64::MIN_POSITIVE {
        n -= 1;
    }
    while (-(((n + 1) * (n + 1)) as f64) * dt).exp() >= f64::MIN_POSITIVE {
        n += 1;
    }
    n
}

/// Singular system `lambda_n = exp(-n^2 (tau - t0))`, no kernel.
pub fn build_heat_system(p: &HeatProblem) -> Result<SingularSystem> {
    p.validate()?;
    let n = p.effective_truncation();
    if n < p.truncation {
        log::warn!(
            "heat system capped at {n} modes (requested {}): exp(-n^2 (tau - t0)) underflows beyond",
            p.truncation
        );
    }
    if n == 0 {
        return Err(Error::InvalidParameter(format!(
            "tau - t0 = {} leaves no representable mode",
            p.elapsed()
        )));
    }
    SingularSystem::new(SequenceFamily::exponential(p.elapsed(), true, 1.0)?, n, 0)
}

fn mode(n: usize, s: f64) -> f64 {
    (2.0 / PI).sqrt() * (n as f64 * s).sin()
}

/// Evaluates `sum_n h_n e_n(s_j)` on the problem grid.
pub fn synthesize_grid(h: &HilbertElement, p: &HeatProblem) -> Vec<f64> {
    p.grid_points()
        .into_iter()
        .map(|s| h.span().iter().enumerate().map(|(i, c)| c * mode(i + 1, s)).sum())
        .collect()
}

/// Sine coefficients `<f, e_n>`, `n = 1..=modes`, of samples `(s_j, f_j)` by
/// the composite trapezoidal rule. Abscissae must be increasing in `[0, pi]`.
pub fn analyze_samples(s: &[f64], f: &[f64], modes: usize) -> Result<HilbertElement> {
    ensure_len("grid samples", s.len(), f.len())?;
    if s.len() < 2 {
        return Err(Error::InvalidParameter("need at least 2 grid samples".into()));
    }
    let span = (1..=modes)
        .map(|n| {
            s.windows(2)
                .zip(f.windows(2))
                .map(|(sw, fw)| 0.5 * (sw[1] - sw[0]) * (fw[0] * mode(n, sw[0]) + fw[1] * mode(n, sw[1])))
                .sum()
        })
        .collect();
    Ok(HilbertElement::h1(Vec::new(), span))
}

/// Sine coefficients of profile values sampled on the problem grid.
pub fn analyze_grid(values: &[f64], p: &HeatProblem) -> Result<HilbertElement> {
    ensure_len("grid values", p.grid, values.len())?;
    analyze_samples(&p.grid_points(), values, p.effective_truncation())
}

/// Diagonal Gaussian model for the heat problem with covariance spectra
/// `sigma_u` (observation noise) and `sigma_v` (signal) in the sine basis.
pub fn heat_model(p: &HeatProblem, sigma_u: &SequenceFamily, sigma_v: &SequenceFamily) -> Result<ModelSpec> {
    ModelSpec::from_families(
        build_heat_system(p)?,
        Vec::new(),
        sigma_u.clone(),
        Vec::new(),
        sigma_v.clone(),
    )
}

/// Filter multipliers `(1 + (sigma_n^u / sigma_n^v) exp(-2 n^2 (tau - t0)))^-1`.
pub fn heat_multipliers(p: &HeatProblem, sigma_u: &SequenceFamily, sigma_v: &SequenceFamily) -> Result<Vec<f64>> {
    let n = p.effective_truncation();
    let su = sigma_u.realize(n)?;
    let sv = sigma_v.realize(n)?;
    let dt = p.elapsed();
    Ok((1..=n)
        .zip(su.iter().zip(&sv))
        .map(|(k, (u, v))| 1.0 / (1.0 + (u / v) * (-2.0 * (k * k) as f64 * dt).exp()))
        .collect())
}

/// Closed-form optimal filter `y(B_hat, x)` for the heat problem.
pub fn run_heat_filter(
    p: &HeatProblem,
    sigma_u: &SequenceFamily,
    sigma_v: &SequenceFamily,
    x: &HilbertElement,
) -> Result<HilbertElement> {
    p.validate()?;
    let mult = heat_multipliers(p, sigma_u, sigma_v)?;
    ensure_len("heat filter input", mult.len(), x.span().len())?;
    ensure_len("heat filter kernel", 0, x.kernel().len())?;
    Ok(HilbertElement::h1(
        Vec::new(),
        x.span().iter().zip(&mult).map(|(c, f)| c * f).collect(),
    ))
}

/// The same filter through the generic singular-system pipeline.
pub fn run_heat_filter_generic(
    p: &HeatProblem,
    sigma_u: &SequenceFamily,
    sigma_v: &SequenceFamily,
    x: &HilbertElement,
) -> Result<HilbertElement> {
    let m = heat_model(p, sigma_u, sigma_v)?;
    minimize(m.system(), &optimal_b(&m), x)
}
