//! Gaussian weight belief and the exact Kalman-style moment updates.
//!
//! These are the prediction/update steps evaluated at the current
//! variational means. A single belief is mutated strictly sequentially;
//! distinct streams can be filtered in parallel without coordination.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Gaussian filtering posterior over the weight vector.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl WeightBelief {
    /// Zero mean, zero covariance: the stated initial condition.
    pub fn zeros(dim: usize) -> Self {
        Self {
            mean: DVector::zeros(dim),
            cov: DMatrix::zeros(dim, dim),
        }
    }

    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::Dimension {
                op: "WeightBelief",
                expected: mean.len(),
                got: cov.nrows(),
            });
        }
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Current variational means of the noise/drift parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariationalState {
    /// Weight-drift precision mean.
    pub alpha_mean: f64,
    /// Output precision mean.
    pub beta_mean: f64,
    /// Noise offset mean.
    pub mu_mean: f64,
    /// Variance of the noise offset.
    pub mu_var: f64,
}

impl VariationalState {
    pub fn new(alpha_mean: f64, beta_mean: f64, mu_mean: f64, mu_var: f64) -> Result<Self> {
        if !(alpha_mean.is_finite() && alpha_mean > 0.0) {
            return Err(Error::domain(
                "VariationalState",
                format!("alpha_mean must be positive, got {alpha_mean}"),
            ));
        }
        if !(beta_mean.is_finite() && beta_mean > 0.0) {
            return Err(Error::domain(
                "VariationalState",
                format!("beta_mean must be positive, got {beta_mean}"),
            ));
        }
        if !mu_mean.is_finite() || !(mu_var >= 0.0) {
            return Err(Error::domain(
                "VariationalState",
                format!("mu_mean must be finite and mu_var nonnegative, got {mu_mean}, {mu_var}"),
            ));
        }
        Ok(Self {
            alpha_mean,
            beta_mean,
            mu_mean,
            mu_var,
        })
    }
}

/// One observation of the stream; a missing output is `y: None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub x: DVector<f64>,
    pub y: Option<f64>,
}

impl Observation {
    pub fn new(x: DVector<f64>, y: Option<f64>) -> Result<Self> {
        if x.iter().any(|v| v.is_nan()) {
            return Err(Error::domain("Observation", "features contain NaN"));
        }
        Ok(Self { x, y })
    }
}

/// One-step predictive distribution of the output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictiveDist {
    pub mean: f64,
    pub variance: f64,
}

/// Predictive output moments and the drift-inflated weight covariance.
///
/// `P = Sigma + alpha^{-1} I`, `m = x'mu + mu_noise`, `V = x'Px + beta^{-1}`.
/// P is returned for reuse by the gain and covariance updates.
pub fn predict(
    belief: &WeightBelief,
    vstate: &VariationalState,
    x: &DVector<f64>,
) -> Result<(PredictiveDist, DMatrix<f64>)> {
    if x.len() != belief.dim() {
        return Err(Error::Dimension {
            op: "predict",
            expected: belief.dim(),
            got: x.len(),
        });
    }
    let mut p = belief.cov.clone();
    let drift = 1.0 / vstate.alpha_mean;
    for i in 0..p.nrows() {
        p[(i, i)] += drift;
    }
    let mean = belief.mean.dot(x) + vstate.mu_mean;
    let variance = (x.transpose() * &p * x)[(0, 0)] + 1.0 / vstate.beta_mean;
    Ok((PredictiveDist { mean, variance }, p))
}

/// Kalman gain `g = (x'Px + beta^{-1})^{-1} P x`.
pub fn kalman_gain(p: &DMatrix<f64>, x: &DVector<f64>, beta_mean: f64) -> Result<DVector<f64>> {
    if x.len() != p.nrows() {
        return Err(Error::Dimension {
            op: "kalman_gain",
            expected: p.nrows(),
            got: x.len(),
        });
    }
    let px = p * x;
    let denom = x.dot(&px) + 1.0 / beta_mean;
    if !(denom > 0.0) {
        return Err(Error::numeric(
            "kalman_gain",
            format!("non-positive innovation variance {denom}"),
        ));
    }
    Ok(px / denom)
}

/// Posterior mean/covariance update:
/// `mu' = mu + g (y - x'mu - mu_noise)`, `Sigma' = (I - g x') P`,
/// re-symmetrised as `(S + S')/2`.
pub fn measurement_update(
    belief: &WeightBelief,
    p: &DMatrix<f64>,
    g: &DVector<f64>,
    x: &DVector<f64>,
    y: f64,
    mu_mean: f64,
) -> WeightBelief {
    let residual = y - belief.mean.dot(x) - mu_mean;
    let mean = &belief.mean + g * residual;
    let mut cov = p - g * (x.transpose() * p);
    symmetrize(&mut cov);
    WeightBelief { mean, cov }
}

/// Forces exact symmetry after the rank-one update.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Gaussian predictive log likelihood of an observed output.
pub fn predictive_log_lik(pred: &PredictiveDist, y: f64) -> f64 {
    let d = y - pred.mean;
    -0.5 * (2.0 * std::f64::consts::PI * pred.variance).ln() - d * d / (2.0 * pred.variance)
}
