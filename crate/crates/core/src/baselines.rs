//! Comparison methods: an adaptive sequential Kalman filter and the
//! frequentist PA-I regressor.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::filter::{symmetrize, Observation, PredictiveDist};

/// Sequential Kalman filter state with innovation-driven maximum-likelihood
/// adaptation of the measurement and process noise variances.
#[derive(Debug, Clone, PartialEq)]
pub struct SkfState {
    pub weight_mean: DVector<f64>,
    pub weight_cov: DMatrix<f64>,
    /// Adaptive measurement-noise variance.
    pub r_hat: f64,
    /// Adaptive process-noise variance.
    pub q_hat: f64,
    /// EWMA factor for the innovation statistics; 1 freezes adaptation.
    pub forgetting: f64,
}

impl SkfState {
    pub fn new(
        weight_mean: DVector<f64>,
        weight_cov: DMatrix<f64>,
        r_hat: f64,
        q_hat: f64,
        forgetting: f64,
    ) -> Result<Self> {
        if weight_cov.nrows() != weight_mean.len() || weight_cov.ncols() != weight_mean.len() {
            return Err(Error::Dimension {
                op: "SkfState",
                expected: weight_mean.len(),
                got: weight_cov.nrows(),
            });
        }
        if !(r_hat > 0.0 && r_hat.is_finite()) {
            return Err(Error::domain("SkfState", format!("r_hat must be positive, got {r_hat}")));
        }
        if !(q_hat >= 0.0 && q_hat.is_finite()) {
            return Err(Error::domain("SkfState", format!("q_hat must be nonnegative, got {q_hat}")));
        }
        if !(forgetting > 0.0 && forgetting <= 1.0) {
            return Err(Error::domain(
                "SkfState",
                format!("forgetting must lie in (0, 1], got {forgetting}"),
            ));
        }
        Ok(Self {
            weight_mean,
            weight_cov,
            r_hat,
            q_hat,
            forgetting,
        })
    }

    /// Broad default start: zero weights, unit covariance.
    pub fn default_start(dim: usize, r0: f64, q0: f64, cov0: f64, forgetting: f64) -> Result<Self> {
        Self::new(
            DVector::zeros(dim),
            DMatrix::identity(dim, dim) * cov0,
            r0,
            q0,
            forgetting,
        )
    }

    pub fn predictive(&self, x: &DVector<f64>) -> Result<PredictiveDist> {
        if x.len() != self.weight_mean.len() {
            return Err(Error::Dimension {
                op: "skf predictive",
                expected: self.weight_mean.len(),
                got: x.len(),
            });
        }
        let p = self.inflated_cov();
        Ok(PredictiveDist {
            mean: self.weight_mean.dot(x),
            variance: (x.transpose() * &p * x)[(0, 0)] + self.r_hat,
        })
    }

    fn inflated_cov(&self) -> DMatrix<f64> {
        let mut p = self.weight_cov.clone();
        for i in 0..p.nrows() {
            p[(i, i)] += self.q_hat;
        }
        p
    }
}

/// One SKF step: predict, adapt the noise variances from the innovation,
/// then apply a standard Kalman update under the refreshed variances.
pub fn skf_step(state: &SkfState, obs: &Observation, r_floor: f64) -> Result<(SkfState, PredictiveDist)> {
    let y = match obs.y {
        Some(y) => y,
        None => return Err(Error::domain("skf_step", "missing output; use skf_missing")),
    };
    if !y.is_finite() || obs.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("skf_step", "non-finite observation"));
    }
    let x = &obs.x;
    let p_old = state.inflated_cov();
    let xpx = (x.transpose() * &p_old * x)[(0, 0)];
    let pred = PredictiveDist {
        mean: state.weight_mean.dot(x),
        variance: xpx + state.r_hat,
    };
    let innovation = y - pred.mean;

    // Innovation-based ML estimates, EWMA smoothed.
    let f = state.forgetting;
    let r_instant = (innovation * innovation - xpx).max(r_floor);
    let r_new = f * state.r_hat + (1.0 - f) * r_instant;
    let xsx = (x.transpose() * &state.weight_cov * x)[(0, 0)];
    let xx = x.norm_squared();
    let q_instant = ((innovation * innovation - xsx - r_new) / (xx + 1e-12)).max(0.0);
    let q_new = f * state.q_hat + (1.0 - f) * q_instant;

    // Kalman update with the refreshed variances.
    let mut p = state.weight_cov.clone();
    for i in 0..p.nrows() {
        p[(i, i)] += q_new;
    }
    let s = (x.transpose() * &p * x)[(0, 0)] + r_new;
    let g = &p * x / s;
    let weight_mean = &state.weight_mean + &g * innovation;
    let mut weight_cov = &p - &g * (x.transpose() * &p);
    symmetrize(&mut weight_cov);

    let next = SkfState {
        weight_mean,
        weight_cov,
        r_hat: r_new,
        q_hat: q_new,
        forgetting: f,
    };
    Ok((next, pred))
}

/// Missing-output SKF step: prediction only, covariance inflates by q.
pub fn skf_missing(state: &SkfState, x: &DVector<f64>) -> Result<(SkfState, PredictiveDist)> {
    let pred = state.predictive(x)?;
    let mut next = state.clone();
    next.weight_cov = state.inflated_cov();
    Ok((next, pred))
}

/// Frequentist PA-I regressor state.
#[derive(Debug, Clone, PartialEq)]
pub struct PaRegressorState {
    pub weights: DVector<f64>,
    /// Aggressiveness cap on the update step.
    pub c: f64,
    /// Insensitivity half-width of the loss.
    pub epsilon: f64,
}

impl PaRegressorState {
    pub fn new(dim: usize, c: f64, epsilon: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::domain("PaRegressorState", format!("C must be positive, got {c}")));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::domain(
                "PaRegressorState",
                format!("epsilon must be nonnegative, got {epsilon}"),
            ));
        }
        Ok(Self {
            weights: DVector::zeros(dim),
            c,
            epsilon,
        })
    }

    pub fn loss(&self, x: &DVector<f64>, y: f64) -> f64 {
        ((y - self.weights.dot(x)).abs() - self.epsilon).max(0.0)
    }
}

/// Closed-form PA-I update: `tau = min(C, loss / |x|^2)` along `sign(r) x`.
/// Zero loss, or a zero feature vector, leaves the weights untouched.
pub fn pa1_step(state: &PaRegressorState, obs: &Observation) -> Result<PaRegressorState> {
    let y = match obs.y {
        Some(y) => y,
        None => return Err(Error::domain("pa1_step", "missing output")),
    };
    if !y.is_finite() || obs.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("pa1_step", "non-finite observation"));
    }
    let residual = y - state.weights.dot(&obs.x);
    let loss = (residual.abs() - state.epsilon).max(0.0);
    if loss == 0.0 {
        return Ok(state.clone());
    }
    let norm_sq = obs.x.norm_squared();
    if norm_sq == 0.0 {
        // tau is undefined; stay passive.
        return Ok(state.clone());
    }
    let tau = (loss / norm_sq).min(state.c);
    let weights = &state.weights + &obs.x * (tau * residual.signum());
    Ok(PaRegressorState {
        weights,
        c: state.c,
        epsilon: state.epsilon,
    })
}

/// The PA-I objective: `0.5 |w - w_prev|^2 + C max(|y - x'w| - eps, 0)`.
pub fn pa1_objective(
    w: &DVector<f64>,
    w_prev: &DVector<f64>,
    x: &DVector<f64>,
    y: f64,
    c: f64,
    epsilon: f64,
) -> f64 {
    let d = w - w_prev;
    0.5 * d.norm_squared() + c * ((y - w.dot(x)).abs() - epsilon).max(0.0)
}
