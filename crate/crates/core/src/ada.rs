//! Passive-aggressive hyperparameter adaptation.
//!
//! Wraps the fixed-point engine with an online update of
//! `omega = (a, b, epsilon)` driven by recursive sensitivities of the
//! weight mean and covariance. The omega update is the closed-form KKT
//! solution of a PA problem with elementwise floors: each component either
//! takes its unconstrained value or sits exactly on its floor.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::filter::{Observation, PredictiveDist, VariationalState, WeightBelief};
use crate::govi::{bypass_step, GoviConfig, StepDiagnostics};

/// Names of the adapted hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HyperKind {
    /// Gamma shape of the drift-precision prior.
    A,
    /// Gamma rate of the drift-precision prior.
    B,
    /// Insensitivity half-width.
    Epsilon,
}

pub const HYPER_KINDS: [HyperKind; 3] = [HyperKind::A, HyperKind::B, HyperKind::Epsilon];

/// `omega = (a, b, epsilon)` with elementwise floors and the PA
/// aggressiveness used to adapt it.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    pub a: f64,
    pub b: f64,
    pub epsilon: f64,
    /// Per-component floors for (a, b, epsilon).
    pub omega_min: [f64; 3],
    /// Aggressiveness of the hyperparameter update.
    pub c_omega: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            a: 1000.0,
            b: 1.0,
            epsilon: 1.25,
            omega_min: [1e-8, 1e-8, 1e-8],
            c_omega: 1e-3,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_omega > 0.0 && self.c_omega.is_finite()) {
            return Err(Error::config("hyper.c_omega", "must be positive and finite"));
        }
        for (i, &m) in self.omega_min.iter().enumerate() {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::config(
                    "hyper.omega_min",
                    format!("component {i} must be positive and finite, got {m}"),
                ));
            }
        }
        let omega = [self.a, self.b, self.epsilon];
        for (i, (&w, &m)) in omega.iter().zip(self.omega_min.iter()).enumerate() {
            if !(w.is_finite() && w >= m) {
                return Err(Error::config(
                    "hyper",
                    format!("component {i} must be finite and >= its floor, got {w} < {m}"),
                ));
            }
        }
        Ok(())
    }

    fn component(&self, kind: HyperKind) -> f64 {
        match kind {
            HyperKind::A => self.a,
            HyperKind::B => self.b,
            HyperKind::Epsilon => self.epsilon,
        }
    }

    fn component_mut(&mut self, kind: HyperKind) -> &mut f64 {
        match kind {
            HyperKind::A => &mut self.a,
            HyperKind::B => &mut self.b,
            HyperKind::Epsilon => &mut self.epsilon,
        }
    }

    fn floor(&self, kind: HyperKind) -> f64 {
        self.omega_min[kind as usize]
    }
}

/// Recursive sensitivities: one weight-mean gradient per hyperparameter and
/// the shared weight-covariance gradient.
///
/// The covariance recursion carries no omega-specific source term, so a
/// single S matrix is maintained and shared by all three psi vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientState {
    psi_a: DVector<f64>,
    psi_b: DVector<f64>,
    psi_eps: DVector<f64>,
    s_matrix: DMatrix<f64>,
}

impl GradientState {
    /// Initial conditions: `psi = 0`, `S = I`.
    pub fn new(dim: usize) -> Self {
        Self {
            psi_a: DVector::zeros(dim),
            psi_b: DVector::zeros(dim),
            psi_eps: DVector::zeros(dim),
            s_matrix: DMatrix::identity(dim, dim),
        }
    }

    /// Resume from explicit sensitivities (checkpoints, tests).
    pub fn from_parts(
        psi_a: DVector<f64>,
        psi_b: DVector<f64>,
        psi_eps: DVector<f64>,
        s_matrix: DMatrix<f64>,
    ) -> Result<Self> {
        let dim = psi_a.len();
        if psi_b.len() != dim || psi_eps.len() != dim || s_matrix.nrows() != dim || s_matrix.ncols() != dim
        {
            return Err(Error::Dimension {
                op: "GradientState",
                expected: dim,
                got: s_matrix.nrows(),
            });
        }
        Ok(Self {
            psi_a,
            psi_b,
            psi_eps,
            s_matrix,
        })
    }

    pub fn psi(&self, kind: HyperKind) -> &DVector<f64> {
        match kind {
            HyperKind::A => &self.psi_a,
            HyperKind::B => &self.psi_b,
            HyperKind::Epsilon => &self.psi_eps,
        }
    }

    pub fn s_matrix(&self) -> &DMatrix<f64> {
        &self.s_matrix
    }

    pub fn is_finite(&self) -> bool {
        HYPER_KINDS.iter().all(|&k| self.psi(k).iter().all(|v| v.is_finite()))
            && self.s_matrix.iter().all(|v| v.is_finite())
    }

    /// Applies the per-step recursion: S first, then every psi against the
    /// freshly updated S.
    pub fn update(&mut self, g: &DVector<f64>, x: &DVector<f64>, beta_t: f64, residual_t: f64) {
        self.s_matrix = update_s(self, g, x);
        for kind in HYPER_KINDS {
            let new_psi = update_psi(self.psi(kind), g, x, beta_t, &self.s_matrix, residual_t);
            match kind {
                HyperKind::A => self.psi_a = new_psi,
                HyperKind::B => self.psi_b = new_psi,
                HyperKind::Epsilon => self.psi_eps = new_psi,
            }
        }
    }
}

/// PA update of omega with elementwise floors:
/// `omega_j <- max(omega_j + C beta (x'psi_j) r, omega_min_j)`.
///
/// `residual` and `beta_prev` are the previous-step quantities.
pub fn pa_hyper_update(
    hyper: &HyperParams,
    grads: &GradientState,
    x: &DVector<f64>,
    residual: f64,
    beta_prev: f64,
) -> HyperParams {
    let mut updated = *hyper;
    for kind in HYPER_KINDS {
        let slope = x.dot(grads.psi(kind));
        let unconstrained = hyper.component(kind) + hyper.c_omega * beta_prev * slope * residual;
        *updated.component_mut(kind) = unconstrained.max(hyper.floor(kind));
    }
    updated
}

/// Covariance-sensitivity recursion `S <- (I - g x') S (I - x g')`.
pub fn update_s(grads: &GradientState, g: &DVector<f64>, x: &DVector<f64>) -> DMatrix<f64> {
    let n = g.len();
    let mut left = DMatrix::identity(n, n);
    left -= g * x.transpose();
    &left * &grads.s_matrix * left.transpose()
}

/// Mean-sensitivity recursion
/// `psi <- (I - g x') psi + beta S x (y - x'mu_prev - mu_t)`.
///
/// `s_t` must be the already-updated covariance sensitivity and
/// `residual_t` must use the current-step noise-offset mean.
pub fn update_psi(
    psi_prev: &DVector<f64>,
    g: &DVector<f64>,
    x: &DVector<f64>,
    beta_t: f64,
    s_t: &DMatrix<f64>,
    residual_t: f64,
) -> DVector<f64> {
    psi_prev - g * x.dot(psi_prev) + s_t * x * (beta_t * residual_t)
}

/// One adaptive step: predictive emission, omega update from previous-step
/// quantities, the fixed-point engine under the new omega, then the
/// gradient recursions.
#[allow(clippy::type_complexity)]
pub fn ada_bypass_step(
    belief: &WeightBelief,
    vstate: &VariationalState,
    hyper: &HyperParams,
    grads: &GradientState,
    obs: &Observation,
    cfg: &GoviConfig,
) -> Result<(
    WeightBelief,
    VariationalState,
    HyperParams,
    GradientState,
    PredictiveDist,
    StepDiagnostics,
)> {
    let y = match obs.y {
        Some(y) => y,
        None => {
            return Err(Error::domain(
                "ada_bypass_step",
                "missing output; use handle_missing",
            ))
        }
    };
    let residual_prev = y - belief.mean.dot(&obs.x) - vstate.mu_mean;
    let hyper_new = pa_hyper_update(hyper, grads, &obs.x, residual_prev, vstate.beta_mean);

    let (belief_new, vstate_new, pred, diag) = bypass_step(belief, vstate, &hyper_new, obs, cfg)?;

    // Final-iteration Kalman gain, recovered through g = beta Sigma x.
    let gain = &belief_new.cov * &obs.x * vstate_new.beta_mean;
    let residual_t = y - belief.mean.dot(&obs.x) - vstate_new.mu_mean;
    let mut grads_new = grads.clone();
    grads_new.update(&gain, &obs.x, vstate_new.beta_mean, residual_t);

    Ok((belief_new, vstate_new, hyper_new, grads_new, pred, diag))
}

/// Streaming wrapper for the adaptive filter.
#[derive(Debug, Clone)]
pub struct AdaBypassFilter {
    belief: WeightBelief,
    vstate: VariationalState,
    hyper: HyperParams,
    grads: GradientState,
    cfg: GoviConfig,
}

impl AdaBypassFilter {
    pub fn new(dim: usize, hyper: HyperParams, beta0: f64, cfg: GoviConfig) -> Result<Self> {
        hyper.validate()?;
        cfg.validate()?;
        let vstate = VariationalState::new(
            hyper.a / hyper.b,
            beta0,
            0.0,
            crate::dist::ubar_variance(hyper.epsilon)?,
        )?;
        Ok(Self {
            belief: WeightBelief::zeros(dim),
            vstate,
            hyper,
            grads: GradientState::new(dim),
            cfg,
        })
    }

    pub fn belief(&self) -> &WeightBelief {
        &self.belief
    }

    pub fn vstate(&self) -> &VariationalState {
        &self.vstate
    }

    pub fn hyper(&self) -> &HyperParams {
        &self.hyper
    }

    pub fn grads(&self) -> &GradientState {
        &self.grads
    }

    pub fn predict(&self, x: &DVector<f64>) -> Result<PredictiveDist> {
        Ok(crate::filter::predict(&self.belief, &self.vstate, x)?.0)
    }

    pub fn step(&mut self, x: &DVector<f64>, y: f64) -> Result<(PredictiveDist, StepDiagnostics)> {
        let obs = Observation::new(x.clone(), Some(y))?;
        let (belief, vstate, hyper, grads, pred, diag) = ada_bypass_step(
            &self.belief,
            &self.vstate,
            &self.hyper,
            &self.grads,
            &obs,
            &self.cfg,
        )?;
        self.belief = belief;
        self.vstate = vstate;
        self.hyper = hyper;
        self.grads = grads;
        Ok((pred, diag))
    }

    pub fn step_missing(&mut self, x: &DVector<f64>) -> Result<PredictiveDist> {
        let (belief, vstate, pred) = crate::govi::handle_missing(&self.belief, &self.vstate, x)?;
        self.belief = belief;
        self.vstate = vstate;
        Ok(pred)
    }
}
