//! Per-observation variational fixed-point engine.
//!
//! Each step emits the one-step predictive distribution from the previous
//! state, then alternates Kalman moment updates with the variational
//! refresh of (alpha, beta, mu, V_mu) until the 4-tuple stops moving, and
//! finally commits the last iterate. Non-convergence is not an error; the
//! step commits what it has and flags it in the diagnostics.

use nalgebra::{DMatrix, DVector};

use crate::ada::HyperParams;
use crate::dist::{trunc_gauss_moments, ubar_variance, TruncGaussSpec};
use crate::error::{Error, Result};
use crate::filter::{
    kalman_gain, measurement_update, predict, symmetrize, Observation, PredictiveDist,
    VariationalState, WeightBelief,
};
use crate::special::{gig_beta_mean, NumericGuards};

/// Knobs of the fixed-point loop.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GoviConfig {
    /// Iteration cap; 0 freezes the variational parameters entirely and the
    /// step degenerates to a pure Kalman update.
    pub max_fixed_point_iters: usize,
    /// Convergence threshold on the max relative change of the 4-tuple.
    pub rel_tol: f64,
    /// Floor for the denominator of the alpha update.
    pub alpha_denominator_floor: f64,
    /// Floor applied to rho before the Bessel-ratio evaluation.
    pub rho_floor: f64,
    /// Truncated-mass floor below which the mu update degenerates.
    pub log_mass_floor: f64,
}

impl Default for GoviConfig {
    fn default() -> Self {
        Self {
            max_fixed_point_iters: 50,
            rel_tol: 1e-8,
            alpha_denominator_floor: 1e-12,
            rho_floor: 1e-12,
            log_mass_floor: -1e6,
        }
    }
}

impl GoviConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::config("govi.rel_tol", "must be positive and finite"));
        }
        if !(self.alpha_denominator_floor > 0.0) {
            return Err(Error::config("govi.alpha_denominator_floor", "must be positive"));
        }
        if !(self.rho_floor > 0.0) {
            return Err(Error::config("govi.rho_floor", "must be positive"));
        }
        if !self.log_mass_floor.is_finite() {
            return Err(Error::config("govi.log_mass_floor", "must be finite"));
        }
        Ok(())
    }

    pub fn guards(&self) -> NumericGuards {
        NumericGuards {
            rho_floor: self.rho_floor,
            log_mass_floor: self.log_mass_floor,
        }
    }
}

/// What happened inside one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub rho: f64,
    pub residual: f64,
}

/// Drift-precision mean update
/// `2a / (2b + |dmu|^2 + tr(Sigma_t - Sigma_{t-1}))`, denominator floored.
pub fn update_alpha(
    a: f64,
    b: f64,
    belief_t: &WeightBelief,
    belief_prev: &WeightBelief,
    floor: f64,
) -> f64 {
    let dmu = &belief_t.mean - &belief_prev.mean;
    let trace_diff = belief_t.cov.trace() - belief_prev.cov.trace();
    let denom = (2.0 * b + dmu.norm_squared() + trace_diff).max(floor);
    2.0 * a / denom
}

/// `rho = residual^2 + x'Sigma x + V_mu`, floored away from zero.
pub fn compute_rho(
    y: f64,
    x: &DVector<f64>,
    belief: &WeightBelief,
    mu_mean: f64,
    mu_var: f64,
    rho_floor: f64,
) -> f64 {
    let residual = y - belief.mean.dot(x) - mu_mean;
    let quad = (x.transpose() * &belief.cov * x)[(0, 0)];
    (residual * residual + quad.max(0.0) + mu_var).max(rho_floor)
}

/// Output-precision mean update: the GIG mean as a Bessel ratio.
pub fn update_beta(rho: f64, guards: &NumericGuards) -> Result<f64> {
    gig_beta_mean(rho, guards)
}

/// Noise-offset update: moments of the residual-centred Gaussian truncated
/// to `[-epsilon, epsilon]` at the previous iterate's precision.
///
/// A zero width is a point mass: returns (0, 0) exactly.
pub fn update_mu(
    y: f64,
    x: &DVector<f64>,
    belief: &WeightBelief,
    beta_old: f64,
    epsilon: f64,
    guards: &NumericGuards,
) -> Result<(f64, f64)> {
    if epsilon == 0.0 {
        return Ok((0.0, 0.0));
    }
    let location = y - belief.mean.dot(x);
    let spec = TruncGaussSpec::new(location, beta_old, -epsilon, epsilon)?;
    trunc_gauss_moments(&spec, guards)
}

fn inflated_cov(cov: &DMatrix<f64>, alpha_mean: f64) -> DMatrix<f64> {
    let mut p = cov.clone();
    let drift = 1.0 / alpha_mean;
    for i in 0..p.nrows() {
        p[(i, i)] += drift;
    }
    p
}

fn rel_change(new: f64, old: f64) -> f64 {
    (new - old).abs() / (old.abs() + 1e-12)
}

/// One full observation step: predictive emission, interleaved fixed-point
/// loop, commit.
///
/// The predictive distribution always uses the incoming (previous-step)
/// variational means. With `max_fixed_point_iters = 0` the variational
/// state is frozen and the step is exactly one Kalman update.
pub fn bypass_step(
    belief: &WeightBelief,
    vstate: &VariationalState,
    hyper: &HyperParams,
    obs: &Observation,
    cfg: &GoviConfig,
) -> Result<(WeightBelief, VariationalState, PredictiveDist, StepDiagnostics)> {
    let y = match obs.y {
        Some(y) => y,
        None => {
            return Err(Error::domain(
                "bypass_step",
                "missing output; use handle_missing",
            ))
        }
    };
    if !y.is_finite() || obs.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("bypass_step", "non-finite observation"));
    }
    let guards = cfg.guards();
    let (pred, p0) = predict(belief, vstate, &obs.x)?;

    if cfg.max_fixed_point_iters == 0 {
        // Frozen-variational mode: plain Kalman step at the current means.
        let g = kalman_gain(&p0, &obs.x, vstate.beta_mean)?;
        let committed = measurement_update(belief, &p0, &g, &obs.x, y, vstate.mu_mean);
        let rho = compute_rho(y, &obs.x, &committed, vstate.mu_mean, vstate.mu_var, cfg.rho_floor);
        let residual = y - committed.mean.dot(&obs.x) - vstate.mu_mean;
        let diag = StepDiagnostics {
            iterations: 0,
            converged: true,
            rho,
            residual,
        };
        return Ok((committed, *vstate, pred, diag));
    }

    let mut alpha = vstate.alpha_mean;
    let mut beta = vstate.beta_mean;
    let mut mu = vstate.mu_mean;
    let mut mu_var = vstate.mu_var;
    let mut candidate = belief.clone();
    let mut rho = cfg.rho_floor;
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..cfg.max_fixed_point_iters {
        iterations += 1;
        let p = inflated_cov(&belief.cov, alpha);
        let g = kalman_gain(&p, &obs.x, beta)?;
        candidate = measurement_update(belief, &p, &g, &obs.x, y, mu);

        let (mu_new, mu_var_new) = update_mu(y, &obs.x, &candidate, beta, hyper.epsilon, &guards)?;
        rho = compute_rho(y, &obs.x, &candidate, mu_new, mu_var_new, cfg.rho_floor);
        let beta_new = update_beta(rho, &guards)?;
        let alpha_new = update_alpha(hyper.a, hyper.b, &candidate, belief, cfg.alpha_denominator_floor);

        let delta = rel_change(alpha_new, alpha)
            .max(rel_change(beta_new, beta))
            .max(rel_change(mu_new, mu))
            .max(rel_change(mu_var_new, mu_var));

        alpha = alpha_new;
        beta = beta_new;
        mu = mu_new;
        mu_var = mu_var_new;

        if delta <= cfg.rel_tol {
            converged = true;
            break;
        }
    }

    // The truncated variance was formed at the previous iterate's beta;
    // cap it so the committed state satisfies mu_var <= 1/beta exactly.
    let committed_vstate = VariationalState::new(alpha, beta, mu, mu_var.min(1.0 / beta))?;
    let residual = y - candidate.mean.dot(&obs.x) - mu;
    let diag = StepDiagnostics {
        iterations,
        converged,
        rho,
        residual,
    };
    Ok((candidate, committed_vstate, pred, diag))
}

/// Missing-output step: emit the prediction, skip the measurement update.
/// The belief mean is carried forward and the covariance inflates by the
/// drift term; the variational state is untouched.
pub fn handle_missing(
    belief: &WeightBelief,
    vstate: &VariationalState,
    x: &DVector<f64>,
) -> Result<(WeightBelief, VariationalState, PredictiveDist)> {
    let (pred, mut p) = predict(belief, vstate, x)?;
    symmetrize(&mut p);
    let advanced = WeightBelief {
        mean: belief.mean.clone(),
        cov: p,
    };
    Ok((advanced, *vstate, pred))
}

/// Streaming wrapper holding the belief, variational state, and fixed
/// hyperparameters of the non-adaptive filter.
#[derive(Debug, Clone)]
pub struct BypassFilter {
    belief: WeightBelief,
    vstate: VariationalState,
    hyper: HyperParams,
    cfg: GoviConfig,
}

impl BypassFilter {
    /// Initial state: zero weight belief, prior-mean variational state
    /// (`alpha = a/b`, `mu = 0`, `V_mu = Var[Ubar]`), caller-chosen `beta0`.
    pub fn new(dim: usize, hyper: HyperParams, beta0: f64, cfg: GoviConfig) -> Result<Self> {
        cfg.validate()?;
        let vstate = VariationalState::new(
            hyper.a / hyper.b,
            beta0,
            0.0,
            ubar_variance(hyper.epsilon)?,
        )?;
        Ok(Self {
            belief: WeightBelief::zeros(dim),
            vstate,
            hyper,
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

    pub fn predict(&self, x: &DVector<f64>) -> Result<PredictiveDist> {
        Ok(predict(&self.belief, &self.vstate, x)?.0)
    }

    pub fn step(&mut self, x: &DVector<f64>, y: f64) -> Result<(PredictiveDist, StepDiagnostics)> {
        let obs = Observation::new(x.clone(), Some(y))?;
        let (belief, vstate, pred, diag) =
            bypass_step(&self.belief, &self.vstate, &self.hyper, &obs, &self.cfg)?;
        self.belief = belief;
        self.vstate = vstate;
        Ok((pred, diag))
    }

    pub fn step_missing(&mut self, x: &DVector<f64>) -> Result<PredictiveDist> {
        let (belief, vstate, pred) = handle_missing(&self.belief, &self.vstate, x)?;
        self.belief = belief;
        self.vstate = vstate;
        Ok(pred)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn default_hyper() -> HyperParams {
        HyperParams::default()
    }

    fn obs(x: Vec<f64>, y: f64) -> Observation {
        Observation::new(DVector::from_vec(x), Some(y)).unwrap()
    }

    #[test]
    fn update_alpha_examples() {
        let b0 = WeightBelief::zeros(2);
        assert_relative_eq!(update_alpha(1000.0, 1.0, &b0, &b0, 1e-12), 1000.0, epsilon = 1e-12);

        let mut bt = WeightBelief::zeros(2);
        bt.mean = DVector::from_vec(vec![1.0, 1.0]);
        assert_relative_eq!(update_alpha(1000.0, 1.0, &bt, &b0, 1e-12), 500.0, epsilon = 1e-12);

        // Negative denominator clamps to the floor.
        let mut shrunk = WeightBelief::zeros(1);
        shrunk.cov[(0, 0)] = -10.0; // forced trace difference of -10
        let prior = WeightBelief::zeros(1);
        let v = update_alpha(1.0, 1.0, &shrunk, &prior, 1e-12);
        assert_relative_eq!(v, 2.0 / 1e-12, max_relative = 1e-12);
    }

    #[test]
    fn compute_rho_examples() {
        let belief = WeightBelief::zeros(1);
        let x = DVector::from_vec(vec![1.0]);
        assert_eq!(compute_rho(0.0, &x, &belief, 0.0, 0.0, 1e-12), 1e-12);
        assert_relative_eq!(compute_rho(1.0, &x, &belief, 0.0, 0.0, 1e-12), 1.0, epsilon = 1e-15);

        let mut b = WeightBelief::zeros(1);
        b.cov[(0, 0)] = 0.5;
        assert_relative_eq!(compute_rho(1.0, &x, &b, 0.0, 0.25, 1e-12), 1.75, epsilon = 1e-15);
    }

    #[test]
    fn update_beta_examples() {
        let g = NumericGuards::default();
        assert_relative_eq!(update_beta(1.0, &g).unwrap(), 0.699_483_935_593_772_3, max_relative = 1e-11);
        assert_relative_eq!(update_beta(100.0, &g).unwrap(), 0.095_341_725_074_794_52, max_relative = 1e-11);
        assert!(update_beta(1.0, &g).unwrap() > update_beta(2.0, &g).unwrap());
    }

    #[test]
    fn update_mu_examples() {
        let g = NumericGuards::default();
        let belief = WeightBelief::zeros(1);
        let x = DVector::from_vec(vec![1.0]);
        let (m, v) = update_mu(0.0, &x, &belief, 1.0, 1.0, &g).unwrap();
        assert!(m.abs() < 1e-15);
        assert!(v > 0.0 && v < 1.0);

        let (m, _) = update_mu(10.0, &x, &belief, 1.0, 1.0, &g).unwrap();
        assert_relative_eq!(m, 0.891_476_898_351, max_relative = 1e-8);

        assert_eq!(update_mu(10.0, &x, &belief, 1.0, 0.0, &g).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn passive_fixed_point_on_zero_residual() {
        let hyper = default_hyper();
        let belief = WeightBelief::zeros(2);
        let vstate = VariationalState::new(1000.0, 500.0, 0.0, 0.9838).unwrap();
        let cfg = GoviConfig::default();
        let (b, v, _, _) =
            bypass_step(&belief, &vstate, &hyper, &obs(vec![1.0, 2.0], 0.0), &cfg).unwrap();
        assert!(b.mean.iter().all(|&m| m.abs() < 1e-14));
        assert!(v.mu_mean.abs() < 1e-14);
    }

    #[test]
    fn frozen_mode_is_kalman_step() {
        let hyper = default_hyper();
        let mut belief = WeightBelief::zeros(1);
        belief.mean[0] = 0.0;
        let vstate = VariationalState::new(1e12, 1.0, 0.0, 0.0).unwrap();
        let cfg = GoviConfig {
            max_fixed_point_iters: 0,
            ..GoviConfig::default()
        };
        // Sigma = 0, alpha huge: P ~ 0 so the update barely moves; with
        // alpha = 1 the classic scalar update applies.
        let vstate2 = VariationalState::new(1.0, 1.0, 0.0, 0.0).unwrap();
        let (b, v, pred, diag) =
            bypass_step(&belief, &vstate2, &hyper, &obs(vec![1.0], 2.0), &cfg).unwrap();
        assert_relative_eq!(pred.variance, 1.0 + 1.0, epsilon = 1e-12);
        assert_relative_eq!(b.mean[0], 2.0 * (1.0 / 2.0), epsilon = 1e-12);
        assert_relative_eq!(b.cov[(0, 0)], 0.5, epsilon = 1e-12);
        assert_eq!(v, vstate2);
        assert_eq!(diag.iterations, 0);
        assert!(diag.converged);
        let _ = vstate;
    }

    #[test]
    fn missing_output_inflates_covariance_only() {
        let hyper = default_hyper();
        let mut filter = BypassFilter::new(2, hyper, 500.0, GoviConfig::default()).unwrap();
        let x = DVector::from_vec(vec![1.0, 0.5]);
        filter.step(&x, 1.0).unwrap();
        let mean_before = filter.belief().mean.clone();
        let trace_before = filter.belief().cov.trace();
        let alpha_inv = 1.0 / filter.vstate().alpha_mean;

        filter.step_missing(&x).unwrap();
        assert_eq!(filter.belief().mean, mean_before);
        assert_relative_eq!(filter.belief().cov.trace(), trace_before + 2.0 * alpha_inv, max_relative = 1e-12);

        // A second missing step adds the same inflation again.
        let trace_mid = filter.belief().cov.trace();
        filter.step_missing(&x).unwrap();
        assert_relative_eq!(filter.belief().cov.trace(), trace_mid + 2.0 * alpha_inv, max_relative = 1e-12);
    }

    #[test]
    fn rejects_non_finite_observation() {
        let hyper = default_hyper();
        let belief = WeightBelief::zeros(1);
        let vstate = VariationalState::new(1000.0, 500.0, 0.0, 0.9838).unwrap();
        let cfg = GoviConfig::default();
        let bad = Observation {
            x: DVector::from_vec(vec![1.0]),
            y: Some(f64::INFINITY),
        };
        assert!(bypass_step(&belief, &vstate, &hyper, &bad, &cfg).is_err());
        let missing = Observation {
            x: DVector::from_vec(vec![1.0]),
            y: None,
        };
        assert!(bypass_step(&belief, &vstate, &hyper, &missing, &cfg).is_err());
    }

    #[test]
    fn converged_step_is_a_fixed_point() {
        let hyper = default_hyper();
        let cfg = GoviConfig::default();
        let guards = cfg.guards();
        let mut filter = BypassFilter::new(2, hyper, 500.0, cfg).unwrap();
        // Drive with a deterministic wobbly stream, then inspect one step.
        let mut prev = 0.3_f64;
        for t in 0..200 {
            let x = DVector::from_vec(vec![1.0, prev]);
            let y = 0.4 + 0.8 * prev + 0.05 * ((t as f64) * 0.7).sin();
            filter.step(&x, y).unwrap();
            prev = y;
        }
        let x = DVector::from_vec(vec![1.0, prev]);
        let y = 0.4 + 0.8 * prev;
        let belief_prev = filter.belief().clone();
        let (_, diag) = filter.step(&x, y).unwrap();
        assert!(diag.converged);

        let committed = filter.vstate();
        let belief_t = filter.belief();
        // Re-applying each update once moves nothing by more than 10x tol.
        let alpha2 = update_alpha(hyper.a, hyper.b, belief_t, &belief_prev, 1e-12);
        assert!(rel_change(alpha2, committed.alpha_mean) <= 1e-7);
        let (mu2, vmu2) = update_mu(y, &x, belief_t, committed.beta_mean, hyper.epsilon, &guards).unwrap();
        assert!(rel_change(mu2, committed.mu_mean) <= 1e-7);
        assert!(rel_change(vmu2, committed.mu_var) <= 1e-7);
        let rho2 = compute_rho(y, &x, belief_t, mu2, vmu2, 1e-12);
        let beta2 = update_beta(rho2, &guards).unwrap();
        assert!(rel_change(beta2, committed.beta_mean) <= 1e-7);
    }

    #[test]
    fn variational_invariants_hold_along_stream() {
        let hyper = default_hyper();
        let cfg = GoviConfig::default();
        let mut filter = BypassFilter::new(2, hyper, 500.0, cfg).unwrap();
        let mut prev = 1.0_f64;
        for t in 0..500 {
            let x = DVector::from_vec(vec![1.0, prev]);
            let y = if t < 250 { 0.2 + 0.9 * prev } else { 2.0 - 0.5 * prev } + 0.1 * ((t * 37 % 17) as f64 - 8.0) / 8.0;
            filter.step(&x, y).unwrap();
            let v = filter.vstate();
            assert!(v.mu_mean.abs() <= hyper.epsilon + 1e-12);
            assert!(v.mu_var <= 1.0 / v.beta_mean + 1e-15);
            assert!(v.alpha_mean > 0.0 && v.alpha_mean <= 2.0 * hyper.a / cfg.alpha_denominator_floor);
            prev = y;
        }
    }

    #[test]
    fn deterministic_across_runs() {
        let run = || {
            let hyper = default_hyper();
            let mut filter = BypassFilter::new(2, hyper, 500.0, GoviConfig::default()).unwrap();
            let mut prev = 0.0_f64;
            let mut out = Vec::new();
            for t in 0..100 {
                let x = DVector::from_vec(vec![1.0, prev]);
                let y = 0.3 * prev + ((t * 31 % 13) as f64) * 0.1;
                let (pred, _) = filter.step(&x, y).unwrap();
                out.push((pred.mean, pred.variance));
                prev = y;
            }
            out
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
    }
}
