//! Densities and moments of the probabilistic model.
//!
//! The epsilon-insensitive noise density and its two equivalent
//! decompositions (uniform + truncated-Laplace mixture, continuous mixture
//! of Gaussians), the GIG density of the output-precision posterior,
//! truncated-Gaussian moments, and the priors over the noise parameters.

use crate::error::{Error, Result};
use crate::quad;
use crate::special::{
    self, log_cdf_gap, std_normal_cdf, std_normal_log_pdf, NumericGuards,
};

/// Measurement-noise model: flat inside `[-epsilon, epsilon]`, Laplace tails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsNoiseModel {
    epsilon: f64,
}

impl EpsNoiseModel {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::domain(
                "EpsNoiseModel",
                format!("epsilon must be nonnegative and finite, got {epsilon}"),
            ));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// Direct noise density `exp(-max(|eta| - eps, 0)) / (2 (1 + eps))`.
pub fn eps_noise_density(eta: f64, model: &EpsNoiseModel) -> Result<f64> {
    if eta.is_nan() {
        return Err(Error::domain("eps_noise_density", "NaN input"));
    }
    let eps = model.epsilon;
    let excess = (eta.abs() - eps).max(0.0);
    Ok((-excess).exp() / (2.0 * (1.0 + eps)))
}

/// The same density written as `pi U(eta|-eps,eps) + (1-pi) L_trunc(eta)`
/// with mixing weight `pi = eps / (1 + eps)`.
///
/// Requires `eps > 0`: at zero the uniform component is degenerate and the
/// direct form must be used.
pub fn eps_noise_mixture_density(eta: f64, model: &EpsNoiseModel) -> Result<f64> {
    if eta.is_nan() {
        return Err(Error::domain("eps_noise_mixture_density", "NaN input"));
    }
    let eps = model.epsilon;
    if eps <= 0.0 {
        return Err(Error::domain(
            "eps_noise_mixture_density",
            "mixture weight degenerates at epsilon = 0; use eps_noise_density",
        ));
    }
    let pi = eps / (1.0 + eps);
    if eta.abs() <= eps {
        Ok(pi / (2.0 * eps))
    } else {
        // Laplace(0,1) truncated to |eta| > eps, renormalised by e^{-eps}.
        Ok((1.0 - pi) * 0.5 * (eps - eta.abs()).exp())
    }
}

/// Evaluates the continuous-mixture-of-Gaussians form of the noise density
/// by quadrature over the precision, with the location coordinate's uniform
/// slab and the two boundary atoms handled analytically.
///
/// The precision integral is compactified with `beta = t / (1 - t)` before
/// adaptive refinement seeded with `quad_points` panels.
pub fn cmog_density(eta: f64, model: &EpsNoiseModel, quad_points: usize) -> Result<f64> {
    if !eta.is_finite() {
        return Err(Error::domain("cmog_density", "eta must be finite"));
    }
    if quad_points < 64 {
        return Err(Error::domain(
            "cmog_density",
            format!("quad_points must be >= 64, got {quad_points}"),
        ));
    }
    let eps = model.epsilon;
    let weight = 1.0 / (2.0 * (1.0 + eps));

    // Conditional density given beta, with mu already integrated out.
    let given_beta = |beta: f64| -> f64 {
        let sb = beta.sqrt();
        let slab = if eps > 0.0 {
            std_normal_cdf(sb * (eta + eps)).unwrap_or(1.0)
                - std_normal_cdf(sb * (eta - eps)).unwrap_or(0.0)
        } else {
            0.0
        };
        let atoms = sb
            * ((std_normal_log_pdf(sb * (eta + eps))).exp()
                + (std_normal_log_pdf(sb * (eta - eps))).exp());
        weight * (slab + atoms)
    };

    // Inverse-gamma(1, 1/2) prior times the Jacobian of beta = t/(1-t):
    // 0.5 * exp(-(1-t)/(2t)) / t^2.
    let integrand = |t: f64| -> f64 {
        let beta = t / (1.0 - t);
        0.5 * (-(1.0 - t) / (2.0 * t)).exp() / (t * t) * given_beta(beta)
    };

    // The window endpoints trim the integrable boundary spike that appears
    // when eta sits exactly on an atom; the trimmed tail mass is < 2e-5.
    let (lo, hi) = (1e-7, 1.0 - 1e-7);
    let n = quad_points;
    let mut total = 0.0;
    for i in 0..n {
        let a = lo + (hi - lo) * i as f64 / n as f64;
        let b = lo + (hi - lo) * (i + 1) as f64 / n as f64;
        total += quad::adaptive_simpson(integrand, a, b, 1e-9 / n as f64, 1e-9, 24)?;
    }
    Ok(total)
}

/// Generalised inverse Gaussian parameters; only integer orders with
/// |nu| <= 1 are supported (the posterior uses nu = -1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GigParams {
    pub nu: f64,
    pub chi: f64,
    pub rho: f64,
}

impl GigParams {
    pub fn new(nu: f64, chi: f64, rho: f64) -> Result<Self> {
        if !(chi.is_finite() && chi > 0.0 && rho.is_finite() && rho > 0.0) {
            return Err(Error::domain(
                "GigParams",
                format!("chi and rho must be positive and finite, got chi={chi}, rho={rho}"),
            ));
        }
        if nu != -1.0 && nu != 0.0 && nu != 1.0 {
            return Err(Error::domain(
                "GigParams",
                format!("only nu in {{-1, 0, 1}} is supported, got {nu}"),
            ));
        }
        Ok(Self { nu, chi, rho })
    }
}

/// Normalised GIG density; uses `K_{-1} = K_1`.
pub fn gig_pdf(r: f64, params: &GigParams) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::domain(
            "gig_pdf",
            format!("requires finite r > 0, got {r}"),
        ));
    }
    let z = (params.chi * params.rho).sqrt();
    let k_scaled = if params.nu == 0.0 {
        special::bessel_k0_scaled(z)?
    } else {
        special::bessel_k1_scaled(z)?
    };
    // log K_nu(z) = log(scaled) - z, keeping the normaliser finite for large z.
    let log_norm = 0.5 * params.nu * (params.rho / params.chi).ln()
        - std::f64::consts::LN_2
        - (k_scaled.ln() - z);
    let log_kernel = (params.nu - 1.0) * r.ln() - 0.5 * (params.chi / r + params.rho * r);
    Ok((log_norm + log_kernel).exp())
}

/// Truncated-Gaussian specification in natural parameters: an untruncated
/// location/precision pair plus the truncation bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncGaussSpec {
    pub location: f64,
    pub precision: f64,
    pub lower: f64,
    pub upper: f64,
}

impl TruncGaussSpec {
    pub fn new(location: f64, precision: f64, lower: f64, upper: f64) -> Result<Self> {
        if !location.is_finite() {
            return Err(Error::domain("TruncGaussSpec", "location must be finite"));
        }
        if !(precision.is_finite() && precision > 0.0) {
            return Err(Error::domain(
                "TruncGaussSpec",
                format!("precision must be positive and finite, got {precision}"),
            ));
        }
        if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
            return Err(Error::domain(
                "TruncGaussSpec",
                format!("requires finite lower < upper, got [{lower}, {upper}]"),
            ));
        }
        Ok(Self {
            location,
            precision,
            lower,
            upper,
        })
    }
}

/// Mean and variance of the truncated Gaussian.
///
/// All tail ratios are formed in the log domain, so moments stay accurate
/// for truncation regions dozens of standard deviations from the location.
/// When the log truncated mass falls below `guards.log_mass_floor` the
/// result degenerates to the nearest bound with variance
/// `1e-12 / precision`.
pub fn trunc_gauss_moments(spec: &TruncGaussSpec, guards: &NumericGuards) -> Result<(f64, f64)> {
    let s = spec.precision.sqrt();
    let l = s * (spec.lower - spec.location);
    let u = s * (spec.upper - spec.location);
    let lg = log_cdf_gap(l, u)?;
    if lg < guards.log_mass_floor {
        let nearest = spec.location.clamp(spec.lower, spec.upper);
        return Ok((nearest, 1e-12 / spec.precision));
    }
    let lpl = std_normal_log_pdf(l);
    let lpu = std_normal_log_pdf(u);
    // r1 = (phi(l) - phi(u)) / Z, factoring out the larger density.
    let delta = lpl - lpu;
    let r1 = if delta <= 0.0 {
        delta.exp_m1() * (lpu - lg).exp()
    } else {
        -(-delta).exp_m1() * (lpl - lg).exp()
    };
    // r2 = (l phi(l) - u phi(u)) / Z.
    let r2 = l * (lpl - lg).exp() - u * (lpu - lg).exp();

    let mean = (spec.location + r1 / s).clamp(spec.lower, spec.upper);
    let bracket = (1.0 + r2 - r1 * r1).clamp(f64::MIN_POSITIVE, 1.0);
    Ok((mean, bracket / spec.precision))
}

/// Gamma prior over the weight-drift precision together with the
/// insensitivity width; the full parameter prior of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaPrior {
    pub a: f64,
    pub b: f64,
    pub epsilon: f64,
}

impl ThetaPrior {
    pub fn new(a: f64, b: f64, epsilon: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0 && b.is_finite() && b > 0.0) {
            return Err(Error::domain(
                "ThetaPrior",
                format!("Gamma shape/rate must be positive and finite, got a={a}, b={b}"),
            ));
        }
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::domain(
                "ThetaPrior",
                format!("epsilon must be nonnegative, got {epsilon}"),
            ));
        }
        Ok(Self { a, b, epsilon })
    }

    /// Prior mean of the drift precision.
    pub fn alpha_mean(&self) -> f64 {
        self.a / self.b
    }
}

/// Variance of the boundary-atom-augmented uniform over
/// `[-epsilon, epsilon]`: `eps^2 (1 + eps/3) / (1 + eps)`.
pub fn ubar_variance(epsilon: f64) -> Result<f64> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::domain(
            "ubar_variance",
            format!("epsilon must be nonnegative and finite, got {epsilon}"),
        ));
    }
    Ok(epsilon * epsilon * (1.0 + epsilon / 3.0) / (1.0 + epsilon))
}

/// Symmetric Beta distribution of the second kind; the induced prior over
/// the insensitivity width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaSecondKind {
    s: f64,
}

impl BetaSecondKind {
    pub fn new(s: f64) -> Result<Self> {
        if !(s.is_finite() && s > 1.0) {
            return Err(Error::domain(
                "BetaSecondKind",
                format!("mean undefined unless s > 1, got {s}"),
            ));
        }
        Ok(Self { s })
    }

    pub fn shape(&self) -> f64 {
        self.s
    }
}

/// Mean `s / (s - 1)` of the Beta-II prior.
pub fn beta2_mean(prior: &BetaSecondKind) -> f64 {
    prior.s / (prior.s - 1.0)
}
