//! Scalar special functions backing the variational updates.
//!
//! Everything here is pure and thread-safe: modified Bessel functions of the
//! second kind (orders 0 and 1, plain and exponentially scaled), the
//! standard-normal PDF/CDF, a log-stable CDF difference, and the mean of the
//! output-precision posterior expressed as a Bessel ratio.
//!
//! The Bessel functions use the classical small-argument series below
//! `x = 2` and Chebyshev fits of the exponentially scaled functions above.
//! The normal CDF uses an erf series / erfc continued fraction split so the
//! tails keep full relative accuracy down to the underflow limit.

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const TWO_OVER_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;
const INV_SQRT_PI: f64 = 0.5 * std::f64::consts::FRAC_2_SQRT_PI;
const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Floors protecting the numerically delicate denominators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericGuards {
    /// Floor applied to the GIG parameter before Bessel evaluation.
    pub rho_floor: f64,
    /// Minimum admissible `log(Phi(u) - Phi(l))` before the degenerate
    /// truncation fallback triggers.
    pub log_mass_floor: f64,
}

impl NumericGuards {
    pub fn new(rho_floor: f64, log_mass_floor: f64) -> Result<Self> {
        if !(rho_floor.is_finite() && rho_floor > 0.0) {
            return Err(Error::domain("NumericGuards", "rho_floor must be positive and finite"));
        }
        if !log_mass_floor.is_finite() {
            return Err(Error::domain("NumericGuards", "log_mass_floor must be finite"));
        }
        Ok(Self {
            rho_floor,
            log_mass_floor,
        })
    }
}

impl Default for NumericGuards {
    fn default() -> Self {
        Self {
            rho_floor: 1e-12,
            log_mass_floor: -1e6,
        }
    }
}

// ---------------------------------------------------------------------------
// Standard normal
// ---------------------------------------------------------------------------

/// Standard normal density.
pub fn std_normal_pdf(z: f64) -> Result<f64> {
    if z.is_nan() {
        return Err(Error::domain("std_normal_pdf", "NaN input"));
    }
    Ok(INV_SQRT_2PI * (-0.5 * z * z).exp())
}

/// Log of the standard normal density; never under/overflows for finite z.
#[inline]
pub fn std_normal_log_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

/// Standard normal CDF.
///
/// `Phi(z) + Phi(-z) = 1` holds exactly by construction, and the lower tail
/// keeps full relative accuracy down to the underflow limit. Values beyond
/// the representable range saturate to 0 or 1.
pub fn std_normal_cdf(z: f64) -> Result<f64> {
    if z.is_nan() {
        return Err(Error::domain("std_normal_cdf", "NaN input"));
    }
    Ok(0.5 * erfc(-z / SQRT_2))
}

/// erf on the whole real line.
fn erf(x: f64) -> f64 {
    let ax = x.abs();
    if ax < ERF_SERIES_CUTOFF {
        erf_series(x)
    } else {
        (1.0 - erfc_tail(ax)).copysign(x)
    }
}

/// erfc on the whole real line.
fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        2.0 - erfc(-x)
    } else if x < ERF_SERIES_CUTOFF {
        1.0 - erf_series(x)
    } else {
        erfc_tail(x)
    }
}

const ERF_SERIES_CUTOFF: f64 = 2.0;

/// erf via the confluent hypergeometric series; all terms positive, so no
/// cancellation for |x| < 2.
fn erf_series(x: f64) -> f64 {
    let y = x * x;
    let two_y = 2.0 * y;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut denom = 1.0;
    for _ in 0..200 {
        denom += 2.0;
        term *= two_y / denom;
        sum += term;
        if term < f64::EPSILON * sum {
            break;
        }
    }
    TWO_OVER_SQRT_PI * x * (-y).exp() * sum
}

/// erfc for x >= 2 via the Laplace continued fraction (modified Lentz).
fn erfc_tail(x: f64) -> f64 {
    (-x * x).exp() * INV_SQRT_PI / erfc_cf_denom(x)
}

/// The continued-fraction denominator G with erfc(x) = e^{-x^2}/(sqrt(pi) G),
/// G = x + (1/2)/(x + 1/(x + (3/2)/(x + 2/(x + ...)))).
fn erfc_cf_denom(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0_f64;
    for j in 1..500 {
        let a = 0.5 * j as f64;
        d = x + a * d;
        if d == 0.0 {
            d = TINY;
        }
        c = x + a / c;
        if c == 0.0 {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-17 {
            break;
        }
    }
    f
}

/// log of the upper-tail probability `log(1 - Phi(z))`, accurate for all
/// finite z (asymptotic expansion past the erfc underflow point).
pub fn log_std_normal_cdf_upper(z: f64) -> f64 {
    if z <= 0.0 {
        // 1 - Phi(z) = 1 - Phi(z), with Phi(z) <= 1/2: no cancellation.
        let lower = 0.5 * erfc(-z / SQRT_2);
        (-lower).ln_1p()
    } else if z < 30.0 {
        (0.5 * erfc(z / SQRT_2)).ln()
    } else {
        // Phi^c(z) = phi(z)/z * (1 - 1/z^2 + 3/z^4 - 15/z^6 + ...)
        let w = 1.0 / (z * z);
        let series = 1.0
            + w * (-1.0
                + w * (3.0
                    + w * (-15.0
                        + w * (105.0 + w * (-945.0 + w * (10395.0 + w * -135135.0))))));
        std_normal_log_pdf(z) - z.ln() + series.ln()
    }
}

/// `log(Phi(u) - Phi(l))` without catastrophic cancellation.
///
/// Works on the side of the axis where both bounds live, so intervals deep
/// in either tail keep relative accuracy. Returns `-inf` only when the gap
/// is zero at working precision.
pub fn log_cdf_gap(l: f64, u: f64) -> Result<f64> {
    if l.is_nan() || u.is_nan() {
        return Err(Error::domain("log_cdf_gap", "NaN bound"));
    }
    if !(l < u) || !l.is_finite() || !u.is_finite() {
        return Err(Error::domain(
            "log_cdf_gap",
            format!("requires finite l < u, got l={l}, u={u}"),
        ));
    }
    if l >= 0.0 {
        Ok(log_upper_tail_gap(l, u))
    } else if u <= 0.0 {
        Ok(log_upper_tail_gap(-u, -l))
    } else {
        // Straddles the origin: erf terms have opposite signs, so the
        // difference is a sum of magnitudes.
        let gap = 0.5 * (erf(u / SQRT_2) + erf(-l / SQRT_2));
        Ok(gap.min(1.0).ln())
    }
}

/// log(Phi^c(a) - Phi^c(b)) for 0 <= a < b.
fn log_upper_tail_gap(a: f64, b: f64) -> f64 {
    let la = log_std_normal_cdf_upper(a);
    let lb = log_std_normal_cdf_upper(b);
    let ratio = (lb - la).exp_m1(); // in (-1, 0]
    if ratio == 0.0 {
        return f64::NEG_INFINITY;
    }
    la + (-ratio).ln()
}

// ---------------------------------------------------------------------------
// Modified Bessel functions of the second kind, orders 0 and 1
// ---------------------------------------------------------------------------

// Chebyshev coefficients (highest order first, Cephes chbevl convention) for
// f_nu(x) = K_nu(x) e^x sqrt(x) on x in [2, inf), variable z = 8/x - 2.
#[allow(clippy::excessive_precision)]
const K0E_CHEB: [f64; 30] = [
    -2.29321971511806202e-20,
    6.62461053372062532e-20,
    -1.93909560528384158e-19,
    5.75510920286804165e-19,
    -1.7331712005814716e-18,
    5.30043377117706547e-18,
    -1.6475805939842516e-17,
    5.21039177764354903e-17,
    -1.67823112575490042e-16,
    5.51205599940433327e-16,
    -1.84859337792090717e-15,
    6.34007647627664596e-15,
    -2.22751332674629636e-14,
    8.03289077506837437e-14,
    -2.98009692314817835e-13,
    1.14034058820734423e-12,
    -4.51459788337451918e-12,
    1.85594911495492655e-11,
    -7.95748924447739704e-11,
    3.57739728140032845e-10,
    -1.69753450938906152e-9,
    8.57403401741422609e-9,
    -4.66048989768794767e-8,
    2.76681363944501508e-7,
    -1.83175552271911948e-6,
    1.39498137188764994e-5,
    -1.28495495816278026e-4,
    1.56988388573005337e-3,
    -3.14481013119645005e-2,
    2.44030308206595545e0,
];

#[allow(clippy::excessive_precision)]
const K1E_CHEB: [f64; 30] = [
    2.46457513970162733e-20,
    -7.13271290748578474e-20,
    2.09191252694693843e-19,
    -6.22164528733722387e-19,
    1.87786519016166885e-18,
    -5.75674448207301964e-18,
    1.79405104788634507e-17,
    -5.68946284919364307e-17,
    1.83809357524304519e-16,
    -6.05704727064301772e-16,
    2.03870316623986088e-15,
    -7.01983708921476885e-15,
    2.47715442421959868e-14,
    -8.97670518201014607e-14,
    3.34841966605224312e-13,
    -1.28917396094982294e-12,
    5.13963967348234354e-12,
    -2.12996783842779102e-11,
    9.21831518760531413e-11,
    -4.19035475934192558e-10,
    2.01504975519703462e-9,
    -1.0345762465678097e-8,
    5.74108412545004929e-8,
    -3.50196060308781254e-7,
    2.40648494783721712e-6,
    -1.93619797416608296e-5,
    1.95215518471351631e-4,
    -2.85781685962277939e-3,
    1.03923736576817238e-1,
    2.72062619048444267e0,
];

fn chbevl(x: f64, coeffs: &[f64]) -> f64 {
    let mut b0 = coeffs[0];
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for c in &coeffs[1..] {
        b2 = b1;
        b1 = b0;
        b0 = x * b1 - b2 + c;
    }
    0.5 * (b0 - b2)
}

fn check_bessel_arg(op: &'static str, x: f64) -> Result<()> {
    if x.is_nan() || !x.is_finite() || x <= 0.0 {
        return Err(Error::domain(op, format!("requires finite x > 0, got {x}")));
    }
    Ok(())
}

/// Small-argument series for K0 and K1 (x <= 2), returned unscaled.
///
/// K0 = -(ln(x/2) + gamma) I0 + sum_{k>=1} H_k t_k,     t_k = (x^2/4)^k/(k!)^2
/// K1 = 1/x + (ln(x/2) + gamma) I1 - (x/4) sum_{k>=0} s_k (H_k + H_{k+1}),
///       s_k = (x^2/4)^k/(k!(k+1)!)
fn k0_k1_series(x: f64) -> (f64, f64) {
    let h = 0.25 * x * x;
    let log_half_x = (0.5 * x).ln();
    let c = log_half_x + EULER_GAMMA;

    // Order 0.
    let mut t = 1.0;
    let mut i0 = 1.0;
    let mut harmonic = 0.0;
    let mut sum0 = 0.0;
    // Order 1.
    let mut s = 1.0;
    let mut i1_sum = 1.0;
    let mut sum1 = 1.0; // k = 0 term: s_0 (H_0 + H_1) = 1

    for k in 1..40 {
        let kf = k as f64;
        t *= h / (kf * kf);
        harmonic += 1.0 / kf;
        i0 += t;
        sum0 += t * harmonic;

        s *= h / (kf * (kf + 1.0));
        i1_sum += s;
        sum1 += s * (2.0 * harmonic + 1.0 / (kf + 1.0));

        if t < f64::EPSILON * i0 && s < f64::EPSILON * i1_sum {
            break;
        }
    }
    let i1 = 0.5 * x * i1_sum;
    let k0 = -c * i0 + sum0;
    let k1 = 1.0 / x + c * i1 - 0.25 * x * sum1;
    (k0, k1)
}

/// Modified Bessel function of the second kind, order 0.
///
/// For x large enough that `e^{-x}` underflows the result saturates to 0;
/// use [`bessel_k0_scaled`] in that regime.
pub fn bessel_k0(x: f64) -> Result<f64> {
    check_bessel_arg("bessel_k0", x)?;
    if x <= 2.0 {
        Ok(k0_k1_series(x).0)
    } else {
        Ok(chbevl(8.0 / x - 2.0, &K0E_CHEB) / x.sqrt() * (-x).exp())
    }
}

/// Modified Bessel function of the second kind, order 1.
pub fn bessel_k1(x: f64) -> Result<f64> {
    check_bessel_arg("bessel_k1", x)?;
    if x <= 2.0 {
        Ok(k0_k1_series(x).1)
    } else {
        Ok(chbevl(8.0 / x - 2.0, &K1E_CHEB) / x.sqrt() * (-x).exp())
    }
}

/// `e^x K_0(x)`; finite for all positive x.
pub fn bessel_k0_scaled(x: f64) -> Result<f64> {
    check_bessel_arg("bessel_k0_scaled", x)?;
    if x <= 2.0 {
        Ok(k0_k1_series(x).0 * x.exp())
    } else {
        Ok(chbevl(8.0 / x - 2.0, &K0E_CHEB) / x.sqrt())
    }
}

/// `e^x K_1(x)`; finite for all positive x.
pub fn bessel_k1_scaled(x: f64) -> Result<f64> {
    check_bessel_arg("bessel_k1_scaled", x)?;
    if x <= 2.0 {
        Ok(k0_k1_series(x).1 * x.exp())
    } else {
        Ok(chbevl(8.0 / x - 2.0, &K1E_CHEB) / x.sqrt())
    }
}

/// Mean of the GIG(-1, 1, rho) posterior: `K0(sqrt(rho)) / (sqrt(rho) K1(sqrt(rho)))`.
///
/// rho is clamped to `guards.rho_floor` first. Computed from the scaled
/// Bessel pair so the shared `e^{-sqrt(rho)}` factor cancels; stays finite
/// for `sqrt(rho)` well past 1e6. Strictly positive and strictly decreasing
/// in rho.
pub fn gig_beta_mean(rho: f64, guards: &NumericGuards) -> Result<f64> {
    if rho.is_nan() {
        return Err(Error::domain("gig_beta_mean", "NaN input"));
    }
    let rho = rho.max(guards.rho_floor);
    if rho <= 0.0 || !rho.is_finite() {
        return Err(Error::domain(
            "gig_beta_mean",
            format!("rho must be positive and finite after clamping, got {rho}"),
        ));
    }
    let x = rho.sqrt();
    if x <= 2.0 {
        let (k0, k1) = k0_k1_series(x);
        Ok(k0 / (x * k1))
    } else {
        let k0e = chbevl(8.0 / x - 2.0, &K0E_CHEB);
        let k1e = chbevl(8.0 / x - 2.0, &K1E_CHEB);
        Ok(k0e / (x * k1e))
    }
}
