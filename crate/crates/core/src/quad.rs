//! Adaptive Simpson quadrature.
//!
//! Used at runtime by the mixture-of-Gaussians density and throughout the
//! test suite as the independent reference for the special functions and
//! distribution moments.

use crate::error::{Error, Result};

/// Integrate `f` over `[a, b]` with adaptive Simpson refinement.
///
/// Refinement stops once `|S2 - S1| / 15 <= atol + rtol * |S2|` on a panel.
/// Returns a numeric error if `max_depth` is exhausted before the local
/// tolerance is met.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, atol: f64, rtol: f64, max_depth: u32) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(a.is_finite() && b.is_finite()) || a >= b {
        return Err(Error::domain("adaptive_simpson", "requires finite a < b"));
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    recurse(&f, a, b, fa, fm, fb, whole, atol, rtol, max_depth)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    atol: f64,
    rtol: f64,
    depth: u32,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let err = left + right - whole;
    if err.abs() <= 15.0 * (atol + rtol * (left + right).abs()) {
        return Ok(left + right + err / 15.0);
    }
    if depth == 0 {
        return Err(Error::numeric(
            "adaptive_simpson",
            format!("interval refinement exhausted on [{a}, {b}]"),
        ));
    }
    let half_atol = 0.5 * atol;
    let l = recurse(f, a, m, fa, flm, fm, left, half_atol, rtol, depth - 1)?;
    let r = recurse(f, m, b, fm, frm, fb, right, half_atol, rtol, depth - 1)?;
    Ok(l + r)
}

/// Integrate `f` over `(0, inf)` via the substitution `t = u / (1 - u)`.
///
/// The integrand must decay fast enough that `f(t) * (1 + t)^2` stays
/// bounded, which holds for every density handled in this crate.
pub fn integrate_half_line<F>(f: F, atol: f64, rtol: f64, max_depth: u32) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let eps = 1e-14;
    adaptive_simpson(
        |u| {
            let w = 1.0 - u;
            let t = u / w;
            let v = f(t) / (w * w);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        eps,
        1.0 - eps,
        atol,
        rtol,
        max_depth,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomial_exactly() {
        // Simpson is exact on cubics.
        let v = adaptive_simpson(|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, 1e-12, 1e-12, 30).unwrap();
        assert!((v - (4.0 - 4.0 + 2.0)).abs() < 1e-12);
    }

    #[test]
    fn integrates_gaussian_tail() {
        let inv_sqrt_2pi = (2.0 * std::f64::consts::PI).sqrt().recip();
        let v = adaptive_simpson(|x| inv_sqrt_2pi * (-0.5 * x * x).exp(), -8.0, 8.0, 1e-14, 1e-13, 40)
            .unwrap();
        assert!((v - 1.0).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn half_line_exponential() {
        let v = integrate_half_line(|t| (-t).exp(), 1e-14, 1e-13, 40).unwrap();
        assert!((v - 1.0).abs() < 1e-10, "got {v}");
    }

    #[test]
    fn reports_non_convergence() {
        // A needle the refinement cannot resolve within the depth budget.
        let r = adaptive_simpson(|x| if x.abs() < 1e-300 { 1e300 } else { 0.0 }, -1.0, 1.0, 1e-300, 0.0, 3);
        assert!(r.is_err());
    }
}
