//! Independent reference oracles for the acceptance suite.
//!
//! Everything here is computed from integral representations or textbook
//! recursions written out longhand, deliberately avoiding the code paths
//! under test.

use bypass_core::quad::adaptive_simpson;
use nalgebra::{DMatrix, DVector};

/// K0 via the cosh-integral representation.
pub fn bessel_k0_oracle(x: f64) -> f64 {
    bessel_k_oracle(x, 0)
}

/// K1 via the cosh-integral representation.
pub fn bessel_k1_oracle(x: f64) -> f64 {
    bessel_k_oracle(x, 1)
}

/// K2, used by the recurrence identity check.
pub fn bessel_k2_oracle(x: f64) -> f64 {
    bessel_k_oracle(x, 2)
}

fn bessel_k_oracle(x: f64, order: u32) -> f64 {
    // e^{-x cosh t} cosh(order t) dies once x cosh t exceeds ~750.
    let t_max = (750.0 / x).acosh() + 1.0;
    adaptive_simpson(
        |t| (-x * t.cosh()).exp() * (order as f64 * t).cosh(),
        0.0,
        t_max,
        1e-300,
        1e-12,
        48,
    )
    .expect("bessel oracle quadrature must converge")
}

/// Adaptive quadrature seeded with uniform panels, so narrow features
/// cannot hide from the initial stencil, while the per-panel absolute
/// floor keeps staircase regions (where relative accuracy is
/// unattainable) from refining forever.
pub fn paneled_adaptive<F>(f: F, a: f64, b: f64, panels: usize, atol: f64, rtol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    let mut total = 0.0;
    let per_panel_atol = atol / panels as f64;
    for i in 0..panels {
        let lo = a + (b - a) * i as f64 / panels as f64;
        let hi = a + (b - a) * (i + 1) as f64 / panels as f64;
        total += adaptive_simpson(&f, lo, hi, per_panel_atol, rtol, 44)
            .expect("oracle quadrature must converge");
    }
    total
}

/// First moment of GIG(-1, 1, rho) as a ratio of two kernel integrals,
/// bypassing the Bessel normaliser entirely. The kernel is scaled so its
/// mode is 1, which keeps the half-line compactification well-conditioned
/// at every rho.
pub fn gig_mean_oracle(rho: f64) -> f64 {
    // Mode of r^{-2} e^{-(1/r + rho r)/2}: the root of rho r^2 + 4r - 1.
    let r_star = (-2.0 + (4.0 + rho).sqrt()) / rho;
    let log_peak = -2.0 * r_star.ln() - 0.5 * (1.0 / r_star + rho * r_star);
    let kernel = move |r: f64| {
        if r <= 0.0 {
            0.0
        } else {
            (-2.0 * r.ln() - 0.5 * (1.0 / r + rho * r) - log_peak).exp()
        }
    };
    let integrate = |f: Box<dyn Fn(f64) -> f64>| {
        paneled_adaptive(
            move |u: f64| {
                let w = 1.0 - u;
                let r = u / w;
                f(r) / (w * w)
            },
            1e-12,
            1.0 - 1e-12,
            512,
            1e-16,
            1e-12,
        )
    };
    let k = kernel;
    let num = integrate(Box::new(move |r| r * k(r)));
    let den = integrate(Box::new(kernel));
    num / den
}

/// Truncated-Gaussian mean and variance by direct quadrature of the
/// shifted kernel (the kernel maximum on the interval is scaled to 1, so
/// deeply-truncated cells stay well-conditioned).
pub fn trunc_moments_oracle(location: f64, precision: f64, lower: f64, upper: f64) -> (f64, f64) {
    let mode = location.clamp(lower, upper);
    let log_peak = -0.5 * precision * (mode - location) * (mode - location);
    let kernel = move |x: f64| {
        (-0.5 * precision * (x - location) * (x - location) - log_peak).exp()
    };
    let quad =
        |f: Box<dyn Fn(f64) -> f64>| paneled_adaptive(f, lower, upper, 256, 1e-16, 1e-13);
    let z = quad(Box::new(kernel));
    let mean = quad(Box::new(move |x| x * kernel(x))) / z;
    let var = quad(Box::new(move |x| (x - mean) * (x - mean) * kernel(x))) / z;
    (mean, var)
}

/// Textbook Kalman filter for the random-walk regression
/// `y = x'w + offset + N(0, r)`, `w' = w + N(0, q I)`, written out
/// longhand as the equivalence reference.
pub struct ReferenceKalman {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub q: f64,
    pub r: f64,
    pub offset: f64,
}

impl ReferenceKalman {
    pub fn new(dim: usize, q: f64, r: f64, offset: f64) -> Self {
        Self {
            mean: DVector::zeros(dim),
            cov: DMatrix::zeros(dim, dim),
            q,
            r,
            offset,
        }
    }

    pub fn step(&mut self, x: &DVector<f64>, y: f64) {
        let n = self.mean.len();
        let mut p = self.cov.clone();
        for i in 0..n {
            p[(i, i)] += self.q;
        }
        let s = (x.transpose() * &p * x)[(0, 0)] + self.r;
        let k = &p * x / s;
        let innovation = y - self.mean.dot(x) - self.offset;
        self.mean += &k * innovation;
        let cov = &p - &k * (x.transpose() * &p);
        // Match the re-symmetrisation convention.
        self.cov = 0.5 * (&cov + cov.transpose());
    }
}

/// Deterministic xorshift stream for test data that must not depend on
/// rand's sampling internals.
pub struct XorShift(pub u64);

impl XorShift {
    pub fn next_u64(&mut self) -> u64 {
        let mut s = self.0;
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        self.0 = s;
        s
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in [lo, hi).
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}
