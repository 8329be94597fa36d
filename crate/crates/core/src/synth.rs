//! Seeded synthetic data generators for the evaluation harness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// One regime of a piecewise-constant AR(1) generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub len: usize,
    /// AR(1) weights `[intercept, lag coefficient]`.
    pub weights: [f64; 2],
    pub noise_sd: f64,
}

/// Piecewise AR(1) series with abrupt weight changes at segment borders:
/// `y_t = w0 + w1 y_{t-1} + noise`. The seed value `y0` is the first
/// element of the returned series, so the output length is
/// `1 + sum(segment lengths)`. Deterministic given the seed.
pub fn synth_changepoint(seed: u64, y0: f64, segments: &[Segment]) -> Result<Vec<f64>> {
    if segments.is_empty() {
        return Err(Error::domain("synth_changepoint", "needs at least one segment"));
    }
    for (i, seg) in segments.iter().enumerate() {
        if seg.len == 0 {
            return Err(Error::domain(
                "synth_changepoint",
                format!("segment {i} has zero length"),
            ));
        }
        if !(seg.noise_sd >= 0.0 && seg.noise_sd.is_finite()) {
            return Err(Error::domain(
                "synth_changepoint",
                format!("segment {i} has invalid noise_sd {}", seg.noise_sd),
            ));
        }
        if seg.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::domain(
                "synth_changepoint",
                format!("segment {i} has non-finite weights"),
            ));
        }
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let total: usize = segments.iter().map(|s| s.len).sum();
    let mut out = Vec::with_capacity(total + 1);
    out.push(y0);
    let mut prev = y0;
    for seg in segments {
        for _ in 0..seg.len {
            let noise: f64 = StandardNormal.sample(&mut rng);
            let y = seg.weights[0] + seg.weights[1] * prev + seg.noise_sd * noise;
            out.push(y);
            prev = y;
        }
    }
    Ok(out)
}

/// One regime of the robust-noise AR(1) generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisySegment {
    pub len: usize,
    /// AR(1) weights `[intercept, lag coefficient]`.
    pub weights: [f64; 2],
    /// Insensitivity width of the noise core.
    pub eps: f64,
    /// Overall noise scale.
    pub noise_scale: f64,
}

/// Piecewise AR(1) series whose measurement noise follows the
/// epsilon-insensitive density (uniform core, Laplace tails) instead of a
/// Gaussian, optionally contaminated with rare large spikes. This is the
/// generator behind the committed changepoint evaluation series: spikes are
/// added with probability `spike_prob`, with magnitude uniform in
/// `[spike_min, spike_max]` noise-scale units and random sign.
pub fn synth_ilf_changepoint(
    seed: u64,
    y0: f64,
    segments: &[NoisySegment],
    spike_prob: f64,
    spike_min: f64,
    spike_max: f64,
) -> Result<Vec<f64>> {
    if segments.is_empty() {
        return Err(Error::domain("synth_ilf_changepoint", "needs at least one segment"));
    }
    if !(0.0..=1.0).contains(&spike_prob) || !(spike_min >= 0.0 && spike_max >= spike_min) {
        return Err(Error::domain(
            "synth_ilf_changepoint",
            "requires 0 <= spike_prob <= 1 and 0 <= spike_min <= spike_max",
        ));
    }
    for (i, seg) in segments.iter().enumerate() {
        if seg.len == 0 || !(seg.eps >= 0.0) || !(seg.noise_scale >= 0.0) {
            return Err(Error::domain(
                "synth_ilf_changepoint",
                format!("segment {i} is degenerate"),
            ));
        }
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let total: usize = segments.iter().map(|s| s.len).sum();
    let mut out = Vec::with_capacity(total + 1);
    out.push(y0);
    let mut prev = y0;
    for seg in segments {
        let core_weight = seg.eps / (1.0 + seg.eps);
        for _ in 0..seg.len {
            // Noise from the insensitive density: uniform core with
            // probability eps/(1+eps), exponential tail beyond +-eps
            // otherwise.
            let u: f64 = rng.random();
            let raw = if u < core_weight {
                rng.random_range(-seg.eps..seg.eps)
            } else {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let tail: f64 = rng.random::<f64>();
                sign * (seg.eps - tail.max(1e-300).ln())
            };
            let mut noise = seg.noise_scale * raw;
            if rng.random::<f64>() < spike_prob {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                noise += sign * seg.noise_scale * rng.random_range(spike_min..spike_max);
            }
            let y = seg.weights[0] + seg.weights[1] * prev + noise;
            out.push(y);
            prev = y;
        }
    }
    Ok(out)
}

/// Configuration of the synthetic cointegrated price pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairConfig {
    pub n: usize,
    /// Starting price of the driver leg.
    pub x0: f64,
    /// Log-return volatility of the driver leg.
    pub x_sd: f64,
    /// Starting hedge ratio.
    pub hedge0: f64,
    /// Random-walk volatility of the hedge ratio.
    pub hedge_sd: f64,
    /// Amplitude of a slow deterministic drift injected into the hedge ratio.
    pub hedge_drift_amp: f64,
    /// Period (in steps) of that drift.
    pub hedge_drift_period: f64,
    /// When set, the drift component switches sign abruptly every half
    /// period (regime jumps) instead of moving along a sinusoid.
    pub hedge_jumps: bool,
    /// Standard deviation of the mean-reverting spread noise.
    pub spread_sd: f64,
    /// Probability of a fat-tail spread spike on any day.
    pub spike_prob: f64,
    /// Spike magnitude range in spread-sd units.
    pub spike_min: f64,
    pub spike_max: f64,
    /// Alternating volatility regimes: every `vol_period` steps the spread
    /// noise flips between `spread_sd` and `spread_sd * vol_high_factor`.
    /// Zero disables the switching.
    pub vol_period: usize,
    pub vol_high_factor: f64,
}

impl Default for PairConfig {
    fn default() -> Self {
        Self {
            n: 2000,
            x0: 50.0,
            x_sd: 0.01,
            hedge0: 1.5,
            hedge_sd: 0.0005,
            hedge_drift_amp: 0.25,
            hedge_drift_period: 750.0,
            hedge_jumps: false,
            spread_sd: 2.0,
            spike_prob: 0.0,
            spike_min: 5.0,
            spike_max: 12.0,
            vol_period: 0,
            vol_high_factor: 1.0,
        }
    }
}

/// Geometric random walk `x` and a cointegrated partner
/// `y_t = w_t x_t + spread noise`, where the hedge ratio `w_t` drifts
/// stochastically plus either a slow sinusoid or abrupt regime jumps, and
/// the spread noise may be contaminated with rare large spikes.
/// Deterministic given the seed.
pub fn synth_cointegrated_pair(seed: u64, cfg: &PairConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    if cfg.n < 2 {
        return Err(Error::domain("synth_cointegrated_pair", "needs n >= 2"));
    }
    if !(cfg.x0 > 0.0) || !(cfg.x_sd >= 0.0) || !(cfg.spread_sd >= 0.0) || !(cfg.hedge_sd >= 0.0) {
        return Err(Error::domain(
            "synth_cointegrated_pair",
            "x0 must be positive; volatilities must be nonnegative",
        ));
    }
    if !(0.0..=1.0).contains(&cfg.spike_prob) || !(cfg.spike_min >= 0.0 && cfg.spike_max >= cfg.spike_min)
    {
        return Err(Error::domain(
            "synth_cointegrated_pair",
            "requires 0 <= spike_prob <= 1 and 0 <= spike_min <= spike_max",
        ));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(cfg.n);
    let mut ys = Vec::with_capacity(cfg.n);
    let mut x = cfg.x0;
    let mut hedge_walk = 0.0;
    for t in 0..cfg.n {
        let zx: f64 = StandardNormal.sample(&mut rng);
        let zw: f64 = StandardNormal.sample(&mut rng);
        let zs: f64 = StandardNormal.sample(&mut rng);
        if t > 0 {
            x *= (cfg.x_sd * zx - 0.5 * cfg.x_sd * cfg.x_sd).exp();
        }
        hedge_walk += cfg.hedge_sd * zw;
        let phase = 2.0 * std::f64::consts::PI * t as f64 / cfg.hedge_drift_period;
        let drift = if cfg.hedge_jumps {
            cfg.hedge_drift_amp * phase.sin().signum()
        } else {
            cfg.hedge_drift_amp * phase.sin()
        };
        let hedge = cfg.hedge0 + drift + hedge_walk;
        let sd = if cfg.vol_period > 0 && (t / cfg.vol_period) % 2 == 1 {
            cfg.spread_sd * cfg.vol_high_factor
        } else {
            cfg.spread_sd
        };
        let mut noise = sd * zs;
        if rng.random::<f64>() < cfg.spike_prob {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            noise += sign * sd * rng.random_range(cfg.spike_min..cfg.spike_max);
        }
        let y = hedge * x + noise;
        xs.push(x);
        ys.push(y.max(1e-3));
    }
    Ok((xs, ys))
}
