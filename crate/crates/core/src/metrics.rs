//! Online forecast metrics and trading statistics.

use serde_json::json;

use crate::error::{Error, Result};
use crate::filter::{predictive_log_lik, PredictiveDist};

/// Streaming forecast-error accumulator.
///
/// RMSE/MAE/LL update in streaming form; the absolute residuals are
/// retained so the median (MAD) is exact and every field can be recomputed
/// from the log.
#[derive(Debug, Clone, Default)]
pub struct ForecastMetrics {
    abs_residuals: Vec<f64>,
    sum_sq: f64,
    sum_abs: f64,
    ll_sum: f64,
    ll_scored: usize,
    n: usize,
}

impl ForecastMetrics {
    pub fn new() -> Self {
        Self::default()
    }

    /// Score one probabilistic prediction against the realised output.
    pub fn score_step(&mut self, pred: &PredictiveDist, y: f64) {
        debug_assert!(pred.variance > 0.0);
        self.push_residual(y - pred.mean);
        self.ll_sum += predictive_log_lik(pred, y);
        self.ll_scored += 1;
    }

    /// Score a point prediction (no predictive variance, no LL term).
    pub fn score_point(&mut self, m_hat: f64, y: f64) {
        self.push_residual(y - m_hat);
    }

    fn push_residual(&mut self, residual: f64) {
        let a = residual.abs();
        self.abs_residuals.push(a);
        self.sum_sq += a * a;
        self.sum_abs += a;
        self.n += 1;
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rmse(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.sum_sq / self.n as f64).sqrt()
        }
    }

    pub fn mae(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum_abs / self.n as f64
        }
    }

    /// Median absolute error, computed exactly from the retained residuals.
    pub fn mad(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let mut sorted = self.abs_residuals.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mid = sorted.len() / 2;
        if sorted.len() % 2 == 1 {
            sorted[mid]
        } else {
            0.5 * (sorted[mid - 1] + sorted[mid])
        }
    }

    /// Sum of predictive log likelihoods; `None` when no prediction carried
    /// a variance (point-forecast models).
    pub fn ll(&self) -> Option<f64> {
        if self.ll_scored == 0 {
            None
        } else {
            Some(self.ll_sum)
        }
    }

    /// Absolute one-step residuals in arrival order.
    pub fn residual_log(&self) -> &[f64] {
        &self.abs_residuals
    }

    /// Flat JSON object with the metric fields.
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "rmse": self.rmse(),
            "mad": self.mad(),
            "mae": self.mae(),
            "ll": self.ll(),
            "n": self.n(),
        })
    }
}

/// Annualised Sharpe ratio: `mean / sample std * sqrt(annualization)`.
pub fn sharpe_ratio(daily_returns: &[f64], annualization: f64) -> Result<f64> {
    if daily_returns.len() < 2 {
        return Err(Error::UndefinedMetric {
            metric: "sharpe_ratio",
            msg: format!("needs at least 2 returns, got {}", daily_returns.len()),
        });
    }
    if !(annualization > 0.0) {
        return Err(Error::UndefinedMetric {
            metric: "sharpe_ratio",
            msg: format!("annualization must be positive, got {annualization}"),
        });
    }
    let n = daily_returns.len() as f64;
    let mean = daily_returns.iter().sum::<f64>() / n;
    let ss = daily_returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>();
    let std = (ss / (n - 1.0)).sqrt();
    if std == 0.0 {
        return Err(Error::UndefinedMetric {
            metric: "sharpe_ratio",
            msg: "zero return variance".to_string(),
        });
    }
    Ok(mean / std * annualization.sqrt())
}

/// One-pass maximum drawdown.
///
/// Returns the largest peak-to-trough fraction and the longest run of
/// consecutive steps strictly below the running peak.
pub fn max_drawdown(equity: &[f64]) -> Result<(f64, usize)> {
    if equity.is_empty() {
        return Err(Error::domain("max_drawdown", "empty equity curve"));
    }
    if equity.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
        return Err(Error::domain("max_drawdown", "equity must stay positive and finite"));
    }
    let mut peak = equity[0];
    let mut max_frac = 0.0_f64;
    let mut run = 0usize;
    let mut max_run = 0usize;
    for &e in equity {
        if e > peak {
            peak = e;
        }
        if e < peak {
            run += 1;
            max_run = max_run.max(run);
            max_frac = max_frac.max((peak - e) / peak);
        } else {
            run = 0;
        }
    }
    Ok((max_frac, max_run))
}

/// Trading-performance summary of one backtest.
#[derive(Debug, Clone, PartialEq)]
pub struct BacktestMetrics {
    /// Annualised Sharpe ratio; 0 for a flat (trade-free) equity curve.
    pub sharpe: f64,
    /// Largest peak-to-trough equity fraction in [0, 1].
    pub max_drawdown: f64,
    /// Longest below-peak stretch, in trading days.
    pub max_dd_duration: usize,
    pub equity_curve: Vec<f64>,
}

impl BacktestMetrics {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "sharpe": self.sharpe,
            "max_drawdown": self.max_drawdown,
            "max_dd_duration_days": self.max_dd_duration,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn perfect_predictions() {
        let mut m = ForecastMetrics::new();
        let pred = PredictiveDist { mean: 2.0, variance: 1.0 };
        for _ in 0..5 {
            m.score_step(&pred, 2.0);
        }
        assert_eq!(m.rmse(), 0.0);
        assert_eq!(m.mae(), 0.0);
        assert_eq!(m.mad(), 0.0);
        assert_relative_eq!(m.ll().unwrap(), -0.918_938_533_204_672_7 * 5.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_and_mixed_residuals() {
        let mut m = ForecastMetrics::new();
        let pred = PredictiveDist { mean: 0.0, variance: 1.0 };
        m.score_step(&pred, 1.0);
        m.score_step(&pred, -1.0);
        assert_relative_eq!(m.rmse(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(m.mae(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(m.mad(), 1.0, epsilon = 1e-15);

        let mut m = ForecastMetrics::new();
        m.score_step(&pred, 0.0);
        m.score_step(&pred, 3.0);
        assert_relative_eq!(m.mae(), 1.5, epsilon = 1e-15);
        assert_relative_eq!(m.rmse(), (4.5f64).sqrt(), epsilon = 1e-15);
        assert_relative_eq!(m.mad(), 1.5, epsilon = 1e-15);
    }

    #[test]
    fn fields_recompute_from_residual_log() {
        let mut m = ForecastMetrics::new();
        let pred = PredictiveDist { mean: 0.5, variance: 2.0 };
        for i in 0..17 {
            m.score_step(&pred, (i as f64) * 0.37 - 2.0);
        }
        let log = m.residual_log();
        let n = log.len() as f64;
        let rmse = (log.iter().map(|r| r * r).sum::<f64>() / n).sqrt();
        let mae = log.iter().sum::<f64>() / n;
        assert_eq!(rmse, m.rmse());
        assert_eq!(mae, m.mae());
    }

    #[test]
    fn rmse_dominates_mae() {
        let mut m = ForecastMetrics::new();
        let pred = PredictiveDist { mean: 0.0, variance: 1.0 };
        for i in 0..100 {
            m.score_step(&pred, ((i * 31 % 17) as f64 - 8.0) * 0.3);
        }
        assert!(m.rmse() >= m.mae());
    }

    #[test]
    fn ll_additivity() {
        let mut m = ForecastMetrics::new();
        let mut manual = 0.0;
        for i in 0..50 {
            let pred = PredictiveDist {
                mean: i as f64 * 0.1,
                variance: 0.5 + (i % 7) as f64 * 0.25,
            };
            let y = i as f64 * 0.11;
            m.score_step(&pred, y);
            manual += predictive_log_lik(&pred, y);
        }
        assert!((m.ll().unwrap() - manual).abs() <= 1e-12);
    }

    #[test]
    fn point_scores_have_no_ll() {
        let mut m = ForecastMetrics::new();
        m.score_point(1.0, 2.0);
        assert_eq!(m.ll(), None);
        assert_eq!(m.to_json()["ll"], serde_json::Value::Null);
    }

    #[test]
    fn sharpe_examples() {
        // Alternating returns: zero mean.
        let alt: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 0.01 } else { -0.01 }).collect();
        assert_relative_eq!(sharpe_ratio(&alt, 252.0).unwrap(), 0.0, epsilon = 1e-12);

        // Constant returns: undefined.
        assert!(sharpe_ratio(&[0.01, 0.01, 0.01], 252.0).is_err());
        assert!(sharpe_ratio(&[0.01], 252.0).is_err());

        // Closed form: mean 0.02, std 0.01 -> 2 sqrt(252).
        let s = sharpe_ratio(&[0.01, 0.02, 0.03], 252.0).unwrap();
        assert_relative_eq!(s, 2.0 * 252.0_f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn drawdown_examples() {
        let (f, d) = max_drawdown(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((f, d), (0.0, 0));

        let (f, d) = max_drawdown(&[100.0, 50.0, 100.0]).unwrap();
        assert_relative_eq!(f, 0.5, epsilon = 1e-15);
        assert_eq!(d, 1);

        assert!(max_drawdown(&[]).is_err());
        assert!(max_drawdown(&[1.0, -1.0]).is_err());
    }

    #[test]
    fn drawdown_matches_brute_force() {
        let mut seed = 12345u64;
        let mut next = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 33) as f64 / (1u64 << 31) as f64) - 0.5
        };
        for _ in 0..50 {
            let mut equity = vec![100.0_f64];
            for _ in 0..200 {
                let last = *equity.last().unwrap();
                equity.push((last + next() * 5.0).max(1.0));
            }
            let (fast, dur) = max_drawdown(&equity).unwrap();
            // O(n^2) oracle.
            let mut brute = 0.0_f64;
            for j in 1..equity.len() {
                let peak = equity[..=j].iter().cloned().fold(f64::MIN, f64::max);
                brute = brute.max((peak - equity[j]) / peak);
            }
            assert_eq!(fast, brute);
            // Duration oracle: longest strictly-below-running-peak run.
            let mut peak = equity[0];
            let mut run = 0;
            let mut max_run = 0;
            for &e in &equity {
                if e > peak {
                    peak = e;
                }
                if e < peak {
                    run += 1;
                    max_run = max_run.max(run);
                } else {
                    run = 0;
                }
            }
            assert_eq!(dur, max_run);
        }
    }
}
