//! Pairs-trading backtest driven by an online hedge-ratio filter.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{max_drawdown, sharpe_ratio, BacktestMetrics};
use crate::run::OnlineModel;

/// Z-score band trading rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TradeConfig {
    /// Enter when |z| exceeds this.
    pub z_entry: f64,
    /// Exit when |z| falls to or below this; must stay below `z_entry`.
    pub z_exit: f64,
    /// Trading periods per year for the Sharpe ratio.
    pub annualization: f64,
    /// Filter-only steps before trading starts.
    pub warmup: usize,
}

impl Default for TradeConfig {
    fn default() -> Self {
        Self {
            z_entry: 1.0,
            z_exit: 0.0,
            annualization: 252.0,
            warmup: 20,
        }
    }
}

impl TradeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.z_entry > 0.0 && self.z_entry.is_finite()) {
            return Err(Error::config("trade.z_entry", "must be positive and finite"));
        }
        if !(self.z_exit >= 0.0 && self.z_exit < self.z_entry) {
            return Err(Error::config(
                "trade.z_exit",
                "must satisfy 0 <= z_exit < z_entry",
            ));
        }
        if !(self.annualization > 0.0) {
            return Err(Error::config("trade.annualization", "must be positive"));
        }
        Ok(())
    }
}

/// Held spread position: units of y and units of x, frozen at entry.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Position {
    units_y: f64,
    units_x: f64,
    /// +1 entered on z > z_entry (short spread), -1 on z < -z_entry.
    side: f64,
}

/// Backtest a z-score band strategy on one price pair.
///
/// Each day, in order: the open position is marked to market, the signal is
/// read off the filter's one-step prediction (before any update), entries
/// and exits are applied, and only then does the filter see the day's
/// prices. A short-spread entry is short one unit of y against `w` units of
/// x at the filter's current hedge ratio; a long-spread entry is the
/// mirror. Returns are daily P&L over the fixed starting capital (the first
/// y price).
pub fn pairs_backtest(
    x_prices: &[f64],
    y_prices: &[f64],
    model: &mut dyn OnlineModel,
    cfg: &TradeConfig,
) -> Result<BacktestMetrics> {
    cfg.validate()?;
    if x_prices.len() != y_prices.len() {
        return Err(Error::data(
            None,
            format!(
                "price series lengths differ: {} vs {}",
                x_prices.len(),
                y_prices.len()
            ),
        ));
    }
    if x_prices.len() < 2 {
        return Err(Error::data(None, "need at least 2 prices"));
    }
    if x_prices
        .iter()
        .chain(y_prices.iter())
        .any(|&p| !(p > 0.0 && p.is_finite()))
    {
        return Err(Error::data(None, "prices must be positive and finite"));
    }
    if model.dim() != 1 {
        return Err(Error::domain(
            "pairs_backtest",
            format!("hedge model must be scalar (dim 1), got dim {}", model.dim()),
        ));
    }

    let capital = y_prices[0];
    let mut equity = Vec::with_capacity(x_prices.len());
    equity.push(capital);
    let mut returns = Vec::with_capacity(x_prices.len() - 1);
    let mut position: Option<Position> = None;

    for t in 0..x_prices.len() {
        if t > 0 {
            let pnl = position
                .map(|p| {
                    p.units_y * (y_prices[t] - y_prices[t - 1])
                        + p.units_x * (x_prices[t] - x_prices[t - 1])
                })
                .unwrap_or(0.0);
            let eq = equity.last().unwrap() + pnl;
            equity.push(eq);
            returns.push(pnl / capital);
        }

        let x = DVector::from_vec(vec![x_prices[t]]);
        let forecast = model.forecast(&x)?;
        let variance = forecast.variance.ok_or_else(|| {
            Error::domain("pairs_backtest", "model must provide predictive variance")
        })?;
        let spread = y_prices[t] - forecast.mean;
        let z = spread / variance.sqrt();

        if t >= cfg.warmup {
            match position {
                // Exit once the spread has reverted through the inner band:
                // the directional reading of |z| <= z_exit, which keeps the
                // z_exit = 0 default meaningful (exit on the zero crossing).
                Some(p) if p.side * z <= cfg.z_exit => position = None,
                None if z > cfg.z_entry => {
                    let hedge = model.weights()[0];
                    position = Some(Position {
                        units_y: -1.0,
                        units_x: hedge,
                        side: 1.0,
                    });
                }
                None if z < -cfg.z_entry => {
                    let hedge = model.weights()[0];
                    position = Some(Position {
                        units_y: 1.0,
                        units_x: -hedge,
                        side: -1.0,
                    });
                }
                _ => {}
            }
        }

        model.step(&x, y_prices[t]).map_err(|e| e.at_step(t))?;
    }

    let flat = returns.iter().all(|&r| r == 0.0);
    let sharpe = if flat {
        0.0
    } else {
        sharpe_ratio(&returns, cfg.annualization)?
    };
    let (max_dd, duration) = max_drawdown(&equity)?;
    Ok(BacktestMetrics {
        sharpe,
        max_drawdown: max_dd,
        max_dd_duration: duration,
        equity_curve: equity,
    })
}
