//! Stream drivers: a common interface over the four models, the AR(1)
//! filtering loop, multi-step forecasting, and a batch runner that fans
//! independent streams out across threads when the `parallel` feature is
//! enabled.

use nalgebra::DVector;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::ada::AdaBypassFilter;
use crate::baselines::{pa1_step, skf_missing, skf_step, PaRegressorState, SkfState};
use crate::config::{ModelKind, RunConfig};
use crate::error::{Error, Result};
use crate::filter::{Observation, PredictiveDist};
use crate::govi::BypassFilter;
use crate::metrics::ForecastMetrics;
use crate::series::{ar1_design, SeriesRecord};

/// A point or probabilistic one-step forecast.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Forecast {
    pub mean: f64,
    /// `None` for point-forecast models.
    pub variance: Option<f64>,
}

impl Forecast {
    fn from_pred(p: PredictiveDist) -> Self {
        Forecast {
            mean: p.mean,
            variance: Some(p.variance),
        }
    }
}

/// Outcome of one scored step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelStep {
    pub forecast: Forecast,
    pub fp_iters: usize,
}

/// Model internals exposed per output row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSnapshot {
    pub alpha_mean: f64,
    pub beta_mean: f64,
    pub mu_mean: f64,
    pub a: f64,
    pub b: f64,
    pub epsilon: f64,
}

/// Uniform streaming interface over the four models.
pub trait OnlineModel: Send {
    fn dim(&self) -> usize;
    /// One-step forecast without touching the state.
    fn forecast(&self, x: &DVector<f64>) -> Result<Forecast>;
    /// Predict-then-update on an observed output.
    fn step(&mut self, x: &DVector<f64>, y: f64) -> Result<ModelStep>;
    /// Prediction-only advance on a missing output.
    fn step_missing(&mut self, x: &DVector<f64>) -> Result<Forecast>;
    /// Current weight estimate.
    fn weights(&self) -> DVector<f64>;
    fn params(&self) -> ParamSnapshot;
}

struct BypassModel {
    filter: BypassFilter,
}

impl OnlineModel for BypassModel {
    fn dim(&self) -> usize {
        self.filter.belief().dim()
    }

    fn forecast(&self, x: &DVector<f64>) -> Result<Forecast> {
        Ok(Forecast::from_pred(self.filter.predict(x)?))
    }

    fn step(&mut self, x: &DVector<f64>, y: f64) -> Result<ModelStep> {
        let (pred, diag) = self.filter.step(x, y)?;
        Ok(ModelStep {
            forecast: Forecast::from_pred(pred),
            fp_iters: diag.iterations,
        })
    }

    fn step_missing(&mut self, x: &DVector<f64>) -> Result<Forecast> {
        Ok(Forecast::from_pred(self.filter.step_missing(x)?))
    }

    fn weights(&self) -> DVector<f64> {
        self.filter.belief().mean.clone()
    }

    fn params(&self) -> ParamSnapshot {
        let v = self.filter.vstate();
        let h = self.filter.hyper();
        ParamSnapshot {
            alpha_mean: v.alpha_mean,
            beta_mean: v.beta_mean,
            mu_mean: v.mu_mean,
            a: h.a,
            b: h.b,
            epsilon: h.epsilon,
        }
    }
}

struct AdaBypassModel {
    filter: AdaBypassFilter,
}

impl OnlineModel for AdaBypassModel {
    fn dim(&self) -> usize {
        self.filter.belief().dim()
    }

    fn forecast(&self, x: &DVector<f64>) -> Result<Forecast> {
        Ok(Forecast::from_pred(self.filter.predict(x)?))
    }

    fn step(&mut self, x: &DVector<f64>, y: f64) -> Result<ModelStep> {
        let (pred, diag) = self.filter.step(x, y)?;
        Ok(ModelStep {
            forecast: Forecast::from_pred(pred),
            fp_iters: diag.iterations,
        })
    }

    fn step_missing(&mut self, x: &DVector<f64>) -> Result<Forecast> {
        Ok(Forecast::from_pred(self.filter.step_missing(x)?))
    }

    fn weights(&self) -> DVector<f64> {
        self.filter.belief().mean.clone()
    }

    fn params(&self) -> ParamSnapshot {
        let v = self.filter.vstate();
        let h = self.filter.hyper();
        ParamSnapshot {
            alpha_mean: v.alpha_mean,
            beta_mean: v.beta_mean,
            mu_mean: v.mu_mean,
            a: h.a,
            b: h.b,
            epsilon: h.epsilon,
        }
    }
}

struct SkfModel {
    state: SkfState,
    r_floor: f64,
}

impl OnlineModel for SkfModel {
    fn dim(&self) -> usize {
        self.state.weight_mean.len()
    }

    fn forecast(&self, x: &DVector<f64>) -> Result<Forecast> {
        Ok(Forecast::from_pred(self.state.predictive(x)?))
    }

    fn step(&mut self, x: &DVector<f64>, y: f64) -> Result<ModelStep> {
        let obs = Observation::new(x.clone(), Some(y))?;
        let (next, pred) = skf_step(&self.state, &obs, self.r_floor)?;
        self.state = next;
        Ok(ModelStep {
            forecast: Forecast::from_pred(pred),
            fp_iters: 0,
        })
    }

    fn step_missing(&mut self, x: &DVector<f64>) -> Result<Forecast> {
        let (next, pred) = skf_missing(&self.state, x)?;
        self.state = next;
        Ok(Forecast::from_pred(pred))
    }

    fn weights(&self) -> DVector<f64> {
        self.state.weight_mean.clone()
    }

    fn params(&self) -> ParamSnapshot {
        ParamSnapshot {
            alpha_mean: 1.0 / self.state.q_hat.max(f64::MIN_POSITIVE),
            beta_mean: 1.0 / self.state.r_hat,
            mu_mean: 0.0,
            a: 0.0,
            b: 0.0,
            epsilon: 0.0,
        }
    }
}

struct Pa1Model {
    state: PaRegressorState,
}

impl OnlineModel for Pa1Model {
    fn dim(&self) -> usize {
        self.state.weights.len()
    }

    fn forecast(&self, x: &DVector<f64>) -> Result<Forecast> {
        Ok(Forecast {
            mean: self.state.weights.dot(x),
            variance: None,
        })
    }

    fn step(&mut self, x: &DVector<f64>, y: f64) -> Result<ModelStep> {
        let forecast = self.forecast(x)?;
        let obs = Observation::new(x.clone(), Some(y))?;
        self.state = pa1_step(&self.state, &obs)?;
        Ok(ModelStep {
            forecast,
            fp_iters: 0,
        })
    }

    fn step_missing(&mut self, x: &DVector<f64>) -> Result<Forecast> {
        self.forecast(x)
    }

    fn weights(&self) -> DVector<f64> {
        self.state.weights.clone()
    }

    fn params(&self) -> ParamSnapshot {
        ParamSnapshot {
            alpha_mean: 0.0,
            beta_mean: 0.0,
            mu_mean: 0.0,
            a: 0.0,
            b: 0.0,
            epsilon: self.state.epsilon,
        }
    }
}

/// Instantiate the configured model at the given feature dimension.
pub fn build_model(cfg: &RunConfig, dim: usize) -> Result<Box<dyn OnlineModel>> {
    cfg.validate()?;
    Ok(match cfg.model {
        ModelKind::Bypass => Box::new(BypassModel {
            filter: BypassFilter::new(dim, cfg.hyper, cfg.beta0, cfg.govi)?,
        }),
        ModelKind::AdaBypass => Box::new(AdaBypassModel {
            filter: AdaBypassFilter::new(dim, cfg.hyper, cfg.beta0, cfg.govi)?,
        }),
        ModelKind::Skf => Box::new(SkfModel {
            state: SkfState::default_start(
                dim,
                cfg.skf.r0,
                cfg.skf.q0,
                cfg.skf.cov0,
                cfg.skf.forgetting,
            )?,
            r_floor: cfg.skf.r_floor,
        }),
        ModelKind::Pa1 => Box::new(Pa1Model {
            state: PaRegressorState::new(dim, cfg.pa.c, cfg.pa.epsilon)?,
        }),
    })
}

/// One output row of the filtering loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRow {
    pub index: f64,
    pub y: Option<f64>,
    pub m_hat: f64,
    pub v_hat: Option<f64>,
    pub alpha_mean: f64,
    pub beta_mean: f64,
    pub mu_mean: f64,
    pub a: f64,
    pub b: f64,
    pub epsilon: f64,
    pub fp_iters: usize,
}

pub const STEP_ROW_HEADER: &str =
    "t,y,m_hat,v_hat,alpha_mean,beta_mean,mu_mean,a,b,epsilon,fp_iters";

impl StepRow {
    pub fn to_csv_line(&self) -> String {
        let y = self.y.map(|v| v.to_string()).unwrap_or_default();
        let v_hat = self.v_hat.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.index,
            y,
            self.m_hat,
            v_hat,
            self.alpha_mean,
            self.beta_mean,
            self.mu_mean,
            self.a,
            self.b,
            self.epsilon,
            self.fp_iters
        )
    }
}

/// The full result of filtering one series.
pub struct RunOutput {
    pub rows: Vec<StepRow>,
    pub metrics: ForecastMetrics,
    /// The model in its end-of-stream state, for multi-step forecasting.
    pub model: Box<dyn OnlineModel>,
    /// Lag value that would feed the next step.
    pub next_lag: f64,
}

/// Filter one series start to finish under the AR(1) design.
///
/// Missing targets advance the filter without a measurement update; a
/// missing lag feature is replaced by the previous step's predictive mean.
pub fn run_series(cfg: &RunConfig, records: &[SeriesRecord]) -> Result<RunOutput> {
    let steps = ar1_design(records)?;
    let mut model = build_model(cfg, 2)?;
    let mut metrics = ForecastMetrics::new();
    let mut rows = Vec::with_capacity(steps.len());
    let mut next_lag = records[0].value.expect("ar1_design guarantees a seed lag");

    for (i, step) in steps.iter().enumerate() {
        let lag = step.lag.unwrap_or(next_lag);
        let x = DVector::from_vec(vec![1.0, lag]);
        let (forecast, fp_iters) = match step.target {
            Some(y) => {
                let s = model.step(&x, y).map_err(|e| e.at_step(i + 1))?;
                match s.forecast.variance {
                    Some(v) => metrics.score_step(
                        &PredictiveDist {
                            mean: s.forecast.mean,
                            variance: v,
                        },
                        y,
                    ),
                    None => metrics.score_point(s.forecast.mean, y),
                }
                (s.forecast, s.fp_iters)
            }
            None => {
                let f = model.step_missing(&x).map_err(|e| e.at_step(i + 1))?;
                (f, 0)
            }
        };
        let p = model.params();
        rows.push(StepRow {
            index: step.index,
            y: step.target,
            m_hat: forecast.mean,
            v_hat: forecast.variance,
            alpha_mean: p.alpha_mean,
            beta_mean: p.beta_mean,
            mu_mean: p.mu_mean,
            a: p.a,
            b: p.b,
            epsilon: p.epsilon,
            fp_iters,
        });
        next_lag = step.target.unwrap_or(forecast.mean);
    }

    Ok(RunOutput {
        rows,
        metrics,
        model,
        next_lag,
    })
}

/// Iterated multi-step forecast: each horizon plugs the previous predicted
/// mean in as the lag feature and reports that step's one-step predictive
/// variance. The filter state is never updated, so horizon-h variance is a
/// lower bound on the true h-step uncertainty.
pub fn multi_step_forecast(
    model: &dyn OnlineModel,
    last_lag: f64,
    horizon: usize,
) -> Result<Vec<Forecast>> {
    if model.dim() != 2 {
        return Err(Error::domain(
            "multi_step_forecast",
            format!("needs the AR(1) design (dim 2), got dim {}", model.dim()),
        ));
    }
    if horizon == 0 {
        return Err(Error::domain("multi_step_forecast", "horizon must be >= 1"));
    }
    let mut out = Vec::with_capacity(horizon);
    let mut lag = last_lag;
    for _ in 0..horizon {
        let f = model.forecast(&DVector::from_vec(vec![1.0, lag]))?;
        lag = f.mean;
        out.push(f);
    }
    Ok(out)
}

/// One batch job: a config and the series it should filter.
pub type RunJob = (RunConfig, Vec<SeriesRecord>);

/// Filter independent streams sequentially.
pub fn run_many_sequential(jobs: &[RunJob]) -> Vec<Result<RunOutput>> {
    jobs.iter().map(|(cfg, recs)| run_series(cfg, recs)).collect()
}

/// Filter independent streams, in parallel when the `parallel` feature is
/// enabled. Each stream itself stays strictly sequential.
#[cfg(feature = "parallel")]
pub fn run_many(jobs: &[RunJob]) -> Vec<Result<RunOutput>> {
    jobs.par_iter().map(|(cfg, recs)| run_series(cfg, recs)).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn run_many(jobs: &[RunJob]) -> Vec<Result<RunOutput>> {
    run_many_sequential(jobs)
}
