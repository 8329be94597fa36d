//! `bypass`: stream filters, evaluation, and backtests over CSV series.
//!
//! Exit codes: 0 on success, 1 on data errors, 2 on config errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bypass_core::backtest::pairs_backtest;
use bypass_core::config::RunConfig;
use bypass_core::error::{Error, Result};
use bypass_core::run::{build_model, multi_step_forecast, run_series, RunOutput, STEP_ROW_HEADER};
use bypass_core::series::{read_series_csv, standardize, write_series_csv, SeriesRecord};
use bypass_core::synth::{
    synth_changepoint, synth_cointegrated_pair, synth_ilf_changepoint, NoisySegment, PairConfig,
    Segment,
};

#[derive(Parser)]
#[command(name = "bypass", version, about = "Online passive-aggressive regression filters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Filter a series and write per-step predictions as CSV.
    Filter(FilterArgs),
    /// Filter a series and report forecast metrics as JSON.
    Evaluate(EvaluateArgs),
    /// Run the pairs-trading backtest on two price series.
    Backtest(BacktestArgs),
    /// Generate a seeded synthetic series or price pair.
    Synth(SynthArgs),
}

#[derive(Args)]
struct ModelOpts {
    /// Model: bypass, ada-bypass, skf, or pa1.
    #[arg(long)]
    model: Option<String>,
    /// JSON config file; CLI flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for any randomised component.
    #[arg(long)]
    seed: Option<u64>,
    /// Z-score the series before filtering.
    #[arg(long)]
    standardize: bool,
}

#[derive(Args)]
struct FilterArgs {
    #[command(flatten)]
    model: ModelOpts,
    /// Input series CSV (columns: index, value; empty value = missing).
    #[arg(long)]
    input: PathBuf,
    /// Output predictions CSV.
    #[arg(long)]
    output: PathBuf,
    /// Multi-step forecast horizon appended after the stream ends.
    #[arg(long)]
    horizon: Option<usize>,
    /// Where to write the multi-step forecasts (columns: h, m_hat, v_hat).
    #[arg(long)]
    forecast_out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    model: ModelOpts,
    #[arg(long)]
    input: PathBuf,
    /// Optional per-step predictions CSV.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Metrics JSON destination; stdout when omitted.
    #[arg(long)]
    metrics_out: Option<PathBuf>,
}

#[derive(Args)]
struct BacktestArgs {
    #[command(flatten)]
    model: ModelOpts,
    /// Price CSV of the driver leg.
    #[arg(long)]
    x: PathBuf,
    /// Price CSV of the dependent leg.
    #[arg(long)]
    y: PathBuf,
    /// Optional equity-curve CSV.
    #[arg(long)]
    equity_out: Option<PathBuf>,
    /// Metrics JSON destination; stdout when omitted.
    #[arg(long)]
    metrics_out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Generator kind: changepoint or pair.
    #[arg(long, default_value = "changepoint")]
    kind: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Changepoint segments as `len:w0,w1:sd` separated by `;`.
    #[arg(long, default_value = "300:0.5,0.5:0.1;300:2.0,-0.3:0.1")]
    segments: String,
    /// Seed value of the generated series.
    #[arg(long, default_value_t = 0.0)]
    y0: f64,
    /// Output CSV for the changepoint kind.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Pair length.
    #[arg(long, default_value_t = 2000)]
    n: usize,
    /// Output CSVs for the pair kind.
    #[arg(long)]
    output_x: Option<PathBuf>,
    #[arg(long)]
    output_y: Option<PathBuf>,
    /// Spread noise of the pair generator.
    #[arg(long)]
    spread_sd: Option<f64>,
    /// Hedge-ratio drift amplitude of the pair generator.
    #[arg(long)]
    hedge_drift_amp: Option<f64>,
    /// Insensitivity width of the ilf-changepoint noise core.
    #[arg(long, default_value_t = 1.25)]
    ilf_eps: f64,
    /// Spike contamination probability of the ilf-changepoint kind.
    #[arg(long, default_value_t = 0.0)]
    spike_prob: f64,
    /// Spike magnitude range, in noise-scale units.
    #[arg(long, default_value_t = 6.0)]
    spike_min: f64,
    #[arg(long, default_value_t = 14.0)]
    spike_max: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_data_error() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Filter(args) => cmd_filter(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Backtest(args) => cmd_backtest(args),
        Command::Synth(args) => cmd_synth(args),
    }
}

/// Load the JSON config (if any) and fold the CLI overrides in.
fn resolve_config(opts: &ModelOpts) -> Result<RunConfig> {
    let mut cfg = match &opts.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config {
                    field: "config",
                    msg: format!("cannot read {}: {e}", path.display()),
                })?;
            RunConfig::from_json_str(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(model) = &opts.model {
        cfg.model = model.parse()?;
    }
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if opts.standardize {
        cfg.standardize = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_series(path: &Path, cfg: &RunConfig) -> Result<Vec<SeriesRecord>> {
    let mut records = read_series_csv(path)?;
    if cfg.standardize {
        standardize(&mut records)?;
    }
    Ok(records)
}

fn write_rows(path: &Path, out: &RunOutput) -> Result<()> {
    use std::io::Write;
    let mut file = std::fs::File::create(path)?;
    writeln!(file, "{STEP_ROW_HEADER}")?;
    for row in &out.rows {
        writeln!(file, "{}", row.to_csv_line())?;
    }
    Ok(())
}

fn cmd_filter(args: FilterArgs) -> Result<()> {
    let cfg = resolve_config(&args.model)?;
    let records = load_series(&args.input, &cfg)?;
    let out = run_series(&cfg, &records)?;
    write_rows(&args.output, &out)?;

    let horizon = args.horizon.unwrap_or(cfg.horizon);
    if let Some(fpath) = &args.forecast_out {
        use std::io::Write;
        let forecasts = multi_step_forecast(out.model.as_ref(), out.next_lag, horizon)?;
        let mut file = std::fs::File::create(fpath)?;
        writeln!(file, "h,m_hat,v_hat")?;
        for (h, f) in forecasts.iter().enumerate() {
            let v = f.variance.map(|v| v.to_string()).unwrap_or_default();
            writeln!(file, "{},{},{}", h + 1, f.mean, v)?;
        }
    }
    Ok(())
}

fn emit_json(value: &serde_json::Value, dest: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("metrics are valid JSON");
    match dest {
        Some(path) => {
            std::fs::write(path, text + "\n")?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let cfg = resolve_config(&args.model)?;
    let records = load_series(&args.input, &cfg)?;
    let out = run_series(&cfg, &records)?;
    if let Some(path) = &args.output {
        write_rows(path, &out)?;
    }
    emit_json(&out.metrics.to_json(), args.metrics_out.as_deref())
}

fn read_price_column(path: &Path) -> Result<Vec<f64>> {
    let records = read_series_csv(path)?;
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.value.ok_or_else(|| {
                Error::data(Some(i + 2), "price series cannot have missing values")
            })
        })
        .collect()
}

fn cmd_backtest(args: BacktestArgs) -> Result<()> {
    let mut opts = args.model;
    if opts.model.is_none() {
        opts.model = Some("ada-bypass".to_string());
    }
    let cfg = resolve_config(&opts)?;
    let xs = read_price_column(&args.x)?;
    let ys = read_price_column(&args.y)?;
    let mut model = build_model(&cfg, 1)?;
    let metrics = pairs_backtest(&xs, &ys, model.as_mut(), &cfg.trade)?;

    if let Some(path) = &args.equity_out {
        let records: Vec<SeriesRecord> = metrics
            .equity_curve
            .iter()
            .enumerate()
            .map(|(i, &e)| SeriesRecord {
                index: i as f64,
                value: Some(e),
            })
            .collect();
        write_series_csv(path, &records)?;
    }
    emit_json(&metrics.to_json(), args.metrics_out.as_deref())
}

fn parse_segments(spec: &str) -> Result<Vec<Segment>> {
    let mut out = Vec::new();
    for (i, part) in spec.split(';').enumerate() {
        let fields: Vec<&str> = part.split(':').collect();
        if fields.len() != 3 {
            return Err(Error::config(
                "segments",
                format!("segment {i} must be len:w0,w1:sd, got `{part}`"),
            ));
        }
        let len: usize = fields[0]
            .trim()
            .parse()
            .map_err(|_| Error::config("segments", format!("bad length `{}`", fields[0])))?;
        let weights: Vec<f64> = fields[1]
            .split(',')
            .map(|w| {
                w.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::config("segments", format!("bad weight `{w}`")))
            })
            .collect::<Result<_>>()?;
        if weights.len() != 2 {
            return Err(Error::config(
                "segments",
                format!("segment {i} needs exactly 2 weights, got {}", weights.len()),
            ));
        }
        let sd: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| Error::config("segments", format!("bad noise sd `{}`", fields[2])))?;
        out.push(Segment {
            len,
            weights: [weights[0], weights[1]],
            noise_sd: sd,
        });
    }
    Ok(out)
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    match args.kind.as_str() {
        "changepoint" => {
            let output = args.output.ok_or_else(|| {
                Error::config("output", "required for --kind changepoint")
            })?;
            let segments = parse_segments(&args.segments)?;
            let ys = synth_changepoint(args.seed, args.y0, &segments)?;
            let records: Vec<SeriesRecord> = ys
                .iter()
                .enumerate()
                .map(|(i, &y)| SeriesRecord {
                    index: i as f64,
                    value: Some(y),
                })
                .collect();
            write_series_csv(&output, &records)
        }
        "ilf-changepoint" => {
            let output = args.output.ok_or_else(|| {
                Error::config("output", "required for --kind ilf-changepoint")
            })?;
            let segments: Vec<NoisySegment> = parse_segments(&args.segments)?
                .into_iter()
                .map(|s| NoisySegment {
                    len: s.len,
                    weights: s.weights,
                    eps: args.ilf_eps,
                    noise_scale: s.noise_sd,
                })
                .collect();
            let ys = synth_ilf_changepoint(
                args.seed,
                args.y0,
                &segments,
                args.spike_prob,
                args.spike_min,
                args.spike_max,
            )?;
            let records: Vec<SeriesRecord> = ys
                .iter()
                .enumerate()
                .map(|(i, &y)| SeriesRecord {
                    index: i as f64,
                    value: Some(y),
                })
                .collect();
            write_series_csv(&output, &records)
        }
        "pair" => {
            let (out_x, out_y) = match (args.output_x, args.output_y) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    return Err(Error::config(
                        "output-x/output-y",
                        "both required for --kind pair",
                    ))
                }
            };
            let mut pair_cfg = PairConfig {
                n: args.n,
                ..PairConfig::default()
            };
            if let Some(sd) = args.spread_sd {
                pair_cfg.spread_sd = sd;
            }
            if let Some(amp) = args.hedge_drift_amp {
                pair_cfg.hedge_drift_amp = amp;
            }
            let (xs, ys) = synth_cointegrated_pair(args.seed, &pair_cfg)?;
            let to_records = |vals: &[f64]| -> Vec<SeriesRecord> {
                vals.iter()
                    .enumerate()
                    .map(|(i, &v)| SeriesRecord {
                        index: i as f64,
                        value: Some(v),
                    })
                    .collect()
            };
            write_series_csv(&out_x, &to_records(&xs))?;
            write_series_csv(&out_y, &to_records(&ys))
        }
        other => Err(Error::config(
            "kind",
            format!("unknown generator `{other}` (expected changepoint or pair)"),
        )),
    }
}
