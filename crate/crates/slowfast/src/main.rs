use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde_json::{json, Value};
use slowfast::config::ExperimentConfig;
use slowfast::io::{read_observations, write_path};
use slowfast::output::{emit, format_f64, text_report};
use slowfast::{run_experiment, BuiltinModel};
use slowfast_core::drift::{
    estimate_mce, estimate_tfe, mce_variance, tfe_variance, tfe_variance_limit, AsymptoticCovariance, DriftEstimate,
    LocalXiStore, MceOptions, OptimizerDiagnostics, TfeOptions, XiConfig,
};
use slowfast_core::hurst::{estimate_h1, estimate_h2, HurstEstimate, HurstMethod};
use slowfast_core::sim::Simulator;
use slowfast_core::{HurstIndex, ParamBox, SimConfig};
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "slowfast", version, about = "Simulation and inference for slow-fast systems driven by fractional Brownian motion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one trajectory and write it as CSV.
    Simulate(SimulateArgs),
    /// Estimate the Hurst index from an observation CSV.
    EstimateHurst(HurstArgs),
    /// Estimate the drift parameter from an observation CSV.
    EstimateDrift(DriftArgs),
    /// Asymptotic covariances M(n), M̄ and Mᴴ(n) as CSV.
    Variance(VarianceArgs),
    /// Run a Monte Carlo study from a TOML config.
    Experiment(ExperimentArgs),
}

#[derive(clap::Args)]
struct SimulateArgs {
    #[arg(long, default_value = "constant")]
    model: String,
    /// Comma-separated parameter vector.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    theta: Vec<f64>,
    #[arg(long, default_value_t = 0.85)]
    hurst: f64,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    eta: f64,
    #[arg(long = "horizon", visible_alias = "T", default_value_t = 1.0)]
    horizon: f64,
    #[arg(long, default_value_t = 100_000)]
    fine_steps: usize,
    /// Write only the observations `t_k = Tk/n`; must divide `fine-steps`.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the fast component.
    #[arg(long)]
    include_fast: bool,
    /// Output file; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum HurstMethodArg {
    H1,
    H2,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(clap::Args)]
struct HurstArgs {
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, value_enum)]
    method: HurstMethodArg,
    /// Required for h1.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Scalar `σ̄`.
    #[arg(long, default_value_t = 1.0)]
    sigma_bar: f64,
    /// Overrides the horizon read from the time column.
    #[arg(long = "horizon", visible_alias = "T")]
    horizon: Option<f64>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum DriftMethodArg {
    Tfe,
    Mce,
}

#[derive(clap::Args)]
struct DriftArgs {
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, value_enum)]
    method: DriftMethodArg,
    #[arg(long, default_value = "constant")]
    model: String,
    /// `lo:hi` per component, comma-separated, e.g. `0.1:3`.
    #[arg(long)]
    theta_box: Option<String>,
    /// Hurst index used by the MCE contrast and by the reported covariance.
    #[arg(long)]
    hurst: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, default_value_t = slowfast_core::averaging::DEFAULT_CELLS)]
    ode_steps: usize,
    #[arg(long, default_value_t = slowfast_core::averaging::DEFAULT_CELLS)]
    xi_cells: usize,
    /// Scales the reported covariance to `ε·M`.
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(clap::Args)]
struct VarianceArgs {
    #[arg(long, default_value = "constant")]
    model: String,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    theta: Vec<f64>,
    /// True Hurst index.
    #[arg(long, default_value_t = 0.85)]
    hurst: f64,
    /// Hurst index assumed by the MCE; defaults to `--hurst`.
    #[arg(long)]
    hurst_param: Option<f64>,
    #[arg(long)]
    n: usize,
    #[arg(long = "horizon", visible_alias = "T", default_value_t = 1.0)]
    horizon: f64,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, default_value_t = slowfast_core::averaging::DEFAULT_CELLS)]
    cells: usize,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ExperimentArgs {
    #[arg(long, short)]
    config: PathBuf,
    /// Overrides `out_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Use 10⁴ replications and at least 10⁶ fine steps.
    #[arg(long)]
    paper_scale: bool,
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn parse_box(spec: &str) -> Result<ParamBox> {
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for part in spec.split(',') {
        let (lo, hi) = part.split_once(':').with_context(|| format!("'{part}' is not lo:hi"))?;
        lower.push(lo.trim().parse()?);
        upper.push(hi.trim().parse()?);
    }
    Ok(ParamBox::new(lower, upper)?)
}

fn simulate(a: SimulateArgs) -> Result<ExitCode> {
    let model = BuiltinModel::by_name(&a.model, None)?;
    let cfg = SimConfig { epsilon: a.epsilon, eta: a.eta, horizon: a.horizon, fine_steps: a.fine_steps, seed: a.seed };
    if cfg.is_stiff() {
        eprintln!("warning: eta = {} is below 10·dt = {}; the fast process is barely resolved", a.eta, 10.0 * cfg.step());
    }
    let path = Simulator::new(model.model(), HurstIndex::new(a.hurst)?, &cfg)?.run(&a.theta, a.seed)?;
    let stride = match a.n {
        Some(n) if n > 0 && a.fine_steps % n == 0 => a.fine_steps / n,
        Some(n) => bail!("n = {n} does not divide fine-steps = {}", a.fine_steps),
        None => 1,
    };
    let mut w = output(&a.output)?;
    write_path(&mut w, &path, stride, a.include_fast)?;
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn hurst_record(e: &HurstEstimate) -> Value {
    json!({
        "method": match e.method { HurstMethod::H1 => "h1", HurstMethod::H2 => "h2" },
        "estimate": e.point,
        "theoretical_sd": e.theoretical_sd,
        "in_range": e.in_range,
        "clamped": e.clamped,
        "statistic": e.statistic,
    })
}

fn estimate_hurst(a: HurstArgs) -> Result<ExitCode> {
    let file = File::open(&a.input).with_context(|| format!("opening {}", a.input.display()))?;
    let mut obs = read_observations(BufReader::new(file))?;
    if let Some(t) = a.horizon {
        obs = slowfast_core::ObservationSeries::new(t, obs.dim(), obs.values().to_vec())?;
    }
    let sb = DMatrix::from_element(obs.dim(), 1, a.sigma_bar);
    let est = match a.method {
        HurstMethodArg::H1 => {
            let eps = a.epsilon.context("--epsilon is required for h1")?;
            estimate_h1(&obs, eps, &sb)?
        }
        HurstMethodArg::H2 => estimate_h2(&obs, Some(&sb))?,
    };
    let mut out = io::stdout().lock();
    match a.format {
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&hurst_record(&est))?)?,
        Format::Csv => {
            writeln!(out, "method,estimate,theoretical_sd,in_range,clamped,statistic")?;
            writeln!(
                out,
                "{},{},{},{},{},{}",
                if matches!(a.method, HurstMethodArg::H1) { "h1" } else { "h2" },
                format_f64(est.point),
                est.theoretical_sd.map(format_f64).unwrap_or_default(),
                est.in_range,
                est.clamped,
                format_f64(est.statistic)
            )?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn matrix_json(m: &DMatrix<f64>) -> Value {
    json!((0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect::<Vec<_>>()).collect::<Vec<_>>())
}

fn diagnostics_json(d: &OptimizerDiagnostics) -> Value {
    json!({
        "best_start": d.best,
        "iterations": d.iterations(),
        "boundary_hit": d.boundary_hit,
        "starts": d.starts.iter().map(|s| json!({
            "start": s.start,
            "end": s.end,
            "value": s.value,
            "iterations": s.iterations,
            "status": format!("{:?}", s.status),
        })).collect::<Vec<_>>(),
    })
}

fn drift_record(est: &DriftEstimate, cov: Option<&AsymptoticCovariance>, limit: Option<&DMatrix<f64>>) -> Value {
    json!({
        "method": est.method.to_string(),
        "theta": est.point,
        "contrast": est.contrast,
        "covariance": limit.map(matrix_json),
        "scaled_covariance": cov.map(|c| json!({ "epsilon": c.epsilon, "matrix": matrix_json(&c.scaled) })),
        "diagnostics": diagnostics_json(&est.diagnostics),
    })
}

fn estimate_drift(a: DriftArgs) -> Result<ExitCode> {
    let bounds = a.theta_box.as_deref().map(parse_box).transpose()?;
    let model = BuiltinModel::by_name(&a.model, bounds)?;
    let avg = model.require_averaged()?;
    let file = File::open(&a.input).with_context(|| format!("opening {}", a.input.display()))?;
    let obs = read_observations(BufReader::new(file))?;
    let hurst = a.hurst.map(HurstIndex::new).transpose()?;
    let xi = XiConfig { cells: a.xi_cells, lambda: a.lambda };
    let (n, t) = (obs.n(), obs.horizon());
    let est = match a.method {
        DriftMethodArg::Tfe => {
            let opts = TfeOptions { ode_steps: a.ode_steps, ..TfeOptions::default() };
            estimate_tfe(avg, &obs, model.param_box(), &opts)?
        }
        DriftMethodArg::Mce => {
            let h = hurst.context("--hurst is required for mce")?;
            let opts = MceOptions { xi, ..MceOptions::default() };
            estimate_mce(avg, &obs, h, model.param_box(), &opts, &LocalXiStore::new())?
        }
    };
    let limit = match (hurst, a.method) {
        (Some(h), DriftMethodArg::Tfe) => Some(tfe_variance(avg, &est.point, h, n, t, &xi)?),
        (Some(h), DriftMethodArg::Mce) => Some(mce_variance(avg, &est.point, h, h, n, t, &xi)?),
        (None, _) => None,
    };
    let scaled = match (&limit, a.epsilon) {
        (Some(m), Some(eps)) => Some(AsymptoticCovariance::new(m.clone(), eps)),
        _ => None,
    };
    writeln!(io::stdout().lock(), "{}", serde_json::to_string_pretty(&drift_record(&est, scaled.as_ref(), limit.as_ref()))?)?;
    Ok(ExitCode::SUCCESS)
}

fn variance(a: VarianceArgs) -> Result<ExitCode> {
    let model = BuiltinModel::by_name(&a.model, None)?;
    let avg = model.require_averaged()?;
    let h = HurstIndex::new(a.hurst)?;
    let hp = HurstIndex::new(a.hurst_param.unwrap_or(a.hurst))?;
    let xi = XiConfig { cells: a.cells, lambda: a.lambda };
    let matrices = [
        ("M", tfe_variance(avg, &a.theta, h, a.n, a.horizon, &xi)?),
        ("Mbar", tfe_variance_limit(avg, &a.theta, h, a.horizon, &xi)?),
        ("MH", mce_variance(avg, &a.theta, h, hp, a.n, a.horizon, &xi)?),
    ];
    let mut w = csv::Writer::from_writer(output(&a.output)?);
    w.write_record(["matrix", "row", "col", "value"])?;
    for (name, m) in &matrices {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                w.write_record([name.to_string(), i.to_string(), j.to_string(), format_f64(m[(i, j)])])?;
            }
        }
    }
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn experiment(a: ExperimentArgs) -> Result<ExitCode> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if a.paper_scale {
        cfg = cfg.at_paper_scale();
    }
    let out = a.out.or_else(|| cfg.out_dir.clone()).context("no output directory: pass --out or set out_dir")?;
    cfg.validate()?;
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
    let result = run_experiment(&cfg, a.threads)?;
    emit(&result, &out)?;
    write!(io::stdout().lock(), "{}", text_report(&result))?;
    let failed: Vec<String> = result.cells.iter().filter(|c| !c.passed).map(|c| c.label()).collect();
    if failed.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("{} cell(s) exceeded the failure threshold: {}", failed.len(), failed.join(", "));
        Ok(ExitCode::from(2))
    }
}

fn broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        let io = match c.downcast_ref::<slowfast::Error>() {
            Some(slowfast::Error::Csv(csv)) => match csv.kind() {
                csv::ErrorKind::Io(io) => Some(io),
                _ => None,
            },
            _ => c.downcast_ref::<io::Error>(),
        };
        io.is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::EstimateHurst(a) => estimate_hurst(a),
        Command::EstimateDrift(a) => estimate_drift(a),
        Command::Variance(a) => variance(a),
        Command::Experiment(a) => experiment(a),
    };
    match run {
        Ok(code) => code,
        // a closed reader such as `head` is not an error
        Err(e) if broken_pipe(&e) => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
