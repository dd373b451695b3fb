//! Seeded, parallel Monte Carlo replication over a configuration grid.

use crate::config::{ExperimentConfig, Scale, TheoreticalVariance};
use crate::error::{Error, Result};
use crate::registry::BuiltinModel;
use crate::store::SharedXiStore;
use rayon::prelude::*;
use slowfast_core::drift::{estimate_mce, estimate_tfe, mce_variance, tfe_variance, tfe_variance_limit, XiConfig};
use slowfast_core::fbm::{theoretical_sd_h1, theoretical_sd_h2};
use slowfast_core::hurst::{estimate_h1, estimate_h2};
use slowfast_core::seed::replication_seed;
use slowfast_core::sim::{SimPath, Simulator};
use slowfast_core::stats::Summary;
use slowfast_core::{HurstIndex, ObservationSeries, SimConfig};
use std::fmt;

/// A cell fails when more than this fraction of its replications fail.
pub const FAILURE_THRESHOLD: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    H1,
    H2,
    Tfe,
    Mce,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::H1 => "h1",
            Estimator::H2 => "h2",
            Estimator::Tfe => "tfe",
            Estimator::Mce => "mce",
        }
    }
}

/// One scalar output: an estimator and, for drift estimators, a component of `θ̂`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Column {
    pub estimator: Estimator,
    pub component: usize,
    /// Number of components the estimator produces.
    pub width: usize,
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.width == 1 {
            f.write_str(self.estimator.name())
        } else {
            write!(f, "{}_{}", self.estimator.name(), self.component + 1)
        }
    }
}

pub fn columns(cfg: &ExperimentConfig) -> Vec<Column> {
    let p = cfg.theta0.len();
    let e = &cfg.estimators;
    let mut out = Vec::new();
    let mut push = |estimator, width| {
        for component in 0..width {
            out.push(Column { estimator, component, width });
        }
    };
    if e.h1.is_some() {
        push(Estimator::H1, 1);
    }
    if e.h2.is_some() {
        push(Estimator::H2, 1);
    }
    if e.tfe.is_some() {
        push(Estimator::Tfe, p);
    }
    if e.mce.is_some() {
        push(Estimator::Mce, p);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub rep: u32,
    pub seed: u64,
    /// One entry per column; `None` where that estimator failed.
    pub values: Vec<Option<f64>>,
    /// Error messages, `estimator: message`, joined by `"; "`.
    pub error: Option<String>,
}

impl Replication {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSummary {
    pub column: Column,
    /// `None` if no replication produced a value.
    pub summary: Option<Summary>,
    pub theoretical_sd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub index: usize,
    pub epsilon: f64,
    pub eta: f64,
    pub n: usize,
    pub replications: Vec<Replication>,
    pub summaries: Vec<ColumnSummary>,
    pub failures: usize,
    pub passed: bool,
}

impl CellResult {
    /// Directory name under the output root.
    pub fn label(&self) -> String {
        format!("cell{:03}_eps{}_eta{}_n{}", self.index, self.epsilon, self.eta, self.n)
    }

    pub fn summary(&self, column: &str) -> Option<&ColumnSummary> {
        self.summaries.iter().find(|s| s.column.to_string() == column)
    }

    /// Successful values of one column in replication order.
    pub fn values(&self, column: &str) -> Vec<f64> {
        match self.summaries.iter().position(|s| s.column.to_string() == column) {
            Some(j) => self.replications.iter().filter_map(|r| r.values[j]).collect(),
            None => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub columns: Vec<Column>,
    pub cells: Vec<CellResult>,
    pub warnings: Vec<String>,
}

impl ExperimentResult {
    pub fn all_passed(&self) -> bool {
        self.cells.iter().all(|c| c.passed)
    }

    /// Bit patterns of every stored number, in a fixed order. Two runs are
    /// bit-identical iff their fingerprints are equal (`NaN`s included).
    pub fn fingerprint(&self) -> Vec<u64> {
        let mut out = Vec::new();
        let opt = |v: Option<f64>| v.map_or(u64::MAX, f64::to_bits);
        for cell in &self.cells {
            out.extend([cell.index as u64, cell.failures as u64, cell.passed as u64]);
            for r in &cell.replications {
                out.extend([r.rep as u64, r.seed, r.error.is_some() as u64]);
                out.extend(r.values.iter().map(|v| opt(*v)));
            }
            for s in &cell.summaries {
                if let Some(sm) = s.summary {
                    out.extend([sm.count as u64, sm.mean.to_bits(), sm.sd.to_bits(), sm.standard_error.to_bits()]);
                }
                out.push(opt(s.theoretical_sd));
            }
        }
        out
    }
}

/// Summaries from stored replications; the same function serves fresh runs
/// and re-summarization of `raw.csv`.
pub fn summarize(columns: usize, replications: &[Replication]) -> Vec<Option<Summary>> {
    (0..columns)
        .map(|j| {
            let values: Vec<f64> = replications.iter().filter_map(|r| r.values[j]).collect();
            Summary::of(&values)
        })
        .collect()
}

pub fn cell_passed(failures: usize, replications: usize) -> bool {
    failures as f64 <= FAILURE_THRESHOLD * replications as f64
}

/// Shared per-experiment state.
struct Context<'a> {
    cfg: &'a ExperimentConfig,
    model: &'a BuiltinModel,
    hurst: HurstIndex,
    mce_hurst: Option<HurstIndex>,
    columns: &'a [Column],
    store: SharedXiStore,
}

struct Cell<'a> {
    index: usize,
    scale: Scale,
    n: usize,
    sim: Simulator<'a, dyn slowfast_core::SlowFastModel + 'a>,
}

/// Runs every cell. Results are bit-identical for any `threads`, including
/// `None` (the global pool).
pub fn run_experiment(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<ExperimentResult> {
    cfg.validate()?;
    match threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::ThreadPool(e.to_string()))?;
            pool.install(|| run_validated(cfg))
        }
        None => run_validated(cfg),
    }
}

fn run_validated(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let model = cfg.build_model()?;
    let columns = columns(cfg);
    let ctx = Context {
        cfg,
        model: &model,
        hurst: cfg.hurst_index()?,
        mce_hurst: cfg.mce_hurst()?,
        columns: &columns,
        store: SharedXiStore::default(),
    };
    let cells = cfg
        .cells()
        .into_iter()
        .enumerate()
        .map(|(index, (scale, n))| {
            let sim_cfg = SimConfig {
                epsilon: scale.epsilon,
                eta: scale.eta,
                horizon: cfg.horizon,
                fine_steps: cfg.fine_steps,
                seed: cfg.seed,
            };
            let sim = Simulator::new(model.model(), ctx.hurst, &sim_cfg)?;
            Ok(Cell { index, scale, n, sim })
        })
        .collect::<Result<Vec<_>>>()?;

    let reps = cfg.replications;
    let tasks: Vec<(usize, u32)> = (0..cells.len()).flat_map(|c| (0..reps as u32).map(move |r| (c, r))).collect();
    let mut outcomes: Vec<Replication> =
        tasks.par_iter().map(|&(c, r)| run_replication(&ctx, &cells[c], r)).collect();

    let mut results = Vec::with_capacity(cells.len());
    for cell in cells.iter().rev() {
        let replications = outcomes.split_off(cell.index * reps);
        let failures = replications.iter().filter(|r| r.failed()).count();
        let summaries = summarize(columns.len(), &replications)
            .into_iter()
            .zip(&columns)
            .map(|(summary, &column)| {
                Ok(ColumnSummary { column, summary, theoretical_sd: theoretical_sd(&ctx, cell, column)? })
            })
            .collect::<Result<Vec<_>>>()?;
        results.push(CellResult {
            index: cell.index,
            epsilon: cell.scale.epsilon,
            eta: cell.scale.eta,
            n: cell.n,
            replications,
            summaries,
            failures,
            passed: cell_passed(failures, reps),
        });
    }
    results.reverse();
    Ok(ExperimentResult { config: cfg.clone(), columns, cells: results, warnings: cfg.warnings() })
}

fn run_replication(ctx: &Context<'_>, cell: &Cell<'_>, rep: u32) -> Replication {
    let seed = replication_seed(ctx.cfg.seed, cell.index as u32, rep);
    let mut values = vec![None; ctx.columns.len()];
    let mut errors = Vec::new();
    let obs = cell.sim.run(&ctx.cfg.theta0, seed).and_then(|p: SimPath| p.subsample(cell.n));
    match obs {
        Err(e) => errors.push(format!("simulation: {e}")),
        Ok(obs) => {
            let mut j = 0;
            while j < ctx.columns.len() {
                let col = ctx.columns[j];
                match estimate(ctx, cell, col.estimator, &obs) {
                    Ok(point) => {
                        for (k, v) in point.into_iter().enumerate() {
                            values[j + k] = Some(v);
                        }
                    }
                    Err(e) => errors.push(format!("{}: {e}", col.estimator.name())),
                }
                j += col.width;
            }
        }
    }
    let error = if errors.is_empty() { None } else { Some(errors.join("; ")) };
    Replication { rep, seed, values, error }
}

fn estimate(ctx: &Context<'_>, cell: &Cell<'_>, est: Estimator, obs: &ObservationSeries) -> Result<Vec<f64>> {
    let cfg = ctx.cfg;
    let point = match est {
        Estimator::H1 => vec![estimate_h1(obs, cell.scale.epsilon, ctx.model.sigma_bar())?.point],
        Estimator::H2 => vec![estimate_h2(obs, Some(ctx.model.sigma_bar()))?.point],
        Estimator::Tfe => {
            let opts = cfg.tfe_options().expect("tfe column implies tfe options");
            estimate_tfe(ctx.model.require_averaged()?, obs, ctx.model.param_box(), &opts)?.point
        }
        Estimator::Mce => {
            let opts = cfg.mce_options().expect("mce column implies mce options");
            let h = ctx.mce_hurst.expect("mce column implies mce hurst");
            estimate_mce(ctx.model.require_averaged()?, obs, h, ctx.model.param_box(), &opts, &ctx.store)?.point
        }
    };
    Ok(point)
}

fn theoretical_sd(ctx: &Context<'_>, cell: &Cell<'_>, col: Column) -> Result<Option<f64>> {
    let cfg = ctx.cfg;
    let (eps, n, t) = (cell.scale.epsilon, cell.n, cfg.horizon);
    let sb = ctx.model.sigma_bar();
    let sd = match col.estimator {
        Estimator::H1 => theoretical_sd_h1(n, t, ctx.hurst, sb).ok(),
        Estimator::H2 => theoretical_sd_h2(n, ctx.hurst, sb).ok(),
        Estimator::Tfe => {
            let spec = cfg.estimators.tfe.expect("tfe column implies tfe spec");
            let avg = ctx.model.require_averaged()?;
            let xi = XiConfig { cells: spec.variance_cells, lambda: spec.lambda };
            let m = match spec.variance {
                TheoreticalVariance::Limit => tfe_variance_limit(avg, &cfg.theta0, ctx.hurst, t, &xi),
                TheoreticalVariance::Discrete => tfe_variance(avg, &cfg.theta0, ctx.hurst, n, t, &xi),
            };
            m.ok().map(|m| (eps * m[(col.component, col.component)]).sqrt())
        }
        Estimator::Mce => {
            let spec = cfg.estimators.mce.expect("mce column implies mce spec");
            let avg = ctx.model.require_averaged()?;
            let xi = XiConfig { cells: spec.cells, lambda: spec.lambda };
            let h = ctx.mce_hurst.expect("mce column implies mce hurst");
            mce_variance(avg, &cfg.theta0, ctx.hurst, h, n, t, &xi)
                .ok()
                .map(|m| (eps * m[(col.component, col.component)]).sqrt())
        }
    };
    Ok(sd)
}
