//! End-to-end runs: single destriping jobs and comparison grids.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::{Epsilon, RunConfig};
use crate::cube::Cube;
use crate::error::{Error, Result};
use crate::io::{read_cube, write_cube};
use crate::metrics::{mpsnr, mssim, SSIM_WINDOW};
use crate::regularizers::{Regularizer, RegularizerKind};
use crate::sim::{make_case, Case, NoiseSpec};
use crate::solver::{solve, ProblemSpec, SolveResult, TraceRecord, TRACE_CSV_HEADER};
use crate::stripe::{StripeModel, StripeModelKind};

pub const METRICS_CSV_HEADER: &str = "dataset,case,range,model,regularizer,mpsnr,mssim,iters,runtime_s,status";

/// One line of the metrics CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub dataset: String,
    pub case: String,
    pub range: String,
    pub model: String,
    pub regularizer: String,
    pub mpsnr: f64,
    pub mssim: f64,
    pub iters: usize,
    pub runtime_s: f64,
    /// `converged`, `max_iters`, or `error: <message>`.
    pub status: String,
}

impl MetricsRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.dataset,
            self.case,
            self.range,
            self.model,
            self.regularizer,
            self.mpsnr,
            self.mssim,
            self.iters,
            self.runtime_s,
            self.status
        )
    }

    pub fn is_error(&self) -> bool {
        self.status.starts_with("error")
    }
}

/// An observation with whatever ground truth is known about it.
#[derive(Debug, Clone)]
pub struct Observation {
    pub v: Cube,
    pub truth: Option<Cube>,
    pub noise: Option<Cube>,
    pub case: Option<Case>,
    pub range: Option<f64>,
}

impl Observation {
    pub fn eps(&self, requested: Option<Epsilon>) -> Result<f64> {
        match (requested, &self.noise) {
            (Some(Epsilon::Value(e)), _) => Ok(e),
            (Some(Epsilon::Oracle) | None, Some(n)) => Ok(n.fro_norm()),
            (Some(Epsilon::Oracle), None) => Err(Error::config(
                "epsilon = oracle needs a noise cube or a synthesized observation",
            )),
            (None, None) => Err(Error::config("epsilon is required when the noise is unknown")),
        }
    }
}

/// Result of one destriping job, in the observation's orientation.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub result: SolveResult,
    pub eps: f64,
    pub metrics: Option<MetricsRow>,
}

fn noise_spec(cfg: &RunConfig, range: f64) -> NoiseSpec {
    NoiseSpec {
        stripe_column_fraction: cfg.stripe_fraction,
        ..NoiseSpec::new(range, cfg.seed)
    }
}

fn synthesize(truth: &Cube, case: Case, range: f64, cfg: &RunConfig) -> Result<Observation> {
    let deg = make_case(truth, case, &noise_spec(cfg, range))?;
    Ok(Observation {
        v: deg.v,
        truth: Some(truth.clone()),
        noise: Some(deg.noise),
        case: Some(case),
        range: Some(range),
    })
}

fn load_truth(cfg: &RunConfig) -> Result<Option<Cube>> {
    cfg.truth.as_ref().map(read_cube).transpose()
}

/// Reads the observation from `input`, or synthesizes it from `truth`,
/// `case` and `stripe-range`.
pub fn load_observation(cfg: &RunConfig) -> Result<Observation> {
    let truth = load_truth(cfg)?;
    if let Some(input) = &cfg.input {
        let v = read_cube(input)?;
        let noise = cfg.noise.as_ref().map(read_cube).transpose()?;
        for (name, c) in [("truth", &truth), ("noise", &noise)] {
            if let Some(c) = c {
                if c.dims() != v.dims() {
                    return Err(Error::config(format!(
                        "{name} dims {:?} do not match input {:?}",
                        c.dims(),
                        v.dims()
                    )));
                }
            }
        }
        return Ok(Observation {
            v,
            truth,
            noise,
            case: cfg.case,
            range: cfg.stripe_range,
        });
    }
    match (truth, cfg.case, cfg.stripe_range) {
        (Some(t), Some(case), Some(range)) => synthesize(&t, case, range, cfg),
        _ => Err(Error::config(
            "give an input cube, or truth + case + stripe-range to synthesize one",
        )),
    }
}

fn dataset_name(cfg: &RunConfig) -> String {
    if let Some(d) = &cfg.dataset {
        return d.clone();
    }
    cfg.truth
        .as_ref()
        .or(cfg.input.as_ref())
        .and_then(|p| p.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "unnamed".into())
}

/// `(mpsnr, mssim)`; the SSIM is NaN for bands smaller than its window.
pub fn score(u: &Cube, truth: &Cube) -> Result<(f64, f64)> {
    let p = mpsnr(u, truth)?;
    let [n1, n2, _] = u.dims();
    let s = if n1 >= SSIM_WINDOW && n2 >= SSIM_WINDOW {
        mssim(u, truth)?
    } else {
        f64::NAN
    };
    Ok((p, s))
}

/// Solves one problem, rotating the observation first when asked and
/// rotating the components back afterwards.
pub fn destripe(
    cfg: &RunConfig,
    obs: &Observation,
    model: StripeModelKind,
    reg: RegularizerKind,
    temporal: bool,
) -> Result<(SolveResult, f64)> {
    let eps = obs.eps(cfg.epsilon)?;
    let v = if cfg.rotate { obs.v.rotate90() } else { obs.v.clone() };
    let stripe = StripeModel::new(model, cfg.require_lambda()?, cfg.mu_for(model)?, temporal)?;
    let reg = Regularizer::new(reg, v.dims(), cfg.reg_weight)?;
    let mut spec = ProblemSpec::new(v, reg, stripe, eps)
        .with_tol(cfg.tol)
        .with_max_iters(cfg.max_iters)
        .with_balance(cfg.balance);
    spec.trace_every = cfg.trace_every;
    let mut result = solve(&spec)?;
    if cfg.rotate {
        result.u = result.u.rotate90_inv();
        result.s = result.s.rotate90_inv();
    }
    if !cfg.timing {
        result.runtime_s = 0.0;
    }
    Ok((result, eps))
}

fn status(result: &SolveResult) -> String {
    if result.converged { "converged" } else { "max_iters" }.to_string()
}

fn row_labels(cfg: &RunConfig, case: Option<Case>, range: Option<f64>, model: StripeModelKind, reg: RegularizerKind) -> MetricsRow {
    MetricsRow {
        dataset: dataset_name(cfg),
        case: case.map_or_else(|| "-".into(), |c| c.name().to_string()),
        range: range.map_or_else(|| "-".into(), |r| r.to_string()),
        model: model.name().to_string(),
        regularizer: reg.name().to_string(),
        mpsnr: f64::NAN,
        mssim: f64::NAN,
        iters: 0,
        runtime_s: 0.0,
        status: String::new(),
    }
}

fn create(path: &Path) -> Result<fs::File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::File::create(path).map_err(|e| Error::io(path, e))
}

fn write_lines<'a>(path: &Path, header: &str, rows: impl Iterator<Item = String> + 'a) -> Result<()> {
    let mut f = std::io::BufWriter::new(create(path)?);
    let emit = || -> std::io::Result<()> {
        writeln!(f, "{header}")?;
        for r in rows {
            writeln!(f, "{r}")?;
        }
        f.flush()
    };
    emit().map_err(|e| Error::io(path, e))
}

pub fn write_trace(path: impl AsRef<Path>, trace: &[TraceRecord]) -> Result<()> {
    write_lines(path.as_ref(), TRACE_CSV_HEADER, trace.iter().map(TraceRecord::csv_row))
}

pub fn write_metrics(path: impl AsRef<Path>, rows: &[MetricsRow]) -> Result<()> {
    write_lines(path.as_ref(), METRICS_CSV_HEADER, rows.iter().map(MetricsRow::csv_row))
}

fn write_output_cube(path: Option<PathBuf>, c: &Cube) -> Result<()> {
    if let Some(p) = path {
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        write_cube(p, c)?;
    }
    Ok(())
}

/// Runs the configured model and regularizer once and writes `U`, `S`, the
/// trace, and (with a truth cube) the metrics to the configured paths.
pub fn run_destripe(cfg: &RunConfig) -> Result<RunOutcome> {
    let obs = load_observation(cfg)?;
    let temporal = cfg.temporal_for(obs.case);
    let (result, eps) = destripe(cfg, &obs, cfg.stripe_model, cfg.reg, temporal)?;

    write_output_cube(cfg.output_path(&cfg.output_u, "u.cube"), &result.u)?;
    write_output_cube(cfg.output_path(&cfg.output_s, "s.cube"), &result.s)?;
    if let Some(p) = cfg.output_path(&cfg.trace, "trace.csv") {
        write_trace(p, &result.trace)?;
    }

    let metrics = match &obs.truth {
        Some(truth) => {
            let (p, s) = score(&result.u, truth)?;
            let row = MetricsRow {
                mpsnr: p,
                mssim: s,
                iters: result.iterations,
                runtime_s: result.runtime_s,
                status: status(&result),
                ..row_labels(cfg, obs.case, obs.range, cfg.stripe_model, cfg.reg)
            };
            if let Some(path) = cfg.output_path(&cfg.metrics, "metrics.csv") {
                write_metrics(path, std::slice::from_ref(&row))?;
            }
            Some(row)
        }
        None => None,
    };
    Ok(RunOutcome { result, eps, metrics })
}

fn sanitize(msg: &str) -> String {
    msg.replace([',', '\n', '\r'], ";")
}

/// Every `(case, range, model, regularizer)` cell of the configured grid, in
/// row order.
pub fn grid_cells(cfg: &RunConfig) -> Vec<(Case, f64, StripeModelKind, RegularizerKind)> {
    let mut cells = Vec::new();
    for &case in &cfg.cases {
        for &range in &cfg.ranges {
            for &model in &cfg.models {
                for &reg in &cfg.regs {
                    cells.push((case, range, model, reg));
                }
            }
        }
    }
    cells
}

/// Degrades the truth cube for every grid cell, solves, and scores. Cells
/// run in parallel; rows come back and are written in grid order. A failing
/// cell yields a row with an `error` status instead of aborting the grid.
pub fn run_benchmark(cfg: &RunConfig) -> Result<Vec<MetricsRow>> {
    let truth = load_truth(cfg)?.ok_or_else(|| Error::config("benchmark needs a truth cube"))?;
    cfg.require_lambda()?;
    if cfg.models.iter().any(|m| m.uses_mu()) && cfg.mu.is_none() {
        return Err(Error::config("mu is required when the grid includes the tv model"));
    }

    let rows: Vec<MetricsRow> = grid_cells(cfg)
        .into_par_iter()
        .map(|(case, range, model, reg)| {
            let labels = row_labels(cfg, Some(case), Some(range), model, reg);
            let cell = || -> Result<MetricsRow> {
                let obs = synthesize(&truth, case, range, cfg)?;
                let (result, _) = destripe(cfg, &obs, model, reg, cfg.temporal_for(Some(case)))?;
                let (p, s) = score(&result.u, &truth)?;
                Ok(MetricsRow {
                    mpsnr: p,
                    mssim: s,
                    iters: result.iterations,
                    runtime_s: result.runtime_s,
                    status: status(&result),
                    ..labels.clone()
                })
            };
            cell().unwrap_or_else(|e| MetricsRow {
                status: format!("error: {}", sanitize(&e.to_string())),
                ..labels
            })
        })
        .collect();

    if let Some(path) = cfg.output_path(&cfg.metrics, "metrics.csv") {
        write_metrics(path, &rows)?;
    }
    Ok(rows)
}
