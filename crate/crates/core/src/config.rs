//! Run configuration from `key = value` text and command-line overrides.
//!
//! Keys use the long flag names of the command-line tool, e.g.
//! `lambda = 0.05` or `stripe-model = fc`. Blank lines and lines starting
//! with `#` are ignored. Later assignments replace earlier ones, so flags
//! applied after a file override it.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::regularizers::RegularizerKind;
use crate::sim::{Case, STRIPE_RANGES};
use crate::solver::DEFAULT_BALANCE;
use crate::stripe::StripeModelKind;

/// Radius of the fidelity ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Epsilon {
    Value(f64),
    /// `‖N‖_F` of the known noise cube.
    Oracle,
}

impl FromStr for Epsilon {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("oracle") {
            return Ok(Epsilon::Oracle);
        }
        let v: f64 = parse_num("epsilon", s)?;
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::config(format!("epsilon {v} must be finite and >= 0")));
        }
        Ok(Epsilon::Value(v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Observation cube. Without it the observation is synthesized from
    /// `truth`, `case` and `stripe_range`.
    pub input: Option<PathBuf>,
    /// Noise cube used by `epsilon = oracle` with a file input.
    pub noise: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    /// Default location for every output not given explicitly.
    pub out_dir: Option<PathBuf>,
    pub output_u: Option<PathBuf>,
    pub output_s: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub metrics: Option<PathBuf>,

    pub reg: RegularizerKind,
    pub reg_weight: f64,
    pub stripe_model: StripeModelKind,
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    /// `None` enables temporal flatness exactly for case (ii) instances.
    pub temporal_flatness: Option<bool>,
    /// `None` means the oracle when the noise is known.
    pub epsilon: Option<Epsilon>,
    pub tol: f64,
    pub max_iters: usize,
    pub trace_every: usize,
    pub balance: f64,
    pub rotate: bool,
    pub seed: u64,

    pub case: Option<Case>,
    pub stripe_range: Option<f64>,
    pub stripe_fraction: f64,
    pub dataset: Option<String>,
    /// Write measured runtimes; when off, `runtime_s` is written as 0 so
    /// repeated runs give identical files.
    pub timing: bool,

    pub models: Vec<StripeModelKind>,
    pub regs: Vec<RegularizerKind>,
    pub ranges: Vec<f64>,
    pub cases: Vec<Case>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            noise: None,
            truth: None,
            out_dir: None,
            output_u: None,
            output_s: None,
            trace: None,
            metrics: None,
            reg: RegularizerKind::Htv,
            reg_weight: 1.0,
            stripe_model: StripeModelKind::Fc,
            lambda: None,
            mu: None,
            temporal_flatness: None,
            epsilon: None,
            tol: 1e-4,
            max_iters: 50_000,
            trace_every: 1,
            balance: DEFAULT_BALANCE,
            rotate: false,
            seed: 0,
            case: None,
            stripe_range: None,
            stripe_fraction: 1.0,
            dataset: None,
            timing: true,
            models: StripeModelKind::ALL.to_vec(),
            regs: RegularizerKind::ALL.to_vec(),
            ranges: STRIPE_RANGES.to_vec(),
            cases: vec![Case::I],
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(format!("{key}: cannot parse '{}'", value.trim())))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        other => Err(Error::config(format!("{key}: expected a boolean, got '{other}'"))),
    }
}

fn parse_list<T>(key: &str, value: &str, item: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(item)
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::config(format!("{key}: empty list")));
    }
    Ok(items)
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::config(format!("{key} = {v} must be finite and > 0")))
    }
}

fn non_negative(key: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(Error::config(format!("{key} = {v} must be finite and >= 0")))
    }
}

impl RunConfig {
    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('_', "-");
        let path = || Some(PathBuf::from(value.trim()));
        match key.as_str() {
            "input" => self.input = path(),
            "noise" => self.noise = path(),
            "truth" => self.truth = path(),
            "out-dir" => self.out_dir = path(),
            "output-u" => self.output_u = path(),
            "output-s" => self.output_s = path(),
            "trace" => self.trace = path(),
            "metrics" => self.metrics = path(),
            "reg" => self.reg = value.parse()?,
            "reg-weight" => self.reg_weight = non_negative("reg-weight", parse_num(&key, value)?)?,
            "stripe-model" => self.stripe_model = value.parse()?,
            "lambda" => self.lambda = Some(non_negative("lambda", parse_num(&key, value)?)?),
            "mu" => self.mu = Some(non_negative("mu", parse_num(&key, value)?)?),
            "temporal-flatness" => self.temporal_flatness = Some(parse_bool(&key, value)?),
            "epsilon" => self.epsilon = Some(value.parse()?),
            "tol" => self.tol = positive("tol", parse_num(&key, value)?)?,
            "max-iters" => {
                self.max_iters = parse_num(&key, value)?;
                if self.max_iters == 0 {
                    return Err(Error::config("max-iters must be positive"));
                }
            }
            "trace-every" => {
                self.trace_every = parse_num(&key, value)?;
                if self.trace_every == 0 {
                    return Err(Error::config("trace-every must be positive"));
                }
            }
            "balance" => self.balance = positive("balance", parse_num(&key, value)?)?,
            "rotate" => self.rotate = parse_bool(&key, value)?,
            "seed" => self.seed = parse_num(&key, value)?,
            "case" => self.case = Some(value.parse()?),
            "stripe-range" => self.stripe_range = Some(positive("stripe-range", parse_num(&key, value)?)?),
            "stripe-fraction" => {
                let f: f64 = parse_num(&key, value)?;
                if !(f > 0.0 && f <= 1.0) {
                    return Err(Error::config(format!("stripe-fraction {f} must be in (0, 1]")));
                }
                self.stripe_fraction = f;
            }
            "dataset" => self.dataset = Some(value.trim().to_string()),
            "timing" => self.timing = parse_bool(&key, value)?,
            "models" => self.models = parse_list(&key, value, str::parse)?,
            "regs" => self.regs = parse_list(&key, value, str::parse)?,
            "ranges" => {
                self.ranges = parse_list(&key, value, |s| positive("ranges", parse_num("ranges", s)?))?
            }
            "cases" => self.cases = parse_list(&key, value, str::parse)?,
            other => return Err(Error::config(format!("unknown configuration key '{other}'"))),
        }
        Ok(())
    }

    /// Applies every assignment in `text`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected key = value", n + 1)))?;
            self.set(key, value)
                .map_err(|e| Error::config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    /// `explicit`, else `file` inside `out_dir`, else nothing.
    pub fn output_path(&self, explicit: &Option<PathBuf>, file: &str) -> Option<PathBuf> {
        explicit
            .clone()
            .or_else(|| self.out_dir.as_ref().map(|d| d.join(file)))
    }

    pub fn require_lambda(&self) -> Result<f64> {
        self.lambda
            .ok_or_else(|| Error::config("lambda is required (no default)"))
    }

    /// `mu` for models that use it, 0 otherwise.
    pub fn mu_for(&self, model: StripeModelKind) -> Result<f64> {
        match (model.uses_mu(), self.mu) {
            (true, Some(mu)) => Ok(mu),
            (true, None) => Err(Error::config(format!("mu is required for stripe model {model}"))),
            (false, _) => Ok(0.0),
        }
    }

    pub fn temporal_for(&self, case: Option<Case>) -> bool {
        self.temporal_flatness.unwrap_or(case == Some(Case::II))
    }
}
