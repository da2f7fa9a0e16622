use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use destripe_core::config::RunConfig;
use destripe_core::run::{run_benchmark, run_destripe, METRICS_CSV_HEADER};
use destripe_core::{sim, write_cube, Case, Cube, Error, NoiseSpec, Result};

/// Stripe-noise removal for image cubes.
#[derive(Parser)]
#[command(name = "destripe", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Destripe one cube.
    Run(RunArgs),
    /// Score every (model, regularizer, range, case) combination on a truth cube.
    Benchmark(RunArgs),
    /// Write a synthetic truth cube and, optionally, a degraded observation.
    Synth(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    /// key = value configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: Flags,
}

/// Every flag maps to the configuration key of the same name.
#[derive(Args, Default)]
struct Flags {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Noise cube for `--epsilon oracle`.
    #[arg(long)]
    noise: Option<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    output_u: Option<PathBuf>,
    #[arg(long)]
    output_s: Option<PathBuf>,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    metrics: Option<PathBuf>,

    /// htv, sstv, atv, itv or tnn.
    #[arg(long)]
    reg: Option<String>,
    #[arg(long)]
    reg_weight: Option<String>,
    /// fc, s, gs, lr or tv.
    #[arg(long)]
    stripe_model: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<String>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    temporal_flatness: Option<String>,
    /// A radius, or `oracle`.
    #[arg(long, allow_hyphen_values = true)]
    epsilon: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    max_iters: Option<String>,
    #[arg(long)]
    trace_every: Option<String>,
    #[arg(long)]
    balance: Option<String>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    rotate: Option<String>,
    #[arg(long)]
    seed: Option<String>,

    #[arg(long)]
    case: Option<String>,
    #[arg(long)]
    stripe_range: Option<String>,
    #[arg(long)]
    stripe_fraction: Option<String>,
    #[arg(long)]
    dataset: Option<String>,
    /// Write runtimes as 0 so repeated runs produce identical files.
    #[arg(long)]
    no_timing: bool,

    /// Comma-separated grid axes for `benchmark`.
    #[arg(long)]
    models: Option<String>,
    #[arg(long)]
    regs: Option<String>,
    #[arg(long)]
    ranges: Option<String>,
    #[arg(long)]
    cases: Option<String>,
}

impl Flags {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let mut out = Vec::new();
        let mut push = |key: &'static str, v: Option<String>| {
            if let Some(v) = v {
                out.push((key, v));
            }
        };
        push("input", path(&self.input));
        push("noise", path(&self.noise));
        push("truth", path(&self.truth));
        push("out-dir", path(&self.out_dir));
        push("output-u", path(&self.output_u));
        push("output-s", path(&self.output_s));
        push("trace", path(&self.trace));
        push("metrics", path(&self.metrics));
        push("reg", self.reg.clone());
        push("reg-weight", self.reg_weight.clone());
        push("stripe-model", self.stripe_model.clone());
        push("lambda", self.lambda.clone());
        push("mu", self.mu.clone());
        push("temporal-flatness", self.temporal_flatness.clone());
        push("epsilon", self.epsilon.clone());
        push("tol", self.tol.clone());
        push("max-iters", self.max_iters.clone());
        push("trace-every", self.trace_every.clone());
        push("balance", self.balance.clone());
        push("rotate", self.rotate.clone());
        push("seed", self.seed.clone());
        push("case", self.case.clone());
        push("stripe-range", self.stripe_range.clone());
        push("stripe-fraction", self.stripe_fraction.clone());
        push("dataset", self.dataset.clone());
        push("timing", self.no_timing.then(|| "false".to_string()));
        push("models", self.models.clone());
        push("regs", self.regs.clone());
        push("ranges", self.ranges.clone());
        push("cases", self.cases.clone());
        out
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Fixture {
    /// Piecewise-constant bands with linear spectra.
    Piecewise,
    /// Static scene with a moving bright block.
    Video,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum, default_value = "piecewise")]
    kind: Fixture,
    /// n1 x n2 x n3, e.g. 64x64x8.
    #[arg(long, default_value = "64x64x8")]
    dims: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Truth cube path.
    #[arg(long)]
    output: PathBuf,
    /// Also write a degraded observation for this case.
    #[arg(long, requires = "observation")]
    case: Option<String>,
    #[arg(long, default_value_t = 0.3)]
    stripe_range: f64,
    #[arg(long, default_value_t = 1.0)]
    stripe_fraction: f64,
    #[arg(long)]
    observation: Option<PathBuf>,
    /// Where to write the Gaussian noise of the observation.
    #[arg(long, requires = "case")]
    noise: Option<PathBuf>,
}

fn parse_dims(s: &str) -> Result<[usize; 3]> {
    let parts: Vec<usize> = s
        .split(['x', 'X', ','])
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("dims '{s}' must look like 64x64x8")))?;
    match parts[..] {
        [a, b, c] if a > 0 && b > 0 && c > 0 => Ok([a, b, c]),
        _ => Err(Error::Config(format!("dims '{s}' must be three positive integers"))),
    }
}

fn load_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for (key, value) in args.flags.pairs() {
        cfg.set(key, &value)
            .map_err(|e| Error::Config(format!("--{key}: {e}")))?;
    }
    Ok(cfg)
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let cfg = load_config(args)?;
    let out = run_destripe(&cfg)?;
    let r = &out.result;
    let last = r.final_record();
    eprintln!(
        "{} after {} iterations, objective {} -> {}, ball residual {}",
        if r.converged { "converged" } else { "stopped" },
        r.iterations,
        r.initial_objective,
        last.map_or(f64::NAN, |t| t.objective),
        last.map_or(f64::NAN, |t| t.ball_res),
    );
    if let Some(m) = &out.metrics {
        println!("{METRICS_CSV_HEADER}\n{}", m.csv_row());
    }
    Ok(())
}

fn cmd_benchmark(args: &RunArgs) -> Result<()> {
    let cfg = load_config(args)?;
    let rows = run_benchmark(&cfg)?;
    if cfg.output_path(&cfg.metrics, "metrics.csv").is_none() {
        println!("{METRICS_CSV_HEADER}");
        for r in &rows {
            println!("{}", r.csv_row());
        }
    }
    let failed = rows.iter().filter(|r| r.is_error()).count();
    if failed > 0 {
        eprintln!("{failed} of {} cells failed", rows.len());
    }
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let dims = parse_dims(&args.dims)?;
    let truth: Cube = match args.kind {
        Fixture::Piecewise => sim::piecewise_constant(dims, args.seed),
        Fixture::Video => sim::moving_block_video(dims, args.seed),
    };
    write_cube(&args.output, &truth)?;
    if let (Some(case), Some(obs)) = (&args.case, &args.observation) {
        let case: Case = case.parse()?;
        let spec = NoiseSpec {
            stripe_column_fraction: args.stripe_fraction,
            ..NoiseSpec::new(args.stripe_range, args.seed)
        };
        let deg = sim::make_case(&truth, case, &spec)?;
        write_cube(obs, &deg.v)?;
        if let Some(n) = &args.noise {
            write_cube(n, &deg.noise)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
