use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hadamard_core::maps::{uniform_box_samples, DifferentiableMap};
use hadamard_core::right_inverse::initial_field;
use hadamard_core::{
    certify_pair, check_jacobian, estimate_inverse_bound, lift_analysis, linearization_modulus,
    solve_pointwise, solve_right_inverse, Anchor, CompactSample, DescentConfig, DescentTrace,
    LiftReport, SampleFile, SolveStatus, Verdict, DEFAULT_SEGMENT_SAMPLES, DEFAULT_TOL_LIFT,
};
use serde::Serialize;
use serde_json::json;

use crate::config::{OutputFormat, RunConfig};
use crate::corpus::{build_corpus, corpus_passes, run_corpus, write_bench_csv};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_STALLED: i32 = 2;
pub const EXIT_MAX_ITERATIONS: i32 = 3;
pub const EXIT_SINGULAR: i32 = 4;
pub const EXIT_DISTINCT: i32 = 5;
pub const EXIT_INCONCLUSIVE: i32 = 6;
pub const EXIT_JACOBIAN: i32 = 7;

/// Accepted finite-difference error for `check-map`.
pub const FD_TOLERANCE: f64 = 1e-5;
pub const ALPHA_T_VALUES: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];
const DEFAULT_CHECK_SAMPLES: usize = 20;
const DEFAULT_CHECK_BOX: [f64; 2] = [-3.0, 3.0];
const ALPHA_DIRECTIONS: usize = 4;

#[derive(Debug, Parser)]
#[command(name = "hadamard", version, about = "Global inversion of maps with bounded inverse Jacobians")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Overrides `output_format` from the config.
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve f(x) = y by damped Newton descent.
    Solve,
    /// Compute a right inverse on a finite target set.
    InvertSet,
    /// Check whether a collision f(a) = f(b) forces a = b.
    Certify,
    /// Lift the segment [0, a] through its image.
    Lift,
    /// Jacobian, linearization and inverse-bound diagnostics.
    CheckMap,
    /// Run the benchmark corpus.
    Bench {
        /// Corpus name; overrides `corpus` from the config.
        #[arg(long)]
        corpus: Option<String>,
    },
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = err.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            EXIT_CONFIG
        }
    }
}

pub fn execute(cli: &Cli) -> Result<i32> {
    let g = &cli.global;
    let config = match &g.config {
        Some(path) => RunConfig::load(path)?,
        None if matches!(cli.command, Command::Bench { .. }) => RunConfig::default(),
        None => bail!("--config is required for this command"),
    };
    let format = g.format.or(config.output_format).unwrap_or_default();
    fs::create_dir_all(&g.out).with_context(|| format!("creating output directory {}", g.out.display()))?;
    let out = Output { dir: g.out.clone(), format };
    match &cli.command {
        Command::Solve => cmd_solve(&config, &out),
        Command::InvertSet => cmd_invert_set(&config, &out),
        Command::Certify => cmd_certify(&config, &out),
        Command::Lift => cmd_lift(&config, &out),
        Command::CheckMap => cmd_check_map(&config, &out, g.seed),
        Command::Bench { corpus } => {
            let name = corpus.clone().or_else(|| config.corpus.clone()).unwrap_or_else(|| "default".into());
            cmd_bench(&name, &config.descent, &out, g.seed)
        }
    }
}

pub fn status_exit_code(status: SolveStatus) -> i32 {
    match status {
        SolveStatus::Converged => EXIT_OK,
        SolveStatus::Stalled => EXIT_STALLED,
        SolveStatus::MaxIterations => EXIT_MAX_ITERATIONS,
        SolveStatus::SingularJacobian => EXIT_SINGULAR,
    }
}

pub fn verdict_exit_code(verdict: Verdict) -> i32 {
    match verdict {
        Verdict::ConsistentWithInjectivity => EXIT_OK,
        Verdict::DistinctPreimagesDetected => EXIT_DISTINCT,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

struct Output {
    dir: PathBuf,
    format: OutputFormat,
}

impl Output {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.path(name);
        let file = File::create(&path).with_context(|| format!("writing {}", path.display()))?;
        Ok(BufWriter::new(file))
    }

    fn json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.path(name);
        write_text(&path, &serde_json::to_string_pretty(value)?)?;
        Ok(path)
    }

    fn trace(&self, trace: &DescentTrace) -> Result<()> {
        match self.format {
            OutputFormat::Csv => trace.write_csv(self.create("trace.csv")?)?,
            OutputFormat::Json => {
                self.json("trace.json", &trace.records)?;
            }
        }
        Ok(())
    }

    fn lift(&self, report: &LiftReport) -> Result<()> {
        match self.format {
            OutputFormat::Csv => report.write_csv(self.create("lift.csv")?)?,
            OutputFormat::Json => {
                self.json("lift.json", report)?;
            }
        }
        write_text(&self.path("lift_summary.json"), &report.summary_json()?)
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_solve(config: &RunConfig, out: &Output) -> Result<i32> {
    let map = config.map()?;
    let y = config.vector(config.y.as_ref(), "y")?;
    let x0 = match &config.x0 {
        Some(x0) => x0.clone(),
        None => vec![0.0; map.dimension()],
    };
    let report = solve_pointwise(&map, &y, &x0, &config.descent)?;
    out.json("solve_report.json", &report)?;
    out.trace(&report.trace)?;
    println!(
        "solve: {:?} after {} iterations, residual {:e}",
        report.status,
        report.trace.iterations(),
        report.residual_norm
    );
    Ok(status_exit_code(report.status))
}

fn cmd_invert_set(config: &RunConfig, out: &Output) -> Result<i32> {
    let map = config.map()?;
    let mut file = match &config.targets_file {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading targets {}", path.display()))?;
            serde_json::from_str::<SampleFile>(&text).with_context(|| format!("parsing targets {}", path.display()))?
        }
        None => SampleFile { targets: Vec::new(), anchor_index: None, anchor_point: None, g_values: None },
    };
    if let Some(targets) = &config.targets {
        file.targets = targets.clone();
    }
    if config.anchor_index.is_some() || config.anchor_point.is_some() {
        file.anchor_index = config.anchor_index;
        file.anchor_point = config.anchor_point.clone();
    }
    let sample = match (file.anchor_index, file.anchor_point.clone()) {
        (Some(index), Some(point)) => CompactSample::anchored(&map, file.targets.clone(), Anchor { index, point })?,
        (None, None) => CompactSample::new(file.targets.clone())?,
        _ => bail!("anchor_index and anchor_point must be given together"),
    };
    let g_init = match config.g_init.clone().or(file.g_values) {
        Some(g) => g,
        None => initial_field(&sample, map.dimension()),
    };
    let report = solve_right_inverse(&map, sample, g_init, &config.descent)?;

    write_text(&out.path("right_inverse.json"), &report.state.to_json()?)?;
    out.trace(&report.trace)?;
    out.json(
        "invert_summary.json",
        &json!({
            "status": report.status,
            "merit": report.state.merit(),
            "iterations": report.trace.iterations(),
            "path_length": report.trace.cumulative_path_length,
            "path_bound_ok": report.path_bound_ok,
            "max_adjacent_ratio": report.max_adjacent_ratio(),
            "failure": report.failure.as_ref().map(ToString::to_string),
        }),
    )?;
    println!(
        "invert-set: {:?} after {} steps, sup residual {:e}",
        report.status,
        report.trace.iterations(),
        report.state.merit()
    );
    Ok(status_exit_code(report.status))
}

fn lift_parameters(config: &RunConfig) -> (usize, f64) {
    (config.m.unwrap_or(DEFAULT_SEGMENT_SAMPLES), config.tol_lift.unwrap_or(DEFAULT_TOL_LIFT))
}

fn cmd_certify(config: &RunConfig, out: &Output) -> Result<i32> {
    let map = config.map()?;
    let a = config.vector(config.a.as_ref(), "a")?;
    let b = config.vector(config.b.as_ref(), "b")?;
    let (m, tol_lift) = lift_parameters(config);
    let report = certify_pair(&map, &a, &b, m, &config.descent, tol_lift)?;
    out.lift(&report)?;
    println!("certify: {:?}, t_bar = {}", report.verdict, report.t_bar);
    Ok(verdict_exit_code(report.verdict))
}

fn cmd_lift(config: &RunConfig, out: &Output) -> Result<i32> {
    let map = config.map()?;
    let a = config.vector(config.a.as_ref(), "a")?;
    let (m, tol_lift) = lift_parameters(config);
    let report = lift_analysis(&map, &a, m, &config.descent, tol_lift)?;
    out.lift(&report)?;
    println!("lift: {:?}, t_bar = {}", report.verdict, report.t_bar);
    Ok(verdict_exit_code(report.verdict))
}

fn cmd_check_map(config: &RunConfig, out: &Output, seed: u64) -> Result<i32> {
    let map = config.map()?;
    let [lo, hi] = config.sample_box.unwrap_or(DEFAULT_CHECK_BOX);
    if !(lo < hi) {
        bail!("box must satisfy lo < hi, got [{lo}, {hi}]");
    }
    let count = config.samples.unwrap_or(DEFAULT_CHECK_SAMPLES);
    if count == 0 {
        bail!("samples must be positive");
    }
    let points = uniform_box_samples(map.dimension(), lo, hi, count, seed);
    let fd_error = check_jacobian(&map, &points, None)?;
    let alpha = linearization_modulus(&map, &points, 1.0, &ALPHA_T_VALUES, ALPHA_DIRECTIONS, seed)?;
    // a singular sample leaves the estimate empty rather than failing the check
    let estimated = estimate_inverse_bound(&map, &points).ok();
    let fd_ok = fd_error < FD_TOLERANCE;
    out.json(
        "diagnostics.json",
        &json!({
            "map": map.spec(),
            "box": [lo, hi],
            "samples": count,
            "fd_error": fd_error,
            "fd_ok": fd_ok,
            "alpha": alpha,
            "alpha_monotone": alpha.is_monotone(0.0),
            "estimated_inverse_bound": estimated,
            "known_inverse_bound": map.known_inverse_bound(),
        }),
    )?;
    println!("check-map: fd error {fd_error:e}, estimated M {estimated:?}");
    Ok(if fd_ok { EXIT_OK } else { EXIT_JACOBIAN })
}

fn cmd_bench(name: &str, descent: &DescentConfig, out: &Output, seed: u64) -> Result<i32> {
    let entries = build_corpus(name, seed)?;
    let runs = run_corpus(&entries, descent)?;
    match out.format {
        OutputFormat::Csv => write_bench_csv(&runs, out.create("bench.csv")?)?,
        OutputFormat::Json => {
            let rows: Vec<_> = runs.iter().map(|r| &r.row).collect();
            out.json("bench.json", &rows)?;
        }
    }
    let converged = runs.iter().filter(|r| r.row.converged).count();
    println!("bench: {converged}/{} runs converged", runs.len());
    if corpus_passes(&runs) {
        return Ok(EXIT_OK);
    }
    // first failing compliant run decides; a bound violation alone counts as a precondition failure
    let failing = runs.iter().find(|r| r.compliant && !(r.row.converged && r.row.bound_ok));
    Ok(match failing {
        Some(r) if !r.row.converged => status_exit_code(r.report.status),
        _ => EXIT_CONFIG,
    })
}
