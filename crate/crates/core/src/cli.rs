//! Experiment harness behind the `rcurc` binary.
//!
//! Subcommands mirror the pipeline stages: `synth` writes a synthetic
//! problem, `sample` draws a cross-concentrated observation from a matrix
//! file, `solve` runs the solver on an observation file, `eval` scores an
//! estimate, and `run` does all of it from one TOML config.
//!
//! Exit status: 0 on success, 1 when the solver fails or (with `--strict`)
//! does not converge, 2 on usage, configuration and I/O errors. Errors are
//! reported on stderr as `rcurc: stage=<stage>: <message>`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::RcurcError;
use crate::io;
use crate::linalg::DenseMatrix;
use crate::metrics::{fit_linear_rate, psnr, recovery_error, ConvergenceFit, Peak};
use crate::model::SyntheticProblem;
use crate::sampling::{ccs_sample, CcsObservation};
use crate::solver::{solve, Params, Setting, SolveReport, SolverConfig, Termination};

/// Version of every summary JSON written by the harness.
pub const SUMMARY_SCHEMA: u32 = 1;

pub const Y_FILE: &str = "y.rcm";
pub const X_TRUE_FILE: &str = "x_true.rcm";
pub const S_TRUE_FILE: &str = "s_true.rcm";
pub const OBSERVATION_FILE: &str = "observation.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const LEFT_FACTOR_FILE: &str = "factors_left.rcm";
pub const RIGHT_FACTOR_FILE: &str = "factors_right.rcm";

/// A failed stage and its cause.
#[derive(Debug)]
pub struct CliError {
    pub stage: &'static str,
    pub source: RcurcError,
}

impl CliError {
    fn at(stage: &'static str) -> impl FnOnce(RcurcError) -> CliError {
        move |source| CliError { stage, source }
    }

    pub fn exit_code(&self) -> i32 {
        match self.source {
            RcurcError::Numeric(_) | RcurcError::Solve { .. } => 1,
            _ => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "stage={}: {}", self.stage, self.source)
    }
}

impl std::error::Error for CliError {}

type CliResult<T> = std::result::Result<T, CliError>;

/// Errors from reading or writing files belong to the `io` stage whatever
/// step triggered them.
fn staged(stage: &'static str) -> impl Fn(RcurcError) -> CliError {
    move |source| {
        let stage = match source {
            RcurcError::Io { .. } | RcurcError::Format { .. } | RcurcError::Schema(_) => "io",
            _ => stage,
        };
        CliError { stage, source }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "rcurc",
    version,
    about = "Robust CUR completion from cross-concentrated samples"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic low-rank plus sparse problem.
    Synth(SynthArgs),
    /// Draw a cross-concentrated observation from a matrix file.
    Sample(SampleArgs),
    /// Run the solver on an observation file.
    Solve(SolveArgs),
    /// Compare an estimate against a reference matrix.
    Eval(EvalArgs),
    /// Generate, sample, solve and evaluate from one config.
    Run(RunArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct ProblemOverrides {
    #[arg(long)]
    pub n1: Option<usize>,
    #[arg(long)]
    pub n2: Option<usize>,
    /// Outlier fraction per row and column.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Outlier amplitude factor.
    #[arg(long)]
    pub amp: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SamplingOverrides {
    #[arg(long)]
    pub row_frac: Option<f64>,
    #[arg(long)]
    pub col_frac: Option<f64>,
    #[arg(long)]
    pub p_row: Option<f64>,
    #[arg(long)]
    pub p_col: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SolverOverrides {
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Row-panel step size, a number or "auto".
    #[arg(long)]
    pub eta_r: Option<Setting>,
    /// Column-panel step size, a number or "auto".
    #[arg(long)]
    pub eta_c: Option<Setting>,
    /// Initial threshold, a number or "auto".
    #[arg(long)]
    pub zeta0: Option<Setting>,
    /// Record zero for all timings so outputs are byte-reproducible.
    #[arg(long)]
    pub deterministic: bool,
}

impl SolverOverrides {
    fn apply(&self, cfg: &mut SolverConfig) {
        if let Some(v) = self.gamma {
            cfg.gamma = v;
        }
        if let Some(v) = self.eps {
            cfg.eps = v;
        }
        if let Some(v) = self.max_iters {
            cfg.max_iters = v;
        }
        if let Some(v) = self.eta_r {
            cfg.eta_r = v;
        }
        if let Some(v) = self.eta_c {
            cfg.eta_c = v;
        }
        if let Some(v) = self.zeta0 {
            cfg.zeta0 = v;
        }
        if self.deterministic {
            cfg.record_time = false;
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 500)]
    pub n1: usize,
    #[arg(long, default_value_t = 500)]
    pub n2: usize,
    #[arg(long, default_value_t = 5)]
    pub rank: usize,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 10.0)]
    pub amp: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Matrix file (RCURCMAT) to sample from.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.3)]
    pub row_frac: f64,
    #[arg(long, default_value_t = 0.3)]
    pub col_frac: f64,
    #[arg(long, default_value_t = 0.25)]
    pub p_row: f64,
    #[arg(long, default_value_t = 0.25)]
    pub p_col: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Observation file written by `sample`.
    #[arg(long)]
    pub obs: PathBuf,
    #[arg(long)]
    pub rank: usize,
    #[command(flatten)]
    pub solver: SolverOverrides,
    /// Exit with status 1 unless the solver converges.
    #[arg(long)]
    pub strict: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Reference matrix file.
    #[arg(long)]
    pub truth: PathBuf,
    /// Dense estimate file.
    #[arg(long, conflicts_with = "factors", required_unless_present = "factors")]
    pub estimate: Option<PathBuf>,
    /// Directory holding the factor files written by `solve`.
    #[arg(long)]
    pub factors: Option<PathBuf>,
    /// PSNR peak, a number or "auto" for the largest reference magnitude.
    #[arg(long, default_value = "auto")]
    pub peak: Peak,
    /// Also write the result to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML experiment config. Without one the built-in defaults are used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Independent repeats; repeat `i` uses seed `seed + i`.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Sets both the synthetic rank and the solver rank.
    #[arg(long)]
    pub rank: Option<usize>,
    #[command(flatten)]
    pub problem: ProblemOverrides,
    #[command(flatten)]
    pub sampling: SamplingOverrides,
    #[command(flatten)]
    pub solver: SolverOverrides,
    #[arg(long)]
    pub peak: Option<Peak>,
    /// Exit with status 1 unless every repeat converges.
    #[arg(long)]
    pub strict: bool,
}

/// A full experiment, as read from a TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub sampling: SamplingSpec,
    /// Required unless the problem is synthetic, whose rank is the default.
    #[serde(default)]
    pub solver: Option<SolverConfig>,
    /// PSNR peak: a number or "auto".
    #[serde(default, with = "peak_serde")]
    pub peak: Peak,
    #[serde(default = "default_outputs")]
    pub outputs: PathBuf,
}

fn default_outputs() -> PathBuf {
    PathBuf::from("rcurc-out")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            problem: ProblemSpec::Synthetic(SyntheticSpec::default()),
            sampling: SamplingSpec::default(),
            solver: None,
            peak: Peak::Auto,
            outputs: default_outputs(),
        }
    }
}

mod peak_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::metrics::Peak;

    pub fn serialize<S: Serializer>(p: &Peak, s: S) -> Result<S::Ok, S::Error> {
        match p {
            Peak::Auto => s.serialize_str("auto"),
            Peak::Value(v) => s.serialize_f64(*v),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Peak, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let text = match Raw::deserialize(d)? {
            Raw::Num(v) => v.to_string(),
            Raw::Text(t) => t,
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Synthetic(SyntheticSpec),
    /// A matrix file, with an optional ground truth for scoring.
    Matrix {
        y: PathBuf,
        truth: Option<PathBuf>,
    },
    /// Grayscale PGM frames, one matrix column each, with an optional
    /// known background frame for scoring.
    Frames {
        frames: Vec<PathBuf>,
        background: Option<PathBuf>,
    },
}

/// Omitted fields take their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub n1: usize,
    pub n2: usize,
    pub rank: usize,
    pub alpha: f64,
    pub amp: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n1: 500,
            n2: 500,
            rank: 5,
            alpha: 0.1,
            amp: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSpec {
    pub row_frac: f64,
    pub col_frac: f64,
    pub p_row: f64,
    pub p_col: f64,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        Self {
            row_frac: 0.3,
            col_frac: 0.3,
            p_row: 0.25,
            p_col: 0.25,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, RcurcError> {
        toml::from_str(text).map_err(|e| RcurcError::Schema(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError {
            stage: "io",
            source: RcurcError::io(path, e),
        })?;
        Self::from_toml(&text).map_err(CliError::at("config"))
    }

    /// Solver settings, falling back to defaults at the synthetic rank.
    pub fn solver_config(&self) -> CliResult<SolverConfig> {
        match (&self.solver, &self.problem) {
            (Some(cfg), _) => Ok(cfg.clone()),
            (None, ProblemSpec::Synthetic(spec)) => Ok(SolverConfig::new(spec.rank)),
            (None, _) => Err(CliError {
                stage: "config",
                source: RcurcError::arg("a [solver] section with a rank is required"),
            }),
        }
    }

    fn apply(&mut self, args: &RunArgs) -> CliResult<()> {
        if let Some(seed) = args.seed {
            self.seed = seed;
        }
        if let Some(out) = &args.out {
            self.outputs = out.clone();
        }
        if let Some(peak) = args.peak {
            self.peak = peak;
        }
        let p = &args.problem;
        let touches_problem = p.n1.is_some() || p.n2.is_some() || p.alpha.is_some() || p.amp.is_some();
        match &mut self.problem {
            ProblemSpec::Synthetic(spec) => {
                if let Some(v) = p.n1 {
                    spec.n1 = v;
                }
                if let Some(v) = p.n2 {
                    spec.n2 = v;
                }
                if let Some(v) = p.alpha {
                    spec.alpha = v;
                }
                if let Some(v) = p.amp {
                    spec.amp = v;
                }
                if let Some(v) = args.rank {
                    spec.rank = v;
                }
            }
            _ if touches_problem => {
                return Err(CliError {
                    stage: "config",
                    source: RcurcError::arg("--n1, --n2, --alpha and --amp apply only to synthetic problems"),
                })
            }
            _ => {}
        }
        let s = &args.sampling;
        if let Some(v) = s.row_frac {
            self.sampling.row_frac = v;
        }
        if let Some(v) = s.col_frac {
            self.sampling.col_frac = v;
        }
        if let Some(v) = s.p_row {
            self.sampling.p_row = v;
        }
        if let Some(v) = s.p_col {
            self.sampling.p_col = v;
        }
        let mut solver = match self.solver_config() {
            Ok(cfg) => cfg,
            Err(e) => match args.rank {
                Some(rank) => SolverConfig::new(rank),
                None => return Err(e),
            },
        };
        if let Some(rank) = args.rank {
            solver.rank = rank;
        }
        args.solver.apply(&mut solver);
        self.solver = Some(solver);
        Ok(())
    }
}

/// Outcome of one solve, as written to summary files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub termination: Termination,
    pub iterations: usize,
    pub final_e_k: f64,
    pub runtime_ms: f64,
    pub rank_deficient_steps: usize,
    pub params: Params,
    /// Absent when the trace has fewer than two positive errors.
    pub rate: Option<ConvergenceFit>,
}

impl SolveSummary {
    fn new(report: &SolveReport, runtime_ms: f64) -> Self {
        let points: Vec<(usize, f64)> = report.trace.iter().map(|t| (t.iter, t.e_k)).collect();
        Self {
            termination: report.termination,
            iterations: report.iterations(),
            final_e_k: report.final_error(),
            runtime_ms,
            rank_deficient_steps: report.rank_deficient_steps,
            params: report.params,
            rate: fit_linear_rate(&points).ok(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatSummary {
    pub seed: u64,
    pub trace: String,
    pub observation: String,
    #[serde(flatten)]
    pub solve: SolveSummary,
    pub recovery_error: Option<f64>,
    /// In dB; `null` also when the estimate matches the reference exactly.
    pub psnr: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSummary {
    pub converged: usize,
    pub iterations: f64,
    pub final_e_k: f64,
    pub runtime_ms: f64,
    pub recovery_error: Option<f64>,
    pub psnr: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema: u32,
    pub config: ExperimentConfig,
    pub repeats: Vec<RepeatSummary>,
    pub mean: MeanSummary,
}

impl RunSummary {
    pub fn all_converged(&self) -> bool {
        self.repeats
            .iter()
            .all(|r| r.solve.termination == Termination::Converged)
    }
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let vals: Option<Vec<f64>> = values.collect();
    let vals = vals?;
    if vals.is_empty() {
        return None;
    }
    Some(vals.iter().sum::<f64>() / vals.len() as f64)
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn elapsed_ms(start: Instant, record: bool) -> f64 {
    if record {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError {
        stage: "io",
        source: RcurcError::Schema(e.to_string()),
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError {
        stage: "io",
        source: RcurcError::io(path, e),
    })
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError {
        stage: "io",
        source: RcurcError::io(dir, e),
    })
}

/// Data a repeat samples from: fixed inputs, or a fresh synthetic problem
/// per seed.
enum Source {
    Synthetic(SyntheticSpec),
    Fixed {
        y: DenseMatrix,
        truth: Option<DenseMatrix>,
    },
}

fn load_source(problem: &ProblemSpec) -> CliResult<Source> {
    let io_err = CliError::at("io");
    match problem {
        ProblemSpec::Synthetic(spec) => Ok(Source::Synthetic(spec.clone())),
        ProblemSpec::Matrix { y, truth } => Ok(Source::Fixed {
            y: io::read_matrix(y).map_err(CliError::at("io"))?,
            truth: truth.as_ref().map(io::read_matrix).transpose().map_err(io_err)?,
        }),
        ProblemSpec::Frames { frames, background } => {
            let y = io::frames_to_matrix(frames).map_err(CliError::at("io"))?;
            let truth = match background {
                None => None,
                Some(path) => {
                    let frame = io::read_pgm(path).map_err(io_err)?;
                    let column = io::frames_to_matrix(&[path]).map_err(CliError::at("io"))?;
                    if column.rows() != y.rows() {
                        return Err(CliError {
                            stage: "io",
                            source: RcurcError::arg(format!(
                                "background frame is {}x{}, frames have {} pixels",
                                frame.width,
                                frame.height,
                                y.rows()
                            )),
                        });
                    }
                    Some(DenseMatrix::from_fn(y.rows(), y.cols(), |i, _| column.get(i, 0)))
                }
            };
            Ok(Source::Fixed { y, truth })
        }
    }
}

fn run_repeat(
    cfg: &ExperimentConfig,
    solver: &SolverConfig,
    source: &Source,
    index: usize,
    repeats: usize,
) -> CliResult<RepeatSummary> {
    let seed = cfg.seed.wrapping_add(index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let generated;
    let (y, truth) = match source {
        Source::Synthetic(spec) => {
            generated =
                SyntheticProblem::generate(spec.n1, spec.n2, spec.rank, spec.alpha, spec.amp, &mut rng)
                    .map_err(CliError::at("synth"))?;
            (&generated.y, Some(&generated.x_true))
        }
        Source::Fixed { y, truth } => (y, truth.as_ref()),
    };
    let s = &cfg.sampling;
    let obs =
        ccs_sample(y, s.row_frac, s.col_frac, s.p_row, s.p_col, &mut rng).map_err(CliError::at("sample"))?;

    let (obs_name, trace_name) = if repeats == 1 {
        (OBSERVATION_FILE.to_string(), TRACE_FILE.to_string())
    } else {
        (format!("observation_{index}.json"), format!("trace_{index}.csv"))
    };
    io::write_observation(cfg.outputs.join(&obs_name), &obs).map_err(CliError::at("io"))?;

    let start = Instant::now();
    let report = solve(&obs, solver).map_err(staged("solve"))?;
    let runtime_ms = elapsed_ms(start, solver.record_time);
    io::write_trace(cfg.outputs.join(&trace_name), &report).map_err(CliError::at("io"))?;

    let (recovery, peak_snr) = match truth {
        None => (None, None),
        Some(truth) => {
            let estimate = report.factors.to_dense();
            let rec = recovery_error(&estimate, truth).map_err(CliError::at("eval"))?;
            let db = psnr(truth, &estimate, cfg.peak).map_err(CliError::at("eval"))?;
            (Some(rec), finite(db))
        }
    };
    Ok(RepeatSummary {
        seed,
        trace: trace_name,
        observation: obs_name,
        solve: SolveSummary::new(&report, runtime_ms),
        recovery_error: recovery,
        psnr: peak_snr,
    })
}

/// Runs every repeat (in parallel) and writes the per-repeat observation
/// and trace files plus `summary.json` into `cfg.outputs`.
pub fn run_experiment(cfg: &ExperimentConfig, repeats: usize) -> CliResult<RunSummary> {
    if repeats == 0 {
        return Err(CliError {
            stage: "config",
            source: RcurcError::arg("--repeats must be at least 1"),
        });
    }
    let solver = cfg.solver_config()?;
    solver.validate().map_err(CliError::at("config"))?;
    let source = load_source(&cfg.problem)?;
    create_dir(&cfg.outputs)?;

    let results: Vec<RepeatSummary> = (0..repeats)
        .into_par_iter()
        .map(|i| run_repeat(cfg, &solver, &source, i, repeats))
        .collect::<CliResult<_>>()?;

    let n = results.len() as f64;
    let mean = MeanSummary {
        converged: results
            .iter()
            .filter(|r| r.solve.termination == Termination::Converged)
            .count(),
        iterations: results.iter().map(|r| r.solve.iterations as f64).sum::<f64>() / n,
        final_e_k: results.iter().map(|r| r.solve.final_e_k).sum::<f64>() / n,
        runtime_ms: results.iter().map(|r| r.solve.runtime_ms).sum::<f64>() / n,
        recovery_error: mean_of(results.iter().map(|r| r.recovery_error)),
        psnr: mean_of(results.iter().map(|r| r.psnr)),
    };
    let mut echoed = cfg.clone();
    echoed.solver = Some(solver);
    let summary = RunSummary {
        schema: SUMMARY_SCHEMA,
        config: echoed,
        repeats: results,
        mean,
    };
    write_json(&cfg.outputs.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}

fn cmd_synth(args: &SynthArgs) -> CliResult<i32> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let problem = SyntheticProblem::generate(args.n1, args.n2, args.rank, args.alpha, args.amp, &mut rng)
        .map_err(CliError::at("synth"))?;
    create_dir(&args.out)?;
    for (name, m) in [
        (Y_FILE, &problem.y),
        (X_TRUE_FILE, &problem.x_true),
        (S_TRUE_FILE, &problem.s_true),
    ] {
        io::write_matrix(args.out.join(name), m).map_err(CliError::at("io"))?;
    }
    Ok(0)
}

fn cmd_sample(args: &SampleArgs) -> CliResult<i32> {
    let y = io::read_matrix(&args.input).map_err(CliError::at("io"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let obs = ccs_sample(&y, args.row_frac, args.col_frac, args.p_row, args.p_col, &mut rng)
        .map_err(CliError::at("sample"))?;
    create_dir(&args.out)?;
    io::write_observation(args.out.join(OBSERVATION_FILE), &obs).map_err(CliError::at("io"))?;
    Ok(0)
}

#[derive(Serialize)]
struct SolveFileSummary<'a> {
    schema: u32,
    observation: &'a Path,
    solver: &'a SolverConfig,
    #[serde(flatten)]
    solve: SolveSummary,
}

fn cmd_solve(args: &SolveArgs) -> CliResult<i32> {
    let obs: CcsObservation = io::read_observation(&args.obs).map_err(CliError::at("io"))?;
    let mut cfg = SolverConfig::new(args.rank);
    args.solver.apply(&mut cfg);
    cfg.validate().map_err(CliError::at("config"))?;

    let start = Instant::now();
    let report = solve(&obs, &cfg).map_err(staged("solve"))?;
    let runtime_ms = elapsed_ms(start, cfg.record_time);

    create_dir(&args.out)?;
    io::write_trace(args.out.join(TRACE_FILE), &report).map_err(CliError::at("io"))?;
    let (left, right) = report.factors.low_rank_factors();
    io::write_matrix(args.out.join(LEFT_FACTOR_FILE), &left).map_err(CliError::at("io"))?;
    io::write_matrix(args.out.join(RIGHT_FACTOR_FILE), &right).map_err(CliError::at("io"))?;
    let summary = SolveFileSummary {
        schema: SUMMARY_SCHEMA,
        observation: &args.obs,
        solver: &cfg,
        solve: SolveSummary::new(&report, runtime_ms),
    };
    write_json(&args.out.join(SUMMARY_FILE), &summary)?;
    Ok(strict_status(
        args.strict,
        report.termination == Termination::Converged,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub schema: u32,
    pub recovery_error: f64,
    pub psnr: Option<f64>,
}

fn cmd_eval(args: &EvalArgs) -> CliResult<i32> {
    let truth = io::read_matrix(&args.truth).map_err(CliError::at("io"))?;
    let estimate = match (&args.estimate, &args.factors) {
        (Some(path), _) => io::read_matrix(path).map_err(CliError::at("io"))?,
        (None, Some(dir)) => {
            let left = io::read_matrix(dir.join(LEFT_FACTOR_FILE)).map_err(CliError::at("io"))?;
            let right = io::read_matrix(dir.join(RIGHT_FACTOR_FILE)).map_err(CliError::at("io"))?;
            if left.cols() != right.cols() {
                return Err(CliError {
                    stage: "io",
                    source: RcurcError::arg(format!(
                        "factor ranks differ: {} vs {}",
                        left.cols(),
                        right.cols()
                    )),
                });
            }
            left.matmul(&right.transpose())
        }
        (None, None) => unreachable!("clap requires --estimate or --factors"),
    };
    let summary = EvalSummary {
        schema: SUMMARY_SCHEMA,
        recovery_error: recovery_error(&estimate, &truth).map_err(CliError::at("eval"))?,
        psnr: finite(psnr(&truth, &estimate, args.peak).map_err(CliError::at("eval"))?),
    };
    let text = serde_json::to_string_pretty(&summary).expect("plain data serializes");
    println!("{text}");
    if let Some(path) = &args.out {
        write_json(path, &summary)?;
    }
    Ok(0)
}

fn cmd_run(args: &RunArgs) -> CliResult<i32> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply(args)?;
    let summary = run_experiment(&cfg, args.repeats)?;
    Ok(strict_status(args.strict, summary.all_converged()))
}

fn strict_status(strict: bool, converged: bool) -> i32 {
    if strict && !converged {
        eprintln!("rcurc: stage=solve: did not converge");
        1
    } else {
        0
    }
}

/// Runs one parsed command and returns its exit status.
pub fn execute(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Run(a) => cmd_run(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("rcurc: {e}");
            e.exit_code()
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(&cli),
        Err(e) => {
            let _ = e.print();
            e.exit_code()
        }
    }
}
