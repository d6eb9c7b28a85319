//! `plhmm`: train, sample, segment and score with piecewise linear HSMMs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use plhmm_core::bench::{run_bench, BenchSpec};
use plhmm_core::generator::default_max_length;
use plhmm_core::io;
use plhmm_core::{
    find_detections, fit, sample, score_windows, viterbi, BasisFamily, DurationFamily, Error,
    TrainConfig, TrainMode,
};

const BEAT_ORDERS: [usize; 7] = [3, 5, 1, 6, 1, 5, 3];

#[derive(Parser)]
#[command(
    name = "plhmm",
    version,
    about = "Piecewise linear hidden semi-Markov models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to a single exemplar.
    Train(TrainArgs),
    /// Sliding-window log-likelihood of a long strip.
    Score(ScoreArgs),
    /// Draw a synthetic series from a model.
    Sample(SampleArgs),
    /// Best segmentation of a series.
    Segment(SegmentArgs),
    /// Training-time report over three duration settings.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Discrete,
    Gamma,
}

impl From<Family> for DurationFamily {
    fn from(f: Family) -> Self {
        match f {
            Family::Discrete => DurationFamily::Discrete,
            Family::Gamma => DurationFamily::Gamma,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Soft,
    Viterbi,
}

#[derive(Clone, Copy, ValueEnum)]
enum Basis {
    Hermite,
    Monomial,
}

#[derive(Args)]
struct BoundArgs {
    /// Per-state minimum durations, comma separated.
    #[arg(long, value_delimiter = ',', requires = "dmax")]
    dmin: Option<Vec<usize>>,
    /// Per-state maximum durations, comma separated.
    #[arg(long, value_delimiter = ',', requires = "dmin")]
    dmax: Option<Vec<usize>>,
}

impl BoundArgs {
    fn bounds(&self, n: usize) -> Result<Option<Vec<(usize, usize)>>, String> {
        match (&self.dmin, &self.dmax) {
            (Some(lo), Some(hi)) => {
                if lo.len() != n || hi.len() != n {
                    return Err(format!(
                        "--dmin/--dmax need {n} values each, got {} and {}",
                        lo.len(),
                        hi.len()
                    ));
                }
                Ok(Some(lo.iter().copied().zip(hi.iter().copied()).collect()))
            }
            _ => Ok(None),
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 7)]
    states: usize,
    /// Basis order per state; defaults to 3,5,1,6,1,5,3 for 7 states and 3 otherwise.
    #[arg(long, value_delimiter = ',')]
    orders: Option<Vec<usize>>,
    #[arg(long, value_enum, default_value = "discrete")]
    duration: Family,
    #[command(flatten)]
    bounds: BoundArgs,
    #[arg(long, value_enum, default_value = "soft")]
    mode: Mode,
    /// EM iterations; 4 for discrete and 10 for gamma by default.
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "hermite")]
    basis: Basis,
    /// Half-width of the basis argument range.
    #[arg(long, default_value_t = 3.0)]
    scale: f64,
    #[arg(long)]
    out: PathBuf,
    /// Per-iteration log-likelihood and timing CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 260)]
    width: usize,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long)]
    out: PathBuf,
    /// Report local maxima at or above this log-likelihood.
    #[arg(long, allow_hyphen_values = true, requires = "out_detections")]
    detect: Option<f64>,
    /// Minimum distance between detections, in windows.
    #[arg(long, default_value_t = 1)]
    min_sep: usize,
    #[arg(long)]
    out_detections: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Defaults to 10 × the sum of mean state durations.
    #[arg(long)]
    max_length: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Hidden segmentation JSON.
    #[arg(long)]
    path: Option<PathBuf>,
}

#[derive(Args)]
struct SegmentArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    orders: Option<Vec<usize>>,
    #[command(flatten)]
    bounds: BoundArgs,
    #[arg(long, default_value_t = 4)]
    discrete_iters: usize,
    #[arg(long, default_value_t = 10)]
    gamma_iters: usize,
    /// Table with one row per series and one wall-time column per setting.
    #[arg(long)]
    out: PathBuf,
    /// Per-cell rows with iterations, milliseconds and final log-likelihood.
    #[arg(long)]
    long: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type CmdResult = Result<(), Failure>;

fn default_orders(n: usize) -> Vec<usize> {
    if n == BEAT_ORDERS.len() {
        BEAT_ORDERS.to_vec()
    } else {
        vec![3; n]
    }
}

fn write(path: &Path, text: &str) -> CmdResult {
    std::fs::write(path, text).map_err(|e| Failure::Core(e.into()))
}

fn train(a: TrainArgs) -> CmdResult {
    let series = io::load_series(&a.input)?;
    let orders = a.orders.unwrap_or_else(|| default_orders(a.states));
    if orders.len() != a.states {
        return Err(Failure::Usage(format!(
            "--orders has {} values for {} states",
            orders.len(),
            a.states
        )));
    }
    let mut cfg = TrainConfig::new(orders, a.duration.into());
    cfg.bounds = a.bounds.bounds(a.states).map_err(Failure::Usage)?;
    cfg.mode = match a.mode {
        Mode::Soft => TrainMode::Soft,
        Mode::Viterbi => TrainMode::Viterbi,
    };
    if let Some(k) = a.iters {
        cfg.max_iters = k;
    }
    cfg.loglik_tol = a.tol;
    cfg.seed = a.seed;
    cfg.basis.family = match a.basis {
        Basis::Hermite => BasisFamily::HermiteOrthonormal,
        Basis::Monomial => BasisFamily::Monomial,
    };
    cfg.basis.scale = a.scale;
    let (model, trace) = fit(&series, &cfg)?;
    info!(
        "trained {} states in {} iterations, final loglik {}",
        model.n_states,
        trace.iterations(),
        trace.logliks.last().copied().unwrap_or(f64::NAN)
    );
    io::save_model(&model, &a.out)?;
    if let Some(p) = a.trace {
        io::save_trace(&trace, &p)?;
    }
    Ok(())
}

fn score(a: ScoreArgs) -> CmdResult {
    let model = io::load_model(&a.model)?;
    let strip = io::load_series(&a.input)?;
    let track = score_windows(&model, &strip, a.width, a.stride)?;
    info!("scored {} windows", track.len());
    io::save_track(&track, &a.out)?;
    if let (Some(threshold), Some(path)) = (a.detect, a.out_detections) {
        let dets = find_detections(&track, threshold, a.min_sep)?;
        info!("{} detections", dets.len());
        io::save_detections(&dets, &track, &path)?;
    }
    Ok(())
}

fn sample_cmd(a: SampleArgs) -> CmdResult {
    let model = io::load_model(&a.model)?;
    let max_length = a.max_length.unwrap_or_else(|| default_max_length(&model));
    let path = sample(&model, a.seed, max_length)?;
    io::save_series(&path.series, &a.out)?;
    if let Some(p) = a.path {
        io::save_segmentation(&path.segmentation, &p)?;
    }
    Ok(())
}

fn segment(a: SegmentArgs) -> CmdResult {
    let model = io::load_model(&a.model)?;
    let series = io::load_series(&a.input)?;
    let seg = viterbi(&model, &series)?;
    io::save_segmentation(&seg, &a.out)?;
    Ok(())
}

fn bench(a: BenchArgs) -> CmdResult {
    let mut inputs = Vec::with_capacity(a.inputs.len());
    for p in &a.inputs {
        let name = p.file_stem().map_or_else(
            || p.display().to_string(),
            |s| s.to_string_lossy().into_owned(),
        );
        inputs.push((name, io::load_series(p)?));
    }
    let orders = a.orders.unwrap_or_else(|| BEAT_ORDERS.to_vec());
    let mut spec = BenchSpec::new(orders);
    spec.bounds = a.bounds.bounds(spec.orders.len()).map_err(Failure::Usage)?;
    spec.discrete_iters = a.discrete_iters;
    spec.gamma_iters = a.gamma_iters;
    let report = run_bench(&inputs, &spec);
    write(&a.out, &report.table_csv())?;
    if let Some(p) = a.long {
        write(&p, &report.long_csv())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PLHMM_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Score(a) => score(a),
        Command::Sample(a) => sample_cmd(a),
        Command::Segment(a) => segment(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() { 3 } else { 4 })
        }
    }
}
