//! `rsi`: sweeps, whole-model compression, synthesis and bound checks.
//!
//! Exit codes: 0 success, 2 input or parameter error, 3 numerical failure.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rsi_core::io::{read_manifest, to_report_json};
use rsi_core::npy::{read_matrix, read_vector};
use rsi_core::planner::plan_model;
use rsi_core::spectra::{Profile, SpectrumSpec};
use rsi_core::workflow::{
    analyze, bound_check, compress_model, sidecar_path, synth_to_files, write_sweep_csv,
    CompressOptions, SweepConfig, DEFAULT_TRIALS,
};
use rsi_core::randomized::ERROR_NORM_TOL;
use rsi_core::{Error, RngSeed};

#[derive(Parser)]
#[command(name = "rsi", version, about = "Low-rank compression with randomized subspace iteration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mean normalized error and time per (k, q) for one matrix, as CSV.
    Analyze(AnalyzeArgs),
    /// Factorize every linear layer of a manifest.
    Compress(CompressArgs),
    /// Write a matrix with a prescribed spectrum plus a JSON sidecar.
    Synth(SynthArgs),
    /// Check the softmax perturbation bound for factors A, B of W.
    BoundCheck(BoundArgs),
    /// Ranks and parameter counts for a manifest, without weights.
    Plan(PlanArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Matrix in NPY format.
    matrix: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    ranks: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    qs: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Relative tolerance of the spectral-norm estimate.
    #[arg(long, default_value_t = ERROR_NORM_TOL)]
    rel_tol: f64,
    /// CSV destination; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompressArgs {
    manifest: PathBuf,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 2)]
    q: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for `<layer>/{A,B}.npy` and `plan.json`.
    #[arg(long)]
    out: PathBuf,
    /// Leave layers dense when factorizing would not shrink them.
    #[arg(long)]
    skip_if_larger: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileKind {
    Knee,
    PowerLaw,
    Exponential,
    Flat,
    Explicit,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum, default_value = "knee")]
    profile: ProfileKind,
    #[arg(long)]
    rows: usize,
    #[arg(long)]
    cols: usize,
    /// Number of nonzero singular values; defaults to min(rows, cols).
    #[arg(long)]
    length: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, default_value_t = 32)]
    head_count: usize,
    #[arg(long, default_value_t = 0.2)]
    head_decay_rate: f64,
    #[arg(long, default_value_t = 0.5)]
    tail_exponent: f64,
    /// Power-law exponent.
    #[arg(long, default_value_t = 1.0)]
    exponent: f64,
    /// Exponential decay rate.
    #[arg(long, default_value_t = 0.05)]
    rate: f64,
    /// Flat profile value.
    #[arg(long, default_value_t = 1.0)]
    value: f64,
    /// Explicit singular values.
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// NPY destination; the sidecar goes next to it with a .json extension.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long)]
    w: PathBuf,
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    /// N x D matrix, one feature vector per row.
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    bias: Option<PathBuf>,
    /// Feature-norm radius; defaults to the largest row norm.
    #[arg(long)]
    radius: Option<f64>,
    /// JSON destination; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlanArgs {
    manifest: PathBuf,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    skip_if_larger: bool,
    /// JSON destination; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run_analyze(args: AnalyzeArgs) -> Result<(), Error> {
    let w = read_matrix(&args.matrix)?;
    let config = SweepConfig {
        ranks: args.ranks,
        qs: args.qs,
        trials: args.trials,
        seed: RngSeed(args.seed),
        rel_tol: args.rel_tol,
    };
    let result = analyze(&w, &config)?;
    eprintln!("exact SVD: {:.3}s", result.exact_svd_time_s);
    match args.out {
        Some(path) => {
            let mut f = BufWriter::new(File::create(path)?);
            write_sweep_csv(&result.rows, &mut f)?;
            f.flush()?;
        }
        None => write_sweep_csv(&result.rows, io::stdout().lock())?,
    }
    Ok(())
}

fn run_compress(args: CompressArgs) -> Result<(), Error> {
    let manifest = read_manifest(&args.manifest)?;
    let opts = CompressOptions {
        alpha: args.alpha,
        iterations: args.q,
        seed: RngSeed(args.seed),
        skip_if_larger: args.skip_if_larger,
    };
    let report = compress_model(&manifest, &opts, &args.out)?;
    let t = &report.plan.totals;
    eprintln!(
        "{} layers, ratio {:.4}, {:.3}s",
        report.plan.layers.len(),
        t.ratio,
        t.wall_time_s.unwrap_or(0.0)
    );
    Ok(())
}

fn run_synth(args: SynthArgs) -> Result<(), Error> {
    let profile = match args.profile {
        ProfileKind::Knee => Profile::Knee {
            head_count: args.head_count,
            head_decay_rate: args.head_decay_rate,
            tail_exponent: args.tail_exponent,
        },
        ProfileKind::PowerLaw => Profile::PowerLaw {
            exponent: args.exponent,
        },
        ProfileKind::Exponential => Profile::Exponential { rate: args.rate },
        ProfileKind::Flat => Profile::Flat { value: args.value },
        ProfileKind::Explicit => Profile::Explicit {
            values: args.values.clone(),
        },
    };
    let length = match (args.length, args.profile) {
        (Some(n), _) => n,
        (None, ProfileKind::Explicit) => args.values.len(),
        (None, _) => args.rows.min(args.cols),
    };
    let spec = SpectrumSpec {
        profile,
        length,
        scale: args.scale,
    };
    synth_to_files(&spec, args.rows, args.cols, RngSeed(args.seed), &args.out)?;
    eprintln!("wrote {} and {}", args.out.display(), sidecar_path(&args.out).display());
    Ok(())
}

fn run_bound(args: BoundArgs) -> Result<(), Error> {
    let w = read_matrix(&args.w)?;
    let a = read_matrix(&args.a)?;
    let b = read_matrix(&args.b)?;
    let features = read_matrix(&args.features)?;
    let bias = args.bias.as_ref().map(read_vector).transpose()?;
    let report = bound_check(&w, a, b, &features, bias.as_deref(), args.radius)?;
    emit(&to_report_json(&report)?, args.out.as_deref())
}

fn run_plan(args: PlanArgs) -> Result<(), Error> {
    let manifest = read_manifest(&args.manifest)?;
    let plan = plan_model(&manifest, args.alpha, args.skip_if_larger)?;
    emit(&to_report_json(&plan)?, args.out.as_deref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(a) => run_analyze(a),
        Command::Compress(a) => run_compress(a),
        Command::Synth(a) => run_synth(a),
        Command::BoundCheck(a) => run_bound(a),
        Command::Plan(a) => run_plan(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
