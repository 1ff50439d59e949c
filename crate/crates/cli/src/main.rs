//! `epg`: generate macroblock dependency traces, estimate per-macroblock
//! maximum error impact, render impact histograms and validate the estimate
//! by fault injection.
//!
//! Exit codes: 0 success, 1 output failure, 2 usage error, 3 invalid input,
//! 4 bound violation.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use epg_core::h264::{EpgStream, ImpactReport};
use epg_core::histogram::{histogram, Binning, HistogramSpec, YScale};
use epg_core::report::{read_report, write_report, ImpactRow};
use epg_core::trace::{generate_trace, write_trace, GenParams, TraceReader};
use epg_core::{FaultSimulator, ImpactBackend, NodeId, SealedEpg};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EXIT_OUTPUT: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_BOUND: u8 = 4;

#[derive(Parser)]
#[command(name = "epg", version, about = "Maximum error impact estimation for macroblock dependency traces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dependency trace.
    Generate(GenerateArgs),
    /// Compute the global impact of every macroblock in a trace.
    Analyze(AnalyzeArgs),
    /// Bin an impact report and render it as text.
    Histogram(HistogramArgs),
    /// Check the estimate against fault injection.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 150, value_parser = clap::value_parser!(u32).range(1..))]
    frames: u32,
    #[arg(long, default_value_t = 40, value_parser = clap::value_parser!(u32).range(1..))]
    width_mb: u32,
    #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u32).range(1..))]
    height_mb: u32,
    /// Frames between IDR frames.
    #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u32).range(1..))]
    gop: u32,
    /// Probability that a P-frame macroblock is intra coded.
    #[arg(long, default_value_t = 0.1)]
    p_intra: f64,
    /// Largest motion vector component in quarter-pel units.
    #[arg(long, default_value_t = 64)]
    mv_range: u32,
    /// Output file; standard output when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Oracle,
    Exact,
    Fast,
}

impl From<BackendArg> for ImpactBackend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Oracle => ImpactBackend::Oracle,
            BackendArg::Exact => ImpactBackend::Exact,
            BackendArg::Fast => ImpactBackend::FastBound,
        }
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    trace: PathBuf,
    #[arg(long, value_enum, default_value_t = BackendArg::Exact)]
    backend: BackendArg,
    /// Report file; standard output when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Linear,
    Sqrt,
}

#[derive(Args)]
struct HistogramArgs {
    report: PathBuf,
    /// Bin width in impact units.
    #[arg(long, conflicts_with = "bins")]
    bin_width: Option<f64>,
    /// Number of equal-width bins (default 50).
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long, value_enum, default_value_t = ScaleArg::Sqrt)]
    y_scale: ScaleArg,
    /// Length of the longest bar in characters.
    #[arg(long, default_value_t = 50)]
    bar_width: usize,
    /// Write `bin_low,bin_high,count` rows to this file.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Worst,
    Prob,
}

#[derive(Args)]
struct ValidateArgs {
    trace: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Worst)]
    mode: ModeArg,
    /// Per-edge propagation probability for `--mode prob`.
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    /// Injections per epoch for `--mode prob`.
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

trait ExitWith<T> {
    fn exit_with(self, code: u8) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> ExitWith<T> for Result<T, E> {
    fn exit_with(self, code: u8) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code,
            error: e.into(),
        })
    }
}

fn fail<T>(code: u8, error: anyhow::Error) -> Result<T, Failure> {
    Err(Failure { code, error })
}

fn open_input(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .with_context(|| format!("cannot open {}", path.display()))
        .exit_with(EXIT_INPUT)
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p)
                .with_context(|| format!("cannot create {}", p.display()))
                .exit_with(EXIT_OUTPUT)?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Streams a trace file through the EPG builder, returning every sealed epoch.
fn load_epochs(
    path: &Path,
    backend: ImpactBackend,
) -> Result<Vec<(SealedEpg, ImpactReport)>, Failure> {
    let mut reader = TraceReader::new(open_input(path)?);
    let mut stream = EpgStream::new(backend);
    let mut epochs = Vec::new();
    while let Some(record) = reader.next() {
        let record = record
            .with_context(|| format!("invalid trace {}", path.display()))
            .exit_with(EXIT_INPUT)?;
        let done = stream
            .push(&record)
            .map_err(|e| anyhow!("{}: line {}: {e}", path.display(), reader.record_line()))
            .exit_with(EXIT_INPUT)?;
        epochs.extend(done);
    }
    let line = reader.line();
    epochs.extend(
        stream
            .finish()
            .map_err(|e| anyhow!("{}: line {line}: {e}", path.display()))
            .exit_with(EXIT_INPUT)?,
    );
    Ok(epochs)
}

fn cmd_generate(args: GenerateArgs) -> Result<(), Failure> {
    let params = GenParams {
        frames: args.frames,
        width_mb: args.width_mb,
        height_mb: args.height_mb,
        gop_length: args.gop,
        p_intra_in_p_frame: args.p_intra,
        mv_range_qpel: args.mv_range,
        seed: args.seed,
        ..GenParams::default()
    };
    let trace = generate_trace(&params).exit_with(EXIT_USAGE)?;
    let mut out = open_output(args.output.as_deref())?;
    write_trace(&trace, &mut out)
        .and_then(|()| out.flush().map_err(Into::into))
        .context("cannot write trace")
        .exit_with(EXIT_OUTPUT)?;
    eprintln!(
        "generated {} frames ({}x{} macroblocks), {} epochs expected, {} nodes",
        params.frames,
        params.width_mb,
        params.height_mb,
        params.expected_epochs(),
        params.expected_nodes()
    );
    Ok(())
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), Failure> {
    let backend = ImpactBackend::from(args.backend);
    let epochs = load_epochs(&args.trace, backend)?;
    let out = open_output(args.output.as_deref())?;
    write_report(epochs.iter().flat_map(|(_, r)| r.rows()), out)
        .context("cannot write report")
        .exit_with(EXIT_OUTPUT)?;
    let nodes: usize = epochs.iter().map(|(g, _)| g.node_count()).sum();
    let edges: usize = epochs.iter().map(|(g, _)| g.edge_count()).sum();
    eprintln!(
        "analyzed {} epochs, {nodes} macroblocks, {edges} propagation edges ({} backend)",
        epochs.len(),
        backend.name()
    );
    Ok(())
}

fn cmd_histogram(args: HistogramArgs) -> Result<(), Failure> {
    let spec = HistogramSpec {
        binning: match (args.bin_width, args.bins) {
            (Some(w), _) => Binning::Width(w),
            (None, Some(n)) => Binning::Count(n),
            (None, None) => Binning::Count(50),
        },
        y_scale: match args.y_scale {
            ScaleArg::Linear => YScale::Linear,
            ScaleArg::Sqrt => YScale::Sqrt,
        },
    };
    let rows: Vec<ImpactRow> = read_report(open_input(&args.report)?)
        .with_context(|| format!("invalid report {}", args.report.display()))
        .exit_with(EXIT_INPUT)?;
    let values: Vec<f64> = rows.iter().map(|r| r.m_global).collect();
    let hist = histogram(&values, spec.binning).exit_with(EXIT_USAGE)?;
    if let Some(path) = &args.output {
        let out = open_output(Some(path))?;
        hist.write_csv(out)
            .context("cannot write histogram")
            .exit_with(EXIT_OUTPUT)?;
    }
    let mut stdout = io::stdout().lock();
    stdout
        .write_all(hist.render_text(spec.y_scale, args.bar_width).as_bytes())
        .exit_with(EXIT_OUTPUT)?;
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<(), Failure> {
    if args.mode == ModeArg::Prob && !(0.0..=1.0).contains(&args.p) {
        return fail(EXIT_USAGE, anyhow!("--p must be in [0, 1], got {}", args.p));
    }
    let epochs = load_epochs(&args.trace, ImpactBackend::Exact)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut violations = 0usize;
    for (graph, report) in &epochs {
        let sim = FaultSimulator::with_estimates(graph, report.impacts.clone())
            .map_err(anyhow::Error::from)
            .exit_with(EXIT_BOUND)?;
        match args.mode {
            ModeArg::Worst => {
                let sweep = sim.sweep();
                violations += sweep.mismatches.len();
                println!(
                    "epoch {}: {} nodes, {} mismatches",
                    report.epoch_idx,
                    graph.node_count(),
                    sweep.mismatches.len()
                );
            }
            ModeArg::Prob => {
                let n = graph.node_count();
                let (mut exceeded, mut slack) = (0usize, 0.0f64);
                for _ in 0..args.samples {
                    let node = NodeId::new(rng.gen_range(0..n));
                    let seed: u64 = rng.gen();
                    let o = sim
                        .inject_prob(node, args.p, seed)
                        .map_err(anyhow::Error::from)
                        .exit_with(EXIT_USAGE)?;
                    if !o.within_bound() {
                        exceeded += 1;
                    }
                    slack += o.impact_observed / o.impact_estimated;
                }
                violations += exceeded;
                let mean = if args.samples == 0 {
                    0.0
                } else {
                    slack / args.samples as f64
                };
                println!(
                    "epoch {}: {} nodes, {} samples, {} bound violations, mean observed/estimated {:.4}",
                    report.epoch_idx,
                    n,
                    args.samples,
                    exceeded,
                    mean
                );
            }
        }
    }
    if violations > 0 {
        return fail(
            EXIT_BOUND,
            anyhow!("{violations} injections disagree with the impact estimate"),
        );
    }
    println!("ok: {} epochs checked", epochs.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Histogram(a) => cmd_histogram(a),
        Command::Validate(a) => cmd_validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
