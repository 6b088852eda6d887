//! Strong-scaling benchmark driver.
//!
//! Shared memory by default. `--nlocs` switches to the distributed pipeline
//! with every locality in this process; `--transport tcp` with `--rank` and
//! `--peers` runs one locality per process, and rank 0 writes the results.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use taskfft::bench::{
    run_distributed, run_scaling, run_tcp_rank, write_csv, RunMetadata, RunSpec, Sweep, WorldSpec,
};
use taskfft::dist::{DistStrategy, TransportKind};
use taskfft::planner::PlanningRigor;
use taskfft::{FftError, MatrixExtents, Result, SpectrumMatrix, StrategyKind};

#[derive(Debug, Parser)]
#[command(name = "fft-bench", version, about = "Time the task-parallel 2D real-to-complex FFT")]
struct Args {
    #[arg(long, default_value_t = 1024)]
    rows: usize,

    #[arg(long, default_value_t = 1024)]
    cols: usize,

    /// Comma-separated strategy names, or `all`.
    #[arg(long, default_value = "all")]
    strategy: String,

    /// Let the planner choose among `--strategy` (shared memory only).
    #[arg(long, value_parser = parse_rigor)]
    rigor: Option<PlanningRigor>,

    /// Comma-separated worker counts; per locality when distributed.
    #[arg(long, env = "FFT_BENCH_WORKERS", value_delimiter = ',')]
    workers: Option<Vec<usize>>,

    #[arg(long, default_value_t = 50)]
    reps: usize,

    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Comma-separated locality counts; selects the distributed pipeline.
    #[arg(long, value_delimiter = ',')]
    nlocs: Option<Vec<usize>>,

    #[arg(long, default_value = "inproc", value_parser = parse_transport)]
    transport: TransportKind,

    /// This process's rank in a tcp world.
    #[arg(long)]
    rank: Option<usize>,

    /// Comma-separated `host:port` of every rank, in rank order.
    #[arg(long, value_delimiter = ',')]
    peers: Option<Vec<String>>,

    /// CSV destination; stdout if absent. Metadata goes to `<out>.meta.json`.
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long)]
    bundle_fft: Option<usize>,

    #[arg(long)]
    bundle_transpose: Option<usize>,

    /// Writes the final spectrum: rows and cols as u64 LE, then interleaved
    /// re/im f64 LE.
    #[arg(long)]
    spectrum_out: Option<PathBuf>,
}

fn parse_rigor(s: &str) -> std::result::Result<PlanningRigor, String> {
    s.parse().map_err(|e: FftError| e.to_string())
}

fn parse_transport(s: &str) -> std::result::Result<TransportKind, String> {
    s.parse().map_err(|e: FftError| e.to_string())
}

fn parse_list<T>(s: &str, all: &[T]) -> Result<Vec<T>>
where
    T: Copy + std::str::FromStr<Err = FftError>,
{
    if s.trim() == "all" {
        return Ok(all.to_vec());
    }
    s.split(',').map(|x| x.trim().parse()).collect()
}

fn build_spec(args: &Args) -> Result<RunSpec> {
    let extents = MatrixExtents::new(args.rows, args.cols)?;
    let workers = args
        .workers
        .clone()
        .unwrap_or_else(|| vec![std::thread::available_parallelism().map_or(1, usize::from)]);
    let distributed = args.nlocs.is_some() || args.transport == TransportKind::Tcp;
    let mut spec = if distributed {
        let n_locs = match (&args.nlocs, args.transport, &args.peers) {
            (_, TransportKind::Tcp, Some(peers)) => vec![peers.len()],
            (_, TransportKind::Tcp, None) => {
                return Err(FftError::Config("--transport tcp needs --peers".into()))
            }
            (Some(n), TransportKind::InProcess, _) => n.clone(),
            (None, TransportKind::InProcess, _) => unreachable!("distributed implies nlocs or tcp"),
        };
        let mut spec = RunSpec::distributed(
            extents,
            parse_list(&args.strategy, &DistStrategy::ALL)?,
            n_locs,
            workers,
            args.reps,
            args.seed,
        );
        if args.transport == TransportKind::Tcp {
            spec.world = Some(WorldSpec {
                n_locs: spec.world.map(|w| w.n_locs).unwrap_or_default(),
                transport: TransportKind::Tcp,
                endpoints: args.peers.clone().unwrap_or_default(),
            });
        }
        if args.rigor.is_some() {
            return Err(FftError::Config("--rigor applies to shared-memory runs only".into()));
        }
        spec
    } else {
        let mut spec = RunSpec::shared(
            extents,
            parse_list(&args.strategy, &StrategyKind::ALL)?,
            workers,
            args.reps,
            args.seed,
        );
        spec.rigor = args.rigor;
        spec
    };
    spec.fft_bundle = args.bundle_fft;
    spec.transpose_bundle = args.bundle_transpose;
    spec.validate()?;
    Ok(spec)
}

fn write_spectrum(path: &Path, s: &SpectrumMatrix) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&(s.rows() as u64).to_le_bytes())?;
    w.write_all(&(s.cols() as u64).to_le_bytes())?;
    for c in s.data() {
        w.write_all(&c.re.to_le_bytes())?;
        w.write_all(&c.im.to_le_bytes())?;
    }
    w.flush()
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> FftError + '_ {
    move |e| FftError::Output(format!("{}: {e}", path.display()))
}

fn run(args: &Args) -> Result<()> {
    let spec = build_spec(args)?;
    let sweep: Option<Sweep> = match &spec.world {
        None => Some(run_scaling(&spec)?),
        Some(w) if w.transport == TransportKind::InProcess => Some(run_distributed(&spec)?),
        Some(_) => {
            let rank = args
                .rank
                .ok_or_else(|| FftError::Config("--transport tcp needs --rank".into()))?;
            run_tcp_rank(&spec, rank)?
        }
    };
    let Some(sweep) = sweep else {
        // Non-root tcp rank: the root reports.
        return Ok(());
    };

    match &args.out {
        Some(path) => {
            write_csv(&sweep.records, BufWriter::new(File::create(path).map_err(io_err(path))?))?;
            let meta_path = PathBuf::from(format!("{}.meta.json", path.display()));
            let meta = RunMetadata::describe(&spec, sweep.records.len()).to_json()?;
            std::fs::write(&meta_path, meta).map_err(io_err(&meta_path))?;
        }
        None => write_csv(&sweep.records, io::stdout().lock())?,
    }
    if let Some(path) = &args.spectrum_out {
        write_spectrum(path, &sweep.last_spectrum).map_err(io_err(path))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match args.rank {
                Some(r) => eprintln!("fft-bench rank {r}: {e}"),
                None => eprintln!("fft-bench: {e}"),
            }
            ExitCode::FAILURE
        }
    }
}
