//! Strong-scaling harness: repeated timed runs, order statistics, and a
//! per-phase runtime table.
//!
//! Every run, warm-up included, is checked. Extents up to 64×64 are compared
//! against a brute-force 2D DFT computed once per spec; larger extents must
//! agree bitwise with the first spectrum the spec produced.

pub mod report;
pub mod rng;
pub mod stats;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dist::{
    fft2d_distributed, CommStats, DistStrategy, TcpRankSession, TransportKind, WorldConfig, ROOT,
};
use crate::error::{FftError, Result};
use crate::exec::{ExecConfig, Executor, Phase, PhaseTimings, PipelinePlans, StrategyKind};
use crate::kernel::{dft_reference, dft_reference_real, ComplexSample};
use crate::matrix::{BitwiseEq, MatrixExtents, SignalMatrix, SpectrumMatrix};
use crate::planner::{Candidate, Planner, PlanningRigor};

pub use report::{emit_csv, read_csv, write_csv, CsvRow, RunMetadata, CSV_HEADER};
pub use stats::{median, summarize, Summary};

/// Untimed runs before the timed repetitions.
pub const WARMUP_RUNS: usize = 1;

/// Largest extent (either dimension) checked against the brute-force oracle.
pub const ORACLE_MAX_EXTENT: usize = 64;

/// Relative max-abs tolerance against the oracle.
pub const ORACLE_TOLERANCE: f64 = 1e-10;

/// Phase labels of the table, in row order.
pub const PHASE_COLUMNS: [&str; 7] = [
    "fft_dim1",
    "transpose_1",
    "fft_dim2",
    "transpose_2",
    "communicate",
    "rearrange",
    "total",
];

/// The distributed part of a spec.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldSpec {
    /// Locality counts to sweep.
    pub n_locs: Vec<usize>,
    pub transport: TransportKind,
    /// `host:port` per rank, TCP only; its length must match `n_locs`.
    pub endpoints: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSpec {
    pub extents: MatrixExtents,
    /// Shared-memory strategies, or the candidate set when `rigor` is set.
    pub strategies: Vec<StrategyKind>,
    pub dist_strategies: Vec<DistStrategy>,
    pub rigor: Option<PlanningRigor>,
    /// Worker counts to sweep (per locality when distributed).
    pub workers: Vec<usize>,
    pub repetitions: usize,
    pub seed: u64,
    pub fft_bundle: Option<usize>,
    pub transpose_bundle: Option<usize>,
    pub world: Option<WorldSpec>,
}

impl RunSpec {
    /// Shared-memory spec with no forced bundles.
    pub fn shared(
        extents: MatrixExtents,
        strategies: Vec<StrategyKind>,
        workers: Vec<usize>,
        repetitions: usize,
        seed: u64,
    ) -> Self {
        RunSpec {
            extents,
            strategies,
            dist_strategies: Vec::new(),
            rigor: None,
            workers,
            repetitions,
            seed,
            fft_bundle: None,
            transpose_bundle: None,
            world: None,
        }
    }

    /// In-process distributed spec.
    pub fn distributed(
        extents: MatrixExtents,
        dist_strategies: Vec<DistStrategy>,
        n_locs: Vec<usize>,
        workers: Vec<usize>,
        repetitions: usize,
        seed: u64,
    ) -> Self {
        RunSpec {
            extents,
            strategies: Vec::new(),
            dist_strategies,
            rigor: None,
            workers,
            repetitions,
            seed,
            fft_bundle: None,
            transpose_bundle: None,
            world: Some(WorldSpec {
                n_locs,
                transport: TransportKind::InProcess,
                endpoints: Vec::new(),
            }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.extents.require_fft_extents()?;
        if self.repetitions == 0 {
            return Err(FftError::Config("repetitions must be at least 1".into()));
        }
        if self.workers.is_empty() || self.workers.contains(&0) {
            return Err(FftError::Config("worker counts must be a non-empty list of positive values".into()));
        }
        self.exec_config(1).validate()?;
        match &self.world {
            None => {
                if self.strategies.is_empty() {
                    return Err(FftError::Config("no shared-memory strategy to run".into()));
                }
            }
            Some(w) => {
                if self.dist_strategies.is_empty() {
                    return Err(FftError::Config("no distributed strategy to run".into()));
                }
                if w.n_locs.is_empty() || w.n_locs.contains(&0) {
                    return Err(FftError::Config("locality counts must be a non-empty list of positive values".into()));
                }
                if w.transport == TransportKind::Tcp && w.n_locs.iter().any(|&n| n != w.endpoints.len()) {
                    return Err(FftError::Config(format!(
                        "tcp runs need one endpoint per locality; got {} endpoints",
                        w.endpoints.len()
                    )));
                }
            }
        }
        Ok(())
    }

    fn exec_config(&self, workers: usize) -> ExecConfig {
        ExecConfig::new(workers).with_bundles(self.fft_bundle, self.transpose_bundle)
    }

    /// The seeded input shared by every run of this spec.
    pub fn input(&self) -> SignalMatrix {
        rng::synthetic_matrix(self.extents, self.seed)
    }
}

/// Aggregated measurements of one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub extents: MatrixExtents,
    pub strategy: String,
    /// `estimate`, `measure`, or `none` when the strategy was fixed.
    pub rigor: String,
    pub workers: usize,
    pub n_locs: usize,
    /// `shared`, `inproc`, or `tcp`.
    pub transport: String,
    /// Timed repetitions; distributed entries already hold the per-phase
    /// maximum across localities.
    pub repetitions: Vec<PhaseTimings>,
    pub planning_time: f64,
    /// Summed over localities, last repetition only.
    pub comm: Option<CommStats>,
}

impl RunRecord {
    /// Raw values of column `index` of [`PHASE_COLUMNS`].
    pub fn column(&self, index: usize) -> Vec<f64> {
        self.repetitions
            .iter()
            .map(|t| match Phase::ALL.get(index) {
                Some(&p) => t.get(p),
                None => t.total,
            })
            .collect()
    }

    /// Summary per [`PHASE_COLUMNS`] entry, recomputed from the repetitions.
    pub fn aggregates(&self) -> Result<Vec<Summary>> {
        (0..PHASE_COLUMNS.len()).map(|i| summarize(&self.column(i))).collect()
    }
}

/// Records of a sweep plus the spectrum of its final run.
#[derive(Debug, Clone)]
pub struct Sweep {
    pub records: Vec<RunRecord>,
    pub last_spectrum: SpectrumMatrix,
}

/// The 2D DFT by definition: row DFTs truncated to `cols/2+1` bins, then
/// column DFTs. Quadratic cost; meant for small extents.
pub fn oracle_spectrum(input: &SignalMatrix) -> Result<SpectrumMatrix> {
    let spec = input.extents().spectrum();
    let (n, bins) = (spec.rows(), spec.cols());
    let mut rows = Vec::with_capacity(n * bins);
    for r in 0..n {
        rows.extend(dft_reference_real(input.row(r))?);
    }
    let mut out = vec![ComplexSample::new(0.0, 0.0); n * bins];
    for c in 0..bins {
        let column: Vec<ComplexSample> = (0..n).map(|r| rows[r * bins + c]).collect();
        for (r, v) in dft_reference(&column)?.into_iter().enumerate() {
            out[r * bins + c] = v;
        }
    }
    SpectrumMatrix::from_vec(spec, out)
}

/// `max |a - b| / max |b|`, or the absolute error if `b` is all zero.
pub fn relative_max_abs_error(actual: &SpectrumMatrix, expected: &SpectrumMatrix) -> f64 {
    let diff = actual
        .data()
        .iter()
        .zip(expected.data())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let scale = expected.data().iter().map(|b| b.norm()).fold(0.0, f64::max);
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

fn worst_difference(actual: &SpectrumMatrix, expected: &SpectrumMatrix) -> String {
    let cols = expected.cols();
    let (i, d) = actual
        .data()
        .iter()
        .zip(expected.data())
        .map(|(a, b)| (a - b).norm())
        .enumerate()
        .fold((0, -1.0), |best, (i, d)| if d > best.1 || d.is_nan() { (i, d) } else { best });
    format!(
        "largest difference {d:e} at ({}, {}): {} vs {}",
        i / cols,
        i % cols,
        actual.data()[i],
        expected.data()[i]
    )
}

fn first_difference(actual: &SpectrumMatrix, expected: &SpectrumMatrix) -> String {
    let cols = expected.cols();
    match actual
        .data()
        .iter()
        .zip(expected.data())
        .position(|(a, b)| a.re.to_bits() != b.re.to_bits() || a.im.to_bits() != b.im.to_bits())
    {
        Some(i) => format!(
            "first difference at ({}, {}): {} vs {}, relative max-abs error {:e}",
            i / cols,
            i % cols,
            actual.data()[i],
            expected.data()[i],
            relative_max_abs_error(actual, expected)
        ),
        None => "no element differs".into(),
    }
}

/// Checks every spectrum a spec produces.
#[derive(Debug)]
pub enum SpectrumCheck {
    /// Within [`ORACLE_TOLERANCE`] of the brute-force result.
    Oracle(SpectrumMatrix),
    /// Bitwise equal to the first spectrum seen.
    Agreement(Option<SpectrumMatrix>),
}

impl SpectrumCheck {
    pub fn for_input(input: &SignalMatrix) -> Result<Self> {
        let e = input.extents();
        if e.rows() <= ORACLE_MAX_EXTENT && e.cols() <= ORACLE_MAX_EXTENT {
            Ok(SpectrumCheck::Oracle(oracle_spectrum(input)?))
        } else {
            Ok(SpectrumCheck::Agreement(None))
        }
    }

    pub fn check(&mut self, spectrum: &SpectrumMatrix, label: &str) -> Result<()> {
        match self {
            SpectrumCheck::Oracle(expected) => {
                if spectrum.extents() != expected.extents() {
                    return Err(FftError::Verification(format!(
                        "{label}: spectrum is {}, expected {}",
                        spectrum.extents(),
                        expected.extents()
                    )));
                }
                let err = relative_max_abs_error(spectrum, expected);
                if err.is_nan() || err > ORACLE_TOLERANCE {
                    return Err(FftError::Verification(format!(
                        "{label}: relative max-abs error {err:e} against the oracle exceeds {ORACLE_TOLERANCE:e}; {}",
                        worst_difference(spectrum, expected)
                    )));
                }
            }
            SpectrumCheck::Agreement(reference) => match reference {
                None => *reference = Some(spectrum.clone()),
                Some(expected) => {
                    if !spectrum.bitwise_eq(expected) {
                        return Err(FftError::Verification(format!(
                            "{label}: disagrees with the first run of this spec; {}",
                            first_difference(spectrum, expected)
                        )));
                    }
                }
            },
        }
        Ok(())
    }
}

/// Shared-memory sweep: one record per (worker count, strategy), or per
/// worker count when planning picks the strategy.
pub fn run_scaling(spec: &RunSpec) -> Result<Sweep> {
    spec.validate()?;
    if spec.world.is_some() {
        return Err(FftError::Config("run_scaling takes a shared-memory spec".into()));
    }
    let input = spec.input();
    let mut check = SpectrumCheck::for_input(&input)?;
    let mut records = Vec::new();
    let mut last_spectrum = None;
    for &workers in &spec.workers {
        let executor = Executor::new(workers)?;
        let base_cfg = spec.exec_config(workers);
        let points: Vec<(StrategyKind, ExecConfig, PipelinePlans, String, f64)> = match spec.rigor {
            None => spec
                .strategies
                .iter()
                .map(|&s| {
                    let t = Instant::now();
                    let plans = PipelinePlans::for_input(&input)?;
                    Ok((s, base_cfg, plans, "none".to_string(), t.elapsed().as_secs_f64()))
                })
                .collect::<Result<_>>()?,
            Some(rigor) => {
                let candidates: Vec<Candidate> = spec
                    .strategies
                    .iter()
                    .map(|&s| Candidate::new(s, base_cfg.fft_bundle_for(s, spec.extents.rows())))
                    .collect();
                let plan = Planner::default().plan_with(&executor, spec.extents, rigor, &base_cfg, &candidates)?;
                let plans = PipelinePlans {
                    rows: plan.plan_dim1.clone(),
                    cols: plan.plan_dim2.clone(),
                };
                let cfg = match spec.transpose_bundle {
                    Some(tb) => plan.exec_config().with_bundles(Some(plan.fft_bundle), Some(tb)),
                    None => plan.exec_config(),
                };
                vec![(plan.strategy, cfg, plans, rigor.name().to_string(), plan.planning_time)]
            }
        };
        for (strategy, cfg, plans, rigor, planning_time) in points {
            let label = format!("{strategy} with {workers} workers");
            let mut repetitions = Vec::with_capacity(spec.repetitions);
            for rep in 0..WARMUP_RUNS + spec.repetitions {
                let (spectrum, timings) = executor.run(&input, strategy, &cfg, &plans, None)?;
                check.check(&spectrum, &format!("{label}, run {rep}"))?;
                if rep >= WARMUP_RUNS {
                    repetitions.push(timings);
                }
                last_spectrum = Some(spectrum);
            }
            records.push(RunRecord {
                extents: spec.extents,
                strategy: strategy.name().to_string(),
                rigor,
                workers,
                n_locs: 1,
                transport: "shared".into(),
                repetitions,
                planning_time,
                comm: None,
            });
        }
    }
    Ok(Sweep {
        records,
        last_spectrum: last_spectrum.expect("validated spec runs at least once"),
    })
}

/// Distributed sweep with every locality in this process: one record per
/// (locality count, worker count, strategy).
pub fn run_distributed(spec: &RunSpec) -> Result<Sweep> {
    spec.validate()?;
    let world_spec = spec
        .world
        .as_ref()
        .ok_or_else(|| FftError::Config("run_distributed needs a world spec".into()))?;
    let input = spec.input();
    let mut check = SpectrumCheck::for_input(&input)?;
    let mut records = Vec::new();
    let mut last_spectrum = None;
    for &n_locs in &world_spec.n_locs {
        for &workers in &spec.workers {
            let world = match world_spec.transport {
                TransportKind::InProcess => WorldConfig::in_process(n_locs, workers),
                TransportKind::Tcp => WorldConfig::tcp(world_spec.endpoints.clone(), workers),
            };
            let cfg = spec.exec_config(workers);
            for &strategy in &spec.dist_strategies {
                let label = format!("{strategy} on {n_locs} localities with {workers} workers each");
                let mut repetitions = Vec::with_capacity(spec.repetitions);
                let mut comm = None;
                for rep in 0..WARMUP_RUNS + spec.repetitions {
                    let outcome = fft2d_distributed(&input, strategy, &world, &cfg)?;
                    check.check(&outcome.spectrum, &format!("{label}, run {rep}"))?;
                    if rep >= WARMUP_RUNS {
                        repetitions.push(outcome.max_timings());
                        comm = Some(CommStats::merge(&outcome.stats));
                    }
                    last_spectrum = Some(outcome.spectrum);
                }
                records.push(RunRecord {
                    extents: spec.extents,
                    strategy: strategy.name().to_string(),
                    rigor: "none".into(),
                    workers,
                    n_locs,
                    transport: world_spec.transport.name().to_string(),
                    repetitions,
                    planning_time: 0.0,
                    comm,
                });
            }
        }
    }
    Ok(Sweep {
        records,
        last_spectrum: last_spectrum.expect("validated spec runs at least once"),
    })
}

/// One rank of a multi-process TCP sweep. Every process calls this with the
/// same spec; the root returns the sweep, other ranks return `None`.
pub fn run_tcp_rank(spec: &RunSpec, rank: usize) -> Result<Option<Sweep>> {
    spec.validate()?;
    let world_spec = spec
        .world
        .as_ref()
        .filter(|w| w.transport == TransportKind::Tcp)
        .ok_or_else(|| FftError::Config("multi-process runs need a tcp world spec".into()))?;
    let n_locs = world_spec.endpoints.len();
    let is_root = rank == ROOT.0;
    let input = is_root.then(|| spec.input());
    let mut check = match &input {
        Some(m) => Some(SpectrumCheck::for_input(m)?),
        None => None,
    };
    let mut records = Vec::new();
    let mut last_spectrum = None;
    for &workers in &spec.workers {
        let world = WorldConfig::tcp(world_spec.endpoints.clone(), workers);
        let cfg = spec.exec_config(workers);
        let mut session = TcpRankSession::connect(rank, &world, &cfg)?;
        for &strategy in &spec.dist_strategies {
            let label = format!("{strategy} on {n_locs} tcp localities with {workers} workers each");
            let mut repetitions = Vec::with_capacity(spec.repetitions);
            let mut stats = None;
            for rep in 0..WARMUP_RUNS + spec.repetitions {
                let outcome = session.run(input.as_ref(), spec.extents, strategy)?;
                if let (Some(check), Some(spectrum)) = (check.as_mut(), outcome.spectrum.as_ref()) {
                    check.check(spectrum, &format!("{label}, run {rep}"))?;
                }
                if rep >= WARMUP_RUNS {
                    if let Some(all) = &outcome.world_timings {
                        repetitions.push(PhaseTimings::max_merge(all));
                    }
                }
                stats = Some(outcome.stats);
                if outcome.spectrum.is_some() {
                    last_spectrum = outcome.spectrum;
                }
            }
            if is_root {
                records.push(RunRecord {
                    extents: spec.extents,
                    strategy: strategy.name().to_string(),
                    rigor: "none".into(),
                    workers,
                    n_locs,
                    transport: TransportKind::Tcp.name().to_string(),
                    repetitions,
                    planning_time: 0.0,
                    comm: stats,
                });
            }
        }
    }
    Ok(last_spectrum.map(|last_spectrum| Sweep { records, last_spectrum }))
}
