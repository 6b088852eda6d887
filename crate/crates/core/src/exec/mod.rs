//! Shared-memory 2D real-to-complex FFT under five scheduling strategies.
//!
//! Every strategy runs the same four steps (row r2c FFTs, transpose, column
//! c2c FFTs, transpose back) with the same kernels on the same row
//! intervals, so outputs are bitwise identical; only task dependencies and
//! barrier placement differ:
//!
//! | strategy         | transposes       | global barriers                      |
//! |------------------|------------------|--------------------------------------|
//! | `FutureNaive`    | read-contiguous  | after transpose 1 only               |
//! | `FutureOpt`      | write-contiguous | before each transpose                |
//! | `FutureSync`     | write-contiguous | after every step                     |
//! | `FutureRegistry` | write-contiguous | as `FutureSync`, name-resolved tasks |
//! | `ParallelLoop`   | write-contiguous | end of each bundled loop             |
//!
//! Phase timings are read on the orchestrating thread when the last task of a
//! phase is observed complete, so work overlapped across phases is charged to
//! the phase that closes it.

mod pipeline;
pub mod registry;
pub mod runtime;
pub mod trace;

use std::cell::Cell;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{FftError, Result};
use crate::kernel::{Plan1D, TransformKind};
use crate::matrix::{SignalMatrix, SpectrumMatrix};

pub use pipeline::{bundle_intervals, PipelineState};
pub use registry::TaskRegistry;
pub use runtime::{join_all, TaskHandle, TaskPool};
pub use trace::{BarrierEvent, EventTrace, TaskEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StrategyKind {
    FutureNaive,
    FutureOpt,
    FutureSync,
    FutureRegistry,
    ParallelLoop,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::FutureNaive,
        StrategyKind::FutureOpt,
        StrategyKind::FutureSync,
        StrategyKind::FutureRegistry,
        StrategyKind::ParallelLoop,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::FutureNaive => "future_naive",
            StrategyKind::FutureOpt => "future_opt",
            StrategyKind::FutureSync => "future_sync",
            StrategyKind::FutureRegistry => "future_registry",
            StrategyKind::ParallelLoop => "parallel_loop",
        }
    }

    /// Whether the transposes stream reads (scattered writes) instead of
    /// streaming writes.
    pub fn uses_read_contiguous_transpose(self) -> bool {
        self == StrategyKind::FutureNaive
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = FftError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == key || k.name().trim_start_matches("future_") == key)
            .ok_or_else(|| FftError::Config(format!("unknown strategy `{s}`")))
    }
}

/// Pipeline steps, in execution order, plus the two distributed-only steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    FftDim1,
    Transpose1,
    FftDim2,
    Transpose2,
    Communicate,
    Rearrange,
}

impl Phase {
    pub const ALL: [Phase; 6] = [
        Phase::FftDim1,
        Phase::Transpose1,
        Phase::FftDim2,
        Phase::Transpose2,
        Phase::Communicate,
        Phase::Rearrange,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Phase::FftDim1 => "fft_dim1",
            Phase::Transpose1 => "transpose_1",
            Phase::FftDim2 => "fft_dim2",
            Phase::Transpose2 => "transpose_2",
            Phase::Communicate => "communicate",
            Phase::Rearrange => "rearrange",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Wall-clock seconds per phase.
///
/// `scatter_gather` holds the distributed runs' initial scatter and final
/// gather, which sit outside the six pipeline phases but inside `total`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub fft_dim1: f64,
    pub transpose_1: f64,
    pub fft_dim2: f64,
    pub transpose_2: f64,
    pub communicate: f64,
    pub rearrange: f64,
    pub scatter_gather: f64,
    pub total: f64,
}

impl PhaseTimings {
    pub fn get(&self, phase: Phase) -> f64 {
        match phase {
            Phase::FftDim1 => self.fft_dim1,
            Phase::Transpose1 => self.transpose_1,
            Phase::FftDim2 => self.fft_dim2,
            Phase::Transpose2 => self.transpose_2,
            Phase::Communicate => self.communicate,
            Phase::Rearrange => self.rearrange,
        }
    }

    fn slot(&mut self, phase: Phase) -> &mut f64 {
        match phase {
            Phase::FftDim1 => &mut self.fft_dim1,
            Phase::Transpose1 => &mut self.transpose_1,
            Phase::FftDim2 => &mut self.fft_dim2,
            Phase::Transpose2 => &mut self.transpose_2,
            Phase::Communicate => &mut self.communicate,
            Phase::Rearrange => &mut self.rearrange,
        }
    }

    pub fn add(&mut self, phase: Phase, seconds: f64) {
        *self.slot(phase) += seconds;
    }

    pub fn set(&mut self, phase: Phase, seconds: f64) {
        *self.slot(phase) = seconds;
    }

    pub fn phase_sum(&self) -> f64 {
        Phase::ALL.iter().map(|&p| self.get(p)).sum()
    }

    /// Durations are non-negative and the phases fit inside the total, with
    /// 5% slack for timer overhead.
    pub fn is_consistent(&self) -> bool {
        let all_non_negative = Phase::ALL.iter().all(|&p| self.get(p) >= 0.0)
            && self.scatter_gather >= 0.0
            && self.total >= 0.0;
        all_non_negative && self.phase_sum() <= self.total * 1.05 + 1e-9
    }

    /// Element-wise maximum, the bound on wall-clock across localities.
    pub fn max_merge<'a>(timings: impl IntoIterator<Item = &'a PhaseTimings>) -> PhaseTimings {
        timings.into_iter().fold(PhaseTimings::default(), |mut acc, t| {
            for p in Phase::ALL {
                let v = acc.get(p).max(t.get(p));
                acc.set(p, v);
            }
            acc.scatter_gather = acc.scatter_gather.max(t.scatter_gather);
            acc.total = acc.total.max(t.total);
            acc
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecConfig {
    pub workers: usize,
    /// Rows per FFT task; `None` picks the strategy default.
    pub fft_bundle: Option<usize>,
    /// Rows per transpose task; `None` picks the strategy default.
    pub transpose_bundle: Option<usize>,
}

impl ExecConfig {
    pub fn new(workers: usize) -> Self {
        ExecConfig {
            workers,
            fft_bundle: None,
            transpose_bundle: None,
        }
    }

    pub fn with_bundles(mut self, fft: Option<usize>, transpose: Option<usize>) -> Self {
        self.fft_bundle = fft;
        self.transpose_bundle = transpose;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(FftError::Config("workers must be at least 1".into()));
        }
        if self.fft_bundle == Some(0) || self.transpose_bundle == Some(0) {
            return Err(FftError::Config("bundle sizes must be at least 1".into()));
        }
        Ok(())
    }

    fn default_bundle(&self, strategy: StrategyKind, rows: usize) -> usize {
        match strategy {
            StrategyKind::ParallelLoop => rows.div_ceil(self.workers).max(1),
            _ => 1,
        }
    }

    pub fn fft_bundle_for(&self, strategy: StrategyKind, rows: usize) -> usize {
        self.fft_bundle
            .unwrap_or_else(|| self.default_bundle(strategy, rows))
    }

    pub fn transpose_bundle_for(&self, strategy: StrategyKind, rows: usize) -> usize {
        self.transpose_bundle
            .unwrap_or_else(|| self.default_bundle(strategy, rows))
    }
}

thread_local! {
    static PIPELINE_RUNS: Cell<u64> = const { Cell::new(0) };
}

/// Pipeline executions started from the current thread. Used to verify that
/// estimate-mode planning never runs the pipeline.
pub fn pipeline_runs_on_current_thread() -> u64 {
    PIPELINE_RUNS.with(Cell::get)
}

/// Row and column plans for one input extent.
#[derive(Debug, Clone)]
pub struct PipelinePlans {
    pub rows: Plan1D,
    pub cols: Plan1D,
}

impl PipelinePlans {
    pub fn for_input(input: &SignalMatrix) -> Result<Self> {
        let ext = input.extents();
        ext.require_fft_extents()?;
        Ok(PipelinePlans {
            rows: Plan1D::new(ext.cols(), TransformKind::R2c, 1)?,
            cols: Plan1D::new(ext.rows(), TransformKind::C2cForward, 1)?,
        })
    }

    fn matches(&self, input: &SignalMatrix) -> bool {
        self.rows.length() == input.cols()
            && self.rows.kind() == TransformKind::R2c
            && self.cols.length() == input.rows()
            && self.cols.kind() == TransformKind::C2cForward
    }
}

/// A worker pool plus the registry used by `FutureRegistry`.
pub struct Executor {
    pool: TaskPool,
    registry: Arc<TaskRegistry>,
}

impl Executor {
    pub fn new(workers: usize) -> Result<Self> {
        Ok(Executor {
            pool: TaskPool::new(workers)?,
            registry: Arc::new(TaskRegistry::with_pipeline_tasks()),
        })
    }

    pub fn workers(&self) -> usize {
        self.pool.workers()
    }

    pub fn pool(&self) -> &TaskPool {
        &self.pool
    }

    pub fn registry(&self) -> &TaskRegistry {
        &self.registry
    }

    pub fn fft2d_r2c(
        &self,
        input: &SignalMatrix,
        strategy: StrategyKind,
        cfg: &ExecConfig,
    ) -> Result<(SpectrumMatrix, PhaseTimings)> {
        let plans = PipelinePlans::for_input(input)?;
        self.run(input, strategy, cfg, &plans, None)
    }

    pub fn fft2d_r2c_traced(
        &self,
        input: &SignalMatrix,
        strategy: StrategyKind,
        cfg: &ExecConfig,
        trace: Arc<EventTrace>,
    ) -> Result<(SpectrumMatrix, PhaseTimings)> {
        let plans = PipelinePlans::for_input(input)?;
        self.run(input, strategy, cfg, &plans, Some(trace))
    }

    /// Runs the pipeline with caller-provided plans.
    pub fn run(
        &self,
        input: &SignalMatrix,
        strategy: StrategyKind,
        cfg: &ExecConfig,
        plans: &PipelinePlans,
        trace: Option<Arc<EventTrace>>,
    ) -> Result<(SpectrumMatrix, PhaseTimings)> {
        cfg.validate()?;
        if cfg.workers != self.workers() {
            return Err(FftError::Config(format!(
                "config asks for {} workers but the executor has {}",
                cfg.workers,
                self.workers()
            )));
        }
        input.extents().require_fft_extents()?;
        if !plans.matches(input) {
            return Err(FftError::shape(
                format!("plans for {}", input.extents()),
                format!("plans of lengths {}/{}", plans.rows.length(), plans.cols.length()),
            ));
        }
        PIPELINE_RUNS.with(|c| c.set(c.get() + 1));

        let state = Arc::new(PipelineState::new(
            input.clone(),
            plans.rows.clone(),
            plans.cols.clone(),
            trace,
        ));
        let timings = pipeline::run(&self.pool, &self.registry, &state, strategy, cfg)?;
        let state = Arc::try_unwrap(state)
            .map_err(|_| FftError::Task("pipeline state still shared after completion".into()))?;
        Ok((state.into_output(), timings))
    }
}

/// One-shot 2D r2c FFT on a fresh pool of `cfg.workers` threads.
pub fn fft2d_r2c(
    input: &SignalMatrix,
    strategy: StrategyKind,
    cfg: &ExecConfig,
) -> Result<(SpectrumMatrix, PhaseTimings)> {
    cfg.validate()?;
    Executor::new(cfg.workers)?.fft2d_r2c(input, strategy, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{BitwiseEq, MatrixExtents};

    fn ones(n: usize, m: usize) -> SignalMatrix {
        SignalMatrix::from_vec(MatrixExtents::new(n, m).unwrap(), vec![1.0; n * m]).unwrap()
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in StrategyKind::ALL {
            assert_eq!(s.name().parse::<StrategyKind>().unwrap(), s);
        }
        assert_eq!("opt".parse::<StrategyKind>().unwrap(), StrategyKind::FutureOpt);
        assert_eq!("parallel-loop".parse::<StrategyKind>().unwrap(), StrategyKind::ParallelLoop);
        assert!("bogus".parse::<StrategyKind>().is_err());
    }

    #[test]
    fn zero_input_gives_zero_spectrum() {
        let input = SignalMatrix::zeros(MatrixExtents::new(4, 4).unwrap());
        for s in StrategyKind::ALL {
            let (out, _) = fft2d_r2c(&input, s, &ExecConfig::new(2)).unwrap();
            assert_eq!(out.extents(), MatrixExtents::new(4, 3).unwrap());
            assert!(out.data().iter().all(|c| c.norm() == 0.0));
        }
    }

    #[test]
    fn constant_input_is_dc_only() {
        for s in StrategyKind::ALL {
            let (out, _) = fft2d_r2c(&ones(4, 4), s, &ExecConfig::new(2)).unwrap();
            assert!((out.get(0, 0).re - 16.0).abs() < 1e-12);
            assert!(out.get(0, 0).im.abs() < 1e-12);
            for (i, c) in out.data().iter().enumerate().skip(1) {
                assert!(c.norm() < 1e-12, "bin {i} = {c}");
            }
        }
    }

    #[test]
    fn rejects_bad_extents_and_config() {
        let bad = SignalMatrix::zeros(MatrixExtents::new(6, 4).unwrap());
        assert!(matches!(
            fft2d_r2c(&bad, StrategyKind::FutureSync, &ExecConfig::new(1)),
            Err(FftError::InvalidSize { value: 6, .. })
        ));
        let thin = SignalMatrix::zeros(MatrixExtents::new(1, 4).unwrap());
        assert!(fft2d_r2c(&thin, StrategyKind::FutureOpt, &ExecConfig::new(1)).is_err());
        let ok = ones(4, 4);
        assert!(fft2d_r2c(&ok, StrategyKind::FutureSync, &ExecConfig::new(0)).is_err());
        let cfg = ExecConfig::new(1).with_bundles(Some(0), None);
        assert!(fft2d_r2c(&ok, StrategyKind::FutureSync, &cfg).is_err());

        let exec = Executor::new(2).unwrap();
        assert!(exec
            .fft2d_r2c(&ok, StrategyKind::FutureSync, &ExecConfig::new(3))
            .is_err());
    }

    #[test]
    fn loop_bundle_defaults_to_ceiling() {
        let cfg = ExecConfig::new(3);
        assert_eq!(cfg.fft_bundle_for(StrategyKind::ParallelLoop, 16), 6);
        assert_eq!(cfg.transpose_bundle_for(StrategyKind::ParallelLoop, 9), 3);
        assert_eq!(cfg.fft_bundle_for(StrategyKind::FutureSync, 16), 1);
        let cfg = cfg.with_bundles(Some(4), Some(2));
        assert_eq!(cfg.fft_bundle_for(StrategyKind::ParallelLoop, 16), 4);
        assert_eq!(cfg.transpose_bundle_for(StrategyKind::FutureNaive, 16), 2);
    }

    #[test]
    fn bundles_do_not_change_output() {
        let input = crate::bench::rng::synthetic_matrix(MatrixExtents::new(16, 8).unwrap(), 3);
        let exec = Executor::new(2).unwrap();
        let (base, _) = exec
            .fft2d_r2c(&input, StrategyKind::FutureSync, &ExecConfig::new(2))
            .unwrap();
        for s in StrategyKind::ALL {
            for (f, t) in [(Some(3), Some(2)), (Some(16), Some(1)), (None, Some(5))] {
                let cfg = ExecConfig::new(2).with_bundles(f, t);
                let (out, _) = exec.fft2d_r2c(&input, s, &cfg).unwrap();
                assert!(out.bitwise_eq(&base), "{s} {f:?} {t:?}");
            }
        }
    }

    #[test]
    fn timings_are_consistent() {
        let input = crate::bench::rng::synthetic_matrix(MatrixExtents::new(32, 32).unwrap(), 1);
        for s in StrategyKind::ALL {
            let (_, t) = fft2d_r2c(&input, s, &ExecConfig::new(2)).unwrap();
            assert!(t.is_consistent(), "{s}: {t:?}");
            assert_eq!(t.communicate, 0.0);
            assert_eq!(t.rearrange, 0.0);
        }
    }

    #[test]
    fn registry_lookups_equal_task_count() {
        let input = crate::bench::rng::synthetic_matrix(MatrixExtents::new(16, 16).unwrap(), 9);
        let exec = Executor::new(2).unwrap();
        let before = exec.registry().lookups();
        let trace = Arc::new(EventTrace::new());
        exec.fft2d_r2c_traced(&input, StrategyKind::FutureRegistry, &ExecConfig::new(2), trace.clone())
            .unwrap();
        // 16 + 9 + 9 + 16 single-row tasks
        assert_eq!(exec.registry().lookups() - before, 50);
        assert_eq!(trace.tasks().len(), 50);
    }

    #[test]
    fn max_merge_takes_elementwise_max() {
        let a = PhaseTimings {
            fft_dim1: 1.0,
            communicate: 0.5,
            total: 3.0,
            ..Default::default()
        };
        let b = PhaseTimings {
            fft_dim1: 2.0,
            rearrange: 0.25,
            total: 2.5,
            ..Default::default()
        };
        let m = PhaseTimings::max_merge([&a, &b]);
        assert_eq!(m.fft_dim1, 2.0);
        assert_eq!(m.communicate, 0.5);
        assert_eq!(m.rearrange, 0.25);
        assert_eq!(m.total, 3.0);
    }
}
