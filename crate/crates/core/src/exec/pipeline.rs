//! Task bodies of the four-step 2D pipeline and the per-strategy task graphs.
//!
//! Buffers, for an `N x M` real input with `C = M/2 + 1`:
//!
//! ```text
//! input    N x M  real        read by fft_dim1
//! spectrum N x C  complex     written by fft_dim1, read by transpose_1
//! work     C x N  complex     written by transpose_1, fft_dim2 runs in place
//! output   N x C  complex     written by transpose_2
//! ```

use std::ops::Range;
use std::sync::Arc;
use std::time::Instant;

use super::registry::{self, TaskEntry, TaskRegistry};
use super::runtime::{current_worker, join_all, TaskHandle, TaskPool};
use super::trace::{EventTrace, TaskEvent};
use super::{ExecConfig, Phase, PhaseTimings, StrategyKind};
use crate::error::Result;
use crate::kernel::{ComplexSample, Plan1D};
use crate::matrix::{
    transpose_read_rows, transpose_write_rows, BlockSink, SharedMatrix, SignalMatrix,
    SpectrumMatrix,
};

pub struct PipelineState {
    input: SignalMatrix,
    spectrum: SharedMatrix<ComplexSample>,
    work: SharedMatrix<ComplexSample>,
    output: SharedMatrix<ComplexSample>,
    plan_rows: Plan1D,
    plan_cols: Plan1D,
    trace: Option<Arc<EventTrace>>,
}

impl PipelineState {
    pub(super) fn new(
        input: SignalMatrix,
        plan_rows: Plan1D,
        plan_cols: Plan1D,
        trace: Option<Arc<EventTrace>>,
    ) -> Self {
        let spec = input.extents().spectrum();
        PipelineState {
            spectrum: SharedMatrix::new(SpectrumMatrix::zeros(spec)),
            work: SharedMatrix::new(SpectrumMatrix::zeros(spec.transposed())),
            output: SharedMatrix::new(SpectrumMatrix::zeros(spec)),
            input,
            plan_rows,
            plan_cols,
            trace,
        }
    }

    pub(super) fn into_output(self) -> SpectrumMatrix {
        self.output.into_inner()
    }

    fn rows(&self) -> usize {
        self.input.rows()
    }

    fn bins(&self) -> usize {
        self.spectrum.extents().cols()
    }

    fn traced(&self, phase: Phase, rows: Range<usize>, entry: TaskEntry) -> Result<()> {
        match &self.trace {
            None => entry(self, rows),
            Some(trace) => {
                let start = trace.tick();
                let result = entry(self, rows.clone());
                let end = trace.tick();
                trace.record_task(TaskEvent {
                    phase,
                    rows,
                    start,
                    end,
                    worker: current_worker(),
                });
                result
            }
        }
    }

    fn barrier(&self, after: Phase) {
        if let Some(trace) = &self.trace {
            trace.record_barrier(after);
        }
    }
}

// Task bodies. Row intervals index the matrix each task writes, except the
// read-contiguous transposes, which index the rows they read.
//
// SAFETY (all bodies): the task graphs below hand every interval of a phase
// to exactly one task and order phases by dependencies or barriers, so no
// element is written by two tasks or read while being written.

pub(super) fn fft_dim1(s: &PipelineState, rows: Range<usize>) -> Result<()> {
    let out = unsafe { s.spectrum.rows_mut(rows.clone()) };
    s.plan_rows.process_r2c_into(s.input.row_block(rows), out)
}

pub(super) fn transpose_1_read(s: &PipelineState, rows: Range<usize>) -> Result<()> {
    let src = unsafe { s.spectrum.rows(rows.clone()) };
    let mut dst = unsafe { s.work.writer() };
    transpose_read_rows(src, s.spectrum.extents(), rows, &mut dst);
    Ok(())
}

pub(super) fn transpose_1_write(s: &PipelineState, rows: Range<usize>) -> Result<()> {
    let src = unsafe { s.spectrum.rows(0..s.rows()) };
    let offset = rows.start * s.rows();
    let mut dst = BlockSink::new(unsafe { s.work.rows_mut(rows.clone()) }, offset);
    transpose_write_rows(src, s.spectrum.extents(), rows, &mut dst);
    Ok(())
}

pub(super) fn fft_dim2(s: &PipelineState, rows: Range<usize>) -> Result<()> {
    s.plan_cols.process_c2c_inplace(unsafe { s.work.rows_mut(rows) })
}

pub(super) fn transpose_2_read(s: &PipelineState, rows: Range<usize>) -> Result<()> {
    let src = unsafe { s.work.rows(rows.clone()) };
    let mut dst = unsafe { s.output.writer() };
    transpose_read_rows(src, s.work.extents(), rows, &mut dst);
    Ok(())
}

pub(super) fn transpose_2_write(s: &PipelineState, rows: Range<usize>) -> Result<()> {
    let src = unsafe { s.work.rows(0..s.bins()) };
    let offset = rows.start * s.bins();
    let mut dst = BlockSink::new(unsafe { s.output.rows_mut(rows.clone()) }, offset);
    transpose_write_rows(src, s.work.extents(), rows, &mut dst);
    Ok(())
}

/// Splits `0..len` into consecutive intervals of at most `bundle` rows.
pub fn bundle_intervals(len: usize, bundle: usize) -> Vec<Range<usize>> {
    let bundle = bundle.max(1);
    (0..len)
        .step_by(bundle)
        .map(|start| start..(start + bundle).min(len))
        .collect()
}

/// Launches pipeline tasks, directly or through the registry.
struct Launcher<'a> {
    pool: &'a TaskPool,
    state: &'a Arc<PipelineState>,
    registry: Option<&'a Arc<TaskRegistry>>,
}

impl Launcher<'_> {
    fn launch(
        &self,
        deps: &[TaskHandle],
        phase: Phase,
        key: &'static str,
        entry: TaskEntry,
        rows: Range<usize>,
    ) -> TaskHandle {
        let state = Arc::clone(self.state);
        match self.registry {
            None => self
                .pool
                .spawn_after(deps, move || state.traced(phase, rows, entry)),
            Some(registry) => {
                let registry = Arc::clone(registry);
                let key = key.to_string();
                self.pool.spawn_after(deps, move || {
                    let entry = registry.lookup(&key)?;
                    state.traced(phase, rows, entry)
                })
            }
        }
    }

    fn phase(
        &self,
        phase: Phase,
        key: &'static str,
        entry: TaskEntry,
        len: usize,
        bundle: usize,
    ) -> Vec<TaskHandle> {
        bundle_intervals(len, bundle)
            .into_iter()
            .map(|rows| self.launch(&[], phase, key, entry, rows))
            .collect()
    }
}

struct Stopwatch {
    start: Instant,
    last: Instant,
    timings: PhaseTimings,
}

impl Stopwatch {
    fn start() -> Self {
        let now = Instant::now();
        Stopwatch {
            start: now,
            last: now,
            timings: PhaseTimings::default(),
        }
    }

    fn lap(&mut self, phase: Phase) {
        let now = Instant::now();
        self.timings.add(phase, (now - self.last).as_secs_f64());
        self.last = now;
    }

    fn finish(mut self) -> PhaseTimings {
        self.timings.total = (self.last - self.start).as_secs_f64();
        self.timings
    }
}

pub(super) fn run(
    pool: &TaskPool,
    registry: &Arc<TaskRegistry>,
    state: &Arc<PipelineState>,
    strategy: StrategyKind,
    cfg: &ExecConfig,
) -> Result<PhaseTimings> {
    let launcher = Launcher {
        pool,
        state,
        registry: (strategy == StrategyKind::FutureRegistry).then_some(registry),
    };
    match strategy {
        StrategyKind::FutureNaive => run_naive(&launcher, cfg),
        StrategyKind::FutureOpt => run_opt(&launcher, cfg),
        StrategyKind::FutureSync | StrategyKind::FutureRegistry | StrategyKind::ParallelLoop => {
            run_phased(&launcher, cfg, strategy)
        }
    }
}

/// Each FFT task is followed by a read-contiguous transpose of its own rows;
/// the only global barrier sits between the transposes and the second FFTs.
fn run_naive(l: &Launcher<'_>, cfg: &ExecConfig) -> Result<PhaseTimings> {
    let s = l.state;
    let bundle = cfg.fft_bundle_for(StrategyKind::FutureNaive, s.rows());
    let mut clock = Stopwatch::start();

    let (ffts, transposes) = fft_then_transpose(
        l,
        (Phase::FftDim1, registry::FFT_DIM1, fft_dim1),
        (Phase::Transpose1, registry::TRANSPOSE_1_READ, transpose_1_read),
        s.rows(),
        bundle,
    );
    join_all(&ffts)?;
    clock.lap(Phase::FftDim1);
    join_all(&transposes)?;
    clock.lap(Phase::Transpose1);
    s.barrier(Phase::Transpose1);

    let bundle = cfg.fft_bundle_for(StrategyKind::FutureNaive, s.bins());
    let (ffts, transposes) = fft_then_transpose(
        l,
        (Phase::FftDim2, registry::FFT_DIM2, fft_dim2),
        (Phase::Transpose2, registry::TRANSPOSE_2_READ, transpose_2_read),
        s.bins(),
        bundle,
    );
    join_all(&ffts)?;
    clock.lap(Phase::FftDim2);
    join_all(&transposes)?;
    clock.lap(Phase::Transpose2);
    s.barrier(Phase::Transpose2);
    Ok(clock.finish())
}

type PhaseTask = (Phase, &'static str, TaskEntry);

fn fft_then_transpose(
    l: &Launcher<'_>,
    fft: PhaseTask,
    transpose: PhaseTask,
    len: usize,
    bundle: usize,
) -> (Vec<TaskHandle>, Vec<TaskHandle>) {
    bundle_intervals(len, bundle)
        .into_iter()
        .map(|rows| {
            let f = l.launch(&[], fft.0, fft.1, fft.2, rows.clone());
            let t = l.launch(std::slice::from_ref(&f), transpose.0, transpose.1, transpose.2, rows);
            (f, t)
        })
        .unzip()
}

/// Barrier before each write-contiguous transpose; each second-dimension FFT
/// depends only on the transpose tasks that produced its rows.
fn run_opt(l: &Launcher<'_>, cfg: &ExecConfig) -> Result<PhaseTimings> {
    let s = l.state;
    let strategy = StrategyKind::FutureOpt;
    let mut clock = Stopwatch::start();

    let ffts = l.phase(
        Phase::FftDim1,
        registry::FFT_DIM1,
        fft_dim1,
        s.rows(),
        cfg.fft_bundle_for(strategy, s.rows()),
    );
    join_all(&ffts)?;
    clock.lap(Phase::FftDim1);
    s.barrier(Phase::FftDim1);

    let t_bundle = cfg.transpose_bundle_for(strategy, s.bins());
    let transposes = l.phase(
        Phase::Transpose1,
        registry::TRANSPOSE_1,
        transpose_1_write,
        s.bins(),
        t_bundle,
    );
    let ffts: Vec<TaskHandle> = bundle_intervals(s.bins(), cfg.fft_bundle_for(strategy, s.bins()))
        .into_iter()
        .map(|rows| {
            let first = rows.start / t_bundle;
            let last = (rows.end - 1) / t_bundle;
            l.launch(
                &transposes[first..=last],
                Phase::FftDim2,
                registry::FFT_DIM2,
                fft_dim2,
                rows,
            )
        })
        .collect();
    join_all(&transposes)?;
    clock.lap(Phase::Transpose1);
    join_all(&ffts)?;
    clock.lap(Phase::FftDim2);
    s.barrier(Phase::FftDim2);

    let transposes = l.phase(
        Phase::Transpose2,
        registry::TRANSPOSE_2,
        transpose_2_write,
        s.rows(),
        cfg.transpose_bundle_for(strategy, s.rows()),
    );
    join_all(&transposes)?;
    clock.lap(Phase::Transpose2);
    s.barrier(Phase::Transpose2);
    Ok(clock.finish())
}

/// One bundled task set per phase, joined before the next phase starts.
/// Shared by the synchronized, registry, and parallel-loop strategies; they
/// differ in dispatch path and default bundle size.
fn run_phased(l: &Launcher<'_>, cfg: &ExecConfig, strategy: StrategyKind) -> Result<PhaseTimings> {
    let s = l.state;
    let steps: [(Phase, &'static str, TaskEntry, usize, bool); 4] = [
        (Phase::FftDim1, registry::FFT_DIM1, fft_dim1, s.rows(), true),
        (Phase::Transpose1, registry::TRANSPOSE_1, transpose_1_write, s.bins(), false),
        (Phase::FftDim2, registry::FFT_DIM2, fft_dim2, s.bins(), true),
        (Phase::Transpose2, registry::TRANSPOSE_2, transpose_2_write, s.rows(), false),
    ];
    let mut clock = Stopwatch::start();
    for (phase, key, entry, len, is_fft) in steps {
        let bundle = if is_fft {
            cfg.fft_bundle_for(strategy, len)
        } else {
            cfg.transpose_bundle_for(strategy, len)
        };
        let handles = l.phase(phase, key, entry, len, bundle);
        join_all(&handles)?;
        clock.lap(phase);
        s.barrier(phase);
    }
    Ok(clock.finish())
}
