//! Strategy and task-size selection for the shared-memory pipeline.
//!
//! `Estimate` scores every candidate with an analytic cost model and never
//! touches data. `Measure` runs every candidate three times on scratch data
//! and keeps the fastest median. Either way the resulting [`Plan2D`] can be
//! executed on any input of the planned extents.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;
use std::sync::RwLock;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bench::rng::synthetic_matrix;
use crate::error::{FftError, Result};
use crate::exec::{ExecConfig, Executor, PhaseTimings, PipelinePlans, StrategyKind};
use crate::kernel::{Plan1D, TransformKind};
use crate::matrix::{MatrixExtents, SignalMatrix, SpectrumMatrix};

/// Scratch executions per candidate in measure mode.
pub const MEASURE_REPETITIONS: usize = 3;

/// Seed of the scratch matrix used by measure mode.
pub const SCRATCH_SEED: u64 = 0x5eed_f00d;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PlanningRigor {
    Estimate,
    Measure,
}

impl PlanningRigor {
    pub fn name(self) -> &'static str {
        match self {
            PlanningRigor::Estimate => "estimate",
            PlanningRigor::Measure => "measure",
        }
    }
}

impl fmt::Display for PlanningRigor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlanningRigor {
    type Err = FftError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "estimate" => Ok(PlanningRigor::Estimate),
            "measure" => Ok(PlanningRigor::Measure),
            _ => Err(FftError::Config(format!("unknown planning rigor `{s}`"))),
        }
    }
}

/// One point of the search space. `bundle` is the row count of both FFT and
/// transpose tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Candidate {
    pub strategy: StrategyKind,
    pub bundle: usize,
}

impl Candidate {
    pub fn new(strategy: StrategyKind, bundle: usize) -> Self {
        Candidate { strategy, bundle }
    }

    /// Each strategy with the bundle it would use by default.
    pub fn defaults(extents: MatrixExtents, workers: usize) -> Vec<Candidate> {
        let cfg = ExecConfig::new(workers);
        StrategyKind::ALL
            .iter()
            .map(|&s| Candidate::new(s, cfg.fft_bundle_for(s, extents.rows())))
            .collect()
    }
}

/// Constants of the estimate cost model, in seconds per unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    /// Per floating-point operation.
    pub alpha: f64,
    /// Per contiguous element access.
    pub beta: f64,
    /// Weight of a strided transpose write relative to a contiguous access.
    /// A strided read costs half of this.
    pub cache_penalty: f64,
    /// Per spawned task.
    pub task_overhead: f64,
    /// Per global barrier.
    pub barrier_cost: f64,
    /// Per registry lookup.
    pub lookup_cost: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            alpha: 2.5e-10,
            beta: 1.0e-9,
            cache_penalty: 4.0,
            task_overhead: 2.0e-6,
            barrier_cost: 1.0e-5,
            lookup_cost: 1.0e-7,
        }
    }
}

fn fft_flops(n: usize) -> f64 {
    5.0 * n as f64 * (n as f64).log2()
}

impl CostModel {
    /// Predicted wall time of one pipeline run.
    pub fn cost(&self, extents: MatrixExtents, workers: usize, c: Candidate) -> f64 {
        let (n, m) = (extents.rows(), extents.cols());
        let bins = m / 2 + 1;
        let bundle = c.bundle.max(1);
        let workers = workers.max(1);
        let lookup = if c.strategy == StrategyKind::FutureRegistry {
            self.lookup_cost
        } else {
            0.0
        };

        // Makespan of `rows` rows cut into bundles and run in waves.
        let phase = |rows: usize, per_row: f64| {
            let waves = rows.div_ceil(bundle).div_ceil(workers) as f64;
            waves * (bundle.min(rows) as f64 * per_row + self.task_overhead + lookup)
        };

        let row_fft = self.alpha * fft_flops(m) + self.beta * (m + bins) as f64;
        let col_fft = self.alpha * fft_flops(n) + self.beta * 2.0 * n as f64;
        let (t1_row, t2_row) = if c.strategy.uses_read_contiguous_transpose() {
            // Reads stream, writes stride.
            (
                self.beta * bins as f64 * (1.0 + self.cache_penalty),
                self.beta * n as f64 * (1.0 + self.cache_penalty),
            )
        } else {
            // Writes stream, reads stride.
            (
                self.beta * n as f64 * (1.0 + self.cache_penalty / 2.0),
                self.beta * bins as f64 * (1.0 + self.cache_penalty / 2.0),
            )
        };
        let (t1_rows, t2_rows) = if c.strategy.uses_read_contiguous_transpose() {
            (n, bins)
        } else {
            (bins, n)
        };

        let barriers = match c.strategy {
            StrategyKind::FutureNaive => 1.0,
            StrategyKind::FutureOpt => 2.0,
            _ => 3.0,
        };
        phase(n, row_fft)
            + phase(t1_rows, t1_row)
            + phase(bins, col_fft)
            + phase(t2_rows, t2_row)
            + barriers * self.barrier_cost
    }
}

/// Recorded scratch timings of one candidate, in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSample {
    pub candidate: Candidate,
    pub times: Vec<f64>,
}

impl CandidateSample {
    /// Median of the recorded times; the value compared across candidates.
    pub fn sample(&self) -> f64 {
        let mut t = self.times.clone();
        t.sort_by(f64::total_cmp);
        match t.len() {
            0 => f64::INFINITY,
            l if l % 2 == 1 => t[l / 2],
            l => 0.5 * (t[l / 2 - 1] + t[l / 2]),
        }
    }
}

/// A chosen configuration with prebuilt 1D plans, reusable on any input of
/// equal extents.
#[derive(Debug, Clone)]
pub struct Plan2D {
    pub extents: MatrixExtents,
    pub rigor: PlanningRigor,
    pub strategy: StrategyKind,
    pub fft_bundle: usize,
    pub transpose_bundle: usize,
    /// Row transforms: real-to-complex of length `cols`.
    pub plan_dim1: Plan1D,
    /// Column transforms: complex forward of length `rows`.
    pub plan_dim2: Plan1D,
    pub workers: usize,
    /// Seconds spent in planning.
    pub planning_time: f64,
    /// Measure mode only, in candidate order.
    pub samples: Vec<CandidateSample>,
}

impl Plan2D {
    pub fn exec_config(&self) -> ExecConfig {
        ExecConfig::new(self.workers).with_bundles(Some(self.fft_bundle), Some(self.transpose_bundle))
    }

    fn pipeline_plans(&self) -> PipelinePlans {
        PipelinePlans {
            rows: self.plan_dim1.clone(),
            cols: self.plan_dim2.clone(),
        }
    }

    /// Runs the planned configuration on `input`.
    pub fn execute(&self, executor: &Executor, input: &SignalMatrix) -> Result<(SpectrumMatrix, PhaseTimings)> {
        if input.extents() != self.extents {
            return Err(FftError::shape(format!("input of {}", self.extents), input.extents()));
        }
        executor.run(input, self.strategy, &self.exec_config(), &self.pipeline_plans(), None)
    }

    /// Same configuration, ignoring timing metadata.
    pub fn same_choice(&self, other: &Plan2D) -> bool {
        self.extents == other.extents
            && self.strategy == other.strategy
            && self.fft_bundle == other.fft_bundle
            && self.transpose_bundle == other.transpose_bundle
            && self.workers == other.workers
            && self.plan_dim1 == other.plan_dim1
            && self.plan_dim2 == other.plan_dim2
    }

    /// Writes the measure log: a header, then `strategy,bundle,t1,t2,...`
    /// per candidate.
    pub fn write_sample_log<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "strategy,bundle,samples_s")?;
        for s in &self.samples {
            write!(w, "{},{}", s.candidate.strategy.name(), s.candidate.bundle)?;
            for t in &s.times {
                write!(w, ",{t:e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Parses a log written by [`Plan2D::write_sample_log`].
pub fn read_sample_log<R: BufRead>(r: R) -> Result<Vec<CandidateSample>> {
    let bad = |line: &str| FftError::Config(format!("malformed sample log line `{line}`"));
    let mut out = Vec::new();
    for line in r.lines().skip(1) {
        let line = line.map_err(|e| FftError::Config(format!("cannot read sample log: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let strategy: StrategyKind = fields.next().ok_or_else(|| bad(&line))?.parse()?;
        let bundle = fields.next().and_then(|b| b.parse().ok()).ok_or_else(|| bad(&line))?;
        let times = fields
            .map(|t| t.parse::<f64>().map_err(|_| bad(&line)))
            .collect::<Result<Vec<_>>>()?;
        out.push(CandidateSample {
            candidate: Candidate::new(strategy, bundle),
            times,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Default)]
pub struct Planner {
    pub cost_model: CostModel,
}

impl Planner {
    pub fn new(cost_model: CostModel) -> Self {
        Planner { cost_model }
    }

    /// Plans with a throwaway executor of `cfg.workers` threads, created only
    /// if measuring.
    pub fn plan(
        &self,
        extents: MatrixExtents,
        rigor: PlanningRigor,
        cfg: &ExecConfig,
        candidates: &[Candidate],
    ) -> Result<Plan2D> {
        match rigor {
            PlanningRigor::Estimate => self.plan_inner(extents, rigor, cfg, candidates, None),
            PlanningRigor::Measure => {
                cfg.validate()?;
                let executor = Executor::new(cfg.workers)?;
                self.plan_inner(extents, rigor, cfg, candidates, Some(&executor))
            }
        }
    }

    /// Plans on an existing executor, which must have `cfg.workers` threads.
    pub fn plan_with(
        &self,
        executor: &Executor,
        extents: MatrixExtents,
        rigor: PlanningRigor,
        cfg: &ExecConfig,
        candidates: &[Candidate],
    ) -> Result<Plan2D> {
        self.plan_inner(extents, rigor, cfg, candidates, Some(executor))
    }

    fn plan_inner(
        &self,
        extents: MatrixExtents,
        rigor: PlanningRigor,
        cfg: &ExecConfig,
        candidates: &[Candidate],
        executor: Option<&Executor>,
    ) -> Result<Plan2D> {
        let started = Instant::now();
        cfg.validate()?;
        extents.require_fft_extents()?;
        if candidates.is_empty() {
            return Err(FftError::Config("planning needs at least one candidate".into()));
        }
        if let Some(c) = candidates.iter().find(|c| c.bundle == 0) {
            return Err(FftError::Config(format!("candidate {} has bundle 0", c.strategy)));
        }
        let plan_dim1 = Plan1D::new(extents.cols(), TransformKind::R2c, 1)?;
        let plan_dim2 = Plan1D::new(extents.rows(), TransformKind::C2cForward, 1)?;

        let (chosen, samples) = match rigor {
            PlanningRigor::Estimate => {
                let mut best = (0, f64::INFINITY);
                for (i, &c) in candidates.iter().enumerate() {
                    let cost = self.cost_model.cost(extents, cfg.workers, c);
                    if cost < best.1 {
                        best = (i, cost);
                    }
                }
                (candidates[best.0], Vec::new())
            }
            PlanningRigor::Measure => {
                let executor = executor.ok_or_else(|| FftError::Config("measure mode needs an executor".into()))?;
                let scratch = synthetic_matrix(extents, SCRATCH_SEED);
                let plans = PipelinePlans {
                    rows: plan_dim1.clone(),
                    cols: plan_dim2.clone(),
                };
                let mut samples = Vec::with_capacity(candidates.len());
                for &c in candidates {
                    let run_cfg = ExecConfig::new(cfg.workers).with_bundles(Some(c.bundle), Some(c.bundle));
                    let mut times = Vec::with_capacity(MEASURE_REPETITIONS);
                    for _ in 0..MEASURE_REPETITIONS {
                        let t = Instant::now();
                        executor.run(&scratch, c.strategy, &run_cfg, &plans, None)?;
                        times.push(t.elapsed().as_secs_f64());
                    }
                    samples.push(CandidateSample { candidate: c, times });
                }
                let mut best = 0;
                for (i, s) in samples.iter().enumerate() {
                    if s.sample() < samples[best].sample() {
                        best = i;
                    }
                }
                (samples[best].candidate, samples)
            }
        };

        Ok(Plan2D {
            extents,
            rigor,
            strategy: chosen.strategy,
            fft_bundle: chosen.bundle,
            transpose_bundle: chosen.bundle,
            plan_dim1,
            plan_dim2,
            workers: cfg.workers,
            planning_time: started.elapsed().as_secs_f64(),
            samples,
        })
    }
}

/// Plans with the default cost model.
pub fn plan_2d(
    extents: MatrixExtents,
    rigor: PlanningRigor,
    cfg: &ExecConfig,
    candidates: &[Candidate],
) -> Result<Plan2D> {
    Planner::default().plan(extents, rigor, cfg, candidates)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PlanKey {
    pub extents: MatrixExtents,
    pub kind: TransformKind,
    pub workers: usize,
    pub rigor: PlanningRigor,
}

impl PlanKey {
    pub fn r2c(extents: MatrixExtents, workers: usize, rigor: PlanningRigor) -> Self {
        PlanKey {
            extents,
            kind: TransformKind::R2c,
            workers,
            rigor,
        }
    }
}

/// Concurrent lookups, exclusive stores.
#[derive(Debug, Default)]
pub struct PlanCache {
    plans: RwLock<HashMap<PlanKey, Plan2D>>,
}

impl PlanCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn lookup(&self, key: &PlanKey) -> Option<Plan2D> {
        self.plans.read().expect("plan cache poisoned").get(key).cloned()
    }

    /// Replaces any plan already stored under `key`.
    pub fn store(&self, key: PlanKey, plan: Plan2D) {
        self.plans.write().expect("plan cache poisoned").insert(key, plan);
    }

    pub fn len(&self) -> usize {
        self.plans.read().expect("plan cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::pipeline_runs_on_current_thread;
    use crate::matrix::BitwiseEq;

    fn ext(n: usize, m: usize) -> MatrixExtents {
        MatrixExtents::new(n, m).unwrap()
    }

    #[test]
    fn estimate_runs_nothing_and_is_deterministic() {
        let before = pipeline_runs_on_current_thread();
        let cands = Candidate::defaults(ext(256, 256), 4);
        let a = plan_2d(ext(256, 256), PlanningRigor::Estimate, &ExecConfig::new(4), &cands).unwrap();
        let b = plan_2d(ext(256, 256), PlanningRigor::Estimate, &ExecConfig::new(4), &cands).unwrap();
        assert_eq!(pipeline_runs_on_current_thread(), before);
        assert!(a.same_choice(&b));
        assert!(a.samples.is_empty());
        assert!(a.planning_time < 0.05);
    }

    #[test]
    fn empty_candidates_rejected() {
        for rigor in [PlanningRigor::Estimate, PlanningRigor::Measure] {
            assert!(matches!(
                plan_2d(ext(8, 8), rigor, &ExecConfig::new(1), &[]),
                Err(FftError::Config(_))
            ));
        }
        let zero = [Candidate::new(StrategyKind::FutureSync, 0)];
        assert!(plan_2d(ext(8, 8), PlanningRigor::Estimate, &ExecConfig::new(1), &zero).is_err());
    }

    #[test]
    fn single_candidate_is_chosen() {
        let only = [Candidate::new(StrategyKind::FutureOpt, 3)];
        for rigor in [PlanningRigor::Estimate, PlanningRigor::Measure] {
            let p = plan_2d(ext(16, 16), rigor, &ExecConfig::new(2), &only).unwrap();
            assert_eq!((p.strategy, p.fft_bundle, p.transpose_bundle), (StrategyKind::FutureOpt, 3, 3));
        }
    }

    #[test]
    fn measure_records_three_samples_each_and_picks_minimum() {
        let before = pipeline_runs_on_current_thread();
        let cands = [
            Candidate::new(StrategyKind::FutureSync, 1),
            Candidate::new(StrategyKind::ParallelLoop, 16),
        ];
        let p = plan_2d(ext(32, 32), PlanningRigor::Measure, &ExecConfig::new(2), &cands).unwrap();
        assert_eq!(pipeline_runs_on_current_thread() - before, 6);
        assert_eq!(p.samples.len(), 2);
        assert!(p.samples.iter().all(|s| s.times.len() == MEASURE_REPETITIONS));
        let chosen = p.samples.iter().find(|s| s.candidate.strategy == p.strategy).unwrap();
        assert!(p.samples.iter().all(|s| chosen.sample() <= s.sample()));
        let spent: f64 = p.samples.iter().flat_map(|s| &s.times).sum();
        assert!(p.planning_time >= spent);
    }

    #[test]
    fn sample_log_round_trips() {
        let cands = [
            Candidate::new(StrategyKind::FutureNaive, 1),
            Candidate::new(StrategyKind::ParallelLoop, 4),
        ];
        let p = plan_2d(ext(8, 8), PlanningRigor::Measure, &ExecConfig::new(1), &cands).unwrap();
        let mut buf = Vec::new();
        p.write_sample_log(&mut buf).unwrap();
        let back = read_sample_log(&buf[..]).unwrap();
        assert_eq!(back, p.samples);
    }

    #[test]
    fn cost_model_prefers_balanced_bundles() {
        let m = CostModel::default();
        let e = ext(1024, 1024);
        let balanced = m.cost(e, 4, Candidate::new(StrategyKind::ParallelLoop, 256));
        let lopsided = m.cost(e, 4, Candidate::new(StrategyKind::ParallelLoop, 1000));
        assert!(balanced < lopsided);
        let tiny = m.cost(e, 4, Candidate::new(StrategyKind::FutureSync, 1));
        let registry = m.cost(e, 4, Candidate::new(StrategyKind::FutureRegistry, 1));
        assert!(tiny < registry);
    }

    #[test]
    fn planned_output_matches_direct_run() {
        let e = ext(16, 32);
        let input = synthetic_matrix(e, 11);
        let exec = Executor::new(2).unwrap();
        let cfg = ExecConfig::new(2);
        let direct = exec.fft2d_r2c(&input, StrategyKind::FutureSync, &cfg).unwrap().0;
        for rigor in [PlanningRigor::Estimate, PlanningRigor::Measure] {
            let p = Planner::default()
                .plan_with(&exec, e, rigor, &cfg, &Candidate::defaults(e, 2))
                .unwrap();
            assert!(p.execute(&exec, &input).unwrap().0.bitwise_eq(&direct));
        }
        let p = plan_2d(e, PlanningRigor::Estimate, &cfg, &Candidate::defaults(e, 2)).unwrap();
        assert!(p.execute(&exec, &synthetic_matrix(ext(8, 8), 1)).is_err());
    }

    #[test]
    fn cache_semantics() {
        let cache = PlanCache::new();
        let key = PlanKey::r2c(ext(8, 8), 1, PlanningRigor::Estimate);
        assert!(cache.lookup(&key).is_none());
        let a = plan_2d(ext(8, 8), PlanningRigor::Estimate, &ExecConfig::new(1), &[Candidate::new(StrategyKind::FutureOpt, 1)]).unwrap();
        let b = plan_2d(ext(8, 8), PlanningRigor::Estimate, &ExecConfig::new(1), &[Candidate::new(StrategyKind::ParallelLoop, 8)]).unwrap();
        cache.store(key, a.clone());
        assert!(cache.lookup(&key).unwrap().same_choice(&a));
        cache.store(key, b.clone());
        assert!(cache.lookup(&key).unwrap().same_choice(&b));
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn rigor_parses() {
        assert_eq!("Measure".parse::<PlanningRigor>().unwrap(), PlanningRigor::Measure);
        assert!("patient".parse::<PlanningRigor>().is_err());
    }
}
