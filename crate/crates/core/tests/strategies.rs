mod common;

use std::sync::Arc;

use common::{assert_bitwise, direct_dft_2d, ext, rel_err};
use proptest::prelude::*;
use taskfft::bench::oracle_spectrum;
use taskfft::bench::rng::synthetic_matrix;
use taskfft::exec::EventTrace;
use taskfft::{ExecConfig, Executor, FftError, Phase, SignalMatrix, StrategyKind};

#[test]
fn row_column_oracle_agrees_with_double_sum() {
    for (n, m) in [(4, 4), (8, 4), (4, 16), (16, 8)] {
        let input = synthetic_matrix(ext(n, m), 3);
        let a = oracle_spectrum(&input).unwrap();
        let b = direct_dft_2d(&input);
        assert!(rel_err(a.data(), b.data()) <= 1e-12, "{n}x{m}");
    }
}

#[test]
fn every_strategy_matches_double_sum_on_rectangles() {
    let exec = Executor::new(3).unwrap();
    for (n, m) in [(2, 2), (2, 8), (8, 2), (16, 4), (4, 32)] {
        let input = synthetic_matrix(ext(n, m), 17);
        let expected = direct_dft_2d(&input);
        for s in StrategyKind::ALL {
            let (out, t) = exec.fft2d_r2c(&input, s, &ExecConfig::new(3)).unwrap();
            assert!(rel_err(out.data(), expected.data()) <= 1e-10, "{s} {n}x{m}");
            assert!(t.is_consistent(), "{s} {n}x{m}: {t:?}");
        }
    }
}

#[test]
fn bundle_sizes_do_not_change_results() {
    let input = synthetic_matrix(ext(32, 64), 5);
    let exec = Executor::new(2).unwrap();
    let reference = exec.fft2d_r2c(&input, StrategyKind::FutureSync, &ExecConfig::new(2)).unwrap().0;
    for s in StrategyKind::ALL {
        for (fb, tb) in [(1, 1), (3, 5), (7, 2), (32, 33), (100, 100)] {
            let cfg = ExecConfig::new(2).with_bundles(Some(fb), Some(tb));
            let out = exec.fft2d_r2c(&input, s, &cfg).unwrap().0;
            assert_bitwise(&out, &reference, &format!("{s} bundles {fb}/{tb}"));
        }
    }
}

#[test]
fn invalid_inputs_are_rejected() {
    let exec = Executor::new(2).unwrap();
    let odd = SignalMatrix::zeros(ext(12, 8));
    assert!(matches!(
        exec.fft2d_r2c(&odd, StrategyKind::FutureOpt, &ExecConfig::new(2)),
        Err(FftError::InvalidSize { .. })
    ));
    let one = SignalMatrix::zeros(ext(1, 8));
    assert!(exec.fft2d_r2c(&one, StrategyKind::FutureOpt, &ExecConfig::new(2)).is_err());
    let ok = SignalMatrix::zeros(ext(8, 8));
    assert!(matches!(
        exec.fft2d_r2c(&ok, StrategyKind::FutureOpt, &ExecConfig::new(3)),
        Err(FftError::Config(_))
    ));
    let zero_bundle = ExecConfig::new(2).with_bundles(Some(0), None);
    assert!(exec.fft2d_r2c(&ok, StrategyKind::FutureOpt, &zero_bundle).is_err());
}

fn traced(exec: &Executor, input: &SignalMatrix, s: StrategyKind) -> Arc<EventTrace> {
    let trace = Arc::new(EventTrace::new());
    exec.fft2d_r2c_traced(input, s, &ExecConfig::new(exec.workers()), trace.clone())
        .unwrap();
    trace
}

#[test]
fn barrier_placement_per_strategy() {
    let exec = Executor::new(4).unwrap();
    let input = synthetic_matrix(ext(128, 128), 1);
    for _ in 0..3 {
        let naive = traced(&exec, &input, StrategyKind::FutureNaive);
        assert!(naive.overlapping_starts(Phase::FftDim1, Phase::Transpose1) > 0);
        for s in [StrategyKind::FutureOpt, StrategyKind::FutureSync, StrategyKind::ParallelLoop, StrategyKind::FutureRegistry] {
            let t = traced(&exec, &input, s);
            assert_eq!(t.overlapping_starts(Phase::FftDim1, Phase::Transpose1), 0, "{s}");
            assert_eq!(t.overlapping_starts(Phase::FftDim2, Phase::Transpose2), 0, "{s}");
        }
        let sync = traced(&exec, &input, StrategyKind::FutureSync);
        assert_eq!(sync.overlapping_starts(Phase::Transpose1, Phase::FftDim2), 0);
        let afters = |t: &EventTrace| t.barriers().iter().map(|b| b.after).collect::<Vec<_>>();
        // The last entry is the final join, not an interior barrier.
        assert_eq!(afters(&sync), Phase::ALL[..4].to_vec());
        assert_eq!(afters(&naive), [Phase::Transpose1, Phase::Transpose2]);
        let opt = traced(&exec, &input, StrategyKind::FutureOpt);
        assert_eq!(afters(&opt), [Phase::FftDim1, Phase::FftDim2, Phase::Transpose2]);
    }
}

#[test]
fn every_row_is_covered_once_per_phase() {
    let exec = Executor::new(3).unwrap();
    let input = synthetic_matrix(ext(16, 32), 2);
    let bins = 17;
    for s in StrategyKind::ALL {
        let trace = traced(&exec, &input, s);
        for (phase, rows) in [
            (Phase::FftDim1, 16),
            (Phase::Transpose1, if s.uses_read_contiguous_transpose() { 16 } else { bins }),
            (Phase::FftDim2, bins),
            (Phase::Transpose2, if s.uses_read_contiguous_transpose() { bins } else { 16 }),
        ] {
            let mut covered = vec![0u32; rows];
            for e in trace.phase_tasks(phase) {
                for r in e.rows {
                    covered[r] += 1;
                }
            }
            assert!(covered.iter().all(|&c| c == 1), "{s} {phase}: {covered:?}");
        }
    }
}

#[test]
fn registry_resolves_every_task_by_name() {
    let exec = Executor::new(2).unwrap();
    let input = synthetic_matrix(ext(32, 16), 4);
    let before = exec.registry().lookups();
    let trace = traced(&exec, &input, StrategyKind::FutureRegistry);
    assert_eq!(exec.registry().lookups() - before, trace.tasks().len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn strategies_agree_bitwise(
        log_n in 1u32..7, log_m in 1u32..7, seed in any::<u64>(), workers in 1usize..5,
    ) {
        let input = synthetic_matrix(ext(1 << log_n, 1 << log_m), seed);
        let exec = Executor::new(workers).unwrap();
        let cfg = ExecConfig::new(workers);
        let reference = exec.fft2d_r2c(&input, StrategyKind::FutureNaive, &cfg).unwrap().0;
        for s in StrategyKind::ALL {
            let out = exec.fft2d_r2c(&input, s, &cfg).unwrap().0;
            assert_bitwise(&out, &reference, s.name());
        }
    }
}
