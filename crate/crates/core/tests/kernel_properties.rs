mod common;

use common::{random_complex, random_real, rel_err};
use proptest::prelude::*;
use taskfft::kernel::dft_reference_real;
use taskfft::{dft_reference, plan_1d, ComplexSample, TransformKind};

const TOL: f64 = 1e-10;

fn forward(x: &[ComplexSample]) -> Vec<ComplexSample> {
    plan_1d(x.len(), TransformKind::C2cForward, 1).unwrap().execute_c2c(x).unwrap()
}

fn inverse(x: &[ComplexSample]) -> Vec<ComplexSample> {
    plan_1d(x.len(), TransformKind::C2cInverse, 1)
        .unwrap()
        .execute_c2c_inverse(x)
        .unwrap()
}

fn r2c(x: &[f64]) -> Vec<ComplexSample> {
    plan_1d(x.len(), TransformKind::R2c, 1).unwrap().execute_r2c(x).unwrap()
}

fn energy(x: &[ComplexSample]) -> f64 {
    x.iter().map(|c| c.norm_sqr()).sum()
}

fn parseval_err(x: &[ComplexSample]) -> f64 {
    let lhs = energy(x) * x.len() as f64;
    let rhs = energy(&forward(x));
    (lhs - rhs).abs() / lhs
}

fn linearity_err(x: &[ComplexSample], y: &[ComplexSample], a: ComplexSample, b: ComplexSample) -> f64 {
    let mixed: Vec<_> = x.iter().zip(y).map(|(p, q)| a * p + b * q).collect();
    let expected: Vec<_> = forward(x).iter().zip(forward(y)).map(|(p, q)| a * p + b * q).collect();
    rel_err(&forward(&mixed), &expected)
}

fn hermitian_err(x: &[f64]) -> f64 {
    let n = x.len();
    let full = forward(&x.iter().map(|&v| ComplexSample::new(v, 0.0)).collect::<Vec<_>>());
    let mirrored: Vec<_> = (0..n).map(|k| full[(n - k) % n].conj()).collect();
    let half = r2c(x);
    rel_err(&full, &mirrored).max(rel_err(&half, &full[..n / 2 + 1]))
}

fn round_trip_err(x: &[ComplexSample]) -> f64 {
    let n = x.len() as f64;
    let back: Vec<_> = inverse(&forward(x)).iter().map(|c| c / n).collect();
    rel_err(&back, x)
}

#[test]
fn properties_hold_for_every_power_of_two_up_to_4096() {
    for log in 1..=12 {
        let n = 1usize << log;
        for seed in 0..10u64 {
            let x = random_complex(n, seed);
            let y = random_complex(n, seed + 1000);
            let r = random_real(n, seed + 2000);
            let a = ComplexSample::new(0.75, -1.25);
            let b = ComplexSample::new(-2.0, 0.5);
            assert!(parseval_err(&x) <= TOL, "parseval n={n} seed={seed}");
            assert!(linearity_err(&x, &y, a, b) <= TOL, "linearity n={n} seed={seed}");
            assert!(hermitian_err(&r) <= TOL, "hermitian n={n} seed={seed}");
            assert!(round_trip_err(&x) <= TOL, "round trip n={n} seed={seed}");
        }
    }
}

#[test]
fn fft_matches_brute_force_dft() {
    for log in 1..=10 {
        let n = 1usize << log;
        for seed in 0..3u64 {
            let x = random_complex(n, seed);
            let e = rel_err(&forward(&x), &dft_reference(&x).unwrap());
            assert!(e <= TOL, "n={n} seed={seed} err={e:e}");
            let r = random_real(n, seed);
            let e = rel_err(&r2c(&r), &dft_reference_real(&r).unwrap());
            assert!(e <= TOL, "r2c n={n} seed={seed} err={e:e}");
        }
    }
}

#[test]
fn batched_plans_transform_each_segment() {
    let plan = plan_1d(16, TransformKind::C2cForward, 4).unwrap();
    let x = random_complex(64, 9);
    let batched = plan.execute_c2c(&x).unwrap();
    for (seg, out) in x.chunks(16).zip(batched.chunks(16)) {
        assert!(rel_err(out, &forward(seg)) <= TOL);
    }
}

fn complex_vec(max_log: u32) -> impl Strategy<Value = Vec<ComplexSample>> {
    (1..=max_log).prop_flat_map(|log| {
        prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1usize << log)
            .prop_map(|v| v.into_iter().map(|(re, im)| ComplexSample::new(re, im)).collect())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prop_parseval(x in complex_vec(10)) {
        prop_assume!(energy(&x) > 0.0);
        prop_assert!(parseval_err(&x) <= TOL);
    }

    #[test]
    fn prop_round_trip(x in complex_vec(10)) {
        prop_assert!(round_trip_err(&x) <= TOL);
    }

    #[test]
    fn prop_linearity(
        (x, y) in (1u32..=9).prop_flat_map(|log| {
            let v = || prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1usize << log)
                .prop_map(|v| v.into_iter().map(|(re, im)| ComplexSample::new(re, im)).collect::<Vec<_>>());
            (v(), v())
        }),
        ar in -5.0f64..5.0, ai in -5.0f64..5.0, br in -5.0f64..5.0, bi in -5.0f64..5.0,
    ) {
        let e = linearity_err(&x, &y, ComplexSample::new(ar, ai), ComplexSample::new(br, bi));
        prop_assert!(e <= TOL || energy(&forward(&x)) == 0.0, "err {e:e}");
    }

    #[test]
    fn prop_hermitian(x in (1u32..=10).prop_flat_map(|log| prop::collection::vec(-1e3f64..1e3, 1usize << log))) {
        prop_assume!(x.iter().any(|&v| v != 0.0));
        prop_assert!(hermitian_err(&x) <= TOL);
    }

    #[test]
    fn prop_matches_oracle(x in complex_vec(7)) {
        prop_assume!(energy(&x) > 0.0);
        prop_assert!(rel_err(&forward(&x), &dft_reference(&x).unwrap()) <= TOL);
    }
}
