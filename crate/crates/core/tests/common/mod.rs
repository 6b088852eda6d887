//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::net::TcpListener;
use std::path::Path;
use std::process::Command;

use taskfft::bench::rng::Lcg64;
use taskfft::{ComplexSample, MatrixExtents, SignalMatrix, SpectrumMatrix};

pub fn ext(rows: usize, cols: usize) -> MatrixExtents {
    MatrixExtents::new(rows, cols).unwrap()
}

pub fn random_complex(n: usize, seed: u64) -> Vec<ComplexSample> {
    let mut rng = Lcg64::new(seed);
    (0..n)
        .map(|_| ComplexSample::new(2.0 * rng.next_f64() - 1.0, 2.0 * rng.next_f64() - 1.0))
        .collect()
}

pub fn random_real(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = Lcg64::new(seed);
    (0..n).map(|_| 2.0 * rng.next_f64() - 1.0).collect()
}

/// `max |a - b| / max |b|`.
pub fn rel_err(actual: &[ComplexSample], expected: &[ComplexSample]) -> f64 {
    assert_eq!(actual.len(), expected.len());
    let diff = actual.iter().zip(expected).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    let scale = expected.iter().map(|b| b.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Double-sum 2D DFT of a real matrix, keeping `cols/2+1` column bins.
pub fn direct_dft_2d(input: &SignalMatrix) -> SpectrumMatrix {
    let (n, m) = (input.rows(), input.cols());
    let bins = m / 2 + 1;
    let mut out = Vec::with_capacity(n * bins);
    for k1 in 0..n {
        for k2 in 0..bins {
            let mut acc = ComplexSample::new(0.0, 0.0);
            for r in 0..n {
                for c in 0..m {
                    let turns = ((k1 * r) % n) as f64 / n as f64 + ((k2 * c) % m) as f64 / m as f64;
                    acc += ComplexSample::from_polar(input.get(r, c), -2.0 * PI * turns);
                }
            }
            out.push(acc);
        }
    }
    SpectrumMatrix::from_vec(ext(n, bins), out).unwrap()
}

/// Bitwise spectrum equality with a readable failure.
pub fn assert_bitwise(a: &SpectrumMatrix, b: &SpectrumMatrix, what: &str) {
    use taskfft::matrix::BitwiseEq;
    assert_eq!(a.extents(), b.extents(), "{what}: extents");
    if !a.bitwise_eq(b) {
        let i = a
            .data()
            .iter()
            .zip(b.data())
            .position(|(x, y)| x.re.to_bits() != y.re.to_bits() || x.im.to_bits() != y.im.to_bits())
            .unwrap();
        panic!("{what}: element {i} differs: {} vs {}", a.data()[i], b.data()[i]);
    }
}

/// Reads a `--spectrum-out` dump.
pub fn read_spectrum(path: &Path) -> SpectrumMatrix {
    let bytes = std::fs::read(path).unwrap();
    let word = |i: usize| u64::from_le_bytes(bytes[8 * i..8 * i + 8].try_into().unwrap());
    let (rows, cols) = (word(0) as usize, word(1) as usize);
    assert_eq!(bytes.len(), 16 + rows * cols * 16);
    let data = bytes[16..]
        .chunks_exact(16)
        .map(|c| {
            ComplexSample::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    SpectrumMatrix::from_vec(ext(rows, cols), data).unwrap()
}

pub fn free_ports(n: usize) -> Vec<String> {
    let ls: Vec<TcpListener> = (0..n).map(|_| TcpListener::bind("127.0.0.1:0").unwrap()).collect();
    ls.iter().map(|l| l.local_addr().unwrap().to_string()).collect()
}

/// Runs a two-process tcp world of `rows x cols`; returns the root's spectrum
/// and CSV text.
pub fn two_process_tcp(rows: usize, cols: usize, seed: u64) -> (SpectrumMatrix, String) {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("tcp.csv");
    let spectrum = dir.path().join("tcp.bin");
    let peers = free_ports(2).join(",");
    let (r, c, s) = (rows.to_string(), cols.to_string(), seed.to_string());
    let common = ["--rows", &r, "--cols", &c, "--seed", &s, "--reps", "2", "--workers", "1", "--transport", "tcp", "--peers", &peers];
    let mut rank1 = Command::new(env!("CARGO_BIN_EXE_fft-bench")).args(common).args(["--rank", "1"]).spawn().unwrap();
    let root = Command::new(env!("CARGO_BIN_EXE_fft-bench"))
        .args(common)
        .args(["--rank", "0", "--out", csv.to_str().unwrap(), "--spectrum-out", spectrum.to_str().unwrap()])
        .output()
        .unwrap();
    let status1 = rank1.wait().unwrap();
    assert!(root.status.success(), "root: {}", String::from_utf8_lossy(&root.stderr));
    assert!(status1.success(), "rank 1 failed");
    (read_spectrum(&spectrum), std::fs::read_to_string(&csv).unwrap())
}

