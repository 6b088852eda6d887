//! One-dimensional radix-2 FFT kernels.
//!
//! The fast path is an iterative decimation-in-time Cooley-Tukey transform:
//! a bit-reversal permutation followed by `log2(N)` butterfly stages whose
//! twiddle factors are computed once per plan. Transforms are unnormalized in
//! both directions, so `inverse(forward(x)) == N * x`.
//!
//! [`dft_reference`] evaluates the DFT sum directly in `O(N^2)` and is kept
//! deliberately independent of the plan machinery so it can serve as the
//! oracle for everything built on top of the kernel.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FftError, Result};

/// One complex sample. Real and imaginary parts are 64-bit floats.
pub type ComplexSample = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransformKind {
    /// Real input, `N/2 + 1` output bins per transform.
    R2c,
    C2cForward,
    /// Unnormalized backward transform (conjugated twiddles).
    C2cInverse,
}

impl TransformKind {
    pub fn name(self) -> &'static str {
        match self {
            TransformKind::R2c => "r2c",
            TransformKind::C2cForward => "c2c-forward",
            TransformKind::C2cInverse => "c2c-inverse",
        }
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Twiddle factors `exp(-2*pi*i*k/N)` laid out stage by stage.
///
/// Stage `s` combines sub-transforms of length `2^s` into length `2^(s+1)` and
/// owns `2^s` factors stored contiguously at offset `2^s - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwiddleTable {
    length: usize,
    factors: Vec<ComplexSample>,
}

impl TwiddleTable {
    fn new(length: usize) -> Self {
        debug_assert!(length.is_power_of_two() && length >= 2);
        let step = -2.0 * PI / length as f64;
        let mut factors = Vec::with_capacity(length - 1);
        let mut half = 1;
        while half < length {
            let stride = length / (2 * half);
            factors.extend((0..half).map(|j| {
                let angle = step * (j * stride) as f64;
                ComplexSample::new(angle.cos(), angle.sin())
            }));
            half *= 2;
        }
        TwiddleTable { length, factors }
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn stages(&self) -> usize {
        self.length.trailing_zeros() as usize
    }

    pub fn stage(&self, s: usize) -> &[ComplexSample] {
        let half = 1usize << s;
        &self.factors[half - 1..2 * half - 1]
    }

    pub fn factors(&self) -> &[ComplexSample] {
        &self.factors
    }
}

#[derive(Debug)]
struct PlanTables {
    twiddles: TwiddleTable,
    bit_reverse: Vec<u32>,
}

/// Reusable descriptor for `batch` back-to-back transforms of one length and
/// kind. Cloning is cheap; the twiddle tables are shared.
#[derive(Debug, Clone)]
pub struct Plan1D {
    length: usize,
    kind: TransformKind,
    batch: usize,
    tables: Arc<PlanTables>,
}

impl PartialEq for Plan1D {
    fn eq(&self, other: &Self) -> bool {
        self.length == other.length && self.kind == other.kind && self.batch == other.batch
    }
}

pub fn plan_1d(length: usize, kind: TransformKind, batch: usize) -> Result<Plan1D> {
    Plan1D::new(length, kind, batch)
}

impl Plan1D {
    pub fn new(length: usize, kind: TransformKind, batch: usize) -> Result<Self> {
        if length < 2 {
            return Err(FftError::InvalidSize {
                value: length,
                reason: "transform length must be at least 2",
            });
        }
        if !length.is_power_of_two() {
            return Err(FftError::InvalidSize {
                value: length,
                reason: "transform length must be a power of two",
            });
        }
        if batch == 0 {
            return Err(FftError::InvalidSize {
                value: batch,
                reason: "batch must be at least 1",
            });
        }
        let bits = length.trailing_zeros();
        let bit_reverse = (0..length as u32)
            .map(|i| i.reverse_bits() >> (32 - bits))
            .collect();
        Ok(Plan1D {
            length,
            kind,
            batch,
            tables: Arc::new(PlanTables {
                twiddles: TwiddleTable::new(length),
                bit_reverse,
            }),
        })
    }

    /// Same length and kind, different batch count. Shares the tables.
    pub fn with_batch(&self, batch: usize) -> Result<Self> {
        if batch == 0 {
            return Err(FftError::InvalidSize {
                value: batch,
                reason: "batch must be at least 1",
            });
        }
        Ok(Plan1D {
            batch,
            ..self.clone()
        })
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn stages(&self) -> usize {
        self.tables.twiddles.stages()
    }

    pub fn twiddles(&self) -> &TwiddleTable {
        &self.tables.twiddles
    }

    /// Bins produced per transform.
    pub fn output_len(&self) -> usize {
        match self.kind {
            TransformKind::R2c => self.length / 2 + 1,
            _ => self.length,
        }
    }

    pub fn execute_c2c(&self, data: &[ComplexSample]) -> Result<Vec<ComplexSample>> {
        self.require_kind(TransformKind::C2cForward)?;
        self.require_batch_len(data.len())?;
        let mut out = data.to_vec();
        self.run_c2c(&mut out, false);
        Ok(out)
    }

    /// Unnormalized: `execute_c2c_inverse(execute_c2c(x)) == N * x`.
    pub fn execute_c2c_inverse(&self, bins: &[ComplexSample]) -> Result<Vec<ComplexSample>> {
        self.require_kind(TransformKind::C2cInverse)?;
        self.require_batch_len(bins.len())?;
        let mut out = bins.to_vec();
        self.run_c2c(&mut out, true);
        Ok(out)
    }

    pub fn execute_r2c(&self, data: &[f64]) -> Result<Vec<ComplexSample>> {
        self.require_kind(TransformKind::R2c)?;
        self.require_batch_len(data.len())?;
        let mut out = vec![ComplexSample::default(); self.batch * self.output_len()];
        self.r2c_rows(data, &mut out);
        Ok(out)
    }

    /// In-place c2c over any whole number of contiguous transforms, in the
    /// direction given by the plan kind. Ignores the plan's batch count.
    pub fn process_c2c_inplace(&self, data: &mut [ComplexSample]) -> Result<()> {
        let inverse = match self.kind {
            TransformKind::C2cForward => false,
            TransformKind::C2cInverse => true,
            TransformKind::R2c => {
                return Err(FftError::PlanMisuse {
                    plan: self.kind.name(),
                    required: "c2c-forward or c2c-inverse",
                })
            }
        };
        self.require_whole_transforms(data.len(), self.length)?;
        self.run_c2c(data, inverse);
        Ok(())
    }

    /// r2c over any whole number of contiguous rows: `input` holds rows of
    /// `length` reals, `output` rows of `length / 2 + 1` bins.
    pub fn process_r2c_into(&self, input: &[f64], output: &mut [ComplexSample]) -> Result<()> {
        self.require_kind(TransformKind::R2c)?;
        self.require_whole_transforms(input.len(), self.length)?;
        let rows = input.len() / self.length;
        let expected = rows * self.output_len();
        if output.len() != expected {
            return Err(FftError::shape(
                format!("{expected} output bins"),
                format!("{} output bins", output.len()),
            ));
        }
        self.r2c_rows(input, output);
        Ok(())
    }

    fn require_kind(&self, required: TransformKind) -> Result<()> {
        if self.kind != required {
            return Err(FftError::PlanMisuse {
                plan: self.kind.name(),
                required: required.name(),
            });
        }
        Ok(())
    }

    fn require_batch_len(&self, len: usize) -> Result<()> {
        let expected = self.length * self.batch;
        if len != expected {
            return Err(FftError::shape(
                format!("{expected} samples ({} x {})", self.batch, self.length),
                format!("{len} samples"),
            ));
        }
        Ok(())
    }

    fn require_whole_transforms(&self, len: usize, per: usize) -> Result<()> {
        if len == 0 || !len.is_multiple_of(per) {
            return Err(FftError::shape(
                format!("a non-zero multiple of {per} samples"),
                format!("{len} samples"),
            ));
        }
        Ok(())
    }

    // The real transform is the complex one on promoted data; the upper half
    // of the spectrum is the conjugate mirror and is dropped.
    fn r2c_rows(&self, input: &[f64], output: &mut [ComplexSample]) {
        let n = self.length;
        let bins = self.output_len();
        let mut scratch = vec![ComplexSample::default(); n];
        for (row, out) in input.chunks_exact(n).zip(output.chunks_exact_mut(bins)) {
            for (dst, &x) in scratch.iter_mut().zip(row) {
                *dst = ComplexSample::new(x, 0.0);
            }
            self.transform_one(&mut scratch, false);
            out.copy_from_slice(&scratch[..bins]);
        }
    }

    fn run_c2c(&self, data: &mut [ComplexSample], inverse: bool) {
        for chunk in data.chunks_exact_mut(self.length) {
            self.transform_one(chunk, inverse);
        }
    }

    fn transform_one(&self, data: &mut [ComplexSample], inverse: bool) {
        let n = self.length;
        for (i, &j) in self.tables.bit_reverse.iter().enumerate() {
            let j = j as usize;
            if i < j {
                data.swap(i, j);
            }
        }
        let twiddles = &self.tables.twiddles;
        let mut half = 1;
        let mut stage = 0;
        while half < n {
            let factors = twiddles.stage(stage);
            for block in data.chunks_exact_mut(2 * half) {
                let (lo, hi) = block.split_at_mut(half);
                for ((a, b), w) in lo.iter_mut().zip(hi.iter_mut()).zip(factors) {
                    let w = if inverse { w.conj() } else { *w };
                    let t = *b * w;
                    *b = *a - t;
                    *a += t;
                }
            }
            half *= 2;
            stage += 1;
        }
    }
}

/// Direct `O(N^2)` evaluation of the DFT for any length `N >= 1`.
pub fn dft_reference(data: &[ComplexSample]) -> Result<Vec<ComplexSample>> {
    let n = data.len();
    if n == 0 {
        return Err(FftError::InvalidSize {
            value: 0,
            reason: "DFT input must not be empty",
        });
    }
    Ok((0..n)
        .map(|k| {
            data.iter()
                .enumerate()
                .fold(ComplexSample::default(), |acc, (i, &x)| {
                    // reduce n*k modulo N first so the angle stays small
                    let angle = -2.0 * PI * ((i * k) % n) as f64 / n as f64;
                    acc + x * ComplexSample::new(angle.cos(), angle.sin())
                })
        })
        .collect())
}

/// Direct DFT of a real signal, bins `0..=N/2`.
pub fn dft_reference_real(data: &[f64]) -> Result<Vec<ComplexSample>> {
    let promoted: Vec<ComplexSample> = data.iter().map(|&x| ComplexSample::new(x, 0.0)).collect();
    let mut full = dft_reference(&promoted)?;
    full.truncate(data.len() / 2 + 1);
    Ok(full)
}
