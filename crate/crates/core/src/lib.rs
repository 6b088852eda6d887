//! Task-parallel two-dimensional real-to-complex FFT.
//!
//! - [`kernel`]: radix-2 1D transforms and a brute-force DFT oracle.
//! - [`matrix`]: row-major matrices, transpose task formulations, slabs.
//! - [`exec`]: the shared-memory pipeline under five scheduling strategies.
//! - [`dist`]: slab-decomposed pipeline over scatter/all-to-all collectives.
//! - [`planner`]: estimate/measure selection of strategy and task size.
//! - [`bench`]: strong-scaling harness, statistics, and CSV output.

pub mod bench;
pub mod dist;
pub mod error;
pub mod exec;
pub mod kernel;
pub mod matrix;
pub mod planner;

pub use error::{FftError, Result};
pub use exec::{fft2d_r2c, ExecConfig, Executor, Phase, PhaseTimings, StrategyKind};
pub use kernel::{dft_reference, plan_1d, ComplexSample, Plan1D, TransformKind};
pub use matrix::{MatrixExtents, SignalMatrix, SpectrumMatrix};
