//! Name-indirected task dispatch.
//!
//! Models a global address space lookup: in registry mode every task launch
//! resolves its entry point from a string key before running, which adds a
//! hash lookup and a key allocation per task.

use std::collections::HashMap;
use std::ops::Range;
use std::sync::atomic::{AtomicUsize, Ordering};

use super::pipeline::{self, PipelineState};
use crate::error::{FftError, Result};

pub type TaskEntry = fn(&PipelineState, Range<usize>) -> Result<()>;

pub const FFT_DIM1: &str = "fft_dim1";
pub const TRANSPOSE_1: &str = "transpose_1";
pub const FFT_DIM2: &str = "fft_dim2";
pub const TRANSPOSE_2: &str = "transpose_2";
pub const TRANSPOSE_1_READ: &str = "transpose_1_read";
pub const TRANSPOSE_2_READ: &str = "transpose_2_read";

#[derive(Debug, Default)]
pub struct TaskRegistry {
    entries: HashMap<String, TaskEntry>,
    lookups: AtomicUsize,
}

impl TaskRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Registry holding every pipeline task body.
    pub fn with_pipeline_tasks() -> Self {
        let mut r = Self::empty();
        r.register(FFT_DIM1, pipeline::fft_dim1);
        r.register(TRANSPOSE_1, pipeline::transpose_1_write);
        r.register(FFT_DIM2, pipeline::fft_dim2);
        r.register(TRANSPOSE_2, pipeline::transpose_2_write);
        r.register(TRANSPOSE_1_READ, pipeline::transpose_1_read);
        r.register(TRANSPOSE_2_READ, pipeline::transpose_2_read);
        r
    }

    pub fn register(&mut self, name: &str, entry: TaskEntry) {
        self.entries.insert(name.to_string(), entry);
    }

    pub fn lookup(&self, name: &str) -> Result<TaskEntry> {
        self.lookups.fetch_add(1, Ordering::Relaxed);
        self.entries
            .get(name)
            .copied()
            .ok_or_else(|| FftError::Registry(name.to_string()))
    }

    pub fn lookups(&self) -> usize {
        self.lookups.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
