//! Event traces for checking barrier placement after the fact.
//!
//! Ticks come from one shared atomic counter, so "starts before" and "ends
//! after" comparisons are exact even across threads.

use std::ops::Range;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use super::Phase;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskEvent {
    pub phase: Phase,
    pub rows: Range<usize>,
    pub start: u64,
    pub end: u64,
    pub worker: Option<usize>,
}

/// A global barrier closed by the orchestrator once `after` completed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BarrierEvent {
    pub after: Phase,
    pub tick: u64,
}

#[derive(Debug, Default)]
pub struct EventTrace {
    clock: AtomicU64,
    tasks: Mutex<Vec<TaskEvent>>,
    barriers: Mutex<Vec<BarrierEvent>>,
}

impl EventTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn tick(&self) -> u64 {
        self.clock.fetch_add(1, Ordering::SeqCst)
    }

    pub fn record_task(&self, event: TaskEvent) {
        self.tasks.lock().unwrap().push(event);
    }

    pub fn record_barrier(&self, after: Phase) {
        let tick = self.tick();
        self.barriers.lock().unwrap().push(BarrierEvent { after, tick });
    }

    pub fn tasks(&self) -> Vec<TaskEvent> {
        self.tasks.lock().unwrap().clone()
    }

    pub fn barriers(&self) -> Vec<BarrierEvent> {
        self.barriers.lock().unwrap().clone()
    }

    pub fn phase_tasks(&self, phase: Phase) -> Vec<TaskEvent> {
        self.tasks
            .lock()
            .unwrap()
            .iter()
            .filter(|e| e.phase == phase)
            .cloned()
            .collect()
    }

    pub fn last_end(&self, phase: Phase) -> Option<u64> {
        self.phase_tasks(phase).iter().map(|e| e.end).max()
    }

    pub fn first_start(&self, phase: Phase) -> Option<u64> {
        self.phase_tasks(phase).iter().map(|e| e.start).min()
    }

    /// Number of `later` tasks that started before the last `earlier` task
    /// ended.
    pub fn overlapping_starts(&self, earlier: Phase, later: Phase) -> usize {
        let Some(end) = self.last_end(earlier) else {
            return 0;
        };
        self.phase_tasks(later)
            .iter()
            .filter(|e| e.start < end)
            .count()
    }

    pub fn clear(&self) {
        self.tasks.lock().unwrap().clear();
        self.barriers.lock().unwrap().clear();
    }
}
