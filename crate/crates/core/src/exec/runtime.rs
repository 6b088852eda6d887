//! Fixed-size work-stealing task pool with continuation handles.
//!
//! A task may name other tasks it depends on; it becomes runnable once all of
//! them have finished. Runnable continuations are pushed onto the finishing
//! worker's own deque, so they usually run next on the same thread while idle
//! workers steal from the other end. A barrier is nothing more than joining
//! every handle of a phase from the orchestrating thread.

use std::any::Any;
use std::cell::Cell;
use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use crossbeam_deque::{Injector, Steal, Stealer, Worker};

use crate::error::{FftError, Result};

type Job = Box<dyn FnOnce() -> Result<()> + Send + 'static>;

thread_local! {
    static WORKER_INDEX: Cell<Option<usize>> = const { Cell::new(None) };
}

/// Index of the pool worker running the current code, if any.
pub fn current_worker() -> Option<usize> {
    WORKER_INDEX.with(Cell::get)
}

#[derive(Default)]
struct NodeState {
    done: bool,
    error: Option<FftError>,
    successors: Vec<Arc<TaskNode>>,
}

struct TaskNode {
    job: Mutex<Option<Job>>,
    // unfinished dependencies, plus one held by the spawner until registration ends
    remaining: AtomicUsize,
    upstream_error: Mutex<Option<FftError>>,
    state: Mutex<NodeState>,
    finished: Condvar,
}

impl TaskNode {
    fn run(&self) -> Vec<Arc<TaskNode>> {
        let job = self.job.lock().unwrap().take();
        let upstream = self.upstream_error.lock().unwrap().take();
        let outcome = match (upstream, job) {
            (Some(err), _) => Err(err),
            (None, Some(job)) => match panic::catch_unwind(AssertUnwindSafe(job)) {
                Ok(result) => result,
                Err(payload) => Err(FftError::Task(panic_message(payload))),
            },
            (None, None) => Ok(()),
        };

        let successors = {
            let mut state = self.state.lock().unwrap();
            state.done = true;
            state.error = outcome.err();
            self.finished.notify_all();
            let error = state.error.clone();
            let successors = std::mem::take(&mut state.successors);
            if let Some(err) = error {
                for s in &successors {
                    s.upstream_error.lock().unwrap().get_or_insert_with(|| err.clone());
                }
            }
            successors
        };
        successors
            .into_iter()
            .filter(|s| s.remaining.fetch_sub(1, Ordering::AcqRel) == 1)
            .collect()
    }
}

fn panic_message(payload: Box<dyn Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "task panicked".to_string()
    }
}

/// Completion handle of a spawned task.
#[derive(Clone)]
pub struct TaskHandle(Arc<TaskNode>);

impl TaskHandle {
    /// Blocks until the task finished. Must not be called from a pool worker.
    pub fn wait(&self) -> Result<()> {
        let mut state = self.0.state.lock().unwrap();
        while !state.done {
            state = self.0.finished.wait(state).unwrap();
        }
        match &state.error {
            Some(err) => Err(err.clone()),
            None => Ok(()),
        }
    }

    pub fn is_finished(&self) -> bool {
        self.0.state.lock().unwrap().done
    }
}

/// Waits for every handle and returns the first error in handle order.
pub fn join_all<'a>(handles: impl IntoIterator<Item = &'a TaskHandle>) -> Result<()> {
    let mut first = Ok(());
    for h in handles {
        let r = h.wait();
        if first.is_ok() {
            first = r;
        }
    }
    first
}

struct Shared {
    injector: Injector<Arc<TaskNode>>,
    stealers: Vec<Stealer<Arc<TaskNode>>>,
    sleepers: AtomicUsize,
    sleep_lock: Mutex<()>,
    wake: Condvar,
    shutdown: AtomicBool,
}

impl Shared {
    fn has_visible_work(&self) -> bool {
        !self.injector.is_empty() || self.stealers.iter().any(|s| !s.is_empty())
    }

    fn notify(&self) {
        if self.sleepers.load(Ordering::SeqCst) > 0 {
            let _guard = self.sleep_lock.lock().unwrap();
            self.wake.notify_one();
        }
    }

    fn find_task(&self, local: &Worker<Arc<TaskNode>>, index: usize) -> Option<Arc<TaskNode>> {
        if let Some(node) = local.pop() {
            return Some(node);
        }
        loop {
            match self.injector.steal() {
                Steal::Success(node) => return Some(node),
                Steal::Retry => continue,
                Steal::Empty => break,
            }
        }
        let n = self.stealers.len();
        for offset in 1..n {
            let victim = &self.stealers[(index + offset) % n];
            loop {
                match victim.steal() {
                    Steal::Success(node) => return Some(node),
                    Steal::Retry => continue,
                    Steal::Empty => break,
                }
            }
        }
        None
    }
}

pub struct TaskPool {
    shared: Arc<Shared>,
    threads: Vec<JoinHandle<()>>,
}

impl TaskPool {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(FftError::Config("worker count must be at least 1".into()));
        }
        let locals: Vec<Worker<Arc<TaskNode>>> = (0..workers).map(|_| Worker::new_lifo()).collect();
        let shared = Arc::new(Shared {
            injector: Injector::new(),
            stealers: locals.iter().map(Worker::stealer).collect(),
            sleepers: AtomicUsize::new(0),
            sleep_lock: Mutex::new(()),
            wake: Condvar::new(),
            shutdown: AtomicBool::new(false),
        });
        let threads = locals
            .into_iter()
            .enumerate()
            .map(|(index, local)| {
                let shared = Arc::clone(&shared);
                thread::Builder::new()
                    .name(format!("fft-worker-{index}"))
                    .spawn(move || worker_loop(shared, local, index))
                    .map_err(|e| FftError::Config(format!("cannot spawn worker thread: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TaskPool { shared, threads })
    }

    pub fn workers(&self) -> usize {
        self.threads.len()
    }

    pub fn spawn<F>(&self, f: F) -> TaskHandle
    where
        F: FnOnce() -> Result<()> + Send + 'static,
    {
        self.spawn_after(&[], f)
    }

    /// Runs `f` once every task in `deps` has finished. If a dependency
    /// failed, `f` is skipped and the handle reports that error.
    pub fn spawn_after<F>(&self, deps: &[TaskHandle], f: F) -> TaskHandle
    where
        F: FnOnce() -> Result<()> + Send + 'static,
    {
        let node = Arc::new(TaskNode {
            job: Mutex::new(Some(Box::new(f))),
            remaining: AtomicUsize::new(deps.len() + 1),
            upstream_error: Mutex::new(None),
            state: Mutex::new(NodeState::default()),
            finished: Condvar::new(),
        });
        for dep in deps {
            let mut state = dep.0.state.lock().unwrap();
            if state.done {
                if let Some(err) = &state.error {
                    node.upstream_error
                        .lock()
                        .unwrap()
                        .get_or_insert_with(|| err.clone());
                }
                node.remaining.fetch_sub(1, Ordering::AcqRel);
            } else {
                state.successors.push(Arc::clone(&node));
            }
        }
        if node.remaining.fetch_sub(1, Ordering::AcqRel) == 1 {
            self.shared.injector.push(Arc::clone(&node));
            self.shared.notify();
        }
        TaskHandle(node)
    }
}

impl Drop for TaskPool {
    fn drop(&mut self) {
        self.shared.shutdown.store(true, Ordering::SeqCst);
        {
            let _guard = self.shared.sleep_lock.lock().unwrap();
            self.shared.wake.notify_all();
        }
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

fn worker_loop(shared: Arc<Shared>, local: Worker<Arc<TaskNode>>, index: usize) {
    WORKER_INDEX.with(|w| w.set(Some(index)));
    loop {
        if let Some(node) = shared.find_task(&local, index) {
            let ready = node.run();
            if !ready.is_empty() {
                for r in ready {
                    local.push(r);
                }
                shared.notify();
            }
            continue;
        }
        if shared.shutdown.load(Ordering::SeqCst) {
            return;
        }
        let guard = shared.sleep_lock.lock().unwrap();
        shared.sleepers.fetch_add(1, Ordering::SeqCst);
        if !shared.has_visible_work() && !shared.shutdown.load(Ordering::SeqCst) {
            let _ = shared
                .wake
                .wait_timeout(guard, Duration::from_millis(5))
                .unwrap();
        }
        shared.sleepers.fetch_sub(1, Ordering::SeqCst);
    }
}
