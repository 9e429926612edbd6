//! Simulated multi-rank runtime.
//!
//! Every rank runs on its own thread and talks to the others only through a
//! shared [`Shared`] object: barriers, small collective exchanges, buffered
//! point-to-point messages and RMA windows. Blocking waits poll an abort flag
//! so a failure on one rank unblocks everybody else, and every wait carries a
//! deadline so a mismatched collective turns into a [`RmaError::Timeout`]
//! rather than a hang.

mod trace;
mod window;

use std::any::Any;
use std::collections::VecDeque;
use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread;
use std::time::{Duration, Instant};

use crate::error::{Result, RmaError};

pub use trace::TraceEvent;
pub use window::{EpochState, FenceAssertions, LockMode, PutDescriptor, WindowHandle};

const POLL: Duration = Duration::from_millis(5);

/// Default per-wait deadline.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// When a put's bytes reach the target window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeliveryMode {
    /// Buffered and applied when the epoch closes.
    #[default]
    Deferred,
    /// Applied at issue time. Visibility before the epoch closes is still
    /// not guaranteed by the contract, only by this mode.
    Eager,
}

#[derive(Debug, Clone)]
pub struct WorldConfig {
    pub ranks: usize,
    pub ppn: usize,
    /// Enables the checks that are too strict or too costly for normal runs:
    /// `NO_PUT` enforcement, read races, overlap warnings, and tracing.
    pub validate: bool,
    pub trace: bool,
    pub delivery: DeliveryMode,
    pub timeout: Duration,
}

impl WorldConfig {
    pub fn new(ranks: usize, ppn: usize) -> Self {
        WorldConfig {
            ranks,
            ppn,
            validate: false,
            trace: false,
            delivery: DeliveryMode::Deferred,
            timeout: DEFAULT_TIMEOUT,
        }
    }

    pub fn validating(mut self, on: bool) -> Self {
        self.validate = on;
        self
    }

    pub fn traced(mut self, on: bool) -> Self {
        self.trace = on;
        self
    }

    pub fn delivery(mut self, mode: DeliveryMode) -> Self {
        self.delivery = mode;
        self
    }

    pub fn timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }
}

/// Identity of one worker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankContext {
    pub rank: usize,
    pub world_size: usize,
    pub ppn: usize,
    pub node_id: usize,
}

impl RankContext {
    pub fn new(rank: usize, world_size: usize, ppn: usize) -> Self {
        RankContext {
            rank,
            world_size,
            ppn,
            node_id: rank / ppn,
        }
    }

    /// Node hosting `rank` under contiguous block placement.
    pub fn node_of(&self, rank: usize) -> usize {
        rank / self.ppn
    }
}

struct BarrierState {
    arrived: usize,
    generation: u64,
}

struct Mailbox {
    queue: Mutex<VecDeque<(usize, Vec<u8>)>>,
    ready: Condvar,
}

pub(crate) struct Shared {
    pub(crate) config: WorldConfig,
    aborted: AtomicBool,
    clock: AtomicU64,
    next_generation: AtomicU64,
    barrier: Mutex<BarrierState>,
    barrier_cv: Condvar,
    slots: Mutex<Vec<Option<Box<dyn Any + Send>>>>,
    mailboxes: Vec<Mailbox>,
    trace: Mutex<Vec<TraceEvent>>,
    warnings: Mutex<Vec<String>>,
}

fn relock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl Shared {
    fn new(config: WorldConfig) -> Self {
        let n = config.ranks;
        Shared {
            aborted: AtomicBool::new(false),
            clock: AtomicU64::new(0),
            next_generation: AtomicU64::new(0),
            barrier: Mutex::new(BarrierState {
                arrived: 0,
                generation: 0,
            }),
            barrier_cv: Condvar::new(),
            slots: Mutex::new((0..n).map(|_| None).collect()),
            mailboxes: (0..n)
                .map(|_| Mailbox {
                    queue: Mutex::new(VecDeque::new()),
                    ready: Condvar::new(),
                })
                .collect(),
            trace: Mutex::new(Vec::new()),
            warnings: Mutex::new(Vec::new()),
            config,
        }
    }

    fn abort(&self) {
        self.aborted.store(true, Ordering::SeqCst);
        self.barrier_cv.notify_all();
        for mb in &self.mailboxes {
            mb.ready.notify_all();
        }
    }

    pub(crate) fn tick(&self) -> u64 {
        self.clock.fetch_add(1, Ordering::SeqCst)
    }

    pub(crate) fn tracing(&self) -> bool {
        self.config.trace || self.config.validate
    }

    pub(crate) fn record(&self, event: TraceEvent) {
        if self.tracing() {
            relock(&self.trace).push(event);
        }
    }

    pub(crate) fn warn(&self, message: String) {
        relock(&self.warnings).push(message);
    }

    /// Blocks while `blocked` holds, honoring abort and the deadline.
    pub(crate) fn wait_while<'a, T>(
        &self,
        mut guard: MutexGuard<'a, T>,
        cv: &Condvar,
        what: &'static str,
        mut blocked: impl FnMut(&mut T) -> bool,
    ) -> Result<MutexGuard<'a, T>> {
        let deadline = Instant::now() + self.config.timeout;
        while blocked(&mut guard) {
            if self.aborted.load(Ordering::SeqCst) {
                return Err(RmaError::Aborted);
            }
            let now = Instant::now();
            if now >= deadline {
                self.abort();
                return Err(RmaError::Timeout(self.config.timeout, what));
            }
            let slice = (deadline - now).min(POLL);
            guard = match cv.wait_timeout(guard, slice) {
                Ok((g, _)) => g,
                Err(e) => e.into_inner().0,
            };
        }
        Ok(guard)
    }
}

/// A rank's handle on the runtime. Cheap to clone; every call made through
/// it acts on behalf of `ctx().rank`.
#[derive(Clone)]
pub struct Rank {
    ctx: RankContext,
    shared: Arc<Shared>,
}

impl std::fmt::Debug for Rank {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Rank").field("ctx", &self.ctx).finish()
    }
}

impl Rank {
    pub fn ctx(&self) -> RankContext {
        self.ctx
    }

    pub fn rank(&self) -> usize {
        self.ctx.rank
    }

    pub fn size(&self) -> usize {
        self.ctx.world_size
    }

    pub fn node_id(&self) -> usize {
        self.ctx.node_id
    }

    pub fn is_validating(&self) -> bool {
        self.shared.config.validate
    }

    pub(crate) fn shared(&self) -> &Shared {
        &self.shared
    }

    /// Collective rendezvous.
    pub fn barrier(&self) -> Result<()> {
        let sh = &*self.shared;
        let mut st = relock(&sh.barrier);
        let generation = st.generation;
        st.arrived += 1;
        if st.arrived == self.size() {
            st.arrived = 0;
            st.generation += 1;
            sh.barrier_cv.notify_all();
            return Ok(());
        }
        drop(sh.wait_while(st, &sh.barrier_cv, "barrier", |s| s.generation == generation)?);
        Ok(())
    }

    /// Every rank contributes one value and receives all of them in rank order.
    pub fn allgather<T: Clone + Send + 'static>(&self, value: T) -> Result<Vec<T>> {
        relock(&self.shared.slots)[self.rank()] = Some(Box::new(value));
        self.barrier()?;
        let gathered = {
            let slots = relock(&self.shared.slots);
            slots
                .iter()
                .map(|s| s.as_ref().and_then(|b| b.downcast_ref::<T>()).cloned())
                .collect::<Option<Vec<T>>>()
        };
        self.barrier()?;
        gathered.ok_or_else(|| RmaError::Argument("mismatched collective payload types".into()))
    }

    /// Broadcast from `root`; only the root's value is used.
    pub fn bcast<T: Clone + Send + 'static>(&self, root: usize, value: Option<T>) -> Result<T> {
        let mut all = self.allgather(value)?;
        all.swap_remove(root)
            .ok_or_else(|| RmaError::Argument(format!("root {root} supplied no broadcast value")))
    }

    /// All-to-all of one value per peer: `result[p]` is what rank `p` put in
    /// its `send[self]`.
    pub fn alltoall<T: Clone + Send + 'static>(&self, send: &[T]) -> Result<Vec<T>> {
        if send.len() != self.size() {
            return Err(RmaError::Argument(format!(
                "alltoall expects {} entries, got {}",
                self.size(),
                send.len()
            )));
        }
        let rows = self.allgather(send.to_vec())?;
        Ok(rows.into_iter().map(|row| row[self.rank()].clone()).collect())
    }

    pub fn allreduce_max(&self, value: f64) -> Result<f64> {
        Ok(self
            .allgather(value)?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max))
    }

    /// Buffered send; never blocks.
    pub fn send(&self, dest: usize, bytes: Vec<u8>) -> Result<()> {
        let mb = self.mailbox(dest)?;
        relock(&mb.queue).push_back((self.rank(), bytes));
        mb.ready.notify_all();
        Ok(())
    }

    /// Receives the oldest pending message from `source`.
    pub fn recv(&self, source: usize) -> Result<Vec<u8>> {
        if source >= self.size() {
            return Err(RmaError::Argument(format!("no rank {source}")));
        }
        let mb = &self.shared.mailboxes[self.rank()];
        let q = relock(&mb.queue);
        let mut q = self
            .shared
            .wait_while(q, &mb.ready, "recv", |q| !q.iter().any(|(s, _)| *s == source))?;
        let pos = q.iter().position(|(s, _)| *s == source).expect("message present");
        Ok(q.remove(pos).expect("message present").1)
    }

    fn mailbox(&self, rank: usize) -> Result<&Mailbox> {
        self.shared
            .mailboxes
            .get(rank)
            .ok_or_else(|| RmaError::Argument(format!("no rank {rank}")))
    }
}

/// Owns a configuration and runs programs on it.
pub struct World {
    config: WorldConfig,
    last: Mutex<Option<Arc<Shared>>>,
}

impl World {
    pub fn new(config: WorldConfig) -> Result<Self> {
        if config.ranks == 0 {
            return Err(RmaError::Argument("world needs at least one rank".into()));
        }
        if config.ppn == 0 {
            return Err(RmaError::Argument("ppn must be at least 1".into()));
        }
        Ok(World {
            config,
            last: Mutex::new(None),
        })
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    /// Runs `program` once per rank, concurrently, and returns the results in
    /// rank order. The first non-abort failure is surfaced, tagged with its
    /// rank.
    pub fn run<T, F>(&self, program: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(Rank) -> Result<T> + Sync,
    {
        let shared = Arc::new(Shared::new(self.config.clone()));
        *relock(&self.last) = Some(Arc::clone(&shared));
        let n = self.config.ranks;
        let program = &program;

        let outcomes: Vec<Result<T>> = thread::scope(|scope| {
            let handles: Vec<_> = (0..n)
                .map(|r| {
                    let rank = Rank {
                        ctx: RankContext::new(r, n, self.config.ppn),
                        shared: Arc::clone(&shared),
                    };
                    let shared = Arc::clone(&shared);
                    scope.spawn(move || {
                        let out = panic::catch_unwind(AssertUnwindSafe(|| program(rank)))
                            .unwrap_or_else(|payload| {
                                Err(RmaError::Panic {
                                    rank: r,
                                    message: panic_message(payload.as_ref()),
                                })
                            });
                        if out.is_err() {
                            shared.abort();
                        }
                        out
                    })
                })
                .collect();
            handles
                .into_iter()
                .enumerate()
                .map(|(r, h)| {
                    h.join().unwrap_or_else(|_| {
                        Err(RmaError::Panic {
                            rank: r,
                            message: "worker thread panicked".into(),
                        })
                    })
                })
                .collect()
        });

        let mut results = Vec::with_capacity(n);
        let mut first_abort = None;
        let mut first_real = None;
        for (r, out) in outcomes.into_iter().enumerate() {
            match out {
                Ok(v) => results.push(v),
                Err(RmaError::Aborted) => {
                    first_abort.get_or_insert(r);
                }
                Err(e) => {
                    if first_real.is_none() {
                        first_real = Some(RmaError::Rank {
                            rank: r,
                            source: Box::new(e),
                        });
                    }
                }
            }
        }
        if let Some(e) = first_real {
            return Err(e);
        }
        if let Some(r) = first_abort {
            return Err(RmaError::Rank {
                rank: r,
                source: Box::new(RmaError::Aborted),
            });
        }
        Ok(results)
    }

    /// Events recorded by the most recent run (empty unless tracing or
    /// validating).
    pub fn trace(&self) -> Vec<TraceEvent> {
        relock(&self.last)
            .as_ref()
            .map(|s| relock(&s.trace).clone())
            .unwrap_or_default()
    }

    /// Validating-mode warnings from the most recent run.
    pub fn warnings(&self) -> Vec<String> {
        relock(&self.last)
            .as_ref()
            .map(|s| relock(&s.warnings).clone())
            .unwrap_or_default()
    }
}

/// Runs `program` on `ranks` workers with default settings.
pub fn spawn_world<T, F>(ranks: usize, ppn: usize, program: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(Rank) -> Result<T> + Sync,
{
    World::new(WorldConfig::new(ranks, ppn))?.run(program)
}

fn panic_message(payload: &(dyn Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "non-string panic payload".into()
    }
}
