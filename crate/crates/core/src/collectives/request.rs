use std::fmt;
use std::time::Duration;

use crate::buffer::SharedBuffer;
use crate::collectives::{ExchangeSpec, WindowCache};
use crate::error::{Result, RmaError};
use crate::runtime::{FenceAssertions, LockMode, PutDescriptor, Rank, WindowHandle};

/// Which synchronization scheme a persistent request uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    FencePersistent,
    LockPersistent,
    FenceHierarchyPersistent,
}

impl Variant {
    pub const ALL: [Variant; 3] = [
        Variant::FencePersistent,
        Variant::LockPersistent,
        Variant::FenceHierarchyPersistent,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RequestState {
    Initialized,
    Started,
    Completed,
    Freed,
}

impl fmt::Display for RequestState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Knobs for the lock variant's wait path. The defaults are the correct
/// protocol; the others exist so tests can provoke the race the barrier
/// prevents.
#[derive(Debug, Clone, Copy)]
pub struct RequestOptions {
    /// Barrier between `unlock_all` and the self-lock reacquisition.
    pub wait_barrier: bool,
    /// Sleep between releasing the self-lock and `lock_all` in start.
    pub start_delay: Duration,
}

impl Default for RequestOptions {
    fn default() -> Self {
        RequestOptions {
            wait_barrier: true,
            start_delay: Duration::ZERO,
        }
    }
}

/// Cached metadata for one persistent Alltoallv, owned by a single rank.
///
/// Lifecycle: `Initialized -> (Started -> Completed)* -> Freed`. Every other
/// transition is rejected with [`RmaError::Lifecycle`] before any
/// communication happens.
#[derive(Debug)]
pub struct PersistentRequest {
    rank: Rank,
    variant: Variant,
    window: WindowHandle,
    send: SharedBuffer,
    recv: SharedBuffer,
    put_displs: Vec<usize>,
    send_bytes: Vec<usize>,
    sdispl_bytes: Vec<usize>,
    total_recv_bytes: usize,
    remote_targets: Vec<usize>,
    local_targets: Vec<usize>,
    state: RequestState,
    options: RequestOptions,
}

pub fn alltoallv_fence_init(
    rank: &Rank,
    spec: &ExchangeSpec,
    cache: &mut WindowCache,
) -> Result<PersistentRequest> {
    persistent_init(rank, spec, cache, Variant::FencePersistent, RequestOptions::default())
}

pub fn alltoallv_lock_init(
    rank: &Rank,
    spec: &ExchangeSpec,
    cache: &mut WindowCache,
) -> Result<PersistentRequest> {
    persistent_init(rank, spec, cache, Variant::LockPersistent, RequestOptions::default())
}

pub fn alltoallv_fence_hierarchy_init(
    rank: &Rank,
    spec: &ExchangeSpec,
    cache: &mut WindowCache,
) -> Result<PersistentRequest> {
    persistent_init(
        rank,
        spec,
        cache,
        Variant::FenceHierarchyPersistent,
        RequestOptions::default(),
    )
}

/// Collective setup shared by all variants: size the window, agree on
/// reuse, exchange receive displacements to learn where our data lands on
/// each peer, and check that no peer sends more than we can hold.
pub fn persistent_init(
    rank: &Rank,
    spec: &ExchangeSpec,
    cache: &mut WindowCache,
    variant: Variant,
    options: RequestOptions,
) -> Result<PersistentRequest> {
    let n = rank.size();
    let me = rank.rank();
    spec.check(n)?;

    let elem_sizes = rank.allgather(spec.elem_size)?;
    if let Some(p) = elem_sizes.iter().position(|&e| e != spec.elem_size) {
        return Err(RmaError::Argument(format!(
            "element size {} on rank {me} differs from {} on rank {p}",
            spec.elem_size, elem_sizes[p]
        )));
    }
    let es = spec.elem_size;

    let total_recv_bytes = spec.total_recv_bytes();
    let window = cache.acquire(rank, &spec.recv, total_recv_bytes)?;
    if variant == Variant::LockPersistent {
        rank.lock(&window, me, LockMode::Exclusive)?;
    }

    let put_displs: Vec<usize> = rank
        .alltoall(&spec.rdispls)?
        .into_iter()
        .map(|d| d * es)
        .collect();
    let send_bytes: Vec<usize> = spec.sendcounts.iter().map(|c| c * es).collect();
    let sdispl_bytes: Vec<usize> = spec.sdispls.iter().map(|d| d * es).collect();

    let incoming = rank.alltoall(&spec.sendcounts)?;
    for (sender, (&got, &cap)) in incoming.iter().zip(&spec.recvcounts).enumerate() {
        if got > cap {
            return Err(RmaError::ReceiveOverflow {
                sender,
                receiver: me,
                incoming: got,
                capacity: cap,
            });
        }
    }

    let (remote_targets, local_targets) = if variant == Variant::FenceHierarchyPersistent {
        let ctx = rank.ctx();
        (0..n).partition(|&p| ctx.node_of(p) != ctx.node_id)
    } else {
        (Vec::new(), Vec::new())
    };

    Ok(PersistentRequest {
        rank: rank.clone(),
        variant,
        window,
        send: spec.send.clone(),
        recv: spec.recv.clone(),
        put_displs,
        send_bytes,
        sdispl_bytes,
        total_recv_bytes,
        remote_targets,
        local_targets,
        state: RequestState::Initialized,
        options,
    })
}

impl PersistentRequest {
    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn state(&self) -> RequestState {
        self.state
    }

    pub fn window(&self) -> &WindowHandle {
        &self.window
    }

    /// Byte offset in peer `p`'s window where this rank's data lands.
    pub fn put_displs(&self) -> &[usize] {
        &self.put_displs
    }

    pub fn send_bytes(&self) -> &[usize] {
        &self.send_bytes
    }

    pub fn sdispl_bytes(&self) -> &[usize] {
        &self.sdispl_bytes
    }

    pub fn total_recv_bytes(&self) -> usize {
        self.total_recv_bytes
    }

    /// Ranks on other nodes (hierarchy variant only).
    pub fn remote_targets(&self) -> &[usize] {
        &self.remote_targets
    }

    /// Ranks on this node, including self (hierarchy variant only).
    pub fn local_targets(&self) -> &[usize] {
        &self.local_targets
    }

    fn require(&self, op: &'static str, allowed: &[RequestState]) -> Result<()> {
        if allowed.contains(&self.state) {
            Ok(())
        } else {
            Err(RmaError::Lifecycle {
                op,
                state: self.state.to_string(),
            })
        }
    }

    /// Opens the epoch and issues every put.
    pub fn start(&mut self) -> Result<()> {
        self.require("start", &[RequestState::Initialized, RequestState::Completed])?;
        match self.variant {
            Variant::FencePersistent => {
                self.rank.fence(
                    &self.window,
                    FenceAssertions::NO_STORE | FenceAssertions::NO_PRECEDE,
                )?;
                self.issue_puts(0..self.rank.size())?;
            }
            Variant::FenceHierarchyPersistent => {
                self.rank.fence(&self.window, FenceAssertions::NO_PRECEDE)?;
                let order: Vec<usize> = self
                    .remote_targets
                    .iter()
                    .chain(&self.local_targets)
                    .copied()
                    .collect();
                self.issue_puts(order)?;
            }
            Variant::LockPersistent => {
                let me = self.rank.rank();
                self.rank.unlock(&self.window, me)?;
                if !self.options.start_delay.is_zero() {
                    std::thread::sleep(self.options.start_delay);
                }
                self.rank.lock_all(&self.window)?;
                self.issue_puts(0..self.rank.size())?;
            }
        }
        self.state = RequestState::Started;
        Ok(())
    }

    /// Closes the epoch; on return the receive buffer holds this round's data.
    pub fn wait(&mut self) -> Result<()> {
        self.require("wait", &[RequestState::Started])?;
        match self.variant {
            Variant::FencePersistent | Variant::FenceHierarchyPersistent => {
                self.rank.fence(
                    &self.window,
                    FenceAssertions::NO_PUT | FenceAssertions::NO_SUCCEED,
                )?;
            }
            Variant::LockPersistent => {
                self.rank.unlock_all(&self.window)?;
                if self.options.wait_barrier {
                    self.rank.barrier()?;
                }
                self.rank
                    .lock(&self.window, self.rank.rank(), LockMode::Exclusive)?;
            }
        }
        self.state = RequestState::Completed;
        Ok(())
    }

    /// Collective. Releases the window; the cache will miss on the next init.
    pub fn free(&mut self) -> Result<()> {
        self.require("free", &[RequestState::Initialized, RequestState::Completed])?;
        if self.variant == Variant::LockPersistent {
            self.rank.unlock(&self.window, self.rank.rank())?;
        }
        self.rank.win_free(&self.window)?;
        self.state = RequestState::Freed;
        Ok(())
    }

    /// Reads the exposed receive region through the runtime's checks.
    pub fn recv_bytes(&self) -> Result<Vec<u8>> {
        if self.variant == Variant::LockPersistent {
            self.rank.check_peer_epochs_closed(&self.window)?;
        }
        self.rank.read_window(&self.window)
    }

    pub fn recv_buffer(&self) -> &SharedBuffer {
        &self.recv
    }

    pub fn send_buffer(&self) -> &SharedBuffer {
        &self.send
    }

    fn issue_puts(&self, targets: impl IntoIterator<Item = usize>) -> Result<()> {
        let me = self.rank.rank();
        let send = self.send.read();
        for p in targets {
            let len = self.send_bytes[p];
            if len == 0 {
                continue;
            }
            let desc = PutDescriptor {
                origin_rank: me,
                target_rank: p,
                origin_offset_bytes: self.sdispl_bytes[p],
                target_offset_bytes: self.put_displs[p],
                length_bytes: len,
            };
            self.rank.put(&self.window, &desc, &send)?;
        }
        Ok(())
    }
}
