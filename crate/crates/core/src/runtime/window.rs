//! RMA windows and their epochs.
//!
//! Puts are parked in a per-target inbox and applied when the epoch that
//! issued them closes: the next fence for fence epochs, `unlock` or
//! `unlock_all` for passive-target epochs. Within one batch puts are applied
//! in issue order, so overlapping puts resolve last-issued-wins.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};

use bitflags::bitflags;

use super::{relock, DeliveryMode, Rank, TraceEvent};
use crate::buffer::SharedBuffer;
use crate::error::{Result, RmaError, Violation};

bitflags! {
    /// Hints attached to a fence. Only `NO_PUT` and `NO_SUCCEED` change
    /// behavior; the others are recorded in the trace.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
    pub struct FenceAssertions: u8 {
        const NO_STORE = 1;
        const NO_PRECEDE = 1 << 1;
        const NO_PUT = 1 << 2;
        const NO_SUCCEED = 1 << 3;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LockMode {
    Exclusive,
    Shared,
}

/// Synchronization state of one rank's view of a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpochState {
    Idle,
    FenceOpen,
    LockAllOpen,
    /// The owner holds an exclusive lock on its own window and nothing else.
    SelfLockedExclusive,
    /// Some other combination of per-target locks.
    LockOpen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PutDescriptor {
    pub origin_rank: usize,
    pub target_rank: usize,
    pub origin_offset_bytes: usize,
    pub target_offset_bytes: usize,
    pub length_bytes: usize,
}

#[derive(Default)]
struct RankWinState {
    fence_open: bool,
    fence_no_put: bool,
    lock_all: bool,
    held: BTreeMap<usize, LockMode>,
}

impl RankWinState {
    fn epoch(&self, me: usize) -> EpochState {
        if self.lock_all {
            EpochState::LockAllOpen
        } else if self.fence_open {
            EpochState::FenceOpen
        } else if self.held.is_empty() {
            EpochState::Idle
        } else if self.held.len() == 1 && self.held.get(&me) == Some(&LockMode::Exclusive) {
            EpochState::SelfLockedExclusive
        } else {
            EpochState::LockOpen
        }
    }
}

#[derive(Default)]
struct TargetLock {
    exclusive: Option<usize>,
    shared: Vec<usize>,
}

struct PendingPut {
    seq: u64,
    origin: usize,
    target_offset: usize,
    data: Vec<u8>,
    passive: bool,
}

pub(crate) struct WindowShared {
    generation: u64,
    sizes: Vec<usize>,
    regions: Vec<SharedBuffer>,
    freed: AtomicBool,
    states: Vec<Mutex<RankWinState>>,
    locks: Vec<(Mutex<TargetLock>, Condvar)>,
    inbox: Vec<Mutex<Vec<PendingPut>>>,
    lock_all_completed: Vec<AtomicU64>,
}

/// One rank's handle on a collectively created window.
///
/// Handles are cheap to clone. After `win_free` every clone is stale and all
/// operations through it fail with [`Violation::WindowFreed`].
#[derive(Clone)]
pub struct WindowHandle {
    shared: Arc<WindowShared>,
    owner: usize,
}

impl std::fmt::Debug for WindowHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WindowHandle")
            .field("owner", &self.owner)
            .field("generation", &self.shared.generation)
            .field("size_bytes", &self.size_bytes())
            .field("freed", &self.is_freed())
            .finish()
    }
}

impl WindowHandle {
    pub fn generation(&self) -> u64 {
        self.shared.generation
    }

    /// Exposed size of the owner's region.
    pub fn size_bytes(&self) -> usize {
        self.shared.sizes[self.owner]
    }

    pub fn size_of(&self, rank: usize) -> Option<usize> {
        self.shared.sizes.get(rank).copied()
    }

    pub fn is_freed(&self) -> bool {
        self.shared.freed.load(Ordering::SeqCst)
    }

    pub fn epoch_state(&self) -> EpochState {
        relock(&self.shared.states[self.owner]).epoch(self.owner)
    }

    /// The owner's exposed buffer.
    pub fn region(&self) -> &SharedBuffer {
        &self.shared.regions[self.owner]
    }

    /// Number of completed `lock_all` epochs by `rank` on this window.
    pub fn lock_all_epochs(&self, rank: usize) -> u64 {
        self.shared.lock_all_completed[rank].load(Ordering::SeqCst)
    }
}

impl Rank {
    fn live<'w>(&self, win: &'w WindowHandle) -> Result<&'w WindowShared> {
        if win.owner != self.rank() {
            return Err(RmaError::Argument(format!(
                "window handle of rank {} used by rank {}",
                win.owner,
                self.rank()
            )));
        }
        if win.is_freed() {
            return Err(RmaError::protocol(
                self.rank(),
                Violation::WindowFreed,
                format!("generation {}", win.generation()),
            ));
        }
        Ok(&win.shared)
    }

    fn check_target(&self, target: usize) -> Result<()> {
        if target >= self.size() {
            return Err(RmaError::Argument(format!(
                "target rank {target} outside world of {}",
                self.size()
            )));
        }
        Ok(())
    }

    /// Collective. Exposes the first `size_bytes` of `region` to one-sided
    /// access. Sizes may differ per rank.
    pub fn win_create(&self, region: &SharedBuffer, size_bytes: usize) -> Result<WindowHandle> {
        let len = region.len();
        if size_bytes > len {
            return Err(RmaError::Argument(format!(
                "window size {size_bytes} exceeds region length {len}"
            )));
        }
        let parts = self.allgather((region.clone(), size_bytes))?;
        let made = if self.rank() == 0 {
            let generation = self.shared().next_generation.fetch_add(1, Ordering::SeqCst) + 1;
            let n = self.size();
            let (regions, sizes) = parts.into_iter().unzip();
            Some(Arc::new(WindowShared {
                generation,
                sizes,
                regions,
                freed: AtomicBool::new(false),
                states: (0..n).map(|_| Mutex::default()).collect(),
                locks: (0..n).map(|_| Default::default()).collect(),
                inbox: (0..n).map(|_| Mutex::default()).collect(),
                lock_all_completed: (0..n).map(|_| AtomicU64::new(0)).collect(),
            }))
        } else {
            None
        };
        let shared = self.bcast(0, made)?;
        Ok(WindowHandle {
            shared,
            owner: self.rank(),
        })
    }

    /// Collective. Requires no open epoch or lock on this rank.
    pub fn win_free(&self, win: &WindowHandle) -> Result<()> {
        let ws = self.live(win)?;
        let state = relock(&ws.states[self.rank()]).epoch(self.rank());
        if state != EpochState::Idle {
            return Err(RmaError::protocol(
                self.rank(),
                Violation::FreeInOpenEpoch,
                format!("{state:?}"),
            ));
        }
        self.barrier()?;
        ws.freed.store(true, Ordering::SeqCst);
        self.barrier()
    }

    /// Collective. Completes the current fence epoch and, unless `NO_SUCCEED`
    /// is asserted, opens the next one.
    pub fn fence(&self, win: &WindowHandle, asserts: FenceAssertions) -> Result<()> {
        let me = self.rank();
        let ws = self.live(win)?;
        {
            let st = relock(&ws.states[me]);
            if st.lock_all || !st.held.is_empty() {
                return Err(RmaError::protocol(
                    me,
                    Violation::FenceInLockEpoch,
                    format!("{:?}", st.epoch(me)),
                ));
            }
        }
        self.barrier()?;
        let batch: Vec<PendingPut> = {
            let mut inbox = relock(&ws.inbox[me]);
            let (fence, rest) = inbox.drain(..).partition(|p| !p.passive);
            *inbox = rest;
            fence
        };
        self.apply(ws, me, batch);
        {
            let mut st = relock(&ws.states[me]);
            st.fence_open = !asserts.contains(FenceAssertions::NO_SUCCEED);
            st.fence_no_put = asserts.contains(FenceAssertions::NO_PUT);
        }
        self.shared().record(TraceEvent::Fence {
            ts: self.shared().tick(),
            window: ws.generation,
            rank: me,
            asserts,
        });
        self.barrier()
    }

    /// Issues a put of `origin[origin_offset..][..length]` into the target's
    /// window. Bytes are guaranteed visible only after the epoch closes.
    pub fn put(&self, win: &WindowHandle, desc: &PutDescriptor, origin: &[u8]) -> Result<()> {
        let me = self.rank();
        let ws = self.live(win)?;
        if desc.origin_rank != me {
            return Err(RmaError::Argument(format!(
                "descriptor names origin {} but was issued by rank {me}",
                desc.origin_rank
            )));
        }
        let target = desc.target_rank;
        self.check_target(target)?;
        let len = desc.length_bytes;
        if desc.origin_offset_bytes + len > origin.len() {
            return Err(RmaError::OutOfBounds {
                side: "origin",
                rank: me,
                offset: desc.origin_offset_bytes,
                len,
                size: origin.len(),
            });
        }

        let passive = {
            let st = relock(&ws.states[me]);
            if st.lock_all || st.held.contains_key(&target) {
                true
            } else if st.fence_open {
                false
            } else {
                return Err(RmaError::protocol(
                    me,
                    Violation::PutOutsideEpoch,
                    format!("target {target}, state {:?}", st.epoch(me)),
                ));
            }
        };
        if !passive && self.is_validating() && relock(&ws.states[target]).fence_no_put {
            return Err(RmaError::protocol(
                me,
                Violation::PutAfterNoPut,
                format!("target {target}"),
            ));
        }
        let size = ws.sizes[target];
        if desc.target_offset_bytes + len > size {
            return Err(RmaError::OutOfBounds {
                side: "target",
                rank: target,
                offset: desc.target_offset_bytes,
                len,
                size,
            });
        }
        if len == 0 {
            return Ok(());
        }

        let sh = self.shared();
        let seq = sh.tick();
        sh.record(TraceEvent::PutIssued {
            ts: seq,
            window: ws.generation,
            origin: me,
            target,
            target_offset: desc.target_offset_bytes,
            len,
        });
        let pending = PendingPut {
            seq,
            origin: me,
            target_offset: desc.target_offset_bytes,
            data: origin[desc.origin_offset_bytes..desc.origin_offset_bytes + len].to_vec(),
            passive,
        };
        match sh.config.delivery {
            DeliveryMode::Eager => self.apply(ws, target, vec![pending]),
            DeliveryMode::Deferred => relock(&ws.inbox[target]).push(pending),
        }
        Ok(())
    }

    /// Opens a passive-target epoch on `target`. Exclusive waits for every
    /// other holder to leave; shared waits only for an exclusive holder.
    pub fn lock(&self, win: &WindowHandle, target: usize, mode: LockMode) -> Result<()> {
        let me = self.rank();
        let ws = self.live(win)?;
        self.check_target(target)?;
        {
            let st = relock(&ws.states[me]);
            if st.fence_open {
                return Err(RmaError::protocol(me, Violation::LockInFenceEpoch, ""));
            }
            if st.lock_all || st.held.contains_key(&target) {
                return Err(RmaError::protocol(
                    me,
                    Violation::ConflictingLock,
                    format!("target {target}"),
                ));
            }
        }
        self.acquire(ws, target, mode)?;
        relock(&ws.states[me]).held.insert(target, mode);
        Ok(())
    }

    /// Closes the passive epoch on `target`, completing this origin's puts.
    pub fn unlock(&self, win: &WindowHandle, target: usize) -> Result<()> {
        let me = self.rank();
        let ws = self.live(win)?;
        self.check_target(target)?;
        if !relock(&ws.states[me]).held.contains_key(&target) {
            return Err(RmaError::protocol(
                me,
                Violation::UnlockWithoutLock,
                format!("target {target}"),
            ));
        }
        self.complete_passive(ws, target);
        self.release(ws, target);
        relock(&ws.states[me]).held.remove(&target);
        Ok(())
    }

    /// Opens a shared access epoch to every rank.
    pub fn lock_all(&self, win: &WindowHandle) -> Result<()> {
        let me = self.rank();
        let ws = self.live(win)?;
        {
            let st = relock(&ws.states[me]);
            if st.fence_open {
                return Err(RmaError::protocol(me, Violation::LockInFenceEpoch, ""));
            }
            if st.lock_all || !st.held.is_empty() {
                return Err(RmaError::protocol(
                    me,
                    Violation::NestedLockAll,
                    format!("{:?}", st.epoch(me)),
                ));
            }
        }
        // Ascending order keeps concurrent lock_all calls deadlock-free.
        for target in 0..self.size() {
            if let Err(e) = self.acquire(ws, target, LockMode::Shared) {
                for t in 0..target {
                    self.release(ws, t);
                }
                return Err(e);
            }
        }
        relock(&ws.states[me]).lock_all = true;
        Ok(())
    }

    /// Closes the `lock_all` epoch; all puts issued in it are complete at
    /// their targets on return.
    pub fn unlock_all(&self, win: &WindowHandle) -> Result<()> {
        let me = self.rank();
        let ws = self.live(win)?;
        if !relock(&ws.states[me]).lock_all {
            return Err(RmaError::protocol(me, Violation::UnlockAllWithoutLockAll, ""));
        }
        for target in 0..self.size() {
            self.complete_passive(ws, target);
            self.release(ws, target);
        }
        relock(&ws.states[me]).lock_all = false;
        ws.lock_all_completed[me].fetch_add(1, Ordering::SeqCst);
        Ok(())
    }

    /// Copies out the owner's exposed bytes. In validating mode the read is
    /// rejected while this rank has a fence or `lock_all` epoch open, or while
    /// another origin holds a lock on this window.
    pub fn read_window(&self, win: &WindowHandle) -> Result<Vec<u8>> {
        let me = self.rank();
        let ws = self.live(win)?;
        if self.is_validating() {
            let state = relock(&ws.states[me]).epoch(me);
            if matches!(state, EpochState::FenceOpen | EpochState::LockAllOpen) {
                return Err(RmaError::protocol(
                    me,
                    Violation::ReadDuringOpenEpoch,
                    format!("own state {state:?}"),
                ));
            }
            let lock = relock(&ws.locks[me].0);
            let foreign = lock
                .exclusive
                .into_iter()
                .chain(lock.shared.iter().copied())
                .find(|&o| o != me);
            if let Some(origin) = foreign {
                return Err(RmaError::protocol(
                    me,
                    Violation::ReadDuringOpenEpoch,
                    format!("rank {origin} holds a lock on this window"),
                ));
            }
        }
        Ok(ws.regions[me].read()[..ws.sizes[me]].to_vec())
    }

    /// Validating-mode check for symmetric passive-target protocols: every
    /// peer must have closed as many `lock_all` epochs on this window as the
    /// caller, otherwise some peer's epoch toward us is still outstanding.
    pub(crate) fn check_peer_epochs_closed(&self, win: &WindowHandle) -> Result<()> {
        if !self.is_validating() {
            return Ok(());
        }
        let me = self.rank();
        let ws = self.live(win)?;
        let mine = ws.lock_all_completed[me].load(Ordering::SeqCst);
        for (peer, count) in ws.lock_all_completed.iter().enumerate() {
            let theirs = count.load(Ordering::SeqCst);
            if theirs < mine {
                return Err(RmaError::protocol(
                    me,
                    Violation::ReadDuringOpenEpoch,
                    format!("rank {peer} has closed {theirs} of {mine} lock_all epochs"),
                ));
            }
        }
        Ok(())
    }

    fn acquire(&self, ws: &WindowShared, target: usize, mode: LockMode) -> Result<()> {
        let me = self.rank();
        let (m, cv) = &ws.locks[target];
        let guard = relock(m);
        let mut guard = self.shared().wait_while(guard, cv, "window lock", |l| match mode {
            LockMode::Exclusive => l.exclusive.is_some() || !l.shared.is_empty(),
            LockMode::Shared => l.exclusive.is_some(),
        })?;
        match mode {
            LockMode::Exclusive => guard.exclusive = Some(me),
            LockMode::Shared => guard.shared.push(me),
        }
        self.shared().record(TraceEvent::LockGranted {
            ts: self.shared().tick(),
            window: ws.generation,
            origin: me,
            target,
            mode,
        });
        Ok(())
    }

    fn release(&self, ws: &WindowShared, target: usize) {
        let me = self.rank();
        let (m, cv) = &ws.locks[target];
        let mut guard = relock(m);
        if guard.exclusive == Some(me) {
            guard.exclusive = None;
        } else if let Some(pos) = guard.shared.iter().position(|&o| o == me) {
            guard.shared.swap_remove(pos);
        }
        self.shared().record(TraceEvent::LockReleased {
            ts: self.shared().tick(),
            window: ws.generation,
            origin: me,
            target,
        });
        drop(guard);
        cv.notify_all();
    }

    fn complete_passive(&self, ws: &WindowShared, target: usize) {
        let me = self.rank();
        let mine: Vec<PendingPut> = {
            let mut inbox = relock(&ws.inbox[target]);
            let (mine, rest) = inbox
                .drain(..)
                .partition(|p| p.passive && p.origin == me);
            *inbox = rest;
            mine
        };
        self.apply(ws, target, mine);
    }

    fn apply(&self, ws: &WindowShared, target: usize, mut batch: Vec<PendingPut>) {
        if batch.is_empty() {
            return;
        }
        batch.sort_by_key(|p| p.seq);
        let sh = self.shared();
        let validate = self.is_validating();
        let mut written: Vec<(usize, usize, usize)> = Vec::new();
        let mut region = ws.regions[target].write();
        for p in batch {
            let end = p.target_offset + p.data.len();
            if validate {
                if let Some((_, _, other)) = written
                    .iter()
                    .find(|(lo, hi, _)| p.target_offset < *hi && *lo < end)
                {
                    sh.warn(format!(
                        "overlapping puts on rank {target} window {}: origin {} and origin {other} both write [{}, {end})",
                        ws.generation, p.origin, p.target_offset
                    ));
                }
                written.push((p.target_offset, end, p.origin));
            }
            region[p.target_offset..end].copy_from_slice(&p.data);
            sh.record(TraceEvent::PutDelivered {
                ts: sh.tick(),
                issued: p.seq,
                window: ws.generation,
                origin: p.origin,
                target,
            });
        }
    }
}
