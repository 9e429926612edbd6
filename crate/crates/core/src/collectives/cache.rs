use crate::buffer::SharedBuffer;
use crate::error::Result;
use crate::runtime::{Rank, WindowHandle};

#[derive(Debug)]
struct Cached {
    window: WindowHandle,
    total_recv_bytes: usize,
    recv: SharedBuffer,
}

/// Per-communicator window slot reused across persistent inits.
///
/// A lookup hits when the cached window is still alive and both the receive
/// size and the receive buffer are unchanged. The decision is agreed on
/// collectively: if any rank misses, every rank drops its cached window and a
/// new one is created.
#[derive(Debug, Default)]
pub struct WindowCache {
    slot: Option<Cached>,
    hits: u64,
    misses: u64,
}

impl WindowCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn misses(&self) -> u64 {
        self.misses
    }

    pub fn window(&self) -> Option<&WindowHandle> {
        self.slot.as_ref().map(|c| &c.window)
    }

    /// Collective.
    pub fn acquire(
        &mut self,
        rank: &Rank,
        recv: &SharedBuffer,
        total_recv_bytes: usize,
    ) -> Result<WindowHandle> {
        let local_hit = self.slot.as_ref().is_some_and(|c| {
            !c.window.is_freed()
                && c.total_recv_bytes == total_recv_bytes
                && c.recv.same_storage(recv)
        });
        let all_hit = rank.allgather(local_hit)?.into_iter().all(|h| h);
        if all_hit {
            self.hits += 1;
            return Ok(self.slot.as_ref().expect("hit implies slot").window.clone());
        }
        self.misses += 1;
        if let Some(old) = self.slot.take() {
            if !old.window.is_freed() {
                rank.win_free(&old.window)?;
            }
        }
        let window = rank.win_create(recv, total_recv_bytes)?;
        self.slot = Some(Cached {
            window: window.clone(),
            total_recv_bytes,
            recv: recv.clone(),
        });
        Ok(window)
    }
}
