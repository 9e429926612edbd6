use super::window::{FenceAssertions, LockMode};

/// Runtime events, recorded in validating or tracing mode. `ts` values come
/// from one world-wide counter, so they totally order events across ranks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceEvent {
    PutIssued {
        ts: u64,
        window: u64,
        origin: usize,
        target: usize,
        target_offset: usize,
        len: usize,
    },
    PutDelivered {
        ts: u64,
        /// `ts` of the matching `PutIssued`.
        issued: u64,
        window: u64,
        origin: usize,
        target: usize,
    },
    LockGranted {
        ts: u64,
        window: u64,
        origin: usize,
        target: usize,
        mode: LockMode,
    },
    LockReleased {
        ts: u64,
        window: u64,
        origin: usize,
        target: usize,
    },
    Fence {
        ts: u64,
        window: u64,
        rank: usize,
        asserts: FenceAssertions,
    },
}

impl TraceEvent {
    pub fn ts(&self) -> u64 {
        match self {
            TraceEvent::PutIssued { ts, .. }
            | TraceEvent::PutDelivered { ts, .. }
            | TraceEvent::LockGranted { ts, .. }
            | TraceEvent::LockReleased { ts, .. }
            | TraceEvent::Fence { ts, .. } => *ts,
        }
    }
}
