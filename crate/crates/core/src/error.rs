use std::fmt;

use thiserror::Error;

pub type Result<T, E = RmaError> = std::result::Result<T, E>;

/// Epoch and window misuse detected by the runtime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    /// A put was issued with no access epoch covering the target.
    PutOutsideEpoch,
    /// A put targeted a window whose last fence asserted `NO_PUT`.
    PutAfterNoPut,
    /// The owner read its window while a peer epoch on it was still open.
    ReadDuringOpenEpoch,
    /// The handle refers to a window that has been freed.
    WindowFreed,
    /// Free was called while an epoch or lock was still open.
    FreeInOpenEpoch,
    /// Fence was called while a passive-target epoch was open.
    FenceInLockEpoch,
    /// Unlock of a target this origin does not hold.
    UnlockWithoutLock,
    /// `lock_all` while a `lock_all` or lock epoch is already open.
    NestedLockAll,
    /// `unlock_all` with no matching `lock_all`.
    UnlockAllWithoutLockAll,
    /// A second lock by the same origin on the same target.
    ConflictingLock,
    /// Lock requested while a fence epoch is open.
    LockInFenceEpoch,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Violation::PutOutsideEpoch => "put outside any access epoch",
            Violation::PutAfterNoPut => "put to a window after a NO_PUT fence",
            Violation::ReadDuringOpenEpoch => "read of window during an open epoch",
            Violation::WindowFreed => "window freed",
            Violation::FreeInOpenEpoch => "free inside an open epoch",
            Violation::FenceInLockEpoch => "fence while a lock epoch is open",
            Violation::UnlockWithoutLock => "unlock without lock",
            Violation::NestedLockAll => "nested lock_all",
            Violation::UnlockAllWithoutLockAll => "unlock_all without lock_all",
            Violation::ConflictingLock => "conflicting lock on the same target",
            Violation::LockInFenceEpoch => "lock while a fence epoch is open",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum RmaError {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("protocol violation on rank {rank}: {violation}{}", detail_suffix(.detail))]
    Protocol {
        rank: usize,
        violation: Violation,
        detail: String,
    },

    #[error(
        "out of bounds {side} range on rank {rank}: offset {offset} + length {len} exceeds size {size}"
    )]
    OutOfBounds {
        side: &'static str,
        rank: usize,
        offset: usize,
        len: usize,
        size: usize,
    },

    #[error("lifecycle error: cannot {op} a request in state {state}")]
    Lifecycle { op: &'static str, state: String },

    #[error(
        "receive overflow: rank {sender} sends {incoming} elements to rank {receiver}, which expects at most {capacity}"
    )]
    ReceiveOverflow {
        sender: usize,
        receiver: usize,
        incoming: usize,
        capacity: usize,
    },

    #[error("count mismatch: rank {sender} sends {sent} bytes to rank {receiver}, which expects {expected}")]
    CountMismatch {
        sender: usize,
        receiver: usize,
        sent: usize,
        expected: usize,
    },

    #[error("savings percentage undefined when the baseline time is zero")]
    UndefinedPercentage,

    #[error("matrix market parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("pattern error: {0}")]
    Pattern(String),

    #[error("world aborted after a failure on another rank")]
    Aborted,

    #[error("timed out after {0:?} waiting in {1}")]
    Timeout(std::time::Duration, &'static str),

    #[error("rank {rank} panicked: {message}")]
    Panic { rank: usize, message: String },

    #[error("rank {rank}: {source}")]
    Rank {
        rank: usize,
        #[source]
        source: Box<RmaError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn detail_suffix(detail: &str) -> String {
    if detail.is_empty() {
        String::new()
    } else {
        format!(" ({detail})")
    }
}

impl RmaError {
    pub(crate) fn protocol(rank: usize, violation: Violation, detail: impl Into<String>) -> Self {
        RmaError::Protocol {
            rank,
            violation,
            detail: detail.into(),
        }
    }

    /// The violation carried by this error, looking through rank wrappers.
    pub fn violation(&self) -> Option<Violation> {
        match self {
            RmaError::Protocol { violation, .. } => Some(*violation),
            RmaError::Rank { source, .. } => source.violation(),
            _ => None,
        }
    }

    /// Strips any `Rank` wrappers.
    pub fn root(&self) -> &RmaError {
        match self {
            RmaError::Rank { source, .. } => source.root(),
            other => other,
        }
    }
}
