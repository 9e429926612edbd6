pub mod bench;
pub mod buffer;
pub mod cli;
pub mod collectives;
pub mod error;
pub mod patterns;
pub mod runtime;

pub use buffer::SharedBuffer;
pub use error::{Result, RmaError, Violation};
