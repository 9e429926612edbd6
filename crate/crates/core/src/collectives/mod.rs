//! Alltoallv: the two-sided baseline and the persistent one-sided variants.

mod baseline;
mod cache;
mod request;
mod spec;

pub use baseline::alltoallv_baseline;
pub use cache::WindowCache;
pub use request::{
    alltoallv_fence_hierarchy_init, alltoallv_fence_init, alltoallv_lock_init, persistent_init,
    PersistentRequest, RequestOptions, RequestState, Variant,
};
pub use spec::ExchangeSpec;
