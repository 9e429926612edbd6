use std::sync::{Arc, RwLock, RwLockReadGuard, RwLockWriteGuard};

/// A byte buffer shared between a rank's user code and the runtime.
///
/// Windows expose a `SharedBuffer` to remote puts, so the runtime needs a
/// handle to the same bytes that the caller later reads. Cloning shares the
/// underlying storage; [`SharedBuffer::id`] identifies it.
#[derive(Clone, Debug, Default)]
pub struct SharedBuffer(Arc<RwLock<Vec<u8>>>);

impl SharedBuffer {
    pub fn zeroed(len: usize) -> Self {
        Self::from_vec(vec![0; len])
    }

    pub fn from_vec(bytes: Vec<u8>) -> Self {
        SharedBuffer(Arc::new(RwLock::new(bytes)))
    }

    pub fn len(&self) -> usize {
        self.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn read(&self) -> RwLockReadGuard<'_, Vec<u8>> {
        self.0.read().unwrap_or_else(|e| e.into_inner())
    }

    pub fn write(&self) -> RwLockWriteGuard<'_, Vec<u8>> {
        self.0.write().unwrap_or_else(|e| e.into_inner())
    }

    pub fn to_vec(&self) -> Vec<u8> {
        self.read().clone()
    }

    /// Identity of the storage, stable across clones.
    pub fn id(&self) -> usize {
        Arc::as_ptr(&self.0) as *const () as usize
    }

    pub fn same_storage(&self, other: &SharedBuffer) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}
