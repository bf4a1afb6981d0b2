use std::sync::{Arc, RwLock};

/// Immutable published parameters with their version.
#[derive(Debug)]
pub struct Snapshot<P> {
    pub version: u64,
    pub policy: P,
}

/// The learner publishes; actors read the latest.
#[derive(Debug)]
pub struct SnapshotStore<P> {
    latest: RwLock<Arc<Snapshot<P>>>,
}

impl<P> SnapshotStore<P> {
    /// Starts at version 0.
    pub fn new(policy: P) -> Self {
        Self {
            latest: RwLock::new(Arc::new(Snapshot { version: 0, policy })),
        }
    }

    pub fn latest(&self) -> Arc<Snapshot<P>> {
        self.latest.read().expect("snapshot lock poisoned").clone()
    }

    pub fn version(&self) -> u64 {
        self.latest().version
    }

    /// Publishes `policy` as the next version and returns that version.
    pub fn publish(&self, policy: P) -> u64 {
        let mut slot = self.latest.write().expect("snapshot lock poisoned");
        let version = slot.version + 1;
        *slot = Arc::new(Snapshot { version, policy });
        version
    }
}
