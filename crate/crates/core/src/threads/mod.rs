//! Thread registry, per-thread contexts and the safepoint protocol.

mod global;
mod mutator;
mod world;

use std::cell::UnsafeCell;
use std::fmt;
use std::sync::atomic::{AtomicU8, Ordering};

pub use global::GlobalRoot;
pub(crate) use global::{GlobalLock, GlobalRoots};
pub use mutator::{Frame, Mutator, ThreadInfo};
pub use world::{Phase, StopOutcome};
pub(crate) use world::World;

use crate::collector::BackwardList;
use crate::heap::PageId;
use crate::value::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ThreadId(pub u64);

impl fmt::Display for ThreadId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum ThreadState {
    Running = 0,
    SafepointPaused = 1,
    Blocked = 2,
    Collecting = 3,
    /// Not (or no longer) registered.
    Detached = 4,
}

impl ThreadState {
    fn from_u8(v: u8) -> ThreadState {
        match v {
            0 => ThreadState::Running,
            1 => ThreadState::SafepointPaused,
            2 => ThreadState::Blocked,
            3 => ThreadState::Collecting,
            _ => ThreadState::Detached,
        }
    }
}

/// Thread-local runtime data, reachable by the collector through the
/// registry.
#[derive(Default)]
pub(crate) struct LocalState {
    pub page: Option<PageId>,
    /// Flattened local root frames.
    pub roots: Vec<Value>,
    /// Start offset in `roots` of each pushed frame.
    pub frames: Vec<usize>,
    pub backward: BackwardList,
}

/// Registry entry for one mutator thread.
pub(crate) struct ThreadSlot {
    pub id: ThreadId,
    state: AtomicU8,
    local: UnsafeCell<LocalState>,
}

// SAFETY: `local` is only touched by the owning thread while it is running,
// or by the collector while the owner is paused, blocked or gone. The world
// lock orders those two phases.
unsafe impl Sync for ThreadSlot {}
unsafe impl Send for ThreadSlot {}

impl ThreadSlot {
    pub fn new(id: ThreadId) -> ThreadSlot {
        ThreadSlot {
            id,
            state: AtomicU8::new(ThreadState::Detached as u8),
            local: UnsafeCell::new(LocalState::default()),
        }
    }

    #[inline]
    pub fn state(&self) -> ThreadState {
        ThreadState::from_u8(self.state.load(Ordering::SeqCst))
    }

    #[inline]
    pub fn set_state(&self, s: ThreadState) {
        self.state.store(s as u8, Ordering::SeqCst)
    }

    /// # Safety
    /// Caller is the owner while running, or the collector with the world
    /// stopped, and holds no other reference into this state.
    #[allow(clippy::mut_from_ref)]
    #[inline]
    pub unsafe fn local_mut(&self) -> &mut LocalState {
        &mut *self.local.get()
    }
}
