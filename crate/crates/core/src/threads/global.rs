use parking_lot::{Condvar, Mutex, MutexGuard};

use crate::error::GcError;
use crate::threads::ThreadId;
use crate::value::Value;

/// Non-reentrant process-wide lock for shared runtime data.
pub(crate) struct GlobalLock {
    owner: Mutex<Option<ThreadId>>,
    released: Condvar,
}

impl GlobalLock {
    pub fn new() -> GlobalLock {
        GlobalLock {
            owner: Mutex::new(None),
            released: Condvar::new(),
        }
    }

    pub fn is_held_by(&self, me: ThreadId) -> bool {
        *self.owner.lock() == Some(me)
    }

    pub fn acquire(&self, me: ThreadId) -> Result<(), GcError> {
        let mut owner = self.owner.lock();
        if *owner == Some(me) {
            return Err(GcError::ProtocolViolation("global lock is not reentrant"));
        }
        while owner.is_some() {
            self.released.wait(&mut owner);
        }
        *owner = Some(me);
        Ok(())
    }

    pub fn release(&self, me: ThreadId) -> Result<(), GcError> {
        let mut owner = self.owner.lock();
        if *owner != Some(me) {
            return Err(GcError::ProtocolViolation("global lock released by a non-owner"));
        }
        *owner = None;
        self.released.notify_one();
        Ok(())
    }
}

/// Handle to a registered global root slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GlobalRoot(pub(crate) usize);

/// Process-wide root slots. The collector reads and rewrites them only
/// while the world is stopped.
#[derive(Default)]
pub(crate) struct GlobalRoots {
    slots: Mutex<Vec<Option<Value>>>,
}

impl GlobalRoots {
    pub fn register(&self, v: Value) -> GlobalRoot {
        let mut slots = self.slots.lock();
        if let Some(i) = slots.iter().position(Option::is_none) {
            slots[i] = Some(v);
            GlobalRoot(i)
        } else {
            slots.push(Some(v));
            GlobalRoot(slots.len() - 1)
        }
    }

    pub fn unregister(&self, g: GlobalRoot) -> Result<(), GcError> {
        let mut slots = self.slots.lock();
        match slots.get_mut(g.0) {
            Some(s @ Some(_)) => {
                *s = None;
                Ok(())
            }
            _ => Err(GcError::ProtocolViolation("unknown global root")),
        }
    }

    pub fn get(&self, g: GlobalRoot) -> Value {
        self.slots.lock()[g.0].expect("global root was unregistered")
    }

    pub fn set(&self, g: GlobalRoot, v: Value) {
        let mut slots = self.slots.lock();
        let slot = slots[g.0].as_mut().expect("global root was unregistered");
        *slot = v;
    }

    pub fn lock(&self) -> MutexGuard<'_, Vec<Option<Value>>> {
        self.slots.lock()
    }

    pub fn len(&self) -> usize {
        self.slots.lock().iter().flatten().count()
    }
}
