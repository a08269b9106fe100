use std::sync::Arc;

use crate::collector::CollectionKind;
use crate::runtime::RuntimeInner;
use crate::threads::ThreadSlot;
use crate::value::{self, BlockHeader, HeaderWord, Value, WORD};

/// Summary of a finished cycle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CycleInfo {
    pub kind: CollectionKind,
    pub words_copied: u64,
    /// A partial cycle ran out of shared space and was redone as a full one.
    pub restarted: bool,
}

/// Hook run on the collector thread, with the world stopped, around every
/// cycle. Meant for checkers and tracing; must not block on other mutators.
pub trait GcObserver: Send + Sync {
    fn before_cycle(&self, _view: &HeapView<'_>) {}
    fn after_cycle(&self, _info: &CycleInfo, _view: &HeapView<'_>) {}
}

/// Read-only access to the stopped heap.
pub struct HeapView<'a> {
    rt: &'a RuntimeInner,
    slots: &'a [Arc<ThreadSlot>],
}

impl<'a> HeapView<'a> {
    pub(crate) fn new(rt: &'a RuntimeInner, slots: &'a [Arc<ThreadSlot>]) -> Self {
        HeapView { rt, slots }
    }

    /// Every root: local roots of each thread in registration order, frame
    /// by frame, then the global roots in slot order.
    pub fn roots(&self) -> Vec<Value> {
        let mut out = Vec::new();
        for slot in self.slots {
            // SAFETY: views only exist while the world is stopped.
            out.extend_from_slice(unsafe { &slot.local_mut().roots });
        }
        out.extend(self.rt.globals.lock().iter().flatten());
        out
    }

    fn header_addr(&self, v: Value) -> Option<usize> {
        let h = v.addr()? - WORD;
        (self.rt.pages.contains(h) || self.rt.shared.contains(h)).then_some(h)
    }

    pub fn in_pages(&self, v: Value) -> bool {
        v.addr().is_some_and(|a| self.rt.pages.contains(a - WORD))
    }

    pub fn in_shared(&self, v: Value) -> bool {
        v.addr().is_some_and(|a| self.rt.shared.contains(a - WORD))
    }

    /// Header of the block `v` refers to; `None` for immediates, addresses
    /// outside the heap and forwarded blocks.
    pub fn header(&self, v: Value) -> Option<BlockHeader> {
        let h = self.header_addr(v)?;
        match BlockHeader::decode(unsafe { value::load(h) }) {
            HeaderWord::Header(hd) => Some(hd),
            HeaderWord::Forwarded(_) => None,
        }
    }

    /// Raw word of field `i`.
    pub fn field(&self, v: Value, i: usize) -> Option<usize> {
        let hd = self.header(v)?;
        (i < hd.size).then(|| unsafe { value::load(v.raw() + i * WORD) })
    }

    pub fn is_traceable(&self, tag: u8) -> bool {
        self.rt.config.tags.is_traceable(tag)
    }

    pub fn shared_used(&self) -> usize {
        self.rt.shared.used()
    }

    pub fn shared_capacity(&self) -> usize {
        self.rt.shared.capacity()
    }

    pub fn pages_used(&self) -> usize {
        self.rt.pages.used_space()
    }

    pub fn thread_count(&self) -> usize {
        self.slots.len()
    }
}
