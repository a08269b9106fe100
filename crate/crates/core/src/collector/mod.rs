//! Full and partial stop-and-copy cycles.

mod barrier;
mod evacuate;
mod observe;
mod stats;

use std::sync::atomic::Ordering;
use std::sync::Arc;

pub use barrier::{BackwardChunk, BackwardList, CHUNK_CAPACITY};
pub use observe::{CycleInfo, GcObserver, HeapView};
pub use stats::{AuditStats, GcStats};

use evacuate::{Evacuator, Exhausted};

use crate::error::GcError;
use crate::heap::{new_shared_size, Region};
use crate::runtime::RuntimeInner;
use crate::threads::ThreadSlot;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CollectionKind {
    Full,
    Partial,
}

/// What made the collector run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Trigger {
    /// A small allocation found no page.
    Page,
    /// A large allocation did not fit in the shared heap.
    Shared,
    /// Explicit request, optionally naming the kind.
    Forced(Option<CollectionKind>),
}

/// Partial iff partial collection is enabled, the failure came from a page
/// allocation and the shared heap has room for everything in the pages.
pub fn choose_kind(
    used_pages: usize,
    shared_free: usize,
    enable_partial: bool,
    page_trigger: bool,
) -> CollectionKind {
    if enable_partial && page_trigger && shared_free >= used_pages {
        CollectionKind::Partial
    } else {
        CollectionKind::Full
    }
}

/// Runs one cycle. The world must be stopped with `me` as collector.
/// `failed_request` is the footprint of the shared-heap allocation that
/// triggered the cycle, or 0.
pub(crate) fn collect(
    rt: &RuntimeInner,
    me: &ThreadSlot,
    trigger: Trigger,
    failed_request: usize,
) -> Result<CycleInfo, GcError> {
    if rt.is_poisoned() {
        return Err(GcError::Poisoned);
    }
    let registry = rt.registry.lock();
    let observer = rt.observer.read().clone();
    if let Some(o) = &observer {
        o.before_cycle(&HeapView::new(rt, &registry));
    }

    let enable = rt.config.heap.enable_partial;
    let kind = match trigger {
        Trigger::Shared | Trigger::Forced(Some(CollectionKind::Full)) => CollectionKind::Full,
        Trigger::Page | Trigger::Forced(_) => {
            choose_kind(rt.pages.used_space(), rt.shared.free(), enable, true)
        }
    };

    let mut info = CycleInfo {
        kind,
        words_copied: 0,
        restarted: false,
    };
    let mut aborted_copy = 0;
    if kind == CollectionKind::Partial {
        match partial(rt, &registry) {
            Ok(copied) => info.words_copied = copied,
            Err(copied) => {
                aborted_copy = copied;
                info.kind = CollectionKind::Full;
                info.restarted = true;
            }
        }
    }
    if info.kind == CollectionKind::Full {
        match full(rt, &registry, failed_request) {
            Ok((copied, size)) => {
                info.words_copied = copied;
                rt.stats.lock().shared_size_history.push(size);
            }
            Err(e) => {
                if info.restarted {
                    rt.poisoned.store(true, Ordering::Release);
                }
                return Err(e);
            }
        }
    }

    rt.pages.reset_all();
    // SAFETY (all `local_mut` below): the world is stopped and this thread
    // is the collector.
    unsafe { me.local_mut().page = rt.pages.take_fresh_page(me.id) };
    for slot in registry.iter().filter(|s| s.id != me.id) {
        unsafe { slot.local_mut().page = rt.pages.take_fresh_page(slot.id) };
    }
    for slot in registry.iter() {
        unsafe { slot.local_mut().backward.clear() };
    }
    rt.orphans.lock().clear();

    {
        let mut stats = rt.stats.lock();
        match info.kind {
            CollectionKind::Full => {
                stats.full_count += 1;
                stats.words_copied_full += info.words_copied;
            }
            CollectionKind::Partial => stats.partial_count += 1,
        }
        stats.words_copied_partial += match info.kind {
            CollectionKind::Partial => info.words_copied,
            CollectionKind::Full => aborted_copy,
        };
    }
    if let Some(o) = &observer {
        o.after_cycle(&info, &HeapView::new(rt, &registry));
    }
    Ok(info)
}

fn evacuate_roots(
    ev: &mut Evacuator<'_>,
    rt: &RuntimeInner,
    registry: &[Arc<ThreadSlot>],
) -> Result<(), Exhausted> {
    for slot in registry {
        let local = unsafe { slot.local_mut() };
        for r in local.roots.iter_mut() {
            *r = ev.evacuate(*r)?;
        }
    }
    for g in rt.globals.lock().iter_mut().flatten() {
        *g = ev.evacuate(*g)?;
    }
    Ok(())
}

/// Copies live page blocks into the existing shared heap. On exhaustion
/// returns the number of words copied before giving up.
fn partial(rt: &RuntimeInner, registry: &[Arc<ThreadSlot>]) -> Result<u64, u64> {
    let mut to = rt.shared.lock();
    let mut ev = Evacuator::new(
        [rt.pages.bounds(), (0, 0)],
        &mut to,
        &rt.config.tags,
    );
    let run = |ev: &mut Evacuator<'_>| -> Result<(), Exhausted> {
        evacuate_roots(ev, rt, registry)?;
        for slot in registry {
            for addr in unsafe { slot.local_mut() }.backward.iter() {
                // SAFETY: backward entries are fields of shared blocks, and
                // the shared heap is not moved by a partial cycle.
                unsafe { ev.evacuate_slot(addr)? };
            }
        }
        for addr in rt.orphans.lock().iter() {
            unsafe { ev.evacuate_slot(addr)? };
        }
        ev.scavenge()
    };
    match run(&mut ev) {
        Ok(()) => Ok(ev.copied),
        Err(Exhausted) => Err(ev.copied),
    }
}

/// Copies everything live into a fresh shared heap sized by the growth
/// policy. Returns words copied and the new capacity.
fn full(
    rt: &RuntimeInner,
    registry: &[Arc<ThreadSlot>],
    failed_request: usize,
) -> Result<(u64, usize), GcError> {
    let heap = &rt.config.heap;
    let size = new_shared_size(
        rt.shared.used(),
        rt.pages.used_space(),
        failed_request,
        heap.growth_factor,
        heap.min_shared_size,
    );
    if rt.config.max_shared_size.is_some_and(|max| size > max) {
        return Err(GcError::OutOfMemory {
            requested: failed_request,
        });
    }
    let mut to = Region::reserve(size)?;
    let copied = {
        let mut ev = Evacuator::new(
            [rt.pages.bounds(), rt.shared.bounds()],
            &mut to,
            &rt.config.tags,
        );
        evacuate_roots(&mut ev, rt, registry)
            .and_then(|()| ev.scavenge())
            .expect("to-space sized to hold every used word");
        ev.copied
    };
    drop(rt.shared.replace(to));
    Ok((copied, size))
}
