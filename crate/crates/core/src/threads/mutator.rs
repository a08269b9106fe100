//! The per-thread mutator handle: allocation, field access, local roots and
//! the safepoint protocol.

use std::marker::PhantomData;
use std::sync::atomic::Ordering;
use std::sync::Arc;
use std::time::Duration;

use crate::collector::{self, CollectionKind, CycleInfo, Trigger};
use crate::error::GcError;
use crate::heap::PageId;
use crate::runtime::RuntimeInner;
use crate::threads::{GlobalRoot, LocalState, StopOutcome, ThreadId, ThreadSlot, ThreadState};
use crate::value::{self, BlockHeader, HeaderWord, Value, DOUBLE_ARRAY_TAG, DOUBLE_TAG, WORD};

/// A pushed group of local root slots. Frames must be popped in reverse
/// push order.
#[derive(Debug)]
#[must_use = "a frame must be popped"]
pub struct Frame {
    depth: usize,
    base: usize,
    len: usize,
}

impl Frame {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Snapshot of one thread handed to [`Mutator::iterate_threads`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThreadInfo {
    pub id: ThreadId,
    pub state: ThreadState,
    pub local_roots: usize,
    pub page: Option<PageId>,
    pub backward_entries: usize,
}

/// A registered mutator thread. Created by [`crate::Runtime::register`] and
/// bound to the creating thread; dropping it deregisters the thread.
pub struct Mutator {
    rt: Arc<RuntimeInner>,
    slot: Arc<ThreadSlot>,
    small_limit: usize,
    _not_send: PhantomData<*const ()>,
}

impl Mutator {
    pub(crate) fn attach(rt: Arc<RuntimeInner>) -> Result<Mutator, GcError> {
        if rt.is_poisoned() {
            return Err(GcError::Poisoned);
        }
        let id = ThreadId(rt.next_thread_id.fetch_add(1, Ordering::Relaxed));
        let slot = Arc::new(ThreadSlot::new(id));
        rt.world.admit(&slot, || {
            // SAFETY: the slot is not yet published.
            unsafe { slot.local_mut().page = rt.pages.take_fresh_page(id) };
            rt.registry.lock().push(slot.clone());
        });
        let small_limit = rt.config.heap.small_limit();
        Ok(Mutator {
            rt,
            slot,
            small_limit,
            _not_send: PhantomData,
        })
    }

    pub fn id(&self) -> ThreadId {
        self.slot.id
    }

    pub fn state(&self) -> ThreadState {
        self.slot.state()
    }

    #[allow(clippy::mut_from_ref)]
    #[inline]
    fn local(&self) -> &mut LocalState {
        // SAFETY: called only while this thread is running or collecting,
        // and never held across a call that can pause.
        unsafe { self.slot.local_mut() }
    }

    // ---- allocation ----------------------------------------------------

    /// Reserves `footprint` words and returns the header address. `protect`
    /// holds values the caller still needs; they are rooted across any
    /// collection and updated in place.
    fn reserve(&self, footprint: usize, protect: &mut [Value]) -> Result<usize, GcError> {
        let small = footprint <= self.small_limit;
        if small && !self.rt.world.stop_requested() {
            if let Some(page) = self.local().page {
                self.rt.audit_cursor(&self.slot);
                if let Some(h) = self.rt.pages.try_alloc_in_page(page, footprint) {
                    return Ok(h);
                }
            }
        }
        let local = self.local();
        let base = local.roots.len();
        local.roots.extend_from_slice(protect);
        let r = self.reserve_slow(footprint, small);
        let local = self.local();
        protect.copy_from_slice(&local.roots[base..]);
        local.roots.truncate(base);
        r
    }

    fn try_reserve(&self, footprint: usize, small: bool) -> Option<usize> {
        if !small {
            return self.rt.shared.try_alloc_shared(footprint);
        }
        self.rt.audit_cursor(&self.slot);
        if let Some(page) = self.local().page {
            if let Some(h) = self.rt.pages.try_alloc_in_page(page, footprint) {
                return Some(h);
            }
        }
        let page = self.rt.pages.take_fresh_page(self.slot.id)?;
        self.local().page = Some(page);
        self.rt.pages.try_alloc_in_page(page, footprint)
    }

    fn reserve_slow(&self, footprint: usize, small: bool) -> Result<usize, GcError> {
        loop {
            self.rt.world.safepoint(&self.slot);
            if self.rt.is_poisoned() {
                return Err(GcError::Poisoned);
            }
            if let Some(h) = self.try_reserve(footprint, small) {
                return Ok(h);
            }
            if self.slot.state() == ThreadState::Collecting {
                // Already holding the stopped world and still no room.
                return Err(GcError::OutOfMemory {
                    requested: footprint,
                });
            }
            match self.stop()? {
                StopOutcome::CollectedByOther => continue,
                StopOutcome::Elected => {}
            }
            let (trigger, request) = if small {
                (Trigger::Page, 0)
            } else {
                (Trigger::Shared, footprint)
            };
            let cycle = collector::collect(&self.rt, &self.slot, trigger, request);
            let got = match cycle {
                Ok(_) => self.try_reserve(footprint, small),
                Err(_) => None,
            };
            self.resume()?;
            cycle?;
            return got.ok_or(GcError::OutOfMemory {
                requested: footprint,
            });
        }
    }

    fn stop(&self) -> Result<StopOutcome, GcError> {
        let rt = &self.rt;
        rt.world
            .request_stop(&self.slot, rt.config.stw_timeout, || {
                rt.registry
                    .lock()
                    .iter()
                    .filter(|s| s.state() == ThreadState::Running && s.id != self.slot.id)
                    .map(|s| s.id)
                    .collect()
            })
    }

    fn resume(&self) -> Result<(), GcError> {
        let held = self.rt.world.resume(&self.slot)?;
        self.rt.stats.lock().stw_pause_total += held;
        Ok(())
    }

    fn write_block(&self, h: usize, header: BlockHeader, fields: impl Iterator<Item = usize>) -> Value {
        // SAFETY: `h` was just reserved for `header.size + 1` words and is
        // not yet visible to any other thread.
        unsafe {
            value::store(h, header.encode());
            for (i, w) in fields.enumerate() {
                value::store(h + (i + 1) * WORD, w);
            }
        }
        Value::from_header_addr(h)
    }

    /// Records backward pointers created by initializing a shared block.
    fn barrier_init(&self, block: Value, fields: &[Value]) {
        if !self.rt.shared.contains(block.raw() - WORD) {
            return;
        }
        for (i, f) in fields.iter().enumerate() {
            if self.is_page_ref(*f) {
                self.local().backward.push(block.raw() + i * WORD);
            }
        }
    }

    #[inline]
    fn is_page_ref(&self, v: Value) -> bool {
        v.is_block() && self.rt.pages.contains(v.raw() - WORD)
    }

    fn check_size(size: usize) -> Result<(), GcError> {
        if size > BlockHeader::MAX_SIZE {
            return Err(GcError::OutOfMemory { requested: size });
        }
        Ok(())
    }

    fn traced_tag(&self, tag: u8) -> Result<(), GcError> {
        if !self.rt.config.tags.is_traceable(tag) {
            return Err(GcError::ProtocolViolation("value fields need a traced tag"));
        }
        Ok(())
    }

    /// Allocates a block of `tag` holding `fields`.
    pub fn alloc(&self, tag: u8, fields: &[Value]) -> Result<Value, GcError> {
        self.traced_tag(tag)?;
        Self::check_size(fields.len())?;
        let mut fields = fields.to_vec();
        let h = self.reserve(fields.len() + 1, &mut fields)?;
        let v = self.write_block(h, BlockHeader::new(fields.len(), tag), fields.iter().map(|f| f.raw()));
        self.barrier_init(v, &fields);
        Ok(v)
    }

    /// Allocates `size` fields all set to `init`.
    pub fn alloc_filled(&self, tag: u8, size: usize, init: Value) -> Result<Value, GcError> {
        self.traced_tag(tag)?;
        Self::check_size(size)?;
        let mut keep = [init];
        let h = self.reserve(size + 1, &mut keep)?;
        let init = keep[0];
        let v = self.write_block(h, BlockHeader::new(size, tag), std::iter::repeat_n(init.raw(), size));
        if size > 0 && self.is_page_ref(init) && self.rt.shared.contains(h) {
            for i in 0..size {
                self.local().backward.push(v.raw() + i * WORD);
            }
        }
        Ok(v)
    }

    /// Allocates an untraced block with the given raw payload words.
    pub fn alloc_opaque(&self, tag: u8, words: &[usize]) -> Result<Value, GcError> {
        if self.rt.config.tags.is_traceable(tag) {
            return Err(GcError::ProtocolViolation("opaque payload needs an untraced tag"));
        }
        Self::check_size(words.len())?;
        let h = self.reserve(words.len() + 1, &mut [])?;
        Ok(self.write_block(h, BlockHeader::new(words.len(), tag), words.iter().copied()))
    }

    pub fn alloc_floats(&self, xs: &[f64]) -> Result<Value, GcError> {
        Self::check_size(xs.len())?;
        let h = self.reserve(xs.len() + 1, &mut [])?;
        Ok(self.write_block(
            h,
            BlockHeader::new(xs.len(), DOUBLE_ARRAY_TAG),
            xs.iter().map(|x| x.to_bits() as usize),
        ))
    }

    pub fn alloc_boxed_float(&self, x: f64) -> Result<Value, GcError> {
        let h = self.reserve(2, &mut [])?;
        Ok(self.write_block(h, BlockHeader::new(1, DOUBLE_TAG), std::iter::once(x.to_bits() as usize)))
    }

    // ---- field access --------------------------------------------------

    fn header_checked(&self, v: Value) -> Result<BlockHeader, GcError> {
        let Some(addr) = v.addr() else {
            return Err(GcError::ProtocolViolation("expected a block, found an immediate"));
        };
        let h = addr - WORD;
        if !self.rt.pages.contains(h) && !self.rt.shared.contains(h) {
            return Err(GcError::ProtocolViolation("reference outside the heap"));
        }
        // SAFETY: `h` lies inside a live heap region.
        match BlockHeader::decode(unsafe { value::load(h) }) {
            HeaderWord::Header(hd) => Ok(hd),
            HeaderWord::Forwarded(_) => Err(GcError::ProtocolViolation("stale reference to a moved block")),
        }
    }

    fn field_addr(&self, v: Value, i: usize) -> Result<(BlockHeader, usize), GcError> {
        let hd = self.header_checked(v)?;
        if i >= hd.size {
            return Err(GcError::ProtocolViolation("field index out of bounds"));
        }
        Ok((hd, v.raw() + i * WORD))
    }

    pub fn header(&self, v: Value) -> Result<BlockHeader, GcError> {
        self.header_checked(v)
    }

    /// Number of fields of block `v`.
    pub fn size(&self, v: Value) -> Result<usize, GcError> {
        Ok(self.header_checked(v)?.size)
    }

    pub fn field(&self, v: Value, i: usize) -> Result<Value, GcError> {
        let (hd, a) = self.field_addr(v, i)?;
        self.traced_tag(hd.tag)?;
        Ok(Value::from_raw(unsafe { value::load(a) }))
    }

    /// Raw payload word; valid for any tag.
    pub fn raw_field(&self, v: Value, i: usize) -> Result<usize, GcError> {
        let (_, a) = self.field_addr(v, i)?;
        Ok(unsafe { value::load(a) })
    }

    /// Overwrites field `i` of a mutable traced block, applying the
    /// backward-pointer barrier.
    pub fn set_field(&self, v: Value, i: usize, x: Value) -> Result<(), GcError> {
        let (hd, a) = self.field_addr(v, i)?;
        self.traced_tag(hd.tag)?;
        if !self.rt.config.tags.is_mutable(hd.tag) {
            return Err(GcError::ProtocolViolation("store into an immutable block"));
        }
        if self.is_page_ref(x) && self.rt.shared.contains(a) {
            self.local().backward.push(a);
        }
        unsafe { value::store(a, x.raw()) };
        Ok(())
    }

    /// Overwrites a payload word of an untraced mutable block.
    pub fn set_raw_field(&self, v: Value, i: usize, w: usize) -> Result<(), GcError> {
        let (hd, a) = self.field_addr(v, i)?;
        if self.rt.config.tags.is_traceable(hd.tag) || !self.rt.config.tags.is_mutable(hd.tag) {
            return Err(GcError::ProtocolViolation("raw store needs a mutable untraced block"));
        }
        unsafe { value::store(a, w) };
        Ok(())
    }

    pub fn float_field(&self, v: Value, i: usize) -> Result<f64, GcError> {
        Ok(f64::from_bits(self.raw_field(v, i)? as u64))
    }

    pub fn set_float_field(&self, v: Value, i: usize, x: f64) -> Result<(), GcError> {
        self.set_raw_field(v, i, x.to_bits() as usize)
    }

    /// All payload words of `v` read as floats.
    pub fn read_floats(&self, v: Value) -> Result<Vec<f64>, GcError> {
        let n = self.header_checked(v)?.size;
        // SAFETY: the header check placed all `n` fields inside the heap.
        Ok((0..n)
            .map(|i| f64::from_bits(unsafe { value::load(v.raw() + i * WORD) } as u64))
            .collect())
    }

    // ---- local roots ---------------------------------------------------

    /// Pushes a frame whose slots start out as `slots`.
    pub fn push_frame(&self, slots: &[Value]) -> Frame {
        let local = self.local();
        let frame = Frame {
            depth: local.frames.len(),
            base: local.roots.len(),
            len: slots.len(),
        };
        local.frames.push(frame.base);
        local.roots.extend_from_slice(slots);
        self.rt.total_roots.fetch_add(slots.len(), Ordering::Relaxed);
        frame
    }

    pub fn pop_frame(&self, frame: Frame) -> Result<(), GcError> {
        let local = self.local();
        if local.frames.len() != frame.depth + 1 || local.frames[frame.depth] != frame.base {
            return Err(GcError::ProtocolViolation("popped frame is not the innermost"));
        }
        local.frames.pop();
        local.roots.truncate(frame.base);
        self.rt.total_roots.fetch_sub(frame.len, Ordering::Relaxed);
        Ok(())
    }

    /// Current value of slot `i` of `frame`.
    #[inline]
    pub fn root(&self, frame: &Frame, i: usize) -> Value {
        assert!(i < frame.len, "root slot out of range");
        self.local().roots[frame.base + i]
    }

    #[inline]
    pub fn set_root(&self, frame: &Frame, i: usize, v: Value) {
        assert!(i < frame.len, "root slot out of range");
        self.local().roots[frame.base + i] = v;
    }

    /// Number of local root slots of this thread.
    pub fn local_root_count(&self) -> usize {
        self.local().roots.len()
    }

    pub fn backward_len(&self) -> usize {
        self.local().backward.len()
    }

    pub fn page(&self) -> Option<PageId> {
        self.local().page
    }

    // ---- protocol ------------------------------------------------------

    /// Pauses if a collection has been requested. Call from loops that do
    /// not allocate; the caller's roots must be exact.
    #[inline]
    pub fn yield_point(&self) {
        self.rt.world.safepoint(&self.slot);
    }

    #[inline]
    pub fn safepoint(&self) {
        self.yield_point()
    }

    /// Marks the thread as outside the heap; a collection may run without
    /// waiting for it.
    pub fn enter_blocking_section(&self) -> Result<(), GcError> {
        self.rt.world.enter_blocking(&self.slot)
    }

    /// Returns from a blocking section, waiting out any collection.
    pub fn leave_blocking_section(&self) -> Result<(), GcError> {
        self.rt.world.leave_blocking(&self.slot)
    }

    /// Runs `f` inside a blocking section. `f` must not touch the heap.
    pub fn blocking<R>(&self, f: impl FnOnce() -> R) -> Result<R, GcError> {
        self.enter_blocking_section()?;
        let r = f();
        self.leave_blocking_section()?;
        Ok(r)
    }

    /// Stops every other thread and makes this one the collector. Returns
    /// [`StopOutcome::CollectedByOther`] if another thread got there first;
    /// the world is open again by then.
    pub fn request_stop_the_world(&self) -> Result<StopOutcome, GcError> {
        self.stop()
    }

    pub fn resume_world(&self) -> Result<(), GcError> {
        self.resume()
    }

    /// Visits every registered thread other than the caller. The world
    /// must be stopped by the caller.
    pub fn iterate_threads(&self, mut visit: impl FnMut(&ThreadInfo)) -> Result<(), GcError> {
        if self.slot.state() != ThreadState::Collecting || !self.rt.world.is_stopped() {
            return Err(GcError::ProtocolViolation("iterate_threads needs a stopped world"));
        }
        for slot in self.rt.registry.lock().iter().filter(|s| s.id != self.slot.id) {
            let local = unsafe { slot.local_mut() };
            visit(&ThreadInfo {
                id: slot.id,
                state: slot.state(),
                local_roots: local.roots.len(),
                page: local.page,
                backward_entries: local.backward.len(),
            });
        }
        Ok(())
    }

    /// Runs a collection now. `kind` of `None` lets the policy choose; a
    /// partial request falls back to full when partial collection is
    /// disabled or the shared heap lacks room.
    pub fn collect_now(&self, kind: Option<CollectionKind>) -> Result<CycleInfo, GcError> {
        let owns_world = self.slot.state() == ThreadState::Collecting;
        if !owns_world {
            while self.stop()? != StopOutcome::Elected {}
        }
        let r = collector::collect(&self.rt, &self.slot, Trigger::Forced(kind), 0);
        if !owns_world {
            self.resume()?;
        }
        r
    }

    // ---- global roots and lock -----------------------------------------

    /// Takes the process-wide lock, waiting inside a blocking section.
    pub fn global_lock(&self) -> Result<(), GcError> {
        let lock = &self.rt.global_lock;
        if lock.is_held_by(self.slot.id) {
            return Err(GcError::ProtocolViolation("global lock is not reentrant"));
        }
        self.enter_blocking_section()?;
        let r = lock.acquire(self.slot.id);
        self.leave_blocking_section()?;
        r
    }

    pub fn global_unlock(&self) -> Result<(), GcError> {
        self.rt.global_lock.release(self.slot.id)
    }

    /// Registers a process-wide root slot holding `v`.
    pub fn register_global(&self, v: Value) -> Result<GlobalRoot, GcError> {
        let held = self.rt.global_lock.is_held_by(self.slot.id);
        let frame = self.push_frame(&[v]);
        if !held {
            self.global_lock()?;
        }
        let g = self.rt.globals.register(self.root(&frame, 0));
        if !held {
            self.global_unlock()?;
        }
        self.pop_frame(frame)?;
        Ok(g)
    }

    pub fn unregister_global(&self, g: GlobalRoot) -> Result<(), GcError> {
        self.rt.globals.unregister(g)
    }

    pub fn global(&self, g: GlobalRoot) -> Value {
        self.rt.globals.get(g)
    }

    pub fn set_global(&self, g: GlobalRoot, v: Value) {
        self.rt.globals.set(g, v)
    }

    /// Total time the world has spent stopped, from this runtime's stats.
    pub fn pause_total(&self) -> Duration {
        self.rt.stats.lock().stw_pause_total
    }
}

impl Drop for Mutator {
    fn drop(&mut self) {
        match self.slot.state() {
            ThreadState::Blocked => {
                let _ = self.rt.world.leave_blocking(&self.slot);
            }
            ThreadState::Collecting => {
                let _ = self.resume();
            }
            _ => {}
        }
        if self.rt.global_lock.is_held_by(self.slot.id) {
            let _ = self.rt.global_lock.release(self.slot.id);
        }
        let rt = &self.rt;
        let slot = &self.slot;
        rt.world.depart(slot, || {
            rt.registry.lock().retain(|s| !Arc::ptr_eq(s, slot));
            // SAFETY: the slot is unpublished; nothing else can reach it.
            let local = unsafe { slot.local_mut() };
            rt.total_roots.fetch_sub(local.roots.len(), Ordering::Relaxed);
            rt.orphans.lock().append(&mut local.backward);
        });
    }
}

impl std::fmt::Debug for Mutator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Mutator").field("id", &self.slot.id).finish()
    }
}
