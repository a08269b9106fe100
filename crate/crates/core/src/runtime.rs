use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use parking_lot::{Mutex, RwLock};

use crate::collector::{AuditStats, BackwardList, GcObserver, GcStats};
use crate::error::GcError;
use crate::heap::{HeapConfig, PageTable, SharedHeap};
use crate::threads::{
    GlobalLock, GlobalRoots, Mutator, Phase, ThreadId, ThreadSlot, ThreadState, World,
};
use crate::value::TagPolicy;

#[derive(Clone, Debug)]
pub struct RuntimeConfig {
    pub heap: HeapConfig,
    pub tags: TagPolicy,
    /// Abandon a stop request that has not drained after this long.
    pub stw_timeout: Option<Duration>,
    /// Upper bound on the shared heap; a full collection that would need
    /// more raises out-of-memory.
    pub max_shared_size: Option<usize>,
}

impl RuntimeConfig {
    pub fn new(heap: HeapConfig) -> RuntimeConfig {
        RuntimeConfig {
            heap,
            tags: TagPolicy::default(),
            stw_timeout: None,
            max_shared_size: None,
        }
    }

    pub fn from_env() -> Result<RuntimeConfig, GcError> {
        Ok(RuntimeConfig::new(HeapConfig::from_env()?))
    }

    pub fn with_stw_timeout(mut self, timeout: Duration) -> RuntimeConfig {
        self.stw_timeout = Some(timeout);
        self
    }

    pub fn with_max_shared_size(mut self, words: usize) -> RuntimeConfig {
        self.max_shared_size = Some(words);
        self
    }
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        RuntimeConfig::new(HeapConfig::default())
    }
}

pub(crate) struct RuntimeInner {
    pub config: RuntimeConfig,
    pub pages: PageTable,
    pub shared: SharedHeap,
    pub world: World,
    pub registry: Mutex<Vec<Arc<ThreadSlot>>>,
    /// Backward pointers recorded by threads that have since exited.
    pub orphans: Mutex<BackwardList>,
    pub globals: GlobalRoots,
    pub global_lock: GlobalLock,
    pub stats: Mutex<GcStats>,
    pub observer: RwLock<Option<Arc<dyn GcObserver>>>,
    pub next_thread_id: AtomicU64,
    pub total_roots: AtomicUsize,
    /// Set when an abandoned partial cycle could not be completed; the heap
    /// is unusable afterwards.
    pub poisoned: AtomicBool,
}

impl RuntimeInner {
    #[inline]
    pub fn audit_cursor(&self, slot: &ThreadSlot) {
        if self.world.is_stopped() && slot.state() != ThreadState::Collecting {
            self.world.cursor_violations.fetch_add(1, Ordering::Relaxed);
        }
    }

    pub fn is_poisoned(&self) -> bool {
        self.poisoned.load(Ordering::Acquire)
    }
}

/// Handle to one runtime instance; cheap to clone and share.
#[derive(Clone)]
pub struct Runtime {
    pub(crate) inner: Arc<RuntimeInner>,
}

impl Runtime {
    pub fn new(config: RuntimeConfig) -> Result<Runtime, GcError> {
        config.heap.validate()?;
        let pages = PageTable::new(config.heap.n_pages, config.heap.page_size)?;
        let shared = SharedHeap::new(config.heap.shared_size)?;
        let stats = GcStats {
            shared_size_history: vec![config.heap.shared_size],
            ..GcStats::default()
        };
        Ok(Runtime {
            inner: Arc::new(RuntimeInner {
                config,
                pages,
                shared,
                world: World::new(),
                registry: Mutex::new(Vec::new()),
                orphans: Mutex::new(BackwardList::new()),
                globals: GlobalRoots::default(),
                global_lock: GlobalLock::new(),
                stats: Mutex::new(stats),
                observer: RwLock::new(None),
                next_thread_id: AtomicU64::new(1),
                total_roots: AtomicUsize::new(0),
                poisoned: AtomicBool::new(false),
            }),
        })
    }

    /// Registers the calling thread as a mutator. Blocks while a collection
    /// is in progress.
    pub fn register(&self) -> Result<Mutator, GcError> {
        Mutator::attach(self.inner.clone())
    }

    pub fn config(&self) -> &RuntimeConfig {
        &self.inner.config
    }

    /// Consistent snapshot of the collection statistics.
    pub fn stats(&self) -> GcStats {
        self.inner.stats.lock().clone()
    }

    pub fn audit(&self) -> AuditStats {
        let w = &self.inner.world;
        AuditStats {
            cursor_violations: w.cursor_violations.load(Ordering::SeqCst),
            max_concurrent_collectors: w.max_collectors.load(Ordering::SeqCst),
            stops: w.stops.load(Ordering::SeqCst),
        }
    }

    /// Installs a hook called by the collector before and after every cycle.
    pub fn set_observer(&self, observer: Option<Arc<dyn GcObserver>>) {
        *self.inner.observer.write() = observer;
    }

    pub fn phase(&self) -> Phase {
        self.inner.world.phase()
    }

    /// Thread currently holding (or stopping) the world.
    pub fn collector(&self) -> Option<ThreadId> {
        self.inner.world.collector()
    }

    pub fn is_poisoned(&self) -> bool {
        self.inner.is_poisoned()
    }

    pub fn thread_count(&self) -> usize {
        self.inner.registry.lock().len()
    }

    /// Number of local root slots over all registered threads.
    pub fn total_local_roots(&self) -> usize {
        self.inner.total_roots.load(Ordering::SeqCst)
    }

    pub fn global_root_count(&self) -> usize {
        self.inner.globals.len()
    }

    pub fn shared_capacity(&self) -> usize {
        self.inner.shared.capacity()
    }

    pub fn shared_used(&self) -> usize {
        self.inner.shared.used()
    }

    pub fn pages_used(&self) -> usize {
        self.inner.pages.used_space()
    }

    pub fn free_pages(&self) -> usize {
        self.inner.pages.free_count()
    }

    pub fn owned_pages(&self) -> usize {
        self.inner.pages.owned_count()
    }
}

impl std::fmt::Debug for Runtime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Runtime")
            .field("heap", &self.inner.config.heap)
            .field("threads", &self.thread_count())
            .finish()
    }
}
