//! A parallel memory manager for a tagged-value runtime.
//!
//! Each registered thread bump-allocates small blocks in a page it owns;
//! large blocks and every collection survivor live in a shared heap. When an
//! allocation fails the thread stops the world at the next allocation or
//! yield point of every other thread and runs a copying collection: a full
//! one into a freshly sized shared heap, or a partial one that only flushes
//! the pages into the existing shared heap. Shared fields that point back
//! into pages are remembered by a write barrier so partial cycles stay sound.
//!
//! ```
//! use stwgc::{Runtime, RuntimeConfig, Value};
//!
//! let rt = Runtime::new(RuntimeConfig::default()).unwrap();
//! let m = rt.register().unwrap();
//! let pair = m.alloc(1, &[Value::int(1), Value::int(2)]).unwrap();
//! let frame = m.push_frame(&[pair]);
//! m.collect_now(None).unwrap();
//! let pair = m.root(&frame, 0);
//! assert_eq!(m.field(pair, 1).unwrap().as_int(), 2);
//! m.pop_frame(frame).unwrap();
//! ```

pub mod collector;
pub mod error;
pub mod heap;
mod runtime;
pub mod threads;
pub mod value;

pub use collector::{
    choose_kind, AuditStats, CollectionKind, CycleInfo, GcObserver, GcStats, HeapView,
};
pub use error::{GcError, Result};
pub use heap::{new_shared_size, GrowthFactor, HeapConfig};
pub use runtime::{Runtime, RuntimeConfig};
pub use threads::{Frame, GlobalRoot, Mutator, Phase, StopOutcome, ThreadId, ThreadInfo, ThreadState};
pub use value::{BlockHeader, TagPolicy, Value};
