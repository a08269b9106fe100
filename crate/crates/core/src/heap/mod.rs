//! Heap geometry: the page table, the shared heap and the sizing policy.

mod config;
mod pages;
mod region;
mod shared;
mod sizing;

pub use config::{
    HeapConfig, ENV_ENABLE_PARTIAL, ENV_GROWTH_FACTOR, ENV_MIN_SHARED_SIZE, ENV_N_PAGES,
    ENV_PAGE_SIZE, ENV_SHARED_HEAP, ENV_SHARED_SIZE, MIN_PAGE_SIZE,
};
pub use pages::{PageId, PageTable};
pub use region::Region;
pub use shared::SharedHeap;
pub use sizing::{new_shared_size, GrowthFactor};
