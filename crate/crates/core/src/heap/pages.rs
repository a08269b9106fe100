//! The page table: `n_pages` fixed-size thread-owned regions carved out of
//! one contiguous reservation.

use std::sync::atomic::{AtomicUsize, Ordering};

use parking_lot::Mutex;

use crate::error::GcError;
use crate::heap::region::Region;
use crate::threads::ThreadId;
use crate::value::WORD;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PageId(pub usize);

struct Ownership {
    free: Vec<usize>,
    owner: Vec<Option<ThreadId>>,
}

pub struct PageTable {
    mem: Region,
    page_size: usize,
    /// Per-page bump cursor. Written only by the owning thread, or by the
    /// collector while the world is stopped.
    cursors: Box<[AtomicUsize]>,
    ownership: Mutex<Ownership>,
}

impl PageTable {
    pub fn new(n_pages: usize, page_size: usize) -> Result<PageTable, GcError> {
        let words = n_pages
            .checked_mul(page_size)
            .ok_or_else(|| GcError::InvalidConfig("page table size overflows".into()))?;
        let mem = Region::reserve(words)?;
        let base = mem.end();
        let cursors = (0..n_pages)
            .map(|i| AtomicUsize::new(base + (i + 1) * page_size * WORD))
            .collect();
        Ok(PageTable {
            mem,
            page_size,
            cursors,
            ownership: Mutex::new(Ownership {
                free: (0..n_pages).rev().collect(),
                owner: vec![None; n_pages],
            }),
        })
    }

    #[inline]
    pub fn n_pages(&self) -> usize {
        self.cursors.len()
    }

    #[inline]
    pub fn page_size(&self) -> usize {
        self.page_size
    }

    /// Address range `[low, high)` of the whole table.
    #[inline]
    pub fn bounds(&self) -> (usize, usize) {
        (self.mem.end(), self.mem.start())
    }

    #[inline]
    pub fn contains(&self, addr: usize) -> bool {
        self.mem.contains(addr)
    }

    #[inline]
    pub fn page_end(&self, page: PageId) -> usize {
        self.mem.end() + page.0 * self.page_size * WORD
    }

    #[inline]
    pub fn page_start(&self, page: PageId) -> usize {
        self.page_end(page) + self.page_size * WORD
    }

    #[inline]
    pub fn cursor(&self, page: PageId) -> usize {
        self.cursors[page.0].load(Ordering::Relaxed)
    }

    /// Page holding `addr`, if it lies inside the table.
    pub fn page_of(&self, addr: usize) -> Option<PageId> {
        self.contains(addr)
            .then(|| PageId((addr - self.mem.end()) / (self.page_size * WORD)))
    }

    /// Bump-allocates `footprint` words in `page`, returning the header
    /// address. Only the page's owner may call this.
    #[inline]
    pub fn try_alloc_in_page(&self, page: PageId, footprint: usize) -> Option<usize> {
        debug_assert!(footprint >= 1 && footprint <= self.page_size);
        let cursor = &self.cursors[page.0];
        let cur = cursor.load(Ordering::Relaxed);
        let new = cur.checked_sub(footprint * WORD)?;
        if new < self.page_end(page) {
            return None;
        }
        cursor.store(new, Ordering::Relaxed);
        Some(new)
    }

    /// Takes one page off the free list for `owner`, with its cursor reset.
    pub fn take_fresh_page(&self, owner: ThreadId) -> Option<PageId> {
        let mut own = self.ownership.lock();
        let idx = own.free.pop()?;
        own.owner[idx] = Some(owner);
        let page = PageId(idx);
        self.cursors[idx].store(self.page_start(page), Ordering::Relaxed);
        Some(page)
    }

    pub fn owner(&self, page: PageId) -> Option<ThreadId> {
        self.ownership.lock().owner[page.0]
    }

    pub fn free_count(&self) -> usize {
        self.ownership.lock().free.len()
    }

    pub fn owned_count(&self) -> usize {
        self.ownership.lock().owner.iter().filter(|o| o.is_some()).count()
    }

    /// Words in use over all owned pages. Pages keep their owner until the
    /// next collection, even after the owner moved on or exited.
    pub fn used_space(&self) -> usize {
        let own = self.ownership.lock();
        own.owner
            .iter()
            .enumerate()
            .filter(|(_, o)| o.is_some())
            .map(|(i, _)| {
                let page = PageId(i);
                (self.page_start(page) - self.cursor(page)) / WORD
            })
            .sum()
    }

    /// Empties every page and returns all of them to the free list.
    /// World-stopped only.
    pub(crate) fn reset_all(&self) {
        let mut own = self.ownership.lock();
        let n = self.n_pages();
        for i in 0..n {
            self.cursors[i].store(self.page_start(PageId(i)), Ordering::Relaxed);
            own.owner[i] = None;
        }
        own.free = (0..n).rev().collect();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;
    use std::sync::Arc;

    fn tid(n: u64) -> ThreadId {
        ThreadId(n)
    }

    #[test]
    fn fresh_page_is_empty() {
        let t = PageTable::new(4, 64).unwrap();
        assert_eq!(t.used_space(), 0);
        let p = t.take_fresh_page(tid(1)).unwrap();
        assert_eq!(t.cursor(p), t.page_start(p));
        assert_eq!(t.used_space(), 0);
        assert_eq!(t.owner(p), Some(tid(1)));
    }

    #[test]
    fn empty_free_list() {
        let t = PageTable::new(1, 64).unwrap();
        assert!(t.take_fresh_page(tid(1)).is_some());
        assert!(t.take_fresh_page(tid(2)).is_none());
    }

    #[test]
    fn bump_until_full() {
        let t = PageTable::new(2, 64).unwrap();
        let p = t.take_fresh_page(tid(1)).unwrap();
        let mut total = 0;
        while let Some(a) = t.try_alloc_in_page(p, 5) {
            assert!(a >= t.page_end(p));
            total += 5;
        }
        assert_eq!(total, 60);
        assert_eq!(t.used_space(), 60);
        assert!(t.try_alloc_in_page(p, 4).is_some());
        assert_eq!(t.cursor(p), t.page_end(p));
        assert_eq!(t.used_space(), 64);
    }

    #[test]
    fn page_conservation_after_reset() {
        let t = PageTable::new(5, 16).unwrap();
        for i in 0..3 {
            t.take_fresh_page(tid(i));
        }
        assert_eq!(t.free_count() + t.owned_count(), 5);
        t.reset_all();
        assert_eq!(t.free_count(), 5);
        assert_eq!(t.used_space(), 0);
    }

    #[test]
    fn page_of_maps_addresses() {
        let t = PageTable::new(3, 16).unwrap();
        for i in 0..3 {
            let p = PageId(i);
            assert_eq!(t.page_of(t.page_end(p)), Some(p));
            assert_eq!(t.page_of(t.page_start(p) - WORD), Some(p));
        }
        assert_eq!(t.page_of(t.bounds().1), None);
    }

    #[test]
    fn racing_takers_never_share_a_page() {
        for round in 0..10_000u64 {
            let t = Arc::new(PageTable::new(1, 8).unwrap());
            let got: Vec<Option<PageId>> = std::thread::scope(|s| {
                let hs: Vec<_> = (0..2)
                    .map(|i| {
                        let t = &t;
                        s.spawn(move || t.take_fresh_page(tid(round * 2 + i)))
                    })
                    .collect();
                hs.into_iter().map(|h| h.join().unwrap()).collect()
            });
            assert_eq!(got.iter().filter(|g| g.is_some()).count(), 1, "round {round}");
            if round % 1000 == 0 {
                let pages: HashSet<_> = got.into_iter().flatten().collect();
                assert_eq!(pages.len(), 1);
            }
        }
    }
}
