use std::sync::atomic::{AtomicUsize, Ordering};

use parking_lot::{Mutex, MutexGuard};

use crate::error::GcError;
use crate::heap::region::Region;

/// The lock-protected heap for large blocks and collection survivors.
pub struct SharedHeap {
    region: Mutex<Region>,
    // Mirrors of the current region's bounds for lock-free range checks.
    // Only change while the world is stopped.
    low: AtomicUsize,
    high: AtomicUsize,
}

impl SharedHeap {
    pub fn new(words: usize) -> Result<SharedHeap, GcError> {
        let region = Region::reserve(words)?;
        Ok(SharedHeap {
            low: AtomicUsize::new(region.end()),
            high: AtomicUsize::new(region.start()),
            region: Mutex::new(region),
        })
    }

    /// Bump-allocates under the heap lock, returning the header address.
    pub fn try_alloc_shared(&self, footprint: usize) -> Option<usize> {
        self.region.lock().bump(footprint)
    }

    #[inline]
    pub fn contains(&self, addr: usize) -> bool {
        addr >= self.low.load(Ordering::Relaxed) && addr < self.high.load(Ordering::Relaxed)
    }

    #[inline]
    pub fn bounds(&self) -> (usize, usize) {
        (self.low.load(Ordering::Relaxed), self.high.load(Ordering::Relaxed))
    }

    pub fn used(&self) -> usize {
        self.region.lock().used()
    }

    pub fn capacity(&self) -> usize {
        self.region.lock().capacity()
    }

    pub fn free(&self) -> usize {
        self.region.lock().free()
    }

    pub fn cursor(&self) -> usize {
        self.region.lock().cursor()
    }

    pub(crate) fn lock(&self) -> MutexGuard<'_, Region> {
        self.region.lock()
    }

    /// Installs `to` as the shared heap and hands back the old region.
    pub(crate) fn replace(&self, to: Region) -> Region {
        let mut guard = self.region.lock();
        self.low.store(to.end(), Ordering::Relaxed);
        self.high.store(to.start(), Ordering::Relaxed);
        std::mem::replace(&mut *guard, to)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::WORD;

    #[test]
    fn oversize_request_fails() {
        let h = SharedHeap::new(16).unwrap();
        assert_eq!(h.try_alloc_shared(17), None);
        assert_eq!(h.used(), 0);
    }

    #[test]
    fn exact_fit_reaches_end() {
        let h = SharedHeap::new(16).unwrap();
        h.try_alloc_shared(10).unwrap();
        h.try_alloc_shared(6).unwrap();
        assert_eq!(h.free(), 0);
        assert_eq!(h.cursor(), h.bounds().0);
    }

    #[test]
    fn concurrent_allocations_are_disjoint() {
        let h = SharedHeap::new(8 * 1000 * 5).unwrap();
        let mut intervals: Vec<(usize, usize)> = std::thread::scope(|s| {
            let hs: Vec<_> = (0..8)
                .map(|t| {
                    let h = &h;
                    s.spawn(move || {
                        (0..1000)
                            .map(|i| {
                                let fp = 1 + (i + t) % 5;
                                let a = h.try_alloc_shared(fp).expect("fits");
                                (a, a + fp * WORD)
                            })
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            hs.into_iter().flat_map(|h| h.join().unwrap()).collect()
        });
        intervals.sort();
        for w in intervals.windows(2) {
            assert!(w[0].1 <= w[1].0, "overlap {:?}", w);
        }
        let (low, high) = h.bounds();
        assert!(intervals.iter().all(|&(a, b)| a >= low && b <= high));
    }
}
