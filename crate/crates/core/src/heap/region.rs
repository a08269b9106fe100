use std::sync::atomic::AtomicUsize;

use crate::error::GcError;
use crate::value::WORD;

/// A contiguous run of heap words allocated downward from its high end.
///
/// `end <= cursor <= start`; the used part is `[cursor, start)`.
pub struct Region {
    mem: Box<[AtomicUsize]>,
    cursor: usize,
}

impl Region {
    /// Reserves a zeroed region of `words` words. Fails with
    /// [`GcError::OutOfMemory`] when the host allocator refuses.
    pub fn reserve(words: usize) -> Result<Region, GcError> {
        let mut mem: Vec<AtomicUsize> = Vec::new();
        mem.try_reserve_exact(words)
            .map_err(|_| GcError::OutOfMemory { requested: words })?;
        mem.extend((0..words).map(|_| AtomicUsize::new(0)));
        let mem = mem.into_boxed_slice();
        let cursor = mem.as_ptr() as usize + words * WORD;
        Ok(Region { mem, cursor })
    }

    /// Low address.
    #[inline]
    pub fn end(&self) -> usize {
        self.mem.as_ptr() as usize
    }

    /// High address (one past the last word).
    #[inline]
    pub fn start(&self) -> usize {
        self.end() + self.mem.len() * WORD
    }

    #[inline]
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    #[inline]
    pub fn capacity(&self) -> usize {
        self.mem.len()
    }

    #[inline]
    pub fn used(&self) -> usize {
        (self.start() - self.cursor) / WORD
    }

    #[inline]
    pub fn free(&self) -> usize {
        (self.cursor - self.end()) / WORD
    }

    #[inline]
    pub fn contains(&self, addr: usize) -> bool {
        addr >= self.end() && addr < self.start()
    }

    /// `cursor -= footprint`, returning the header address, or `None`
    /// (leaving the cursor unchanged) when the block does not fit.
    #[inline]
    pub fn bump(&mut self, footprint: usize) -> Option<usize> {
        debug_assert!(footprint >= 1);
        if footprint > self.free() {
            return None;
        }
        self.cursor -= footprint * WORD;
        Some(self.cursor)
    }

}

impl std::fmt::Debug for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Region")
            .field("end", &format_args!("{:#x}", self.end()))
            .field("start", &format_args!("{:#x}", self.start()))
            .field("used", &self.used())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn region_with_free(free: usize) -> Region {
        let mut r = Region::reserve(100).unwrap();
        r.bump(100 - free);
        r
    }

    #[test]
    fn bump_semantics() {
        let mut r = Region::reserve(100).unwrap();
        assert_eq!(r.used(), 0);
        let a = r.bump(4).unwrap();
        assert_eq!(a, r.start() - 4 * WORD);
        assert_eq!(r.used(), 4);
    }

    #[test]
    fn boundary_miss_by_one() {
        let mut r = region_with_free(3);
        let before = r.cursor();
        assert_eq!(r.bump(4), None);
        assert_eq!(r.cursor(), before);
    }

    #[test]
    fn exact_fit() {
        let mut r = region_with_free(4);
        assert!(r.bump(4).is_some());
        assert_eq!(r.cursor(), r.end());
        assert_eq!(r.free(), 0);
    }
}
