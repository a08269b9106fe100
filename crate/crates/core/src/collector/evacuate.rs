//! Copying core shared by full and partial cycles.
//!
//! To-space is bump-allocated downward, so the scan works in batches: the
//! blocks copied since the previous batch occupy `[cursor, upper)` and are
//! walked upward header by header; anything they pull in lands below
//! `cursor` and forms the next batch. The loop ends when a batch is empty.

use crate::heap::Region;
use crate::value::{self, BlockHeader, HeaderWord, TagPolicy, Value, WORD};

/// To-space ran out mid-copy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Exhausted;

pub(crate) struct Evacuator<'a> {
    from: [(usize, usize); 2],
    to: &'a mut Region,
    tags: &'a TagPolicy,
    upper: usize,
    pub copied: u64,
}

impl<'a> Evacuator<'a> {
    /// `from` lists the address ranges being evacuated; an empty range is
    /// `(0, 0)`.
    pub fn new(from: [(usize, usize); 2], to: &'a mut Region, tags: &'a TagPolicy) -> Self {
        let upper = to.cursor();
        Evacuator {
            from,
            to,
            tags,
            upper,
            copied: 0,
        }
    }

    #[inline]
    fn in_from(&self, header_addr: usize) -> bool {
        self.from
            .iter()
            .any(|&(lo, hi)| header_addr >= lo && header_addr < hi)
    }

    /// Returns the to-space address of `v`, copying the block on first
    /// visit. Immediates and blocks outside from-space come back unchanged.
    /// Forwarding chains are followed: after an abandoned partial cycle a
    /// page block may forward to a copy that is itself in from-space.
    pub fn evacuate(&mut self, v: Value) -> Result<Value, Exhausted> {
        let mut v = v;
        loop {
            if !v.is_block() {
                return Ok(v);
            }
            let h = v.raw() - WORD;
            if !self.in_from(h) {
                return Ok(v);
            }
            // SAFETY: `h` lies in a from-space region, which stays allocated
            // for the whole cycle.
            match BlockHeader::decode(unsafe { value::load(h) }) {
                HeaderWord::Forwarded(next) => v = next,
                HeaderWord::Header(hd) => {
                    let fp = value::block_words(hd);
                    let nh = self.to.bump(fp).ok_or(Exhausted)?;
                    for i in 0..fp {
                        // SAFETY: both blocks span `fp` words inside live regions.
                        unsafe { value::store(nh + i * WORD, value::load(h + i * WORD)) };
                    }
                    let nv = Value::from_header_addr(nh);
                    unsafe { value::store(h, nv.raw()) };
                    self.copied += fp as u64;
                    return Ok(nv);
                }
            }
        }
    }

    /// Evacuates the value held in the word at `addr` and writes back the
    /// new reference.
    ///
    /// # Safety
    /// `addr` must be a word inside a live region that holds a `Value`.
    pub unsafe fn evacuate_slot(&mut self, addr: usize) -> Result<(), Exhausted> {
        let old = Value::from_raw(value::load(addr));
        let new = self.evacuate(old)?;
        if new != old {
            value::store(addr, new.raw());
        }
        Ok(())
    }

    /// Scans copied blocks until no unscanned block remains.
    pub fn scavenge(&mut self) -> Result<(), Exhausted> {
        loop {
            let lower = self.to.cursor();
            if lower == self.upper {
                return Ok(());
            }
            let mut p = lower;
            while p < self.upper {
                // SAFETY: `[lower, upper)` holds complete blocks copied in
                // this cycle, laid out back to back.
                let hd = match BlockHeader::decode(unsafe { value::load(p) }) {
                    HeaderWord::Header(hd) => hd,
                    HeaderWord::Forwarded(_) => unreachable!("to-space block is forwarded"),
                };
                if self.tags.is_traceable(hd.tag) {
                    for i in 0..hd.size {
                        unsafe { self.evacuate_slot(p + (i + 1) * WORD)? };
                    }
                }
                p += value::block_words(hd) * WORD;
            }
            self.upper = lower;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(region: &mut Region, tag: u8, fields: &[usize]) -> Value {
        let h = region.bump(fields.len() + 1).unwrap();
        unsafe {
            value::store(h, BlockHeader::new(fields.len(), tag).encode());
            for (i, f) in fields.iter().enumerate() {
                value::store(h + (i + 1) * WORD, *f);
            }
        }
        Value::from_header_addr(h)
    }

    fn from_of(r: &Region) -> [(usize, usize); 2] {
        [(r.end(), r.start()), (0, 0)]
    }

    #[test]
    fn immediates_pass_through() {
        let mut to = Region::reserve(16).unwrap();
        let tags = TagPolicy::default();
        let mut ev = Evacuator::new([(0, 0), (0, 0)], &mut to, &tags);
        assert_eq!(ev.evacuate(Value::int(42)), Ok(Value::int(42)));
        assert_eq!(ev.copied, 0);
    }

    #[test]
    fn forwarding_is_idempotent() {
        let mut from = Region::reserve(16).unwrap();
        let b = block(&mut from, 1, &[Value::int(7).raw()]);
        let mut to = Region::reserve(16).unwrap();
        let tags = TagPolicy::default();
        let mut ev = Evacuator::new(from_of(&from), &mut to, &tags);
        let a1 = ev.evacuate(b).unwrap();
        let a2 = ev.evacuate(b).unwrap();
        assert_eq!(a1, a2);
        assert_ne!(a1, b);
        assert_eq!(ev.copied, 2);
    }

    #[test]
    fn self_reference_copied_once() {
        let mut from = Region::reserve(16).unwrap();
        let b = block(&mut from, 1, &[0]);
        unsafe { value::store(b.raw(), b.raw()) };
        let mut to = Region::reserve(16).unwrap();
        let tags = TagPolicy::default();
        let mut ev = Evacuator::new(from_of(&from), &mut to, &tags);
        let nb = ev.evacuate(b).unwrap();
        ev.scavenge().unwrap();
        assert_eq!(ev.copied, 2);
        assert_eq!(unsafe { value::load(nb.raw()) }, nb.raw());
    }

    #[test]
    fn opaque_payload_untouched() {
        let mut from = Region::reserve(16).unwrap();
        let words = [from.end() + WORD, 0xdead_beef, 2];
        let b = block(&mut from, crate::value::BYTES_TAG, &words);
        let mut to = Region::reserve(16).unwrap();
        let tags = TagPolicy::default();
        let mut ev = Evacuator::new(from_of(&from), &mut to, &tags);
        let nb = ev.evacuate(b).unwrap();
        ev.scavenge().unwrap();
        for (i, w) in words.iter().enumerate() {
            assert_eq!(unsafe { value::load(nb.raw() + i * WORD) }, *w);
        }
        assert_eq!(ev.copied, 4);
    }

    #[test]
    fn exhaustion_is_reported() {
        let mut from = Region::reserve(16).unwrap();
        let b = block(&mut from, 1, &[1, 1, 1]);
        let mut to = Region::reserve(3).unwrap();
        let tags = TagPolicy::default();
        let mut ev = Evacuator::new(from_of(&from), &mut to, &tags);
        assert_eq!(ev.evacuate(b), Err(Exhausted));
    }

    #[test]
    fn long_list_needs_no_recursion() {
        let n = 100_000;
        let mut from = Region::reserve(3 * n).unwrap();
        let mut tail = Value::int(0);
        for i in 0..n {
            tail = block(&mut from, 1, &[Value::int(i as i64).raw(), tail.raw()]);
        }
        let mut to = Region::reserve(3 * n).unwrap();
        let tags = TagPolicy::default();
        let mut ev = Evacuator::new(from_of(&from), &mut to, &tags);
        let mut cur = ev.evacuate(tail).unwrap();
        ev.scavenge().unwrap();
        assert_eq!(ev.copied, 3 * n as u64);
        let mut count = 0;
        while cur.is_block() {
            count += 1;
            cur = Value::from_raw(unsafe { value::load(cur.raw() + WORD) });
        }
        assert_eq!(count, n);
    }
}
