//! Backward-pointer remembered set.
//!
//! A backward pointer is a shared-heap field holding a reference into a
//! page. Partial collections only trace pages, so every such field is
//! recorded here at store time and treated as a root by the next partial
//! cycle. Each thread owns its list; no synchronization is needed.

pub const CHUNK_CAPACITY: usize = 256;

pub struct BackwardChunk {
    entries: [usize; CHUNK_CAPACITY],
    len: usize,
    next: Option<Box<BackwardChunk>>,
}

/// Linked list of fixed-capacity chunks of shared-heap field addresses.
/// Duplicates are allowed; re-processing a field is harmless because
/// evacuation is idempotent.
#[derive(Default)]
pub struct BackwardList {
    head: Option<Box<BackwardChunk>>,
    len: usize,
}

impl BackwardList {
    pub fn new() -> BackwardList {
        BackwardList::default()
    }

    #[inline]
    pub fn push(&mut self, field_addr: usize) {
        match &mut self.head {
            Some(chunk) if chunk.len < CHUNK_CAPACITY => {
                chunk.entries[chunk.len] = field_addr;
                chunk.len += 1;
            }
            head => {
                let mut chunk = Box::new(BackwardChunk {
                    entries: [0; CHUNK_CAPACITY],
                    len: 1,
                    next: head.take(),
                });
                chunk.entries[0] = field_addr;
                *head = Some(chunk);
            }
        }
        self.len += 1;
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn chunk_count(&self) -> usize {
        let mut n = 0;
        let mut cur = self.head.as_deref();
        while let Some(c) = cur {
            n += 1;
            cur = c.next.as_deref();
        }
        n
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        let mut cur = self.head.as_deref();
        std::iter::from_fn(move || {
            let c = cur?;
            cur = c.next.as_deref();
            Some(&c.entries[..c.len])
        })
        .flatten()
        .copied()
    }

    /// Moves every entry of `other` into `self`.
    pub fn append(&mut self, other: &mut BackwardList) {
        let Some(mut tail) = other.head.take() else { return };
        self.len += std::mem::take(&mut other.len);
        let mut last = &mut tail;
        while last.next.is_some() {
            last = last.next.as_mut().unwrap();
        }
        last.next = self.head.take();
        self.head = Some(tail);
    }

    pub fn clear(&mut self) {
        // Unlink iteratively; a long chain would otherwise drop recursively.
        let mut cur = self.head.take();
        while let Some(mut c) = cur {
            cur = c.next.take();
        }
        self.len = 0;
    }
}

impl Drop for BackwardList {
    fn drop(&mut self) {
        self.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grows_in_chunks() {
        let mut l = BackwardList::new();
        for i in 0..(CHUNK_CAPACITY * 2 + 3) {
            l.push(i * 8);
        }
        assert_eq!(l.len(), CHUNK_CAPACITY * 2 + 3);
        assert_eq!(l.chunk_count(), 3);
        let mut got: Vec<_> = l.iter().collect();
        got.sort();
        assert_eq!(got, (0..l.len()).map(|i| i * 8).collect::<Vec<_>>());
    }

    #[test]
    fn duplicates_kept() {
        let mut l = BackwardList::new();
        l.push(16);
        l.push(16);
        assert_eq!(l.iter().collect::<Vec<_>>(), vec![16, 16]);
    }

    #[test]
    fn append_and_clear() {
        let mut a = BackwardList::new();
        let mut b = BackwardList::new();
        a.push(1);
        for i in 0..300 {
            b.push(i);
        }
        a.append(&mut b);
        assert!(b.is_empty());
        assert_eq!(a.len(), 301);
        assert_eq!(a.iter().count(), 301);
        a.clear();
        assert!(a.is_empty());
        assert_eq!(a.iter().count(), 0);
    }
}
