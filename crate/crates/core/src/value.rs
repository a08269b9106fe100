//! Word-tagged values and block headers.
//!
//! A [`Value`] is one machine word. Immediates carry the low bit set and
//! encode `n` as `2n + 1`; block references are word-aligned addresses of
//! the first field of a block, so their low bit is always clear. Every block
//! is preceded by one header word packing its field count and tag.

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::GcError;

#[cfg(not(target_pointer_width = "64"))]
compile_error!("stwgc assumes a 64-bit word");

/// Bytes per heap word.
pub const WORD: usize = std::mem::size_of::<usize>();

/// First tag whose fields are opaque raw data.
pub const NO_SCAN_TAG: u8 = 251;
/// Mutable array/record tag used for boards, matrices and reference cells.
pub const ARRAY_TAG: u8 = 0;
/// Opaque byte data.
pub const BYTES_TAG: u8 = 251;
/// One-field boxed float.
pub const DOUBLE_TAG: u8 = 252;
/// Unboxed float array.
pub const DOUBLE_ARRAY_TAG: u8 = 253;
/// Reserved for harness-internal opaque blocks.
pub const HARNESS_TAG: u8 = 254;
/// Reserved for harness-internal opaque blocks.
pub const CUSTOM_TAG: u8 = 255;

const IMM_MIN: i64 = i64::MIN >> 1;
const IMM_MAX: i64 = i64::MAX >> 1;

/// A tagged machine word: either an immediate integer or a block reference.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
#[repr(transparent)]
pub struct Value(usize);

impl Value {
    /// The immediate `0`, used as the unit/placeholder value.
    pub const UNIT: Value = Value(1);

    /// Smallest integer representable as an immediate.
    pub const MIN_IMMEDIATE: i64 = IMM_MIN;
    /// Largest integer representable as an immediate.
    pub const MAX_IMMEDIATE: i64 = IMM_MAX;

    pub fn make_immediate(n: i64) -> Result<Value, GcError> {
        if (IMM_MIN..=IMM_MAX).contains(&n) {
            Ok(Value(((n as usize) << 1) | 1))
        } else {
            Err(GcError::ImmediateOutOfRange(n))
        }
    }

    /// Like [`Value::make_immediate`] but panics when `n` does not fit.
    #[inline]
    pub fn int(n: i64) -> Value {
        debug_assert!((IMM_MIN..=IMM_MAX).contains(&n), "immediate {n} out of range");
        Value(((n as usize) << 1) | 1)
    }

    #[inline]
    pub const fn from_raw(raw: usize) -> Value {
        Value(raw)
    }

    #[inline]
    pub const fn raw(self) -> usize {
        self.0
    }

    #[inline]
    pub const fn is_immediate(self) -> bool {
        self.0 & 1 == 1
    }

    #[inline]
    pub const fn is_block(self) -> bool {
        self.0 & 1 == 0
    }

    /// Decodes an immediate; `None` for block references.
    #[inline]
    pub fn read_immediate(self) -> Option<i64> {
        if self.is_immediate() {
            Some((self.0 as i64) >> 1)
        } else {
            None
        }
    }

    /// Immediate payload; panics on a block reference.
    #[inline]
    pub fn as_int(self) -> i64 {
        self.read_immediate()
            .unwrap_or_else(|| panic!("expected an immediate, found {self:?}"))
    }

    /// Address of the first field for block references.
    #[inline]
    pub fn addr(self) -> Option<usize> {
        if self.is_block() {
            Some(self.0)
        } else {
            None
        }
    }

    /// Reference to the block whose header word is at `header_addr`.
    #[inline]
    pub(crate) fn from_header_addr(header_addr: usize) -> Value {
        Value(header_addr + WORD)
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.read_immediate() {
            Some(n) => write!(f, "Imm({n})"),
            None => write!(f, "Ref({:#x})", self.0),
        }
    }
}

/// Size and tag prefix of every heap block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BlockHeader {
    pub size: usize,
    pub tag: u8,
}

/// A decoded header word: either a live header or a forwarding address
/// installed during a collection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeaderWord {
    Header(BlockHeader),
    Forwarded(Value),
}

impl BlockHeader {
    pub const MAX_SIZE: usize = usize::MAX >> 9;

    pub fn new(size: usize, tag: u8) -> BlockHeader {
        assert!(size <= Self::MAX_SIZE, "block of {size} fields is too large");
        BlockHeader { size, tag }
    }

    /// Packs as `size << 9 | tag << 1 | 1`. The set low bit distinguishes a
    /// header from a forwarding address, which is always word-aligned.
    #[inline]
    pub fn encode(self) -> usize {
        (self.size << 9) | ((self.tag as usize) << 1) | 1
    }

    #[inline]
    pub fn decode(word: usize) -> HeaderWord {
        if word & 1 == 1 {
            HeaderWord::Header(BlockHeader {
                size: word >> 9,
                tag: ((word >> 1) & 0xff) as u8,
            })
        } else {
            HeaderWord::Forwarded(Value(word))
        }
    }
}

/// Total footprint of a block in words, header included.
#[inline]
pub fn block_words(header: BlockHeader) -> usize {
    header.size + 1
}

/// Whether the block's fields are values the collector must trace.
#[inline]
pub fn is_traceable(header: BlockHeader) -> bool {
    header.tag < NO_SCAN_TAG
}

/// Which tags are traced and which may be overwritten after initialization.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TagPolicy {
    pub no_scan_tag: u8,
    mutable: [u64; 4],
}

impl TagPolicy {
    /// Tag 0 and every opaque tag are mutable; constructor tags 1..NO_SCAN_TAG
    /// are write-once.
    pub fn new(no_scan_tag: u8) -> TagPolicy {
        let mut policy = TagPolicy {
            no_scan_tag,
            mutable: [0; 4],
        };
        policy.set_mutable(ARRAY_TAG, true);
        for tag in no_scan_tag..=u8::MAX {
            policy.set_mutable(tag, true);
        }
        policy
    }

    pub fn set_mutable(&mut self, tag: u8, mutable: bool) {
        let (word, bit) = ((tag / 64) as usize, tag % 64);
        if mutable {
            self.mutable[word] |= 1 << bit;
        } else {
            self.mutable[word] &= !(1 << bit);
        }
    }

    #[inline]
    pub fn is_mutable(&self, tag: u8) -> bool {
        self.mutable[(tag / 64) as usize] & (1 << (tag % 64)) != 0
    }

    #[inline]
    pub fn is_traceable(&self, tag: u8) -> bool {
        tag < self.no_scan_tag
    }
}

impl Default for TagPolicy {
    fn default() -> Self {
        TagPolicy::new(NO_SCAN_TAG)
    }
}

// Raw word access. Callers guarantee `addr` lies inside a live region; the
// regions are arrays of `AtomicUsize`, so concurrent access is never a data
// race at the language level.

#[inline]
pub(crate) unsafe fn load(addr: usize) -> usize {
    (*(addr as *const AtomicUsize)).load(Ordering::Acquire)
}

#[inline]
pub(crate) unsafe fn store(addr: usize, word: usize) {
    (*(addr as *const AtomicUsize)).store(word, Ordering::Release)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn immediate_encoding() {
        assert_eq!(Value::make_immediate(0).unwrap().raw(), 1);
        assert_eq!(Value::make_immediate(21).unwrap().raw(), 43);
        assert_eq!(Value::make_immediate(-1).unwrap().read_immediate(), Some(-1));
    }

    #[test]
    fn immediate_range() {
        assert!(Value::make_immediate(Value::MAX_IMMEDIATE).is_ok());
        assert!(Value::make_immediate(Value::MIN_IMMEDIATE).is_ok());
        assert_eq!(
            Value::make_immediate(Value::MAX_IMMEDIATE + 1),
            Err(GcError::ImmediateOutOfRange(Value::MAX_IMMEDIATE + 1))
        );
        assert!(Value::make_immediate(i64::MIN).is_err());
    }

    #[test]
    fn footprints() {
        assert_eq!(block_words(BlockHeader::new(0, 0)), 1);
        assert_eq!(block_words(BlockHeader::new(3, 0)), 4);
        assert_eq!(block_words(BlockHeader::new(1 << 20, 0)), (1 << 20) + 1);
    }

    #[test]
    fn traceability() {
        assert!(is_traceable(BlockHeader::new(1, 0)));
        assert!(!is_traceable(BlockHeader::new(1, NO_SCAN_TAG)));
        assert!(!is_traceable(BlockHeader::new(1, 255)));
    }

    #[test]
    fn default_mutability() {
        let policy = TagPolicy::default();
        assert!(policy.is_mutable(ARRAY_TAG));
        assert!(!policy.is_mutable(1));
        assert!(!policy.is_mutable(250));
        assert!(policy.is_mutable(DOUBLE_ARRAY_TAG));
    }

    proptest! {
        #[test]
        fn immediate_round_trip(n in Value::MIN_IMMEDIATE..=Value::MAX_IMMEDIATE) {
            let v = Value::make_immediate(n).unwrap();
            prop_assert!(v.is_immediate());
            prop_assert!(!v.is_block());
            prop_assert_eq!(v.read_immediate(), Some(n));
        }

        #[test]
        fn aligned_words_are_references(w in any::<usize>()) {
            let v = Value::from_raw(w & !(WORD - 1));
            prop_assert!(v.is_block() && !v.is_immediate());
            prop_assert_eq!(v.addr(), Some(w & !(WORD - 1)));
        }

        #[test]
        fn header_round_trip(size in 0usize..(1 << 40), tag in any::<u8>()) {
            let h = BlockHeader::new(size, tag);
            prop_assert_eq!(BlockHeader::decode(h.encode()), HeaderWord::Header(h));
        }
    }
}
