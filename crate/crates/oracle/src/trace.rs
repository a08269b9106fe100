//! Randomized mutator traces.
//!
//! Each thread works on a frame of root slots plus a set of global slots
//! shared by every thread, and performs a seeded mix of allocations, field
//! stores, root drops, forced collections and blocking sections. Run with a
//! [`crate::CycleChecker`] installed to compare every collection against the
//! mark-traversal oracle.

use std::thread;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use stwgc::value::{ARRAY_TAG, BYTES_TAG};
use stwgc::{CollectionKind, GcError, GlobalRoot, Mutator, Runtime, Value};

const ROOTS: usize = 12;
const GLOBALS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Src {
    Imm(i64),
    Root(usize),
    Global(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Op {
    /// Small block of `tag` built from the given sources into root `dst`.
    Alloc { dst: usize, tag: u8, fields: Vec<Src> },
    /// Block above the small-object limit, filled with one source.
    AllocLarge { dst: usize, size: usize, fill: Src },
    AllocOpaque { dst: usize, words: Vec<usize> },
    /// Stores `src` into a field of the mutable block in root `dst`.
    Store { dst: usize, field: usize, src: Src },
    /// `roots[dst] = roots[src].field`, when that is a traced block field.
    Load { dst: usize, src: usize, field: usize },
    Drop { dst: usize },
    SetGlobal { g: usize, src: Src },
    Collect(Option<CollectionKind>),
    Blocking,
    Yield,
}

#[derive(Clone, Debug)]
pub struct TraceSpec {
    pub threads: usize,
    pub ops_per_thread: usize,
    /// Fields of a large block; must exceed the heap's small-object limit.
    pub large_size: usize,
    /// Per-mille chance of a forced collection.
    pub collect_per_mille: u32,
}

fn src(rng: &mut StdRng) -> Src {
    match rng.gen_range(0..10) {
        0..=2 => Src::Imm(rng.gen_range(-1000..1000)),
        3..=8 => Src::Root(rng.gen_range(0..ROOTS)),
        _ => Src::Global(rng.gen_range(0..GLOBALS)),
    }
}

/// Deterministic per-thread op lists for `seed`.
pub fn generate(spec: &TraceSpec, seed: u64) -> Vec<Vec<Op>> {
    (0..spec.threads)
        .map(|t| {
            let mut rng = StdRng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ t as u64);
            (0..spec.ops_per_thread)
                .map(|_| {
                    let dst = rng.gen_range(0..ROOTS);
                    let roll = rng.gen_range(0..1000u32);
                    if roll < spec.collect_per_mille {
                        let kind = match rng.gen_range(0..3) {
                            0 => None,
                            1 => Some(CollectionKind::Full),
                            _ => Some(CollectionKind::Partial),
                        };
                        return Op::Collect(kind);
                    }
                    match rng.gen_range(0..100) {
                        0..=39 => {
                            let tag = if rng.gen_bool(0.5) { ARRAY_TAG } else { rng.gen_range(1..5) };
                            let n = rng.gen_range(0..5);
                            Op::Alloc {
                                dst,
                                tag,
                                fields: (0..n).map(|_| src(&mut rng)).collect(),
                            }
                        }
                        40..=41 => Op::AllocLarge {
                            dst,
                            size: spec.large_size,
                            fill: src(&mut rng),
                        },
                        42..=44 => Op::AllocOpaque {
                            dst,
                            words: (0..rng.gen_range(0..4)).map(|_| rng.gen()).collect(),
                        },
                        45..=64 => Op::Store {
                            dst,
                            field: rng.gen_range(0..8),
                            src: src(&mut rng),
                        },
                        65..=79 => Op::Load {
                            dst,
                            src: rng.gen_range(0..ROOTS),
                            field: rng.gen_range(0..4),
                        },
                        80..=87 => Op::Drop { dst },
                        88..=93 => Op::SetGlobal {
                            g: rng.gen_range(0..GLOBALS),
                            src: src(&mut rng),
                        },
                        94..=96 => Op::Blocking,
                        _ => Op::Yield,
                    }
                })
                .collect()
        })
        .collect()
}

/// Roots holding the shared anchors in [`generate_backward`] traces.
const ANCHORS: usize = 3;

/// Traces aimed at the backward-pointer lists: each thread keeps a few
/// large shared arrays, stores fresh page blocks into them, drops the
/// direct roots of those blocks and forces partial collections. Page
/// blocks also point at each other so whole page subgraphs hang off a
/// single shared field.
pub fn generate_backward(threads: usize, ops_per_thread: usize, large_size: usize, seed: u64) -> Vec<Vec<Op>> {
    (0..threads)
        .map(|t| {
            let mut rng = StdRng::seed_from_u64(seed.wrapping_mul(0xd1b5_4a32_d192_ed03) ^ t as u64);
            let small = |rng: &mut StdRng| rng.gen_range(ANCHORS..ROOTS);
            let mut ops: Vec<Op> = (0..ANCHORS)
                .map(|dst| Op::AllocLarge {
                    dst,
                    size: large_size,
                    fill: Src::Imm(0),
                })
                .collect();
            ops.extend((0..ops_per_thread).map(|_| match rng.gen_range(0..100) {
                0..=29 => {
                    let n = rng.gen_range(1..4);
                    Op::Alloc {
                        dst: small(&mut rng),
                        tag: ARRAY_TAG,
                        fields: (0..n)
                            .map(|_| if rng.gen_bool(0.8) { Src::Root(small(&mut rng)) } else { Src::Imm(7) })
                            .collect(),
                    }
                }
                30..=59 => Op::Store {
                    dst: rng.gen_range(0..ANCHORS),
                    field: rng.gen_range(0..large_size),
                    src: Src::Root(small(&mut rng)),
                },
                60..=74 => Op::Drop { dst: small(&mut rng) },
                75..=79 => Op::Load {
                    dst: small(&mut rng),
                    src: rng.gen_range(0..ANCHORS),
                    field: rng.gen_range(0..large_size),
                },
                80..=83 => Op::Store {
                    dst: small(&mut rng),
                    field: rng.gen_range(0..3),
                    src: Src::Root(small(&mut rng)),
                },
                84..=86 => Op::SetGlobal {
                    g: rng.gen_range(0..GLOBALS),
                    src: Src::Root(rng.gen_range(0..ROOTS)),
                },
                // A fresh anchor whose initial contents are a page block.
                87 => Op::AllocLarge {
                    dst: rng.gen_range(0..ANCHORS),
                    size: large_size,
                    fill: Src::Root(small(&mut rng)),
                },
                88..=93 => Op::Collect(Some(CollectionKind::Partial)),
                94 => Op::Collect(None),
                95..=96 => Op::Blocking,
                _ => Op::Yield,
            }));
            ops
        })
        .collect()
}

struct Ctx<'a> {
    m: &'a Mutator,
    frame: &'a stwgc::Frame,
    globals: &'a [GlobalRoot],
}

impl Ctx<'_> {
    fn value(&self, s: Src) -> Value {
        match s {
            Src::Imm(n) => Value::int(n),
            Src::Root(i) => self.m.root(self.frame, i),
            Src::Global(g) => self.m.global(self.globals[g]),
        }
    }

    /// Protects `fields` across the allocation by keeping them in roots.
    fn step(&self, op: &Op) -> Result<(), GcError> {
        let m = self.m;
        match op {
            Op::Alloc { dst, tag, fields } => {
                let vals: Vec<Value> = fields.iter().map(|s| self.value(*s)).collect();
                let v = m.alloc(*tag, &vals)?;
                m.set_root(self.frame, *dst, v);
            }
            Op::AllocLarge { dst, size, fill } => {
                let v = m.alloc_filled(ARRAY_TAG, *size, self.value(*fill))?;
                m.set_root(self.frame, *dst, v);
            }
            Op::AllocOpaque { dst, words } => {
                let v = m.alloc_opaque(BYTES_TAG, words)?;
                m.set_root(self.frame, *dst, v);
            }
            Op::Store { dst, field, src } => {
                let target = m.root(self.frame, *dst);
                if target.is_block() {
                    let hd = m.header(target)?;
                    if hd.tag == ARRAY_TAG && *field < hd.size {
                        m.set_field(target, *field, self.value(*src))?;
                    }
                }
            }
            Op::Load { dst, src, field } => {
                let from = m.root(self.frame, *src);
                if from.is_block() {
                    let hd = m.header(from)?;
                    if hd.tag < BYTES_TAG && *field < hd.size {
                        let v = m.field(from, *field)?;
                        m.set_root(self.frame, *dst, v);
                    }
                }
            }
            Op::Drop { dst } => m.set_root(self.frame, *dst, Value::int(0)),
            Op::SetGlobal { g, src } => m.set_global(self.globals[*g], self.value(*src)),
            Op::Collect(kind) => {
                m.collect_now(*kind)?;
            }
            Op::Blocking => m.blocking(std::hint::spin_loop)?,
            Op::Yield => m.yield_point(),
        }
        Ok(())
    }
}

/// Runs the traces on `rt`, one registered thread per op list. Returns the
/// first error any thread hit.
pub fn run(rt: &Runtime, traces: &[Vec<Op>]) -> Result<(), GcError> {
    let globals: Vec<GlobalRoot> = {
        let m = rt.register()?;
        (0..GLOBALS)
            .map(|_| m.register_global(Value::int(0)))
            .collect::<Result<_, _>>()?
    };
    let results: Vec<Result<(), GcError>> = thread::scope(|s| {
        let handles: Vec<_> = traces
            .iter()
            .map(|ops| {
                let globals = &globals;
                s.spawn(move || {
                    let m = rt.register()?;
                    let frame = m.push_frame(&[Value::int(0); ROOTS]);
                    let ctx = Ctx {
                        m: &m,
                        frame: &frame,
                        globals,
                    };
                    let r = ops.iter().try_for_each(|op| ctx.step(op));
                    m.pop_frame(frame)?;
                    r
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("trace thread panicked")).collect()
    });
    let m = rt.register()?;
    for g in globals {
        m.unregister_global(g)?;
    }
    results.into_iter().collect()
}
