//! Long-lived data plus short-lived churn. The host builds a spine of
//! 100-field blocks that stays reachable for the whole run; the workers
//! then allocate many small blocks of which only a window of 8 per thread
//! is ever live.

use std::time::Instant;

use stwgc::value::ARRAY_TAG;
use stwgc::{Mutator, Runtime, Value};

use crate::{run_workers, splitmix64, verify, BenchError, RunConfig, RunReport};

const LONG_FIELDS: usize = 100;
const BLOCK_TAG: u8 = 1;
const WINDOW: usize = 8;
const YIELD_EVERY: usize = 1024;

fn churn_size(seed: u64, i: usize) -> usize {
    1 + (splitmix64(seed ^ i as u64) % 8) as usize
}

fn churn_field(i: usize, j: usize) -> i64 {
    ((i + j) % 1024) as i64
}

fn long_field(b: usize, j: usize) -> i64 {
    ((b * LONG_FIELDS + j) % 1024) as i64
}

/// Number of spine blocks; each takes a header plus 100 fields.
fn spine_blocks(long_lived_words: usize) -> usize {
    long_lived_words / (LONG_FIELDS + 1)
}

/// Native sum of every field the heap run reads back.
pub fn reference_sum(long_lived_words: usize, churn_allocs: usize, seed: u64) -> u64 {
    let mut sum = 0u64;
    for b in 0..spine_blocks(long_lived_words) {
        for j in 0..LONG_FIELDS {
            sum = sum.wrapping_add(long_field(b, j) as u64);
        }
    }
    for i in 0..churn_allocs {
        for j in 0..churn_size(seed, i) {
            sum = sum.wrapping_add(churn_field(i, j) as u64);
        }
    }
    sum
}

fn block_sum(m: &Mutator, v: Value) -> Result<u64, BenchError> {
    let mut s = 0u64;
    for j in 0..m.size(v)? {
        s = s.wrapping_add(m.field(v, j)?.as_int() as u64);
    }
    Ok(s)
}

pub fn run_churn(cfg: &RunConfig, long_lived_words: usize, churn_allocs: usize) -> Result<RunReport, BenchError> {
    cfg.check_threads()?;
    let rt = Runtime::new(cfg.runtime.clone())?;
    let threads = cfg.threads;
    let seed = cfg.seed;
    let start = Instant::now();
    let host = rt.register()?;

    let nb = spine_blocks(long_lived_words);
    let spine = host.alloc_filled(ARRAY_TAG, nb.max(1), Value::int(0))?;
    let g = host.register_global(spine)?;
    let mut fields = [Value::int(0); LONG_FIELDS];
    for b in 0..nb {
        for (j, f) in fields.iter_mut().enumerate() {
            *f = Value::int(long_field(b, j));
        }
        let block = host.alloc(BLOCK_TAG, &fields)?;
        host.set_field(host.global(g), b, block)?;
    }

    let sums = run_workers(&rt, Some(&host), threads, |t, m| {
        let frame = m.push_frame(&[Value::int(0); WINDOW]);
        let mut sum = 0u64;
        let mut vals = Vec::with_capacity(8);
        for (k, i) in (t..churn_allocs).step_by(threads).enumerate() {
            vals.clear();
            vals.extend((0..churn_size(seed, i)).map(|j| Value::int(churn_field(i, j))));
            let block = m.alloc(BLOCK_TAG, &vals)?;
            // The evicted block is read back once, after surviving any
            // collections since it was allocated.
            let old = m.root(&frame, k % WINDOW);
            if !old.is_immediate() {
                sum = sum.wrapping_add(block_sum(m, old)?);
            }
            m.set_root(&frame, k % WINDOW, block);
            if k % YIELD_EVERY == YIELD_EVERY - 1 {
                m.yield_point();
            }
        }
        for s in 0..WINDOW {
            let v = m.root(&frame, s);
            if !v.is_immediate() {
                sum = sum.wrapping_add(block_sum(m, v)?);
            }
        }
        m.pop_frame(frame)?;
        Ok(sum)
    })?;

    let mut checksum = sums.iter().fold(0u64, |a, &s| a.wrapping_add(s));
    let spine = host.global(g);
    for b in 0..nb {
        checksum = checksum.wrapping_add(block_sum(&host, host.field(spine, b)?)?);
    }
    host.unregister_global(g)?;
    let wall_time = start.elapsed();
    drop(host);
    verify(cfg, "churn", checksum, || reference_sum(long_lived_words, churn_allocs, seed))?;
    Ok(RunReport {
        workload: "churn",
        threads,
        wall_time,
        checksum,
        gc: rt.stats(),
        detail: vec![
            ("long_lived_words", long_lived_words.to_string()),
            ("churn_allocs", churn_allocs.to_string()),
        ],
    })
}
