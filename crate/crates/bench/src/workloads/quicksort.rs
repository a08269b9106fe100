//! In-place quicksort of integer arrays. There are 4 independent sorting
//! tasks dealt to the threads round-robin. The pending ranges live on the
//! heap as a linked list of cons cells, so the sort allocates steadily.

use std::time::Instant;

use stwgc::value::ARRAY_TAG;
use stwgc::{Mutator, Runtime, Value};

use crate::{fold, run_workers, splitmix64, verify, BenchError, RunConfig, RunReport};

pub const TASKS: usize = 4;
const RANGE_TAG: u8 = 1;

pub fn seeded_input(n: usize, seed: u64, task: usize) -> Vec<i64> {
    (0..n)
        .map(|i| (splitmix64(seed ^ ((task as u64) << 40) ^ i as u64) % 1_000_000) as i64)
        .collect()
}

fn task_checksum(sorted: &[i64]) -> u64 {
    sorted.iter().fold(0, |acc, &x| fold(acc, x as u64))
}

pub fn reference_checksum(n: usize, seed: u64) -> u64 {
    (0..TASKS).fold(0u64, |acc, task| {
        let mut v = seeded_input(n, seed, task);
        v.sort_unstable();
        acc.wrapping_add(task_checksum(&v))
    })
}

/// Lomuto partition of `arr[lo..=hi]`; returns the pivot position.
fn partition(m: &Mutator, arr: Value, lo: usize, hi: usize) -> Result<usize, BenchError> {
    let pivot = m.field(arr, hi)?;
    let mut store = lo;
    for i in lo..hi {
        let x = m.field(arr, i)?;
        if x.as_int() < pivot.as_int() {
            let y = m.field(arr, store)?;
            m.set_field(arr, i, y)?;
            m.set_field(arr, store, x)?;
            store += 1;
        }
    }
    let y = m.field(arr, store)?;
    m.set_field(arr, hi, y)?;
    m.set_field(arr, store, pivot)?;
    Ok(store)
}

/// Sorts one task's array on the heap and returns its checksum.
fn sort_task(m: &Mutator, n: usize, seed: u64, task: usize) -> Result<u64, BenchError> {
    let input = seeded_input(n, seed, task);
    let vals: Vec<Value> = input.iter().map(|&x| Value::int(x)).collect();
    let arr = m.alloc_filled(ARRAY_TAG, n, Value::int(0))?;
    let f = m.push_frame(&[arr, Value::int(0)]);
    for (i, v) in vals.into_iter().enumerate() {
        m.set_field(m.root(&f, 0), i, v)?;
    }
    // Stack cells are (lo, hi, next).
    let push = |lo: usize, hi: usize| -> Result<(), BenchError> {
        let cell = m.alloc(RANGE_TAG, &[Value::int(lo as i64), Value::int(hi as i64), m.root(&f, 1)])?;
        m.set_root(&f, 1, cell);
        Ok(())
    };
    push(0, n - 1)?;
    while !m.root(&f, 1).is_immediate() {
        let top = m.root(&f, 1);
        let lo = m.field(top, 0)?.as_int() as usize;
        let hi = m.field(top, 1)?.as_int() as usize;
        m.set_root(&f, 1, m.field(top, 2)?);
        if lo >= hi {
            continue;
        }
        let p = partition(m, m.root(&f, 0), lo, hi)?;
        if p > lo {
            push(lo, p - 1)?;
        }
        push(p + 1, hi)?;
        m.yield_point();
    }

    let arr = m.root(&f, 0);
    let mut sorted = Vec::with_capacity(n);
    for i in 0..n {
        sorted.push(m.field(arr, i)?.as_int());
    }
    m.pop_frame(f)?;
    if sorted.windows(2).any(|w| w[0] > w[1]) {
        return Err(BenchError::ChecksumMismatch {
            workload: "seq_quicksort",
            expected: task_checksum(&{
                let mut s = sorted.clone();
                s.sort_unstable();
                s
            }),
            got: task_checksum(&sorted),
        });
    }
    Ok(task_checksum(&sorted))
}

pub fn run_seq_quicksort(cfg: &RunConfig, n: usize) -> Result<RunReport, BenchError> {
    cfg.check_threads()?;
    if n == 0 {
        return Err(BenchError::InvalidArgs("array length must be at least 1".into()));
    }
    let rt = Runtime::new(cfg.runtime.clone())?;
    let threads = cfg.threads;
    let seed = cfg.seed;
    let start = Instant::now();
    let sums = run_workers(&rt, None, threads.min(TASKS), |t, m| {
        let mut s = 0u64;
        for task in (t..TASKS).step_by(threads.min(TASKS)) {
            s = s.wrapping_add(sort_task(m, n, seed, task)?);
        }
        Ok(s)
    })?;
    let checksum = sums.iter().fold(0u64, |a, &s| a.wrapping_add(s));
    let wall_time = start.elapsed();
    verify(cfg, "seq_quicksort", checksum, || reference_checksum(n, seed))?;
    Ok(RunReport {
        workload: "seq_quicksort",
        threads,
        wall_time,
        checksum,
        gc: rt.stats(),
        detail: vec![("n", n.to_string()), ("tasks", TASKS.to_string())],
    })
}
