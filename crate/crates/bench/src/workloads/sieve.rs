//! Shared-board sieve of Eratosthenes: one big mutable array of flags, with
//! each thread striking out the multiples of its own candidates.

use std::time::Instant;

use stwgc::value::ARRAY_TAG;
use stwgc::{Runtime, Value};

use crate::{prime_count, run_workers, verify, BenchError, RunConfig, RunReport};

const YIELD_EVERY: usize = 4096;

pub fn run_sieve(cfg: &RunConfig, limit: usize) -> Result<RunReport, BenchError> {
    cfg.check_threads()?;
    if limit < 2 {
        return Err(BenchError::InvalidArgs("sieve limit must be at least 2".into()));
    }
    let rt = Runtime::new(cfg.runtime.clone())?;
    let threads = cfg.threads;
    let start = Instant::now();
    let host = rt.register()?;
    let board = host.alloc_filled(ARRAY_TAG, limit + 1, Value::int(1))?;
    host.set_field(board, 0, Value::int(0))?;
    host.set_field(board, 1, Value::int(0))?;
    let g = host.register_global(board)?;

    run_workers(&rt, Some(&host), threads, |t, m| {
        let mut board = m.global(g);
        let mut stores = 0;
        let mut p = 2 + t;
        while p * p <= limit {
            // A composite candidate only repeats work already done.
            if m.field(board, p)?.as_int() == 1 {
                let mut j = p * p;
                while j <= limit {
                    m.set_field(board, j, Value::int(0))?;
                    stores += 1;
                    if stores % YIELD_EVERY == 0 {
                        m.yield_point();
                        board = m.global(g);
                    }
                    j += p;
                }
            }
            p += threads;
        }
        Ok(())
    })?;

    let board = host.global(g);
    let mut primes = 0u64;
    for i in 0..=limit {
        primes += host.field(board, i)?.as_int() as u64;
    }
    host.unregister_global(g)?;
    let wall_time = start.elapsed();
    drop(host);
    verify(cfg, "sieve", primes, || prime_count(limit) as u64)?;
    Ok(RunReport {
        workload: "sieve",
        threads,
        wall_time,
        checksum: primes,
        gc: rt.stats(),
        detail: vec![("limit", limit.to_string())],
    })
}
