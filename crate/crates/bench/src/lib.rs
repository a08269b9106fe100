//! Parallel workloads driven through the stwgc mutator API.
//!
//! Every workload builds its data on a fresh runtime, runs it on registered
//! worker threads, and checks its result against a plain native
//! computation. Results are folded into a checksum that does not depend on
//! the thread count or on how often the heap was collected.

use std::fmt::Write as _;
use std::thread;
use std::time::Duration;

use stwgc::{GcError, GcStats, Mutator, Runtime, RuntimeConfig};

pub mod workloads;

pub use workloads::{
    churn::run_churn, life::run_life, matmult::run_matmult, pi::run_pi,
    quicksort::run_seq_quicksort, sieve::run_sieve, sieve_cml::run_sieve_cml,
};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Gc(#[from] GcError),

    #[error("{workload}: checksum {got} does not match reference {expected}")]
    ChecksumMismatch {
        workload: &'static str,
        expected: u64,
        got: u64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgs(String),

    #[error("a worker thread panicked")]
    WorkerPanicked,
}

impl BenchError {
    /// Process exit code for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::InvalidArgs(_) => 2,
            BenchError::ChecksumMismatch { .. } => 3,
            BenchError::Gc(GcError::OutOfMemory { .. }) => 4,
            BenchError::Gc(GcError::InvalidConfig(_)) => 2,
            BenchError::Gc(_) | BenchError::WorkerPanicked => 5,
        }
    }
}

/// Settings shared by every workload run.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub runtime: RuntimeConfig,
    pub threads: usize,
    pub seed: u64,
    /// Compare the result with a native reference computation.
    pub verify: bool,
}

impl RunConfig {
    pub fn new(runtime: RuntimeConfig, threads: usize) -> RunConfig {
        RunConfig {
            runtime,
            threads,
            seed: 42,
            verify: true,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> RunConfig {
        self.seed = seed;
        self
    }

    pub(crate) fn check_threads(&self) -> Result<(), BenchError> {
        if self.threads == 0 {
            return Err(BenchError::InvalidArgs("threads must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub workload: &'static str,
    pub threads: usize,
    pub wall_time: Duration,
    pub checksum: u64,
    pub gc: GcStats,
    /// Workload-specific extra fields.
    pub detail: Vec<(&'static str, String)>,
}

impl RunReport {
    /// `key=value` lines; GC statistics are included on request.
    pub fn to_kv_lines(&self, gc_stats: bool) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "workload={}", self.workload);
        let _ = writeln!(out, "threads={}", self.threads);
        let _ = writeln!(out, "wall_time_s={:.6}", self.wall_time.as_secs_f64());
        let _ = writeln!(out, "checksum={}", self.checksum);
        for (k, v) in &self.detail {
            let _ = writeln!(out, "{k}={v}");
        }
        if gc_stats {
            out.push_str(&self.gc.to_kv_lines());
        }
        out
    }

    pub fn detail(&self, key: &str) -> Option<&str> {
        self.detail
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v.as_str())
    }
}

pub(crate) fn verify(
    cfg: &RunConfig,
    workload: &'static str,
    got: u64,
    reference: impl FnOnce() -> u64,
) -> Result<(), BenchError> {
    if !cfg.verify {
        return Ok(());
    }
    let expected = reference();
    if expected != got {
        return Err(BenchError::ChecksumMismatch {
            workload,
            expected,
            got,
        });
    }
    Ok(())
}

/// Runs `f(index, mutator)` on `threads` freshly registered threads and
/// collects the results in index order. A registered `host` waits in a
/// blocking section so collections can proceed without it.
pub fn run_workers<R, F>(
    rt: &Runtime,
    host: Option<&Mutator>,
    threads: usize,
    f: F,
) -> Result<Vec<R>, BenchError>
where
    R: Send,
    F: Fn(usize, &Mutator) -> Result<R, BenchError> + Sync,
{
    if let Some(h) = host {
        h.enter_blocking_section()?;
    }
    let results: Vec<Result<R, BenchError>> = thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let f = &f;
                s.spawn(move || {
                    let m = rt.register()?;
                    f(t, &m)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or(Err(BenchError::WorkerPanicked)))
            .collect()
    });
    if let Some(h) = host {
        h.leave_blocking_section()?;
    }
    results.into_iter().collect()
}

/// 64-bit mix used to derive per-item seeds and data.
#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Order-sensitive fold of 64-bit words.
#[inline]
pub fn fold(acc: u64, w: u64) -> u64 {
    splitmix64(acc ^ w)
}

/// Number of primes not above `n`, by a plain sieve.
pub fn prime_count(n: usize) -> usize {
    if n < 2 {
        return 0;
    }
    let mut composite = vec![false; n + 1];
    let mut count = 0;
    for i in 2..=n {
        if !composite[i] {
            count += 1;
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    count
}
