//! Row-parallel matrix product. Operand rows are float arrays on the heap;
//! each thread computes its own rows of the result and links them into a
//! shared result array.

use std::time::{Duration, Instant};

use stwgc::value::ARRAY_TAG;
use stwgc::{GcStats, Mutator, Runtime, Value};

use crate::{fold, run_workers, splitmix64, verify, BenchError, RunConfig, RunReport};

pub type Matrix = Vec<Vec<f64>>;

/// Seeded square matrix with small integer entries in -9..=9, so products
/// are exact.
pub fn seeded_matrix(n: usize, seed: u64, which: u64) -> Matrix {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let h = splitmix64(seed ^ (which << 48) ^ (i * n + j) as u64);
                    (h % 19) as f64 - 9.0
                })
                .collect()
        })
        .collect()
}

/// Naive single-threaded product with the same summation order as the heap
/// version.
pub fn reference_product(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            for j in 0..n {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

pub fn matrix_checksum(c: &Matrix) -> u64 {
    c.iter()
        .flatten()
        .fold(0, |acc, x| fold(acc, x.to_bits()))
}

fn store_matrix(m: &Mutator, rows: &Matrix) -> Result<Value, BenchError> {
    let outer = m.alloc_filled(ARRAY_TAG, rows.len(), Value::int(0))?;
    let f = m.push_frame(&[outer]);
    for (i, row) in rows.iter().enumerate() {
        let r = m.alloc_floats(row)?;
        m.set_field(m.root(&f, 0), i, r)?;
    }
    let outer = m.root(&f, 0);
    m.pop_frame(f)?;
    Ok(outer)
}

/// Multiplies `a` by `b` on a fresh runtime. Returns the product, the GC
/// statistics and the time spent on the heap.
pub fn multiply_on_heap(
    cfg: &RunConfig,
    a: &Matrix,
    b: &Matrix,
) -> Result<(Matrix, GcStats, Duration), BenchError> {
    cfg.check_threads()?;
    let n = a.len();
    if n == 0 || b.len() != n || a.iter().chain(b).any(|r| r.len() != n) {
        return Err(BenchError::InvalidArgs("matrices must be square and of equal size".into()));
    }
    let rt = Runtime::new(cfg.runtime.clone())?;
    let start = Instant::now();
    let host = rt.register()?;
    let ga = {
        let v = store_matrix(&host, a)?;
        host.register_global(v)?
    };
    let gb = {
        let v = store_matrix(&host, b)?;
        host.register_global(v)?
    };
    let gc = {
        let v = host.alloc_filled(ARRAY_TAG, n, Value::int(0))?;
        host.register_global(v)?
    };

    let threads = cfg.threads;
    run_workers(&rt, Some(&host), threads, |t, m| {
        for i in (t..n).step_by(threads) {
            let arow = m.read_floats(m.field(m.global(ga), i)?)?;
            let mut acc = vec![0.0; n];
            for (k, aik) in arow.iter().enumerate() {
                let brow = m.read_floats(m.field(m.global(gb), k)?)?;
                for (c, bkj) in acc.iter_mut().zip(&brow) {
                    *c += aik * bkj;
                }
            }
            let row = m.alloc_floats(&acc)?;
            m.set_field(m.global(gc), i, row)?;
        }
        Ok(())
    })?;

    let c_outer = host.global(gc);
    let mut c = Vec::with_capacity(n);
    for i in 0..n {
        c.push(host.read_floats(host.field(c_outer, i)?)?);
    }
    let elapsed = start.elapsed();
    for g in [ga, gb, gc] {
        host.unregister_global(g)?;
    }
    drop(host);
    Ok((c, rt.stats(), elapsed))
}

pub fn run_matmult(cfg: &RunConfig, n: usize) -> Result<RunReport, BenchError> {
    if n == 0 {
        return Err(BenchError::InvalidArgs("matrix dimension must be at least 1".into()));
    }
    let a = seeded_matrix(n, cfg.seed, 1);
    let b = seeded_matrix(n, cfg.seed, 2);
    let (c, gc, wall_time) = multiply_on_heap(cfg, &a, &b)?;
    let checksum = matrix_checksum(&c);
    verify(cfg, "matmult", checksum, || matrix_checksum(&reference_product(&a, &b)))?;
    Ok(RunReport {
        workload: "matmult",
        threads: cfg.threads,
        wall_time,
        checksum,
        gc,
        detail: vec![("n", n.to_string())],
    })
}
