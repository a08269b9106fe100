//! Game of life with one heap block per cell. Every step allocates a fresh
//! board and a fresh cell for every position; threads own bands of rows
//! and meet at a barrier between steps. Cells outside the board are dead.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Barrier;
use std::time::{Duration, Instant};

use stwgc::value::ARRAY_TAG;
use stwgc::{GcStats, GlobalRoot, Mutator, Runtime, Value};

use crate::{run_workers, splitmix64, verify, BenchError, RunConfig, RunReport};

const CELL_TAG: u8 = 1;

/// One native step, used as the reference automaton.
pub fn reference_step(n: usize, board: &[bool]) -> Vec<bool> {
    (0..n * n)
        .map(|idx| {
            let live = neighbours(n, idx, |i| board[i]);
            matches!((board[idx], live), (true, 2) | (_, 3))
        })
        .collect()
}

fn neighbours(n: usize, idx: usize, alive: impl Fn(usize) -> bool) -> usize {
    let (r, c) = ((idx / n) as isize, (idx % n) as isize);
    let mut count = 0;
    for dr in -1..=1 {
        for dc in -1..=1 {
            if dr == 0 && dc == 0 {
                continue;
            }
            let (rr, cc) = (r + dr, c + dc);
            if rr >= 0 && cc >= 0 && (rr as usize) < n && (cc as usize) < n && alive(rr as usize * n + cc as usize) {
                count += 1;
            }
        }
    }
    count
}

/// Seeded board with roughly a third of the cells alive.
pub fn seeded_board(n: usize, seed: u64) -> Vec<bool> {
    (0..n * n).map(|i| splitmix64(seed ^ i as u64).is_multiple_of(3)).collect()
}

fn alive(m: &Mutator, board: Value, idx: usize) -> Result<bool, BenchError> {
    let cell = m.field(board, idx)?;
    Ok(m.field(cell, 0)?.as_int() == 1)
}

/// Computes row `r` of the next board from `cur` and stores fresh cells
/// into the board held by `g_next`.
fn step_row(m: &Mutator, n: usize, r: usize, cur: Value, g_next: GlobalRoot) -> Result<(), BenchError> {
    let lo = r.saturating_sub(1) * n;
    let hi = (r + 2).min(n) * n;
    let band = (lo..hi).map(|i| alive(m, cur, i)).collect::<Result<Vec<_>, _>>()?;
    let row: Vec<bool> = (r * n..(r + 1) * n)
        .map(|idx| {
            let live = neighbours(n, idx, |i| band[i - lo]);
            matches!((band[idx - lo], live), (true, 2) | (_, 3))
        })
        .collect();
    for (c, a) in row.into_iter().enumerate() {
        let cell = m.alloc(CELL_TAG, &[Value::int(a as i64)])?;
        m.set_field(m.global(g_next), r * n + c, cell)?;
    }
    Ok(())
}

/// Runs `steps` generations on the heap and returns the final board.
pub fn life_on_heap(
    cfg: &RunConfig,
    n: usize,
    initial: &[bool],
    steps: usize,
) -> Result<(Vec<bool>, GcStats, Duration), BenchError> {
    cfg.check_threads()?;
    if n < 3 || initial.len() != n * n {
        return Err(BenchError::InvalidArgs("life board must be at least 3x3".into()));
    }
    let rt = Runtime::new(cfg.runtime.clone())?;
    let start = Instant::now();
    let host = rt.register()?;
    let board = host.alloc_filled(ARRAY_TAG, n * n, Value::int(0))?;
    let g_cur = host.register_global(board)?;
    for (i, &a) in initial.iter().enumerate() {
        let cell = host.alloc(CELL_TAG, &[Value::int(a as i64)])?;
        host.set_field(host.global(g_cur), i, cell)?;
    }
    let g_next = host.register_global(Value::int(0))?;

    let threads = cfg.threads;
    let barrier = Barrier::new(threads);
    // A failed thread keeps meeting the barriers so the others finish.
    let failed = AtomicBool::new(false);
    run_workers(&rt, Some(&host), threads, |t, m| {
        let mut err = None;
        let mut attempt = |f: &mut dyn FnMut() -> Result<(), BenchError>| {
            if !failed.load(Ordering::SeqCst) {
                if let Err(e) = f() {
                    failed.store(true, Ordering::SeqCst);
                    err.get_or_insert(e);
                }
            }
        };
        for _ in 0..steps {
            if t == 0 {
                attempt(&mut || {
                    let next = m.alloc_filled(ARRAY_TAG, n * n, Value::int(0))?;
                    m.set_global(g_next, next);
                    Ok(())
                });
            }
            m.blocking(|| barrier.wait())?;
            attempt(&mut || {
                for r in (t..n).step_by(threads) {
                    step_row(m, n, r, m.global(g_cur), g_next)?;
                }
                Ok(())
            });
            m.blocking(|| barrier.wait())?;
            if t == 0 && !failed.load(Ordering::SeqCst) {
                m.set_global(g_cur, m.global(g_next));
            }
        }
        err.map_or(Ok(()), Err)
    })?;

    let board = host.global(g_cur);
    let out = (0..n * n)
        .map(|i| alive(&host, board, i))
        .collect::<Result<Vec<_>, _>>()?;
    let elapsed = start.elapsed();
    host.unregister_global(g_cur)?;
    host.unregister_global(g_next)?;
    drop(host);
    Ok((out, rt.stats(), elapsed))
}

pub fn run_life(cfg: &RunConfig, n: usize, steps: usize) -> Result<RunReport, BenchError> {
    let initial = seeded_board(n, cfg.seed);
    let (out, gc, wall_time) = life_on_heap(cfg, n, &initial, steps)?;
    let checksum = out.iter().filter(|&&a| a).count() as u64;
    verify(cfg, "life", checksum, || {
        let mut b = initial.clone();
        for _ in 0..steps {
            b = reference_step(n, &b);
        }
        b.iter().filter(|&&a| a).count() as u64
    })?;
    Ok(RunReport {
        workload: "life",
        threads: cfg.threads,
        wall_time,
        checksum,
        gc,
        detail: vec![("board", n.to_string()), ("steps", steps.to_string())],
    })
}
