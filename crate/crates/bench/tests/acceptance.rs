//! Acceptance suite. Prints one PASS, FAIL or SKIP line per criterion and
//! exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use stwgc::value::ARRAY_TAG;
use stwgc::{
    new_shared_size, CollectionKind, GcError, GrowthFactor, HeapConfig, Runtime, RuntimeConfig,
    Value,
};
use stwgc_bench::workloads::pi::{run_pi_sampled, Sampling};
use stwgc_bench::workloads::sieve_cml::suggested_pages;
use stwgc_bench::{
    run_churn, run_life, run_matmult, run_pi, run_seq_quicksort, run_sieve, run_sieve_cml,
    RunConfig, RunReport,
};
use stwgc_oracle::trace::{self, TraceSpec};
use stwgc_oracle::CycleChecker;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn tiny(threads: usize) -> RuntimeConfig {
    RuntimeConfig::new(HeapConfig {
        n_pages: 2 * threads,
        page_size: 512,
        shared_size: 1 << 14,
        min_shared_size: 1 << 12,
        ..HeapConfig::default()
    })
}

/// Large enough that no workload below ever collects. The channel sieve
/// needs a page per filter thread.
fn huge(name: &str) -> RuntimeConfig {
    let (n_pages, page_size) = if name == "sieve_cml" { (suggested_pages(2000), 1 << 14) } else { (16, 1 << 20) };
    RuntimeConfig::new(HeapConfig {
        n_pages,
        page_size,
        shared_size: 1 << 24,
        min_shared_size: 1 << 24,
        ..HeapConfig::default()
    })
}

/// Oracle for the sizing rule with k = 3/2, in plain integer arithmetic.
fn sizing_oracle(shared: usize, pages: usize, request: usize, min: usize) -> usize {
    let used = shared + pages;
    let scaled = (3 * used).div_ceil(2);
    scaled.max(used + request).max(min)
}

fn checked_traces(traces: &[Vec<trace::Op>], cfg: RuntimeConfig) -> Result<stwgc_oracle::CheckReport, String> {
    let rt = Runtime::new(cfg).map_err(|e| e.to_string())?;
    let checker = Arc::new(CycleChecker::new());
    rt.set_observer(Some(checker.clone()));
    trace::run(&rt, traces).map_err(|e| e.to_string())?;
    let audit = rt.audit();
    ensure(audit.cursor_violations == 0, || format!("{} cursor violations", audit.cursor_violations))?;
    Ok(checker.report())
}

fn transparency() -> Outcome {
    let (mut cycles, mut partial, mut full) = (0, 0, 0);
    for seed in 0..1000u64 {
        let threads = 1 + (seed % 8) as usize;
        let spec = TraceSpec {
            threads,
            ops_per_thread: 2000 / threads.min(4),
            large_size: 80,
            collect_per_mille: 5,
        };
        let ops = trace::generate(&spec, seed);
        let allocs = ops.iter().flatten().filter(|op| {
            matches!(op, trace::Op::Alloc { .. } | trace::Op::AllocLarge { .. } | trace::Op::AllocOpaque { .. })
        });
        ensure(allocs.count() <= 10_000, || format!("seed {seed}: trace exceeds 10^4 allocations"))?;
        let rep = checked_traces(&ops, tiny(threads)).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(rep.is_clean(), || format!("seed {seed}: {:?}", rep.first_failure))?;
        cycles += rep.cycles;
        partial += rep.partial;
        full += rep.full;
    }
    ensure(partial > 0 && full > 0, || "traces did not exercise both kinds".into())?;
    Ok(format!("1000 traces, {cycles} collections ({partial} partial, {full} full) isomorphic"))
}

fn sizing() -> Outcome {
    let mut rng = StdRng::seed_from_u64(2);
    let mut realized = 0;
    for i in 0..100 {
        let blocks: Vec<usize> = (0..rng.gen_range(1..4)).map(|_| rng.gen_range(200..3000)).collect();
        let cells = rng.gen_range(0..300);
        let request = if i % 2 == 0 { 0 } else { rng.gen_range(200..6000) };
        let min = [16, 1024, 8192, 20_000][rng.gen_range(0..4)];
        let shared: usize = blocks.iter().map(|b| b + 1).sum();
        let pages = 3 * cells;
        let expected = sizing_oracle(shared, pages, request + usize::from(request > 0), min);
        let got = new_shared_size(shared, pages, request + usize::from(request > 0), GrowthFactor::DEFAULT, min);
        ensure(got == expected, || format!("tuple {i}: formula {got} != oracle {expected}"))?;

        // Realize the tuple: a shared heap that is exactly full, a page of
        // live cells, then either a forced full collection or a large
        // allocation that cannot fit.
        let cfg = RuntimeConfig::new(HeapConfig {
            n_pages: 2,
            page_size: 1024,
            shared_size: shared,
            min_shared_size: min,
            ..HeapConfig::default()
        });
        let rt = Runtime::new(cfg).map_err(|e| e.to_string())?;
        let m = rt.register().map_err(|e| e.to_string())?;
        let f = m.push_frame(&[Value::int(0); 5]);
        for (j, &b) in blocks.iter().enumerate() {
            let v = m.alloc_filled(ARRAY_TAG, b, Value::int(j as i64)).map_err(|e| e.to_string())?;
            m.set_root(&f, j, v);
        }
        for c in 0..cells {
            let cell = m.alloc(1, &[Value::int(c as i64), m.root(&f, 4)]).map_err(|e| e.to_string())?;
            m.set_root(&f, 4, cell);
        }
        ensure(rt.shared_used() == shared && rt.pages_used() == pages && rt.stats().collections() == 0, || {
            format!("tuple {i}: setup used {} + {}", rt.shared_used(), rt.pages_used())
        })?;
        if request == 0 {
            m.collect_now(Some(CollectionKind::Full)).map_err(|e| e.to_string())?;
        } else {
            m.alloc_filled(ARRAY_TAG, request, Value::int(0)).map_err(|e| e.to_string())?;
        }
        let st = rt.stats();
        ensure(st.full_count == 1 && st.partial_count == 0, || format!("tuple {i}: {st:?}"))?;
        ensure(rt.shared_capacity() == expected, || {
            format!("tuple {i}: capacity {} != oracle {expected}", rt.shared_capacity())
        })?;
        m.pop_frame(f).map_err(|e| e.to_string())?;
        realized += 1;
    }
    Ok(format!("100 tuples match the oracle, {realized} realized by full collections"))
}

fn backward_pointers() -> Outcome {
    let (mut partial, mut cycles) = (0, 0);
    for seed in 0..300u64 {
        let threads = 1 + (seed % 4) as usize;
        let ops = trace::generate_backward(threads, 1500, 80, seed);
        let rep = checked_traces(&ops, tiny(threads)).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(rep.is_clean(), || format!("seed {seed}: {:?}", rep.first_failure))?;
        ensure(rep.page_refs_after_partial == 0, || format!("seed {seed}: page refs survive a partial"))?;
        partial += rep.partial;
        cycles += rep.cycles;
    }
    ensure(partial > 1000, || format!("only {partial} partial collections"))?;
    Ok(format!("300 adversarial traces, {partial} of {cycles} collections partial, no lost blocks or page refs"))
}

fn churn_config(enable_partial: bool) -> RuntimeConfig {
    RuntimeConfig::new(HeapConfig {
        n_pages: 8,
        page_size: 4096,
        shared_size: 1 << 17,
        min_shared_size: 1 << 17,
        enable_partial,
        ..HeapConfig::default()
    })
}

fn partial_benefit() -> Outcome {
    let run = |p| run_churn(&RunConfig::new(churn_config(p), 4), 100_000, 1_000_000).map_err(|e| e.to_string());
    let start = Instant::now();
    let on = run(true)?;
    let off = run(false)?;
    ensure(on.checksum == off.checksum, || "checksums differ".into())?;
    let (a, b) = (&on.gc, &off.gc);
    ensure(a.full_count < b.full_count, || format!("full_count {} vs {}", a.full_count, b.full_count))?;
    ensure(a.words_copied_full < b.words_copied_full, || {
        format!("words_copied_full {} vs {}", a.words_copied_full, b.words_copied_full)
    })?;
    ensure(start.elapsed() < Duration::from_secs(60), || format!("took {:?}", start.elapsed()))?;
    Ok(format!(
        "full_count {} < {}, words_copied_full {} < {}",
        a.full_count, b.full_count, a.words_copied_full, b.words_copied_full
    ))
}

fn stw_safety() -> Outcome {
    const THREADS: usize = 8;
    const PER_THREAD: usize = 125;
    let cfg = RuntimeConfig::new(HeapConfig {
        n_pages: THREADS,
        page_size: 1024,
        shared_size: 1 << 14,
        min_shared_size: 1 << 12,
        ..HeapConfig::default()
    })
    .with_stw_timeout(Duration::from_secs(60));
    let rt = Runtime::new(cfg).map_err(|e| e.to_string())?;
    let checker = Arc::new(CycleChecker::new());
    rt.set_observer(Some(checker.clone()));
    let allocs = AtomicU64::new(0);
    let results: Vec<Result<(), String>> = thread::scope(|s| {
        let hs: Vec<_> = (0..THREADS)
            .map(|t| {
                let (rt, allocs) = (&rt, &allocs);
                s.spawn(move || -> Result<(), String> {
                    let mut rng = StdRng::seed_from_u64(t as u64);
                    let m = rt.register().map_err(|e| e.to_string())?;
                    let f = m.push_frame(&[Value::int(0); 4]);
                    for i in 0..PER_THREAD {
                        for _ in 0..rng.gen_range(0..200) {
                            let slot = rng.gen_range(0..4);
                            let r = m.alloc(1, &[Value::int(i as i64), m.root(&f, slot)]);
                            match r {
                                Ok(v) => m.set_root(&f, slot, v),
                                Err(GcError::OutOfMemory { .. }) => {}
                                Err(e) => return Err(e.to_string()),
                            }
                            allocs.fetch_add(1, Ordering::Relaxed);
                            if rng.gen_ratio(1, 8) {
                                let spin = rng.gen_range(0..2000);
                                m.blocking(|| (0..spin).for_each(|_| std::hint::spin_loop()))
                                    .map_err(|e| e.to_string())?;
                            }
                            if rng.gen_ratio(1, 50) {
                                m.set_root(&f, slot, Value::int(0));
                            }
                        }
                        let kind = match rng.gen_range(0..3) {
                            0 => None,
                            1 => Some(CollectionKind::Full),
                            _ => Some(CollectionKind::Partial),
                        };
                        m.collect_now(kind).map_err(|e| e.to_string())?;
                    }
                    m.pop_frame(f).map_err(|e| e.to_string())
                })
            })
            .collect();
        hs.into_iter().map(|h| h.join().unwrap_or(Err("thread panicked".into()))).collect()
    });
    results.into_iter().collect::<Result<(), _>>()?;
    let audit = rt.audit();
    let stats = rt.stats();
    let rep = checker.report();
    ensure(audit.cursor_violations == 0, || format!("{} cursor violations", audit.cursor_violations))?;
    ensure(audit.max_concurrent_collectors <= 1, || {
        format!("{} concurrent collectors", audit.max_concurrent_collectors)
    })?;
    ensure(stats.collections() >= (THREADS * PER_THREAD) as u64, || {
        format!("only {} collections", stats.collections())
    })?;
    ensure(rep.is_clean(), || format!("{:?}", rep.first_failure))?;
    Ok(format!(
        "{} collections, {} allocations, 0 cursor violations, max 1 collector",
        stats.collections(),
        allocs.load(Ordering::Relaxed)
    ))
}

fn scaling() -> Verdict {
    let cores = thread::available_parallelism().map_or(1, |n| n.get());
    if cores < 4 {
        return Verdict::Skip(format!("needs at least 4 hardware threads, found {cores}"));
    }
    let time = |threads: usize, f: &dyn Fn(&RunConfig) -> Result<RunReport, stwgc_bench::BenchError>| {
        f(&RunConfig::new(RuntimeConfig::default(), threads)).map(|r| r.wall_time)
    };
    let pi = |c: &RunConfig| run_pi(c, 100_000_000);
    let mm = |c: &RunConfig| run_matmult(c, 600);
    let mut lines = Vec::new();
    for (name, f) in [("pi", &pi as &dyn Fn(&RunConfig) -> _), ("matmult", &mm)] {
        match (time(1, f), time(4, f)) {
            (Ok(one), Ok(four)) => {
                let ratio = four.as_secs_f64() / one.as_secs_f64();
                if ratio > 0.6 {
                    return Verdict::Fail(format!("{name}: 4 threads take {ratio:.2} of 1 thread"));
                }
                lines.push(format!("{name} {ratio:.2}"));
            }
            (Err(e), _) | (_, Err(e)) => return Verdict::Fail(format!("{name}: {e}")),
        }
    }
    Verdict::Pass(format!("wall_time(4)/wall_time(1): {}", lines.join(", ")))
}

fn determinism() -> Outcome {
    type Work = fn(&RunConfig) -> Result<RunReport, stwgc_bench::BenchError>;
    let workloads: [(&str, Work); 7] = [
        ("sieve", |c| run_sieve(c, 300_000)),
        ("matmult", |c| run_matmult(c, 60)),
        ("life", |c| run_life(c, 50, 20)),
        ("pi", |c| run_pi(c, 1_000_000)),
        ("sieve_cml", |c| run_sieve_cml(c, 2000, 16)),
        ("churn", |c| run_churn(c, 20_000, 200_000)),
        ("seq_quicksort", |c| run_seq_quicksort(c, 5000)),
    ];
    for (name, work) in workloads {
        let mut sums = Vec::new();
        for threads in [1, 2, 4] {
            let small = work(&RunConfig::new(tiny(threads), threads)).map_err(|e| format!("{name}: {e}"))?;
            let big = work(&RunConfig::new(huge(name), threads)).map_err(|e| format!("{name}: {e}"))?;
            ensure(big.gc.collections() == 0, || format!("{name}: huge heap collected"))?;
            ensure(name == "pi" || small.gc.collections() > 0, || format!("{name}: tiny heap never collected"))?;
            sums.push(small.checksum);
            sums.push(big.checksum);
        }
        ensure(sums.iter().all(|&s| s == sums[0]), || format!("{name}: checksums {sums:?}"))?;
    }
    // Grid sampling pins the estimate for a fixed point set.
    let grid = run_pi_sampled(&RunConfig::new(tiny(1), 1), 4, Sampling::Grid).map_err(|e| e.to_string())?;
    ensure(grid.checksum == 3, || format!("2x2 grid gave {}", grid.checksum))?;
    Ok("7 workloads agree over threads {1,2,4} and tiny vs huge heaps".into())
}

fn cml_sieve() -> Outcome {
    let mut cfg = RuntimeConfig::new(HeapConfig {
        n_pages: suggested_pages(9000),
        page_size: 256,
        shared_size: 1 << 14,
        min_shared_size: 1 << 12,
        ..HeapConfig::default()
    });
    cfg.stw_timeout = Some(Duration::from_secs(60));
    let start = Instant::now();
    let r = run_sieve_cml(&RunConfig::new(cfg, 1), 9000, 16).map_err(|e| e.to_string())?;
    let plain = run_sieve(&RunConfig::new(RuntimeConfig::default(), 1), 9000).map_err(|e| e.to_string())?;
    let filters: usize = r.detail("filter_threads").unwrap_or("0").parse().unwrap_or(0);
    let peak: usize = r.detail("max_registered").unwrap_or("0").parse().unwrap_or(0);
    ensure(filters == 1117, || format!("{filters} filter threads"))?;
    ensure(r.checksum == 1117 && r.checksum == plain.checksum, || format!("checksum {}", r.checksum))?;
    ensure(peak > 1000, || format!("peak of {peak} registered threads"))?;
    ensure(r.gc.collections() > 0, || "no collection happened".into())?;
    ensure(start.elapsed() < Duration::from_secs(120), || format!("took {:?}", start.elapsed()))?;
    Ok(format!(
        "1117 filters, peak {peak} registered, {} collections survived",
        r.gc.collections()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("1 gc transparency", || transparency().into()),
        ("2 sizing formula", || sizing().into()),
        ("3 backward pointers", || backward_pointers().into()),
        ("4 partial benefit", || partial_benefit().into()),
        ("5 stw safety", || stw_safety().into()),
        ("6 parallel scaling", scaling),
        ("7 determinism", || determinism().into()),
        ("8 cml sieve", || cml_sieve().into()),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let verdict = run();
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Verdict::Pass(msg) => println!("PASS criterion {name}: {msg} [{secs:.1}s]"),
            Verdict::Skip(msg) => println!("SKIP criterion {name}: {msg}"),
            Verdict::Fail(msg) => {
                failed += 1;
                println!("FAIL criterion {name}: {msg} [{secs:.1}s]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

impl From<Outcome> for Verdict {
    fn from(o: Outcome) -> Verdict {
        match o {
            Ok(m) => Verdict::Pass(m),
            Err(m) => Verdict::Fail(m),
        }
    }
}
