//! Channel-pipeline sieve: a generator feeds integers into a chain of
//! filter threads, one per prime found. A filter takes the first number it
//! receives as its prime and forwards the non-multiples, spawning the next
//! filter on its first forward. A filter stays registered until its
//! successor has finished, so the whole chain is live at once. Channel
//! operations run inside blocking sections so idle filters never hold up
//! a collection.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::{sync_channel, Receiver, SyncSender};
use std::sync::Mutex;
use std::thread::{self, Scope};
use std::time::Instant;

use stwgc::{Mutator, Runtime, Value};

use crate::{prime_count, verify, BenchError, RunConfig, RunReport};

const FILTER_STACK: usize = 128 * 1024;
const BOX_TAG: u8 = 1;
/// End-of-stream marker; never a candidate.
const END: i64 = 0;

struct Shared<'a> {
    rt: &'a Runtime,
    chunk: usize,
    primes: Mutex<Vec<i64>>,
    filters: AtomicUsize,
    max_registered: AtomicUsize,
    error: Mutex<Option<BenchError>>,
}

impl Shared<'_> {
    fn fail(&self, e: BenchError) {
        self.error.lock().unwrap().get_or_insert(e);
    }
}

fn send(m: &Mutator, tx: &SyncSender<i64>, v: i64) -> Result<(), BenchError> {
    // A closed channel only happens after a downstream failure, which is
    // reported separately.
    m.blocking(|| tx.send(v).ok())?;
    Ok(())
}

/// Starts a filter reading `rx`. The returned receiver disconnects once
/// the filter has deregistered.
fn spawn_filter<'scope, 'env>(
    scope: &'scope Scope<'scope, 'env>,
    shared: &'env Shared<'env>,
    rx: Receiver<i64>,
) -> Receiver<()> {
    let (done_tx, done_rx) = sync_channel::<()>(0);
    thread::Builder::new()
        .stack_size(FILTER_STACK)
        .spawn_scoped(scope, move || {
            let _done = done_tx;
            if let Err(e) = filter(scope, shared, rx) {
                shared.fail(e);
            }
        })
        .expect("spawn filter thread");
    done_rx
}

fn filter<'scope, 'env>(
    scope: &'scope Scope<'scope, 'env>,
    shared: &'env Shared<'env>,
    rx: Receiver<i64>,
) -> Result<(), BenchError> {
    let m = shared.rt.register()?;
    shared.filters.fetch_add(1, Ordering::SeqCst);
    shared
        .max_registered
        .fetch_max(shared.rt.thread_count(), Ordering::SeqCst);
    let recv = |m: &Mutator| -> Result<i64, BenchError> { Ok(m.blocking(|| rx.recv().unwrap_or(END))?) };

    let first = recv(&m)?;
    if first == END {
        return Ok(());
    }
    let prime = m.alloc(BOX_TAG, &[Value::int(first)])?;
    let frame = m.push_frame(&[prime]);
    shared.primes.lock().unwrap().push(first);
    let mut next: Option<(SyncSender<i64>, Receiver<()>)> = None;
    loop {
        let n = recv(&m)?;
        if n == END {
            break;
        }
        let msg = m.alloc(BOX_TAG, &[Value::int(n)])?;
        let p = m.field(m.root(&frame, 0), 0)?.as_int();
        if m.field(msg, 0)?.as_int() % p != 0 {
            let (tx, _) = next.get_or_insert_with(|| {
                let (tx, rx) = sync_channel(shared.chunk);
                (tx, spawn_filter(scope, shared, rx))
            });
            send(&m, tx, n)?;
        }
    }
    m.pop_frame(frame)?;
    if let Some((tx, done)) = &next {
        send(&m, tx, END)?;
        m.blocking(|| done.recv().ok())?;
    }
    Ok(())
}

/// Suggested page count so that every filter of a run up to `limit` can
/// own a page: twice an upper bound on the number of primes, plus slack.
pub fn suggested_pages(limit: usize) -> usize {
    let x = limit.max(3) as f64;
    2 * (1.25506 * x / x.ln()).ceil() as usize + 16
}

/// `chunk` is the capacity of every inter-filter channel.
pub fn run_sieve_cml(cfg: &RunConfig, limit: usize, chunk: usize) -> Result<RunReport, BenchError> {
    if limit < 2 {
        return Err(BenchError::InvalidArgs("sieve limit must be at least 2".into()));
    }
    if chunk == 0 {
        return Err(BenchError::InvalidArgs("channel chunk must be at least 1".into()));
    }
    let rt = Runtime::new(cfg.runtime.clone())?;
    let shared = Shared {
        rt: &rt,
        chunk,
        primes: Mutex::new(Vec::new()),
        filters: AtomicUsize::new(0),
        max_registered: AtomicUsize::new(0),
        error: Mutex::new(None),
    };
    let start = Instant::now();
    let host = rt.register()?;
    let fed: Result<(), BenchError> = thread::scope(|s| {
        let (tx, rx) = sync_channel(chunk);
        spawn_filter(s, &shared, rx);
        let feed = || -> Result<(), BenchError> {
            for n in 2..=limit as i64 {
                send(&host, &tx, n)?;
            }
            send(&host, &tx, END)?;
            Ok(())
        };
        let r = feed();
        drop(tx);
        // Stay out of the way while the scope joins the filters.
        host.enter_blocking_section()?;
        r
    });
    host.leave_blocking_section()?;
    fed?;
    let wall_time = start.elapsed();
    drop(host);
    if let Some(e) = shared.error.lock().unwrap().take() {
        return Err(e);
    }

    let primes = shared.primes.lock().unwrap().len() as u64;
    let filters = shared.filters.load(Ordering::SeqCst);
    verify(cfg, "sieve_cml", primes, || prime_count(limit) as u64)?;
    Ok(RunReport {
        workload: "sieve_cml",
        threads: filters,
        wall_time,
        checksum: primes,
        gc: rt.stats(),
        detail: vec![
            ("limit", limit.to_string()),
            ("filter_threads", filters.to_string()),
            ("max_registered", shared.max_registered.load(Ordering::SeqCst).to_string()),
        ],
    })
}
