use std::sync::Arc;

use proptest::prelude::*;
use stwgc::{HeapConfig, Runtime, RuntimeConfig};
use stwgc_oracle::trace::{self, TraceSpec};
use stwgc_oracle::CycleChecker;

fn tiny(threads: usize, enable_partial: bool) -> RuntimeConfig {
    RuntimeConfig::new(HeapConfig {
        n_pages: 2 * threads,
        page_size: 512,
        shared_size: 1 << 14,
        min_shared_size: 1 << 12,
        enable_partial,
        ..HeapConfig::default()
    })
}

fn check(threads: usize, seed: u64, enable_partial: bool) -> Result<(), TestCaseError> {
    let rt = Runtime::new(tiny(threads, enable_partial)).unwrap();
    let checker = Arc::new(CycleChecker::new());
    rt.set_observer(Some(checker.clone()));
    let spec = TraceSpec {
        threads,
        ops_per_thread: 1500,
        large_size: 80,
        collect_per_mille: 5,
    };
    let ops = trace::generate(&spec, seed);
    trace::run(&rt, &ops).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let rep = checker.report();
    prop_assert!(rep.cycles > 0);
    prop_assert!(rep.is_clean(), "{:?}", rep);
    prop_assert_eq!(rt.audit().cursor_violations, 0);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn single_thread_traces_preserve_the_graph(seed in any::<u64>(), partial in any::<bool>()) {
        check(1, seed, partial)?;
    }

    #[test]
    fn multi_thread_traces_preserve_the_graph(seed in any::<u64>(), threads in 2usize..5) {
        check(threads, seed, true)?;
    }
}
