use std::fmt::Write as _;
use std::time::Duration;

/// Cumulative collection statistics.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GcStats {
    pub full_count: u64,
    pub partial_count: u64,
    pub stw_pause_total: Duration,
    pub words_copied_full: u64,
    pub words_copied_partial: u64,
    /// Shared-heap capacity at start-up followed by the capacity after each
    /// full collection.
    pub shared_size_history: Vec<usize>,
}

impl GcStats {
    pub fn collections(&self) -> u64 {
        self.full_count + self.partial_count
    }

    pub fn shared_size_current(&self) -> usize {
        self.shared_size_history.last().copied().unwrap_or(0)
    }

    /// `key=value` lines, one per field.
    pub fn to_kv_lines(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "full_count={}", self.full_count);
        let _ = writeln!(out, "partial_count={}", self.partial_count);
        let _ = writeln!(out, "stw_pause_total_ns={}", self.stw_pause_total.as_nanos());
        let _ = writeln!(out, "words_copied_full={}", self.words_copied_full);
        let _ = writeln!(out, "words_copied_partial={}", self.words_copied_partial);
        let _ = writeln!(out, "shared_size_current={}", self.shared_size_current());
        out
    }
}

/// Counters checked by the stop-the-world stress tests.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AuditStats {
    /// Cursor mutations observed on a non-collector thread while the world
    /// was stopped.
    pub cursor_violations: u64,
    /// Highest number of threads ever simultaneously in the collecting state.
    pub max_concurrent_collectors: u64,
    /// Stop requests that elected a collector.
    pub stops: u64,
}
