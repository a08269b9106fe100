use crate::error::GcError;
use crate::heap::sizing::GrowthFactor;

/// Geometry and sizing policy of the heap. All sizes are in words.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeapConfig {
    pub n_pages: usize,
    pub page_size: usize,
    pub shared_size: usize,
    pub enable_partial: bool,
    pub growth_factor: GrowthFactor,
    pub min_shared_size: usize,
}

pub const ENV_N_PAGES: &str = "GC_N_PAGES";
pub const ENV_PAGE_SIZE: &str = "GC_PAGE_SIZE";
pub const ENV_SHARED_SIZE: &str = "GC_SHARED_SIZE";
pub const ENV_SHARED_HEAP: &str = "GC_SHARED_HEAP";
pub const ENV_ENABLE_PARTIAL: &str = "GC_ENABLE_PARTIAL";
pub const ENV_MIN_SHARED_SIZE: &str = "GC_MIN_SHARED_SIZE";
pub const ENV_GROWTH_FACTOR: &str = "GC_GROWTH_FACTOR";

/// Smallest page that still holds a block of `page_size / 8` words.
pub const MIN_PAGE_SIZE: usize = 8;

impl Default for HeapConfig {
    fn default() -> Self {
        let hw = std::thread::available_parallelism().map_or(1, |n| n.get());
        HeapConfig {
            n_pages: 2 * hw + 8,
            page_size: 1 << 16,
            shared_size: 1 << 22,
            enable_partial: true,
            growth_factor: GrowthFactor::DEFAULT,
            min_shared_size: 1 << 20,
        }
    }
}

impl HeapConfig {
    /// Largest footprint allocated in a page; larger blocks go to the
    /// shared heap.
    #[inline]
    pub fn small_limit(&self) -> usize {
        self.page_size / 8
    }

    pub fn validate(&self) -> Result<(), GcError> {
        let bad = |msg: String| Err(GcError::InvalidConfig(msg));
        if self.n_pages == 0 {
            return bad("GC_N_PAGES must be at least 1".into());
        }
        if self.page_size < MIN_PAGE_SIZE {
            return bad(format!("GC_PAGE_SIZE must be at least {MIN_PAGE_SIZE} words"));
        }
        if self.n_pages.checked_mul(self.page_size).is_none() {
            return bad("page table size overflows".into());
        }
        if self.shared_size == 0 {
            return bad("GC_SHARED_SIZE must be positive".into());
        }
        if self.min_shared_size == 0 {
            return bad("GC_MIN_SHARED_SIZE must be positive".into());
        }
        Ok(())
    }

    /// Defaults overridden by the process environment.
    pub fn from_env() -> Result<HeapConfig, GcError> {
        HeapConfig::default().with_env(|k| std::env::var(k).ok())
    }

    /// Applies `GC_*` overrides read through `lookup` on top of `self`.
    /// `GC_SHARED_SIZE` wins over its alias `GC_SHARED_HEAP`.
    pub fn with_env(
        mut self,
        lookup: impl Fn(&str) -> Option<String>,
    ) -> Result<HeapConfig, GcError> {
        fn words(key: &str, raw: &str) -> Result<usize, GcError> {
            raw.trim()
                .parse()
                .map_err(|_| GcError::InvalidConfig(format!("{key}={raw:?} is not a word count")))
        }
        if let Some(v) = lookup(ENV_N_PAGES) {
            self.n_pages = words(ENV_N_PAGES, &v)?;
        }
        if let Some(v) = lookup(ENV_PAGE_SIZE) {
            self.page_size = words(ENV_PAGE_SIZE, &v)?;
        }
        if let Some(v) = lookup(ENV_SHARED_SIZE) {
            self.shared_size = words(ENV_SHARED_SIZE, &v)?;
        } else if let Some(v) = lookup(ENV_SHARED_HEAP) {
            self.shared_size = words(ENV_SHARED_HEAP, &v)?;
        }
        if let Some(v) = lookup(ENV_MIN_SHARED_SIZE) {
            self.min_shared_size = words(ENV_MIN_SHARED_SIZE, &v)?;
        }
        if let Some(v) = lookup(ENV_GROWTH_FACTOR) {
            self.growth_factor = v.parse()?;
        }
        if let Some(v) = lookup(ENV_ENABLE_PARTIAL) {
            self.enable_partial = match v.trim() {
                "0" => false,
                "1" => true,
                other => {
                    return Err(GcError::InvalidConfig(format!(
                        "{ENV_ENABLE_PARTIAL} must be 0 or 1, got {other:?}"
                    )))
                }
            };
        }
        self.validate()?;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn env(pairs: &[(&str, &str)]) -> impl Fn(&str) -> Option<String> {
        let map: HashMap<String, String> = pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        move |k| map.get(k).cloned()
    }

    #[test]
    fn defaults_are_valid() {
        let cfg = HeapConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.page_size, 65536);
        assert_eq!(cfg.shared_size, 1 << 22);
        assert_eq!(cfg.min_shared_size, 1 << 20);
        assert!(cfg.enable_partial);
        assert_eq!(cfg.growth_factor, GrowthFactor::DEFAULT);
    }

    #[test]
    fn env_overrides() {
        let cfg = HeapConfig::default()
            .with_env(env(&[
                ("GC_N_PAGES", "4"),
                ("GC_PAGE_SIZE", "512"),
                ("GC_SHARED_SIZE", "16384"),
                ("GC_ENABLE_PARTIAL", "0"),
                ("GC_MIN_SHARED_SIZE", "100"),
                ("GC_GROWTH_FACTOR", "2.25"),
            ]))
            .unwrap();
        assert_eq!(cfg.n_pages, 4);
        assert_eq!(cfg.page_size, 512);
        assert_eq!(cfg.shared_size, 16384);
        assert!(!cfg.enable_partial);
        assert_eq!(cfg.min_shared_size, 100);
        assert_eq!(cfg.growth_factor, GrowthFactor::new(9, 4).unwrap());
    }

    #[test]
    fn shared_heap_alias() {
        let cfg = HeapConfig::default()
            .with_env(env(&[("GC_SHARED_HEAP", "777")]))
            .unwrap();
        assert_eq!(cfg.shared_size, 777);
        let cfg = HeapConfig::default()
            .with_env(env(&[("GC_SHARED_HEAP", "777"), ("GC_SHARED_SIZE", "888")]))
            .unwrap();
        assert_eq!(cfg.shared_size, 888);
    }

    #[test]
    fn rejects_bad_values() {
        for pairs in [
            [("GC_N_PAGES", "0")],
            [("GC_PAGE_SIZE", "4")],
            [("GC_ENABLE_PARTIAL", "yes")],
            [("GC_GROWTH_FACTOR", "1.0")],
            [("GC_SHARED_SIZE", "-3")],
            [("GC_MIN_SHARED_SIZE", "0")],
        ] {
            assert!(
                matches!(HeapConfig::default().with_env(env(&pairs)), Err(GcError::InvalidConfig(_))),
                "{pairs:?}"
            );
        }
    }
}
