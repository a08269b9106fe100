use std::fmt;
use std::str::FromStr;

use crate::error::GcError;

/// Shared-heap growth factor `k > 1`, kept as an exact fraction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GrowthFactor {
    num: u64,
    den: u64,
}

impl GrowthFactor {
    pub const DEFAULT: GrowthFactor = GrowthFactor { num: 3, den: 2 };

    pub fn new(num: u64, den: u64) -> Result<GrowthFactor, GcError> {
        if den == 0 || num <= den {
            return Err(GcError::InvalidConfig(format!(
                "growth factor {num}/{den} must be greater than 1"
            )));
        }
        let g = gcd(num, den);
        Ok(GrowthFactor {
            num: num / g,
            den: den / g,
        })
    }

    pub fn numerator(self) -> u64 {
        self.num
    }

    pub fn denominator(self) -> u64 {
        self.den
    }

    /// `ceil(k * words)`.
    pub fn scale_ceil(self, words: usize) -> usize {
        let scaled = (words as u128 * self.num as u128).div_ceil(self.den as u128);
        usize::try_from(scaled).unwrap_or(usize::MAX)
    }
}

impl Default for GrowthFactor {
    fn default() -> Self {
        GrowthFactor::DEFAULT
    }
}

impl fmt::Display for GrowthFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Parses a decimal (`1.5`) or fraction (`3/2`) literal.
impl FromStr for GrowthFactor {
    type Err = GcError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GcError::InvalidConfig(format!("cannot parse growth factor {s:?}"));
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n = n.trim().parse().map_err(|_| bad())?;
            let d = d.trim().parse().map_err(|_| bad())?;
            return GrowthFactor::new(n, d);
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if frac.len() > 18 || (int.is_empty() && frac.is_empty()) {
            return Err(bad());
        }
        let den = 10u64.pow(frac.len() as u32);
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let frac: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let num = int
            .checked_mul(den)
            .and_then(|n| n.checked_add(frac))
            .ok_or_else(bad)?;
        GrowthFactor::new(num, den)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Capacity of the shared heap produced by a full collection:
/// `max(ceil(k * (shared + pages)), shared + pages + failed_request, min)`.
///
/// The second term guarantees the to-space can hold every survivor plus the
/// allocation that triggered the cycle.
pub fn new_shared_size(
    used_old_shared: usize,
    used_pages: usize,
    failed_request: usize,
    k: GrowthFactor,
    min_shared_size: usize,
) -> usize {
    let used = used_old_shared.saturating_add(used_pages);
    k.scale_ceil(used)
        .max(used.saturating_add(failed_request))
        .max(min_shared_size)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn formula_examples() {
        let k = GrowthFactor::DEFAULT;
        assert_eq!(new_shared_size(1000, 200, 0, k, 0), 1800);
        assert_eq!(new_shared_size(0, 0, 0, k, 4096), 4096);
        assert_eq!(new_shared_size(1000, 200, 5000, k, 0), 6200);
    }

    #[test]
    fn odd_totals_round_up() {
        assert_eq!(new_shared_size(1, 0, 0, GrowthFactor::DEFAULT, 0), 2);
        assert_eq!(new_shared_size(3, 0, 0, GrowthFactor::DEFAULT, 0), 5);
    }

    #[test]
    fn parse_growth_factor() {
        assert_eq!("1.5".parse::<GrowthFactor>().unwrap(), GrowthFactor::DEFAULT);
        assert_eq!("3/2".parse::<GrowthFactor>().unwrap(), GrowthFactor::DEFAULT);
        assert_eq!("2".parse::<GrowthFactor>().unwrap(), GrowthFactor::new(2, 1).unwrap());
        assert!("1".parse::<GrowthFactor>().is_err());
        assert!("0.9".parse::<GrowthFactor>().is_err());
        assert!("abc".parse::<GrowthFactor>().is_err());
        assert!("".parse::<GrowthFactor>().is_err());
    }

    proptest! {
        #[test]
        fn sizing_is_monotone_and_sufficient(
            s in 0usize..1 << 30, p in 0usize..1 << 30, r in 0usize..1 << 30,
            min in 1usize..1 << 30, ds in 0usize..1000, dp in 0usize..1000, dr in 0usize..1000,
        ) {
            let k = GrowthFactor::DEFAULT;
            let base = new_shared_size(s, p, r, k, min);
            prop_assert!(base >= s + p + r);
            prop_assert!(base >= min);
            prop_assert!(new_shared_size(s + ds, p, r, k, min) >= base);
            prop_assert!(new_shared_size(s, p + dp, r, k, min) >= base);
            prop_assert!(new_shared_size(s, p, r + dr, k, min) >= base);
        }
    }
}
