//! Order statistics and the per-frame aggregator `μ`.

use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

/// How per-frame pose errors are reduced to one number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Aggregator {
    #[default]
    Median,
    Mean,
}

impl Aggregator {
    /// `None` for an empty slice.
    pub fn apply(self, values: &[f64]) -> Option<f64> {
        match self {
            Aggregator::Median => median(values),
            Aggregator::Mean => mean(values),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Aggregator::Median => "median",
            Aggregator::Mean => "mean",
        }
    }
}

impl fmt::Display for Aggregator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Aggregator {
    type Err = &'static str;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "median" => Ok(Aggregator::Median),
            "mean" => Ok(Aggregator::Mean),
            _ => Err("expected `median` or `mean`"),
        }
    }
}

/// Arithmetic mean in index order.
pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    Some(values.iter().sum::<f64>() / values.len() as f64)
}

/// Median; even counts average the two central order statistics.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut scratch: Vec<f64> = values.to_vec();
    median_in_place(&mut scratch)
}

/// Median that reorders `values` instead of copying it.
pub fn median_in_place(values: &mut [f64]) -> Option<f64> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let cmp = |a: &f64, b: &f64| a.partial_cmp(b).unwrap_or(Ordering::Equal);
    let mid = n / 2;
    let (lower, upper, _) = values.select_nth_unstable_by(mid, cmp);
    let upper = *upper;
    if n % 2 == 1 {
        return Some(upper);
    }
    let lower_max = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some(0.5 * (lower_max + upper))
}
