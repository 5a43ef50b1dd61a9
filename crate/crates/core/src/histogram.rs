use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// Fixed-width histogram. Bins are `[k * width, (k + 1) * width)` and are
/// created on demand, so no sample is ever clipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    bin_width: f64,
    bins: BTreeMap<i64, u64>,
    total: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: u64,
}

impl Histogram {
    /// Panics if `bin_width` is not a positive finite number.
    pub fn new(bin_width: f64) -> Self {
        assert!(
            bin_width.is_finite() && bin_width > 0.0,
            "bin width must be positive"
        );
        Histogram {
            bin_width,
            bins: BTreeMap::new(),
            total: 0,
        }
    }

    pub fn from_samples(bin_width: f64, samples: impl IntoIterator<Item = f64>) -> Self {
        let mut h = Histogram::new(bin_width);
        for s in samples {
            h.record(s);
        }
        h
    }

    pub fn record(&mut self, value: f64) {
        let key = if value.is_finite() {
            (value / self.bin_width).floor() as i64
        } else if value > 0.0 {
            i64::MAX
        } else {
            i64::MIN
        };
        *self.bins.entry(key).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Non-empty bins in ascending order.
    pub fn bins(&self) -> Vec<HistogramBin> {
        self.bins
            .iter()
            .map(|(&k, &count)| HistogramBin {
                lower: k as f64 * self.bin_width,
                upper: (k + 1) as f64 * self.bin_width,
                count,
            })
            .collect()
    }

    /// Plain-text table, one row per non-empty bin with a proportional bar.
    pub fn render_table(&self, unit: &str) -> String {
        let max = self.bins.values().copied().max().unwrap_or(0).max(1);
        let mut out = String::new();
        for bin in self.bins() {
            let bar = "#".repeat(((bin.count * 40).div_ceil(max)) as usize);
            let _ = writeln!(
                out,
                "{:>10.3} - {:<10.3} {unit:<3} {:>8}  {bar}",
                bin.lower, bin.upper, bin.count
            );
        }
        out
    }
}
