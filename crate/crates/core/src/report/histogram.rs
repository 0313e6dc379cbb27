use serde::{Deserialize, Serialize};

/// Uniform-width histogram over `[lo, lo + width * bins)` with out-of-range tallies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub width: f64,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    /// Bins of `width` covering `[lo, hi)`; the bin count is rounded to the
    /// nearest integer so that e.g. `[-0.03, 0.03)` at `0.001` has 60 bins.
    pub fn new(lo: f64, hi: f64, width: f64) -> Self {
        assert!(width > 0.0 && hi > lo, "invalid histogram range");
        let bins = ((hi - lo) / width).round().max(1.0) as usize;
        Histogram { lo, width, counts: vec![0; bins], underflow: 0, overflow: 0 }
    }

    pub fn bin_of(&self, x: f64) -> Result<usize, bool> {
        // Rounded slightly toward the bin grid so that values printed on an
        // edge (0.005 with width 0.001) land in the bin that starts there.
        let pos = (x - self.lo) / self.width;
        let k = (pos + 1e-9).floor();
        if k < 0.0 {
            Err(false)
        } else if k as usize >= self.counts.len() {
            Err(true)
        } else {
            Ok(k as usize)
        }
    }

    pub fn add(&mut self, x: f64) {
        match self.bin_of(x) {
            Ok(k) => self.counts[k] += 1,
            Err(false) => self.underflow += 1,
            Err(true) => self.overflow += 1,
        }
    }

    pub fn edges(&self, k: usize) -> (f64, f64) {
        (self.lo + k as f64 * self.width, self.lo + (k + 1) as f64 * self.width)
    }

    pub fn in_range(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.in_range() + self.underflow + self.overflow
    }

    pub fn merge(&mut self, other: &Histogram) {
        assert_eq!(self.counts.len(), other.counts.len());
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.underflow += other.underflow;
        self.overflow += other.overflow;
    }
}
