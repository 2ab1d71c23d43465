//! Compensated summation.

/// Neumaier variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if !t.is_finite() {
            // infinities and NaN propagate without compensation
            self.sum = t;
            self.comp = 0.0;
            return;
        }
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    /// Merges another partial sum, keeping both compensation terms.
    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        if !self.sum.is_finite() {
            return self.sum;
        }
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Compensated sum of a slice.
pub fn sum(xs: &[f64]) -> f64 {
    xs.iter().copied().collect::<CompensatedSum>().value()
}

/// Sums `f(i)` for `i in 0..n` in fixed-size chunks evaluated in parallel.
/// Chunk boundaries do not depend on the thread count, so the result is
/// reproducible run to run.
pub fn par_sum<F>(n: u64, f: F) -> f64
where
    F: Fn(u64) -> f64 + Sync,
{
    use rayon::prelude::*;
    const CHUNK: u64 = 4096;
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<CompensatedSum> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            (lo..hi).map(&f).collect()
        })
        .collect();
    let mut total = CompensatedSum::new();
    for p in &parts {
        total.merge(p);
    }
    total.value()
}
