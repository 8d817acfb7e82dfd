//! Error-free floating point accumulation.
//!
//! `ExactSum` keeps the running total as a list of non-overlapping partials
//! (Shewchuk's expansion arithmetic) and rounds once, correctly, when the
//! value is read. The rounded result depends only on the multiset of terms,
//! so two accumulators fed the same terms in any order or grouping produce
//! the same bits. The parallel algorithms rely on this to stay bit-identical
//! for every node count.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExactSum {
    partials: Vec<f64>,
    /// Sum of non-finite terms, which bypass the expansion.
    special: f64,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, term: f64) {
        if !term.is_finite() {
            self.special += term;
            return;
        }
        let mut x = term;
        let mut kept = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        self.partials.truncate(kept);
        self.partials.push(x);
    }

    /// Folds another accumulator in without rounding.
    pub fn merge(&mut self, other: &ExactSum) {
        for &p in &other.partials {
            self.add(p);
        }
        self.special += other.special;
    }

    /// Correctly rounded value of the accumulated sum.
    pub fn value(&self) -> f64 {
        if self.special != 0.0 || self.special.is_nan() {
            return self.special;
        }
        let partials = &self.partials;
        let mut n = partials.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = partials[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = partials[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        // Half-way case: the rounding of hi + lo was to even but the
        // remaining partials push the exact value off the midpoint.
        if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            let yr = x - hi;
            if y == yr {
                hi = x;
            }
        }
        hi
    }
}

impl FromIterator<f64> for ExactSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = ExactSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

impl Extend<f64> for ExactSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

/// Correctly rounded sum of a slice.
pub fn exact_sum(values: &[f64]) -> f64 {
    values.iter().copied().collect::<ExactSum>().value()
}

/// A vector of independent exact accumulators, one per component.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExactVec {
    sums: Vec<ExactSum>,
}

impl ExactVec {
    pub fn zeros(len: usize) -> Self {
        Self {
            sums: vec![ExactSum::new(); len],
        }
    }

    pub fn len(&self) -> usize {
        self.sums.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sums.is_empty()
    }

    pub fn add_at(&mut self, index: usize, term: f64) {
        self.sums[index].add(term);
    }

    /// Adds `scale * values` component-wise starting at `offset`.
    pub fn add_scaled(&mut self, offset: usize, values: &[f64], scale: f64) {
        for (acc, &v) in self.sums[offset..offset + values.len()]
            .iter_mut()
            .zip(values)
        {
            acc.add(scale * v);
        }
    }

    pub fn merge(&mut self, other: &ExactVec) {
        assert_eq!(self.len(), other.len(), "exact vector length mismatch");
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            a.merge(b);
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.sums.iter().map(ExactSum::value).collect()
    }
}
