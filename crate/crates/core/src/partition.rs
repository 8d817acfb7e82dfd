//! Hard cluster assignments and partition agreement.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::{sq_dist, Centroids, DataSet};
use crate::error::{Error, Result};
use crate::exact::ExactSum;

/// Per-point cluster ids; `None` marks noise.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<Option<usize>>,
}

impl Partition {
    pub fn new(labels: Vec<Option<usize>>) -> Self {
        Self { labels }
    }

    /// Labels without noise.
    pub fn from_ids(labels: impl IntoIterator<Item = usize>) -> Self {
        Self::new(labels.into_iter().map(Some).collect())
    }

    /// Parses the signed encoding where any negative value is noise.
    pub fn from_signed(labels: &[i64]) -> Self {
        Self::new(
            labels
                .iter()
                .map(|&l| if l < 0 { None } else { Some(l as usize) })
                .collect(),
        )
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of distinct non-noise labels.
    pub fn num_clusters(&self) -> usize {
        let mut seen: Vec<usize> = self.labels.iter().flatten().copied().collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }

    /// Relabels clusters `0..k` in order of first appearance.
    pub fn compacted(&self) -> Partition {
        let mut map = HashMap::new();
        let labels = self
            .labels
            .iter()
            .map(|l| {
                l.map(|l| {
                    let next = map.len();
                    *map.entry(l).or_insert(next)
                })
            })
            .collect();
        Partition::new(labels)
    }

    /// Noise encoded as `-1`.
    pub fn to_signed(&self) -> Vec<i64> {
        self.labels
            .iter()
            .map(|l| l.map_or(-1, |l| l as i64))
            .collect()
    }

    /// Member row indices per cluster id, for ids `0..=max`.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let k = self.labels.iter().flatten().max().map_or(0, |m| m + 1);
        let mut out = vec![Vec::new(); k];
        for (i, l) in self.labels.iter().enumerate() {
            if let Some(l) = l {
                out[*l].push(i);
            }
        }
        out
    }
}

fn choose2(x: u64) -> f64 {
    (x as f64) * (x.saturating_sub(1) as f64) / 2.0
}

/// Adjusted Rand index; noise counts as one ordinary label. When the
/// chance-corrected denominator vanishes the result is 1.0 for identical set
/// partitions and 0.0 otherwise.
pub fn adjusted_rand_index(a: &Partition, b: &Partition) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let mut cells: HashMap<(Option<usize>, Option<usize>), u64> = HashMap::new();
    let mut rows: HashMap<Option<usize>, u64> = HashMap::new();
    let mut cols: HashMap<Option<usize>, u64> = HashMap::new();
    for (&x, &y) in a.labels.iter().zip(&b.labels) {
        *cells.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = cells.values().map(|&c| choose2(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| choose2(c)).sum();
    let total = choose2(a.len() as u64);
    let expected = if total > 0.0 {
        sum_a * sum_b / total
    } else {
        0.0
    };
    let max_index = 0.5 * (sum_a + sum_b);
    let denom = max_index - expected;
    if denom == 0.0 {
        let identical = rows.len() == cells.len() && cols.len() == cells.len();
        return Ok(if identical { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / denom)
}

/// Sum of squared distances from each non-noise point to its centroid.
pub fn sse_objective(data: &DataSet, partition: &Partition, centroids: &Centroids) -> Result<f64> {
    if data.len() != partition.len() {
        return Err(Error::LengthMismatch(data.len(), partition.len()));
    }
    if data.dim() != centroids.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: centroids.dim(),
        });
    }
    let mut acc = ExactSum::new();
    for (row, label) in data.rows().zip(partition.labels()) {
        if let Some(l) = *label {
            if l >= centroids.k() {
                return Err(Error::LabelOutOfRange {
                    label: l,
                    k: centroids.k(),
                });
            }
            acc.add(sq_dist(row, centroids.row(l)));
        }
    }
    Ok(acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[usize]) -> Partition {
        Partition::from_ids(v.iter().copied())
    }

    /// Pair-counting ARI computed by enumerating every point pair.
    fn ari_by_pairs(a: &[usize], b: &[usize]) -> f64 {
        let n = a.len();
        let (mut both, mut only_a, mut only_b, mut pairs) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            for j in i + 1..n {
                let sa = a[i] == a[j];
                let sb = b[i] == b[j];
                pairs += 1.0;
                if sa && sb {
                    both += 1.0;
                }
                if sa {
                    only_a += 1.0;
                }
                if sb {
                    only_b += 1.0;
                }
            }
        }
        let expected = only_a * only_b / pairs;
        (both - expected) / (0.5 * (only_a + only_b) - expected)
    }

    #[test]
    fn ari_identity_and_permutation() {
        let a = p(&[0, 0, 1, 1, 2]);
        assert_eq!(adjusted_rand_index(&a, &a).unwrap(), 1.0);
        assert_eq!(
            adjusted_rand_index(&p(&[0, 0, 1, 1]), &p(&[1, 1, 0, 0])).unwrap(),
            1.0
        );
    }

    #[test]
    fn ari_matches_pair_enumeration() {
        let got = adjusted_rand_index(&p(&[0, 0, 1, 1]), &p(&[0, 1, 0, 1])).unwrap();
        let want = ari_by_pairs(&[0, 0, 1, 1], &[0, 1, 0, 1]);
        // Frozen from the pair-enumeration oracle: index 0, expected 1/3, max 1.
        assert!((want - (-0.5)).abs() < 1e-15);
        assert!((got - want).abs() < 1e-15);

        let a = [0, 1, 1, 2, 2, 2, 0, 1, 3, 3];
        let b = [1, 1, 0, 2, 2, 0, 0, 1, 3, 2];
        let got = adjusted_rand_index(&p(&a), &p(&b)).unwrap();
        assert!((got - ari_by_pairs(&a, &b)).abs() < 1e-12);
    }

    #[test]
    fn ari_degenerate_cases() {
        assert_eq!(
            adjusted_rand_index(&p(&[0, 0, 0]), &p(&[4, 4, 4])).unwrap(),
            1.0
        );
        assert_eq!(
            adjusted_rand_index(&p(&[0, 1, 2]), &p(&[2, 0, 1])).unwrap(),
            1.0
        );
        assert_eq!(
            adjusted_rand_index(&p(&[0, 0, 0]), &p(&[0, 1, 2])).unwrap(),
            0.0
        );
        assert_eq!(adjusted_rand_index(&p(&[0]), &p(&[3])).unwrap(), 1.0);
        assert!(adjusted_rand_index(&p(&[0]), &p(&[0, 1])).is_err());
    }

    #[test]
    fn ari_treats_noise_as_a_label() {
        let a = Partition::new(vec![None, None, Some(0), Some(0)]);
        let b = Partition::new(vec![Some(7), Some(7), Some(1), Some(1)]);
        assert_eq!(adjusted_rand_index(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn compaction_and_signed_roundtrip() {
        let a = Partition::new(vec![Some(5), None, Some(2), Some(5)]);
        assert_eq!(a.compacted().to_signed(), vec![0, -1, 1, 0]);
        assert_eq!(Partition::from_signed(&a.to_signed()), a);
        assert_eq!(a.num_clusters(), 2);
        assert_eq!(a.noise_count(), 1);
    }

    #[test]
    fn sse_examples() {
        let data = DataSet::new(vec![0.0, 2.0], 1).unwrap();
        let c = Centroids::new(vec![1.0], 1).unwrap();
        assert_eq!(sse_objective(&data, &p(&[0, 0]), &c).unwrap(), 2.0);

        let c = Centroids::new(vec![0.0, 2.0], 1).unwrap();
        assert_eq!(sse_objective(&data, &p(&[0, 1]), &c).unwrap(), 0.0);
        assert!(matches!(
            sse_objective(&data, &p(&[0, 2]), &c),
            Err(Error::LabelOutOfRange { .. })
        ));
        let noisy = Partition::new(vec![None, Some(0)]);
        assert_eq!(sse_objective(&data, &noisy, &c).unwrap(), 4.0);
    }
}
