//! Dense point sets, centroid sets, CSV ingestion and synthetic data.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::partition::Partition;

/// Row-major `n x d` matrix of finite reals with a stable global id per row.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    values: Vec<f64>,
    dim: usize,
    ids: Vec<usize>,
}

impl DataSet {
    /// Builds a dataset from a flat row-major buffer; ids are `0..n`.
    pub fn new(values: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidData("dimension must be at least 1".into()));
        }
        if !values.len().is_multiple_of(dim) {
            return Err(Error::InvalidData(format!(
                "buffer of {} values is not a multiple of dimension {dim}",
                values.len()
            )));
        }
        let ids = (0..values.len() / dim).collect();
        Self::with_ids(values, dim, ids)
    }

    /// Builds a dataset whose rows carry the given global ids.
    pub fn with_ids(values: Vec<f64>, dim: usize, ids: Vec<usize>) -> Result<Self> {
        if dim == 0 || values.len() != ids.len() * dim {
            return Err(Error::InvalidData(format!(
                "{} values do not form {} rows of dimension {dim}",
                values.len(),
                ids.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite value in row {}",
                pos / dim
            )));
        }
        Ok(Self { values, dim, ids })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if dim == 0 {
            return Err(Error::InvalidData("no rows or zero-width rows".into()));
        }
        let mut values = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::InvalidData(format!(
                    "row {i} has {} values, expected {dim}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::new(values, dim)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.dim)
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Rows at the given local indices, keeping their global ids.
    pub fn select(&self, local: &[usize]) -> DataSet {
        let mut values = Vec::with_capacity(local.len() * self.dim);
        let mut ids = Vec::with_capacity(local.len());
        for &i in local {
            values.extend_from_slice(self.row(i));
            ids.push(self.ids[i]);
        }
        DataSet {
            values,
            dim: self.dim,
            ids,
        }
    }

    /// Reorders rows by `order` (local indices) and renumbers ids to `0..n`.
    pub fn permuted(&self, order: &[usize]) -> DataSet {
        let mut out = self.select(order);
        out.ids = (0..out.len()).collect();
        out
    }
}

/// `k x d` matrix of cluster centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centroids {
    values: Vec<f64>,
    dim: usize,
}

impl Centroids {
    pub fn new(values: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || values.is_empty() || !values.len().is_multiple_of(dim) {
            return Err(invalid(format!(
                "{} values do not form a non-empty centroid set of dimension {dim}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite centroid".into()));
        }
        Ok(Self { values, dim })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(invalid("ragged centroid rows"));
        }
        Self::new(rows.concat(), dim)
    }

    pub fn k(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.dim)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }
}

/// Sum of squared coordinate differences.
pub fn squared_euclidean(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(sq_dist(x, y))
}

/// Unchecked squared distance for hot loops where dimensions are known equal.
#[inline]
pub(crate) fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Index of the nearest center; ties go to the lowest index.
pub(crate) fn nearest(point: &[f64], centers: &Centroids) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.rows().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Reads a numeric CSV file. A first row containing any non-numeric field is
/// treated as a header and skipped.
pub fn load_csv(path: impl AsRef<Path>) -> Result<DataSet> {
    let file = File::open(path.as_ref())?;
    read_csv(file)
}

pub fn read_csv<R: std::io::Read>(reader: R) -> Result<DataSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut values = Vec::new();
    let mut dim = 0;
    let mut rows = 0;
    for (index, record) in rdr.records().enumerate() {
        let row = index + 1;
        let record = record.map_err(|e| Error::Csv {
            row,
            msg: e.to_string(),
        })?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(str::parse::<f64>).collect();
        let parsed = match parsed {
            Ok(v) => v,
            Err(_) if row == 1 => continue,
            Err(e) => {
                return Err(Error::Csv {
                    row,
                    msg: format!("non-numeric cell: {e}"),
                })
            }
        };
        if let Some(v) = parsed.iter().find(|v| !v.is_finite()) {
            return Err(Error::Csv {
                row,
                msg: format!("non-finite value {v}"),
            });
        }
        if rows == 0 {
            dim = parsed.len();
        } else if parsed.len() != dim {
            return Err(Error::Csv {
                row,
                msg: format!("expected {dim} fields, found {}", parsed.len()),
            });
        }
        values.extend(parsed);
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Csv {
            row: 0,
            msg: "file contains no data rows".into(),
        });
    }
    DataSet::new(values, dim)
}

/// Writes rows with shortest round-trip formatting, so `load_csv` restores
/// every value bit-for-bit.
pub fn write_csv(path: impl AsRef<Path>, data: &DataSet) -> Result<()> {
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    for row in data.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Writes one label per line, noise as `-1`.
pub fn write_labels(path: impl AsRef<Path>, labels: &Partition) -> Result<()> {
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    for l in labels.to_signed() {
        writeln!(out, "{l}")?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub seed: u64,
    pub clusters: usize,
    pub per_cluster: usize,
    pub dim: usize,
    pub spread: f64,
    pub separation: f64,
}

/// Isotropic Gaussian clusters whose centers are pairwise at least
/// `separation` apart. Rows are grouped by cluster.
pub fn generate_blobs(spec: &BlobSpec) -> Result<(DataSet, Partition)> {
    let (data, labels, _) = generate_blobs_with_centers(spec)?;
    Ok((data, labels))
}

/// Like [`generate_blobs`], also returning the true centers.
pub fn generate_blobs_with_centers(spec: &BlobSpec) -> Result<(DataSet, Partition, Centroids)> {
    if !(spec.separation > 0.0) || !(spec.spread > 0.0) {
        return Err(invalid("spread and separation must be positive"));
    }
    if spec.clusters == 0 || spec.dim == 0 {
        return Err(invalid("clusters and dim must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centers = place_centers(&mut rng, spec.clusters, spec.dim, spec.separation);

    let n = spec.clusters * spec.per_cluster;
    let mut values = Vec::with_capacity(n * spec.dim);
    let mut labels = Vec::with_capacity(n);
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..spec.per_cluster {
            for &m in center {
                let z: f64 = rng.sample(StandardNormal);
                values.push(m + spec.spread * z);
            }
            labels.push(Some(c));
        }
    }
    let centroids = Centroids::from_rows(&centers)?;
    Ok((
        DataSet::new(values, spec.dim)?,
        Partition::new(labels),
        centroids,
    ))
}

fn place_centers(rng: &mut ChaCha8Rng, k: usize, dim: usize, separation: f64) -> Vec<Vec<f64>> {
    let mut side = separation * 2.0 * (k as f64).powf(1.0 / dim as f64);
    let min_sq = separation * separation;
    'restart: loop {
        let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
        while centers.len() < k {
            let mut placed = false;
            for _ in 0..1000 {
                let cand: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * side).collect();
                if centers.iter().all(|c| sq_dist(c, &cand) >= min_sq) {
                    centers.push(cand);
                    placed = true;
                    break;
                }
            }
            if !placed {
                side *= 2.0;
                continue 'restart;
            }
        }
        return centers;
    }
}

/// Appends `count` points drawn uniformly from the data's bounding box grown
/// by `margin` on every side. The new points are labeled as noise.
pub fn add_uniform_outliers(
    data: &DataSet,
    labels: &Partition,
    count: usize,
    margin: f64,
    seed: u64,
) -> Result<(DataSet, Partition)> {
    let d = data.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for row in data.rows() {
        for t in 0..d {
            lo[t] = lo[t].min(row[t]);
            hi[t] = hi[t].max(row[t]);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = data.values().to_vec();
    for _ in 0..count {
        for t in 0..d {
            let a = lo[t] - margin;
            let b = hi[t] + margin;
            values.push(a + rng.random::<f64>() * (b - a));
        }
    }
    let mut out_labels = labels.labels().to_vec();
    out_labels.extend(std::iter::repeat_n(None, count));
    Ok((DataSet::new(values, d)?, Partition::new(out_labels)))
}

/// Shuffles rows (and labels alongside) with a seeded permutation.
pub fn shuffle(data: &DataSet, labels: &Partition, seed: u64) -> (DataSet, Partition) {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let shuffled = data.permuted(&order);
    let l = order.iter().map(|&i| labels.labels()[i]).collect();
    (shuffled, Partition::new(l))
}

/// Blobs generated in `intrinsic` dimensions and embedded isometrically into
/// `ambient` dimensions through a random orthonormal frame and offset.
pub fn generate_subspace_blobs(spec: &BlobSpec, ambient: usize) -> Result<(DataSet, Partition)> {
    if ambient < spec.dim {
        return Err(invalid("ambient dimension below intrinsic dimension"));
    }
    let (low, labels) = generate_blobs(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9e37_79b9_7f4a_7c15);
    let frame = random_orthonormal_rows(&mut rng, spec.dim, ambient);
    let offset: Vec<f64> = (0..ambient).map(|_| rng.random::<f64>() * 10.0).collect();
    let mut values = Vec::with_capacity(low.len() * ambient);
    for row in low.rows() {
        for t in 0..ambient {
            let mut v = offset[t];
            for (r, &coef) in row.iter().enumerate() {
                v += coef * frame[r][t];
            }
            values.push(v);
        }
    }
    Ok((DataSet::new(values, ambient)?, labels))
}

/// `count` orthonormal rows in `dim` dimensions (Gram-Schmidt on Gaussians).
pub fn random_orthonormal_rows(rng: &mut impl Rng, count: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(count);
    while rows.len() < count {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        for r in &rows {
            let dot: f64 = v.iter().zip(r).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(r).for_each(|(a, b)| *a -= dot * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|a| *a /= norm);
            rows.push(v);
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn squared_euclidean_examples() {
        assert_eq!(squared_euclidean(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 25.0);
        assert_eq!(squared_euclidean(&[1.5, -2.0], &[1.5, -2.0]).unwrap(), 0.0);
        assert_eq!(
            squared_euclidean(&[1.0, 2.0, 3.0], &[4.0, 6.0, 3.0]).unwrap(),
            25.0
        );
        assert!(matches!(
            squared_euclidean(&[1.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn csv_parses_plain_and_header() {
        let ds = read_csv("1,2\n3,4\n".as_bytes()).unwrap();
        assert_eq!((ds.len(), ds.dim()), (2, 2));
        assert_eq!(ds.row(1), &[3.0, 4.0]);

        let ds = read_csv("x,y\n1,2\n".as_bytes()).unwrap();
        assert_eq!((ds.len(), ds.dim()), (1, 2));

        let ds = read_csv("1,2\r\n3,4\r\n".as_bytes()).unwrap();
        assert_eq!(ds.len(), 2);
    }

    #[test]
    fn csv_errors_name_the_row() {
        let err = read_csv("1,2\n3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Csv { row: 2, .. }), "{err}");
        assert!(err.to_string().contains("row 2"));

        let err = read_csv("1,2\n3,abc\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Csv { row: 2, .. }));

        assert!(matches!(read_csv("".as_bytes()), Err(Error::Csv { .. })));
        assert!(matches!(
            read_csv("a,b\n".as_bytes()),
            Err(Error::Csv { .. })
        ));
    }

    #[test]
    fn blobs_are_balanced_and_deterministic() {
        let spec = BlobSpec {
            seed: 1,
            clusters: 2,
            per_cluster: 50,
            dim: 2,
            spread: 1.0,
            separation: 10.0,
        };
        let (a, la) = generate_blobs(&spec).unwrap();
        let (b, lb) = generate_blobs(&spec).unwrap();
        assert_eq!(a.len(), 100);
        assert_eq!(a.values(), b.values());
        assert_eq!(la, lb);
        let ones = la.labels().iter().filter(|l| **l == Some(1)).count();
        assert_eq!(ones, 50);
    }

    #[test]
    fn blob_centers_respect_separation() {
        let spec = BlobSpec {
            seed: 9,
            clusters: 8,
            per_cluster: 1,
            dim: 3,
            spread: 0.1,
            separation: 5.0,
        };
        let (_, _, centers) = generate_blobs_with_centers(&spec).unwrap();
        for i in 0..centers.k() {
            for j in 0..i {
                assert!(sq_dist(centers.row(i), centers.row(j)) >= 25.0);
            }
        }
    }

    #[test]
    fn rejects_non_finite() {
        assert!(DataSet::new(vec![1.0, f64::NAN], 2).is_err());
        assert!(DataSet::new(vec![1.0, 2.0, 3.0], 2).is_err());
    }
}
