//! Principal components by power iteration, collective PCA across ranks, and
//! distributed clustering on top of it.
//!
//! Collective PCA: every rank reduces its shard to a local basis plus
//! projected rows, the facilitator (rank 0) reconstructs and concatenates
//! them, runs PCA on the union and broadcasts the global basis.
//!
//! The distributed clustering workflow wraps any [`LocalClusterer`]. Ranks
//! cluster in their local PC space, send a few representative rows to the
//! facilitator for the global PCs, re-cluster in global PC space, and ship
//! per-cluster sketches that the facilitator merges with size-weighted
//! k-means.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::comm::{split_blocks, CommWorld, NodeCtx};
use crate::data::{nearest, sq_dist, Centroids, DataSet};
use crate::dbscan::{dbscan, DbscanParams};
use crate::error::{invalid, Error, Result};
use crate::exact::ExactVec;
use crate::kmeans::{kmeans_centralized, weighted_kmeans, KMeansParams};
use crate::partition::Partition;
use crate::report::{ClusterReport, Timings};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 1000;

/// Dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    values: Vec<f64>,
}

impl SymMatrix {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.len() != dim * dim {
            return Err(invalid("matrix buffer does not match dimension"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite matrix entry".into()));
        }
        for i in 0..dim {
            for j in 0..i {
                let (a, b) = (values[i * dim + j], values[j * dim + i]);
                if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::InvalidData(format!(
                        "matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { dim, values })
    }

    pub fn diag(entries: &[f64]) -> Result<Self> {
        let d = entries.len();
        let mut values = vec![0.0; d * d];
        for (i, e) in entries.iter().enumerate() {
            values[i * d + i] = *e;
        }
        Self::new(d, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.dim + j]
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        self.values
            .chunks_exact(self.dim)
            .map(|row| dot(row, v))
            .collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Subtracts `lambda * u u^T`.
    pub fn deflate(&mut self, lambda: f64, u: &[f64]) {
        for i in 0..self.dim {
            for j in 0..self.dim {
                self.values[i * self.dim + j] -= lambda * u[i] * u[j];
            }
        }
    }

    /// Covariance of the rows, normalized by `n - 1`.
    pub fn covariance(data: &DataSet, mean: &[f64]) -> Result<Self> {
        let d = data.dim();
        let n = data.len();
        if n < 2 {
            return Err(Error::InvalidData(
                "covariance needs at least two rows".into(),
            ));
        }
        let mut acc = ExactVec::zeros(d * d);
        let mut centered = vec![0.0; d];
        for row in data.rows() {
            centered
                .iter_mut()
                .zip(row.iter().zip(mean))
                .for_each(|(c, (x, m))| *c = x - m);
            for i in 0..d {
                acc.add_scaled(i * d + i, &centered[i..], centered[i]);
            }
        }
        let sums = acc.values();
        let mut values = vec![0.0; d * d];
        for i in 0..d {
            for j in i..d {
                let v = sums[i * d + j] / (n - 1) as f64;
                values[i * d + j] = v;
                values[j * d + i] = v;
            }
        }
        Self::new(d, values)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Flips `v` so its first entry of non-negligible magnitude is positive.
pub fn orient(v: &mut [f64]) {
    if let Some(first) = v.iter().copied().find(|x| x.abs() > 1e-12) {
        if first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

fn orthogonalize(v: &mut [f64], against: &[Vec<f64>]) {
    for u in against {
        let p = dot(v, u);
        v.iter_mut().zip(u).for_each(|(a, b)| *a -= p * b);
    }
}

/// Fixed pseudo-random starting vector, the same on every rank.
fn start_vector(dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x005e_ed0f_1ead);
    (0..dim).map(|_| 0.5 + rng.random::<f64>()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    /// Unit vector, first significant entry positive.
    pub vector: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Power iteration over an abstract product `v -> C v`, restricted to the
/// orthogonal complement of `against`. Stops once
/// `|C u - lambda u| <= tol * max(1, |lambda|)`.
pub fn power_iteration<F>(
    dim: usize,
    mut matvec: F,
    against: &[Vec<f64>],
    tol: f64,
    max_iter: usize,
) -> Result<EigenPair>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut v = start_vector(dim);
    orthogonalize(&mut v, against);
    let n0 = norm(&v);
    if n0 == 0.0 {
        return Err(invalid("no direction left outside the excluded subspace"));
    }
    v.iter_mut().for_each(|x| *x /= n0);
    let mut lambda = 0.0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut w = matvec(&v)?;
        orthogonalize(&mut w, against);
        lambda = dot(&v, &w);
        let residual = w
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - lambda * b).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual <= tol * lambda.abs().max(1.0) {
            converged = true;
            break;
        }
        let nw = norm(&w);
        if nw == 0.0 {
            lambda = 0.0;
            converged = true;
            break;
        }
        v = w.into_iter().map(|x| x / nw).collect();
    }
    orient(&mut v);
    Ok(EigenPair {
        vector: v,
        value: lambda,
        converged,
        iterations,
    })
}

/// Dominant eigenpair of a symmetric matrix. The zero matrix yields the
/// first coordinate axis with eigenvalue 0.
pub fn leading_eigenvector(c: &SymMatrix, tol: f64, max_iter: usize) -> Result<EigenPair> {
    if c.values.iter().all(|&x| x == 0.0) {
        let mut e = vec![0.0; c.dim];
        e[0] = 1.0;
        return Ok(EigenPair {
            vector: e,
            value: 0.0,
            converged: true,
            iterations: 0,
        });
    }
    power_iteration(c.dim, |v| Ok(c.mul_vec(v)), &[], tol, max_iter)
}

/// Mean, orthonormal components in descending eigenvalue order, and their
/// eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrincipalBasis {
    pub mean: Vec<f64>,
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
}

impl PrincipalBasis {
    pub fn rank(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `(x - mean) . components^T` for every row; ids are kept.
    pub fn project(&self, data: &DataSet) -> Result<DataSet> {
        if data.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: data.dim(),
            });
        }
        let mut out = Vec::with_capacity(data.len() * self.rank());
        let mut centered = vec![0.0; self.dim()];
        for row in data.rows() {
            centered
                .iter_mut()
                .zip(row.iter().zip(&self.mean))
                .for_each(|(c, (x, m))| *c = x - m);
            out.extend(self.components.iter().map(|u| dot(&centered, u)));
        }
        DataSet::with_ids(out, self.rank(), data.ids().to_vec())
    }

    /// `mean + projected . components`; ids are kept.
    pub fn reconstruct(&self, projected: &DataSet) -> Result<DataSet> {
        if projected.dim() != self.rank() {
            return Err(Error::DimensionMismatch {
                expected: self.rank(),
                got: projected.dim(),
            });
        }
        let mut out = Vec::with_capacity(projected.len() * self.dim());
        for coords in projected.rows() {
            let mut x = self.mean.clone();
            for (c, u) in coords.iter().zip(&self.components) {
                x.iter_mut().zip(u).for_each(|(a, b)| *a += c * b);
            }
            out.extend(x);
        }
        DataSet::with_ids(out, self.dim(), projected.ids().to_vec())
    }
}

fn column_mean(data: &DataSet) -> Vec<f64> {
    let mut acc = ExactVec::zeros(data.dim());
    for row in data.rows() {
        acc.add_scaled(0, row, 1.0);
    }
    acc.values()
        .into_iter()
        .map(|s| s / data.len() as f64)
        .collect()
}

/// How many components to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Keep {
    /// Smallest count whose eigenvalues reach this fraction of the total.
    Fraction(f64),
    Count(usize),
}

/// PCA of the rows by power iteration with deflation.
pub fn principal_basis(data: &DataSet, keep: Keep) -> Result<PrincipalBasis> {
    match keep {
        Keep::Fraction(f) if !(f > 0.0 && f <= 1.0) => {
            return Err(invalid("variance fraction must lie in (0, 1]"))
        }
        Keep::Count(0) => return Err(invalid("component count must be at least 1")),
        _ => {}
    }
    let mean = column_mean(data);
    let mut cov = SymMatrix::covariance(data, &mean)?;
    let d = data.dim();
    let total = cov.trace();
    let limit = match keep {
        Keep::Count(r) => r.min(d),
        Keep::Fraction(_) => d,
    };
    let mut components: Vec<Vec<f64>> = Vec::new();
    let mut eigenvalues: Vec<f64> = Vec::new();
    let mut explained = 0.0;
    while components.len() < limit {
        let pair = if cov.values.iter().all(|&x| x == 0.0) {
            // Whatever is left has zero variance: any orthonormal completion
            // is an eigenbasis.
            let e = (0..d)
                .map(|t| {
                    let mut e = vec![0.0; d];
                    e[t] = 1.0;
                    orthogonalize(&mut e, &components);
                    e
                })
                .max_by(|a, b| norm(a).total_cmp(&norm(b)))
                .expect("d >= 1");
            let n = norm(&e);
            let mut vector: Vec<f64> = e.into_iter().map(|x| x / n).collect();
            orient(&mut vector);
            EigenPair {
                vector,
                value: 0.0,
                converged: true,
                iterations: 0,
            }
        } else {
            power_iteration(
                d,
                |v| Ok(cov.mul_vec(v)),
                &components,
                DEFAULT_TOL,
                DEFAULT_MAX_ITER,
            )?
        };
        let lambda = pair.value.max(0.0);
        cov.deflate(lambda, &pair.vector);
        explained += lambda;
        components.push(pair.vector);
        eigenvalues.push(lambda);
        if let Keep::Fraction(f) = keep {
            if total <= 0.0 || explained >= f * total {
                break;
            }
        }
    }
    // Deflation order gives descending values up to rounding; enforce it.
    for i in 1..eigenvalues.len() {
        eigenvalues[i] = eigenvalues[i].min(eigenvalues[i - 1]);
    }
    Ok(PrincipalBasis {
        mean,
        components,
        eigenvalues,
    })
}

/// Local PCA keeping enough components for `variance_fraction` of the
/// variance, plus the projected rows.
pub fn local_pca(points: &DataSet, variance_fraction: f64) -> Result<(PrincipalBasis, DataSet)> {
    let basis = principal_basis(points, Keep::Fraction(variance_fraction))?;
    let projected = basis.project(points)?;
    Ok((basis, projected))
}

/// Largest principal angle (radians) between the spans of two orthonormal
/// row sets of equal dimension.
pub fn largest_principal_angle(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.is_empty() || b.is_empty() || a[0].len() != b[0].len() {
        return Err(invalid("subspaces must be non-empty and share a dimension"));
    }
    // Residual of b's vectors after projecting onto span(a); the largest
    // singular value of that residual is the sine of the largest angle.
    let residual: Vec<Vec<f64>> = b
        .iter()
        .map(|v| {
            let mut r = v.clone();
            orthogonalize(&mut r, a);
            r
        })
        .collect();
    let r = residual.len();
    let gram: Vec<f64> = (0..r)
        .flat_map(|i| {
            (0..r)
                .map(|j| dot(&residual[i], &residual[j]))
                .collect::<Vec<_>>()
        })
        .collect();
    let gram = SymMatrix::new(r, gram)?;
    let top = leading_eigenvector(&gram, 1e-14, 10_000)?;
    Ok(top.value.max(0.0).sqrt().min(1.0).asin())
}

/// Collective PCA; every rank's result is the same global basis, this
/// returns rank 0's.
pub fn cpca(world: &CommWorld, data: &DataSet, variance_fraction: f64) -> Result<PrincipalBasis> {
    let shards = split_blocks(data, world.size())?;
    let out = world.run(|ctx| cpca_node(ctx, &shards[ctx.rank()].points, variance_fraction))?;
    Ok(out.into_root())
}

pub fn cpca_node(
    ctx: &NodeCtx,
    points: &DataSet,
    variance_fraction: f64,
) -> Result<PrincipalBasis> {
    let (basis, projected) = local_pca(points, variance_fraction)?;
    let gathered = ctx.gather(0, (basis, projected))?;
    let global = if ctx.is_root() {
        let mut values = Vec::new();
        let dim = points.dim();
        for (b, proj) in &gathered {
            values.extend_from_slice(b.reconstruct(proj)?.values());
        }
        let union = DataSet::new(values, dim)?;
        Some(principal_basis(&union, Keep::Fraction(variance_fraction))?)
    } else {
        None
    };
    ctx.broadcast(0, global)
}

/// A centralized clustering algorithm run independently on each rank.
pub trait LocalClusterer: Sync {
    fn name(&self) -> &'static str;
    fn cluster(&self, data: &DataSet, k: usize) -> Result<Partition>;
}

/// Centralized k-means as the local algorithm. Runs `restarts` seeds
/// (`seed`, `seed + 1`, ...) and keeps the lowest objective.
#[derive(Debug, Clone, Copy)]
pub struct KMeansLocal {
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    pub restarts: usize,
}

impl Default for KMeansLocal {
    fn default() -> Self {
        Self {
            max_iter: 300,
            tol: 1e-9,
            seed: 0,
            restarts: 10,
        }
    }
}

impl LocalClusterer for KMeansLocal {
    fn name(&self) -> &'static str {
        "kmeans"
    }

    fn cluster(&self, data: &DataSet, k: usize) -> Result<Partition> {
        let mut best: Option<crate::kmeans::KMeansResult> = None;
        for r in 0..self.restarts.max(1) as u64 {
            let params = KMeansParams {
                k: k.min(data.len()),
                max_iter: self.max_iter,
                tol: self.tol,
                seed: self.seed.wrapping_add(r),
            };
            let run = kmeans_centralized(data, &params)?;
            if best.as_ref().is_none_or(|b| run.objective < b.objective) {
                best = Some(run);
            }
        }
        Ok(best.expect("at least one restart").partition)
    }
}

/// DBSCAN as the local algorithm; `k` is ignored.
#[derive(Debug, Clone, Copy)]
pub struct DbscanLocal(pub DbscanParams);

impl LocalClusterer for DbscanLocal {
    fn name(&self) -> &'static str {
        "dbscan"
    }

    fn cluster(&self, data: &DataSet, _k: usize) -> Result<Partition> {
        dbscan(data, &self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CpcaClusterParams {
    pub k: usize,
    pub reps_per_cluster: usize,
    pub variance_fraction: f64,
    pub seed: u64,
}

impl CpcaClusterParams {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            reps_per_cluster: 5,
            variance_fraction: 0.95,
            seed: 0,
        }
    }
}

/// Compact description of one local cluster in global PC coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterSketch {
    pub centroid: Vec<f64>,
    pub count: usize,
    pub radius: f64,
}

fn cluster_mean(data: &DataSet, members: &[usize]) -> Vec<f64> {
    let mut acc = ExactVec::zeros(data.dim());
    for &i in members {
        acc.add_scaled(0, data.row(i), 1.0);
    }
    acc.values()
        .into_iter()
        .map(|s| s / members.len() as f64)
        .collect()
}

/// Local row indices chosen to represent each cluster: the member nearest
/// the cluster mean, then `per_cluster - 1` seeded draws from the rest.
pub fn representatives(
    data: &DataSet,
    partition: &Partition,
    per_cluster: usize,
    rng: &mut impl Rng,
) -> Vec<usize> {
    let mut out = Vec::new();
    for members in partition.members().into_iter().filter(|m| !m.is_empty()) {
        let mean = cluster_mean(data, &members);
        let best = members
            .iter()
            .copied()
            .fold(None::<(usize, f64)>, |acc, i| {
                let d = sq_dist(data.row(i), &mean);
                match acc {
                    Some((_, bd)) if bd <= d => acc,
                    _ => Some((i, d)),
                }
            })
            .expect("non-empty cluster")
            .0;
        out.push(best);
        let rest: Vec<usize> = members.into_iter().filter(|&i| i != best).collect();
        let extra = per_cluster.saturating_sub(1).min(rest.len());
        let mut picks: Vec<usize> = rand::seq::index::sample(rng, rest.len(), extra)
            .into_iter()
            .map(|j| rest[j])
            .collect();
        picks.sort_unstable();
        out.extend(picks);
    }
    out
}

/// Sketch per non-empty cluster, in cluster id order.
pub fn sketches(data: &DataSet, partition: &Partition) -> Vec<(usize, ClusterSketch)> {
    partition
        .members()
        .into_iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .map(|(c, members)| {
            let centroid = cluster_mean(data, &members);
            let radius = members
                .iter()
                .map(|&i| sq_dist(data.row(i), &centroid))
                .fold(0.0, f64::max)
                .sqrt();
            (
                c,
                ClusterSketch {
                    centroid,
                    count: members.len(),
                    radius,
                },
            )
        })
        .collect()
}

#[derive(Debug, Clone)]
struct GlobalModel {
    /// Per rank: (local cluster id, global cluster id).
    mapping: Vec<Vec<(usize, usize)>>,
    centers: Centroids,
}

#[derive(Debug, Clone)]
pub struct CpcaNodeOutput {
    pub partition: Option<Partition>,
    pub basis: PrincipalBasis,
    pub sketch_count: usize,
}

pub fn cpca_cluster_node(
    ctx: &NodeCtx,
    points: &DataSet,
    local: &dyn LocalClusterer,
    params: &CpcaClusterParams,
) -> Result<CpcaNodeOutput> {
    let vf = params.variance_fraction;
    // Local PCs, local clustering, representative selection.
    let (_, projected) = local_pca(points, vf)?;
    let first = local.cluster(&projected, params.k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(ctx.rank() as u64);
    let reps = representatives(&projected, &first, params.reps_per_cluster, &mut rng);
    let rep_rows = points.select(&reps);

    // Representative rows to the facilitator, global PCs back.
    let gathered = ctx.gather(0, rep_rows.values().to_vec())?;
    let global = if ctx.is_root() {
        let union = DataSet::new(gathered.concat(), points.dim())?;
        Some(principal_basis(&union, Keep::Fraction(vf))?)
    } else {
        None
    };
    let global = ctx.broadcast(0, global)?;

    // Re-cluster in global PC space and describe the clusters.
    let gproj = global.project(points)?;
    let second = local.cluster(&gproj, params.k)?;
    let my_sketches = sketches(&gproj, &second);
    let all = ctx.gather(0, my_sketches)?;

    // Facilitator merges sketches into k global clusters.
    let model = if ctx.is_root() {
        let flat: Vec<&ClusterSketch> = all.iter().flatten().map(|(_, s)| s).collect();
        if params.k > flat.len() {
            return Err(invalid(format!(
                "k = {} exceeds the {} local cluster sketches",
                params.k,
                flat.len()
            )));
        }
        let centroids = DataSet::new(
            flat.iter()
                .flat_map(|s| s.centroid.iter().copied())
                .collect(),
            global.rank(),
        )?;
        let weights: Vec<f64> = flat.iter().map(|s| s.count as f64).collect();
        let merged = weighted_kmeans(&centroids, &weights, params.k, 300, 0.0)?;
        let labels = merged.partition.labels();
        let mut next = 0;
        let mapping = all
            .iter()
            .map(|rank_sketches| {
                rank_sketches
                    .iter()
                    .map(|(c, _)| {
                        let g = labels[next].expect("k-means labels every sketch");
                        next += 1;
                        (*c, g)
                    })
                    .collect()
            })
            .collect();
        Some(GlobalModel {
            mapping,
            centers: merged.centroids,
        })
    } else {
        None
    };
    let model = ctx.broadcast(0, model)?;

    let mine = &model.mapping[ctx.rank()];
    let labels: Vec<usize> = second
        .labels()
        .iter()
        .enumerate()
        .map(|(i, l)| match l {
            Some(c) => mine
                .iter()
                .find(|(lc, _)| lc == c)
                .map(|(_, g)| *g)
                .expect("every local cluster has a sketch"),
            None => nearest(gproj.row(i), &model.centers).0,
        })
        .collect();
    let gathered = ctx.gather(0, labels)?;
    Ok(CpcaNodeOutput {
        partition: ctx
            .is_root()
            .then(|| Partition::from_ids(gathered.into_iter().flatten())),
        basis: global,
        sketch_count: model.mapping.iter().map(Vec::len).sum(),
    })
}

/// Distributed clustering driven by collective PCA and a local algorithm.
pub fn cpca_cluster(
    world: &CommWorld,
    data: &DataSet,
    local: &dyn LocalClusterer,
    params: &CpcaClusterParams,
) -> Result<ClusterReport> {
    if params.k == 0 || params.reps_per_cluster == 0 {
        return Err(invalid("k and reps_per_cluster must be at least 1"));
    }
    if !(params.variance_fraction > 0.0 && params.variance_fraction <= 1.0) {
        return Err(invalid("variance fraction must lie in (0, 1]"));
    }
    let t0 = Instant::now();
    let shards = split_blocks(data, world.size())?;
    let split = t0.elapsed();
    let out = world.run(|ctx| cpca_cluster_node(ctx, &shards[ctx.rank()].points, local, params))?;
    let comm = out.total_comm();
    let wall = out.wall;
    let root = out.into_root();
    let mut report = ClusterReport::new(
        "cpca-cluster",
        world.size(),
        data.len(),
        data.dim(),
        root.partition.expect("rank 0 gathers the partition"),
    );
    let mut params_json = serde_json::to_value(params).unwrap_or_default();
    params_json["local_algo"] = json!(local.name());
    report.params = params_json;
    report.model = Some(json!({
        "global_components": root.basis.rank(),
        "eigenvalues": root.basis.eigenvalues,
        "sketches": root.sketch_count,
    }));
    report.timings_ms = Timings::new(split, wall, comm);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_matrix() {
        let c = SymMatrix::diag(&[5.0, 1.0]).unwrap();
        let e = leading_eigenvector(&c, 1e-10, 1000).unwrap();
        assert!(e.converged);
        assert!((e.vector[0] - 1.0).abs() < 1e-9 && e.vector[1].abs() < 1e-9);
        assert!((e.value - 5.0).abs() < 1e-9);
    }

    #[test]
    fn diagonal_line_covariance() {
        let data = DataSet::new(vec![0.0, 0.0, 1.0, 1.0, 2.0, 2.0, -3.0, -3.0], 2).unwrap();
        let mean = column_mean(&data);
        let c = SymMatrix::covariance(&data, &mean).unwrap();
        let e = leading_eigenvector(&c, 1e-10, 1000).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((e.vector[0] - h).abs() < 1e-9 && (e.vector[1] - h).abs() < 1e-9);
    }

    #[test]
    fn zero_matrix_gives_first_axis() {
        let c = SymMatrix::new(3, vec![0.0; 9]).unwrap();
        let e = leading_eigenvector(&c, 1e-10, 10).unwrap();
        assert_eq!(e.vector, vec![1.0, 0.0, 0.0]);
        assert_eq!(e.value, 0.0);
        assert!(e.converged);
    }

    #[test]
    fn non_converged_flag() {
        // Eigenvalues 1 and 0.999999 separate far too slowly for 3 steps.
        let c = SymMatrix::diag(&[1.0, 0.999_999]).unwrap();
        let e = leading_eigenvector(&c, 1e-14, 3).unwrap();
        assert!(!e.converged);
        assert_eq!(e.iterations, 3);
    }

    #[test]
    fn rejects_asymmetric() {
        assert!(SymMatrix::new(2, vec![1.0, 2.0, 3.0, 4.0]).is_err());
    }

    #[test]
    fn tiny_fraction_keeps_one_component() {
        let data = DataSet::new(vec![0.0, 1.0, 2.0, 0.5, 4.0, -1.0, 3.0, 3.0], 2).unwrap();
        let (b, proj) = local_pca(&data, 1e-9).unwrap();
        assert_eq!(b.rank(), 1);
        assert_eq!(proj.dim(), 1);
        assert!(local_pca(&data.select(&[0]), 0.5).is_err());
    }

    #[test]
    fn principal_angle_of_known_planes() {
        let x = vec![1.0, 0.0, 0.0];
        let y = vec![0.0, 1.0, 0.0];
        let t: f64 = 0.3;
        let tilted = vec![0.0, t.cos(), t.sin()];
        let a = largest_principal_angle(&[x.clone(), y], &[x, tilted]).unwrap();
        assert!((a - 0.3).abs() < 1e-12);
    }
}
