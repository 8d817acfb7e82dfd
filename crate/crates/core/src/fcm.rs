//! Fuzzy c-means with the membership matrix distributed by rows.
//!
//! Each rank owns the memberships of its shard. Per iteration the centroids
//! come from two global reductions (weighted coordinate sums and weights),
//! memberships are recomputed locally, and the objective is reduced once.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::comm::{split_blocks, CommWorld, NodeCtx};
use crate::data::{sq_dist, Centroids, DataSet};
use crate::error::{invalid, Error, Result};
use crate::exact::ExactVec;
use crate::exec;
use crate::partition::Partition;
use crate::report::{ClusterReport, Timings};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FcmParams {
    pub k: usize,
    /// Fuzzifier, strictly greater than 1.
    pub m: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl FcmParams {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            m: 2.0,
            max_iter: 300,
            tol: 1e-9,
            seed: 0,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 || self.k > n {
            return Err(invalid(format!("k = {} must be in 1..={n}", self.k)));
        }
        if !(self.m > 1.0) || !self.m.is_finite() {
            return Err(invalid("fuzzifier m must be a finite value > 1"));
        }
        if self.max_iter == 0 || !(self.tol >= 0.0) {
            return Err(invalid("max_iter must be >= 1 and tol >= 0"));
        }
        Ok(())
    }
}

/// Row-major `n x k` membership matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Memberships {
    values: Vec<f64>,
    k: usize,
}

impl Memberships {
    pub fn new(values: Vec<f64>, k: usize) -> Result<Self> {
        if k == 0 || !values.len().is_multiple_of(k) {
            return Err(invalid("membership buffer is not a multiple of k"));
        }
        if values.iter().any(|u| !(0.0..=1.0).contains(u)) {
            return Err(invalid("membership outside [0, 1]"));
        }
        Ok(Self { values, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.k..(j + 1) * self.k]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.k)
    }

    /// Argmax per row, ties to the lowest cluster index.
    pub fn defuzzify(&self) -> Vec<usize> {
        self.rows()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .fold(0, |best, (i, u)| if *u > r[best] { i } else { best })
            })
            .collect()
    }
}

/// Seeded memberships keyed by global row id, so the initial matrix does not
/// depend on how rows are split.
pub fn initial_memberships(ids: &[usize], k: usize, seed: u64) -> Memberships {
    let mut values = Vec::with_capacity(ids.len() * k);
    for &id in ids {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(id as u64);
        let row: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            values.extend(row.iter().map(|u| u / total));
        } else {
            values.extend(std::iter::repeat_n(1.0 / k as f64, k));
        }
    }
    Memberships { values, k }
}

/// Memberships of each point given the centroids:
/// `u_i = 1 / sum_t (d_i / d_t)^(2/(m-1))`. A point sitting on a centroid
/// belongs fully to the lowest-indexed such centroid.
pub fn membership_update(points: &DataSet, centers: &Centroids, m: f64) -> Memberships {
    let k = centers.k();
    let exponent = 1.0 / (m - 1.0);
    let rows = exec::map_rows(points.values(), points.dim(), |_, x| {
        let d2: Vec<f64> = centers.rows().map(|c| sq_dist(x, c)).collect();
        let mut u = vec![0.0; k];
        if let Some(hit) = d2.iter().position(|&d| d == 0.0) {
            u[hit] = 1.0;
            return u;
        }
        for i in 0..k {
            let s: f64 = d2.iter().map(|&dt| (d2[i] / dt).powf(exponent)).sum();
            u[i] = 1.0 / s;
        }
        u
    });
    Memberships {
        values: rows.concat(),
        k,
    }
}

/// Global centroids from the two reductions `sum_j u^m x_j` and `sum_j u^m`.
pub fn centroid_update(
    ctx: &NodeCtx,
    points: &DataSet,
    u: &Memberships,
    m: f64,
) -> Result<Centroids> {
    let (k, d) = (u.k(), points.dim());
    let mut num = ExactVec::zeros(k * d);
    let mut den = ExactVec::zeros(k);
    for (x, row) in points.rows().zip(u.rows()) {
        for (i, &uij) in row.iter().enumerate() {
            let w = uij.powf(m);
            num.add_scaled(i * d, x, w);
            den.add_at(i, w);
        }
    }
    let num = ctx.allreduce_exact(&num)?;
    let den = ctx.allreduce_exact(&den)?;
    let mut out = Vec::with_capacity(k * d);
    for i in 0..k {
        if den[i] == 0.0 {
            return Err(Error::DegenerateMembership(i));
        }
        out.extend(num[i * d..(i + 1) * d].iter().map(|s| s / den[i]));
    }
    Centroids::new(out, d)
}

/// Global objective `sum_j sum_i u^m d_ij^2`.
pub fn fcm_objective(
    ctx: &NodeCtx,
    points: &DataSet,
    u: &Memberships,
    centers: &Centroids,
    m: f64,
) -> Result<f64> {
    let mut acc = ExactVec::zeros(1);
    for (x, row) in points.rows().zip(u.rows()) {
        for (c, &uij) in centers.rows().zip(row) {
            acc.add_at(0, uij.powf(m) * sq_dist(x, c));
        }
    }
    Ok(ctx.allreduce_exact(&acc)?[0])
}

#[derive(Debug, Clone)]
pub struct FcmNodeOutput {
    pub centroids: Centroids,
    pub objective: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
    pub local: Memberships,
    pub partition: Option<Partition>,
}

pub fn pfcm_node(ctx: &NodeCtx, points: &DataSet, params: &FcmParams) -> Result<FcmNodeOutput> {
    let m = params.m;
    let mut u = initial_memberships(points.ids(), params.k, params.seed);
    let mut history = Vec::new();
    let mut centers;
    let mut iterations = 0;
    loop {
        centers = centroid_update(ctx, points, &u, m)?;
        u = membership_update(points, &centers, m);
        let j = fcm_objective(ctx, points, &u, &centers, m)?;
        iterations += 1;
        let done = history
            .last()
            .is_some_and(|prev: &f64| (prev - j).abs() <= params.tol);
        history.push(j);
        if done || iterations >= params.max_iter {
            break;
        }
    }
    let gathered = ctx.gather(0, u.defuzzify())?;
    let partition = ctx
        .is_root()
        .then(|| Partition::from_ids(gathered.into_iter().flatten()));
    Ok(FcmNodeOutput {
        centroids: centers,
        objective: *history.last().expect("at least one iteration"),
        iterations,
        history,
        local: u,
        partition,
    })
}

/// Parallel fuzzy c-means. With a one-rank world this is the centralized
/// algorithm.
pub fn pfcm(world: &CommWorld, data: &DataSet, params: &FcmParams) -> Result<ClusterReport> {
    params.validate(data.len())?;
    let t0 = Instant::now();
    let shards = split_blocks(data, world.size())?;
    let split = t0.elapsed();
    let out = world.run(|ctx| pfcm_node(ctx, &shards[ctx.rank()].points, params))?;
    let comm = out.total_comm();
    let wall = out.wall;
    let root = out.into_root();
    let mut report = ClusterReport::new(
        if world.size() == 1 { "fcm" } else { "pfcm" },
        world.size(),
        data.len(),
        data.dim(),
        root.partition.expect("rank 0 gathers the partition"),
    );
    report.params = serde_json::to_value(params).unwrap_or_default();
    report.centroids = Some(root.centroids);
    report.j = Some(root.objective);
    report.iterations = Some(root.iterations);
    report.j_history = root.history;
    report.timings_ms = Timings::new(split, wall, comm);
    Ok(report)
}

pub fn fcm_centralized(data: &DataSet, params: &FcmParams) -> Result<ClusterReport> {
    pfcm(&CommWorld::new(1)?, data, params)
}
