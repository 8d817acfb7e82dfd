//! Lloyd's k-means and its message-passing parallelization.
//!
//! Each iteration assigns every point to its nearest centroid (ties to the
//! lowest index), reduces per-cluster coordinate sums, counts and the
//! objective across ranks, and divides. Sums are exact, so the centroids and
//! objective do not depend on how the rows were split.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::comm::{split_blocks, CommWorld, NodeCtx, Shard};
use crate::data::{nearest, sq_dist, Centroids, DataSet};
use crate::error::{invalid, Result};
use crate::exact::ExactVec;
use crate::exec;
use crate::partition::Partition;
use crate::report::{ClusterReport, Timings};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KMeansParams {
    pub k: usize,
    pub max_iter: usize,
    /// Stop once the objective decreases by no more than this.
    pub tol: f64,
    pub seed: u64,
}

impl KMeansParams {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            max_iter: 300,
            tol: 1e-9,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 {
            return Err(invalid("k must be at least 1"));
        }
        if self.k > n {
            return Err(invalid(format!("k = {} exceeds {n} points", self.k)));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter must be at least 1"));
        }
        if !(self.tol >= 0.0) {
            return Err(invalid("tol must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub centroids: Centroids,
    pub partition: Partition,
    pub objective: f64,
    /// Centroid updates performed.
    pub iterations: usize,
    /// Objective of the initial assignment and after each accepted update.
    pub history: Vec<f64>,
}

/// `k` distinct row indices drawn uniformly without replacement.
pub fn initial_indices(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rand::seq::index::sample(&mut rng, n, k).into_vec()
}

struct Assignment {
    labels: Vec<usize>,
    dists: Vec<f64>,
}

fn assign(data: &DataSet, centers: &Centroids) -> Assignment {
    let pairs = exec::map_rows(data.values(), data.dim(), |_, row| nearest(row, centers));
    let (labels, dists) = pairs.into_iter().unzip();
    Assignment { labels, dists }
}

/// Layout: `k*d` weighted coordinate sums, `k` weights, objective, changed count.
fn accumulate(
    data: &DataSet,
    a: &Assignment,
    k: usize,
    weights: Option<&[f64]>,
    previous: Option<&[usize]>,
) -> ExactVec {
    let d = data.dim();
    let mut acc = ExactVec::zeros(k * d + k + 2);
    for (i, row) in data.rows().enumerate() {
        let l = a.labels[i];
        let w = weights.map_or(1.0, |w| w[i]);
        acc.add_scaled(l * d, row, w);
        acc.add_at(k * d + l, w);
        acc.add_at(k * d + k, w * a.dists[i]);
    }
    if let Some(prev) = previous {
        let changed = prev.iter().zip(&a.labels).filter(|(p, q)| p != q).count();
        acc.add_at(k * d + k + 1, changed as f64);
    }
    acc
}

struct Totals {
    values: Vec<f64>,
    k: usize,
    d: usize,
}

impl Totals {
    fn objective(&self) -> f64 {
        self.values[self.k * self.d + self.k]
    }

    fn changed(&self) -> f64 {
        self.values[self.k * self.d + self.k + 1]
    }

    fn empty_clusters(&self) -> Vec<usize> {
        (0..self.k)
            .filter(|&i| self.values[self.k * self.d + i] == 0.0)
            .collect()
    }

    /// Cluster means; empty clusters take the replacement rows in order.
    fn centroids(&self, replacements: Vec<Vec<f64>>) -> Result<Centroids> {
        let (k, d) = (self.k, self.d);
        let mut out = Vec::with_capacity(k * d);
        let mut repl = replacements.into_iter();
        for i in 0..k {
            let weight = self.values[k * d + i];
            if weight == 0.0 {
                out.extend(repl.next().expect("one replacement per empty cluster"));
            } else {
                out.extend(self.values[i * d..(i + 1) * d].iter().map(|s| s / weight));
            }
        }
        Centroids::new(out, d)
    }
}

/// Farthest-from-centroid candidates, ordered by distance then global id.
fn farthest_candidates(
    data: &DataSet,
    a: &Assignment,
    count: usize,
) -> Vec<(f64, usize, Vec<f64>)> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&x, &y| {
        a.dists[y]
            .total_cmp(&a.dists[x])
            .then(data.ids()[x].cmp(&data.ids()[y]))
    });
    order
        .into_iter()
        .take(count)
        .map(|i| (a.dists[i], data.ids()[i], data.row(i).to_vec()))
        .collect()
}

fn pick_farthest(mut cands: Vec<(f64, usize, Vec<f64>)>, count: usize) -> Vec<Vec<f64>> {
    cands.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    cands.into_iter().take(count).map(|c| c.2).collect()
}

/// Serial Lloyd iterations from explicit starting centroids. With `weights`
/// every point contributes proportionally to its weight.
fn lloyd(
    data: &DataSet,
    start: Centroids,
    weights: Option<&[f64]>,
    max_iter: usize,
    tol: f64,
) -> Result<KMeansResult> {
    let k = start.k();
    let d = data.dim();
    let totals = |a: &Assignment, prev: Option<&[usize]>| Totals {
        values: accumulate(data, a, k, weights, prev).values(),
        k,
        d,
    };
    let mut centers = start;
    let mut a = assign(data, &centers);
    let mut t = totals(&a, None);
    let mut history = vec![t.objective()];
    let mut iterations = 0;
    while iterations < max_iter {
        let empty = t.empty_clusters();
        let repl = if empty.is_empty() {
            Vec::new()
        } else {
            pick_farthest(farthest_candidates(data, &a, empty.len()), empty.len())
        };
        let next = t.centroids(repl)?;
        let na = assign(data, &next);
        let nt = totals(&na, Some(&a.labels));
        iterations += 1;
        if nt.objective() > t.objective() {
            break;
        }
        let gain = t.objective() - nt.objective();
        let changed = nt.changed();
        centers = next;
        a = na;
        t = nt;
        history.push(t.objective());
        if changed == 0.0 || gain <= tol {
            break;
        }
    }
    Ok(KMeansResult {
        centroids: centers,
        partition: Partition::from_ids(a.labels),
        objective: t.objective(),
        iterations,
        history,
    })
}

/// Serial k-means with `k` distinct seeded rows as the initial centroids.
pub fn kmeans_centralized(data: &DataSet, params: &KMeansParams) -> Result<KMeansResult> {
    params.validate(data.len())?;
    let idx = initial_indices(data.len(), params.k, params.seed);
    let rows: Vec<Vec<f64>> = idx.iter().map(|&i| data.row(i).to_vec()).collect();
    lloyd(
        data,
        Centroids::from_rows(&rows)?,
        None,
        params.max_iter,
        params.tol,
    )
}

/// Serial k-means from the given centroids; `params.k` and `params.seed` are
/// ignored.
pub fn kmeans_from(
    data: &DataSet,
    init: &Centroids,
    params: &KMeansParams,
) -> Result<KMeansResult> {
    KMeansParams {
        k: init.k(),
        ..*params
    }
    .validate(data.len())?;
    check_dim(data, init)?;
    lloyd(data, init.clone(), None, params.max_iter, params.tol)
}

/// Weighted k-means with deterministic farthest-first seeding: the heaviest
/// point first, then repeatedly the point farthest from those chosen.
pub fn weighted_kmeans(
    data: &DataSet,
    weights: &[f64],
    k: usize,
    max_iter: usize,
    tol: f64,
) -> Result<KMeansResult> {
    if weights.len() != data.len() {
        return Err(crate::Error::LengthMismatch(weights.len(), data.len()));
    }
    if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(invalid("weights must be positive and finite"));
    }
    KMeansParams {
        k,
        max_iter,
        tol,
        seed: 0,
    }
    .validate(data.len())?;
    let mut chosen =
        vec![weights
            .iter()
            .enumerate()
            .fold(0, |best, (i, w)| if *w > weights[best] { i } else { best })];
    let mut gap: Vec<f64> = data
        .rows()
        .map(|r| sq_dist(r, data.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let next = (0..data.len()).fold(0, |best, i| if gap[i] > gap[best] { i } else { best });
        chosen.push(next);
        for (i, row) in data.rows().enumerate() {
            gap[i] = gap[i].min(sq_dist(row, data.row(next)));
        }
    }
    let rows: Vec<Vec<f64>> = chosen.iter().map(|&i| data.row(i).to_vec()).collect();
    lloyd(
        data,
        Centroids::from_rows(&rows)?,
        Some(weights),
        max_iter,
        tol,
    )
}

fn check_dim(data: &DataSet, c: &Centroids) -> Result<()> {
    if data.dim() != c.dim() {
        return Err(crate::Error::DimensionMismatch {
            expected: data.dim(),
            got: c.dim(),
        });
    }
    Ok(())
}

/// Per-rank outcome of [`pkm_node`]; `partition` is only filled on rank 0.
#[derive(Debug, Clone)]
pub struct PkmNodeOutput {
    pub centroids: Centroids,
    pub objective: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
    pub local_labels: Vec<usize>,
    pub partition: Option<Partition>,
}

/// Rows at the given global indices, fetched from their owning ranks.
pub fn fetch_rows(ctx: &NodeCtx, shard: &Shard, global: &[usize]) -> Result<Vec<Vec<f64>>> {
    let mine: Vec<(usize, Vec<f64>)> = global
        .iter()
        .enumerate()
        .filter(|(_, g)| shard.owns(**g))
        .map(|(pos, &g)| (pos, shard.points.row(g - shard.start).to_vec()))
        .collect();
    let mut rows = vec![Vec::new(); global.len()];
    for part in ctx.allgather(mine)? {
        for (pos, row) in part {
            rows[pos] = row;
        }
    }
    Ok(rows)
}

/// One rank's share of parallel k-means.
pub fn pkm_node(
    ctx: &NodeCtx,
    shard: &Shard,
    params: &KMeansParams,
    init: Option<&Centroids>,
) -> Result<PkmNodeOutput> {
    let data = &shard.points;
    let d = data.dim();
    let mut centers = match init {
        Some(c) => c.clone(),
        None => {
            let idx = ctx
                .is_root()
                .then(|| initial_indices(shard.total, params.k, params.seed));
            let idx = ctx.broadcast(0, idx)?;
            Centroids::from_rows(&fetch_rows(ctx, shard, &idx)?)?
        }
    };
    let k = centers.k();
    let reduce = |a: &Assignment, prev: Option<&[usize]>| -> Result<Totals> {
        let acc = accumulate(data, a, k, None, prev);
        Ok(Totals {
            values: ctx.allreduce_exact(&acc)?,
            k,
            d,
        })
    };

    let mut a = assign(data, &centers);
    let mut t = reduce(&a, None)?;
    let mut history = vec![t.objective()];
    let mut iterations = 0;
    while iterations < params.max_iter {
        let empty = t.empty_clusters();
        let repl = if empty.is_empty() {
            Vec::new()
        } else {
            let local = farthest_candidates(data, &a, empty.len());
            let gathered = ctx.gather(0, local)?;
            let picked = ctx
                .is_root()
                .then(|| pick_farthest(gathered.into_iter().flatten().collect(), empty.len()));
            ctx.broadcast(0, picked)?
        };
        let next = t.centroids(repl)?;
        let na = assign(data, &next);
        let nt = reduce(&na, Some(&a.labels))?;
        iterations += 1;
        if nt.objective() > t.objective() {
            break;
        }
        let gain = t.objective() - nt.objective();
        let changed = nt.changed();
        centers = next;
        a = na;
        t = nt;
        history.push(t.objective());
        if changed == 0.0 || gain <= params.tol {
            break;
        }
    }

    let gathered = ctx.gather(0, a.labels.clone())?;
    let partition = ctx
        .is_root()
        .then(|| Partition::from_ids(gathered.into_iter().flatten()));
    Ok(PkmNodeOutput {
        centroids: centers,
        objective: t.objective(),
        iterations,
        history,
        local_labels: a.labels,
        partition,
    })
}

/// Parallel k-means over `world`: block split, seeded initial rows chosen at
/// rank 0 and broadcast, then exact allreduce of per-cluster statistics.
pub fn pkm(world: &CommWorld, data: &DataSet, params: &KMeansParams) -> Result<ClusterReport> {
    pkm_with_init(world, data, params, None)
}

/// [`pkm`] starting from explicit centroids instead of sampled rows.
pub fn pkm_with_init(
    world: &CommWorld,
    data: &DataSet,
    params: &KMeansParams,
    init: Option<&Centroids>,
) -> Result<ClusterReport> {
    let k = init.map_or(params.k, Centroids::k);
    KMeansParams { k, ..*params }.validate(data.len())?;
    if let Some(c) = init {
        check_dim(data, c)?;
    }
    let t0 = Instant::now();
    let shards = split_blocks(data, world.size())?;
    let split = t0.elapsed();
    let out = world.run(|ctx| pkm_node(ctx, &shards[ctx.rank()], params, init))?;
    let comm = out.total_comm();
    let wall = out.wall;
    let root = out.into_root();

    let mut report = ClusterReport::new(
        "pkm",
        world.size(),
        data.len(),
        data.dim(),
        root.partition.expect("rank 0 gathers the partition"),
    );
    report.params = serde_json::to_value(KMeansParams { k, ..*params }).unwrap_or_default();
    report.centroids = Some(root.centroids);
    report.j = Some(root.objective);
    report.iterations = Some(root.iterations);
    report.j_history = root.history;
    report.timings_ms = Timings::new(split, wall, comm);
    Ok(report)
}

/// Wraps a serial result in a report.
pub fn centralized_report(data: &DataSet, params: &KMeansParams, r: KMeansResult) -> ClusterReport {
    let mut report = ClusterReport::new("kmeans", 1, data.len(), data.dim(), r.partition);
    report.params = serde_json::to_value(params).unwrap_or_default();
    report.centroids = Some(r.centroids);
    report.j = Some(r.objective);
    report.iterations = Some(r.iterations);
    report.j_history = r.history;
    report
}
