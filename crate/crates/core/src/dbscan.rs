//! DBSCAN, representative-based local density models, and distributed
//! density-based clustering (DDBC).
//!
//! In DDBC every rank runs DBSCAN on its shard and summarizes each local
//! cluster by a few `(representative, radius)` pairs. The facilitator runs a
//! second DBSCAN over all representatives; local clusters whose
//! representatives land in one global cluster are merged transitively.

use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use crate::comm::{split_blocks, CommWorld, NodeCtx};
use crate::data::{sq_dist, Centroids, DataSet};
use crate::error::{invalid, Error, Result};
use crate::exec;
use crate::kmeans::{kmeans_from, KMeansParams};
use crate::partition::Partition;
use crate::report::{ClusterReport, Timings};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DbscanParams {
    pub eps: f64,
    pub min_pts: usize,
}

impl DbscanParams {
    pub fn new(eps: f64, min_pts: usize) -> Self {
        Self { eps, min_pts }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(invalid("eps must be positive and finite"));
        }
        if self.min_pts == 0 {
            return Err(invalid("min_pts must be at least 1"));
        }
        Ok(())
    }
}

fn neighbors(data: &DataSet, i: usize, eps2: f64) -> Vec<usize> {
    let p = data.row(i);
    data.rows()
        .enumerate()
        .filter(|(_, q)| sq_dist(p, q) <= eps2)
        .map(|(j, _)| j)
        .collect()
}

/// Whether each row has at least `min_pts` rows (itself included) within
/// `eps`.
pub fn core_flags(data: &DataSet, params: &DbscanParams) -> Vec<bool> {
    let eps2 = params.eps * params.eps;
    exec::map_rows(data.values(), data.dim(), |_, p| {
        data.rows().filter(|q| sq_dist(p, q) <= eps2).count() >= params.min_pts
    })
}

/// Classical DBSCAN with closed balls. Rows are visited in order; a border
/// point keeps the first cluster that reaches it.
pub fn dbscan(data: &DataSet, params: &DbscanParams) -> Result<Partition> {
    params.validate()?;
    let eps2 = params.eps * params.eps;
    let core = core_flags(data, params);
    let mut labels: Vec<Option<usize>> = vec![None; data.len()];
    let mut next = 0;
    for i in 0..data.len() {
        if labels[i].is_some() || !core[i] {
            continue;
        }
        let c = next;
        next += 1;
        labels[i] = Some(c);
        let mut stack = vec![i];
        while let Some(j) = stack.pop() {
            for q in neighbors(data, j, eps2) {
                if labels[q].is_none() {
                    labels[q] = Some(c);
                    if core[q] {
                        stack.push(q);
                    }
                }
            }
        }
    }
    Ok(Partition::new(labels))
}

/// Greedy eps-separated cover of one cluster's core points, in ascending id
/// order. Returns row indices into `data`.
pub fn specific_core_points(
    data: &DataSet,
    cluster: &[usize],
    params: &DbscanParams,
) -> Result<Vec<usize>> {
    params.validate()?;
    let eps2 = params.eps * params.eps;
    let mut order = cluster.to_vec();
    order.sort_by_key(|&i| data.ids()[i]);
    let mut chosen: Vec<usize> = Vec::new();
    for i in order {
        let p = data.row(i);
        let count = data.rows().filter(|q| sq_dist(p, q) <= eps2).count();
        if count < params.min_pts {
            continue;
        }
        if chosen.iter().all(|&s| sq_dist(p, data.row(s)) > eps2) {
            chosen.push(i);
        }
    }
    if chosen.is_empty() {
        return Err(Error::InvalidData("cluster has no core points".into()));
    }
    Ok(chosen)
}

/// A representative point and the radius of the area it stands for.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Representative {
    pub center: Vec<f64>,
    pub eps: f64,
}

/// Representatives per local cluster, indexed by cluster id.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct LocalDensityModel {
    pub clusters: Vec<Vec<Representative>>,
}

impl LocalDensityModel {
    pub fn len(&self) -> usize {
        self.clusters.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// How representatives are derived from specific core points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum ModelKind {
    /// k-means over the cluster seeded by its specific core points.
    #[default]
    RepKMeans,
    /// The specific core points themselves.
    RepScor,
}

fn radii(members: &DataSet, centers: &Centroids, assignment: &[usize]) -> Vec<f64> {
    let mut r = vec![0.0f64; centers.k()];
    for (row, &c) in members.rows().zip(assignment) {
        r[c] = r[c].max(sq_dist(row, centers.row(c)));
    }
    r.into_iter().map(f64::sqrt).collect()
}

fn cluster_model(
    data: &DataSet,
    members: &[usize],
    params: &DbscanParams,
    kind: ModelKind,
) -> Result<Vec<Representative>> {
    let scor = specific_core_points(data, members, params)?;
    let sub = data.select(members);
    let init = Centroids::new(
        scor.iter()
            .flat_map(|&i| data.row(i).iter().copied())
            .collect(),
        data.dim(),
    )?;
    let (centers, assignment) = match kind {
        ModelKind::RepKMeans => {
            let r = kmeans_from(&sub, &init, &KMeansParams::new(init.k()))?;
            let labels = r
                .partition
                .labels()
                .iter()
                .map(|l| l.expect("k-means labels all"))
                .collect();
            (r.centroids, labels)
        }
        ModelKind::RepScor => {
            let labels: Vec<usize> = sub
                .rows()
                .map(|row| crate::data::nearest(row, &init).0)
                .collect();
            (init, labels)
        }
    };
    let eps = radii(&sub, &centers, &assignment);
    Ok(centers
        .rows()
        .zip(eps)
        .map(|(c, eps)| Representative {
            center: c.to_vec(),
            eps,
        })
        .collect())
}

/// REP_kmeans local model: each cluster is re-clustered by k-means with one
/// centroid per specific core point; each centroid's radius is the largest
/// distance to a point assigned to it.
pub fn rep_kmeans_model(
    data: &DataSet,
    clusters: &Partition,
    params: &DbscanParams,
) -> Result<LocalDensityModel> {
    local_model(data, clusters, params, ModelKind::RepKMeans)
}

pub fn local_model(
    data: &DataSet,
    clusters: &Partition,
    params: &DbscanParams,
    kind: ModelKind,
) -> Result<LocalDensityModel> {
    if clusters.len() != data.len() {
        return Err(Error::LengthMismatch(clusters.len(), data.len()));
    }
    let clusters = clusters
        .members()
        .iter()
        .map(|m| cluster_model(data, m, params, kind))
        .collect::<Result<_>>()?;
    Ok(LocalDensityModel { clusters })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DdbcParams {
    pub local: DbscanParams,
    pub eps_global: f64,
    pub min_pts_global: usize,
    pub model: ModelKind,
}

impl DdbcParams {
    /// Global radius twice the local one, every representative a core point.
    pub fn new(local: DbscanParams) -> Self {
        Self {
            local,
            eps_global: 2.0 * local.eps,
            min_pts_global: 1,
            model: ModelKind::RepKMeans,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.local.validate()?;
        DbscanParams::new(self.eps_global, self.min_pts_global).validate()
    }
}

/// Facilitator's answer: global cluster of every local cluster, plus every
/// representative with its global cluster.
#[derive(Debug, Clone)]
struct GlobalModel {
    mapping: Vec<Vec<usize>>,
    reps: Vec<(Representative, usize)>,
    clusters: usize,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn merge_models(models: &[LocalDensityModel], params: &DdbcParams) -> Result<GlobalModel> {
    // Node per (rank, local cluster), in rank then cluster order.
    let mut offsets = Vec::with_capacity(models.len());
    let mut nodes = 0;
    for m in models {
        offsets.push(nodes);
        nodes += m.clusters.len();
    }
    let mut owner = Vec::new();
    let mut flat = Vec::new();
    for (m, off) in models.iter().zip(&offsets) {
        for (c, reps) in m.clusters.iter().enumerate() {
            for r in reps {
                owner.push(off + c);
                flat.push(r.clone());
            }
        }
    }
    let mut parent: Vec<usize> = (0..nodes).collect();
    if !flat.is_empty() {
        let dim = flat[0].center.len();
        let points = DataSet::new(
            flat.iter().flat_map(|r| r.center.iter().copied()).collect(),
            dim,
        )?;
        let global = dbscan(
            &points,
            &DbscanParams::new(params.eps_global, params.min_pts_global),
        )?;
        let mut first: Vec<Option<usize>> = vec![None; global.num_clusters()];
        for (i, l) in global.labels().iter().enumerate() {
            if let Some(g) = *l {
                match first[g] {
                    None => first[g] = Some(owner[i]),
                    Some(o) => {
                        let (a, b) = (find(&mut parent, o), find(&mut parent, owner[i]));
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
    }
    let mut ids = vec![usize::MAX; nodes];
    let mut clusters = 0;
    let mut node_global = vec![0; nodes];
    for (v, slot) in node_global.iter_mut().enumerate() {
        let root = find(&mut parent, v);
        if ids[root] == usize::MAX {
            ids[root] = clusters;
            clusters += 1;
        }
        *slot = ids[root];
    }
    let mapping = models
        .iter()
        .zip(&offsets)
        .map(|(m, off)| {
            (0..m.clusters.len())
                .map(|c| node_global[off + c])
                .collect()
        })
        .collect();
    let reps = flat
        .into_iter()
        .zip(owner)
        .map(|(r, o)| (r, node_global[o]))
        .collect();
    Ok(GlobalModel {
        mapping,
        reps,
        clusters,
    })
}

#[derive(Debug, Clone)]
pub struct DdbcNodeOutput {
    pub partition: Option<Partition>,
    pub local: Partition,
    pub representatives: usize,
    pub global_clusters: usize,
}

pub fn ddbc_node(ctx: &NodeCtx, points: &DataSet, params: &DdbcParams) -> Result<DdbcNodeOutput> {
    let local = dbscan(points, &params.local)?;
    let model = local_model(points, &local, &params.local, params.model)?;
    let models = ctx.gather(0, model)?;
    let global = ctx
        .is_root()
        .then(|| merge_models(&models, params))
        .transpose()?;
    let global = ctx.broadcast(0, global)?;

    let mine = &global.mapping[ctx.rank()];
    let labels: Vec<Option<usize>> = local
        .labels()
        .iter()
        .enumerate()
        .map(|(i, l)| match l {
            Some(c) => Some(mine[*c]),
            None => {
                let p = points.row(i);
                global
                    .reps
                    .iter()
                    .map(|(r, g)| (sq_dist(p, &r.center), r.eps, *g))
                    .filter(|(d2, eps, _)| *d2 <= eps * eps)
                    .fold(None::<(f64, usize)>, |best, (d2, _, g)| match best {
                        Some((bd, _)) if bd <= d2 => best,
                        _ => Some((d2, g)),
                    })
                    .map(|(_, g)| g)
            }
        })
        .collect();
    let gathered = ctx.gather(0, labels)?;
    Ok(DdbcNodeOutput {
        partition: ctx.is_root().then(|| Partition::new(gathered.concat())),
        local,
        representatives: global.reps.len(),
        global_clusters: global.clusters,
    })
}

/// Distributed density-based clustering over `world`.
pub fn ddbc(world: &CommWorld, data: &DataSet, params: &DdbcParams) -> Result<ClusterReport> {
    params.validate()?;
    let t0 = Instant::now();
    let shards = split_blocks(data, world.size())?;
    let split = t0.elapsed();
    let out = world.run(|ctx| ddbc_node(ctx, &shards[ctx.rank()].points, params))?;
    let comm = out.total_comm();
    let wall = out.wall;
    let root = out.into_root();
    let mut report = ClusterReport::new(
        "ddbc",
        world.size(),
        data.len(),
        data.dim(),
        root.partition.expect("rank 0 gathers the partition"),
    );
    report.params = serde_json::to_value(params).unwrap_or_default();
    report.model = Some(json!({
        "representatives": root.representatives,
        "global_clusters": root.global_clusters,
    }));
    report.timings_ms = Timings::new(split, wall, comm);
    Ok(report)
}

/// Centralized DBSCAN wrapped in a report.
pub fn dbscan_report(data: &DataSet, params: &DbscanParams) -> Result<ClusterReport> {
    let t0 = Instant::now();
    let partition = dbscan(data, params)?;
    let mut report = ClusterReport::new("dbscan", 1, data.len(), data.dim(), partition);
    report.params = serde_json::to_value(params).unwrap_or_default();
    report.timings_ms = Timings::new(Default::default(), t0.elapsed(), Default::default());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[f64]) -> DataSet {
        DataSet::new(points.to_vec(), 1).unwrap()
    }

    #[test]
    fn isolated_points_are_noise() {
        let data = line(&[0.0, 10.0, 20.0]);
        let p = dbscan(&data, &DbscanParams::new(1.0, 2)).unwrap();
        assert_eq!(p.noise_count(), 3);
    }

    #[test]
    fn one_tight_blob() {
        let data = line(&[0.0, 0.1, 0.2, 0.3]);
        let p = dbscan(&data, &DbscanParams::new(1.0, 4)).unwrap();
        assert_eq!(p.labels(), &[Some(0); 4]);
    }

    #[test]
    fn border_joins_first_cluster() {
        // 2.0 is within eps of both cores 1.0 and 3.0 but is not itself core.
        let data = line(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        let p = dbscan(&data, &DbscanParams::new(1.0, 3)).unwrap();
        assert_eq!(p.labels(), &[Some(0), Some(0), Some(0), Some(0), Some(0)]);
        let data = line(&[0.0, 0.5, 1.0, 2.0, 3.0, 3.5, 4.0]);
        let p = dbscan(&data, &DbscanParams::new(1.0, 4)).unwrap();
        assert_eq!(p.labels()[3], Some(0));
        assert_eq!(p.labels()[4], Some(1));
    }

    #[test]
    fn single_ball_has_one_specific_core_point() {
        let data = line(&[0.0, 0.2, 0.4, 0.6]);
        let s = specific_core_points(&data, &[0, 1, 2, 3], &DbscanParams::new(1.0, 2)).unwrap();
        assert_eq!(s, vec![0]);
    }

    #[test]
    fn chained_balls() {
        let data = line(&[0.0, 0.75, 1.5]);
        let params = DbscanParams::new(1.0, 2);
        let p = dbscan(&data, &params).unwrap();
        assert_eq!(p.num_clusters(), 1);
        let s = specific_core_points(&data, &[0, 1, 2], &params).unwrap();
        assert_eq!(s, vec![0, 2]);
    }

    #[test]
    fn no_core_points_is_error() {
        let data = line(&[0.0, 10.0]);
        assert!(specific_core_points(&data, &[0, 1], &DbscanParams::new(1.0, 2)).is_err());
    }

    #[test]
    fn one_ball_model_is_mean_and_radius() {
        let data = line(&[0.0, 0.5, 1.0, 2.0]);
        let params = DbscanParams::new(2.0, 2);
        let p = dbscan(&data, &params).unwrap();
        let m = rep_kmeans_model(&data, &p, &params).unwrap();
        assert_eq!(m.clusters.len(), 1);
        assert_eq!(m.clusters[0].len(), 1);
        assert_eq!(m.clusters[0][0].center, vec![0.875]);
        assert_eq!(m.clusters[0][0].eps, 1.125);
    }

    #[test]
    fn singleton_clusters_have_zero_radius() {
        let data = line(&[0.0, 5.0, 10.0]);
        let params = DbscanParams::new(1.0, 1);
        let p = dbscan(&data, &params).unwrap();
        let m = rep_kmeans_model(&data, &p, &params).unwrap();
        assert_eq!(m.len(), 3);
        assert!(m.clusters.iter().flatten().all(|r| r.eps == 0.0));
    }

    #[test]
    fn merge_is_transitive() {
        let rep = |x: f64| Representative {
            center: vec![x],
            eps: 0.5,
        };
        let models = vec![
            LocalDensityModel {
                clusters: vec![vec![rep(0.0)], vec![rep(10.0)]],
            },
            LocalDensityModel {
                clusters: vec![vec![rep(1.5)], vec![rep(30.0)]],
            },
            LocalDensityModel {
                clusters: vec![vec![rep(3.0)]],
            },
        ];
        let params = DdbcParams::new(DbscanParams::new(1.0, 1));
        let g = merge_models(&models, &params).unwrap();
        assert_eq!(g.mapping, vec![vec![0, 1], vec![0, 2], vec![0]]);
        assert_eq!(g.clusters, 3);
    }

    #[test]
    fn single_rank_ddbc_relabels_local() {
        let data = line(&[0.0, 0.5, 1.0, 5.0, 5.5, 6.0, 20.0]);
        let params = DdbcParams::new(DbscanParams::new(1.0, 2));
        let r = ddbc(&CommWorld::new(1).unwrap(), &data, &params).unwrap();
        let local = dbscan(&data, &params.local).unwrap();
        assert_eq!(r.partition, local);
    }
}
