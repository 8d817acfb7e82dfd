//! Principal Direction Divisive Partitioning over row-partitioned data, and
//! the cascade that seeds parallel k-means with PDDP leaf means.
//!
//! Each split needs the cluster mean and the leading eigenvector of its
//! scatter matrix. Both are computed collectively: the mean from reduced
//! sums and counts, the eigenvector by power iteration whose every
//! matrix-vector product is an allreduce of per-rank contributions.

use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use crate::comm::{split_blocks, CommWorld, NodeCtx, Shard};
use crate::data::{sq_dist, Centroids, DataSet};
use crate::error::{invalid, Result};
use crate::exact::ExactVec;
use crate::kmeans::{pkm_node, KMeansParams};
use crate::partition::Partition;
use crate::pca::{dot, power_iteration, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::report::{ClusterReport, Timings};

/// Outcome of one collective split; `left` and `right` are local row
/// indices of the calling rank.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub mean: Vec<f64>,
    pub direction: Vec<f64>,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

/// Splits the cluster made of every rank's `members` (local row indices) by
/// the sign of `u . (x - mean)`, ties going left. Returns `None` when the
/// cluster has zero scatter. Must be entered by all ranks.
pub fn pddp_split(ctx: &NodeCtx, points: &DataSet, members: &[usize]) -> Result<Option<Split>> {
    let d = points.dim();
    let mut acc = ExactVec::zeros(d + 1);
    for &i in members {
        acc.add_scaled(0, points.row(i), 1.0);
    }
    acc.add_at(d, members.len() as f64);
    let totals = ctx.allreduce_exact(&acc)?;
    let count = totals[d];
    if count < 2.0 {
        return Err(invalid("a split needs at least two points"));
    }
    let mean: Vec<f64> = totals[..d].iter().map(|s| s / count).collect();

    let mut scatter = ExactVec::zeros(1);
    for &i in members {
        scatter.add_at(0, sq_dist(points.row(i), &mean));
    }
    if ctx.allreduce_exact(&scatter)?[0] == 0.0 {
        return Ok(None);
    }

    let centered: Vec<Vec<f64>> = members
        .iter()
        .map(|&i| {
            points
                .row(i)
                .iter()
                .zip(&mean)
                .map(|(x, m)| x - m)
                .collect()
        })
        .collect();
    let matvec = |v: &[f64]| -> Result<Vec<f64>> {
        let mut acc = ExactVec::zeros(d);
        for y in &centered {
            acc.add_scaled(0, y, dot(y, v));
        }
        ctx.allreduce_exact(&acc)
    };
    let pair = power_iteration(d, matvec, &[], DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let (left, right) = members
        .iter()
        .zip(&centered)
        .partition::<Vec<_>, _>(|(_, y)| dot(&pair.vector, y) >= 0.0);
    Ok(Some(Split {
        mean,
        direction: pair.vector,
        left: left.into_iter().map(|(i, _)| *i).collect(),
        right: right.into_iter().map(|(i, _)| *i).collect(),
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PddpNode {
    /// Global row ids, ascending.
    pub ids: Vec<usize>,
    pub depth: usize,
    /// Set on internal nodes.
    pub mean: Option<Vec<f64>>,
    pub direction: Option<Vec<f64>>,
    pub children: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PddpTree {
    pub nodes: Vec<PddpNode>,
}

impl PddpTree {
    pub fn root(&self) -> &PddpNode {
        &self.nodes[0]
    }

    /// Leaf node indices, left to right.
    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![0];
        while let Some(v) = stack.pop() {
            match self.nodes[v].children {
                Some((l, r)) => {
                    stack.push(r);
                    stack.push(l);
                }
                None => out.push(v),
            }
        }
        out
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Points labeled by leaf position.
    pub fn partition(&self) -> Partition {
        let n = self.root().ids.len();
        let mut labels = vec![None; n];
        for (leaf, v) in self.leaves().into_iter().enumerate() {
            for &id in &self.nodes[v].ids {
                labels[id] = Some(leaf);
            }
        }
        Partition::new(labels)
    }
}

fn global_ids(ctx: &NodeCtx, shard: &Shard, local: &[usize]) -> Result<Vec<usize>> {
    let mine: Vec<usize> = local.iter().map(|&i| shard.points.ids()[i]).collect();
    Ok(ctx.allgather(mine)?.concat())
}

/// Builds the tree level by level; every rank returns the same tree.
pub fn pddp_node(ctx: &NodeCtx, shard: &Shard, height: usize) -> Result<PddpTree> {
    let all: Vec<usize> = (0..shard.len()).collect();
    let mut nodes = vec![PddpNode {
        ids: global_ids(ctx, shard, &all)?,
        depth: 0,
        mean: None,
        direction: None,
        children: None,
    }];
    let mut local = vec![all];
    let mut frontier = vec![0];
    for level in 1..=height {
        let mut next = Vec::new();
        for v in frontier {
            if nodes[v].ids.len() < 2 {
                continue;
            }
            let Some(split) = pddp_split(ctx, &shard.points, &local[v])? else {
                continue;
            };
            let left_ids = global_ids(ctx, shard, &split.left)?;
            let right_ids = global_ids(ctx, shard, &split.right)?;
            if left_ids.is_empty() || right_ids.is_empty() {
                continue;
            }
            let l = nodes.len();
            for ids in [left_ids, right_ids] {
                nodes.push(PddpNode {
                    ids,
                    depth: level,
                    mean: None,
                    direction: None,
                    children: None,
                });
            }
            local.push(split.left);
            local.push(split.right);
            let node = &mut nodes[v];
            node.mean = Some(split.mean);
            node.direction = Some(split.direction);
            node.children = Some((l, l + 1));
            next.extend([l, l + 1]);
        }
        frontier = next;
    }
    Ok(PddpTree { nodes })
}

/// Leaf means and the objective of the leaf partition against them.
fn leaf_statistics(ctx: &NodeCtx, shard: &Shard, tree: &PddpTree) -> Result<(Centroids, f64)> {
    let d = shard.points.dim();
    let leaves = tree.leaves();
    let mut acc = ExactVec::zeros(leaves.len() * (d + 1));
    let owned = |id: usize| shard.owns(id).then(|| id - shard.start);
    for (j, &v) in leaves.iter().enumerate() {
        for i in tree.nodes[v].ids.iter().filter_map(|&id| owned(id)) {
            acc.add_scaled(j * (d + 1), shard.points.row(i), 1.0);
            acc.add_at(j * (d + 1) + d, 1.0);
        }
    }
    let totals = ctx.allreduce_exact(&acc)?;
    let means: Vec<f64> = totals
        .chunks_exact(d + 1)
        .flat_map(|c| c[..d].iter().map(move |s| s / c[d]))
        .collect();
    let means = Centroids::new(means, d)?;
    let mut sse = ExactVec::zeros(1);
    for (j, &v) in leaves.iter().enumerate() {
        for i in tree.nodes[v].ids.iter().filter_map(|&id| owned(id)) {
            sse.add_at(0, sq_dist(shard.points.row(i), means.row(j)));
        }
    }
    Ok((means, ctx.allreduce_exact(&sse)?[0]))
}

fn renumbered(data: &DataSet) -> Result<DataSet> {
    DataSet::new(data.values().to_vec(), data.dim())
}

fn check_height(height: usize) -> Result<()> {
    if height == 0 {
        return Err(invalid("height must be at least 1"));
    }
    Ok(())
}

/// Parallel PDDP: the tree and the leaf partition.
pub fn pddp(world: &CommWorld, data: &DataSet, height: usize) -> Result<(PddpTree, Partition)> {
    check_height(height)?;
    let shards = split_blocks(&renumbered(data)?, world.size())?;
    let tree = world
        .run(|ctx| pddp_node(ctx, &shards[ctx.rank()], height))?
        .into_root();
    let partition = tree.partition();
    Ok((tree, partition))
}

/// [`pddp`] wrapped in a report with leaf means as centroids.
pub fn pddp_report(world: &CommWorld, data: &DataSet, height: usize) -> Result<ClusterReport> {
    check_height(height)?;
    let t0 = Instant::now();
    let shards = split_blocks(&renumbered(data)?, world.size())?;
    let split = t0.elapsed();
    let out = world.run(|ctx| {
        let shard = &shards[ctx.rank()];
        let tree = pddp_node(ctx, shard, height)?;
        let (means, j) = leaf_statistics(ctx, shard, &tree)?;
        Ok((tree, means, j))
    })?;
    let comm = out.total_comm();
    let wall = out.wall;
    let (tree, means, j) = out.into_root();
    let mut report = ClusterReport::new(
        "pddp",
        world.size(),
        data.len(),
        data.dim(),
        tree.partition(),
    );
    report.params = json!({ "height": height });
    report.model = Some(json!({ "leaves": means.k(), "depth": tree.depth() }));
    report.centroids = Some(means);
    report.j = Some(j);
    report.timings_ms = Timings::new(split, wall, comm);
    Ok(report)
}

/// PDDP followed by parallel k-means started from the leaf means. `params.k`
/// and `params.seed` are ignored; k is the number of leaves.
pub fn pddp_km(
    world: &CommWorld,
    data: &DataSet,
    height: usize,
    params: &KMeansParams,
) -> Result<ClusterReport> {
    check_height(height)?;
    let t0 = Instant::now();
    let shards = split_blocks(&renumbered(data)?, world.size())?;
    let split = t0.elapsed();
    let out = world.run(|ctx| {
        let shard = &shards[ctx.rank()];
        let tree = pddp_node(ctx, shard, height)?;
        let (means, seed_j) = leaf_statistics(ctx, shard, &tree)?;
        let km = KMeansParams {
            k: means.k(),
            ..*params
        };
        let refined = pkm_node(ctx, shard, &km, Some(&means))?;
        Ok((tree.leaves().len(), seed_j, refined))
    })?;
    let comm = out.total_comm();
    let wall = out.wall;
    let (leaves, seed_j, root) = out.into_root();
    let mut report = ClusterReport::new(
        "pddp-km",
        world.size(),
        data.len(),
        data.dim(),
        root.partition.expect("rank 0 gathers the partition"),
    );
    report.params = json!({
        "height": height,
        "k": leaves,
        "max_iter": params.max_iter,
        "tol": params.tol,
    });
    report.centroids = Some(root.centroids);
    report.j = Some(root.objective);
    report.seed_j = Some(seed_j);
    report.iterations = Some(root.iterations);
    report.j_history = root.history;
    report.model = Some(json!({ "leaves": leaves }));
    report.timings_ms = Timings::new(split, wall, comm);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[f64]) -> DataSet {
        DataSet::new(points.to_vec(), 1).unwrap()
    }

    #[test]
    fn sign_rule_on_centered_line() {
        let data = line(&[-2.0, -1.0, 1.0, 2.0]);
        let (tree, _) = pddp(&CommWorld::new(1).unwrap(), &data, 1).unwrap();
        let (l, r) = tree.root().children.unwrap();
        assert_eq!(tree.nodes[l].ids, vec![2, 3]);
        assert_eq!(tree.nodes[r].ids, vec![0, 1]);
        assert_eq!(tree.root().mean, Some(vec![0.0]));
        assert_eq!(tree.root().direction, Some(vec![1.0]));
    }

    #[test]
    fn single_point_is_a_leaf() {
        let (tree, p) = pddp(&CommWorld::new(1).unwrap(), &line(&[3.0]), 3).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(p.labels(), &[Some(0)]);
    }

    #[test]
    fn identical_points_are_degenerate() {
        let (tree, p) = pddp(&CommWorld::new(2).unwrap(), &line(&[1.0; 6]), 2).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(p.num_clusters(), 1);
    }

    #[test]
    fn leaves_bounded_by_height() {
        let data = line(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        for h in 1..4 {
            let (tree, p) = pddp(&CommWorld::new(3).unwrap(), &data, h).unwrap();
            assert!(tree.leaves().len() <= 1 << h);
            assert!(tree.depth() <= h);
            assert_eq!(p.len(), 10);
        }
    }

    #[test]
    fn cascade_does_not_increase_objective() {
        let data = line(&[0.0, 0.4, 1.1, 5.0, 5.2, 9.0, 9.9, 10.0]);
        let r = pddp_km(&CommWorld::new(2).unwrap(), &data, 2, &KMeansParams::new(1)).unwrap();
        assert!(r.j.unwrap() <= r.seed_j.unwrap());
    }

    #[test]
    fn zero_height_rejected() {
        assert!(pddp(&CommWorld::new(1).unwrap(), &line(&[0.0, 1.0]), 0).is_err());
    }
}
