//! Multi-dimensional binary trees, orthogonal range search, and the parallel
//! k-windows clusterer.
//!
//! The parallel range search is a server/slave protocol: rank 0 keeps the
//! pool of idle ranks and hands out sub-searches; a slave that reaches a node
//! whose two subtrees both intersect the query asks the master to give one of
//! them to another idle rank and keeps descending into the other. The tree is
//! replicated on every rank so tasks can name subtrees by node index.

use std::collections::VecDeque;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use crate::comm::{CommError, CommWorld, NodeCtx, Received};
use crate::data::DataSet;
use crate::error::{invalid, Error, Result};
use crate::exact::ExactVec;
use crate::kmeans::initial_indices;
use crate::partition::Partition;
use crate::report::{ClusterReport, Timings};

/// Closed axis-aligned box `[lo_t, hi_t]` per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RangeQuery {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl RangeQuery {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(invalid(
                "query bounds must be non-empty and of equal length",
            ));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a <= b)) {
            return Err(invalid("query lower bound exceeds upper bound"));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| a <= v && v <= b)
    }
}

#[derive(Debug, Clone)]
struct TreeNode {
    row: usize,
    axis: usize,
    left: Option<usize>,
    right: Option<usize>,
    size: usize,
}

/// Balanced multi-dimensional binary tree: one point per node, split axis
/// `depth mod d`, median by `(coordinate, global id)`. Left descendants have
/// split coordinate `<=` the node's, right descendants `>=`.
#[derive(Debug, Clone)]
pub struct MdTree {
    nodes: Vec<TreeNode>,
    root: usize,
    points: DataSet,
}

pub fn build_mdtree(data: &DataSet) -> Result<MdTree> {
    if data.is_empty() {
        return Err(invalid("cannot build a tree over zero points"));
    }
    let mut rows: Vec<usize> = (0..data.len()).collect();
    let mut nodes = Vec::with_capacity(data.len());
    let root = build(data, &mut rows, 0, &mut nodes).expect("non-empty");
    Ok(MdTree {
        nodes,
        root,
        points: data.clone(),
    })
}

fn build(
    data: &DataSet,
    rows: &mut [usize],
    depth: usize,
    nodes: &mut Vec<TreeNode>,
) -> Option<usize> {
    if rows.is_empty() {
        return None;
    }
    let axis = depth % data.dim();
    let mid = rows.len() / 2;
    rows.select_nth_unstable_by(mid, |&a, &b| {
        data.row(a)[axis]
            .total_cmp(&data.row(b)[axis])
            .then(data.ids()[a].cmp(&data.ids()[b]))
    });
    let row = rows[mid];
    let size = rows.len();
    let (left, rest) = rows.split_at_mut(mid);
    let left = build(data, left, depth + 1, nodes);
    let right = build(data, &mut rest[1..], depth + 1, nodes);
    nodes.push(TreeNode {
        row,
        axis,
        left,
        right,
        size,
    });
    Some(nodes.len() - 1)
}

impl MdTree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn points(&self) -> &DataSet {
        &self.points
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &MdTree, n: Option<usize>) -> usize {
            n.map_or(0, |n| {
                1 + walk(t, t.nodes[n].left).max(walk(t, t.nodes[n].right))
            })
        }
        walk(self, Some(self.root))
    }

    /// Global ids in in-order traversal.
    pub fn in_order_ids(&self) -> Vec<usize> {
        fn walk(t: &MdTree, n: Option<usize>, out: &mut Vec<usize>) {
            if let Some(n) = n {
                walk(t, t.nodes[n].left, out);
                out.push(t.points.ids()[t.nodes[n].row]);
                walk(t, t.nodes[n].right, out);
            }
        }
        let mut out = Vec::with_capacity(self.len());
        walk(self, Some(self.root), &mut out);
        out
    }

    /// Global id of the point stored at `node` and its children.
    pub fn node(&self, node: usize) -> (usize, Option<usize>, Option<usize>) {
        let n = &self.nodes[node];
        (self.points.ids()[n.row], n.left, n.right)
    }

    /// Visits one node: reports its id when inside `q` and returns the
    /// children whose subtrees can intersect `q`.
    fn visit(&self, node: usize, q: &RangeQuery, hits: &mut Vec<usize>) -> [Option<usize>; 2] {
        let n = &self.nodes[node];
        let x = self.points.row(n.row);
        if q.contains(x) {
            hits.push(self.points.ids()[n.row]);
        }
        let split = x[n.axis];
        let left = n.left.filter(|_| q.lo[n.axis] <= split);
        let right = n.right.filter(|_| q.hi[n.axis] >= split);
        [left, right]
    }

    fn search_from(&self, start: usize, q: &RangeQuery, hits: &mut Vec<usize>) {
        let mut stack = vec![start];
        while let Some(node) = stack.pop() {
            stack.extend(self.visit(node, q, hits).into_iter().flatten());
        }
    }
}

/// Global ids of the points inside `q`, ascending. Children are explored
/// whether or not the node itself matches.
pub fn orthogonal_range_search(tree: &MdTree, q: &RangeQuery) -> Result<Vec<usize>> {
    check_query(tree, q)?;
    let mut hits = Vec::new();
    tree.search_from(tree.root, q, &mut hits);
    hits.sort_unstable();
    Ok(hits)
}

fn check_query(tree: &MdTree, q: &RangeQuery) -> Result<()> {
    if q.lo.len() != tree.dim() {
        return Err(Error::DimensionMismatch {
            expected: tree.dim(),
            got: q.lo.len(),
        });
    }
    Ok(())
}

/// Messages of the range-search protocol.
#[derive(Debug, Clone)]
pub enum RangeMsg {
    /// Master to slave: "start new sub-search" at a subtree.
    Start { node: usize, query: Arc<RangeQuery> },
    /// Slave to master: "necessary new sub-search" for a subtree it gives up.
    NeedSubSearch { node: usize, query: Arc<RangeQuery> },
    /// Slave to master: the ids found by a finished sub-search.
    Done { ids: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeSearchOutcome {
    pub ids: Vec<usize>,
    /// Sub-searches handed to slaves, including the root task.
    pub tasks: usize,
}

/// Subtrees smaller than this are searched in place rather than delegated.
pub const DEFAULT_DELEGATE_MIN: usize = 16;

/// Master side of the parallel range search. With a single rank the search
/// runs locally.
pub fn range_search_master(
    ctx: &NodeCtx,
    tree: &MdTree,
    q: &RangeQuery,
) -> Result<RangeSearchOutcome> {
    check_query(tree, q)?;
    if ctx.size() == 1 {
        let mut ids = Vec::new();
        tree.search_from(tree.root, q, &mut ids);
        ids.sort_unstable();
        return Ok(RangeSearchOutcome { ids, tasks: 0 });
    }
    let query = Arc::new(q.clone());
    let mut idle: VecDeque<usize> = (1..ctx.size()).collect();
    let mut waiting: VecDeque<usize> = VecDeque::new();
    let mut ids = Vec::new();
    let first = idle.pop_front().expect("at least one slave");
    ctx.send(
        first,
        RangeMsg::Start {
            node: tree.root,
            query: Arc::clone(&query),
        },
    )?;
    let mut outstanding = 1usize;
    let mut tasks = 1usize;
    while outstanding > 0 {
        match ctx.recv::<RangeMsg>()? {
            Received::Message {
                msg: RangeMsg::NeedSubSearch { node, .. },
                ..
            } => {
                outstanding += 1;
                tasks += 1;
                match idle.pop_front() {
                    Some(slave) => ctx.send(
                        slave,
                        RangeMsg::Start {
                            node,
                            query: Arc::clone(&query),
                        },
                    )?,
                    None => waiting.push_back(node),
                }
            }
            Received::Message {
                src,
                msg: RangeMsg::Done { ids: found },
            } => {
                ids.extend(found);
                outstanding -= 1;
                match waiting.pop_front() {
                    Some(node) => ctx.send(
                        src,
                        RangeMsg::Start {
                            node,
                            query: Arc::clone(&query),
                        },
                    )?,
                    None => idle.push_back(src),
                }
            }
            Received::Message {
                src,
                msg: RangeMsg::Start { .. },
            } => {
                return Err(CommError::Aborted(format!(
                    "rank {src} sent a start message to the master"
                ))
                .into())
            }
            Received::Closed => {
                return Err(CommError::Aborted("world closed during range search".into()).into())
            }
        }
    }
    ids.sort_unstable();
    Ok(RangeSearchOutcome { ids, tasks })
}

/// Slave loop: serves sub-searches until the world closes.
pub fn serve_range_searches(ctx: &NodeCtx, tree: &MdTree, delegate_min: usize) -> Result<()> {
    loop {
        match ctx.recv::<RangeMsg>()? {
            Received::Closed => return Ok(()),
            Received::Message {
                src,
                msg: RangeMsg::Start { node, query },
            } => {
                let mut hits = Vec::new();
                let mut stack = vec![node];
                while let Some(n) = stack.pop() {
                    match tree.visit(n, &query, &mut hits) {
                        [Some(l), Some(r)] if tree.nodes[r].size >= delegate_min => {
                            ctx.send(
                                src,
                                RangeMsg::NeedSubSearch {
                                    node: r,
                                    query: Arc::clone(&query),
                                },
                            )?;
                            stack.push(l);
                        }
                        children => stack.extend(children.into_iter().flatten()),
                    }
                }
                ctx.send(src, RangeMsg::Done { ids: hits })?;
            }
            Received::Message { src, .. } => {
                return Err(CommError::Aborted(format!(
                    "slave got an unexpected message from rank {src}"
                ))
                .into())
            }
        }
    }
}

/// Runs one range query over `world`: rank 0 as master, the rest as slaves.
pub fn parallel_range_search(
    world: &CommWorld,
    tree: &MdTree,
    q: &RangeQuery,
) -> Result<RangeSearchOutcome> {
    parallel_range_search_with(world, tree, q, DEFAULT_DELEGATE_MIN)
}

pub fn parallel_range_search_with(
    world: &CommWorld,
    tree: &MdTree,
    q: &RangeQuery,
    delegate_min: usize,
) -> Result<RangeSearchOutcome> {
    check_query(tree, q)?;
    let out = world.run(|ctx| {
        if ctx.is_root() {
            let r = range_search_master(ctx, tree, q);
            ctx.shutdown();
            r.map(Some)
        } else {
            serve_range_searches(ctx, tree, delegate_min).map(|_| None)
        }
    })?;
    Ok(out.into_root().expect("master result"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KWindowsParams {
    /// Number of windows.
    pub l: usize,
    /// Initial half-width of every window along every coordinate.
    pub a: f64,
    pub theta_move: f64,
    pub theta_enlarge: f64,
    pub theta_merge: f64,
    pub seed: u64,
    /// Explicit initial window centers; when absent `l` rows are sampled.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_centers: Option<Vec<Vec<f64>>>,
    pub delegate_min: usize,
}

impl KWindowsParams {
    pub fn new(l: usize, a: f64) -> Self {
        Self {
            l,
            a,
            theta_move: 0.01,
            theta_enlarge: 0.1,
            theta_merge: 0.2,
            seed: 0,
            initial_centers: None,
            delegate_min: DEFAULT_DELEGATE_MIN,
        }
    }

    pub fn validate(&self, n: usize, d: usize) -> Result<()> {
        if self.l == 0 || self.l > n {
            return Err(invalid(format!(
                "window count {} must be in 1..={n}",
                self.l
            )));
        }
        if !(self.a > 0.0) || !self.a.is_finite() {
            return Err(invalid("half-width must be positive"));
        }
        for (name, t) in [
            ("theta_move", self.theta_move),
            ("theta_enlarge", self.theta_enlarge),
            ("theta_merge", self.theta_merge),
        ] {
            if !(t > 0.0 && t < 1.0) {
                return Err(invalid(format!("{name} must lie in (0, 1)")));
            }
        }
        if let Some(c) = &self.initial_centers {
            if c.len() != self.l || c.iter().any(|r| r.len() != d) {
                return Err(invalid("initial centers must be l rows of dimension d"));
            }
        }
        Ok(())
    }
}

/// Axis-aligned window `[center - half_width, center + half_width]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Window {
    pub center: Vec<f64>,
    pub half_width: Vec<f64>,
    /// Global ids of the enclosed points.
    pub enclosed: Vec<usize>,
}

impl Window {
    pub fn query(&self) -> RangeQuery {
        let lo = self
            .center
            .iter()
            .zip(&self.half_width)
            .map(|(c, h)| c - h)
            .collect();
        let hi = self
            .center
            .iter()
            .zip(&self.half_width)
            .map(|(c, h)| c + h)
            .collect();
        RangeQuery { lo, hi }
    }

    pub fn volume(&self) -> f64 {
        self.half_width.iter().map(|h| 2.0 * h).product()
    }

    pub fn intersection_volume(&self, other: &Window) -> f64 {
        let (a, b) = (self.query(), other.query());
        (0..a.lo.len())
            .map(|t| (a.hi[t].min(b.hi[t]) - a.lo[t].max(b.lo[t])).max(0.0))
            .product()
    }
}

struct Searcher<'a, 'w> {
    ctx: &'a NodeCtx<'w>,
    tree: &'a MdTree,
    queries: usize,
    tasks: usize,
}

impl Searcher<'_, '_> {
    fn enclosed(&mut self, w: &Window) -> Result<Vec<usize>> {
        let out = range_search_master(self.ctx, self.tree, &w.query())?;
        self.queries += 1;
        self.tasks += out.tasks;
        Ok(out.ids)
    }

    /// Mean of the given points; ids index rows of the tree's dataset.
    fn mean(&self, ids: &[usize]) -> Vec<f64> {
        let d = self.tree.dim();
        let mut acc = ExactVec::zeros(d);
        for &id in ids {
            acc.add_scaled(0, self.tree.points.row(id), 1.0);
        }
        acc.values()
            .into_iter()
            .map(|s| s / ids.len() as f64)
            .collect()
    }

    /// Recenter on the enclosed mean while the enclosed count keeps growing
    /// by more than `theta`; a move that loses points is rejected.
    fn movement(&mut self, w: &mut Window, theta: f64) -> Result<()> {
        for _ in 0..=self.tree.len() {
            if w.enclosed.is_empty() {
                break;
            }
            let center = self.mean(&w.enclosed);
            let mut cand = Window {
                center,
                half_width: w.half_width.clone(),
                enclosed: Vec::new(),
            };
            cand.enclosed = self.enclosed(&cand)?;
            if cand.enclosed.len() < w.enclosed.len() {
                break;
            }
            let grew = cand.enclosed.len() as f64 > w.enclosed.len() as f64 * (1.0 + theta);
            *w = cand;
            if !grew {
                break;
            }
        }
        Ok(())
    }

    /// Grows one coordinate at a time; a growth is kept when the count rises
    /// by at least `theta_enlarge`, and movement is rerun after it.
    fn enlargement(&mut self, w: &mut Window, p: &KWindowsParams) -> Result<()> {
        for _ in 0..=self.tree.len() {
            let mut kept_any = false;
            for t in 0..w.half_width.len() {
                let mut trial = w.clone();
                trial.half_width[t] *= 1.0 + p.theta_enlarge;
                trial.enclosed = self.enclosed(&trial)?;
                let before = w.enclosed.len() as f64;
                let after = trial.enclosed.len() as f64;
                if after > before && after >= before * (1.0 + p.theta_enlarge) {
                    *w = trial;
                    self.movement(w, p.theta_move)?;
                    kept_any = true;
                }
            }
            if !kept_any {
                break;
            }
        }
        Ok(())
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Union of windows whose overlap exceeds `theta_merge` of the smaller
/// window's volume. Returns a cluster id per window, `0..` by lowest member.
pub fn merge_windows(windows: &[Window], theta_merge: f64) -> Vec<usize> {
    let l = windows.len();
    let mut parent: Vec<usize> = (0..l).collect();
    for i in 0..l {
        for j in i + 1..l {
            let smaller = windows[i].volume().min(windows[j].volume());
            if windows[i].intersection_volume(&windows[j]) > theta_merge * smaller {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut ids = vec![usize::MAX; l];
    let mut next = 0;
    let mut out = Vec::with_capacity(l);
    for i in 0..l {
        let r = find(&mut parent, i);
        if ids[r] == usize::MAX {
            ids[r] = next;
            next += 1;
        }
        out.push(ids[r]);
    }
    out
}

#[derive(Debug, Clone)]
pub struct KWindowsOutcome {
    pub partition: Partition,
    pub windows: Vec<Window>,
    pub window_cluster: Vec<usize>,
    pub range_queries: usize,
    pub delegated_tasks: usize,
}

/// Master side of k-windows; range queries go through the slave pool.
pub fn kwindows_master(
    ctx: &NodeCtx,
    tree: &MdTree,
    params: &KWindowsParams,
) -> Result<KWindowsOutcome> {
    let data = tree.points();
    let n = data.len();
    let d = data.dim();
    let centers: Vec<Vec<f64>> = match &params.initial_centers {
        Some(c) => c.clone(),
        None => initial_indices(n, params.l, params.seed)
            .into_iter()
            .map(|i| data.row(i).to_vec())
            .collect(),
    };
    let mut search = Searcher {
        ctx,
        tree,
        queries: 0,
        tasks: 0,
    };
    let mut windows = Vec::with_capacity(params.l);
    for center in centers {
        let mut w = Window {
            center,
            half_width: vec![params.a; d],
            enclosed: Vec::new(),
        };
        w.enclosed = search.enclosed(&w)?;
        search.movement(&mut w, params.theta_move)?;
        search.enlargement(&mut w, params)?;
        windows.push(w);
    }

    let window_cluster = merge_windows(&windows, params.theta_merge);
    let mut labels: Vec<Option<usize>> = vec![None; n];
    for (w, &cluster) in windows.iter().zip(&window_cluster) {
        for &id in &w.enclosed {
            labels[id].get_or_insert(cluster);
        }
    }
    Ok(KWindowsOutcome {
        partition: Partition::new(labels).compacted(),
        windows,
        window_cluster,
        range_queries: search.queries,
        delegated_tasks: search.tasks,
    })
}

/// Parallel k-windows: movement, enlargement, merging and labeling, with
/// every range query served by the world's slave ranks. Points outside all
/// windows are noise.
pub fn k_windows(
    world: &CommWorld,
    data: &DataSet,
    params: &KWindowsParams,
) -> Result<ClusterReport> {
    params.validate(data.len(), data.dim())?;
    // Row ids double as indices into the tree's dataset.
    let data = DataSet::new(data.values().to_vec(), data.dim())?;
    let t0 = Instant::now();
    let tree = build_mdtree(&data)?;
    let build = t0.elapsed();
    let out = world.run(|ctx| {
        if ctx.is_root() {
            let r = kwindows_master(ctx, &tree, params);
            ctx.shutdown();
            r.map(Some)
        } else {
            serve_range_searches(ctx, &tree, params.delegate_min).map(|_| None)
        }
    })?;
    let comm = out.total_comm();
    let wall = out.wall;
    let outcome = out.into_root().expect("master result");

    let mut report = ClusterReport::new(
        "kwindows",
        world.size(),
        data.len(),
        data.dim(),
        outcome.partition,
    );
    report.params = serde_json::to_value(params).unwrap_or_default();
    report.model = Some(json!({
        "windows": outcome.windows.iter().zip(&outcome.window_cluster).map(|(w, c)| json!({
            "center": w.center,
            "half_width": w.half_width,
            "count": w.enclosed.len(),
            "cluster": c,
        })).collect::<Vec<_>>(),
        "range_queries": outcome.range_queries,
        "delegated_tasks": outcome.delegated_tasks,
    }));
    report.timings_ms = Timings::new(build, wall, comm);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(v: &[f64]) -> DataSet {
        DataSet::new(v.to_vec(), 1).unwrap()
    }

    #[test]
    fn single_point_tree() {
        let t = build_mdtree(&line(&[4.0])).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.node(t.root()), (0, None, None));
    }

    #[test]
    fn three_point_median_split() {
        let t = build_mdtree(&line(&[3.0, 1.0, 2.0])).unwrap();
        let (root, l, r) = t.node(t.root());
        assert_eq!(root, 2);
        assert_eq!(t.node(l.unwrap()).0, 1);
        assert_eq!(t.node(r.unwrap()).0, 0);
    }

    #[test]
    fn duplicate_coordinates_stay_balanced() {
        let t = build_mdtree(&line(&[5.0; 100])).unwrap();
        assert!(t.depth() <= 8);
        let q = RangeQuery::new(vec![5.0], vec![5.0]).unwrap();
        assert_eq!(orthogonal_range_search(&t, &q).unwrap().len(), 100);
    }

    #[test]
    fn query_validation() {
        assert!(RangeQuery::new(vec![1.0], vec![0.0]).is_err());
        assert!(RangeQuery::new(vec![0.0], vec![1.0, 2.0]).is_err());
        let t = build_mdtree(&line(&[1.0])).unwrap();
        let q = RangeQuery::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert!(orthogonal_range_search(&t, &q).is_err());
    }

    #[test]
    fn whole_box_and_empty_box() {
        let data = DataSet::new(vec![0.0, 0.0, 1.0, 2.0, -3.0, 5.0, 4.0, 4.0], 2).unwrap();
        let t = build_mdtree(&data).unwrap();
        let all = RangeQuery::new(vec![-3.0, 0.0], vec![4.0, 5.0]).unwrap();
        assert_eq!(orthogonal_range_search(&t, &all).unwrap(), vec![0, 1, 2, 3]);
        let none = RangeQuery::new(vec![10.0, 10.0], vec![11.0, 11.0]).unwrap();
        assert!(orthogonal_range_search(&t, &none).unwrap().is_empty());
    }

    #[test]
    fn node_in_query_still_explores_children() {
        // Root (2) matches; both children match too.
        let t = build_mdtree(&line(&[1.0, 2.0, 3.0])).unwrap();
        let q = RangeQuery::new(vec![0.0], vec![5.0]).unwrap();
        assert_eq!(orthogonal_range_search(&t, &q).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn far_query_needs_only_the_root_task() {
        let data = DataSet::new((0..200).map(|i| i as f64 * 0.5).collect(), 2).unwrap();
        let t = build_mdtree(&data).unwrap();
        let q = RangeQuery::new(vec![1e3, 1e3], vec![1e3 + 1.0, 1e3 + 1.0]).unwrap();
        let out = parallel_range_search_with(&CommWorld::new(4).unwrap(), &t, &q, 1).unwrap();
        assert!(out.ids.is_empty());
        assert_eq!(out.tasks, 1);
    }

    #[test]
    fn merge_is_transitive() {
        let w = |c: f64| Window {
            center: vec![c],
            half_width: vec![1.0],
            enclosed: vec![],
        };
        // 0-1 and 1-2 overlap by half; 0-2 do not touch; 3 is far.
        let ws = [w(0.0), w(1.0), w(2.0), w(10.0)];
        assert_eq!(merge_windows(&ws, 0.2), vec![0, 0, 0, 1]);
        assert_eq!(merge_windows(&ws, 0.6), vec![0, 1, 2, 3]);
    }

    #[test]
    fn single_window_covers_blob() {
        let data = DataSet::new(vec![0.0, 0.0, 0.5, 0.2, -0.3, 0.4, 0.1, -0.6], 2).unwrap();
        let mut p = KWindowsParams::new(1, 2.0);
        p.seed = 3;
        let r = k_windows(&CommWorld::new(1).unwrap(), &data, &p).unwrap();
        assert_eq!(r.partition.noise_count(), 0);
        assert_eq!(r.partition.num_clusters(), 1);
    }
}
