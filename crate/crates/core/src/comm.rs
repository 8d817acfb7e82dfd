//! In-process simulation of a P-node message-passing machine.
//!
//! [`CommWorld::run`] starts one OS thread per rank and hands each a
//! [`NodeCtx`]. Collectives (`barrier`, `broadcast`, `gather`, `allgather`,
//! `allreduce_sum`, `allreduce_exact`) must be entered by every rank in the
//! same order; a rank that enters a different collective, passes a different
//! root or vector length, or returns while others wait, aborts the run
//! instead of deadlocking. Point-to-point messages are FIFO per ordered pair.

use std::any::Any;
use std::cell::Cell;
use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Condvar, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::data::DataSet;
use crate::error::{Error, Result};
use crate::exact::ExactVec;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CommError {
    #[error("world size must be at least 1")]
    EmptyWorld,
    #[error("collective aborted: {0}")]
    Aborted(String),
    #[error("rank {0} left the world while others were waiting")]
    PeerExited(usize),
    #[error("rank {0} panicked: {1}")]
    RankPanicked(usize, String),
    #[error("invalid destination rank {dst} (world size {size})")]
    BadDestination { dst: usize, size: usize },
    #[error("received message of unexpected type from rank {0}")]
    UnexpectedMessage(usize),
    #[error("cannot split {rows} rows over {parts} nodes")]
    BadSplit { rows: usize, parts: usize },
}

/// One rank's contiguous block of the global dataset.
#[derive(Debug, Clone)]
pub struct Shard {
    pub rank: usize,
    /// Global id of the first row.
    pub start: usize,
    /// Row count of the whole dataset.
    pub total: usize,
    pub points: DataSet,
}

impl Shard {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn end(&self) -> usize {
        self.start + self.len()
    }

    pub fn owns(&self, global_id: usize) -> bool {
        (self.start..self.end()).contains(&global_id)
    }

    /// Local row indices of the sorted global ids that fall in this shard.
    pub fn local_rows<'a>(&self, sorted_ids: &'a [usize]) -> impl Iterator<Item = usize> + 'a {
        let lo = sorted_ids.partition_point(|&g| g < self.start);
        let hi = sorted_ids.partition_point(|&g| g < self.start + self.points.len());
        let start = self.start;
        sorted_ids[lo..hi].iter().map(move |&g| g - start)
    }
}

/// Splits rows into `parts` contiguous blocks whose sizes differ by at most one.
/// The first `n % parts` blocks get the extra row.
pub fn split_blocks(data: &DataSet, parts: usize) -> Result<Vec<Shard>> {
    let n = data.len();
    if parts == 0 || parts > n {
        return Err(CommError::BadSplit { rows: n, parts }.into());
    }
    let base = n / parts;
    let extra = n % parts;
    let mut shards = Vec::with_capacity(parts);
    let mut start = 0;
    for rank in 0..parts {
        let len = base + usize::from(rank < extra);
        let rows: Vec<usize> = (start..start + len).collect();
        shards.push(Shard {
            rank,
            start,
            total: n,
            points: data.select(&rows),
        });
        start += len;
    }
    Ok(shards)
}

/// Handle describing a world of `size` ranks. Each [`run`](Self::run) gets
/// fresh mailboxes and collective state.
#[derive(Debug, Clone, Copy)]
pub struct CommWorld {
    size: usize,
}

/// Per-rank results of a run plus timing.
#[derive(Debug)]
pub struct RunOutput<R> {
    pub results: Vec<R>,
    /// Time each rank spent inside collectives and blocking receives.
    pub comm_time: Vec<Duration>,
    pub wall: Duration,
}

impl<R> RunOutput<R> {
    pub fn total_comm(&self) -> Duration {
        self.comm_time.iter().sum()
    }

    /// Result of rank 0.
    pub fn into_root(self) -> R {
        self.results.into_iter().next().expect("world has a rank 0")
    }
}

impl CommWorld {
    pub fn new(size: usize) -> std::result::Result<Self, CommError> {
        if size == 0 {
            return Err(CommError::EmptyWorld);
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Runs `body` on every rank concurrently and waits for all of them.
    pub fn run<R, F>(&self, body: F) -> Result<RunOutput<R>>
    where
        R: Send,
        F: Fn(&NodeCtx) -> Result<R> + Sync,
    {
        let shared = Shared::new(self.size);
        let started = Instant::now();
        let outcomes: Vec<std::thread::Result<(Result<R>, Duration)>> =
            std::thread::scope(|scope| {
                let handles: Vec<_> = (0..self.size)
                    .map(|rank| {
                        let shared = &shared;
                        let body = &body;
                        std::thread::Builder::new()
                            .name(format!("rank-{rank}"))
                            .spawn_scoped(scope, move || {
                                let _guard = ExitGuard { shared, rank };
                                let ctx = NodeCtx {
                                    rank,
                                    shared,
                                    comm_time: Cell::new(Duration::ZERO),
                                };
                                let out = body(&ctx);
                                (out, ctx.comm_time.get())
                            })
                            .expect("spawn rank thread")
                    })
                    .collect();
                handles.into_iter().map(|h| h.join()).collect()
            });
        let wall = started.elapsed();

        let mut results = Vec::with_capacity(self.size);
        let mut comm_time = Vec::with_capacity(self.size);
        let mut errors: Vec<Error> = Vec::new();
        for (rank, outcome) in outcomes.into_iter().enumerate() {
            match outcome {
                Ok((Ok(r), t)) => {
                    results.push(r);
                    comm_time.push(t);
                }
                Ok((Err(e), _)) => errors.push(e),
                Err(panic) => {
                    let msg = panic
                        .downcast_ref::<&str>()
                        .map(|s| s.to_string())
                        .or_else(|| panic.downcast_ref::<String>().cloned())
                        .unwrap_or_else(|| "unknown panic".into());
                    errors.push(CommError::RankPanicked(rank, msg).into());
                }
            }
        }
        if !errors.is_empty() {
            // Report the root cause rather than the peers it took down.
            errors.sort_by_key(|e| match e {
                Error::Comm(CommError::PeerExited(_)) => 3,
                Error::Comm(CommError::Aborted(_)) => 2,
                Error::Comm(CommError::RankPanicked(..)) => 0,
                _ => 1,
            });
            return Err(errors.swap_remove(0));
        }
        Ok(RunOutput {
            results,
            comm_time,
            wall,
        })
    }
}

struct Slot {
    op: &'static str,
    root: Option<usize>,
    len: Option<usize>,
    payload: Box<dyn Any + Send>,
}

struct CollState {
    arrived: usize,
    departed: usize,
    draining: bool,
    slots: Vec<Option<Slot>>,
    exited: Vec<bool>,
    failure: Option<CommError>,
}

struct Mailbox {
    queue: Mutex<VecDeque<(usize, Box<dyn Any + Send>)>>,
    ready: Condvar,
}

struct Shared {
    size: usize,
    coll: Mutex<CollState>,
    coll_cv: Condvar,
    mailboxes: Vec<Mailbox>,
    closed: AtomicBool,
}

impl Shared {
    fn new(size: usize) -> Self {
        Self {
            size,
            coll: Mutex::new(CollState {
                arrived: 0,
                departed: 0,
                draining: false,
                slots: (0..size).map(|_| None).collect(),
                exited: vec![false; size],
                failure: None,
            }),
            coll_cv: Condvar::new(),
            mailboxes: (0..size)
                .map(|_| Mailbox {
                    queue: Mutex::new(VecDeque::new()),
                    ready: Condvar::new(),
                })
                .collect(),
            closed: AtomicBool::new(false),
        }
    }

    fn lock(&self) -> MutexGuard<'_, CollState> {
        self.coll.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn wake_mailboxes(&self) {
        for mb in &self.mailboxes {
            let _q = mb.queue.lock().unwrap_or_else(|p| p.into_inner());
            mb.ready.notify_all();
        }
    }

    fn all_others_exited(&self, rank: usize) -> bool {
        let st = self.lock();
        st.exited
            .iter()
            .enumerate()
            .all(|(r, &gone)| r == rank || gone)
    }
}

struct ExitGuard<'a> {
    shared: &'a Shared,
    rank: usize,
}

impl Drop for ExitGuard<'_> {
    fn drop(&mut self) {
        let mut st = self.shared.lock();
        st.exited[self.rank] = true;
        drop(st);
        self.shared.coll_cv.notify_all();
        self.shared.wake_mailboxes();
    }
}

/// Outcome of a blocking receive.
#[derive(Debug, PartialEq)]
pub enum Received<T> {
    Message {
        src: usize,
        msg: T,
    },
    /// The world was shut down, or every other rank has exited.
    Closed,
}

/// A rank's endpoint into the running world.
pub struct NodeCtx<'w> {
    rank: usize,
    shared: &'w Shared,
    comm_time: Cell<Duration>,
}

impl NodeCtx<'_> {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn size(&self) -> usize {
        self.shared.size
    }

    pub fn is_root(&self) -> bool {
        self.rank == 0
    }

    /// Time this rank has spent communicating so far.
    pub fn comm_time(&self) -> Duration {
        self.comm_time.get()
    }

    fn timed<T>(&self, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.comm_time.set(self.comm_time.get() + t.elapsed());
        out
    }

    /// Core of every collective: deposit a slot, wait for all ranks, check
    /// they agree on the operation, then let `read` see every slot.
    fn collective<T, R>(
        &self,
        op: &'static str,
        root: Option<usize>,
        len: Option<usize>,
        payload: T,
        read: impl FnOnce(&[Option<Slot>]) -> R,
    ) -> std::result::Result<R, CommError>
    where
        T: Send + 'static,
    {
        let shared = self.shared;
        let size = shared.size;
        if let Some(r) = root {
            if r >= size {
                return Err(CommError::Aborted(format!(
                    "{op}: root {r} outside world of {size}"
                )));
            }
        }
        let mut st = shared.lock();
        while st.draining && st.failure.is_none() {
            st = shared.coll_cv.wait(st).unwrap_or_else(|p| p.into_inner());
        }
        if let Some(f) = &st.failure {
            return Err(f.clone());
        }
        st.slots[self.rank] = Some(Slot {
            op,
            root,
            len,
            payload: Box::new(payload),
        });
        st.arrived += 1;
        if st.arrived == size {
            if let Some(msg) = mismatch(&st.slots) {
                st.failure = Some(CommError::Aborted(msg));
            }
            st.draining = true;
            shared.coll_cv.notify_all();
        } else {
            loop {
                if st.draining || st.failure.is_some() {
                    break;
                }
                if let Some(gone) = (0..size).find(|&r| st.exited[r]) {
                    st.failure = Some(CommError::PeerExited(gone));
                    shared.coll_cv.notify_all();
                    break;
                }
                st = shared.coll_cv.wait(st).unwrap_or_else(|p| p.into_inner());
            }
        }
        if let Some(f) = &st.failure {
            return Err(f.clone());
        }
        let out = read(&st.slots);
        st.departed += 1;
        if st.departed == size {
            st.slots.iter_mut().for_each(|s| *s = None);
            st.arrived = 0;
            st.departed = 0;
            st.draining = false;
            shared.coll_cv.notify_all();
        }
        Ok(out)
    }

    pub fn barrier(&self) -> Result<()> {
        self.timed(|| self.collective("barrier", None, None, (), |_| ()))?;
        Ok(())
    }

    /// Every rank receives the root's value; only the root passes `Some`.
    pub fn broadcast<T>(&self, root: usize, value: Option<T>) -> Result<T>
    where
        T: Clone + Send + 'static,
    {
        if self.rank == root && value.is_none() {
            return Err(CommError::Aborted("broadcast root supplied no value".into()).into());
        }
        let out = self.timed(|| {
            self.collective("broadcast", Some(root), None, value, |slots| {
                payload::<Option<T>>(slots, root).clone()
            })
        })?;
        Ok(out.expect("root value checked above"))
    }

    /// The root receives every rank's value in rank order; others get an
    /// empty vector.
    pub fn gather<T>(&self, root: usize, value: T) -> Result<Vec<T>>
    where
        T: Clone + Send + 'static,
    {
        let me = self.rank;
        Ok(self.timed(|| {
            self.collective("gather", Some(root), None, value, |slots| {
                if me == root {
                    (0..slots.len())
                        .map(|r| payload::<T>(slots, r).clone())
                        .collect()
                } else {
                    Vec::new()
                }
            })
        })?)
    }

    /// Every rank receives every rank's value in rank order.
    pub fn allgather<T>(&self, value: T) -> Result<Vec<T>>
    where
        T: Clone + Send + 'static,
    {
        Ok(self.timed(|| {
            self.collective("allgather", None, None, value, |slots| {
                (0..slots.len())
                    .map(|r| payload::<T>(slots, r).clone())
                    .collect()
            })
        })?)
    }

    /// Element-wise sum folded in rank order: `((v0 + v1) + v2) + ...`.
    pub fn allreduce_sum(&self, local: &[f64]) -> Result<Vec<f64>> {
        Ok(self.timed(|| {
            self.collective(
                "allreduce_sum",
                None,
                Some(local.len()),
                local.to_vec(),
                |slots| {
                    let mut acc = payload::<Vec<f64>>(slots, 0).clone();
                    for r in 1..slots.len() {
                        for (a, b) in acc.iter_mut().zip(payload::<Vec<f64>>(slots, r)) {
                            *a += *b;
                        }
                    }
                    acc
                },
            )
        })?)
    }

    /// Element-wise exact sum of the ranks' accumulators, correctly rounded.
    /// The result does not depend on how terms were spread over ranks.
    pub fn allreduce_exact(&self, local: &ExactVec) -> Result<Vec<f64>> {
        Ok(self.timed(|| {
            self.collective(
                "allreduce_exact",
                None,
                Some(local.len()),
                local.clone(),
                |slots| {
                    let mut acc = payload::<ExactVec>(slots, 0).clone();
                    for r in 1..slots.len() {
                        acc.merge(payload::<ExactVec>(slots, r));
                    }
                    acc.values()
                },
            )
        })?)
    }

    /// Queues `msg` for `dst`.
    pub fn send<T: Send + 'static>(&self, dst: usize, msg: T) -> Result<()> {
        let size = self.shared.size;
        if dst >= size || dst == self.rank {
            return Err(CommError::BadDestination { dst, size }.into());
        }
        let mb = &self.shared.mailboxes[dst];
        let mut q = mb.queue.lock().unwrap_or_else(|p| p.into_inner());
        q.push_back((self.rank, Box::new(msg)));
        mb.ready.notify_all();
        Ok(())
    }

    /// Blocks until a message arrives or the world closes.
    pub fn recv<T: 'static>(&self) -> Result<Received<T>> {
        self.timed(|| {
            let mb = &self.shared.mailboxes[self.rank];
            let mut q = mb.queue.lock().unwrap_or_else(|p| p.into_inner());
            loop {
                if self.shared.closed.load(Ordering::Acquire) {
                    return Ok(Received::Closed);
                }
                if let Some((src, boxed)) = q.pop_front() {
                    return match boxed.downcast::<T>() {
                        Ok(msg) => Ok(Received::Message { src, msg: *msg }),
                        Err(_) => Err(CommError::UnexpectedMessage(src).into()),
                    };
                }
                drop(q);
                if self.shared.all_others_exited(self.rank) {
                    return Ok(Received::Closed);
                }
                q = mb.queue.lock().unwrap_or_else(|p| p.into_inner());
                if q.is_empty() && !self.shared.closed.load(Ordering::Acquire) {
                    // Woken by send, shutdown, or a peer exiting.
                    q = mb
                        .ready
                        .wait_timeout(q, Duration::from_millis(50))
                        .unwrap_or_else(|p| p.into_inner())
                        .0;
                }
            }
        })
    }

    /// Closes every mailbox; pending and future receives return `Closed`.
    pub fn shutdown(&self) {
        self.shared.closed.store(true, Ordering::Release);
        self.shared.wake_mailboxes();
    }
}

fn payload<T: 'static>(slots: &[Option<Slot>], rank: usize) -> &T {
    slots[rank]
        .as_ref()
        .and_then(|s| s.payload.downcast_ref::<T>())
        .expect("collective payload type agreed by op name")
}

fn mismatch(slots: &[Option<Slot>]) -> Option<String> {
    let first = slots[0].as_ref()?;
    for (rank, slot) in slots.iter().enumerate().skip(1) {
        let slot = slot.as_ref()?;
        if slot.op != first.op {
            return Some(format!(
                "rank 0 entered {} but rank {rank} entered {}",
                first.op, slot.op
            ));
        }
        if slot.root != first.root {
            return Some(format!(
                "{}: rank 0 used root {:?} but rank {rank} used {:?}",
                first.op, first.root, slot.root
            ));
        }
        if slot.len != first.len {
            return Some(format!(
                "{}: rank 0 contributed length {:?} but rank {rank} contributed {:?}",
                first.op, first.len, slot.len
            ));
        }
        if (*slot.payload).type_id() != (*first.payload).type_id() {
            return Some(format!("{}: payload types differ at rank {rank}", first.op));
        }
    }
    None
}
