//! Parallel clustering over a simulated message-passing machine.
//!
//! Every parallel algorithm is written against [`comm::NodeCtx`] and runs one
//! worker per rank inside [`comm::CommWorld::run`]. Reductions that feed
//! centroids or objectives use exact accumulation, so a run with any number
//! of nodes reproduces the single-node result bit-for-bit.
//!
//! | module | algorithms |
//! |---|---|
//! | [`kmeans`] | Lloyd baseline, parallel k-means |
//! | [`fcm`] | parallel fuzzy c-means |
//! | [`kwindows`] | multi-dimensional binary tree, orthogonal range search, parallel k-windows |
//! | [`pca`] | power iteration, local PCA, collective PCA, PCA-based distributed clustering |
//! | [`dbscan`] | DBSCAN, specific core points, REP k-means local models, distributed density clustering |
//! | [`pddp`] | parallel principal direction divisive partitioning and the PDDP/k-means hybrid |

// `!(x > 0.0)` is the NaN-rejecting form used by parameter checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod comm;
pub mod data;
pub mod dbscan;
pub mod error;
pub mod exact;
pub mod exec;
pub mod fcm;
pub mod kmeans;
pub mod kwindows;
pub mod partition;
pub mod pca;
pub mod pddp;
pub mod report;

pub use comm::{split_blocks, CommError, CommWorld, NodeCtx, Received, Shard};
pub use data::{
    generate_blobs, load_csv, squared_euclidean, write_csv, BlobSpec, Centroids, DataSet,
};
pub use error::{Error, Result};
pub use partition::{adjusted_rand_index, sse_objective, Partition};
pub use report::{ClusterReport, Timings};
