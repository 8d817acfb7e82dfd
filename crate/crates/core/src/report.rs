//! Machine-readable run summaries.

use std::time::Duration;

use serde::{Serialize, Serializer};

use crate::data::Centroids;
use crate::partition::Partition;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Timings {
    pub split: f64,
    pub compute: f64,
    pub comm: f64,
}

impl Timings {
    pub fn new(split: Duration, compute: Duration, comm: Duration) -> Self {
        let ms = |d: Duration| d.as_secs_f64() * 1e3;
        Self {
            split: ms(split),
            compute: ms(compute),
            comm: ms(comm),
        }
    }
}

/// Result of one algorithm run. Serializes to the stable JSON report schema,
/// with noise labels written as `-1`.
#[derive(Debug, Clone, Serialize)]
pub struct ClusterReport {
    pub algo: String,
    pub p: usize,
    pub params: serde_json::Value,
    pub n: usize,
    pub d: usize,
    #[serde(rename = "labels", serialize_with = "signed_labels")]
    pub partition: Partition,
    #[serde(
        skip_serializing_if = "Option::is_none",
        serialize_with = "centroid_rows"
    )]
    pub centroids: Option<Centroids>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    pub timings_ms: Timings,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ari_vs_baseline: Option<f64>,
    /// Objective of the seeding stage, for cascaded algorithms.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed_j: Option<f64>,
    /// Algorithm-specific model summary.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<serde_json::Value>,
    /// Objective after every accepted iteration.
    #[serde(skip)]
    pub j_history: Vec<f64>,
}

impl ClusterReport {
    pub fn new(algo: &str, p: usize, n: usize, d: usize, partition: Partition) -> Self {
        Self {
            algo: algo.to_string(),
            p,
            params: serde_json::Value::Null,
            n,
            d,
            partition,
            centroids: None,
            j: None,
            iterations: None,
            timings_ms: Timings::default(),
            ari_vs_baseline: None,
            seed_j: None,
            model: None,
            j_history: Vec::new(),
        }
    }
}

fn signed_labels<S: Serializer>(p: &Partition, s: S) -> Result<S::Ok, S::Error> {
    p.to_signed().serialize(s)
}

fn centroid_rows<S: Serializer>(c: &Option<Centroids>, s: S) -> Result<S::Ok, S::Error> {
    c.as_ref().map(Centroids::to_rows).serialize(s)
}
