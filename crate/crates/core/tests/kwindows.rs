use proptest::prelude::*;

use parclust::data::generate_blobs_with_centers;
use parclust::kwindows::{
    build_mdtree, k_windows, merge_windows, orthogonal_range_search, parallel_range_search,
    parallel_range_search_with, KWindowsParams, RangeQuery, Window,
};
use parclust::{BlobSpec, CommWorld, DataSet};

fn brute(data: &DataSet, q: &RangeQuery) -> Vec<usize> {
    (0..data.len())
        .filter(|&i| q.contains(data.row(i)))
        .collect()
}

fn world(p: usize) -> CommWorld {
    CommWorld::new(p).unwrap()
}

fn points(max_n: usize, dim: usize, grid: bool) -> impl Strategy<Value = DataSet> {
    prop::collection::vec(0.0f64..10.0, dim..=max_n * dim).prop_map(move |mut v| {
        v.truncate(v.len() / dim * dim);
        if grid {
            v.iter_mut().for_each(|x| *x = x.floor());
        }
        DataSet::new(v, dim).unwrap()
    })
}

fn query(dim: usize) -> impl Strategy<Value = RangeQuery> {
    prop::collection::vec((-1.0f64..11.0, -1.0f64..11.0), dim).prop_map(|b| {
        let (lo, hi) = b.into_iter().map(|(a, c)| (a.min(c), a.max(c))).unzip();
        RangeQuery::new(lo, hi).unwrap()
    })
}

#[test]
fn whole_box_and_empty_box() {
    let data = DataSet::new(vec![0.0, 0.0, 1.0, 5.0, 3.0, 2.0, 4.0, 4.0], 2).unwrap();
    let tree = build_mdtree(&data).unwrap();
    let all = RangeQuery::new(vec![0.0, 0.0], vec![4.0, 5.0]).unwrap();
    assert_eq!(
        orthogonal_range_search(&tree, &all).unwrap(),
        vec![0, 1, 2, 3]
    );
    let none = RangeQuery::new(vec![20.0, 20.0], vec![30.0, 30.0]).unwrap();
    assert!(orthogonal_range_search(&tree, &none).unwrap().is_empty());
    let out = parallel_range_search(&world(4), &tree, &none).unwrap();
    assert!(out.ids.is_empty());
    assert!(out.tasks <= 1);
}

#[test]
fn inverted_query_rejected() {
    assert!(RangeQuery::new(vec![1.0], vec![0.0]).is_err());
}

#[test]
fn one_blob_one_window() {
    let spec = BlobSpec {
        seed: 3,
        clusters: 1,
        per_cluster: 80,
        dim: 2,
        spread: 1.0,
        separation: 1.0,
    };
    let (data, _, centers) = generate_blobs_with_centers(&spec).unwrap();
    let params = KWindowsParams {
        initial_centers: Some(vec![centers.row(0).to_vec()]),
        ..KWindowsParams::new(1, 8.0)
    };
    let r = k_windows(&world(3), &data, &params).unwrap();
    assert_eq!(r.partition.noise_count(), 0);
    assert_eq!(r.partition.num_clusters(), 1);
}

#[test]
fn windows_independent_of_p() {
    let spec = BlobSpec {
        seed: 9,
        clusters: 3,
        per_cluster: 60,
        dim: 2,
        spread: 1.0,
        separation: 10.0,
    };
    let (data, _, _) = generate_blobs_with_centers(&spec).unwrap();
    let params = KWindowsParams {
        seed: 4,
        ..KWindowsParams::new(5, 2.0)
    };
    let base = k_windows(&world(1), &data, &params).unwrap();
    for p in [2, 4, 8] {
        assert_eq!(
            k_windows(&world(p), &data, &params).unwrap().partition,
            base.partition
        );
    }
}

#[test]
fn too_many_windows_rejected() {
    let data = DataSet::new(vec![0.0, 1.0], 1).unwrap();
    assert!(k_windows(&world(1), &data, &KWindowsParams::new(3, 1.0)).is_err());
}

#[test]
fn merging_is_transitive() {
    let w = |c: f64| Window {
        center: vec![c],
        half_width: vec![1.0],
        enclosed: Vec::new(),
    };
    // 0 overlaps 1, 1 overlaps 2, 0 and 2 are disjoint, 3 is alone.
    let labels = merge_windows(&[w(0.0), w(1.5), w(3.0), w(10.0)], 0.2);
    assert_eq!(labels[0], labels[1]);
    assert_eq!(labels[1], labels[2]);
    assert_ne!(labels[0], labels[3]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tree_holds_every_point_once(data in (1usize..=4).prop_flat_map(|d| points(300, d, false))) {
        let tree = build_mdtree(&data).unwrap();
        let mut ids = tree.in_order_ids();
        ids.sort_unstable();
        prop_assert_eq!(ids, (0..data.len()).collect::<Vec<_>>());
        let bound = (data.len() as f64).log2().ceil() as usize + 1;
        prop_assert!(tree.depth() <= bound);
    }

    #[test]
    fn serial_search_is_brute_force(
        (data, q) in (1usize..=4, any::<bool>())
            .prop_flat_map(|(d, grid)| (points(300, d, grid), query(d)))
    ) {
        let tree = build_mdtree(&data).unwrap();
        prop_assert_eq!(orthogonal_range_search(&tree, &q).unwrap(), brute(&data, &q));
    }

    #[test]
    fn parallel_search_is_serial(
        (data, q) in (1usize..=3).prop_flat_map(|d| (points(200, d, false), query(d))),
        p in prop::sample::select(vec![2usize, 3, 8]),
        delegate_min in 1usize..20,
    ) {
        let tree = build_mdtree(&data).unwrap();
        let serial = orthogonal_range_search(&tree, &q).unwrap();
        let out = parallel_range_search_with(&world(p), &tree, &q, delegate_min).unwrap();
        prop_assert_eq!(out.ids, serial);
    }
}
