use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use proptest::prelude::*;

use parclust::exact::ExactVec;
use parclust::{split_blocks, CommError, CommWorld, DataSet, Error, Received};

fn run<R: Send>(
    p: usize,
    f: impl Fn(&parclust::NodeCtx) -> parclust::Result<R> + Sync,
) -> parclust::Result<Vec<R>> {
    CommWorld::new(p).unwrap().run(f).map(|out| out.results)
}

/// Runs `f` on a helper thread and fails if it takes longer than `limit`.
fn within<T: Send + 'static>(limit: Duration, f: impl FnOnce() -> T + Send + 'static) -> T {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let _ = tx.send(f());
    });
    rx.recv_timeout(limit).expect("run did not finish in time")
}

#[test]
fn split_examples() {
    let data = DataSet::new((0..10).map(f64::from).collect(), 1).unwrap();
    let sizes = |p| {
        split_blocks(&data, p)
            .unwrap()
            .iter()
            .map(|s| s.len())
            .collect::<Vec<_>>()
    };
    assert_eq!(sizes(1), vec![10]);
    assert_eq!(sizes(3), vec![4, 3, 3]);
    let seven = DataSet::new(vec![0.0; 7], 1).unwrap();
    assert!(split_blocks(&seven, 7)
        .unwrap()
        .iter()
        .all(|s| s.len() == 1));
    assert!(split_blocks(&seven, 8).is_err());
    assert!(split_blocks(&seven, 0).is_err());
}

#[test]
fn broadcast_and_gather() {
    let out = run(4, |ctx| {
        let v = ctx.broadcast(0, ctx.is_root().then(|| vec![1.5, 2.5]))?;
        let g = ctx.gather(0, ctx.rank() * 10)?;
        Ok((v, g))
    })
    .unwrap();
    for (rank, (v, g)) in out.into_iter().enumerate() {
        assert_eq!(v, vec![1.5, 2.5]);
        if rank == 0 {
            assert_eq!(g, vec![0, 10, 20, 30]);
        } else {
            assert!(g.is_empty());
        }
    }
    assert_eq!(run(1, |ctx| ctx.broadcast(0, Some(7))).unwrap(), vec![7]);
    assert_eq!(run(1, |ctx| ctx.gather(0, 'a')).unwrap(), vec![vec!['a']]);
}

#[test]
fn allreduce_small_sum() {
    let out = run(3, |ctx| ctx.allreduce_sum(&[(ctx.rank() + 1) as f64])).unwrap();
    assert!(out.iter().all(|v| v == &vec![6.0]));
    assert_eq!(
        run(1, |ctx| ctx.allreduce_sum(&[0.1, 0.2])).unwrap(),
        vec![vec![0.1, 0.2]]
    );
}

#[test]
fn mismatched_root_aborts() {
    let err = within(Duration::from_secs(10), || {
        run(2, |ctx| ctx.broadcast(ctx.rank(), Some(1u8))).unwrap_err()
    });
    assert!(matches!(err, Error::Comm(CommError::Aborted(_))), "{err:?}");
}

#[test]
fn mismatched_length_aborts() {
    let err = within(Duration::from_secs(10), || {
        run(3, |ctx| ctx.allreduce_sum(&vec![1.0; 2 + ctx.rank()])).unwrap_err()
    });
    assert!(matches!(err, Error::Comm(CommError::Aborted(_))), "{err:?}");
}

#[test]
fn rank_skipping_a_collective_does_not_hang() {
    let err = within(Duration::from_secs(10), || {
        run(4, |ctx| {
            if ctx.rank() != 2 {
                ctx.barrier()?;
            }
            Ok(())
        })
        .unwrap_err()
    });
    assert!(
        matches!(err, Error::Comm(CommError::PeerExited(2))),
        "{err:?}"
    );
}

#[test]
fn panicking_rank_is_reported() {
    let err = within(Duration::from_secs(10), || {
        run(3, |ctx| {
            if ctx.rank() == 1 {
                panic!("boom");
            }
            ctx.barrier()
        })
        .unwrap_err()
    });
    assert!(
        matches!(err, Error::Comm(CommError::RankPanicked(1, _))),
        "{err:?}"
    );
}

#[test]
fn point_to_point_is_fifo() {
    let out = run(2, |ctx| {
        if ctx.rank() == 0 {
            ctx.send(1, "m1".to_string())?;
            ctx.send(1, "m2".to_string())?;
            Ok(Vec::new())
        } else {
            let mut got = Vec::new();
            for _ in 0..2 {
                match ctx.recv::<String>()? {
                    Received::Message { src, msg } => got.push((src, msg)),
                    Received::Closed => panic!("closed early"),
                }
            }
            Ok(got)
        }
    })
    .unwrap();
    assert_eq!(out[1], vec![(0, "m1".to_string()), (0, "m2".to_string())]);
}

#[test]
fn recv_after_shutdown_is_closed() {
    let out = within(Duration::from_secs(10), || {
        run(3, |ctx| {
            if ctx.is_root() {
                ctx.barrier()?;
                ctx.shutdown();
                Ok(true)
            } else {
                ctx.barrier()?;
                Ok(ctx.recv::<u32>()? == Received::Closed)
            }
        })
        .unwrap()
    });
    assert!(out.iter().all(|&closed| closed));
}

#[test]
fn self_send_rejected() {
    let err = run(2, |ctx| ctx.send(ctx.rank(), 1u8)).unwrap_err();
    assert!(matches!(err, Error::Comm(CommError::BadDestination { .. })));
}

#[test]
fn same_collective_sequence_terminates() {
    within(Duration::from_secs(30), || {
        run(8, |ctx| {
            for i in 0..200 {
                ctx.allreduce_sum(&[i as f64])?;
                ctx.allgather(ctx.rank())?;
                ctx.broadcast(i % 8, (ctx.rank() == i % 8).then_some(i))?;
            }
            Ok(())
        })
        .unwrap()
    });
}

fn vectors(p: usize, len: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-1e6f64..1e6, len), p)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn allreduce_is_serial_rank_fold(
        (p, locals) in (1usize..=16, 1usize..=4096).prop_flat_map(|(p, len)| (Just(p), vectors(p, len)))
    ) {
        let expected = locals[1..].iter().fold(locals[0].clone(), |mut acc, v| {
            acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
            acc
        });
        let out = run(p, |ctx| ctx.allreduce_sum(&locals[ctx.rank()])).unwrap();
        for v in out {
            prop_assert!(v.iter().zip(&expected).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }

    #[test]
    fn exact_allreduce_ignores_grouping(
        values in prop::collection::vec(-1e12f64..1e12, 1..400),
        p in 1usize..=8,
    ) {
        let p = p.min(values.len());
        let chunk = values.len().div_ceil(p);
        let parts: Vec<&[f64]> = values.chunks(chunk).collect();
        let serial = parclust::exact::exact_sum(&values);
        let out = run(parts.len(), |ctx| {
            let mut acc = ExactVec::zeros(1);
            parts[ctx.rank()].iter().for_each(|&v| acc.add_at(0, v));
            ctx.allreduce_exact(&acc)
        })
        .unwrap();
        prop_assert!(out.iter().all(|v| v[0].to_bits() == serial.to_bits()));
    }

    #[test]
    fn split_is_balanced_cover(n in 1usize..=10_000, p in 1usize..=32) {
        prop_assume!(p <= n);
        let data = DataSet::new((0..n).map(|i| i as f64).collect(), 1).unwrap();
        let shards = split_blocks(&data, p).unwrap();
        prop_assert_eq!(shards.len(), p);
        let ids: Vec<usize> = shards.iter().flat_map(|s| s.points.ids().to_vec()).collect();
        prop_assert_eq!(ids, (0..n).collect::<Vec<_>>());
        let max = shards.iter().map(|s| s.len()).max().unwrap();
        let min = shards.iter().map(|s| s.len()).min().unwrap();
        prop_assert!(max - min <= 1 && min >= 1);
    }
}
