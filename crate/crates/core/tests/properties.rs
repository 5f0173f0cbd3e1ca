use std::collections::HashSet;
use std::time::Duration;

use proptest::prelude::*;

use fcm_core::collectives::binomial_schedule;
use fcm_core::pgas::{DimDist, DistMap, Extent, GridOrder};
use fcm_core::transport::{self, DestLocator, Envelope, Payload, TransportConfig};
use fcm_core::DenseArray;

fn dims_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0usize..5, 0..=4)
}

fn dense<T: fcm_core::Element + std::fmt::Debug>(
    elem: impl Strategy<Value = T> + Clone,
) -> impl Strategy<Value = DenseArray<T>> {
    dims_strategy().prop_flat_map(move |dims| {
        let n: usize = dims.iter().product();
        prop::collection::vec(elem.clone(), n).prop_map(move |data| DenseArray::from_vec(dims.clone(), data).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn f64_frames_round_trip(a in dense(any::<f64>())) {
        let p = Payload::F64(a);
        let back = Payload::decode(&p.encode()).unwrap();
        // compare bit patterns so NaNs count as equal
        let bits = |p: &Payload| match p {
            Payload::F64(a) => a.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            _ => unreachable!(),
        };
        prop_assert_eq!(bits(&back), bits(&p));
        match (&back, &p) {
            (Payload::F64(x), Payload::F64(y)) => prop_assert_eq!(x.dims(), y.dims()),
            _ => prop_assert!(false),
        }
    }

    #[test]
    fn i64_frames_round_trip(a in dense(any::<i64>())) {
        let p = Payload::I64(a);
        prop_assert_eq!(Payload::decode(&p.encode()).unwrap(), p);
    }

    #[test]
    fn u8_frames_round_trip(a in dense(any::<u8>())) {
        let p = Payload::U8(a);
        prop_assert_eq!(Payload::decode(&p.encode()).unwrap(), p);
    }

    #[test]
    fn raw_frames_round_trip(bytes in prop::collection::vec(any::<u8>(), 0..2048)) {
        let p = Payload::Bytes(bytes);
        prop_assert_eq!(Payload::decode(&p.encode()).unwrap(), p);
    }

    #[test]
    fn truncated_frames_are_rejected(a in dense(any::<i64>()), cut in 1usize..64) {
        let bytes = Payload::I64(a).encode();
        let keep = bytes.len().saturating_sub(cut);
        prop_assert!(Payload::decode(&bytes[..keep]).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn interleaved_tags_do_not_interfere(
        msgs in prop::collection::vec((0u32..1000, prop::collection::vec(any::<u8>(), 0..256)), 1..20),
        order_seed in any::<u64>(),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let cfg = TransportConfig::shared(dir.path()).with_polling(Duration::ZERO, Duration::ZERO);
        let mut seen = HashSet::new();
        let msgs: Vec<_> = msgs.into_iter().filter(|(t, _)| seen.insert(*t)).collect();
        std::fs::create_dir_all(transport::mailbox_dir(dir.path(), 1)).unwrap();
        for (tag, body) in &msgs {
            let env = Envelope::new(0, 1, *tag).unwrap();
            transport::deposit(&cfg, &env, &Payload::Bytes(body.clone()).encode(), &DestLocator::local(&cfg, 1)).unwrap();
        }
        let mut order: Vec<usize> = (0..msgs.len()).collect();
        order.sort_by_key(|&i| (i as u64).wrapping_mul(order_seed | 1).rotate_left(17));
        for i in order {
            let (tag, body) = &msgs[i];
            let env = Envelope::new(0, 1, *tag).unwrap();
            let got = transport::consume(&cfg, &env, Some(Duration::from_secs(1))).unwrap();
            prop_assert_eq!(Payload::decode(&got).unwrap(), Payload::Bytes(body.clone()));
        }
        prop_assert_eq!(std::fs::read_dir(transport::mailbox_dir(dir.path(), 1)).unwrap().count(), 0);
    }
}

fn dist_strategy() -> impl Strategy<Value = DimDist> {
    prop_oneof![
        (0usize..=2).prop_map(|overlap| DimDist::Block { overlap }),
        Just(DimDist::Cyclic),
        (1usize..=4).prop_map(|block| DimDist::BlockCyclic { block }),
    ]
}

fn map_strategy() -> impl Strategy<Value = (DistMap, Vec<usize>)> {
    (1usize..=4)
        .prop_flat_map(|d| {
            (
                prop::collection::vec(1usize..=3, d),
                prop::collection::vec(dist_strategy(), d),
                prop::collection::vec(0usize..=9, d),
                any::<bool>(),
            )
        })
        .prop_flat_map(|(grid, dists, dims, col)| {
            let p: usize = grid.iter().product();
            let plist = Just((0..p).collect::<Vec<usize>>()).prop_shuffle();
            (Just(grid), Just(dists), Just(dims), Just(col), plist)
        })
        .prop_map(|(grid, dists, dims, col, plist)| {
            let order = if col { GridOrder::ColumnMajor } else { GridOrder::RowMajor };
            (DistMap::new(grid, Some(dists), plist, order).unwrap(), dims)
        })
}

fn all_indices(dims: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &n in dims {
        out = out.into_iter().flat_map(|p| (0..n).map(move |i| [p.clone(), vec![i]].concat())).collect();
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn owned_extents_partition_and_agree_with_owner((map, dims) in map_strategy()) {
        let extents: Vec<(usize, Extent)> =
            map.plist().iter().map(|&r| (r, map.owned_extent(&dims, r).unwrap())).collect();
        let total: usize = extents.iter().map(|(_, e)| e.len()).sum();
        prop_assert_eq!(total, dims.iter().product::<usize>());
        for ix in all_indices(&dims) {
            let owner = map.owner_of(&dims, &ix).unwrap();
            let holders: Vec<usize> = extents.iter().filter(|(_, e)| e.contains(&ix)).map(|(r, _)| *r).collect();
            prop_assert_eq!(holders, vec![owner]);
        }
        for (r, e) in &extents {
            let stored = map.stored_extent(&dims, *r).unwrap();
            if !e.is_empty() {
                prop_assert_eq!(stored.intersect(e), e.clone());
            }
            // ranges are maximal: no two adjacent
            for rs in &e.dims {
                for w in rs.windows(2) {
                    prop_assert!(w[0].end < w[1].start);
                }
            }
        }
    }

    #[test]
    fn grid_positions_round_trip((map, _dims) in map_strategy()) {
        for p in 0..map.plist().len() {
            let c = map.grid_coord(p).unwrap();
            prop_assert!(c.iter().zip(map.grid()).all(|(&x, &g)| x < g));
            prop_assert_eq!(map.grid_position(&c), p);
        }
    }

    #[test]
    fn extent_intersection_matches_brute_force((map, dims) in map_strategy(), other in map_strategy()) {
        let (map2, _) = other;
        if map2.ndim() != map.ndim() {
            return Ok(());
        }
        let a = map.owned_extent(&dims, map.plist()[0]).unwrap();
        let b = map2.owned_extent(&dims, map2.plist()[0]).unwrap();
        let i = a.intersect(&b);
        for ix in all_indices(&dims) {
            prop_assert_eq!(i.contains(&ix), a.contains(&ix) && b.contains(&ix));
        }
    }
}

#[test]
fn binomial_receivers_and_rounds() {
    for n in 1..=64usize {
        let s = binomial_schedule(n);
        let mut receivers: Vec<usize> = s.rounds.iter().flatten().map(|&(_, d)| d).collect();
        receivers.sort_unstable();
        assert_eq!(receivers, (1..n).collect::<Vec<_>>());
        let expected_rounds = if n == 1 { 0 } else { (n as f64).log2().ceil() as usize };
        assert_eq!(s.round_count(), expected_rounds);
    }
}

#[test]
#[ignore = "writes and reads a 1 GB frame"]
fn one_gigabyte_frame_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = TransportConfig::shared(dir.path());
    std::fs::create_dir_all(transport::mailbox_dir(dir.path(), 0)).unwrap();
    let body: Vec<u8> = (0..1usize << 30).map(|i| (i % 251) as u8).collect();
    let frame = Payload::Bytes(body).encode();
    let env = Envelope::new(0, 0, 1).unwrap();
    transport::deposit(&cfg, &env, &frame, &DestLocator::local(&cfg, 0)).unwrap();
    let got = transport::consume(&cfg, &env, Some(Duration::from_secs(600))).unwrap();
    assert!(got == frame);
}
