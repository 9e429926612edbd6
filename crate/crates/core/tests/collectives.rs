mod common;

use std::time::Duration;

use common::{fresh, run_variant, seeded_specs, sequential_oracle};
use persistent_rma::collectives::{
    alltoallv_baseline, alltoallv_fence_init, alltoallv_lock_init, persistent_init,
    ExchangeSpec, RequestOptions, RequestState, Variant, WindowCache,
};
use persistent_rma::runtime::{spawn_world, TraceEvent, World, WorldConfig};
use persistent_rma::{RmaError, Violation};
use proptest::prelude::*;

#[test]
fn baseline_matches_sequential_oracle() {
    for ranks in [1, 2, 3, 5, 7] {
        for seed in 0..10 {
            let specs = seeded_specs(ranks, seed);
            let expected = sequential_oracle(&specs);
            let run = fresh(&specs);
            let got = spawn_world(ranks, 1, |rank| {
                let spec = &run[rank.rank()];
                alltoallv_baseline(&rank, spec)?;
                Ok(spec.recv.to_vec())
            })
            .unwrap();
            assert_eq!(got, expected, "ranks {ranks} seed {seed}");
        }
    }
}

#[test]
fn every_variant_matches_sequential_oracle_across_rounds() {
    for variant in Variant::ALL {
        for (ranks, ppn) in [(1, 1), (4, 2), (6, 3), (5, 2)] {
            for seed in 0..6 {
                let specs = seeded_specs(ranks, 100 + seed);
                let got = run_variant(WorldConfig::new(ranks, ppn), &specs, variant, 3).unwrap();
                assert_eq!(got, sequential_oracle(&specs), "{variant:?} R={ranks} seed {seed}");
            }
        }
    }
}

#[test]
fn variants_pass_validating_mode() {
    for variant in Variant::ALL {
        let specs = seeded_specs(5, 9);
        let world = WorldConfig::new(5, 2).validating(true);
        let got = run_variant(world, &specs, variant, 4).unwrap();
        assert_eq!(got, sequential_oracle(&specs), "{variant:?}");
    }
}

#[test]
fn put_displacements_are_the_transposed_receive_displacements() {
    let ranks = 5;
    let specs = seeded_specs(ranks, 3);
    let displs = spawn_world(ranks, 1, |rank| {
        let mut cache = WindowCache::new();
        let mut req = alltoallv_fence_init(&rank, &specs[rank.rank()], &mut cache)?;
        let d = req.put_displs().to_vec();
        req.free()?;
        Ok(d)
    })
    .unwrap();
    for (s, row) in displs.iter().enumerate() {
        for (r, &d) in row.iter().enumerate() {
            assert_eq!(d, specs[r].rdispls[s] * specs[r].elem_size);
        }
    }
}

#[test]
fn one_put_per_nonempty_peer_per_round() {
    let ranks = 6;
    let specs = seeded_specs(ranks, 21);
    for variant in Variant::ALL {
        let world = World::new(WorldConfig::new(ranks, 2).traced(true)).unwrap();
        let run = fresh(&specs);
        let rounds = 3;
        world
            .run(|rank| {
                let mut cache = WindowCache::new();
                let mut req = persistent_init(
                    &rank,
                    &run[rank.rank()],
                    &mut cache,
                    variant,
                    RequestOptions::default(),
                )?;
                for _ in 0..rounds {
                    req.start()?;
                    req.wait()?;
                }
                req.free()
            })
            .unwrap();
        let trace = world.trace();
        for (s, spec) in specs.iter().enumerate() {
            for r in 0..ranks {
                let issued = trace
                    .iter()
                    .filter(|e| {
                        matches!(e, TraceEvent::PutIssued { origin, target, .. } if *origin == s && *target == r)
                    })
                    .count();
                let want = if spec.sendcounts[r] > 0 { rounds } else { 0 };
                assert_eq!(issued, want, "{variant:?} {s}->{r}");
            }
        }
    }
}

#[test]
fn window_cache_reuses_until_size_changes() {
    let ranks = 3;
    let counts = spawn_world(ranks, 1, |rank| {
        let small = uniform_spec(ranks, 2);
        let large = uniform_spec(ranks, 5);
        let mut cache = WindowCache::new();
        let mut gens = Vec::new();
        for _ in 0..4 {
            let mut req = alltoallv_fence_init(&rank, &small, &mut cache)?;
            req.start()?;
            req.wait()?;
            gens.push(req.window().generation());
        }
        let mut req = alltoallv_fence_init(&rank, &large, &mut cache)?;
        gens.push(req.window().generation());
        let old = cache.window().cloned();
        req.free()?;
        Ok((cache.hits(), cache.misses(), gens, old.map(|w| w.is_freed())))
    })
    .unwrap();
    for (hits, misses, gens, freed) in counts {
        assert_eq!((hits, misses), (3, 2));
        assert!(gens[..4].iter().all(|&g| g == gens[0]));
        assert_eq!(gens[4], gens[0] + 1);
        assert_eq!(freed, Some(true));
    }
}

fn uniform_spec(ranks: usize, count: usize) -> ExchangeSpec {
    let displs: Vec<usize> = (0..ranks).map(|p| p * count).collect();
    ExchangeSpec::with_buffers(vec![count; ranks], displs.clone(), vec![count; ranks], displs, 4)
}

#[test]
fn freed_window_is_not_reused() {
    let misses = spawn_world(2, 1, |rank| {
        let spec = uniform_spec(2, 1);
        let mut cache = WindowCache::new();
        for _ in 0..3 {
            let mut req = alltoallv_lock_init(&rank, &spec, &mut cache)?;
            req.start()?;
            req.wait()?;
            req.free()?;
        }
        Ok((cache.hits(), cache.misses()))
    })
    .unwrap();
    assert!(misses.iter().all(|&m| m == (0, 3)));
}

#[test]
fn lifecycle_rejections_leave_request_usable() {
    for variant in Variant::ALL {
        spawn_world(2, 1, |rank| {
            let spec = uniform_spec(2, 1);
            let mut cache = WindowCache::new();
            let mut req = persistent_init(&rank, &spec, &mut cache, variant, RequestOptions::default())?;
            assert!(matches!(req.wait(), Err(RmaError::Lifecycle { op: "wait", .. })));
            req.start()?;
            assert!(matches!(req.start(), Err(RmaError::Lifecycle { op: "start", .. })));
            assert!(matches!(req.free(), Err(RmaError::Lifecycle { op: "free", .. })));
            req.wait()?;
            assert_eq!(req.state(), RequestState::Completed);
            req.free()?;
            assert!(matches!(req.start(), Err(RmaError::Lifecycle { .. })));
            Ok(())
        })
        .unwrap();
    }
}

#[test]
fn receive_overflow_is_detected_at_init() {
    let err = spawn_world(2, 1, |rank| {
        // Rank 0 sends 3 elements to rank 1, which expects 2.
        let spec = if rank.rank() == 0 {
            ExchangeSpec::with_buffers(vec![1, 3], vec![0, 1], vec![1, 2], vec![0, 1], 1)
        } else {
            ExchangeSpec::with_buffers(vec![2, 1], vec![0, 2], vec![2, 1], vec![0, 2], 1)
        };
        let mut cache = WindowCache::new();
        alltoallv_fence_init(&rank, &spec, &mut cache).map(|_| ())
    })
    .unwrap_err();
    assert!(matches!(
        err.root(),
        RmaError::ReceiveOverflow { sender: 0, receiver: 1, incoming: 3, capacity: 2 }
    ));
}

#[test]
fn baseline_rejects_count_disagreement() {
    let err = spawn_world(2, 1, |rank| {
        let spec = if rank.rank() == 0 {
            ExchangeSpec::with_buffers(vec![1, 1], vec![0, 1], vec![1, 2], vec![0, 1], 1)
        } else {
            ExchangeSpec::with_buffers(vec![1, 1], vec![0, 1], vec![1, 1], vec![0, 1], 1)
        };
        alltoallv_baseline(&rank, &spec)
    })
    .unwrap_err();
    assert!(matches!(err.root(), RmaError::CountMismatch { .. }));
}

#[test]
fn mismatched_element_sizes_are_rejected() {
    let err = spawn_world(2, 1, |rank| {
        let es = 4 << rank.rank();
        let spec = ExchangeSpec::with_buffers(vec![1, 1], vec![0, 1], vec![1, 1], vec![0, 1], es);
        let mut cache = WindowCache::new();
        alltoallv_fence_init(&rank, &spec, &mut cache).map(|_| ())
    })
    .unwrap_err();
    assert!(matches!(err.root(), RmaError::Argument(_)));
}

#[test]
fn invalid_spec_is_rejected() {
    let err = spawn_world(2, 1, |rank| {
        // Overlapping receive regions.
        let spec = ExchangeSpec::with_buffers(vec![1, 1], vec![0, 1], vec![2, 2], vec![0, 1], 1);
        let mut cache = WindowCache::new();
        alltoallv_fence_init(&rank, &spec, &mut cache).map(|_| ())
    })
    .unwrap_err();
    assert!(matches!(err.root(), RmaError::Argument(_)));
}

/// Rank 1 is slow to open its epoch. Without the barrier in wait, rank 0
/// completes and reads before rank 1 has written anything.
fn lock_race(validate: bool, wait_barrier: bool) -> persistent_rma::Result<Vec<Vec<u8>>> {
    let specs = fresh(&uniform_pair());
    let world = World::new(
        WorldConfig::new(2, 1)
            .validating(validate)
            .timeout(Duration::from_secs(10)),
    )?;
    world.run(|rank| {
        let me = rank.rank();
        let spec = &specs[me];
        spec.send.write().fill(me as u8 + 1);
        let options = RequestOptions {
            wait_barrier,
            start_delay: if me == 1 { Duration::from_millis(200) } else { Duration::ZERO },
        };
        let mut cache = WindowCache::new();
        let mut req = persistent_init(&rank, spec, &mut cache, Variant::LockPersistent, options)?;
        req.start()?;
        req.wait()?;
        let seen = req.recv_bytes()?;
        req.free()?;
        Ok(seen)
    })
}

fn uniform_pair() -> Vec<ExchangeSpec> {
    (0..2).map(|_| uniform_spec(2, 4)).collect()
}

#[test]
fn lock_wait_without_barrier_reads_stale_data() {
    let seen = lock_race(false, false).unwrap();
    assert_eq!(&seen[0][16..], &[0; 16], "rank 1's data arrived before the read");
}

#[test]
fn lock_wait_without_barrier_is_flagged() {
    let err = lock_race(true, false).unwrap_err();
    assert_eq!(err.violation(), Some(Violation::ReadDuringOpenEpoch));
}

#[test]
fn lock_wait_with_barrier_is_clean() {
    let seen = lock_race(true, true).unwrap();
    assert_eq!(&seen[0][16..], &[2; 16]);
    assert_eq!(&seen[1][..16], &[1; 16]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn prop_variants_equal_oracle(ranks in 1usize..7, ppn in 1usize..4, seed in any::<u64>()) {
        let specs = seeded_specs(ranks, seed);
        let expected = sequential_oracle(&specs);
        for variant in Variant::ALL {
            let got = run_variant(WorldConfig::new(ranks, ppn), &specs, variant, 2).unwrap();
            prop_assert_eq!(&got, &expected);
        }
    }

    #[test]
    fn prop_repeated_rounds_are_idempotent(ranks in 1usize..5, seed in any::<u64>(), rounds in 1usize..5) {
        let specs = seeded_specs(ranks, seed);
        let once = run_variant(WorldConfig::new(ranks, 1), &specs, Variant::FencePersistent, 1).unwrap();
        let many = run_variant(WorldConfig::new(ranks, 1), &specs, Variant::LockPersistent, rounds).unwrap();
        prop_assert_eq!(once, many);
    }

    #[test]
    fn prop_bytes_are_conserved(ranks in 1usize..8, seed in any::<u64>()) {
        let specs = seeded_specs(ranks, seed);
        let sent: usize = specs.iter().map(|s| s.total_send_bytes()).sum();
        let recv: usize = specs.iter().map(|s| s.total_recv_bytes()).sum();
        prop_assert_eq!(sent, recv);
        for (s, spec) in specs.iter().enumerate() {
            for (r, peer) in specs.iter().enumerate() {
                prop_assert_eq!(spec.sendcounts[r], peer.recvcounts[s]);
            }
        }
    }
}
