//! The lock-based variant on irregular random exchanges, checked against the
//! two-sided baseline.

use persistent_rma::collectives::{alltoallv_baseline, alltoallv_lock_init, WindowCache};
use persistent_rma::patterns::{random_exchange, RandomExchange};
use persistent_rma::runtime::spawn_world;
use persistent_rma::Result;
use rand::rngs::StdRng;
use rand::SeedableRng;

/// Returns, per seed, whether every rank's receive buffer matched.
pub fn run(ranks: usize, seeds: u64) -> Result<Vec<bool>> {
    let mut results = Vec::new();
    for seed in 0..seeds {
        let specs = random_exchange(ranks, &RandomExchange::default(), &mut StdRng::seed_from_u64(seed));
        let expected = specs.iter().map(|s| s.deep_clone()).collect::<Vec<_>>();
        spawn_world(ranks, 1, |rank| alltoallv_baseline(&rank, &expected[rank.rank()]))?;

        let got = spawn_world(ranks, 1, |rank| {
            let spec = &specs[rank.rank()];
            let mut cache = WindowCache::new();
            let mut req = alltoallv_lock_init(&rank, spec, &mut cache)?;
            for _ in 0..3 {
                req.start()?;
                req.wait()?;
            }
            let bytes = req.recv_bytes()?;
            req.free()?;
            Ok(bytes)
        })?;
        results.push(got.iter().zip(&expected).all(|(g, e)| *g == e.recv.to_vec()));
    }
    Ok(results)
}

fn main() -> Result<()> {
    let results = run(6, 10)?;
    for (seed, ok) in results.iter().enumerate() {
        println!("seed {seed}: {}", if *ok { "match" } else { "MISMATCH" });
    }
    Ok(())
}
