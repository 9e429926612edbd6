#![allow(dead_code)]

use persistent_rma::collectives::{
    persistent_init, ExchangeSpec, RequestOptions, Variant, WindowCache,
};
use persistent_rma::patterns::{random_exchange, RandomExchange};
use persistent_rma::runtime::{World, WorldConfig};
use persistent_rma::Result;
use rand::rngs::StdRng;
use rand::SeedableRng;

/// Receive buffers computed by plain copying, with no runtime involved.
pub fn sequential_oracle(specs: &[ExchangeSpec]) -> Vec<Vec<u8>> {
    specs
        .iter()
        .enumerate()
        .map(|(r, dst)| {
            let mut out = dst.recv.to_vec();
            let es = dst.elem_size;
            for (s, src) in specs.iter().enumerate() {
                let n = dst.recvcounts[s] * es;
                let from = src.sdispls[r] * es;
                let to = dst.rdispls[s] * es;
                out[to..to + n].copy_from_slice(&src.send.read()[from..from + n]);
            }
            out
        })
        .collect()
}

pub fn seeded_specs(ranks: usize, seed: u64) -> Vec<ExchangeSpec> {
    random_exchange(ranks, &RandomExchange::default(), &mut StdRng::seed_from_u64(seed))
}

pub fn fresh(specs: &[ExchangeSpec]) -> Vec<ExchangeSpec> {
    specs.iter().map(ExchangeSpec::deep_clone).collect()
}

/// One init/start/wait/free round of `variant`; returns each rank's receive
/// buffer.
pub fn run_variant(
    config: WorldConfig,
    specs: &[ExchangeSpec],
    variant: Variant,
    rounds: usize,
) -> Result<Vec<Vec<u8>>> {
    let specs = fresh(specs);
    World::new(config)?.run(|rank| {
        let spec = &specs[rank.rank()];
        let mut cache = WindowCache::new();
        let mut req = persistent_init(&rank, spec, &mut cache, variant, RequestOptions::default())?;
        for _ in 0..rounds {
            req.start()?;
            req.wait()?;
        }
        req.free()?;
        Ok(spec.recv.to_vec())
    })
}
