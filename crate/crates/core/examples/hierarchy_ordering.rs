//! The node-aware fence variant issues puts to other nodes before puts to
//! ranks on its own node. The trace shows the issue order per rank.

use persistent_rma::collectives::{alltoallv_fence_hierarchy_init, WindowCache};
use persistent_rma::patterns::{fill_send, uniform_pattern};
use persistent_rma::runtime::{TraceEvent, World, WorldConfig};
use persistent_rma::Result;

/// Put targets in issue order, then the remote and local partitions.
pub type RankOrder = (Vec<usize>, Vec<usize>, Vec<usize>);

pub fn run(ranks: usize, ppn: usize) -> Result<Vec<RankOrder>> {
    let world = World::new(WorldConfig::new(ranks, ppn).traced(true))?;
    let pattern = uniform_pattern(ranks, 16, 4)?;
    let partitions = world.run(|rank| {
        let spec = pattern.slice(rank.rank());
        fill_send(&spec, rank.rank());
        let mut cache = WindowCache::new();
        let mut req = alltoallv_fence_hierarchy_init(&rank, &spec, &mut cache)?;
        req.start()?;
        req.wait()?;
        let parts = (req.remote_targets().to_vec(), req.local_targets().to_vec());
        req.free()?;
        Ok(parts)
    })?;
    let trace = world.trace();
    Ok(partitions
        .into_iter()
        .enumerate()
        .map(|(r, (remote, local))| {
            let order = trace
                .iter()
                .filter_map(|e| match e {
                    TraceEvent::PutIssued { origin, target, .. } if *origin == r => Some(*target),
                    _ => None,
                })
                .collect();
            (order, remote, local)
        })
        .collect())
}

fn main() -> Result<()> {
    let (ranks, ppn) = (8, 2);
    for (r, (order, remote, local)) in run(ranks, ppn)?.iter().enumerate() {
        println!(
            "rank {r} (node {}): remote {remote:?} local {local:?} issued {order:?}",
            r / ppn
        );
    }
    Ok(())
}
