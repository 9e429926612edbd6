//! Raw window operations: fence epochs, passive-target locks, and what the
//! validating runtime reports when the rules are broken.

use persistent_rma::runtime::{FenceAssertions, LockMode, PutDescriptor, World, WorldConfig};
use persistent_rma::{Result, SharedBuffer, Violation};

/// Each rank writes its id into slot `rank` of every peer's window, once
/// under fences and once under a lock. Returns every rank's window contents
/// and the violation caught by the final bad put.
pub fn run() -> Result<(Vec<Vec<u8>>, Option<Violation>)> {
    let ranks = 4;
    let world = World::new(WorldConfig::new(ranks, 2).validating(true))?;
    let windows = world.run(|rank| {
        let me = rank.rank();
        let region = SharedBuffer::zeroed(2 * ranks);
        let win = rank.win_create(&region, 2 * ranks)?;

        rank.fence(&win, FenceAssertions::NO_PRECEDE)?;
        for target in 0..ranks {
            let desc = PutDescriptor {
                origin_rank: me,
                target_rank: target,
                origin_offset_bytes: 0,
                target_offset_bytes: me,
                length_bytes: 1,
            };
            rank.put(&win, &desc, &[me as u8 + 1])?;
        }
        rank.fence(&win, FenceAssertions::NO_SUCCEED)?;

        let target = (me + 1) % ranks;
        rank.lock(&win, target, LockMode::Exclusive)?;
        let desc = PutDescriptor {
            origin_rank: me,
            target_rank: target,
            origin_offset_bytes: 0,
            target_offset_bytes: ranks + me,
            length_bytes: 1,
        };
        rank.put(&win, &desc, &[0xA0 | me as u8])?;
        rank.unlock(&win, target)?;
        rank.barrier()?;
        let bytes = rank.read_window(&win)?;
        rank.win_free(&win)?;
        Ok(bytes)
    })?;

    // No epoch is open, so this put must be refused.
    let caught = World::new(WorldConfig::new(2, 1).validating(true))?
        .run(|rank| {
            let region = SharedBuffer::zeroed(4);
            let win = rank.win_create(&region, 4)?;
            let desc = PutDescriptor {
                origin_rank: rank.rank(),
                target_rank: 1 - rank.rank(),
                origin_offset_bytes: 0,
                target_offset_bytes: 0,
                length_bytes: 1,
            };
            rank.put(&win, &desc, &[1])
        })
        .err()
        .and_then(|e| e.violation());
    Ok((windows, caught))
}

fn main() -> Result<()> {
    let (windows, caught) = run()?;
    for (r, w) in windows.iter().enumerate() {
        println!("rank {r}: {w:02x?}");
    }
    match caught {
        Some(v) => println!("put outside an epoch: {v}"),
        None => println!("put outside an epoch went unnoticed"),
    }
    Ok(())
}
