//! A small uniform-size sweep over all four implementations, written as CSV
//! with break-even columns filled in.

use persistent_rma::bench::{
    emit_csv, pair_with_baseline, run_uniform_bench, BenchConfig, BenchVariant, ClockKind,
    TimingRecord,
};
use persistent_rma::Result;

pub fn run(clock: ClockKind, out: impl std::io::Write) -> Result<Vec<TimingRecord>> {
    let cfg = BenchConfig::new(4, 2).iterations(50, 5).clock(clock);
    let mut records = Vec::new();
    for size in [32, 32 * 1024] {
        for v in BenchVariant::ALL {
            records.push(run_uniform_bench(v, size, &cfg)?.record);
        }
    }
    emit_csv(&records, &pair_with_baseline(&records), out)?;
    Ok(records)
}

fn main() -> Result<()> {
    run(ClockKind::Wall, std::io::stdout().lock())?;
    Ok(())
}
