//! From a sparse matrix to a communication pattern: parse Matrix Market
//! text, block the rows over ranks, and benchmark every implementation on the
//! resulting exchange.

use persistent_rma::bench::{run_pattern_bench, BenchConfig, BenchVariant, ClockKind};
use persistent_rma::patterns::{matrix_pattern, parse_matrix_market, random_sparse_matrix};
use persistent_rma::Result;
use rand::rngs::StdRng;
use rand::SeedableRng;

/// Returns the per-variant validation flags.
pub fn run(ranks: usize) -> Result<Vec<(BenchVariant, bool)>> {
    let text = random_sparse_matrix(64, 0.08, &mut StdRng::seed_from_u64(7)).to_matrix_market();
    let m = parse_matrix_market(&text)?;
    let pattern = matrix_pattern(&m, ranks, 8)?.with_name("random64");
    println!("{} nnz over {ranks} ranks, {} bytes moved", m.nnz(), pattern.total_bytes());
    for row in pattern.counts_bytes() {
        println!("  {row:?}");
    }
    let cfg = BenchConfig::new(ranks, 2).iterations(20, 2).clock(ClockKind::Fake);
    BenchVariant::ALL
        .into_iter()
        .map(|v| Ok((v, run_pattern_bench(v, &pattern, &cfg)?.record.validated)))
        .collect()
}

fn main() -> Result<()> {
    for (v, ok) in run(4)? {
        println!("{v}: {}", if ok { "validated" } else { "FAILED" });
    }
    Ok(())
}
