//! The amortization model: how many iterations a persistent setup needs
//! before it beats repeated non-persistent calls.

use persistent_rma::bench::{baseline_cost, break_even, total_cost, BreakEvenResult};
use persistent_rma::Result;

/// (t_init, t_mpi, t_persist) triples, in seconds.
pub const CASES: [(f64, f64, f64); 4] = [
    (0.0, 0.0588, 0.0410),
    (0.0, 0.0588, 0.0440),
    (0.0, 2.49, 1.54),
    (0.1, 0.06, 0.04),
];

pub fn run() -> Result<Vec<BreakEvenResult>> {
    CASES
        .iter()
        .map(|&(init, mpi, persist)| break_even(init, mpi, persist))
        .collect()
}

fn main() -> Result<()> {
    for (&(init, mpi, persist), r) in CASES.iter().zip(run()?) {
        let n = r.n_breakeven.map_or("-".to_string(), |n| n.to_string());
        println!(
            "init {init:>5} mpi {mpi:>7} persistent {persist:>7}: saves {:.4}s/iter ({:.2}%), pays off at N={n}",
            r.savings_abs_s, r.savings_pct
        );
        if let Some(n) = r.n_breakeven {
            println!(
                "    N={n}: {:.4}s vs {:.4}s",
                total_cost(init, persist, n),
                baseline_cost(mpi, n)
            );
        }
    }
    Ok(())
}
