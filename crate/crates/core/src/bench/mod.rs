//! Benchmark harness, cost model and CSV reporting.

mod breakeven;
mod clock;
mod harness;
mod report;

pub use breakeven::{baseline_cost, break_even, total_cost, BreakEvenResult};
pub use clock::{Clock, ClockKind, FakeClock, WallClock};
pub use harness::{
    load_matrix_pattern, run_pattern_bench, run_sparse_bench, run_uniform_bench, BenchConfig,
    BenchReport, BenchVariant, TimingRecord,
};
pub use report::{
    emit_csv, format_sig9, pair_with_baseline, parse_csv, CsvRow, CSV_HEADER, TRANSPORT,
};
