//! Command-line front end. Exit codes: 0 success, 1 failed validation or
//! runtime error, 2 usage or input error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use rand::rngs::StdRng;
use rand::SeedableRng;

use crate::bench::{
    emit_csv, load_matrix_pattern, pair_with_baseline, parse_csv, run_pattern_bench, BenchConfig, BenchVariant, ClockKind, TimingRecord,
};
use crate::collectives::{
    alltoallv_baseline, persistent_init, ExchangeSpec, RequestOptions, Variant, WindowCache,
};
use crate::error::{Result, RmaError};
use crate::patterns::{random_exchange, uniform_pattern, RandomExchange};
use crate::runtime::{World, WorldConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "rma-alltoallv",
    version,
    about = "Persistent one-sided Alltoallv on a simulated RMA runtime"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep uniform message sizes and write timing rows as CSV.
    BenchUniform(BenchUniformArgs),
    /// Benchmark the exchange derived from a Matrix Market file.
    BenchSparse(BenchSparseArgs),
    /// Compare every persistent variant with the baseline on random exchanges.
    Validate(ValidateArgs),
    /// Pair persistent rows with baseline rows and report break-even points.
    Breakeven(BreakevenArgs),
    /// Print the byte-count matrix of a pattern.
    Pattern(PatternArgs),
}

#[derive(Debug, Clone, Args)]
pub struct WorldArgs {
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    pub ranks: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub ppn: u64,
    /// Per-wait deadline in seconds.
    #[arg(long = "timeout", default_value_t = 30.0)]
    pub timeout_s: f64,
    /// Enable the runtime's protocol checks.
    #[arg(long, env = "RMA_VALIDATE")]
    pub validate_rma: bool,
}

#[derive(Debug, Clone, Args)]
pub struct MeasureArgs {
    #[arg(long, value_delimiter = ',', default_value = "baseline,fence,lock,fence-hier")]
    pub variants: Vec<BenchVariant>,
    #[arg(long, default_value_t = 1000)]
    pub iterations: u64,
    #[arg(long, default_value_t = 10)]
    pub warmup: u64,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    pub elem_size: u64,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Replace the wall clock with a counter (deterministic output).
    #[arg(long)]
    pub fake_clock: bool,
}

#[derive(Debug, Clone, Args)]
pub struct BenchUniformArgs {
    #[command(flatten)]
    pub world: WorldArgs,
    #[command(flatten)]
    pub measure: MeasureArgs,
    /// Bytes sent to each peer, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "32,32768",
          value_parser = clap::value_parser!(u64).range(1..))]
    pub sizes: Vec<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchSparseArgs {
    #[command(flatten)]
    pub world: WorldArgs,
    #[command(flatten)]
    pub measure: MeasureArgs,
    #[arg(long)]
    pub matrix: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub world: WorldArgs,
    /// Random exchanges per variant.
    #[arg(long, default_value_t = 20)]
    pub specs: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Flip one received byte to prove the check fires.
    #[arg(long)]
    pub inject_fault: bool,
}

#[derive(Debug, Clone, Args)]
pub struct BreakevenArgs {
    /// CSV produced by bench-uniform or bench-sparse.
    pub csv: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PatternArgs {
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    pub ranks: u64,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    pub elem_size: u64,
    #[arg(long, conflicts_with = "size", required_unless_present = "size")]
    pub matrix: Option<PathBuf>,
    #[arg(long)]
    pub size: Option<u64>,
}

/// Resolved settings shared by the measuring subcommands.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub variants: Vec<BenchVariant>,
    pub bench: BenchConfig,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    fn new(world: &WorldArgs, measure: &MeasureArgs) -> Self {
        let mut bench = BenchConfig::new(world.ranks as usize, world.ppn as usize)
            .iterations(measure.iterations, measure.warmup)
            .validate_rma(world.validate_rma)
            .clock(if measure.fake_clock {
                ClockKind::Fake
            } else {
                ClockKind::Wall
            });
        bench.elem_size = measure.elem_size as usize;
        bench.timeout = timeout(world);
        RunConfig {
            variants: measure.variants.clone(),
            bench,
            output: measure.output.clone(),
        }
    }
}

fn timeout(world: &WorldArgs) -> Duration {
    Duration::try_from_secs_f64(world.timeout_s).unwrap_or(crate::runtime::DEFAULT_TIMEOUT)
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    match cli.command {
        Command::BenchUniform(a) => cmd_bench_uniform(&a, out, err),
        Command::BenchSparse(a) => cmd_bench_sparse(&a, out, err),
        Command::Validate(a) => cmd_validate(&a, out, err),
        Command::Breakeven(a) => cmd_breakeven(&a.csv, out, err),
        Command::Pattern(a) => cmd_pattern(&a, out, err),
    }
}

fn write_rows(cfg: &RunConfig, records: &[TimingRecord], out: &mut dyn Write) -> Result<()> {
    let pairs = pair_with_baseline(records);
    match &cfg.output {
        Some(path) => emit_csv(records, &pairs, File::create(path)?),
        None => emit_csv(records, &pairs, out),
    }
}

fn finish(cfg: &RunConfig, records: &[TimingRecord], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    if let Err(e) = write_rows(cfg, records, out) {
        let _ = writeln!(err, "error: {e}");
        return EXIT_FAILED;
    }
    let failed: Vec<_> = records.iter().filter(|r| !r.validated).collect();
    for r in &failed {
        let _ = writeln!(
            err,
            "validation failed: {} on {} ({:?} bytes)",
            r.variant, r.pattern, r.msg_size_bytes
        );
    }
    if failed.is_empty() {
        EXIT_OK
    } else {
        EXIT_FAILED
    }
}

pub fn cmd_bench_uniform(args: &BenchUniformArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cfg = RunConfig::new(&args.world, &args.measure);
    let mut records = Vec::new();
    for &size in &args.sizes {
        let pattern = match uniform_pattern(cfg.bench.ranks, size as usize, cfg.bench.elem_size) {
            Ok(p) => p,
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                return EXIT_USAGE;
            }
        };
        for &variant in &cfg.variants {
            match run_pattern_bench(variant, &pattern, &cfg.bench) {
                Ok(rep) => records.push(rep.record),
                Err(e) => {
                    let _ = writeln!(err, "error: {variant} at {size} bytes: {e}");
                    return EXIT_FAILED;
                }
            }
        }
    }
    finish(&cfg, &records, out, err)
}

pub fn cmd_bench_sparse(args: &BenchSparseArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cfg = RunConfig::new(&args.world, &args.measure);
    let pattern = match load_matrix_pattern(&args.matrix, cfg.bench.ranks, cfg.bench.elem_size) {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", args.matrix.display());
            return EXIT_USAGE;
        }
    };
    let mut records = Vec::new();
    for &variant in &cfg.variants {
        match run_pattern_bench(variant, &pattern, &cfg.bench) {
            Ok(rep) => records.push(rep.record),
            Err(e) => {
                let _ = writeln!(err, "error: {variant}: {e}");
                return EXIT_FAILED;
            }
        }
    }
    finish(&cfg, &records, out, err)
}

/// A received byte that differs from the baseline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationFailure {
    pub variant: Variant,
    pub spec: u64,
    pub rank: usize,
    pub peer: usize,
    pub index: usize,
}

/// Per-rank receive buffers from the baseline and from the variant under test.
pub type ComparedBuffers = (Vec<Vec<u8>>, Vec<Vec<u8>>);

/// Runs the baseline and `variant` on the same inputs.
pub fn run_against_baseline(
    config: &WorldConfig,
    specs: &[ExchangeSpec],
    variant: Variant,
) -> Result<ComparedBuffers> {
    let world = World::new(config.clone())?;
    let oracle_specs: Vec<ExchangeSpec> = specs.iter().map(ExchangeSpec::deep_clone).collect();
    let oracle = world.run(|rank| {
        let spec = &oracle_specs[rank.rank()];
        alltoallv_baseline(&rank, spec)?;
        Ok(spec.recv.to_vec())
    })?;
    let test_specs: Vec<ExchangeSpec> = specs.iter().map(ExchangeSpec::deep_clone).collect();
    let got = world.run(|rank| {
        let spec = &test_specs[rank.rank()];
        let mut cache = WindowCache::new();
        let mut req = persistent_init(&rank, spec, &mut cache, variant, RequestOptions::default())?;
        req.start()?;
        req.wait()?;
        let bytes = spec.recv.to_vec();
        req.free()?;
        Ok(bytes)
    })?;
    Ok((oracle, got))
}

fn locate(spec: &ExchangeSpec, offset: usize) -> (usize, usize) {
    (0..spec.ranks())
        .find(|&p| spec.recv_range(p).contains(&offset))
        .map(|p| (p, (offset - spec.recv_range(p).start) / spec.elem_size))
        .unwrap_or((usize::MAX, offset))
}

pub fn cmd_validate(args: &ValidateArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let ranks = args.world.ranks as usize;
    let config = WorldConfig::new(ranks, args.world.ppn as usize)
        .validating(args.world.validate_rma)
        .timeout(timeout(&args.world));
    let mut fault_pending = args.inject_fault;
    let mut all_ok = true;
    for variant in Variant::ALL {
        let mut failures = Vec::new();
        for i in 0..args.specs {
            let mut rng = StdRng::seed_from_u64(args.seed.wrapping_add(i));
            let specs = random_exchange(ranks, &RandomExchange::default(), &mut rng);
            let (oracle, mut got) = match run_against_baseline(&config, &specs, variant) {
                Ok(v) => v,
                Err(e) => {
                    let _ = writeln!(err, "error: {variant:?} spec {i}: {e}");
                    return EXIT_FAILED;
                }
            };
            if fault_pending {
                if let Some(buf) = got.iter_mut().find(|b| !b.is_empty()) {
                    buf[0] ^= 0x01;
                    fault_pending = false;
                }
            }
            for (rank, (want, have)) in oracle.iter().zip(&got).enumerate() {
                if let Some(offset) = want.iter().zip(have).position(|(a, b)| a != b) {
                    let (peer, index) = locate(&specs[rank], offset);
                    failures.push(ValidationFailure {
                        variant,
                        spec: i,
                        rank,
                        peer,
                        index,
                    });
                }
            }
        }
        let name = BenchVariant::Persistent(variant).name();
        if failures.is_empty() {
            let _ = writeln!(out, "{name}: pass ({} specs, {ranks} ranks)", args.specs);
        } else {
            all_ok = false;
            let _ = writeln!(out, "{name}: FAIL");
            for f in &failures {
                let _ = writeln!(
                    err,
                    "mismatch: variant={name} spec={} rank={} peer={} index={}",
                    f.spec, f.rank, f.peer, f.index
                );
            }
        }
    }
    if all_ok {
        EXIT_OK
    } else {
        EXIT_FAILED
    }
}

pub fn cmd_breakeven(csv_in: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let rows = match File::open(csv_in)
        .map_err(RmaError::from)
        .and_then(parse_csv)
    {
        Ok(rows) => rows,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", csv_in.display());
            return EXIT_USAGE;
        }
    };
    let records: Vec<TimingRecord> = rows.into_iter().map(|r| r.record).collect();
    let pairs = pair_with_baseline(&records);
    let _ = writeln!(
        out,
        "{:<11} {:<16} {:>10} {:>6} {:>12} {:>11} {:>9}",
        "variant", "pattern", "size", "ranks", "delta_s", "n_breakeven", "savings%"
    );
    let mut orphan = false;
    for (r, be) in records.iter().zip(&pairs) {
        let size = r
            .msg_size_bytes
            .map(|s| s.to_string())
            .unwrap_or_else(|| "-".into());
        match be {
            Some(b) => {
                let n = b
                    .n_breakeven
                    .map(|n| n.to_string())
                    .unwrap_or_else(|| "-".into());
                let _ = writeln!(
                    out,
                    "{:<11} {:<16} {:>10} {:>6} {:>12.6} {:>11} {:>9.2}",
                    r.variant.name(),
                    r.pattern,
                    size,
                    r.ranks,
                    b.delta_s,
                    n,
                    b.savings_pct
                );
            }
            None => {
                orphan = true;
                let _ = writeln!(
                    err,
                    "no baseline pairing for {} on {} (size {size}, {} ranks)",
                    r.variant.name(),
                    r.pattern,
                    r.ranks
                );
            }
        }
    }
    if orphan {
        EXIT_FAILED
    } else {
        EXIT_OK
    }
}

pub fn cmd_pattern(args: &PatternArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let ranks = args.ranks as usize;
    let es = args.elem_size as usize;
    let pattern = match (&args.matrix, args.size) {
        (Some(path), _) => load_matrix_pattern(path, ranks, es),
        (None, Some(size)) => uniform_pattern(ranks, size as usize, es),
        (None, None) => unreachable!("clap requires one source"),
    };
    let pattern = match pattern {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let _ = writeln!(out, "pattern {} ({ranks} ranks, elem {es} bytes)", pattern.label());
    for (r, row) in pattern.counts_bytes().iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|c| format!("{c:>8}")).collect();
        let _ = writeln!(out, "{r:>4}: {}  | send {}", cells.join(" "), pattern.send_bytes(r));
    }
    let _ = writeln!(out, "total {} bytes", pattern.total_bytes());
    EXIT_OK
}

/// Entry point for the binary.
pub fn main() -> i32 {
    let stdout = io::stdout();
    let stderr = io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
