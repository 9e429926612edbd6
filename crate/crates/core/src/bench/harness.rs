//! Measurement protocol: barrier, timed init, untimed warmup, barrier, timed
//! loop of `(start, wait)` pairs, validation, timed free. Each rank reports
//! its own means; the record keeps the maximum over ranks.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use crate::bench::ClockKind;
use crate::collectives::{
    alltoallv_baseline, persistent_init, RequestOptions, Variant, WindowCache,
};
use crate::error::{Result, RmaError};
use crate::patterns::{
    fill_send, matrix_pattern, read_matrix_market, uniform_pattern, Pattern, Provenance,
};
use crate::runtime::{World, WorldConfig, DEFAULT_TIMEOUT};

/// A benchmarked implementation: the two-sided baseline or a persistent
/// variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BenchVariant {
    Baseline,
    Persistent(Variant),
}

impl BenchVariant {
    pub const ALL: [BenchVariant; 4] = [
        BenchVariant::Baseline,
        BenchVariant::Persistent(Variant::FencePersistent),
        BenchVariant::Persistent(Variant::LockPersistent),
        BenchVariant::Persistent(Variant::FenceHierarchyPersistent),
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchVariant::Baseline => "baseline",
            BenchVariant::Persistent(Variant::FencePersistent) => "fence",
            BenchVariant::Persistent(Variant::LockPersistent) => "lock",
            BenchVariant::Persistent(Variant::FenceHierarchyPersistent) => "fence-hier",
        }
    }
}

impl fmt::Display for BenchVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchVariant {
    type Err = RmaError;

    fn from_str(s: &str) -> Result<Self> {
        BenchVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| RmaError::Argument(format!("unknown variant '{s}'")))
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub ranks: usize,
    pub ppn: usize,
    pub iterations: u64,
    pub warmup: u64,
    pub elem_size: usize,
    pub validate_rma: bool,
    pub timeout: Duration,
    pub clock: ClockKind,
}

impl BenchConfig {
    pub fn new(ranks: usize, ppn: usize) -> Self {
        BenchConfig {
            ranks,
            ppn,
            iterations: 1000,
            warmup: 10,
            elem_size: 4,
            validate_rma: false,
            timeout: DEFAULT_TIMEOUT,
            clock: ClockKind::Wall,
        }
    }

    pub fn iterations(mut self, n: u64, warmup: u64) -> Self {
        self.iterations = n;
        self.warmup = warmup;
        self
    }

    pub fn clock(mut self, clock: ClockKind) -> Self {
        self.clock = clock;
        self
    }

    pub fn validate_rma(mut self, on: bool) -> Self {
        self.validate_rma = on;
        self
    }

    fn world(&self) -> Result<World> {
        World::new(
            WorldConfig::new(self.ranks, self.ppn)
                .validating(self.validate_rma)
                .timeout(self.timeout),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRecord {
    pub variant: BenchVariant,
    pub ranks: usize,
    pub ppn: usize,
    pub pattern: String,
    /// Per-pair message size for uniform patterns.
    pub msg_size_bytes: Option<usize>,
    pub iterations: u64,
    pub warmup: u64,
    /// Init plus free, max over ranks. Zero for the baseline.
    pub t_init_s: f64,
    /// Mean `(start, wait)` time after warmup, max over ranks.
    pub t_per_iter_s: f64,
    /// `t_init_s + iterations * t_per_iter_s`.
    pub t_total_s: f64,
    pub validated: bool,
}

/// A record plus the per-rank data it was reduced from.
#[derive(Debug, Clone)]
pub struct BenchReport {
    pub record: TimingRecord,
    pub rank_init_s: Vec<f64>,
    pub rank_iter_s: Vec<f64>,
    pub mismatches: usize,
    pub cache_hits: u64,
    pub cache_misses: u64,
}

struct RankTiming {
    init: f64,
    iter: f64,
    mismatches: usize,
    hits: u64,
    misses: u64,
}

/// Runs one variant over `pattern` under the measurement protocol.
pub fn run_pattern_bench(
    variant: BenchVariant,
    pattern: &Pattern,
    cfg: &BenchConfig,
) -> Result<BenchReport> {
    if pattern.ranks() != cfg.ranks {
        return Err(RmaError::Argument(format!(
            "pattern has {} ranks, config has {}",
            pattern.ranks(),
            cfg.ranks
        )));
    }
    let world = cfg.world()?;
    let n = cfg.iterations;
    let per_rank = world.run(|rank| {
        let me = rank.rank();
        let spec = pattern.slice(me);
        fill_send(&spec, me);
        let mut clock = cfg.clock.make();
        let mut cache = WindowCache::new();
        let mean = |total: f64| if n == 0 { 0.0 } else { total / n as f64 };

        let (init, iter) = match variant {
            BenchVariant::Baseline => {
                for _ in 0..cfg.warmup {
                    alltoallv_baseline(&rank, &spec)?;
                }
                rank.barrier()?;
                let t0 = clock.now();
                for _ in 0..n {
                    alltoallv_baseline(&rank, &spec)?;
                }
                let t1 = clock.now();
                (0.0, mean(t1 - t0))
            }
            BenchVariant::Persistent(v) => {
                rank.barrier()?;
                let t0 = clock.now();
                let mut req =
                    persistent_init(&rank, &spec, &mut cache, v, RequestOptions::default())?;
                let t1 = clock.now();
                for _ in 0..cfg.warmup {
                    req.start()?;
                    req.wait()?;
                }
                rank.barrier()?;
                let s = clock.now();
                for _ in 0..n {
                    req.start()?;
                    req.wait()?;
                }
                let e = clock.now();
                rank.barrier()?;
                let f0 = clock.now();
                req.free()?;
                let f1 = clock.now();
                ((t1 - t0) + (f1 - f0), mean(e - s))
            }
        };
        let ran = n + cfg.warmup > 0;
        let mismatches = if ran {
            crate::patterns::validate_recv(&spec).len()
        } else {
            0
        };
        Ok(RankTiming {
            init,
            iter,
            mismatches,
            hits: cache.hits(),
            misses: cache.misses(),
        })
    })?;

    let max = |f: fn(&RankTiming) -> f64| per_rank.iter().map(f).fold(0.0, f64::max);
    let t_init_s = max(|t| t.init);
    let t_per_iter_s = max(|t| t.iter);
    let mismatches: usize = per_rank.iter().map(|t| t.mismatches).sum();
    let msg_size_bytes = match pattern.provenance() {
        Provenance::Uniform { msg_size_bytes } => Some(*msg_size_bytes),
        _ => None,
    };
    Ok(BenchReport {
        record: TimingRecord {
            variant,
            ranks: cfg.ranks,
            ppn: cfg.ppn,
            pattern: pattern.label(),
            msg_size_bytes,
            iterations: n,
            warmup: cfg.warmup,
            t_init_s,
            t_per_iter_s,
            t_total_s: t_init_s + n as f64 * t_per_iter_s,
            validated: mismatches == 0,
        },
        rank_init_s: per_rank.iter().map(|t| t.init).collect(),
        rank_iter_s: per_rank.iter().map(|t| t.iter).collect(),
        mismatches,
        cache_hits: per_rank.iter().map(|t| t.hits).max().unwrap_or(0),
        cache_misses: per_rank.iter().map(|t| t.misses).max().unwrap_or(0),
    })
}

pub fn run_uniform_bench(
    variant: BenchVariant,
    msg_size_bytes: usize,
    cfg: &BenchConfig,
) -> Result<BenchReport> {
    let pattern = uniform_pattern(cfg.ranks, msg_size_bytes, cfg.elem_size)?;
    run_pattern_bench(variant, &pattern, cfg)
}

pub fn run_sparse_bench(
    variant: BenchVariant,
    matrix_path: &Path,
    cfg: &BenchConfig,
) -> Result<BenchReport> {
    let pattern = load_matrix_pattern(matrix_path, cfg.ranks, cfg.elem_size)?;
    run_pattern_bench(variant, &pattern, cfg)
}

/// Reads a Matrix Market file and labels the pattern with the file stem.
pub fn load_matrix_pattern(path: &Path, ranks: usize, elem_size: usize) -> Result<Pattern> {
    let m = read_matrix_market(path)?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "matrix".into());
    Ok(matrix_pattern(&m, ranks, elem_size)?.with_name(stem))
}
