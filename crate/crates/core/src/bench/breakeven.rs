//! Amortization model for persistent collectives.
//!
//! A persistent run of `N` iterations costs `t_init + N * t_persist`; the
//! baseline costs `N * t_mpi`. With `delta = t_mpi - t_persist > 0` the setup
//! is recovered after `ceil(t_init / delta)` iterations, clamped to at least
//! one. A ratio within relative `1e-9` of an integer is treated as that
//! integer, so an exact tie counts as paid off.

use crate::error::{Result, RmaError};

const INTEGER_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BreakEvenResult {
    pub delta_s: f64,
    /// `None` when the persistent variant is not faster per iteration.
    pub n_breakeven: Option<u64>,
    pub savings_abs_s: f64,
    pub savings_pct: f64,
}

fn check_time(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(RmaError::Argument(format!("{name} must be a finite non-negative time, got {v}")))
    }
}

pub fn break_even(t_init_s: f64, t_mpi_s: f64, t_persist_s: f64) -> Result<BreakEvenResult> {
    check_time("t_init", t_init_s)?;
    check_time("t_mpi", t_mpi_s)?;
    check_time("t_persist", t_persist_s)?;
    if t_mpi_s == 0.0 {
        return Err(RmaError::UndefinedPercentage);
    }
    let delta = t_mpi_s - t_persist_s;
    let n_breakeven = (delta > 0.0).then(|| iterations_to_recover(t_init_s, delta));
    Ok(BreakEvenResult {
        delta_s: delta,
        n_breakeven,
        savings_abs_s: delta,
        savings_pct: 100.0 * delta / t_mpi_s,
    })
}

fn iterations_to_recover(t_init: f64, delta: f64) -> u64 {
    let ratio = t_init / delta;
    let nearest = ratio.round();
    let n = if (ratio - nearest).abs() <= INTEGER_SNAP * nearest.max(1.0) {
        nearest
    } else {
        ratio.ceil()
    };
    if n >= u64::MAX as f64 {
        u64::MAX
    } else {
        (n as u64).max(1)
    }
}

/// `t_init + n * t_persist`.
pub fn total_cost(t_init_s: f64, t_persist_s: f64, n: u64) -> f64 {
    t_init_s + n as f64 * t_persist_s
}

/// `n * t_mpi`.
pub fn baseline_cost(t_mpi_s: f64, n: u64) -> f64 {
    n as f64 * t_mpi_s
}
