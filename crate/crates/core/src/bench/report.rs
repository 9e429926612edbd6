//! CSV output and the baseline pairing used by the break-even analysis.

use std::io::{Read, Write};

use crate::bench::{break_even, BenchVariant, BreakEvenResult, TimingRecord};
use crate::error::{Result, RmaError};

pub const CSV_HEADER: [&str; 15] = [
    "variant",
    "transport",
    "ranks",
    "ppn",
    "pattern",
    "msg_size_bytes",
    "iterations",
    "warmup",
    "t_init_s",
    "t_per_iter_s",
    "t_total_s",
    "delta_s",
    "n_breakeven",
    "savings_pct",
    "validated",
];

/// Every row is produced by the simulated transport.
pub const TRANSPORT: &str = "sim";

/// Formats with 9 significant digits, choosing fixed or exponent notation
/// like C's `%.9g`.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn same_case(a: &TimingRecord, b: &TimingRecord) -> bool {
    a.pattern == b.pattern && a.msg_size_bytes == b.msg_size_bytes && a.ranks == b.ranks
}

/// Pairs every record with the baseline record for the same pattern, size
/// and rank count. Baseline rows pair with themselves. `None` marks an
/// orphan (no baseline) or an undefined percentage.
pub fn pair_with_baseline(records: &[TimingRecord]) -> Vec<Option<BreakEvenResult>> {
    records
        .iter()
        .map(|r| {
            let base = records
                .iter()
                .find(|b| b.variant == BenchVariant::Baseline && same_case(b, r))?;
            let t_init = if r.variant == BenchVariant::Baseline {
                0.0
            } else {
                r.t_init_s
            };
            break_even(t_init, base.t_per_iter_s, r.t_per_iter_s).ok()
        })
        .collect()
}

pub fn emit_csv<W: Write>(
    records: &[TimingRecord],
    break_evens: &[Option<BreakEvenResult>],
    out: W,
) -> Result<()> {
    if records.len() != break_evens.len() {
        return Err(RmaError::Argument(format!(
            "{} records but {} break-even entries",
            records.len(),
            break_evens.len()
        )));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for (r, be) in records.iter().zip(break_evens) {
        let opt = |v: Option<String>| v.unwrap_or_default();
        w.write_record([
            r.variant.name().to_string(),
            TRANSPORT.to_string(),
            r.ranks.to_string(),
            r.ppn.to_string(),
            r.pattern.clone(),
            opt(r.msg_size_bytes.map(|m| m.to_string())),
            r.iterations.to_string(),
            r.warmup.to_string(),
            format_sig9(r.t_init_s),
            format_sig9(r.t_per_iter_s),
            format_sig9(r.t_total_s),
            opt(be.map(|b| format_sig9(b.delta_s))),
            opt(be.and_then(|b| b.n_breakeven).map(|n| n.to_string())),
            opt(be.map(|b| format_sig9(b.savings_pct))),
            r.validated.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One parsed CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub record: TimingRecord,
    pub delta_s: Option<f64>,
    pub n_breakeven: Option<u64>,
    pub savings_pct: Option<f64>,
}

fn field<T: std::str::FromStr>(row: &csv::StringRecord, idx: usize, line: usize) -> Result<T> {
    let raw = row.get(idx).unwrap_or("");
    raw.parse().map_err(|_| {
        RmaError::Argument(format!(
            "line {line}: bad value '{raw}' in column {}",
            CSV_HEADER[idx]
        ))
    })
}

fn opt_field<T: std::str::FromStr>(
    row: &csv::StringRecord,
    idx: usize,
    line: usize,
) -> Result<Option<T>> {
    match row.get(idx) {
        None | Some("") => Ok(None),
        Some(_) => field(row, idx, line).map(Some),
    }
}

pub fn parse_csv<R: Read>(input: R) -> Result<Vec<CsvRow>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rd.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(RmaError::Argument(format!(
            "unexpected CSV header: {}",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, row) in rd.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let variant: BenchVariant = field::<String>(&row, 0, line)?.parse()?;
        rows.push(CsvRow {
            record: TimingRecord {
                variant,
                ranks: field(&row, 2, line)?,
                ppn: field(&row, 3, line)?,
                pattern: field(&row, 4, line)?,
                msg_size_bytes: opt_field(&row, 5, line)?,
                iterations: field(&row, 6, line)?,
                warmup: field(&row, 7, line)?,
                t_init_s: field(&row, 8, line)?,
                t_per_iter_s: field(&row, 9, line)?,
                t_total_s: field(&row, 10, line)?,
                validated: field(&row, 14, line)?,
            },
            delta_s: opt_field(&row, 11, line)?,
            n_breakeven: opt_field(&row, 12, line)?,
            savings_pct: opt_field(&row, 13, line)?,
        });
    }
    Ok(rows)
}
