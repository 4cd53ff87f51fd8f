//! CSV output for runs, theory checks and word-count reports.
//!
//! Floats are written with 9 significant digits.

use std::io::Write;

use crate::model::ImbalanceSample;
use crate::sim::{HeavyKeyReport, RunResult, TheoryReport};
use crate::wordcount::{AggregationReport, MemoryRow};
use crate::workload::Interner;

pub const RUN_HEADER: [&str; 12] = [
    "run_id",
    "technique",
    "estimator",
    "W",
    "S",
    "d",
    "seed",
    "t",
    "imbalance",
    "imbalance_fraction",
    "max_load",
    "avg_load",
];

/// Formats `v` like C's `%.9g`.
pub fn fmt_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..9).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (8 - exp).max(0) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_owned()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn sample_row(run_id: usize, r: &RunResult, s: &ImbalanceSample) -> Vec<String> {
    vec![
        run_id.to_string(),
        r.plan.kind.to_string(),
        r.plan
            .effective_estimation()
            .map_or_else(|| "none".to_string(), |e| e.to_string()),
        r.config.workers.to_string(),
        r.config.sources.to_string(),
        r.config.choices.to_string(),
        r.config.master_seed.to_string(),
        s.timestamp.to_string(),
        fmt_sig9(s.imbalance),
        fmt_sig9(s.imbalance / s.timestamp as f64),
        s.max_load.to_string(),
        fmt_sig9(s.avg_load),
    ]
}

/// One row per sample of every run, ordered by `(run_id, t)`.
pub fn write_runs<W: Write>(out: W, runs: &[RunResult]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RUN_HEADER)?;
    for (id, r) in runs.iter().enumerate() {
        for s in &r.series {
            w.write_record(sample_row(id, r, s))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per run with its averages.
pub fn write_run_summaries<W: Write>(out: W, runs: &[RunResult]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "run_id",
        "technique",
        "estimator",
        "split",
        "W",
        "S",
        "d",
        "seed",
        "messages",
        "avg_imbalance",
        "normalized_avg",
        "final_imbalance",
    ])?;
    for (id, r) in runs.iter().enumerate() {
        w.write_record([
            id.to_string(),
            r.plan.kind.to_string(),
            r.plan
                .effective_estimation()
                .map_or_else(|| "none".to_string(), |e| e.to_string()),
            r.plan.split.to_string(),
            r.config.workers.to_string(),
            r.config.sources.to_string(),
            r.config.choices.to_string(),
            r.config.master_seed.to_string(),
            r.messages.to_string(),
            fmt_sig9(r.avg_imbalance),
            fmt_sig9(r.normalized_avg),
            fmt_sig9(r.final_imbalance()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Routing trace dump: `t,source,key,worker`.
pub fn write_trace<W: Write>(
    out: W,
    r: &RunResult,
    keys: impl Iterator<Item = u64>,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "source", "key", "worker"])?;
    if let (Some(trace), Some(sources)) = (&r.trace, &r.sources) {
        for (t, ((&dest, &src), key)) in
            trace.destinations.iter().zip(sources).zip(keys).enumerate()
        {
            w.write_record([
                t.to_string(),
                src.to_string(),
                key.to_string(),
                dest.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-`(n, seed)` rows followed by one median row per `n` (seed column `median`).
pub fn write_theory<W: Write>(out: W, report: &TheoryReport) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["d", "n", "seed", "messages", "imbalance", "ratio"])?;
    for r in &report.rows {
        w.write_record([
            report.d.to_string(),
            r.n.to_string(),
            r.seed.to_string(),
            r.messages.to_string(),
            fmt_sig9(r.imbalance),
            fmt_sig9(r.ratio),
        ])?;
    }
    for &(n, med) in &report.medians {
        let m = (n as u64) * (n as u64);
        w.write_record([
            report.d.to_string(),
            n.to_string(),
            "median".into(),
            m.to_string(),
            String::new(),
            fmt_sig9(med),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_heavy_key<W: Write>(out: W, r: &HeavyKeyReport, threshold: f64) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "p1",
        "n",
        "messages",
        "imbalance",
        "fraction",
        "bound",
        "threshold",
        "pass",
    ])?;
    w.write_record([
        fmt_sig9(r.p1),
        r.n.to_string(),
        r.messages.to_string(),
        fmt_sig9(r.imbalance),
        fmt_sig9(r.fraction),
        fmt_sig9(r.bound),
        fmt_sig9(threshold),
        (r.fraction >= threshold).to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

fn key_label(key: u64, interner: Option<&Interner>) -> String {
    interner
        .and_then(|i| i.label(key))
        .map_or_else(|| key.to_string(), str::to_owned)
}

/// Summary row, then `topk` rows (rank, key, total) and optional per-flush rows.
/// Every row starts with a `row` discriminator column.
pub fn write_wordcount<W: Write>(
    out: W,
    r: &AggregationReport,
    interner: Option<&Interner>,
    per_flush: bool,
) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    w.write_record([
        "row",
        "policy",
        "W",
        "period",
        "messages",
        "distinct_keys",
        "peak_counters",
        "flush_records",
    ])?;
    w.write_record([
        "summary".to_string(),
        r.policy.clone(),
        r.workers.to_string(),
        r.period.map_or_else(|| "inf".into(), |p| p.to_string()),
        r.messages.to_string(),
        r.distinct_keys.to_string(),
        r.peak_counters.to_string(),
        r.flush_records.to_string(),
    ])?;
    for (rank, (key, total)) in r.final_topk.iter().enumerate() {
        w.write_record([
            "topk".to_string(),
            (rank + 1).to_string(),
            key_label(*key, interner),
            total.to_string(),
        ])?;
    }
    if per_flush {
        for f in &r.flushes {
            w.write_record([
                "flush".to_string(),
                f.timestamp.to_string(),
                f.records.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_memory<W: Write>(out: W, rows: &[MemoryRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "policy",
        "W",
        "distinct_keys",
        "peak_counters",
        "flush_records",
    ])?;
    for r in rows {
        w.write_record([
            r.policy.clone(),
            r.workers.to_string(),
            r.distinct_keys.to_string(),
            r.peak_counters.to_string(),
            r.flush_records.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
