//! Report writers: per-run metrics CSVs, flat key=value run results and
//! summaries, and the bench/sweep tables. All numeric output uses 5
//! significant digits; accuracies are reported in percent.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use gsgd_core::engine::RunResult;
use gsgd_core::stats::StatsSummary;

/// Format with 5 significant digits, plain decimal notation.
pub fn sig5(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (4 - mag).clamp(0, 17) as usize;
    if mag > 4 {
        // round to 5 significant digits above the decimal point
        let scale = 10f64.powi(mag - 4);
        format!("{:.0}", (x / scale).round() * scale)
    } else {
        format!("{x:.decimals$}")
    }
}

pub fn percent(frac: f64) -> f64 {
    frac * 100.0
}

pub fn write_metrics_csv(path: &Path, result: &RunResult) -> Result<()> {
    let mut out = BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    );
    writeln!(
        out,
        "epoch,train_loss,val_loss,val_accuracy,updates,replays,mean_staleness"
    )?;
    for m in &result.epoch_metrics {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            m.epoch,
            sig5(m.train_loss),
            sig5(m.val_loss),
            sig5(percent(m.val_accuracy)),
            m.updates,
            m.replays,
            sig5(m.mean_staleness)
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_run_result(path: &Path, result: &RunResult, algo: &str, dataset: &str) -> Result<()> {
    let mut out = BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    );
    writeln!(out, "dataset={dataset}")?;
    writeln!(out, "algorithm={algo}")?;
    writeln!(out, "seed={}", result.seed)?;
    writeln!(out, "final_test_accuracy={}", sig5(percent(result.final_test_accuracy)))?;
    writeln!(out, "applied_updates={}", result.applied_count)?;
    writeln!(out, "replayed_updates={}", result.replay_count)?;
    writeln!(out, "update_count={}", result.update_count)?;
    writeln!(out, "final_version={}", result.final_version)?;
    writeln!(out, "guided_touches={}", result.guided_touches)?;
    writeln!(out, "wall_time_ms={}", result.wall_time.as_millis())?;
    let hist = result
        .staleness_histogram
        .iter()
        .map(|(k, v)| format!("{k}:{v}"))
        .collect::<Vec<_>>()
        .join(";");
    writeln!(out, "staleness_histogram={hist}")?;
    let per_worker = result
        .per_worker_applied
        .iter()
        .map(u64::to_string)
        .collect::<Vec<_>>()
        .join(";");
    writeln!(out, "per_worker_applied={per_worker}")?;
    match &result.diverged {
        Some(d) => writeln!(out, "diverged=update {}: {}", d.update, d.reason)?,
        None => writeln!(out, "diverged=none")?,
    }
    out.flush()?;
    Ok(())
}

pub fn write_summary(
    path: &Path,
    dataset: &str,
    algo: &str,
    summary: Option<&StatsSummary>,
    divergent_seeds: &[u64],
) -> Result<()> {
    let mut out = BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    );
    writeln!(out, "dataset={dataset}")?;
    writeln!(out, "algorithm={algo}")?;
    match summary {
        Some(s) => {
            writeln!(out, "runs={}", s.n)?;
            writeln!(out, "best={}", sig5(s.best))?;
            writeln!(out, "mean={}", sig5(s.mean_trimmed))?;
            writeln!(out, "tolerance={}", sig5(s.tolerance))?;
            writeln!(out, "q1={}", sig5(s.q1))?;
            writeln!(out, "q3={}", sig5(s.q3))?;
        }
        None => writeln!(out, "runs=0")?,
    }
    let div = divergent_seeds
        .iter()
        .map(u64::to_string)
        .collect::<Vec<_>>()
        .join(";");
    writeln!(out, "divergent_seeds={div}")?;
    out.flush()?;
    Ok(())
}

/// One bench-results row.
pub struct BenchRow {
    pub dataset: String,
    pub algorithm: String,
    pub status: &'static str,
    pub summary: Option<StatsSummary>,
    pub divergent: usize,
}

pub fn write_results_csv(path: &Path, rows: &[BenchRow]) -> Result<()> {
    let mut out = BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    );
    writeln!(out, "dataset,algorithm,status,runs,divergent,best,mean,tolerance,q1,q3")?;
    for r in rows {
        match &r.summary {
            Some(s) => writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.dataset,
                r.algorithm,
                r.status,
                s.n,
                r.divergent,
                sig5(s.best),
                sig5(s.mean_trimmed),
                sig5(s.tolerance),
                sig5(s.q1),
                sig5(s.q3)
            )?,
            None => writeln!(
                out,
                "{},{},{},0,{},,,,,",
                r.dataset, r.algorithm, r.status, r.divergent
            )?,
        }
    }
    out.flush()?;
    Ok(())
}

pub struct PairRow {
    pub dataset: String,
    pub baseline: String,
    pub guided: String,
    pub statistic: f64,
    pub p_value: f64,
}

pub fn write_pvalues_csv(path: &Path, rows: &[PairRow]) -> Result<()> {
    let mut out = BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    );
    // insignificant = the paper's dagger marker (p > 0.05)
    writeln!(out, "dataset,baseline,guided,statistic,p_value,insignificant")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.dataset,
            r.baseline,
            r.guided,
            sig5(r.statistic),
            sig5(r.p_value),
            r.p_value > 0.05
        )?;
    }
    out.flush()?;
    Ok(())
}

pub struct WinRow {
    pub baseline: String,
    pub guided: String,
    pub wins: usize,
    pub total: usize,
}

pub fn write_wins_csv(path: &Path, rows: &[WinRow]) -> Result<()> {
    let mut out = BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    );
    writeln!(out, "baseline,guided,guided_wins,datasets")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.baseline, r.guided, r.wins, r.total)?;
    }
    out.flush()?;
    Ok(())
}

pub struct SweepRow {
    pub rho: u64,
    pub workers: usize,
    pub algorithm: String,
    pub summary: StatsSummary,
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut out = BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    );
    writeln!(out, "rho,workers,algorithm,runs,mean,tolerance,best")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.rho,
            r.workers,
            r.algorithm,
            r.summary.n,
            sig5(r.summary.mean_trimmed),
            sig5(r.summary.tolerance),
            sig5(r.summary.best)
        )?;
    }
    out.flush()?;
    Ok(())
}
