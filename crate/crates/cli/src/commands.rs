//! Command implementations behind the CLI. Each returns the process exit
//! code: 0 ok, 2 config error (via Err), 3 divergence in some run, 4 partial
//! suite failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gsgd_core::data::iqr_filter;
use gsgd_core::engine::Mode;
use gsgd_core::optim::Rule;
use gsgd_core::stats::wilcoxon_signed_rank_two_tailed;

use crate::config::{Algo, ExperimentConfig};
use crate::csvio::{load_csv, write_csv, CsvSchema};
use crate::report::{self, BenchRow, PairRow, SweepRow, WinRow};
use crate::runner::{run_experiment, ExperimentOutcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DIVERGENCE: i32 = 3;
pub const EXIT_PARTIAL_FAILURE: i32 = 4;

fn schema_for(cfg: &ExperimentConfig) -> CsvSchema {
    CsvSchema {
        has_header: cfg.has_header,
        label_col: cfg.label_col,
        ..CsvSchema::default()
    }
}

fn prepare_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

/// `runs` seeded repetitions on one dataset; writes per-run artifacts, the
/// canonical config echo, and a summary.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<i32> {
    if cfg.dataset.as_os_str().is_empty() {
        bail!("no dataset given (use --dataset or a config file)");
    }
    prepare_out_dir(&cfg.out)?;
    fs::write(cfg.out.join("config.cfg"), cfg.render())?;
    let loaded = load_csv(&cfg.dataset, &schema_for(cfg))?;
    let outcome = run_experiment(cfg, &loaded.dataset, Some(&cfg.out))?;
    report::write_summary(
        &cfg.out.join("summary.txt"),
        &loaded.dataset.name,
        cfg.algo.name(),
        outcome.summary.as_ref(),
        &outcome.divergent_seeds,
    )?;
    if let Some(s) = &outcome.summary {
        println!(
            "{} on {}: best {} mean {} +- {} ({} runs, {} divergent)",
            cfg.algo.name(),
            loaded.dataset.name,
            report::sig5(s.best),
            report::sig5(s.mean_trimmed),
            report::sig5(s.tolerance),
            s.n,
            outcome.divergent_seeds.len()
        );
    } else {
        println!(
            "{} on {}: every run diverged",
            cfg.algo.name(),
            loaded.dataset.name
        );
    }
    Ok(if outcome.any_diverged() { EXIT_DIVERGENCE } else { EXIT_OK })
}

/// Datasets x algorithms comparison suite: per-cell summaries, per-pairing
/// Wilcoxon p-values, and guided-vs-naive win counts.
pub fn cmd_bench(base: &ExperimentConfig, datasets: &[PathBuf], algos: &[Algo]) -> Result<i32> {
    if datasets.is_empty() || algos.is_empty() {
        bail!("bench needs --datasets and --algos");
    }
    prepare_out_dir(&base.out)?;
    fs::write(base.out.join("config.cfg"), base.render())?;

    let mut rows: Vec<BenchRow> = Vec::new();
    let mut pair_rows: Vec<PairRow> = Vec::new();
    let mut wins: BTreeMap<(Algo, Algo), (usize, usize)> = BTreeMap::new();
    let mut any_failed = false;

    for path in datasets {
        let loaded = match load_csv(path, &schema_for(base)) {
            Ok(l) => l,
            Err(e) => {
                eprintln!("dataset {} failed: {e:#}", path.display());
                any_failed = true;
                for algo in algos {
                    rows.push(BenchRow {
                        dataset: path.display().to_string(),
                        algorithm: algo.name().to_string(),
                        status: "failed",
                        summary: None,
                        divergent: 0,
                    });
                }
                continue;
            }
        };
        let name = loaded.dataset.name.clone();
        let mut outcomes: BTreeMap<&'static str, ExperimentOutcome> = BTreeMap::new();
        for algo in algos {
            let mut cfg = base.clone();
            cfg.algo = *algo;
            cfg.dataset = path.clone();
            let outcome = run_experiment(&cfg, &loaded.dataset, None)
                .with_context(|| format!("{} on {}", algo.name(), name))?;
            println!(
                "{name}/{}: {}",
                algo.name(),
                match &outcome.summary {
                    Some(s) => format!(
                        "best {} mean {} +- {}",
                        report::sig5(s.best),
                        report::sig5(s.mean_trimmed),
                        report::sig5(s.tolerance)
                    ),
                    None => "all runs diverged".to_string(),
                }
            );
            rows.push(BenchRow {
                dataset: name.clone(),
                algorithm: algo.name().to_string(),
                status: "ok",
                summary: outcome.summary.clone(),
                divergent: outcome.divergent_seeds.len(),
            });
            outcomes.insert(algo.name(), outcome);
        }

        for (baseline, guided) in Algo::PAIRINGS {
            let (Some(b), Some(g)) = (outcomes.get(baseline.name()), outcomes.get(guided.name()))
            else {
                continue;
            };
            // pair by run index, dropping pairs where either run diverged
            let mut bs = Vec::new();
            let mut gs = Vec::new();
            for (bv, gv) in b.accuracies_pct.iter().zip(&g.accuracies_pct) {
                if let (Some(bv), Some(gv)) = (bv, gv) {
                    bs.push(*bv);
                    gs.push(*gv);
                }
            }
            if bs.is_empty() {
                continue;
            }
            let w = wilcoxon_signed_rank_two_tailed(&gs, &bs)?;
            pair_rows.push(PairRow {
                dataset: name.clone(),
                baseline: baseline.name().to_string(),
                guided: guided.name().to_string(),
                statistic: w.statistic,
                p_value: w.p_value,
            });
            if let (Some(sb), Some(sg)) = (&b.summary, &g.summary) {
                let e = wins.entry((baseline, guided)).or_insert((0, 0));
                e.1 += 1;
                if sg.mean_trimmed >= sb.mean_trimmed {
                    e.0 += 1;
                }
            }
        }
    }

    report::write_results_csv(&base.out.join("results.csv"), &rows)?;
    report::write_pvalues_csv(&base.out.join("pvalues.csv"), &pair_rows)?;
    let win_rows: Vec<WinRow> = wins
        .iter()
        .map(|((b, g), (w, t))| WinRow {
            baseline: b.name().to_string(),
            guided: g.name().to_string(),
            wins: *w,
            total: *t,
        })
        .collect();
    report::write_wins_csv(&base.out.join("wins.csv"), &win_rows)?;
    Ok(if any_failed { EXIT_PARTIAL_FAILURE } else { EXIT_OK })
}

/// Sequential algorithm name used for the rho = 0 sentinel row.
fn sequential_name(rule: Rule) -> &'static str {
    match rule {
        Rule::Vanilla => "sgd",
        Rule::Rmsprop => "seq-rmsprop",
        Rule::Adagrad => "seq-adagrad",
    }
}

/// Mean accuracy per rho value with c = rho; rho = 0 runs the unguided
/// sequential process (no delay to compensate).
pub fn cmd_sweep_rho(base: &ExperimentConfig, rho_values: &[u64]) -> Result<i32> {
    if rho_values.is_empty() {
        bail!("sweep-rho needs --rho-values");
    }
    if base.dataset.as_os_str().is_empty() {
        bail!("no dataset given (use --dataset or a config file)");
    }
    prepare_out_dir(&base.out)?;
    fs::write(base.out.join("config.cfg"), base.render())?;
    let loaded = load_csv(&base.dataset, &schema_for(base))?;

    let mut rows = Vec::new();
    let mut any_diverged = false;
    for &rho in rho_values {
        let (algorithm, workers, outcome) = if rho == 0 {
            // no delay to compensate: unguided sequential, same rule
            let rule = base.algo.rule();
            let outcome = crate::runner::run_with(base, &loaded.dataset, None, |seed| {
                let mut e = base.engine_config(seed);
                e.mode = Mode::Sequential;
                e.guided = false;
                e.rule = rule;
                e.workers = 1;
                e
            })?;
            (sequential_name(rule).to_string(), 1usize, outcome)
        } else {
            let mut cfg = base.clone();
            cfg.rho = rho;
            cfg.workers = None; // the paper's c = rho convention
            cfg.replay_cap = base.replay_cap.min(rho as usize);
            let workers = cfg.effective_workers();
            let outcome = run_experiment(&cfg, &loaded.dataset, None)?;
            (base.algo.name().to_string(), workers, outcome)
        };
        any_diverged |= outcome.any_diverged();
        let Some(summary) = outcome.summary else {
            bail!("rho = {rho}: every run diverged; no mean to report");
        };
        println!(
            "rho {rho} ({algorithm}, c = {workers}): mean {} +- {}",
            report::sig5(summary.mean_trimmed),
            report::sig5(summary.tolerance)
        );
        rows.push(SweepRow {
            rho,
            workers,
            algorithm,
            summary,
        });
    }
    report::write_sweep_csv(&base.out.join("sweep.csv"), &rows)?;
    Ok(if any_diverged { EXIT_DIVERGENCE } else { EXIT_OK })
}

/// IQR-filter a dataset CSV; prints the removed-row count.
pub fn cmd_filter(
    input: &Path,
    output: &Path,
    factor: f64,
    has_header: bool,
    label_col: Option<usize>,
) -> Result<i32> {
    let schema = CsvSchema {
        has_header,
        label_col,
        ..CsvSchema::default()
    };
    let loaded = load_csv(input, &schema)?;
    let (filtered, removed) = iqr_filter(&loaded.dataset, factor)?;
    if let Some(dir) = output.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    write_csv(output, &filtered, loaded.header.as_deref(), loaded.label_col)?;
    println!(
        "removed {} of {} rows (factor {factor}); wrote {}",
        removed.len(),
        loaded.dataset.len(),
        output.display()
    );
    Ok(EXIT_OK)
}
