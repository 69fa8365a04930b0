//! Subcommand implementations: repetition fan-out, aggregation, and artifact
//! writing (JSONL run records, CSV aggregates, JSON manifests).

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use alphaes::acquisition::{aes_value, ensemble_prepare, ensemble_value};
use alphaes::engine::{run, BoConfig, Method, RunRecord};
use alphaes::objectives::{list_objectives, resolve_objective, Objective};
use alphaes::oracle::{landscape_experiment, landscape_problem, linspace, ExactAcquisitionOracle};
use alphaes::seed;
use alphaes::stats::{mean_stderr, spearman};

use crate::config::{ExperimentConfig, NoiseModeConfig};

/// Aggregate-regret CSV schema for plain runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: String,
    pub iteration: usize,
    pub mean_regret: f64,
    pub stderr: f64,
}

/// Aggregate-regret CSV schema for the sample-count study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleStudyRow {
    pub method: String,
    pub s: usize,
    pub iteration: usize,
    pub mean_regret: f64,
    pub stderr: f64,
}

/// Landscape-counts CSV schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeRow {
    pub method: String,
    pub rep: usize,
    pub count: usize,
}

/// Oracle-comparison curves CSV schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCurveRow {
    pub alpha: String,
    pub x: f64,
    pub approximate: f64,
    pub oracle: f64,
}

/// Outcome of a fan-out command.
#[derive(Debug, Clone, Copy)]
pub struct RunOutcome {
    pub total_runs: usize,
    pub failed_runs: usize,
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if workers > 0 {
        builder = builder.num_threads(workers);
    }
    builder.build().context("building worker pool")
}

fn objective_for_rep(cfg: &ExperimentConfig, rep: u64) -> Result<Objective> {
    let name = cfg
        .objective
        .as_deref()
        .ok_or_else(|| anyhow::anyhow!("config error: missing 'objective'"))?;
    let obj_seed = if cfg.redraw_objective_per_rep {
        seed::mix(seed::rep_seed(cfg.seed, rep), 0xB10)
    } else {
        cfg.seed
    };
    Ok(resolve_objective(name, obj_seed)?)
}

fn bo_config(cfg: &ExperimentConfig, method: Method, s: usize, rep: u64) -> BoConfig {
    BoConfig {
        method,
        budget: cfg.budget,
        n_initial: cfg.n_initial,
        num_solution_samples: s,
        num_features: cfg.m,
        noise_mode: cfg.noise_mode.to_engine(),
        fix_noise_to_truth: cfg.fix_noise_to_truth,
        acq_optimizer: cfg.acq_optimizer(),
        seed: seed::rep_seed(cfg.seed, rep),
        ..BoConfig::default()
    }
}

/// Per-iteration mean and standard error of the regret over completed runs.
fn aggregate_regrets(records: &[&RunRecord], budget: usize) -> Vec<(f64, f64)> {
    (0..budget)
        .map(|i| {
            let values: Vec<f64> = records
                .iter()
                .filter(|r| !r.failed)
                .filter_map(|r| r.iterations.get(i).and_then(|it| it.regret))
                .collect();
            mean_stderr(&values)
        })
        .collect()
}

fn write_manifest(cfg: &ExperimentConfig, command: &str, extra: serde_json::Value) -> Result<()> {
    let manifest = serde_json::json!({
        "command": command,
        "config": cfg,
        "git_revision": git_revision(),
        "extra": extra,
    });
    let path = cfg.out.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn git_revision() -> String {
    std::process::Command::new("git")
        .args(["rev-parse", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .unwrap_or_else(|| "unknown".to_string())
}

fn write_run_records(out: &Path, tag: &str, records: &[RunRecord]) -> Result<()> {
    let dir = out.join("runs");
    fs::create_dir_all(&dir)?;
    for (rep, record) in records.iter().enumerate() {
        let path = dir.join(format!("{}_{tag}_rep{rep:03}.jsonl", record.method.replace(':', "-")));
        let mut file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        record.write_jsonl(&mut file)?;
        file.flush()?;
    }
    Ok(())
}

/// `run`: one aggregate curve per method over `reps` repetitions.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let methods = cfg.parsed_methods()?;
    if methods.is_empty() {
        anyhow::bail!("config error: 'methods' must not be empty");
    }
    fs::create_dir_all(&cfg.out)?;
    let pool = thread_pool(cfg.workers)?;

    // One objective per repetition, shared across methods so comparisons pair up.
    let per_rep: Vec<Vec<RunRecord>> = pool.install(|| {
        (0..cfg.reps as u64)
            .into_par_iter()
            .map(|rep| -> Result<Vec<RunRecord>> {
                let obj = objective_for_rep(cfg, rep)?;
                methods
                    .iter()
                    .map(|method| {
                        let bo = bo_config(cfg, method.clone(), cfg.s, rep);
                        Ok(run(&obj, &bo)?)
                    })
                    .collect()
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut rows = Vec::new();
    let mut failed = 0usize;
    for (m_idx, method) in methods.iter().enumerate() {
        let records: Vec<&RunRecord> = per_rep.iter().map(|reps| &reps[m_idx]).collect();
        failed += records.iter().filter(|r| r.failed).count();
        for (i, (mean, se)) in aggregate_regrets(&records, cfg.budget).iter().enumerate() {
            rows.push(AggregateRow {
                method: method.label(),
                iteration: i + 1,
                mean_regret: *mean,
                stderr: *se,
            });
        }
        let flat: Vec<RunRecord> = per_rep.iter().map(|reps| reps[m_idx].clone()).collect();
        write_run_records(&cfg.out, "run", &flat)?;
    }
    write_csv(&cfg.out.join("aggregate.csv"), &rows)?;
    write_manifest(cfg, "run", serde_json::json!({"failed_runs": failed}))?;
    Ok(RunOutcome {
        total_runs: cfg.reps * methods.len(),
        failed_runs: failed,
    })
}

/// `sample-study`: aggregate curves per (method, S).
pub fn cmd_sample_study(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let methods = cfg.parsed_methods()?;
    if methods.is_empty() {
        anyhow::bail!("config error: 'methods' must not be empty");
    }
    fs::create_dir_all(&cfg.out)?;
    let pool = thread_pool(cfg.workers)?;

    let mut rows = Vec::new();
    let mut failed = 0usize;
    let mut total = 0usize;
    for &s in &cfg.s_list {
        let per_rep: Vec<Vec<RunRecord>> = pool.install(|| {
            (0..cfg.reps as u64)
                .into_par_iter()
                .map(|rep| -> Result<Vec<RunRecord>> {
                    let obj = objective_for_rep(cfg, rep)?;
                    methods
                        .iter()
                        .map(|method| {
                            let bo = bo_config(cfg, method.clone(), s, rep);
                            Ok(run(&obj, &bo)?)
                        })
                        .collect()
                })
                .collect::<Result<Vec<_>>>()
        })?;
        for (m_idx, method) in methods.iter().enumerate() {
            let records: Vec<&RunRecord> = per_rep.iter().map(|reps| &reps[m_idx]).collect();
            failed += records.iter().filter(|r| r.failed).count();
            total += records.len();
            for (i, (mean, se)) in aggregate_regrets(&records, cfg.budget).iter().enumerate() {
                rows.push(SampleStudyRow {
                    method: method.label(),
                    s,
                    iteration: i + 1,
                    mean_regret: *mean,
                    stderr: *se,
                });
            }
            let flat: Vec<RunRecord> = per_rep.iter().map(|reps| reps[m_idx].clone()).collect();
            write_run_records(&cfg.out, &format!("S{s}"), &flat)?;
        }
    }
    write_csv(&cfg.out.join("aggregate.csv"), &rows)?;
    write_manifest(cfg, "sample-study", serde_json::json!({"failed_runs": failed}))?;
    Ok(RunOutcome {
        total_runs: total,
        failed_runs: failed,
    })
}

/// `landscape`: local-maxima counts per repetition plus a summary.
pub fn cmd_landscape(cfg: &ExperimentConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out)?;
    let outcome = landscape_experiment(&cfg.landscape_core(), cfg.landscape.reps, cfg.seed)?;

    let mut rows = Vec::new();
    for (method, counts) in &outcome.counts {
        for (rep, count) in counts.iter().enumerate() {
            rows.push(LandscapeRow {
                method: method.clone(),
                rep,
                count: *count,
            });
        }
    }
    write_csv(&cfg.out.join("counts.csv"), &rows)?;

    let summary: serde_json::Value = outcome
        .summary()
        .into_iter()
        .map(|(name, mean, se)| (name, serde_json::json!({"mean": mean, "stderr": se})))
        .collect::<serde_json::Map<_, _>>()
        .into();
    fs::write(cfg.out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    write_manifest(cfg, "landscape", serde_json::json!({"reps": cfg.landscape.reps}))?;
    Ok(())
}

/// `oracle-compare`: approximate-vs-exact acquisition curves on the 1-D demo
/// with rank-correlation and underestimation summaries.
pub fn cmd_oracle_compare(cfg: &ExperimentConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out)?;
    let land = cfg.landscape_core();
    let (model, ctx) = landscape_problem(&land, cfg.seed)?;
    let grid = linspace(land.domain.0, land.domain.1, cfg.oracle.grid_size);

    let oracle_cfg = cfg.oracle.to_core();
    let oracle = ExactAcquisitionOracle::build(&model, grid.clone(), oracle_cfg, seed::mix(cfg.seed, 0x0C))?;
    let exact = oracle.curves(&cfg.alphas)?;

    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (a_idx, &alpha) in cfg.alphas.iter().enumerate() {
        let approx: Vec<f64> = grid
            .iter()
            .map(|x| aes_value(&ctx, &[*x], alpha))
            .collect::<alphaes::Result<_>>()?;
        let exact_curve = &exact.curves[a_idx];
        let rho = spearman(&approx, exact_curve);
        let below = approx
            .iter()
            .zip(exact_curve)
            .filter(|(a, o)| **a <= **o + 1e-12)
            .count() as f64
            / grid.len() as f64;
        summary.push(serde_json::json!({
            "alpha": alpha,
            "spearman": rho,
            "fraction_below_oracle": below,
        }));
        for ((x, a), o) in grid.iter().zip(&approx).zip(exact_curve) {
            rows.push(OracleCurveRow {
                alpha: format!("{alpha}"),
                x: *x,
                approximate: *a,
                oracle: *o,
            });
        }
    }

    // Ensemble pair: approximate normalized combination vs the oracle's
    // grid-normalized combination.
    let spec = ensemble_prepare(&ctx, &cfg.alphas, &cfg.acq_optimizer(), seed::mix(cfg.seed, 0x0D))?;
    let approx_ens: Vec<f64> = grid
        .iter()
        .map(|x| ensemble_value(&spec, &ctx, &[*x]))
        .collect::<alphaes::Result<_>>()?;
    let rho_ens = spearman(&approx_ens, &exact.ensemble);
    summary.push(serde_json::json!({
        "alpha": "ensemble",
        "spearman": rho_ens,
    }));
    for ((x, a), o) in grid.iter().zip(&approx_ens).zip(&exact.ensemble) {
        rows.push(OracleCurveRow {
            alpha: "ensemble".into(),
            x: *x,
            approximate: *a,
            oracle: *o,
        });
    }

    write_csv(&cfg.out.join("curves.csv"), &rows)?;
    let summary_value = serde_json::json!({
        "per_alpha": summary,
        "skipped_samples": exact.skipped_samples,
        "widened_samples": exact.widened_samples,
    });
    fs::write(cfg.out.join("summary.json"), serde_json::to_string_pretty(&summary_value)?)?;
    write_manifest(cfg, "oracle-compare", serde_json::json!({}))?;
    Ok(())
}

/// `list-objectives` output.
pub fn objectives_listing() -> String {
    let mut out = String::from("available objectives:\n");
    for name in list_objectives() {
        out.push_str("  ");
        out.push_str(name);
        out.push('\n');
    }
    out
}

/// Writes serializable rows as CSV with a fixed header.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads CSV rows back; the schema round-trip counterpart of [`write_csv`].
pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for row in reader.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

/// Warn-level sanity note for declared-noisy configs with zero variance.
pub fn sanity_warnings(cfg: &ExperimentConfig) {
    if let NoiseModeConfig::Noisy(v) = cfg.noise_mode {
        if v == 0.0 {
            log::warn!("noise_mode is 'noisy' with zero variance; consider 'noiseless'");
        }
    }
}
