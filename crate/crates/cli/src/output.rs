//! Run artifacts: per-run directory with a manifest, deterministic metrics
//! and series files, and a separate timings file for the machine-dependent
//! wall-clock numbers.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

use simlb_core::format::render_snapshot;
use simlb_core::sim::SimulationResult;
use simlb_core::strategy::StrategyConfig;

pub const OUT_DIR_ENV: &str = "SIMLB_OUT_DIR";

pub fn resolve_out_dir(explicit: Option<PathBuf>) -> anyhow::Result<PathBuf> {
    let dir = explicit
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("simlb-out"));
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))?;
    Ok(dir)
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    input: String,
    outputs: Vec<String>,
    config: Option<&'a StrategyConfig>,
    lb_every: Option<usize>,
    steps: Option<usize>,
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

#[derive(Serialize)]
struct RoundTiming {
    round: usize,
    step: usize,
    seconds: f64,
}

#[derive(Serialize)]
struct Timings {
    total_seconds: f64,
    per_round: Vec<RoundTiming>,
}

#[allow(clippy::too_many_arguments)]
pub fn write_run_artifacts(
    out_dir: &Path,
    input: &Path,
    config: &StrategyConfig,
    lb_every: usize,
    steps: usize,
    result: &SimulationResult,
    dump_plans: bool,
    dump_rounds: bool,
) -> anyhow::Result<()> {
    let mut outputs = vec![
        "metrics.json".to_string(),
        "series.csv".to_string(),
        "timings.json".to_string(),
    ];

    // Wall-clock numbers go to timings.json only, so metrics.json and the
    // series are byte-stable across identical runs.
    let timings = Timings {
        total_seconds: result.report.strategy_wall_time_s,
        per_round: result
            .report
            .per_round_series
            .iter()
            .map(|r| RoundTiming {
                round: r.round,
                step: r.step,
                seconds: r.strategy_wall_time_s,
            })
            .collect(),
    };
    write_json(&out_dir.join("timings.json"), &timings)?;

    let mut deterministic = result.report.clone();
    deterministic.strategy_wall_time_s = 0.0;
    for r in &mut deterministic.per_round_series {
        r.strategy_wall_time_s = 0.0;
    }
    write_json(&out_dir.join("metrics.json"), &deterministic)?;

    let mut csv = String::from(
        "round,step,max_avg_load,ext_int_ratio,ext_bytes,int_bytes,migration_fraction,particle_max_avg\n",
    );
    for r in &result.report.per_round_series {
        let particle = r
            .particle_max_avg
            .map(|v| v.to_string())
            .unwrap_or_default();
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            r.round,
            r.step,
            r.max_avg_load,
            r.ext_int_ratio,
            r.ext_bytes,
            r.int_bytes,
            r.migration_fraction,
            particle
        );
    }
    std::fs::write(out_dir.join("series.csv"), csv)?;

    if let Some(series) = &result.particle_series {
        let nodes = series.first().map_or(0, Vec::len);
        let mut csv = String::from("step");
        for n in 0..nodes {
            let _ = write!(csv, ",node{n}");
        }
        csv.push_str(",max_avg\n");
        for (step, counts) in series.iter().enumerate() {
            let _ = write!(csv, "{step}");
            for c in counts {
                let _ = write!(csv, ",{c}");
            }
            let total: usize = counts.iter().sum();
            let ratio = if total == 0 {
                1.0
            } else {
                *counts.iter().max().unwrap() as f64 * nodes as f64 / total as f64
            };
            let _ = writeln!(csv, ",{ratio}");
        }
        std::fs::write(out_dir.join("particles.csv"), csv)?;
        outputs.push("particles.csv".to_string());
    }

    std::fs::write(
        out_dir.join("final.snap"),
        render_snapshot(&result.final_snapshot),
    )?;
    outputs.push("final.snap".to_string());

    if dump_plans {
        let mut lines = String::new();
        for plan in &result.round_plans {
            let _ = writeln!(lines, "{}", serde_json::to_string(plan)?);
        }
        std::fs::write(out_dir.join("plans.jsonl"), lines)?;
        outputs.push("plans.jsonl".to_string());
    }
    if dump_rounds {
        if let Some(snapshots) = &result.round_snapshots {
            let dir = out_dir.join("rounds");
            std::fs::create_dir_all(&dir)?;
            for (i, snap) in snapshots.iter().enumerate() {
                let name = format!("round_{:04}.snap", i + 1);
                std::fs::write(dir.join(&name), render_snapshot(snap))?;
                outputs.push(format!("rounds/{name}"));
            }
        }
    }

    let manifest = Manifest {
        tool: "simlb",
        version: env!("CARGO_PKG_VERSION"),
        command: "run",
        input: input.display().to_string(),
        outputs,
        config: Some(config),
        lb_every: Some(lb_every),
        steps: Some(steps),
    };
    write_json(&out_dir.join("manifest.json"), &manifest)?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct CompareRow {
    pub strategy: String,
    pub max_avg_load: Option<f64>,
    pub ext_int_ratio: Option<f64>,
    pub migration_fraction: Option<f64>,
    pub error: Option<String>,
}

impl CompareRow {
    pub fn from_result(strategy: String, result: &SimulationResult) -> Self {
        CompareRow {
            strategy,
            max_avg_load: Some(result.report.max_avg_load),
            ext_int_ratio: Some(result.report.ext_int_ratio),
            migration_fraction: Some(result.report.migration_fraction),
            error: None,
        }
    }

    pub fn failed(strategy: String, error: String) -> Self {
        CompareRow {
            strategy,
            max_avg_load: None,
            ext_int_ratio: None,
            migration_fraction: None,
            error: Some(error),
        }
    }
}

pub fn render_compare_table(rows: &[CompareRow]) -> String {
    let width = rows
        .iter()
        .map(|r| r.strategy.len())
        .chain(std::iter::once("strategy".len()))
        .max()
        .unwrap_or(8);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:width$}  {:>9}  {:>9}  {:>12}",
        "strategy", "max/avg", "ext/int", "migrations"
    );
    for r in rows {
        match &r.error {
            Some(e) => {
                let _ = writeln!(out, "{:width$}  failed: {e}", r.strategy);
            }
            None => {
                let _ = writeln!(
                    out,
                    "{:width$}  {:>9.4}  {:>9.4}  {:>11.1}%",
                    r.strategy,
                    r.max_avg_load.unwrap(),
                    r.ext_int_ratio.unwrap(),
                    r.migration_fraction.unwrap() * 100.0
                );
            }
        }
    }
    out
}

pub fn write_compare_artifacts(
    out_dir: &Path,
    input: &Path,
    rows: &[CompareRow],
    table: &str,
) -> anyhow::Result<()> {
    write_json(&out_dir.join("table.json"), &rows)?;
    std::fs::write(out_dir.join("table.txt"), table)?;
    let manifest = Manifest {
        tool: "simlb",
        version: env!("CARGO_PKG_VERSION"),
        command: "compare",
        input: input.display().to_string(),
        outputs: vec!["table.json".into(), "table.txt".into()],
        config: None,
        lb_every: None,
        steps: None,
    };
    write_json(&out_dir.join("manifest.json"), &manifest)?;
    Ok(())
}
