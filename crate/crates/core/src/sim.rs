//! Time-stepped simulation loop with periodic load balancing.
//!
//! Static workloads keep their loads and edges fixed between rounds. PIC
//! workloads advance the particle state every step and rebuild chare loads
//! and edge bytes while the placement carries over, so each balancing round
//! refines the previous mapping instead of starting from scratch.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::generators::{node_particle_counts, pic_step, pic_to_snapshot, PicState};
use crate::metrics::{compute_metrics, MetricsReport, RoundRecord};
use crate::migration::apply_plan;
use crate::model::{MigrationPlan, WorkloadSnapshot};
use crate::strategy::{run_round, StrategyConfig};

/// What the simulation advances each step.
#[derive(Debug, Clone)]
pub enum SimWorkload {
    /// Loads and edges are constant; only placement evolves.
    Static(WorkloadSnapshot),
    /// Particle state drives loads and edges; placement persists.
    Pic(PicState),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub report: MetricsReport,
    pub final_snapshot: WorkloadSnapshot,
    /// Per-step particles per node (PIC only), indexed `[step][node]`;
    /// entry 0 is the initial state, so the length is `steps + 1`.
    pub particle_series: Option<Vec<Vec<usize>>>,
    /// Mean of the per-step max/avg particle ratio over steps at or after
    /// the first balancing opportunity (PIC only).
    pub mean_particle_ratio: Option<f64>,
    /// The plan applied at each round, for audit logs.
    pub round_plans: Vec<MigrationPlan>,
    /// Post-round snapshots, kept only on request.
    pub round_snapshots: Option<Vec<WorkloadSnapshot>>,
}

fn particle_ratio(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 1.0;
    }
    let max = *counts.iter().max().unwrap() as f64;
    max / (total as f64 / counts.len() as f64)
}

/// Run `steps` application steps, invoking the strategy pipeline every
/// `lb_every` steps and applying each resulting plan.
pub fn run_simulation(
    workload: SimWorkload,
    config: &StrategyConfig,
    lb_every: usize,
    steps: usize,
) -> Result<SimulationResult> {
    run_simulation_with(workload, config, lb_every, steps, false)
}

/// [`run_simulation`] with per-round snapshot retention.
pub fn run_simulation_with(
    workload: SimWorkload,
    config: &StrategyConfig,
    lb_every: usize,
    steps: usize,
    keep_round_snapshots: bool,
) -> Result<SimulationResult> {
    assert!(lb_every > 0, "lb_every must be positive");

    let (mut pic_state, mut snapshot) = match workload {
        SimWorkload::Static(s) => {
            s.validate()?;
            (None, s)
        }
        SimWorkload::Pic(state) => {
            let placement: Vec<usize> = {
                let initial = crate::generators::initial_placement(&state.spec);
                initial
            };
            let snap = pic_to_snapshot(&state, &placement)?;
            (Some(state), snap)
        }
    };
    let initial_snapshot = snapshot.clone();

    let mut particle_series: Option<Vec<Vec<usize>>> = pic_state.as_ref().map(|state| {
        vec![node_particle_counts(
            state,
            &chare_placement(&snapshot),
        )]
    });

    let mut rounds: Vec<RoundRecord> = Vec::new();
    let mut round_plans: Vec<MigrationPlan> = Vec::new();
    let mut round_snapshots: Option<Vec<WorkloadSnapshot>> =
        keep_round_snapshots.then(Vec::new);
    let mut total_wall = 0.0f64;

    for step in 1..=steps {
        if let Some(state) = pic_state.as_mut() {
            *state = pic_step(state);
            let placement = chare_placement(&snapshot);
            snapshot = pic_to_snapshot(state, &placement)?;
        }

        if step % lb_every == 0 {
            let round = rounds.len() + 1;
            let fail = |e: crate::Error| crate::Error::Round {
                round,
                step,
                source: Box::new(e),
            };
            let before = snapshot.clone();
            let t0 = Instant::now();
            let outcome = run_round(&snapshot, config).map_err(fail)?;
            let wall = t0.elapsed().as_secs_f64();
            total_wall += wall;
            snapshot = apply_plan(&snapshot, &outcome.plan).map_err(fail)?;
            let m = compute_metrics(&snapshot, Some(&before));
            rounds.push(RoundRecord {
                round,
                step,
                max_avg_load: m.max_avg_load,
                ext_bytes: m.ext_bytes,
                int_bytes: m.int_bytes,
                ext_int_ratio: m.ext_int_ratio,
                migration_fraction: m.migration_fraction,
                particle_max_avg: pic_state.as_ref().map(|state| {
                    particle_ratio(&node_particle_counts(state, &chare_placement(&snapshot)))
                }),
                strategy_wall_time_s: wall,
                diagnostics: outcome.diagnostics,
            });
            round_plans.push(outcome.plan);
            if let Some(list) = round_snapshots.as_mut() {
                list.push(snapshot.clone());
            }
        }

        if let (Some(state), Some(series)) = (pic_state.as_ref(), particle_series.as_mut()) {
            series.push(node_particle_counts(state, &chare_placement(&snapshot)));
        }
    }

    let mean_particle_ratio = particle_series.as_ref().map(|series| {
        let from = lb_every.min(steps);
        let window: Vec<f64> = series[from..].iter().map(|c| particle_ratio(c)).collect();
        window.iter().sum::<f64>() / window.len().max(1) as f64
    });

    let mut report = compute_metrics(&snapshot, Some(&initial_snapshot));
    report.strategy_wall_time_s = total_wall;
    if let Some(last) = rounds.last() {
        report.diagnostics = last.diagnostics.clone();
    }
    report.per_round_series = rounds;

    Ok(SimulationResult {
        report,
        final_snapshot: snapshot,
        particle_series,
        mean_particle_ratio,
        round_plans,
        round_snapshots,
    })
}

/// Chare/object home nodes indexed by object id.
fn chare_placement(s: &WorkloadSnapshot) -> Vec<usize> {
    s.objects.iter().map(|o| o.home_node).collect()
}
