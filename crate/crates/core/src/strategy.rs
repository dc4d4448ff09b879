//! Strategy configuration and the single-round balancing pipeline.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines;
use crate::diffusion::{self, AlphaRule};
use crate::error::Error;
use crate::metrics::StrategyDiagnostics;
use crate::migration::{self, refine_threads};
use crate::model::{node_comm_matrix, MigrationPlan, WorkloadSnapshot};
use crate::neighbor::{self, TieBreak};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    /// Control arm: no balancing at all.
    None,
    GreedyRefine,
    /// Communication-aware diffusion.
    DiffComm,
    /// Coordinate/centroid diffusion variant.
    DiffCoord,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::None,
        Strategy::GreedyRefine,
        Strategy::DiffComm,
        Strategy::DiffCoord,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::None => "none",
            Strategy::GreedyRefine => "greedy-refine",
            Strategy::DiffComm => "diff-comm",
            Strategy::DiffCoord => "diff-coord",
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "none" => Ok(Strategy::None),
            "greedy-refine" => Ok(Strategy::GreedyRefine),
            "diff-comm" => Ok(Strategy::DiffComm),
            "diff-coord" => Ok(Strategy::DiffCoord),
            other => Err(Error::Config(format!(
                "unknown strategy {other:?} (expected none, greedy-refine, diff-comm, diff-coord)"
            ))),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub strategy: Strategy,
    /// Requested neighbor degree K.
    pub neighbor_count: usize,
    /// Handshake round bound; `None` means `2K + 4`.
    pub max_rounds: Option<usize>,
    pub alpha: AlphaRule,
    /// Relative neighborhood-stddev convergence threshold.
    pub eps: f64,
    pub max_iters: usize,
    pub greedy_tol: f64,
    /// Intra-node thread refinement threshold.
    pub thread_eps: f64,
    /// Reserved for randomized tie-breaking; `None` keeps node-id order.
    pub tie_seed: Option<u64>,
    /// Allow comm-variant nodes that exhausted their communication partners
    /// to pair with zero-communication nodes.
    pub zero_comm_fallback: bool,
}

impl StrategyConfig {
    pub fn new(strategy: Strategy) -> Self {
        StrategyConfig {
            strategy,
            neighbor_count: 4,
            max_rounds: None,
            alpha: AlphaRule::DegreeBased,
            eps: diffusion::DEFAULT_EPS,
            max_iters: diffusion::DEFAULT_MAX_ITERS,
            greedy_tol: baselines::DEFAULT_GREEDY_TOL,
            thread_eps: migration::DEFAULT_THREAD_EPS,
            tie_seed: None,
            zero_comm_fallback: true,
        }
    }

    pub fn with_neighbors(mut self, k: usize) -> Self {
        self.neighbor_count = k;
        self
    }

    fn tie_break(&self) -> TieBreak {
        match self.tie_seed {
            None => TieBreak::NodeId,
            Some(seed) => TieBreak::Seeded(seed),
        }
    }

    fn rounds(&self) -> usize {
        self.max_rounds
            .unwrap_or_else(|| neighbor::default_max_rounds(self.neighbor_count))
    }
}

#[derive(Debug, Clone)]
pub struct RoundOutcome {
    pub plan: MigrationPlan,
    pub diagnostics: StrategyDiagnostics,
}

/// Execute one load balancing round: neighbor graph, virtual diffusion,
/// object selection, and thread refinement (or the configured baseline).
pub fn run_round(s: &WorkloadSnapshot, config: &StrategyConfig) -> crate::Result<RoundOutcome> {
    let mut plan;
    let diagnostics;
    match config.strategy {
        Strategy::None => {
            plan = baselines::no_lb(s);
            diagnostics = StrategyDiagnostics::default();
        }
        Strategy::GreedyRefine => {
            plan = baselines::greedy_refine(s, config.greedy_tol);
            diagnostics = StrategyDiagnostics::default();
        }
        Strategy::DiffComm => {
            let matrix = node_comm_matrix(s);
            let built = neighbor::build_comm_neighbors(
                &matrix,
                s.node_count,
                config.neighbor_count,
                config.rounds(),
                config.tie_break(),
                config.zero_comm_fallback,
            );
            let transfers = diffusion::virtual_balance(
                &s.node_loads(),
                &built.graph,
                config.alpha,
                config.eps,
                config.max_iters,
            );
            let selection = migration::select_objects_comm(s, &transfers);
            plan = selection.plan;
            diagnostics = StrategyDiagnostics::from_stages(
                Some(built.diagnostics),
                Some(&transfers.diagnostics),
                Some(&selection.diagnostics),
            );
        }
        Strategy::DiffCoord => {
            if !s.has_coords() {
                return Err(Error::Config(
                    "diff-coord requires a workload with coordinates".into(),
                ));
            }
            let centroids = neighbor::compute_centroids(s);
            let built = neighbor::build_coord_neighbors(
                &centroids.coords,
                config.neighbor_count,
                config.rounds(),
                config.tie_break(),
            );
            let transfers = diffusion::virtual_balance(
                &s.node_loads(),
                &built.graph,
                config.alpha,
                config.eps,
                config.max_iters,
            );
            let selection = migration::select_objects_coord(s, &transfers, &centroids);
            plan = selection.plan;
            diagnostics = StrategyDiagnostics::from_stages(
                Some(built.diagnostics),
                Some(&transfers.diagnostics),
                Some(&selection.diagnostics),
            );
        }
    }

    if s.threads_per_node > 1 && config.strategy != Strategy::None {
        let after_moves = migration::apply_plan(s, &plan)?;
        plan.thread_moves = refine_threads(&after_moves, config.thread_eps);
    }
    Ok(RoundOutcome { plan, diagnostics })
}
