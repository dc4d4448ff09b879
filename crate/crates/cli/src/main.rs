//! `simlb`: generate workloads, run load balancing strategies, visualize
//! placements, and compare strategies side by side.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime failure.

mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use simlb_core::diffusion::AlphaRule;
use simlb_core::format;
use simlb_core::generators::{
    gen_pic_initial, gen_stencil, ChareMapping, Decomposition, ImbalanceSpec, PicSpec, PicState,
    StencilSpec,
};
use simlb_core::metrics::compute_metrics;
use simlb_core::sim::{run_simulation_with, SimWorkload, SimulationResult};
use simlb_core::strategy::{Strategy, StrategyConfig};

#[derive(Parser)]
#[command(
    name = "simlb",
    version,
    about = "Deterministic load balancing simulator for communicating objects"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a workload snapshot file.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Run one strategy over a snapshot (optionally time-stepped).
    Run(RunArgs),
    /// Render a 2D snapshot as SVG, colored by owning node.
    Viz(VizArgs),
    /// Run several strategies on the same input and tabulate the metrics.
    Compare(CompareArgs),
}

#[derive(Subcommand)]
enum GenCommand {
    /// 2D/3D stencil workload with synthetic imbalance.
    Stencil(StencilArgs),
    /// Particle-in-cell workload (writes a particle sidecar next to the
    /// snapshot so `run` can advance the particles).
    Pic(PicArgs),
}

#[derive(Args)]
struct StencilArgs {
    /// Grid dimensions, e.g. 16x12 or 32x32x16.
    #[arg(long)]
    grid: String,
    /// Node decomposition: tile grid like 4x4, or ring:N for 1D column
    /// stripes over N nodes.
    #[arg(long)]
    nodes: String,
    /// Disable periodic (wrap-around) boundaries.
    #[arg(long)]
    no_periodic: bool,
    #[arg(long, default_value_t = 1.0)]
    base_load: f64,
    #[arg(long, default_value_t = 1.0)]
    bytes_per_edge: f64,
    /// none | random:PCT | mod7[:OVER:UNDER] | spike[:FACTOR[:NODE]]
    #[arg(long, default_value = "none")]
    imbalance: String,
    #[arg(long, default_value_t = 1)]
    threads_per_node: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output snapshot path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PicArgs {
    /// Cells per side of the square grid.
    #[arg(long)]
    grid: usize,
    #[arg(long)]
    particles: usize,
    /// Skew of the geometric column distribution, in (0, 1].
    #[arg(long, default_value_t = 0.9)]
    rho: f64,
    /// Horizontal speed parameter: particles advance (2k+1) cells per step.
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Chare grid, e.g. 12x12.
    #[arg(long)]
    chares: String,
    #[arg(long, default_value_t = 4)]
    nodes: usize,
    /// striped | quad
    #[arg(long, default_value = "striped")]
    mapping: String,
    #[arg(long, default_value_t = 1.0)]
    bytes_per_crossing: f64,
    #[arg(long, default_value_t = 1.0)]
    bytes_halo: f64,
    #[arg(long, default_value_t = 1.0)]
    load_per_particle: f64,
    #[arg(long, default_value_t = 0.0)]
    load_per_cell: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct StrategyArgs {
    /// none | greedy-refine | diff-comm | diff-coord
    #[arg(long)]
    strategy: String,
    /// Neighbor degree K for the diffusion strategies.
    #[arg(long, default_value_t = 4)]
    neighbors: usize,
    /// Handshake round bound (default 2K+4).
    #[arg(long)]
    max_rounds: Option<usize>,
    /// Diffusion convergence threshold (relative neighborhood stddev).
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    /// Use a uniform diffusion coefficient instead of the degree-based rule.
    #[arg(long)]
    uniform_alpha: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    greedy_tol: f64,
    #[arg(long, default_value_t = 0.02)]
    thread_eps: f64,
    /// Randomized tie-breaking seed (defaults to node-id order).
    #[arg(long)]
    tie_seed: Option<u64>,
    /// Forbid comm-variant pairings between nodes that never communicate.
    #[arg(long)]
    no_zero_comm_fallback: bool,
}

impl StrategyArgs {
    fn to_config(&self, strategy: Strategy) -> StrategyConfig {
        let mut config = StrategyConfig::new(strategy).with_neighbors(self.neighbors);
        config.max_rounds = self.max_rounds;
        config.eps = self.eps;
        config.max_iters = self.max_iters;
        if let Some(a) = self.uniform_alpha {
            config.alpha = AlphaRule::Uniform(a);
        }
        config.greedy_tol = self.greedy_tol;
        config.thread_eps = self.thread_eps;
        config.tie_seed = self.tie_seed;
        config.zero_comm_fallback = !self.no_zero_comm_fallback;
        config
    }
}

#[derive(Args)]
struct RunArgs {
    /// Input snapshot path.
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    strategy: StrategyArgs,
    /// Steps between load balancing rounds.
    #[arg(long, default_value_t = 1)]
    lb_every: usize,
    /// Application steps to simulate (defaults to one balancing round).
    #[arg(long)]
    steps: Option<usize>,
    /// Particle sidecar path (default: <input>.pic.json when present).
    #[arg(long)]
    pic_state: Option<PathBuf>,
    /// Output directory (default: $SIMLB_OUT_DIR or ./simlb-out).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Write every applied migration plan to plans.jsonl.
    #[arg(long)]
    dump_plans: bool,
    /// Write the post-round snapshot of every balancing round.
    #[arg(long)]
    dump_rounds: bool,
}

#[derive(Args)]
struct VizArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Pixels per coordinate unit.
    #[arg(long, default_value_t = 24.0)]
    scale: f64,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated strategy list.
    #[arg(long, value_delimiter = ',')]
    strategies: Vec<String>,
    #[arg(long, default_value_t = 4)]
    neighbors: usize,
    #[arg(long, default_value_t = 1)]
    lb_every: usize,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    pic_state: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn parse_dims(text: &str) -> anyhow::Result<Vec<usize>> {
    let dims: Result<Vec<usize>, _> = text.split('x').map(str::parse).collect();
    let dims = dims.with_context(|| format!("cannot parse dimensions {text:?}"))?;
    if dims.is_empty() || dims.iter().any(|&d| d == 0) {
        bail!("dimensions {text:?} must be positive");
    }
    Ok(dims)
}

fn parse_imbalance(text: &str, seed: u64) -> anyhow::Result<ImbalanceSpec> {
    let parts: Vec<&str> = text.split(':').collect();
    match parts[0] {
        "none" => Ok(ImbalanceSpec::None),
        "random" => {
            let pct = parts
                .get(1)
                .context("random imbalance needs a percentage, e.g. random:0.4")?
                .parse()
                .context("bad random imbalance percentage")?;
            Ok(ImbalanceSpec::RandomPct { pct, seed })
        }
        "mod7" => {
            let overload = parts
                .get(1)
                .map(|p| p.parse())
                .transpose()
                .context("bad mod7 overload multiplier")?
                .unwrap_or(ImbalanceSpec::MOD7_OVERLOAD_DEFAULT);
            let underload = parts
                .get(2)
                .map(|p| p.parse())
                .transpose()
                .context("bad mod7 underload multiplier")?
                .unwrap_or(ImbalanceSpec::MOD7_UNDERLOAD_DEFAULT);
            Ok(ImbalanceSpec::Mod7 {
                overload,
                underload,
            })
        }
        "spike" => {
            let factor = parts
                .get(1)
                .map(|p| p.parse())
                .transpose()
                .context("bad spike factor")?
                .unwrap_or(10.0);
            let node = parts
                .get(2)
                .map(|p| p.parse())
                .transpose()
                .context("bad spike node")?
                .unwrap_or(0);
            Ok(ImbalanceSpec::Spike { factor, node })
        }
        other => bail!("unknown imbalance {other:?} (none, random:P, mod7, spike)"),
    }
}

fn cmd_gen_stencil(args: &StencilArgs) -> anyhow::Result<()> {
    let grid_dims = parse_dims(&args.grid)?;
    let decomposition = if let Some(n) = args.nodes.strip_prefix("ring:") {
        Decomposition::Striped1dRing(n.parse().context("bad ring node count")?)
    } else {
        Decomposition::Tiled(parse_dims(&args.nodes)?)
    };
    let spec = StencilSpec {
        grid_dims,
        decomposition,
        periodic: !args.no_periodic,
        base_load: args.base_load,
        bytes_per_edge: args.bytes_per_edge,
        imbalance: parse_imbalance(&args.imbalance, args.seed)?,
        threads_per_node: args.threads_per_node,
    };
    let snapshot = gen_stencil(&spec)?;
    format::save_snapshot(&snapshot, &args.out)?;
    let m = compute_metrics(&snapshot, None);
    eprintln!(
        "wrote {} ({} objects, {} edges, max/avg {:.3}, ext/int {:.3})",
        args.out.display(),
        snapshot.objects.len(),
        snapshot.edges.len(),
        m.max_avg_load,
        m.ext_int_ratio
    );
    Ok(())
}

fn pic_sidecar_path(snapshot_path: &std::path::Path) -> PathBuf {
    let mut os = snapshot_path.as_os_str().to_owned();
    os.push(".pic.json");
    PathBuf::from(os)
}

fn cmd_gen_pic(args: &PicArgs) -> anyhow::Result<()> {
    let chares = parse_dims(&args.chares)?;
    if chares.len() != 2 {
        bail!("--chares must be two-dimensional, e.g. 12x12");
    }
    let mapping = match args.mapping.as_str() {
        "striped" => ChareMapping::Striped,
        "quad" => ChareMapping::Quad,
        other => bail!("unknown mapping {other:?} (striped, quad)"),
    };
    let spec = PicSpec {
        grid_cells: args.grid,
        particles: args.particles,
        rho: args.rho,
        k: args.k,
        chare_dims: [chares[0], chares[1]],
        nodes: args.nodes,
        mapping,
        seed: args.seed,
        bytes_per_particle_crossing: args.bytes_per_crossing,
        bytes_halo_const: args.bytes_halo,
        load_per_particle: args.load_per_particle,
        load_per_cell: args.load_per_cell,
    };
    let (state, snapshot) = gen_pic_initial(&spec)?;
    format::save_snapshot(&snapshot, &args.out)?;
    let sidecar = pic_sidecar_path(&args.out);
    std::fs::write(&sidecar, serde_json::to_string(&state)?)?;
    eprintln!(
        "wrote {} ({} chares over {} nodes) and particle sidecar {}",
        args.out.display(),
        snapshot.objects.len(),
        spec.nodes,
        sidecar.display()
    );
    Ok(())
}

/// Load the workload for `run`/`compare`: a PIC sidecar turns the run into a
/// particle simulation, otherwise the snapshot is balanced as-is.
fn load_workload(
    input: &std::path::Path,
    pic_state: Option<&PathBuf>,
) -> anyhow::Result<(SimWorkload, Option<Vec<u64>>)> {
    let loaded = format::load_snapshot_with_map(input)
        .with_context(|| format!("cannot load snapshot {}", input.display()))?;
    if loaded.original_ids.is_some() {
        eprintln!("note: sparse object ids were remapped to dense 0..n-1");
    }
    let sidecar = pic_state
        .cloned()
        .unwrap_or_else(|| pic_sidecar_path(input));
    if sidecar.exists() {
        let text = std::fs::read_to_string(&sidecar)
            .with_context(|| format!("cannot read particle sidecar {}", sidecar.display()))?;
        let state: PicState = serde_json::from_str(&text)
            .with_context(|| format!("cannot parse particle sidecar {}", sidecar.display()))?;
        if state.spec.chare_dims[0] * state.spec.chare_dims[1] != loaded.snapshot.objects.len() {
            bail!(
                "sidecar {} does not match the snapshot (chare count differs)",
                sidecar.display()
            );
        }
        Ok((SimWorkload::Pic(state), loaded.original_ids))
    } else {
        Ok((SimWorkload::Static(loaded.snapshot), loaded.original_ids))
    }
}

fn default_steps(requested: Option<usize>, lb_every: usize) -> usize {
    match requested {
        Some(steps) => steps,
        // One balancing round by default.
        None => lb_every.max(1),
    }
}

fn run_one(
    workload: &SimWorkload,
    config: &StrategyConfig,
    lb_every: usize,
    steps: usize,
    keep_rounds: bool,
) -> anyhow::Result<SimulationResult> {
    let wl = match workload {
        SimWorkload::Static(s) => SimWorkload::Static(s.clone()),
        SimWorkload::Pic(p) => SimWorkload::Pic(p.clone()),
    };
    Ok(run_simulation_with(wl, config, lb_every, steps, keep_rounds)?)
}

fn cmd_run(args: &RunArgs) -> anyhow::Result<()> {
    let strategy: Strategy = args
        .strategy
        .strategy
        .parse()
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let config = args.strategy.to_config(strategy);
    let (workload, original_ids) = load_workload(&args.input, args.pic_state.as_ref())?;
    let steps = default_steps(args.steps, args.lb_every);

    let out_dir = output::resolve_out_dir(args.out_dir.clone())?;
    if let Some(ids) = &original_ids {
        // Traceability sidecar: dense id -> id used in the input file.
        let mut text = serde_json::to_string(ids)?;
        text.push('\n');
        std::fs::write(out_dir.join("idmap.json"), text)?;
    }
    let result = run_one(&workload, &config, args.lb_every, steps, args.dump_rounds)?;

    output::write_run_artifacts(
        &out_dir,
        &args.input,
        &config,
        args.lb_every,
        steps,
        &result,
        args.dump_plans,
        args.dump_rounds,
    )?;

    println!(
        "strategy {} on {}: max/avg {:.4}, ext/int {:.4}, migrations {:.1}%",
        config.strategy,
        args.input.display(),
        result.report.max_avg_load,
        result.report.ext_int_ratio,
        result.report.migration_fraction * 100.0
    );
    println!("artifacts in {}", out_dir.display());
    Ok(())
}

fn cmd_viz(args: &VizArgs) -> anyhow::Result<()> {
    let snapshot = format::load_snapshot(&args.input)
        .with_context(|| format!("cannot load snapshot {}", args.input.display()))?;
    let svg = svg::render(&snapshot, args.scale)?;
    std::fs::write(&args.out, svg)?;
    eprintln!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_compare(args: &CompareArgs) -> anyhow::Result<()> {
    if args.strategies.is_empty() {
        bail!("--strategies needs at least one strategy");
    }
    let (workload, _) = load_workload(&args.input, args.pic_state.as_ref())?;
    let steps = default_steps(args.steps, args.lb_every);
    let out_dir = output::resolve_out_dir(args.out_dir.clone())?;

    let mut rows = Vec::new();
    for name in &args.strategies {
        let row = match name.parse::<Strategy>() {
            Err(e) => output::CompareRow::failed(name.clone(), e.to_string()),
            Ok(strategy) => {
                let mut config = StrategyConfig::new(strategy).with_neighbors(args.neighbors);
                config.zero_comm_fallback = true;
                match run_one(&workload, &config, args.lb_every, steps, false) {
                    Ok(result) => output::CompareRow::from_result(name.clone(), &result),
                    Err(e) => output::CompareRow::failed(name.clone(), e.to_string()),
                }
            }
        };
        rows.push(row);
    }

    let table = output::render_compare_table(&rows);
    print!("{table}");
    output::write_compare_artifacts(&out_dir, &args.input, &rows, &table)?;
    eprintln!("artifacts in {}", out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are successful exits.
            if e.kind() == clap::error::ErrorKind::DisplayHelp
                || e.kind() == clap::error::ErrorKind::DisplayVersion
            {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let result = match &cli.command {
        Command::Gen(GenCommand::Stencil(args)) => cmd_gen_stencil(args),
        Command::Gen(GenCommand::Pic(args)) => cmd_gen_pic(args),
        Command::Run(args) => cmd_run(args),
        Command::Viz(args) => cmd_viz(args),
        Command::Compare(args) => cmd_compare(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
