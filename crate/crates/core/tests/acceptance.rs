//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//!
//! Run with `cargo test -p simlb-core --test acceptance -- --nocapture`.

use std::collections::BTreeMap;
use std::time::Instant;

use simlb_core::diffusion::{apply_transfers, virtual_balance, AlphaRule};
use simlb_core::format::render_snapshot;
use simlb_core::generators::{
    gen_pic_initial, gen_stencil, ChareMapping, Decomposition, ImbalanceSpec, PicSpec, StencilSpec,
};
use simlb_core::metrics::compute_metrics;
use simlb_core::migration::apply_plan;
use simlb_core::model::WorkloadSnapshot;
use simlb_core::neighbor::{build_comm_neighbors, default_max_rounds, NeighborGraph, TieBreak};
use simlb_core::sim::{run_simulation, SimWorkload};
use simlb_core::strategy::{run_round, Strategy, StrategyConfig};

struct Criterion {
    name: &'static str,
    budget_s: f64,
    started: Instant,
    failures: Vec<String>,
}

impl Criterion {
    fn new(name: &'static str, budget_s: f64) -> Self {
        Criterion {
            name,
            budget_s,
            started: Instant::now(),
            failures: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, detail: String) {
        if !ok {
            self.failures.push(detail);
        }
    }

    fn finish(mut self, summary: String) {
        let elapsed = self.started.elapsed().as_secs_f64();
        if self.budget_s > 0.0 && elapsed >= self.budget_s {
            self.failures
                .push(format!("runtime {elapsed:.2}s exceeded budget {}s", self.budget_s));
        }
        if self.failures.is_empty() {
            println!("acceptance {}: PASS ({summary}; {elapsed:.2}s)", self.name);
        } else {
            println!(
                "acceptance {}: FAIL ({})",
                self.name,
                self.failures.join("; ")
            );
            panic!("acceptance {} failed: {}", self.name, self.failures.join("; "));
        }
    }
}

fn ring_spike_workload() -> WorkloadSnapshot {
    // 9 processor stripes over a periodic 36x8 stencil, node 5 overloaded
    // x10: initial max/avg is exactly 5.
    gen_stencil(&StencilSpec {
        grid_dims: vec![36, 8],
        decomposition: Decomposition::Striped1dRing(9),
        periodic: true,
        base_load: 1.0,
        bytes_per_edge: 1.0,
        imbalance: ImbalanceSpec::Spike {
            factor: 10.0,
            node: 5,
        },
        threads_per_node: 1,
    })
    .unwrap()
}

fn fig3_workload() -> WorkloadSnapshot {
    // 16 nodes, tiled 2D periodic stencil, +-40% random imbalance. The seed
    // is chosen so the initial imbalance sits inside the required band.
    gen_stencil(&StencilSpec {
        grid_dims: vec![16, 12],
        decomposition: Decomposition::Tiled(vec![4, 4]),
        periodic: true,
        base_load: 1.0,
        bytes_per_edge: 1.0,
        imbalance: ImbalanceSpec::RandomPct {
            pct: 0.4,
            seed: 2742,
        },
        threads_per_node: 1,
    })
    .unwrap()
}

fn benchmark2_workload() -> WorkloadSnapshot {
    // 32 nodes, 3D periodic stencil with cubic 8x8x8 tiles (initial ext/int
    // is exactly 1/7 ~= 0.143), mod-7 imbalance calibrated to 1.37.
    gen_stencil(&StencilSpec {
        grid_dims: vec![32, 32, 16],
        decomposition: Decomposition::Tiled(vec![4, 4, 2]),
        periodic: true,
        base_load: 1.0,
        bytes_per_edge: 1.0,
        imbalance: ImbalanceSpec::mod7_default(),
        threads_per_node: 1,
    })
    .unwrap()
}

fn pic_spec() -> PicSpec {
    PicSpec {
        grid_cells: 1000,
        particles: 100_000,
        rho: 0.9,
        k: 2,
        chare_dims: [12, 12],
        nodes: 4,
        mapping: ChareMapping::Striped,
        seed: 2,
        bytes_per_particle_crossing: 1.0,
        bytes_halo_const: 1.0,
        load_per_particle: 1.0,
        load_per_cell: 0.0,
    }
}

fn one_pass(s: &WorkloadSnapshot, strategy: Strategy, k: usize) -> simlb_core::metrics::MetricsReport {
    let config = StrategyConfig::new(strategy).with_neighbors(k);
    let out = run_round(s, &config).unwrap();
    let after = apply_plan(s, &out.plan).unwrap();
    compute_metrics(&after, Some(s))
}

#[test]
fn criterion_1_neighbor_count_trend_on_ring_spike() {
    let mut c = Criterion::new("criterion 1 (neighbor-count trend, ring spike)", 5.0);
    let s = ring_spike_workload();
    let results: Vec<(usize, simlb_core::metrics::MetricsReport)> = [1usize, 2, 4, 8]
        .into_iter()
        .map(|k| (k, one_pass(&s, Strategy::DiffComm, k)))
        .collect();
    let ratios: Vec<f64> = results.iter().map(|(_, m)| m.max_avg_load).collect();
    for w in ratios.windows(2) {
        c.check(
            w[1] < w[0],
            format!("max/avg not strictly decreasing: {ratios:?}"),
        );
    }
    c.check(
        ratios[0] >= 3.0,
        format!("max/avg(K=1) = {:.3} < 3.0", ratios[0]),
    );
    c.check(
        ratios[3] <= 1.3,
        format!("max/avg(K=8) = {:.3} > 1.3", ratios[3]),
    );
    let ext_int_k1 = results[0].1.ext_int_ratio;
    let ext_int_k8 = results[3].1.ext_int_ratio;
    c.check(
        ext_int_k8 >= ext_int_k1,
        format!("ext/int(K=8) {ext_int_k8:.3} < ext/int(K=1) {ext_int_k1:.3}"),
    );
    c.finish(format!(
        "max/avg K=1..8: {:.2} > {:.2} > {:.2} > {:.2}; ext/int {:.3} -> {:.3}",
        ratios[0], ratios[1], ratios[2], ratios[3], ext_int_k1, ext_int_k8
    ));
}

#[test]
fn criterion_2_single_pass_bands_on_sixteen_node_stencil() {
    let mut c = Criterion::new("criterion 2 (16-node stencil single-pass bands)", 5.0);
    let s = fig3_workload();
    let init = compute_metrics(&s, None);
    c.check(
        (1.4..=2.1).contains(&init.max_avg_load),
        format!("initial max/avg {:.3} outside [1.4, 2.1]", init.max_avg_load),
    );
    let comm = one_pass(&s, Strategy::DiffComm, 4);
    let coord = one_pass(&s, Strategy::DiffCoord, 4);
    c.check(
        comm.max_avg_load <= 1.15,
        format!("diff-comm max/avg {:.3} > 1.15", comm.max_avg_load),
    );
    c.check(
        coord.max_avg_load <= 1.20,
        format!("diff-coord max/avg {:.3} > 1.20", coord.max_avg_load),
    );
    c.check(
        comm.ext_int_ratio <= coord.ext_int_ratio,
        format!(
            "diff-comm ext/int {:.3} > diff-coord ext/int {:.3}",
            comm.ext_int_ratio, coord.ext_int_ratio
        ),
    );
    c.finish(format!(
        "initial {:.2}; diff-comm {:.3} (ext/int {:.3}); diff-coord {:.3} (ext/int {:.3})",
        init.max_avg_load,
        comm.max_avg_load,
        comm.ext_int_ratio,
        coord.max_avg_load,
        coord.ext_int_ratio
    ));
}

#[test]
fn criterion_3_strategy_ordering_on_benchmark_2() {
    let mut c = Criterion::new("criterion 3 (benchmark 2 strategy ordering)", 30.0);
    let s = benchmark2_workload();
    let init = compute_metrics(&s, None);
    c.check(
        (init.max_avg_load - 1.37).abs() <= 0.05,
        format!("initial max/avg {:.3} not within 1.37 +- 0.05", init.max_avg_load),
    );
    let greedy = one_pass(&s, Strategy::GreedyRefine, 4);
    let comm = one_pass(&s, Strategy::DiffComm, 4);
    let coord = one_pass(&s, Strategy::DiffCoord, 4);
    c.check(
        greedy.max_avg_load <= 1.02,
        format!("greedy max/avg {:.4} > 1.02", greedy.max_avg_load),
    );
    c.check(
        comm.max_avg_load <= 1.10,
        format!("diff-comm max/avg {:.4} > 1.10", comm.max_avg_load),
    );
    c.check(
        comm.migration_fraction <= 0.25,
        format!("diff-comm migrations {:.3} > 0.25", comm.migration_fraction),
    );
    c.check(
        comm.ext_int_ratio < greedy.ext_int_ratio,
        format!(
            "diff-comm ext/int {:.3} not below greedy {:.3}",
            comm.ext_int_ratio, greedy.ext_int_ratio
        ),
    );
    c.check(
        coord.ext_int_ratio >= comm.ext_int_ratio,
        format!(
            "diff-coord ext/int {:.3} below diff-comm {:.3}",
            coord.ext_int_ratio, comm.ext_int_ratio
        ),
    );
    c.finish(format!(
        "initial {:.3}; greedy {:.3}/{:.3}; diff-comm {:.3}/{:.3} (migr {:.1}%); diff-coord ext/int {:.3}",
        init.max_avg_load,
        greedy.max_avg_load,
        greedy.ext_int_ratio,
        comm.max_avg_load,
        comm.ext_int_ratio,
        comm.migration_fraction * 100.0,
        coord.ext_int_ratio
    ));
}

#[test]
fn criterion_4_pic_particle_balance_improvement() {
    let mut c = Criterion::new("criterion 4 (PIC particle-balance improvement)", 60.0);
    let (state, _) = gen_pic_initial(&pic_spec()).unwrap();
    let mean_ratio = |strategy: Strategy| {
        let config = StrategyConfig::new(strategy).with_neighbors(4);
        run_simulation(SimWorkload::Pic(state.clone()), &config, 10, 200)
            .unwrap()
            .mean_particle_ratio
            .unwrap()
    };
    let none = mean_ratio(Strategy::None);
    let comm = mean_ratio(Strategy::DiffComm);
    let coord = mean_ratio(Strategy::DiffCoord);
    let improvement = |x: f64| 1.0 - x / none;
    c.check(
        improvement(comm) >= 0.40,
        format!(
            "diff-comm improvement {:.1}% < 40% (mean {comm:.3} vs no-LB {none:.3})",
            improvement(comm) * 100.0
        ),
    );
    c.check(
        improvement(coord) >= 0.40,
        format!(
            "diff-coord improvement {:.1}% < 40% (mean {coord:.3} vs no-LB {none:.3})",
            improvement(coord) * 100.0
        ),
    );
    c.finish(format!(
        "mean max/avg particles: no-LB {none:.2}, diff-comm {comm:.2} (-{:.0}%), diff-coord {coord:.2} (-{:.0}%)",
        improvement(comm) * 100.0,
        improvement(coord) * 100.0
    ));
}

#[test]
fn criterion_5_traveling_wave_is_an_exact_circular_shift() {
    let mut c = Criterion::new("criterion 5 (PIC traveling-wave property)", 60.0);
    let (state, _) = gen_pic_initial(&pic_spec()).unwrap();
    let config = StrategyConfig::new(Strategy::None);
    let out = run_simulation(SimWorkload::Pic(state), &config, 10, 200).unwrap();
    let series = out.particle_series.unwrap();
    // Striped mapping: each node owns 250 grid columns and particles move 5
    // columns per step, so node k's count series is node 0's delayed by 50k
    // steps, exactly, over the 200-step period.
    let period = 200;
    let shift = 50;
    let mut mismatches = 0;
    for node in 0..4 {
        for t in 0..period {
            let expected = series[(t + period - shift * node) % period][0];
            if series[t][node] != expected {
                mismatches += 1;
            }
        }
    }
    c.check(
        mismatches == 0,
        format!("{mismatches} series entries deviate from the circular shift"),
    );
    c.check(
        series[period] == series[0],
        "node counts after a full wrap differ from the initial counts".into(),
    );
    c.finish("per-node series are exact 50-step circular shifts of node 0".into());
}

#[test]
fn criterion_6_property_suite() {
    let mut c = Criterion::new("criterion 6 (property suite)", 60.0);

    // Load conservation + single-hop cap + degree/symmetry across a sweep of
    // workloads and strategies.
    let workloads: Vec<WorkloadSnapshot> =
        vec![ring_spike_workload(), fig3_workload(), {
            gen_stencil(&StencilSpec {
                grid_dims: vec![12, 12, 6],
                decomposition: Decomposition::Tiled(vec![2, 2, 2]),
                periodic: false,
                base_load: 2.0,
                bytes_per_edge: 3.0,
                imbalance: ImbalanceSpec::Spike { factor: 4.0, node: 1 },
                threads_per_node: 1,
            })
            .unwrap()
        }];
    for (i, s) in workloads.iter().enumerate() {
        let total_before = s.total_load();
        for strategy in [Strategy::GreedyRefine, Strategy::DiffComm, Strategy::DiffCoord] {
            let config = StrategyConfig::new(strategy).with_neighbors(4);
            let out = run_round(s, &config).unwrap();
            let after = apply_plan(s, &out.plan).unwrap();
            c.check(
                (after.total_load() - total_before).abs() <= 1e-9 * total_before,
                format!("workload {i} {strategy}: load not conserved"),
            );
        }
        let matrix = simlb_core::model::node_comm_matrix(s);
        for k in [1usize, 3, 6] {
            let built = build_comm_neighbors(
                &matrix,
                s.node_count,
                k,
                default_max_rounds(k),
                TieBreak::NodeId,
                true,
            );
            for v in 0..s.node_count {
                c.check(
                    built.graph.degree(v) <= k,
                    format!("workload {i}: degree(v={v}) > K={k}"),
                );
                for &u in built.graph.neighbors(v) {
                    c.check(
                        built.graph.neighbors(u).contains(&v),
                        format!("workload {i}: asymmetric edge ({v},{u})"),
                    );
                }
            }
            let loads = s.node_loads();
            let plan = virtual_balance(&loads, &built.graph, AlphaRule::DegreeBased, 0.05, 100);
            for v in 0..s.node_count {
                c.check(
                    plan.outgoing(v) <= loads[v] * (1.0 + 1e-9),
                    format!("workload {i} K={k}: single-hop cap violated at node {v}"),
                );
            }
        }
    }

    // Virtual balance against a brute-force iteration oracle on graphs with
    // at most 8 nodes.
    let mut graphs: Vec<(NeighborGraph, Vec<f64>)> = Vec::new();
    graphs.push((
        NeighborGraph::from_pairs(8, 2, (0..8).map(|i| (i, (i + 1) % 8))),
        vec![20.0, 1.0, 1.0, 3.0, 1.0, 1.0, 5.0, 1.0],
    ));
    graphs.push((
        NeighborGraph::from_pairs(5, 4, [(0, 1), (0, 2), (0, 3), (0, 4), (1, 2), (3, 4)]),
        vec![10.0, 0.0, 2.0, 7.0, 1.0],
    ));
    graphs.push((
        NeighborGraph::from_pairs(6, 2, [(0, 1), (2, 3), (4, 5)]),
        vec![9.0, 1.0, 4.0, 0.0, 2.0, 2.0],
    ));
    for (gi, (g, loads)) in graphs.iter().enumerate() {
        let plan = virtual_balance(loads, g, AlphaRule::DegreeBased, 0.05, 100);
        // Oracle: plain Jacobi iteration of the update rule.
        let mean = loads.iter().sum::<f64>() / g.node_count as f64;
        let converged = |l: &Vec<f64>| {
            (0..g.node_count).all(|v| {
                let hood: Vec<f64> = std::iter::once(l[v])
                    .chain(g.neighbors(v).iter().map(|&u| l[u]))
                    .collect();
                let m = hood.iter().sum::<f64>() / hood.len() as f64;
                let var =
                    hood.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / hood.len() as f64;
                var.sqrt() <= 0.05 * mean
            })
        };
        let mut l = loads.clone();
        let mut iters = 0;
        while !converged(&l) && iters < 100 {
            let mut next = l.clone();
            for v in 0..g.node_count {
                for &u in g.neighbors(v) {
                    let a = 1.0 / (g.degree(v).max(g.degree(u)) as f64 + 1.0);
                    next[v] += a * (l[u] - l[v]);
                }
            }
            l = next;
            iters += 1;
        }
        c.check(
            plan.diagnostics.iterations == iters,
            format!("graph {gi}: iteration count {} != oracle {iters}", plan.diagnostics.iterations),
        );
        for (v, (a, b)) in plan.diagnostics.virtual_loads.iter().zip(&l).enumerate() {
            c.check(
                (a - b).abs() < 1e-9,
                format!("graph {gi}: virtual load at {v} diverges from oracle"),
            );
        }
        let _ = apply_transfers(loads, &plan);
    }

    // Incremental comm/centroid bookkeeping against from-scratch oracles is
    // exercised exhaustively in the migration module unit tests on instances
    // up to 50 objects; here we re-run one end-to-end determinism sweep.
    let s = fig3_workload();
    let a = render_snapshot(&s);
    let b = render_snapshot(&fig3_workload());
    c.check(a == b, "generator output not byte-identical".into());

    let (state, _) = gen_pic_initial(&PicSpec {
        grid_cells: 240,
        particles: 20_000,
        ..pic_spec()
    })
    .unwrap();
    let config = StrategyConfig::new(Strategy::DiffComm).with_neighbors(4);
    let run = |state: &simlb_core::generators::PicState| {
        let mut out = run_simulation(SimWorkload::Pic(state.clone()), &config, 10, 60).unwrap();
        out.report.strategy_wall_time_s = 0.0;
        for r in &mut out.report.per_round_series {
            r.strategy_wall_time_s = 0.0;
        }
        (
            serde_json::to_string(&out.report).unwrap(),
            render_snapshot(&out.final_snapshot),
            out.particle_series,
        )
    };
    let first = run(&state);
    let second = run(&state);
    c.check(
        first == second,
        "two identical simulation runs produced different outputs".into(),
    );

    c.finish("conservation, single-hop cap, graph bounds, diffusion oracle, determinism".into());
}

#[test]
fn criterion_7_out_of_scope_note() {
    // Multi-node strong-scaling wall-clock results (absolute speedups and
    // communication-time breakdowns) are hardware-scale measurements and are
    // excluded by design. Strategy wall time is reported in run artifacts but
    // never asserted.
    println!(
        "acceptance criterion 7 (wall-clock scaling): EXCLUDED by design; \
         strategy wall time is reported, not asserted"
    );
}

// Keeps the transfer totals visible when running with --nocapture; the
// per-edge numbers double as a smoke check that the plan is non-trivial on
// the headline workloads.
#[test]
fn transfer_plans_are_nontrivial_on_headline_workloads() {
    let s = ring_spike_workload();
    let matrix = simlb_core::model::node_comm_matrix(&s);
    let built = build_comm_neighbors(&matrix, s.node_count, 2, 8, TieBreak::NodeId, true);
    let plan = virtual_balance(&s.node_loads(), &built.graph, AlphaRule::DegreeBased, 0.05, 100);
    assert!(plan.total() > 0.0);
    let mut per_source: BTreeMap<usize, f64> = BTreeMap::new();
    for (&(from, _), &t) in &plan.transfers {
        *per_source.entry(from).or_insert(0.0) += t;
    }
    assert!(per_source.contains_key(&5), "spike node must shed load");
}
