use criterion::{black_box, criterion_group, criterion_main, Criterion};

use simlb_bench::benchmark_workload;
use simlb_core::diffusion::{virtual_balance, AlphaRule};
use simlb_core::migration::select_objects_comm;
use simlb_core::model::node_comm_matrix;
use simlb_core::neighbor::{build_comm_neighbors, default_max_rounds, TieBreak};
use simlb_core::strategy::{run_round, Strategy, StrategyConfig};

fn bench_neighbor_build(c: &mut Criterion) {
    let s = benchmark_workload();
    let matrix = node_comm_matrix(&s);
    c.bench_function("neighbor_build_k4_32n", |b| {
        b.iter(|| {
            build_comm_neighbors(
                black_box(&matrix),
                s.node_count,
                4,
                default_max_rounds(4),
                TieBreak::NodeId,
                true,
            )
        })
    });
}

fn bench_virtual_balance(c: &mut Criterion) {
    let s = benchmark_workload();
    let matrix = node_comm_matrix(&s);
    let built = build_comm_neighbors(
        &matrix,
        s.node_count,
        4,
        default_max_rounds(4),
        TieBreak::NodeId,
        true,
    );
    let loads = s.node_loads();
    c.bench_function("virtual_balance_32n", |b| {
        b.iter(|| {
            virtual_balance(
                black_box(&loads),
                &built.graph,
                AlphaRule::DegreeBased,
                0.05,
                100,
            )
        })
    });
}

fn bench_object_selection(c: &mut Criterion) {
    let s = benchmark_workload();
    let matrix = node_comm_matrix(&s);
    let built = build_comm_neighbors(
        &matrix,
        s.node_count,
        4,
        default_max_rounds(4),
        TieBreak::NodeId,
        true,
    );
    let plan = virtual_balance(&s.node_loads(), &built.graph, AlphaRule::DegreeBased, 0.05, 100);
    c.bench_function("select_objects_comm_2048obj", |b| {
        b.iter(|| select_objects_comm(black_box(&s), &plan))
    });
}

fn bench_full_round(c: &mut Criterion) {
    let s = benchmark_workload();
    let mut group = c.benchmark_group("full_round");
    for strategy in [Strategy::DiffComm, Strategy::DiffCoord, Strategy::GreedyRefine] {
        let config = StrategyConfig::new(strategy).with_neighbors(4);
        group.bench_function(strategy.name(), |b| {
            b.iter(|| run_round(black_box(&s), &config).unwrap())
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_neighbor_build,
    bench_virtual_balance,
    bench_object_selection,
    bench_full_round
);
criterion_main!(benches);
