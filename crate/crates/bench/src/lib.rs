//! Shared workload builders for the pipeline benchmarks.

use simlb_core::generators::{gen_stencil, Decomposition, ImbalanceSpec, StencilSpec};
use simlb_core::WorkloadSnapshot;

/// 32-node 3D stencil with mod-7 imbalance, a scaled-down version of the
/// strategy-comparison workload.
pub fn benchmark_workload() -> WorkloadSnapshot {
    gen_stencil(&StencilSpec {
        grid_dims: vec![16, 16, 8],
        decomposition: Decomposition::Tiled(vec![4, 4, 2]),
        periodic: true,
        base_load: 1.0,
        bytes_per_edge: 1.0,
        imbalance: ImbalanceSpec::mod7_default(),
        threads_per_node: 1,
    })
    .expect("benchmark workload")
}
