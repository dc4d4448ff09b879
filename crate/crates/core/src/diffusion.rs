//! Virtual load balancing: per-edge target transfers from a first-order
//! diffusion fixed point under the single-hop constraint.
//!
//! Only load magnitudes move in this phase. The iteration is Jacobi style
//! (all nodes read the previous iterate), so results do not depend on node
//! visitation order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::neighbor::NeighborGraph;

/// Diffusion coefficient per edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AlphaRule {
    /// `alpha_ij = 1 / (max(deg_i, deg_j) + 1)`; stable on arbitrary
    /// degree-bounded graphs.
    DegreeBased,
    /// A single coefficient for every edge. Stability is the caller's
    /// problem.
    Uniform(f64),
}

impl Default for AlphaRule {
    fn default() -> Self {
        AlphaRule::DegreeBased
    }
}

pub const DEFAULT_EPS: f64 = 0.05;
pub const DEFAULT_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiffusionDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    /// Largest per-neighborhood load standard deviation at termination,
    /// relative to the global mean load.
    pub residual: f64,
    /// Node loads at the end of the iteration, before the single-hop cap.
    pub virtual_loads: Vec<f64>,
    /// Nodes whose outgoing flows were scaled down by the single-hop cap.
    pub capped_nodes: Vec<usize>,
    /// Connected components of the neighbor graph; load balances within
    /// each component only (isolated nodes count as singletons).
    pub components: usize,
}

/// Per-edge transfer targets; at most one direction per adjacent pair.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransferPlan {
    /// `(from, to) -> load`, strictly positive, defined only on graph edges.
    pub transfers: BTreeMap<(usize, usize), f64>,
    pub diagnostics: DiffusionDiagnostics,
}

impl TransferPlan {
    pub fn outgoing(&self, node: usize) -> f64 {
        self.transfers
            .iter()
            .filter(|((from, _), _)| *from == node)
            .map(|(_, t)| t)
            .sum()
    }

    pub fn total(&self) -> f64 {
        self.transfers.values().sum()
    }
}

fn component_count(g: &NeighborGraph) -> usize {
    let n = g.node_count;
    let mut seen = vec![false; n];
    let mut components = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        components += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(v) = stack.pop() {
            for &u in g.neighbors(v) {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
    }
    components
}

/// Population standard deviation of a node's closed neighborhood loads.
fn neighborhood_stddev(loads: &[f64], node: usize, neighbors: &[usize]) -> f64 {
    let n = neighbors.len() + 1;
    let mut mean = loads[node];
    for &u in neighbors {
        mean += loads[u];
    }
    mean /= n as f64;
    let mut var = (loads[node] - mean) * (loads[node] - mean);
    for &u in neighbors {
        var += (loads[u] - mean) * (loads[u] - mean);
    }
    (var / n as f64).sqrt()
}

fn max_neighborhood_stddev(loads: &[f64], g: &NeighborGraph) -> f64 {
    (0..g.node_count)
        .map(|v| neighborhood_stddev(loads, v, g.neighbors(v)))
        .fold(0.0, f64::max)
}

/// Iterate `l_i <- l_i + sum_j alpha_ij (l_j - l_i)` until the load standard
/// deviation in every neighborhood drops below `eps * global mean load`,
/// accumulating signed per-edge flows. Net flows are collapsed to a single
/// direction per edge and scaled down per node so no node sends more than its
/// initial load (single-hop cap).
pub fn virtual_balance(
    loads: &[f64],
    g: &NeighborGraph,
    alpha: AlphaRule,
    eps: f64,
    max_iters: usize,
) -> TransferPlan {
    assert_eq!(loads.len(), g.node_count, "loads must cover every node");
    assert!(eps > 0.0, "eps must be positive");
    let n = g.node_count;
    let total: f64 = loads.iter().sum();
    if n == 0 || total <= 0.0 {
        return TransferPlan {
            transfers: BTreeMap::new(),
            diagnostics: DiffusionDiagnostics {
                converged: true,
                virtual_loads: loads.to_vec(),
                components: component_count(g),
                ..Default::default()
            },
        };
    }
    let global_mean = total / n as f64;
    let threshold = eps * global_mean;

    let edges: Vec<(usize, usize)> = g.pairs().collect();
    let alphas: Vec<f64> = edges
        .iter()
        .map(|&(a, b)| match alpha {
            AlphaRule::DegreeBased => 1.0 / (g.degree(a).max(g.degree(b)) as f64 + 1.0),
            AlphaRule::Uniform(a) => a,
        })
        .collect();

    let mut current = loads.to_vec();
    // Signed accumulated flow per edge, positive from the lower-id endpoint.
    let mut flows = vec![0.0f64; edges.len()];
    let mut iterations = 0;
    let mut converged = max_neighborhood_stddev(&current, g) <= threshold;
    while !converged && iterations < max_iters {
        let mut next = current.clone();
        for (e, &(a, b)) in edges.iter().enumerate() {
            let delta = alphas[e] * (current[b] - current[a]);
            next[a] += delta;
            next[b] -= delta;
            flows[e] -= delta;
        }
        current = next;
        iterations += 1;
        converged = max_neighborhood_stddev(&current, g) <= threshold;
    }

    // Collapse net flows to one direction per edge.
    let mut transfers: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (e, &(a, b)) in edges.iter().enumerate() {
        let f = flows[e];
        if f > f64::EPSILON * global_mean {
            transfers.insert((a, b), f);
        } else if f < -f64::EPSILON * global_mean {
            transfers.insert((b, a), -f);
        }
    }

    // Single-hop cap: scale each node's outgoing flows to its initial load.
    let mut outgoing = vec![0.0f64; n];
    for (&(from, _), &t) in &transfers {
        outgoing[from] += t;
    }
    let mut capped_nodes = Vec::new();
    for v in 0..n {
        if outgoing[v] > loads[v] {
            capped_nodes.push(v);
        }
    }
    if !capped_nodes.is_empty() {
        for ((from, _), t) in transfers.iter_mut() {
            if outgoing[*from] > loads[*from] {
                *t *= loads[*from] / outgoing[*from];
            }
        }
        // A zero-load node's flows scale to nothing; drop them.
        transfers.retain(|_, t| *t > 0.0);
    }

    TransferPlan {
        transfers,
        diagnostics: DiffusionDiagnostics {
            iterations,
            converged,
            residual: max_neighborhood_stddev(&current, g) / global_mean,
            virtual_loads: current,
            capped_nodes,
            components: component_count(g),
        },
    }
}

/// Node loads after applying a transfer plan to the given initial loads.
pub fn apply_transfers(loads: &[f64], plan: &TransferPlan) -> Vec<f64> {
    let mut out = loads.to_vec();
    for (&(from, to), &t) in &plan.transfers {
        out[from] -= t;
        out[to] += t;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neighbor::NeighborGraph;

    fn path(n: usize) -> NeighborGraph {
        NeighborGraph::from_pairs(n, 2, (0..n - 1).map(|i| (i, i + 1)))
    }

    fn ring(n: usize) -> NeighborGraph {
        NeighborGraph::from_pairs(n, 2, (0..n).map(|i| (i, (i + 1) % n)))
    }

    /// Independent oracle: run the update rule directly, without flow
    /// bookkeeping, and return the loads at the same stopping point.
    fn oracle_iterate(
        loads: &[f64],
        g: &NeighborGraph,
        eps: f64,
        max_iters: usize,
    ) -> (Vec<f64>, usize) {
        let n = g.node_count;
        let mean = loads.iter().sum::<f64>() / n as f64;
        let stddev_ok = |l: &[f64]| {
            (0..n).all(|v| {
                let hood: Vec<f64> = std::iter::once(l[v])
                    .chain(g.neighbors(v).iter().map(|&u| l[u]))
                    .collect();
                let m = hood.iter().sum::<f64>() / hood.len() as f64;
                let var = hood.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / hood.len() as f64;
                var.sqrt() <= eps * mean
            })
        };
        let mut l = loads.to_vec();
        let mut iters = 0;
        while !stddev_ok(&l) && iters < max_iters {
            let mut next = l.clone();
            for v in 0..n {
                for &u in g.neighbors(v) {
                    let a = 1.0 / (g.degree(v).max(g.degree(u)) as f64 + 1.0);
                    next[v] += a * (l[u] - l[v]);
                }
            }
            l = next;
            iters += 1;
        }
        (l, iters)
    }

    #[test]
    fn balanced_pair_produces_empty_plan() {
        let g = path(2);
        let plan = virtual_balance(&[6.0, 6.0], &g, AlphaRule::DegreeBased, 0.05, 100);
        assert!(plan.transfers.is_empty());
        assert_eq!(plan.diagnostics.iterations, 0);
        assert!(plan.diagnostics.converged);
    }

    #[test]
    fn unbalanced_pair_transfers_half_the_difference() {
        let g = path(2);
        let plan = virtual_balance(&[10.0, 2.0], &g, AlphaRule::DegreeBased, 0.05, 100);
        assert_eq!(plan.transfers.len(), 1);
        assert!((plan.transfers[&(0, 1)] - 4.0).abs() < 1e-12);
        assert_eq!(plan.diagnostics.iterations, 1);
        let after = apply_transfers(&[10.0, 2.0], &plan);
        assert!((after[0] - 6.0).abs() < 1e-12 && (after[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn path_of_three_matches_iteration_oracle() {
        let g = path(3);
        let loads = [9.0, 3.0, 0.0];
        let plan = virtual_balance(&loads, &g, AlphaRule::DegreeBased, 0.05, 100);
        let (oracle_loads, oracle_iters) = oracle_iterate(&loads, &g, 0.05, 100);
        assert_eq!(plan.diagnostics.iterations, oracle_iters);
        for (a, b) in plan.diagnostics.virtual_loads.iter().zip(&oracle_loads) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        // The virtual fixed point is the uniform distribution (4, 4, 4); the
        // eps threshold stops within a small band of it.
        for v in &plan.diagnostics.virtual_loads {
            assert!((v - 4.0).abs() < 0.5, "virtual load {v}");
        }
        // On a path the net flows are determined by conservation against the
        // virtual loads: f_ab = 9 - l_a, f_bc = l_c. The middle node owns
        // only 3.0, so the single-hop cap clamps its relay flow.
        let f_ab = 9.0 - oracle_loads[0];
        let f_bc = oracle_loads[2].min(3.0);
        assert!((plan.transfers[&(0, 1)] - f_ab).abs() < 1e-12);
        assert!((plan.transfers[&(1, 2)] - f_bc).abs() < 1e-12);
        assert_eq!(plan.transfers.len(), 2);
        assert_eq!(plan.diagnostics.capped_nodes, vec![1]);
        let after = apply_transfers(&loads, &plan);
        assert!((after[0] - (9.0 - f_ab)).abs() < 1e-12);
        assert!((after[1] - (3.0 + f_ab - f_bc)).abs() < 1e-12);
        assert!((after[2] - f_bc).abs() < 1e-12);
    }

    #[test]
    fn conservation_and_antisymmetry_hold() {
        for (n, loads) in [
            (5usize, vec![12.0, 0.0, 3.0, 3.0, 1.0]),
            (8, vec![40.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]),
        ] {
            let g = ring(n);
            let plan = virtual_balance(&loads, &g, AlphaRule::DegreeBased, 0.01, 1000);
            let after = apply_transfers(&loads, &plan);
            let before_total: f64 = loads.iter().sum();
            let after_total: f64 = after.iter().sum();
            assert!(
                (before_total - after_total).abs() <= 1e-9 * before_total,
                "conservation: {before_total} vs {after_total}"
            );
            for (&(a, b), &t) in &plan.transfers {
                assert!(t > 0.0);
                assert!(!plan.transfers.contains_key(&(b, a)), "both directions on ({a},{b})");
            }
        }
    }

    #[test]
    fn single_hop_cap_limits_outflow_to_initial_load() {
        // A ring with one huge spike forces relays to forward more than they
        // own; the cap must scale those flows back.
        let n = 8;
        let mut loads = vec![1.0; n];
        loads[0] = 100.0;
        let g = ring(n);
        let plan = virtual_balance(&loads, &g, AlphaRule::DegreeBased, 0.01, 1000);
        assert!(!plan.diagnostics.capped_nodes.is_empty());
        for v in 0..n {
            assert!(
                plan.outgoing(v) <= loads[v] * (1.0 + 1e-9),
                "node {v}: out {} vs load {}",
                plan.outgoing(v),
                loads[v]
            );
        }
        let after = apply_transfers(&loads, &plan);
        assert!(after.iter().all(|&l| l >= -1e-9));
    }

    #[test]
    fn max_load_never_grows() {
        let cases = [
            (ring(6), vec![10.0, 1.0, 5.0, 0.0, 2.0, 2.0]),
            (path(4), vec![8.0, 0.0, 0.0, 0.0]),
            (ring(9), {
                let mut l = vec![32.0; 9];
                l[5] = 320.0;
                l
            }),
        ];
        for (g, loads) in cases {
            let plan = virtual_balance(&loads, &g, AlphaRule::DegreeBased, 0.05, 100);
            let before = loads.iter().cloned().fold(f64::MIN, f64::max);
            let after = apply_transfers(&loads, &plan)
                .into_iter()
                .fold(f64::MIN, f64::max);
            assert!(after <= before + 1e-9, "{after} > {before}");
        }
    }

    #[test]
    fn convergence_on_standard_families() {
        let spike = |n: usize| {
            let mut l = vec![1.0; n];
            l[0] = 10.0;
            l
        };
        let torus16 = NeighborGraph::from_pairs(
            16,
            4,
            (0..4).flat_map(|r| {
                (0..4).flat_map(move |c| {
                    [
                        (4 * r + c, 4 * ((r + 1) % 4) + c),
                        (4 * r + c, 4 * r + (c + 1) % 4),
                    ]
                })
            }),
        );
        for (g, loads) in [
            (ring(8), spike(8)),
            (path(6), spike(6)),
            (torus16, spike(16)),
        ] {
            let plan = virtual_balance(&loads, &g, AlphaRule::DegreeBased, 0.01, 1000);
            assert!(
                plan.diagnostics.converged,
                "residual {}",
                plan.diagnostics.residual
            );
        }
    }

    #[test]
    fn all_zero_loads_yield_empty_plan() {
        let g = ring(4);
        let plan = virtual_balance(&[0.0; 4], &g, AlphaRule::DegreeBased, 0.05, 100);
        assert!(plan.transfers.is_empty());
        assert!(plan.diagnostics.converged);
    }

    #[test]
    fn disconnected_components_balance_internally() {
        let g = NeighborGraph::from_pairs(4, 1, [(0, 1), (2, 3)]);
        let plan = virtual_balance(&[10.0, 2.0, 4.0, 0.0], &g, AlphaRule::DegreeBased, 0.05, 100);
        assert_eq!(plan.diagnostics.components, 2);
        let after = apply_transfers(&[10.0, 2.0, 4.0, 0.0], &plan);
        assert!((after[0] - 6.0).abs() < 1e-12);
        assert!((after[1] - 6.0).abs() < 1e-12);
        assert!((after[2] - 2.0).abs() < 1e-12);
        assert!((after[3] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn isolated_node_is_skipped() {
        let g = NeighborGraph::from_pairs(3, 1, [(0, 1)]);
        let loads = [4.0, 0.0, 99.0];
        let plan = virtual_balance(&loads, &g, AlphaRule::DegreeBased, 0.05, 100);
        let after = apply_transfers(&loads, &plan);
        assert_eq!(after[2], 99.0);
    }

    #[test]
    fn uniform_alpha_rule_is_selectable() {
        let g = path(2);
        let plan = virtual_balance(&[10.0, 2.0], &g, AlphaRule::Uniform(0.25), 0.05, 100);
        // First iterate moves 2.0; convergence takes longer than degree-based.
        assert!(plan.diagnostics.iterations > 1);
        let after = apply_transfers(&[10.0, 2.0], &plan);
        assert!((after[0] - after[1]).abs() < 0.05 * 6.0 * 2.0 + 1e-9);
    }
}
