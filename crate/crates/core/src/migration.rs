//! Object selection: turning per-edge transfer targets into concrete object
//! moves, plus intra-node thread refinement and plan application.
//!
//! Selection walks source nodes in ascending id order. For each outgoing
//! transfer (largest first) it repeatedly picks the best candidate object:
//! most bytes toward the destination (comm variant) or closest to the
//! destination centroid (coordinate variant). A candidate is accepted while the
//! midpoint rule holds: `sent + load/2 <= target`. Every accepted move
//! updates the communication/centroid bookkeeping incrementally, so later
//! decisions see the placement as it will be after the pending moves.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::diffusion::TransferPlan;
use crate::error::{Error, Result};
use crate::model::{MigrationPlan, Move, ThreadMove, WorkloadSnapshot};
use crate::neighbor::Centroids;

pub const DEFAULT_THREAD_EPS: f64 = 0.02;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionDiagnostics {
    /// Transfer load left unrealized because the source ran out of objects.
    pub unmet_transfer: f64,
    /// Edges whose source was exhausted before meeting the target.
    pub exhausted_edges: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub plan: MigrationPlan,
    pub diagnostics: SelectionDiagnostics,
}

/// Bytes each object currently exchanges with every node, maintained
/// incrementally as objects move mid-selection.
struct ObjectNodeComm {
    bytes: Vec<HashMap<usize, f64>>,
}

impl ObjectNodeComm {
    fn build(adjacency: &[Vec<(usize, f64)>], node_of: &[usize]) -> Self {
        let bytes = adjacency
            .iter()
            .map(|partners| {
                let mut map = HashMap::new();
                for &(p, w) in partners {
                    *map.entry(node_of[p]).or_insert(0.0) += w;
                }
                map
            })
            .collect();
        ObjectNodeComm { bytes }
    }

    fn toward(&self, object: usize, node: usize) -> f64 {
        self.bytes[object].get(&node).copied().unwrap_or(0.0)
    }

    /// Object `moved` relocated from `from` to `to`: every partner's view of
    /// its communication shifts between those nodes.
    fn apply_move(
        &mut self,
        moved: usize,
        from: usize,
        to: usize,
        adjacency: &[Vec<(usize, f64)>],
    ) {
        for &(p, w) in &adjacency[moved] {
            let entry = self.bytes[p].entry(from).or_insert(0.0);
            *entry -= w;
            if entry.abs() < 1e-12 {
                self.bytes[p].remove(&from);
            }
            *self.bytes[p].entry(to).or_insert(0.0) += w;
        }
    }
}

/// Running centroid per node, updated as objects move.
struct CentroidTracker {
    sums: Vec<Vec<f64>>,
    counts: Vec<usize>,
    /// Last defined centroid; kept when a node empties out mid-selection.
    current: Vec<Vec<f64>>,
}

impl CentroidTracker {
    fn new(s: &WorkloadSnapshot, initial: &Centroids) -> Self {
        let dims = s.coord_dims;
        let mut sums = vec![vec![0.0; dims]; s.node_count];
        let mut counts = vec![0usize; s.node_count];
        for obj in &s.objects {
            counts[obj.home_node] += 1;
            for (d, &c) in obj.coords.iter().enumerate() {
                sums[obj.home_node][d] += c;
            }
        }
        CentroidTracker {
            sums,
            counts,
            current: initial.coords.clone(),
        }
    }

    fn centroid(&self, node: usize) -> &[f64] {
        &self.current[node]
    }

    fn apply_move(&mut self, coords: &[f64], from: usize, to: usize) {
        for (d, &c) in coords.iter().enumerate() {
            self.sums[from][d] -= c;
            self.sums[to][d] += c;
        }
        self.counts[from] -= 1;
        self.counts[to] += 1;
        for node in [from, to] {
            if self.counts[node] > 0 {
                self.current[node] = self.sums[node]
                    .iter()
                    .map(|x| x / self.counts[node] as f64)
                    .collect();
            }
        }
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Ordered outgoing transfers for one source node: largest target first.
fn outgoing_transfers(plan: &TransferPlan, node: usize) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = plan
        .transfers
        .iter()
        .filter(|((from, _), _)| *from == node)
        .map(|((_, to), &t)| (*to, t))
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    out
}

/// Comm-variant object selection: order candidates by bytes exchanged with
/// the destination node, updating communication state after every move.
pub fn select_objects_comm(s: &WorkloadSnapshot, plan: &TransferPlan) -> Selection {
    let adjacency = s.object_adjacency();
    let mut node_of: Vec<usize> = s.objects.iter().map(|o| o.home_node).collect();
    let mut comm = ObjectNodeComm::build(&adjacency, &node_of);
    let mut moved = vec![false; s.objects.len()];
    let by_node = s.objects_by_node();

    let mut moves = Vec::new();
    let mut diagnostics = SelectionDiagnostics::default();

    for source in 0..s.node_count {
        for (dest, target) in outgoing_transfers(plan, source) {
            let mut sent = 0.0f64;
            let mut rejected = vec![false; by_node[source].len()];
            loop {
                // Best candidate still on this node: positive bytes toward
                // the destination first (bytes desc, load desc, id asc),
                // then zero-byte objects (load desc, id asc).
                let mut best: Option<(bool, f64, f64, usize, usize)> = None;
                for (slot, &obj) in by_node[source].iter().enumerate() {
                    if moved[obj] || rejected[slot] || node_of[obj] != source {
                        continue;
                    }
                    let bytes = comm.toward(obj, dest);
                    let load = s.objects[obj].load;
                    let key = (bytes <= 0.0, -bytes, -load, obj, slot);
                    let better = match &best {
                        None => true,
                        Some((zb, nb, nl, id, _)) => (key.0, key.1, key.2, key.3) < (*zb, *nb, *nl, *id),
                    };
                    if better {
                        best = Some(key);
                    }
                }
                let Some((_, _, neg_load, obj, slot)) = best else {
                    if sent + 1e-12 < target {
                        diagnostics.unmet_transfer += target - sent;
                        diagnostics.exhausted_edges.push((source, dest));
                    }
                    break;
                };
                let load = -neg_load;
                // Midpoint rule: accept only while migrating reduces the
                // absolute deficit.
                if sent + load / 2.0 > target {
                    rejected[slot] = true;
                    continue;
                }
                sent += load;
                moved[obj] = true;
                moves.push(Move {
                    object: obj,
                    from_node: source,
                    to_node: dest,
                });
                node_of[obj] = dest;
                comm.apply_move(obj, source, dest, &adjacency);
            }
        }
    }

    Selection {
        plan: MigrationPlan {
            moves,
            thread_moves: Vec::new(),
        },
        diagnostics,
    }
}

/// Coordinate-variant object selection: order candidates by distance to the
/// destination centroid, updating both affected centroids after every move.
pub fn select_objects_coord(
    s: &WorkloadSnapshot,
    plan: &TransferPlan,
    centroids: &Centroids,
) -> Selection {
    assert!(s.has_coords(), "coordinate selection requires coords");
    let mut node_of: Vec<usize> = s.objects.iter().map(|o| o.home_node).collect();
    let mut tracker = CentroidTracker::new(s, centroids);
    let mut moved = vec![false; s.objects.len()];
    let by_node = s.objects_by_node();

    let mut moves = Vec::new();
    let mut diagnostics = SelectionDiagnostics::default();

    for source in 0..s.node_count {
        for (dest, target) in outgoing_transfers(plan, source) {
            let mut sent = 0.0f64;
            let mut rejected = vec![false; by_node[source].len()];
            loop {
                let dest_centroid = tracker.centroid(dest).to_vec();
                let mut best: Option<(f64, f64, usize, usize)> = None;
                for (slot, &obj) in by_node[source].iter().enumerate() {
                    if moved[obj] || rejected[slot] || node_of[obj] != source {
                        continue;
                    }
                    let d = distance(&s.objects[obj].coords, &dest_centroid);
                    let load = s.objects[obj].load;
                    let key = (d, -load, obj, slot);
                    let better = match &best {
                        None => true,
                        Some((bd, bl, bid, _)) => (key.0, key.1, key.2) < (*bd, *bl, *bid),
                    };
                    if better {
                        best = Some(key);
                    }
                }
                let Some((_, neg_load, obj, slot)) = best else {
                    if sent + 1e-12 < target {
                        diagnostics.unmet_transfer += target - sent;
                        diagnostics.exhausted_edges.push((source, dest));
                    }
                    break;
                };
                let load = -neg_load;
                if sent + load / 2.0 > target {
                    rejected[slot] = true;
                    continue;
                }
                sent += load;
                moved[obj] = true;
                moves.push(Move {
                    object: obj,
                    from_node: source,
                    to_node: dest,
                });
                node_of[obj] = dest;
                tracker.apply_move(&s.objects[obj].coords, source, dest);
            }
        }
    }

    Selection {
        plan: MigrationPlan {
            moves,
            thread_moves: Vec::new(),
        },
        diagnostics,
    }
}

/// Within-node thread refinement: repeatedly move the smallest object off the
/// heaviest thread onto the lightest one while that strictly lowers the
/// node's maximum thread load and the max exceeds `(1 + eps) * mean`.
pub fn refine_threads(s: &WorkloadSnapshot, eps: f64) -> Vec<ThreadMove> {
    let threads = s.threads_per_node;
    if threads <= 1 {
        return Vec::new();
    }
    let mut final_thread: std::collections::BTreeMap<usize, usize> = Default::default();

    for node in 0..s.node_count {
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); threads];
        let mut loads = vec![0.0f64; threads];
        for obj in &s.objects {
            if obj.home_node == node {
                members[obj.home_thread].push(obj.id);
                loads[obj.home_thread] += obj.load;
            }
        }
        let mean: f64 = loads.iter().sum::<f64>() / threads as f64;
        if mean <= 0.0 {
            continue;
        }
        loop {
            let heaviest = (0..threads)
                .max_by(|&a, &b| loads[a].total_cmp(&loads[b]).then(b.cmp(&a)))
                .unwrap();
            if loads[heaviest] <= (1.0 + eps) * mean {
                break;
            }
            let lightest = (0..threads)
                .min_by(|&a, &b| loads[a].total_cmp(&loads[b]).then(a.cmp(&b)))
                .unwrap();
            // Smallest object on the heaviest thread, lowest id on ties.
            let Some(&obj) = members[heaviest].iter().min_by(|&&a, &&b| {
                s.objects[a]
                    .load
                    .total_cmp(&s.objects[b].load)
                    .then(a.cmp(&b))
            }) else {
                break;
            };
            let w = s.objects[obj].load;
            let new_max = (0..threads)
                .map(|t| {
                    if t == heaviest {
                        loads[t] - w
                    } else if t == lightest {
                        loads[t] + w
                    } else {
                        loads[t]
                    }
                })
                .fold(f64::MIN, f64::max);
            if new_max >= loads[heaviest] {
                break;
            }
            members[heaviest].retain(|&o| o != obj);
            members[lightest].push(obj);
            loads[heaviest] -= w;
            loads[lightest] += w;
            final_thread.insert(obj, lightest);
        }
    }

    final_thread
        .into_iter()
        .map(|(object, to_thread)| ThreadMove { object, to_thread })
        .collect()
}

/// Commit a plan: new snapshot with updated placements, loads and edges
/// untouched. Node-move arrivals land on thread 0 before thread moves apply.
pub fn apply_plan(s: &WorkloadSnapshot, plan: &MigrationPlan) -> Result<WorkloadSnapshot> {
    let mut out = s.clone();
    let mut seen = vec![false; s.objects.len()];
    for mv in &plan.moves {
        if mv.object >= out.objects.len() {
            return Err(Error::Invariant(format!(
                "plan references unknown object {}",
                mv.object
            )));
        }
        if seen[mv.object] {
            return Err(Error::Invariant(format!(
                "object {} appears twice in the plan",
                mv.object
            )));
        }
        seen[mv.object] = true;
        if mv.from_node == mv.to_node {
            return Err(Error::Invariant(format!(
                "object {}: from_node equals to_node ({})",
                mv.object, mv.from_node
            )));
        }
        if mv.to_node >= out.node_count {
            return Err(Error::Invariant(format!(
                "object {}: destination node {} out of range",
                mv.object, mv.to_node
            )));
        }
        let obj = &mut out.objects[mv.object];
        if obj.home_node != mv.from_node {
            return Err(Error::StalePlan {
                object: mv.object,
                expected_node: mv.from_node,
            });
        }
        obj.home_node = mv.to_node;
        obj.home_thread = 0;
    }
    for tm in &plan.thread_moves {
        if tm.object >= out.objects.len() || tm.to_thread >= out.threads_per_node {
            return Err(Error::Invariant(format!(
                "invalid thread move for object {}",
                tm.object
            )));
        }
        out.objects[tm.object].home_thread = tm.to_thread;
    }
    Ok(out)
}
