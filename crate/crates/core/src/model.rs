//! Workload data model: objects, communication edges, snapshots, and
//! migration plans.
//!
//! A [`WorkloadSnapshot`] is an immutable value after construction. Strategies
//! never mutate a snapshot in place; they produce a [`MigrationPlan`] which is
//! applied to build a new snapshot.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A migratable unit of work with a current placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectInfo {
    /// Dense id, equal to the object's index in `WorkloadSnapshot::objects`.
    pub id: usize,
    pub home_node: usize,
    /// Thread index within the home node; 0 when `threads_per_node == 1`.
    pub home_thread: usize,
    /// Abstract work units; a proxy for runtime spent within the object.
    pub load: f64,
    /// Logical position, empty when the workload has no coordinates.
    pub coords: Vec<f64>,
}

/// Undirected communication edge with bytes aggregated over both directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommEdge {
    pub a: usize,
    pub b: usize,
    pub bytes: f64,
}

/// Full system state: objects, communication edges, and node/thread topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSnapshot {
    pub node_count: usize,
    pub threads_per_node: usize,
    /// Dimensionality of object coordinates; 0 when objects carry none.
    pub coord_dims: usize,
    pub objects: Vec<ObjectInfo>,
    pub edges: Vec<CommEdge>,
    /// Generator metadata: per-dimension periodic boundary flags.
    pub periodic_dims: Option<Vec<bool>>,
}

/// A single inter-node object move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Move {
    pub object: usize,
    pub from_node: usize,
    pub to_node: usize,
}

/// An intra-node thread reassignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThreadMove {
    pub object: usize,
    pub to_thread: usize,
}

/// Output of a load balancing round: node moves plus thread refinements.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MigrationPlan {
    pub moves: Vec<Move>,
    pub thread_moves: Vec<ThreadMove>,
}

impl MigrationPlan {
    pub fn is_empty(&self) -> bool {
        self.moves.is_empty() && self.thread_moves.is_empty()
    }
}

impl WorkloadSnapshot {
    /// Check every data-model invariant, naming the offending object or edge.
    pub fn validate(&self) -> Result<()> {
        if self.node_count == 0 {
            return Err(Error::Invariant("node_count must be positive".into()));
        }
        if self.threads_per_node == 0 {
            return Err(Error::Invariant(
                "threads_per_node must be positive".into(),
            ));
        }
        for (idx, obj) in self.objects.iter().enumerate() {
            if obj.id != idx {
                return Err(Error::Invariant(format!(
                    "object ids must be dense 0..n-1: index {idx} holds id {}",
                    obj.id
                )));
            }
            if !obj.load.is_finite() || obj.load < 0.0 {
                return Err(Error::Invariant(format!(
                    "object {}: load {} must be a nonnegative finite real",
                    obj.id, obj.load
                )));
            }
            if obj.home_node >= self.node_count {
                return Err(Error::Invariant(format!(
                    "object {}: home_node {} out of range (node_count {})",
                    obj.id, obj.home_node, self.node_count
                )));
            }
            if obj.home_thread >= self.threads_per_node {
                return Err(Error::Invariant(format!(
                    "object {}: home_thread {} out of range (threads_per_node {})",
                    obj.id, obj.home_thread, self.threads_per_node
                )));
            }
            if obj.coords.len() != self.coord_dims {
                return Err(Error::Invariant(format!(
                    "object {}: expected {} coordinates, found {}",
                    obj.id,
                    self.coord_dims,
                    obj.coords.len()
                )));
            }
        }
        if let Some(p) = &self.periodic_dims {
            if self.coord_dims != 0 && p.len() != self.coord_dims {
                return Err(Error::Invariant(format!(
                    "periodic_dims has {} entries but coord_dims is {}",
                    p.len(),
                    self.coord_dims
                )));
            }
        }
        let mut seen = BTreeSet::new();
        for edge in &self.edges {
            if edge.a == edge.b {
                return Err(Error::Invariant(format!(
                    "edge ({}, {}) is a self loop",
                    edge.a, edge.b
                )));
            }
            for endpoint in [edge.a, edge.b] {
                if endpoint >= self.objects.len() {
                    return Err(Error::Invariant(format!(
                        "edge ({}, {}) references unknown object id {}",
                        edge.a, edge.b, endpoint
                    )));
                }
            }
            if !edge.bytes.is_finite() || edge.bytes < 0.0 {
                return Err(Error::Invariant(format!(
                    "edge ({}, {}): bytes {} must be a nonnegative finite real",
                    edge.a, edge.b, edge.bytes
                )));
            }
            let key = (edge.a.min(edge.b), edge.a.max(edge.b));
            if !seen.insert(key) {
                return Err(Error::Invariant(format!(
                    "duplicate edge for object pair ({}, {})",
                    key.0, key.1
                )));
            }
        }
        Ok(())
    }

    pub fn has_coords(&self) -> bool {
        self.coord_dims > 0
    }

    /// Sum of object loads per node.
    pub fn node_loads(&self) -> Vec<f64> {
        let mut loads = vec![0.0; self.node_count];
        for obj in &self.objects {
            loads[obj.home_node] += obj.load;
        }
        loads
    }

    /// Object ids grouped by their current home node.
    pub fn objects_by_node(&self) -> Vec<Vec<usize>> {
        let mut by_node = vec![Vec::new(); self.node_count];
        for obj in &self.objects {
            by_node[obj.home_node].push(obj.id);
        }
        by_node
    }

    /// Per-object adjacency: `(partner id, bytes)` for every incident edge.
    pub fn object_adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.objects.len()];
        for edge in &self.edges {
            adj[edge.a].push((edge.b, edge.bytes));
            adj[edge.b].push((edge.a, edge.bytes));
        }
        adj
    }

    pub fn total_edge_bytes(&self) -> f64 {
        self.edges.iter().map(|e| e.bytes).sum()
    }

    pub fn total_load(&self) -> f64 {
        self.objects.iter().map(|o| o.load).sum()
    }
}

/// Aggregate inter-node communication: bytes per unordered node pair.
///
/// Pairs with zero bytes are omitted; intra-node edges do not contribute.
pub fn node_comm_matrix(s: &WorkloadSnapshot) -> BTreeMap<(usize, usize), f64> {
    let mut matrix = BTreeMap::new();
    for edge in &s.edges {
        let na = s.objects[edge.a].home_node;
        let nb = s.objects[edge.b].home_node;
        if na == nb || edge.bytes == 0.0 {
            continue;
        }
        *matrix.entry((na.min(nb), na.max(nb))).or_insert(0.0) += edge.bytes;
    }
    matrix.retain(|_, bytes| *bytes > 0.0);
    matrix
}
