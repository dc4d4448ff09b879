//! Per-round node neighbor graph of bounded degree K.
//!
//! The graph is built by a request/accept/confirm handshake simulated as
//! deterministic synchronous rounds. Candidates are ranked by decreasing
//! communication volume (comm variant) or increasing centroid distance
//! (coordinate variant). Once a node has exhausted its communication
//! partners it may request nodes it does not communicate with, so heavily
//! skewed workloads can still reach the requested degree; nodes with no
//! communication at all stay out of the protocol entirely and are flagged
//! isolated.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::WorkloadSnapshot;

/// Symmetric node adjacency with degree at most K.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborGraph {
    pub node_count: usize,
    pub k: usize,
    pairs: BTreeSet<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl NeighborGraph {
    pub fn from_pairs(
        node_count: usize,
        k: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Self {
        let pairs: BTreeSet<(usize, usize)> = pairs
            .into_iter()
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        let mut adjacency = vec![Vec::new(); node_count];
        for &(a, b) in &pairs {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        NeighborGraph {
            node_count,
            k,
            pairs,
            adjacency,
        }
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.pairs.contains(&(a.min(b), a.max(b)))
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn edge_count(&self) -> usize {
        self.pairs.len()
    }
}

/// Tie-breaking among equally ranked candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TieBreak {
    /// Lower node id first. The default everywhere.
    NodeId,
    /// Deterministic pseudo-random order derived from the seed.
    Seeded(u64),
}

impl TieBreak {
    fn key(&self, requester: usize, candidate: usize) -> u64 {
        match self {
            TieBreak::NodeId => candidate as u64,
            TieBreak::Seeded(seed) => splitmix(
                seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
                    ^ ((requester as u64) << 32)
                    ^ candidate as u64,
            ),
        }
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborDiagnostics {
    /// Nodes with no communication partner at all; they keep degree 0.
    pub isolated: Vec<usize>,
    pub rounds_used: usize,
    /// Non-isolated nodes that finished below the requested degree.
    pub unfilled: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct NeighborBuild {
    pub graph: NeighborGraph,
    pub diagnostics: NeighborDiagnostics,
}

/// Default bound on handshake rounds.
pub fn default_max_rounds(k: usize) -> usize {
    2 * k + 4
}

/// Build the neighbor graph from inter-node communication volumes.
///
/// Candidates are ranked by bytes descending; nodes that exhaust their
/// communication partners continue with zero-communication nodes so load can
/// still spread (`allow_zero_comm`). Ties break per `tie`.
pub fn build_comm_neighbors(
    matrix: &BTreeMap<(usize, usize), f64>,
    node_count: usize,
    k: usize,
    max_rounds: usize,
    tie: TieBreak,
    allow_zero_comm: bool,
) -> NeighborBuild {
    let mut bytes_to = vec![BTreeMap::new(); node_count];
    for (&(a, b), &bytes) in matrix {
        if bytes > 0.0 && a != b && a < node_count && b < node_count {
            *bytes_to[a].entry(b).or_insert(0.0) += bytes;
            *bytes_to[b].entry(a).or_insert(0.0) += bytes;
        }
    }
    let isolated: Vec<usize> = (0..node_count)
        .filter(|&v| bytes_to[v].is_empty())
        .collect();
    let isolated_set: BTreeSet<usize> = isolated.iter().copied().collect();

    let candidates: Vec<Vec<usize>> = (0..node_count)
        .map(|v| {
            if isolated_set.contains(&v) {
                return Vec::new();
            }
            let mut partners: Vec<(f64, u64, usize)> = bytes_to[v]
                .iter()
                .map(|(&u, &b)| (b, tie.key(v, u), u))
                .collect();
            partners.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
            let mut ranked: Vec<usize> = partners.into_iter().map(|(_, _, u)| u).collect();
            if allow_zero_comm {
                let mut rest: Vec<(u64, usize)> = (0..node_count)
                    .filter(|&u| {
                        u != v && !bytes_to[v].contains_key(&u) && !isolated_set.contains(&u)
                    })
                    .map(|u| (tie.key(v, u), u))
                    .collect();
                rest.sort_unstable();
                ranked.extend(rest.into_iter().map(|(_, u)| u));
            }
            ranked
        })
        .collect();

    run_handshake(node_count, k, max_rounds, &candidates, &isolated)
}

/// Build the neighbor graph from node centroids: every other node is a
/// candidate, ranked by ascending Euclidean distance (no periodic wrap).
pub fn build_coord_neighbors(
    centroids: &[Vec<f64>],
    k: usize,
    max_rounds: usize,
    tie: TieBreak,
) -> NeighborBuild {
    let node_count = centroids.len();
    let candidates: Vec<Vec<usize>> = (0..node_count)
        .map(|v| {
            let mut ranked: Vec<(f64, u64, usize)> = (0..node_count)
                .filter(|&u| u != v)
                .map(|u| (euclidean(&centroids[v], &centroids[u]), tie.key(v, u), u))
                .collect();
            ranked.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            ranked.into_iter().map(|(_, _, u)| u).collect()
        })
        .collect();
    run_handshake(node_count, k, max_rounds, &candidates, &[])
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

struct NodeState {
    confirmed: BTreeSet<usize>,
    holds: BTreeSet<usize>,
    tried: BTreeSet<usize>,
}

/// Synchronous simulation of the request/respond/confirm handshake.
///
/// Each round: (1) every node under degree K requests its top ceil(l/2)
/// untried candidates; (2) receivers accept while confirmed + holds stays
/// under K, reserving a hold per acceptance; (3) requesters confirm an
/// acceptance if their own confirmed count plus holds (a hold reserved for
/// the accepting partner merges into the confirmation) stays under K;
/// (4) unconfirmed holds expire. Mutual requests therefore always confirm.
fn run_handshake(
    node_count: usize,
    k: usize,
    max_rounds: usize,
    candidates: &[Vec<usize>],
    isolated: &[usize],
) -> NeighborBuild {
    let isolated_set: BTreeSet<usize> = isolated.iter().copied().collect();
    let mut nodes: Vec<NodeState> = (0..node_count)
        .map(|_| NodeState {
            confirmed: BTreeSet::new(),
            holds: BTreeSet::new(),
            tried: BTreeSet::new(),
        })
        .collect();
    let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut rounds_used = 0;

    for _round in 0..max_rounds {
        // Request phase.
        let mut requests: Vec<(usize, usize)> = Vec::new();
        for v in 0..node_count {
            let confirmed = nodes[v].confirmed.len();
            if confirmed >= k {
                continue;
            }
            let l = k - confirmed - nodes[v].holds.len();
            if l == 0 {
                continue;
            }
            let want = l.div_ceil(2);
            let picks: Vec<usize> = candidates[v]
                .iter()
                .copied()
                .filter(|u| !nodes[v].tried.contains(u) && !nodes[v].confirmed.contains(u))
                .take(want)
                .collect();
            for u in picks {
                nodes[v].tried.insert(u);
                requests.push((v, u));
            }
        }
        if requests.is_empty() {
            break;
        }
        rounds_used += 1;

        // Respond phase: each receiver handles its requests in the order of
        // its own candidate ranking.
        let mut by_receiver: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &(from, to) in &requests {
            by_receiver.entry(to).or_default().push(from);
        }
        let mut acceptances: Vec<(usize, usize)> = Vec::new();
        for (&recv, senders) in &by_receiver {
            if isolated_set.contains(&recv) {
                continue;
            }
            let rank_of: BTreeMap<usize, usize> = candidates[recv]
                .iter()
                .enumerate()
                .map(|(i, &u)| (u, i))
                .collect();
            let mut ordered = senders.clone();
            ordered.sort_by_key(|u| (rank_of.get(u).copied().unwrap_or(usize::MAX), *u));
            for from in ordered {
                let st = &nodes[recv];
                if st.confirmed.contains(&from) {
                    continue;
                }
                if st.confirmed.len() >= k || st.confirmed.len() + st.holds.len() >= k {
                    continue; // reject
                }
                nodes[recv].holds.insert(from);
                acceptances.push((from, recv));
            }
        }

        // Confirm phase, in deterministic (requester, accepter) order.
        acceptances.sort_unstable();
        for (requester, accepter) in acceptances {
            let key = (requester.min(accepter), requester.max(accepter));
            if pairs.contains(&key) {
                continue;
            }
            let st = &nodes[requester];
            let holds_excl =
                st.holds.len() - usize::from(st.holds.contains(&accepter));
            if st.confirmed.len() + holds_excl >= k {
                continue; // decline; the accepter's hold expires below
            }
            pairs.insert(key);
            nodes[requester].confirmed.insert(accepter);
            nodes[requester].holds.remove(&accepter);
            nodes[accepter].confirmed.insert(requester);
            nodes[accepter].holds.remove(&requester);
        }

        // Expire all remaining holds.
        for st in &mut nodes {
            st.holds.clear();
        }
    }

    let graph = NeighborGraph::from_pairs(node_count, k, pairs);
    let unfilled = (0..node_count)
        .filter(|&v| !isolated_set.contains(&v) && graph.degree(v) < k)
        .collect();
    NeighborBuild {
        graph,
        diagnostics: NeighborDiagnostics {
            isolated: isolated.to_vec(),
            rounds_used,
            unfilled,
        },
    }
}

/// Per-node centroids: the unweighted mean position of each node's objects.
#[derive(Debug, Clone, PartialEq)]
pub struct Centroids {
    pub coords: Vec<Vec<f64>>,
    /// Nodes with no objects; they are assigned the mean of the other
    /// centroids so they can still acquire neighbors and receive load.
    pub empty_nodes: Vec<usize>,
}

pub fn compute_centroids(s: &WorkloadSnapshot) -> Centroids {
    let dims = s.coord_dims;
    let mut sums = vec![vec![0.0; dims]; s.node_count];
    let mut counts = vec![0usize; s.node_count];
    for obj in &s.objects {
        counts[obj.home_node] += 1;
        for (d, &c) in obj.coords.iter().enumerate() {
            sums[obj.home_node][d] += c;
        }
    }
    let empty_nodes: Vec<usize> = (0..s.node_count).filter(|&v| counts[v] == 0).collect();
    let mut coords: Vec<Vec<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(sum, &count)| {
            if count == 0 {
                vec![0.0; dims]
            } else {
                sum.iter().map(|x| x / count as f64).collect()
            }
        })
        .collect();
    let occupied = s.node_count - empty_nodes.len();
    if occupied > 0 && !empty_nodes.is_empty() {
        let mut mean = vec![0.0; dims];
        for (v, c) in coords.iter().enumerate() {
            if counts[v] > 0 {
                for d in 0..dims {
                    mean[d] += c[d];
                }
            }
        }
        for m in &mut mean {
            *m /= occupied as f64;
        }
        for &v in &empty_nodes {
            coords[v] = mean.clone();
        }
    }
    Centroids {
        coords,
        empty_nodes,
    }
}
