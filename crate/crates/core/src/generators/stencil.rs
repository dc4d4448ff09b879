//! 2D/3D stencil workload generator with synthetic load imbalance.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CommEdge, ObjectInfo, WorkloadSnapshot};

/// How grid objects are initially assigned to nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decomposition {
    /// Contiguous tiles; each entry must divide the matching grid dimension.
    Tiled(Vec<usize>),
    /// Column stripes over the first grid dimension, so the node
    /// communication graph forms a 1D ring when the grid is periodic.
    Striped1dRing(usize),
}

/// Synthetic load imbalance applied on top of the uniform base load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ImbalanceSpec {
    None,
    /// Each object's load multiplied by (1+pct) or (1-pct) with equal
    /// probability.
    RandomPct { pct: f64, seed: u64 },
    /// Nodes with index = 1 or 2 (mod 7) overloaded, index = 3 (mod 7)
    /// underloaded. Default multipliers are calibrated so the initial
    /// max/avg load ratio lands at the reference values for 8- and
    /// 32-node stencils.
    Mod7 { overload: f64, underload: f64 },
    /// All objects of one node overloaded by `factor`.
    Spike { factor: f64, node: usize },
}

impl ImbalanceSpec {
    pub const MOD7_OVERLOAD_DEFAULT: f64 = 1.46;
    pub const MOD7_UNDERLOAD_DEFAULT: f64 = 0.68;

    pub fn mod7_default() -> Self {
        ImbalanceSpec::Mod7 {
            overload: Self::MOD7_OVERLOAD_DEFAULT,
            underload: Self::MOD7_UNDERLOAD_DEFAULT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StencilSpec {
    /// Objects per dimension; rank 2 or 3.
    pub grid_dims: Vec<usize>,
    pub decomposition: Decomposition,
    pub periodic: bool,
    pub base_load: f64,
    pub bytes_per_edge: f64,
    pub imbalance: ImbalanceSpec,
    pub threads_per_node: usize,
}

impl StencilSpec {
    fn validate(&self) -> Result<()> {
        let rank = self.grid_dims.len();
        if rank != 2 && rank != 3 {
            return Err(Error::Config(format!(
                "stencil grid must be 2D or 3D, got rank {rank}"
            )));
        }
        if self.grid_dims.iter().any(|&d| d == 0) {
            return Err(Error::Config("grid dimensions must be positive".into()));
        }
        match &self.decomposition {
            Decomposition::Tiled(node_dims) => {
                if node_dims.len() != rank {
                    return Err(Error::Config(format!(
                        "node grid rank {} does not match grid rank {rank}",
                        node_dims.len()
                    )));
                }
                for (d, (&g, &n)) in self.grid_dims.iter().zip(node_dims).enumerate() {
                    if n == 0 || g % n != 0 {
                        return Err(Error::Config(format!(
                            "node count {n} does not divide grid dimension {g} (dim {d})"
                        )));
                    }
                }
            }
            Decomposition::Striped1dRing(nodes) => {
                if *nodes == 0 || self.grid_dims[0] % nodes != 0 {
                    return Err(Error::Config(format!(
                        "ring node count {nodes} does not divide grid columns {}",
                        self.grid_dims[0]
                    )));
                }
            }
        }
        if !(self.base_load > 0.0) || !(self.bytes_per_edge > 0.0) {
            return Err(Error::Config(
                "base_load and bytes_per_edge must be positive".into(),
            ));
        }
        if self.threads_per_node == 0 {
            return Err(Error::Config("threads_per_node must be positive".into()));
        }
        match &self.imbalance {
            ImbalanceSpec::RandomPct { pct, .. } if !(*pct >= 0.0 && *pct < 1.0) => Err(
                Error::Config(format!("random imbalance pct {pct} must lie in [0, 1)")),
            ),
            ImbalanceSpec::Mod7 {
                overload,
                underload,
            } if !(*overload > 0.0 && *underload > 0.0) => Err(Error::Config(
                "mod7 multipliers must be positive".into(),
            )),
            ImbalanceSpec::Spike { factor, node } => {
                if !(*factor > 0.0) {
                    return Err(Error::Config("spike factor must be positive".into()));
                }
                if *node >= self.node_count() {
                    return Err(Error::Config(format!(
                        "spike node {node} out of range ({} nodes)",
                        self.node_count()
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn node_count(&self) -> usize {
        match &self.decomposition {
            Decomposition::Tiled(node_dims) => node_dims.iter().product(),
            Decomposition::Striped1dRing(nodes) => *nodes,
        }
    }
}

fn grid_coords(mut id: usize, dims: &[usize]) -> Vec<usize> {
    let mut coords = vec![0; dims.len()];
    for d in (0..dims.len()).rev() {
        coords[d] = id % dims[d];
        id /= dims[d];
    }
    coords
}

fn row_major(coords: &[usize], dims: &[usize]) -> usize {
    let mut idx = 0;
    for (c, d) in coords.iter().zip(dims) {
        idx = idx * d + c;
    }
    idx
}

/// One object per grid point; 5-point (2D) or 7-point (3D) neighbor edges.
pub fn gen_stencil(spec: &StencilSpec) -> Result<WorkloadSnapshot> {
    spec.validate()?;
    let dims = &spec.grid_dims;
    let rank = dims.len();
    let n: usize = dims.iter().product();
    let node_count = spec.node_count();

    let node_of = |coords: &[usize]| -> usize {
        match &spec.decomposition {
            Decomposition::Tiled(node_dims) => {
                let tile: Vec<usize> = dims
                    .iter()
                    .zip(node_dims)
                    .map(|(&g, &nd)| g / nd)
                    .collect();
                let node_coords: Vec<usize> = coords
                    .iter()
                    .zip(&tile)
                    .map(|(&c, &t)| c / t)
                    .collect();
                row_major(&node_coords, node_dims)
            }
            Decomposition::Striped1dRing(nodes) => coords[0] / (dims[0] / nodes),
        }
    };

    let mut rng = match &spec.imbalance {
        ImbalanceSpec::RandomPct { seed, .. } => Some(ChaCha8Rng::seed_from_u64(*seed)),
        _ => None,
    };

    let mut objects = Vec::with_capacity(n);
    for id in 0..n {
        let coords = grid_coords(id, dims);
        let home_node = node_of(&coords);
        let factor = match &spec.imbalance {
            ImbalanceSpec::None => 1.0,
            ImbalanceSpec::RandomPct { pct, .. } => {
                if rng.as_mut().unwrap().gen_bool(0.5) {
                    1.0 + pct
                } else {
                    1.0 - pct
                }
            }
            ImbalanceSpec::Mod7 {
                overload,
                underload,
            } => match home_node % 7 {
                1 | 2 => *overload,
                3 => *underload,
                _ => 1.0,
            },
            ImbalanceSpec::Spike { factor, node } => {
                if home_node == *node {
                    *factor
                } else {
                    1.0
                }
            }
        };
        objects.push(ObjectInfo {
            id,
            home_node,
            home_thread: 0,
            load: spec.base_load * factor,
            coords: coords.iter().map(|&c| c as f64).collect(),
        });
    }

    // Unordered pair set deduplicates wrap edges on length-2 dimensions.
    let mut pairs = BTreeSet::new();
    for id in 0..n {
        let coords = grid_coords(id, dims);
        for d in 0..rank {
            let mut fwd = coords.clone();
            if coords[d] + 1 < dims[d] {
                fwd[d] = coords[d] + 1;
            } else if spec.periodic {
                fwd[d] = 0;
            } else {
                continue;
            }
            let other = row_major(&fwd, dims);
            if other != id {
                pairs.insert((id.min(other), id.max(other)));
            }
        }
    }
    let edges = pairs
        .into_iter()
        .map(|(a, b)| CommEdge {
            a,
            b,
            bytes: spec.bytes_per_edge,
        })
        .collect();

    let snapshot = WorkloadSnapshot {
        node_count,
        threads_per_node: spec.threads_per_node,
        coord_dims: rank,
        objects,
        edges,
        periodic_dims: Some(vec![spec.periodic; rank]),
    };
    snapshot.validate()?;
    Ok(snapshot)
}
