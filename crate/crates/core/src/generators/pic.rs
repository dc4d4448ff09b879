//! Particle-in-cell style workload with deterministic particle motion.
//!
//! Particles live on a periodic c-by-c cell grid. Each step every particle
//! advances (2k+1) cells horizontally and 1 cell vertically. The grid is
//! partitioned into a 2D arrangement of chares (the migratable objects);
//! chare loads follow particle counts and chare-boundary bytes follow the
//! particles about to cross plus a constant halo term.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CommEdge, ObjectInfo, WorkloadSnapshot};

/// Initial chare-to-node assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChareMapping {
    /// Column-major stripes: consecutive chare columns per node.
    Striped,
    /// Contiguous 2D tiles of chares per node.
    Quad,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicSpec {
    /// Cells per side of the square grid.
    pub grid_cells: usize,
    pub particles: usize,
    /// Skew of the geometric column distribution, in (0, 1].
    pub rho: f64,
    /// Horizontal speed parameter: displacement is (2k+1) cells per step.
    pub k: usize,
    /// Chares per dimension (x, y).
    pub chare_dims: [usize; 2],
    pub nodes: usize,
    pub mapping: ChareMapping,
    pub seed: u64,
    pub bytes_per_particle_crossing: f64,
    pub bytes_halo_const: f64,
    pub load_per_particle: f64,
    pub load_per_cell: f64,
}

impl PicSpec {
    fn validate(&self) -> Result<()> {
        if self.grid_cells == 0 || self.particles == 0 {
            return Err(Error::Config(
                "grid_cells and particles must be positive".into(),
            ));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::Config(format!("rho {} must lie in (0, 1]", self.rho)));
        }
        let [cx, cy] = self.chare_dims;
        if cx == 0 || cy == 0 || cx > self.grid_cells || cy > self.grid_cells {
            return Err(Error::Config(format!(
                "chare dims {cx}x{cy} must fit a {0}x{0} grid",
                self.grid_cells
            )));
        }
        if self.nodes == 0 || (cx * cy) % self.nodes != 0 {
            return Err(Error::Config(format!(
                "node count {} must divide chare count {}",
                self.nodes,
                cx * cy
            )));
        }
        if self.mapping == ChareMapping::Striped && cx % self.nodes != 0 {
            return Err(Error::Config(format!(
                "striped mapping needs node count {} to divide chare columns {cx}",
                self.nodes
            )));
        }
        if self.mapping == ChareMapping::Quad {
            let (nx, ny) = quad_node_grid(self.nodes);
            if cx % nx != 0 || cy % ny != 0 {
                return Err(Error::Config(format!(
                    "quad mapping needs node grid {nx}x{ny} to divide chare grid {cx}x{cy}"
                )));
            }
        }
        if !(self.load_per_particle > 0.0)
            || self.load_per_cell < 0.0
            || !(self.bytes_per_particle_crossing > 0.0)
            || self.bytes_halo_const < 0.0
        {
            return Err(Error::Config("invalid PIC load/byte parameters".into()));
        }
        Ok(())
    }

    pub fn horizontal_speed(&self) -> usize {
        2 * self.k + 1
    }
}

/// Particle positions plus the spec that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicState {
    pub spec: PicSpec,
    pub cols: Vec<u32>,
    pub rows: Vec<u32>,
}

/// Near-square factorization used for quad mapping, wider along x.
fn quad_node_grid(nodes: usize) -> (usize, usize) {
    let mut best = (nodes, 1);
    let mut d = 1;
    while d * d <= nodes {
        if nodes % d == 0 {
            best = (nodes / d, d);
        }
        d += 1;
    }
    best
}

/// Balanced partition boundaries: `bounds[i] = floor(i * cells / parts)`.
fn tile_bounds(cells: usize, parts: usize) -> Vec<usize> {
    (0..=parts).map(|i| i * cells / parts).collect()
}

/// Cell index -> tile index lookup for one dimension.
fn cell_to_tile(cells: usize, parts: usize) -> Vec<usize> {
    let bounds = tile_bounds(cells, parts);
    let mut lookup = vec![0; cells];
    for t in 0..parts {
        for cell in bounds[t]..bounds[t + 1] {
            lookup[cell] = t;
        }
    }
    lookup
}

/// Initial chare-to-node placement per the spec's mapping, indexed by chare id.
pub fn initial_placement(spec: &PicSpec) -> Vec<usize> {
    let [cx, cy] = spec.chare_dims;
    let mut placement = vec![0; cx * cy];
    match spec.mapping {
        ChareMapping::Striped => {
            let per_node = (cx * cy) / spec.nodes;
            for x in 0..cx {
                for y in 0..cy {
                    // Column-major order: chares of column x come before x+1.
                    let cm_index = x * cy + y;
                    placement[chare_id(x, y, cy)] = cm_index / per_node;
                }
            }
        }
        ChareMapping::Quad => {
            let (nx, ny) = quad_node_grid(spec.nodes);
            let (tx, ty) = (cx / nx, cy / ny);
            for x in 0..cx {
                for y in 0..cy {
                    placement[chare_id(x, y, cy)] = (x / tx) * ny + (y / ty);
                }
            }
        }
    }
    placement
}

/// Chare ids group each chare column contiguously: `id = x * cy + y`.
fn chare_id(x: usize, y: usize, cy: usize) -> usize {
    x * cy + y
}

/// Place particles: column i drawn proportional to rho^i, row uniform.
pub fn gen_pic_initial(spec: &PicSpec) -> Result<(PicState, WorkloadSnapshot)> {
    spec.validate()?;
    let c = spec.grid_cells;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Column CDF for weights rho^i over columns 0..c-1.
    let mut cdf = Vec::with_capacity(c);
    let mut acc = 0.0f64;
    let mut w = 1.0f64;
    for _ in 0..c {
        acc += w;
        cdf.push(acc);
        w *= spec.rho;
    }
    let total = acc;

    let mut cols = Vec::with_capacity(spec.particles);
    let mut rows = Vec::with_capacity(spec.particles);
    for _ in 0..spec.particles {
        let u: f64 = rng.gen::<f64>() * total;
        let col = cdf.partition_point(|&x| x < u).min(c - 1);
        cols.push(col as u32);
        rows.push(rng.gen_range(0..c) as u32);
    }

    let state = PicState {
        spec: spec.clone(),
        cols,
        rows,
    };
    let snapshot = pic_to_snapshot(&state, &initial_placement(spec))?;
    Ok((state, snapshot))
}

/// Advance every particle: column += (2k+1), row += 1, both mod c.
pub fn pic_step(state: &PicState) -> PicState {
    let c = state.spec.grid_cells as u32;
    let dx = state.spec.horizontal_speed() as u32;
    PicState {
        spec: state.spec.clone(),
        cols: state.cols.iter().map(|&x| (x + dx) % c).collect(),
        rows: state.rows.iter().map(|&y| (y + 1) % c).collect(),
    }
}

/// Project particle state onto a chare-level workload snapshot.
///
/// `placement[chare]` gives each chare's current home node; loads and edge
/// bytes are rebuilt from the particle positions while placement carries
/// over between load balancing rounds.
pub fn pic_to_snapshot(state: &PicState, placement: &[usize]) -> Result<WorkloadSnapshot> {
    let spec = &state.spec;
    spec.validate()?;
    let c = spec.grid_cells;
    let [cx, cy] = spec.chare_dims;
    let chares = cx * cy;
    if placement.len() != chares {
        return Err(Error::Config(format!(
            "placement covers {} chares, expected {chares}",
            placement.len()
        )));
    }

    let x_lookup = cell_to_tile(c, cx);
    let y_lookup = cell_to_tile(c, cy);
    let x_bounds = tile_bounds(c, cx);
    let y_bounds = tile_bounds(c, cy);

    let mut particle_counts = vec![0usize; chares];
    let mut right_crossers = vec![0usize; chares];
    let mut down_crossers = vec![0usize; chares];
    let dx = spec.horizontal_speed();
    for (&col, &row) in state.cols.iter().zip(&state.rows) {
        let (col, row) = (col as usize, row as usize);
        let tx = x_lookup[col];
        let ty = y_lookup[row];
        let id = chare_id(tx, ty, cy);
        particle_counts[id] += 1;
        if x_lookup[(col + dx) % c] != tx {
            right_crossers[id] += 1;
        }
        if y_lookup[(row + 1) % c] != ty {
            down_crossers[id] += 1;
        }
    }

    let mut objects = Vec::with_capacity(chares);
    for x in 0..cx {
        for y in 0..cy {
            let id = chare_id(x, y, cy);
            let cells = (x_bounds[x + 1] - x_bounds[x]) * (y_bounds[y + 1] - y_bounds[y]);
            objects.push(ObjectInfo {
                id,
                home_node: placement[id],
                home_thread: 0,
                load: spec.load_per_particle * particle_counts[id] as f64
                    + spec.load_per_cell * cells as f64,
                coords: vec![
                    (x_bounds[x] + x_bounds[x + 1]) as f64 / 2.0,
                    (y_bounds[y] + y_bounds[y + 1]) as f64 / 2.0,
                ],
            });
        }
    }
    objects.sort_by_key(|o| o.id);

    // Periodic chare torus: one edge to the right and one downward per chare.
    let mut edges = Vec::new();
    for x in 0..cx {
        for y in 0..cy {
            let id = chare_id(x, y, cy);
            if cx > 1 {
                let right = chare_id((x + 1) % cx, y, cy);
                if right != id {
                    edges.push(CommEdge {
                        a: id.min(right),
                        b: id.max(right),
                        bytes: spec.bytes_per_particle_crossing * right_crossers[id] as f64
                            + spec.bytes_halo_const,
                    });
                }
            }
            if cy > 1 {
                let down = chare_id(x, (y + 1) % cy, cy);
                if down != id {
                    edges.push(CommEdge {
                        a: id.min(down),
                        b: id.max(down),
                        bytes: spec.bytes_per_particle_crossing * down_crossers[id] as f64
                            + spec.bytes_halo_const,
                    });
                }
            }
        }
    }
    edges.sort_by_key(|e| (e.a, e.b));

    let snapshot = WorkloadSnapshot {
        node_count: spec.nodes,
        threads_per_node: 1,
        coord_dims: 2,
        objects,
        edges,
        periodic_dims: Some(vec![true, true]),
    };
    snapshot.validate()?;
    Ok(snapshot)
}

/// Particles currently resident on each node under the given placement.
pub fn node_particle_counts(state: &PicState, placement: &[usize]) -> Vec<usize> {
    let spec = &state.spec;
    let [cx, cy] = spec.chare_dims;
    let x_lookup = cell_to_tile(spec.grid_cells, cx);
    let y_lookup = cell_to_tile(spec.grid_cells, cy);
    let mut counts = vec![0usize; spec.nodes];
    for (&col, &row) in state.cols.iter().zip(&state.rows) {
        let id = chare_id(x_lookup[col as usize], y_lookup[row as usize], cy);
        counts[placement[id]] += 1;
    }
    counts
}
