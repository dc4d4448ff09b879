//! Synthetic workload generators.
//!
//! All generators are pure functions of their spec (and embedded seed):
//! identical inputs produce identical snapshots, byte for byte.

mod pic;
mod stencil;

pub use pic::{
    gen_pic_initial, initial_placement, node_particle_counts, pic_step, pic_to_snapshot,
    ChareMapping, PicSpec, PicState,
};
pub use stencil::{gen_stencil, Decomposition, ImbalanceSpec, StencilSpec};
