//! Deterministic simulation engine and strategy library for dynamic load
//! balancing of persistently communicating objects.
//!
//! The crate models a system of migratable objects with loads and a sparse
//! communication graph, and provides:
//!
//! * a three-stage diffusion rebalancer that builds a bounded-degree node
//!   neighbor graph from communication volumes, computes per-edge load
//!   transfers via a first-order diffusion fixed point, and selects concrete
//!   objects to migrate while preserving communication locality;
//! * a coordinate-based variant of the same pipeline for workloads where
//!   communication patterns are unavailable but object positions correlate
//!   with them;
//! * a greedy refinement baseline and a no-op control;
//! * synthetic stencil and particle-in-cell workload generators;
//! * evaluation metrics (load ratio, communication locality, migration
//!   fraction) and a time-stepped simulation loop with periodic balancing.
//!
//! Everything is deterministic under a fixed seed.

pub mod baselines;
pub mod diffusion;
pub mod error;
pub mod format;
pub mod generators;
pub mod metrics;
pub mod migration;
pub mod model;
pub mod neighbor;
pub mod sim;
pub mod strategy;

pub use error::{Error, Result};
pub use model::{CommEdge, MigrationPlan, Move, ObjectInfo, ThreadMove, WorkloadSnapshot};
