//! One-way route planning for robot fleets in narrow-aisle warehouse grids.
//!
//! Aisles are one cell wide, so two robots can never pass each other inside
//! one; instead of timing robots around each other, every aisle is given a
//! single direction of travel and robots route along the resulting directed
//! map. Plans stay collision-free under arbitrary release times and
//! per-step delays, enforced at runtime only by waiting at occupied
//! crossings.
//!
//! Pipeline: [`topo`] compresses the grid to crossing and aisle vertices,
//! [`heuristic`] orients every aisle around shelf-loop traffic and yields a
//! feasible plan fast, [`bnb`] branches over aisle directions to a proved
//! optimum, and [`ip`] exports the equivalent integer program for external
//! solvers. [`project`] expands topological routes back to grid cells,
//! [`validate`] certifies plans by audit and randomized simulation, and
//! [`bench`] measures solution quality against collision-ignoring lower
//! bounds.

pub mod bench;
pub mod bnb;
pub mod grid;
pub mod heuristic;
pub mod ip;
pub mod project;
pub mod render;
pub mod search;
pub mod topo;
pub mod validate;

pub use grid::{GridMap, GridVertex, Instance, Robot};
pub use topo::{MappedInstance, TopoMap};
