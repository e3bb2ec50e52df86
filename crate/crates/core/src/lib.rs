//! Simulator and modular agent for multi-object and single-object
//! navigation on 2D grid worlds.
//!
//! The agent is assembled from five parts that can be swapped
//! independently: a detector ([`perception`]), a top-down semantic and
//! occupancy map ([`mapping`]), an exploration strategy ([`exploration`]),
//! target selection ([`planning`]) and a path planner with a low-level
//! controller ([`navigation`]). [`evaluation`] runs episodes end to end and
//! scores them.

pub mod agent;
pub mod evaluation;
pub mod exploration;
pub mod export;
pub mod geometry;
pub mod mapping;
pub mod navigation;
pub mod perception;
pub mod planning;
pub mod world;
