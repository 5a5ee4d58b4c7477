//! Advisor-guided grid path planning.
//!
//! This crate holds the algorithmic half of the workbench and only needs
//! `alloc`: occupancy grids, A*/greedy search with an advisor-filtered
//! frontier, the learned environment value that bends the heuristic, the
//! staged planning session state machine, the evaluation metrics and a
//! from-scratch PPO baseline. Anything that touches files, sockets or the
//! process environment lives in the `gridplan` crate.

#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod advisor;
pub mod grid;
pub mod maps;
pub mod metrics;
pub mod orchestrator;
pub mod rl;
pub mod search;
pub mod value;

pub use grid::{CellCoord, Direction, GridError, GridMap, Move, Tile};
pub use search::{plan, CostModel, SearchError, SearchMode, SearchOutcome};
pub use value::{ObservationMask, RewardSeed, ValueParams, ValueTable};
