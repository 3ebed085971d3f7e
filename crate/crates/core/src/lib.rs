//! Synthetic traffic scenario toolkit: network generation, zoning, demand,
//! routing, iterative assignment and a mesoscopic queue simulator, all
//! reading and writing SUMO-compatible files.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assignment;
pub mod demand;
pub mod detectors;
mod error;
pub mod mesosim;
pub mod netgraph;
pub mod odmatrix;
pub mod pipeline;
pub mod routing;
pub mod taz;
pub mod xml;

pub use assignment::{AssignParams, GawronParams, LogitParams, Method, RouteChoiceSet};
pub use demand::{Arrival, ArrivalModel, EdgeWeightTable, Trip, TripParams};
pub use detectors::DetectorSpec;
pub use error::{Error, Result};
pub use mesosim::{SimConfig, SimOutput};
pub use netgraph::{Edge, Junction, JunctionControl, RoadNetwork};
pub use odmatrix::{ODMatrix, TimeWindow};
pub use pipeline::{Pipeline, ScenarioConfig, Step};
pub use routing::{Algorithm, EdgeCosts, Path, Route};
pub use taz::{Polygon, TazSet, TazZone};

/// Seed used by every stochastic operation unless one is given.
pub const DEFAULT_SEED: u64 = 42;
