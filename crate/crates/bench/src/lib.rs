//! Shared fixtures for the benchmarks.

use trafficforge::demand::{generate_trips, ArrivalModel, TripParams};
use trafficforge::netgraph::{generate_grid, GeneratorOptions};
use trafficforge::routing::{route_trips, Algorithm, EdgeCosts};
use trafficforge::{RoadNetwork, Route, Trip};

/// Square grid with two lanes per edge.
pub fn grid(n: usize) -> RoadNetwork {
    let opts = GeneratorOptions {
        lanes: 2,
        ..GeneratorOptions::default()
    };
    generate_grid(n, 150.0, &opts).expect("grid")
}

/// One trip every `period` seconds over the first hour.
pub fn trips(net: &RoadNetwork, period: f64) -> Vec<Trip> {
    generate_trips(net, &TripParams::new(0.0, 3600.0, ArrivalModel::period(period))).expect("trips")
}

pub fn free_flow_routes(net: &RoadNetwork, trips: &[Trip]) -> Vec<Route> {
    route_trips(net, trips, &EdgeCosts::free_flow(net), Algorithm::Dijkstra, false)
        .expect("routes")
        .routes
}
