//! Iterative dynamic user assignment with Logit or Gawron route choice.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::demand::Trip;
use crate::error::{Error, Result};
use crate::mesosim::{simulate, SimConfig};
use crate::netgraph::RoadNetwork;
use crate::routing::{self, Algorithm, EdgeCosts, Route, RouteFailure};

/// Sum of edge costs along a route; every edge must be priced.
pub fn route_cost(route: &Route, w: &HashMap<String, f64>) -> Result<f64> {
    route
        .edges
        .iter()
        .map(|e| w.get(e).copied().ok_or_else(|| Error::MissingCost(e.clone())))
        .sum()
}

/// As [`route_cost`], with costs indexed by the network's edges.
pub fn route_cost_on(net: &RoadNetwork, route: &Route, costs: &EdgeCosts) -> Result<f64> {
    route
        .edges
        .iter()
        .map(|e| {
            net.edge_index(e)
                .map(|i| costs.get(i))
                .ok_or_else(|| Error::MissingCost(e.clone()))
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogitParams {
    pub theta: f64,
}

impl Default for LogitParams {
    fn default() -> Self {
        Self { theta: -0.15 }
    }
}

impl LogitParams {
    pub fn validate(&self) -> Result<()> {
        if !self.theta.is_finite() || self.theta == 0.0 {
            return Err(Error::invalid(format!(
                "theta must be finite and nonzero, got {}",
                self.theta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GawronParams {
    /// Strength of the probability exchange.
    pub alpha: f64,
    /// Weight of the newest measurement in the smoothed cost.
    pub beta: f64,
}

impl Default for GawronParams {
    fn default() -> Self {
        Self { alpha: 0.5, beta: 0.9 }
    }
}

impl GawronParams {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v <= 1.0;
        if !ok(self.alpha) || !ok(self.beta) {
            return Err(Error::invalid(format!(
                "alpha and beta must be in (0, 1], got {} and {}",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Logit(LogitParams),
    Gawron(GawronParams),
}

impl Default for Method {
    fn default() -> Self {
        Method::Gawron(GawronParams::default())
    }
}

/// `p_r = exp(θ c_r) / Σ_s exp(θ c_s)`, shifted by the largest exponent.
pub fn logit_probabilities(costs: &[f64], params: &LogitParams) -> Result<Vec<f64>> {
    params.validate()?;
    if costs.is_empty() {
        return Err(Error::InvalidInput("no alternatives".into()));
    }
    if let Some(c) = costs.iter().find(|c| !c.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite cost {c}")));
    }
    let exps: Vec<f64> = costs.iter().map(|c| params.theta * c).collect();
    let shift = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = exps.iter().map(|x| (x - shift).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// New probability of `r` after exchanging mass with `s`, given the
/// relative cost difference `delta = (c_s - c_r) / (c_s + c_r)`.
fn gawron_exchange(p_r: f64, p_s: f64, delta: f64, alpha: f64) -> f64 {
    if delta >= 1.0 {
        return p_r + p_s;
    }
    if delta <= -1.0 {
        return 0.0;
    }
    let g = (alpha * delta / (1.0 - delta * delta)).exp();
    let denom = p_r * g + p_s;
    if denom == 0.0 {
        return 0.0;
    }
    p_r * (p_r + p_s) * g / denom
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteChoiceSet {
    pub driver_id: String,
    pub alternatives: Vec<Route>,
    pub probabilities: Vec<f64>,
    pub costs: Vec<f64>,
}

impl RouteChoiceSet {
    pub fn single(route: Route, cost: f64) -> Self {
        Self {
            driver_id: route.trip_id.clone(),
            alternatives: vec![route],
            probabilities: vec![1.0],
            costs: vec![cost],
        }
    }
}

fn normalize(p: &mut [f64]) {
    for v in p.iter_mut() {
        *v = v.max(0.0);
    }
    let total: f64 = p.iter().sum();
    if total > 0.0 {
        for v in p.iter_mut() {
            *v /= total;
        }
    } else {
        let n = p.len() as f64;
        p.iter_mut().for_each(|v| *v = 1.0 / n);
    }
}

/// Smooths the chosen route's cost with `measured_time`, replaces the
/// other costs with `fresh_costs`, then exchanges probability between the
/// chosen route and each alternative in turn.
fn gawron_in_place(
    probabilities: &mut [f64],
    costs: &mut [f64],
    chosen: usize,
    measured_time: f64,
    fresh_costs: &[f64],
    params: &GawronParams,
) {
    for (i, c) in costs.iter_mut().enumerate() {
        *c = if i == chosen {
            params.beta * measured_time + (1.0 - params.beta) * *c
        } else {
            fresh_costs[i]
        };
    }
    for s in 0..costs.len() {
        if s == chosen {
            continue;
        }
        let (c_r, c_s) = (costs[chosen], costs[s]);
        let delta = if c_r + c_s > 0.0 {
            (c_s - c_r) / (c_s + c_r)
        } else {
            0.0
        };
        let (p_r, p_s) = (probabilities[chosen], probabilities[s]);
        let new_r = gawron_exchange(p_r, p_s, delta, params.alpha);
        probabilities[chosen] = new_r;
        probabilities[s] = p_r + p_s - new_r;
    }
    normalize(probabilities);
}

pub fn gawron_update(
    cs: &RouteChoiceSet,
    chosen: usize,
    measured_time: f64,
    fresh_costs: &[f64],
    params: &GawronParams,
) -> Result<RouteChoiceSet> {
    params.validate()?;
    let n = cs.alternatives.len();
    if chosen >= n {
        return Err(Error::InvalidIndex { index: chosen, len: n });
    }
    if cs.probabilities.len() != n || cs.costs.len() != n || fresh_costs.len() != n {
        return Err(Error::InvalidInput("choice set vectors differ in length".into()));
    }
    if !(measured_time.is_finite() && measured_time >= 0.0) {
        return Err(Error::InvalidInput(format!("invalid measured time {measured_time}")));
    }
    let mut out = cs.clone();
    gawron_in_place(
        &mut out.probabilities,
        &mut out.costs,
        chosen,
        measured_time,
        fresh_costs,
        params,
    );
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssignParams {
    pub iterations: usize,
    pub method: Method,
    pub max_alternatives: usize,
    pub seed: u64,
    pub algorithm: Algorithm,
    /// Skip unroutable trips instead of failing.
    pub ignore_errors: bool,
    /// Simulation horizon; when unset, from the earliest departure to
    /// two hours past the latest.
    pub sim: Option<SimConfig>,
}

impl Default for AssignParams {
    fn default() -> Self {
        Self {
            iterations: 1,
            method: Method::default(),
            max_alternatives: 5,
            seed: crate::DEFAULT_SEED,
            algorithm: Algorithm::Dijkstra,
            ignore_errors: false,
            sim: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub routes: Vec<Route>,
    pub mean_travel_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssignOutcome {
    /// Routes used in the last iteration.
    pub routes: Vec<Route>,
    pub iterations: Vec<IterationRecord>,
    pub choice_sets: Vec<RouteChoiceSet>,
    pub failures: Vec<RouteFailure>,
}

impl AssignOutcome {
    pub fn mean_travel_times(&self) -> Vec<f64> {
        self.iterations.iter().map(|r| r.mean_travel_time).collect()
    }
}

struct Driver {
    trip: Trip,
    from: usize,
    to: usize,
    alternatives: Vec<Vec<usize>>,
    probabilities: Vec<f64>,
    costs: Vec<f64>,
    chosen: usize,
}

impl Driver {
    fn route(&self, net: &RoadNetwork, index: usize) -> Route {
        Route {
            trip_id: self.trip.id.clone(),
            depart: self.trip.depart,
            edges: self.alternatives[index]
                .iter()
                .map(|&e| net.edge(e).id.clone())
                .collect(),
        }
    }

    fn update(&mut self, net: &RoadNetwork, costs: &EdgeCosts, params: &AssignParams) {
        let priced = |alt: &[usize]| routing::route_cost_by_index(alt, costs);
        if let Some(fresh) = routing::shortest_path(net, self.from, self.to, costs, params.algorithm) {
            if !self.alternatives.contains(&fresh.edges) {
                let n = self.alternatives.len() as f64 + 1.0;
                self.probabilities.iter_mut().for_each(|p| *p *= (n - 1.0) / n);
                self.probabilities.push(1.0 / n);
                self.costs.push(fresh.cost);
                self.alternatives.push(fresh.edges);
            }
        }
        let current: Vec<f64> = self.alternatives.iter().map(|a| priced(a)).collect();
        match &params.method {
            Method::Logit(lp) => {
                self.costs = current;
                self.probabilities =
                    logit_probabilities(&self.costs, lp).expect("validated parameters and finite costs");
            }
            Method::Gawron(gp) => {
                let measured = current[self.chosen];
                gawron_in_place(
                    &mut self.probabilities,
                    &mut self.costs,
                    self.chosen,
                    measured,
                    &current,
                    gp,
                );
            }
        }
        while self.alternatives.len() > params.max_alternatives {
            let worst = (0..self.alternatives.len())
                .filter(|&i| i != self.chosen)
                .max_by(|&a, &b| self.costs[a].total_cmp(&self.costs[b]))
                .expect("at least two alternatives");
            self.alternatives.remove(worst);
            self.probabilities.remove(worst);
            self.costs.remove(worst);
            if worst < self.chosen {
                self.chosen -= 1;
            }
            normalize(&mut self.probabilities);
        }
    }

    fn sample<R: Rng>(&mut self, rng: &mut R) {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        self.chosen = self.probabilities.len() - 1;
        for (i, p) in self.probabilities.iter().enumerate() {
            acc += p;
            if u < acc {
                self.chosen = i;
                break;
            }
        }
    }
}

fn default_sim(trips: &[Trip]) -> SimConfig {
    let first = trips.iter().map(|t| t.depart).fold(f64::INFINITY, f64::min);
    let last = trips.iter().map(|t| t.depart).fold(0.0, f64::max);
    let begin = if first.is_finite() { first.floor() } else { 0.0 };
    SimConfig::new(begin, last.max(begin) + 7200.0)
}

/// Route, simulate, and re-route: iteration 0 uses free-flow shortest
/// paths; each later iteration prices edges by the previous run's mean
/// traversal times, adds each driver's new shortest path to its choice
/// set, updates choice probabilities, samples one route per driver and
/// simulates again.
pub fn dua_iterate(net: &RoadNetwork, trips: &[Trip], params: &AssignParams) -> Result<AssignOutcome> {
    if params.iterations == 0 {
        return Err(Error::invalid("iterations must be at least 1"));
    }
    if params.max_alternatives == 0 {
        return Err(Error::invalid("max_alternatives must be at least 1"));
    }
    match &params.method {
        Method::Logit(p) => p.validate()?,
        Method::Gawron(p) => p.validate()?,
    }
    let sim_cfg = params.sim.clone().unwrap_or_else(|| default_sim(trips));
    let free = EdgeCosts::free_flow(net);
    let first = routing::route_trips(net, trips, &free, params.algorithm, params.ignore_errors)?;
    let by_id: HashMap<&str, &Trip> = trips.iter().map(|t| (t.id.as_str(), t)).collect();
    let mut drivers: Vec<Driver> = first
        .routes
        .iter()
        .map(|r| {
            let edges = routing::resolve_route(net, &r.edges).expect("router output is connected");
            Driver {
                trip: by_id[r.trip_id.as_str()].clone(),
                from: edges[0],
                to: *edges.last().expect("nonempty"),
                costs: vec![routing::route_cost_by_index(&edges, &free)],
                alternatives: vec![edges],
                probabilities: vec![1.0],
                chosen: 0,
            }
        })
        .collect();

    let mut routes = first.routes;
    let mut sim = simulate(net, &routes, &sim_cfg, &[])?;
    let mut history = vec![IterationRecord {
        routes: routes.clone(),
        mean_travel_time: sim.mean_travel_time(),
    }];
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    for _ in 1..params.iterations {
        let costs = sim.edge_costs(net);
        drivers.par_iter_mut().for_each(|d| d.update(net, &costs, params));
        for d in drivers.iter_mut() {
            d.sample(&mut rng);
        }
        routes = drivers.iter().map(|d| d.route(net, d.chosen)).collect();
        sim = simulate(net, &routes, &sim_cfg, &[])?;
        history.push(IterationRecord {
            routes: routes.clone(),
            mean_travel_time: sim.mean_travel_time(),
        });
    }
    let choice_sets = drivers
        .iter()
        .map(|d| RouteChoiceSet {
            driver_id: d.trip.id.clone(),
            alternatives: (0..d.alternatives.len()).map(|i| d.route(net, i)).collect(),
            probabilities: d.probabilities.clone(),
            costs: d.costs.clone(),
        })
        .collect();
    Ok(AssignOutcome {
        routes,
        iterations: history,
        choice_sets,
        failures: first.failures,
    })
}

/// `iteration,mean_travel_time_s` lines, one per iteration.
pub fn write_convergence_log(outcome: &AssignOutcome) -> String {
    let mut out = String::from("iteration,mean_travel_time_s\n");
    for (i, r) in outcome.iterations.iter().enumerate() {
        out.push_str(&format!("{i},{}\n", crate::xml::fmt2(r.mean_travel_time)));
    }
    out
}
