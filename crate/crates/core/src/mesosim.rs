//! Deterministic point-queue simulator.
//!
//! A vehicle entering an edge at `t` may leave it from `t + free-flow time`
//! on, in FIFO order, while the edge's exit budget lasts. The budget refills
//! by `capacity * step` each step and holds at most `max(capacity * step, 1)`
//! exits. Every step runs in the same order: insert departures, process
//! exits edge by edge in network order, then sample detectors and
//! aggregates.

use std::collections::VecDeque;

use crate::detectors::DetectorSpec;
use crate::error::{Error, Result};
use crate::netgraph::{JunctionControl, RoadNetwork};
use crate::routing::{resolve_route, EdgeCosts, Route};
use crate::xml::{escape, fmt2, XSI_NS};

/// Nominal vehicle length used for detector occupancy.
pub const VEHICLE_LENGTH: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub begin: f64,
    pub end: f64,
    pub step: f64,
    /// Exits per second per lane.
    pub default_capacity_per_lane: f64,
    /// Capacity multiplier for edges ending at a signalised junction.
    pub traffic_light_capacity_factor: f64,
    /// Length of edge aggregation intervals; the whole horizon when unset.
    pub aggregation_period: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            begin: 0.0,
            end: 3600.0,
            step: 1.0,
            default_capacity_per_lane: 0.5,
            traffic_light_capacity_factor: 0.5,
            aggregation_period: None,
        }
    }
}

impl SimConfig {
    pub fn new(begin: f64, end: f64) -> Self {
        Self {
            begin,
            end,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.begin.is_finite() && self.end.is_finite() && self.begin < self.end) {
            return Err(Error::Window {
                begin: self.begin,
                end: self.end,
            });
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.step) {
            return Err(Error::invalid(format!("step must be positive, got {}", self.step)));
        }
        if !positive(self.default_capacity_per_lane) {
            return Err(Error::invalid("capacity per lane must be positive"));
        }
        let f = self.traffic_light_capacity_factor;
        if !(positive(f) && f <= 1.0) {
            return Err(Error::invalid(format!(
                "traffic light capacity factor must be in (0, 1], got {f}"
            )));
        }
        if let Some(p) = self.aggregation_period {
            if !positive(p) {
                return Err(Error::invalid(format!("aggregation period must be positive, got {p}")));
            }
        }
        Ok(())
    }

    /// Exit capacity of an edge in vehicles per second.
    pub fn capacity(&self, net: &RoadNetwork, edge: usize) -> f64 {
        let mut cap = net.edge(edge).lane_count as f64 * self.default_capacity_per_lane;
        if let Some((_, head)) = net.endpoints(edge) {
            if net.junctions()[head].control == JunctionControl::TrafficLight {
                cap *= self.traffic_light_capacity_factor;
            }
        }
        cap
    }

    fn step_times(&self) -> impl Iterator<Item = f64> + '_ {
        (0u64..)
            .map(|i| self.begin + i as f64 * self.step)
            .take_while(|t| *t < self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VehicleStatus {
    Pending,
    Running,
    Arrived,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    pub id: String,
    pub route: Vec<usize>,
    pub route_position: usize,
    pub edge_entry_time: f64,
    pub status: VehicleStatus,
    lane: u32,
}

/// Outcome for one vehicle, in the order routes were given.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleRecord {
    pub id: String,
    pub depart: f64,
    pub inserted: Option<f64>,
    pub arrived: Option<f64>,
    /// Completed edge traversals, `(edge index, entry, exit)`.
    pub traversals: Vec<(usize, f64, f64)>,
}

impl VehicleRecord {
    /// Arrival minus insertion, for vehicles that arrived.
    pub fn travel_time(&self) -> Option<f64> {
        Some(self.arrived? - self.inserted?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepCounts {
    pub time: f64,
    /// Cumulative insertions.
    pub departed: usize,
    /// Cumulative arrivals.
    pub arrived: usize,
    /// On an edge before their earliest exit.
    pub running: usize,
    /// On an edge past their earliest exit, waiting for capacity.
    pub queued: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeAggregate {
    pub edge: String,
    pub begin: f64,
    pub end: f64,
    /// Vehicle-seconds spent on the edge.
    pub sampled_seconds: f64,
    /// Mean traversal time of vehicles that left the edge in the interval.
    pub mean_travel_time: Option<f64>,
    pub entered: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorRecord {
    pub begin: f64,
    pub end: f64,
    pub id: String,
    pub mean_speed: f64,
    pub mean_time_loss: f64,
    pub mean_occupancy: f64,
    pub max_occupancy: f64,
    pub max_vehicle_number: usize,
    pub n_veh_seen: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorOutput {
    pub spec: DetectorSpec,
    pub records: Vec<DetectorRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub vehicles: Vec<VehicleRecord>,
    pub steps: Vec<StepCounts>,
    pub edge_aggregates: Vec<EdgeAggregate>,
    pub detectors: Vec<DetectorOutput>,
}

impl SimOutput {
    /// Ids of vehicles inserted but not arrived by the end.
    pub fn unfinished(&self) -> Vec<&str> {
        self.vehicles
            .iter()
            .filter(|v| v.inserted.is_some() && v.arrived.is_none())
            .map(|v| v.id.as_str())
            .collect()
    }

    /// Mean travel time over arrived vehicles, 0 when none arrived.
    pub fn mean_travel_time(&self) -> f64 {
        let times: Vec<f64> = self.vehicles.iter().filter_map(VehicleRecord::travel_time).collect();
        if times.is_empty() {
            0.0
        } else {
            times.iter().sum::<f64>() / times.len() as f64
        }
    }

    /// Mean traversal time per edge over the whole run; edges nobody
    /// completed keep their free-flow time.
    pub fn edge_costs(&self, net: &RoadNetwork) -> EdgeCosts {
        let mut sum = vec![0.0; net.edges().len()];
        let mut count = vec![0usize; net.edges().len()];
        for v in &self.vehicles {
            for &(e, entry, exit) in &v.traversals {
                sum[e] += exit - entry;
                count[e] += 1;
            }
        }
        let values = (0..sum.len())
            .map(|e| {
                if count[e] > 0 {
                    sum[e] / count[e] as f64
                } else {
                    net.free_flow_time(e)
                }
            })
            .collect();
        EdgeCosts::from_values(net, values).expect("traversal times are finite and nonnegative")
    }
}

struct EdgeQueue {
    vehicles: VecDeque<usize>,
    budget: f64,
    refill: f64,
    burst: f64,
    fft: f64,
    entries: u64,
}

#[derive(Default, Clone)]
struct AggSlot {
    sampled: f64,
    exits: usize,
    travel: f64,
    entered: usize,
}

struct DetectorState {
    spec: DetectorSpec,
    edge: usize,
    vmax: f64,
    records: Vec<DetectorRecord>,
    period_begin: f64,
    period_end: f64,
    speed_sum: f64,
    samples: usize,
    loss_sum: f64,
    occupancy_sum: f64,
    max_occupancy: f64,
    max_vehicles: usize,
    seen: Vec<usize>,
}

impl DetectorState {
    fn flush(&mut self, end: f64) {
        let seen = {
            self.seen.sort_unstable();
            self.seen.dedup();
            self.seen.len()
        };
        let duration = self.period_end.min(end) - self.period_begin;
        self.records.push(DetectorRecord {
            begin: self.period_begin,
            end: self.period_end.min(end),
            id: self.spec.id.clone(),
            mean_speed: if self.samples > 0 {
                self.speed_sum / self.samples as f64
            } else {
                0.0
            },
            mean_time_loss: if seen > 0 { self.loss_sum / seen as f64 } else { 0.0 },
            mean_occupancy: (self.occupancy_sum / duration).min(self.max_occupancy),
            max_occupancy: self.max_occupancy,
            max_vehicle_number: self.max_vehicles,
            n_veh_seen: seen,
        });
        self.period_begin = self.period_end;
        self.period_end += self.spec.period;
        self.speed_sum = 0.0;
        self.samples = 0;
        self.loss_sum = 0.0;
        self.occupancy_sum = 0.0;
        self.max_occupancy = 0.0;
        self.max_vehicles = 0;
        self.seen.clear();
    }
}

/// Runs the simulation over `[cfg.begin, cfg.end)`. Routes and detectors
/// are checked against the network before the first step. Vehicles whose
/// departure precedes `cfg.begin` are inserted at `cfg.begin`.
pub fn simulate(net: &RoadNetwork, routes: &[Route], cfg: &SimConfig, detectors: &[DetectorSpec]) -> Result<SimOutput> {
    cfg.validate()?;
    let mut vehicles = Vec::with_capacity(routes.len());
    for r in routes {
        let route =
            resolve_route(net, &r.edges).map_err(|e| Error::Validation(format!("vehicle `{}`: {e}", r.trip_id)))?;
        if !r.depart.is_finite() {
            return Err(Error::Validation(format!(
                "vehicle `{}` has no valid depart",
                r.trip_id
            )));
        }
        vehicles.push(VehicleState {
            id: r.trip_id.clone(),
            route,
            route_position: 0,
            edge_entry_time: 0.0,
            status: VehicleStatus::Pending,
            lane: 0,
        });
    }
    for d in detectors {
        d.validate(net)?;
    }
    let mut records: Vec<VehicleRecord> = routes
        .iter()
        .map(|r| VehicleRecord {
            id: r.trip_id.clone(),
            depart: r.depart,
            inserted: None,
            arrived: None,
            traversals: Vec::new(),
        })
        .collect();
    let mut order: Vec<usize> = (0..routes.len()).collect();
    order.sort_by(|&a, &b| routes[a].depart.total_cmp(&routes[b].depart));

    let mut queues: Vec<EdgeQueue> = (0..net.edges().len())
        .map(|e| {
            let refill = cfg.capacity(net, e) * cfg.step;
            let burst = refill.max(1.0);
            EdgeQueue {
                vehicles: VecDeque::new(),
                budget: burst,
                refill,
                burst,
                fft: net.free_flow_time(e),
                entries: 0,
            }
        })
        .collect();

    let agg_len = cfg.aggregation_period.unwrap_or(cfg.end - cfg.begin);
    let n_agg = (((cfg.end - cfg.begin) / agg_len).ceil() as usize).max(1);
    let mut agg = vec![vec![AggSlot::default(); net.edges().len()]; n_agg];
    let agg_index = |t: f64| (((t - cfg.begin) / agg_len) as usize).min(n_agg - 1);

    let mut dets: Vec<DetectorState> = detectors
        .iter()
        .map(|d| {
            let edge = net.edge_index(&d.edge).expect("validated");
            DetectorState {
                spec: d.clone(),
                edge,
                vmax: net.edge(edge).speed_limit,
                records: Vec::new(),
                period_begin: cfg.begin,
                period_end: cfg.begin + d.period,
                speed_sum: 0.0,
                samples: 0,
                loss_sum: 0.0,
                occupancy_sum: 0.0,
                max_occupancy: 0.0,
                max_vehicles: 0,
                seen: Vec::new(),
            }
        })
        .collect();

    let enter = |v: usize,
                 edge: usize,
                 t: f64,
                 vehicles: &mut [VehicleState],
                 queues: &mut [EdgeQueue],
                 agg: &mut [Vec<AggSlot>]| {
        let q = &mut queues[edge];
        let lanes = net.edge(edge).lane_count as u64;
        vehicles[v].lane = (q.entries % lanes) as u32;
        vehicles[v].edge_entry_time = t;
        q.entries += 1;
        q.vehicles.push_back(v);
        agg[agg_index(t)][edge].entered += 1;
    };

    let mut next_departure = 0;
    let mut departed = 0;
    let mut arrived = 0;
    let mut steps = Vec::new();
    let mut moved = Vec::new();
    for t in cfg.step_times() {
        while next_departure < order.len() && routes[order[next_departure]].depart <= t {
            let v = order[next_departure];
            next_departure += 1;
            vehicles[v].status = VehicleStatus::Running;
            records[v].inserted = Some(t);
            departed += 1;
            let first = vehicles[v].route[0];
            enter(v, first, t, &mut vehicles, &mut queues, &mut agg);
        }

        for e in 0..queues.len() {
            let q = &mut queues[e];
            q.budget = (q.budget + q.refill).min(q.burst);
            while let Some(&v) = q.vehicles.front() {
                if vehicles[v].edge_entry_time + q.fft > t || q.budget < 1.0 {
                    break;
                }
                q.vehicles.pop_front();
                q.budget -= 1.0;
                moved.push(v);
            }
            for v in moved.drain(..) {
                let entry = vehicles[v].edge_entry_time;
                records[v].traversals.push((e, entry, t));
                let slot = &mut agg[agg_index(t)][e];
                slot.exits += 1;
                slot.travel += t - entry;
                let state = &mut vehicles[v];
                state.route_position += 1;
                if state.route_position == state.route.len() {
                    state.status = VehicleStatus::Arrived;
                    records[v].arrived = Some(t);
                    arrived += 1;
                } else {
                    let next = state.route[state.route_position];
                    enter(v, next, t, &mut vehicles, &mut queues, &mut agg);
                }
            }
        }

        let mut running = 0;
        let mut queued = 0;
        let slot = agg_index(t);
        for (e, q) in queues.iter().enumerate() {
            // entry times are non-decreasing along a queue
            let waiting = q
                .vehicles
                .partition_point(|&v| vehicles[v].edge_entry_time + q.fft <= t);
            queued += waiting;
            running += q.vehicles.len() - waiting;
            agg[slot][e].sampled += q.vehicles.len() as f64 * cfg.step;
        }
        steps.push(StepCounts {
            time: t,
            departed,
            arrived,
            running,
            queued,
        });

        for d in dets.iter_mut() {
            while t >= d.period_end {
                d.flush(cfg.end);
            }
            sample_detector(d, net, &queues[d.edge], &vehicles, t, cfg.step);
        }
    }
    for d in dets.iter_mut() {
        while d.period_begin < cfg.end {
            d.flush(cfg.end);
        }
    }

    let mut edge_aggregates = Vec::new();
    for (k, slots) in agg.iter().enumerate() {
        let begin = cfg.begin + k as f64 * agg_len;
        let end = (begin + agg_len).min(cfg.end);
        for (e, s) in slots.iter().enumerate() {
            if s.entered == 0 && s.exits == 0 && s.sampled == 0.0 {
                continue;
            }
            edge_aggregates.push(EdgeAggregate {
                edge: net.edge(e).id.clone(),
                begin,
                end,
                sampled_seconds: s.sampled,
                mean_travel_time: (s.exits > 0).then(|| s.travel / s.exits as f64),
                entered: s.entered,
            });
        }
    }
    Ok(SimOutput {
        vehicles: records,
        steps,
        edge_aggregates,
        detectors: dets
            .into_iter()
            .map(|d| DetectorOutput {
                spec: d.spec,
                records: d.records,
            })
            .collect(),
    })
}

/// Position of a vehicle's front and its speed. Moving vehicles advance at
/// the speed limit; queued ones stand nose to tail from the edge end, per
/// lane, in FIFO order.
fn sample_detector(
    d: &mut DetectorState,
    net: &RoadNetwork,
    q: &EdgeQueue,
    vehicles: &[VehicleState],
    t: f64,
    step: f64,
) {
    let edge = net.edge(d.edge);
    let (lo, hi) = (d.spec.pos, d.spec.pos + d.spec.length);
    let mut queued_in_lane = 0usize;
    let mut occupied = 0.0;
    let mut present = 0;
    for &v in &q.vehicles {
        let state = &vehicles[v];
        let moving = state.edge_entry_time + q.fft > t;
        if state.lane != d.spec.lane {
            continue;
        }
        let (front, speed) = if moving {
            (
                ((t - state.edge_entry_time) * edge.speed_limit).min(edge.length),
                edge.speed_limit,
            )
        } else {
            let front = (edge.length - VEHICLE_LENGTH * queued_in_lane as f64).max(0.0);
            queued_in_lane += 1;
            (front, 0.0)
        };
        let overlap = front.min(hi) - (front - VEHICLE_LENGTH).max(lo);
        if overlap <= 0.0 {
            continue;
        }
        occupied += overlap;
        present += 1;
        d.speed_sum += speed;
        d.samples += 1;
        d.loss_sum += step * (1.0 - speed / d.vmax);
        d.seen.push(v);
    }
    let occupancy = (occupied / d.spec.length * 100.0).min(100.0);
    d.occupancy_sum += occupancy * step;
    d.max_occupancy = d.max_occupancy.max(occupancy);
    d.max_vehicles = d.max_vehicles.max(present);
}

pub fn write_edgedata(aggregates: &[EdgeAggregate], id: &str) -> String {
    let mut out = format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<meandata xmlns:xsi=\"{XSI_NS}\" xsi:noNamespaceSchemaLocation=\"http://sumo.dlr.de/xsd/meandata_file.xsd\">\n"
    );
    let mut i = 0;
    while i < aggregates.len() {
        let (begin, end) = (aggregates[i].begin, aggregates[i].end);
        out.push_str(&format!(
            "    <interval begin=\"{}\" end=\"{}\" id=\"{}\">\n",
            fmt2(begin),
            fmt2(end),
            escape(id)
        ));
        while i < aggregates.len() && aggregates[i].begin == begin {
            let a = &aggregates[i];
            out.push_str(&format!(
                "        <edge id=\"{}\" sampledSeconds=\"{}\"",
                escape(&a.edge),
                fmt2(a.sampled_seconds)
            ));
            if let Some(tt) = a.mean_travel_time {
                out.push_str(&format!(" traveltime=\"{}\"", fmt2(tt)));
            }
            out.push_str(&format!(" entered=\"{}\"/>\n", a.entered));
            i += 1;
        }
        out.push_str("    </interval>\n");
    }
    out.push_str("</meandata>\n");
    out
}

pub fn write_detector_output(records: &[DetectorRecord]) -> String {
    let mut out = format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<detector xmlns:xsi=\"{XSI_NS}\" xsi:noNamespaceSchemaLocation=\"http://sumo.dlr.de/xsd/det_e2_file.xsd\">\n"
    );
    for r in records {
        out.push_str(&format!(
            "    <interval begin=\"{}\" end=\"{}\" id=\"{}\" meanSpeed=\"{}\" meanTimeLoss=\"{}\" meanOccupancy=\"{}\" maxOccupancy=\"{}\" maxVehicleNumber=\"{}\" nVehSeen=\"{}\"/>\n",
            fmt2(r.begin),
            fmt2(r.end),
            escape(&r.id),
            fmt2(r.mean_speed),
            fmt2(r.mean_time_loss),
            fmt2(r.mean_occupancy),
            fmt2(r.max_occupancy),
            r.max_vehicle_number,
            r.n_veh_seen
        ));
    }
    out.push_str("</detector>\n");
    out
}

/// Writes each detector's records to its `file`, resolved against `base`.
pub fn write_detector_files(output: &SimOutput, base: &std::path::Path) -> Result<()> {
    for d in &output.detectors {
        crate::xml::write_file(&base.join(&d.spec.file), &write_detector_output(&d.records))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::{Edge, Junction};

    fn chain(lengths: &[f64], lanes: u32, speed: f64) -> RoadNetwork {
        let junctions = (0..=lengths.len())
            .map(|i| Junction {
                id: format!("j{i}"),
                x: lengths[..i].iter().sum(),
                y: 0.0,
                control: JunctionControl::Priority,
            })
            .collect();
        let edges = lengths
            .iter()
            .enumerate()
            .map(|(i, &l)| Edge {
                id: format!("e{i}"),
                from: format!("j{i}"),
                to: format!("j{}", i + 1),
                length: l,
                lane_count: lanes,
                speed_limit: speed,
            })
            .collect();
        RoadNetwork::new(junctions, edges).unwrap()
    }

    fn route(id: &str, depart: f64, edges: &[&str]) -> Route {
        Route {
            trip_id: id.into(),
            depart,
            edges: edges.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn free_flow_single_vehicle() {
        let net = chain(&[400.0], 1, 10.0);
        let out = simulate(&net, &[route("v", 0.0, &["e0"])], &SimConfig::new(0.0, 100.0), &[]).unwrap();
        assert_eq!(out.vehicles[0].travel_time(), Some(40.0));
        assert_eq!(out.edge_aggregates[0].mean_travel_time, Some(40.0));
    }

    #[test]
    fn bottleneck_recursion() {
        // 2 lanes at 0.5 veh/s per lane: one exit per second
        let net = chain(&[100.0], 2, 10.0);
        let routes: Vec<Route> = (0..3).map(|i| route(&i.to_string(), 0.0, &["e0"])).collect();
        let out = simulate(&net, &routes, &SimConfig::new(0.0, 100.0), &[]).unwrap();
        let arrivals: Vec<f64> = out.vehicles.iter().map(|v| v.arrived.unwrap()).collect();
        assert_eq!(arrivals, vec![10.0, 11.0, 12.0]);
    }

    #[test]
    fn single_lane_exits_every_other_second() {
        let net = chain(&[100.0], 1, 10.0);
        let routes: Vec<Route> = (0..3).map(|i| route(&i.to_string(), 0.0, &["e0"])).collect();
        let out = simulate(&net, &routes, &SimConfig::new(0.0, 100.0), &[]).unwrap();
        let arrivals: Vec<f64> = out.vehicles.iter().map(|v| v.arrived.unwrap()).collect();
        assert_eq!(arrivals, vec![10.0, 12.0, 14.0]);
    }

    #[test]
    fn empty_run() {
        let net = chain(&[100.0], 1, 10.0);
        let out = simulate(&net, &[], &SimConfig::new(0.0, 10.0), &[]).unwrap();
        assert!(out.vehicles.is_empty());
        assert!(out.edge_aggregates.is_empty());
        assert_eq!(out.steps.len(), 10);
        assert_eq!(out.mean_travel_time(), 0.0);
    }

    #[test]
    fn late_and_unfinished() {
        let net = chain(&[100.0, 100.0], 1, 10.0);
        let routes = vec![route("a", 5.0, &["e0", "e1"]), route("b", 50.0, &["e0"])];
        let out = simulate(&net, &routes, &SimConfig::new(0.0, 20.0), &[]).unwrap();
        assert_eq!(out.unfinished(), vec!["a"]);
        assert_eq!(out.vehicles[1].inserted, None);
        let last = out.steps.last().unwrap();
        assert_eq!(last.departed, last.arrived + last.running + last.queued);
    }

    #[test]
    fn rejects_broken_route() {
        let net = chain(&[100.0, 100.0], 1, 10.0);
        let err = simulate(&net, &[route("a", 0.0, &["e1", "e0"])], &SimConfig::new(0.0, 20.0), &[]).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn detector_over_whole_edge() {
        let net = chain(&[100.0], 1, 10.0);
        let spec = DetectorSpec {
            id: "d".into(),
            edge: "e0".into(),
            lane: 0,
            pos: 0.0,
            length: 100.0,
            period: 50.0,
            file: "d.xml".into(),
        };
        let out = simulate(&net, &[route("v", 0.0, &["e0"])], &SimConfig::new(0.0, 50.0), &[spec]).unwrap();
        let r = &out.detectors[0].records;
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].max_vehicle_number, 1);
        assert_eq!(r[0].n_veh_seen, 1);
        assert_eq!(r[0].mean_time_loss, 0.0);
        assert_eq!(r[0].mean_speed, 10.0);
        assert_eq!(r[0].max_occupancy, 5.0);
        // present at t = 1..9, 5% each, over 50 s
        assert!((r[0].mean_occupancy - 0.9).abs() < 1e-12);
    }

    #[test]
    fn detector_periods_partition() {
        let net = chain(&[100.0], 1, 10.0);
        let spec = DetectorSpec {
            id: "d".into(),
            edge: "e0".into(),
            lane: 0,
            pos: 0.0,
            length: 50.0,
            period: 30.0,
            file: "d.xml".into(),
        };
        let out = simulate(&net, &[], &SimConfig::new(10.0, 100.0), &[spec]).unwrap();
        let bounds: Vec<(f64, f64)> = out.detectors[0].records.iter().map(|r| (r.begin, r.end)).collect();
        assert_eq!(bounds, vec![(10.0, 40.0), (40.0, 70.0), (70.0, 100.0)]);
        assert!(out.detectors[0]
            .records
            .iter()
            .all(|r| r.mean_speed == 0.0 && r.n_veh_seen == 0));
    }

    #[test]
    fn traffic_light_halves_capacity() {
        let mut net = chain(&[100.0], 2, 10.0);
        let mut junctions = net.junctions().to_vec();
        junctions[1].control = JunctionControl::TrafficLight;
        net = RoadNetwork::new(junctions, net.edges().to_vec()).unwrap();
        let routes: Vec<Route> = (0..3).map(|i| route(&i.to_string(), 0.0, &["e0"])).collect();
        let out = simulate(&net, &routes, &SimConfig::new(0.0, 100.0), &[]).unwrap();
        let arrivals: Vec<f64> = out.vehicles.iter().map(|v| v.arrived.unwrap()).collect();
        assert_eq!(arrivals, vec![10.0, 12.0, 14.0]);
    }

    #[test]
    fn edgedata_layout() {
        let net = chain(&[100.0], 1, 10.0);
        let mut cfg = SimConfig::new(0.0, 40.0);
        cfg.aggregation_period = Some(20.0);
        let out = simulate(&net, &[route("v", 15.0, &["e0"])], &cfg, &[]).unwrap();
        let text = write_edgedata(&out.edge_aggregates, "edgedata");
        assert!(text.contains("<interval begin=\"0.00\" end=\"20.00\" id=\"edgedata\">"));
        assert!(text.contains("<edge id=\"e0\" sampledSeconds=\"5.00\" entered=\"1\"/>"));
        assert!(text.contains("<edge id=\"e0\" sampledSeconds=\"5.00\" traveltime=\"10.00\" entered=\"0\"/>"));
        let values = crate::demand::parse_edge_values(&text, "entered").unwrap();
        assert_eq!(values["e0"], 1.0);
    }
}
