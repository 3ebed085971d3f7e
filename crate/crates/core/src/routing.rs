//! Edge-based shortest paths (Dijkstra and A*) and batch trip routing.
//!
//! Search states are edges: a path's cost includes both its first and its
//! last edge, and two edges chain when the first ends where the second
//! starts.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use rayon::prelude::*;

use crate::demand::Trip;
use crate::error::{Error, Result};
use crate::netgraph::RoadNetwork;
use crate::xml::{self, escape, fmt2, XSI_NS};

/// Nonnegative cost per edge, indexed like [`RoadNetwork::edges`].
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeCosts {
    values: Vec<f64>,
}

impl EdgeCosts {
    /// Free-flow travel time, `length / speed_limit`.
    pub fn free_flow(net: &RoadNetwork) -> Self {
        Self {
            values: (0..net.edges().len()).map(|i| net.free_flow_time(i)).collect(),
        }
    }

    pub fn from_values(net: &RoadNetwork, values: Vec<f64>) -> Result<Self> {
        if values.len() != net.edges().len() {
            return Err(Error::InvalidInput(format!(
                "{} costs for {} edges",
                values.len(),
                net.edges().len()
            )));
        }
        if let Some(i) = values.iter().position(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "edge `{}` has invalid cost {}",
                net.edge(i).id,
                values[i]
            )));
        }
        Ok(Self { values })
    }

    /// Costs from an id-keyed map; edges missing from the map keep their
    /// free-flow time.
    pub fn from_map(net: &RoadNetwork, map: &HashMap<String, f64>) -> Result<Self> {
        let mut values = Self::free_flow(net).values;
        for (id, &cost) in map {
            values[net.require_edge(id)?] = cost;
        }
        Self::from_values(net, values)
    }

    pub fn get(&self, edge: usize) -> f64 {
        self.values[edge]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Algorithm {
    #[default]
    Dijkstra,
    AStar,
}

impl Algorithm {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dijkstra" => Some(Self::Dijkstra),
            "astar" | "a*" | "a_star" => Some(Self::AStar),
            _ => None,
        }
    }
}

/// A shortest path as edge indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub edges: Vec<usize>,
    pub cost: f64,
}

impl Path {
    pub fn edge_ids(&self, net: &RoadNetwork) -> Vec<String> {
        self.edges.iter().map(|&e| net.edge(e).id.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub trip_id: String,
    pub depart: f64,
    pub edges: Vec<String>,
}

#[derive(Debug, PartialEq)]
struct Entry {
    priority: f64,
    rank: usize,
    edge: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on priority, then on lexicographic edge rank
        other
            .priority
            .total_cmp(&self.priority)
            .then_with(|| other.rank.cmp(&self.rank))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Best-first search from `from` to `to` with a lower-bound heuristic on
/// the cost remaining after an edge. Stale heap entries are skipped and
/// improved edges are re-queued, so an admissible but inconsistent
/// heuristic still yields an optimal path.
fn search(
    net: &RoadNetwork,
    from: usize,
    to: usize,
    costs: &EdgeCosts,
    heuristic: impl Fn(usize) -> f64,
) -> Option<Path> {
    let m = net.edges().len();
    let mut best = vec![f64::INFINITY; m];
    let mut pred = vec![usize::MAX; m];
    let mut expanded = vec![false; m];
    let mut heap = BinaryHeap::new();
    best[from] = costs.get(from);
    heap.push(Entry {
        priority: best[from] + heuristic(from),
        rank: net.edge_rank(from),
        edge: from,
    });
    while let Some(Entry { priority, edge, .. }) = heap.pop() {
        if priority > best[edge] + heuristic(edge) {
            continue;
        }
        if edge == to {
            let mut edges = vec![to];
            let mut cur = to;
            while pred[cur] != usize::MAX {
                cur = pred[cur];
                edges.push(cur);
            }
            edges.reverse();
            return Some(Path { edges, cost: best[to] });
        }
        expanded[edge] = true;
        for &next in net.successors(edge) {
            let g = best[edge] + costs.get(next);
            if g < best[next] {
                best[next] = g;
                pred[next] = edge;
                heap.push(Entry {
                    priority: g + heuristic(next),
                    rank: net.edge_rank(next),
                    edge: next,
                });
            } else if g == best[next]
                && !expanded[next]
                && next != from
                && net.edge_rank(edge) < net.edge_rank(pred[next])
            {
                pred[next] = edge;
            }
        }
    }
    None
}

fn endpoints_of(net: &RoadNetwork, from: &str, to: &str) -> Result<(usize, usize)> {
    Ok((net.require_edge(from)?, net.require_edge(to)?))
}

fn unreachable(from: &str, to: &str) -> Error {
    Error::Unreachable {
        from: from.to_string(),
        to: to.to_string(),
    }
}

pub fn dijkstra(net: &RoadNetwork, from: &str, to: &str, costs: &EdgeCosts) -> Result<Path> {
    let (f, t) = endpoints_of(net, from, to)?;
    search(net, f, t, costs, |_| 0.0).ok_or_else(|| unreachable(from, to))
}

/// Straight-line distance to the destination edge over the fastest speed
/// limit. Admissible when costs are travel times on edges at least as long
/// as the straight line between their junctions.
pub fn travel_time_heuristic(net: &RoadNetwork, to: usize) -> impl Fn(usize) -> f64 + '_ {
    let vmax = net.max_speed();
    let target = net.endpoints(to).map(|(tail, _)| &net.junctions()[tail]);
    move |edge| {
        if edge == to || vmax <= 0.0 {
            return 0.0;
        }
        match (net.endpoints(edge), target) {
            (Some((_, head)), Some(t)) => {
                let h = &net.junctions()[head];
                (h.x - t.x).hypot(h.y - t.y) / vmax
            }
            _ => 0.0,
        }
    }
}

pub fn a_star(net: &RoadNetwork, from: &str, to: &str, costs: &EdgeCosts) -> Result<Path> {
    let (f, t) = endpoints_of(net, from, to)?;
    search(net, f, t, costs, travel_time_heuristic(net, t)).ok_or_else(|| unreachable(from, to))
}

/// A* with a caller-supplied heuristic over edge indices.
pub fn a_star_with(
    net: &RoadNetwork,
    from: &str,
    to: &str,
    costs: &EdgeCosts,
    heuristic: impl Fn(usize) -> f64,
) -> Result<Path> {
    let (f, t) = endpoints_of(net, from, to)?;
    search(net, f, t, costs, heuristic).ok_or_else(|| unreachable(from, to))
}

pub(crate) fn shortest_path(
    net: &RoadNetwork,
    from: usize,
    to: usize,
    costs: &EdgeCosts,
    algorithm: Algorithm,
) -> Option<Path> {
    match algorithm {
        Algorithm::Dijkstra => search(net, from, to, costs, |_| 0.0),
        Algorithm::AStar => search(net, from, to, costs, travel_time_heuristic(net, to)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteFailure {
    pub trip_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RoutingOutcome {
    pub routes: Vec<Route>,
    pub failures: Vec<RouteFailure>,
}

pub(crate) fn route_trip(net: &RoadNetwork, trip: &Trip, costs: &EdgeCosts, algorithm: Algorithm) -> Result<Route> {
    let (f, t) = endpoints_of(net, &trip.from_edge, &trip.to_edge)?;
    let path = shortest_path(net, f, t, costs, algorithm).ok_or_else(|| unreachable(&trip.from_edge, &trip.to_edge))?;
    Ok(Route {
        trip_id: trip.id.clone(),
        depart: trip.depart,
        edges: path.edge_ids(net),
    })
}

/// Routes every trip, in parallel, preserving input order. In strict mode
/// the first failing trip (in input order) aborts the batch.
pub fn route_trips(
    net: &RoadNetwork,
    trips: &[Trip],
    costs: &EdgeCosts,
    algorithm: Algorithm,
    ignore_errors: bool,
) -> Result<RoutingOutcome> {
    let results: Vec<Result<Route>> = trips
        .par_iter()
        .map(|trip| route_trip(net, trip, costs, algorithm))
        .collect();
    let mut outcome = RoutingOutcome::default();
    for (trip, result) in trips.iter().zip(results) {
        match result {
            Ok(route) => outcome.routes.push(route),
            Err(err) if ignore_errors => outcome.failures.push(RouteFailure {
                trip_id: trip.id.clone(),
                reason: err.to_string(),
            }),
            Err(err) => return Err(err),
        }
    }
    Ok(outcome)
}

/// Resolves a route's edges and checks that consecutive edges connect.
pub fn resolve_route(net: &RoadNetwork, edges: &[String]) -> Result<Vec<usize>> {
    if edges.is_empty() {
        return Err(Error::Validation("empty route".into()));
    }
    let idx = edges.iter().map(|e| net.require_edge(e)).collect::<Result<Vec<_>>>()?;
    for pair in idx.windows(2) {
        if !net.successors(pair[0]).contains(&pair[1]) {
            return Err(Error::Validation(format!(
                "edge `{}` is not followed by `{}`",
                net.edge(pair[0]).id,
                net.edge(pair[1]).id
            )));
        }
    }
    Ok(idx)
}

pub fn route_cost_by_index(edges: &[usize], costs: &EdgeCosts) -> f64 {
    edges.iter().map(|&e| costs.get(e)).sum()
}

/// Contents of a routes file: routed vehicles and unrouted trips.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RouteFile {
    pub routes: Vec<Route>,
    pub trips: Vec<Trip>,
}

impl RouteFile {
    pub fn append(&mut self, other: RouteFile) {
        self.routes.extend(other.routes);
        self.trips.extend(other.trips);
    }
}

fn depart_of(el: &xml::Element, key: &str) -> Result<f64> {
    let depart: f64 = el.parse_required(key)?;
    if !(depart.is_finite() && depart >= 0.0) {
        return Err(el.error(format!("invalid {key} {depart}")));
    }
    Ok(depart)
}

fn split_edges(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

/// Reads `<vehicle>` (with an inline or referenced `<route>`), `<trip>` and
/// `<flow>` elements. Flows expand into one vehicle or trip per period,
/// with ids `<flow>.<k>`.
pub fn parse_route_file(text: &str) -> Result<RouteFile> {
    let root = xml::parse_document(text)?;
    if root.name != "routes" {
        return Err(root.error(format!("expected <routes> root, found <{}>", root.name)));
    }
    let named: HashMap<&str, &str> = root
        .children_named("route")
        .filter_map(|r| Some((r.attr("id")?, r.attr("edges")?)))
        .collect();
    let route_edges = |el: &xml::Element| -> Result<Option<Vec<String>>> {
        if let Some(inline) = el.children_named("route").next() {
            return Ok(Some(split_edges(inline.required("edges")?)));
        }
        match el.attr("route") {
            Some(id) => named
                .get(id)
                .map(|e| Some(split_edges(e)))
                .ok_or_else(|| el.error(format!("unknown route `{id}`"))),
            None => Ok(None),
        }
    };
    let mut out = RouteFile::default();
    for el in &root.children {
        match el.name.as_str() {
            "vehicle" => {
                let edges = route_edges(el)?.ok_or_else(|| el.error("<vehicle> has no route"))?;
                if edges.is_empty() {
                    return Err(el.error("<vehicle> has an empty route"));
                }
                out.routes.push(Route {
                    trip_id: el.required("id")?.to_string(),
                    depart: depart_of(el, "depart")?,
                    edges,
                });
            }
            "trip" => out.trips.push(Trip {
                id: el.required("id")?.to_string(),
                depart: depart_of(el, "depart")?,
                from_edge: el.required("from")?.to_string(),
                to_edge: el.required("to")?.to_string(),
            }),
            "flow" => {
                let id = el.required("id")?;
                let begin = el.parse_optional::<f64>("begin")?.unwrap_or(0.0);
                let end = el.parse_optional::<f64>("end")?.unwrap_or(3600.0);
                if !(end > begin) {
                    return Err(el.error("<flow> needs begin < end"));
                }
                let period = if let Some(p) = el.parse_optional::<f64>("period")? {
                    p
                } else if let Some(vph) = el.parse_optional::<f64>("vehsPerHour")? {
                    3600.0 / vph
                } else if let Some(n) = el.parse_optional::<f64>("number")? {
                    (end - begin) / n
                } else {
                    return Err(el.error("<flow> needs period, vehsPerHour or number"));
                };
                if !(period > 0.0 && period.is_finite()) {
                    return Err(el.error("<flow> period must be positive"));
                }
                let edges = route_edges(el)?;
                let mut k = 0usize;
                loop {
                    let depart = begin + k as f64 * period;
                    if depart >= end {
                        break;
                    }
                    let vid = format!("{id}.{k}");
                    match &edges {
                        Some(edges) => out.routes.push(Route {
                            trip_id: vid,
                            depart,
                            edges: edges.clone(),
                        }),
                        None => out.trips.push(Trip {
                            id: vid,
                            depart,
                            from_edge: el.required("from")?.to_string(),
                            to_edge: el.required("to")?.to_string(),
                        }),
                    }
                    k += 1;
                }
            }
            _ => {}
        }
    }
    Ok(out)
}

pub fn read_route_files(paths: &[std::path::PathBuf]) -> Result<RouteFile> {
    let mut all = RouteFile::default();
    for path in paths {
        all.append(parse_route_file(&xml::read_file(path)?)?);
    }
    Ok(all)
}

pub(crate) fn routes_header() -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<routes xmlns:xsi=\"{XSI_NS}\" xsi:noNamespaceSchemaLocation=\"http://sumo.dlr.de/xsd/routes_file.xsd\">\n"
    )
}

pub fn write_routes(routes: &[Route]) -> String {
    let mut out = routes_header();
    for r in routes {
        out.push_str(&format!(
            "    <vehicle id=\"{}\" depart=\"{}\">\n        <route edges=\"{}\"/>\n    </vehicle>\n",
            escape(&r.trip_id),
            fmt2(r.depart),
            escape(&r.edges.join(" "))
        ));
    }
    out.push_str("</routes>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::{generate_grid, Edge, GeneratorOptions, Junction, JunctionControl};

    fn line_net() -> RoadNetwork {
        let j = |id: &str, x: f64| Junction {
            id: id.into(),
            x,
            y: 0.0,
            control: JunctionControl::Priority,
        };
        let e = |id: &str, from: &str, to: &str| Edge {
            id: id.into(),
            from: from.into(),
            to: to.into(),
            length: 100.0,
            lane_count: 1,
            speed_limit: 10.0,
        };
        RoadNetwork::new(
            vec![j("a", 0.0), j("b", 100.0), j("c", 200.0), j("d", 300.0)],
            vec![
                e("ab", "a", "b"),
                e("bc", "b", "c"),
                e("cd", "c", "d"),
                e("island", "d", "c"),
            ],
        )
        .unwrap()
    }

    #[test]
    fn same_edge_is_single_edge_route() {
        let net = line_net();
        let p = dijkstra(&net, "bc", "bc", &EdgeCosts::free_flow(&net)).unwrap();
        assert_eq!(p.edges.len(), 1);
        assert_eq!(p.cost, 10.0);
        let p = a_star(&net, "bc", "bc", &EdgeCosts::free_flow(&net)).unwrap();
        assert_eq!(p.edges.len(), 1);
    }

    #[test]
    fn includes_both_end_edges() {
        let net = line_net();
        let p = dijkstra(&net, "ab", "cd", &EdgeCosts::free_flow(&net)).unwrap();
        assert_eq!(p.edge_ids(&net), vec!["ab", "bc", "cd"]);
        assert_eq!(p.cost, 30.0);
    }

    #[test]
    fn unreachable_is_explicit() {
        let net = line_net();
        let err = dijkstra(&net, "cd", "ab", &EdgeCosts::free_flow(&net)).unwrap_err();
        assert!(matches!(err, Error::Unreachable { .. }));
        assert!(matches!(
            dijkstra(&net, "nope", "ab", &EdgeCosts::free_flow(&net)),
            Err(Error::UnknownEdge(_))
        ));
    }

    #[test]
    fn off_path_cost_increase_keeps_route() {
        let net = generate_grid(5, 100.0, &GeneratorOptions::default()).unwrap();
        let costs = EdgeCosts::free_flow(&net);
        let from = &net.edge(0).id;
        let to = &net.edge(net.edges().len() - 1).id;
        let base = dijkstra(&net, from, to, &costs).unwrap();
        for off in (0..net.edges().len()).filter(|e| !base.edges.contains(e)).take(10) {
            let mut v = costs.values().to_vec();
            v[off] += 50.0;
            let bumped = EdgeCosts::from_values(&net, v).unwrap();
            assert_eq!(dijkstra(&net, from, to, &bumped).unwrap(), base);
        }
    }

    #[test]
    fn zero_heuristic_matches_dijkstra() {
        let net = generate_grid(4, 100.0, &GeneratorOptions::default()).unwrap();
        let costs = EdgeCosts::free_flow(&net);
        for a in net.edges().iter().step_by(5) {
            for b in net.edges().iter().step_by(7) {
                let d = dijkstra(&net, &a.id, &b.id, &costs).unwrap();
                let z = a_star_with(&net, &a.id, &b.id, &costs, |_| 0.0).unwrap();
                assert_eq!(d, z);
            }
        }
    }

    #[test]
    fn strict_and_lenient_batches() {
        let net = line_net();
        let costs = EdgeCosts::free_flow(&net);
        let trip = |id: &str, from: &str, to: &str| Trip {
            id: id.into(),
            depart: 0.0,
            from_edge: from.into(),
            to_edge: to.into(),
        };
        let trips = vec![trip("0", "ab", "cd"), trip("1", "cd", "ab"), trip("2", "ab", "bc")];
        assert!(route_trips(&net, &trips, &costs, Algorithm::Dijkstra, false).is_err());
        let out = route_trips(&net, &trips, &costs, Algorithm::Dijkstra, true).unwrap();
        assert_eq!(out.routes.len(), 2);
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.failures[0].trip_id, "1");
        assert_eq!(out.routes[1].trip_id, "2");
    }

    #[test]
    fn resolve_route_checks_adjacency() {
        let net = line_net();
        assert!(resolve_route(&net, &["ab".into(), "bc".into()]).is_ok());
        assert!(resolve_route(&net, &["ab".into(), "cd".into()]).is_err());
        assert!(resolve_route(&net, &[]).is_err());
    }

    #[test]
    fn route_file_round_trip_and_flows() {
        let routes = vec![
            Route {
                trip_id: "0".into(),
                depart: 1.0,
                edges: vec!["a".into(), "b".into()],
            },
            Route {
                trip_id: "car1".into(),
                depart: 2.5,
                edges: vec!["c".into()],
            },
        ];
        let text = write_routes(&routes);
        let parsed = parse_route_file(&text).unwrap();
        assert_eq!(parsed.routes, routes);
        assert_eq!(write_routes(&parsed.routes), text);

        let flows = r#"<routes>
            <route id="r0" edges="a b"/>
            <flow id="bus" begin="0" end="1800" period="600" route="r0"/>
            <flow id="f" begin="0" end="100" number="2" from="a" to="b"/>
            <trip id="t" depart="3.00" from="a" to="b"/>
        </routes>"#;
        let parsed = parse_route_file(flows).unwrap();
        assert_eq!(parsed.routes.len(), 3);
        assert_eq!(parsed.routes[2].trip_id, "bus.2");
        assert_eq!(parsed.routes[2].depart, 1200.0);
        assert_eq!(parsed.trips.len(), 3);
        assert_eq!(parsed.trips[1].depart, 50.0);
    }
}
