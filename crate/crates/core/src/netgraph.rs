//! Road network model, validation and the grid/spider/random generators.

use std::collections::{HashMap, HashSet, VecDeque};
use std::f64::consts::TAU;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::xml::{self, escape, fmt2, round2};

/// Default speed limit of generated edges (50 km/h).
pub const DEFAULT_SPEED: f64 = 13.89;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JunctionControl {
    #[default]
    Priority,
    TrafficLight,
}

impl JunctionControl {
    pub fn as_str(self) -> &'static str {
        match self {
            JunctionControl::Priority => "priority",
            JunctionControl::TrafficLight => "traffic_light",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "priority" => Some(Self::Priority),
            "traffic_light" => Some(Self::TrafficLight),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Junction {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub control: JunctionControl,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: String,
    pub from: String,
    pub to: String,
    /// Meters.
    pub length: f64,
    pub lane_count: u32,
    /// m/s.
    pub speed_limit: f64,
}

impl Edge {
    pub fn free_flow_time(&self) -> f64 {
        self.length / self.speed_limit
    }
}

/// One broken network invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DuplicateJunction(String),
    DuplicateEdge(String),
    NonFiniteCoordinate(String),
    UnknownJunction { edge: String, junction: String },
    SelfLoop(String),
    NonPositiveLength(String),
    NonPositiveSpeed(String),
    NoLanes(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateJunction(id) => write!(f, "duplicate junction id `{id}`"),
            Violation::DuplicateEdge(id) => write!(f, "duplicate edge id `{id}`"),
            Violation::NonFiniteCoordinate(id) => write!(f, "junction `{id}` has a non-finite coordinate"),
            Violation::UnknownJunction { edge, junction } => {
                write!(f, "edge `{edge}` references unknown junction `{junction}`")
            }
            Violation::SelfLoop(id) => write!(f, "edge `{id}` starts and ends at the same junction"),
            Violation::NonPositiveLength(id) => write!(f, "edge `{id}` has a non-positive length"),
            Violation::NonPositiveSpeed(id) => write!(f, "edge `{id}` has a non-positive speed limit"),
            Violation::NoLanes(id) => write!(f, "edge `{id}` has no lanes"),
        }
    }
}

/// Junctions plus directed edges, with a derived adjacency index.
///
/// Immutable once built. Edges are addressed internally by their position
/// in [`RoadNetwork::edges`].
#[derive(Debug, Clone)]
pub struct RoadNetwork {
    junctions: Vec<Junction>,
    edges: Vec<Edge>,
    junction_lookup: HashMap<String, usize>,
    edge_lookup: HashMap<String, usize>,
    endpoints: Vec<Option<(usize, usize)>>,
    out_edges: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
    /// Position of each edge in lexicographic id order.
    edge_rank: Vec<usize>,
}

impl PartialEq for RoadNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.junctions == other.junctions && self.edges == other.edges
    }
}

impl RoadNetwork {
    /// Builds the network and rejects it if any invariant is violated.
    pub fn new(junctions: Vec<Junction>, edges: Vec<Edge>) -> Result<Self> {
        let net = Self::from_parts(junctions, edges);
        let violations = net.validate();
        if violations.is_empty() {
            Ok(net)
        } else {
            Err(Error::InvalidNetwork(violations))
        }
    }

    /// Builds the network without validating it. Edges with unknown
    /// endpoints are kept but left out of the adjacency index.
    pub fn from_parts(junctions: Vec<Junction>, edges: Vec<Edge>) -> Self {
        let mut junction_lookup = HashMap::with_capacity(junctions.len());
        for (i, j) in junctions.iter().enumerate() {
            junction_lookup.entry(j.id.clone()).or_insert(i);
        }
        let mut edge_lookup = HashMap::with_capacity(edges.len());
        for (i, e) in edges.iter().enumerate() {
            edge_lookup.entry(e.id.clone()).or_insert(i);
        }
        let mut out_edges = vec![Vec::new(); junctions.len()];
        let mut in_edges = vec![Vec::new(); junctions.len()];
        let endpoints: Vec<_> = edges
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let from = *junction_lookup.get(&e.from)?;
                let to = *junction_lookup.get(&e.to)?;
                out_edges[from].push(i);
                in_edges[to].push(i);
                Some((from, to))
            })
            .collect();
        let mut order: Vec<usize> = (0..edges.len()).collect();
        order.sort_by(|&a, &b| edges[a].id.cmp(&edges[b].id).then(a.cmp(&b)));
        let mut edge_rank = vec![0; edges.len()];
        for (rank, idx) in order.into_iter().enumerate() {
            edge_rank[idx] = rank;
        }
        Self {
            junctions,
            edges,
            junction_lookup,
            edge_lookup,
            endpoints,
            out_edges,
            in_edges,
            edge_rank,
        }
    }

    pub fn junctions(&self) -> &[Junction] {
        &self.junctions
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, idx: usize) -> &Edge {
        &self.edges[idx]
    }

    pub fn edge_index(&self, id: &str) -> Option<usize> {
        self.edge_lookup.get(id).copied()
    }

    pub(crate) fn require_edge(&self, id: &str) -> Result<usize> {
        self.edge_index(id).ok_or_else(|| Error::UnknownEdge(id.to_string()))
    }

    pub fn junction_index(&self, id: &str) -> Option<usize> {
        self.junction_lookup.get(id).copied()
    }

    /// `(from, to)` junction indices; `None` for a dangling edge.
    pub fn endpoints(&self, edge: usize) -> Option<(usize, usize)> {
        self.endpoints[edge]
    }

    pub fn out_edges(&self, junction: usize) -> &[usize] {
        &self.out_edges[junction]
    }

    pub fn in_edges(&self, junction: usize) -> &[usize] {
        &self.in_edges[junction]
    }

    /// Edges that can follow `edge` in a route.
    pub fn successors(&self, edge: usize) -> &[usize] {
        match self.endpoints[edge] {
            Some((_, to)) => &self.out_edges[to],
            None => &[],
        }
    }

    pub(crate) fn edge_rank(&self, edge: usize) -> usize {
        self.edge_rank[edge]
    }

    pub fn free_flow_time(&self, edge: usize) -> f64 {
        self.edges[edge].free_flow_time()
    }

    /// Straight-line midpoint between the edge's end junctions.
    pub fn midpoint(&self, edge: usize) -> Option<(f64, f64)> {
        let (a, b) = self.endpoints[edge]?;
        let (ja, jb) = (&self.junctions[a], &self.junctions[b]);
        Some(((ja.x + jb.x) / 2.0, (ja.y + jb.y) / 2.0))
    }

    /// `(min_x, min_y, max_x, max_y)` over all junctions.
    pub fn bounding_box(&self) -> Option<(f64, f64, f64, f64)> {
        let first = self.junctions.first()?;
        Some(
            self.junctions
                .iter()
                .fold((first.x, first.y, first.x, first.y), |(x0, y0, x1, y1), j| {
                    (x0.min(j.x), y0.min(j.y), x1.max(j.x), y1.max(j.y))
                }),
        )
    }

    pub fn total_edge_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    pub fn max_speed(&self) -> f64 {
        self.edges.iter().map(|e| e.speed_limit).fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        for j in &self.junctions {
            if !seen.insert(j.id.as_str()) {
                out.push(Violation::DuplicateJunction(j.id.clone()));
            }
            if !j.x.is_finite() || !j.y.is_finite() {
                out.push(Violation::NonFiniteCoordinate(j.id.clone()));
            }
        }
        let mut seen = HashSet::new();
        for e in &self.edges {
            if !seen.insert(e.id.as_str()) {
                out.push(Violation::DuplicateEdge(e.id.clone()));
            }
            for junction in [&e.from, &e.to] {
                if !self.junction_lookup.contains_key(junction) {
                    out.push(Violation::UnknownJunction {
                        edge: e.id.clone(),
                        junction: junction.clone(),
                    });
                }
            }
            if e.from == e.to {
                out.push(Violation::SelfLoop(e.id.clone()));
            }
            if !(e.length > 0.0 && e.length.is_finite()) {
                out.push(Violation::NonPositiveLength(e.id.clone()));
            }
            if !(e.speed_limit > 0.0 && e.speed_limit.is_finite()) {
                out.push(Violation::NonPositiveSpeed(e.id.clone()));
            }
            if e.lane_count == 0 {
                out.push(Violation::NoLanes(e.id.clone()));
            }
        }
        out
    }

    /// True when every junction reaches, and is reached from, junction 0.
    pub fn is_strongly_connected(&self) -> bool {
        if self.junctions.is_empty() {
            return true;
        }
        let reach = |forward: bool| {
            let mut seen = vec![false; self.junctions.len()];
            let mut queue = VecDeque::from([0usize]);
            seen[0] = true;
            while let Some(j) = queue.pop_front() {
                let adj = if forward { &self.out_edges[j] } else { &self.in_edges[j] };
                for &e in adj {
                    let (from, to) = self.endpoints[e].expect("indexed edges have endpoints");
                    let next = if forward { to } else { from };
                    if !seen[next] {
                        seen[next] = true;
                        queue.push_back(next);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach(true) && reach(false)
    }

    pub fn to_xml(&self) -> String {
        let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<net>\n");
        for j in &self.junctions {
            out.push_str(&format!(
                "    <junction id=\"{}\" x=\"{}\" y=\"{}\" type=\"{}\"/>\n",
                escape(&j.id),
                fmt2(j.x),
                fmt2(j.y),
                j.control.as_str()
            ));
        }
        for e in &self.edges {
            out.push_str(&format!(
                "    <edge id=\"{}\" from=\"{}\" to=\"{}\" length=\"{}\" numLanes=\"{}\" speed=\"{}\"/>\n",
                escape(&e.id),
                escape(&e.from),
                escape(&e.to),
                fmt2(e.length),
                e.lane_count,
                fmt2(e.speed_limit)
            ));
        }
        out.push_str("</net>\n");
        out
    }

    /// Reads the `<net>` subset written by [`RoadNetwork::to_xml`]. Also
    /// accepts SUMO-style edges that carry length and speed on `<lane>`
    /// children; internal junctions and edges are skipped.
    pub fn from_xml(text: &str) -> Result<Self> {
        let root = xml::parse_document(text)?;
        if root.name != "net" {
            return Err(root.error(format!("expected <net> root, found <{}>", root.name)));
        }
        let mut junctions = Vec::new();
        let mut edges = Vec::new();
        for el in &root.children {
            match el.name.as_str() {
                "junction" => {
                    if el.attr("type") == Some("internal") {
                        continue;
                    }
                    let control = match el.attr("type") {
                        Some(t) if t.starts_with("traffic_light") => JunctionControl::TrafficLight,
                        _ => JunctionControl::Priority,
                    };
                    junctions.push(Junction {
                        id: el.required("id")?.to_string(),
                        x: el.parse_required("x")?,
                        y: el.parse_required("y")?,
                        control,
                    });
                }
                "edge" => {
                    if el.attr("function") == Some("internal") {
                        continue;
                    }
                    let lanes: Vec<_> = el.children_named("lane").collect();
                    let first_lane = lanes.first();
                    let length = match el.parse_optional("length")? {
                        Some(v) => v,
                        None => first_lane
                            .ok_or_else(|| el.error("<edge> is missing required attribute `length`"))?
                            .parse_required("length")?,
                    };
                    let speed_limit = match el.parse_optional("speed")? {
                        Some(v) => v,
                        None => first_lane
                            .ok_or_else(|| el.error("<edge> is missing required attribute `speed`"))?
                            .parse_required("speed")?,
                    };
                    let lane_count = match el.parse_optional("numLanes")? {
                        Some(v) => v,
                        None if !lanes.is_empty() => lanes.len() as u32,
                        None => 1,
                    };
                    edges.push(Edge {
                        id: el.required("id")?.to_string(),
                        from: el.required("from")?.to_string(),
                        to: el.required("to")?.to_string(),
                        length,
                        lane_count,
                        speed_limit,
                    });
                }
                _ => {}
            }
        }
        Self::new(junctions, edges)
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        Self::from_xml(&xml::read_file(path)?)
    }
}

/// Attributes shared by every generated junction and edge.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorOptions {
    pub junction_control: JunctionControl,
    pub lanes: u32,
    pub speed: f64,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        Self {
            junction_control: JunctionControl::Priority,
            lanes: 1,
            speed: DEFAULT_SPEED,
        }
    }
}

impl GeneratorOptions {
    fn check(&self) -> Result<()> {
        if self.lanes == 0 {
            return Err(Error::invalid("lane count must be at least 1"));
        }
        if !(self.speed > 0.0 && self.speed.is_finite()) {
            return Err(Error::invalid("speed must be positive"));
        }
        Ok(())
    }
}

/// Accumulates bidirectional edge pairs named `e<k>` / `-e<k>`.
struct Builder<'a> {
    opts: &'a GeneratorOptions,
    junctions: Vec<Junction>,
    edges: Vec<Edge>,
    pairs: usize,
}

impl<'a> Builder<'a> {
    fn new(opts: &'a GeneratorOptions) -> Self {
        Self {
            opts,
            junctions: Vec::new(),
            edges: Vec::new(),
            pairs: 0,
        }
    }

    fn junction(&mut self, id: String, x: f64, y: f64) -> usize {
        self.junctions.push(Junction {
            id,
            x: round2(x),
            y: round2(y),
            control: self.opts.junction_control,
        });
        self.junctions.len() - 1
    }

    fn distance(&self, a: usize, b: usize) -> f64 {
        let (ja, jb) = (&self.junctions[a], &self.junctions[b]);
        (ja.x - jb.x).hypot(ja.y - jb.y)
    }

    fn connect(&mut self, a: usize, b: usize, length: f64) {
        let id = format!("e{}", self.pairs);
        self.pairs += 1;
        let length = round2(length);
        for (from, to, id) in [(a, b, id.clone()), (b, a, format!("-{id}"))] {
            self.edges.push(Edge {
                id,
                from: self.junctions[from].id.clone(),
                to: self.junctions[to].id.clone(),
                length,
                lane_count: self.opts.lanes,
                speed_limit: self.opts.speed,
            });
        }
    }

    fn connect_straight(&mut self, a: usize, b: usize) {
        let d = self.distance(a, b);
        self.connect(a, b, d);
    }

    fn finish(self) -> Result<RoadNetwork> {
        RoadNetwork::new(self.junctions, self.edges)
    }
}

/// `n`×`n` lattice with `segment_length` spacing; every neighbor pair is
/// joined in both directions.
pub fn generate_grid(n: usize, segment_length: f64, opts: &GeneratorOptions) -> Result<RoadNetwork> {
    if n < 2 {
        return Err(Error::invalid(format!(
            "grid needs at least 2 junctions per side, got {n}"
        )));
    }
    if !(segment_length > 0.0 && segment_length.is_finite()) {
        return Err(Error::invalid("grid segment length must be positive"));
    }
    opts.check()?;
    let mut b = Builder::new(opts);
    for col in 0..n {
        for row in 0..n {
            b.junction(
                format!("g{col}_{row}"),
                col as f64 * segment_length,
                row as f64 * segment_length,
            );
        }
    }
    let at = |col: usize, row: usize| col * n + row;
    for col in 0..n {
        for row in 0..n {
            if col + 1 < n {
                b.connect(at(col, row), at(col + 1, row), segment_length);
            }
            if row + 1 < n {
                b.connect(at(col, row), at(col, row + 1), segment_length);
            }
        }
    }
    b.finish()
}

/// Concentric rings crossed by radial arms, optionally with a center
/// junction joined to the innermost ring.
pub fn generate_spider(
    arms: usize,
    circles: usize,
    radius_step: f64,
    omit_center: bool,
    opts: &GeneratorOptions,
) -> Result<RoadNetwork> {
    if arms < 3 {
        return Err(Error::invalid(format!("spider needs at least 3 arms, got {arms}")));
    }
    if circles < 1 {
        return Err(Error::invalid("spider needs at least 1 circle"));
    }
    if !(radius_step > 0.0 && radius_step.is_finite()) {
        return Err(Error::invalid("spider radius step must be positive"));
    }
    opts.check()?;
    let mut b = Builder::new(opts);
    let mut ring = vec![vec![0usize; arms]; circles];
    for (c, ring_c) in ring.iter_mut().enumerate() {
        let radius = (c + 1) as f64 * radius_step;
        for (a, slot) in ring_c.iter_mut().enumerate() {
            let angle = TAU * a as f64 / arms as f64;
            *slot = b.junction(format!("s{c}_{a}"), radius * angle.cos(), radius * angle.sin());
        }
    }
    for c in 0..circles {
        for a in 0..arms {
            b.connect_straight(ring[c][a], ring[c][(a + 1) % arms]);
            if c + 1 < circles {
                b.connect_straight(ring[c][a], ring[c + 1][a]);
            }
        }
    }
    if !omit_center {
        let center = b.junction("center".into(), 0.0, 0.0);
        for &j in &ring[0] {
            b.connect_straight(center, j);
        }
    }
    b.finish()
}

/// Parameters of the incremental random growth generator.
///
/// Each iteration attaches exactly one new junction to a uniformly chosen
/// existing one, so the result has `iterations + 1` junctions.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomGrowth {
    pub iterations: usize,
    /// Snap new junctions onto a lattice with `grid_spacing`.
    pub grid_bias: bool,
    pub min_distance: f64,
    pub max_distance: f64,
    pub grid_spacing: f64,
    /// Chance of an extra edge from the new junction to its nearest
    /// non-parent neighbor.
    pub extra_edge_probability: f64,
    pub neighbor_distance: f64,
}

impl RandomGrowth {
    pub fn new(iterations: usize, grid_bias: bool) -> Self {
        Self {
            iterations,
            grid_bias,
            min_distance: 100.0,
            max_distance: 250.0,
            grid_spacing: 100.0,
            extra_edge_probability: 0.4,
            neighbor_distance: 300.0,
        }
    }
}

const GROWTH_ATTEMPTS: usize = 64;

pub fn generate_random(params: &RandomGrowth, seed: u64, opts: &GeneratorOptions) -> Result<RoadNetwork> {
    if params.iterations < 1 {
        return Err(Error::invalid("random growth needs at least 1 iteration"));
    }
    if !(params.min_distance > 0.0 && params.max_distance >= params.min_distance) {
        return Err(Error::invalid("random growth distances must satisfy 0 < min <= max"));
    }
    if params.grid_bias && !(params.grid_spacing > 0.0) {
        return Err(Error::invalid("grid spacing must be positive"));
    }
    if !(0.0..=1.0).contains(&params.extra_edge_probability) {
        return Err(Error::invalid("extra edge probability must lie in [0, 1]"));
    }
    opts.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = Builder::new(opts);
    b.junction("j0".into(), 0.0, 0.0);
    // lattice coordinates, only used with grid_bias
    let mut cells: Vec<(i64, i64)> = vec![(0, 0)];
    let mut occupied: HashSet<(i64, i64)> = HashSet::from([(0, 0)]);
    let mut adjacent: HashSet<(usize, usize)> = HashSet::new();
    const DIRS: [(i64, i64); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

    for _ in 0..params.iterations {
        let n = b.junctions.len();
        let (parent, x, y, cell) = if params.grid_bias {
            let free = |p: usize, occupied: &HashSet<(i64, i64)>| -> Vec<(i64, i64)> {
                let (cx, cy) = cells[p];
                DIRS.iter()
                    .map(|(dx, dy)| (cx + dx, cy + dy))
                    .filter(|c| !occupied.contains(c))
                    .collect()
            };
            let mut choice = None;
            for _ in 0..GROWTH_ATTEMPTS {
                let p = rng.random_range(0..n);
                let options = free(p, &occupied);
                if !options.is_empty() {
                    choice = Some((p, options[rng.random_range(0..options.len())]));
                    break;
                }
            }
            let (p, c) = match choice {
                Some(found) => found,
                None => {
                    // the lattice frontier is never empty
                    let frontier: Vec<usize> = (0..n).filter(|&p| !free(p, &occupied).is_empty()).collect();
                    let p = frontier[rng.random_range(0..frontier.len())];
                    let options = free(p, &occupied);
                    (p, options[rng.random_range(0..options.len())])
                }
            };
            let s = params.grid_spacing;
            (p, c.0 as f64 * s, c.1 as f64 * s, Some(c))
        } else {
            let mut placed = None;
            for attempt in 0..GROWTH_ATTEMPTS {
                let p = rng.random_range(0..n);
                let angle = rng.random::<f64>() * TAU;
                let dist = rng.random_range(params.min_distance..=params.max_distance);
                let (px, py) = (b.junctions[p].x, b.junctions[p].y);
                let (x, y) = (round2(px + dist * angle.cos()), round2(py + dist * angle.sin()));
                let crowded = b
                    .junctions
                    .iter()
                    .any(|j| (j.x - x).hypot(j.y - y) < params.min_distance / 2.0);
                if !crowded || attempt + 1 == GROWTH_ATTEMPTS {
                    placed = Some((p, x, y));
                    break;
                }
            }
            let (p, x, y) = placed.expect("loop always places on its last attempt");
            (p, x, y, None)
        };
        let new = b.junction(format!("j{n}"), x, y);
        if let Some(c) = cell {
            cells.push(c);
            occupied.insert(c);
        }
        b.connect_straight(parent, new);
        adjacent.insert((parent.min(new), parent.max(new)));

        if rng.random_bool(params.extra_edge_probability) {
            let reach = if params.grid_bias {
                params.grid_spacing * 1.01
            } else {
                params.neighbor_distance
            };
            let nearest = (0..n)
                .filter(|&j| j != parent && !adjacent.contains(&(j.min(new), j.max(new))))
                .map(|j| (j, b.distance(j, new)))
                .filter(|&(_, d)| d >= 1.0 && d <= reach)
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            if let Some((j, _)) = nearest {
                b.connect_straight(j, new);
                adjacent.insert((j.min(new), j.max(new)));
            }
        }
    }
    b.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> GeneratorOptions {
        GeneratorOptions::default()
    }

    #[test]
    fn smallest_grid() {
        let net = generate_grid(2, 100.0, &opts()).unwrap();
        assert_eq!(net.junctions().len(), 4);
        assert_eq!(net.edges().len(), 8);
        assert!(net.is_strongly_connected());
    }

    #[test]
    fn grid_rejects_small_n() {
        assert!(matches!(
            generate_grid(1, 100.0, &opts()),
            Err(Error::InvalidParameter(_))
        ));
        assert!(generate_grid(3, 0.0, &opts()).is_err());
    }

    #[test]
    fn grid_counts_follow_lattice_enumeration() {
        for n in 2..8 {
            let net = generate_grid(n, 250.0, &opts()).unwrap();
            // enumerate neighbor pairs directly
            let mut pairs = 0;
            for a in 0..n * n {
                for b in 0..n * n {
                    let (ax, ay) = (a / n, a % n);
                    let (bx, by) = (b / n, b % n);
                    if ax.abs_diff(bx) + ay.abs_diff(by) == 1 {
                        pairs += 1;
                    }
                }
            }
            assert_eq!(net.junctions().len(), n * n);
            assert_eq!(net.edges().len(), pairs);
            assert_eq!(net.edges().len(), 4 * n * (n - 1));
            assert!(net.edges().iter().all(|e| e.length == 250.0));
        }
    }

    #[test]
    fn minimal_spider_has_center() {
        let net = generate_spider(4, 1, 100.0, false, &opts()).unwrap();
        assert_eq!(net.junctions().len(), 5);
        assert!(net.is_strongly_connected());
        let center = net.junction_index("center").unwrap();
        assert_eq!(net.out_edges(center).len(), 4);
    }

    #[test]
    fn spider_without_center() {
        let net = generate_spider(13, 20, 100.0, true, &opts()).unwrap();
        assert_eq!(net.junctions().len(), 260);
        assert!(net.is_strongly_connected());
        assert!(net.junctions().iter().all(|j| j.x.hypot(j.y) > 1.0));
        assert!(generate_spider(2, 3, 100.0, true, &opts()).is_err());
        assert!(generate_spider(3, 0, 100.0, true, &opts()).is_err());
    }

    #[test]
    fn single_growth_step() {
        let net = generate_random(&RandomGrowth::new(1, false), 7, &opts()).unwrap();
        assert_eq!(net.junctions().len(), 2);
        assert_eq!(net.edges().len(), 2);
    }

    #[test]
    fn random_growth_counts_and_determinism() {
        for grid in [false, true] {
            let p = RandomGrowth::new(200, grid);
            let a = generate_random(&p, 42, &opts()).unwrap();
            let b = generate_random(&p, 42, &opts()).unwrap();
            assert_eq!(a.junctions().len(), 201);
            assert_eq!(a.to_xml(), b.to_xml());
            assert!(a.is_strongly_connected());
            assert!(a.validate().is_empty());
            let c = generate_random(&p, 43, &opts()).unwrap();
            assert_ne!(a.to_xml(), c.to_xml());
        }
        assert!(generate_random(&RandomGrowth::new(0, false), 1, &opts()).is_err());
    }

    #[test]
    fn grid_bias_snaps_to_lattice() {
        let net = generate_random(&RandomGrowth::new(150, true), 3, &opts()).unwrap();
        for j in net.junctions() {
            assert_eq!(j.x % 100.0, 0.0);
            assert_eq!(j.y % 100.0, 0.0);
        }
        assert!(net.edges().iter().all(|e| e.length == 100.0));
    }

    #[test]
    fn validate_reports_each_violation() {
        let j = |id: &str| Junction {
            id: id.into(),
            x: 0.0,
            y: 0.0,
            control: JunctionControl::Priority,
        };
        let e = |id: &str, from: &str, to: &str, length: f64| Edge {
            id: id.into(),
            from: from.into(),
            to: to.into(),
            length,
            lane_count: 1,
            speed_limit: 10.0,
        };
        let net = RoadNetwork::from_parts(vec![j("a"), j("b")], vec![e("x", "a", "zz", 10.0)]);
        assert_eq!(
            net.validate(),
            vec![Violation::UnknownJunction {
                edge: "x".into(),
                junction: "zz".into()
            }]
        );
        let net = RoadNetwork::from_parts(vec![j("a"), j("b")], vec![e("x", "a", "b", 0.0)]);
        assert_eq!(net.validate(), vec![Violation::NonPositiveLength("x".into())]);
        assert!(RoadNetwork::new(vec![j("a"), j("b")], vec![e("x", "a", "b", 0.0)]).is_err());
        let grid = generate_grid(5, 200.0, &opts()).unwrap();
        assert!(grid.validate().is_empty());
    }

    #[test]
    fn xml_round_trip() {
        let net = generate_random(
            &RandomGrowth::new(60, false),
            11,
            &GeneratorOptions {
                junction_control: JunctionControl::TrafficLight,
                ..opts()
            },
        )
        .unwrap();
        let text = net.to_xml();
        let back = RoadNetwork::from_xml(&text).unwrap();
        assert_eq!(back, net);
        assert_eq!(back.to_xml(), text);
    }

    #[test]
    fn reads_lane_children_and_rejects_missing_attributes() {
        let text = r#"<net version="1.16">
            <location netOffset="0,0"/>
            <edge id=":j1_0" function="internal"><lane id=":j1_0_0" length="1" speed="1"/></edge>
            <edge id="a" from="j0" to="j1" priority="1">
                <lane id="a_0" index="0" speed="13.89" length="120.5"/>
                <lane id="a_1" index="1" speed="13.89" length="120.5"/>
            </edge>
            <junction id="j0" type="dead_end" x="0" y="0"/>
            <junction id="j1" type="traffic_light" x="120" y="0"/>
            <junction id=":j1_0" type="internal" x="0" y="0"/>
        </net>"#;
        let net = RoadNetwork::from_xml(text).unwrap();
        assert_eq!(net.edges().len(), 1);
        assert_eq!(net.edge(0).lane_count, 2);
        assert_eq!(net.edge(0).length, 120.5);
        assert_eq!(net.junctions()[1].control, JunctionControl::TrafficLight);

        let missing = r#"<net><junction id="a" x="0"/></net>"#;
        assert!(RoadNetwork::from_xml(missing).is_err());
    }
}
