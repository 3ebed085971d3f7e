//! Random trip generation: arrival models and weighted edge sampling.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Binomial;

use crate::error::{Error, Result};
use crate::netgraph::RoadNetwork;
use crate::routing::{self, Algorithm, EdgeCosts};
use crate::xml::{self, escape, floor2, fmt2, round2};

/// Attempts per trip before giving up on finding a usable edge pair.
pub const MAX_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct Trip {
    pub id: String,
    pub depart: f64,
    pub from_edge: String,
    pub to_edge: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Arrival {
    /// One or more periods; with several, the window is split into equal
    /// subintervals that each use one period.
    Period(Vec<f64>),
    /// Vehicles per hour.
    InsertionRate(f64),
    /// Vehicles per hour per kilometre of road.
    InsertionDensity(f64),
    Binomial {
        n: u64,
        period: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalModel {
    pub arrival: Arrival,
    pub random_depart: bool,
}

impl ArrivalModel {
    pub fn period(p: f64) -> Self {
        Self {
            arrival: Arrival::Period(vec![p]),
            random_depart: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{what} must be positive, got {v}")))
            }
        };
        match &self.arrival {
            Arrival::Period(ps) => {
                if ps.is_empty() {
                    return Err(Error::invalid("at least one period is required"));
                }
                ps.iter().try_for_each(|&p| positive(p, "period"))
            }
            Arrival::InsertionRate(r) => positive(*r, "insertion rate"),
            Arrival::InsertionDensity(d) => positive(*d, "insertion density"),
            Arrival::Binomial { n, period } => {
                if *n == 0 {
                    return Err(Error::invalid("binomial n must be at least 1"));
                }
                positive(*period, "period")?;
                if (*n as f64) * period < 1.0 {
                    return Err(Error::invalid(format!(
                        "binomial n * period must be at least 1, got {}",
                        *n as f64 * period
                    )));
                }
                Ok(())
            }
        }
    }
}

impl Default for ArrivalModel {
    fn default() -> Self {
        Self::period(1.0)
    }
}

/// Per-edge sampling weights. A missing table means uniform sampling;
/// edges absent from a present table get weight 0.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EdgeWeightTable {
    pub src: Option<BTreeMap<String, f64>>,
    pub dst: Option<BTreeMap<String, f64>>,
    /// Parsed and kept; not used for sampling.
    pub via: Option<BTreeMap<String, f64>>,
}

impl EdgeWeightTable {
    /// Loads `<prefix>.src.xml`, `<prefix>.dst.xml` and `<prefix>.via.xml`,
    /// whichever exist.
    pub fn load(prefix: &Path) -> Result<Self> {
        let load = |suffix: &str| -> Result<Option<BTreeMap<String, f64>>> {
            let mut name = prefix.as_os_str().to_owned();
            name.push(suffix);
            let path = PathBuf::from(name);
            if path.exists() {
                Ok(Some(parse_edge_values(&xml::read_file(&path)?, "value")?))
            } else {
                Ok(None)
            }
        };
        Ok(Self {
            src: load(".src.xml")?,
            dst: load(".dst.xml")?,
            via: load(".via.xml")?,
        })
    }
}

/// Reads `<edge id=.. attr=..>` entries from an edgedata-style document,
/// summing values of the same edge across intervals. Edges lacking the
/// attribute are skipped.
pub fn parse_edge_values(text: &str, attribute: &str) -> Result<BTreeMap<String, f64>> {
    let root = xml::parse_document(text)?;
    let mut out = BTreeMap::new();
    for edge in root.descendants_named("edge") {
        if let Some(v) = edge.parse_optional::<f64>(attribute)? {
            if !(v.is_finite() && v >= 0.0) {
                return Err(edge.error(format!("`{attribute}` must be nonnegative, got {v}")));
            }
            *out.entry(edge.required("id")?.to_string()).or_insert(0.0) += v;
        }
    }
    Ok(out)
}

pub fn write_edge_values(values: &BTreeMap<String, f64>, attribute: &str) -> String {
    let mut out = String::from("<edgedata>\n    <interval begin=\"0\" end=\"3600\">\n");
    for (id, v) in values {
        out.push_str(&format!(
            "        <edge id=\"{}\" {attribute}=\"{}\"/>\n",
            escape(id),
            xml::fmt_exact(*v)
        ));
    }
    out.push_str("    </interval>\n</edgedata>\n");
    out
}

fn weighted_index(weights: &[f64], what: &str) -> Result<WeightedIndex<f64>> {
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::InvalidWeights(format!("{what}: invalid weight {w}")));
    }
    WeightedIndex::new(weights).map_err(|_| Error::InvalidWeights(format!("{what}: no positive weight")))
}

/// Draws an edge id with probability proportional to its weight.
pub fn sample_edge<R: Rng + ?Sized>(table: &BTreeMap<String, f64>, rng: &mut R) -> Result<String> {
    let weights: Vec<f64> = table.values().copied().collect();
    let dist = weighted_index(&weights, "edge table")?;
    Ok(table.keys().nth(dist.sample(rng)).cloned().unwrap_or_default())
}

fn edge_sampler(net: &RoadNetwork, table: Option<&BTreeMap<String, f64>>, what: &str) -> Result<WeightedIndex<f64>> {
    let weights = match table {
        None => vec![1.0; net.edges().len()],
        Some(t) => {
            let mut w = vec![0.0; net.edges().len()];
            for (id, &v) in t {
                w[net.require_edge(id)?] = v;
            }
            w
        }
    };
    weighted_index(&weights, what)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripParams {
    pub begin: f64,
    pub end: f64,
    pub model: ArrivalModel,
    pub weights: Option<EdgeWeightTable>,
    pub seed: u64,
    /// Discard and redraw trips that have no route.
    pub validate: bool,
    pub prefix: String,
}

impl TripParams {
    pub fn new(begin: f64, end: f64, model: ArrivalModel) -> Self {
        Self {
            begin,
            end,
            model,
            weights: None,
            seed: crate::DEFAULT_SEED,
            validate: false,
            prefix: String::new(),
        }
    }
}

/// Snaps a departure to the 0.01 s grid while keeping it below `end`.
fn quantize(t: f64, end: f64) -> f64 {
    let r = round2(t);
    if r < end {
        r
    } else {
        floor2(t)
    }
}

fn periodic(begin: f64, end: f64, p: f64, out: &mut Vec<f64>) {
    let mut i = 0u64;
    loop {
        let t = begin + i as f64 * p;
        if t >= end {
            break;
        }
        out.push(quantize(t, end));
        i += 1;
    }
}

fn departures(net: &RoadNetwork, params: &TripParams, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let (begin, end) = (params.begin, params.end);
    let mut departs = Vec::new();
    match &params.model.arrival {
        Arrival::Period(ps) => {
            let span = (end - begin) / ps.len() as f64;
            for (k, &p) in ps.iter().enumerate() {
                let b = begin + k as f64 * span;
                let e = if k + 1 == ps.len() {
                    end
                } else {
                    begin + (k + 1) as f64 * span
                };
                periodic(b, e, p, &mut departs);
            }
        }
        Arrival::InsertionRate(r) => periodic(begin, end, 3600.0 / r, &mut departs),
        Arrival::InsertionDensity(d) => {
            let rate = d * net.total_edge_length() / 1000.0;
            if !(rate > 0.0) {
                return Err(Error::invalid(
                    "insertion density yields a zero rate on an empty network",
                ));
            }
            periodic(begin, end, 3600.0 / rate, &mut departs)
        }
        Arrival::Binomial { n, period } => {
            let dist =
                Binomial::new(*n, 1.0 / (*n as f64 * period)).map_err(|e| Error::invalid(format!("binomial: {e}")))?;
            let mut i = 0u64;
            loop {
                let t = begin + i as f64;
                if t >= end {
                    break;
                }
                let k = dist.sample(rng);
                departs.extend(std::iter::repeat_n(quantize(t, end), k as usize));
                i += 1;
            }
        }
    }
    if params.model.random_depart {
        for d in departs.iter_mut() {
            *d = floor2(rng.random_range(begin..end)).max(begin);
        }
        departs.sort_by(f64::total_cmp);
    }
    Ok(departs)
}

/// Generates trips for the window `[begin, end)`. The departure sequence
/// is drawn first, then one edge pair per trip, all from a single seeded
/// stream.
pub fn generate_trips(net: &RoadNetwork, params: &TripParams) -> Result<Vec<Trip>> {
    if !(params.begin < params.end) || !params.begin.is_finite() || !params.end.is_finite() {
        return Err(Error::Window {
            begin: params.begin,
            end: params.end,
        });
    }
    params.model.validate()?;
    if net.edges().is_empty() {
        return Err(Error::invalid("network has no edges"));
    }
    let weights = params.weights.clone().unwrap_or_default();
    let src = edge_sampler(net, weights.src.as_ref(), "source weights")?;
    let dst = edge_sampler(net, weights.dst.as_ref(), "destination weights")?;
    let costs = EdgeCosts::free_flow(net);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let departs = departures(net, params, &mut rng)?;
    let mut trips = Vec::with_capacity(departs.len());
    for (i, depart) in departs.into_iter().enumerate() {
        let mut found = None;
        for _ in 0..MAX_ATTEMPTS {
            let from = src.sample(&mut rng);
            let to = dst.sample(&mut rng);
            if from == to {
                continue;
            }
            if params.validate && routing::shortest_path(net, from, to, &costs, Algorithm::Dijkstra).is_none() {
                continue;
            }
            found = Some((from, to));
            break;
        }
        let (from, to) = found.ok_or(Error::GenerationExhausted { attempts: MAX_ATTEMPTS })?;
        trips.push(Trip {
            id: format!("{}{i}", params.prefix),
            depart,
            from_edge: net.edge(from).id.clone(),
            to_edge: net.edge(to).id.clone(),
        });
    }
    Ok(trips)
}

pub fn write_trips(trips: &[Trip]) -> String {
    let mut out = routing::routes_header();
    for t in trips {
        out.push_str(&format!(
            "    <trip id=\"{}\" depart=\"{}\" from=\"{}\" to=\"{}\"/>\n",
            escape(&t.id),
            fmt2(t.depart),
            escape(&t.from_edge),
            escape(&t.to_edge)
        ));
    }
    out.push_str("</routes>\n");
    out
}

/// Reads the `<trip>` (and trip-style `<flow>`) entries of a routes file.
pub fn parse_trips(text: &str) -> Result<Vec<Trip>> {
    Ok(routing::parse_route_file(text)?.trips)
}

pub fn read_trips(path: &Path) -> Result<Vec<Trip>> {
    parse_trips(&xml::read_file(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::{generate_grid, GeneratorOptions};

    fn grid() -> RoadNetwork {
        generate_grid(3, 100.0, &GeneratorOptions::default()).unwrap()
    }

    #[test]
    fn unit_period_fills_window() {
        let trips = generate_trips(&grid(), &TripParams::new(0.0, 1000.0, ArrivalModel::period(1.0))).unwrap();
        assert_eq!(trips.len(), 1000);
        for (i, t) in trips.iter().enumerate() {
            assert_eq!(t.depart, i as f64);
            assert_eq!(t.id, i.to_string());
            assert_ne!(t.from_edge, t.to_edge);
        }
    }

    #[test]
    fn n_trips_over_window() {
        let trips = generate_trips(&grid(), &TripParams::new(0.0, 100.0, ArrivalModel::period(10.0))).unwrap();
        let departs: Vec<f64> = trips.iter().map(|t| t.depart).collect();
        assert_eq!(departs, (0..10).map(|i| i as f64 * 10.0).collect::<Vec<_>>());
    }

    #[test]
    fn count_is_ceiling() {
        for (end, p, n) in [(10.0, 3.0, 4), (9.0, 3.0, 3), (1.0, 0.3, 4), (100.0, 7.0, 15)] {
            let trips = generate_trips(&grid(), &TripParams::new(0.0, end, ArrivalModel::period(p))).unwrap();
            assert_eq!(trips.len(), n, "end {end} p {p}");
        }
    }

    #[test]
    fn multiple_periods_split_window() {
        let model = ArrivalModel {
            arrival: Arrival::Period(vec![10.0, 25.0]),
            random_depart: false,
        };
        let trips = generate_trips(&grid(), &TripParams::new(0.0, 100.0, model)).unwrap();
        let departs: Vec<f64> = trips.iter().map(|t| t.depart).collect();
        assert_eq!(departs, vec![0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 75.0]);
    }

    #[test]
    fn rate_and_density_map_to_periods() {
        let net = grid();
        let rate = ArrivalModel {
            arrival: Arrival::InsertionRate(360.0),
            random_depart: false,
        };
        assert_eq!(
            generate_trips(&net, &TripParams::new(0.0, 100.0, rate)).unwrap().len(),
            10
        );
        // 24 edges * 100 m = 2.4 km; 150 veh/h/km -> 360 veh/h
        let density = ArrivalModel {
            arrival: Arrival::InsertionDensity(150.0),
            random_depart: false,
        };
        assert_eq!(
            generate_trips(&net, &TripParams::new(0.0, 100.0, density))
                .unwrap()
                .len(),
            10
        );
    }

    #[test]
    fn rejects_bad_parameters() {
        let net = grid();
        assert!(generate_trips(&net, &TripParams::new(5.0, 5.0, ArrivalModel::period(1.0))).is_err());
        assert!(generate_trips(&net, &TripParams::new(0.0, 5.0, ArrivalModel::period(0.0))).is_err());
        let bin = ArrivalModel {
            arrival: Arrival::Binomial { n: 0, period: 1.0 },
            random_depart: false,
        };
        assert!(generate_trips(&net, &TripParams::new(0.0, 5.0, bin)).is_err());
    }

    #[test]
    fn single_edge_tables_exhaust() {
        let net = grid();
        let id = net.edge(0).id.clone();
        let table: BTreeMap<String, f64> = [(id, 1.0)].into();
        let mut params = TripParams::new(0.0, 10.0, ArrivalModel::period(1.0));
        params.weights = Some(EdgeWeightTable {
            src: Some(table.clone()),
            dst: Some(table),
            via: None,
        });
        assert!(matches!(
            generate_trips(&net, &params),
            Err(Error::GenerationExhausted { .. })
        ));
    }

    #[test]
    fn sample_edge_single_and_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let table: BTreeMap<String, f64> = [("a".to_string(), 0.0), ("b".to_string(), 2.0)].into();
        for _ in 0..100 {
            assert_eq!(sample_edge(&table, &mut rng).unwrap(), "b");
        }
        let zero: BTreeMap<String, f64> = [("a".to_string(), 0.0)].into();
        assert!(matches!(sample_edge(&zero, &mut rng), Err(Error::InvalidWeights(_))));
    }

    #[test]
    fn trips_file_round_trip() {
        let trips = generate_trips(&grid(), &TripParams::new(0.0, 50.0, ArrivalModel::period(3.3))).unwrap();
        let text = write_trips(&trips);
        assert!(text.contains("<trip id=\"0\" depart=\"0.00\""));
        assert_eq!(parse_trips(&text).unwrap(), trips);
    }

    #[test]
    fn edge_values_sum_over_intervals() {
        let text = r#"<meandata>
            <interval begin="0" end="10"><edge id="a" value="1.5"/><edge id="b" other="3"/></interval>
            <interval begin="10" end="20"><edge id="a" value="2"/></interval>
        </meandata>"#;
        let m = parse_edge_values(text, "value").unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m["a"], 3.5);
        assert_eq!(parse_edge_values(&write_edge_values(&m, "value"), "value").unwrap(), m);
    }
}
