//! Scenario configuration files and file-to-file pipeline steps.
//!
//! Every step reads its inputs from disk and writes its artifact back, so
//! a pipeline file and the equivalent sequence of CLI calls produce the
//! same bytes. Relative paths resolve against a base directory: the
//! pipeline file's directory, or the working directory for the CLI.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::assignment::{self, AssignParams, GawronParams, LogitParams, Method};
use crate::demand::{self, Arrival, ArrivalModel, EdgeWeightTable, TripParams};
use crate::detectors::{self, PlacementParams, Strategy};
use crate::error::{Error, Result};
use crate::mesosim::{self, SimConfig};
use crate::netgraph::{self, GeneratorOptions, JunctionControl, RandomGrowth, RoadNetwork};
use crate::odmatrix::{self, TimeWindow};
use crate::routing::{self, Algorithm, EdgeCosts, RouteFile};
use crate::taz::{self, TazSet};
use crate::xml::{self, escape, fmt_exact};

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub net_file: PathBuf,
    pub route_files: Vec<PathBuf>,
    pub additional_files: Vec<PathBuf>,
    pub begin: f64,
    pub end: f64,
    pub edgedata_output: Option<PathBuf>,
    pub convergence_log: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn new(net_file: impl Into<PathBuf>) -> Self {
        Self {
            net_file: net_file.into(),
            route_files: Vec::new(),
            additional_files: Vec::new(),
            begin: 0.0,
            end: 3600.0,
            edgedata_output: None,
            convergence_log: None,
        }
    }

    /// Joins every relative path onto `dir`.
    pub fn resolve(mut self, dir: &Path) -> Self {
        let join = |p: &mut PathBuf| *p = dir.join(&*p);
        join(&mut self.net_file);
        self.route_files.iter_mut().for_each(join);
        self.additional_files.iter_mut().for_each(join);
        self.edgedata_output.as_mut().map(join);
        self.convergence_log.as_mut().map(join);
        self
    }
}

fn split_list(value: &str) -> Vec<PathBuf> {
    value
        .split([',', ' '])
        .filter(|s| !s.is_empty())
        .map(PathBuf::from)
        .collect()
}

/// Parses a `<configuration>` document with `<input>`, `<time>` and
/// `<output>` sections. Unknown elements are rejected.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let root = xml::parse_document(text)?;
    let unknown = |el: &xml::Element| Error::Config {
        message: format!("unknown element <{}>", el.name),
        line: Some(el.line),
    };
    if root.name != "configuration" {
        return Err(unknown(&root));
    }
    let value = |el: &xml::Element| -> Result<String> {
        el.attr("value").map(str::to_string).ok_or_else(|| Error::Config {
            message: format!("<{}> needs a value attribute", el.name),
            line: Some(el.line),
        })
    };
    let number = |el: &xml::Element| -> Result<f64> {
        let v = value(el)?;
        v.trim().parse().map_err(|_| Error::Config {
            message: format!("<{}> value `{v}` is not a number", el.name),
            line: Some(el.line),
        })
    };
    let mut net_file = None;
    let mut cfg = ScenarioConfig::new("");
    for section in &root.children {
        for el in &section.children {
            match (section.name.as_str(), el.name.as_str()) {
                ("input", "net-file") => net_file = Some(PathBuf::from(value(el)?)),
                ("input", "route-files") => cfg.route_files.extend(split_list(&value(el)?)),
                ("input", "additional-files") => cfg.additional_files.extend(split_list(&value(el)?)),
                ("time", "begin") => cfg.begin = number(el)?,
                ("time", "end") => cfg.end = number(el)?,
                ("output", "edgedata-output") => cfg.edgedata_output = Some(PathBuf::from(value(el)?)),
                ("output", "convergence-log") => cfg.convergence_log = Some(PathBuf::from(value(el)?)),
                ("input" | "time" | "output", _) => return Err(unknown(el)),
                _ => return Err(unknown(section)),
            }
        }
        if !matches!(section.name.as_str(), "input" | "time" | "output") {
            return Err(unknown(section));
        }
    }
    cfg.net_file = net_file.ok_or_else(|| Error::config("configuration has no <net-file>"))?;
    if !(cfg.begin < cfg.end) {
        return Err(Error::Window {
            begin: cfg.begin,
            end: cfg.end,
        });
    }
    Ok(cfg)
}

/// Reads a configuration file and resolves its paths against the file's
/// directory.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let cfg = parse_config(&xml::read_file(path)?)?;
    Ok(cfg.resolve(path.parent().unwrap_or(Path::new(""))))
}

fn format_time(t: f64) -> String {
    if t.fract() == 0.0 && t.abs() < 1e15 {
        format!("{}", t as i64)
    } else {
        fmt_exact(t)
    }
}

fn join_paths(paths: &[PathBuf]) -> String {
    paths
        .iter()
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>()
        .join(",")
}

pub fn write_config(cfg: &ScenarioConfig) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<configuration>\n    <input>\n");
    let entry = |name: &str, v: &str| format!("        <{name} value=\"{}\"/>\n", escape(v));
    out.push_str(&entry("net-file", &cfg.net_file.display().to_string()));
    if !cfg.route_files.is_empty() {
        out.push_str(&entry("route-files", &join_paths(&cfg.route_files)));
    }
    if !cfg.additional_files.is_empty() {
        out.push_str(&entry("additional-files", &join_paths(&cfg.additional_files)));
    }
    out.push_str("    </input>\n    <time>\n");
    out.push_str(&entry("begin", &format_time(cfg.begin)));
    out.push_str(&entry("end", &format_time(cfg.end)));
    out.push_str("    </time>\n");
    if cfg.edgedata_output.is_some() || cfg.convergence_log.is_some() {
        out.push_str("    <output>\n");
        if let Some(p) = &cfg.edgedata_output {
            out.push_str(&entry("edgedata-output", &p.display().to_string()));
        }
        if let Some(p) = &cfg.convergence_log {
            out.push_str(&entry("convergence-log", &p.display().to_string()));
        }
        out.push_str("    </output>\n");
    }
    out.push_str("</configuration>\n");
    out
}

/// The explicit seed, a time-based one when `random` is set, or the
/// crate default.
pub fn resolve_seed(seed: Option<u64>, random: bool) -> u64 {
    if random {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_nanos() as u64)
            .unwrap_or(crate::DEFAULT_SEED)
    } else {
        seed.unwrap_or(crate::DEFAULT_SEED)
    }
}

fn default_end() -> f64 {
    3600.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub number: usize,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpiderSpec {
    pub arms: usize,
    pub circles: usize,
    pub radius: f64,
    #[serde(default)]
    pub omit_center: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandSpec {
    pub iterations: usize,
    #[serde(default)]
    pub grid: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetgenStep {
    pub output: PathBuf,
    pub grid: Option<GridSpec>,
    pub spider: Option<SpiderSpec>,
    pub rand: Option<RandSpec>,
    pub junction_type: Option<String>,
    pub lanes: Option<u32>,
    pub speed: Option<f64>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub random: bool,
}

impl NetgenStep {
    pub fn build(&self) -> Result<RoadNetwork> {
        let mut opts = GeneratorOptions::default();
        if let Some(j) = &self.junction_type {
            opts.junction_control =
                JunctionControl::parse(j).ok_or_else(|| Error::config(format!("unknown junction type `{j}`")))?;
        }
        if let Some(l) = self.lanes {
            opts.lanes = l;
        }
        if let Some(s) = self.speed {
            opts.speed = s;
        }
        match (&self.grid, &self.spider, &self.rand) {
            (Some(g), None, None) => netgraph::generate_grid(g.number, g.length, &opts),
            (None, Some(s), None) => netgraph::generate_spider(s.arms, s.circles, s.radius, s.omit_center, &opts),
            (None, None, Some(r)) => netgraph::generate_random(
                &RandomGrowth::new(r.iterations, r.grid),
                resolve_seed(self.seed, self.random),
                &opts,
            ),
            _ => Err(Error::config("choose exactly one of grid, spider or rand")),
        }
    }

    pub fn run(&self, base: &Path) -> Result<String> {
        let net = self.build()?;
        xml::write_file(&base.join(&self.output), &net.to_xml())?;
        Ok(format!(
            "{} junctions, {} edges -> {}",
            net.junctions().len(),
            net.edges().len(),
            self.output.display()
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TazStep {
    pub net: PathBuf,
    pub output: PathBuf,
    /// Polygon file; zones are its polygons.
    pub polygons: Option<PathBuf>,
    /// Square cell size; zones are grid cells over the network.
    pub grid_size: Option<f64>,
    /// Where to write the grid polygons, if wanted.
    pub polygons_output: Option<PathBuf>,
}

impl TazStep {
    pub fn run(&self, base: &Path) -> Result<String> {
        let net = RoadNetwork::read(&base.join(&self.net))?;
        let tazs = match (&self.polygons, self.grid_size) {
            (Some(p), None) => {
                let polys = taz::polygons_from_xml(&xml::read_file(&base.join(p))?)?;
                taz::edges_in_districts(&net, &polys)?
            }
            (None, Some(size)) => {
                let (polys, tazs) = taz::grid_districts(&net, size)?;
                if let Some(out) = &self.polygons_output {
                    xml::write_file(&base.join(out), &taz::polygons_to_xml(&polys))?;
                }
                tazs
            }
            _ => return Err(Error::config("choose exactly one of polygons or grid_size")),
        };
        xml::write_file(&base.join(&self.output), &tazs.to_xml())?;
        Ok(format!("{} zones -> {}", tazs.len(), self.output.display()))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripsStep {
    pub net: PathBuf,
    pub output: PathBuf,
    #[serde(default)]
    pub begin: f64,
    #[serde(default = "default_end")]
    pub end: f64,
    #[serde(default)]
    pub period: Vec<f64>,
    pub insertion_rate: Option<f64>,
    pub insertion_density: Option<f64>,
    pub binomial: Option<u64>,
    #[serde(default)]
    pub random_depart: bool,
    #[serde(default)]
    pub validate: bool,
    pub weights_prefix: Option<PathBuf>,
    #[serde(default)]
    pub prefix: String,
    pub seed: Option<u64>,
    #[serde(default)]
    pub random: bool,
}

impl TripsStep {
    pub fn new(net: impl Into<PathBuf>, output: impl Into<PathBuf>) -> Self {
        Self {
            net: net.into(),
            output: output.into(),
            begin: 0.0,
            end: default_end(),
            period: Vec::new(),
            insertion_rate: None,
            insertion_density: None,
            binomial: None,
            random_depart: false,
            validate: false,
            weights_prefix: None,
            prefix: String::new(),
            seed: None,
            random: false,
        }
    }

    /// Binomial uses the first period (default 1) as its mean headway.
    pub fn model(&self) -> Result<ArrivalModel> {
        let arrival = match (self.insertion_rate, self.insertion_density, self.binomial) {
            (Some(r), None, None) if self.period.is_empty() => Arrival::InsertionRate(r),
            (None, Some(d), None) if self.period.is_empty() => Arrival::InsertionDensity(d),
            (None, None, Some(n)) if self.period.len() <= 1 => Arrival::Binomial {
                n,
                period: self.period.first().copied().unwrap_or(1.0),
            },
            (None, None, None) if self.period.is_empty() => Arrival::Period(vec![1.0]),
            (None, None, None) => Arrival::Period(self.period.clone()),
            _ => return Err(Error::config("conflicting arrival options")),
        };
        Ok(ArrivalModel {
            arrival,
            random_depart: self.random_depart,
        })
    }

    pub fn run(&self, base: &Path) -> Result<String> {
        let net = RoadNetwork::read(&base.join(&self.net))?;
        let mut params = TripParams::new(self.begin, self.end, self.model()?);
        params.validate = self.validate;
        params.prefix = self.prefix.clone();
        params.seed = resolve_seed(self.seed, self.random);
        if let Some(prefix) = &self.weights_prefix {
            params.weights = Some(EdgeWeightTable::load(&base.join(prefix))?);
        }
        let trips = demand::generate_trips(&net, &params)?;
        xml::write_file(&base.join(&self.output), &demand::write_trips(&trips))?;
        Ok(format!("{} trips -> {}", trips.len(), self.output.display()))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Od2TripsStep {
    pub taz: PathBuf,
    pub od: Vec<PathBuf>,
    pub output: PathBuf,
    #[serde(default)]
    pub prefix: String,
    /// Recorded only.
    pub vtype: Option<String>,
    pub begin: Option<f64>,
    pub end: Option<f64>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub random: bool,
}

impl Od2TripsStep {
    pub fn run(&self, base: &Path) -> Result<String> {
        let tazs = TazSet::read(&base.join(&self.taz))?;
        let mut matrices = Vec::new();
        for p in &self.od {
            matrices.extend(odmatrix::read_od_file(&base.join(p))?);
        }
        let matrices = odmatrix::clip_matrices(matrices, self.begin, self.end)?;
        let trips = odmatrix::od_to_trips_many(&matrices, &tazs, resolve_seed(self.seed, self.random), &self.prefix)?;
        xml::write_file(&base.join(&self.output), &demand::write_trips(&trips))?;
        Ok(format!("{} trips -> {}", trips.len(), self.output.display()))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Route2OdStep {
    /// Routes or trips files.
    pub routes: Vec<PathBuf>,
    pub taz: PathBuf,
    /// `.od` writes O-format (single interval only); anything else writes
    /// tazRelation XML.
    pub output: PathBuf,
    pub intervals: Option<usize>,
    #[serde(default)]
    pub begin: f64,
    #[serde(default = "default_end")]
    pub end: f64,
}

impl Route2OdStep {
    pub fn run(&self, base: &Path) -> Result<String> {
        let tazs = TazSet::read(&base.join(&self.taz))?;
        let paths: Vec<PathBuf> = self.routes.iter().map(|p| base.join(p)).collect();
        let file = routing::read_route_files(&paths)?;
        let window = TimeWindow::new(self.begin, self.end)?;
        let mut agg = odmatrix::route_to_od(&file.routes, &tazs, window, self.intervals)?;
        let from_trips = odmatrix::route_to_od(&file.trips, &tazs, window, self.intervals)?;
        for (m, extra) in agg.matrices.iter_mut().zip(from_trips.matrices) {
            for (k, v) in extra.cells {
                *m.cells.entry(k).or_insert(0.0) += v;
            }
        }
        agg.unresolved += from_trips.unresolved;
        agg.out_of_window += from_trips.out_of_window;
        let text = if self.output.extension().is_some_and(|e| e == "od") {
            match agg.matrices.as_slice() {
                [m] => odmatrix::write_o_format(m)?,
                _ => return Err(Error::config("O-format output holds a single interval")),
            }
        } else {
            odmatrix::write_taz_relations(&agg.matrices)
        };
        xml::write_file(&base.join(&self.output), &text)?;
        Ok(format!(
            "mass {} ({} unresolved, {} outside window) -> {}",
            agg.mass(),
            agg.unresolved,
            agg.out_of_window,
            self.output.display()
        ))
    }
}

fn parse_algorithm(name: &Option<String>) -> Result<Algorithm> {
    match name {
        None => Ok(Algorithm::Dijkstra),
        Some(n) => Algorithm::parse(n).ok_or_else(|| Error::config(format!("unknown routing algorithm `{n}`"))),
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteStep {
    pub net: PathBuf,
    pub routes: Vec<PathBuf>,
    pub output: PathBuf,
    #[serde(default)]
    pub ignore_errors: bool,
    pub algorithm: Option<String>,
}

impl RouteStep {
    pub fn run(&self, base: &Path) -> Result<String> {
        let net = RoadNetwork::read(&base.join(&self.net))?;
        let paths: Vec<PathBuf> = self.routes.iter().map(|p| base.join(p)).collect();
        let file = routing::read_route_files(&paths)?;
        let outcome = routing::route_trips(
            &net,
            &file.trips,
            &EdgeCosts::free_flow(&net),
            parse_algorithm(&self.algorithm)?,
            self.ignore_errors,
        )?;
        let mut routes = file.routes;
        routes.extend(outcome.routes);
        routes.sort_by(|a, b| a.depart.total_cmp(&b.depart));
        xml::write_file(&base.join(&self.output), &routing::write_routes(&routes))?;
        Ok(format!(
            "{} routes, {} failures -> {}",
            routes.len(),
            outcome.failures.len(),
            self.output.display()
        ))
    }
}

fn default_iterations() -> usize {
    10
}

fn default_max_alternatives() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssignStep {
    pub net: PathBuf,
    pub trips: Vec<PathBuf>,
    pub output: PathBuf,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    /// `gawron` (default) or `logit`.
    pub method: Option<String>,
    pub theta: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    #[serde(default = "default_max_alternatives")]
    pub max_alternatives: usize,
    pub seed: Option<u64>,
    #[serde(default)]
    pub random: bool,
    pub algorithm: Option<String>,
    #[serde(default)]
    pub ignore_errors: bool,
    pub begin: Option<f64>,
    pub end: Option<f64>,
    /// Convergence log path.
    pub log: Option<PathBuf>,
    /// Directory for per-iteration route files.
    pub dump_dir: Option<PathBuf>,
}

impl AssignStep {
    pub fn params(&self) -> Result<AssignParams> {
        let method = match self.method.as_deref().unwrap_or("gawron") {
            "gawron" => {
                let d = GawronParams::default();
                Method::Gawron(GawronParams {
                    alpha: self.alpha.unwrap_or(d.alpha),
                    beta: self.beta.unwrap_or(d.beta),
                })
            }
            "logit" => Method::Logit(LogitParams {
                theta: self.theta.unwrap_or(LogitParams::default().theta),
            }),
            other => return Err(Error::config(format!("unknown method `{other}`"))),
        };
        let sim = match (self.begin, self.end) {
            (None, None) => None,
            (b, e) => Some(SimConfig::new(b.unwrap_or(0.0), e.unwrap_or(default_end()))),
        };
        Ok(AssignParams {
            iterations: self.iterations,
            method,
            max_alternatives: self.max_alternatives,
            seed: resolve_seed(self.seed, self.random),
            algorithm: parse_algorithm(&self.algorithm)?,
            ignore_errors: self.ignore_errors,
            sim,
        })
    }

    pub fn run(&self, base: &Path) -> Result<String> {
        let net = RoadNetwork::read(&base.join(&self.net))?;
        let paths: Vec<PathBuf> = self.trips.iter().map(|p| base.join(p)).collect();
        let trips = routing::read_route_files(&paths)?.trips;
        let outcome = assignment::dua_iterate(&net, &trips, &self.params()?)?;
        xml::write_file(&base.join(&self.output), &routing::write_routes(&outcome.routes))?;
        if let Some(log) = &self.log {
            xml::write_file(&base.join(log), &assignment::write_convergence_log(&outcome))?;
        }
        if let Some(dir) = &self.dump_dir {
            for (i, it) in outcome.iterations.iter().enumerate() {
                let path = base.join(dir).join(format!("iteration_{i:03}.rou.xml"));
                xml::write_file(&path, &routing::write_routes(&it.routes))?;
            }
        }
        let last = outcome.iterations.last().map(|r| r.mean_travel_time).unwrap_or(0.0);
        Ok(format!(
            "{} iterations, final mean travel time {:.2} s -> {}",
            outcome.iterations.len(),
            last,
            self.output.display()
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaceDetectorsStep {
    pub net: PathBuf,
    pub taz: PathBuf,
    pub output: PathBuf,
    pub probability: f64,
    /// `lanes` (default) or `weight`.
    pub strategy: Option<String>,
    pub edgedata: Option<PathBuf>,
    pub weight_attr: Option<String>,
    pub period: Option<f64>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub random: bool,
}

impl PlaceDetectorsStep {
    pub fn run(&self, base: &Path) -> Result<String> {
        let net = RoadNetwork::read(&base.join(&self.net))?;
        let tazs = TazSet::read(&base.join(&self.taz))?;
        let strategy = match self.strategy.as_deref().unwrap_or("lanes") {
            "lanes" => Strategy::ByLanes,
            "weight" => {
                let (Some(file), Some(attr)) = (&self.edgedata, &self.weight_attr) else {
                    return Err(Error::config("the weight strategy needs edgedata and weight_attr"));
                };
                Strategy::ByWeight {
                    attribute: attr.clone(),
                    edgedata: xml::read_file(&base.join(file))?,
                }
            }
            other => return Err(Error::config(format!("unknown strategy `{other}`"))),
        };
        let mut params = PlacementParams::new(self.probability, strategy);
        params.seed = resolve_seed(self.seed, self.random);
        if let Some(p) = self.period {
            params.period = p;
        }
        let placed = detectors::place_random(&net, &tazs, &params)?;
        xml::write_file(
            &base.join(&self.output),
            &detectors::write_additional(&placed.detectors),
        )?;
        Ok(format!(
            "{} detectors, {} zones skipped -> {}",
            placed.detectors.len(),
            placed.skipped.len(),
            self.output.display()
        ))
    }
}

/// Writes a scenario configuration. Paths are written as given, so they
/// should be relative to the configuration file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigStep {
    pub output: PathBuf,
    pub net: PathBuf,
    #[serde(default)]
    pub routes: Vec<PathBuf>,
    #[serde(default)]
    pub additional: Vec<PathBuf>,
    #[serde(default)]
    pub begin: f64,
    #[serde(default = "default_end")]
    pub end: f64,
    pub edgedata_output: Option<PathBuf>,
}

impl ConfigStep {
    pub fn config(&self) -> ScenarioConfig {
        ScenarioConfig {
            net_file: self.net.clone(),
            route_files: self.routes.clone(),
            additional_files: self.additional.clone(),
            begin: self.begin,
            end: self.end,
            edgedata_output: self.edgedata_output.clone(),
            convergence_log: None,
        }
    }

    pub fn run(&self, base: &Path) -> Result<String> {
        xml::write_file(&base.join(&self.output), &write_config(&self.config()))?;
        Ok(format!("-> {}", self.output.display()))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateStep {
    /// Configuration file; the explicit fields below fill in or override it.
    pub config: Option<PathBuf>,
    pub net: Option<PathBuf>,
    #[serde(default)]
    pub routes: Vec<PathBuf>,
    #[serde(default)]
    pub additional: Vec<PathBuf>,
    pub begin: Option<f64>,
    pub end: Option<f64>,
    pub edgedata_output: Option<PathBuf>,
    /// Drop vehicles whose route is broken or whose trip has no route.
    #[serde(default)]
    pub ignore_route_errors: bool,
    pub aggregation_period: Option<f64>,
}

impl SimulateStep {
    pub fn scenario(&self, base: &Path) -> Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(p) => load_config(&base.join(p))?,
            None => {
                let net = self
                    .net
                    .as_ref()
                    .ok_or_else(|| Error::config("simulate needs a config file or a net file"))?;
                ScenarioConfig::new(base.join(net))
            }
        };
        if self.config.is_some() {
            if let Some(net) = &self.net {
                cfg.net_file = base.join(net);
            }
        }
        cfg.route_files.extend(self.routes.iter().map(|p| base.join(p)));
        cfg.additional_files
            .extend(self.additional.iter().map(|p| base.join(p)));
        if let Some(b) = self.begin {
            cfg.begin = b;
        }
        if let Some(e) = self.end {
            cfg.end = e;
        }
        if let Some(p) = &self.edgedata_output {
            cfg.edgedata_output = Some(base.join(p));
        }
        Ok(cfg)
    }

    pub fn run(&self, base: &Path) -> Result<String> {
        let cfg = self.scenario(base)?;
        let net = RoadNetwork::read(&cfg.net_file)?;
        let file = routing::read_route_files(&cfg.route_files)?;
        let (routes, dropped) = prepare_routes(&net, file, self.ignore_route_errors)?;
        let mut specs = Vec::new();
        let mut spec_dirs = Vec::new();
        for path in &cfg.additional_files {
            for spec in detectors::read_additional(path)? {
                spec_dirs.push(path.parent().map(Path::to_path_buf).unwrap_or_default());
                specs.push(spec);
            }
        }
        let mut sim_cfg = SimConfig::new(cfg.begin, cfg.end);
        sim_cfg.aggregation_period = self.aggregation_period;
        let out = mesosim::simulate(&net, &routes, &sim_cfg, &specs)?;
        if let Some(path) = &cfg.edgedata_output {
            xml::write_file(path, &mesosim::write_edgedata(&out.edge_aggregates, "edgedata"))?;
        }
        for (d, dir) in out.detectors.iter().zip(&spec_dirs) {
            xml::write_file(&dir.join(&d.spec.file), &mesosim::write_detector_output(&d.records))?;
        }
        let arrived = out.vehicles.iter().filter(|v| v.arrived.is_some()).count();
        Ok(format!(
            "{} vehicles, {} arrived, {} unfinished, {} dropped",
            out.vehicles.len(),
            arrived,
            out.unfinished().len(),
            dropped
        ))
    }
}

/// Routes trips at free flow and merges them with routed vehicles, sorted
/// by departure. With `lenient`, unroutable trips and broken routes are
/// dropped and counted.
pub fn prepare_routes(net: &RoadNetwork, file: RouteFile, lenient: bool) -> Result<(Vec<routing::Route>, usize)> {
    let outcome = routing::route_trips(
        net,
        &file.trips,
        &EdgeCosts::free_flow(net),
        Algorithm::Dijkstra,
        lenient,
    )?;
    let mut dropped = outcome.failures.len();
    let mut routes = Vec::with_capacity(file.routes.len() + outcome.routes.len());
    for r in file.routes {
        if lenient && routing::resolve_route(net, &r.edges).is_err() {
            dropped += 1;
        } else {
            routes.push(r);
        }
    }
    routes.extend(outcome.routes);
    routes.sort_by(|a, b| a.depart.total_cmp(&b.depart));
    Ok((routes, dropped))
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Step {
    Netgen(NetgenStep),
    Taz(TazStep),
    Trips(TripsStep),
    Od2trips(Od2TripsStep),
    Route2od(Route2OdStep),
    Route(RouteStep),
    Assign(AssignStep),
    PlaceDetectors(PlaceDetectorsStep),
    Config(ConfigStep),
    Simulate(SimulateStep),
}

impl Step {
    pub fn name(&self) -> &'static str {
        match self {
            Step::Netgen(_) => "netgen",
            Step::Taz(_) => "taz",
            Step::Trips(_) => "trips",
            Step::Od2trips(_) => "od2trips",
            Step::Route2od(_) => "route2od",
            Step::Route(_) => "route",
            Step::Assign(_) => "assign",
            Step::PlaceDetectors(_) => "place-detectors",
            Step::Config(_) => "config",
            Step::Simulate(_) => "simulate",
        }
    }

    pub fn run(&self, base: &Path) -> Result<String> {
        match self {
            Step::Netgen(s) => s.run(base),
            Step::Taz(s) => s.run(base),
            Step::Trips(s) => s.run(base),
            Step::Od2trips(s) => s.run(base),
            Step::Route2od(s) => s.run(base),
            Step::Route(s) => s.run(base),
            Step::Assign(s) => s.run(base),
            Step::PlaceDetectors(s) => s.run(base),
            Step::Config(s) => s.run(base),
            Step::Simulate(s) => s.run(base),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pipeline {
    #[serde(default)]
    pub step: Vec<Step>,
}

impl Pipeline {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config {
            line: e.span().map(|s| text[..s.start.min(text.len())].lines().count().max(1)),
            message: e.message().to_string(),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&xml::read_file(path)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub name: &'static str,
    pub summary: String,
}

/// Runs steps in order and stops at the first failure, naming the step.
pub fn run_pipeline(pipeline: &Pipeline, base: &Path) -> Result<Vec<StepReport>> {
    let mut reports = Vec::with_capacity(pipeline.step.len());
    for (index, step) in pipeline.step.iter().enumerate() {
        let summary = step.run(base).map_err(|e| Error::Step {
            index,
            name: step.name().to_string(),
            source: Box::new(e),
        })?;
        reports.push(StepReport {
            name: step.name(),
            summary,
        });
    }
    Ok(reports)
}
