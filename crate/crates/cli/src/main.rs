//! `trafficforge`: scenario generation, routing, assignment and simulation
//! from the command line. Flag names follow the SUMO tools where one exists.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use trafficforge::pipeline::{
    self, AssignStep, ConfigStep, GridSpec, NetgenStep, Od2TripsStep, PlaceDetectorsStep, RandSpec, Route2OdStep,
    RouteStep, SimulateStep, SpiderSpec, TazStep, TripsStep,
};
use trafficforge::Pipeline;

#[derive(Parser)]
#[command(
    name = "trafficforge",
    version,
    about = "Synthetic traffic scenarios: networks, demand, routing, assignment, simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a grid, spider or random network
    Netgen(NetgenArgs),
    /// Build traffic assignment zones from polygons or a square grid
    Taz(TazArgs),
    /// Generate random trips
    Trips(TripsArgs),
    /// Turn OD matrices into trips
    Od2trips(Od2TripsArgs),
    /// Aggregate routes or trips into OD matrices
    Route2od(Route2OdArgs),
    /// Shortest-path routing of trips at free-flow cost
    Route(RouteArgs),
    /// Iterative dynamic user assignment
    Assign(AssignArgs),
    /// Place lane-area detectors at random, one trial per zone
    PlaceDetectors(PlaceDetectorsArgs),
    /// Write a simulation configuration file
    Config(ConfigArgs),
    /// Run the mesoscopic simulation
    Simulate(SimulateArgs),
    /// Run a TOML pipeline; paths resolve against the pipeline's directory
    Run(RunArgs),
}

#[derive(Args)]
struct NetgenArgs {
    #[arg(short = 'o', long = "output-file")]
    output: PathBuf,
    #[arg(long, group = "kind")]
    grid: bool,
    #[arg(long = "grid.number", default_value_t = 5)]
    grid_number: usize,
    #[arg(long = "grid.length", default_value_t = 100.0)]
    grid_length: f64,
    #[arg(long, group = "kind")]
    spider: bool,
    #[arg(long = "spider.arm-number", default_value_t = 13)]
    spider_arms: usize,
    #[arg(long = "spider.circle-number", default_value_t = 20)]
    spider_circles: usize,
    #[arg(long = "spider.space-radius", default_value_t = 100.0)]
    spider_radius: f64,
    #[arg(long = "spider.omit-center")]
    spider_omit_center: bool,
    #[arg(long, group = "kind")]
    rand: bool,
    #[arg(long = "rand.iterations", default_value_t = 100)]
    rand_iterations: usize,
    #[arg(long = "rand.grid")]
    rand_grid: bool,
    /// priority, traffic_light, right_before_left, ...
    #[arg(short = 'j', long = "default-junction-type")]
    junction_type: Option<String>,
    #[arg(short = 'L', long = "default.lanenumber")]
    lanes: Option<u32>,
    #[arg(short = 'S', long = "default.speed")]
    speed: Option<f64>,
    #[command(flatten)]
    seed: SeedArgs,
}

#[derive(Args)]
struct SeedArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Seed from the clock instead of --seed
    #[arg(long)]
    random: bool,
}

#[derive(Args)]
struct TazArgs {
    #[arg(short = 'n', long = "net-file")]
    net: PathBuf,
    #[arg(short = 'o', long = "output")]
    output: PathBuf,
    /// Polygon file; each polygon becomes one zone
    #[arg(long, conflicts_with = "grid_size")]
    polygons: Option<PathBuf>,
    /// Side of the square cells covering the network
    #[arg(long = "grid-size")]
    grid_size: Option<f64>,
    /// Also write the generated grid polygons
    #[arg(long = "polygons-output")]
    polygons_output: Option<PathBuf>,
}

#[derive(Args)]
struct TripsArgs {
    #[arg(short = 'n', long = "net-file")]
    net: PathBuf,
    #[arg(short = 'o', long = "output-trip-file", default_value = "trips.trips.xml")]
    output: PathBuf,
    #[arg(short = 'b', long, default_value_t = 0.0)]
    begin: f64,
    #[arg(short = 'e', long, default_value_t = 3600.0)]
    end: f64,
    /// One or more periods, applied to equal sub-windows
    #[arg(short = 'p', long, num_args = 1.., value_delimiter = ',')]
    period: Vec<f64>,
    #[arg(long = "insertion-rate")]
    insertion_rate: Option<f64>,
    #[arg(long = "insertion-density")]
    insertion_density: Option<f64>,
    #[arg(long)]
    binomial: Option<u64>,
    #[arg(long = "random-depart")]
    random_depart: bool,
    /// Only keep trips that have a route
    #[arg(long)]
    validate: bool,
    /// Reads <prefix>.src.xml, <prefix>.dst.xml and <prefix>.via.xml
    #[arg(long = "weights-prefix")]
    weights_prefix: Option<PathBuf>,
    #[arg(long, default_value = "")]
    prefix: String,
    #[command(flatten)]
    seed: SeedArgs,
}

#[derive(Args)]
struct Od2TripsArgs {
    #[arg(short = 'n', long = "taz-files")]
    taz: PathBuf,
    #[arg(short = 'd', long = "od-matrix-files", required = true, num_args = 1.., value_delimiter = ',')]
    od: Vec<PathBuf>,
    #[arg(short = 'o', long = "output-file")]
    output: PathBuf,
    #[arg(long, default_value = "")]
    prefix: String,
    #[arg(long)]
    vtype: Option<String>,
    #[arg(short = 'b', long)]
    begin: Option<f64>,
    #[arg(short = 'e', long)]
    end: Option<f64>,
    #[command(flatten)]
    seed: SeedArgs,
}

#[derive(Args)]
struct Route2OdArgs {
    #[arg(short = 'r', long = "route-files", required = true, num_args = 1.., value_delimiter = ',')]
    routes: Vec<PathBuf>,
    #[arg(short = 'a', long = "taz-files")]
    taz: PathBuf,
    /// `.od` writes the O-format, anything else tazRelation XML
    #[arg(short = 'o', long = "output-file")]
    output: PathBuf,
    /// Number of equal sub-windows
    #[arg(short = 'i', long)]
    intervals: Option<usize>,
    #[arg(short = 'b', long, default_value_t = 0.0)]
    begin: f64,
    #[arg(short = 'e', long, default_value_t = 3600.0)]
    end: f64,
}

#[derive(Args)]
struct RouteArgs {
    #[arg(short = 'n', long = "net-file")]
    net: PathBuf,
    #[arg(short = 'r', long = "route-files", required = true, num_args = 1.., value_delimiter = ',')]
    routes: Vec<PathBuf>,
    #[arg(short = 'o', long = "output-file")]
    output: PathBuf,
    #[arg(long = "ignore-errors")]
    ignore_errors: bool,
    /// dijkstra or astar
    #[arg(long = "routing-algorithm")]
    algorithm: Option<String>,
}

#[derive(Args)]
struct AssignArgs {
    #[arg(short = 'n', long = "net-file")]
    net: PathBuf,
    #[arg(short = 't', long = "trips", required = true, num_args = 1.., value_delimiter = ',')]
    trips: Vec<PathBuf>,
    #[arg(short = 'o', long = "output-file")]
    output: PathBuf,
    #[arg(short = 'l', long = "last-step", default_value_t = 10)]
    iterations: usize,
    /// gawron or logit
    #[arg(long = "route-choice-method")]
    method: Option<String>,
    #[arg(long = "logit.theta")]
    theta: Option<f64>,
    #[arg(long = "gawron.a")]
    alpha: Option<f64>,
    #[arg(long = "gawron.beta")]
    beta: Option<f64>,
    #[arg(long = "max-alternatives", default_value_t = 5)]
    max_alternatives: usize,
    #[arg(long = "routing-algorithm")]
    algorithm: Option<String>,
    #[arg(long = "ignore-errors")]
    ignore_errors: bool,
    #[arg(short = 'b', long)]
    begin: Option<f64>,
    #[arg(short = 'e', long)]
    end: Option<f64>,
    /// CSV of mean travel time per iteration
    #[arg(long)]
    log: Option<PathBuf>,
    /// Write each iteration's routes here
    #[arg(long = "dump-dir")]
    dump_dir: Option<PathBuf>,
    #[command(flatten)]
    seed: SeedArgs,
}

#[derive(Args)]
struct PlaceDetectorsArgs {
    #[arg(short = 'n', long = "net-file")]
    net: PathBuf,
    #[arg(short = 't', long = "taz-file")]
    taz: PathBuf,
    #[arg(short = 'o', long = "output-file")]
    output: PathBuf,
    #[arg(short = 'p', long)]
    probability: f64,
    /// lanes or weight
    #[arg(long)]
    strategy: Option<String>,
    /// edgedata file for the weight strategy
    #[arg(long)]
    edgedata: Option<PathBuf>,
    #[arg(long = "weight-attr")]
    weight_attr: Option<String>,
    #[arg(long)]
    period: Option<f64>,
    #[command(flatten)]
    seed: SeedArgs,
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(short = 'o', long = "output-file")]
    output: PathBuf,
    #[arg(short = 'n', long = "net-file")]
    net: PathBuf,
    #[arg(short = 'r', long = "route-files", num_args = 1.., value_delimiter = ',')]
    routes: Vec<PathBuf>,
    #[arg(short = 'a', long = "additional-files", num_args = 1.., value_delimiter = ',')]
    additional: Vec<PathBuf>,
    #[arg(short = 'b', long, default_value_t = 0.0)]
    begin: f64,
    #[arg(short = 'e', long, default_value_t = 3600.0)]
    end: f64,
    #[arg(long = "edgedata-output")]
    edgedata_output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(short = 'c', long = "configuration-file")]
    config: Option<PathBuf>,
    #[arg(short = 'n', long = "net-file")]
    net: Option<PathBuf>,
    #[arg(short = 'r', long = "route-files", num_args = 1.., value_delimiter = ',')]
    routes: Vec<PathBuf>,
    #[arg(short = 'a', long = "additional-files", num_args = 1.., value_delimiter = ',')]
    additional: Vec<PathBuf>,
    #[arg(short = 'b', long)]
    begin: Option<f64>,
    #[arg(short = 'e', long)]
    end: Option<f64>,
    #[arg(long = "edgedata-output")]
    edgedata_output: Option<PathBuf>,
    #[arg(long = "ignore-route-errors")]
    ignore_route_errors: bool,
    /// Edgedata interval length; one interval when unset
    #[arg(long = "aggregation-period")]
    aggregation_period: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    pipeline: PathBuf,
    /// Resolve paths against this directory instead
    #[arg(long = "base-dir")]
    base_dir: Option<PathBuf>,
}

fn netgen(a: NetgenArgs) -> NetgenStep {
    NetgenStep {
        output: a.output,
        grid: a.grid.then_some(GridSpec {
            number: a.grid_number,
            length: a.grid_length,
        }),
        spider: a.spider.then_some(SpiderSpec {
            arms: a.spider_arms,
            circles: a.spider_circles,
            radius: a.spider_radius,
            omit_center: a.spider_omit_center,
        }),
        rand: a.rand.then_some(RandSpec {
            iterations: a.rand_iterations,
            grid: a.rand_grid,
        }),
        junction_type: a.junction_type,
        lanes: a.lanes,
        speed: a.speed,
        seed: a.seed.seed,
        random: a.seed.random,
    }
}

fn execute(command: Command, cwd: &Path) -> anyhow::Result<String> {
    let summary = match command {
        Command::Netgen(a) => {
            if !(a.grid || a.spider || a.rand) {
                bail!("choose one of --grid, --spider or --rand");
            }
            netgen(a).run(cwd)?
        }
        Command::Taz(a) => TazStep {
            net: a.net,
            output: a.output,
            polygons: a.polygons,
            grid_size: a.grid_size,
            polygons_output: a.polygons_output,
        }
        .run(cwd)?,
        Command::Trips(a) => TripsStep {
            net: a.net,
            output: a.output,
            begin: a.begin,
            end: a.end,
            period: a.period,
            insertion_rate: a.insertion_rate,
            insertion_density: a.insertion_density,
            binomial: a.binomial,
            random_depart: a.random_depart,
            validate: a.validate,
            weights_prefix: a.weights_prefix,
            prefix: a.prefix,
            seed: a.seed.seed,
            random: a.seed.random,
        }
        .run(cwd)?,
        Command::Od2trips(a) => Od2TripsStep {
            taz: a.taz,
            od: a.od,
            output: a.output,
            prefix: a.prefix,
            vtype: a.vtype,
            begin: a.begin,
            end: a.end,
            seed: a.seed.seed,
            random: a.seed.random,
        }
        .run(cwd)?,
        Command::Route2od(a) => Route2OdStep {
            routes: a.routes,
            taz: a.taz,
            output: a.output,
            intervals: a.intervals,
            begin: a.begin,
            end: a.end,
        }
        .run(cwd)?,
        Command::Route(a) => RouteStep {
            net: a.net,
            routes: a.routes,
            output: a.output,
            ignore_errors: a.ignore_errors,
            algorithm: a.algorithm,
        }
        .run(cwd)?,
        Command::Assign(a) => AssignStep {
            net: a.net,
            trips: a.trips,
            output: a.output,
            iterations: a.iterations,
            method: a.method,
            theta: a.theta,
            alpha: a.alpha,
            beta: a.beta,
            max_alternatives: a.max_alternatives,
            seed: a.seed.seed,
            random: a.seed.random,
            algorithm: a.algorithm,
            ignore_errors: a.ignore_errors,
            begin: a.begin,
            end: a.end,
            log: a.log,
            dump_dir: a.dump_dir,
        }
        .run(cwd)?,
        Command::PlaceDetectors(a) => PlaceDetectorsStep {
            net: a.net,
            taz: a.taz,
            output: a.output,
            probability: a.probability,
            strategy: a.strategy,
            edgedata: a.edgedata,
            weight_attr: a.weight_attr,
            period: a.period,
            seed: a.seed.seed,
            random: a.seed.random,
        }
        .run(cwd)?,
        Command::Config(a) => ConfigStep {
            output: a.output,
            net: a.net,
            routes: a.routes,
            additional: a.additional,
            begin: a.begin,
            end: a.end,
            edgedata_output: a.edgedata_output,
        }
        .run(cwd)?,
        Command::Simulate(a) => SimulateStep {
            config: a.config,
            net: a.net,
            routes: a.routes,
            additional: a.additional,
            begin: a.begin,
            end: a.end,
            edgedata_output: a.edgedata_output,
            ignore_route_errors: a.ignore_route_errors,
            aggregation_period: a.aggregation_period,
        }
        .run(cwd)?,
        Command::Run(a) => {
            let pipeline = Pipeline::read(&a.pipeline).with_context(|| format!("reading {}", a.pipeline.display()))?;
            let base = match a.base_dir {
                Some(dir) => dir,
                None => a
                    .pipeline
                    .parent()
                    .map(Path::to_path_buf)
                    .unwrap_or_else(|| cwd.to_path_buf()),
            };
            let reports = pipeline::run_pipeline(&pipeline, &base)?;
            reports
                .iter()
                .enumerate()
                .map(|(i, r)| format!("[{}] {}: {}", i + 1, r.name, r.summary))
                .collect::<Vec<_>>()
                .join("\n")
        }
    };
    Ok(summary)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = std::env::current_dir()
        .context("cannot determine the working directory")
        .and_then(|cwd| execute(cli.command, &cwd));
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
