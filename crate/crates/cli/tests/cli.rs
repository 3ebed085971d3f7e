use std::path::Path;
use std::process::{Command, Output};

use trafficforge::demand::{generate_trips, write_trips, ArrivalModel, TripParams};
use trafficforge::detectors::read_additional;
use trafficforge::netgraph::{generate_grid, GeneratorOptions};
use trafficforge::odmatrix::read_od_file;
use trafficforge::pipeline::load_config;
use trafficforge::routing::{read_route_files, resolve_route};
use trafficforge::{RoadNetwork, TazSet};

/// Runs the binary in `dir`; `args` is split on whitespace.
fn tf(dir: &Path, args: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trafficforge"))
        .current_dir(dir)
        .args(args.split_whitespace())
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &str) -> String {
    let out = tf(dir, args);
    assert!(
        out.status.success(),
        "`{args}` failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn grid_generator_counts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, "netgen --grid --grid.number 10 --grid.length 400 -o grid.net.xml");
    let net = RoadNetwork::read(&d.join("grid.net.xml")).unwrap();
    assert_eq!((net.junctions().len(), net.edges().len()), (100, 360));
    ok(d, "netgen --spider --spider.omit-center -o spider.net.xml");
    let net = RoadNetwork::read(&d.join("spider.net.xml")).unwrap();
    assert_eq!(net.junctions().len(), 260);
}

#[test]
fn trips_match_library_output() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, "netgen --grid -L 2 -o g.net.xml");
    ok(d, "trips -n g.net.xml -o t.rou.xml -e 900 -p 2.5 --seed 11");
    let opts = GeneratorOptions {
        lanes: 2,
        ..GeneratorOptions::default()
    };
    let net = generate_grid(5, 100.0, &opts).unwrap();
    assert_eq!(read(d, "g.net.xml"), net.to_xml());
    let mut params = TripParams::new(0.0, 900.0, ArrivalModel::period(2.5));
    params.seed = 11;
    let expected = write_trips(&generate_trips(&net, &params).unwrap());
    assert_eq!(read(d, "t.rou.xml"), expected);
}

#[test]
fn step_by_step_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        "netgen --rand --rand.iterations 60 -j traffic_light --seed 3 -o r.net.xml",
    );
    ok(
        d,
        "taz -n r.net.xml -o taz.xml --grid-size 400 --polygons-output poly.xml",
    );
    ok(d, "trips -n r.net.xml -o trips.rou.xml -e 600 --binomial 4 --validate");
    ok(d, "route2od -r trips.rou.xml -a taz.xml -o m.od -e 600");
    let od = read_od_file(&d.join("m.od")).unwrap();
    assert_eq!(od.len(), 1);
    ok(d, "od2trips -n taz.xml -d m.od -o od.rou.xml --seed 4");
    let od_trips = read_route_files(&[d.join("od.rou.xml")]).unwrap().trips;
    assert_eq!(od_trips.len() as f64, od[0].mass());

    ok(
        d,
        "route -n r.net.xml -r trips.rou.xml -o routed.rou.xml --ignore-errors",
    );
    ok(d, "assign -n r.net.xml -t trips.rou.xml -o dua.rou.xml -l 1");
    assert_eq!(read(d, "routed.rou.xml"), read(d, "dua.rou.xml"));

    ok(d, "place-detectors -n r.net.xml -t taz.xml -o det.add.xml -p 1.0");
    let taz = TazSet::read(&d.join("taz.xml")).unwrap();
    let dets = read_additional(&d.join("det.add.xml")).unwrap();
    assert!(dets.len() <= taz.len() && !dets.is_empty());

    ok(
        d,
        "config -o s.sumocfg -n r.net.xml -r routed.rou.xml -a det.add.xml -e 900 --edgedata-output ed.xml",
    );
    assert_eq!(load_config(&d.join("s.sumocfg")).unwrap().end, 900.0);
    let summary = ok(d, "simulate -c s.sumocfg");
    assert!(summary.contains("vehicles"), "{summary}");
    assert!(read(d, "ed.xml").contains("<meandata"));
    for det in &dets {
        assert!(read(d, &det.file).contains("<detector"), "{}", det.file);
    }

    let net = RoadNetwork::read(&d.join("r.net.xml")).unwrap();
    let routes = read_route_files(&[d.join("routed.rou.xml")]).unwrap().routes;
    for r in &routes {
        resolve_route(&net, &r.edges).unwrap();
    }
}

#[test]
fn assignment_writes_log_and_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, "netgen --grid --grid.number 4 -o g.net.xml");
    ok(d, "trips -n g.net.xml -o t.rou.xml -e 300");
    ok(
        d,
        "assign -n g.net.xml -t t.rou.xml -o a.rou.xml -l 3 --route-choice-method logit --log conv.csv --dump-dir iters",
    );
    let log = read(d, "conv.csv");
    assert_eq!(log.lines().count(), 4, "{log}");
    assert!(log.starts_with("iteration,mean_travel_time_s"));
    for i in 0..3 {
        assert!(d.join(format!("iters/iteration_{i:03}.rou.xml")).exists());
    }
}

#[test]
fn pipelines_run_from_their_directory() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    for name in ["example1.toml", "example4.toml"] {
        let dir = tempfile::tempdir().unwrap();
        std::fs::copy(root.join(name), dir.path().join(name)).unwrap();
        let elsewhere = tempfile::tempdir().unwrap();
        let path = dir.path().join(name);
        let out = ok(elsewhere.path(), &format!("run {}", path.display()));
        assert!(out.lines().count() >= 5, "{out}");
        assert!(std::fs::read_dir(elsewhere.path()).unwrap().next().is_none());
    }
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = tf(d, "route -n missing.net.xml -r x.rou.xml -o y.xml");
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    assert!(!tf(d, "netgen -o x.net.xml").status.success());
    std::fs::write(d.join("bad.toml"), "[[step]]\nkind = \"teleport\"\n").unwrap();
    assert!(!tf(d, "run bad.toml").status.success());
}
