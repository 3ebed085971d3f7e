use proptest::prelude::*;

use trafficforge::assignment::{gawron_update, logit_probabilities, GawronParams, LogitParams, RouteChoiceSet};
use trafficforge::demand::{generate_trips, Arrival, ArrivalModel, TripParams};
use trafficforge::detectors::DetectorSpec;
use trafficforge::mesosim::{simulate, SimConfig};
use trafficforge::netgraph::{generate_grid, Edge, GeneratorOptions, Junction, JunctionControl, RoadNetwork};
use trafficforge::odmatrix::{parse_o_format, write_o_format, ODMatrix, TimeWindow};
use trafficforge::routing::{a_star, dijkstra, resolve_route, EdgeCosts, Route};

fn chain(n: usize, lanes: u32) -> RoadNetwork {
    let junctions = (0..=n)
        .map(|i| Junction {
            id: format!("j{i}"),
            x: i as f64 * 100.0,
            y: 0.0,
            control: JunctionControl::Priority,
        })
        .collect();
    let edges = (0..n)
        .map(|i| Edge {
            id: format!("c{i}"),
            from: format!("j{i}"),
            to: format!("j{}", i + 1),
            length: 100.0,
            lane_count: lanes,
            speed_limit: 10.0,
        })
        .collect();
    RoadNetwork::new(junctions, edges).unwrap()
}

fn chain_routes(spec: &[(u32, usize)]) -> Vec<Route> {
    spec.iter()
        .enumerate()
        .map(|(i, &(depart, len))| Route {
            trip_id: format!("v{i}"),
            depart: depart as f64,
            edges: (0..len).map(|k| format!("c{k}")).collect(),
        })
        .collect()
}

fn grid_routes(net: &RoadNetwork, pairs: &[(usize, usize, u32)]) -> Vec<Route> {
    let costs = EdgeCosts::free_flow(net);
    let m = net.edges().len();
    pairs
        .iter()
        .enumerate()
        .filter_map(|(i, &(a, b, depart))| {
            let (from, to) = (&net.edge(a % m).id, &net.edge(b % m).id);
            let path = dijkstra(net, from, to, &costs).ok()?;
            Some(Route {
                trip_id: i.to_string(),
                depart: depart as f64,
                edges: path.edge_ids(net),
            })
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn logit_is_a_distribution(costs in prop::collection::vec(0.0f64..2000.0, 1..10), theta in -2.0f64..-0.001) {
        let p = logit_probabilities(&costs, &LogitParams { theta }).unwrap();
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn logit_translation_invariant(costs in prop::collection::vec(0.0f64..500.0, 1..10), shift in -100.0f64..100.0) {
        let params = LogitParams::default();
        let a = logit_probabilities(&costs, &params).unwrap();
        let shifted: Vec<f64> = costs.iter().map(|c| c + shift).collect();
        let b = logit_probabilities(&shifted, &params).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn logit_prefers_cheapest(costs in prop::collection::vec(0.0f64..500.0, 2..10)) {
        let p = logit_probabilities(&costs, &LogitParams::default()).unwrap();
        let cheapest = costs.iter().copied().fold(f64::INFINITY, f64::min);
        let best = p.iter().copied().fold(0.0, f64::max);
        for (c, q) in costs.iter().zip(&p) {
            if *c == cheapest {
                prop_assert_eq!(*q, best);
            }
        }
    }

    #[test]
    fn gawron_keeps_a_distribution(
        raw in prop::collection::vec((0.01f64..1.0, 1.0f64..500.0, 1.0f64..500.0), 1..8),
        chosen_seed in 0usize..100,
        measured in 0.0f64..800.0,
        alpha in 0.01f64..=1.0,
        beta in 0.01f64..=1.0,
    ) {
        let total: f64 = raw.iter().map(|r| r.0).sum();
        let n = raw.len();
        let cs = RouteChoiceSet {
            driver_id: "d".into(),
            alternatives: vec![Route { trip_id: "d".into(), depart: 0.0, edges: vec!["e".into()] }; n],
            probabilities: raw.iter().map(|r| r.0 / total).collect(),
            costs: raw.iter().map(|r| r.1).collect(),
        };
        let fresh: Vec<f64> = raw.iter().map(|r| r.2).collect();
        let out = gawron_update(&cs, chosen_seed % n, measured, &fresh, &GawronParams { alpha, beta }).unwrap();
        prop_assert!(out.probabilities.iter().all(|&p| (0.0..=1.0).contains(&p)));
        prop_assert!((out.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn gawron_moves_mass_toward_cheaper(
        p0 in 0.05f64..0.95,
        old_cost in 10.0f64..500.0,
        measured in 10.0f64..500.0,
        other in 10.0f64..500.0,
    ) {
        let cs = RouteChoiceSet {
            driver_id: "d".into(),
            alternatives: vec![Route { trip_id: "d".into(), depart: 0.0, edges: vec!["e".into()] }; 2],
            probabilities: vec![p0, 1.0 - p0],
            costs: vec![old_cost, other],
        };
        let params = GawronParams::default();
        let out = gawron_update(&cs, 0, measured, &[0.0, other], &params).unwrap();
        let smoothed = params.beta * measured + (1.0 - params.beta) * old_cost;
        prop_assert!((out.costs[0] - smoothed).abs() < 1e-9);
        if smoothed < other {
            prop_assert!(out.probabilities[0] >= p0 - 1e-12);
        } else if smoothed > other {
            prop_assert!(out.probabilities[0] <= p0 + 1e-12);
        }
    }

    #[test]
    fn simulation_conserves_and_respects_free_flow(
        pairs in prop::collection::vec((0usize..100, 0usize..100, 0u32..200), 1..60),
        lanes in 1u32..3,
    ) {
        let opts = GeneratorOptions { lanes, ..GeneratorOptions::default() };
        let net = generate_grid(3, 100.0, &opts).unwrap();
        let routes = grid_routes(&net, &pairs);
        let cfg = SimConfig::new(0.0, 600.0);
        let out = simulate(&net, &routes, &cfg, &[]).unwrap();
        for s in &out.steps {
            prop_assert_eq!(s.departed, s.arrived + s.running + s.queued);
        }
        for v in &out.vehicles {
            for &(e, entry, exit) in &v.traversals {
                prop_assert!(exit - entry >= net.free_flow_time(e) - 1e-9);
            }
        }
        let again = simulate(&net, &routes, &cfg, &[]).unwrap();
        prop_assert_eq!(out, again);
    }

    #[test]
    fn extra_vehicle_never_speeds_anyone_up(
        spec in prop::collection::vec((0u32..60, 1usize..5), 1..25),
        extra in (0u32..60, 1usize..5),
        lanes in 1u32..3,
    ) {
        let net = chain(4, lanes);
        let cfg = SimConfig::new(0.0, 400.0);
        let base = simulate(&net, &chain_routes(&spec), &cfg, &[]).unwrap();
        let mut more = spec.clone();
        more.push(extra);
        let loaded = simulate(&net, &chain_routes(&more), &cfg, &[]).unwrap();
        for (a, b) in base.vehicles.iter().zip(&loaded.vehicles) {
            let a = a.arrived.unwrap_or(f64::INFINITY);
            let b = b.arrived.unwrap_or(f64::INFINITY);
            prop_assert!(b >= a, "arrival moved from {} to {}", a, b);
        }
    }

    #[test]
    fn detector_occupancy_bounded(
        departs in prop::collection::vec(0u32..120, 1..80),
        pos in 0.0f64..90.0,
        len_frac in 0.05f64..1.0,
        period in 1u32..50,
        lane in 0u32..2,
    ) {
        let net = chain(2, 2);
        let routes = chain_routes(&departs.iter().map(|&d| (d, 2)).collect::<Vec<_>>());
        let length = (100.0 - pos) * len_frac;
        let spec = DetectorSpec {
            id: "d".into(),
            edge: "c1".into(),
            lane,
            pos,
            length,
            period: period as f64,
            file: "d.xml".into(),
        };
        let out = simulate(&net, &routes, &SimConfig::new(0.0, 300.0), &[spec]).unwrap();
        let records = &out.detectors[0].records;
        prop_assert_eq!(records.first().map(|r| r.begin), Some(0.0));
        prop_assert_eq!(records.last().map(|r| r.end), Some(300.0));
        for w in records.windows(2) {
            prop_assert_eq!(w[0].end, w[1].begin);
        }
        for r in records {
            prop_assert!(0.0 <= r.mean_occupancy);
            prop_assert!(r.mean_occupancy <= r.max_occupancy + 1e-9);
            prop_assert!(r.max_occupancy <= 100.0);
            prop_assert!(r.max_vehicle_number <= r.n_veh_seen);
        }
    }

    #[test]
    fn o_format_round_trip(
        cells in prop::collection::btree_map((1u32..20, 1u32..20), 0u32..100_000, 0..30),
        begin_min in 0u32..1000,
        span_min in 1u32..600,
        factor_cents in 1u32..500,
    ) {
        let window = TimeWindow::new(begin_min as f64 * 60.0, (begin_min + span_min) as f64 * 60.0).unwrap();
        let mut m = ODMatrix::new(window);
        m.factor = factor_cents as f64 / 100.0;
        for ((o, d), v) in cells {
            m.cells.insert((o.to_string(), d.to_string()), v as f64 / 100.0);
        }
        let text = write_o_format(&m).unwrap();
        let back = parse_o_format(&text).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(write_o_format(&back).unwrap(), text);
    }

    #[test]
    fn routes_follow_successors(a in 0usize..1000, b in 0usize..1000) {
        let net = generate_grid(5, 100.0, &GeneratorOptions::default()).unwrap();
        let m = net.edges().len();
        let (from, to) = (&net.edge(a % m).id, &net.edge(b % m).id);
        let path = dijkstra(&net, from, to, &EdgeCosts::free_flow(&net)).unwrap();
        let idx = resolve_route(&net, &path.edge_ids(&net)).unwrap();
        prop_assert_eq!(idx.first(), Some(&(a % m)));
        prop_assert_eq!(idx.last(), Some(&(b % m)));
    }

    #[test]
    fn period_departures_ignore_seed(p in 0.5f64..50.0, end in 10u32..2000, s1 in any::<u64>(), s2 in any::<u64>()) {
        let net = generate_grid(3, 100.0, &GeneratorOptions::default()).unwrap();
        let gen = |seed| {
            let mut params = TripParams::new(0.0, end as f64, ArrivalModel::period(p));
            params.seed = seed;
            generate_trips(&net, &params).unwrap()
        };
        let (a, b) = (gen(s1), gen(s2));
        let mut expected = 0usize;
        while (expected as f64) * p < end as f64 {
            expected += 1;
        }
        prop_assert_eq!(a.len(), expected);
        let da: Vec<f64> = a.iter().map(|t| t.depart).collect();
        let db: Vec<f64> = b.iter().map(|t| t.depart).collect();
        prop_assert_eq!(da, db);
    }

    #[test]
    fn random_departures_sorted_in_window(p in 0.5f64..20.0, begin in 0u32..100, span in 10u32..1000, seed in any::<u64>()) {
        let net = generate_grid(3, 100.0, &GeneratorOptions::default()).unwrap();
        let model = ArrivalModel { arrival: Arrival::Period(vec![p]), random_depart: true };
        let (b, e) = (begin as f64, (begin + span) as f64);
        let mut params = TripParams::new(b, e, model);
        params.seed = seed;
        let trips = generate_trips(&net, &params).unwrap();
        prop_assert!(trips.windows(2).all(|w| w[0].depart <= w[1].depart));
        prop_assert!(trips.iter().all(|t| t.depart >= b && t.depart < e));
        prop_assert!(trips.iter().all(|t| t.from_edge != t.to_edge));
    }
}

#[test]
fn a_star_matches_dijkstra_on_grid() {
    let net = generate_grid(6, 100.0, &GeneratorOptions::default()).unwrap();
    let costs = EdgeCosts::free_flow(&net);
    for f in net.edges() {
        for t in net.edges() {
            let d = dijkstra(&net, &f.id, &t.id, &costs).unwrap();
            let a = a_star(&net, &f.id, &t.id, &costs).unwrap();
            assert!((d.cost - a.cost).abs() < 1e-9, "{} -> {}", f.id, t.id);
        }
    }
}
