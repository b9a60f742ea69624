use proptest::prelude::*;

use roadroute::apsp::{floyd_warshall, UNREACHABLE};
use roadroute::geo::{euclidean_chord, great_circle, GeoPoint};
use roadroute::graph::{load_graph, ResolvedView};
use roadroute::search::{dijkstra, RoutingContext};
use roadroute::stats::{one_way_anova, student_t_test};
use roadroute::synth::{generate_synthetic_city, SynthParams};
use roadroute::traffic::{distance_costs, sample_scenario, CostModel, TrafficRegime, TrafficScenario, TrafficWeight};
use roadroute::{NodeId, RoadGraph};

fn point() -> impl Strategy<Value = GeoPoint> {
    (-90.0..=90.0f64, -180.0..=180.0f64).prop_map(|(lat, lon)| GeoPoint::new(lat, lon).unwrap())
}

fn regime() -> impl Strategy<Value = TrafficRegime> {
    prop::sample::select(TrafficRegime::ALL.to_vec())
}

/// Small random digraph with integer-km edges and optional parallel edges.
fn small_graph() -> impl Strategy<Value = RoadGraph> {
    (2usize..9).prop_flat_map(|n| {
        prop::collection::vec((0..n as u64, 0..n as u64, 1u32..6, 0u32..2), 0..(n * 3)).prop_map(move |es| {
            let mut nodes = String::from("id,lat,lon\n");
            for i in 0..n {
                nodes.push_str(&format!("{i},44.0,{}\n", -76.0 + i as f64 * 1e-4));
            }
            let mut edges = String::from("u,v,key,length_m,road_types,maxspeed\n");
            let mut seen = std::collections::HashSet::new();
            for (u, v, km, key) in es {
                if u != v && seen.insert((u, v, key)) {
                    edges.push_str(&format!("{u},{v},{key},{},residential;primary,\n", km * 1000));
                }
            }
            let mut g = load_graph(nodes.as_bytes(), edges.as_bytes()).unwrap();
            g.impute_speeds().unwrap();
            g
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn heuristic_ordering(a in point(), b in point()) {
        let chord = euclidean_chord(a, b);
        let arc = great_circle(a, b);
        prop_assert!(chord >= 0.0);
        prop_assert!(chord <= arc);
        prop_assert_eq!(euclidean_chord(a, a), 0.0);
        prop_assert_eq!(great_circle(a, a), 0.0);
    }

    #[test]
    fn imputation_is_idempotent(seed in 0u64..1000) {
        let mut g = generate_synthetic_city(&SynthParams::new(4, 5, seed)).unwrap();
        g.impute_speeds().unwrap();
        let once = g.clone();
        g.impute_speeds().unwrap();
        prop_assert_eq!(once, g);
    }

    #[test]
    fn synthetic_edges_are_admissible(seed in 0u64..1000, detour in 1.0f64..2.0) {
        let p = SynthParams { detour_factor: detour, ..SynthParams::new(5, 6, seed) };
        let g = generate_synthetic_city(&p).unwrap();
        for e in g.edges() {
            let a = g.position(g.dense(e.from).unwrap());
            let b = g.position(g.dense(e.to).unwrap());
            prop_assert!(e.length_m >= great_circle(a, b));
        }
    }

    #[test]
    fn raising_one_weight_never_lowers_cost(
        g in small_graph(),
        r in regime(),
        seed in any::<u64>(),
        pick in any::<prop::sample::Index>(),
        model in prop::sample::select(vec![CostModel::V1, CostModel::V2]),
    ) {
        prop_assume!(g.edge_count() > 0);
        let base = sample_scenario(&g, r, seed);
        let e = pick.index(g.edge_count());
        let mut raised = base.clone();
        raised.set_weight(e, TrafficWeight::High);
        let n = g.node_count();
        let a = RoutingContext::new(&g, &base, model).unwrap();
        let b = RoutingContext::new(&g, &raised, model).unwrap();
        for s in 0..n {
            for d in 0..n {
                let (src, dst) = (g.node_id(s), g.node_id(d));
                match (dijkstra(&a, src, dst), dijkstra(&b, src, dst)) {
                    (Ok(x), Ok(y)) => prop_assert!(y.cost >= x.cost),
                    (Err(_), Err(_)) => {}
                    _ => prop_assert!(false, "reachability changed"),
                }
            }
        }
    }

    #[test]
    fn v1_cost_at_least_length(g in small_graph(), r in regime(), seed in any::<u64>()) {
        let sc = sample_scenario(&g, r, seed);
        let ctx = RoutingContext::new(&g, &sc, CostModel::V1).unwrap();
        for d in 0..g.node_count() {
            if let Ok(res) = dijkstra(&ctx, g.node_id(0), g.node_id(d)) {
                prop_assert!(res.cost >= res.length_km);
            }
        }
    }

    #[test]
    fn fw_matches_dijkstra_and_triangle(g in small_graph()) {
        let costs = distance_costs(&g);
        let view = ResolvedView::resolve(&g, &costs);
        let t = floyd_warshall(&g, &view, &costs);
        let ones = TrafficScenario::uniform(&g, TrafficWeight::Low);
        let ctx = RoutingContext::new(&g, &ones, CostModel::V1).unwrap();
        let n = g.node_count();
        for i in 0..n {
            prop_assert_eq!(t.distance(i, i), 0.0);
            for j in 0..n {
                match dijkstra(&ctx, NodeId(i as u64), NodeId(j as u64)) {
                    Ok(r) => prop_assert!((r.cost - t.distance(i, j)).abs() <= 1e-9),
                    Err(_) => prop_assert_eq!(t.distance(i, j), UNREACHABLE),
                }
                for k in 0..n {
                    let (ik, kj) = (t.distance(i, k), t.distance(k, j));
                    if ik != UNREACHABLE && kj != UNREACHABLE {
                        prop_assert!(t.distance(i, j) <= ik + kj + 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn scenario_csv_round_trip(g in small_graph(), r in regime(), seed in any::<u64>()) {
        let sc = sample_scenario(&g, r, seed);
        let mut buf = Vec::new();
        sc.write_csv(&g, &mut buf).unwrap();
        let back = TrafficScenario::read_csv(&g, buf.as_slice()).unwrap();
        prop_assert_eq!(back.weights(), sc.weights());
    }

    #[test]
    fn graph_csv_round_trip(seed in 0u64..500) {
        let g = generate_synthetic_city(&SynthParams::new(3, 4, seed)).unwrap();
        let (mut n, mut e) = (Vec::new(), Vec::new());
        g.write_csv(&mut n, &mut e).unwrap();
        let back = load_graph(n.as_slice(), e.as_slice()).unwrap();
        prop_assert_eq!(back.content_hash(), g.content_hash());
        prop_assert_eq!(back, g);
    }

    #[test]
    fn two_group_anova_is_t_squared(
        a in prop::collection::vec(-100.0..100.0f64, 2..20),
        b in prop::collection::vec(-100.0..100.0f64, 2..20),
    ) {
        let f = one_way_anova(&[a.clone(), b.clone()]).unwrap();
        let t = student_t_test(&a, &b).unwrap();
        prop_assume!(!f.degenerate && !t.degenerate);
        let t2 = t.statistic * t.statistic;
        prop_assert!((f.statistic - t2).abs() <= 1e-9 * t2.max(1.0));
        prop_assert!((f.p_value - t.p_value).abs() <= 1e-9);
    }
}
