//! Traffic scenarios, edge-cost models and path metrics.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{NodeId, ResolvedView, RoadGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TrafficWeight {
    Low = 1,
    Medium = 3,
    High = 5,
}

impl TrafficWeight {
    pub fn value(self) -> f64 {
        self as u8 as f64
    }

    pub fn from_value(v: u8) -> Option<Self> {
        match v {
            1 => Some(TrafficWeight::Low),
            3 => Some(TrafficWeight::Medium),
            5 => Some(TrafficWeight::High),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TrafficRegime {
    None,
    Light,
    Moderate,
    Heavy,
}

impl TrafficRegime {
    pub const ALL: [TrafficRegime; 4] = [
        TrafficRegime::None,
        TrafficRegime::Light,
        TrafficRegime::Moderate,
        TrafficRegime::Heavy,
    ];

    /// Probabilities of weights (1, 3, 5) as integer numerators over a
    /// common denominator, so sampling thresholds are exact.
    pub fn distribution(self) -> ([u64; 3], u64) {
        match self {
            TrafficRegime::None => ([1, 0, 0], 1),
            TrafficRegime::Light => ([7, 2, 1], 10),
            TrafficRegime::Moderate => ([1, 1, 1], 3),
            TrafficRegime::Heavy => ([2, 3, 5], 10),
        }
    }

    pub fn probabilities(self) -> [f64; 3] {
        let (num, den) = self.distribution();
        num.map(|k| k as f64 / den as f64)
    }

    pub fn name(self) -> &'static str {
        match self {
            TrafficRegime::None => "none",
            TrafficRegime::Light => "light",
            TrafficRegime::Moderate => "moderate",
            TrafficRegime::Heavy => "heavy",
        }
    }

    /// Maps a uniform 64-bit draw to a weight. The draw is scaled onto
    /// `[0, denominator)` with a widening multiply, then bucketed by the
    /// cumulative numerators.
    pub fn weight_for(self, draw: u64) -> TrafficWeight {
        let (num, den) = self.distribution();
        let bucket = ((draw as u128 * den as u128) >> 64) as u64;
        if bucket < num[0] {
            TrafficWeight::Low
        } else if bucket < num[0] + num[1] {
            TrafficWeight::Medium
        } else {
            TrafficWeight::High
        }
    }
}

impl fmt::Display for TrafficRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TrafficRegime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(TrafficRegime::None),
            "light" => Ok(TrafficRegime::Light),
            "moderate" => Ok(TrafficRegime::Moderate),
            "heavy" => Ok(TrafficRegime::Heavy),
            _ => Err(Error::Config(format!("unknown traffic regime `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CostModel {
    /// Traffic-weighted distance, km.
    #[default]
    V1,
    /// Traffic-weighted travel time at the speed limit, minutes.
    V2,
}

impl fmt::Display for CostModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CostModel::V1 => "v1",
            CostModel::V2 => "v2",
        })
    }
}

impl FromStr for CostModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "v1" => Ok(CostModel::V1),
            "v2" => Ok(CostModel::V2),
            _ => Err(Error::Config(format!("unknown cost model `{s}`"))),
        }
    }
}

pub fn edge_cost(model: CostModel, w: TrafficWeight, length_m: f64, speed_kmh: f64) -> Result<f64> {
    if !(length_m > 0.0 && length_m.is_finite()) {
        return Err(Error::Domain(format!("length must be positive, got {length_m}")));
    }
    let km = length_m / 1000.0;
    match model {
        CostModel::V1 => Ok(w.value() * km),
        CostModel::V2 => {
            if !(speed_kmh > 0.0 && speed_kmh.is_finite()) {
                return Err(Error::Domain(format!("speed must be positive, got {speed_kmh}")));
            }
            Ok(60.0 * w.value() * km / speed_kmh)
        }
    }
}

/// One traffic weight per graph edge, indexed by canonical edge index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrafficScenario {
    pub regime: Option<TrafficRegime>,
    pub seed: u64,
    weights: Vec<TrafficWeight>,
}

impl TrafficScenario {
    pub fn uniform(graph: &RoadGraph, w: TrafficWeight) -> Self {
        TrafficScenario {
            regime: None,
            seed: 0,
            weights: vec![w; graph.edge_count()],
        }
    }

    pub fn from_weights(weights: Vec<TrafficWeight>) -> Self {
        TrafficScenario {
            regime: None,
            seed: 0,
            weights,
        }
    }

    pub fn weight(&self, edge: usize) -> TrafficWeight {
        self.weights[edge]
    }

    pub fn weights(&self) -> &[TrafficWeight] {
        &self.weights
    }

    pub fn set_weight(&mut self, edge: usize, w: TrafficWeight) {
        self.weights[edge] = w;
    }

    pub fn write_csv<W: Write>(&self, graph: &RoadGraph, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let wrap = |e: csv::Error| Error::io("writing scenario", std::io::Error::other(e));
        w.write_record(["u", "v", "key", "weight"]).map_err(wrap)?;
        for (e, weight) in graph.edges().iter().zip(&self.weights) {
            w.write_record([
                e.from.to_string(),
                e.to.to_string(),
                e.key.to_string(),
                (*weight as u8).to_string(),
            ])
            .map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::io("writing scenario", e))
    }

    /// Reads a `u,v,key,weight` file; every graph edge must appear exactly once.
    pub fn read_csv<R: Read>(graph: &RoadGraph, src: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(src);
        let mut slots: Vec<Option<TrafficWeight>> = vec![None; graph.edge_count()];
        let lookup: std::collections::HashMap<(NodeId, NodeId, u32), usize> = graph
            .edges()
            .iter()
            .enumerate()
            .map(|(i, e)| ((e.from, e.to, e.key), i))
            .collect();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Parse {
                file: "scenario".into(),
                line: e.position().map_or(0, |p| p.line()),
                msg: e.to_string(),
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            let bad = |msg: String| Error::Parse {
                file: "scenario".into(),
                line,
                msg,
            };
            if rec.len() != 4 {
                return Err(bad(format!("expected 4 columns, found {}", rec.len())));
            }
            let num = |i: usize| -> Result<u64> {
                rec[i].trim().parse().map_err(|_| bad(format!("bad number `{}`", &rec[i])))
            };
            let key = (NodeId(num(0)?), NodeId(num(1)?), num(2)? as u32);
            let w = u8::try_from(num(3)?)
                .ok()
                .and_then(TrafficWeight::from_value)
                .ok_or_else(|| bad(format!("weight must be 1, 3 or 5, got `{}`", &rec[3])))?;
            let idx = *lookup
                .get(&key)
                .ok_or_else(|| bad(format!("edge ({}, {}, {}) not in graph", key.0, key.1, key.2)))?;
            if slots[idx].replace(w).is_some() {
                return Err(bad(format!("edge ({}, {}, {}) listed twice", key.0, key.1, key.2)));
            }
        }
        let weights = slots
            .into_iter()
            .enumerate()
            .map(|(i, w)| {
                w.ok_or_else(|| {
                    let e = graph.edge(i);
                    Error::Validation(format!("scenario misses edge ({}, {}, {})", e.from, e.to, e.key))
                })
            })
            .collect::<Result<_>>()?;
        Ok(TrafficScenario::from_weights(weights))
    }
}

/// Per-edge weights drawn independently from the regime. Edge `i` (canonical
/// order) uses the first output of ChaCha8 seeded with `seed` on stream `i`.
pub fn sample_scenario(graph: &RoadGraph, regime: TrafficRegime, seed: u64) -> TrafficScenario {
    TrafficScenario {
        regime: Some(regime),
        seed,
        weights: sample_weights(graph.edge_count(), regime, seed),
    }
}

pub fn sample_weights(count: usize, regime: TrafficRegime, seed: u64) -> Vec<TrafficWeight> {
    let base = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let mut rng = base.clone();
            rng.set_stream(i as u64);
            rng.set_word_pos(0);
            regime.weight_for(rng.next_u64())
        })
        .collect()
}

/// Per-edge costs under a scenario, indexed by graph edge index.
pub fn edge_costs(graph: &RoadGraph, scenario: &TrafficScenario, model: CostModel) -> Result<Vec<f64>> {
    graph
        .edges()
        .iter()
        .enumerate()
        .map(|(i, e)| edge_cost(model, scenario.weight(i), e.length_m, e.speed()?))
        .collect()
}

/// Pure distance costs in km.
pub fn distance_costs(graph: &RoadGraph) -> Vec<f64> {
    graph.edges().iter().map(|e| e.length_m / 1000.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PathMetrics {
    pub length_km: f64,
    pub cost_v1_km: f64,
    pub eta_min: f64,
}

impl PathMetrics {
    pub fn cost(&self, model: CostModel) -> f64 {
        match model {
            CostModel::V1 => self.cost_v1_km,
            CostModel::V2 => self.eta_min,
        }
    }
}

/// Metrics over a path of dense node indices.
pub fn path_metrics_dense(
    graph: &RoadGraph,
    view: &ResolvedView,
    scenario: &TrafficScenario,
    path: &[usize],
) -> Result<PathMetrics> {
    let mut m = PathMetrics::default();
    for w in path.windows(2) {
        let ei = view.edge_between(w[0], w[1]).ok_or(Error::InvalidPath {
            from: graph.node_id(w[0]),
            to: graph.node_id(w[1]),
        })?;
        let e = graph.edge(ei);
        let wt = scenario.weight(ei);
        let km = e.length_m / 1000.0;
        m.length_km += km;
        m.cost_v1_km += edge_cost(CostModel::V1, wt, e.length_m, 1.0)?;
        m.eta_min += edge_cost(CostModel::V2, wt, e.length_m, e.speed()?)?;
    }
    Ok(m)
}

pub fn path_metrics(
    graph: &RoadGraph,
    view: &ResolvedView,
    scenario: &TrafficScenario,
    path: &[NodeId],
) -> Result<PathMetrics> {
    let dense = path.iter().map(|id| graph.dense(*id)).collect::<Result<Vec<_>>>()?;
    path_metrics_dense(graph, view, scenario, &dense)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::load_graph;

    #[test]
    fn edge_cost_examples() {
        assert_eq!(edge_cost(CostModel::V1, TrafficWeight::Low, 2000.0, 50.0).unwrap(), 2.0);
        assert_eq!(edge_cost(CostModel::V1, TrafficWeight::High, 2000.0, 50.0).unwrap(), 10.0);
        assert_eq!(edge_cost(CostModel::V2, TrafficWeight::Medium, 2000.0, 80.0).unwrap(), 4.5);
        assert!(edge_cost(CostModel::V1, TrafficWeight::Low, 0.0, 50.0).is_err());
        assert!(edge_cost(CostModel::V2, TrafficWeight::Low, 10.0, 0.0).is_err());
    }

    #[test]
    fn weight_thresholds_are_exact() {
        // bucket boundaries for the 1/3 split
        let third = u64::MAX / 3;
        assert_eq!(TrafficRegime::Moderate.weight_for(0), TrafficWeight::Low);
        assert_eq!(TrafficRegime::Moderate.weight_for(third), TrafficWeight::Low);
        assert_eq!(TrafficRegime::Moderate.weight_for(third + 2), TrafficWeight::Medium);
        assert_eq!(TrafficRegime::Moderate.weight_for(u64::MAX), TrafficWeight::High);
        assert_eq!(TrafficRegime::None.weight_for(u64::MAX), TrafficWeight::Low);
        assert_eq!(TrafficRegime::Light.weight_for(u64::MAX), TrafficWeight::High);
        assert_eq!(TrafficRegime::Heavy.weight_for(0), TrafficWeight::Low);
    }

    #[test]
    fn light_frequencies_seed_7() {
        let w = sample_weights(100_000, TrafficRegime::Light, 7);
        let freq = |t| w.iter().filter(|x| **x == t).count() as f64 / w.len() as f64;
        let observed = [
            freq(TrafficWeight::Low),
            freq(TrafficWeight::Medium),
            freq(TrafficWeight::High),
        ];
        for (o, p) in observed.iter().zip(TrafficRegime::Light.probabilities()) {
            assert!((o - p).abs() <= 0.01, "{observed:?}");
        }
    }

    #[test]
    fn none_is_all_ones() {
        assert!(sample_weights(5000, TrafficRegime::None, 99)
            .iter()
            .all(|w| *w == TrafficWeight::Low));
    }

    fn two_edge_line() -> RoadGraph {
        let mut g = load_graph(
            "id,lat,lon\n0,44.0,-76.0\n1,44.01,-76.0\n2,44.03,-76.0\n".as_bytes(),
            "u,v,key,length_m,road_types,maxspeed\n0,1,0,1000,residential,\n1,2,0,2000,motorway,\n".as_bytes(),
        )
        .unwrap();
        g.impute_speeds().unwrap();
        g
    }

    #[test]
    fn metrics_hand_sum() {
        let g = two_edge_line();
        let s = TrafficScenario::from_weights(vec![TrafficWeight::Low, TrafficWeight::Medium]);
        let costs = edge_costs(&g, &s, CostModel::V1).unwrap();
        let view = ResolvedView::resolve(&g, &costs);
        let m = path_metrics(&g, &view, &s, &[NodeId(0), NodeId(1), NodeId(2)]).unwrap();
        assert!((m.length_km - 3.0).abs() < 1e-12);
        assert!((m.cost_v1_km - 7.0).abs() < 1e-12);
        assert!((m.eta_min - 4.8).abs() < 1e-12);

        let single = path_metrics(&g, &view, &s, &[NodeId(1)]).unwrap();
        assert_eq!(single, PathMetrics::default());

        let err = path_metrics(&g, &view, &s, &[NodeId(0), NodeId(2)]).unwrap_err();
        assert!(matches!(err, Error::InvalidPath { .. }));
    }

    #[test]
    fn scenario_csv_round_trip() {
        let g = two_edge_line();
        let s = sample_scenario(&g, TrafficRegime::Heavy, 3);
        let mut buf = Vec::new();
        s.write_csv(&g, &mut buf).unwrap();
        let back = TrafficScenario::read_csv(&g, buf.as_slice()).unwrap();
        assert_eq!(back.weights(), s.weights());

        let missing = "u,v,key,weight\n0,1,0,3\n";
        assert!(TrafficScenario::read_csv(&g, missing.as_bytes()).is_err());
        let bad = "u,v,key,weight\n0,1,0,2\n1,2,0,1\n";
        assert!(TrafficScenario::read_csv(&g, bad.as_bytes()).is_err());
    }
}
