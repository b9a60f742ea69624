//! Seeded synthetic grid cities used as stand-ins for real road networks.
//!
//! Every edge is at least as long as the great-circle distance between its
//! endpoints, so both spherical heuristics stay admissible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geo::{great_circle, GeoPoint};
use crate::graph::{NodeId, RoadEdge, RoadGraph};

/// Sub-stream of the master seed reserved for city generation.
pub const CITY_STREAM: u64 = 3;

const ROAD_TYPES: [&str; 15] = [
    "residential",
    "residential",
    "residential",
    "residential",
    "residential",
    "primary",
    "unclassified",
    "secondary",
    "tertiary",
    "motorway",
    "motorway_link",
    "secondary_link",
    "primary_link",
    "tertiary_link",
    "secondary",
];

const POSTED_SPEEDS: [f64; 5] = [40.0, 50.0, 60.0, 80.0, 100.0];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub rows: usize,
    pub cols: usize,
    pub seed: u64,
    /// Upper bound of the per-edge length multiplier over the great-circle distance.
    pub detour_factor: f64,
    pub one_way_prob: f64,
    /// Probability that a street is dropped entirely.
    pub removal_prob: f64,
    pub diagonal_prob: f64,
    pub parallel_prob: f64,
    pub maxspeed_prob: f64,
}

impl SynthParams {
    pub fn new(rows: usize, cols: usize, seed: u64) -> Self {
        SynthParams {
            rows,
            cols,
            seed,
            detour_factor: 1.3,
            one_way_prob: 0.1,
            removal_prob: 0.0,
            diagonal_prob: 0.05,
            parallel_prob: 0.03,
            maxspeed_prob: 0.2,
        }
    }
}

struct Builder<'a> {
    rng: ChaCha8Rng,
    pos: &'a [GeoPoint],
    detour: f64,
    edges: Vec<RoadEdge>,
}

impl Builder<'_> {
    fn street_attrs(&mut self, maxspeed_prob: f64) -> (Vec<String>, Vec<f64>) {
        let mut types = vec![ROAD_TYPES[self.rng.gen_range(0..ROAD_TYPES.len())].to_string()];
        if self.rng.gen_bool(0.05) {
            types.push(ROAD_TYPES[self.rng.gen_range(0..ROAD_TYPES.len())].to_string());
        }
        let mut speeds = Vec::new();
        if self.rng.gen_bool(maxspeed_prob) {
            speeds.push(POSTED_SPEEDS[self.rng.gen_range(0..POSTED_SPEEDS.len())]);
            if self.rng.gen_bool(0.05) {
                speeds.push(POSTED_SPEEDS[self.rng.gen_range(0..POSTED_SPEEDS.len())]);
            }
        }
        (types, speeds)
    }

    fn length(&mut self, u: usize, v: usize) -> f64 {
        let gc = great_circle(self.pos[u], self.pos[v]);
        let factor = if self.detour > 1.0 {
            self.rng.gen_range(1.0..=self.detour)
        } else {
            1.0
        };
        (gc * factor).max(gc)
    }

    fn push(&mut self, u: usize, v: usize, key: u32, types: &[String], speeds: &[f64]) {
        let length_m = self.length(u, v);
        self.edges.push(RoadEdge {
            from: NodeId(u as u64),
            to: NodeId(v as u64),
            key,
            length_m,
            road_types: types.to_vec(),
            raw_maxspeeds: speeds.to_vec(),
            speed_kmh: None,
        });
    }
}

/// Generates a jittered grid. Node ids are `row * cols + col`. Speeds are
/// left unimputed, like freshly loaded input.
pub fn generate_synthetic_city(p: &SynthParams) -> Result<RoadGraph> {
    if p.rows < 2 || p.cols < 2 {
        return Err(Error::Config("city dimensions must be at least 2x2".into()));
    }
    if !(p.detour_factor >= 1.0) {
        return Err(Error::Config("detour factor must be at least 1".into()));
    }
    for (name, v) in [
        ("one_way_prob", p.one_way_prob),
        ("removal_prob", p.removal_prob),
        ("diagonal_prob", p.diagonal_prob),
        ("parallel_prob", p.parallel_prob),
        ("maxspeed_prob", p.maxspeed_prob),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Config(format!("{name} must be within [0, 1]")));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    rng.set_stream(CITY_STREAM);

    let (lat0, lon0) = (44.22, -76.52);
    let (dlat, dlon) = (0.0018, 0.0025);
    let mut pos = Vec::with_capacity(p.rows * p.cols);
    for r in 0..p.rows {
        for c in 0..p.cols {
            let jl = rng.gen_range(-0.25..0.25) * dlat;
            let jn = rng.gen_range(-0.25..0.25) * dlon;
            pos.push(GeoPoint::new(lat0 + r as f64 * dlat + jl, lon0 + c as f64 * dlon + jn)?);
        }
    }

    let mut streets = Vec::new();
    let id = |r: usize, c: usize| r * p.cols + c;
    for r in 0..p.rows {
        for c in 0..p.cols {
            if c + 1 < p.cols {
                streets.push((id(r, c), id(r, c + 1)));
            }
            if r + 1 < p.rows {
                streets.push((id(r, c), id(r + 1, c)));
            }
        }
    }
    for r in 0..p.rows - 1 {
        for c in 0..p.cols - 1 {
            if rng.gen_bool(p.diagonal_prob) {
                if rng.gen_bool(0.5) {
                    streets.push((id(r, c), id(r + 1, c + 1)));
                } else {
                    streets.push((id(r, c + 1), id(r + 1, c)));
                }
            }
        }
    }

    let mut b = Builder {
        rng,
        pos: &pos,
        detour: p.detour_factor,
        edges: Vec::new(),
    };
    for (u, v) in streets {
        if b.rng.gen_bool(p.removal_prob) {
            continue;
        }
        let (types, speeds) = b.street_attrs(p.maxspeed_prob);
        let dirs: Vec<(usize, usize)> = if b.rng.gen_bool(p.one_way_prob) {
            if b.rng.gen_bool(0.5) {
                vec![(u, v)]
            } else {
                vec![(v, u)]
            }
        } else {
            vec![(u, v), (v, u)]
        };
        for (from, to) in dirs {
            b.push(from, to, 0, &types, &speeds);
            if b.rng.gen_bool(p.parallel_prob) {
                let (t2, s2) = b.street_attrs(p.maxspeed_prob);
                b.push(from, to, 1, &t2, &s2);
            }
        }
    }

    let nodes = pos
        .iter()
        .enumerate()
        .map(|(i, g)| (NodeId(i as u64), *g))
        .collect();
    RoadGraph::new(nodes, b.edges)
}
