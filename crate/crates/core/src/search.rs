//! Single-query search: Dijkstra, A* and inflated A* over a resolved view.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::geo::{euclidean_chord, great_circle};
use crate::graph::{NodeId, ResolvedView, RoadGraph};
use crate::traffic::{edge_costs, path_metrics_dense, CostModel, TrafficScenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HeuristicKind {
    Zero,
    Euclidean,
    GreatCircle,
}

impl HeuristicKind {
    pub fn name(self) -> &'static str {
        match self {
            HeuristicKind::Zero => "zero",
            HeuristicKind::Euclidean => "euclidean",
            HeuristicKind::GreatCircle => "greatcircle",
        }
    }

    /// Pointwise distance in meters between two dense nodes.
    pub fn distance(self, graph: &RoadGraph, a: usize, b: usize) -> f64 {
        match self {
            HeuristicKind::Zero => 0.0,
            HeuristicKind::Euclidean => euclidean_chord(graph.position(a), graph.position(b)),
            HeuristicKind::GreatCircle => great_circle(graph.position(a), graph.position(b)),
        }
    }
}

impl fmt::Display for HeuristicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HeuristicKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(HeuristicKind::Zero),
            "euclidean" => Ok(HeuristicKind::Euclidean),
            "greatcircle" | "great_circle" => Ok(HeuristicKind::GreatCircle),
            _ => Err(Error::Config(format!("unknown heuristic `{s}`"))),
        }
    }
}

/// Speed used to turn a distance bound into a time bound under the V2 model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum DivisorMode {
    /// Graph-wide maximum speed limit; keeps the bound admissible.
    #[default]
    MaxSpeed,
    /// Mean speed limit; may overestimate.
    AvgSpeed,
}

impl FromStr for DivisorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" | "max_speed" => Ok(DivisorMode::MaxSpeed),
            "avg" | "avg_speed" => Ok(DivisorMode::AvgSpeed),
            _ => Err(Error::Config(format!("unknown divisor mode `{s}`"))),
        }
    }
}

impl fmt::Display for DivisorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DivisorMode::MaxSpeed => "max",
            DivisorMode::AvgSpeed => "avg",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Heuristic {
    pub kind: HeuristicKind,
    /// Inflation factor applied to h only; 1 means uninflated.
    pub alpha: f64,
    pub divisor: DivisorMode,
}

impl Heuristic {
    pub fn new(kind: HeuristicKind, alpha: f64) -> Self {
        Heuristic {
            kind,
            alpha,
            divisor: DivisorMode::MaxSpeed,
        }
    }

    pub fn with_divisor(mut self, divisor: DivisorMode) -> Self {
        self.divisor = divisor;
        self
    }

    /// Factor converting table meters into cost units.
    pub fn scale(&self, graph: &RoadGraph, model: CostModel) -> Result<f64> {
        match model {
            CostModel::V1 => Ok(1.0 / 1000.0),
            CostModel::V2 => {
                let speed = match self.divisor {
                    DivisorMode::MaxSpeed => graph.max_speed()?,
                    DivisorMode::AvgSpeed => graph.mean_speed()?,
                };
                if !(speed > 0.0) {
                    return Err(Error::Domain("heuristic divisor speed must be positive".into()));
                }
                Ok(60.0 / (1000.0 * speed))
            }
        }
    }
}

/// All-pairs heuristic distances in meters, row-major by dense index.
#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicTable {
    pub kind: HeuristicKind,
    n: usize,
    values: Vec<f64>,
    pub build_time_s: f64,
}

impl HeuristicTable {
    pub fn build(graph: &RoadGraph, kind: HeuristicKind) -> Self {
        let start = Instant::now();
        let n = graph.node_count();
        let mut values = if kind == HeuristicKind::Zero {
            Vec::new()
        } else {
            vec![0.0; n * n]
        };
        if kind != HeuristicKind::Zero {
            for i in 0..n {
                for j in (i + 1)..n {
                    let d = kind.distance(graph, i, j);
                    values[i * n + j] = d;
                    values[j * n + i] = d;
                }
            }
        }
        HeuristicTable {
            kind,
            n,
            values,
            build_time_s: start.elapsed().as_secs_f64(),
        }
    }

    pub fn from_parts(kind: HeuristicKind, n: usize, values: Vec<f64>, build_time_s: f64) -> Result<Self> {
        let expected = if kind == HeuristicKind::Zero { 0 } else { n * n };
        if values.len() != expected {
            return Err(Error::Validation(format!(
                "heuristic table has {} values, expected {expected}",
                values.len()
            )));
        }
        Ok(HeuristicTable {
            kind,
            n,
            values,
            build_time_s,
        })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, v: usize, goal: usize) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.values[v * self.n + goal]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteResult {
    pub path: Vec<NodeId>,
    /// Cost in the units of the active cost model.
    pub cost: f64,
    pub length_km: f64,
    pub eta_min: f64,
    /// Settled vertices; `None` for lookup-style approaches.
    pub expanded: Option<usize>,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub path: Vec<usize>,
    pub cost: f64,
    pub expanded: usize,
}

#[derive(Clone, Copy)]
struct Entry {
    f: f64,
    g: f64,
    node: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl Ord for Entry {
    // max-heap: smallest f first, then largest g, then smallest id
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| self.g.total_cmp(&other.g))
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Best-first search with priority `g + alpha * h(v)`; stops when `dst` is
/// popped. Vertices reopen whenever a strictly smaller g is found, and every
/// pop that is not stale counts as an expansion.
pub fn best_first(
    view: &ResolvedView,
    costs: &[f64],
    src: usize,
    dst: usize,
    alpha: f64,
    h: impl Fn(usize) -> f64,
) -> Option<SearchResult> {
    let n = view.node_count();
    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    let mut expanded = 0;

    g[src] = 0.0;
    heap.push(Entry {
        f: alpha * h(src),
        g: 0.0,
        node: src,
    });
    while let Some(Entry { g: gu, node: u, .. }) = heap.pop() {
        if gu > g[u] {
            continue;
        }
        expanded += 1;
        if u == dst {
            let mut path = vec![dst];
            let mut cur = dst;
            while cur != src {
                cur = parent[cur];
                path.push(cur);
            }
            path.reverse();
            return Some(SearchResult {
                path,
                cost: gu,
                expanded,
            });
        }
        for arc in view.out(u) {
            let cand = gu + costs[arc.edge];
            if cand < g[arc.node] {
                g[arc.node] = cand;
                parent[arc.node] = u;
                heap.push(Entry {
                    f: cand + alpha * h(arc.node),
                    g: cand,
                    node: arc.node,
                });
            }
        }
    }
    None
}

/// Everything a query needs for one (graph, scenario, cost model) triple:
/// per-edge costs and the view resolved under them.
pub struct RoutingContext<'a> {
    pub graph: &'a RoadGraph,
    pub scenario: &'a TrafficScenario,
    pub model: CostModel,
    pub costs: Vec<f64>,
    pub view: ResolvedView,
}

impl<'a> RoutingContext<'a> {
    pub fn new(graph: &'a RoadGraph, scenario: &'a TrafficScenario, model: CostModel) -> Result<Self> {
        let costs = edge_costs(graph, scenario, model)?;
        let view = ResolvedView::resolve(graph, &costs);
        Ok(RoutingContext {
            graph,
            scenario,
            model,
            costs,
            view,
        })
    }

    /// Builds a [`RouteResult`] for a dense path, evaluated under this context.
    pub fn finish(&self, path: &[usize], expanded: Option<usize>, runtime_s: f64) -> Result<RouteResult> {
        let m = path_metrics_dense(self.graph, &self.view, self.scenario, path)?;
        Ok(RouteResult {
            path: path.iter().map(|&v| self.graph.node_id(v)).collect(),
            cost: m.cost(self.model),
            length_km: m.length_km,
            eta_min: m.eta_min,
            expanded,
            runtime_s,
        })
    }
}

pub fn dijkstra(ctx: &RoutingContext, src: NodeId, dst: NodeId) -> Result<RouteResult> {
    run_search(ctx, src, dst, 1.0, |_, _| 0.0)
}

/// A* with the table's heuristic, scaled to the context's cost units and
/// inflated by `h.alpha`.
pub fn a_star(
    ctx: &RoutingContext,
    src: NodeId,
    dst: NodeId,
    h: &Heuristic,
    table: &HeuristicTable,
) -> Result<RouteResult> {
    if table.kind != h.kind {
        return Err(Error::Config(format!(
            "heuristic table is {} but {} was requested",
            table.kind, h.kind
        )));
    }
    if h.kind != HeuristicKind::Zero && table.node_count() != ctx.graph.node_count() {
        return Err(Error::Config("heuristic table does not match graph".into()));
    }
    let scale = h.scale(ctx.graph, ctx.model)?;
    run_search(ctx, src, dst, h.alpha, |v, goal| scale * table.get(v, goal))
}

fn run_search(
    ctx: &RoutingContext,
    src: NodeId,
    dst: NodeId,
    alpha: f64,
    h: impl Fn(usize, usize) -> f64,
) -> Result<RouteResult> {
    let s = ctx.graph.dense(src)?;
    let t = ctx.graph.dense(dst)?;
    let start = Instant::now();
    let found = best_first(&ctx.view, &ctx.costs, s, t, alpha, |v| h(v, t));
    let runtime_s = start.elapsed().as_secs_f64();
    let found = found.ok_or(Error::NoPath { src, dst })?;
    let mut r = ctx.finish(&found.path, Some(found.expanded), runtime_s)?;
    r.cost = found.cost;
    Ok(r)
}
