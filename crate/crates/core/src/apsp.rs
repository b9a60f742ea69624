//! All-pairs shortest distances with first-hop matrices (Floyd-Warshall-Ingerman).

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{NodeId, ResolvedView, RoadGraph};
use crate::search::{RouteResult, RoutingContext};

/// Unreachable distance marker.
pub const UNREACHABLE: f64 = f64::MAX;
/// No-successor marker in the first-hop matrix (diagonal and unreachable).
pub const NO_HOP: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct ApspTables {
    /// Dense index to node id.
    pub ordering: Vec<NodeId>,
    /// Row-major n×n distances in km.
    pub dist: Vec<f64>,
    /// Row-major n×n first hop from i toward j.
    pub next_hop: Vec<u32>,
    pub build_time_s: f64,
}

impl ApspTables {
    pub fn node_count(&self) -> usize {
        self.ordering.len()
    }

    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.node_count() + j]
    }

    /// Fails unless the tables were built over this graph's node ordering.
    pub fn check_graph(&self, graph: &RoadGraph) -> Result<()> {
        let same = self.ordering.len() == graph.node_count()
            && self
                .ordering
                .iter()
                .enumerate()
                .all(|(i, id)| graph.node_id(i) == *id);
        if same {
            Ok(())
        } else {
            Err(Error::Config("APSP tables were built for a different graph".into()))
        }
    }

    /// Dense path from `i` to `j` by chasing first hops.
    pub fn reconstruct_dense(&self, i: usize, j: usize) -> Option<Vec<usize>> {
        if i == j {
            return Some(vec![i]);
        }
        let n = self.node_count();
        if self.next_hop[i * n + j] == NO_HOP {
            return None;
        }
        let mut path = vec![i];
        let mut cur = i;
        while cur != j {
            cur = self.next_hop[cur * n + j] as usize;
            path.push(cur);
        }
        Some(path)
    }

    pub fn reconstruct_path(&self, graph: &RoadGraph, src: NodeId, dst: NodeId) -> Result<Vec<NodeId>> {
        let (i, j) = (graph.dense(src)?, graph.dense(dst)?);
        let path = self.reconstruct_dense(i, j).ok_or(Error::NoPath { src, dst })?;
        Ok(path.into_iter().map(|v| self.ordering[v]).collect())
    }
}

/// Runs the k-outermost triple loop over `costs` (km per graph edge) on the
/// given view. Within a k layer rows are independent because row k itself
/// does not change in that layer, so rows are relaxed in parallel.
pub fn floyd_warshall(graph: &RoadGraph, view: &ResolvedView, costs: &[f64]) -> ApspTables {
    let start = Instant::now();
    let n = graph.node_count();
    let mut dist = vec![UNREACHABLE; n * n];
    let mut next = vec![NO_HOP; n * n];
    for i in 0..n {
        dist[i * n + i] = 0.0;
        for arc in view.out(i) {
            let c = costs[arc.edge];
            if c < dist[i * n + arc.node] {
                dist[i * n + arc.node] = c;
                next[i * n + arc.node] = arc.node as u32;
            }
        }
    }

    let mut row_k = vec![0.0; n];
    for k in 0..n {
        row_k.copy_from_slice(&dist[k * n..(k + 1) * n]);
        let row_k = &row_k;
        dist.par_chunks_mut(n.max(1))
            .zip(next.par_chunks_mut(n.max(1)))
            .enumerate()
            .for_each(|(i, (d_row, n_row))| {
                if i == k {
                    return;
                }
                let d_ik = d_row[k];
                if d_ik == UNREACHABLE {
                    return;
                }
                let hop = n_row[k];
                for j in 0..n {
                    let d_kj = row_k[j];
                    if d_kj == UNREACHABLE {
                        continue;
                    }
                    let cand = d_ik + d_kj;
                    if cand < d_row[j] {
                        d_row[j] = cand;
                        n_row[j] = hop;
                    }
                }
            });
    }

    ApspTables {
        ordering: (0..n).map(|i| graph.node_id(i)).collect(),
        dist,
        next_hop: next,
        build_time_s: start.elapsed().as_secs_f64(),
    }
}

/// Distance-optimal path from the tables, evaluated under the context's
/// traffic. The path ignores traffic; the reported cost does not.
pub fn lookup_route(tables: &ApspTables, ctx: &RoutingContext, src: NodeId, dst: NodeId) -> Result<RouteResult> {
    let (i, j) = (ctx.graph.dense(src)?, ctx.graph.dense(dst)?);
    let start = Instant::now();
    let path = tables.reconstruct_dense(i, j).ok_or(Error::NoPath { src, dst })?;
    let mut result = ctx.finish(&path, None, 0.0)?;
    result.runtime_s = start.elapsed().as_secs_f64();
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::{best_first, tests::km_graph};
    use crate::traffic::{distance_costs, CostModel, TrafficScenario, TrafficWeight};

    fn tables(g: &RoadGraph) -> (ApspTables, ResolvedView, Vec<f64>) {
        let costs = distance_costs(g);
        let view = ResolvedView::resolve(g, &costs);
        (floyd_warshall(g, &view, &costs), view, costs)
    }

    #[test]
    fn four_cycle() {
        let g = km_graph(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)]);
        let (t, view, costs) = tables(&g);
        assert_eq!(t.distance(0, 2), 2.0);
        assert_eq!(t.distance(2, 0), 2.0);
        for i in 0..4 {
            assert_eq!(t.distance(i, i), 0.0);
            for j in 0..4 {
                let oracle = best_first(&view, &costs, i, j, 1.0, |_| 0.0).unwrap().cost;
                assert_eq!(t.distance(i, j), oracle);
            }
        }
        let p = t.reconstruct_path(&g, NodeId(0), NodeId(2)).unwrap();
        assert_eq!(p, vec![NodeId(0), NodeId(1), NodeId(2)]);
        assert_eq!(t.reconstruct_path(&g, NodeId(3), NodeId(3)).unwrap(), vec![NodeId(3)]);
    }

    #[test]
    fn isolated_vertex() {
        let g = km_graph(3, &[(0, 1, 1.0), (1, 0, 2.0)]);
        let (t, _, _) = tables(&g);
        for k in 0..3 {
            if k != 2 {
                assert_eq!(t.distance(2, k), UNREACHABLE);
                assert_eq!(t.distance(k, 2), UNREACHABLE);
            }
        }
        assert_eq!(t.distance(2, 2), 0.0);
        assert!(matches!(
            t.reconstruct_path(&g, NodeId(0), NodeId(2)),
            Err(Error::NoPath { .. })
        ));
    }

    #[test]
    fn lookup_reports_traffic_cost() {
        let g = km_graph(2, &[(0, 1, 2.0)]);
        let (t, _, _) = tables(&g);
        let ones = TrafficScenario::uniform(&g, TrafficWeight::Low);
        let ctx = RoutingContext::new(&g, &ones, CostModel::V1).unwrap();
        let r = lookup_route(&t, &ctx, NodeId(0), NodeId(1)).unwrap();
        assert_eq!(r.cost, t.distance(0, 1));
        assert_eq!(r.expanded, None);

        let heavy = TrafficScenario::uniform(&g, TrafficWeight::High);
        let ctx = RoutingContext::new(&g, &heavy, CostModel::V1).unwrap();
        let r = lookup_route(&t, &ctx, NodeId(0), NodeId(1)).unwrap();
        assert_eq!(r.cost, 10.0);
        assert_eq!(r.length_km, 2.0);
    }
}
