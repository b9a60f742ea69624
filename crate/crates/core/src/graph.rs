//! Road-network multigraph: CSV ingestion, speed imputation and
//! cost-dependent resolution of parallel edges.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geo::GeoPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub const NODES_HEADER: [&str; 3] = ["id", "lat", "lon"];
pub const EDGES_HEADER: [&str; 6] = ["u", "v", "key", "length_m", "road_types", "maxspeed"];

#[derive(Debug, Clone, PartialEq)]
pub struct RoadEdge {
    pub from: NodeId,
    pub to: NodeId,
    pub key: u32,
    pub length_m: f64,
    pub road_types: Vec<String>,
    pub raw_maxspeeds: Vec<f64>,
    /// Populated by [`RoadGraph::impute_speeds`].
    pub speed_kmh: Option<f64>,
}

impl RoadEdge {
    pub fn speed(&self) -> Result<f64> {
        self.speed_kmh.ok_or_else(|| {
            Error::Validation(format!(
                "edge ({}, {}, {}) has no imputed speed",
                self.from, self.to, self.key
            ))
        })
    }
}

/// Class speed for a road-type tag in km/h. Unknown tags fall back to 50.
pub fn class_speed(tag: &str) -> f64 {
    match tag {
        "secondary" | "tertiary" => 80.0,
        "motorway" => 100.0,
        // residential, primary, unclassified and the *_link classes
        _ => 50.0,
    }
}

/// Speed for one edge: mean of the raw limits when any are present,
/// otherwise the mean class speed over its road types.
pub fn impute_speed(road_types: &[String], raw_maxspeeds: &[f64]) -> Result<f64> {
    if !raw_maxspeeds.is_empty() {
        return Ok(raw_maxspeeds.iter().sum::<f64>() / raw_maxspeeds.len() as f64);
    }
    if road_types.is_empty() {
        return Err(Error::Imputation);
    }
    Ok(road_types.iter().map(|t| class_speed(t)).sum::<f64>() / road_types.len() as f64)
}

/// Directed multigraph of intersections and road segments.
///
/// Nodes are kept sorted by id and edges sorted by `(from, to, key)`, so the
/// dense node index and the edge index are both canonical.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadGraph {
    nodes: Vec<(NodeId, GeoPoint)>,
    index: HashMap<NodeId, usize>,
    edges: Vec<RoadEdge>,
    adjacency: Vec<Vec<usize>>,
}

impl RoadGraph {
    pub fn new(mut nodes: Vec<(NodeId, GeoPoint)>, mut edges: Vec<RoadEdge>) -> Result<Self> {
        nodes.sort_by_key(|(id, _)| *id);
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, (id, _)) in nodes.iter().enumerate() {
            if index.insert(*id, i).is_some() {
                return Err(Error::Validation(format!("duplicate node id {id}")));
            }
        }
        edges.sort_by_key(|e| (e.from, e.to, e.key));
        for w in edges.windows(2) {
            if (w[0].from, w[0].to, w[0].key) == (w[1].from, w[1].to, w[1].key) {
                return Err(Error::Validation(format!(
                    "duplicate edge ({}, {}, {})",
                    w[0].from, w[0].to, w[0].key
                )));
            }
        }
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (ei, e) in edges.iter().enumerate() {
            let (Some(&u), Some(_)) = (index.get(&e.from), index.get(&e.to)) else {
                return Err(Error::Validation(format!(
                    "dangling endpoint on edge ({}, {}, {})",
                    e.from, e.to, e.key
                )));
            };
            if !(e.length_m.is_finite() && e.length_m > 0.0) {
                return Err(Error::Validation(format!(
                    "non-positive length {} on edge ({}, {}, {})",
                    e.length_m, e.from, e.to, e.key
                )));
            }
            if let Some(s) = e.speed_kmh {
                if !(s.is_finite() && s > 0.0) {
                    return Err(Error::Validation(format!(
                        "non-positive speed {s} on edge ({}, {}, {})",
                        e.from, e.to, e.key
                    )));
                }
            }
            adjacency[u].push(ei);
        }
        Ok(RoadGraph {
            nodes,
            index,
            edges,
            adjacency,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[(NodeId, GeoPoint)] {
        &self.nodes
    }

    pub fn edges(&self) -> &[RoadEdge] {
        &self.edges
    }

    pub fn edge(&self, idx: usize) -> &RoadEdge {
        &self.edges[idx]
    }

    /// Outgoing edge indices of a dense node.
    pub fn out_edges(&self, dense: usize) -> &[usize] {
        &self.adjacency[dense]
    }

    pub fn dense(&self, id: NodeId) -> Result<usize> {
        self.index.get(&id).copied().ok_or(Error::UnknownNode(id))
    }

    pub fn node_id(&self, dense: usize) -> NodeId {
        self.nodes[dense].0
    }

    pub fn position(&self, dense: usize) -> GeoPoint {
        self.nodes[dense].1
    }

    /// Fills `speed_kmh` on every edge that lacks it.
    pub fn impute_speeds(&mut self) -> Result<()> {
        for e in &mut self.edges {
            if e.speed_kmh.is_none() {
                e.speed_kmh = Some(impute_speed(&e.road_types, &e.raw_maxspeeds)?);
            }
        }
        Ok(())
    }

    pub fn max_speed(&self) -> Result<f64> {
        let mut max = 0.0f64;
        for e in &self.edges {
            max = max.max(e.speed()?);
        }
        Ok(max)
    }

    pub fn mean_speed(&self) -> Result<f64> {
        if self.edges.is_empty() {
            return Ok(0.0);
        }
        let mut sum = 0.0;
        for e in &self.edges {
            sum += e.speed()?;
        }
        Ok(sum / self.edges.len() as f64)
    }

    /// Number of ordered vertex pairs joined by more than one edge.
    pub fn parallel_pair_count(&self) -> usize {
        let mut count = 0;
        let mut i = 0;
        while i < self.edges.len() {
            let mut j = i + 1;
            while j < self.edges.len()
                && (self.edges[j].from, self.edges[j].to) == (self.edges[i].from, self.edges[i].to)
            {
                j += 1;
            }
            if j - i > 1 {
                count += 1;
            }
            i = j;
        }
        count
    }

    pub fn missing_maxspeed_count(&self) -> usize {
        self.edges.iter().filter(|e| e.raw_maxspeeds.is_empty()).count()
    }

    /// Content hash over the canonical CSV serialization.
    pub fn content_hash(&self) -> u64 {
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        self.write_csv(&mut nodes, &mut edges)
            .expect("writing to memory cannot fail");
        let mut h = Sha256::new();
        h.update(&nodes);
        h.update(&edges);
        let digest = h.finalize();
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }

    pub fn write_csv<N: Write, E: Write>(&self, nodes_out: N, edges_out: E) -> Result<()> {
        let mut w = csv::WriterBuilder::new().from_writer(nodes_out);
        w.write_record(NODES_HEADER).map_err(csv_write_err)?;
        for (id, p) in &self.nodes {
            w.write_record([id.to_string(), p.lat.to_string(), p.lon.to_string()])
                .map_err(csv_write_err)?;
        }
        w.flush().map_err(|e| Error::io("writing nodes", e))?;

        let mut w = csv::WriterBuilder::new().from_writer(edges_out);
        w.write_record(EDGES_HEADER).map_err(csv_write_err)?;
        for e in &self.edges {
            let speeds: Vec<String> = e.raw_maxspeeds.iter().map(|s| s.to_string()).collect();
            w.write_record([
                e.from.to_string(),
                e.to.to_string(),
                e.key.to_string(),
                e.length_m.to_string(),
                e.road_types.join(";"),
                speeds.join(";"),
            ])
            .map_err(csv_write_err)?;
        }
        w.flush().map_err(|e| Error::io("writing edges", e))?;
        Ok(())
    }

    pub fn write_csv_files(&self, nodes_path: &Path, edges_path: &Path) -> Result<()> {
        let n = std::fs::File::create(nodes_path)
            .map_err(|e| Error::io(format!("creating {}", nodes_path.display()), e))?;
        let e = std::fs::File::create(edges_path)
            .map_err(|e| Error::io(format!("creating {}", edges_path.display()), e))?;
        self.write_csv(std::io::BufWriter::new(n), std::io::BufWriter::new(e))
    }
}

fn csv_write_err(e: csv::Error) -> Error {
    Error::io("writing csv", std::io::Error::other(e))
}

fn check_header(file: &str, rdr: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers().map_err(|e| Error::Parse {
        file: file.to_string(),
        line: 1,
        msg: e.to_string(),
    })?;
    if header.iter().map(str::trim).ne(expected.iter().copied()) {
        return Err(Error::Parse {
            file: file.to_string(),
            line: 1,
            msg: format!("expected header `{}`", expected.join(",")),
        });
    }
    Ok(())
}

fn records<'a, R: Read + 'a>(
    file: &'a str,
    rdr: &'a mut csv::Reader<R>,
    width: usize,
) -> impl Iterator<Item = Result<(u64, csv::StringRecord)>> + 'a {
    rdr.records().map(move |r| {
        let rec = r.map_err(|e| Error::Parse {
            file: file.to_string(),
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width {
            return Err(Error::Parse {
                file: file.to_string(),
                line,
                msg: format!("expected {width} columns, found {}", rec.len()),
            });
        }
        Ok((line, rec))
    })
}

fn parse_field<T: std::str::FromStr>(file: &str, line: u64, name: &str, raw: &str) -> Result<T> {
    raw.trim().parse().map_err(|_| Error::Parse {
        file: file.to_string(),
        line,
        msg: format!("bad {name} value `{raw}`"),
    })
}

fn parse_list<T: std::str::FromStr>(file: &str, line: u64, name: &str, raw: &str) -> Result<Vec<T>> {
    raw.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_field(file, line, name, s))
        .collect()
}

/// Parses `nodes.csv` and `edges.csv` content into a validated graph.
/// Speeds are left unimputed.
pub fn load_graph<N: Read, E: Read>(nodes_src: N, edges_src: E) -> Result<RoadGraph> {
    let mut nodes = Vec::new();
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(nodes_src);
    check_header("nodes", &mut rdr, &NODES_HEADER)?;
    for r in records("nodes", &mut rdr, NODES_HEADER.len()) {
        let (line, rec) = r?;
        let id: u64 = parse_field("nodes", line, "id", &rec[0])?;
        let lat = parse_field("nodes", line, "lat", &rec[1])?;
        let lon = parse_field("nodes", line, "lon", &rec[2])?;
        let p = GeoPoint::new(lat, lon).map_err(|e| Error::Parse {
            file: "nodes".into(),
            line,
            msg: e.to_string(),
        })?;
        nodes.push((NodeId(id), p));
    }

    let mut edges = Vec::new();
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(edges_src);
    check_header("edges", &mut rdr, &EDGES_HEADER)?;
    for r in records("edges", &mut rdr, EDGES_HEADER.len()) {
        let (line, rec) = r?;
        let road_types: Vec<String> = rec[4]
            .split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect();
        edges.push(RoadEdge {
            from: NodeId(parse_field("edges", line, "u", &rec[0])?),
            to: NodeId(parse_field("edges", line, "v", &rec[1])?),
            key: parse_field("edges", line, "key", &rec[2])?,
            length_m: parse_field("edges", line, "length_m", &rec[3])?,
            road_types,
            raw_maxspeeds: parse_list("edges", line, "maxspeed", &rec[5])?,
            speed_kmh: None,
        });
    }
    RoadGraph::new(nodes, edges)
}

pub fn load_graph_files(nodes_path: &Path, edges_path: &Path) -> Result<RoadGraph> {
    let open = |p: &Path| {
        std::fs::File::open(p)
            .map(std::io::BufReader::new)
            .map_err(|e| Error::io(format!("opening {}", p.display()), e))
    };
    load_graph(open(nodes_path)?, open(edges_path)?)
}

/// Loads and imputes speeds in one step.
pub fn load_imputed(nodes_path: &Path, edges_path: &Path) -> Result<RoadGraph> {
    let mut g = load_graph_files(nodes_path, edges_path)?;
    g.impute_speeds()?;
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arc {
    /// Dense index of the other endpoint.
    pub node: usize,
    /// Index of the chosen edge in the graph's edge list.
    pub edge: usize,
}

/// Simple-digraph view of a [`RoadGraph`]: one edge per ordered vertex pair,
/// the one minimizing the resolving cost (smallest key on ties).
#[derive(Debug, Clone)]
pub struct ResolvedView {
    out: Vec<Vec<Arc>>,
    inc: Vec<Vec<Arc>>,
}

impl ResolvedView {
    /// `edge_costs` is indexed by graph edge index.
    pub fn resolve(graph: &RoadGraph, edge_costs: &[f64]) -> Self {
        assert_eq!(edge_costs.len(), graph.edge_count());
        let n = graph.node_count();
        let mut out = vec![Vec::new(); n];
        let mut inc = vec![Vec::new(); n];
        for (u, adj) in out.iter_mut().enumerate() {
            // out edges of u are contiguous and sorted by (to, key)
            let list = graph.out_edges(u);
            let mut i = 0;
            while i < list.len() {
                let to = graph.edge(list[i]).to;
                let mut best = list[i];
                let mut j = i + 1;
                while j < list.len() && graph.edge(list[j]).to == to {
                    if edge_costs[list[j]] < edge_costs[best] {
                        best = list[j];
                    }
                    j += 1;
                }
                let v = graph.dense(to).expect("validated endpoint");
                adj.push(Arc { node: v, edge: best });
                inc[v].push(Arc { node: u, edge: best });
                i = j;
            }
        }
        ResolvedView { out, inc }
    }

    pub fn node_count(&self) -> usize {
        self.out.len()
    }

    pub fn out(&self, u: usize) -> &[Arc] {
        &self.out[u]
    }

    pub fn inc(&self, v: usize) -> &[Arc] {
        &self.inc[v]
    }

    pub fn edge_between(&self, u: usize, v: usize) -> Option<usize> {
        self.out[u].iter().find(|a| a.node == v).map(|a| a.edge)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(nodes: &str, edges: &str) -> Result<RoadGraph> {
        load_graph(nodes.as_bytes(), edges.as_bytes())
    }

    const TWO_NODES: &str = "id,lat,lon\n0,44.0,-76.0\n1,44.001,-76.0\n";

    #[test]
    fn minimal_graph() {
        let g = graph(TWO_NODES, "u,v,key,length_m,road_types,maxspeed\n0,1,0,100,residential,\n").unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.out_edges(0), &[0]);
        assert!(g.out_edges(1).is_empty());
        assert_eq!(g.edge(0).speed_kmh, None);
    }

    #[test]
    fn dangling_endpoint() {
        let err = graph(TWO_NODES, "u,v,key,length_m,road_types,maxspeed\n0,99,0,100,residential,\n")
            .unwrap_err();
        assert!(err.to_string().contains("dangling endpoint"), "{err}");
    }

    #[test]
    fn non_positive_length() {
        let err = graph(TWO_NODES, "u,v,key,length_m,road_types,maxspeed\n0,1,0,0,residential,\n")
            .unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn duplicate_edge_key() {
        let err = graph(
            TWO_NODES,
            "u,v,key,length_m,road_types,maxspeed\n0,1,0,100,residential,\n0,1,0,120,residential,\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("duplicate edge"), "{err}");
    }

    #[test]
    fn parallel_edges_retained() {
        let g = graph(
            TWO_NODES,
            "u,v,key,length_m,road_types,maxspeed\n0,1,0,100,residential,\n0,1,1,120,secondary,\n",
        )
        .unwrap();
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.parallel_pair_count(), 1);
    }

    #[test]
    fn short_row_names_line() {
        let err = graph(TWO_NODES, "u,v,key,length_m,road_types,maxspeed\n0,1,0,100,residential\n")
            .unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn bad_header() {
        assert!(graph("id,lon,lat\n", "u,v,key,length_m,road_types,maxspeed\n").is_err());
    }

    #[test]
    fn imputation_table() {
        let t = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert_eq!(impute_speed(&t(&["residential"]), &[]).unwrap(), 50.0);
        assert_eq!(impute_speed(&t(&["secondary"]), &[]).unwrap(), 80.0);
        assert_eq!(impute_speed(&t(&["tertiary"]), &[]).unwrap(), 80.0);
        assert_eq!(impute_speed(&t(&["motorway"]), &[]).unwrap(), 100.0);
        for tag in [
            "primary",
            "unclassified",
            "motorway_link",
            "secondary_link",
            "primary_link",
            "tertiary_link",
            "living_street",
        ] {
            assert_eq!(impute_speed(&t(&[tag]), &[]).unwrap(), 50.0, "{tag}");
        }
        assert_eq!(impute_speed(&t(&["anything"]), &[40.0, 60.0]).unwrap(), 50.0);
        assert_eq!(impute_speed(&t(&["secondary", "motorway"]), &[]).unwrap(), 90.0);
        assert!(matches!(impute_speed(&[], &[]), Err(Error::Imputation)));
    }

    #[test]
    fn imputation_is_idempotent_on_output() {
        let types = vec!["secondary".to_string(), "residential".to_string()];
        let s = impute_speed(&types, &[]).unwrap();
        assert_eq!(impute_speed(&types, &[s]).unwrap(), s);
    }

    fn parallel_pair() -> RoadGraph {
        let mut g = graph(
            TWO_NODES,
            "u,v,key,length_m,road_types,maxspeed\n0,1,0,100,residential,\n0,1,1,120,residential,\n",
        )
        .unwrap();
        g.impute_speeds().unwrap();
        g
    }

    #[test]
    fn resolve_by_distance() {
        let g = parallel_pair();
        let costs: Vec<f64> = g.edges().iter().map(|e| e.length_m).collect();
        let view = ResolvedView::resolve(&g, &costs);
        assert_eq!(view.edge_between(0, 1), Some(0));
        assert_eq!(view.edge_between(1, 0), None);
    }

    #[test]
    fn resolve_by_traffic_cost() {
        let g = parallel_pair();
        // weight 5 on the 100 m edge, weight 1 on the 120 m edge
        let view = ResolvedView::resolve(&g, &[500.0, 120.0]);
        assert_eq!(g.edge(view.edge_between(0, 1).unwrap()).length_m, 120.0);
    }

    #[test]
    fn resolve_tie_prefers_smallest_key() {
        let g = parallel_pair();
        let view = ResolvedView::resolve(&g, &[7.0, 7.0]);
        assert_eq!(g.edge(view.edge_between(0, 1).unwrap()).key, 0);
        assert_eq!(view.inc(1), &[Arc { node: 0, edge: 0 }]);
    }

    #[test]
    fn csv_round_trip() {
        let g = graph(
            "id,lat,lon\n5,44.1,-76.3\n2,44.12345678901,-76.2\n",
            "u,v,key,length_m,road_types,maxspeed\n5,2,0,100.25,residential;secondary,40;60\n2,5,0,99.5,motorway,\n",
        )
        .unwrap();
        let (mut n, mut e) = (Vec::new(), Vec::new());
        g.write_csv(&mut n, &mut e).unwrap();
        let back = load_graph(n.as_slice(), e.as_slice()).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.content_hash(), g.content_hash());
    }
}
