//! On-disk preprocessing artifacts.
//!
//! Binary layouts (all integers and floats little-endian):
//!
//! ```text
//! apsp.bin              heuristic_<kind>.bin
//! ---------             --------------------
//! magic  "RRFW"         magic  "RRHT"
//! version u32           version u32
//! n      u64            kind   u8 (0 zero, 1 euclidean, 2 greatcircle)
//! ids    n × u64        n      u64
//! dist   n² × f64       ids    n × u64
//! next   n² × u32       values n² × f64 (0 values for zero)
//! graph_hash  u64       graph_hash  u64
//! config_hash u64       config_hash u64
//! build_time_s f64      build_time_s f64
//! ```
//!
//! K-shortest-path candidates live in a CSV store with a `key=value` sidecar
//! holding the same hash and timing fields.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::apsp::ApspTables;
use crate::error::{Error, Result};
use crate::graph::{NodeId, RoadGraph};
use crate::search::{HeuristicKind, HeuristicTable};

pub const FORMAT_VERSION: u32 = 1;
const FW_MAGIC: &[u8; 4] = b"RRFW";
const HT_MAGIC: &[u8; 4] = b"RRHT";

pub fn hash_str(s: &str) -> u64 {
    let digest = Sha256::digest(s.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

pub fn fw_config_hash() -> u64 {
    hash_str("fw;cost=distance")
}

pub fn heuristic_config_hash(kind: HeuristicKind) -> u64 {
    hash_str(&format!("heuristic;kind={kind}"))
}

pub fn ksp_config_hash(k: usize) -> u64 {
    hash_str(&format!("ksp;cost=distance;k={k}"))
}

pub fn fw_path(dir: &Path) -> PathBuf {
    dir.join("apsp.bin")
}

pub fn heuristic_path(dir: &Path, kind: HeuristicKind) -> PathBuf {
    dir.join(format!("heuristic_{kind}.bin"))
}

pub fn ksp_store_path(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("ksp_k{k}.csv"))
}

pub fn ksp_meta_path(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("ksp_k{k}.meta"))
}

struct Reader<'a> {
    path: &'a Path,
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn bad(&self, msg: impl Into<String>) -> Error {
        Error::Artifact {
            path: self.path.to_path_buf(),
            msg: msg.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.at < n {
            return Err(self.bad("truncated file"));
        }
        let s = &self.buf[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn len(&mut self, n: usize, width: usize) -> Result<usize> {
        n.checked_mul(width).ok_or_else(|| self.bad("size overflow"))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.len(n, 8)?;
        Ok(self
            .take(bytes)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn u32s(&mut self, n: usize) -> Result<Vec<u32>> {
        let bytes = self.len(n, 4)?;
        Ok(self
            .take(bytes)?
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn ids(&mut self, n: usize) -> Result<Vec<NodeId>> {
        let bytes = self.len(n, 8)?;
        Ok(self
            .take(bytes)?
            .chunks_exact(8)
            .map(|c| NodeId(u64::from_le_bytes(c.try_into().unwrap())))
            .collect())
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<()> {
        if self.take(4)? != magic {
            return Err(self.bad("bad magic bytes"));
        }
        let v = self.u32()?;
        if v != FORMAT_VERSION {
            return Err(self.bad(format!("unsupported version {v}")));
        }
        Ok(())
    }

    fn trailer(&mut self, graph: &RoadGraph, config_hash: u64) -> Result<f64> {
        let gh = self.u64()?;
        let ch = self.u64()?;
        let t = self.f64()?;
        if gh != graph.content_hash() {
            return Err(self.bad("graph hash mismatch: artifact was built for a different graph"));
        }
        if ch != config_hash {
            return Err(self.bad("config hash mismatch"));
        }
        if self.at != self.buf.len() {
            return Err(self.bad("trailing bytes"));
        }
        Ok(t)
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    match fs::read(path) {
        Ok(b) => Ok(b),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::MissingArtifact(path.to_path_buf())),
        Err(e) => Err(Error::io(format!("reading {}", path.display()), e)),
    }
}

fn write_file(path: &Path, fill: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let ctx = || format!("writing {}", path.display());
    let tmp = path.with_extension("tmp");
    let f = File::create(&tmp).map_err(|e| Error::io(ctx(), e))?;
    let mut w = BufWriter::new(f);
    fill(&mut w).map_err(|e| Error::io(ctx(), e))?;
    w.flush().map_err(|e| Error::io(ctx(), e))?;
    drop(w);
    fs::rename(&tmp, path).map_err(|e| Error::io(ctx(), e))
}

fn write_ids(w: &mut impl Write, ids: impl Iterator<Item = NodeId>) -> std::io::Result<()> {
    for id in ids {
        w.write_all(&id.0.to_le_bytes())?;
    }
    Ok(())
}

fn check_ordering(path: &Path, ids: &[NodeId], graph: &RoadGraph) -> Result<()> {
    let ok = ids.len() == graph.node_count() && ids.iter().enumerate().all(|(i, id)| graph.node_id(i) == *id);
    if ok {
        Ok(())
    } else {
        Err(Error::Artifact {
            path: path.to_path_buf(),
            msg: "node ordering does not match graph".into(),
        })
    }
}

pub fn save_apsp(path: &Path, tables: &ApspTables, graph: &RoadGraph) -> Result<()> {
    write_file(path, |w| {
        w.write_all(FW_MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(tables.node_count() as u64).to_le_bytes())?;
        write_ids(w, tables.ordering.iter().copied())?;
        for d in &tables.dist {
            w.write_all(&d.to_le_bytes())?;
        }
        for h in &tables.next_hop {
            w.write_all(&h.to_le_bytes())?;
        }
        w.write_all(&graph.content_hash().to_le_bytes())?;
        w.write_all(&fw_config_hash().to_le_bytes())?;
        w.write_all(&tables.build_time_s.to_le_bytes())
    })
}

pub fn load_apsp(path: &Path, graph: &RoadGraph) -> Result<ApspTables> {
    let buf = read_file(path)?;
    let mut r = Reader { path, buf: &buf, at: 0 };
    r.header(FW_MAGIC)?;
    let n = r.u64()? as usize;
    let ordering = r.ids(n)?;
    let nn = n.checked_mul(n).ok_or_else(|| r.bad("size overflow"))?;
    let dist = r.f64s(nn)?;
    let next_hop = r.u32s(nn)?;
    let build_time_s = r.trailer(graph, fw_config_hash())?;
    check_ordering(path, &ordering, graph)?;
    Ok(ApspTables {
        ordering,
        dist,
        next_hop,
        build_time_s,
    })
}

fn kind_code(kind: HeuristicKind) -> u8 {
    match kind {
        HeuristicKind::Zero => 0,
        HeuristicKind::Euclidean => 1,
        HeuristicKind::GreatCircle => 2,
    }
}

pub fn save_heuristic(path: &Path, table: &HeuristicTable, graph: &RoadGraph) -> Result<()> {
    write_file(path, |w| {
        w.write_all(HT_MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&[kind_code(table.kind)])?;
        w.write_all(&(table.node_count() as u64).to_le_bytes())?;
        write_ids(w, (0..graph.node_count()).map(|i| graph.node_id(i)))?;
        for v in table.values() {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&graph.content_hash().to_le_bytes())?;
        w.write_all(&heuristic_config_hash(table.kind).to_le_bytes())?;
        w.write_all(&table.build_time_s.to_le_bytes())
    })
}

pub fn load_heuristic(path: &Path, graph: &RoadGraph) -> Result<HeuristicTable> {
    let buf = read_file(path)?;
    let mut r = Reader { path, buf: &buf, at: 0 };
    r.header(HT_MAGIC)?;
    let kind = match r.u8()? {
        0 => HeuristicKind::Zero,
        1 => HeuristicKind::Euclidean,
        2 => HeuristicKind::GreatCircle,
        k => return Err(r.bad(format!("unknown heuristic kind {k}"))),
    };
    let n = r.u64()? as usize;
    let ordering = r.ids(n)?;
    let count = if kind == HeuristicKind::Zero {
        0
    } else {
        n.checked_mul(n).ok_or_else(|| r.bad("size overflow"))?
    };
    let values = r.f64s(count)?;
    let build_time_s = r.trailer(graph, heuristic_config_hash(kind))?;
    check_ordering(path, &ordering, graph)?;
    HeuristicTable::from_parts(kind, n, values, build_time_s)
}

/// `key=value` lines; blank lines and `#` comments are ignored.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value", i + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KspMeta {
    pub k: usize,
    pub graph_hash: u64,
    pub build_time_s: f64,
}

pub fn save_ksp_meta(path: &Path, meta: &KspMeta) -> Result<()> {
    write_file(path, |w| {
        writeln!(w, "version={FORMAT_VERSION}")?;
        writeln!(w, "k={}", meta.k)?;
        writeln!(w, "graph_hash={:016x}", meta.graph_hash)?;
        writeln!(w, "config_hash={:016x}", ksp_config_hash(meta.k))?;
        writeln!(w, "build_time_s={}", meta.build_time_s)
    })
}

/// Reads a sidecar; a missing file yields `None`. Mismatched graph or K fails.
pub fn load_ksp_meta(path: &Path, graph: &RoadGraph, k: usize) -> Result<Option<KspMeta>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(Error::io(format!("reading {}", path.display()), e)),
    };
    let bad = |msg: &str| Error::Artifact {
        path: path.to_path_buf(),
        msg: msg.to_string(),
    };
    let kv = parse_kv(&text)?;
    let get = |key: &str| kv.get(key).ok_or_else(|| bad(&format!("missing `{key}`")));
    if get("version")? != &FORMAT_VERSION.to_string() {
        return Err(bad("unsupported version"));
    }
    let graph_hash = u64::from_str_radix(get("graph_hash")?, 16).map_err(|_| bad("bad graph_hash"))?;
    if graph_hash != graph.content_hash() {
        return Err(bad("graph hash mismatch: artifact was built for a different graph"));
    }
    let config_hash = u64::from_str_radix(get("config_hash")?, 16).map_err(|_| bad("bad config_hash"))?;
    let stored_k: usize = get("k")?.parse().map_err(|_| bad("bad k"))?;
    if stored_k != k || config_hash != ksp_config_hash(k) {
        return Err(bad("config hash mismatch"));
    }
    Ok(Some(KspMeta {
        k,
        graph_hash,
        build_time_s: get("build_time_s")?.parse().map_err(|_| bad("bad build_time_s"))?,
    }))
}

/// Advisory lock on an artifact directory, released on drop.
#[derive(Debug)]
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        let path = dir.join(".lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(DirLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Config(format!(
                "artifact directory {} is locked by another run (remove {} if stale)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(Error::io(format!("locking {}", dir.display()), e)),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apsp::floyd_warshall;
    use crate::graph::ResolvedView;
    use crate::synth::{generate_synthetic_city, SynthParams};
    use crate::traffic::distance_costs;

    fn city(seed: u64) -> RoadGraph {
        let mut g = generate_synthetic_city(&SynthParams::new(5, 6, seed)).unwrap();
        g.impute_speeds().unwrap();
        g
    }

    #[test]
    fn apsp_round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let g = city(1);
        let costs = distance_costs(&g);
        let t = floyd_warshall(&g, &ResolvedView::resolve(&g, &costs), &costs);
        let p = fw_path(dir.path());
        save_apsp(&p, &t, &g).unwrap();
        let back = load_apsp(&p, &g).unwrap();
        assert_eq!(back.ordering, t.ordering);
        assert_eq!(back.next_hop, t.next_hop);
        assert!(back.dist.iter().zip(&t.dist).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(back.build_time_s.to_bits(), t.build_time_s.to_bits());
    }

    #[test]
    fn mismatched_graph_fails_loudly() {
        let dir = tempfile::tempdir().unwrap();
        let g = city(1);
        let table = HeuristicTable::build(&g, HeuristicKind::Euclidean);
        let p = heuristic_path(dir.path(), HeuristicKind::Euclidean);
        save_heuristic(&p, &table, &g).unwrap();
        assert_eq!(load_heuristic(&p, &g).unwrap(), table);
        let err = load_heuristic(&p, &city(2)).unwrap_err();
        assert!(err.to_string().contains("graph hash mismatch"), "{err}");
    }

    #[test]
    fn missing_and_corrupt_files() {
        let dir = tempfile::tempdir().unwrap();
        let g = city(1);
        let p = fw_path(dir.path());
        assert!(matches!(load_apsp(&p, &g), Err(Error::MissingArtifact(_))));
        fs::write(&p, b"RRFW\x01\x00\x00\x00").unwrap();
        assert!(matches!(load_apsp(&p, &g), Err(Error::Artifact { .. })));
        fs::write(&p, b"XXXX").unwrap();
        assert!(matches!(load_apsp(&p, &g), Err(Error::Artifact { .. })));
    }

    #[test]
    fn ksp_meta_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = city(1);
        let p = ksp_meta_path(dir.path(), 5);
        assert_eq!(load_ksp_meta(&p, &g, 5).unwrap(), None);
        let meta = KspMeta {
            k: 5,
            graph_hash: g.content_hash(),
            build_time_s: 1.25,
        };
        save_ksp_meta(&p, &meta).unwrap();
        assert_eq!(load_ksp_meta(&p, &g, 5).unwrap(), Some(meta));
        assert!(load_ksp_meta(&p, &g, 3).is_err());
    }

    #[test]
    fn lock_is_exclusive() {
        let dir = tempfile::tempdir().unwrap();
        let lock = DirLock::acquire(dir.path()).unwrap();
        assert!(DirLock::acquire(dir.path()).is_err());
        drop(lock);
        assert!(DirLock::acquire(dir.path()).is_ok());
    }
}
