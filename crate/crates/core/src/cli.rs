//! Command-line front end.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::apsp::{floyd_warshall, lookup_route};
use crate::artifact::{
    fw_path, heuristic_path, ksp_meta_path, ksp_store_path, load_apsp, load_heuristic, load_ksp_meta, save_apsp,
    save_heuristic, save_ksp_meta, DirLock, KspMeta, FORMAT_VERSION,
};
use crate::bench::{generate_trials, run_benchmark, run_statistics, Approach, Artifacts, KspArtifact};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::graph::{load_graph_files, load_imputed, NodeId, ResolvedView, RoadGraph};
use crate::ksp::{preprocess_pairs, select_best, CandidateStore, StoreEntry, DEFAULT_K};
use crate::report::{per_trial_csv, report_csv, report_markdown, stats_csv, PER_TRIAL_HEADER};
use crate::search::{a_star, dijkstra, DivisorMode, Heuristic, HeuristicKind, HeuristicTable, RouteResult, RoutingContext};
use crate::synth::{generate_synthetic_city, SynthParams};
use crate::traffic::{distance_costs, sample_scenario, CostModel, TrafficRegime, TrafficScenario};

/// Above this many vertices, K-shortest-path preprocessing needs an explicit pairs file.
pub const KSP_ALL_PAIRS_LIMIT: usize = 100;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_NO_PATH: i32 = 2;
pub const EXIT_MISSING_ARTIFACT: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "roadroute", version, about = "Traffic-aware road-network routing and benchmarking")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a graph and print dataset statistics.
    Validate(GraphArgs),
    /// Generate a synthetic grid city.
    Synth(SynthArgs),
    /// Build and persist a preprocessing artifact.
    Preprocess(PreprocessArgs),
    /// Answer a single routing query.
    Route(RouteArgs),
    /// Run a full benchmark from a config file.
    Bench(BenchArgs),
    /// Recompute statistics from a per-trial CSV.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    #[arg(long)]
    pub nodes: PathBuf,
    #[arg(long)]
    pub edges: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub rows: usize,
    #[arg(long)]
    pub cols: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.3)]
    pub detour: f64,
    #[arg(long, default_value_t = 0.1)]
    pub one_way: f64,
    #[arg(long, default_value_t = 0.0)]
    pub removal: f64,
    #[arg(long, default_value_t = 0.05)]
    pub diagonal: f64,
    #[arg(long, default_value_t = 0.03)]
    pub parallel: f64,
    #[arg(long, default_value_t = 0.2)]
    pub maxspeed: f64,
    /// Directory receiving nodes.csv and edges.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PreprocessKind {
    Fw,
    Heuristic,
    Ksp,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(value_enum)]
    pub kind: PreprocessKind,
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, default_value = "artifacts")]
    pub artifacts: PathBuf,
    #[arg(long, default_value = "euclidean")]
    pub heuristic: HeuristicKind,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    /// CSV with `src,dst` rows restricting K-shortest-path preprocessing.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Dijkstra,
    Astar,
    Fw,
    Ksp,
}

#[derive(Debug, Args)]
pub struct RouteArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub src: u64,
    #[arg(long)]
    pub dst: u64,
    #[arg(long, value_enum)]
    pub algo: Algo,
    #[arg(long, default_value = "v1")]
    pub cost: CostModel,
    #[arg(long, default_value = "euclidean")]
    pub heuristic: HeuristicKind,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value = "max")]
    pub divisor: DivisorMode,
    /// Per-edge traffic weights (`u,v,key,weight`); overrides --regime.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long, default_value = "none")]
    pub regime: TrafficRegime,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "artifacts")]
    pub artifacts: PathBuf,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub cost: Option<CostModel>,
    #[arg(long)]
    pub divisor: Option<DivisorMode>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub per_trial: PathBuf,
    /// Defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NoPath { .. } => EXIT_NO_PATH,
        Error::MissingArtifact(_) => EXIT_MISSING_ARTIFACT,
        Error::Validation(_)
        | Error::Parse { .. }
        | Error::Imputation
        | Error::Domain(_)
        | Error::UnknownNode(_)
        | Error::InvalidPath { .. }
        | Error::Config(_) => EXIT_VALIDATION,
        Error::Artifact { .. } | Error::Io { .. } => EXIT_FAILURE,
    }
}

/// Short machine-readable tag for an error.
pub fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::NoPath { .. } => "no_path",
        Error::MissingArtifact(_) => "missing_artifact",
        Error::Validation(_) => "validation",
        Error::Parse { .. } => "parse",
        Error::Imputation => "imputation",
        Error::Domain(_) => "domain",
        Error::UnknownNode(_) => "unknown_node",
        Error::InvalidPath { .. } => "invalid_path",
        Error::Config(_) => "config",
        Error::Artifact { .. } => "artifact",
        Error::Io { .. } => "io",
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let text = match cli.command {
        Command::Validate(a) => cmd_validate(&a.nodes, &a.edges)?,
        Command::Synth(a) => cmd_synth(&a)?,
        Command::Preprocess(a) => cmd_preprocess(&a)?,
        Command::Route(a) => cmd_route(&a)?,
        Command::Bench(a) => {
            let mut cfg = RunConfig::load(&a.config)?;
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            if let Some(t) = a.trials {
                cfg.trials = t;
            }
            if let Some(k) = a.k {
                cfg.k = k;
            }
            if let Some(c) = a.cost {
                cfg.cost = c;
            }
            if let Some(d) = a.divisor {
                cfg.divisor = d;
            }
            if let Some(o) = a.output {
                cfg.output_dir = o;
            }
            cfg.validate()?;
            let summary = cmd_bench(&cfg, |msg| eprintln!("{msg}"))?;
            summary.to_kv()
        }
        Command::Stats(a) => {
            let csv = cmd_stats(&a.per_trial)?;
            match a.out {
                Some(p) => {
                    write_text(&p, &csv)?;
                    format!("stats={}\n", p.display())
                }
                None => csv,
            }
        }
    };
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io("writing output", e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn thousands(n: usize) -> String {
    let s = n.to_string();
    let mut out = String::new();
    for (i, ch) in s.chars().enumerate() {
        if i > 0 && (s.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

pub fn cmd_validate(nodes: &Path, edges: &Path) -> Result<String> {
    let mut g = load_graph_files(nodes, edges)?;
    let missing = g.missing_maxspeed_count();
    let multi = g.edges().iter().filter(|e| e.raw_maxspeeds.len() > 1).count();
    g.impute_speeds()?;
    let mut speeds: BTreeMap<u64, usize> = BTreeMap::new();
    for e in g.edges().iter().filter(|e| e.raw_maxspeeds.is_empty()) {
        *speeds.entry(e.speed()?.to_bits()).or_default() += 1;
    }
    let mut s = String::new();
    let _ = writeln!(s, "vertices={}", g.node_count());
    let _ = writeln!(s, "edges={}", g.edge_count());
    let _ = writeln!(s, "parallel_pairs={}", g.parallel_pair_count());
    let _ = writeln!(s, "missing_maxspeed={missing}");
    let _ = writeln!(s, "multi_maxspeed={multi}");
    let mut by_speed: Vec<(f64, usize)> = speeds.into_iter().map(|(b, c)| (f64::from_bits(b), c)).collect();
    by_speed.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (v, c) in by_speed {
        let _ = writeln!(s, "imputed_speed_kmh.{v}={c}");
    }
    let _ = writeln!(
        s,
        "summary={} vertices / {} edges / {} parallel pairs / {} missing maxspeed",
        thousands(g.node_count()),
        thousands(g.edge_count()),
        thousands(g.parallel_pair_count()),
        thousands(missing)
    );
    Ok(s)
}

pub fn cmd_synth(a: &SynthArgs) -> Result<String> {
    let p = SynthParams {
        detour_factor: a.detour,
        one_way_prob: a.one_way,
        removal_prob: a.removal,
        diagonal_prob: a.diagonal,
        parallel_prob: a.parallel,
        maxspeed_prob: a.maxspeed,
        ..SynthParams::new(a.rows, a.cols, a.seed)
    };
    let g = generate_synthetic_city(&p)?;
    fs::create_dir_all(&a.out).map_err(|e| Error::io(format!("creating {}", a.out.display()), e))?;
    let (n, e) = (a.out.join("nodes.csv"), a.out.join("edges.csv"));
    g.write_csv_files(&n, &e)?;
    Ok(format!(
        "nodes={}\nedges={}\nvertices={}\nedge_count={}\n",
        n.display(),
        e.display(),
        g.node_count(),
        g.edge_count()
    ))
}

/// Reads `src,dst` rows.
pub fn read_pairs(path: &Path) -> Result<Vec<(NodeId, NodeId)>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Parse {
        file: path.display().to_string(),
        line: 0,
        msg: e.to_string(),
    })?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            file: path.display().to_string(),
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = || Error::Parse {
            file: path.display().to_string(),
            line,
            msg: "expected `src,dst` vertex ids".into(),
        };
        if rec.len() != 2 {
            return Err(bad());
        }
        let s = rec[0].trim().parse().map_err(|_| bad())?;
        let d = rec[1].trim().parse().map_err(|_| bad())?;
        out.push((NodeId(s), NodeId(d)));
    }
    Ok(out)
}

fn build_apsp(graph: &RoadGraph, dir: &Path) -> Result<crate::apsp::ApspTables> {
    let costs = distance_costs(graph);
    let view = ResolvedView::resolve(graph, &costs);
    let tables = floyd_warshall(graph, &view, &costs);
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    save_apsp(&fw_path(dir), &tables, graph)?;
    Ok(tables)
}

fn build_heuristic(graph: &RoadGraph, dir: &Path, kind: HeuristicKind) -> Result<HeuristicTable> {
    let table = HeuristicTable::build(graph, kind);
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    save_heuristic(&heuristic_path(dir, kind), &table, graph)?;
    Ok(table)
}

/// Computes missing candidate sets for `pairs`, extending the persisted store.
/// Returns the store, the cumulative build time and the pairs computed now.
fn extend_ksp(graph: &RoadGraph, dir: &Path, k: usize, pairs: &[(NodeId, NodeId)]) -> Result<(CandidateStore, f64, usize)> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let store_path = ksp_store_path(dir, k);
    let meta_path = ksp_meta_path(dir, k);
    let mut meta = match load_ksp_meta(&meta_path, graph, k)? {
        Some(m) => m,
        None if store_path.exists() => {
            return Err(Error::Artifact {
                path: store_path,
                msg: "candidate store has no metadata sidecar".into(),
            })
        }
        None => {
            let m = KspMeta {
                k,
                graph_hash: graph.content_hash(),
                build_time_s: 0.0,
            };
            save_ksp_meta(&meta_path, &m)?;
            m
        }
    };
    let mut store = CandidateStore::open(&store_path)?;
    for &(s, d) in pairs {
        graph.dense(s)?;
        graph.dense(d)?;
    }
    let costs = distance_costs(graph);
    let view = ResolvedView::resolve(graph, &costs);
    let t0 = Instant::now();
    let computed = preprocess_pairs(graph, &view, &costs, pairs, k, &mut store, |_, _| {})?;
    if computed > 0 {
        meta.build_time_s += t0.elapsed().as_secs_f64();
        save_ksp_meta(&meta_path, &meta)?;
    }
    Ok((store, meta.build_time_s, computed))
}

pub fn cmd_preprocess(a: &PreprocessArgs) -> Result<String> {
    let graph = load_imputed(&a.graph.nodes, &a.graph.edges)?;
    let _lock = DirLock::acquire(&a.artifacts)?;
    match a.kind {
        PreprocessKind::Fw => {
            let t = build_apsp(&graph, &a.artifacts)?;
            Ok(format!(
                "artifact={}\nbuild_time_s={}\n",
                fw_path(&a.artifacts).display(),
                t.build_time_s
            ))
        }
        PreprocessKind::Heuristic => {
            if a.heuristic == HeuristicKind::Zero {
                return Err(Error::Config("the zero heuristic needs no table".into()));
            }
            let t = build_heuristic(&graph, &a.artifacts, a.heuristic)?;
            Ok(format!(
                "artifact={}\nbuild_time_s={}\n",
                heuristic_path(&a.artifacts, a.heuristic).display(),
                t.build_time_s
            ))
        }
        PreprocessKind::Ksp => {
            if a.k == 0 {
                return Err(Error::Config("k must be at least 1".into()));
            }
            let pairs = match &a.pairs {
                Some(p) => read_pairs(p)?,
                None if graph.node_count() <= KSP_ALL_PAIRS_LIMIT => {
                    let n = graph.node_count();
                    (0..n)
                        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                        .map(|(i, j)| (graph.node_id(i), graph.node_id(j)))
                        .collect()
                }
                None => {
                    return Err(Error::Config(format!(
                        "all-pairs K-shortest-path preprocessing on {} vertices is refused; pass --pairs",
                        graph.node_count()
                    )))
                }
            };
            let (store, build_time_s, computed) = extend_ksp(&graph, &a.artifacts, a.k, &pairs)?;
            Ok(format!(
                "artifact={}\npairs_requested={}\npairs_computed={computed}\npairs_stored={}\nbuild_time_s={build_time_s}\n",
                ksp_store_path(&a.artifacts, a.k).display(),
                pairs.len(),
                store.len()
            ))
        }
    }
}

fn route_text(algo: Algo, r: &RouteResult) -> String {
    let path: Vec<String> = r.path.iter().map(|n| n.to_string()).collect();
    let mut s = String::new();
    let _ = writeln!(s, "status=ok");
    let _ = writeln!(s, "algo={}", algo.to_possible_value().expect("named").get_name());
    let _ = writeln!(s, "path={}", path.join("-"));
    let _ = writeln!(s, "cost={}", r.cost);
    let _ = writeln!(s, "length_km={}", r.length_km);
    let _ = writeln!(s, "eta_min={}", r.eta_min);
    match r.expanded {
        Some(e) => {
            let _ = writeln!(s, "expanded={e}");
        }
        None => {
            let _ = writeln!(s, "expanded=-");
        }
    }
    let _ = writeln!(s, "runtime_s={}", r.runtime_s);
    s
}

pub fn cmd_route(a: &RouteArgs) -> Result<String> {
    if !(a.alpha >= 1.0) {
        return Err(Error::Config("alpha must be at least 1".into()));
    }
    let graph = load_imputed(&a.graph.nodes, &a.graph.edges)?;
    let (src, dst) = (NodeId(a.src), NodeId(a.dst));
    graph.dense(src)?;
    graph.dense(dst)?;
    let scenario = match &a.scenario {
        Some(p) => {
            let f = fs::File::open(p).map_err(|e| Error::io(format!("opening {}", p.display()), e))?;
            TrafficScenario::read_csv(&graph, std::io::BufReader::new(f))?
        }
        None => sample_scenario(&graph, a.regime, a.seed),
    };
    let ctx = RoutingContext::new(&graph, &scenario, a.cost)?;
    let r = match a.algo {
        Algo::Dijkstra => dijkstra(&ctx, src, dst)?,
        Algo::Astar => {
            let table = if a.heuristic == HeuristicKind::Zero {
                HeuristicTable::build(&graph, HeuristicKind::Zero)
            } else {
                load_heuristic(&heuristic_path(&a.artifacts, a.heuristic), &graph)?
            };
            let h = Heuristic::new(a.heuristic, a.alpha).with_divisor(a.divisor);
            a_star(&ctx, src, dst, &h, &table)?
        }
        Algo::Fw => {
            let tables = load_apsp(&fw_path(&a.artifacts), &graph)?;
            lookup_route(&tables, &ctx, src, dst)?
        }
        Algo::Ksp => {
            let store_path = ksp_store_path(&a.artifacts, a.k);
            if load_ksp_meta(&ksp_meta_path(&a.artifacts, a.k), &graph, a.k)?.is_none() {
                return Err(Error::MissingArtifact(store_path));
            }
            let store = CandidateStore::open(&store_path)?;
            match store.get(src, dst) {
                None => return Err(Error::MissingArtifact(store_path)),
                Some(StoreEntry::NoPath) => return Err(Error::NoPath { src, dst }),
                Some(StoreEntry::Paths(_)) => {
                    select_best(&store.candidates(src, dst, a.k).expect("present"), &ctx)?
                }
            }
        }
    };
    Ok(route_text(a.algo, &r))
}

/// Where one artifact came from during a benchmark run.
#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactRecord {
    pub name: String,
    pub built: bool,
    pub build_time_s: f64,
    /// K-shortest-path pairs computed during this run.
    pub pairs_computed: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSummary {
    pub output_dir: PathBuf,
    pub trials: usize,
    pub common_solvable: usize,
    pub artifacts: Vec<ArtifactRecord>,
    pub wall_time_s: f64,
}

impl BenchSummary {
    pub fn to_kv(&self) -> String {
        format!(
            "output_dir={}\ntrials={}\ncommon_solvable={}\nwall_time_s={}\n",
            self.output_dir.display(),
            self.trials,
            self.common_solvable,
            self.wall_time_s
        )
    }
}

fn load_or_build<T>(
    load: impl FnOnce() -> Result<T>,
    build: impl FnOnce() -> Result<T>,
) -> Result<(T, bool)> {
    match load() {
        Ok(t) => Ok((t, false)),
        Err(Error::MissingArtifact(_)) => Ok((build()?, true)),
        Err(e) => Err(e),
    }
}

/// Runs a benchmark end to end and writes every output file.
///
/// Outputs: `report.csv`, `report.md`, `per_trial.csv`, `stats.csv`,
/// `config.txt`, `manifest.txt` and `timings.txt`. Only the last one and the
/// timing columns differ between repeated runs of the same config.
pub fn cmd_bench(cfg: &RunConfig, mut log: impl FnMut(&str)) -> Result<BenchSummary> {
    let started = Instant::now();
    let _lock = DirLock::acquire(&cfg.artifact_dir)?;
    let graph = load_imputed(&cfg.nodes, &cfg.edges)?;
    let configs = cfg.algorithm_configs()?;
    let trials = generate_trials(&graph, cfg.trials, cfg.seed, &cfg.regimes)?;
    log(&format!(
        "graph: {} vertices, {} edges; {} trials x {} algorithms",
        graph.node_count(),
        graph.edge_count(),
        trials.len(),
        configs.len()
    ));

    let dir = &cfg.artifact_dir;
    let mut arts = Artifacts::default();
    let mut records = Vec::new();
    if configs.iter().any(|c| c.approach == Approach::MultiQueryLookup) {
        let (t, built) = load_or_build(|| load_apsp(&fw_path(dir), &graph), || build_apsp(&graph, dir))?;
        log(&format!("fw tables {}", if built { "built" } else { "loaded" }));
        records.push(ArtifactRecord {
            name: "fw".into(),
            built,
            build_time_s: t.build_time_s,
            pairs_computed: None,
        });
        arts.apsp = Some(t);
    }
    let kinds: BTreeSet<HeuristicKind> = configs.iter().filter_map(|c| c.heuristic).collect();
    for kind in kinds {
        let (t, built) = if kind == HeuristicKind::Zero {
            (HeuristicTable::build(&graph, kind), false)
        } else {
            load_or_build(
                || load_heuristic(&heuristic_path(dir, kind), &graph),
                || build_heuristic(&graph, dir, kind),
            )?
        };
        log(&format!("{kind} heuristic table {}", if built { "built" } else { "loaded" }));
        records.push(ArtifactRecord {
            name: format!("heuristic_{kind}"),
            built,
            build_time_s: t.build_time_s,
            pairs_computed: None,
        });
        arts.heuristics.insert(kind, t);
    }
    if let Some(k) = configs.iter().filter(|c| c.approach == Approach::Ksp).filter_map(|c| c.k).max() {
        let pairs: Vec<(NodeId, NodeId)> = trials.iter().map(|t| (t.src, t.dst)).collect();
        let (store, build_time_s, computed) = extend_ksp(&graph, dir, k, &pairs)?;
        log(&format!("ksp candidates: {computed} pairs computed"));
        records.push(ArtifactRecord {
            name: format!("ksp_k{k}"),
            built: computed > 0,
            build_time_s,
            pairs_computed: Some(computed),
        });
        arts.ksp = Some(KspArtifact { k, store, build_time_s });
    }

    let report = run_benchmark(&graph, cfg.cost, &configs, &trials, &arts)?;
    let summaries = report.summaries();
    let labels: Vec<String> = configs.iter().map(|c| c.label.clone()).collect();
    let stats = run_statistics(&labels, &report.cost_columns());
    let common = report.common_solvable().count();

    let out = &cfg.output_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(format!("creating {}", out.display()), e))?;
    write_text(&out.join("report.csv"), &report_csv(&summaries, cfg.breakdown))?;
    write_text(&out.join("report.md"), &report_markdown(&summaries, cfg.breakdown))?;
    write_text(&out.join("per_trial.csv"), &per_trial_csv(&report))?;
    write_text(&out.join("stats.csv"), &stats_csv(&stats))?;
    write_text(&out.join("config.txt"), &cfg.to_kv())?;

    let mut manifest = String::new();
    let _ = writeln!(manifest, "tool_version={}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(manifest, "artifact_format_version={FORMAT_VERSION}");
    let _ = writeln!(manifest, "config_hash={:016x}", cfg.config_hash());
    let _ = writeln!(manifest, "graph_hash={:016x}", graph.content_hash());
    let _ = writeln!(manifest, "cost_model={}", cfg.cost);
    let _ = writeln!(manifest, "trials={}", trials.len());
    let _ = writeln!(manifest, "common_solvable={common}");
    let _ = writeln!(manifest, "algorithms={}", labels.join(","));
    write_text(&out.join("manifest.txt"), &manifest)?;

    let wall_time_s = started.elapsed().as_secs_f64();
    let mut timings = String::new();
    for r in &records {
        let _ = writeln!(timings, "{}.source={}", r.name, if r.built { "built" } else { "loaded" });
        let _ = writeln!(timings, "{}.preprocessing_s={}", r.name, r.build_time_s);
        if let Some(p) = r.pairs_computed {
            let _ = writeln!(timings, "{}.pairs_computed={p}", r.name);
        }
    }
    let _ = writeln!(timings, "wall_time_s={wall_time_s}");
    write_text(&out.join("timings.txt"), &timings)?;
    log(&format!("wrote reports to {}", out.display()));

    Ok(BenchSummary {
        output_dir: out.clone(),
        trials: trials.len(),
        common_solvable: common,
        artifacts: records,
        wall_time_s,
    })
}

/// Rebuilds `stats.csv` content from a per-trial CSV written by `bench`.
pub fn cmd_stats(per_trial: &Path) -> Result<String> {
    let file = per_trial.display().to_string();
    let mut rdr = csv::Reader::from_path(per_trial).map_err(|e| Error::Parse {
        file: file.clone(),
        line: 0,
        msg: e.to_string(),
    })?;
    let header = rdr
        .headers()
        .map_err(|e| Error::Parse {
            file: file.clone(),
            line: 1,
            msg: e.to_string(),
        })?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != PER_TRIAL_HEADER {
        return Err(Error::Parse {
            file,
            line: 1,
            msg: format!("expected header `{PER_TRIAL_HEADER}`"),
        });
    }
    let mut labels: Vec<String> = Vec::new();
    let mut columns: Vec<Vec<(u64, f64)>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            file: file.clone(),
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |msg: &str| Error::Parse {
            file: file.clone(),
            line,
            msg: msg.into(),
        };
        let trial: u64 = rec[0].parse().map_err(|_| bad("bad trial_id"))?;
        let cost: f64 = rec[3].parse().map_err(|_| bad("bad cost"))?;
        let i = match labels.iter().position(|l| l == &rec[1]) {
            Some(i) => i,
            None => {
                labels.push(rec[1].to_string());
                columns.push(Vec::new());
                labels.len() - 1
            }
        };
        columns[i].push((trial, cost));
    }
    let order: Vec<u64> = columns.first().map(|c| c.iter().map(|x| x.0).collect()).unwrap_or_default();
    for (l, c) in labels.iter().zip(&columns) {
        if c.iter().map(|x| x.0).ne(order.iter().copied()) {
            return Err(Error::Validation(format!("algorithm `{l}` covers a different trial set")));
        }
    }
    let columns: Vec<Vec<f64>> = columns.into_iter().map(|c| c.into_iter().map(|x| x.1).collect()).collect();
    Ok(stats_csv(&run_statistics(&labels, &columns)))
}
