//! Benchmark run configuration in a plain `key=value` format.
//!
//! ```text
//! nodes=city/nodes.csv
//! edges=city/edges.csv
//! artifact_dir=artifacts
//! output_dir=out
//! cost=v1
//! regimes=none,light,moderate,heavy
//! trials=200
//! seed=0
//! k=5
//! alphas=10,100
//! heuristics=euclidean,greatcircle
//! divisor=max
//! breakdown=true
//! algorithms=all
//! ```
//!
//! Relative paths are resolved against the config file's directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::artifact::{hash_str, parse_kv};
use crate::bench::{standard_configs, AlgorithmConfig};
use crate::error::{Error, Result};
use crate::search::{DivisorMode, HeuristicKind};
use crate::traffic::{CostModel, TrafficRegime};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub nodes: PathBuf,
    pub edges: PathBuf,
    pub artifact_dir: PathBuf,
    pub output_dir: PathBuf,
    pub cost: CostModel,
    pub regimes: Vec<TrafficRegime>,
    pub trials: usize,
    pub seed: u64,
    pub k: usize,
    pub alphas: Vec<f64>,
    pub heuristics: Vec<HeuristicKind>,
    pub divisor: DivisorMode,
    pub breakdown: bool,
    /// Algorithm labels to run; `None` runs every standard config.
    pub algorithms: Option<Vec<String>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            nodes: "nodes.csv".into(),
            edges: "edges.csv".into(),
            artifact_dir: "artifacts".into(),
            output_dir: "out".into(),
            cost: CostModel::V1,
            regimes: TrafficRegime::ALL.to_vec(),
            trials: 1000,
            seed: 0,
            k: crate::ksp::DEFAULT_K,
            alphas: vec![10.0, 100.0],
            heuristics: vec![HeuristicKind::Euclidean, HeuristicKind::GreatCircle],
            divisor: DivisorMode::MaxSpeed,
            breakdown: true,
            algorithms: None,
        }
    }
}

fn list<T>(raw: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    raw.split(',').map(str::trim).filter(|s| !s.is_empty()).map(parse).collect()
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let kv = parse_kv(text)?;
        let mut c = RunConfig::default();
        let bad = |k: &str, v: &str| Error::Config(format!("bad value `{v}` for `{k}`"));
        let path = |v: &str| {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        for (k, v) in &kv {
            match k.as_str() {
                "nodes" => c.nodes = path(v),
                "edges" => c.edges = path(v),
                "artifact_dir" => c.artifact_dir = path(v),
                "output_dir" => c.output_dir = path(v),
                "cost" => c.cost = v.parse()?,
                "regimes" => c.regimes = list(v, str::parse)?,
                "trials" => c.trials = v.parse().map_err(|_| bad(k, v))?,
                "seed" => c.seed = v.parse().map_err(|_| bad(k, v))?,
                "k" => c.k = v.parse().map_err(|_| bad(k, v))?,
                "alphas" => c.alphas = list(v, |s| s.parse().map_err(|_| bad(k, s)))?,
                "heuristics" => c.heuristics = list(v, str::parse)?,
                "divisor" => c.divisor = v.parse()?,
                "breakdown" => c.breakdown = v.parse().map_err(|_| bad(k, v))?,
                "algorithms" => {
                    c.algorithms = if v == "all" {
                        None
                    } else {
                        Some(list(v, |s| Ok(s.to_string()))?)
                    }
                }
                other => return Err(Error::Config(format!("unknown config key `{other}`"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.regimes.is_empty() {
            return Err(Error::Config("at least one regime is required".into()));
        }
        if self.alphas.iter().any(|a| !(*a >= 1.0)) {
            return Err(Error::Config("inflation factors must be at least 1".into()));
        }
        Ok(())
    }

    /// Every field, one per line, in a fixed order.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "nodes={}", self.nodes.display());
        let _ = writeln!(s, "edges={}", self.edges.display());
        let _ = writeln!(s, "artifact_dir={}", self.artifact_dir.display());
        let _ = writeln!(s, "output_dir={}", self.output_dir.display());
        let _ = write!(s, "{}", self.experiment_kv());
        s
    }

    /// The fields that determine results; directories are excluded.
    fn experiment_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "cost={}", self.cost);
        let _ = writeln!(s, "regimes={}", join(&self.regimes));
        let _ = writeln!(s, "trials={}", self.trials);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "k={}", self.k);
        let _ = writeln!(s, "alphas={}", join(&self.alphas));
        let _ = writeln!(s, "heuristics={}", join(&self.heuristics));
        let _ = writeln!(s, "divisor={}", self.divisor);
        let _ = writeln!(s, "breakdown={}", self.breakdown);
        let algos = match &self.algorithms {
            None => "all".to_string(),
            Some(a) => a.join(","),
        };
        let _ = writeln!(s, "algorithms={algos}");
        s
    }

    pub fn config_hash(&self) -> u64 {
        hash_str(&self.experiment_kv())
    }

    pub fn algorithm_configs(&self) -> Result<Vec<AlgorithmConfig>> {
        let all = standard_configs(&self.heuristics, &self.alphas, self.k, self.divisor);
        match &self.algorithms {
            None => Ok(all),
            Some(wanted) => wanted
                .iter()
                .map(|w| {
                    all.iter().find(|c| &c.label == w).cloned().ok_or_else(|| {
                        let known: Vec<&str> = all.iter().map(|c| c.label.as_str()).collect();
                        Error::Config(format!("unknown algorithm `{w}` (known: {})", known.join(", ")))
                    })
                })
                .collect(),
        }
    }
}
