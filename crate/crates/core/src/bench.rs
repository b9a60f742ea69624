//! Trial generation, benchmark execution and aggregation.

use std::collections::HashMap;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::apsp::{lookup_route, ApspTables};
use crate::error::{Error, Result};
use crate::graph::{NodeId, RoadGraph};
use crate::ksp::{select_best, CandidateStore, StoreEntry};
use crate::search::{a_star, dijkstra, DivisorMode, Heuristic, HeuristicKind, HeuristicTable, RouteResult, RoutingContext};
use crate::stats::{one_way_anova, paired_t_test, wilcoxon_signed_rank, TestResult};
use crate::traffic::{sample_scenario, CostModel, TrafficRegime};

/// Sub-stream of the master seed used to sample trial endpoints.
pub const TRIALS_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSpec {
    pub trial_id: u64,
    pub src: NodeId,
    pub dst: NodeId,
    pub regime: TrafficRegime,
    pub scenario_seed: u64,
}

/// Samples `2n` distinct vertices, pairs them in order and assigns regimes in
/// equal consecutive blocks.
pub fn generate_trials(graph: &RoadGraph, n: usize, seed: u64, regimes: &[TrafficRegime]) -> Result<Vec<TrialSpec>> {
    if regimes.is_empty() {
        return Err(Error::Config("at least one traffic regime is required".into()));
    }
    if !n.is_multiple_of(regimes.len()) {
        return Err(Error::Config(format!(
            "trial count {n} is not a multiple of the {} regimes",
            regimes.len()
        )));
    }
    if 2 * n > graph.node_count() {
        return Err(Error::Config(format!(
            "{n} trials need {} distinct vertices but the graph has {}",
            2 * n,
            graph.node_count()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(TRIALS_STREAM);
    let picked = rand::seq::index::sample(&mut rng, graph.node_count(), 2 * n).into_vec();
    let block = (n / regimes.len()).max(1);
    Ok((0..n)
        .map(|i| TrialSpec {
            trial_id: i as u64,
            src: graph.node_id(picked[2 * i]),
            dst: graph.node_id(picked[2 * i + 1]),
            regime: regimes[i / block],
            scenario_seed: seed ^ i as u64,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Approach {
    MultiQueryLookup,
    SingleQuery,
    Ksp,
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Approach::MultiQueryLookup => "multi_query_lookup",
            Approach::SingleQuery => "single_query",
            Approach::Ksp => "ksp",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmConfig {
    pub label: String,
    pub approach: Approach,
    /// `None` for Dijkstra and the non-search approaches.
    pub heuristic: Option<HeuristicKind>,
    pub alpha: f64,
    pub k: Option<usize>,
    pub divisor: DivisorMode,
}

impl AlgorithmConfig {
    pub fn fw() -> Self {
        AlgorithmConfig {
            label: "fw".into(),
            approach: Approach::MultiQueryLookup,
            heuristic: None,
            alpha: 1.0,
            k: None,
            divisor: DivisorMode::MaxSpeed,
        }
    }

    pub fn dijkstra() -> Self {
        AlgorithmConfig {
            label: "dijkstra".into(),
            approach: Approach::SingleQuery,
            ..Self::fw()
        }
    }

    pub fn a_star(kind: HeuristicKind, alpha: f64, divisor: DivisorMode) -> Self {
        let label = if alpha == 1.0 {
            format!("astar_{kind}")
        } else {
            format!("astar_{kind}_a{alpha}")
        };
        AlgorithmConfig {
            label,
            approach: Approach::SingleQuery,
            heuristic: Some(kind),
            alpha,
            k: None,
            divisor,
        }
    }

    pub fn yen(k: usize) -> Self {
        AlgorithmConfig {
            label: format!("yen_k{k}"),
            approach: Approach::Ksp,
            heuristic: None,
            alpha: 1.0,
            k: Some(k),
            divisor: DivisorMode::MaxSpeed,
        }
    }
}

/// FW, Dijkstra, A* per heuristic, inflated A* per (heuristic, alpha), Yen.
pub fn standard_configs(
    heuristics: &[HeuristicKind],
    alphas: &[f64],
    k: usize,
    divisor: DivisorMode,
) -> Vec<AlgorithmConfig> {
    let mut v = vec![AlgorithmConfig::fw(), AlgorithmConfig::dijkstra()];
    for &h in heuristics {
        v.push(AlgorithmConfig::a_star(h, 1.0, divisor));
    }
    for &h in heuristics {
        for &a in alphas.iter().filter(|a| **a != 1.0) {
            v.push(AlgorithmConfig::a_star(h, a, divisor));
        }
    }
    v.push(AlgorithmConfig::yen(k));
    v
}

#[derive(Debug)]
pub struct KspArtifact {
    pub k: usize,
    pub store: CandidateStore,
    pub build_time_s: f64,
}

#[derive(Debug, Default)]
pub struct Artifacts {
    pub apsp: Option<ApspTables>,
    pub heuristics: HashMap<HeuristicKind, HeuristicTable>,
    pub ksp: Option<KspArtifact>,
}

impl Artifacts {
    fn preprocessing_s(&self, c: &AlgorithmConfig) -> f64 {
        match c.approach {
            Approach::MultiQueryLookup => self.apsp.as_ref().map_or(0.0, |t| t.build_time_s),
            Approach::Ksp => self.ksp.as_ref().map_or(0.0, |k| k.build_time_s),
            Approach::SingleQuery => c
                .heuristic
                .and_then(|h| self.heuristics.get(&h))
                .map_or(0.0, |t| t.build_time_s),
        }
    }

    /// Fails if any config lacks what it needs for the given trials.
    pub fn check(&self, configs: &[AlgorithmConfig], trials: &[TrialSpec]) -> Result<()> {
        for c in configs {
            match c.approach {
                Approach::MultiQueryLookup => {
                    if self.apsp.is_none() {
                        return Err(Error::Config(format!("`{}` needs APSP tables", c.label)));
                    }
                }
                Approach::SingleQuery => {
                    if let Some(h) = c.heuristic {
                        if !self.heuristics.contains_key(&h) {
                            return Err(Error::Config(format!("`{}` needs the {h} heuristic table", c.label)));
                        }
                    }
                }
                Approach::Ksp => {
                    let k = c.k.unwrap_or(crate::ksp::DEFAULT_K);
                    let Some(art) = &self.ksp else {
                        return Err(Error::Config(format!("`{}` needs K-shortest-path candidates", c.label)));
                    };
                    if art.k < k {
                        return Err(Error::Config(format!(
                            "`{}` needs K={k} but candidates were built with K={}",
                            c.label, art.k
                        )));
                    }
                    if let Some(t) = trials.iter().find(|t| art.store.get(t.src, t.dst).is_none()) {
                        return Err(Error::Config(format!(
                            "`{}` has no candidates for pair {} -> {}",
                            c.label, t.src, t.dst
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn run_query(
    c: &AlgorithmConfig,
    ctx: &RoutingContext,
    artifacts: &Artifacts,
    src: NodeId,
    dst: NodeId,
) -> Result<RouteResult> {
    match c.approach {
        Approach::MultiQueryLookup => lookup_route(artifacts.apsp.as_ref().expect("checked"), ctx, src, dst),
        Approach::SingleQuery => match c.heuristic {
            None => dijkstra(ctx, src, dst),
            Some(kind) => {
                let h = Heuristic::new(kind, c.alpha).with_divisor(c.divisor);
                a_star(ctx, src, dst, &h, &artifacts.heuristics[&kind])
            }
        },
        Approach::Ksp => {
            let art = artifacts.ksp.as_ref().expect("checked");
            let k = c.k.unwrap_or(crate::ksp::DEFAULT_K);
            match art.store.get(src, dst) {
                Some(StoreEntry::NoPath) | None => Err(Error::NoPath { src, dst }),
                Some(StoreEntry::Paths(_)) => {
                    let set = art.store.candidates(src, dst, k).expect("present");
                    select_best(&set, ctx)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: TrialSpec,
    /// One entry per config; `None` when the config found no path.
    pub results: Vec<Option<RouteResult>>,
}

impl TrialRecord {
    pub fn solved_by_all(&self) -> bool {
        self.results.iter().all(Option::is_some)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgoSummary {
    pub approach: Approach,
    pub label: String,
    pub preprocessing_min: f64,
    pub avg_runtime_s: f64,
    pub avg_cost: f64,
    pub avg_expanded: Option<f64>,
    pub avg_length_km: f64,
    pub avg_eta_min: f64,
    pub solved: usize,
    pub unsolved: usize,
    /// Average cost per regime, in [`TrafficRegime::ALL`] order.
    pub regime_cost: [Option<f64>; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub model: CostModel,
    pub configs: Vec<AlgorithmConfig>,
    pub preprocessing_s: Vec<f64>,
    pub records: Vec<TrialRecord>,
}

impl BenchReport {
    /// Trials every config solved, in trial order.
    pub fn common_solvable(&self) -> impl Iterator<Item = &TrialRecord> {
        self.records.iter().filter(|r| r.solved_by_all())
    }

    /// Per-config costs over the common-solvable trials.
    pub fn cost_columns(&self) -> Vec<Vec<f64>> {
        (0..self.configs.len())
            .map(|i| {
                self.common_solvable()
                    .map(|r| r.results[i].as_ref().unwrap().cost)
                    .collect()
            })
            .collect()
    }

    pub fn summaries(&self) -> Vec<AlgoSummary> {
        let common: Vec<&TrialRecord> = self.common_solvable().collect();
        let solved = common.len();
        let mean = |xs: &mut dyn Iterator<Item = f64>| {
            let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
            if n == 0 {
                f64::NAN
            } else {
                s / n as f64
            }
        };
        self.configs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let res = || common.iter().map(move |r| r.results[i].as_ref().unwrap());
                let mut regime_cost = [None; 4];
                for (slot, regime) in regime_cost.iter_mut().zip(TrafficRegime::ALL) {
                    let mut it = res().zip(&common).filter(|(_, r)| r.trial.regime == regime).map(|(x, _)| x.cost);
                    let m = mean(&mut it);
                    if !m.is_nan() {
                        *slot = Some(m);
                    }
                }
                AlgoSummary {
                    approach: c.approach,
                    label: c.label.clone(),
                    preprocessing_min: self.preprocessing_s[i] / 60.0,
                    avg_runtime_s: mean(&mut res().map(|x| x.runtime_s)),
                    avg_cost: mean(&mut res().map(|x| x.cost)),
                    avg_expanded: (c.approach == Approach::SingleQuery)
                        .then(|| mean(&mut res().map(|x| x.expanded.unwrap_or(0) as f64))),
                    avg_length_km: mean(&mut res().map(|x| x.length_km)),
                    avg_eta_min: mean(&mut res().map(|x| x.eta_min)),
                    solved,
                    unsolved: self.records.len() - solved,
                    regime_cost,
                }
            })
            .collect()
    }
}

/// Runs every config on every trial. Each query is timed alone on the
/// calling thread; one untimed warm-up pass over the first trial precedes
/// the timed loop.
pub fn run_benchmark(
    graph: &RoadGraph,
    model: CostModel,
    configs: &[AlgorithmConfig],
    trials: &[TrialSpec],
    artifacts: &Artifacts,
) -> Result<BenchReport> {
    let mut labels = std::collections::HashSet::new();
    for c in configs {
        if !labels.insert(&c.label) {
            return Err(Error::Config(format!("duplicate algorithm label `{}`", c.label)));
        }
    }
    artifacts.check(configs, trials)?;

    if let Some(t) = trials.first() {
        let scenario = sample_scenario(graph, t.regime, t.scenario_seed);
        let ctx = RoutingContext::new(graph, &scenario, model)?;
        for c in configs {
            let _ = run_query(c, &ctx, artifacts, t.src, t.dst);
        }
    }

    let mut records = Vec::with_capacity(trials.len());
    for t in trials {
        let scenario = sample_scenario(graph, t.regime, t.scenario_seed);
        let ctx = RoutingContext::new(graph, &scenario, model)?;
        let mut results = Vec::with_capacity(configs.len());
        for c in configs {
            match run_query(c, &ctx, artifacts, t.src, t.dst) {
                Ok(r) => results.push(Some(r)),
                Err(Error::NoPath { .. }) => results.push(None),
                Err(e) => return Err(e),
            }
        }
        records.push(TrialRecord {
            trial: t.clone(),
            results,
        });
    }
    Ok(BenchReport {
        model,
        configs: configs.to_vec(),
        preprocessing_s: configs.iter().map(|c| artifacts.preprocessing_s(c)).collect(),
        records,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatRow {
    pub test: &'static str,
    pub algo_a: String,
    pub algo_b: String,
    pub result: TestResult,
}

/// ANOVA across all configs, then paired t and Wilcoxon tests for every
/// unordered config pair, all on the common-solvable trials.
pub fn run_statistics(labels: &[String], columns: &[Vec<f64>]) -> Vec<StatRow> {
    let mut rows = Vec::new();
    if let Ok(r) = one_way_anova(columns) {
        rows.push(StatRow {
            test: "anova",
            algo_a: "*".into(),
            algo_b: "*".into(),
            result: r,
        });
    }
    for i in 0..columns.len() {
        for j in (i + 1)..columns.len() {
            if let Ok(r) = paired_t_test(&columns[i], &columns[j]) {
                rows.push(StatRow {
                    test: "paired_t",
                    algo_a: labels[i].clone(),
                    algo_b: labels[j].clone(),
                    result: r,
                });
            }
            if let Ok(r) = wilcoxon_signed_rank(&columns[i], &columns[j]) {
                rows.push(StatRow {
                    test: "wilcoxon",
                    algo_a: labels[i].clone(),
                    algo_b: labels[j].clone(),
                    result: r,
                });
            }
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apsp::floyd_warshall;
    use crate::graph::ResolvedView;
    use crate::ksp::preprocess_pairs;
    use crate::synth::{generate_synthetic_city, SynthParams};
    use crate::traffic::distance_costs;

    fn city(rows: usize, cols: usize, seed: u64) -> RoadGraph {
        let mut g = generate_synthetic_city(&SynthParams::new(rows, cols, seed)).unwrap();
        g.impute_speeds().unwrap();
        g
    }

    #[test]
    fn four_trials_one_per_regime() {
        let g = city(2, 5, 1);
        let t = generate_trials(&g, 4, 9, &TrafficRegime::ALL).unwrap();
        assert_eq!(t.len(), 4);
        let mut ends: Vec<NodeId> = t.iter().flat_map(|t| [t.src, t.dst]).collect();
        ends.sort();
        ends.dedup();
        assert_eq!(ends.len(), 8);
        let regimes: Vec<_> = t.iter().map(|t| t.regime).collect();
        assert_eq!(regimes, TrafficRegime::ALL.to_vec());
        assert_eq!(t[3].scenario_seed, 9 ^ 3);
        assert_eq!(t, generate_trials(&g, 4, 9, &TrafficRegime::ALL).unwrap());
    }

    #[test]
    fn too_many_trials() {
        let g = city(30, 50, 1);
        assert!(generate_trials(&g, 1000, 0, &TrafficRegime::ALL).is_err());
        assert!(generate_trials(&g, 6, 0, &TrafficRegime::ALL).is_err());
    }

    #[test]
    fn nine_standard_configs() {
        let c = standard_configs(
            &[HeuristicKind::Euclidean, HeuristicKind::GreatCircle],
            &[10.0, 100.0],
            5,
            DivisorMode::MaxSpeed,
        );
        assert_eq!(c.len(), 9);
        let labels: std::collections::HashSet<_> = c.iter().map(|c| &c.label).collect();
        assert_eq!(labels.len(), 9);
    }

    #[test]
    fn missing_artifact_is_config_error() {
        let g = city(3, 4, 1);
        let trials = generate_trials(&g, 4, 0, &TrafficRegime::ALL).unwrap();
        let err = run_benchmark(&g, CostModel::V1, &[AlgorithmConfig::fw()], &trials, &Artifacts::default())
            .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn no_traffic_trial_fw_equals_dijkstra() {
        let g = city(4, 4, 2);
        let costs = distance_costs(&g);
        let view = ResolvedView::resolve(&g, &costs);
        let artifacts = Artifacts {
            apsp: Some(floyd_warshall(&g, &view, &costs)),
            ..Default::default()
        };
        let trials = generate_trials(&g, 1, 5, &[TrafficRegime::None]).unwrap();
        let report = run_benchmark(
            &g,
            CostModel::V1,
            &[AlgorithmConfig::dijkstra(), AlgorithmConfig::fw()],
            &trials,
            &artifacts,
        )
        .unwrap();
        let rec = &report.records[0];
        if rec.solved_by_all() {
            let (d, f) = (rec.results[0].as_ref().unwrap(), rec.results[1].as_ref().unwrap());
            assert!((d.cost - f.cost).abs() <= 1e-9 * d.cost.max(1.0));
        }
    }

    #[test]
    fn small_benchmark_orderings() {
        let g = city(10, 10, 4);
        let costs = distance_costs(&g);
        let view = ResolvedView::resolve(&g, &costs);
        let trials = generate_trials(&g, 20, 1, &TrafficRegime::ALL).unwrap();
        let pairs: Vec<_> = trials.iter().map(|t| (t.src, t.dst)).collect();
        let mut store = CandidateStore::in_memory();
        preprocess_pairs(&g, &view, &costs, &pairs, 5, &mut store, |_, _| {}).unwrap();
        let mut heuristics = HashMap::new();
        for h in [HeuristicKind::Euclidean, HeuristicKind::GreatCircle] {
            heuristics.insert(h, HeuristicTable::build(&g, h));
        }
        let artifacts = Artifacts {
            apsp: Some(floyd_warshall(&g, &view, &costs)),
            heuristics,
            ksp: Some(KspArtifact {
                k: 5,
                store,
                build_time_s: 0.0,
            }),
        };
        let configs = standard_configs(
            &[HeuristicKind::Euclidean, HeuristicKind::GreatCircle],
            &[10.0, 100.0],
            5,
            DivisorMode::MaxSpeed,
        );
        let report = run_benchmark(&g, CostModel::V1, &configs, &trials, &artifacts).unwrap();
        let s = report.summaries();
        let by = |l: &str| s.iter().find(|x| x.label == l).unwrap();
        let (fw, dij, yen) = (by("fw"), by("dijkstra"), by("yen_k5"));
        assert!(dij.avg_cost <= yen.avg_cost + 1e-9);
        assert!(yen.avg_cost <= fw.avg_cost + 1e-9);
        assert!(fw.avg_expanded.is_none() && yen.avg_expanded.is_none());
        assert!(dij.avg_expanded.is_some());
        for x in &s {
            assert_eq!(x.solved + x.unsolved, 20);
        }
        let stats = run_statistics(
            &configs.iter().map(|c| c.label.clone()).collect::<Vec<_>>(),
            &report.cost_columns(),
        );
        assert_eq!(stats.iter().filter(|r| r.test == "anova").count(), 1);
        assert_eq!(stats.iter().filter(|r| r.test == "paired_t").count(), 36);
        assert!(stats.iter().all(|r| (0.0..=1.0).contains(&r.result.p_value)));
    }
}
