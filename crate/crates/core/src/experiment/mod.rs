//! Run orchestration: data loading, knowledge caching, cross-validated
//! training, evaluation, prediction, ablation and result export.

pub mod config;
pub mod svg;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autodiff::Tensor;
use crate::container::Container;
use crate::graph::{generate_synthetic, load_graph, save_graph};
use crate::graph::{HeterogeneousGraph, NodeId};
use crate::knowledge::{build_bank, disable_knowledge, graph_fingerprint, KnowledgeBank};
use crate::metapath::{enumerate_metapaths, Metapath};
use crate::metrics::{EvalReport, MetricSet};
use crate::model::{Model, ModelInputs, Variant};
use crate::training::{make_folds, train, write_log_csv, FoldPlan, LogRow, TrainOutcome};
use crate::{pool, rng, Error, Result};

pub use config::{keys_help, planted_spec, DataSource, RunConfig, KEYS};

/// Metapath used by `wo_nh` on the collapsed graph.
pub const HOMOGENEOUS_METAPATH: &str = "node[edge]node[edge]node";

/// Bumped whenever the bank layout or its inputs change meaning.
const CACHE_FORMAT: u32 = 1;

pub fn version() -> String {
    match option_env!("HINIMP_GIT_DESCRIBE") {
        Some(d) => format!("v{}-{d}", env!("CARGO_PKG_VERSION")),
        None => format!("v{}", env!("CARGO_PKG_VERSION")),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

#[cfg(not(target_arch = "wasm32"))]
fn now() -> Option<std::time::Instant> {
    Some(std::time::Instant::now())
}

#[cfg(not(target_arch = "wasm32"))]
fn ms_since(t: Option<std::time::Instant>) -> f64 {
    t.map_or(0.0, |t| t.elapsed().as_secs_f64() * 1e3)
}

#[cfg(target_arch = "wasm32")]
fn now() -> Option<()> {
    None
}

#[cfg(target_arch = "wasm32")]
fn ms_since(_: Option<()>) -> f64 {
    0.0
}

/// The graph as configured, before any variant transform.
pub fn source_graph(cfg: &RunConfig) -> Result<HeterogeneousGraph> {
    match &cfg.data {
        DataSource::Dataset { nodes, edges, features } => load_graph(nodes, edges, features.as_deref()),
        DataSource::Synthetic(spec) => generate_synthetic(spec),
    }
}

/// Graph, metapaths, features and knowledge bank for one config.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub graph: HeterogeneousGraph,
    pub metapaths: Vec<Metapath>,
    pub feature_dim: usize,
    pub features: Vec<f64>,
    /// Intact bank; disabling happens per run.
    pub bank: KnowledgeBank,
    pub cache_key: String,
    pub cache_hit: bool,
}

impl Prepared {
    pub fn labeled(&self) -> Vec<(NodeId, crate::NodeTypeId)> {
        (0..self.graph.node_count())
            .map(NodeId)
            .filter(|&v| self.graph.label(v).is_some())
            .map(|v| (v, self.graph.node_type(v)))
            .collect()
    }

    pub fn folds(&self, seed: u64) -> Result<FoldPlan> {
        make_folds(&self.labeled(), seed)
    }

    /// The bank with `fraction` of its slots disabled under `seed`.
    pub fn bank_for(&self, fraction: f64, seed: u64) -> KnowledgeBank {
        disable_knowledge(&self.bank, fraction, rng::derive(seed, rng::tag("disable")))
    }

    pub fn inputs(&self, bank: &KnowledgeBank) -> Result<ModelInputs> {
        let x = Tensor::new(self.graph.node_count(), self.feature_dim, self.features.clone())?;
        ModelInputs::new(&self.graph, bank, x)
    }
}

fn resolve_metapaths(cfg: &RunConfig, g: &HeterogeneousGraph) -> Result<Vec<Metapath>> {
    if cfg.model.variant == Variant::WoNh {
        return Ok(vec![Metapath::parse(HOMOGENEOUS_METAPATH, g)?]);
    }
    if cfg.metapaths.is_empty() {
        return Ok(enumerate_metapaths(g, cfg.metapath_max_nodes));
    }
    cfg.metapaths
        .iter()
        .map(|s| {
            let p = Metapath::parse(s, g)?;
            if p.source_type() != p.target_type() {
                return Err(Error::Metapath(format!("{s} does not return to its source type")));
            }
            Ok(p)
        })
        .collect()
}

fn cache_key(cfg: &RunConfig, g: &HeterogeneousGraph, metapaths: &[Metapath], feature_dim: usize) -> Result<String> {
    let key = serde_json::json!({
        "format": CACHE_FORMAT,
        "graph": graph_fingerprint(g),
        "metapaths": metapaths.iter().map(|p| p.display(g)).collect::<Vec<_>>(),
        "knowledge": cfg.knowledge,
        "feature_dim": feature_dim,
        "feature_seed": rng::derive(cfg.seed, rng::tag("features")),
    });
    let digest = Sha256::digest(serde_json::to_vec(&key)?);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

pub fn cache_path(cfg: &RunConfig, key: &str) -> PathBuf {
    cfg.output.join("cache").join(format!("bank-{}.hinimp", &key[..16]))
}

/// Loads the graph (collapsed for `wo_nh`), resolves metapaths and builds
/// or reloads the knowledge bank.
pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let mut graph = source_graph(cfg)?;
    if cfg.model.variant == Variant::WoNh {
        graph = graph.homogenized();
    }
    let metapaths = resolve_metapaths(cfg, &graph)?;
    let feature_dim = graph.feature_dim().unwrap_or(cfg.feature_dim);
    let features = graph.feature_matrix(feature_dim, rng::derive(cfg.seed, rng::tag("features")));
    let key = cache_key(cfg, &graph, &metapaths, feature_dim)?;
    let path = cache_path(cfg, &key);
    let cached = if cfg.cache && path.exists() {
        let c = Container::load(&path)?;
        if c.manifest.get("key").and_then(|k| k.as_str()) == Some(key.as_str()) {
            Some(KnowledgeBank::from_container(&c, &graph, &metapaths, cfg.knowledge.node2vec.dimension)?)
        } else {
            None
        }
    } else {
        None
    };
    let cache_hit = cached.is_some();
    let bank = match cached {
        Some(b) => b,
        None => {
            let b = build_bank(&graph, &metapaths, &features, feature_dim, &cfg.knowledge, pool::threads_from_env())?;
            if cfg.cache {
                let manifest = serde_json::json!({
                    "key": key,
                    "metapaths": metapaths.iter().map(|p| p.display(&graph)).collect::<Vec<_>>(),
                    "knowledge": cfg.knowledge,
                });
                if let Some(dir) = path.parent() {
                    fs::create_dir_all(dir).map_err(io_err(dir))?;
                }
                b.to_container(manifest).save(&path)?;
            }
            b
        }
    };
    Ok(Prepared {
        graph,
        metapaths,
        feature_dim,
        features,
        bank,
        cache_key: key,
        cache_hit,
    })
}

/// Scores `nodes` and reports metrics per node type, in label space.
pub fn evaluate_nodes(
    model: &Model,
    inputs: &ModelInputs,
    g: &HeterogeneousGraph,
    nodes: &[NodeId],
    cfg: &RunConfig,
) -> Result<EvalReport> {
    let idx: Vec<usize> = nodes.iter().map(|v| v.0).collect();
    let scores = model.predict(inputs, &idx)?;
    let mut groups: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (&v, z) in nodes.iter().zip(scores) {
        let y = g
            .label(v)
            .ok_or_else(|| Error::Insufficient(format!("node {} has no label", g.orig_id(v))))?;
        let e = groups.entry(g.node_type_name(v).to_string()).or_default();
        e.0.push(cfg.train.target.inverse(z));
        e.1.push(y);
    }
    let groups: Vec<(String, Vec<f64>, Vec<f64>)> = groups.into_iter().map(|(k, (p, y))| (k, p, y)).collect();
    EvalReport::compute(&groups, cfg.train.ndcg_k, cfg.train.nrmse_norm)
}

#[derive(Debug, Clone)]
pub struct FoldRun {
    pub fold: usize,
    pub model: Model,
    pub outcome: TrainOutcome,
    /// Test-split report of the kept parameters.
    pub report: EvalReport,
}

/// Trains the configured folds (in parallel up to `HINIMP_THREADS`) with
/// the knowledge bank disabled at `cfg.knowledge_disable_fraction`.
pub fn run_folds(cfg: &RunConfig, prep: &Prepared) -> Result<Vec<FoldRun>> {
    let plan = prep.folds(cfg.seed)?;
    let bank = prep.bank_for(cfg.knowledge_disable_fraction, cfg.seed);
    let runs = pool::run_indexed(cfg.folds.len(), pool::threads_from_env(), |j| -> Result<FoldRun> {
        let f = cfg.folds[j];
        let inputs = prep.inputs(&bank)?;
        let mut model = Model::new(cfg.model.clone(), prep.feature_dim, bank.dim, prep.graph.edge_types().len())?;
        let outcome = train(&mut model, &inputs, &prep.graph, &plan.folds[f], f, &cfg.train)?;
        let report = evaluate_nodes(&model, &inputs, &prep.graph, &plan.folds[f].test, cfg)?;
        Ok(FoldRun {
            fold: f,
            model,
            outcome,
            report,
        })
    });
    runs.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub fold: usize,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub mean_epoch_ms: f64,
    pub test: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub version: String,
    pub variant: Variant,
    pub seed: u64,
    pub knowledge_disable_fraction: f64,
    pub config: BTreeMap<String, String>,
    pub folds: Vec<FoldSummary>,
    /// Arithmetic mean of the per-fold micro test metrics.
    pub aggregate: MetricSet,
    pub wall_clock_ms: f64,
    pub cache_hit: bool,
}

pub fn mean_metrics(sets: &[MetricSet]) -> MetricSet {
    let n = sets.len() as f64;
    let mean = |f: fn(&MetricSet) -> f64| sets.iter().map(f).sum::<f64>() / n;
    MetricSet {
        mae: mean(|m| m.mae),
        rmse: mean(|m| m.rmse),
        nrmse: mean(|m| m.nrmse),
        ndcg: mean(|m| m.ndcg),
        spearman: mean(|m| m.spearman),
    }
}

impl ExperimentResult {
    pub fn new(cfg: &RunConfig, runs: &[FoldRun], wall_clock_ms: f64, cache_hit: bool) -> Self {
        let folds: Vec<FoldSummary> = runs
            .iter()
            .map(|r| FoldSummary {
                fold: r.fold,
                best_epoch: r.outcome.best_epoch,
                epochs_run: r.outcome.epochs_run,
                mean_epoch_ms: r.outcome.mean_epoch_ms,
                test: r.report.clone(),
            })
            .collect();
        let micro: Vec<MetricSet> = folds.iter().map(|f| f.test.micro).collect();
        Self {
            version: version(),
            variant: cfg.model.variant,
            seed: cfg.seed,
            knowledge_disable_fraction: cfg.knowledge_disable_fraction,
            config: cfg.raw.clone(),
            aggregate: mean_metrics(&micro),
            folds,
            wall_clock_ms,
            cache_hit,
        }
    }
}

fn checkpoint_path(cfg: &RunConfig, fold: usize) -> PathBuf {
    cfg.output.join("checkpoints").join(format!("fold{fold}.hinimp"))
}

pub fn log_rows(runs: &[FoldRun]) -> Vec<LogRow> {
    runs.iter().flat_map(|r| r.outcome.log.iter().cloned()).collect()
}

pub fn log_csv(rows: &[LogRow]) -> String {
    let mut buf = Vec::new();
    write_log_csv(rows, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii")
}

/// Writes the synthetic dataset as TSV files under the output directory.
pub fn cmd_generate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let DataSource::Synthetic(spec) = &cfg.data else {
        return Err(Error::Config("generate needs a synthetic config".into()));
    };
    let g = generate_synthetic(spec)?;
    fs::create_dir_all(&cfg.output).map_err(io_err(&cfg.output))?;
    let paths = ["nodes.tsv", "edges.tsv", "features.tsv"].map(|f| cfg.output.join(f));
    let with_features = spec.feature_dim > 0;
    save_graph(&g, &paths[0], &paths[1], with_features.then_some(paths[2].as_path()))?;
    Ok(paths.into_iter().take(if with_features { 3 } else { 2 }).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessSummary {
    pub cache_hit: bool,
    pub cache_file: PathBuf,
    pub metapaths: Vec<String>,
    pub members: Vec<usize>,
    pub slots_per_member: usize,
}

pub fn cmd_preprocess(cfg: &RunConfig) -> Result<PreprocessSummary> {
    if !cfg.cache {
        return Err(Error::Config("preprocess writes the cache; set cache = true".into()));
    }
    let p = prepare(cfg)?;
    Ok(PreprocessSummary {
        cache_hit: p.cache_hit,
        cache_file: cache_path(cfg, &p.cache_key),
        metapaths: p.metapaths.iter().map(|m| m.display(&p.graph)).collect(),
        members: p.bank.entries.iter().map(|e| e.members.len()).collect(),
        slots_per_member: crate::knowledge::SLOTS,
    })
}

/// Trains every configured fold; writes `metrics.csv`, `folds.json`,
/// `result.json` and one checkpoint per fold.
pub fn cmd_train(cfg: &RunConfig) -> Result<ExperimentResult> {
    let started = now();
    let prep = prepare(cfg)?;
    let runs = run_folds(cfg, &prep)?;
    let result = ExperimentResult::new(cfg, &runs, ms_since(started), prep.cache_hit);
    write(&cfg.output.join("metrics.csv"), log_csv(&log_rows(&runs)))?;
    write(&cfg.output.join("folds.json"), serde_json::to_vec_pretty(&prep.folds(cfg.seed)?)?)?;
    for r in &runs {
        let extra = serde_json::json!({
            "fold": r.fold,
            "seed": cfg.seed,
            "cache_key": prep.cache_key,
            "knowledge_disable_fraction": cfg.knowledge_disable_fraction,
            "target": cfg.train.target,
            "best_epoch": r.outcome.best_epoch,
        });
        let path = checkpoint_path(cfg, r.fold);
        write(&path, r.model.to_container(extra).to_bytes())?;
    }
    write(&cfg.output.join("result.json"), serde_json::to_vec_pretty(&result)?)?;
    Ok(result)
}

/// A trained checkpoint with everything needed to score.
pub struct Loaded {
    pub prep: Prepared,
    pub model: Model,
    pub inputs: ModelInputs,
    pub fold: usize,
    pub best_epoch: usize,
}

pub fn load_checkpoint(cfg: &RunConfig) -> Result<Loaded> {
    let path = checkpoint_path(cfg, cfg.evaluate_fold);
    if !path.exists() {
        return Err(Error::Checkpoint(format!("{} not found; run train first", path.display())));
    }
    let c = Container::load(&path)?;
    let model = Model::from_container(&c)?;
    if model.config.reference_seed != cfg.model.reference_seed {
        return Err(Error::Checkpoint(format!(
            "reference seed mismatch: checkpoint {} vs config {} (was it trained with another seed?)",
            model.config.reference_seed, cfg.model.reference_seed
        )));
    }
    if model.config.variant != cfg.model.variant {
        return Err(Error::Checkpoint(format!(
            "checkpoint is variant {} but the config asks for {}",
            model.config.variant, cfg.model.variant
        )));
    }
    let prep = prepare(cfg)?;
    let get = |k: &str| c.manifest.get(k).cloned().unwrap_or(serde_json::Value::Null);
    if get("cache_key").as_str() != Some(prep.cache_key.as_str()) {
        return Err(Error::Checkpoint("checkpoint was trained on different data or knowledge settings".into()));
    }
    let fraction = get("knowledge_disable_fraction").as_f64().unwrap_or(0.0);
    let bank = prep.bank_for(fraction, cfg.seed);
    let inputs = prep.inputs(&bank)?;
    Ok(Loaded {
        best_epoch: get("best_epoch").as_u64().unwrap_or(0) as usize,
        prep,
        model,
        inputs,
        fold: cfg.evaluate_fold,
    })
}

/// Scores one split of the checkpoint's fold; writes the report as JSON
/// and as rows in the training log schema.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<EvalReport> {
    let l = load_checkpoint(cfg)?;
    let plan = l.prep.folds(cfg.seed)?;
    let fold = &plan.folds[l.fold];
    let nodes = match cfg.evaluate_split.as_str() {
        "train" => &fold.train,
        "val" => &fold.val,
        _ => &fold.test,
    };
    let report = evaluate_nodes(&l.model, &l.inputs, &l.prep.graph, nodes, cfg)?;
    let stem = format!("eval_fold{}_{}", l.fold, cfg.evaluate_split);
    write(&cfg.output.join(format!("{stem}.json")), serde_json::to_vec_pretty(&report)?)?;
    let row = LogRow {
        epoch: l.best_epoch,
        fold: l.fold,
        split: cfg.evaluate_split.clone(),
        metrics: report.micro,
        loss: report.micro.rmse * report.micro.rmse,
        epoch_ms: 0.0,
    };
    write(&cfg.output.join(format!("{stem}.csv")), log_csv(&[row]))?;
    Ok(report)
}

/// Scores the configured nodes (original ids) with the checkpoint; refuses
/// nodes whose type carries no labels.
pub fn cmd_predict(cfg: &RunConfig) -> Result<Vec<(String, f64)>> {
    let source = source_graph(cfg)?;
    let labeled: Vec<&str> = source
        .labeled_types()
        .iter()
        .map(|t| source.node_types().name(t.0))
        .collect();
    let ids: Vec<String> = if cfg.predict_nodes.is_empty() {
        (0..source.node_count())
            .map(NodeId)
            .filter(|&v| source.labeled_types().contains(&source.node_type(v)))
            .map(|v| source.orig_id(v).to_string())
            .collect()
    } else {
        cfg.predict_nodes.clone()
    };
    for id in &ids {
        let v = source
            .find_node(id)
            .ok_or_else(|| Error::Refused(format!("unknown node id {id:?}")))?;
        if !source.labeled_types().contains(&source.node_type(v)) {
            return Err(Error::Refused(format!(
                "node {id:?} has type {:?}; importance is only defined for the labeled types {labeled:?}",
                source.node_type_name(v)
            )));
        }
    }
    let l = load_checkpoint(cfg)?;
    let idx: Vec<usize> = ids
        .iter()
        .map(|id| l.prep.graph.find_node(id).map(|v| v.0).expect("same ids after any collapse"))
        .collect();
    let scores = l.model.predict(&l.inputs, &idx)?;
    let out: Vec<(String, f64)> = ids
        .into_iter()
        .zip(scores)
        .map(|(id, z)| (id, cfg.train.target.inverse(z)))
        .collect();
    let mut tsv = String::from("# orig_id\tscore\n");
    for (id, s) in &out {
        tsv.push_str(&format!("{id}\t{s}\n"));
    }
    write(&cfg.output.join(format!("predictions_fold{}.tsv", l.fold)), tsv)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub fraction: f64,
    pub metrics: MetricSet,
}

pub const ABLATION_HEADER: &str = "fraction,mae,rmse,nrmse,ndcg,spearman";

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut s = format!("{ABLATION_HEADER}\n");
    for r in rows {
        let m = &r.metrics;
        s.push_str(&format!("{},{},{},{},{},{}\n", r.fraction, m.mae, m.rmse, m.nrmse, m.ndcg, m.spearman));
    }
    s
}

/// One full cross-validated run per disable fraction, shared seed; writes
/// `ablation.csv` and `ablation.svg`.
pub fn cmd_ablate(cfg: &RunConfig) -> Result<Vec<AblationRow>> {
    let prep = prepare(cfg)?;
    let mut rows = Vec::new();
    for &fraction in &cfg.ablate_fractions {
        let mut c = cfg.clone();
        c.knowledge_disable_fraction = fraction;
        let runs = run_folds(&c, &prep)?;
        let micro: Vec<MetricSet> = runs.iter().map(|r| r.report.micro).collect();
        rows.push(AblationRow {
            fraction,
            metrics: mean_metrics(&micro),
        });
    }
    write(&cfg.output.join("ablation.csv"), ablation_csv(&rows))?;
    let xs: Vec<f64> = rows.iter().map(|r| r.fraction).collect();
    let mae: Vec<f64> = rows.iter().map(|r| r.metrics.mae).collect();
    let rmse: Vec<f64> = rows.iter().map(|r| r.metrics.rmse).collect();
    let chart = svg::line_chart(
        "Test error vs disabled knowledge",
        "disabled fraction",
        &xs,
        &[("MAE", &mae), ("RMSE", &rmse)],
    );
    write(&cfg.output.join("ablation.svg"), chart)?;
    Ok(rows)
}
