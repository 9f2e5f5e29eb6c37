//! Browser bindings for the demo page. Every export returns a JSON string so
//! the page stays plain JavaScript.

use std::path::Path;

use hinimp::experiment::{prepare, run_folds, RunConfig};
use hinimp::knowledge::centrality::{centralities, raw_centralities};
use hinimp::knowledge::MEASURE_NAMES;
use hinimp::model::ot::{empirical_cdf, pairwise_distance, wasserstein_embed, ReferenceDistribution};
use hinimp::rng;
use rand::Rng as _;
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn to_js<T: Serialize>(v: &T) -> Result<String, JsValue> {
    serde_json::to_string(v).map_err(|e| JsValue::from_str(&e.to_string()))
}

fn js_err(e: hinimp::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

#[derive(Serialize)]
struct OtView {
    values: Vec<f64>,
    reference: Vec<f64>,
    embedding: Vec<f64>,
    /// `d * W1(P0, P)` recomputed from the sorted atoms.
    distance: f64,
    l1_norm: f64,
    /// `(x, F_h(x), F_ref(x))` sampled over the joint support.
    cdf: Vec<[f64; 3]>,
}

/// Embeds a comma-separated vector against a reference drawn from `seed`.
#[wasm_bindgen]
pub fn wasserstein_view(values: &str, seed: u32) -> Result<String, JsValue> {
    let h: Vec<f64> = values
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| JsValue::from_str(&format!("not a number: {s}"))))
        .collect::<Result<_, _>>()?;
    if h.is_empty() || h.iter().any(|x| !x.is_finite()) {
        return Err(JsValue::from_str("need at least one finite value"));
    }
    let reference = ReferenceDistribution::new(h.len(), u64::from(seed));
    let embedding = wasserstein_embed(&h, &reference).map_err(js_err)?;
    let mut sorted = h.clone();
    sorted.sort_by(f64::total_cmp);
    let distance = sorted.iter().zip(&reference.sorted).map(|(a, b)| (a - b).abs()).sum();
    let mut xs: Vec<f64> = sorted.iter().chain(&reference.sorted).copied().collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let cdf = xs
        .iter()
        .map(|&x| [x, empirical_cdf(&h, x), empirical_cdf(&reference.values, x)])
        .collect();
    to_js(&OtView {
        l1_norm: pairwise_distance(&embedding, &vec![0.0; h.len()]),
        values: h,
        reference: reference.values,
        embedding,
        distance,
        cdf,
    })
}

#[derive(Serialize)]
struct CentralityView {
    nodes: usize,
    edges: Vec<[usize; 2]>,
    measures: Vec<&'static str>,
    raw: Vec<[f64; 6]>,
    normalized: Vec<[f64; 6]>,
}

/// Random undirected graph with edge probability `p`, plus every measure.
#[wasm_bindgen]
pub fn centrality_view(nodes: u32, p: f64, seed: u32) -> Result<String, JsValue> {
    let n = nodes as usize;
    if !(1..=200).contains(&n) || !(0.0..=1.0).contains(&p) {
        return Err(JsValue::from_str("nodes must be 1..200 and p in [0, 1]"));
    }
    let mut r = rng::derived(u64::from(seed), rng::tag("web-graph"));
    let mut adj = vec![Vec::new(); n];
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if r.random::<f64>() < p {
                adj[i].push(j);
                adj[j].push(i);
                edges.push([i, j]);
            }
        }
    }
    to_js(&CentralityView {
        nodes: n,
        edges,
        measures: MEASURE_NAMES.to_vec(),
        raw: raw_centralities(&adj),
        normalized: centralities(&adj),
    })
}

#[derive(Serialize)]
struct TrainView {
    epochs: Vec<usize>,
    train_mae: Vec<f64>,
    val_mae: Vec<f64>,
    best_epoch: usize,
    test_mae: f64,
    test_spearman: f64,
    test_ndcg: f64,
    label_std: f64,
}

/// Small planted-signal graph trained on one fold.
#[wasm_bindgen]
pub fn train_planted(epochs: u32, variant: &str, seed: u32) -> Result<String, JsValue> {
    let text = format!(
        "synthetic = custom
synthetic.node_types = author:60, paper:120, venue:20
synthetic.relation.writes = author -> paper, per_node=2, anchor=destination, attachment=preferential, inverse=written_by
synthetic.relation.published_in = paper -> venue, per_node=1, anchor=source, attachment=preferential, inverse=publishes
synthetic.label.author = slope=0.25, intercept=1, noise=0.05
seed = {seed}
cache = false
node2vec.dimension = 16
node2vec.walks_per_node = 3
node2vec.walk_length = 12
node2vec.window = 3
node2vec.epochs = 1
model.variant = {variant}
model.heads = 2
model.head_dim = 8
model.attention_hidden = 16
model.mlp_hidden = 16
train.learning_rate = 0.02
train.epochs = {epochs}
train.patience = {epochs}
train.folds = 0
train.record_timing = false
"
    );
    let cfg = RunConfig::parse(&text, Path::new(".")).map_err(js_err)?;
    let prep = prepare(&cfg).map_err(js_err)?;
    let run = run_folds(&cfg, &prep).map_err(js_err)?.remove(0);
    let labels: Vec<f64> = prep.graph.labels().iter().flatten().copied().collect();
    let mean = labels.iter().sum::<f64>() / labels.len() as f64;
    let var = labels.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / labels.len() as f64;
    let split = |s: &str| -> Vec<f64> {
        run.outcome
            .log
            .iter()
            .filter(|r| r.split == s)
            .map(|r| r.metrics.mae)
            .collect()
    };
    let train_mae = split("train");
    to_js(&TrainView {
        epochs: (0..train_mae.len()).collect(),
        val_mae: split("val"),
        train_mae,
        best_epoch: run.outcome.best_epoch,
        test_mae: run.report.micro.mae,
        test_spearman: run.report.micro.spearman,
        test_ndcg: run.report.micro.ndcg,
        label_std: var.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ot_view_distance_matches_norm() {
        let v: serde_json::Value = serde_json::from_str(&wasserstein_view("0.3, 2, -1, 0.5", 4).unwrap()).unwrap();
        let d = v["distance"].as_f64().unwrap();
        assert!((d - v["l1_norm"].as_f64().unwrap()).abs() < 1e-12);
        assert_eq!(v["embedding"].as_array().unwrap().len(), 4);
    }

    #[test]
    fn centrality_view_shapes() {
        let v: serde_json::Value = serde_json::from_str(&centrality_view(12, 0.3, 1).unwrap()).unwrap();
        assert_eq!(v["normalized"].as_array().unwrap().len(), 12);
        assert_eq!(v["measures"].as_array().unwrap().len(), 6);
    }

    #[test]
    fn tiny_training_runs() {
        let v: serde_json::Value = serde_json::from_str(&train_planted(5, "full", 2).unwrap()).unwrap();
        assert_eq!(v["train_mae"].as_array().unwrap().len(), 5);
        assert!(v["test_mae"].as_f64().unwrap().is_finite());
    }
}
