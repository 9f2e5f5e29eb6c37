use std::io::Write;
use std::rc::Rc;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{
    l2_regularizer_var, margin_ranking_var, mse_loss, mse_loss_var, sample_triplets, Fold, TargetTransform, TrainConfig,
};
use crate::autodiff::{Adam, AdamConfig, Tape};
use crate::graph::{HeterogeneousGraph, NodeId};
use crate::metrics::MetricSet;
use crate::model::{Model, ModelInputs};
use crate::{rng, Error, Result};

pub const LOG_HEADER: &str = "epoch,fold,split,mae,rmse,nrmse,ndcg,spearman,loss,epoch_ms";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub epoch: usize,
    pub fold: usize,
    pub split: String,
    pub metrics: MetricSet,
    /// Training objective on the train row; plain type-balanced MSE (in
    /// the transformed target space) on the val and test rows.
    pub loss: f64,
    pub epoch_ms: f64,
}

impl LogRow {
    pub fn csv(&self) -> String {
        let m = &self.metrics;
        format!(
            "{},{},{},{},{},{},{},{},{},{:.3}",
            self.epoch, self.fold, self.split, m.mae, m.rmse, m.nrmse, m.ndcg, m.spearman, self.loss, self.epoch_ms
        )
    }
}

pub fn write_log_csv(rows: &[LogRow], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "{LOG_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.csv())?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub log: Vec<LogRow>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_val_mae: f64,
    pub epochs_run: usize,
    pub mean_epoch_ms: f64,
    /// Set when the triplet filter could not be met for some step.
    pub triplet_shortfall: bool,
}

struct Split {
    name: &'static str,
    /// Positions into the scored node list.
    pos: Vec<usize>,
}

#[cfg(not(target_arch = "wasm32"))]
fn clock() -> Option<std::time::Instant> {
    Some(std::time::Instant::now())
}

#[cfg(target_arch = "wasm32")]
fn clock() -> Option<()> {
    None
}

#[cfg(not(target_arch = "wasm32"))]
fn elapsed_ms(t: Option<std::time::Instant>) -> f64 {
    t.map_or(0.0, |t| t.elapsed().as_secs_f64() * 1e3)
}

#[cfg(target_arch = "wasm32")]
fn elapsed_ms(_: Option<()>) -> f64 {
    0.0
}

/// Trains `model` on one fold and leaves the best-validation parameters in
/// it. Metrics in the log are computed from the scores of the forward pass
/// that precedes each update, in the original label space.
pub fn train(
    model: &mut Model,
    inputs: &ModelInputs,
    g: &HeterogeneousGraph,
    fold: &Fold,
    fold_index: usize,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.check()?;
    if fold.train.is_empty() {
        return Err(Error::Insufficient("fold has no training nodes".into()));
    }
    let scored: Vec<NodeId> = fold.train.iter().chain(&fold.val).chain(&fold.test).copied().collect();
    let mut labels = Vec::with_capacity(scored.len());
    for &v in &scored {
        let y = g
            .label(v)
            .ok_or_else(|| Error::Insufficient(format!("node {} has no label", g.orig_id(v))))?;
        if cfg.target == TargetTransform::Log1p && y <= -1.0 {
            return Err(Error::Config(format!("log1p target needs labels > -1; node {} has {y}", g.orig_id(v))));
        }
        labels.push(y);
    }
    let targets: Vec<f64> = labels.iter().map(|&y| cfg.target.forward(y)).collect();
    let types: Vec<usize> = scored.iter().map(|&v| g.node_type(v).0).collect();
    let (nt, nv) = (fold.train.len(), fold.val.len());
    let splits = [
        Split { name: "train", pos: (0..nt).collect() },
        Split { name: "val", pos: (nt..nt + nv).collect() },
        Split { name: "test", pos: (nt + nv..scored.len()).collect() },
    ];
    let scored_idx = Rc::new(scored.iter().map(|v| v.0).collect::<Vec<_>>());

    let mut adam = Adam::new(
        &model.store,
        AdamConfig {
            lr: cfg.learning_rate,
            ..AdamConfig::default()
        },
    );
    let mut log = Vec::new();
    let mut best = (usize::MAX, f64::INFINITY, model.store.clone());
    let mut total_ms = 0.0;
    let mut shortfall = false;
    let mut epochs_run = 0;

    for epoch in 0..cfg.epochs {
        let started = clock();
        let batch: Vec<usize> = if cfg.batch_fraction < 1.0 {
            let size = ((cfg.batch_fraction * nt as f64).round() as usize).clamp(1, nt);
            let mut r = rng::derived(cfg.seed, rng::tag("batch").wrapping_add(epoch as u64));
            let mut b = sample(&mut r, nt, size).into_vec();
            b.sort_unstable();
            b
        } else {
            (0..nt).collect()
        };

        let tape = Tape::new();
        let out = model.forward(&tape, inputs, &scored_idx)?;
        let batch_scores = out.scores.gather_rows(Rc::new(batch.clone()))?;
        let batch_targets: Vec<f64> = batch.iter().map(|&i| targets[i]).collect();
        let batch_types: Vec<usize> = batch.iter().map(|&i| types[i]).collect();
        let mut loss = mse_loss_var(&tape, batch_scores, &batch_targets, &batch_types)?;
        if let Some(reg) = l2_regularizer_var(&tape, &model.store, cfg.weight_decay) {
            loss = loss.add(reg)?;
        }
        if cfg.rank_weight > 0.0 {
            let keyed: Vec<(usize, f64)> = batch.iter().map(|&i| (types[i], targets[i])).collect();
            let seed = rng::derive(cfg.seed, rng::tag("epoch-triplets").wrapping_add(epoch as u64));
            let (trip, short) = sample_triplets(&keyed, cfg.triplets, seed);
            shortfall |= short;
            if let Some(r) = margin_ranking_var(&tape, batch_scores, &trip, cfg.margin)? {
                loss = loss.add(r.scale(cfg.rank_weight))?;
            }
        }
        let loss_value = loss.item();
        let scores = out.scores.value();
        let grads = tape.backward(loss)?;
        if !loss_value.is_finite() {
            let culprit = grads
                .iter()
                .find(|(_, g)| !g.all_finite())
                .map_or_else(|| "no single parameter".to_string(), |(id, _)| model.store.get(id).name.clone());
            return Err(Error::NonFinite(format!(
                "training loss at epoch {epoch} (fold {fold_index}); first non-finite gradient: {culprit}"
            )));
        }

        let preds: Vec<f64> = scores.data().iter().map(|&z| cfg.target.inverse(z)).collect();
        let mut rows = Vec::with_capacity(3);
        for s in &splits {
            if s.pos.is_empty() {
                continue;
            }
            let p: Vec<f64> = s.pos.iter().map(|&i| preds[i]).collect();
            let y: Vec<f64> = s.pos.iter().map(|&i| labels[i]).collect();
            let metrics = MetricSet::compute(&p, &y, cfg.ndcg_k, cfg.nrmse_norm)?;
            let split_loss = if s.name == "train" {
                loss_value
            } else {
                let z: Vec<f64> = s.pos.iter().map(|&i| scores.data()[i]).collect();
                let t: Vec<f64> = s.pos.iter().map(|&i| targets[i]).collect();
                let ty: Vec<usize> = s.pos.iter().map(|&i| types[i]).collect();
                mse_loss(&z, &t, &ty)?
            };
            rows.push(LogRow {
                epoch,
                fold: fold_index,
                split: s.name.to_string(),
                metrics,
                loss: split_loss,
                epoch_ms: 0.0,
            });
        }
        // Early stopping watches validation MAE, or train MAE without a
        // validation split.
        let watch = rows
            .iter()
            .find(|r| r.split == "val")
            .unwrap_or(&rows[0])
            .metrics
            .mae;
        if watch < best.1 {
            best = (epoch, watch, model.store.clone());
        }
        adam.step(&mut model.store, grads)?;
        epochs_run = epoch + 1;

        let ms = if cfg.record_timing { elapsed_ms(started) } else { 0.0 };
        total_ms += ms;
        for r in &mut rows {
            r.epoch_ms = ms;
        }
        log.extend(rows);
        if best.0 != usize::MAX && epoch - best.0 >= cfg.patience {
            break;
        }
    }
    if best.0 != usize::MAX {
        model.store = best.2;
    }
    Ok(TrainOutcome {
        log,
        best_epoch: if best.0 == usize::MAX { 0 } else { best.0 },
        best_val_mae: best.1,
        epochs_run,
        mean_epoch_ms: if epochs_run > 0 { total_ms / epochs_run as f64 } else { 0.0 },
        triplet_shortfall: shortfall,
    })
}
