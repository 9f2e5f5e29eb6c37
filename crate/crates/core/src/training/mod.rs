//! Losses, cross-validation folds, triplet sampling and the training loop.

mod folds;
mod trainer;
mod triplets;

use std::rc::Rc;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamStore, Tape, Tensor, Var};
use crate::metrics::{NrmseNorm, DEFAULT_NDCG_K};
use crate::{Error, Result};

pub use folds::{make_folds, Fold, FoldPlan, FOLDS, VALIDATION_SHARE};
pub use trainer::{train, write_log_csv, LogRow, TrainOutcome, LOG_HEADER};
pub use triplets::sample_triplets;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetTransform {
    #[default]
    Identity,
    Log1p,
}

impl TargetTransform {
    pub fn forward(self, y: f64) -> f64 {
        match self {
            Self::Identity => y,
            Self::Log1p => y.ln_1p(),
        }
    }

    pub fn inverse(self, z: f64) -> f64 {
        match self {
            Self::Identity => z,
            Self::Log1p => z.exp_m1(),
        }
    }
}

impl FromStr for TargetTransform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Self::Identity),
            "log1p" => Ok(Self::Log1p),
            _ => Err(Error::Config(format!("unknown target transform {s:?} (expected identity or log1p)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// L2 coefficient on every trainable tensor.
    pub weight_decay: f64,
    pub margin: f64,
    /// Weight of the margin ranking term; 0 disables it.
    pub rank_weight: f64,
    pub triplets: usize,
    pub patience: usize,
    /// Share of training nodes used per step; 1 means full batch.
    pub batch_fraction: f64,
    pub seed: u64,
    pub target: TargetTransform,
    pub ndcg_k: usize,
    pub nrmse_norm: NrmseNorm,
    /// When false the `epoch_ms` column is written as 0.
    pub record_timing: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            learning_rate: 1e-3,
            weight_decay: 1e-4,
            margin: 1.0,
            rank_weight: 0.0,
            triplets: 256,
            patience: 50,
            batch_fraction: 1.0,
            seed: 0,
            target: TargetTransform::Identity,
            ndcg_k: DEFAULT_NDCG_K,
            nrmse_norm: NrmseNorm::Range,
            record_timing: true,
        }
    }
}

impl TrainConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config("weight_decay must be >= 0".into()));
        }
        if self.rank_weight < 0.0 || !self.rank_weight.is_finite() {
            return Err(Error::Config("rank_weight must be a finite value >= 0".into()));
        }
        if self.rank_weight > 0.0 && !(self.margin > 0.0) {
            return Err(Error::Config("margin must be > 0 when the ranking loss is enabled".into()));
        }
        if !(self.learning_rate >= 0.0) {
            return Err(Error::Config("learning_rate must be >= 0".into()));
        }
        if !(self.batch_fraction > 0.0 && self.batch_fraction <= 1.0) {
            return Err(Error::Config("batch_fraction must lie in (0, 1]".into()));
        }
        if self.ndcg_k == 0 {
            return Err(Error::Config("ndcg_k must be positive".into()));
        }
        Ok(())
    }
}

/// Row weights that turn a squared-error sum into the mean over types of
/// per-type means.
pub fn type_balanced_weights(types: &[usize]) -> Result<Vec<f64>> {
    let mut counts = std::collections::BTreeMap::new();
    for &t in types {
        *counts.entry(t).or_insert(0usize) += 1;
    }
    if counts.is_empty() {
        return Err(Error::Insufficient("mse over an empty type set".into()));
    }
    let k = counts.len() as f64;
    Ok(types.iter().map(|t| 1.0 / (k * counts[t] as f64)).collect())
}

/// `(1/|A'|) sum_j (1/|V^j|) sum_{v in V^j} (g(v) - y_v)^2` on plain values.
pub fn mse_loss(preds: &[f64], labels: &[f64], types: &[usize]) -> Result<f64> {
    if preds.len() != labels.len() || preds.len() != types.len() {
        return Err(Error::shape("mse_loss", &[preds.len(), labels.len()], &[types.len()]));
    }
    let w = type_balanced_weights(types)?;
    Ok(preds.iter().zip(labels).zip(&w).map(|((p, y), w)| w * (p - y).powi(2)).sum())
}

/// Tape version of [`mse_loss`]; `scores` is `n x 1`.
pub fn mse_loss_var<'t>(tape: &'t Tape, scores: Var<'t>, labels: &[f64], types: &[usize]) -> Result<Var<'t>> {
    let w = type_balanced_weights(types)?;
    let y = tape.constant(Tensor::column(labels.to_vec()));
    Ok(scores.sub(y)?.square().scale_rows_const(Rc::new(w))?.sum())
}

/// `mu * sum ||p||^2` over the trainable parameters of `store`.
pub fn l2_regularizer(store: &ParamStore, mu: f64) -> f64 {
    mu * store
        .iter()
        .filter(|(_, p)| p.trainable)
        .map(|(_, p)| p.value.squared_norm())
        .sum::<f64>()
}

pub fn l2_regularizer_var<'t>(tape: &'t Tape, store: &ParamStore, mu: f64) -> Option<Var<'t>> {
    if mu == 0.0 {
        return None;
    }
    let mut acc: Option<Var<'t>> = None;
    for (id, p) in store.iter() {
        if !p.trainable {
            continue;
        }
        let term = tape.param(store, id).square().sum();
        acc = Some(match acc {
            None => term,
            Some(a) => a.add(term).expect("scalars"),
        });
    }
    acc.map(|a| a.scale(mu))
}

/// `max(0, m - g_plus + g_minus)`.
pub fn margin_ranking_loss(_g_i: f64, g_plus: f64, g_minus: f64, m: f64) -> f64 {
    (m - g_plus + g_minus).max(0.0)
}

/// Mean margin loss over `triplets` (indices into the rows of `scores`).
/// The active set is fixed from the current values, which gives the usual
/// subgradient of the hinge.
pub fn margin_ranking_var<'t>(
    tape: &'t Tape,
    scores: Var<'t>,
    triplets: &[(usize, usize, usize)],
    m: f64,
) -> Result<Option<Var<'t>>> {
    if triplets.is_empty() {
        return Ok(None);
    }
    let plus = Rc::new(triplets.iter().map(|t| t.1).collect::<Vec<_>>());
    let minus = Rc::new(triplets.iter().map(|t| t.2).collect::<Vec<_>>());
    let gp = scores.gather_rows(plus)?;
    let gm = scores.gather_rows(minus)?;
    let n = triplets.len() as f64;
    let lin = gm.sub(gp)?.add(tape.constant(Tensor::filled(triplets.len(), 1, m)))?;
    let active: Vec<f64> = lin.value().data().iter().map(|&x| if x > 0.0 { 1.0 / n } else { 0.0 }).collect();
    Ok(Some(lin.scale_rows_const(Rc::new(active))?.sum()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_examples() {
        assert_eq!(mse_loss(&[1.0, 2.0], &[1.0, 2.0], &[0, 0]).unwrap(), 0.0);
        assert_eq!(mse_loss(&[1.0, 3.0], &[0.0, 1.0], &[0, 0]).unwrap(), 2.5);
        // Type 0 has MSE 2, type 1 has MSE 4.
        let v = mse_loss(&[2.0, 0.0, 2.0], &[0.0, 0.0, 0.0], &[0, 0, 1]);
        assert!((v.unwrap() - 3.0).abs() < 1e-12);
        assert!(mse_loss(&[], &[], &[]).is_err());
    }

    #[test]
    fn mse_tape_matches_values() {
        let tape = Tape::new();
        let s = tape.leaf(Tensor::column(vec![2.0, 0.0, 2.0]));
        let l = mse_loss_var(&tape, s, &[0.0, 0.0, 0.0], &[0, 0, 1]).unwrap();
        assert!((l.item() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn l2_examples() {
        let mut store = ParamStore::new();
        store.add("p", Tensor::row_vector(vec![3.0, 4.0]), true);
        store.add("frozen", Tensor::row_vector(vec![10.0]), false);
        assert_eq!(l2_regularizer(&store, 0.0), 0.0);
        assert_eq!(l2_regularizer(&store, 1.0), 25.0);
        assert_eq!(l2_regularizer(&store, 2.0), 50.0);
        let tape = Tape::new();
        assert_eq!(l2_regularizer_var(&tape, &store, 1.0).unwrap().item(), 25.0);
    }

    #[test]
    fn margin_examples() {
        assert_eq!(margin_ranking_loss(0.3, 0.3, 0.3, 1.0), 1.0);
        assert_eq!(margin_ranking_loss(5.0, 2.0, 0.0, 1.0), 0.0);
        assert_eq!(margin_ranking_loss(-7.0, 0.5, 0.2, 1.0), margin_ranking_loss(9.0, 0.5, 0.2, 1.0));
        let tape = Tape::new();
        let s = tape.leaf(Tensor::column(vec![0.0, 0.0, 2.0]));
        let l = margin_ranking_var(&tape, s, &[(0, 1, 0), (0, 2, 1)], 1.0).unwrap().unwrap();
        assert_eq!(l.item(), 0.5);
    }
}
