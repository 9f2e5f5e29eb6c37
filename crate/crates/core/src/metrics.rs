//! Value-estimation and ranking metrics.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_NDCG_K: usize = 100;

/// Scale used to normalize RMSE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NrmseNorm {
    #[default]
    Range,
    Mean,
    Std,
}

impl std::str::FromStr for NrmseNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "range" => Ok(Self::Range),
            "mean" => Ok(Self::Mean),
            "std" => Ok(Self::Std),
            _ => Err(Error::Config(format!("unknown nrmse normalizer {s:?}"))),
        }
    }
}

fn check(preds: &[f64], labels: &[f64]) -> Result<()> {
    if preds.len() != labels.len() {
        return Err(Error::shape("metric inputs", &[preds.len()], &[labels.len()]));
    }
    if preds.is_empty() {
        return Err(Error::Insufficient("metrics need at least one pair".into()));
    }
    Ok(())
}

/// `(mae, rmse, nrmse)`. NRMSE is NaN when the normalizer is zero.
pub fn regression_metrics(preds: &[f64], labels: &[f64], norm: NrmseNorm) -> Result<(f64, f64, f64)> {
    check(preds, labels)?;
    let n = preds.len() as f64;
    let mae = preds.iter().zip(labels).map(|(p, y)| (p - y).abs()).sum::<f64>() / n;
    let rmse = (preds.iter().zip(labels).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / n).sqrt();
    let mean = labels.iter().sum::<f64>() / n;
    let scale = match norm {
        NrmseNorm::Range => {
            let hi = labels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = labels.iter().copied().fold(f64::INFINITY, f64::min);
            hi - lo
        }
        NrmseNorm::Mean => mean.abs(),
        NrmseNorm::Std => (labels.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n).sqrt(),
    };
    let nrmse = if scale > 0.0 { rmse / scale } else { f64::NAN };
    Ok((mae, rmse, nrmse))
}

/// 1-based ranks; tied values share their mean rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        f64::NAN
    } else {
        (cov / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0)
    }
}

/// Pearson correlation of average ranks; NaN when either side is constant.
pub fn spearman(preds: &[f64], labels: &[f64]) -> Result<f64> {
    check(preds, labels)?;
    if preds.len() < 2 {
        return Err(Error::Insufficient("spearman needs at least two pairs".into()));
    }
    Ok(pearson(&average_ranks(preds), &average_ranks(labels)))
}

/// NDCG over the top `k` by prediction (ties to the lower index), with the
/// label as gain after shifting labels to be nonnegative and a
/// `1 / log2(position + 1)` discount.
pub fn ndcg(preds: &[f64], labels: &[f64], k: usize) -> Result<f64> {
    check(preds, labels)?;
    let k = k.min(preds.len());
    let lo = labels.iter().copied().fold(f64::INFINITY, f64::min);
    let shift = if lo < 0.0 { -lo } else { 0.0 };
    let gain = |i: usize| labels[i] + shift;
    let dcg_of = |order: &[usize]| -> f64 {
        order
            .iter()
            .take(k)
            .enumerate()
            .map(|(pos, &i)| gain(i) / ((pos + 2) as f64).log2())
            .sum()
    };
    let mut by_pred: Vec<usize> = (0..preds.len()).collect();
    by_pred.sort_by(|&a, &b| preds[b].total_cmp(&preds[a]).then(a.cmp(&b)));
    let mut ideal: Vec<usize> = (0..preds.len()).collect();
    ideal.sort_by(|&a, &b| gain(b).total_cmp(&gain(a)).then(a.cmp(&b)));
    let idcg = dcg_of(&ideal);
    if idcg == 0.0 {
        return Ok(f64::NAN);
    }
    Ok(dcg_of(&by_pred) / idcg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub mae: f64,
    pub rmse: f64,
    pub nrmse: f64,
    pub ndcg: f64,
    pub spearman: f64,
}

impl MetricSet {
    pub fn compute(preds: &[f64], labels: &[f64], k: usize, norm: NrmseNorm) -> Result<Self> {
        let (mae, rmse, nrmse) = regression_metrics(preds, labels, norm)?;
        let spearman = if preds.len() >= 2 { spearman(preds, labels)? } else { f64::NAN };
        Ok(Self {
            mae,
            rmse,
            nrmse,
            ndcg: ndcg(preds, labels, k)?,
            spearman,
        })
    }
}

/// Metrics per labeled type plus the micro average over all their nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_type: Vec<(String, MetricSet)>,
    pub micro: MetricSet,
    pub ndcg_k: usize,
    pub nrmse_norm: NrmseNorm,
}

impl EvalReport {
    /// `groups` holds `(type name, predictions, labels)`.
    pub fn compute(groups: &[(String, Vec<f64>, Vec<f64>)], k: usize, norm: NrmseNorm) -> Result<Self> {
        let mut per_type = Vec::new();
        let (mut all_p, mut all_y) = (Vec::new(), Vec::new());
        for (name, p, y) in groups {
            if p.is_empty() {
                continue;
            }
            per_type.push((name.clone(), MetricSet::compute(p, y, k, norm)?));
            all_p.extend_from_slice(p);
            all_y.extend_from_slice(y);
        }
        Ok(Self {
            per_type,
            micro: MetricSet::compute(&all_p, &all_y, k, norm)?,
            ndcg_k: k,
            nrmse_norm: norm,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regression_examples() {
        assert_eq!(regression_metrics(&[1.0, 2.0], &[1.0, 2.0], NrmseNorm::Range).unwrap(), (0.0, 0.0, 0.0));
        let (mae, rmse, nrmse) = regression_metrics(&[1.0, 3.0], &[0.0, 1.0], NrmseNorm::Range).unwrap();
        assert_eq!(mae, 1.5);
        assert!((rmse - 2.5f64.sqrt()).abs() < 1e-15);
        assert!((nrmse - rmse).abs() < 1e-15);
        assert!(regression_metrics(&[1.0], &[2.0], NrmseNorm::Range).unwrap().2.is_nan());
        assert!(regression_metrics(&[1.0], &[2.0, 3.0], NrmseNorm::Range).is_err());
    }

    #[test]
    fn spearman_examples() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        let s = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 4.0, 3.0]).unwrap();
        assert!((s - 0.8).abs() < 1e-12);
        assert!(spearman(&[1.0, 1.0], &[1.0, 2.0]).unwrap().is_nan());
        assert_eq!(average_ranks(&[5.0, 1.0, 5.0]), vec![2.5, 1.0, 2.5]);
    }

    #[test]
    fn ndcg_examples() {
        assert_eq!(ndcg(&[3.0, 2.0, 1.0], &[3.0, 2.0, 1.0], 3).unwrap(), 1.0);
        assert_eq!(ndcg(&[0.0, 9.0, 1.0], &[1.0, 5.0, 2.0], 1).unwrap(), 1.0);
        let want = (2.0 + 3.0 / 3f64.log2() + 0.5) / (3.0 + 2.0 / 3f64.log2() + 0.5);
        let got = ndcg(&[2.0, 3.0, 1.0], &[3.0, 2.0, 1.0], 3).unwrap();
        assert!((got - want).abs() < 1e-12 && (got - 0.9225).abs() < 1e-4);
    }
}
