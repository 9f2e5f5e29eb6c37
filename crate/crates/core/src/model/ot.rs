//! Reference-anchored 1-Wasserstein embedding of hidden vectors.
//!
//! A hidden vector of length `d` is read as an empirical distribution with
//! `d` equally weighted atoms. Matching sorted atoms against a frozen
//! uniform reference `h0` gives `h*[n] = sort(h)[rank0[n]] - h0[n]`, whose L1
//! norm is exactly `d * W1(P0, P)`. Differences of two such embeddings have
//! L1 norm `d * W1(P_i, P_j)`.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tensor, Var};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceDistribution {
    pub seed: u64,
    pub values: Vec<f64>,
    /// Ascending copy of `values`.
    pub sorted: Vec<f64>,
    /// `rank[n]` is the ascending position of `values[n]`.
    pub rank: Vec<usize>,
}

/// Ascending argsort; ties keep original index order.
pub fn argsort(x: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    idx
}

impl ReferenceDistribution {
    /// Entries uniform in `[0, 1)`; any repeated value is re-drawn so that
    /// ranks are unique.
    pub fn new(dim: usize, seed: u64) -> Self {
        let mut r = rng::derived(seed, rng::tag("reference"));
        let mut values: Vec<f64> = (0..dim).map(|_| r.random::<f64>()).collect();
        loop {
            let order = argsort(&values);
            let dup = order.windows(2).find(|w| values[w[0]] == values[w[1]]).map(|w| w[1]);
            match dup {
                Some(i) => values[i] = r.random::<f64>(),
                None => break,
            }
        }
        Self::from_values(seed, values).expect("ties were re-drawn")
    }

    pub fn from_values(seed: u64, values: Vec<f64>) -> Result<Self> {
        let order = argsort(&values);
        if order.windows(2).any(|w| values[w[0]] == values[w[1]]) {
            return Err(Error::Config("reference values must be distinct".into()));
        }
        let mut rank = vec![0; values.len()];
        for (pos, &i) in order.iter().enumerate() {
            rank[i] = pos;
        }
        let sorted = order.iter().map(|&i| values[i]).collect();
        Ok(Self {
            seed,
            values,
            sorted,
            rank,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Index into `h` feeding position `n` of the embedding, for every `n`.
    pub fn gather_index(&self, h: &[f64]) -> Vec<usize> {
        let order = argsort(h);
        self.rank.iter().map(|&r| order[r]).collect()
    }
}

/// Fraction of entries of `h` that are `<= x`.
pub fn empirical_cdf(h: &[f64], x: f64) -> f64 {
    if h.is_empty() {
        return 0.0;
    }
    h.iter().filter(|&&v| v <= x).count() as f64 / h.len() as f64
}

pub fn wasserstein_embed(h: &[f64], reference: &ReferenceDistribution) -> Result<Vec<f64>> {
    if h.len() != reference.dim() {
        return Err(Error::shape("wasserstein_embed", &[h.len()], &[reference.dim()]));
    }
    let idx = reference.gather_index(h);
    Ok(idx
        .iter()
        .zip(&reference.values)
        .map(|(&i, &r)| h[i] - r)
        .collect())
}

/// L1 distance between two embeddings.
pub fn pairwise_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// `lambda . h*`
pub fn score(h_star: &[f64], lambda: &[f64]) -> f64 {
    h_star.iter().zip(lambda).map(|(a, b)| a * b).sum()
}

/// Row-wise embedding on the tape. The sorting permutation of each row is a
/// constant; gradients reach the gathered entries.
pub fn embed_rows<'t>(h: Var<'t>, reference: &ReferenceDistribution, neg_ref: Var<'t>) -> Result<Var<'t>> {
    let hv = h.value();
    let d = reference.dim();
    if hv.cols() != d {
        return Err(Error::shape("embed_rows", &hv.shape(), &[hv.rows(), d]));
    }
    let mut idx = Vec::with_capacity(hv.len());
    for r in 0..hv.rows() {
        idx.extend(reference.gather_index(hv.row(r)));
    }
    h.gather_cols(idx, d)?.add_row(neg_ref)
}

/// `-h0` as a `1 x d` tensor, for [`embed_rows`].
pub fn negated_reference(reference: &ReferenceDistribution) -> Tensor {
    Tensor::row_vector(reference.values.iter().map(|v| -v).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        let r = ReferenceDistribution::from_values(0, vec![0.3, 0.1, 0.2]).unwrap();
        let e = wasserstein_embed(&[5.0, 4.0, 6.0], &r).unwrap();
        let want = [5.7, 3.9, 4.8];
        for (a, b) in e.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((pairwise_distance(&e, &[0.0; 3]) - 14.4).abs() < 1e-12);
    }

    #[test]
    fn identity_transport() {
        let r = ReferenceDistribution::new(16, 3);
        let e = wasserstein_embed(&r.values, &r).unwrap();
        assert!(e.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn cdf_steps() {
        assert!((empirical_cdf(&[1.0, 2.0, 3.0], 2.5) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(empirical_cdf(&[1.0, 2.0, 3.0], 0.5), 0.0);
        assert_eq!(empirical_cdf(&[1.0, 2.0, 3.0], 3.0), 1.0);
    }

    #[test]
    fn reference_ranks_unique_and_in_range() {
        let r = ReferenceDistribution::new(256, 9);
        assert!(r.values.iter().all(|&v| (0.0..1.0).contains(&v)));
        assert!(r.sorted.windows(2).all(|w| w[0] < w[1]));
        let mut seen = r.rank.clone();
        seen.sort_unstable();
        assert_eq!(seen, (0..256).collect::<Vec<_>>());
    }

    #[test]
    fn score_selects() {
        assert_eq!(score(&[1.5, -2.0, 4.0], &[0.0, 1.0, 0.0]), -2.0);
        assert_eq!(score(&[0.0; 3], &[3.0, 1.0, 2.0]), 0.0);
    }
}
