//! Second-order biased random walks and skip-gram with negative sampling.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::similarity::WeightedGraph;
use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node2VecParams {
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub window: usize,
    /// Return bias: weight `1/p` for stepping back to the previous node.
    pub p: f64,
    /// In-out bias: weight `1/q` for moving away from the previous node.
    pub q: f64,
    pub negative_samples: usize,
    pub dimension: usize,
    pub epochs: usize,
    /// Initial skip-gram step size, decayed linearly.
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for Node2VecParams {
    fn default() -> Self {
        Self {
            walks_per_node: 10,
            walk_length: 40,
            window: 5,
            p: 1.0,
            q: 1.0,
            negative_samples: 5,
            dimension: 128,
            epochs: 5,
            learning_rate: 0.025,
            seed: 0,
        }
    }
}

impl Node2VecParams {
    pub fn check(&self) -> Result<()> {
        if !(self.p > 0.0 && self.q > 0.0) {
            return Err(Error::Config(format!("node2vec p={} q={} must be positive", self.p, self.q)));
        }
        if self.dimension == 0 {
            return Err(Error::Config("node2vec dimension must be positive".into()));
        }
        Ok(())
    }
}

/// Normalized transition probabilities out of `cur`, having arrived from
/// `prev` (first step when `None`).
pub fn transition_probs(g: &WeightedGraph, prev: Option<usize>, cur: usize, p: f64, q: f64) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = g.adj[cur]
        .iter()
        .map(|&(x, w)| {
            let bias = match prev {
                None => 1.0,
                Some(t) if x == t => 1.0 / p,
                Some(t) if g.has_edge(t, x) => 1.0,
                Some(_) => 1.0 / q,
            };
            (x, w * bias)
        })
        .collect();
    let z: f64 = out.iter().map(|e| e.1).sum();
    if z > 0.0 {
        for e in &mut out {
            e.1 /= z;
        }
    }
    out
}

fn sample(probs: &[(usize, f64)], rng: &mut rng::Rng) -> Option<usize> {
    let mut r = rng.random::<f64>();
    for &(x, pr) in probs {
        if r < pr {
            return Some(x);
        }
        r -= pr;
    }
    probs.last().map(|e| e.0)
}

/// Walks starting at `start`, drawn from a stream seeded by `(seed, start)`.
pub fn walks_from(g: &WeightedGraph, start: usize, params: &Node2VecParams) -> Vec<Vec<usize>> {
    let mut rng = rng::derived(params.seed, start as u64);
    let mut walks = Vec::with_capacity(params.walks_per_node);
    if g.adj[start].is_empty() {
        return walks;
    }
    for _ in 0..params.walks_per_node {
        let mut walk = vec![start];
        while walk.len() < params.walk_length {
            let cur = *walk.last().expect("nonempty");
            let prev = (walk.len() >= 2).then(|| walk[walk.len() - 2]);
            let probs = transition_probs(g, prev, cur, params.p, params.q);
            match sample(&probs, &mut rng) {
                Some(x) => walk.push(x),
                None => break,
            }
        }
        walks.push(walk);
    }
    walks
}

/// The walk corpus in round-major order: round 0 for every node, then
/// round 1, and so on.
pub fn generate_walks(g: &WeightedGraph, params: &Node2VecParams) -> Vec<Vec<usize>> {
    let per_node: Vec<Vec<Vec<usize>>> = (0..g.len()).map(|v| walks_from(g, v, params)).collect();
    let mut corpus = Vec::new();
    for r in 0..params.walks_per_node {
        for walks in &per_node {
            if let Some(w) = walks.get(r) {
                corpus.push(w.clone());
            }
        }
    }
    corpus
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Skip-gram with negative sampling over a walk corpus. Returns an
/// `n x dimension` row-major matrix; nodes that never occur as a center
/// word keep a zero row.
pub fn skip_gram(n: usize, corpus: &[Vec<usize>], params: &Node2VecParams) -> Vec<f64> {
    let dim = params.dimension;
    let mut input = vec![0.0; n * dim];
    let mut output = vec![0.0; n * dim];
    let mut counts = vec![0.0f64; n];
    for w in corpus {
        for &v in w {
            counts[v] += 1.0;
        }
    }
    let pairs: usize = corpus
        .iter()
        .map(|w| {
            (0..w.len())
                .map(|i| {
                    let lo = i.saturating_sub(params.window);
                    let hi = (i + params.window).min(w.len() - 1);
                    hi - lo
                })
                .sum::<usize>()
        })
        .sum();
    if pairs == 0 {
        return input;
    }
    let mut rng = rng::derived(params.seed, rng::tag("skip-gram"));
    let mut centered = vec![false; n];
    for v in 0..n {
        if counts[v] > 0.0 {
            for x in &mut input[v * dim..(v + 1) * dim] {
                *x = (rng.random::<f64>() - 0.5) / dim as f64;
            }
        }
    }
    let noise = WeightedIndex::new(counts.iter().map(|c| c.powf(0.75))).expect("corpus is nonempty");
    let total = (pairs * params.epochs.max(1)) as f64;
    let mut step = 0usize;
    let mut grad = vec![0.0; dim];
    for _ in 0..params.epochs {
        for w in corpus {
            for i in 0..w.len() {
                let c = w[i];
                let lo = i.saturating_sub(params.window);
                let hi = (i + params.window).min(w.len() - 1);
                for j in (lo..=hi).filter(|&j| j != i) {
                    let lr = params.learning_rate * (1.0 - step as f64 / total).max(1e-4);
                    step += 1;
                    centered[c] = true;
                    grad.fill(0.0);
                    let ci = c * dim;
                    for s in 0..=params.negative_samples {
                        let (t, label) = if s == 0 {
                            (w[j], 1.0)
                        } else {
                            let t = noise.sample(&mut rng);
                            if t == w[j] {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let ti = t * dim;
                        let dot: f64 = (0..dim).map(|d| input[ci + d] * output[ti + d]).sum();
                        let gscale = (label - sigmoid(dot)) * lr;
                        for d in 0..dim {
                            grad[d] += gscale * output[ti + d];
                            output[ti + d] += gscale * input[ci + d];
                        }
                    }
                    for d in 0..dim {
                        input[ci + d] += grad[d];
                    }
                }
            }
        }
    }
    for v in 0..n {
        if !centered[v] {
            input[v * dim..(v + 1) * dim].fill(0.0);
        }
    }
    input
}

/// Walk corpus plus skip-gram: one `dimension`-vector per node.
pub fn random_walk_embed(g: &WeightedGraph, params: &Node2VecParams) -> Result<Vec<f64>> {
    params.check()?;
    let corpus = generate_walks(g, params);
    Ok(skip_gram(g.len(), &corpus, params))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle4() -> WeightedGraph {
        WeightedGraph::from_edges(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)])
    }

    #[test]
    fn probabilities_sum_to_one() {
        let g = WeightedGraph::from_edges(5, [(0, 1, 0.5), (0, 2, 2.0), (1, 2, 1.0), (2, 3, 0.1), (3, 4, 3.0)]);
        for cur in 0..5 {
            for prev in std::iter::once(None).chain(g.adj[cur].iter().map(|e| Some(e.0))) {
                let s: f64 = transition_probs(&g, prev, cur, 0.5, 2.0).iter().map(|e| e.1).sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn return_bias_applies() {
        // path 0-1-2, at 1 from 0: back to 0 has weight 1/p, on to 2 has 1/q
        let g = WeightedGraph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)]);
        let pr = transition_probs(&g, Some(0), 1, 0.25, 1.0);
        assert!((pr[0].1 - 0.8).abs() < 1e-15 && (pr[1].1 - 0.2).abs() < 1e-15);
    }

    #[test]
    fn isolated_node_is_zero() {
        let g = WeightedGraph::from_edges(3, [(0, 1, 1.0)]);
        let p = Node2VecParams { walks_per_node: 2, walk_length: 5, epochs: 1, ..Default::default() };
        let e = random_walk_embed(&g, &p).unwrap();
        assert!(e[2 * 128..].iter().all(|&x| x == 0.0));
        assert!(e[..128].iter().any(|&x| x != 0.0));
    }

    #[test]
    fn deterministic() {
        let p = Node2VecParams { walks_per_node: 3, walk_length: 10, epochs: 2, seed: 9, ..Default::default() };
        assert_eq!(random_walk_embed(&cycle4(), &p).unwrap(), random_walk_embed(&cycle4(), &p).unwrap());
    }

    #[test]
    fn symmetric_nodes_embed_alike() {
        let p = Node2VecParams { epochs: 50, seed: 3, ..Default::default() };
        let e = random_walk_embed(&cycle4(), &p).unwrap();
        let cos = super::super::similarity::cosine(&e[..128], &e[256..384]);
        assert!(cos >= 0.9, "cos {cos}");
    }
}
