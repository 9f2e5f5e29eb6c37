//! Seeded synthetic HIN generator with planted importance labels.

use rand::seq::index::sample;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{GraphBuilder, HeterogeneousGraph};
use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Attachment {
    Uniform,
    /// Target chosen with probability proportional to (degree in this
    /// relation so far + 1).
    Preferential,
}

/// Which endpoint type the per-node edge count refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Anchor {
    /// Every source node emits `per_node` edges.
    Source,
    /// Every destination node receives `per_node` edges.
    Destination,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationSpec {
    pub name: String,
    pub src_type: String,
    pub dst_type: String,
    pub per_node: usize,
    pub anchor: Anchor,
    pub attachment: Attachment,
    /// When set, every generated edge is mirrored with this edge type.
    pub inverse: Option<String>,
}

/// Planted label: `intercept + slope * total_degree + noise`, with noise
/// standard deviation `noise` times the standard deviation of the clean
/// labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRule {
    pub node_type: String,
    pub slope: f64,
    pub intercept: f64,
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub node_types: Vec<(String, usize)>,
    pub relations: Vec<RelationSpec>,
    pub feature_dim: usize,
    pub labels: Vec<LabelRule>,
    pub seed: u64,
}

impl SyntheticSpec {
    fn check(&self) -> Result<()> {
        if self.node_types.len() < 2 {
            return Err(Error::Infeasible("need at least 2 node types".into()));
        }
        if self.relations.is_empty() {
            return Err(Error::Infeasible("need at least 1 relation".into()));
        }
        for l in &self.labels {
            if !(l.noise >= 0.0) {
                return Err(Error::Infeasible(format!("negative noise for {}", l.node_type)));
            }
        }
        Ok(())
    }

    fn count_of(&self, t: &str) -> Result<usize> {
        self.node_types
            .iter()
            .find(|(n, _)| n == t)
            .map(|(_, c)| *c)
            .ok_or_else(|| Error::Infeasible(format!("unknown node type {t:?}")))
    }
}

/// Generates a graph; identical specs give identical graphs.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<HeterogeneousGraph> {
    spec.check()?;
    let mut b = GraphBuilder::new();
    let mut by_type: Vec<(String, Vec<usize>)> = Vec::new();
    for (name, count) in &spec.node_types {
        let mut ids = Vec::with_capacity(*count);
        for j in 0..*count {
            let id = b.add_node(&format!("{name}{j}"), name, None)?;
            ids.push(id.0);
        }
        by_type.push((name.clone(), ids));
    }
    let members = |t: &str| -> Vec<usize> {
        by_type
            .iter()
            .find(|(n, _)| n == t)
            .map(|(_, v)| v.clone())
            .unwrap_or_default()
    };

    for (ri, rel) in spec.relations.iter().enumerate() {
        spec.count_of(&rel.src_type)?;
        spec.count_of(&rel.dst_type)?;
        let (anchors, pool) = match rel.anchor {
            Anchor::Source => (members(&rel.src_type), members(&rel.dst_type)),
            Anchor::Destination => (members(&rel.dst_type), members(&rel.src_type)),
        };
        if rel.per_node > 0 && pool.len() < rel.per_node {
            return Err(Error::Infeasible(format!(
                "relation {}: {} endpoints per node but only {} candidates",
                rel.name,
                rel.per_node,
                pool.len()
            )));
        }
        let mut rng = rng::derived(spec.seed, 1 + ri as u64);
        let mut weight = vec![1.0f64; pool.len()];
        for &a in &anchors {
            let chosen = match rel.attachment {
                Attachment::Uniform => sample(&mut rng, pool.len(), rel.per_node).into_vec(),
                Attachment::Preferential => preferential(&mut rng, &weight, rel.per_node),
            };
            for c in chosen {
                weight[c] += 1.0;
                let other = pool[c];
                let (s, d) = match rel.anchor {
                    Anchor::Source => (a, other),
                    Anchor::Destination => (other, a),
                };
                b.push_edge_index(s, d, &rel.name);
                if let Some(inv) = &rel.inverse {
                    b.push_edge_index(d, s, inv);
                }
            }
        }
    }

    let mut rng = rng::derived(spec.seed, 0xFEA7);
    if spec.feature_dim > 0 {
        for i in 0..b.node_type_of.len() {
            let f: Vec<f64> = (0..spec.feature_dim).map(|_| rng.random::<f64>() - 0.5).collect();
            b.set_features_index(i, f);
        }
    }

    // Labels depend on the finished edge set.
    let mut g = b.build_unchecked();
    for (li, rule) in spec.labels.iter().enumerate() {
        let t = g
            .node_types()
            .get(&rule.node_type)
            .ok_or_else(|| Error::Infeasible(format!("label type {:?} unknown", rule.node_type)))?;
        let nodes = g.nodes_of_type(super::NodeTypeId(t));
        let clean: Vec<f64> = nodes
            .iter()
            .map(|&v| rule.intercept + rule.slope * g.total_degree(v) as f64)
            .collect();
        let sd = std_dev(&clean) * rule.noise;
        let mut rng = rng::derived(spec.seed, 0x1AB3 + li as u64);
        let normal = if sd > 0.0 {
            Some(Normal::new(0.0, sd).map_err(|e| Error::Infeasible(e.to_string()))?)
        } else {
            None
        };
        for (v, y) in nodes.iter().zip(clean) {
            let eps = normal.as_ref().map_or(0.0, |n| n.sample(&mut rng));
            g.labels[v.0] = Some(y + eps);
        }
        g.labeled_types.insert(super::NodeTypeId(t));
    }

    let violations = super::validate(&g);
    if !violations.is_empty() {
        let msg: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(Error::InvalidGraph(msg.join("; ")));
    }
    Ok(g)
}

fn preferential(rng: &mut rng::Rng, weight: &[f64], k: usize) -> Vec<usize> {
    let mut w = weight.to_vec();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let total: f64 = w.iter().sum();
        let mut r = rng.random::<f64>() * total;
        let mut pick = w.len() - 1;
        for (i, &wi) in w.iter().enumerate() {
            if r < wi {
                pick = i;
                break;
            }
            r -= wi;
        }
        // Skip already-chosen entries that rounding could land on.
        while w[pick] == 0.0 {
            pick = (pick + 1) % w.len();
        }
        out.push(pick);
        w[pick] = 0.0;
    }
    out
}

fn std_dev(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = x.iter().sum::<f64>() / x.len() as f64;
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64).sqrt()
}
