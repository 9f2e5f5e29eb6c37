//! Structural priori knowledge: per-metapath centralities and similarity
//! walk embeddings, precomputed once per graph.
//!
//! For each metapath `k` and each member `i` of its sub-network the bank
//! keeps the six normalized centrality scalars (turned into vectors later by
//! trainable perceptrons) and one similarity embedding. Together these are
//! the `MEASURES + 1` knowledge slots of the node.

pub mod centrality;
pub mod node2vec;
pub mod similarity;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autodiff::Tensor;
use crate::container::Container;
use crate::graph::{HeterogeneousGraph, NodeId, NodeTypeId};
use crate::metapath::{induce_subnetwork, InducedSubnetwork, Metapath};
use crate::{pool, rng, Error, Result};

pub use centrality::{MEASURES, MEASURE_NAMES};
pub use node2vec::{random_walk_embed, Node2VecParams};
pub use similarity::{attribute_similarity_graph, pathsim, similarity_embedding, top_k_graph, WeightedGraph};

/// Knowledge slots per (node, metapath): the centralities plus similarity.
pub const SLOTS: usize = MEASURES + 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeParams {
    pub node2vec: Node2VecParams,
    /// Peers kept per node when turning PathSim into a walk graph.
    pub pathsim_top_k: usize,
}

impl Default for KnowledgeParams {
    fn default() -> Self {
        Self {
            node2vec: Node2VecParams::default(),
            pathsim_top_k: 10,
        }
    }
}

/// Normalized centrality rows for the members of `s`, in member order.
pub fn compute_centralities(s: &InducedSubnetwork) -> Vec<[f64; MEASURES]> {
    centrality::centralities(&s.simple_adjacency())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetapathKnowledge {
    pub metapath: Metapath,
    pub label: String,
    pub source_type: NodeTypeId,
    /// Ascending node ids.
    pub members: Vec<NodeId>,
    /// `members x MEASURES`, min-max normalized per column.
    pub centrality: Tensor,
    /// `members x dim` similarity embeddings (`f_att + f_top`).
    pub similarity: Tensor,
    /// `members x SLOTS`: 1 for an active slot, 0 for a disabled one.
    pub mask: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBank {
    pub dim: usize,
    pub entries: Vec<MetapathKnowledge>,
}

fn build_entry(
    g: &HeterogeneousGraph,
    k: usize,
    p: &Metapath,
    features: &[f64],
    feature_dim: usize,
    params: &KnowledgeParams,
) -> Result<MetapathKnowledge> {
    let s = induce_subnetwork(g, p, k)?;
    let n = s.len();
    let rows = compute_centralities(&s);
    let centrality = Tensor::new(n, MEASURES, rows.iter().flatten().copied().collect())?;

    let seed_for = |what: &str| rng::derive(params.node2vec.seed, rng::tag(what).wrapping_add(k as u64));
    let att = attribute_similarity_graph(&s, features, feature_dim);
    let att_params = Node2VecParams {
        seed: seed_for("walk-attribute"),
        ..params.node2vec.clone()
    };
    let f_att = random_walk_embed(&att, &att_params)?;
    let top = top_k_graph(&pathsim(&s), params.pathsim_top_k);
    let top_params = Node2VecParams {
        seed: seed_for("walk-pathsim"),
        ..params.node2vec.clone()
    };
    let f_top = random_walk_embed(&top, &top_params)?;
    let dim = params.node2vec.dimension;
    let similarity = Tensor::new(n, dim, similarity_embedding(&f_att, &f_top))?;

    Ok(MetapathKnowledge {
        label: p.display(g),
        metapath: p.clone(),
        source_type: p.source_type(),
        members: s.members,
        centrality,
        similarity,
        mask: Tensor::filled(n, SLOTS, 1.0),
    })
}

/// Builds the bank for `metapaths`. Metapaths are processed on up to
/// `threads` workers; every random stream is derived from the node2vec seed
/// and the metapath index, so the result does not depend on `threads`.
pub fn build_bank(
    g: &HeterogeneousGraph,
    metapaths: &[Metapath],
    features: &[f64],
    feature_dim: usize,
    params: &KnowledgeParams,
    threads: usize,
) -> Result<KnowledgeBank> {
    params.node2vec.check()?;
    if features.len() != g.node_count() * feature_dim {
        return Err(Error::shape(
            "feature matrix",
            &[g.node_count(), feature_dim],
            &[features.len()],
        ));
    }
    let entries = pool::run_indexed(metapaths.len(), threads, |k| {
        build_entry(g, k, &metapaths[k], features, feature_dim, params)
    });
    Ok(KnowledgeBank {
        dim: params.node2vec.dimension,
        entries: entries.into_iter().collect::<Result<_>>()?,
    })
}

impl KnowledgeBank {
    pub fn total_slots(&self) -> usize {
        self.entries.iter().map(|e| e.members.len() * SLOTS).sum()
    }

    pub fn disabled_slots(&self) -> usize {
        self.entries
            .iter()
            .map(|e| e.mask.data().iter().filter(|&&m| m == 0.0).count())
            .sum()
    }

    /// Stores the bank in a container; `manifest` is kept verbatim.
    pub fn to_container(&self, manifest: serde_json::Value) -> Container {
        let mut c = Container::new(manifest);
        for (k, e) in self.entries.iter().enumerate() {
            let ids = e.members.iter().map(|v| v.0 as f64).collect();
            c.insert(format!("k{k:03}.members"), Tensor::row_vector(ids));
            c.insert(format!("k{k:03}.centrality"), e.centrality.clone());
            c.insert(format!("k{k:03}.similarity"), e.similarity.clone());
            c.insert(format!("k{k:03}.mask"), e.mask.clone());
        }
        c
    }

    /// Restores a bank written by [`KnowledgeBank::to_container`] for the
    /// same metapath list.
    pub fn from_container(c: &Container, g: &HeterogeneousGraph, metapaths: &[Metapath], dim: usize) -> Result<Self> {
        let mut entries = Vec::new();
        for (k, p) in metapaths.iter().enumerate() {
            let members: Vec<NodeId> = c
                .get(&format!("k{k:03}.members"))?
                .data()
                .iter()
                .map(|&x| NodeId(x as usize))
                .collect();
            let similarity = c.get(&format!("k{k:03}.similarity"))?.clone();
            if similarity.rows() != members.len() || similarity.cols() != dim {
                return Err(Error::Checkpoint(format!("bank entry {k} has the wrong shape")));
            }
            entries.push(MetapathKnowledge {
                metapath: p.clone(),
                label: p.display(g),
                source_type: p.source_type(),
                members,
                centrality: c.get(&format!("k{k:03}.centrality"))?.clone(),
                similarity,
                mask: c.get(&format!("k{k:03}.mask"))?.clone(),
            });
        }
        Ok(Self { dim, entries })
    }
}

/// Zeroes a uniformly random `fraction` of all (node, metapath, slot)
/// knowledge slots. The count is `round(fraction * total)`.
pub fn disable_knowledge(bank: &KnowledgeBank, fraction: f64, seed: u64) -> KnowledgeBank {
    let mut out = bank.clone();
    let total = bank.total_slots();
    let count = ((fraction.clamp(0.0, 1.0) * total as f64).round() as usize).min(total);
    if count == 0 {
        return out;
    }
    let mut rng = rng::derived(seed, rng::tag("disable-knowledge"));
    let mut picked = sample(&mut rng, total, count).into_vec();
    picked.sort_unstable();
    let mut offsets = Vec::with_capacity(out.entries.len());
    let mut acc = 0;
    for e in &out.entries {
        offsets.push(acc);
        acc += e.members.len() * SLOTS;
    }
    for flat in picked {
        let k = offsets.partition_point(|&o| o <= flat) - 1;
        let local = flat - offsets[k];
        let (row, slot) = (local / SLOTS, local % SLOTS);
        let e = &mut out.entries[k];
        e.mask.data_mut()[row * SLOTS + slot] = 0.0;
        if slot == MEASURES {
            let d = e.similarity.cols();
            e.similarity.data_mut()[row * d..(row + 1) * d].fill(0.0);
        }
    }
    out
}

/// Content hash of a graph (types, edges, labels, features), hex encoded.
pub fn graph_fingerprint(g: &HeterogeneousGraph) -> String {
    let mut h = Sha256::new();
    for name in g.node_types().names() {
        h.update(name.as_bytes());
        h.update([0u8]);
    }
    h.update([1u8]);
    for name in g.edge_types().names() {
        h.update(name.as_bytes());
        h.update([0u8]);
    }
    for i in 0..g.node_count() {
        let v = NodeId(i);
        h.update(g.orig_id(v).as_bytes());
        h.update((g.node_type(v).0 as u64).to_le_bytes());
        h.update(g.label(v).map_or(f64::NAN, |y| y).to_le_bytes());
        if let Some(f) = g.feature(v) {
            for x in f {
                h.update(x.to_le_bytes());
            }
        }
    }
    for e in g.edges() {
        h.update((e.src.0 as u64).to_le_bytes());
        h.update((e.dst.0 as u64).to_le_bytes());
        h.update((e.etype.0 as u64).to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bank_with(sizes: &[usize]) -> KnowledgeBank {
        let entries = sizes
            .iter()
            .map(|&n| MetapathKnowledge {
                metapath: Metapath::new(vec![NodeTypeId(0); 2], vec![crate::EdgeTypeId(0)]).unwrap(),
                label: "T[e]T".into(),
                source_type: NodeTypeId(0),
                members: (0..n).map(NodeId).collect(),
                centrality: Tensor::filled(n, MEASURES, 0.5),
                similarity: Tensor::filled(n, 4, 1.0),
                mask: Tensor::filled(n, SLOTS, 1.0),
            })
            .collect();
        KnowledgeBank { dim: 4, entries }
    }

    #[test]
    fn disable_counts_exact() {
        let b = bank_with(&[100, 42, 1]);
        assert_eq!(b.total_slots(), 143 * SLOTS);
        assert_eq!(disable_knowledge(&b, 0.0, 1), b);
        assert_eq!(disable_knowledge(&b, 1.0, 1).disabled_slots(), b.total_slots());
        let b = bank_with(&[1000 / SLOTS]);
        let total = b.total_slots();
        let d = disable_knowledge(&b, 0.4, 5);
        assert_eq!(d.disabled_slots(), (0.4 * total as f64).round() as usize);
        assert_eq!(d, disable_knowledge(&b, 0.4, 5));
    }

    #[test]
    fn disabled_similarity_rows_are_zero() {
        let d = disable_knowledge(&bank_with(&[30]), 1.0, 2);
        assert!(d.entries[0].similarity.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn fingerprint_changes_with_edges() {
        let mut b = crate::graph::GraphBuilder::new();
        b.add_node("a", "A", None).unwrap();
        b.add_node("p", "P", None).unwrap();
        let g1 = {
            let mut b = b.clone();
            b.add_edge("a", "p", "w").unwrap();
            b.build().unwrap()
        };
        b.add_edge("p", "a", "w").unwrap();
        let g2 = b.build().unwrap();
        assert_ne!(graph_fingerprint(&g1), graph_fingerprint(&g2));
        assert_eq!(graph_fingerprint(&g1), graph_fingerprint(&g1.clone()));
    }
}
