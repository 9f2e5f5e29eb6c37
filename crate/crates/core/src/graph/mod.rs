//! Typed directed graphs with node/edge type registries, partial importance
//! labels, and optional initial node features.

mod io;
mod synthetic;

pub use io::{load_graph, save_graph};
pub use synthetic::{
    generate_synthetic, Anchor, Attachment, LabelRule, RelationSpec, SyntheticSpec,
};

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rand::Rng as _;

use crate::{Error, Result};

/// Dense node index, `0..node_count`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct NodeTypeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct EdgeTypeId(pub usize);

/// Name registry; ids are assigned in first-seen order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TypeRegistry {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl TypeRegistry {
    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), self.names.len() - 1);
        self.names.len() - 1
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub etype: EdgeTypeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    In,
    Out,
    Both,
}

/// One broken graph invariant. Violations are data; [`validate`] collects
/// all of them instead of stopping at the first.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    TooFewTypes { node_types: usize, edge_types: usize },
    EdgeOutOfRange { edge: usize, src: usize, dst: usize },
    NodeTypeOutOfRange { node: usize },
    EdgeTypeOutOfRange { edge: usize },
    LabelOutsideLabeledTypes { node: usize },
    NonFiniteLabel { node: usize },
    FeatureDimension { node: usize, expected: usize, found: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewTypes {
                node_types,
                edge_types,
            } => write!(
                f,
                "|A|+|R|>2 fails (|A|={node_types}, |R|={edge_types})"
            ),
            Violation::EdgeOutOfRange { edge, src, dst } => {
                write!(f, "edge {edge} references node out of range ({src} -> {dst})")
            }
            Violation::NodeTypeOutOfRange { node } => {
                write!(f, "node {node} has an unregistered type")
            }
            Violation::EdgeTypeOutOfRange { edge } => {
                write!(f, "edge {edge} has an unregistered type")
            }
            Violation::LabelOutsideLabeledTypes { node } => {
                write!(f, "node {node} is labeled but its type is not a labeled type")
            }
            Violation::NonFiniteLabel { node } => write!(f, "node {node} has a non-finite label"),
            Violation::FeatureDimension {
                node,
                expected,
                found,
            } => write!(
                f,
                "node {node} feature dimension {found}, expected {expected}"
            ),
        }
    }
}

/// A heterogeneous information network. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct HeterogeneousGraph {
    node_types: TypeRegistry,
    edge_types: TypeRegistry,
    node_type_of: Vec<NodeTypeId>,
    orig_ids: Vec<String>,
    edges: Vec<Edge>,
    out_adj: Vec<Vec<(NodeId, EdgeTypeId)>>,
    in_adj: Vec<Vec<(NodeId, EdgeTypeId)>>,
    features: Vec<Option<Vec<f64>>>,
    labels: Vec<Option<f64>>,
    labeled_types: BTreeSet<NodeTypeId>,
}

impl HeterogeneousGraph {
    pub fn node_count(&self) -> usize {
        self.node_type_of.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node_types(&self) -> &TypeRegistry {
        &self.node_types
    }

    pub fn edge_types(&self) -> &TypeRegistry {
        &self.edge_types
    }

    pub fn node_type(&self, v: NodeId) -> NodeTypeId {
        self.node_type_of[v.0]
    }

    pub fn node_type_name(&self, v: NodeId) -> &str {
        self.node_types.name(self.node_type_of[v.0].0)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn orig_id(&self, v: NodeId) -> &str {
        &self.orig_ids[v.0]
    }

    pub fn find_node(&self, orig_id: &str) -> Option<NodeId> {
        self.orig_ids.iter().position(|s| s == orig_id).map(NodeId)
    }

    pub fn label(&self, v: NodeId) -> Option<f64> {
        self.labels[v.0]
    }

    pub fn labels(&self) -> &[Option<f64>] {
        &self.labels
    }

    pub fn labeled_types(&self) -> &BTreeSet<NodeTypeId> {
        &self.labeled_types
    }

    pub fn feature(&self, v: NodeId) -> Option<&[f64]> {
        self.features[v.0].as_deref()
    }

    /// Shared feature dimension, if any node carries features.
    pub fn feature_dim(&self) -> Option<usize> {
        self.features.iter().flatten().map(Vec::len).next()
    }

    pub fn nodes_of_type(&self, t: NodeTypeId) -> Vec<NodeId> {
        (0..self.node_count())
            .filter(|&i| self.node_type_of[i] == t)
            .map(NodeId)
            .collect()
    }

    /// Distinct `(src_type, edge_type, dst_type)` triples present in the edges.
    pub fn schema(&self) -> BTreeSet<(NodeTypeId, EdgeTypeId, NodeTypeId)> {
        self.edges
            .iter()
            .map(|e| (self.node_type(e.src), e.etype, self.node_type(e.dst)))
            .collect()
    }

    /// Neighbors of `v` sorted by neighbor id, then edge type.
    pub fn typed_neighbors(
        &self,
        v: NodeId,
        direction: Direction,
    ) -> Result<Vec<(NodeId, EdgeTypeId)>> {
        if v.0 >= self.node_count() {
            return Err(Error::NodeOutOfRange {
                index: v.0,
                node_count: self.node_count(),
            });
        }
        Ok(match direction {
            Direction::In => self.in_adj[v.0].clone(),
            Direction::Out => self.out_adj[v.0].clone(),
            Direction::Both => {
                let mut all = self.in_adj[v.0].clone();
                all.extend_from_slice(&self.out_adj[v.0]);
                all.sort();
                all
            }
        })
    }

    pub fn in_neighbors(&self, v: NodeId) -> &[(NodeId, EdgeTypeId)] {
        &self.in_adj[v.0]
    }

    /// In-degree plus out-degree.
    pub fn total_degree(&self, v: NodeId) -> usize {
        self.in_adj[v.0].len() + self.out_adj[v.0].len()
    }

    /// Dense `node_count x dim` feature matrix. Nodes without loaded
    /// features get entries drawn uniformly from `[-0.5, 0.5]`, seeded per
    /// node so the fill does not depend on which other nodes are present.
    pub fn feature_matrix(&self, dim: usize, seed: u64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.node_count() * dim);
        let tag = crate::rng::tag("initial-features");
        for i in 0..self.node_count() {
            match &self.features[i] {
                Some(f) if f.len() == dim => out.extend_from_slice(f),
                _ => {
                    let mut rng = crate::rng::derived(crate::rng::derive(seed, tag), i as u64);
                    out.extend((0..dim).map(|_| rng.random::<f64>() - 0.5));
                }
            }
        }
        out
    }

    /// Collapses all node types into one and all edge types into one. Labels
    /// and features are kept; every labeled node stays labeled.
    pub fn homogenized(&self) -> HeterogeneousGraph {
        let mut b = GraphBuilder::new();
        for i in 0..self.node_count() {
            b.add_node(&self.orig_ids[i], "node", self.labels[i])
                .expect("ids are unique in the source graph");
            if let Some(f) = &self.features[i] {
                b.set_features_index(i, f.clone());
            }
        }
        for e in &self.edges {
            b.push_edge_index(e.src.0, e.dst.0, "edge");
        }
        b.build_unchecked()
    }
}

/// Collects every invariant violation of `g`.
pub fn validate(g: &HeterogeneousGraph) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = g.node_count();
    if g.node_types.len() + g.edge_types.len() <= 2 {
        out.push(Violation::TooFewTypes {
            node_types: g.node_types.len(),
            edge_types: g.edge_types.len(),
        });
    }
    for (i, t) in g.node_type_of.iter().enumerate() {
        if t.0 >= g.node_types.len() {
            out.push(Violation::NodeTypeOutOfRange { node: i });
        }
    }
    for (i, e) in g.edges.iter().enumerate() {
        if e.src.0 >= n || e.dst.0 >= n {
            out.push(Violation::EdgeOutOfRange {
                edge: i,
                src: e.src.0,
                dst: e.dst.0,
            });
        }
        if e.etype.0 >= g.edge_types.len() {
            out.push(Violation::EdgeTypeOutOfRange { edge: i });
        }
    }
    for (i, l) in g.labels.iter().enumerate() {
        if let Some(y) = l {
            if !g.labeled_types.contains(&g.node_type_of[i]) {
                out.push(Violation::LabelOutsideLabeledTypes { node: i });
            }
            if !y.is_finite() {
                out.push(Violation::NonFiniteLabel { node: i });
            }
        }
    }
    if let Some(dim) = g.feature_dim() {
        for (i, f) in g.features.iter().enumerate() {
            if let Some(f) = f {
                if f.len() != dim {
                    out.push(Violation::FeatureDimension {
                        node: i,
                        expected: dim,
                        found: f.len(),
                    });
                }
            }
        }
    }
    out
}

/// Incremental graph construction keyed by original string ids.
#[derive(Debug, Clone, Default)]
pub struct GraphBuilder {
    node_types: TypeRegistry,
    edge_types: TypeRegistry,
    node_type_of: Vec<NodeTypeId>,
    orig_ids: Vec<String>,
    id_index: HashMap<String, usize>,
    edges: Vec<Edge>,
    features: Vec<Option<Vec<f64>>>,
    labels: Vec<Option<f64>>,
    labeled_types: Option<BTreeSet<NodeTypeId>>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a node; fails on a duplicate original id.
    pub fn add_node(&mut self, orig_id: &str, type_name: &str, label: Option<f64>) -> Result<NodeId> {
        if self.id_index.contains_key(orig_id) {
            return Err(Error::InvalidGraph(format!("duplicate node id {orig_id:?}")));
        }
        let t = NodeTypeId(self.node_types.intern(type_name));
        let idx = self.node_type_of.len();
        self.node_type_of.push(t);
        self.orig_ids.push(orig_id.to_string());
        self.id_index.insert(orig_id.to_string(), idx);
        self.features.push(None);
        self.labels.push(label);
        Ok(NodeId(idx))
    }

    pub fn node_index(&self, orig_id: &str) -> Option<usize> {
        self.id_index.get(orig_id).copied()
    }

    /// Adds an edge between existing nodes; fails on a dangling endpoint.
    pub fn add_edge(&mut self, src: &str, dst: &str, etype: &str) -> Result<()> {
        let s = self
            .node_index(src)
            .ok_or_else(|| Error::InvalidGraph(format!("dangling edge endpoint {src:?}")))?;
        let d = self
            .node_index(dst)
            .ok_or_else(|| Error::InvalidGraph(format!("dangling edge endpoint {dst:?}")))?;
        self.push_edge_index(s, d, etype);
        Ok(())
    }

    /// Adds an edge by dense index without checking bounds; [`validate`]
    /// reports out-of-range endpoints.
    pub fn push_edge_index(&mut self, src: usize, dst: usize, etype: &str) {
        let et = EdgeTypeId(self.edge_types.intern(etype));
        self.edges.push(Edge {
            src: NodeId(src),
            dst: NodeId(dst),
            etype: et,
        });
    }

    pub fn set_features(&mut self, orig_id: &str, features: Vec<f64>) -> Result<()> {
        let i = self
            .node_index(orig_id)
            .ok_or_else(|| Error::InvalidGraph(format!("features for unknown node {orig_id:?}")))?;
        self.features[i] = Some(features);
        Ok(())
    }

    pub fn set_features_index(&mut self, index: usize, features: Vec<f64>) {
        self.features[index] = Some(features);
    }

    pub fn register_node_type(&mut self, name: &str) -> NodeTypeId {
        NodeTypeId(self.node_types.intern(name))
    }

    pub fn register_edge_type(&mut self, name: &str) -> EdgeTypeId {
        EdgeTypeId(self.edge_types.intern(name))
    }

    /// Overrides the labeled type set (by default: types of labeled nodes).
    pub fn set_labeled_types(&mut self, types: BTreeSet<NodeTypeId>) {
        self.labeled_types = Some(types);
    }

    pub fn build_unchecked(self) -> HeterogeneousGraph {
        let n = self.node_type_of.len();
        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); n];
        for e in &self.edges {
            if e.src.0 < n && e.dst.0 < n {
                out_adj[e.src.0].push((e.dst, e.etype));
                in_adj[e.dst.0].push((e.src, e.etype));
            }
        }
        for list in out_adj.iter_mut().chain(in_adj.iter_mut()) {
            list.sort();
        }
        let labeled_types = self.labeled_types.unwrap_or_else(|| {
            self.labels
                .iter()
                .zip(&self.node_type_of)
                .filter(|(l, _)| l.is_some())
                .map(|(_, &t)| t)
                .collect()
        });
        HeterogeneousGraph {
            node_types: self.node_types,
            edge_types: self.edge_types,
            node_type_of: self.node_type_of,
            orig_ids: self.orig_ids,
            edges: self.edges,
            out_adj,
            in_adj,
            features: self.features,
            labels: self.labels,
            labeled_types,
        }
    }

    /// Builds and validates.
    pub fn build(self) -> Result<HeterogeneousGraph> {
        let g = self.build_unchecked();
        let violations = validate(&g);
        if violations.is_empty() {
            Ok(g)
        } else {
            let msg: Vec<String> = violations.iter().map(ToString::to_string).collect();
            Err(Error::InvalidGraph(msg.join("; ")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_abc() -> HeterogeneousGraph {
        let mut b = GraphBuilder::new();
        b.add_node("a", "T", None).unwrap();
        b.add_node("b", "U", None).unwrap();
        b.add_node("c", "T", None).unwrap();
        b.add_edge("a", "b", "e").unwrap();
        b.add_edge("b", "c", "e").unwrap();
        b.build().unwrap()
    }

    #[test]
    fn single_type_no_edges_is_invalid() {
        let mut b = GraphBuilder::new();
        b.add_node("a", "T1", None).unwrap();
        let err = b.build().unwrap_err();
        assert!(err.to_string().contains("|A|+|R|>2 fails"));
    }

    #[test]
    fn one_node_type_one_edge_type_violation() {
        let mut b = GraphBuilder::new();
        b.add_node("a", "T", None).unwrap();
        b.add_node("b", "T", None).unwrap();
        b.add_edge("a", "b", "r").unwrap();
        let v = validate(&b.build_unchecked());
        assert_eq!(
            v,
            vec![Violation::TooFewTypes {
                node_types: 1,
                edge_types: 1
            }]
        );
        assert_eq!(v[0].to_string(), "|A|+|R|>2 fails (|A|=1, |R|=1)");
    }

    #[test]
    fn out_of_range_edge_reported_with_index() {
        let mut b = GraphBuilder::new();
        b.add_node("a", "T", None).unwrap();
        b.add_node("b", "U", None).unwrap();
        b.add_edge("a", "b", "r").unwrap();
        b.push_edge_index(0, 7, "r");
        let v = validate(&b.build_unchecked());
        assert_eq!(v, vec![Violation::EdgeOutOfRange { edge: 1, src: 0, dst: 7 }]);
    }

    #[test]
    fn dblp_shaped_graph_is_valid() {
        let mut b = GraphBuilder::new();
        for (id, t) in [("a", "author"), ("p", "paper"), ("v", "venue"), ("t", "term")] {
            b.add_node(id, t, None).unwrap();
        }
        for (s, d, r) in [
            ("a", "p", "writes"),
            ("p", "a", "written_by"),
            ("p", "v", "published_in"),
            ("v", "p", "publishes"),
            ("p", "t", "has_term"),
            ("t", "p", "term_of"),
        ] {
            b.add_edge(s, d, r).unwrap();
        }
        let g = b.build_unchecked();
        assert!(validate(&g).is_empty());
        assert_eq!(g.node_types().len(), 4);
        assert_eq!(g.edge_types().len(), 6);
    }

    #[test]
    fn duplicate_node_and_dangling_edge_fail() {
        let mut b = GraphBuilder::new();
        b.add_node("a", "T", None).unwrap();
        assert!(b.add_node("a", "T", None).is_err());
        assert!(b.add_edge("a", "zz", "r").is_err());
    }

    #[test]
    fn neighbors_on_path() {
        let g = path_abc();
        let e = EdgeTypeId(0);
        assert_eq!(
            g.typed_neighbors(NodeId(1), Direction::Both).unwrap(),
            vec![(NodeId(0), e), (NodeId(2), e)]
        );
        assert_eq!(
            g.typed_neighbors(NodeId(0), Direction::Out).unwrap(),
            vec![(NodeId(1), e)]
        );
        assert!(g.typed_neighbors(NodeId(0), Direction::In).unwrap().is_empty());
        assert!(g.typed_neighbors(NodeId(9), Direction::In).is_err());
    }

    #[test]
    fn isolated_node_has_no_neighbors() {
        let mut b = GraphBuilder::new();
        b.add_node("a", "T", None).unwrap();
        b.add_node("b", "U", None).unwrap();
        b.add_node("lonely", "U", None).unwrap();
        b.add_edge("a", "b", "r").unwrap();
        let g = b.build().unwrap();
        assert!(g.typed_neighbors(NodeId(2), Direction::Both).unwrap().is_empty());
    }

    #[test]
    fn labels_outside_labeled_types_flagged() {
        let mut b = GraphBuilder::new();
        b.add_node("a", "T", Some(1.0)).unwrap();
        b.add_node("b", "U", None).unwrap();
        b.add_edge("a", "b", "r").unwrap();
        b.set_labeled_types(BTreeSet::new());
        let v = validate(&b.build_unchecked());
        assert_eq!(v, vec![Violation::LabelOutsideLabeledTypes { node: 0 }]);
    }

    #[test]
    fn feature_matrix_fills_missing_rows() {
        let mut b = GraphBuilder::new();
        b.add_node("a", "T", None).unwrap();
        b.add_node("b", "U", None).unwrap();
        b.add_edge("a", "b", "r").unwrap();
        b.set_features("a", vec![1.0, 2.0]).unwrap();
        let g = b.build().unwrap();
        let m = g.feature_matrix(2, 3);
        assert_eq!(&m[..2], &[1.0, 2.0]);
        assert!(m[2..].iter().all(|x| (-0.5..=0.5).contains(x)));
        assert_eq!(m, g.feature_matrix(2, 3));
    }
}
