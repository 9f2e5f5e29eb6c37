//! Metapaths, commuting count matrices, and metapath-induced sub-networks.

use std::collections::{BTreeSet, HashMap};

use crate::graph::{EdgeTypeId, HeterogeneousGraph, NodeId, NodeTypeId};
use crate::sparse::CountMatrix;
use crate::{Error, Result};

/// Type-level path `A1 -R1-> A2 -R2-> ... -RH-> A(H+1)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Metapath {
    pub node_types: Vec<NodeTypeId>,
    pub edge_types: Vec<EdgeTypeId>,
}

type Triple = (NodeTypeId, EdgeTypeId, NodeTypeId);

impl Metapath {
    pub fn new(node_types: Vec<NodeTypeId>, edge_types: Vec<EdgeTypeId>) -> Result<Self> {
        if node_types.len() < 2 || edge_types.len() + 1 != node_types.len() {
            return Err(Error::Metapath(format!(
                "{} node slots and {} edge slots",
                node_types.len(),
                edge_types.len()
            )));
        }
        Ok(Self {
            node_types,
            edge_types,
        })
    }

    pub fn hops(&self) -> usize {
        self.edge_types.len()
    }

    pub fn source_type(&self) -> NodeTypeId {
        self.node_types[0]
    }

    pub fn target_type(&self) -> NodeTypeId {
        *self.node_types.last().expect("at least two slots")
    }

    fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        (0..self.hops()).map(|h| (self.node_types[h], self.edge_types[h], self.node_types[h + 1]))
    }

    /// Every hop occurs in the graph schema.
    pub fn check_schema(&self, g: &HeterogeneousGraph) -> Result<()> {
        let schema = g.schema();
        for t in self.triples() {
            if !schema.contains(&t) {
                return Err(Error::Metapath(format!(
                    "{} has hop {}[{}]{} absent from the schema",
                    self.display(g),
                    g.node_types().name(t.0 .0),
                    g.edge_types().name(t.1 .0),
                    g.node_types().name(t.2 .0)
                )));
            }
        }
        Ok(())
    }

    /// Renders as `A[writes]P[written_by]A`.
    pub fn display(&self, g: &HeterogeneousGraph) -> String {
        let mut s = g.node_types().name(self.node_types[0].0).to_string();
        for h in 0..self.hops() {
            s.push('[');
            s.push_str(g.edge_types().name(self.edge_types[h].0));
            s.push(']');
            s.push_str(g.node_types().name(self.node_types[h + 1].0));
        }
        s
    }

    /// Parses `A[writes]P[written_by]A`. A `-` in place of a bracketed edge
    /// name (`A-P-A`) selects the unique edge type between the two node
    /// types.
    pub fn parse(text: &str, g: &HeterogeneousGraph) -> Result<Self> {
        let text = text.trim();
        let mut node_names = Vec::new();
        let mut edge_names: Vec<Option<String>> = Vec::new();
        let mut cur = String::new();
        let mut chars = text.chars();
        while let Some(c) = chars.next() {
            match c {
                '[' => {
                    node_names.push(std::mem::take(&mut cur));
                    let mut e = String::new();
                    loop {
                        match chars.next() {
                            Some(']') => break,
                            Some(c) => e.push(c),
                            None => return Err(Error::Metapath(format!("unclosed '[' in {text:?}"))),
                        }
                    }
                    edge_names.push(Some(e));
                }
                '-' => {
                    node_names.push(std::mem::take(&mut cur));
                    edge_names.push(None);
                }
                c => cur.push(c),
            }
        }
        node_names.push(cur);
        let mut node_types = Vec::new();
        for n in &node_names {
            let n = n.trim();
            let t = g
                .node_types()
                .get(n)
                .ok_or_else(|| Error::Metapath(format!("unknown node type {n:?} in {text:?}")))?;
            node_types.push(NodeTypeId(t));
        }
        let schema = g.schema();
        let mut edge_types = Vec::new();
        for (h, e) in edge_names.iter().enumerate() {
            let et = match e {
                Some(name) => EdgeTypeId(g.edge_types().get(name.trim()).ok_or_else(|| {
                    Error::Metapath(format!("unknown edge type {name:?} in {text:?}"))
                })?),
                None => {
                    let (a, b) = (node_types[h], node_types[h + 1]);
                    let cands: Vec<EdgeTypeId> = schema
                        .iter()
                        .filter(|t| t.0 == a && t.2 == b)
                        .map(|t| t.1)
                        .collect();
                    match cands.as_slice() {
                        [one] => *one,
                        [] => return Err(Error::Metapath(format!("no edge type for hop {h} of {text:?}"))),
                        _ => {
                            return Err(Error::Metapath(format!(
                                "ambiguous edge type for hop {h} of {text:?}; name it in brackets"
                            )))
                        }
                    }
                }
            };
            edge_types.push(et);
        }
        let p = Metapath::new(node_types, edge_types)?;
        p.check_schema(g)?;
        Ok(p)
    }

    /// Interleaved id sequence used for deterministic ordering.
    fn sort_key(&self) -> Vec<usize> {
        let mut k = vec![self.node_types[0].0];
        for h in 0..self.hops() {
            k.push(self.edge_types[h].0);
            k.push(self.node_types[h + 1].0);
        }
        k
    }
}

/// Pairs of schema triples whose edge sets are exact transposes of each
/// other, i.e. `(X, r, Y)` and `(Y, r', X)` with `u -r-> v` iff `v -r'-> u`.
fn mirror_pairs(g: &HeterogeneousGraph) -> BTreeSet<(Triple, Triple)> {
    let mut by_triple: HashMap<Triple, Vec<(usize, usize)>> = HashMap::new();
    for e in g.edges() {
        let t = (g.node_type(e.src), e.etype, g.node_type(e.dst));
        by_triple.entry(t).or_default().push((e.src.0, e.dst.0));
    }
    for v in by_triple.values_mut() {
        v.sort_unstable();
    }
    let mut out = BTreeSet::new();
    for (t, edges) in &by_triple {
        let mut transposed: Vec<(usize, usize)> = edges.iter().map(|&(a, b)| (b, a)).collect();
        transposed.sort_unstable();
        for (u, other) in &by_triple {
            if u.0 == t.2 && u.2 == t.0 && *other == transposed {
                out.insert((*t, *u));
            }
        }
    }
    out
}

/// All symmetric metapaths with at most `max_nodes` node slots: palindromic
/// node types, and the edge at hop `h` is the exact mirror of the edge at
/// hop `H - 1 - h`. Sorted lexicographically by interleaved type ids.
pub fn enumerate_metapaths(g: &HeterogeneousGraph, max_nodes: usize) -> Vec<Metapath> {
    if max_nodes < 2 {
        return Vec::new();
    }
    let schema: Vec<Triple> = g.schema().into_iter().collect();
    let mirrors = mirror_pairs(g);
    let mut out = Vec::new();
    let mut stack: Vec<Vec<Triple>> = schema.iter().map(|&t| vec![t]).collect();
    while let Some(path) = stack.pop() {
        let h = path.len();
        let symmetric = (0..h).all(|i| mirrors.contains(&(path[i], path[h - 1 - i])));
        if symmetric {
            let mut nodes: Vec<NodeTypeId> = path.iter().map(|t| t.0).collect();
            nodes.push(path[h - 1].2);
            let edges = path.iter().map(|t| t.1).collect();
            out.push(Metapath::new(nodes, edges).expect("well-formed by construction"));
        }
        if h + 2 <= max_nodes {
            let end = path[h - 1].2;
            for &t in schema.iter().filter(|t| t.0 == end) {
                let mut next = path.clone();
                next.push(t);
                stack.push(next);
            }
        }
    }
    out.sort_by_key(Metapath::sort_key);
    out.dedup();
    out
}

/// `M = prod_h Adj(R_h)` with rows over type-`A1` nodes and columns over
/// type-`A(H+1)` nodes, both in ascending node id order.
#[derive(Debug, Clone, PartialEq)]
pub struct CommutingMatrix {
    pub row_nodes: Vec<NodeId>,
    pub col_nodes: Vec<NodeId>,
    pub counts: CountMatrix,
}

fn hop_adjacency(
    g: &HeterogeneousGraph,
    a: NodeTypeId,
    r: EdgeTypeId,
    b: NodeTypeId,
    local: &[usize],
    rows: usize,
    cols: usize,
) -> CountMatrix {
    let coords: Vec<(usize, usize)> = g
        .edges()
        .iter()
        .filter(|e| e.etype == r && g.node_type(e.src) == a && g.node_type(e.dst) == b)
        .map(|e| (local[e.src.0], local[e.dst.0]))
        .collect();
    CountMatrix::from_coords(rows, cols, &coords)
}

/// Exact path-instance counts for `p`. Overflow is reported, never wrapped.
pub fn commuting_matrix(g: &HeterogeneousGraph, p: &Metapath) -> Result<CommutingMatrix> {
    p.check_schema(g)?;
    // Position of every node within its own type.
    let mut local = vec![0usize; g.node_count()];
    let mut type_sizes = vec![0usize; g.node_types().len()];
    for i in 0..g.node_count() {
        let t = g.node_type(NodeId(i)).0;
        local[i] = type_sizes[t];
        type_sizes[t] += 1;
    }
    let size = |t: NodeTypeId| type_sizes[t.0];
    let mut m = hop_adjacency(
        g,
        p.node_types[0],
        p.edge_types[0],
        p.node_types[1],
        &local,
        size(p.node_types[0]),
        size(p.node_types[1]),
    );
    for h in 1..p.hops() {
        let adj = hop_adjacency(
            g,
            p.node_types[h],
            p.edge_types[h],
            p.node_types[h + 1],
            &local,
            size(p.node_types[h]),
            size(p.node_types[h + 1]),
        );
        m = m.matmul(&adj)?;
    }
    Ok(CommutingMatrix {
        row_nodes: g.nodes_of_type(p.source_type()),
        col_nodes: g.nodes_of_type(p.target_type()),
        counts: m,
    })
}

/// Same-type graph whose edges join nodes connected by metapath instances.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedSubnetwork {
    pub metapath_index: usize,
    pub node_type: NodeTypeId,
    /// Ascending node ids.
    pub members: Vec<NodeId>,
    /// Off-diagonal nonzero counts `(u, v, M_uv)`, ordered by `(u, v)`.
    pub weighted_edges: Vec<(NodeId, NodeId, u64)>,
    /// `M_uu` per member, aligned with `members`.
    pub commuting_diag: Vec<u64>,
}

impl InducedSubnetwork {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn local_index(&self, v: NodeId) -> Option<usize> {
        self.members.binary_search(&v).ok()
    }

    /// Undirected simple graph over member positions: `i ~ j` iff
    /// `M_ij > 0` or `M_ji > 0`, `i != j`.
    pub fn simple_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.members.len()];
        for &(u, v, _) in &self.weighted_edges {
            let (a, b) = (
                self.local_index(u).expect("edge endpoints are members"),
                self.local_index(v).expect("edge endpoints are members"),
            );
            adj[a].push(b);
            adj[b].push(a);
        }
        for l in &mut adj {
            l.sort_unstable();
            l.dedup();
        }
        adj
    }
}

/// Builds the sub-network of `p` (which must start and end at one type).
pub fn induce_subnetwork(
    g: &HeterogeneousGraph,
    p: &Metapath,
    metapath_index: usize,
) -> Result<InducedSubnetwork> {
    if p.source_type() != p.target_type() {
        return Err(Error::Metapath(format!(
            "{} does not return to its source type",
            p.display(g)
        )));
    }
    let cm = commuting_matrix(g, p)?;
    let n = cm.row_nodes.len();
    let mut touched = vec![false; n];
    for r in 0..n {
        for (c, _) in cm.counts.row(r) {
            touched[r] = true;
            touched[c] = true;
        }
    }
    let members: Vec<NodeId> = (0..n).filter(|&i| touched[i]).map(|i| cm.row_nodes[i]).collect();
    let mut weighted_edges = Vec::new();
    let mut commuting_diag = Vec::with_capacity(members.len());
    for r in 0..n {
        if touched[r] {
            commuting_diag.push(cm.counts.get(r, r));
        }
        for (c, v) in cm.counts.row(r) {
            if c != r {
                weighted_edges.push((cm.row_nodes[r], cm.col_nodes[c], v));
            }
        }
    }
    Ok(InducedSubnetwork {
        metapath_index,
        node_type: p.source_type(),
        members,
        weighted_edges,
        commuting_diag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphBuilder;

    /// authors a1,a2,a3; papers p1,p2; writes + inverse.
    fn toy(coauthor_twice: bool) -> HeterogeneousGraph {
        let mut b = GraphBuilder::new();
        for a in ["a1", "a2", "a3"] {
            b.add_node(a, "A", None).unwrap();
        }
        for p in ["p1", "p2"] {
            b.add_node(p, "P", None).unwrap();
        }
        let mut w = vec![("a1", "p1"), ("a2", "p1")];
        if coauthor_twice {
            w.extend([("a1", "p2"), ("a2", "p2")]);
        } else {
            w.push(("a3", "p2"));
        }
        for (a, p) in w {
            b.add_edge(a, p, "writes").unwrap();
            b.add_edge(p, a, "written_by").unwrap();
        }
        b.build().unwrap()
    }

    #[test]
    fn apa_single_shared_paper() {
        let g = toy(false);
        let p = Metapath::parse("A[writes]P[written_by]A", &g).unwrap();
        let s = induce_subnetwork(&g, &p, 0).unwrap();
        assert_eq!(s.members, vec![NodeId(0), NodeId(1), NodeId(2)]);
        assert_eq!(
            s.weighted_edges,
            vec![(NodeId(0), NodeId(1), 1), (NodeId(1), NodeId(0), 1)]
        );
        assert_eq!(s.commuting_diag, vec![1, 1, 1]);
    }

    #[test]
    fn two_shared_papers_count_twice() {
        let g = toy(true);
        let p = Metapath::parse("A-P-A", &g).unwrap();
        let s = induce_subnetwork(&g, &p, 0).unwrap();
        assert!(s.weighted_edges.contains(&(NodeId(0), NodeId(1), 2)));
        // a3 writes nothing here
        assert_eq!(s.local_index(NodeId(2)), None);
    }

    #[test]
    fn star_commuting_matrix_all_ones() {
        let mut b = GraphBuilder::new();
        b.add_node("p", "P", None).unwrap();
        for a in ["a", "b", "c"] {
            b.add_node(a, "A", None).unwrap();
            b.add_edge(a, "p", "w").unwrap();
            b.add_edge("p", a, "wi").unwrap();
        }
        let g = b.build().unwrap();
        let p = Metapath::parse("A[w]P[wi]A", &g).unwrap();
        let m = commuting_matrix(&g, &p).unwrap();
        assert_eq!(m.counts.to_dense(), vec![vec![1; 3]; 3]);
    }

    #[test]
    fn empty_edge_set_gives_zero_matrix() {
        let mut b = GraphBuilder::new();
        b.add_node("a", "A", None).unwrap();
        b.add_node("p", "P", None).unwrap();
        b.add_node("q", "P", None).unwrap();
        b.add_edge("p", "q", "cites").unwrap();
        let g = b.build().unwrap();
        let p = Metapath::new(vec![NodeTypeId(1), NodeTypeId(1), NodeTypeId(1)], vec![EdgeTypeId(0); 2]).unwrap();
        let m = commuting_matrix(&g, &p).unwrap();
        assert_eq!(m.counts.nnz(), 0);
    }

    #[test]
    fn dblp_schema_enumeration() {
        let mut b = GraphBuilder::new();
        for (id, t) in [("a", "A"), ("p", "P"), ("v", "V"), ("t", "T")] {
            b.add_node(id, t, None).unwrap();
        }
        for (s, d, r, ri) in [("a", "p", "ap", "pa"), ("p", "v", "pv", "vp"), ("p", "t", "pt", "tp")] {
            b.add_edge(s, d, r).unwrap();
            b.add_edge(d, s, ri).unwrap();
        }
        let g = b.build().unwrap();
        let found: Vec<String> = enumerate_metapaths(&g, 3).iter().map(|m| m.display(&g)).collect();
        for want in ["A[ap]P[pa]A", "P[pa]A[ap]P", "P[pv]V[vp]P", "P[pt]T[tp]P", "V[vp]P[pv]V", "T[tp]P[pt]T"] {
            assert!(found.contains(&want.to_string()), "missing {want}: {found:?}");
        }
        assert_eq!(found.len(), 6);
        assert!(enumerate_metapaths(&g, 1).is_empty());
    }

    #[test]
    fn self_type_symmetric_edge() {
        let mut b = GraphBuilder::new();
        b.add_node("x", "T", None).unwrap();
        b.add_node("y", "T", None).unwrap();
        b.add_edge("x", "y", "knows").unwrap();
        b.add_edge("y", "x", "knows").unwrap();
        // second type so the graph validates
        b.add_node("z", "U", None).unwrap();
        let g = b.build().unwrap();
        let found: Vec<String> = enumerate_metapaths(&g, 2).iter().map(|m| m.display(&g)).collect();
        assert_eq!(found, vec!["T[knows]T"]);
    }

    #[test]
    fn parse_rejects_unknown_and_off_schema() {
        let g = toy(false);
        assert!(Metapath::parse("A[nope]P[written_by]A", &g).is_err());
        assert!(Metapath::parse("A[written_by]P[writes]A", &g).is_err());
        assert!(Metapath::parse("A[writes", &g).is_err());
    }
}
