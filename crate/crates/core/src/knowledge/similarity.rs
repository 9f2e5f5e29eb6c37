//! PathSim and attribute-cosine similarity graphs over sub-network members.

use crate::metapath::InducedSubnetwork;

/// Undirected weighted graph over `0..n`; each edge is stored in both
/// endpoint lists, sorted by neighbor.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    pub adj: Vec<Vec<(usize, f64)>>,
}

impl WeightedGraph {
    pub fn new(n: usize) -> Self {
        Self {
            adj: vec![Vec::new(); n],
        }
    }

    /// Builds from undirected `(u, v, w)` triples, dropping non-positive
    /// weights and self-loops. Repeated pairs keep the larger weight.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut g = Self::new(n);
        for (u, v, w) in edges {
            if u != v && w > 0.0 {
                g.adj[u].push((v, w));
                g.adj[v].push((u, w));
            }
        }
        for l in &mut g.adj {
            l.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.total_cmp(&a.1)));
            l.dedup_by_key(|e| e.0);
        }
        g
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search_by_key(&v, |e| e.0).is_ok()
    }
}

/// `2 M_uv / (M_uu + M_vv)`, or 0 when the denominator vanishes.
pub fn pathsim_value(m_uv: u64, m_uu: u64, m_vv: u64) -> f64 {
    let den = m_uu as f64 + m_vv as f64;
    if den == 0.0 {
        0.0
    } else {
        2.0 * m_uv as f64 / den
    }
}

/// Sparse PathSim rows over member positions. Off-diagonal entries only;
/// the diagonal is 1 wherever `M_uu > 0`.
pub fn pathsim(s: &InducedSubnetwork) -> Vec<Vec<(usize, f64)>> {
    let mut rows = vec![Vec::new(); s.len()];
    for &(u, v, m) in &s.weighted_edges {
        let (a, b) = (
            s.local_index(u).expect("member"),
            s.local_index(v).expect("member"),
        );
        rows[a].push((b, pathsim_value(m, s.commuting_diag[a], s.commuting_diag[b])));
    }
    rows
}

/// Keeps each member's `k` most similar peers (ties to the lower index) and
/// symmetrizes: an edge survives if either endpoint keeps it.
pub fn top_k_graph(rows: &[Vec<(usize, f64)>], k: usize) -> WeightedGraph {
    let mut edges = Vec::new();
    for (u, row) in rows.iter().enumerate() {
        let mut r = row.clone();
        r.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        edges.extend(r.into_iter().take(k).map(|(v, w)| (u, v, w)));
    }
    WeightedGraph::from_edges(rows.len(), edges)
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Sub-network edges reweighted by `max(0, cos(e'_u, e'_v))`.
/// `features` is the dense `node_count x dim` feature matrix.
pub fn attribute_similarity_graph(s: &InducedSubnetwork, features: &[f64], dim: usize) -> WeightedGraph {
    let row = |v: usize| &features[v * dim..(v + 1) * dim];
    let adj = s.simple_adjacency();
    let mut edges = Vec::new();
    for (a, nb) in adj.iter().enumerate() {
        for &b in nb.iter().filter(|&&b| b > a) {
            let w = cosine(row(s.members[a].0), row(s.members[b].0)).max(0.0);
            edges.push((a, b, w));
        }
    }
    WeightedGraph::from_edges(s.len(), edges)
}

/// Elementwise `f_att + f_top`.
pub fn similarity_embedding(f_att: &[f64], f_top: &[f64]) -> Vec<f64> {
    f_att.iter().zip(f_top).map(|(a, b)| a + b).collect()
}
