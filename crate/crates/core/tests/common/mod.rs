//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use hinimp::autodiff::{Tape, Tensor, Var};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::new(rows, cols, data).unwrap()
}

/// |a - b| / max(|a|, |b|, floor)
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Largest relative error between tape gradients and central differences
/// for a scalar function of several leaf tensors.
pub fn fd_check<F>(inputs: &[Tensor], h: f64, floor: f64, f: F) -> f64
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Var<'t>,
{
    let tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = f(&tape, &vars);
    let grads = tape.backward(out).unwrap();
    let eval = |ins: &[Tensor]| {
        let tape = Tape::new();
        let vars: Vec<Var> = ins.iter().map(|t| tape.constant(t.clone())).collect();
        f(&tape, &vars).item()
    };
    let mut worst = 0.0f64;
    for (k, t) in inputs.iter().enumerate() {
        let analytic = grads.wrt(vars[k]).cloned().unwrap_or_else(|| Tensor::zeros(t.rows(), t.cols()));
        for i in 0..t.len() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[i] += h;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[i] -= h;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * h);
            worst = worst.max(rel_err(analytic.data()[i], numeric, floor));
        }
    }
    worst
}

/// W1 between equal-size uniform empirical distributions: mean absolute gap
/// of the sorted samples.
pub fn wasserstein_oracle(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// Minimum over all permutations of the mean absolute gap (Heap's algorithm).
pub fn wasserstein_exhaustive(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let cost = |p: &[usize]| p.iter().enumerate().map(|(i, &j)| (a[i] - b[j]).abs()).sum::<f64>();
    let mut best = cost(&perm);
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(cost(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best / n as f64
}

// ---------------------------------------------------------------- graphs

use hinimp::graph::{GraphBuilder, HeterogeneousGraph};
use hinimp::metapath::Metapath;
use hinimp::{EdgeTypeId, NodeTypeId};

/// Random HIN over three node types with typed relations in both
/// directions plus a same-type relation; at most `max_nodes` nodes.
pub fn random_hin(rng: &mut ChaCha8Rng, max_nodes: usize) -> HeterogeneousGraph {
    let types = ["A", "B", "C"];
    let mut b = GraphBuilder::new();
    let mut ids: Vec<Vec<String>> = vec![Vec::new(); 3];
    let total = rng.random_range(6..=max_nodes.max(6));
    for i in 0..total {
        let t = if i < 3 { i } else { rng.random_range(0..3) };
        let id = format!("{}{i}", types[t]);
        b.add_node(&id, types[t], None).unwrap();
        ids[t].push(id);
    }
    let rels = [(0, 1, "ab"), (1, 0, "ba"), (1, 2, "bc"), (2, 1, "cb"), (0, 0, "aa")];
    for &(s, d, name) in &rels {
        b.register_edge_type(name);
        let m = rng.random_range(0..=(ids[s].len() * ids[d].len()).min(3 * total));
        for _ in 0..m {
            let u = &ids[s][rng.random_range(0..ids[s].len())];
            let v = &ids[d][rng.random_range(0..ids[d].len())];
            b.add_edge(u, v, name).unwrap();
        }
    }
    b.build_unchecked()
}

/// Random walk over the schema, `nodes` slots long.
pub fn random_schema_path(rng: &mut ChaCha8Rng, g: &HeterogeneousGraph, nodes: usize) -> Option<Metapath> {
    let schema: Vec<(NodeTypeId, EdgeTypeId, NodeTypeId)> = g.schema().into_iter().collect();
    if schema.is_empty() {
        return None;
    }
    let first = schema[rng.random_range(0..schema.len())];
    let mut nt = vec![first.0, first.2];
    let mut et = vec![first.1];
    while nt.len() < nodes {
        let end = *nt.last().unwrap();
        let next: Vec<_> = schema.iter().filter(|t| t.0 == end).collect();
        if next.is_empty() {
            break;
        }
        let t = next[rng.random_range(0..next.len())];
        nt.push(t.2);
        et.push(t.1);
    }
    Metapath::new(nt, et).ok()
}

/// Path-instance counts by depth-first enumeration, keyed by dense ids.
pub fn dfs_counts(g: &HeterogeneousGraph, p: &Metapath) -> std::collections::BTreeMap<(usize, usize), u64> {
    let mut out_edges: Vec<Vec<(usize, EdgeTypeId)>> = vec![Vec::new(); g.node_count()];
    for e in g.edges() {
        out_edges[e.src.0].push((e.dst.0, e.etype));
    }
    let ty = |v: usize| g.node_type(hinimp::NodeId(v));
    fn walk(
        v: usize,
        hop: usize,
        start: usize,
        p: &Metapath,
        out: &[Vec<(usize, EdgeTypeId)>],
        ty: &dyn Fn(usize) -> NodeTypeId,
        acc: &mut std::collections::BTreeMap<(usize, usize), u64>,
    ) {
        if hop == p.edge_types.len() {
            *acc.entry((start, v)).or_default() += 1;
            return;
        }
        for &(w, et) in &out[v] {
            if et == p.edge_types[hop] && ty(w) == p.node_types[hop + 1] {
                walk(w, hop + 1, start, p, out, ty, acc);
            }
        }
    }
    let mut acc = std::collections::BTreeMap::new();
    for s in 0..g.node_count() {
        if ty(s) == p.node_types[0] {
            walk(s, 0, s, p, &out_edges, &ty, &mut acc);
        }
    }
    acc
}

// ------------------------------------------------------------ centrality

/// Undirected simple graph on `n` nodes; `connected` adds a random tree.
pub fn random_simple_graph(rng: &mut ChaCha8Rng, n: usize, p: f64, connected: bool) -> Vec<Vec<usize>> {
    let mut m = vec![vec![false; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                m[i][j] = true;
                m[j][i] = true;
            }
        }
    }
    if connected {
        for i in 1..n {
            let j = rng.random_range(0..i);
            m[i][j] = true;
            m[j][i] = true;
        }
    }
    (0..n).map(|i| (0..n).filter(|&j| m[i][j]).collect()).collect()
}

fn dense(adj: &[Vec<usize>]) -> nalgebra::DMatrix<f64> {
    let n = adj.len();
    let mut a = nalgebra::DMatrix::zeros(n, n);
    for (i, l) in adj.iter().enumerate() {
        for &j in l {
            a[(i, j)] = 1.0;
        }
    }
    a
}

pub fn degree_oracle(adj: &[Vec<usize>]) -> Vec<f64> {
    let a = dense(adj);
    (0..adj.len()).map(|i| a.row(i).sum()).collect()
}

/// Stationary vector of the damped walk (dangling rows jump uniformly),
/// solved directly as a linear system.
pub fn pagerank_oracle(adj: &[Vec<usize>], d: f64) -> Vec<f64> {
    let n = adj.len();
    let nf = n as f64;
    let a = dense(adj);
    let mut m = nalgebra::DMatrix::<f64>::identity(n, n);
    for u in 0..n {
        let deg: f64 = a.row(u).sum();
        for v in 0..n {
            let t = if deg > 0.0 { a[(u, v)] / deg } else { 1.0 / nf };
            m[(v, u)] -= d * t;
        }
    }
    let rhs = nalgebra::DVector::from_element(n, (1.0 - d) / nf);
    let x = m.lu().solve(&rhs).expect("nonsingular");
    let s = x.sum();
    x.iter().map(|v| v / s).collect()
}

/// Limit of power iteration from the uniform vector: the projection of the
/// all-ones vector onto the top eigenspace of `A + I`, unit L2 norm. For a
/// connected graph this is the positive Perron vector.
pub fn eigenvector_oracle(adj: &[Vec<usize>]) -> Vec<f64> {
    let n = adj.len();
    let e = nalgebra::SymmetricEigen::new(dense(adj));
    let top = e.eigenvalues.max();
    let ones = nalgebra::DVector::from_element(n, 1.0);
    let mut x = nalgebra::DVector::zeros(n);
    for k in 0..n {
        if e.eigenvalues[k] > top - 1e-9 {
            let v = e.eigenvectors.column(k);
            x += v * v.dot(&ones);
        }
    }
    let norm = x.norm();
    x.iter().map(|v| v / norm).collect()
}

/// Core number: the largest k such that the node survives repeated
/// deletion of nodes with fewer than k live neighbors.
pub fn kcore_oracle(adj: &[Vec<usize>]) -> Vec<f64> {
    let n = adj.len();
    let mut core = vec![0.0; n];
    for k in 1..=n {
        let mut alive = vec![true; n];
        loop {
            let drop: Vec<usize> = (0..n)
                .filter(|&v| alive[v] && adj[v].iter().filter(|&&w| alive[w]).count() < k)
                .collect();
            if drop.is_empty() {
                break;
            }
            for v in drop {
                alive[v] = false;
            }
        }
        for v in 0..n {
            if alive[v] {
                core[v] = k as f64;
            }
        }
    }
    core
}

/// All-pairs hop distances (Floyd-Warshall); `None` for unreachable.
pub fn distances(adj: &[Vec<usize>]) -> Vec<Vec<Option<usize>>> {
    let n = adj.len();
    let mut d = vec![vec![None; n]; n];
    for i in 0..n {
        d[i][i] = Some(0);
        for &j in &adj[i] {
            d[i][j] = Some(1);
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if let (Some(a), Some(b)) = (d[i][k], d[k][j]) {
                    if d[i][j].is_none_or(|c| a + b < c) {
                        d[i][j] = Some(a + b);
                    }
                }
            }
        }
    }
    d
}

/// Closeness with the reachable-share correction, and harmonic sums.
pub fn closeness_harmonic_oracle(adj: &[Vec<usize>]) -> (Vec<f64>, Vec<f64>) {
    let n = adj.len();
    let d = distances(adj);
    let mut c = vec![0.0; n];
    let mut h = vec![0.0; n];
    for i in 0..n {
        let reach: Vec<f64> = (0..n).filter(|&j| j != i).filter_map(|j| d[i][j]).map(|x| x as f64).collect();
        let total: f64 = reach.iter().sum();
        if total > 0.0 {
            let r = reach.len() as f64;
            c[i] = (r / (n - 1) as f64) * (r / total);
        }
        h[i] = reach.iter().map(|x| 1.0 / x).sum();
    }
    (c, h)
}

/// Rows of the six oracle measures, in the library's measure order.
pub fn oracle_rows(adj: &[Vec<usize>]) -> Vec<[f64; 6]> {
    let deg = degree_oracle(adj);
    let pr = pagerank_oracle(adj, hinimp::knowledge::centrality::PAGERANK_DAMPING);
    let ev = eigenvector_oracle(adj);
    let kc = kcore_oracle(adj);
    let (cl, hm) = closeness_harmonic_oracle(adj);
    (0..adj.len()).map(|i| [deg[i], pr[i], ev[i], kc[i], cl[i], hm[i]]).collect()
}

/// Independent min-max normalization (constant column: 1 if positive).
pub fn min_max(rows: &mut [[f64; 6]]) {
    for c in 0..6 {
        let lo = rows.iter().map(|r| r[c]).fold(f64::INFINITY, f64::min);
        let hi = rows.iter().map(|r| r[c]).fold(f64::NEG_INFINITY, f64::max);
        for r in rows.iter_mut() {
            r[c] = if hi - lo > 1e-12 * hi.abs().max(lo.abs()) { (r[c] - lo) / (hi - lo) } else if r[c] > 0.0 { 1.0 } else { 0.0 };
        }
    }
}

/// Every strict order in `want` (beyond `tie`) holds strictly in `got`,
/// and every tie in `want` is a tie (within `tie`) in `got`.
pub fn same_ranking(got: &[f64], want: &[f64], tie: f64) -> bool {
    for i in 0..want.len() {
        for j in 0..want.len() {
            let w = want[i] - want[j];
            let g = got[i] - got[j];
            if w > tie && g <= 0.0 {
                return false;
            }
            if w.abs() <= tie && g.abs() > tie {
                return false;
            }
        }
    }
    true
}

// --------------------------------------------------------------- fixture

use hinimp::knowledge::{build_bank, KnowledgeParams, Node2VecParams};
use hinimp::model::{Model, ModelConfig, ModelInputs, Variant};

/// Six nodes: three labeled authors, three papers, writes/written_by.
pub fn six_node_graph() -> HeterogeneousGraph {
    let mut b = GraphBuilder::new();
    for (i, y) in [1.0, 2.5, 4.0].into_iter().enumerate() {
        b.add_node(&format!("a{i}"), "author", Some(y)).unwrap();
    }
    for i in 0..3 {
        b.add_node(&format!("p{i}"), "paper", None).unwrap();
    }
    for (a, p) in [(0, 0), (0, 1), (1, 1), (1, 2), (2, 2), (2, 0), (2, 1)] {
        b.add_edge(&format!("a{a}"), &format!("p{p}"), "writes").unwrap();
        b.add_edge(&format!("p{p}"), &format!("a{a}"), "written_by").unwrap();
    }
    for i in 0..6 {
        let id = if i < 3 { format!("a{i}") } else { format!("p{}", i - 3) };
        b.set_features(&id, vec![0.1 * i as f64, 0.3 - 0.05 * i as f64, (i % 2) as f64]).unwrap();
    }
    b.build().unwrap()
}

pub fn six_node_model(variant: Variant, seed: u64) -> (HeterogeneousGraph, Model, ModelInputs) {
    let g = six_node_graph();
    let metapaths = hinimp::metapath::enumerate_metapaths(&g, 3);
    let features: Vec<f64> = (0..6).flat_map(|i| g.feature(hinimp::NodeId(i)).unwrap().to_vec()).collect();
    let params = KnowledgeParams {
        node2vec: Node2VecParams {
            walks_per_node: 2,
            walk_length: 6,
            window: 2,
            dimension: 4,
            epochs: 1,
            seed,
            ..Node2VecParams::default()
        },
        pathsim_top_k: 2,
    };
    let bank = build_bank(&g, &metapaths, &features, 3, &params, 1).unwrap();
    let inputs = ModelInputs::new(&g, &bank, hinimp::autodiff::Tensor::new(6, 3, features).unwrap()).unwrap();
    let cfg = ModelConfig {
        heads: 2,
        head_dim: 3,
        layers: 3,
        attention_hidden: 5,
        mlp_hidden: 4,
        variant,
        init_seed: seed,
        reference_seed: seed + 1,
    };
    let model = Model::new(cfg, 3, 4, g.edge_types().len()).unwrap();
    (g, model, inputs)
}

/// Training objective on the fixture: type-balanced MSE over the authors,
/// L2, and a margin term with an active triplet.
pub fn fixture_loss<'t>(tape: &'t Tape, model: &Model, inputs: &ModelInputs) -> Var<'t> {
    use hinimp::training::{l2_regularizer_var, margin_ranking_var, mse_loss_var};
    let nodes = std::rc::Rc::new(vec![0usize, 1, 2]);
    let out = model.forward(tape, inputs, &nodes).unwrap();
    let mut loss = mse_loss_var(tape, out.scores, &[1.0, 2.5, 4.0], &[0, 0, 0]).unwrap();
    loss = loss.add(l2_regularizer_var(tape, &model.store, 1e-2).unwrap()).unwrap();
    let rank = margin_ranking_var(tape, out.scores, &[(0, 2, 1), (2, 0, 1)], 50.0).unwrap().unwrap();
    loss.add(rank.scale(0.5)).unwrap()
}

/// Worst relative error per parameter family (name prefix before the
/// first dot, with encoder heads folded in), central differences.
pub fn model_gradient_check(model: &Model, inputs: &ModelInputs, h: f64, floor: f64) -> Vec<(String, f64)> {
    let tape = Tape::new();
    let loss = fixture_loss(&tape, model, inputs);
    let grads = tape.backward(loss).unwrap();
    let mut worst: std::collections::BTreeMap<String, f64> = std::collections::BTreeMap::new();
    let ids: Vec<_> = model.store.iter().filter(|(_, p)| p.trainable).map(|(id, p)| (id, p.name.clone())).collect();
    for (id, name) in ids {
        let family = name.split('.').next().unwrap().to_string();
        let family = if name.starts_with("head.") { name.clone() } else { family };
        let analytic = grads.param(id).cloned().unwrap_or_else(|| {
            let v = model.store.value(id);
            Tensor::zeros(v.rows(), v.cols())
        });
        let mut m = model.clone();
        for i in 0..analytic.len() {
            let base = m.store.value(id).data()[i];
            m.store.value_mut(id).data_mut()[i] = base + h;
            let up = fixture_loss(&Tape::new(), &m, inputs).item();
            m.store.value_mut(id).data_mut()[i] = base - h;
            let down = fixture_loss(&Tape::new(), &m, inputs).item();
            m.store.value_mut(id).data_mut()[i] = base;
            let e = rel_err(analytic.data()[i], (up - down) / (2.0 * h), floor);
            let w = worst.entry(family.clone()).or_insert(0.0);
            *w = w.max(e);
        }
    }
    worst.into_iter().collect()
}
