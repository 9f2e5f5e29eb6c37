//! Typed multi-head attention over incoming edges with residual updates.
//!
//! For a target `i` and an incoming edge `j -> i` of type `t`, head `m`
//! scores `q_i W_t k_j^T * mu_t / sqrt(d)`; scores are normalized over the
//! incoming edges of `i`, neighbor values are summed with those weights,
//! and `h <- h + concat_m(v~_m) W_out`.

use std::rc::Rc;

use crate::autodiff::{concat_cols, concat_rows, ParamId, ParamStore, Tape, Tensor, Var};
use crate::graph::HeterogeneousGraph;
use crate::rng::Rng;
use crate::Result;

/// Incoming edges grouped by edge type.
#[derive(Debug, Clone)]
pub struct EdgePlan {
    pub node_count: usize,
    pub edge_types: usize,
    /// `(edge type, sources, targets)` for every type that has edges.
    pub groups: Vec<(usize, Rc<Vec<usize>>, Rc<Vec<usize>>)>,
    /// Concatenation of the group sources / targets, in group order.
    pub src: Rc<Vec<usize>>,
    pub dst: Rc<Vec<usize>>,
}

impl EdgePlan {
    pub fn new(g: &HeterogeneousGraph) -> Self {
        let t = g.edge_types().len();
        let mut by_type: Vec<(Vec<usize>, Vec<usize>)> = vec![(Vec::new(), Vec::new()); t];
        // Walk targets in id order so every group is sorted by target.
        for i in 0..g.node_count() {
            for &(j, et) in g.in_neighbors(crate::NodeId(i)) {
                by_type[et.0].0.push(j.0);
                by_type[et.0].1.push(i);
            }
        }
        let mut src = Vec::new();
        let mut dst = Vec::new();
        let mut groups = Vec::new();
        for (et, (s, d)) in by_type.into_iter().enumerate() {
            if s.is_empty() {
                continue;
            }
            src.extend_from_slice(&s);
            dst.extend_from_slice(&d);
            groups.push((et, Rc::new(s), Rc::new(d)));
        }
        Self {
            node_count: g.node_count(),
            edge_types: t,
            groups,
            src: Rc::new(src),
            dst: Rc::new(dst),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EncoderParams {
    pub heads: usize,
    pub head_dim: usize,
    pub layers: usize,
    pub w_in: ParamId,
    pub w_qry: Vec<ParamId>,
    pub w_key: Vec<ParamId>,
    pub w_val: Vec<ParamId>,
    pub w_psi: Vec<ParamId>,
    /// `1 x edge_types`, initialized to ones.
    pub mu: ParamId,
    pub w_out: ParamId,
}

impl EncoderParams {
    pub fn new(
        store: &mut ParamStore,
        input_dim: usize,
        heads: usize,
        head_dim: usize,
        layers: usize,
        edge_types: usize,
        rng: &mut Rng,
    ) -> Self {
        let md = heads * head_dim;
        let w_in = store.add_uniform("encoder.w_in", input_dim, md, input_dim, rng);
        let mut per_head = |what: &str, rng: &mut Rng| -> Vec<ParamId> {
            (0..heads)
                .map(|m| store.add_uniform(format!("encoder.head{m}.{what}"), head_dim, head_dim, head_dim, rng))
                .collect()
        };
        let w_qry = per_head("w_qry", rng);
        let w_key = per_head("w_key", rng);
        let w_val = per_head("w_val", rng);
        let w_psi = (0..edge_types)
            .map(|t| store.add_uniform(format!("encoder.edge{t}.w_psi"), head_dim, head_dim, head_dim, rng))
            .collect();
        let mu = store.add("encoder.mu", Tensor::filled(1, edge_types, 1.0), true);
        let w_out = store.add_uniform("encoder.w_out", md, md, md, rng);
        Self {
            heads,
            head_dim,
            layers,
            w_in,
            w_qry,
            w_key,
            w_val,
            w_psi,
            mu,
            w_out,
        }
    }

    pub fn output_dim(&self) -> usize {
        self.heads * self.head_dim
    }
}

pub struct EncoderOutput<'t> {
    /// Final hidden states, `node_count x heads*head_dim`.
    pub hidden: Var<'t>,
    /// Per update layer: `edges x heads` attention weights aligned with
    /// `EdgePlan::src` / `EdgePlan::dst`.
    pub attention: Vec<Var<'t>>,
}

fn per_head<'t>(tape: &'t Tape, store: &ParamStore, h: Var<'t>, ws: &[ParamId], d: usize) -> Result<Var<'t>> {
    let parts: Vec<Var<'t>> = ws
        .iter()
        .enumerate()
        .map(|(m, &w)| h.slice_cols(m * d, (m + 1) * d)?.matmul(tape.param(store, w)))
        .collect::<Result<_>>()?;
    concat_cols(&parts)
}

pub fn forward<'t>(
    tape: &'t Tape,
    store: &ParamStore,
    p: &EncoderParams,
    plan: &EdgePlan,
    x: Var<'t>,
) -> Result<EncoderOutput<'t>> {
    let (n, m, d) = (plan.node_count, p.heads, p.head_dim);
    let mut h = x.matmul(tape.param(store, p.w_in))?;
    let mut attention = Vec::new();
    if plan.groups.is_empty() {
        return Ok(EncoderOutput { hidden: h, attention });
    }
    let mu = tape.param(store, p.mu);
    let w_out = tape.param(store, p.w_out);
    let inv_sqrt_d = 1.0 / (d as f64).sqrt();
    for _ in 1..p.layers {
        let q = per_head(tape, store, h, &p.w_qry, d)?;
        let k = per_head(tape, store, h, &p.w_key, d)?;
        let v = per_head(tape, store, h, &p.w_val, d)?;
        let q_rows = q.reshape(n * m, d)?;
        let mut logits = Vec::with_capacity(plan.groups.len());
        for (et, src, dst) in &plan.groups {
            let qt = q_rows
                .matmul(tape.param(store, p.w_psi[*et]))?
                .reshape(n, m * d)?;
            let l = qt
                .gather_rows(Rc::clone(dst))?
                .block_row_dot(k.gather_rows(Rc::clone(src))?, m)?
                .mul_scalar(mu.slice_cols(*et, et + 1)?)?
                .scale(inv_sqrt_d);
            logits.push(l);
        }
        let s = concat_rows(&logits)?.segment_softmax(Rc::clone(&plan.dst), n)?;
        let agg = v
            .gather_rows(Rc::clone(&plan.src))?
            .scale_blocks(s)?
            .scatter_add_rows(Rc::clone(&plan.dst), n)?;
        h = h.add(agg.matmul(w_out)?)?;
        attention.push(s);
    }
    Ok(EncoderOutput { hidden: h, attention })
}
