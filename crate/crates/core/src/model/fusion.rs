//! Attentive fusion of knowledge slots inside each metapath, then across
//! the metapaths that start at a node's type.
//!
//! Attention coefficients are averaged over all members of a sub-network,
//! so there is one intra coefficient per (metapath, slot) and one inter
//! coefficient per metapath, shared by every member.

use std::rc::Rc;

use crate::autodiff::{ParamId, ParamStore, Tape, Tensor, Var};
use crate::graph::HeterogeneousGraph;
use crate::knowledge::{KnowledgeBank, MEASURES, SLOTS};
use crate::rng::Rng;
use crate::Result;

/// Graph- and bank-derived constants consumed by the fusion forward pass.
/// Rows enumerate (metapath, member) pairs over non-empty sub-networks.
#[derive(Debug, Clone)]
pub struct FusionPlan {
    pub node_count: usize,
    pub dim: usize,
    /// Number of non-empty sub-networks.
    pub metapaths: usize,
    /// Index into `bank.entries` for each planned metapath.
    pub bank_index: Vec<usize>,
    pub k_of_row: Rc<Vec<usize>>,
    pub node_of_row: Rc<Vec<usize>>,
    /// `1 / |members|` per planned metapath.
    pub inv_size: Rc<Vec<f64>>,
    /// Source node type per planned metapath (softmax segments).
    pub type_of_k: Rc<Vec<usize>>,
    pub node_types: usize,
    /// Distinct centrality values per measure, as `U x 1` columns.
    pub unique_values: Vec<Tensor>,
    /// Row to distinct-value index, per measure.
    pub unique_index: Vec<Rc<Vec<usize>>>,
    pub similarity: Tensor,
    /// Per slot: row mask and whether any row is disabled.
    pub masks: Vec<(Rc<Vec<f64>>, bool)>,
}

impl FusionPlan {
    pub fn new(g: &HeterogeneousGraph, bank: &KnowledgeBank) -> Self {
        let mut plan = FusionPlan {
            node_count: g.node_count(),
            dim: bank.dim,
            metapaths: 0,
            bank_index: Vec::new(),
            k_of_row: Rc::default(),
            node_of_row: Rc::default(),
            inv_size: Rc::default(),
            type_of_k: Rc::default(),
            node_types: g.node_types().len(),
            unique_values: Vec::new(),
            unique_index: Vec::new(),
            similarity: Tensor::zeros(0, bank.dim),
            masks: Vec::new(),
        };
        let (mut k_of_row, mut node_of_row, mut inv, mut types) = (vec![], vec![], vec![], vec![]);
        let mut cent: Vec<Vec<f64>> = vec![Vec::new(); MEASURES];
        let mut sim = Vec::new();
        let mut masks: Vec<Vec<f64>> = vec![Vec::new(); SLOTS];
        for (bi, e) in bank.entries.iter().enumerate() {
            if e.members.is_empty() {
                continue;
            }
            let k = plan.bank_index.len();
            plan.bank_index.push(bi);
            inv.push(1.0 / e.members.len() as f64);
            types.push(e.source_type.0);
            for (r, v) in e.members.iter().enumerate() {
                k_of_row.push(k);
                node_of_row.push(v.0);
                for (l, col) in cent.iter_mut().enumerate() {
                    col.push(e.centrality.get(r, l));
                }
                for (l, m) in masks.iter_mut().enumerate() {
                    m.push(e.mask.get(r, l));
                }
                sim.extend_from_slice(e.similarity.row(r));
            }
        }
        for col in cent {
            let mut uniq = col.clone();
            uniq.sort_by(f64::total_cmp);
            uniq.dedup();
            let idx = col
                .iter()
                .map(|x| uniq.binary_search_by(|u| u.total_cmp(x)).expect("present"))
                .collect();
            plan.unique_values.push(Tensor::column(uniq));
            plan.unique_index.push(Rc::new(idx));
        }
        plan.metapaths = plan.bank_index.len();
        plan.similarity = Tensor::new(node_of_row.len(), bank.dim, sim).expect("rows x dim");
        plan.masks = masks
            .into_iter()
            .map(|m| {
                let partial = m.iter().any(|&x| x != 1.0);
                (Rc::new(m), partial)
            })
            .collect();
        plan.k_of_row = Rc::new(k_of_row);
        plan.node_of_row = Rc::new(node_of_row);
        plan.inv_size = Rc::new(inv);
        plan.type_of_k = Rc::new(types);
        plan
    }

    pub fn rows(&self) -> usize {
        self.node_of_row.len()
    }
}

/// Per-measure perceptron `1 -> dim -> dim` with tanh in between.
#[derive(Debug, Clone, Copy)]
pub struct Perceptron {
    pub w_a: ParamId,
    pub b_a: ParamId,
    pub w_b: ParamId,
    pub b_b: ParamId,
}

/// Scalar attention score `W . tanh(W' c + b)` applied row-wise.
#[derive(Debug, Clone, Copy)]
pub struct AttentionScore {
    /// `dim x hidden`, i.e. `W'` transposed for row vectors.
    pub inner: ParamId,
    pub bias: ParamId,
    /// `hidden x 1`
    pub outer: ParamId,
}

#[derive(Debug, Clone)]
pub struct FusionParams {
    pub perceptrons: Vec<Perceptron>,
    pub intra: AttentionScore,
    pub inter: AttentionScore,
}

impl FusionParams {
    pub fn new(store: &mut ParamStore, dim: usize, hidden: usize, rng: &mut Rng) -> Self {
        let perceptrons = (0..MEASURES)
            .map(|l| Perceptron {
                w_a: store.add_uniform(format!("knowledge.mlp{l}.w_a"), 1, dim, 1, rng),
                b_a: store.add_zeros(format!("knowledge.mlp{l}.b_a"), 1, dim),
                w_b: store.add_uniform(format!("knowledge.mlp{l}.w_b"), dim, dim, dim, rng),
                b_b: store.add_zeros(format!("knowledge.mlp{l}.b_b"), 1, dim),
            })
            .collect();
        let mut score = |name: &str, rng: &mut Rng| AttentionScore {
            inner: store.add_uniform(format!("fusion.{name}.inner"), dim, hidden, dim, rng),
            bias: store.add_zeros(format!("fusion.{name}.bias"), 1, hidden),
            outer: store.add_uniform(format!("fusion.{name}.outer"), hidden, 1, hidden, rng),
        };
        let intra = score("intra", rng);
        let inter = score("inter", rng);
        Self {
            perceptrons,
            intra,
            inter,
        }
    }
}

impl Perceptron {
    /// `c = tanh(x W_a + b_a) W_b + b_b` for an `n x 1` column of values.
    pub fn apply<'t>(&self, tape: &'t Tape, store: &ParamStore, x: Var<'t>) -> Result<Var<'t>> {
        let h = x
            .matmul(tape.param(store, self.w_a))?
            .add_row(tape.param(store, self.b_a))?
            .tanh();
        h.matmul(tape.param(store, self.w_b))?
            .add_row(tape.param(store, self.b_b))
    }
}

impl AttentionScore {
    pub fn apply<'t>(&self, tape: &'t Tape, store: &ParamStore, c: Var<'t>) -> Result<Var<'t>> {
        c.matmul(tape.param(store, self.inner))?
            .add_row(tape.param(store, self.bias))?
            .tanh()
            .matmul(tape.param(store, self.outer))
    }

    /// Score of an all-zero input, `W . tanh(b)`, as `1 x 1`.
    pub fn at_zero<'t>(&self, tape: &'t Tape, store: &ParamStore) -> Result<Var<'t>> {
        tape.param(store, self.bias)
            .tanh()
            .matmul(tape.param(store, self.outer))
    }
}

pub struct FusionOutput<'t> {
    /// `node_count x dim`; zero rows for nodes in no sub-network.
    pub e: Var<'t>,
    /// `metapaths x SLOTS` intra coefficients (rows sum to 1).
    pub alpha: Option<Var<'t>>,
    /// `metapaths x 1` inter coefficients (sum to 1 per source type).
    pub tau: Option<Var<'t>>,
    /// `rows x dim` per-metapath embeddings `e_{i,k}`.
    pub per_metapath: Option<Var<'t>>,
}

fn mean_per_metapath<'t>(plan: &FusionPlan, s: Var<'t>) -> Result<Var<'t>> {
    s.scatter_add_rows(Rc::clone(&plan.k_of_row), plan.metapaths)?
        .scale_rows_const(Rc::clone(&plan.inv_size))
}

pub fn forward<'t>(tape: &'t Tape, store: &ParamStore, params: &FusionParams, plan: &FusionPlan) -> Result<FusionOutput<'t>> {
    if plan.metapaths == 0 {
        return Ok(FusionOutput {
            e: tape.constant(Tensor::zeros(plan.node_count, plan.dim)),
            alpha: None,
            tau: None,
            per_metapath: None,
        });
    }
    let mut slots: Vec<Var<'t>> = Vec::with_capacity(SLOTS);
    let mut scores: Vec<Var<'t>> = Vec::with_capacity(SLOTS);
    for l in 0..MEASURES {
        let vals = tape.constant(plan.unique_values[l].clone());
        let emb = params.perceptrons[l].apply(tape, store, vals)?;
        let s = params.intra.apply(tape, store, emb)?;
        let idx = Rc::clone(&plan.unique_index[l]);
        slots.push(emb.gather_rows(Rc::clone(&idx))?);
        scores.push(s.gather_rows(idx)?);
    }
    let sim = tape.constant(plan.similarity.clone());
    slots.push(sim);
    scores.push(params.intra.apply(tape, store, sim)?);

    // Disabled slots hold a zero embedding, whose score is W . tanh(b).
    let s0 = params.intra.at_zero(tape, store)?;
    for l in 0..SLOTS {
        let (mask, partial) = &plan.masks[l];
        if !*partial {
            continue;
        }
        let keep = tape.constant(Tensor::column(mask.to_vec()));
        let off = tape.constant(Tensor::column(mask.iter().map(|m| 1.0 - m).collect()));
        scores[l] = scores[l].mul(keep)?.add(off.mul_scalar(s0)?)?;
        slots[l] = slots[l].scale_rows_const(Rc::clone(mask))?;
    }

    let per_slot: Vec<Var<'t>> = scores
        .into_iter()
        .map(|s| mean_per_metapath(plan, s))
        .collect::<Result<_>>()?;
    let alpha = crate::autodiff::concat_cols(&per_slot)?.softmax_rows();
    let alpha_rows = alpha.gather_rows(Rc::clone(&plan.k_of_row))?;
    let mut e_k: Option<Var<'t>> = None;
    for (l, c) in slots.into_iter().enumerate() {
        let term = c.scale_blocks(alpha_rows.slice_cols(l, l + 1)?)?;
        e_k = Some(match e_k {
            None => term,
            Some(acc) => acc.add(term)?,
        });
    }
    let e_k = e_k.expect("SLOTS > 0");

    let tau_raw = mean_per_metapath(plan, params.inter.apply(tape, store, e_k)?)?;
    let tau = tau_raw.segment_softmax(Rc::clone(&plan.type_of_k), plan.node_types)?;
    let weighted = e_k.scale_blocks(tau.gather_rows(Rc::clone(&plan.k_of_row))?)?;
    let e = weighted.scatter_add_rows(Rc::clone(&plan.node_of_row), plan.node_count)?;
    Ok(FusionOutput {
        e,
        alpha: Some(alpha),
        tau: Some(tau),
        per_metapath: Some(e_k),
    })
}
