//! The importance model: knowledge fusion, typed attention encoder, and a
//! Wasserstein scoring head, plus the ablation variants.

pub mod encoder;
pub mod fusion;
pub mod ot;

use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::{concat_cols, ParamId, ParamStore, Tape, Tensor, Var};
use crate::container::Container;
use crate::graph::HeterogeneousGraph;
use crate::knowledge::KnowledgeBank;
use crate::{rng, Error, Result};

pub use encoder::{EdgePlan, EncoderParams};
pub use fusion::{FusionParams, FusionPlan};
pub use ot::ReferenceDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Full,
    /// Two-layer perceptron head on the encoder output instead of the
    /// Wasserstein head.
    WoWd,
    /// Wasserstein head with the weight vector fixed to ones.
    WoLambda,
    /// Node and edge types collapsed before anything else runs.
    WoNh,
    /// Encoder skipped; the head reads the fused knowledge embedding.
    WoAtt,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::Full, Variant::WoWd, Variant::WoLambda, Variant::WoNh, Variant::WoAtt];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::WoWd => "wo_wd",
            Variant::WoLambda => "wo_lambda",
            Variant::WoNh => "wo_nh",
            Variant::WoAtt => "wo_att",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?} (expected full, wo_wd, wo_lambda, wo_nh, wo_att)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub heads: usize,
    pub head_dim: usize,
    /// Layer count `R`; `R - 1` attention updates run.
    pub layers: usize,
    pub attention_hidden: usize,
    /// Hidden width of the perceptron head used by `wo_wd`.
    pub mlp_hidden: usize,
    pub variant: Variant,
    pub init_seed: u64,
    pub reference_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            heads: 4,
            head_dim: 32,
            layers: 2,
            attention_hidden: 64,
            mlp_hidden: 64,
            variant: Variant::Full,
            init_seed: 0,
            reference_seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn check(&self) -> Result<()> {
        if self.heads == 0 || self.head_dim == 0 || self.layers == 0 || self.attention_hidden == 0 || self.mlp_hidden == 0 {
            return Err(Error::Config("heads, head_dim, layers and hidden widths must be positive".into()));
        }
        Ok(())
    }
}

/// Constants derived from one graph and bank.
#[derive(Debug, Clone)]
pub struct ModelInputs {
    pub features: Tensor,
    pub fusion: FusionPlan,
    pub edges: EdgePlan,
}

impl ModelInputs {
    /// `features` is the dense `node_count x F` initial feature matrix.
    pub fn new(g: &HeterogeneousGraph, bank: &KnowledgeBank, features: Tensor) -> Result<Self> {
        if features.rows() != g.node_count() {
            return Err(Error::shape("features", &features.shape(), &[g.node_count(), features.cols()]));
        }
        Ok(Self {
            features,
            fusion: FusionPlan::new(g, bank),
            edges: EdgePlan::new(g),
        })
    }

    pub fn node_count(&self) -> usize {
        self.features.rows()
    }
}

#[derive(Debug, Clone)]
enum Head {
    Wasserstein { lambda: ParamId },
    Mlp { w1: ParamId, b1: ParamId, w2: ParamId, b2: ParamId },
}

#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub feature_dim: usize,
    pub bank_dim: usize,
    pub edge_types: usize,
    pub store: ParamStore,
    fusion: FusionParams,
    encoder: Option<EncoderParams>,
    head: Head,
    pub reference: Option<ReferenceDistribution>,
}

pub struct ForwardOutput<'t> {
    /// `nodes x 1` importance scores.
    pub scores: Var<'t>,
    pub alpha: Option<Var<'t>>,
    pub tau: Option<Var<'t>>,
    pub attention: Vec<Var<'t>>,
    /// Representation fed to the head, all nodes.
    pub hidden: Var<'t>,
    /// Wasserstein embeddings of the scored nodes, when that head is used.
    pub embedding: Option<Var<'t>>,
}

impl Model {
    pub fn new(config: ModelConfig, feature_dim: usize, bank_dim: usize, edge_types: usize) -> Result<Self> {
        config.check()?;
        let mut store = ParamStore::new();
        let mut r = rng::derived(config.init_seed, rng::tag("init"));
        let fusion = FusionParams::new(&mut store, bank_dim, config.attention_hidden, &mut r);
        let encoder = (config.variant != Variant::WoAtt).then(|| {
            EncoderParams::new(
                &mut store,
                feature_dim + bank_dim,
                config.heads,
                config.head_dim,
                config.layers,
                edge_types,
                &mut r,
            )
        });
        let d_r = encoder.as_ref().map_or(bank_dim, EncoderParams::output_dim);
        let head = match config.variant {
            Variant::WoWd => Head::Mlp {
                w1: store.add_uniform("head.mlp.w1", d_r, config.mlp_hidden, d_r, &mut r),
                b1: store.add_zeros("head.mlp.b1", 1, config.mlp_hidden),
                w2: store.add_uniform("head.mlp.w2", config.mlp_hidden, 1, config.mlp_hidden, &mut r),
                b2: store.add_zeros("head.mlp.b2", 1, 1),
            },
            Variant::WoLambda => Head::Wasserstein {
                lambda: store.add("head.lambda", Tensor::filled(d_r, 1, 1.0), false),
            },
            _ => Head::Wasserstein {
                lambda: store.add_uniform("head.lambda", d_r, 1, d_r, &mut r),
            },
        };
        let reference = matches!(head, Head::Wasserstein { .. })
            .then(|| ReferenceDistribution::new(d_r, config.reference_seed));
        Ok(Self {
            config,
            feature_dim,
            bank_dim,
            edge_types,
            store,
            fusion,
            encoder,
            head,
            reference,
        })
    }

    /// Width of the representation the head reads.
    pub fn head_input_dim(&self) -> usize {
        self.encoder.as_ref().map_or(self.bank_dim, EncoderParams::output_dim)
    }

    /// Scores `nodes` (dense indices). Everything upstream of the head runs
    /// over the whole graph.
    pub fn forward<'t>(&self, tape: &'t Tape, inputs: &ModelInputs, nodes: &Rc<Vec<usize>>) -> Result<ForwardOutput<'t>> {
        if inputs.features.cols() != self.feature_dim {
            return Err(Error::shape("model features", &inputs.features.shape(), &[inputs.node_count(), self.feature_dim]));
        }
        let fused = fusion::forward(tape, &self.store, &self.fusion, &inputs.fusion)?;
        let (hidden, attention) = match &self.encoder {
            Some(enc) => {
                let x = concat_cols(&[tape.constant(inputs.features.clone()), fused.e])?;
                let out = encoder::forward(tape, &self.store, enc, &inputs.edges, x)?;
                (out.hidden, out.attention)
            }
            None => (fused.e, Vec::new()),
        };
        let h = hidden.gather_rows(Rc::clone(nodes))?;
        let (scores, embedding) = match &self.head {
            Head::Wasserstein { lambda } => {
                let reference = self.reference.as_ref().expect("wasserstein head has a reference");
                let neg = tape.constant(ot::negated_reference(reference));
                let emb = ot::embed_rows(h, reference, neg)?;
                (emb.matmul(tape.param(&self.store, *lambda))?, Some(emb))
            }
            Head::Mlp { w1, b1, w2, b2 } => {
                let p = |id| tape.param(&self.store, id);
                let z = h.matmul(p(*w1))?.add_row(p(*b1))?.tanh();
                (z.matmul(p(*w2))?.add_row(p(*b2))?, None)
            }
        };
        Ok(ForwardOutput {
            scores,
            alpha: fused.alpha,
            tau: fused.tau,
            attention,
            hidden,
            embedding,
        })
    }

    /// Scores without keeping gradients around.
    pub fn predict(&self, inputs: &ModelInputs, nodes: &[usize]) -> Result<Vec<f64>> {
        let tape = Tape::new();
        let out = self.forward(&tape, inputs, &Rc::new(nodes.to_vec()))?;
        let v = out.scores.value();
        Ok(v.data().to_vec())
    }

    /// Parameters plus the reference, with `extra` merged into the manifest.
    pub fn to_container(&self, extra: serde_json::Value) -> Container {
        let mut manifest = serde_json::json!({
            "model": self.config,
            "feature_dim": self.feature_dim,
            "bank_dim": self.bank_dim,
            "edge_types": self.edge_types,
            "reference": self.reference,
        });
        if let (Some(m), serde_json::Value::Object(e)) = (manifest.as_object_mut(), extra) {
            m.extend(e);
        }
        let mut c = Container::new(manifest);
        for (_, p) in self.store.iter() {
            c.insert(format!("param.{}", p.name), p.value.clone());
        }
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        let field = |k: &str| {
            c.manifest
                .get(k)
                .cloned()
                .ok_or_else(|| Error::Checkpoint(format!("manifest lacks {k:?}")))
        };
        let config: ModelConfig = serde_json::from_value(field("model")?)?;
        let fdim: usize = serde_json::from_value(field("feature_dim")?)?;
        let bdim: usize = serde_json::from_value(field("bank_dim")?)?;
        let etypes: usize = serde_json::from_value(field("edge_types")?)?;
        let reference: Option<ReferenceDistribution> = serde_json::from_value(field("reference")?)?;
        let mut model = Model::new(config, fdim, bdim, etypes)?;
        if model.reference.is_some() && reference.is_none() {
            return Err(Error::Checkpoint("checkpoint has no reference distribution; refusing to score".into()));
        }
        if let (Some(want), Some(have)) = (&model.reference, &reference) {
            if want.seed != have.seed || want.dim() != have.dim() {
                return Err(Error::Checkpoint("reference distribution does not match the model".into()));
            }
        }
        model.reference = reference;
        let ids: Vec<(ParamId, String)> = model.store.iter().map(|(id, p)| (id, p.name.clone())).collect();
        for (id, name) in ids {
            let t = c.get(&format!("param.{name}"))?;
            if t.shape() != model.store.value(id).shape() {
                return Err(Error::Checkpoint(format!("parameter {name} has shape {:?}", t.shape())));
            }
            *model.store.value_mut(id) = t.clone();
        }
        Ok(model)
    }
}
