//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::graph::{Anchor, Attachment, LabelRule, RelationSpec, SyntheticSpec};
use crate::knowledge::{KnowledgeParams, Node2VecParams};
use crate::metrics::NrmseNorm;
use crate::model::{ModelConfig, Variant};
use crate::training::{TargetTransform, TrainConfig, FOLDS};
use crate::{rng, Error, Result};

/// Documented keys: `(key, default, meaning)`. Keys under
/// `synthetic.relation.` and `synthetic.label.` are open-ended.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("seed", "0", "run seed; every random stream derives from it"),
    ("output", "out", "output directory (relative to the config file)"),
    ("dataset.nodes", "", "nodes TSV: orig_id, type, optional importance"),
    ("dataset.edges", "", "edges TSV: src, dst, edge type"),
    ("dataset.features", "", "optional features TSV: orig_id, comma-separated values"),
    ("synthetic", "", "planted | custom; exclusive with dataset.*"),
    ("synthetic.node_types", "", "custom node counts, e.g. author:300, paper:600"),
    ("synthetic.relation.<name>", "", "src -> dst, per_node=N, anchor=source|destination, attachment=uniform|preferential, inverse=NAME"),
    ("synthetic.label.<type>", "", "slope=S, intercept=I, noise=F (noise as a share of the clean label std)"),
    ("synthetic.feature_dim", "8", "generated feature width"),
    ("synthetic.seed", "<seed>", "graph seed, defaults to the run seed"),
    ("metapaths", "", "semicolon-separated, e.g. author[writes]paper[written_by]author; empty = enumerate"),
    ("metapath.max_nodes", "3", "node-count bound for enumeration"),
    ("features.dim", "16", "initial feature width when the dataset has none"),
    ("node2vec.walks_per_node", "10", "walks started per node"),
    ("node2vec.walk_length", "40", "nodes per walk"),
    ("node2vec.window", "5", "skip-gram window"),
    ("node2vec.p", "1", "return bias"),
    ("node2vec.q", "1", "in-out bias"),
    ("node2vec.negative_samples", "5", "negatives per positive pair"),
    ("node2vec.dimension", "128", "similarity embedding width"),
    ("node2vec.epochs", "5", "skip-gram passes"),
    ("node2vec.learning_rate", "0.025", "initial skip-gram step"),
    ("pathsim.top_k", "10", "peers kept per node in the PathSim graph"),
    ("model.variant", "full", "full | wo_wd | wo_lambda | wo_nh | wo_att"),
    ("model.heads", "4", "attention heads M"),
    ("model.head_dim", "32", "per-head width d"),
    ("model.layers", "2", "layer count R"),
    ("model.attention_hidden", "64", "hidden width h of the fusion attention"),
    ("model.mlp_hidden", "64", "hidden width of the wo_wd head"),
    ("train.epochs", "300", "maximum epochs"),
    ("train.learning_rate", "0.001", "Adam step size"),
    ("train.weight_decay", "0.0001", "L2 coefficient over trainable tensors"),
    ("train.margin", "1", "margin of the ranking loss"),
    ("train.rank_weight", "0", "ranking loss weight (0 disables)"),
    ("train.triplets", "256", "triplets per step"),
    ("train.patience", "50", "early-stop patience on validation MAE"),
    ("train.batch_fraction", "1", "share of training nodes per step"),
    ("train.target", "identity", "identity | log1p"),
    ("train.record_timing", "true", "write wall-clock epoch_ms (false writes 0)"),
    ("train.folds", "all", "folds to run: all or a comma list of 0..4"),
    ("metrics.ndcg_k", "100", "NDCG cutoff"),
    ("metrics.nrmse_norm", "range", "range | mean | std"),
    ("knowledge_disable_fraction", "0", "share of knowledge slots zeroed before training"),
    ("ablate.fractions", "0, 0.2, 0.4, 0.6, 0.8", "disable fractions swept by ablate"),
    ("evaluate.fold", "0", "checkpoint fold for evaluate and predict"),
    ("evaluate.split", "test", "train | val | test"),
    ("predict.nodes", "", "comma-separated node ids; empty = every node of a labeled type"),
    ("cache", "true", "reuse the knowledge bank cache under <output>/cache"),
];

/// Printable key table for `--help`.
pub fn keys_help() -> String {
    let mut s = String::from("Config keys (key = value, '#' starts a comment):\n");
    for (k, d, m) in KEYS {
        let d = if d.is_empty() { "-" } else { d };
        s.push_str(&format!("  {k:<28} [{d}] {m}\n"));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DataSource {
    Dataset {
        nodes: PathBuf,
        edges: PathBuf,
        features: Option<PathBuf>,
    },
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub output: PathBuf,
    pub data: DataSource,
    pub metapaths: Vec<String>,
    pub metapath_max_nodes: usize,
    pub feature_dim: usize,
    pub knowledge: KnowledgeParams,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub folds: Vec<usize>,
    pub knowledge_disable_fraction: f64,
    pub ablate_fractions: Vec<f64>,
    pub evaluate_fold: usize,
    pub evaluate_split: String,
    pub predict_nodes: Vec<String>,
    pub cache: bool,
    /// Keys as written, for the result snapshot.
    pub raw: BTreeMap<String, String>,
}

/// The planted-signal benchmark: authors write papers, papers appear in
/// venues, author importance is an affine function of degree plus 5% noise.
pub fn planted_spec(seed: u64) -> SyntheticSpec {
    let rel = |name: &str, s: &str, d: &str, k: usize, anchor, inv: &str| RelationSpec {
        name: name.into(),
        src_type: s.into(),
        dst_type: d.into(),
        per_node: k,
        anchor,
        attachment: Attachment::Preferential,
        inverse: Some(inv.into()),
    };
    SyntheticSpec {
        node_types: vec![("author".into(), 300), ("paper".into(), 600), ("venue".into(), 100)],
        relations: vec![
            rel("writes", "author", "paper", 2, Anchor::Destination, "written_by"),
            rel("published_in", "paper", "venue", 1, Anchor::Source, "publishes"),
        ],
        feature_dim: 8,
        labels: vec![LabelRule {
            node_type: "author".into(),
            slope: 0.25,
            intercept: 1.0,
            noise: 0.05,
        }],
        seed,
    }
}

/// Parses `key = value` lines; later keys override earlier ones.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: "config".into(),
            line: i + 1,
            msg: "expected key = value".into(),
        })?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

struct Reader<'a> {
    map: &'a BTreeMap<String, String>,
}

impl Reader<'_> {
    fn str(&self, k: &str) -> Option<&str> {
        self.map.get(k).map(String::as_str).filter(|s| !s.is_empty())
    }

    fn parse<T: std::str::FromStr>(&self, k: &str, default: T) -> Result<T> {
        match self.str(k) {
            None => Ok(default),
            Some(s) => s.parse().map_err(|_| Error::Config(format!("bad value for {k}: {s:?}"))),
        }
    }
}

fn list<T: std::str::FromStr>(key: &str, s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse().map_err(|_| Error::Config(format!("bad entry in {key}: {x:?}"))))
        .collect()
}

fn parse_relation(name: &str, v: &str) -> Result<RelationSpec> {
    let bad = |m: &str| Error::Config(format!("synthetic.relation.{name}: {m}"));
    let mut parts = v.split(',').map(str::trim);
    let ends = parts.next().unwrap_or("");
    let (s, d) = ends.split_once("->").ok_or_else(|| bad("expected 'src -> dst'"))?;
    let mut r = RelationSpec {
        name: name.into(),
        src_type: s.trim().into(),
        dst_type: d.trim().into(),
        per_node: 1,
        anchor: Anchor::Source,
        attachment: Attachment::Uniform,
        inverse: None,
    };
    for p in parts {
        let (k, x) = p.split_once('=').ok_or_else(|| bad("expected key=value"))?;
        match (k.trim(), x.trim()) {
            ("per_node", x) => r.per_node = x.parse().map_err(|_| bad("bad per_node"))?,
            ("anchor", "source") => r.anchor = Anchor::Source,
            ("anchor", "destination") => r.anchor = Anchor::Destination,
            ("attachment", "uniform") => r.attachment = Attachment::Uniform,
            ("attachment", "preferential") => r.attachment = Attachment::Preferential,
            ("inverse", x) => r.inverse = Some(x.into()),
            (k, _) => return Err(bad(&format!("unknown or invalid field {k:?}"))),
        }
    }
    Ok(r)
}

fn parse_label(t: &str, v: &str) -> Result<LabelRule> {
    let bad = |m: &str| Error::Config(format!("synthetic.label.{t}: {m}"));
    let mut r = LabelRule {
        node_type: t.into(),
        slope: 1.0,
        intercept: 0.0,
        noise: 0.0,
    };
    for p in v.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, x) = p.split_once('=').ok_or_else(|| bad("expected key=value"))?;
        let x: f64 = x.trim().parse().map_err(|_| bad("bad number"))?;
        match k.trim() {
            "slope" => r.slope = x,
            "intercept" => r.intercept = x,
            "noise" => r.noise = x,
            k => return Err(bad(&format!("unknown field {k:?}"))),
        }
    }
    Ok(r)
}

fn known_key(k: &str) -> bool {
    k.starts_with("synthetic.relation.") || k.starts_with("synthetic.label.") || KEYS.iter().any(|(n, _, _)| *n == k)
}

impl RunConfig {
    /// Builds a config from parsed pairs; relative paths resolve against
    /// `base`.
    pub fn from_pairs(map: BTreeMap<String, String>, base: &Path) -> Result<Self> {
        if let Some(k) = map.keys().find(|k| !known_key(k)) {
            return Err(Error::Config(format!("unknown key {k:?} (see --help)")));
        }
        let r = Reader { map: &map };
        let seed: u64 = r.parse("seed", 0)?;
        let path = |k: &str| r.str(k).map(|s| base.join(s));

        let has_dataset = r.str("dataset.nodes").is_some() || r.str("dataset.edges").is_some();
        let data = match (has_dataset, r.str("synthetic")) {
            (true, Some(_)) => return Err(Error::Config("set either dataset.* or synthetic, not both".into())),
            (false, None) => return Err(Error::Config("no data: set dataset.nodes/dataset.edges or synthetic".into())),
            (true, None) => DataSource::Dataset {
                nodes: path("dataset.nodes").ok_or_else(|| Error::Config("dataset.nodes missing".into()))?,
                edges: path("dataset.edges").ok_or_else(|| Error::Config("dataset.edges missing".into()))?,
                features: path("dataset.features"),
            },
            (false, Some(kind)) => {
                let graph_seed = r.parse("synthetic.seed", seed)?;
                let mut spec = match kind {
                    "planted" => planted_spec(graph_seed),
                    "custom" => SyntheticSpec {
                        node_types: Vec::new(),
                        relations: Vec::new(),
                        feature_dim: 8,
                        labels: Vec::new(),
                        seed: graph_seed,
                    },
                    _ => return Err(Error::Config(format!("synthetic must be planted or custom, got {kind:?}"))),
                };
                if let Some(s) = r.str("synthetic.node_types") {
                    spec.node_types = s
                        .split(',')
                        .map(|p| {
                            let (n, c) = p
                                .split_once(':')
                                .ok_or_else(|| Error::Config(format!("synthetic.node_types entry {p:?}")))?;
                            let c = c
                                .trim()
                                .parse()
                                .map_err(|_| Error::Config(format!("bad count in {p:?}")))?;
                            Ok((n.trim().to_string(), c))
                        })
                        .collect::<Result<_>>()?;
                }
                let rels: Vec<RelationSpec> = map
                    .iter()
                    .filter_map(|(k, v)| k.strip_prefix("synthetic.relation.").map(|n| parse_relation(n, v)))
                    .collect::<Result<_>>()?;
                if !rels.is_empty() {
                    spec.relations = rels;
                }
                let labels: Vec<LabelRule> = map
                    .iter()
                    .filter_map(|(k, v)| k.strip_prefix("synthetic.label.").map(|t| parse_label(t, v)))
                    .collect::<Result<_>>()?;
                if !labels.is_empty() {
                    spec.labels = labels;
                }
                spec.feature_dim = r.parse("synthetic.feature_dim", spec.feature_dim)?;
                DataSource::Synthetic(spec)
            }
        };

        let d = Node2VecParams::default();
        let node2vec = Node2VecParams {
            walks_per_node: r.parse("node2vec.walks_per_node", d.walks_per_node)?,
            walk_length: r.parse("node2vec.walk_length", d.walk_length)?,
            window: r.parse("node2vec.window", d.window)?,
            p: r.parse("node2vec.p", d.p)?,
            q: r.parse("node2vec.q", d.q)?,
            negative_samples: r.parse("node2vec.negative_samples", d.negative_samples)?,
            dimension: r.parse("node2vec.dimension", d.dimension)?,
            epochs: r.parse("node2vec.epochs", d.epochs)?,
            learning_rate: r.parse("node2vec.learning_rate", d.learning_rate)?,
            seed: rng::derive(seed, rng::tag("node2vec")),
        };
        let m = ModelConfig::default();
        let model = ModelConfig {
            heads: r.parse("model.heads", m.heads)?,
            head_dim: r.parse("model.head_dim", m.head_dim)?,
            layers: r.parse("model.layers", m.layers)?,
            attention_hidden: r.parse("model.attention_hidden", m.attention_hidden)?,
            mlp_hidden: r.parse("model.mlp_hidden", m.mlp_hidden)?,
            variant: r.parse::<Variant>("model.variant", Variant::Full)?,
            init_seed: rng::derive(seed, rng::tag("init")),
            reference_seed: rng::derive(seed, rng::tag("reference")),
        };
        model.check()?;
        let t = TrainConfig::default();
        let train = TrainConfig {
            epochs: r.parse("train.epochs", t.epochs)?,
            learning_rate: r.parse("train.learning_rate", t.learning_rate)?,
            weight_decay: r.parse("train.weight_decay", t.weight_decay)?,
            margin: r.parse("train.margin", t.margin)?,
            rank_weight: r.parse("train.rank_weight", t.rank_weight)?,
            triplets: r.parse("train.triplets", t.triplets)?,
            patience: r.parse("train.patience", t.patience)?,
            batch_fraction: r.parse("train.batch_fraction", t.batch_fraction)?,
            seed,
            target: r.parse::<TargetTransform>("train.target", t.target)?,
            ndcg_k: r.parse("metrics.ndcg_k", t.ndcg_k)?,
            nrmse_norm: r.parse::<NrmseNorm>("metrics.nrmse_norm", t.nrmse_norm)?,
            record_timing: r.parse("train.record_timing", t.record_timing)?,
        };
        train.check()?;
        let folds = match r.str("train.folds") {
            None | Some("all") => (0..FOLDS).collect(),
            Some(s) => list::<usize>("train.folds", s)?,
        };
        if folds.is_empty() || folds.iter().any(|&f| f >= FOLDS) {
            return Err(Error::Config(format!("train.folds must name folds in 0..{FOLDS}")));
        }
        let fraction: f64 = r.parse("knowledge_disable_fraction", 0.0)?;
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::Config("knowledge_disable_fraction must lie in [0, 1]".into()));
        }
        let ablate_fractions = match r.str("ablate.fractions") {
            None => vec![0.0, 0.2, 0.4, 0.6, 0.8],
            Some(s) => list::<f64>("ablate.fractions", s)?,
        };
        if ablate_fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::Config("ablate.fractions must lie in [0, 1]".into()));
        }
        let evaluate_split = r.str("evaluate.split").unwrap_or("test").to_string();
        if !["train", "val", "test"].contains(&evaluate_split.as_str()) {
            return Err(Error::Config("evaluate.split must be train, val or test".into()));
        }
        let evaluate_fold = r.parse("evaluate.fold", 0usize)?;
        if evaluate_fold >= FOLDS {
            return Err(Error::Config(format!("evaluate.fold must be below {FOLDS}")));
        }
        let metapaths = r
            .str("metapaths")
            .map(|s| s.split(';').map(|p| p.trim().to_string()).filter(|p| !p.is_empty()).collect())
            .unwrap_or_default();
        Ok(Self {
            seed,
            output: path("output").unwrap_or_else(|| base.join("out")),
            data,
            metapaths,
            metapath_max_nodes: r.parse("metapath.max_nodes", 3)?,
            feature_dim: r.parse("features.dim", 16)?,
            knowledge: KnowledgeParams {
                node2vec,
                pathsim_top_k: r.parse("pathsim.top_k", 10)?,
            },
            model,
            train,
            folds,
            knowledge_disable_fraction: fraction,
            ablate_fractions,
            evaluate_fold,
            evaluate_split,
            predict_nodes: r.str("predict.nodes").map_or(Ok(Vec::new()), |s| list::<String>("predict.nodes", s))?,
            cache: r.parse("cache", true)?,
            raw: map,
        })
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        Self::from_pairs(parse_pairs(text)?, base)
    }

    /// Reads a config file, applying `overrides` (e.g. `seed`, `output`)
    /// on top of it.
    pub fn load(path: &Path, overrides: &[(&str, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut map = parse_pairs(&text).map_err(|e| match e {
            Error::Parse { line, msg, .. } => Error::Parse {
                path: path.display().to_string(),
                line,
                msg,
            },
            e => e,
        })?;
        for (k, v) in overrides {
            map.insert((*k).to_string(), v.clone());
        }
        let base = path.parent().unwrap_or(Path::new("."));
        let mut cfg = Self::from_pairs(map, base)?;
        // An --out given on the command line is relative to the working
        // directory, not the config file.
        if let Some((_, o)) = overrides.iter().find(|(k, _)| *k == "output") {
            cfg.output = PathBuf::from(o);
        }
        Ok(cfg)
    }

    /// Same config under another seed, with every derived seed refreshed.
    pub fn with_seed(&self, seed: u64) -> Result<Self> {
        let mut map = self.raw.clone();
        map.insert("seed".into(), seed.to_string());
        let mut c = Self::from_pairs(map, Path::new(""))?;
        c.output = self.output.clone();
        c.data = match (&self.data, c.data) {
            (DataSource::Dataset { .. }, _) => self.data.clone(),
            (_, d) => d,
        };
        Ok(c)
    }

    pub fn with_value(&self, key: &str, value: &str) -> Result<Self> {
        let mut map = self.raw.clone();
        map.insert(key.into(), value.into());
        let mut c = Self::from_pairs(map, Path::new(""))?;
        c.output = self.output.clone();
        if let DataSource::Dataset { .. } = self.data {
            c.data = self.data.clone();
        }
        Ok(c)
    }
}
