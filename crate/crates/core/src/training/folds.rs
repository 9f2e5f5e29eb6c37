use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::graph::{NodeId, NodeTypeId};
use crate::{rng, Error, Result};

pub const FOLDS: usize = 5;
pub const VALIDATION_SHARE: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<NodeId>,
    pub val: Vec<NodeId>,
    pub test: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
}

/// Five-fold plan stratified by node type. Within each type the shuffled
/// nodes are cut into five near-equal test chunks (sizes differ by at most
/// one, larger chunks first); validation is the first
/// `floor(0.15 * |train|)` of the shuffled remainder.
pub fn make_folds(labeled: &[(NodeId, NodeTypeId)], seed: u64) -> Result<FoldPlan> {
    let mut by_type: BTreeMap<NodeTypeId, Vec<NodeId>> = BTreeMap::new();
    for &(v, t) in labeled {
        by_type.entry(t).or_default().push(v);
    }
    if by_type.is_empty() {
        return Err(Error::Insufficient("no labeled nodes".into()));
    }
    let mut folds = vec![
        Fold {
            train: Vec::new(),
            val: Vec::new(),
            test: Vec::new(),
        };
        FOLDS
    ];
    for (t, mut nodes) in by_type {
        if nodes.len() < FOLDS {
            return Err(Error::Insufficient(format!(
                "node type {} has {} labeled nodes; five folds need at least {FOLDS}",
                t.0,
                nodes.len()
            )));
        }
        nodes.sort_unstable();
        let mut r = rng::derived(seed, rng::tag("folds").wrapping_add(t.0 as u64));
        nodes.shuffle(&mut r);
        let n = nodes.len();
        let mut start = 0;
        for (f, fold) in folds.iter_mut().enumerate() {
            let size = n / FOLDS + usize::from(f < n % FOLDS);
            let test = &nodes[start..start + size];
            let rest: Vec<NodeId> = nodes[..start].iter().chain(&nodes[start + size..]).copied().collect();
            let n_val = (VALIDATION_SHARE * rest.len() as f64).floor() as usize;
            fold.test.extend_from_slice(test);
            fold.val.extend_from_slice(&rest[..n_val]);
            fold.train.extend_from_slice(&rest[n_val..]);
            start += size;
        }
    }
    Ok(FoldPlan { folds })
}
