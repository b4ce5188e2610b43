//! Weak hypotheses: decision stumps and depth-bounded trees over binary
//! presence features, with real-valued confidence predictions.
//!
//! A candidate test on feature j partitions the current example subset into a
//! "holds" block (feature present) and a "not" block. The four class masses
//! of those blocks under the boosting distribution decide both the quality of
//! the test, `Z = 2(sqrt(W+h W-h) + sqrt(W+n W-n))`, and the two leaf
//! predictions, `c = ln((W+ + eps)/(W- + eps)) / 2`. The learner picks the
//! feature with the smallest Z; trees repeat the same criterion on each
//! block. Depth counts split levels below the root test, so depth 0 is a
//! stump.

use thiserror::Error;

use crate::boost::Distribution;
use crate::dataset::{Dataset, Label};
use crate::FeatureId;

/// Splitting below the root must beat the node's own Z contribution by more
/// than this to be worth keeping; guards against float-noise "improvements".
const MIN_Z_IMPROVEMENT: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum WeakLearnError {
    #[error("feature id {0} out of range: dataset has {1} features")]
    FeatureOutOfRange(FeatureId, usize),
    #[error("empty example subset")]
    EmptySubset,
    #[error("no usable feature: every feature id is excluded")]
    AllFeaturesExcluded,
    #[error("smoothing epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
}

/// The four distribution masses of a candidate split:
/// class (+/-) crossed with predicate outcome (holds / not).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WeightQuad {
    pub pos_holds: f64,
    pub neg_holds: f64,
    pub pos_not: f64,
    pub neg_not: f64,
}

/// Additive smoothing constant for leaf predictions; keeps them finite when a
/// block is pure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothingPolicy {
    epsilon: f64,
}

impl SmoothingPolicy {
    pub fn new(epsilon: f64) -> Result<Self, WeakLearnError> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(WeakLearnError::InvalidEpsilon(epsilon));
        }
        Ok(SmoothingPolicy { epsilon })
    }

    /// The conventional default, 1/(2m) for a training set of m examples.
    pub fn for_sample_count(m: usize) -> Self {
        SmoothingPolicy {
            epsilon: 1.0 / (2.0 * m.max(1) as f64),
        }
    }

    pub fn epsilon(self) -> f64 {
        self.epsilon
    }
}

/// Single-feature test with smoothed real-valued predictions for both
/// outcomes and the Z value that selected it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stump {
    pub feature: FeatureId,
    pub pred_holds: f64,
    pub pred_not: f64,
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TreeNode {
    Leaf {
        prediction: f64,
    },
    Split {
        feature: FeatureId,
        holds: Box<TreeNode>,
        not: Box<TreeNode>,
    },
}

impl TreeNode {
    fn height(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { holds, not, .. } => 1 + holds.height().max(not.height()),
        }
    }
}

/// Weak hypothesis: at least a root split (a stump), optionally grown deeper.
/// `depth` is the realized number of split levels below the root, so a stump
/// reports depth 0.
#[derive(Clone, Debug, PartialEq)]
pub struct WeakTree {
    root: TreeNode,
    depth: usize,
}

impl WeakTree {
    pub fn from_stump(s: &Stump) -> WeakTree {
        WeakTree {
            root: TreeNode::Split {
                feature: s.feature,
                holds: Box::new(TreeNode::Leaf {
                    prediction: s.pred_holds,
                }),
                not: Box::new(TreeNode::Leaf {
                    prediction: s.pred_not,
                }),
            },
            depth: 0,
        }
    }

    /// Rebuilds a tree from its parts (deserialization); validates that the
    /// root is a split.
    pub fn from_root(root: TreeNode) -> Result<WeakTree, WeakLearnError> {
        let depth = match &root {
            TreeNode::Leaf { .. } => return Err(WeakLearnError::EmptySubset),
            split => split.height() - 1,
        };
        Ok(WeakTree { root, depth })
    }

    pub fn root(&self) -> &TreeNode {
        &self.root
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Routes the row by feature presence and returns the leaf prediction.
    pub fn predict(&self, row: &[FeatureId]) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { prediction } => return *prediction,
                TreeNode::Split { feature, holds, not } => {
                    node = if row.binary_search(feature).is_ok() {
                        holds
                    } else {
                        not
                    };
                }
            }
        }
    }
}

/// Exact four-way mass split of the example subset by feature presence and
/// class, accumulated example by example.
pub fn partition_weights(
    ds: &Dataset,
    d: &Distribution,
    examples: &[usize],
    feature: FeatureId,
) -> Result<WeightQuad, WeakLearnError> {
    if feature as usize >= ds.num_features() {
        return Err(WeakLearnError::FeatureOutOfRange(feature, ds.num_features()));
    }
    let mut q = WeightQuad::default();
    for &i in examples {
        let mass = d.weight(i);
        let holds = ds.has_feature(i, feature);
        match (ds.label(i), holds) {
            (Label::Spam, true) => q.pos_holds += mass,
            (Label::Legit, true) => q.neg_holds += mass,
            (Label::Spam, false) => q.pos_not += mass,
            (Label::Legit, false) => q.neg_not += mass,
        }
    }
    Ok(q)
}

fn smoothed_prediction(w_pos: f64, w_neg: f64, epsilon: f64) -> f64 {
    0.5 * ((w_pos + epsilon) / (w_neg + epsilon)).ln()
}

/// Smoothed leaf predictions for the two blocks of a split.
pub fn leaf_predictions(q: WeightQuad, s: SmoothingPolicy) -> (f64, f64) {
    (
        smoothed_prediction(q.pos_holds, q.neg_holds, s.epsilon),
        smoothed_prediction(q.pos_not, q.neg_not, s.epsilon),
    )
}

/// The split-selection criterion, computed from unsmoothed masses.
pub fn block_z(q: WeightQuad) -> f64 {
    2.0 * ((q.pos_holds * q.neg_holds).sqrt() + (q.pos_not * q.neg_not).sqrt())
}

/// Reusable buffers for the per-node feature search. One pass over the
/// subset's sparse rows accumulates the "holds" masses of every feature it
/// touches; "not" masses follow by subtraction from the subset totals, and
/// untouched features all share the vacuous-split Z, so only the smallest
/// untouched id can ever matter for tie-breaking.
struct StumpScan {
    pos_holds: Vec<f64>,
    neg_holds: Vec<f64>,
    seen: Vec<bool>,
    touched: Vec<FeatureId>,
}

impl StumpScan {
    fn new(num_features: usize) -> StumpScan {
        StumpScan {
            pos_holds: vec![0.0; num_features],
            neg_holds: vec![0.0; num_features],
            seen: vec![false; num_features],
            touched: Vec::new(),
        }
    }

    fn class_masses(&self, ds: &Dataset, d: &Distribution, examples: &[usize]) -> (f64, f64) {
        let mut pos = 0.0;
        let mut neg = 0.0;
        for &i in examples {
            match ds.label(i) {
                Label::Spam => pos += d.weight(i),
                Label::Legit => neg += d.weight(i),
            }
        }
        (pos, neg)
    }

    fn best(
        &mut self,
        ds: &Dataset,
        d: &Distribution,
        examples: &[usize],
        excluded: &[FeatureId],
        s: SmoothingPolicy,
    ) -> Result<Stump, WeakLearnError> {
        if examples.is_empty() {
            return Err(WeakLearnError::EmptySubset);
        }
        for &f in &self.touched {
            self.pos_holds[f as usize] = 0.0;
            self.neg_holds[f as usize] = 0.0;
            self.seen[f as usize] = false;
        }
        self.touched.clear();

        let mut pos_total = 0.0;
        let mut neg_total = 0.0;
        for &i in examples {
            let mass = d.weight(i);
            let spam = ds.label(i).is_spam();
            if spam {
                pos_total += mass;
            } else {
                neg_total += mass;
            }
            for &f in ds.row(i) {
                let fi = f as usize;
                if !self.seen[fi] {
                    self.seen[fi] = true;
                    self.touched.push(f);
                }
                if spam {
                    self.pos_holds[fi] += mass;
                } else {
                    self.neg_holds[fi] += mass;
                }
            }
        }
        // id order so that equal-Z ties resolve to the lowest feature id
        self.touched.sort_unstable();

        let mut best: Option<(f64, FeatureId, WeightQuad)> = None;
        for &f in &self.touched {
            if excluded.contains(&f) {
                continue;
            }
            let fi = f as usize;
            let q = WeightQuad {
                pos_holds: self.pos_holds[fi],
                neg_holds: self.neg_holds[fi],
                // clamp: accumulation noise must not turn a mass negative
                pos_not: (pos_total - self.pos_holds[fi]).max(0.0),
                neg_not: (neg_total - self.neg_holds[fi]).max(0.0),
            };
            let z = block_z(q);
            if best.as_ref().is_none_or(|&(bz, _, _)| z < bz) {
                best = Some((z, f, q));
            }
        }

        // smallest feature absent from every row of the subset, if any
        let vacuous = (0..ds.num_features() as FeatureId)
            .find(|&f| !self.seen[f as usize] && !excluded.contains(&f));
        if let Some(f) = vacuous {
            let q = WeightQuad {
                pos_holds: 0.0,
                neg_holds: 0.0,
                pos_not: pos_total,
                neg_not: neg_total,
            };
            let z = block_z(q);
            let wins = match best {
                None => true,
                Some((bz, bf, _)) => z < bz || (z == bz && f < bf),
            };
            if wins {
                best = Some((z, f, q));
            }
        }

        let (z, feature, q) = best.ok_or(WeakLearnError::AllFeaturesExcluded)?;
        let (pred_holds, pred_not) = leaf_predictions(q, s);
        Ok(Stump {
            feature,
            pred_holds,
            pred_not,
            z,
        })
    }
}

/// Z-minimizing stump over all non-excluded features; ties break to the
/// lowest feature id.
pub fn best_stump(
    ds: &Dataset,
    d: &Distribution,
    examples: &[usize],
    excluded: &[FeatureId],
    s: SmoothingPolicy,
) -> Result<Stump, WeakLearnError> {
    StumpScan::new(ds.num_features()).best(ds, d, examples, excluded, s)
}

/// Grows a weak tree of at most `depth` split levels below the mandatory
/// root split. Descendant nodes stop early when pure, when their subset is
/// empty (prediction 0), when every feature on the path is excluded, or when
/// no split strictly reduces the node's Z contribution. Raw distribution
/// masses are used throughout; nothing is renormalized inside the tree.
pub fn grow_tree(
    ds: &Dataset,
    d: &Distribution,
    depth: usize,
    s: SmoothingPolicy,
) -> Result<WeakTree, WeakLearnError> {
    let examples: Vec<usize> = (0..ds.len()).collect();
    let mut scan = StumpScan::new(ds.num_features());
    let mut excluded: Vec<FeatureId> = Vec::new();

    let stump = scan.best(ds, d, &examples, &excluded, s)?;
    let (holds_idx, not_idx) = partition_by_feature(ds, &examples, stump.feature);
    excluded.push(stump.feature);
    let holds = grow_child(ds, d, &holds_idx, depth, &mut excluded, &mut scan, s)?;
    let not = grow_child(ds, d, &not_idx, depth, &mut excluded, &mut scan, s)?;
    excluded.pop();

    let root = TreeNode::Split {
        feature: stump.feature,
        holds: Box::new(holds),
        not: Box::new(not),
    };
    let depth = root.height() - 1;
    Ok(WeakTree { root, depth })
}

fn grow_child(
    ds: &Dataset,
    d: &Distribution,
    subset: &[usize],
    budget: usize,
    excluded: &mut Vec<FeatureId>,
    scan: &mut StumpScan,
    s: SmoothingPolicy,
) -> Result<TreeNode, WeakLearnError> {
    if subset.is_empty() {
        return Ok(TreeNode::Leaf { prediction: 0.0 });
    }
    let (w_pos, w_neg) = scan.class_masses(ds, d, subset);
    let prediction = smoothed_prediction(w_pos, w_neg, s.epsilon);
    if budget == 0 || w_pos == 0.0 || w_neg == 0.0 {
        return Ok(TreeNode::Leaf { prediction });
    }
    let stump = match scan.best(ds, d, subset, excluded, s) {
        Ok(stump) => stump,
        Err(WeakLearnError::AllFeaturesExcluded) => return Ok(TreeNode::Leaf { prediction }),
        Err(e) => return Err(e),
    };
    let node_z = 2.0 * (w_pos * w_neg).sqrt();
    if stump.z >= node_z - MIN_Z_IMPROVEMENT {
        return Ok(TreeNode::Leaf { prediction });
    }

    let (holds_idx, not_idx) = partition_by_feature(ds, subset, stump.feature);
    excluded.push(stump.feature);
    let holds = grow_child(ds, d, &holds_idx, budget - 1, excluded, scan, s)?;
    let not = grow_child(ds, d, &not_idx, budget - 1, excluded, scan, s)?;
    excluded.pop();
    Ok(TreeNode::Split {
        feature: stump.feature,
        holds: Box::new(holds),
        not: Box::new(not),
    })
}

fn partition_by_feature(
    ds: &Dataset,
    subset: &[usize],
    feature: FeatureId,
) -> (Vec<usize>, Vec<usize>) {
    subset
        .iter()
        .partition(|&&i| ds.has_feature(i, feature))
}
