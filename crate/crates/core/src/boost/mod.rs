//! The boosting driver: maintain a distribution over training examples, call
//! the weak learner each round, reweight so mistakes gain mass, and combine
//! the weak trees additively into the final confidence-rated hypothesis.

mod io;

pub use io::{load, save, ModelIoError};

use thiserror::Error;

use crate::dataset::{Dataset, Label};
use crate::weaklearn::{grow_tree, SmoothingPolicy, WeakLearnError, WeakTree};
use crate::{FeatureId, Scorer};

/// Rounds whose normalizer exceeds this are no-ops: the weak learner found
/// nothing, the distribution would not move, so training stops.
const NO_PROGRESS_Z: f64 = 1.0 - 1e-12;

#[derive(Debug, Error)]
pub enum BoostError {
    #[error("training requires both classes: dataset has {spam} spam / {legit} legitimate")]
    SingleClass { spam: usize, legit: usize },
    #[error("training requires at least one example")]
    EmptyDataset,
    #[error("rounds must be >= 1")]
    ZeroRounds,
    #[error("non-finite weight encountered in round {round}")]
    NonFiniteWeight { round: usize },
    #[error("distribution weights must be finite, nonnegative and not all zero")]
    InvalidWeights,
    #[error("utility matrix yields zero total example weight")]
    ZeroUtilityMass,
    #[error("model has {trees} trees but {zs} recorded normalizers")]
    MismatchedHistory { trees: usize, zs: usize },
    #[error("weak learner failed in round {round}: {source}")]
    WeakLearner {
        round: usize,
        source: WeakLearnError,
    },
}

/// Normalized weight vector over the training examples.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    weights: Vec<f64>,
}

impl Distribution {
    pub fn uniform(m: usize) -> Result<Distribution, BoostError> {
        if m == 0 {
            return Err(BoostError::EmptyDataset);
        }
        Ok(Distribution {
            weights: vec![1.0 / m as f64; m],
        })
    }

    /// Normalizes arbitrary nonnegative weights into a distribution.
    pub fn from_weights(weights: Vec<f64>) -> Result<Distribution, BoostError> {
        if weights.is_empty() {
            return Err(BoostError::EmptyDataset);
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(BoostError::InvalidWeights);
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(BoostError::InvalidWeights);
        }
        Ok(Distribution {
            weights: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Loss (or utility) attached to each contingency cell. The cost scenarios
/// use zero for correct cells and negative losses for the two mistakes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UtilityMatrix {
    pub lambda_s_plus: f64,
    pub lambda_s_minus: f64,
    pub lambda_l_plus: f64,
    pub lambda_l_minus: f64,
}

impl UtilityMatrix {
    /// The lambda cost scenario: letting spam through costs 1, blocking a
    /// legitimate message costs lambda.
    pub fn cost_scenario(lambda: f64) -> UtilityMatrix {
        UtilityMatrix {
            lambda_s_plus: 0.0,
            lambda_s_minus: -1.0,
            lambda_l_plus: -lambda,
            lambda_l_minus: 0.0,
        }
    }
}

/// Uniform 1/m, or, when a utility matrix is given, per-class weights
/// proportional to the magnitude of each class's misclassification loss
/// (spam examples get |lambda_S-|, legitimate ones |lambda_L+|).
pub fn initial_distribution(
    ds: &Dataset,
    utility: Option<&UtilityMatrix>,
) -> Result<Distribution, BoostError> {
    match utility {
        None => Distribution::uniform(ds.len()),
        Some(u) => {
            let spam_w = u.lambda_s_minus.abs();
            let legit_w = u.lambda_l_plus.abs();
            let weights: Vec<f64> = ds
                .labels()
                .iter()
                .map(|l| if l.is_spam() { spam_w } else { legit_w })
                .collect();
            if weights.iter().sum::<f64>() <= 0.0 {
                return Err(BoostError::ZeroUtilityMass);
            }
            Distribution::from_weights(weights)
        }
    }
}

/// One boosting update: `w_i = D(i) exp(-margin_i)` with `margin_i = y_i
/// h(x_i)`, normalized by the exact Z. Returns the next distribution and Z.
pub fn reweight(d: &Distribution, margins: &[f64]) -> Result<(Distribution, f64), BoostError> {
    assert_eq!(d.len(), margins.len(), "one margin per example");
    let mut weights = Vec::with_capacity(d.len());
    let mut z = 0.0;
    for (i, &margin) in margins.iter().enumerate() {
        let w = d.weight(i) * (-margin).exp();
        if !w.is_finite() {
            return Err(BoostError::NonFiniteWeight { round: 0 });
        }
        z += w;
        weights.push(w);
    }
    if !(z.is_finite() && z > 0.0) {
        return Err(BoostError::NonFiniteWeight { round: 0 });
    }
    for w in &mut weights {
        *w /= z;
    }
    Ok((Distribution { weights }, z))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoostMeta {
    /// Requested weak-rule depth.
    pub depth: usize,
    /// Realized number of rounds (early stopping may truncate).
    pub rounds: usize,
    pub epsilon: f64,
    pub num_features: usize,
    pub vocab_fingerprint: Option<u64>,
}

/// The combined hypothesis: an ordered list of weak trees (every round has
/// weight one) plus the per-round normalizers whose product bounds the
/// training error.
#[derive(Clone, Debug, PartialEq)]
pub struct BoostModel {
    trees: Vec<WeakTree>,
    z_history: Vec<f64>,
    meta: BoostMeta,
}

impl BoostModel {
    pub fn from_parts(
        trees: Vec<WeakTree>,
        z_history: Vec<f64>,
        meta: BoostMeta,
    ) -> Result<BoostModel, BoostError> {
        if trees.len() != z_history.len() || trees.len() != meta.rounds {
            return Err(BoostError::MismatchedHistory {
                trees: trees.len(),
                zs: z_history.len(),
            });
        }
        Ok(BoostModel {
            trees,
            z_history,
            meta,
        })
    }

    pub fn trees(&self) -> &[WeakTree] {
        &self.trees
    }

    pub fn z_history(&self) -> &[f64] {
        &self.z_history
    }

    pub fn meta(&self) -> &BoostMeta {
        &self.meta
    }

    pub fn rounds(&self) -> usize {
        self.trees.len()
    }

    pub fn with_vocab_fingerprint(mut self, fingerprint: u64) -> BoostModel {
        self.meta.vocab_fingerprint = Some(fingerprint);
        self
    }

    /// Combined prediction of the first `t` rounds.
    pub fn score_prefix(&self, row: &[FeatureId], t: usize) -> f64 {
        assert!(t <= self.trees.len(), "prefix {t} exceeds {} rounds", self.trees.len());
        self.trees[..t].iter().map(|tree| tree.predict(row)).sum()
    }

    pub fn score(&self, row: &[FeatureId]) -> f64 {
        self.score_prefix(row, self.trees.len())
    }

    /// Prefix scores at several round counts in one pass over the trees.
    /// `prefixes` must be ascending; entries beyond the realized number of
    /// rounds saturate at the full score.
    pub fn score_at_prefixes(&self, row: &[FeatureId], prefixes: &[usize]) -> Vec<f64> {
        debug_assert!(prefixes.windows(2).all(|w| w[0] < w[1]));
        let mut out = Vec::with_capacity(prefixes.len());
        let mut acc = 0.0;
        let mut next = prefixes.iter().peekable();
        while next.peek() == Some(&&0) {
            next.next();
            out.push(0.0);
        }
        for (t, tree) in self.trees.iter().enumerate() {
            acc += tree.predict(row);
            while next.peek() == Some(&&(t + 1)) {
                next.next();
                out.push(acc);
            }
        }
        // prefixes past the realized length saturate
        out.extend(next.map(|_| acc));
        out
    }

    pub fn classify(&self, row: &[FeatureId], theta: f64) -> Label {
        if self.score(row) > theta {
            Label::Spam
        } else {
            Label::Legit
        }
    }

    /// Product of the per-round normalizers; upper-bounds the training error.
    pub fn training_error_bound(&self) -> f64 {
        self.z_history.iter().product()
    }
}

impl Scorer for BoostModel {
    fn score(&self, row: &[FeatureId]) -> f64 {
        BoostModel::score(self, row)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TrainParams {
    pub rounds: usize,
    pub depth: usize,
    /// Defaults to 1/(2m) when not set.
    pub smoothing: Option<SmoothingPolicy>,
    /// Opt-in: seed the initial distribution from a utility matrix instead
    /// of uniform weights.
    pub utility_init: Option<UtilityMatrix>,
}

impl TrainParams {
    pub fn new(rounds: usize, depth: usize) -> TrainParams {
        TrainParams {
            rounds,
            depth,
            smoothing: None,
            utility_init: None,
        }
    }
}

/// Runs the boosting loop for up to `params.rounds` rounds, stopping early
/// once a round's normalizer shows the weak learner can make no progress.
pub fn train(ds: &Dataset, params: &TrainParams) -> Result<BoostModel, BoostError> {
    if ds.is_empty() {
        return Err(BoostError::EmptyDataset);
    }
    if params.rounds == 0 {
        return Err(BoostError::ZeroRounds);
    }
    let (spam, legit) = ds.class_counts();
    if spam == 0 || legit == 0 {
        return Err(BoostError::SingleClass { spam, legit });
    }

    let smoothing = params
        .smoothing
        .unwrap_or_else(|| SmoothingPolicy::for_sample_count(ds.len()));
    let mut dist = initial_distribution(ds, params.utility_init.as_ref())?;
    let mut trees = Vec::new();
    let mut z_history = Vec::new();

    for round in 1..=params.rounds {
        let tree = grow_tree(ds, &dist, params.depth, smoothing)
            .map_err(|source| BoostError::WeakLearner { round, source })?;
        let margins: Vec<f64> = (0..ds.len())
            .map(|i| ds.label(i).sign() * tree.predict(ds.row(i)))
            .collect();
        let (next, z) = reweight(&dist, &margins)
            .map_err(|_| BoostError::NonFiniteWeight { round })?;
        debug_assert!((next.sum() - 1.0).abs() < 1e-10);
        trees.push(tree);
        z_history.push(z);
        dist = next;
        if z > NO_PROGRESS_Z {
            break;
        }
    }

    let rounds = trees.len();
    BoostModel::from_parts(
        trees,
        z_history,
        BoostMeta {
            depth: params.depth,
            rounds,
            epsilon: smoothing.epsilon(),
            num_features: ds.num_features(),
            vocab_fingerprint: None,
        },
    )
}
