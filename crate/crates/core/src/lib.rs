//! Confidence-rated AdaBoost over sparse binary text features, with the
//! weak learners, baselines and evaluation harness needed to run
//! cost-sensitive spam-filtering experiments end to end.
//!
//! The crate is organised around the lifecycle of an experiment:
//!
//! - [`dataset`]: corpus ingestion, vocabularies, sparse binary datasets,
//!   fold assignments and a synthetic generator for tests.
//! - [`weaklearn`]: decision stumps and depth-bounded trees with
//!   real-valued leaf predictions, selected by the Z criterion.
//! - [`boost`]: the boosting driver, distribution updates and model
//!   serialization.
//! - [`baselines`]: Bernoulli Naive Bayes and a plain entropy-gain
//!   decision tree for comparison rows.
//! - [`eval`]: contingency tables, precision/recall/F-measures, weighted
//!   accuracy, utility, rejection and precision-recall curves, round and
//!   threshold tuning, and the paired t-test.

pub mod baselines;
pub mod boost;
pub mod dataset;
pub mod eval;
pub mod weaklearn;

pub use baselines::{NBModel, TDTree};
pub use boost::{BoostModel, Distribution, TrainParams, UtilityMatrix};
pub use dataset::{Dataset, Document, FoldAssignment, Label, Vocabulary};
pub use eval::{ContingencyTable, Curve, Metrics, ScoredSet};
pub use weaklearn::{SmoothingPolicy, Stump, WeakTree, WeightQuad};

/// Dense integer identifier of a binary presence feature.
pub type FeatureId = u32;

/// Shared contract between the boosting model and the baselines: every
/// method exposes a real-valued score whose sign is the class and whose
/// magnitude is the confidence, so that the same evaluation harness
/// (curves, threshold tuning, contingency tables) applies to all of them.
pub trait Scorer {
    /// Real-valued confidence score for one example row (sorted feature ids).
    fn score(&self, row: &[FeatureId]) -> f64;

    /// Classify as spam iff the score strictly exceeds `theta`.
    ///
    /// Ties go to the legitimate class: it is the costly one to misclassify.
    fn classify(&self, row: &[FeatureId], theta: f64) -> Label {
        if self.score(row) > theta {
            Label::Spam
        } else {
            Label::Legit
        }
    }
}
