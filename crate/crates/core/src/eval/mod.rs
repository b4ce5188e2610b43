//! Measurement machinery: contingency tables, precision/recall/F-beta,
//! accuracy and weighted accuracy, utility, rejection and precision-recall
//! curves, threshold tuning and the paired t-test.
//!
//! Counting convention: `s_plus`/`s_minus` are spam messages classified as
//! spam/legitimate, `l_plus`/`l_minus` are legitimate messages classified as
//! spam/legitimate. The subscript is always the *predicted* side.

mod protocol;

pub use protocol::{
    cv_test_score_grid, cv_test_scores, cv_test_scores_with, cv_validation_score_grid,
    cv_validation_scores, cv_validation_scores_with, fold_accuracies, pooled_table,
    round_candidates, scored_set, scored_set_for_fold, select_min_t, train_test_models,
    train_validation_models, tune_rounds, validation_fold_for, RoundTuning,
};

use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::boost::UtilityMatrix;
use crate::dataset::Label;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("scored set has no positive examples")]
    NoPositives,
    #[error("paired t-test needs equal-length vectors of at least 2 folds, got {0}")]
    TooFewSamples(usize),
    #[error("round tuning needs at least 2 training folds per trial, so k >= 3; got k = {0}")]
    TooFewFolds(usize),
    #[error("invalid tuning grid: step {step}, t_max {t_max}")]
    InvalidTuningGrid { step: usize, t_max: usize },
    #[error("rejection grid values must lie in [0, 1): got {0}")]
    InvalidGrid(f64),
    #[error("curve x values must be strictly increasing")]
    NonMonotonicCurve,
    #[error(transparent)]
    Boost(#[from] crate::boost::BoostError),
    #[error(transparent)]
    Baseline(#[from] crate::baselines::BaselineError),
}

/// The four outcome counts of a classification run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ContingencyTable {
    pub s_plus: usize,
    pub s_minus: usize,
    pub l_plus: usize,
    pub l_minus: usize,
}

impl ContingencyTable {
    pub fn spam_total(&self) -> usize {
        self.s_plus + self.s_minus
    }

    pub fn legit_total(&self) -> usize {
        self.l_plus + self.l_minus
    }

    pub fn total(&self) -> usize {
        self.spam_total() + self.legit_total()
    }

    pub fn correct(&self) -> usize {
        self.s_plus + self.l_minus
    }

    /// Cell-wise sum, used for pooling folds.
    pub fn merged(self, other: ContingencyTable) -> ContingencyTable {
        ContingencyTable {
            s_plus: self.s_plus + other.s_plus,
            s_minus: self.s_minus + other.s_minus,
            l_plus: self.l_plus + other.l_plus,
            l_minus: self.l_minus + other.l_minus,
        }
    }
}

/// Exact four-cell count of truth against prediction.
pub fn contingency(
    truth: &[Label],
    predicted: &[Label],
) -> Result<ContingencyTable, EvalError> {
    if truth.len() != predicted.len() {
        return Err(EvalError::LengthMismatch(truth.len(), predicted.len()));
    }
    let mut ct = ContingencyTable::default();
    for (&t, &p) in truth.iter().zip(predicted) {
        match (t, p) {
            (Label::Spam, Label::Spam) => ct.s_plus += 1,
            (Label::Spam, Label::Legit) => ct.s_minus += 1,
            (Label::Legit, Label::Spam) => ct.l_plus += 1,
            (Label::Legit, Label::Legit) => ct.l_minus += 1,
        }
    }
    Ok(ct)
}

/// Precision, recall, F-beta and accuracy. Undefined 0/0 ratios are `None`,
/// never silently 0 or 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f_beta: Option<f64>,
    pub beta: f64,
    pub accuracy: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    if den == 0 {
        None
    } else {
        Some(num as f64 / den as f64)
    }
}

/// `(beta^2 + 1) p r / (beta^2 p + r)`; `None` when the denominator vanishes.
pub fn f_beta_from(precision: f64, recall: f64, beta: f64) -> Option<f64> {
    let den = beta * beta * precision + recall;
    if den == 0.0 {
        None
    } else {
        Some((beta * beta + 1.0) * precision * recall / den)
    }
}

pub fn metrics(ct: &ContingencyTable, beta: f64) -> Metrics {
    let precision = ratio(ct.s_plus, ct.s_plus + ct.l_plus);
    let recall = ratio(ct.s_plus, ct.spam_total());
    let f_beta = match (precision, recall) {
        (Some(p), Some(r)) => f_beta_from(p, r, beta),
        _ => None,
    };
    let accuracy = ratio(ct.correct(), ct.total());
    Metrics {
        precision,
        recall,
        f_beta,
        beta,
        accuracy,
    }
}

/// Accuracy where every legitimate message counts `lambda` times:
/// `(lambda L- + S+) / (lambda L + S)`. An empty table is vacuously perfect.
pub fn weighted_accuracy(ct: &ContingencyTable, lambda: f64) -> f64 {
    assert!(lambda >= 1.0, "lambda must be >= 1, got {lambda}");
    let den = lambda * ct.legit_total() as f64 + ct.spam_total() as f64;
    if den == 0.0 {
        return 1.0;
    }
    (lambda * ct.l_minus as f64 + ct.s_plus as f64) / den
}

/// Total utility of the run under the given per-cell loss values.
pub fn utility(ct: &ContingencyTable, u: &UtilityMatrix) -> f64 {
    ct.s_plus as f64 * u.lambda_s_plus
        + ct.s_minus as f64 * u.lambda_s_minus
        + ct.l_plus as f64 * u.lambda_l_plus
        + ct.l_minus as f64 * u.lambda_l_minus
}

/// Per-example (score, label) pairs, the input of every curve and tuner.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScoredSet {
    scores: Vec<f64>,
    labels: Vec<Label>,
}

impl ScoredSet {
    pub fn new(scores: Vec<f64>, labels: Vec<Label>) -> Result<ScoredSet, EvalError> {
        if scores.len() != labels.len() {
            return Err(EvalError::LengthMismatch(scores.len(), labels.len()));
        }
        Ok(ScoredSet { scores, labels })
    }

    pub fn push(&mut self, score: f64, label: Label) {
        self.scores.push(score);
        self.labels.push(label);
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    /// Classify spam iff score strictly exceeds theta.
    pub fn predictions(&self, theta: f64) -> Vec<Label> {
        self.scores
            .iter()
            .map(|&s| if s > theta { Label::Spam } else { Label::Legit })
            .collect()
    }

    pub fn contingency_at(&self, theta: f64) -> ContingencyTable {
        let mut ct = ContingencyTable::default();
        for (&score, &label) in self.scores.iter().zip(&self.labels) {
            let spam_predicted = score > theta;
            match (label, spam_predicted) {
                (Label::Spam, true) => ct.s_plus += 1,
                (Label::Spam, false) => ct.s_minus += 1,
                (Label::Legit, true) => ct.l_plus += 1,
                (Label::Legit, false) => ct.l_minus += 1,
            }
        }
        ct
    }

    pub fn accuracy_at(&self, theta: f64) -> f64 {
        if self.is_empty() {
            return 1.0;
        }
        let ct = self.contingency_at(theta);
        ct.correct() as f64 / ct.total() as f64
    }
}

/// Ordered series of points backing one plot; x is strictly increasing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub x: f64,
    pub y: f64,
    /// The threshold or rejection fraction that produced the point.
    pub meta: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Curve {
    points: Vec<CurvePoint>,
}

impl Curve {
    pub fn new(points: Vec<CurvePoint>) -> Result<Curve, EvalError> {
        if !points.windows(2).all(|w| w[0].x < w[1].x) {
            return Err(EvalError::NonMonotonicCurve);
        }
        Ok(Curve { points })
    }

    pub fn points(&self) -> &[CurvePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Accuracy of the retained predictions after rejecting, for each grid
/// fraction p, the floor(p n) examples with the smallest |score| (ties by
/// example index). Retained predictions are judged at theta = 0.
pub fn rejection_curve(set: &ScoredSet, grid: &[f64]) -> Result<Curve, EvalError> {
    for &p in grid {
        if !(0.0..1.0).contains(&p) {
            return Err(EvalError::InvalidGrid(p));
        }
    }
    let mut fractions: Vec<f64> = grid.to_vec();
    fractions.sort_by(f64::total_cmp);
    fractions.dedup();

    let n = set.len();
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps the index order for equal confidences
    order.sort_by(|&a, &b| set.scores[a].abs().total_cmp(&set.scores[b].abs()));

    // suffix counts of correct predictions in confidence order
    let mut correct_from = vec![0usize; n + 1];
    for k in (0..n).rev() {
        let i = order[k];
        let right = (set.scores[i] > 0.0) == set.labels[i].is_spam();
        correct_from[k] = correct_from[k + 1] + usize::from(right);
    }

    let points = fractions
        .into_iter()
        .map(|p| {
            let dropped = (p * n as f64).floor() as usize;
            let kept = n - dropped;
            let accuracy = if kept == 0 {
                1.0
            } else {
                correct_from[dropped] as f64 / kept as f64
            };
            CurvePoint {
                x: p,
                y: accuracy,
                meta: p,
            }
        })
        .collect();
    Curve::new(points)
}

/// One threshold of the score sweep: recall always exists once the set has a
/// positive example; precision is absent when nothing is predicted spam.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OperatingPoint {
    pub threshold: f64,
    pub recall: f64,
    pub precision: Option<f64>,
}

fn distinct_sorted_scores(set: &ScoredSet) -> Vec<f64> {
    let mut scores = set.scores.to_vec();
    scores.sort_by(f64::total_cmp);
    scores.dedup();
    scores
}

fn midpoints(sorted: &[f64]) -> Vec<f64> {
    sorted
        .windows(2)
        .map(|w| 0.5 * (w[0] + w[1]))
        .collect()
}

/// Sweeps theta over every distinct score midpoint plus both infinities.
pub fn pr_operating_points(set: &ScoredSet) -> Result<Vec<OperatingPoint>, EvalError> {
    let positives = set.labels.iter().filter(|l| l.is_spam()).count();
    if positives == 0 {
        return Err(EvalError::NoPositives);
    }

    // descending by score; prefix j of this order is the predicted-spam set
    let mut order: Vec<usize> = (0..set.len()).collect();
    order.sort_by(|&a, &b| set.scores[b].total_cmp(&set.scores[a]));
    let mut spam_in_prefix = vec![0usize; set.len() + 1];
    for (k, &i) in order.iter().enumerate() {
        spam_in_prefix[k + 1] = spam_in_prefix[k] + usize::from(set.labels[i].is_spam());
    }
    let descending: Vec<f64> = order.iter().map(|&i| set.scores[i]).collect();

    let sorted = distinct_sorted_scores(set);
    let mut thresholds = vec![f64::NEG_INFINITY];
    thresholds.extend(midpoints(&sorted));
    thresholds.push(f64::INFINITY);

    let points = thresholds
        .into_iter()
        .map(|theta| {
            // number of scores strictly above theta
            let j = descending.partition_point(|&s| s > theta);
            let tp = spam_in_prefix[j];
            OperatingPoint {
                threshold: theta,
                recall: tp as f64 / positives as f64,
                precision: ratio(tp, j),
            }
        })
        .collect();
    Ok(points)
}

/// Precision-recall curve: operating points with defined precision, rolled
/// up to one point per distinct recall (keeping the best precision, at the
/// most conservative threshold) and ordered by increasing recall.
pub fn pr_curve(set: &ScoredSet) -> Result<Curve, EvalError> {
    let ops = pr_operating_points(set)?;
    let mut best: Vec<CurvePoint> = Vec::new();
    for op in ops {
        let Some(precision) = op.precision else { continue };
        match best.iter_mut().find(|p| p.x == op.recall) {
            Some(p) => {
                if precision > p.y || (precision == p.y && op.threshold > p.meta) {
                    p.y = precision;
                    p.meta = op.threshold;
                }
            }
            None => best.push(CurvePoint {
                x: op.recall,
                y: precision,
                meta: op.threshold,
            }),
        }
    }
    best.sort_by(|a, b| a.x.total_cmp(&b.x));
    Curve::new(best)
}

/// For each precision target, the best recall among curve points reaching
/// at least that precision; 0 when nothing qualifies.
pub fn recall_at_precision(curve: &Curve, targets: &[f64]) -> Vec<f64> {
    targets
        .iter()
        .map(|&target| {
            curve
                .points()
                .iter()
                .filter(|p| p.y >= target)
                .map(|p| p.x)
                .fold(0.0, f64::max)
        })
        .collect()
}

fn theta_candidates(set: &ScoredSet) -> Vec<f64> {
    let sorted = distinct_sorted_scores(set);
    if sorted.is_empty() {
        return Vec::new();
    }
    let mut candidates = vec![sorted[0] - 1.0];
    candidates.extend(midpoints(&sorted));
    candidates.push(sorted[sorted.len() - 1] + 1.0);
    candidates
}

/// Threshold maximizing weighted accuracy on the given (validation) scores.
/// Candidates are the midpoints between consecutive distinct scores plus a
/// below-min and an above-max value; ties resolve to the smallest theta,
/// i.e. the most recall. An empty set falls back to theta = 0.
pub fn tune_theta(set: &ScoredSet, lambda: f64) -> f64 {
    let mut best: Option<(f64, f64)> = None;
    for theta in theta_candidates(set) {
        let wacc = weighted_accuracy(&set.contingency_at(theta), lambda);
        if best.is_none_or(|(bw, _)| wacc > bw) {
            best = Some((wacc, theta));
        }
    }
    best.map_or(0.0, |(_, theta)| theta)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairedTTest {
    /// Absent when the differences have zero variance.
    pub t: Option<f64>,
    pub significant_at_0_05: bool,
}

/// Standard paired t-test with n-1 degrees of freedom, two-tailed at 0.05.
/// Zero variance of the differences reports no statistic; significance then
/// reduces to whether the (constant) difference is nonzero.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedTTest, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(EvalError::TooFewSamples(n));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if sd == 0.0 {
        return Ok(PairedTTest {
            t: None,
            significant_at_0_05: mean != 0.0,
        });
    }
    let t = mean * (n as f64).sqrt() / sd;
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("valid dof");
    let critical = dist.inverse_cdf(0.975);
    Ok(PairedTTest {
        t: Some(t),
        significant_at_0_05: t.abs() > critical,
    })
}
