//! Corpus ingestion and sparse binary dataset handling.
//!
//! Messages are bags of words: a document is vectorized into the sorted set
//! of vocabulary ids of the tokens it contains at least once. Counts are
//! discarded on purpose; every downstream predicate is word presence.

mod pu1;
mod synthetic;

pub use pu1::load_pu1;
pub use synthetic::{hidden_rule_error, synthesize};

use std::collections::HashMap;
use std::io::{self, BufRead, Write};
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::FeatureId;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("corpus error: {0}")]
    Corpus(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: io::Error,
    },
    #[error("{label:?} class has {count} examples, fewer than the {k} requested folds")]
    ClassSmallerThanFolds {
        label: Label,
        count: usize,
        k: usize,
    },
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("invalid fold assignment: {0}")]
    InvalidFolds(String),
    #[error("malformed sparse line {line}: {msg}")]
    MalformedSparse { line: usize, msg: String },
}

/// Binary class label. Spam maps to +1, legitimate to -1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Spam,
    Legit,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Spam => 1.0,
            Label::Legit => -1.0,
        }
    }

    pub fn is_spam(self) -> bool {
        self == Label::Spam
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Spam => Label::Legit,
            Label::Legit => Label::Spam,
        }
    }
}

/// One tokenized message.
#[derive(Clone, Debug)]
pub struct Document {
    pub tokens: Vec<String>,
    pub label: Label,
    /// 1-based fold index when the corpus ships pre-partitioned.
    pub origin_fold: Option<usize>,
    pub source_id: String,
}

/// Bijection between token strings and dense feature ids.
///
/// Ids are assigned in lexicographic token order so the mapping does not
/// depend on directory traversal order.
#[derive(Clone, Debug, Default)]
pub struct Vocabulary {
    token_to_id: HashMap<String, FeatureId>,
    tokens: Vec<String>,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<FeatureId> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: FeatureId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// FNV-1a over the tokens in id order. Stable across platforms, used to
    /// tie saved models to the vocabulary they were trained against.
    pub fn fingerprint(&self) -> u64 {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for token in &self.tokens {
            for &byte in token.as_bytes() {
                hash ^= u64::from(byte);
                hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
            }
            hash ^= u64::from(b'\n');
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
        hash
    }
}

/// Assigns one id per distinct token across all documents.
pub fn build_vocabulary(docs: &[Document]) -> Vocabulary {
    let mut distinct: Vec<&str> = docs
        .iter()
        .flat_map(|d| d.tokens.iter().map(String::as_str))
        .collect();
    distinct.sort_unstable();
    distinct.dedup();

    let tokens: Vec<String> = distinct.into_iter().map(str::to_owned).collect();
    let token_to_id = tokens
        .iter()
        .enumerate()
        .map(|(id, t)| (t.clone(), id as FeatureId))
        .collect();
    Vocabulary { token_to_id, tokens }
}

/// Sparse binary dataset: per-example sorted sets of present feature ids.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    num_features: usize,
    rows: Vec<Vec<FeatureId>>,
    labels: Vec<Label>,
}

impl Dataset {
    /// Validates the construction invariants: one label per row, ids strictly
    /// increasing within a row, every id below `num_features`.
    pub fn new(
        rows: Vec<Vec<FeatureId>>,
        labels: Vec<Label>,
        num_features: usize,
    ) -> Result<Self, DatasetError> {
        if rows.len() != labels.len() {
            return Err(DatasetError::Invalid(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            if !row.windows(2).all(|w| w[0] < w[1]) {
                return Err(DatasetError::Invalid(format!(
                    "row {i} is not strictly increasing"
                )));
            }
            if let Some(&last) = row.last() {
                if last as usize >= num_features {
                    return Err(DatasetError::Invalid(format!(
                        "row {i} contains feature {last} >= {num_features}"
                    )));
                }
            }
        }
        Ok(Dataset {
            num_features,
            rows,
            labels,
        })
    }

    /// Number of examples.
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn row(&self, i: usize) -> &[FeatureId] {
        &self.rows[i]
    }

    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn has_feature(&self, i: usize, feature: FeatureId) -> bool {
        self.rows[i].binary_search(&feature).is_ok()
    }

    /// (spam, legitimate) example counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let spam = self.labels.iter().filter(|l| l.is_spam()).count();
        (spam, self.labels.len() - spam)
    }

    /// Restriction to the given example indices; feature space unchanged.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            num_features: self.num_features,
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Writes the sparse exchange format: one line per example,
    /// `<label> <id> <id> ...` with the label as `+1`/`-1` and ids ascending.
    pub fn write_sparse<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (row, label) in self.rows.iter().zip(&self.labels) {
            let tag = if label.is_spam() { "+1" } else { "-1" };
            write!(w, "{tag}")?;
            for id in row {
                write!(w, " {id}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Reads the sparse exchange format. The feature count is inferred as
    /// one past the largest id seen.
    pub fn read_sparse<R: BufRead>(r: R) -> Result<Dataset, DatasetError> {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut max_id: Option<FeatureId> = None;
        for (lineno, line) in r.lines().enumerate() {
            let line = line.map_err(|e| DatasetError::MalformedSparse {
                line: lineno + 1,
                msg: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let label = match fields.next() {
                Some("+1") | Some("1") => Label::Spam,
                Some("-1") => Label::Legit,
                other => {
                    return Err(DatasetError::MalformedSparse {
                        line: lineno + 1,
                        msg: format!("bad label {other:?}"),
                    })
                }
            };
            let mut row = Vec::new();
            for field in fields {
                let id: FeatureId = field.parse().map_err(|_| DatasetError::MalformedSparse {
                    line: lineno + 1,
                    msg: format!("bad feature id {field:?}"),
                })?;
                if row.last().is_some_and(|&p| p >= id) {
                    return Err(DatasetError::MalformedSparse {
                        line: lineno + 1,
                        msg: "ids not strictly increasing".into(),
                    });
                }
                max_id = Some(max_id.map_or(id, |m: FeatureId| m.max(id)));
                row.push(id);
            }
            rows.push(row);
            labels.push(label);
        }
        let num_features = max_id.map_or(0, |m| m as usize + 1);
        Dataset::new(rows, labels, num_features)
    }
}

/// Binary presence vectorization: feature j is set for document i iff token j
/// occurs at least once in it. Tokens outside the vocabulary are dropped.
pub fn vectorize(docs: &[Document], vocab: &Vocabulary) -> Dataset {
    let rows = docs
        .iter()
        .map(|doc| {
            let mut ids: Vec<FeatureId> =
                doc.tokens.iter().filter_map(|t| vocab.id(t)).collect();
            ids.sort_unstable();
            ids.dedup();
            ids
        })
        .collect();
    let labels = docs.iter().map(|d| d.label).collect();
    Dataset {
        num_features: vocab.len(),
        rows,
        labels,
    }
}

/// Cross-validation fold assignment; fold indices are 1-based.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldAssignment {
    k: usize,
    fold_of: Vec<u32>,
}

impl FoldAssignment {
    pub fn new(k: usize, fold_of: Vec<u32>) -> Result<Self, DatasetError> {
        if k < 2 {
            return Err(DatasetError::InvalidFolds(format!("k must be >= 2, got {k}")));
        }
        let mut seen = vec![false; k];
        for (i, &f) in fold_of.iter().enumerate() {
            if f == 0 || f as usize > k {
                return Err(DatasetError::InvalidFolds(format!(
                    "example {i} assigned fold {f}, outside 1..={k}"
                )));
            }
            seen[f as usize - 1] = true;
        }
        if let Some(empty) = seen.iter().position(|&s| !s) {
            return Err(DatasetError::InvalidFolds(format!(
                "fold {} is empty",
                empty + 1
            )));
        }
        Ok(FoldAssignment { k, fold_of })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.fold_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fold_of.is_empty()
    }

    pub fn fold_of(&self, i: usize) -> usize {
        self.fold_of[i] as usize
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of(i) == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of(i) != fold)
            .collect()
    }

    /// Examples belonging to none of the given folds.
    pub fn indices_excluding(&self, folds: &[usize]) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| !folds.contains(&self.fold_of(i)))
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k];
        for &f in &self.fold_of {
            sizes[f as usize - 1] += 1;
        }
        sizes
    }
}

/// Stratified k-fold assignment: each class is shuffled with the seeded RNG,
/// then dealt round-robin, so per-fold class counts stay within one of the
/// global proportions. Deterministic for a fixed seed.
pub fn stratified_folds(ds: &Dataset, k: usize, seed: u64) -> Result<FoldAssignment, DatasetError> {
    if k < 2 {
        return Err(DatasetError::InvalidFolds(format!("k must be >= 2, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0u32; ds.len()];
    for class in [Label::Spam, Label::Legit] {
        let mut members: Vec<usize> = (0..ds.len()).filter(|&i| ds.label(i) == class).collect();
        if members.len() < k {
            return Err(DatasetError::ClassSmallerThanFolds {
                label: class,
                count: members.len(),
                k,
            });
        }
        members.shuffle(&mut rng);
        for (j, &i) in members.iter().enumerate() {
            fold_of[i] = (j % k) as u32 + 1;
        }
    }
    FoldAssignment::new(k, fold_of)
}

/// Fold assignment taken from the corpus's own partition (`origin_fold`).
pub fn native_folds(docs: &[Document]) -> Result<FoldAssignment, DatasetError> {
    let mut fold_of = Vec::with_capacity(docs.len());
    let mut k = 0usize;
    for doc in docs {
        let f = doc.origin_fold.ok_or_else(|| {
            DatasetError::InvalidFolds(format!("document {} has no origin fold", doc.source_id))
        })?;
        if f == 0 {
            return Err(DatasetError::InvalidFolds(format!(
                "document {} has fold 0; folds are 1-based",
                doc.source_id
            )));
        }
        k = k.max(f);
        fold_of.push(f as u32);
    }
    FoldAssignment::new(k, fold_of)
}
