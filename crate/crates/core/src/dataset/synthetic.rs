//! Seeded synthetic dataset generator used by tests, benchmarks and the CLI
//! smoke path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Dataset, Label};
use crate::FeatureId;

/// Generates `m` examples over `num_features` binary features. Every feature
/// is present independently with probability 1/2; the planted rule labels an
/// example spam iff feature 0 is present; each label then flips with
/// probability `noise`. Deterministic for a fixed seed.
pub fn synthesize(m: usize, num_features: usize, noise: f64, seed: u64) -> Dataset {
    assert!(num_features >= 2, "synthesize needs at least 2 features");
    assert!((0.0..=1.0).contains(&noise), "noise must be a probability");

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for _ in 0..m {
        let mut row: Vec<FeatureId> = Vec::new();
        for f in 0..num_features {
            if rng.gen_bool(0.5) {
                row.push(f as FeatureId);
            }
        }
        let planted = if row.first() == Some(&0) {
            Label::Spam
        } else {
            Label::Legit
        };
        let label = if noise > 0.0 && rng.gen_bool(noise) {
            planted.flipped()
        } else {
            planted
        };
        rows.push(row);
        labels.push(label);
    }
    Dataset::new(rows, labels, num_features).expect("generator keeps rows sorted and in range")
}

/// Fraction of examples whose label disagrees with the planted
/// feature-0-presence rule, i.e. the flips the generator emitted.
pub fn hidden_rule_error(ds: &Dataset) -> f64 {
    if ds.is_empty() {
        return 0.0;
    }
    let disagreements = (0..ds.len())
        .filter(|&i| {
            let planted = ds.row(i).first() == Some(&0);
            planted != ds.label(i).is_spam()
        })
        .count();
    disagreements as f64 / ds.len() as f64
}
