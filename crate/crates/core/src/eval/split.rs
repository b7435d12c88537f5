//! Deduplicated, seeded 8:1:1 split.
//!
//! Sizes for `n` unique questions: train `floor(8n/10)`, eval `floor(n/10)`,
//! test the remainder.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::Query;

use super::EvalError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<Query>,
    pub eval: Vec<Query>,
    pub test: Vec<Query>,
    /// Queries dropped because an earlier one had the same text.
    pub duplicates_removed: usize,
}

pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let train = n * 8 / 10;
    let eval = n / 10;
    (train, eval, n - train - eval)
}

pub fn split_dataset(queries: &[Query], seed: u64) -> Result<Split, EvalError> {
    let mut seen = HashSet::new();
    let mut unique: Vec<Query> = queries.iter().filter(|q| seen.insert(q.text.as_str())).cloned().collect();
    let duplicates_removed = queries.len() - unique.len();
    if unique.len() < 10 {
        return Err(EvalError::TooFewForSplit(unique.len()));
    }
    unique.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, eval, _) = split_sizes(unique.len());
    let test = unique.split_off(train + eval);
    let eval = unique.split_off(train);
    Ok(Split {
        train: unique,
        eval,
        test,
        duplicates_removed,
    })
}
