//! Repeated iterative stratification for multi-label folds.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::label::Label;
use crate::seeding::{derive_seed_tagged, rng_from};

use super::EvalError;

/// Test-fold assignments for `repeats` independent stratified partitions of
/// one corpus into `folds` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub repeats: usize,
    pub folds: usize,
    pub seed: u64,
    /// `assignments[r][k]` holds the ids of the documents tested in fold `k`
    /// of repeat `r`.
    pub assignments: Vec<Vec<BTreeSet<String>>>,
}

impl FoldPlan {
    pub fn test_ids(&self, repeat: usize, fold: usize) -> &BTreeSet<String> {
        &self.assignments[repeat][fold]
    }

    /// Clones the corpus into (training split, test split) for one run.
    /// Both splits keep corpus document order.
    pub fn split(&self, corpus: &Corpus, repeat: usize, fold: usize) -> (Corpus, Corpus) {
        let test_ids = self.test_ids(repeat, fold);
        let mut train = Vec::new();
        let mut test = Vec::new();
        for doc in corpus.iter() {
            if test_ids.contains(&doc.id) {
                test.push(doc.clone());
            } else {
                train.push(doc.clone());
            }
        }
        let train = Corpus::new(train).expect("train split inherits corpus validity");
        let test = Corpus::new(test).expect("test split inherits corpus validity");
        (train, test)
    }

    /// Checks that every repeat's folds exactly partition the corpus ids.
    pub fn validate(&self, corpus: &Corpus) -> Result<(), EvalError> {
        let all: BTreeSet<&str> = corpus.iter().map(|d| d.id.as_str()).collect();
        if self.assignments.len() != self.repeats {
            return Err(EvalError::BadPlan("repeat count mismatch".to_string()));
        }
        for (r, folds) in self.assignments.iter().enumerate() {
            if folds.len() != self.folds {
                return Err(EvalError::BadPlan(format!("repeat {r} fold count mismatch")));
            }
            let mut seen: BTreeSet<&str> = BTreeSet::new();
            for (k, ids) in folds.iter().enumerate() {
                for id in ids {
                    if !all.contains(id.as_str()) {
                        return Err(EvalError::BadPlan(format!(
                            "repeat {r} fold {k} holds unknown id {id}"
                        )));
                    }
                    if !seen.insert(id) {
                        return Err(EvalError::BadPlan(format!(
                            "repeat {r} assigns {id} to more than one fold"
                        )));
                    }
                }
            }
            if seen.len() != all.len() {
                return Err(EvalError::BadPlan(format!(
                    "repeat {r} covers {} of {} documents",
                    seen.len(),
                    all.len()
                )));
            }
        }
        Ok(())
    }
}

/// Builds a repeated stratified fold plan by iterative stratification.
///
/// Per repeat, labels are processed rarest first (by remaining positive
/// count): each unplaced document carrying the current rarest label goes to
/// the fold with the greatest remaining demand for that label, ties broken
/// by greatest total remaining capacity, then by seeded random draw.
/// Label-free documents then fill folds by greatest remaining capacity.
/// Demands and capacities are tracked as integers scaled by K, so ties are
/// exact. Each repeat derives its own generator from (seed, repeat).
pub fn stratified_kfold(
    corpus: &Corpus,
    k: usize,
    repeats: usize,
    seed: u64,
) -> Result<FoldPlan, EvalError> {
    if k < 2 {
        return Err(EvalError::BadPlan(format!("need at least 2 folds, got {k}")));
    }
    if corpus.len() < k {
        return Err(EvalError::BadPlan(format!(
            "cannot split {} documents into {k} folds",
            corpus.len()
        )));
    }
    if repeats == 0 {
        return Err(EvalError::BadPlan("need at least 1 repeat".to_string()));
    }
    let assignments = (0..repeats)
        .map(|r| stratify_once(corpus, k, derive_seed_tagged(seed, "repeat", &[r as u64])))
        .collect();
    Ok(FoldPlan {
        repeats,
        folds: k,
        seed,
        assignments,
    })
}

fn stratify_once(corpus: &Corpus, k: usize, seed: u64) -> Vec<BTreeSet<String>> {
    let mut rng = rng_from(seed);
    let n = corpus.len();
    let docs = corpus.documents();
    let mut placed = vec![false; n];

    // demand[kk][l] = label l positives minus k times the positives already
    // placed in fold kk; capacity[kk] = n minus k times the fold's size.
    let mut demand = vec![[0i64; Label::COUNT]; k];
    for doc in docs {
        for label in doc.gold.iter() {
            for row in demand.iter_mut() {
                row[label.index()] += 1;
            }
        }
    }
    let mut capacity = vec![n as i64; k];
    let mut folds: Vec<BTreeSet<String>> = vec![BTreeSet::new(); k];

    let place = |di: usize,
                     kk: usize,
                     placed: &mut Vec<bool>,
                     demand: &mut Vec<[i64; Label::COUNT]>,
                     capacity: &mut Vec<i64>,
                     folds: &mut Vec<BTreeSet<String>>| {
        placed[di] = true;
        for label in docs[di].gold.iter() {
            demand[kk][label.index()] -= k as i64;
        }
        capacity[kk] -= k as i64;
        folds[kk].insert(docs[di].id.clone());
    };

    loop {
        // Remaining positive count per label over unplaced documents.
        let mut remaining = [0usize; Label::COUNT];
        for (di, doc) in docs.iter().enumerate() {
            if !placed[di] {
                for label in doc.gold.iter() {
                    remaining[label.index()] += 1;
                }
            }
        }
        let rarest = Label::ALL
            .into_iter()
            .filter(|l| remaining[l.index()] > 0)
            .min_by_key(|l| remaining[l.index()]);
        let Some(rarest) = rarest else { break };

        for di in 0..n {
            if placed[di] || !docs[di].gold.contains(rarest) {
                continue;
            }
            let best = pick_fold(&mut rng, k, |kk| {
                (demand[kk][rarest.index()], capacity[kk])
            });
            place(di, best, &mut placed, &mut demand, &mut capacity, &mut folds);
        }
    }

    for di in 0..n {
        if placed[di] {
            continue;
        }
        let best = pick_fold(&mut rng, k, |kk| (capacity[kk], 0));
        place(di, best, &mut placed, &mut demand, &mut capacity, &mut folds);
    }
    folds
}

/// Fold with the lexicographically greatest key; remaining ties resolved by
/// one uniform draw among the tied folds.
fn pick_fold(
    rng: &mut impl Rng,
    k: usize,
    key: impl Fn(usize) -> (i64, i64),
) -> usize {
    let best = (0..k).map(&key).max().expect("at least one fold");
    let tied: Vec<usize> = (0..k).filter(|&kk| key(kk) == best).collect();
    if tied.len() == 1 {
        tied[0]
    } else {
        tied[rng.gen_range(0..tied.len())]
    }
}
