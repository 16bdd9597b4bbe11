//! Pool bookkeeping for the acquire→label→retrain loop.
//!
//! `PoolState` tracks which training indices hold oracle labels, which are
//! still unlabeled, which unlabeled points currently carry pseudo-labels,
//! and how much of the oracle budget has been spent.

use crate::error::{AlError, Result};
use crate::rng;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

/// Labeled/unlabeled partition of the training pool plus budget accounting.
///
/// Index sets are kept sorted so iteration order (and therefore every
/// downstream computation) is deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolState {
    /// Sorted indices with oracle labels.
    pub labeled: Vec<usize>,
    /// Sorted indices without oracle labels.
    pub unlabeled: Vec<usize>,
    /// Pseudo-labels assigned to unlabeled points (rebuilt each round).
    pub pseudo: BTreeMap<usize, usize>,
    /// Oracle labels consumed so far.
    pub spent: usize,
    /// Total oracle budget Q.
    pub budget_total: usize,
}

/// An ordered selection of unlabeled indices, at most `b` of them.
#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionBatch {
    pub indices: Vec<usize>,
    pub scores: Option<Vec<f64>>,
}

impl AcquisitionBatch {
    pub fn new(indices: Vec<usize>) -> Self {
        AcquisitionBatch {
            indices,
            scores: None,
        }
    }

    pub fn with_scores(indices: Vec<usize>, scores: Vec<f64>) -> Self {
        AcquisitionBatch {
            indices,
            scores: Some(scores),
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Draw the initial labeled set: `m_init` of `n_train` indices uniformly
/// without replacement. The budget defaults to everything still unlabeled;
/// the experiment loop overwrites it with the configured Q.
pub fn init_pool(n_train: usize, m_init: usize, seed: u64) -> Result<PoolState> {
    if m_init == 0 || m_init > n_train {
        return Err(AlError::Config(format!(
            "m_init must be in 1..={n_train}, got {m_init}"
        )));
    }
    let mut r = rng::rng_from_seed(seed);
    let mut labeled = rng::sample_without_replacement(n_train, m_init, &mut r);
    labeled.sort_unstable();
    let mut is_labeled = alloc::vec![false; n_train];
    for &i in &labeled {
        is_labeled[i] = true;
    }
    let unlabeled: Vec<usize> = (0..n_train).filter(|&i| !is_labeled[i]).collect();
    Ok(PoolState {
        labeled,
        unlabeled,
        pseudo: BTreeMap::new(),
        spent: 0,
        budget_total: n_train - m_init,
    })
}

impl PoolState {
    /// Move a batch from unlabeled to labeled, spending budget. Pseudo
    /// entries for the moved indices are dropped: the oracle label wins.
    pub fn apply_selection(&self, batch: &AcquisitionBatch) -> Result<PoolState> {
        if self.spent + batch.len() > self.budget_total {
            return Err(AlError::State(format!(
                "budget exceeded: spent {} + batch {} > total {}",
                self.spent,
                batch.len(),
                self.budget_total
            )));
        }
        let mut next = self.clone();
        for &i in &batch.indices {
            let pos = next
                .unlabeled
                .binary_search(&i)
                .map_err(|_| AlError::State(format!("index {i} is not unlabeled")))?;
            next.unlabeled.remove(pos);
            let ins = next.labeled.binary_search(&i).unwrap_err();
            next.labeled.insert(ins, i);
            next.pseudo.remove(&i);
        }
        next.spent += batch.len();
        Ok(next)
    }

    /// Remaining oracle budget.
    pub fn remaining(&self) -> usize {
        self.budget_total - self.spent
    }
}
