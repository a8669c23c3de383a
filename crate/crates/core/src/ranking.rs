//! Ranked candidate lists and candidate-order permutations.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Where a ranked list came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    InitialRetrieval,
    Reranked,
}

/// An ordered list of scored documents for one query.
///
/// Initial-retrieval lists are sorted by score descending with ties broken
/// by doc_id ascending; reranked lists carry the order the reranker chose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList<R> {
    pub query_id: String,
    /// (doc_id, score) in rank order.
    pub entries: Vec<(String, R)>,
    pub provenance: Provenance,
}

impl<R: Real> RankedList<R> {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(id, _)| id.as_str())
    }

    /// First `k` entries as a new list, same provenance.
    pub fn truncated(&self, k: usize) -> RankedList<R> {
        RankedList {
            query_id: self.query_id.clone(),
            entries: self.entries.iter().take(k).cloned().collect(),
            provenance: self.provenance,
        }
    }

    /// Apply a candidate permutation, marking the result as reranked.
    ///
    /// `perm.order[i]` names the input entry placed at output rank `i`.
    pub fn permuted(&self, perm: &Permutation) -> RankedList<R> {
        debug_assert_eq!(perm.order.len(), self.entries.len());
        RankedList {
            query_id: self.query_id.clone(),
            entries: perm.order.iter().map(|&i| self.entries[i].clone()).collect(),
            provenance: Provenance::Reranked,
        }
    }
}

/// A reordering of `{0, .., k-1}` produced by the re-ranking stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Permutation {
    /// Output rank -> input candidate index.
    pub order: Vec<usize>,
    /// True when parser repair or a failure fallback was applied.
    pub repaired: bool,
}

impl Permutation {
    pub fn identity(k: usize) -> Self {
        Self {
            order: (0..k).collect(),
            repaired: false,
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Check the permutation invariant: a bijection on `{0, .., k-1}`.
    pub fn is_valid(&self) -> bool {
        let k = self.order.len();
        let mut seen = vec![false; k];
        for &i in &self.order {
            if i >= k || seen[i] {
                return false;
            }
            seen[i] = true;
        }
        true
    }

    /// Compose with an inner permutation applied first.
    pub fn compose(&self, inner: &Permutation) -> Permutation {
        debug_assert_eq!(self.order.len(), inner.order.len());
        Permutation {
            order: self.order.iter().map(|&i| inner.order[i]).collect(),
            repaired: self.repaired || inner.repaired,
        }
    }
}
