use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::operator::LpOperator;
use super::vector::LpVector;
use crate::error::{Error, Result};
use crate::exponent::Exponent;
use crate::measure::{pairing, unpairing, MeasureSpace};

/// Proper isometry of ℓp(ℕ) given by a path `[k_1, ..., k_r]`:
/// `e_j ↦ e_{pairing(k_1, pairing(k_2, ... pairing(k_r, j)))}`.
///
/// A path of length one is the basic isometry `I_k`; longer paths are
/// compositions `I_{k_1} ∘ ... ∘ I_{k_r}`, which stay proper and keep
/// disjointness readable from the paths.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProperIsometry {
    path: Vec<u64>,
}

impl ProperIsometry {
    pub fn new(k: u64) -> Self {
        ProperIsometry { path: vec![k] }
    }

    /// The identity, as the empty path.
    pub fn identity() -> Self {
        ProperIsometry { path: vec![] }
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }

    /// `self ∘ inner`.
    pub fn then_inner(&self, inner: &ProperIsometry) -> ProperIsometry {
        let mut path = self.path.clone();
        path.extend_from_slice(&inner.path);
        ProperIsometry { path }
    }

    pub fn map_index(&self, j: u64) -> u64 {
        self.path.iter().rev().fold(j, |acc, &k| pairing(k, acc))
    }

    /// Preimage of an atom, or `None` when the atom lies outside the image.
    pub fn preimage(&self, z: u64) -> Option<u64> {
        let mut cur = z;
        for &k in &self.path {
            let (head, tail) = unpairing(cur);
            if head != k {
                return None;
            }
            cur = tail;
        }
        Some(cur)
    }

    pub fn apply_sparse(&self, x: &BTreeMap<u64, f64>) -> BTreeMap<u64, f64> {
        x.iter().map(|(&j, &v)| (self.map_index(j), v)).collect()
    }

    /// The coisometry `I^⋆`: restriction to the image followed by the inverse.
    pub fn star_sparse(&self, x: &BTreeMap<u64, f64>) -> BTreeMap<u64, f64> {
        x.iter().filter_map(|(&z, &v)| self.preimage(z).map(|j| (j, v))).collect()
    }

    pub fn apply(&self, x: &LpVector) -> LpVector {
        LpVector::counting(x.p(), self.apply_sparse(x.entries()))
    }

    pub fn star(&self, x: &LpVector) -> LpVector {
        LpVector::counting(x.p(), self.star_sparse(x.entries()))
    }

    /// Matrix of the isometry restricted to a domain window.
    pub fn operator(&self, p: Exponent, window: &[u64]) -> LpOperator {
        LpOperator::from_triplets(p, window.iter().map(|&j| (self.map_index(j), j, 1.0)))
    }

    /// Matrix of `I^⋆` on the image of a window.
    pub fn star_operator(&self, p: Exponent, window: &[u64]) -> LpOperator {
        LpOperator::from_triplets(p, window.iter().map(|&j| (j, self.map_index(j), 1.0)))
    }

    /// Images intersect only in zero exactly when neither path extends the other.
    pub fn is_disjoint(&self, other: &ProperIsometry) -> bool {
        self.path.iter().zip(&other.path).any(|(a, b)| a != b)
    }
}

/// `I_0, ..., I_{count-1}` on a convenient base space.
pub fn disjoint_isometries(base: &MeasureSpace, count: usize) -> Result<Vec<ProperIsometry>> {
    if !base.is_counting() {
        return Err(Error::Unsupported(
            "disjoint proper isometries need infinitely many atoms; finite atom sets are not convenient".into(),
        ));
    }
    Ok((0..count as u64).map(ProperIsometry::new).collect())
}

/// Coordinate projection `f ↦ f·χ_mask`.
pub fn proper_projection(p: Exponent, mask: &[u64]) -> LpOperator {
    let set: BTreeSet<u64> = mask.iter().copied().collect();
    let window: Vec<u64> = set.into_iter().collect();
    LpOperator::identity(p, window)
}

/// Reads the mask of a coordinate projection.
pub fn projection_mask(op: &LpOperator) -> Result<BTreeSet<u64>> {
    let mut mask = BTreeSet::new();
    for (i, j, v) in op.triplets() {
        if i != j || v != 1.0 {
            return Err(Error::precondition("operator is not a proper projection"));
        }
        mask.insert(i);
    }
    Ok(mask)
}

/// `Σ Q_k S_k P_k` for projections with pairwise disjoint masks on each side.
pub fn block_assemble(blocks: &[(LpOperator, LpOperator, LpOperator)]) -> Result<LpOperator> {
    let Some(first) = blocks.first() else {
        return Err(Error::precondition("no blocks to assemble"));
    };
    let p = first.1.p();
    let mut seen_q = BTreeSet::new();
    let mut seen_p = BTreeSet::new();
    let mut total = LpOperator::zero(p);
    for (q, s, pr) in blocks {
        for (mask, seen, side) in
            [(projection_mask(q)?, &mut seen_q, "codomain"), (projection_mask(pr)?, &mut seen_p, "domain")]
        {
            if mask.iter().any(|i| seen.contains(i)) {
                return Err(Error::precondition(format!("{side} projections overlap")));
            }
            seen.extend(mask);
        }
        total = total.add(&q.compose(&s.compose(pr)?)?)?;
    }
    Ok(total)
}
