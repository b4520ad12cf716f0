//! Atomic measure spaces and the Cantor pairing that identifies ℕ×ℕ with ℕ.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Opaque atom label.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AtomId {
    Nat(u64),
    Name(String),
    Pair(Box<AtomId>, Box<AtomId>),
}

impl fmt::Display for AtomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AtomId::Nat(n) => write!(f, "{n}"),
            AtomId::Name(s) => write!(f, "{s}"),
            AtomId::Pair(a, b) => write!(f, "({a},{b})"),
        }
    }
}

impl From<&str> for AtomId {
    fn from(s: &str) -> Self {
        AtomId::Name(s.to_string())
    }
}

impl From<u64> for AtomId {
    fn from(n: u64) -> Self {
        AtomId::Nat(n)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub id: AtomId,
    #[serde(rename = "w")]
    pub weight: f64,
}

impl Atom {
    pub fn new(id: impl Into<AtomId>, weight: f64) -> Self {
        Atom { id: id.into(), weight }
    }
}

/// An atomic measure space: finitely many weighted atoms, or counting measure on ℕ.
///
/// Atoms of a finite space are addressed by their position; atoms of the
/// counting space by the natural number itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MeasureSpace {
    Finite { atoms: Vec<Atom> },
    Counting,
}

impl MeasureSpace {
    pub fn finite(atoms: Vec<Atom>) -> Result<Self> {
        let space = MeasureSpace::Finite { atoms };
        space.validate()?;
        Ok(space)
    }

    /// Finite space with atoms `0..weights.len()` carrying the given weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        Self::finite(weights.iter().enumerate().map(|(i, &w)| Atom::new(i as u64, w)).collect())
    }

    pub fn counting() -> Self {
        MeasureSpace::Counting
    }

    pub fn validate(&self) -> Result<()> {
        if let MeasureSpace::Finite { atoms } = self {
            let mut seen = HashSet::new();
            for a in atoms {
                if !(a.weight > 0.0 && a.weight.is_finite()) {
                    return Err(Error::invalid(format!("atom {} has non-positive weight {}", a.id, a.weight)));
                }
                if !seen.insert(&a.id) {
                    return Err(Error::invalid(format!("duplicate atom id {}", a.id)));
                }
            }
        }
        Ok(())
    }

    pub fn is_counting(&self) -> bool {
        matches!(self, MeasureSpace::Counting)
    }

    /// Number of atoms, `None` for the counting space.
    pub fn len(&self) -> Option<usize> {
        match self {
            MeasureSpace::Finite { atoms } => Some(atoms.len()),
            MeasureSpace::Counting => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }

    /// Weight of the atom with the given index, `None` if it does not exist.
    pub fn weight(&self, index: u64) -> Option<f64> {
        match self {
            MeasureSpace::Finite { atoms } => atoms.get(index as usize).map(|a| a.weight),
            MeasureSpace::Counting => Some(1.0),
        }
    }

    pub fn contains(&self, index: u64) -> bool {
        self.weight(index).is_some()
    }

    pub fn atom_id(&self, index: u64) -> Option<AtomId> {
        match self {
            MeasureSpace::Finite { atoms } => atoms.get(index as usize).map(|a| a.id.clone()),
            MeasureSpace::Counting => Some(AtomId::Nat(index)),
        }
    }

    pub fn weights(&self) -> Option<Vec<f64>> {
        match self {
            MeasureSpace::Finite { atoms } => Some(atoms.iter().map(|a| a.weight).collect()),
            MeasureSpace::Counting => None,
        }
    }

    /// Total measure of a set of atoms.
    pub fn measure_of(&self, indices: &[u64]) -> Result<f64> {
        indices
            .iter()
            .map(|&i| self.weight(i).ok_or_else(|| Error::invalid(format!("atom index {i} not in space"))))
            .sum()
    }
}

/// Cartesian product of two measure spaces.
///
/// Finite × finite lists pairs in row-major order; counting × counting is again
/// the counting space, atoms relabeled through [`pairing`].
pub fn product_space(x: &MeasureSpace, y: &MeasureSpace) -> Result<MeasureSpace> {
    match (x, y) {
        (MeasureSpace::Finite { atoms: xa }, MeasureSpace::Finite { atoms: ya }) => {
            let atoms = xa
                .iter()
                .flat_map(|a| {
                    ya.iter().map(move |b| Atom {
                        id: AtomId::Pair(Box::new(a.id.clone()), Box::new(b.id.clone())),
                        weight: a.weight * b.weight,
                    })
                })
                .collect();
            Ok(MeasureSpace::Finite { atoms })
        }
        (MeasureSpace::Counting, MeasureSpace::Counting) => Ok(MeasureSpace::Counting),
        _ => Err(Error::Unsupported("product of a finite space with the counting space".into())),
    }
}

/// Index of the atom `(i, j)` inside [`product_space`]`(x, y)`.
pub fn product_index(x: &MeasureSpace, y: &MeasureSpace, i: u64, j: u64) -> Result<u64> {
    match (x, y) {
        (MeasureSpace::Finite { .. }, MeasureSpace::Finite { atoms: ya }) => Ok(i * ya.len() as u64 + j),
        (MeasureSpace::Counting, MeasureSpace::Counting) => Ok(pairing(i, j)),
        _ => Err(Error::Unsupported("product of a finite space with the counting space".into())),
    }
}

/// Cantor pairing `(m+n)(m+n+1)/2 + n`, a bijection ℕ×ℕ → ℕ.
pub fn pairing(m: u64, n: u64) -> u64 {
    let s = m.checked_add(n).expect("pairing overflow");
    let tri = (s as u128 * (s as u128 + 1)) / 2;
    u64::try_from(tri + n as u128).expect("pairing overflow")
}

/// Inverse of [`pairing`].
pub fn unpairing(z: u64) -> (u64, u64) {
    // w = floor((sqrt(8z+1) - 1) / 2)
    let disc = 8u128 * z as u128 + 1;
    let w = ((disc.isqrt() - 1) / 2) as u64;
    let t = (w as u128 * (w as u128 + 1) / 2) as u64;
    let n = z - t;
    (w - n, n)
}

/// The fixed bijection of atoms inducing the isometric isomorphism
/// `Lp(ℕ×ℕ) → Lp(ℕ)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PairingBijection;

impl PairingBijection {
    pub fn forward(&self, m: u64, n: u64) -> u64 {
        pairing(m, n)
    }

    pub fn backward(&self, z: u64) -> (u64, u64) {
        unpairing(z)
    }
}
