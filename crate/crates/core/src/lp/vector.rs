use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::Exponent;
use crate::measure::MeasureSpace;

/// Finite-support element of `Lp(X)` for an atomic measure space `X`.
#[derive(Clone, Debug, PartialEq)]
pub struct LpVector {
    space: Arc<MeasureSpace>,
    p: Exponent,
    entries: BTreeMap<u64, f64>,
}

impl LpVector {
    pub fn new(space: Arc<MeasureSpace>, p: Exponent, entries: impl IntoIterator<Item = (u64, f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, v) in entries {
            if !space.contains(i) {
                return Err(Error::invalid(format!("atom {i} outside the measure space")));
            }
            if !v.is_finite() {
                return Err(Error::invalid(format!("non-finite entry at atom {i}")));
            }
            if v != 0.0 {
                *map.entry(i).or_insert(0.0) += v;
            }
        }
        map.retain(|_, v| *v != 0.0);
        Ok(LpVector { space, p, entries: map })
    }

    /// Vector on the counting space ℕ.
    pub fn counting(p: Exponent, entries: impl IntoIterator<Item = (u64, f64)>) -> Self {
        Self::new(Arc::new(MeasureSpace::Counting), p, entries).expect("counting space holds every atom")
    }

    pub fn zero(p: Exponent) -> Self {
        Self::counting(p, [])
    }

    /// Unit basis vector `e_j` of ℓp.
    pub fn basis(p: Exponent, j: u64) -> Self {
        Self::counting(p, [(j, 1.0)])
    }

    pub fn space(&self) -> &Arc<MeasureSpace> {
        &self.space
    }

    pub fn p(&self) -> Exponent {
        self.p
    }

    pub fn entries(&self) -> &BTreeMap<u64, f64> {
        &self.entries
    }

    pub fn get(&self, i: u64) -> f64 {
        self.entries.get(&i).copied().unwrap_or(0.0)
    }

    pub fn support(&self) -> Vec<u64> {
        self.entries.keys().copied().collect()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// `(Σ w_i |v_i|^p)^{1/p}`, or `max |v_i|` when p = ∞.
    pub fn norm(&self) -> f64 {
        let space = &self.space;
        self.p.weighted_norm(self.entries.iter().map(|(&i, &v)| (space.weight(i).unwrap_or(0.0), v)))
    }

    pub fn scale(&self, c: f64) -> LpVector {
        LpVector::new(self.space.clone(), self.p, self.entries.iter().map(|(&i, &v)| (i, c * v)))
            .expect("scaling keeps support")
    }

    pub fn add(&self, other: &LpVector) -> Result<LpVector> {
        self.check_compatible(other)?;
        LpVector::new(
            self.space.clone(),
            self.p,
            self.entries.iter().chain(other.entries.iter()).map(|(&i, &v)| (i, v)),
        )
    }

    pub fn sub(&self, other: &LpVector) -> Result<LpVector> {
        self.add(&other.scale(-1.0))
    }

    fn check_compatible(&self, other: &LpVector) -> Result<()> {
        if self.p != other.p {
            return Err(Error::ExponentMismatch { left: self.p.value(), right: other.p.value() });
        }
        if !Arc::ptr_eq(&self.space, &other.space) && self.space != other.space {
            return Err(Error::Unsupported("vectors live on different measure spaces".into()));
        }
        Ok(())
    }

    /// Sup-distance between coefficient sequences.
    pub fn max_abs_diff(&self, other: &LpVector) -> f64 {
        let mut keys: Vec<u64> = self.entries.keys().chain(other.entries.keys()).copied().collect();
        keys.sort_unstable();
        keys.dedup();
        keys.iter().map(|&k| (self.get(k) - other.get(k)).abs()).fold(0.0, f64::max)
    }
}

#[derive(Serialize, Deserialize)]
struct RawVector {
    p: Exponent,
    entries: BTreeMap<u64, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    space: Option<MeasureSpace>,
}

impl Serialize for LpVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RawVector {
            p: self.p,
            entries: self.entries.clone(),
            space: (!self.space.is_counting()).then(|| (*self.space).clone()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LpVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawVector::deserialize(d)?;
        let space = raw.space.unwrap_or(MeasureSpace::Counting);
        space.validate().map_err(serde::de::Error::custom)?;
        LpVector::new(Arc::new(space), raw.p, raw.entries).map_err(serde::de::Error::custom)
    }
}
