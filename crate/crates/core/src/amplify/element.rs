use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::Exponent;
use crate::lp::{LpOperator, LpVector};

/// Element `u = Σ_j ξ_j ⊗ e_j` of `ℓp(ℕ) ⊗ E`, stored row-wise: row `i`
/// holds the coordinates in `E` of the coefficient at base atom `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct AmplifiedElement {
    p: Exponent,
    dim: usize,
    rows: BTreeMap<u64, Vec<f64>>,
}

impl AmplifiedElement {
    pub fn new(p: Exponent, dim: usize, rows: impl IntoIterator<Item = (u64, Vec<f64>)>) -> Result<Self> {
        let mut acc: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
        for (i, r) in rows {
            if r.len() != dim {
                return Err(Error::invalid(format!("row {i} has length {} but dim is {dim}", r.len())));
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("row {i} has a non-finite entry")));
            }
            let slot = acc.entry(i).or_insert_with(|| vec![0.0; dim]);
            slot.iter_mut().zip(&r).for_each(|(s, v)| *s += v);
        }
        acc.retain(|_, r| r.iter().any(|v| *v != 0.0));
        Ok(AmplifiedElement { p, dim, rows: acc })
    }

    pub fn zero(p: Exponent, dim: usize) -> Self {
        AmplifiedElement { p, dim, rows: BTreeMap::new() }
    }

    /// `ξ ⊗ x`.
    pub fn elementary(xi: &LpVector, x: &[f64]) -> Self {
        Self::new(xi.p(), x.len(), xi.entries().iter().map(|(&i, &c)| (i, x.iter().map(|v| c * v).collect())))
            .expect("finite entries")
    }

    /// Rows of `m` placed at the atoms of `window`.
    pub fn from_matrix(p: Exponent, window: &[u64], m: &DMatrix<f64>) -> Self {
        assert_eq!(window.len(), m.nrows());
        Self::new(p, m.ncols(), window.iter().enumerate().map(|(r, &i)| (i, m.row(r).iter().copied().collect())))
            .expect("finite entries")
    }

    pub fn p(&self) -> Exponent {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &BTreeMap<u64, Vec<f64>> {
        &self.rows
    }

    pub fn is_zero(&self) -> bool {
        self.rows.is_empty()
    }

    /// Base atoms carrying a nonzero row.
    pub fn window(&self) -> Vec<u64> {
        self.rows.keys().copied().collect()
    }

    pub fn entry(&self, i: u64, j: usize) -> f64 {
        self.rows.get(&i).map_or(0.0, |r| r[j])
    }

    /// Dense `window × dim` matrix together with its window.
    pub fn matrix(&self) -> (Vec<u64>, DMatrix<f64>) {
        let window = self.window();
        let m = DMatrix::from_fn(window.len(), self.dim, |r, j| self.rows[&window[r]][j]);
        (window, m)
    }

    /// The base-space coefficient of direction `j`.
    pub fn column(&self, j: usize) -> BTreeMap<u64, f64> {
        self.rows.iter().filter(|(_, r)| r[j] != 0.0).map(|(&i, r)| (i, r[j])).collect()
    }

    fn check(&self, other: &AmplifiedElement) -> Result<()> {
        if self.p != other.p {
            return Err(Error::ExponentMismatch { left: self.p.value(), right: other.p.value() });
        }
        if self.dim != other.dim {
            return Err(Error::invalid(format!("dimensions differ: {} vs {}", self.dim, other.dim)));
        }
        Ok(())
    }

    pub fn add(&self, other: &AmplifiedElement) -> Result<AmplifiedElement> {
        self.check(other)?;
        Self::new(self.p, self.dim, self.rows.clone().into_iter().chain(other.rows.clone()))
    }

    pub fn sub(&self, other: &AmplifiedElement) -> Result<AmplifiedElement> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, c: f64) -> AmplifiedElement {
        Self::new(self.p, self.dim, self.rows.iter().map(|(&i, r)| (i, r.iter().map(|v| c * v).collect())))
            .expect("finite entries")
    }

    /// `a · u`: the operator acts on every base coefficient.
    pub fn module_action(&self, a: &LpOperator) -> Result<AmplifiedElement> {
        if a.p() != self.p {
            return Err(Error::ExponentMismatch { left: a.p().value(), right: self.p.value() });
        }
        if !a.space().is_counting() {
            return Err(Error::Unsupported("amplified elements live over the counting base".into()));
        }
        let mut rows: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
        for (i, k, v) in a.triplets() {
            if let Some(src) = self.rows.get(&k) {
                let dst = rows.entry(i).or_insert_with(|| vec![0.0; self.dim]);
                dst.iter_mut().zip(src).for_each(|(d, s)| *d += v * s);
            }
        }
        Self::new(self.p, self.dim, rows)
    }

    /// `(id ⊗ φ) u` for a matrix `φ : E → F` of shape `dim F × dim E`.
    pub fn apply_linear(&self, phi: &DMatrix<f64>) -> Result<AmplifiedElement> {
        if phi.ncols() != self.dim {
            return Err(Error::invalid("linear map does not act on this coordinate space"));
        }
        Self::new(
            self.p,
            phi.nrows(),
            self.rows.iter().map(|(&i, r)| {
                (i, (0..phi.nrows()).map(|g| (0..self.dim).map(|j| phi[(g, j)] * r[j]).sum()).collect())
            }),
        )
    }

    /// `(f ⊗ id_L) u` for a functional `f` on the coordinate space.
    pub fn apply_functional(&self, f: &[f64]) -> LpVector {
        LpVector::counting(self.p, self.rows.iter().map(|(&i, r)| (i, r.iter().zip(f).map(|(a, b)| a * b).sum())))
    }

    pub fn max_abs_diff(&self, other: &AmplifiedElement) -> f64 {
        let dim = self.dim.max(other.dim);
        let at = |u: &AmplifiedElement, i: &u64, j: usize| u.rows.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0.0);
        self.rows
            .keys()
            .chain(other.rows.keys())
            .flat_map(|i| (0..dim).map(move |j| (i, j)))
            .map(|(i, j)| (at(self, i, j) - at(other, i, j)).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Serialize, Deserialize)]
struct RawElement {
    p: Exponent,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
    rows: BTreeMap<u64, Vec<f64>>,
}

impl Serialize for AmplifiedElement {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RawElement { p: self.p, dim: Some(self.dim), rows: self.rows.clone() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for AmplifiedElement {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = RawElement::deserialize(d)?;
        let dim = match raw.dim.or_else(|| raw.rows.values().next().map(Vec::len)) {
            Some(n) => n,
            None => return Err(D::Error::custom("empty element needs an explicit dim")),
        };
        AmplifiedElement::new(raw.p, dim, raw.rows).map_err(D::Error::custom)
    }
}
