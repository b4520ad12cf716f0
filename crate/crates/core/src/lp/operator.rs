use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::opnorm::{p_norm_bracket, OpNormConfig};
use super::vector::LpVector;
use crate::bracket::NormBracket;
use crate::error::{Error, Result};
use crate::exponent::Exponent;
use crate::measure::MeasureSpace;

/// Bounded operator on `Lp(X)` that factors through finite windows: it reads
/// the atoms in `dom`, writes the atoms in `cod`, and vanishes elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct LpOperator {
    p: Exponent,
    space: Arc<MeasureSpace>,
    dom: Vec<u64>,
    cod: Vec<u64>,
    matrix: DMatrix<f64>,
}

impl LpOperator {
    pub fn new(
        p: Exponent,
        space: Arc<MeasureSpace>,
        dom: Vec<u64>,
        cod: Vec<u64>,
        matrix: DMatrix<f64>,
    ) -> Result<Self> {
        if matrix.shape() != (cod.len(), dom.len()) {
            return Err(Error::invalid(format!(
                "matrix is {}x{} but windows are {}x{}",
                matrix.nrows(),
                matrix.ncols(),
                cod.len(),
                dom.len()
            )));
        }
        for window in [&dom, &cod] {
            let mut sorted = window.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != window.len() {
                return Err(Error::invalid("window lists an atom twice"));
            }
            if let Some(bad) = window.iter().find(|i| !space.contains(**i)) {
                return Err(Error::invalid(format!("window atom {bad} outside the measure space")));
            }
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite matrix entry"));
        }
        Ok(LpOperator { p, space, dom, cod, matrix })
    }

    /// Operator on the counting space ℕ.
    pub fn on_counting(p: Exponent, dom: Vec<u64>, cod: Vec<u64>, matrix: DMatrix<f64>) -> Result<Self> {
        Self::new(p, Arc::new(MeasureSpace::Counting), dom, cod, matrix)
    }

    /// Builds a counting-space operator from `(row, column, value)` triplets;
    /// windows are the sorted rows and columns that occur.
    pub fn from_triplets(p: Exponent, triplets: impl IntoIterator<Item = (u64, u64, f64)>) -> Self {
        let mut acc: BTreeMap<(u64, u64), f64> = BTreeMap::new();
        for (i, j, v) in triplets {
            if v != 0.0 {
                *acc.entry((i, j)).or_insert(0.0) += v;
            }
        }
        acc.retain(|_, v| *v != 0.0);
        Self::assemble(p, Arc::new(MeasureSpace::Counting), acc)
    }

    fn assemble(p: Exponent, space: Arc<MeasureSpace>, acc: BTreeMap<(u64, u64), f64>) -> Self {
        let mut rows: Vec<u64> = acc.keys().map(|k| k.0).collect();
        let mut cols: Vec<u64> = acc.keys().map(|k| k.1).collect();
        rows.sort_unstable();
        rows.dedup();
        cols.sort_unstable();
        cols.dedup();
        let row_pos: BTreeMap<u64, usize> = rows.iter().enumerate().map(|(k, r)| (*r, k)).collect();
        let col_pos: BTreeMap<u64, usize> = cols.iter().enumerate().map(|(k, c)| (*c, k)).collect();
        let mut m = DMatrix::zeros(rows.len(), cols.len());
        for ((i, j), v) in acc {
            m[(row_pos[&i], col_pos[&j])] = v;
        }
        LpOperator { p, space, dom: cols, cod: rows, matrix: m }
    }

    pub fn identity(p: Exponent, window: Vec<u64>) -> Self {
        let n = window.len();
        Self::on_counting(p, window.clone(), window, DMatrix::identity(n, n)).expect("valid identity")
    }

    pub fn zero(p: Exponent) -> Self {
        Self::on_counting(p, vec![], vec![], DMatrix::zeros(0, 0)).expect("valid zero")
    }

    /// Rank-one operator `ζ ↦ ⟨ζ, functional⟩ · target`.
    pub fn rank_one(target: &LpVector, functional: &BTreeMap<u64, f64>) -> Self {
        let p = target.p();
        Self::from_triplets(
            p,
            target.entries().iter().flat_map(|(&i, &t)| functional.iter().map(move |(&j, &f)| (i, j, t * f))),
        )
    }

    pub fn p(&self) -> Exponent {
        self.p
    }

    pub fn space(&self) -> &Arc<MeasureSpace> {
        &self.space
    }

    pub fn dom(&self) -> &[u64] {
        &self.dom
    }

    pub fn cod(&self) -> &[u64] {
        &self.cod
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn triplets(&self) -> Vec<(u64, u64, f64)> {
        let mut out = Vec::new();
        for (r, &i) in self.cod.iter().enumerate() {
            for (c, &j) in self.dom.iter().enumerate() {
                let v = self.matrix[(r, c)];
                if v != 0.0 {
                    out.push((i, j, v));
                }
            }
        }
        out
    }

    fn sparse(&self) -> BTreeMap<(u64, u64), f64> {
        self.triplets().into_iter().map(|(i, j, v)| ((i, j), v)).collect()
    }

    pub fn get(&self, i: u64, j: u64) -> f64 {
        match (self.cod.iter().position(|&r| r == i), self.dom.iter().position(|&c| c == j)) {
            (Some(r), Some(c)) => self.matrix[(r, c)],
            _ => 0.0,
        }
    }

    /// Applies the operator to a sparse coefficient map.
    pub fn apply_sparse(&self, x: &BTreeMap<u64, f64>) -> BTreeMap<u64, f64> {
        let mut out = BTreeMap::new();
        for (c, j) in self.dom.iter().enumerate() {
            let Some(&xj) = x.get(j) else { continue };
            for (r, &i) in self.cod.iter().enumerate() {
                let v = self.matrix[(r, c)] * xj;
                if v != 0.0 {
                    *out.entry(i).or_insert(0.0) += v;
                }
            }
        }
        out.retain(|_, v| *v != 0.0);
        out
    }

    pub fn apply(&self, x: &LpVector) -> Result<LpVector> {
        self.check_exponent(x.p())?;
        LpVector::new(self.space.clone(), self.p, self.apply_sparse(x.entries()))
    }

    fn check_exponent(&self, other: Exponent) -> Result<()> {
        if self.p != other {
            return Err(Error::ExponentMismatch { left: self.p.value(), right: other.value() });
        }
        Ok(())
    }

    fn check_compatible(&self, other: &LpOperator) -> Result<()> {
        self.check_exponent(other.p)?;
        if self.space != other.space {
            return Err(Error::Unsupported("operators act on different measure spaces".into()));
        }
        Ok(())
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &LpOperator) -> Result<LpOperator> {
        self.check_compatible(other)?;
        let mut by_row: BTreeMap<u64, Vec<(u64, f64)>> = BTreeMap::new();
        for (k, j, v) in other.triplets() {
            by_row.entry(k).or_default().push((j, v));
        }
        let mut acc: BTreeMap<(u64, u64), f64> = BTreeMap::new();
        for (i, k, a) in self.triplets() {
            if let Some(list) = by_row.get(&k) {
                for &(j, b) in list {
                    *acc.entry((i, j)).or_insert(0.0) += a * b;
                }
            }
        }
        acc.retain(|_, v| *v != 0.0);
        Ok(Self::assemble(self.p, self.space.clone(), acc))
    }

    pub fn add(&self, other: &LpOperator) -> Result<LpOperator> {
        self.check_compatible(other)?;
        let mut acc = self.sparse();
        for (k, v) in other.sparse() {
            *acc.entry(k).or_insert(0.0) += v;
        }
        acc.retain(|_, v| *v != 0.0);
        Ok(Self::assemble(self.p, self.space.clone(), acc))
    }

    pub fn scale(&self, c: f64) -> LpOperator {
        LpOperator { matrix: &self.matrix * c, ..self.clone() }
    }

    /// Operator norm on `Lp(X)`. Atom weights are absorbed by the diagonal
    /// scaling `D_cod^{1/p} A D_dom^{-1/p}`.
    pub fn norm_bracket(&self, cfg: &OpNormConfig) -> NormBracket {
        p_norm_bracket(&self.scaled_matrix(), self.p, cfg)
    }

    pub fn scaled_matrix(&self) -> DMatrix<f64> {
        if self.space.is_counting() || self.p.is_infinite() {
            return self.matrix.clone();
        }
        let inv_p = 1.0 / self.p.value();
        let w = |i: u64| self.space.weight(i).expect("window inside space").powf(inv_p);
        DMatrix::from_fn(self.cod.len(), self.dom.len(), |r, c| self.matrix[(r, c)] * w(self.cod[r]) / w(self.dom[c]))
    }

    pub fn max_abs_diff(&self, other: &LpOperator) -> f64 {
        let mut acc = self.sparse();
        for (k, v) in other.sparse() {
            *acc.entry(k).or_insert(0.0) -= v;
        }
        acc.values().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

#[derive(Serialize, Deserialize)]
struct RawOperator {
    p: Exponent,
    dom: Vec<u64>,
    cod: Vec<u64>,
    m: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    space: Option<MeasureSpace>,
}

impl Serialize for LpOperator {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RawOperator {
            p: self.p,
            dom: self.dom.clone(),
            cod: self.cod.clone(),
            m: self.matrix.row_iter().map(|r| r.iter().copied().collect()).collect(),
            space: (!self.space.is_counting()).then(|| (*self.space).clone()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LpOperator {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = RawOperator::deserialize(d)?;
        let space = raw.space.unwrap_or(MeasureSpace::Counting);
        space.validate().map_err(D::Error::custom)?;
        if raw.m.len() != raw.cod.len() || raw.m.iter().any(|r| r.len() != raw.dom.len()) {
            return Err(D::Error::custom("matrix shape does not match dom/cod windows"));
        }
        let m = DMatrix::from_fn(raw.cod.len(), raw.dom.len(), |i, j| raw.m[i][j]);
        LpOperator::new(raw.p, Arc::new(space), raw.dom, raw.cod, m).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compose_and_apply_agree() {
        let p = Exponent::TWO;
        let a = LpOperator::from_triplets(p, [(0, 1, 2.0), (3, 0, 1.0)]);
        let b = LpOperator::from_triplets(p, [(1, 5, -1.0), (0, 5, 4.0)]);
        let ab = a.compose(&b).unwrap();
        let x = LpVector::basis(p, 5);
        let direct = a.apply(&b.apply(&x).unwrap()).unwrap();
        assert_eq!(ab.apply(&x).unwrap(), direct);
        assert_eq!(ab.get(0, 5), -2.0);
        assert_eq!(ab.get(3, 5), 4.0);
    }

    #[test]
    fn weighted_scaling() {
        // Multiplication by 1 from atom 0 (weight 4) to atom 1 (weight 1) at p=2:
        // ‖e_0‖ = 2, ‖e_1‖ = 1, so the norm is 1/2.
        let space = Arc::new(MeasureSpace::from_weights(&[4.0, 1.0]).unwrap());
        let op = LpOperator::new(Exponent::TWO, space, vec![0], vec![1], DMatrix::from_element(1, 1, 1.0)).unwrap();
        let b = op.norm_bracket(&OpNormConfig::default());
        assert!((b.upper - 0.5).abs() < 1e-15 && (b.lower - 0.5).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let op: LpOperator = serde_json::from_str(r#"{"p":2,"dom":[0,1],"cod":[0,1],"m":[[1,1],[0,0]]}"#).unwrap();
        let b = op.norm_bracket(&OpNormConfig::default());
        assert!((b.lower - 2f64.sqrt()).abs() < 1e-12);
        let back: LpOperator = serde_json::from_str(&serde_json::to_string(&op).unwrap()).unwrap();
        assert_eq!(back, op);
        assert!(serde_json::from_str::<LpOperator>(r#"{"p":2,"dom":[0],"cod":[0,1],"m":[[1]]}"#).is_err());
    }

    #[test]
    fn empty_windows_have_zero_norm() {
        let z = LpOperator::zero(Exponent::new(3.0).unwrap());
        assert_eq!(z.norm_bracket(&OpNormConfig::default()), NormBracket::zero());
    }
}
