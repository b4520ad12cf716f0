use serde::{Deserialize, Serialize};

use super::element::AmplifiedElement;
use super::projective::{projective_bracket, projective_exact, Decomposition, NormOracle};
use crate::bracket::NormBracket;
use crate::error::{Error, Result};
use crate::exponent::Exponent;
use crate::lp::{LpVector, OpNormConfig};
use crate::normed::{mixed_norm_bracket, FiniteNormedSpace};
use crate::search::SearchConfig;

/// The two extreme L-norms on `L ⊗ E`: injective (`Min`) and projective (`Max`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantization {
    Min,
    Max,
}

/// A normed space together with a choice of quantization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizedSpace {
    pub space: FiniteNormedSpace,
    pub quant: Quantization,
}

impl QuantizedSpace {
    pub fn min(space: FiniteNormedSpace) -> Self {
        QuantizedSpace { space, quant: Quantization::Min }
    }

    pub fn max(space: FiniteNormedSpace) -> Self {
        QuantizedSpace { space, quant: Quantization::Max }
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn norm(&self, u: &AmplifiedElement, cfg: &SearchConfig) -> NormBracket {
        match self.quant {
            Quantization::Min => min_norm(u, &self.space, &cfg.opnorm),
            Quantization::Max => max_norm(u, &self.space, cfg),
        }
    }

    /// Quick upper bound used to steer searches.
    pub fn quick_upper(&self, u: &AmplifiedElement, cfg: &SearchConfig) -> f64 {
        match self.quant {
            Quantization::Min => min_norm(u, &self.space, &cfg.fast_opnorm()).upper,
            Quantization::Max => max_norm_quick(u, &self.space),
        }
    }

    pub fn underlying_norm(&self, x: &[f64], cfg: &SearchConfig) -> NormBracket {
        underlying_norm(self, x, &LpVector::basis(Exponent::ONE, 0), cfg)
    }
}

/// Base-side factor `ℓp` restricted to a window of `n` atoms.
fn base_window(p: Exponent, n: usize) -> FiniteNormedSpace {
    FiniteNormedSpace::lq(p, n)
}

/// `max_i ‖row_i‖_E`, attained by the rank-one operator `e_0 ⊗ e_i^*` of norm one.
fn row_witness(u: &AmplifiedElement, space: &FiniteNormedSpace) -> f64 {
    u.rows().values().map(|r| space.norm(r)).fold(0.0, f64::max)
}

/// Injective norm: `sup{‖(f ⊗ id)u‖_p : ‖f‖_{E*} ≤ 1}`. For `E = Lq` with `q`
/// conjugate to `p` this is the ℓp operator norm of the associated operator.
pub fn min_norm(u: &AmplifiedElement, space: &FiniteNormedSpace, cfg: &OpNormConfig) -> NormBracket {
    if u.is_zero() {
        return NormBracket::zero();
    }
    let (window, m) = u.matrix();
    let b = mixed_norm_bracket(&m, &space.dual(), &base_window(u.p(), window.len()), cfg);
    let witness = row_witness(u, space);
    NormBracket::new(b.lower.max(witness).min(b.upper), b.upper)
}

/// Projective norm of `u` in `ℓp ⊗_π E`, computed on the support window
/// (a 1-complemented copy of `ℓp^n`).
pub fn max_norm(u: &AmplifiedElement, space: &FiniteNormedSpace, cfg: &SearchConfig) -> NormBracket {
    max_norm_with_decomposition(u, space, cfg).0
}

pub fn max_norm_with_decomposition(
    u: &AmplifiedElement,
    space: &FiniteNormedSpace,
    cfg: &SearchConfig,
) -> (NormBracket, Option<Decomposition>) {
    if u.is_zero() {
        return (NormBracket::zero(), None);
    }
    let (window, m) = u.matrix();
    let base = base_window(u.p(), window.len());
    let (b, dec) = projective_bracket(&m, &base, space, cfg);
    let injective = min_norm(u, space, &cfg.opnorm).lower;
    (NormBracket::new(b.lower.max(injective).min(b.upper), b.upper), dec)
}

fn max_norm_quick(u: &AmplifiedElement, space: &FiniteNormedSpace) -> f64 {
    if u.is_zero() {
        return 0.0;
    }
    let (window, m) = u.matrix();
    let base = base_window(u.p(), window.len());
    if let Some(v) = projective_exact(&m, &base, space) {
        return v;
    }
    [Decomposition::by_rows(&m), Decomposition::by_columns(&m), Decomposition::by_svd(&m)]
        .iter()
        .map(|d| d.cost(&base, space))
        .fold(f64::INFINITY, f64::min)
}

/// `‖ξ ⊗ x‖` for a unit base vector `ξ` (normalised here if needed).
pub fn underlying_norm(q: &QuantizedSpace, x: &[f64], xi: &LpVector, cfg: &SearchConfig) -> NormBracket {
    let xi_norm = xi.norm();
    if xi_norm == 0.0 {
        return NormBracket::zero();
    }
    let u = AmplifiedElement::elementary(xi, x);
    q.norm(&u, cfg).scale(1.0 / xi_norm)
}

/// Norm oracle for coordinate vectors of `L ⊗ E` laid out as `window × dim`.
pub struct AmplifiedNorm<'a> {
    pub quant: &'a QuantizedSpace,
    pub p: Exponent,
    pub window: Vec<u64>,
    pub cfg: SearchConfig,
}

impl AmplifiedNorm<'_> {
    pub fn element(&self, x: &[f64]) -> AmplifiedElement {
        let d = self.quant.dim();
        AmplifiedElement::new(
            self.p,
            d,
            self.window.iter().enumerate().map(|(r, &i)| (i, x[r * d..(r + 1) * d].to_vec())),
        )
        .expect("finite coordinates")
    }
}

impl NormOracle for AmplifiedNorm<'_> {
    fn dim(&self) -> usize {
        self.window.len() * self.quant.dim()
    }

    fn estimate(&self, x: &[f64]) -> f64 {
        self.quant.quick_upper(&self.element(x), &self.cfg)
    }

    fn upper(&self, x: &[f64]) -> f64 {
        self.quant.norm(&self.element(x), &self.cfg).upper
    }
}

/// Checks that an element's coordinate dimension matches a space.
pub(crate) fn check_dim(u: &AmplifiedElement, dim: usize) -> Result<()> {
    if u.dim() != dim {
        return Err(Error::invalid(format!("element has {} coordinates, space has {dim}", u.dim())));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SearchConfig {
        SearchConfig::with_seed(1)
    }

    #[test]
    fn min_norm_examples() {
        let p = Exponent::TWO;
        let l2 = FiniteNormedSpace::lq(p, 2);
        let id = AmplifiedElement::new(p, 2, [(0, vec![1.0, 0.0]), (1, vec![0.0, 1.0])]).unwrap();
        assert_eq!(min_norm(&id, &l2, &cfg().opnorm), NormBracket::exact(1.0));
        let stacked = AmplifiedElement::new(p, 2, [(0, vec![1.0, 0.0]), (1, vec![1.0, 0.0])]).unwrap();
        let b = min_norm(&stacked, &l2, &cfg().opnorm);
        assert!((b.lower - 2f64.sqrt()).abs() < 1e-12 && b.is_exact(1e-12));
    }

    #[test]
    fn max_norm_examples() {
        let p = Exponent::TWO;
        let l2 = FiniteNormedSpace::lq(p, 2);
        let id = AmplifiedElement::new(p, 2, [(0, vec![1.0, 0.0]), (1, vec![0.0, 1.0])]).unwrap();
        assert_eq!(max_norm(&id, &l2, &cfg()), NormBracket::exact(2.0));
        // singular values 3 and 1
        let m = AmplifiedElement::new(p, 2, [(0, vec![2.0, 1.0]), (1, vec![1.0, 2.0])]).unwrap();
        let b = max_norm(&m, &l2, &cfg());
        assert!((b.lower - 4.0).abs() < 1e-12 && b.is_exact(1e-12));
    }

    #[test]
    fn cross_norm_on_elementary_tensors() {
        let cfg = cfg();
        for p in [1.0, 1.5, 2.0, 3.0, f64::INFINITY] {
            let p = Exponent::new(p).unwrap();
            let xi = LpVector::counting(p, [(0, 1.0), (2, -2.0), (5, 0.5)]);
            for q in [1.0, 2.0, 4.0] {
                let e = FiniteNormedSpace::lq(Exponent::new(q).unwrap(), 3);
                let x = [0.3, -1.0, 2.0];
                let u = AmplifiedElement::elementary(&xi, &x);
                let want = xi.norm() * e.norm(&x);
                for b in [min_norm(&u, &e, &cfg.opnorm), max_norm(&u, &e, &cfg)] {
                    assert!(
                        (b.lower - want).abs() <= 1e-9 * want && (b.upper - want).abs() <= 1e-9 * want,
                        "p={p} q={q}: {b:?} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn underlying_norm_ignores_the_unit_vector() {
        let cfg = cfg();
        let p = Exponent::new(3.0).unwrap();
        let x = [1.0, -2.0, 0.5];
        for quant in [Quantization::Min, Quantization::Max] {
            let q = QuantizedSpace { space: FiniteNormedSpace::lq(Exponent::new(1.5).unwrap(), 3), quant };
            let want = q.space.norm(&x);
            let half = 0.5f64.powf(1.0 / p.value());
            for xi in [LpVector::basis(p, 0), LpVector::basis(p, 7), LpVector::counting(p, [(0, half), (1, half)])] {
                let b = underlying_norm(&q, &x, &xi, &cfg);
                assert!((b.lower - want).abs() < 1e-9 && (b.upper - want).abs() < 1e-9, "{quant:?}: {b:?}");
            }
            assert_eq!(q.underlying_norm(&[0.0; 3], &cfg), NormBracket::zero());
        }
    }
}
