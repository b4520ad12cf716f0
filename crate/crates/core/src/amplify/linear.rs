use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::element::AmplifiedElement;
use super::projective::projective_bracket;
use super::quant::{Quantization, QuantizedSpace};
use crate::bracket::NormBracket;
use crate::diamond::diamond_amp;
use crate::error::{Error, Result};
use crate::exponent::Exponent;
use crate::normed::{mixed_norm_bracket, mixed_norm_witness, FiniteNormedSpace};
use crate::search::SearchConfig;

/// An L-bounded norm together with the base window its witnesses used.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LBoundedNorm {
    pub lower: f64,
    pub upper: f64,
    pub window: usize,
}

impl LBoundedNorm {
    pub fn bracket(&self) -> NormBracket {
        NormBracket::new(self.lower, self.upper)
    }

    fn from_bracket(b: NormBracket, window: usize) -> Self {
        LBoundedNorm { lower: b.lower, upper: b.upper, window }
    }
}

/// Norm of the amplification `φ_∞ : L E → L F` of a matrix `φ` (`dim F × dim E`).
pub fn lbounded_norm_linear(
    phi: &DMatrix<f64>,
    from: &QuantizedSpace,
    to: &QuantizedSpace,
    cfg: &SearchConfig,
) -> Result<LBoundedNorm> {
    if phi.shape() != (to.dim(), from.dim()) {
        return Err(Error::invalid("linear map shape must be dim F x dim E"));
    }
    if phi.iter().all(|v| *v == 0.0) {
        return Ok(LBoundedNorm::from_bracket(NormBracket::zero(), cfg.window));
    }
    // Bounded functionals are L-bounded with the same norm.
    if to.dim() == 1 {
        let f: Vec<f64> = phi.row(0).iter().copied().collect();
        let b = from.space.dual_norm(&f).scale(to.space.basis_norm(0));
        return Ok(LBoundedNorm::from_bracket(b, cfg.window));
    }
    let plain = mixed_norm_bracket(phi, &from.space, &to.space, &cfg.opnorm);
    match (from.quant, to.quant) {
        // Injective and projective tensor norms are uniform; and min ≤ max.
        (Quantization::Min, Quantization::Min) | (Quantization::Max, _) => {
            Ok(LBoundedNorm::from_bracket(plain, cfg.window))
        }
        (Quantization::Min, Quantization::Max) => {
            // φ = Σ y_k ⊗ f_k gives ‖φ_∞ u‖_max ≤ Σ ‖f_k‖ ‖y_k‖ ‖u‖_min.
            let (nuclear, _) = projective_bracket(phi, &to.space, &from.space.dual(), cfg);
            let mut lower = plain.lower;
            let p = Exponent::TWO;
            for u in witness_elements(p, from.dim(), cfg.window) {
                let image = u.apply_linear(phi)?;
                let num = to.norm(&image, cfg).lower;
                let den = from.norm(&u, cfg).upper;
                if den > 0.0 {
                    lower = lower.max(num / den);
                }
            }
            Ok(LBoundedNorm::from_bracket(NormBracket::new(lower.min(nuclear.upper), nuclear.upper), cfg.window))
        }
    }
}

/// `Σ_{i<d} e_i ⊗ e_i` and its cyclic shifts, truncated to the window.
fn witness_elements(p: Exponent, dim: usize, window: usize) -> Vec<AmplifiedElement> {
    let n = dim.min(window).max(1);
    (0..dim)
        .map(|shift| {
            AmplifiedElement::new(
                p,
                dim,
                (0..n).map(|i| {
                    let mut r = vec![0.0; dim];
                    r[(i + shift) % dim] = 1.0;
                    (i as u64, r)
                }),
            )
            .expect("finite")
        })
        .collect()
}

/// Bilinear map `ρ : E × F → G` with coefficients `ρ[g][j][l]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BilinearMap {
    pub dims: (usize, usize, usize),
    pub coeffs: Vec<f64>,
}

impl BilinearMap {
    pub fn new(dims: (usize, usize, usize), coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != dims.0 * dims.1 * dims.2 {
            return Err(Error::invalid("coefficient count must be dim G * dim E * dim F"));
        }
        Ok(BilinearMap { dims, coeffs })
    }

    /// The product functional `(x, y) ↦ f(x) g(y)`.
    pub fn product_functional(f: &[f64], g: &[f64]) -> Self {
        let coeffs = f.iter().flat_map(|a| g.iter().map(move |b| a * b)).collect();
        BilinearMap { dims: (1, f.len(), g.len()), coeffs }
    }

    /// Scalar multiplication `ℂ × ℂ → ℂ`.
    pub fn scalar() -> Self {
        BilinearMap { dims: (1, 1, 1), coeffs: vec![1.0] }
    }

    pub fn coeff(&self, g: usize, j: usize, l: usize) -> f64 {
        self.coeffs[(g * self.dims.1 + j) * self.dims.2 + l]
    }

    /// Slice `ρ_g` as a `dim E × dim F` matrix.
    pub fn slice(&self, g: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.dims.1, self.dims.2, |j, l| self.coeff(g, j, l))
    }

    pub fn apply(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        (0..self.dims.0)
            .map(|g| {
                let mut s = 0.0;
                for (j, xj) in x.iter().enumerate() {
                    for (l, yl) in y.iter().enumerate() {
                        s += self.coeff(g, j, l) * xj * yl;
                    }
                }
                s
            })
            .collect()
    }

    /// `x ↦ ρ(x, y)` as a `dim G × dim E` matrix.
    fn left_section(&self, y: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.dims.0, self.dims.1, |g, j| (0..self.dims.2).map(|l| self.coeff(g, j, l) * y[l]).sum())
    }

    fn right_section(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.dims.0, self.dims.2, |g, l| (0..self.dims.1).map(|j| self.coeff(g, j, l) * x[j]).sum())
    }
}

/// `ρ_∞(u, v)`: on elementary tensors `(ξx, ηy) ↦ (ξ ◇ η) ρ(x, y)`.
pub fn amplify_bilinear(rho: &BilinearMap, u: &AmplifiedElement, v: &AmplifiedElement) -> Result<AmplifiedElement> {
    let (dg, de, df) = rho.dims;
    if u.dim() != de || v.dim() != df {
        return Err(Error::invalid("bilinear map does not act on these coordinate spaces"));
    }
    let w = diamond_amp(u, v)?;
    let flat = DMatrix::from_fn(dg, de * df, |g, jl| rho.coeff(g, jl / df, jl % df));
    w.apply_linear(&flat)
}

/// Bracket on `‖ρ‖_{Lb}`. The lower end comes from elementary witnesses,
/// the upper end from splitting `ρ = Σ_g ρ_g e_g` into bilinear functionals,
/// each bounded by its projective norm in `E* ⊗_π F*`.
pub fn lbounded_norm_bilinear(
    rho: &BilinearMap,
    e: &QuantizedSpace,
    f: &QuantizedSpace,
    g: &QuantizedSpace,
    cfg: &SearchConfig,
) -> Result<LBoundedNorm> {
    let (dg, de, df) = rho.dims;
    if e.dim() != de || f.dim() != df || g.dim() != dg {
        return Err(Error::invalid("bilinear map dimensions do not match the spaces"));
    }
    if rho.coeffs.iter().all(|c| *c == 0.0) {
        return Ok(LBoundedNorm::from_bracket(NormBracket::zero(), cfg.window));
    }
    let (e_dual, f_dual) = (e.space.dual(), f.space.dual());
    let upper: f64 =
        (0..dg).map(|k| g.space.basis_norm(k) * projective_bracket(&rho.slice(k), &e_dual, &f_dual, cfg).0.upper).sum();
    let lower = elementary_bilinear_lower(rho, &e.space, &f.space, &g.space, cfg);
    Ok(LBoundedNorm::from_bracket(NormBracket::new(lower.min(upper), upper), cfg.window))
}

/// `sup ‖ρ(x, y)‖ / (‖x‖‖y‖)` by alternating maximisation over `x` and `y`.
fn elementary_bilinear_lower(
    rho: &BilinearMap,
    e: &FiniteNormedSpace,
    f: &FiniteNormedSpace,
    g: &FiniteNormedSpace,
    cfg: &SearchConfig,
) -> f64 {
    let mut best = 0.0f64;
    let starts: Vec<Vec<f64>> = (0..rho.dims.2)
        .map(|l| {
            let mut y = vec![0.0; rho.dims.2];
            y[l] = 1.0;
            y
        })
        .chain(std::iter::once(vec![1.0; rho.dims.2]))
        .collect();
    for mut y in starts {
        let ny = f.norm(&y);
        y.iter_mut().for_each(|v| *v /= ny);
        for _ in 0..20 {
            let (_, x) = mixed_norm_witness(&rho.left_section(&y), e, g, &cfg.fast_opnorm());
            let (val, y_next) = mixed_norm_witness(&rho.right_section(&x), f, g, &cfg.fast_opnorm());
            let exact = g.norm(&rho.apply(&x, &y_next)) / (e.norm(&x) * f.norm(&y_next));
            let improved = exact > best * (1.0 + 1e-13);
            best = best.max(exact);
            y = y_next;
            if !improved || val == 0.0 {
                break;
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::LpVector;

    fn elementary(xi: &LpVector, x: &[f64]) -> AmplifiedElement {
        AmplifiedElement::elementary(xi, x)
    }

    fn cfg() -> SearchConfig {
        SearchConfig::with_seed(2)
    }

    #[test]
    fn identity_and_scalar_multiples() {
        for quant in [Quantization::Min, Quantization::Max] {
            let e = QuantizedSpace { space: FiniteNormedSpace::lq(Exponent::new(1.5).unwrap(), 3), quant };
            let id = DMatrix::<f64>::identity(3, 3);
            let b = lbounded_norm_linear(&id, &e, &e, &cfg()).unwrap();
            assert!((b.lower - 1.0).abs() < 1e-12 && (b.upper - 1.0).abs() < 1e-12);
            let b = lbounded_norm_linear(&(id * -2.5), &e, &e, &cfg()).unwrap();
            assert!((b.lower - 2.5).abs() < 1e-12 && (b.upper - 2.5).abs() < 1e-12);
            assert_eq!(b.window, 16);
        }
    }

    #[test]
    fn functional_norm_is_dual_norm() {
        let e = QuantizedSpace::min(FiniteNormedSpace::lq(Exponent::TWO, 2));
        let c = QuantizedSpace::min(FiniteNormedSpace::lq(Exponent::TWO, 1));
        let f = DMatrix::from_row_slice(1, 2, &[3.0, 4.0]);
        assert_eq!(lbounded_norm_linear(&f, &e, &c, &cfg()).unwrap().bracket(), NormBracket::exact(5.0));
    }

    #[test]
    fn min_to_max_brackets_are_ordered() {
        let e = QuantizedSpace::min(FiniteNormedSpace::lq(Exponent::TWO, 2));
        let f = QuantizedSpace::max(FiniteNormedSpace::lq(Exponent::TWO, 2));
        let b = lbounded_norm_linear(&DMatrix::identity(2, 2), &e, &f, &cfg()).unwrap();
        // Σ e_i ⊗ e_i has min norm 1 and max norm 2, and the nuclear norm of id is 2.
        assert!((b.lower - 2.0).abs() < 1e-9 && (b.upper - 2.0).abs() < 1e-9, "{b:?}");
    }

    #[test]
    fn scalar_bilinear_amplifies_to_diamond() {
        let p = Exponent::TWO;
        let xi = LpVector::counting(p, [(0, 1.0), (2, 3.0)]);
        let eta = LpVector::counting(p, [(1, -1.0)]);
        let w = amplify_bilinear(&BilinearMap::scalar(), &elementary(&xi, &[1.0]), &elementary(&eta, &[1.0])).unwrap();
        let d = crate::diamond::diamond_base(&xi, &eta).unwrap();
        assert_eq!(w, AmplifiedElement::elementary(&d, &[1.0]));
        let zero = AmplifiedElement::zero(p, 1);
        assert!(amplify_bilinear(&BilinearMap::scalar(), &zero, &elementary(&eta, &[1.0])).unwrap().is_zero());
    }

    #[test]
    fn product_functional_norm_is_product_of_norms() {
        let e = QuantizedSpace::max(FiniteNormedSpace::lq(Exponent::new(4.0).unwrap(), 3));
        let f = QuantizedSpace::min(FiniteNormedSpace::lq(Exponent::ONE, 2));
        let c = QuantizedSpace::min(FiniteNormedSpace::lq(Exponent::TWO, 1));
        let (fv, gv) = ([1.0, -2.0, 0.5], [3.0, 1.0]);
        let rho = BilinearMap::product_functional(&fv, &gv);
        let b = lbounded_norm_bilinear(&rho, &e, &f, &c, &cfg()).unwrap();
        let want = e.space.dual_norm_value(&fv) * f.space.dual_norm_value(&gv);
        assert!((b.lower - want).abs() <= 1e-9 * want && (b.upper - want).abs() <= 1e-9 * want, "{b:?} vs {want}");
    }
}
