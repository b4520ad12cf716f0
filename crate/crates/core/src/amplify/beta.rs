use nalgebra::DMatrix;

use super::element::AmplifiedElement;
use super::projective::{projective_exact, projective_lower, search_decomposition, SearchEffort};
use super::quant::{check_dim, AmplifiedNorm, Quantization, QuantizedSpace};
use crate::bracket::NormBracket;
use crate::error::Result;
use crate::exponent::Exponent;
use crate::normed::{FiniteNormedSpace, NormKind};
use crate::search::SearchConfig;

/// Bracket on `‖β(U)‖` in `E ⊗_π (L F)`, with the decomposition
/// `U = Σ_k x_k ⊗ v_k` (`x_k ∈ E`, `v_k ∈ L F`) behind the upper end.
#[derive(Clone, Debug)]
pub struct BetaResult {
    pub bracket: NormBracket,
    pub terms: Vec<(Vec<f64>, AmplifiedElement)>,
}

/// `U` over coordinates `(j, l)` of `E ⊗ F` viewed as a `dim E × (window · dim F)`
/// matrix, i.e. as an element of `E ⊗ L F`.
fn beta_matrix(u: &AmplifiedElement, de: usize, df: usize) -> (Vec<u64>, DMatrix<f64>) {
    let window = u.window();
    let m = DMatrix::from_fn(de, window.len() * df, |j, c| u.rows()[&window[c / df]][j * df + c % df]);
    (window, m)
}

/// `Σ_n α_n U_n` as a `dim E × dim F` matrix.
fn base_contraction(u: &AmplifiedElement, window: &[u64], alpha: &[f64], de: usize, df: usize) -> DMatrix<f64> {
    DMatrix::from_fn(de, df, |j, l| window.iter().zip(alpha).map(|(n, a)| a * u.rows()[n][j * df + l]).sum())
}

/// `(f ⊗ id) U ∈ L F`.
fn left_contraction(u: &AmplifiedElement, f: &[f64], de: usize, df: usize) -> AmplifiedElement {
    let phi = DMatrix::from_fn(df, de * df, |l, jl| if jl % df == l { f[jl / df] } else { 0.0 });
    u.apply_linear(&phi).expect("dimensions agree")
}

pub fn beta_norm(
    u: &AmplifiedElement,
    left: &FiniteNormedSpace,
    right: &QuantizedSpace,
    cfg: &SearchConfig,
) -> Result<BetaResult> {
    let (de, df) = (left.dim(), right.dim());
    check_dim(u, de * df)?;
    if u.is_zero() {
        return Ok(BetaResult { bracket: NormBracket::zero(), terms: vec![] });
    }
    let p = u.p();
    let (window, m) = beta_matrix(u, de, df);
    let oracle = AmplifiedNorm { quant: right, p, window: window.clone(), cfg: *cfg };

    // ℓ1(s) ⊗_π X = ℓ1(s; X): the row decomposition is optimal.
    if let NormKind::Lq { q, scales } = left.kind() {
        if q.is_one() {
            let mut lower = 0.0;
            let mut upper = 0.0;
            let mut terms = Vec::new();
            for j in 0..de {
                let v = oracle.element(&m.row(j).iter().copied().collect::<Vec<_>>());
                if v.is_zero() {
                    continue;
                }
                let b = right.norm(&v, cfg);
                lower += scales[j] * b.lower;
                upper += scales[j] * b.upper;
                let mut e = vec![0.0; de];
                e[j] = 1.0;
                terms.push((e, v));
            }
            return Ok(BetaResult { bracket: NormBracket::new(lower, upper), terms });
        }
    }

    let effort = match right.quant {
        Quantization::Min => SearchEffort { restarts: cfg.restarts.min(3), grid: 8, sweeps: 3, seed: cfg.seed },
        Quantization::Max => SearchEffort::light(cfg),
    };
    let (upper, dec) = search_decomposition(&m, left, &oracle, effort);
    let terms: Vec<(Vec<f64>, AmplifiedElement)> =
        dec.terms.iter().map(|(x, y)| (x.clone(), oracle.element(y))).collect();

    let mut lower = 0.0f64;
    // id_E ⊗ α ⊗ id_F maps E ⊗_π L F contractively onto E ⊗_π F.
    let dual_p = p.conjugate();
    for alpha in base_functionals(u, &window, p) {
        let w = base_contraction(u, &window, &alpha, de, df);
        let na = dual_p.norm(&alpha);
        if na == 0.0 {
            continue;
        }
        let v = projective_exact(&w, left, &right.space)
            .unwrap_or_else(|| projective_lower(&w, left, &right.space, None, cfg));
        lower = lower.max(v / na);
    }
    // f ⊗ id_{LF} is contractive for ‖f‖_{E*} ≤ 1.
    let mut fs: Vec<Vec<f64>> = (0..de)
        .map(|j| {
            let mut e = vec![0.0; de];
            e[j] = 1.0;
            e
        })
        .collect();
    fs.extend(dec.terms.iter().map(|(x, _)| left.norming_functional(x)));
    for f in fs {
        let nf = left.dual_norm_value(&f);
        if nf > 0.0 {
            lower = lower.max(right.norm(&left_contraction(u, &f, de, df), cfg).lower / nf);
        }
    }
    Ok(BetaResult { bracket: NormBracket::new(lower.min(upper), upper), terms })
}

/// Candidate functionals on the base window: coordinate functionals, the
/// Hölder dual of the row-size profile, and the Hölder dual of the leading
/// left singular vector.
pub(crate) fn base_functionals(u: &AmplifiedElement, window: &[u64], p: Exponent) -> Vec<Vec<f64>> {
    let n = window.len();
    let mut out: Vec<Vec<f64>> = (0..n)
        .map(|r| {
            let mut e = vec![0.0; n];
            e[r] = 1.0;
            e
        })
        .collect();
    if n > 1 {
        let lp = FiniteNormedSpace::lq(p, n);
        let sizes: Vec<f64> = window.iter().map(|i| u.rows()[i].iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
        out.push(lp.norming_functional(&sizes));
        let m = DMatrix::from_fn(n, u.dim(), |r, c| u.rows()[&window[r]][c]);
        let svd = m.svd(true, false);
        if let Some(left) = svd.u {
            let k = svd.singular_values.imax();
            let lead: Vec<f64> = left.column(k).iter().copied().collect();
            out.push(lp.norming_functional(&lead));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::LpVector;

    fn cfg() -> SearchConfig {
        SearchConfig::with_seed(4)
    }

    #[test]
    fn elementary_is_cross_norm() {
        let p = Exponent::new(3.0).unwrap();
        let e = FiniteNormedSpace::lq(Exponent::new(1.5).unwrap(), 2);
        let f = QuantizedSpace::min(FiniteNormedSpace::lq(Exponent::TWO, 2));
        let xi = LpVector::counting(p, [(0, 1.0), (3, -2.0)]);
        let (x, y) = ([1.0, -0.5], [2.0, 1.0]);
        let xy: Vec<f64> = x.iter().flat_map(|a| y.iter().map(move |b| a * b)).collect();
        let u = AmplifiedElement::elementary(&xi, &xy);
        let want = xi.norm() * e.norm(&x) * f.space.norm(&y);
        let b = beta_norm(&u, &e, &f, &cfg()).unwrap().bracket;
        assert!((b.lower - want).abs() < 1e-9 * want && (b.upper - want).abs() < 1e-9 * want, "{b:?} vs {want}");
    }

    #[test]
    fn underlying_projective_norm_for_hilbert_factors() {
        let p = Exponent::TWO;
        let l2 = FiniteNormedSpace::lq(p, 2);
        let f = QuantizedSpace::min(l2.clone());
        let u = AmplifiedElement::elementary(&LpVector::basis(p, 0), &[1.0, 0.0, 0.0, 1.0]);
        let res = beta_norm(&u, &l2, &f, &cfg()).unwrap();
        assert!(res.bracket.contains(2.0, 1e-9), "{:?}", res.bracket);
        let mut total = AmplifiedElement::zero(p, 4);
        for (x, v) in &res.terms {
            let xv = AmplifiedElement::new(
                p,
                4,
                v.rows().iter().map(|(&i, r)| (i, x.iter().flat_map(|a| r.iter().map(move |b| a * b)).collect())),
            )
            .unwrap();
            total = total.add(&xv).unwrap();
        }
        assert!(total.max_abs_diff(&u) < 1e-10);
    }

    #[test]
    fn zero_is_zero() {
        let l2 = FiniteNormedSpace::lq(Exponent::TWO, 2);
        let u = AmplifiedElement::zero(Exponent::TWO, 4);
        let b = beta_norm(&u, &l2, &QuantizedSpace::max(l2.clone()), &cfg()).unwrap().bracket;
        assert_eq!(b, NormBracket::zero());
    }
}
