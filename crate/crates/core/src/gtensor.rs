//! The general L-tensor norm
//! `‖U‖_L = inf Σ_k ‖a_k‖ ‖u_k‖ ‖v_k‖` over representations `U = Σ_k a_k · (u_k ◇ v_k)`.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::amplify::projective::{projective_exact, projective_lower, search_decomposition, SearchEffort};
use crate::amplify::{
    base_functionals, beta_norm, check_dim, AmplifiedElement, AmplifiedNorm, Quantization, QuantizedSpace,
};
use crate::bracket::NormBracket;
use crate::diamond::diamond_amp;
use crate::error::{Error, Result};
use crate::exponent::Exponent;
use crate::lp::{LpOperator, LpVector};
use crate::measure::{pairing, unpairing};
use crate::normed::{mixed_norm_witness, FiniteNormedSpace};
use crate::pctensor::lq_product_norm;
use crate::search::SearchConfig;

/// The two quantized factors of `E ⊗ F`. Coordinates of the tensor
/// product are ordered `(j, l) ↦ j · dim F + l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorFactors {
    pub left: QuantizedSpace,
    pub right: QuantizedSpace,
}

impl TensorFactors {
    pub fn new(left: QuantizedSpace, right: QuantizedSpace) -> Self {
        TensorFactors { left, right }
    }

    pub fn dim(&self) -> usize {
        self.left.dim() * self.right.dim()
    }

    /// Coordinates of `x ⊗ y`.
    pub fn tensor(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        x.iter().flat_map(|a| y.iter().map(move |b| a * b)).collect()
    }

    /// Both factors Min-quantized `Lq` with a common exponent.
    pub fn min_lq_exponent(&self) -> Option<Exponent> {
        let (l, r) = (&self.left, &self.right);
        if l.quant != Quantization::Min || r.quant != Quantization::Min {
            return None;
        }
        match (l.space.exponent(), r.space.exponent()) {
            (Some(a), Some(b)) if a == b => Some(a),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RepTerm {
    pub a: LpOperator,
    pub u: AmplifiedElement,
    pub v: AmplifiedElement,
}

/// `U = Σ_k a_k · (u_k ◇ v_k)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Representation {
    pub terms: Vec<RepTerm>,
}

impl Representation {
    pub fn value(&self, p: Exponent, dim: usize) -> Result<AmplifiedElement> {
        let mut total = AmplifiedElement::zero(p, dim);
        for t in &self.terms {
            total = total.add(&diamond_amp(&t.u, &t.v)?.module_action(&t.a)?)?;
        }
        Ok(total)
    }

    /// Largest entrywise deviation of the represented value from `target`.
    pub fn residual(&self, target: &AmplifiedElement) -> Result<f64> {
        Ok(self.value(target.p(), target.dim())?.max_abs_diff(target))
    }

    pub fn cost(&self, factors: &TensorFactors, cfg: &SearchConfig) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.a.norm_bracket(&cfg.opnorm).upper
                    * factors.left.norm(&t.u, cfg).upper
                    * factors.right.norm(&t.v, cfg).upper
            })
            .sum()
    }

    pub fn concat(&self, other: &Representation) -> Representation {
        Representation { terms: self.terms.iter().chain(&other.terms).cloned().collect() }
    }

    /// Representation of `b · U` obtained by composing every `a_k` with `b`.
    pub fn transported(&self, b: &LpOperator) -> Result<Representation> {
        let terms = self
            .terms
            .iter()
            .map(|t| Ok(RepTerm { a: b.compose(&t.a)?, u: t.u.clone(), v: t.v.clone() }))
            .collect::<Result<_>>()?;
        Ok(Representation { terms })
    }

    /// Folds `a(u ◇ v_1) + a(u ◇ v_2)` into `a(u ◇ (v_1 + v_2))`, and likewise on the right.
    fn merged(&self) -> Representation {
        let mut out: Vec<RepTerm> = Vec::new();
        for t in &self.terms {
            if let Some(s) = out.iter_mut().find(|s| s.a == t.a && s.u == t.u) {
                s.v = s.v.add(&t.v).expect("same factor space");
            } else if let Some(s) = out.iter_mut().find(|s| s.a == t.a && s.v == t.v) {
                s.u = s.u.add(&t.u).expect("same factor space");
            } else {
                out.push(t.clone());
            }
        }
        out.retain(|t| !t.u.is_zero() && !t.v.is_zero());
        Representation { terms: out }
    }
}

fn unit(n: usize, k: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[k] = 1.0;
    e
}

fn check_factors(u: &AmplifiedElement, factors: &TensorFactors) -> Result<()> {
    check_dim(u, factors.dim())
}

/// One term per nonzero coordinate column `ξ_{jl}`:
/// `a_{jl} : e_0 ↦ ξ_{jl}`, `u = e_0 ⊗ e_j`, `v = e_0 ⊗ f_l`.
pub fn canonical_representation(u: &AmplifiedElement, factors: &TensorFactors) -> Result<Representation> {
    check_factors(u, factors)?;
    let (de, df) = (factors.left.dim(), factors.right.dim());
    let p = u.p();
    let e0 = LpVector::basis(p, 0);
    let mut terms = Vec::new();
    for j in 0..de {
        for l in 0..df {
            let col = u.column(j * df + l);
            if col.is_empty() {
                continue;
            }
            let a = LpOperator::from_triplets(p, col.iter().map(|(&i, &v)| (i, pairing(0, 0), v)));
            terms.push(RepTerm {
                a,
                u: AmplifiedElement::elementary(&e0, &unit(de, j)),
                v: AmplifiedElement::elementary(&e0, &unit(df, l)),
            });
        }
    }
    Ok(Representation { terms })
}

/// `U` written through the pairing as a matrix indexed by
/// `(m, j) × (n, l)` where each support atom is `pairing(m, n)`.
fn diamond_reshape(u: &AmplifiedElement, de: usize, df: usize) -> (Vec<u64>, Vec<u64>, DMatrix<f64>) {
    let pairs: Vec<(u64, u64)> = u.window().into_iter().map(unpairing).collect();
    let ms: Vec<u64> = pairs.iter().map(|p| p.0).collect::<BTreeSet<_>>().into_iter().collect();
    let ns: Vec<u64> = pairs.iter().map(|p| p.1).collect::<BTreeSet<_>>().into_iter().collect();
    let mut mat = DMatrix::zeros(ms.len() * de, ns.len() * df);
    for (z, row) in u.rows() {
        let (m, n) = unpairing(*z);
        let (mi, ni) = (ms.binary_search(&m).unwrap(), ns.binary_search(&n).unwrap());
        for j in 0..de {
            for l in 0..df {
                mat[(mi * de + j, ni * df + l)] = row[j * df + l];
            }
        }
    }
    (ms, ns, mat)
}

/// Representations with `a = id`: `U = Σ u_k ◇ v_k` read off a decomposition
/// of the reshaped matrix.
fn diamond_factored(u: &AmplifiedElement, factors: &TensorFactors, cfg: &SearchConfig) -> Representation {
    let (de, df) = (factors.left.dim(), factors.right.dim());
    let p = u.p();
    let (ms, ns, mat) = diamond_reshape(u, de, df);
    let left = AmplifiedNorm { quant: &factors.left, p, window: ms.clone(), cfg: *cfg };
    let right = AmplifiedNorm { quant: &factors.right, p, window: ns.clone(), cfg: *cfg };
    let effort = SearchEffort { restarts: cfg.restarts.min(2), grid: 6, sweeps: 2, seed: cfg.seed ^ 0xd1a };
    let (_, dec) = search_decomposition(&mat, &left, &right, effort);
    let id = LpOperator::identity(
        p,
        ms.iter().flat_map(|&m| ns.iter().map(move |&n| pairing(m, n))).collect::<BTreeSet<_>>().into_iter().collect(),
    );
    let terms =
        dec.terms.iter().map(|(x, y)| RepTerm { a: id.clone(), u: left.element(x), v: right.element(y) }).collect();
    Representation { terms }
}

/// Swaps the coordinate order `(j, l) ↦ (l, j)`.
fn swap_coordinates(u: &AmplifiedElement, de: usize, df: usize) -> AmplifiedElement {
    AmplifiedElement::new(
        u.p(),
        de * df,
        u.rows().iter().map(|(&i, r)| (i, (0..df * de).map(|lj| r[(lj % de) * df + lj / de]).collect())),
    )
    .expect("finite")
}

/// `T : e_{pairing(0,n)} ↦ e_n` applied to `(e_0 ⊗ x_k) ◇ v_k`, built from a
/// decomposition `U = Σ x_k ⊗ v_k` in `E ⊗ L F`.
fn left_construction(u: &AmplifiedElement, factors: &TensorFactors, cfg: &SearchConfig) -> Result<Representation> {
    let p = u.p();
    let res = beta_norm(u, &factors.left.space, &factors.right, cfg)?;
    let atoms: BTreeSet<u64> = res.terms.iter().flat_map(|(_, v)| v.window()).collect();
    let t = LpOperator::from_triplets(p, atoms.iter().map(|&n| (n, pairing(0, n), 1.0)));
    let e0 = LpVector::basis(p, 0);
    let terms = res
        .terms
        .into_iter()
        .map(|(x, v)| RepTerm { a: t.clone(), u: AmplifiedElement::elementary(&e0, &x), v })
        .collect();
    Ok(Representation { terms }.merged())
}

/// Mirror image: `T' : e_{pairing(m,0)} ↦ e_m` applied to `u_k ◇ (e_0 ⊗ y_k)`.
fn right_construction(u: &AmplifiedElement, factors: &TensorFactors, cfg: &SearchConfig) -> Result<Representation> {
    let p = u.p();
    let (de, df) = (factors.left.dim(), factors.right.dim());
    let swapped = swap_coordinates(u, de, df);
    let res = beta_norm(&swapped, &factors.right.space, &factors.left, cfg)?;
    let atoms: BTreeSet<u64> = res.terms.iter().flat_map(|(_, w)| w.window()).collect();
    let t = LpOperator::from_triplets(p, atoms.iter().map(|&m| (m, pairing(m, 0), 1.0)));
    let e0 = LpVector::basis(p, 0);
    let terms = res
        .terms
        .into_iter()
        .map(|(y, w)| RepTerm { a: t.clone(), u: w, v: AmplifiedElement::elementary(&e0, &y) })
        .collect();
    Ok(Representation { terms }.merged())
}

/// Best certified representation cost among the constructions above.
pub fn general_norm_upper(
    u: &AmplifiedElement,
    factors: &TensorFactors,
    cfg: &SearchConfig,
) -> Result<(f64, Representation)> {
    check_factors(u, factors)?;
    if u.is_zero() {
        return Ok((0.0, Representation::default()));
    }
    let canonical = canonical_representation(u, factors)?;
    let mut best = (canonical.cost(factors, cfg), canonical);
    if cfg.term_cap == 0 || cfg.restarts == 0 {
        return Ok(best);
    }
    let mut candidates = vec![diamond_factored(u, factors, cfg)];
    candidates.push(left_construction(u, factors, cfg)?);
    candidates.push(right_construction(u, factors, cfg)?);
    let scale = u.rows().values().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    for rep in candidates {
        if rep.terms.is_empty() {
            continue;
        }
        let residual = rep.residual(u)?;
        debug_assert!(residual <= 1e-10 * scale.max(1.0), "representation off by {residual}");
        if residual > 1e-10 * scale.max(1.0) {
            continue;
        }
        let cost = rep.cost(factors, cfg);
        if cost < best.0 {
            best = (cost, rep);
        }
    }
    Ok(best)
}

/// `(f ⊗ g)_∞ U` as a base vector.
fn product_contraction(u: &AmplifiedElement, f: &[f64], g: &[f64]) -> LpVector {
    let fg: Vec<f64> = f.iter().flat_map(|a| g.iter().map(move |b| a * b)).collect();
    u.apply_functional(&fg)
}

/// `max ‖(f × g)_∞ U‖_p / (‖f‖ ‖g‖)` by alternating ascent; each product
/// functional is L-bounded with norm `‖f‖ ‖g‖`.
pub(crate) fn product_functional_lower(u: &AmplifiedElement, factors: &TensorFactors, cfg: &SearchConfig) -> f64 {
    let (e, f) = (&factors.left.space, &factors.right.space);
    let (de, df) = (e.dim(), f.dim());
    let window = u.window();
    let base = FiniteNormedSpace::lq(u.p(), window.len());
    let (e_dual, f_dual) = (e.dual(), f.dual());
    // Section of U against a functional on one side, as a window × dim matrix.
    let left_section = |g: &[f64]| {
        DMatrix::from_fn(window.len(), de, |r, j| (0..df).map(|l| g[l] * u.rows()[&window[r]][j * df + l]).sum())
    };
    let right_section = |fv: &[f64]| {
        DMatrix::from_fn(window.len(), df, |r, l| (0..de).map(|j| fv[j] * u.rows()[&window[r]][j * df + l]).sum())
    };
    let mut starts: Vec<Vec<f64>> = (0..df).map(|l| unit(df, l)).collect();
    starts.push(vec![1.0; df]);
    let mut best = 0.0f64;
    let fast = cfg.fast_opnorm();
    for mut g in starts {
        for _ in 0..25 {
            let (_, fv) = mixed_norm_witness(&left_section(&g), &e_dual, &base, &fast);
            let (_, g_next) = mixed_norm_witness(&right_section(&fv), &f_dual, &base, &fast);
            let denom = e_dual.norm(&fv) * f_dual.norm(&g_next);
            if denom == 0.0 {
                break;
            }
            let val = product_contraction(u, &fv, &g_next).norm() / denom;
            let improved = val > best * (1.0 + 1e-12);
            best = best.max(val);
            g = g_next;
            if !improved {
                break;
            }
        }
    }
    best
}

/// When a factor is Max-quantized the underlying norm of `E ⊗_L F` is the
/// projective one, so `‖U‖_L ≥ ‖Σ α_n U_n‖_π / ‖α‖_{p'}`.
fn contraction_lower(u: &AmplifiedElement, factors: &TensorFactors, cfg: &SearchConfig) -> f64 {
    let (e, f) = (&factors.left.space, &factors.right.space);
    let (de, df) = (e.dim(), f.dim());
    let window = u.window();
    let dual_p = u.p().conjugate();
    let mut best = 0.0f64;
    for alpha in base_functionals(u, &window, u.p()) {
        let na = dual_p.norm(&alpha);
        if na == 0.0 {
            continue;
        }
        let w =
            DMatrix::from_fn(de, df, |j, l| window.iter().zip(&alpha).map(|(n, a)| a * u.rows()[n][j * df + l]).sum());
        let v = projective_exact(&w, e, f).unwrap_or_else(|| projective_lower(&w, e, f, None, cfg));
        best = best.max(v / na);
    }
    best
}

pub fn general_norm_lower(u: &AmplifiedElement, factors: &TensorFactors, cfg: &SearchConfig) -> Result<f64> {
    check_factors(u, factors)?;
    if u.is_zero() {
        return Ok(0.0);
    }
    let mut lower = product_functional_lower(u, factors, cfg);
    if factors.left.quant == Quantization::Max || factors.right.quant == Quantization::Max {
        lower = lower.max(contraction_lower(u, factors, cfg));
    }
    // ‖·‖_L dominates the p-convex norm, which the operator identification computes.
    if let Some(q) = factors.min_lq_exponent() {
        if u.p().is_interior() && q == u.p().conjugate() {
            lower = lower.max(lq_product_norm(u, factors, cfg)?.lower);
        }
    }
    Ok(lower)
}

/// `‖U‖_L` as a bracket, with the representation behind the upper end.
#[derive(Clone, Debug, Serialize)]
pub struct GeneralNorm {
    pub bracket: NormBracket,
    pub representation: Representation,
}

pub fn general_norm(u: &AmplifiedElement, factors: &TensorFactors, cfg: &SearchConfig) -> Result<GeneralNorm> {
    let (upper, representation) = general_norm_upper(u, factors, cfg)?;
    let lower = general_norm_lower(u, factors, cfg)?;
    Ok(GeneralNorm { bracket: NormBracket::new(lower.min(upper), upper), representation })
}

/// For a Max-quantized left factor, `‖U‖_L` equals the projective norm of
/// `β(U)` in `E ⊗_π L F`.
pub fn maxleft_exact(u: &AmplifiedElement, factors: &TensorFactors, cfg: &SearchConfig) -> Result<NormBracket> {
    if factors.left.quant != Quantization::Max {
        return Err(Error::WrongQuantization { expected: "max".into(), found: "min".into() });
    }
    Ok(beta_norm(u, &factors.left.space, &factors.right, cfg)?.bracket)
}
