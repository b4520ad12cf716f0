//! The p-convex tensor norm
//! `‖U‖_{pL} = inf ‖a‖ (Σ_k ‖u_k‖^p ‖v_k‖^p)^{1/p}` over `U = a · Σ_k I_k · (u_k ◇ v_k)`
//! with pairwise disjoint proper isometries `I_k`.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::amplify::{min_norm, AmplifiedElement, QuantizedSpace};
use crate::bracket::NormBracket;
use crate::diamond::diamond_amp;
use crate::error::{Error, Result};
use crate::exponent::Exponent;
use crate::gtensor::{
    canonical_representation, general_norm_upper, product_functional_lower, Representation, TensorFactors,
};
use crate::lp::{proper_projection, LpOperator, ProperIsometry};
use crate::measure::{pairing, product_index, product_space};
use crate::normed::FiniteNormedSpace;
use crate::search::SearchConfig;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PTerm {
    pub isometry: ProperIsometry,
    pub u: AmplifiedElement,
    pub v: AmplifiedElement,
    /// Certified upper bound on `‖u‖ ‖v‖`.
    pub bound: f64,
}

/// `U = a · Σ_k I_k · (u_k ◇ v_k)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PRepresentation {
    pub a: LpOperator,
    /// Certified upper bound on `‖a‖`.
    pub a_bound: f64,
    pub terms: Vec<PTerm>,
}

/// `I · u`, moving every base row through the isometry.
fn isometry_action(iso: &ProperIsometry, u: &AmplifiedElement) -> AmplifiedElement {
    AmplifiedElement::new(u.p(), u.dim(), u.rows().iter().map(|(&i, r)| (iso.map_index(i), r.clone())))
        .expect("rows stay finite")
}

fn conjugate_combine(p: Exponent, values: impl IntoIterator<Item = f64>) -> f64 {
    p.conjugate().combine(values)
}

impl PRepresentation {
    pub fn zero(p: Exponent) -> Self {
        PRepresentation { a: LpOperator::zero(p), a_bound: 0.0, terms: vec![] }
    }

    pub fn p(&self) -> Exponent {
        self.a.p()
    }

    pub fn isometries_disjoint(&self) -> bool {
        self.terms
            .iter()
            .enumerate()
            .all(|(i, s)| self.terms[i + 1..].iter().all(|t| s.isometry.is_disjoint(&t.isometry)))
    }

    /// `Σ_k I_k · (u_k ◇ v_k)`.
    pub fn inner_value(&self, dim: usize) -> Result<AmplifiedElement> {
        let mut total = AmplifiedElement::zero(self.p(), dim);
        for t in &self.terms {
            total = total.add(&isometry_action(&t.isometry, &diamond_amp(&t.u, &t.v)?))?;
        }
        Ok(total)
    }

    pub fn value(&self, dim: usize) -> Result<AmplifiedElement> {
        self.inner_value(dim)?.module_action(&self.a)
    }

    pub fn residual(&self, target: &AmplifiedElement) -> Result<f64> {
        Ok(self.value(target.dim())?.max_abs_diff(target))
    }

    /// `(Σ_k (‖u_k‖ ‖v_k‖)^p)^{1/p}` from the stored bounds.
    pub fn term_mass(&self) -> f64 {
        self.p().combine(self.terms.iter().map(|t| t.bound))
    }

    pub fn cost(&self) -> f64 {
        if self.terms.is_empty() {
            return 0.0;
        }
        self.a_bound * self.term_mass()
    }

    /// `a / s` together with `s · u_k`; the value is unchanged.
    pub fn rescaled(&self, s: f64) -> PRepresentation {
        PRepresentation {
            a: self.a.scale(1.0 / s),
            a_bound: self.a_bound / s,
            terms: self.terms.iter().map(|t| PTerm { u: t.u.scale(s), bound: t.bound * s, ..t.clone() }).collect(),
        }
    }

    /// Rescales so that `‖a‖^q = Σ_k (‖u_k‖ ‖v_k‖)^p`; at `p = 1` so that
    /// `‖a‖ = 1`, at `p = ∞` so that the largest term product is one.
    pub fn balanced(&self) -> PRepresentation {
        let (a, mass) = (self.a_bound, self.term_mass());
        if a == 0.0 || mass == 0.0 {
            return self.clone();
        }
        let p = self.p();
        let s = if p.is_one() {
            a
        } else if p.is_infinite() {
            1.0 / mass
        } else {
            // (a/s)^q = (s·mass)^p with 1/p + 1/q = 1 gives s = a^{1/p} / mass^{1/q}.
            let (pv, qv) = (p.value(), p.conjugate().value());
            a.powf(1.0 / pv) / mass.powf(1.0 / qv)
        };
        self.rescaled(s)
    }

    /// Representation of `b · U`, with `‖b a‖ ≤ ‖b‖ ‖a‖`.
    pub fn transported(&self, b: &LpOperator, b_bound: f64) -> Result<PRepresentation> {
        Ok(PRepresentation { a: b.compose(&self.a)?, a_bound: b_bound * self.a_bound, terms: self.terms.clone() })
    }

    fn tighten(mut self, cfg: &SearchConfig) -> Self {
        if !self.terms.is_empty() {
            self.a_bound = self.a_bound.min(self.a.norm_bracket(&cfg.opnorm).upper);
        }
        self
    }
}

fn term_bound(u: &AmplifiedElement, v: &AmplifiedElement, factors: &TensorFactors, cfg: &SearchConfig) -> f64 {
    factors.left.norm(u, cfg).upper * factors.right.norm(v, cfg).upper
}

/// `a_k I_k^⋆` for the isometry `I_k`, on the columns `a_k` reads.
fn through_star(a: &LpOperator, iso: &ProperIsometry) -> Result<LpOperator> {
    a.compose(&iso.star_operator(a.p(), a.dom()))
}

fn convert(
    rep: &Representation,
    factors: &TensorFactors,
    p: Exponent,
    cfg: &SearchConfig,
    balance: bool,
) -> Result<PRepresentation> {
    let mut a = LpOperator::zero(p);
    let mut scaled_norms = Vec::new();
    let mut terms = Vec::new();
    for t in &rep.terms {
        let alpha = t.a.norm_bracket(&cfg.opnorm).upper;
        let c = term_bound(&t.u, &t.v, factors, cfg);
        if alpha == 0.0 || c == 0.0 || t.u.is_zero() || t.v.is_zero() {
            continue;
        }
        // Hölder balancing: t^{p+q} = α^q / c^p makes the bound Σ α_k c_k.
        let scale = if !balance {
            1.0
        } else if p.is_one() {
            alpha
        } else if p.is_infinite() {
            1.0 / c
        } else {
            let (pv, qv) = (p.value(), p.conjugate().value());
            ((qv * alpha.ln() - pv * c.ln()) / (pv + qv)).exp()
        };
        let iso = ProperIsometry::new(terms.len() as u64);
        a = a.add(&through_star(&t.a.scale(1.0 / scale), &iso)?)?;
        scaled_norms.push(alpha / scale);
        terms.push(PTerm { isometry: iso, u: t.u.scale(scale), v: t.v.clone(), bound: c * scale });
    }
    if terms.is_empty() {
        return Ok(PRepresentation::zero(p));
    }
    let a_bound = conjugate_combine(p, scaled_norms);
    Ok(PRepresentation { a, a_bound, terms }.tighten(cfg))
}

/// `Σ a_k (u_k ◇ v_k) = (Σ_k a_k I_k^⋆) · Σ_l I_l · (u_l ◇ v_l)` with `I_k = I_{[k]}`.
pub fn canonical_prepresentation(
    rep: &Representation,
    factors: &TensorFactors,
    p: Exponent,
    cfg: &SearchConfig,
) -> Result<PRepresentation> {
    convert(rep, factors, p, cfg, false)
}

/// As [`canonical_prepresentation`], with the terms rescaled so that the
/// cost does not exceed `Σ_k ‖a_k‖ ‖u_k‖ ‖v_k‖`.
pub fn balanced_prepresentation(
    rep: &Representation,
    factors: &TensorFactors,
    p: Exponent,
    cfg: &SearchConfig,
) -> Result<PRepresentation> {
    convert(rep, factors, p, cfg, true)
}

fn prefixed(terms: &[PTerm], head: u64) -> impl Iterator<Item = PTerm> + '_ {
    let outer = ProperIsometry::new(head);
    terms.iter().map(move |t| PTerm { isometry: outer.then_inner(&t.isometry), ..t.clone() })
}

/// Representation of `U + V` as `(a I_U^⋆ + b I_V^⋆) · (Σ I_U I'_k (…) + Σ I_V I''_l (…))`
/// with both inputs balanced first. Its cost is at most `cost(U) + cost(V)`.
pub fn merge_sum(first: &PRepresentation, second: &PRepresentation, cfg: &SearchConfig) -> Result<PRepresentation> {
    let p = first.p();
    if first.terms.is_empty() {
        return Ok(second.clone());
    }
    if second.terms.is_empty() {
        return Ok(first.clone());
    }
    let (x, y) = (first.balanced(), second.balanced());
    let (iu, iv) = (ProperIsometry::new(0), ProperIsometry::new(1));
    let a = through_star(&x.a, &iu)?.add(&through_star(&y.a, &iv)?)?;
    let terms = prefixed(&x.terms, 0).chain(prefixed(&y.terms, 1)).collect();
    let a_bound = conjugate_combine(p, [x.a_bound, y.a_bound]);
    Ok(PRepresentation { a, a_bound, terms }.tighten(cfg))
}

/// Representation of `U + V` for `U = P_1 U`, `V = P_2 V` with disjoint masks:
/// `(P_1 a I_U^⋆ + P_2 b I_V^⋆)` has norm at most `max(‖a‖, ‖b‖)`.
pub fn merge_orthogonal(
    first: &PRepresentation,
    second: &PRepresentation,
    first_mask: &[u64],
    second_mask: &[u64],
    cfg: &SearchConfig,
) -> Result<PRepresentation> {
    if first_mask.iter().any(|i| second_mask.contains(i)) {
        return Err(Error::precondition("supports are not orthogonal"));
    }
    let p = first.p();
    let normalize = |r: &PRepresentation, mask: &[u64]| -> Result<PRepresentation> {
        let projected = r.transported(&proper_projection(p, mask), 1.0)?;
        Ok(if projected.a_bound > 0.0 { projected.rescaled(projected.a_bound) } else { projected })
    };
    let (x, y) = (normalize(first, first_mask)?, normalize(second, second_mask)?);
    let (iu, iv) = (ProperIsometry::new(0), ProperIsometry::new(1));
    let a = through_star(&x.a, &iu)?.add(&through_star(&y.a, &iv)?)?;
    let terms: Vec<PTerm> = prefixed(&x.terms, 0).chain(prefixed(&y.terms, 1)).collect();
    let a_bound = if terms.is_empty() { 0.0 } else { x.a_bound.max(y.a_bound) };
    Ok(PRepresentation { a, a_bound, terms }.tighten(cfg))
}

fn lq_product_exponent(u: &AmplifiedElement, factors: &TensorFactors) -> Result<Exponent> {
    let p = u.p();
    if !p.is_interior() {
        return Err(Error::OutOfRange(format!("the Lq identification needs 1 < p < ∞, got p = {}", p.value())));
    }
    let q = factors
        .min_lq_exponent()
        .ok_or_else(|| Error::precondition("both factors must be min-quantized Lq spaces with one exponent"))?;
    if (q.value() - p.conjugate().value()).abs() > 1e-12 {
        return Err(Error::ExponentMismatch { left: q.value(), right: p.conjugate().value() });
    }
    Ok(q)
}

fn factor_weights(factors: &TensorFactors) -> (Vec<f64>, Vec<f64>) {
    let w = |s: &FiniteNormedSpace| s.weights().expect("Lq factor");
    (w(&factors.left.space), w(&factors.right.space))
}

/// `‖U‖_{pL}` for min-quantized `Lq(Y) ⊗ Lq(Z)`, `q = p'`: the injective norm
/// of the image of `U` under `x ⊗ y ↦ x(s) y(t)` in `Lq(Y × Z)`.
pub fn lq_product_norm(u: &AmplifiedElement, factors: &TensorFactors, cfg: &SearchConfig) -> Result<NormBracket> {
    let q = lq_product_exponent(u, factors)?;
    let (wy, wz) = factor_weights(factors);
    let product: Vec<f64> = wy.iter().flat_map(|a| wz.iter().map(move |b| a * b)).collect();
    Ok(min_norm(u, &FiniteNormedSpace::weighted_lq(q, &product)?, &cfg.opnorm))
}

/// `U = Σ_{k,l} ξ_{kl} ⊗ y_k ⊗ z_l` where `y_k`, `z_l` are normalized indicators
/// of pairwise disjoint atom blocks. The coefficients `ξ_{kl}` are stored as an
/// element with `blocks_left · blocks_right` coordinates, `(k, l) ↦ k · L + l`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepForm {
    pub q: Exponent,
    pub left_weights: Vec<f64>,
    pub right_weights: Vec<f64>,
    pub left_blocks: Vec<Vec<usize>>,
    pub right_blocks: Vec<Vec<usize>>,
    pub coeffs: AmplifiedElement,
}

fn check_blocks(blocks: &[Vec<usize>], dim: usize) -> Result<()> {
    let mut seen = BTreeSet::new();
    for b in blocks {
        if b.is_empty() {
            return Err(Error::precondition("empty block"));
        }
        for &i in b {
            if i >= dim || !seen.insert(i) {
                return Err(Error::precondition(format!("block atom {i} repeated or out of range")));
            }
        }
    }
    Ok(())
}

impl StepForm {
    pub fn new(
        q: Exponent,
        left_weights: Vec<f64>,
        right_weights: Vec<f64>,
        left_blocks: Vec<Vec<usize>>,
        right_blocks: Vec<Vec<usize>>,
        coeffs: AmplifiedElement,
    ) -> Result<Self> {
        let p = coeffs.p();
        if !p.is_interior() {
            return Err(Error::OutOfRange(format!("step forms need 1 < p < ∞, got p = {}", p.value())));
        }
        if (q.value() - p.conjugate().value()).abs() > 1e-12 {
            return Err(Error::ExponentMismatch { left: q.value(), right: p.conjugate().value() });
        }
        check_blocks(&left_blocks, left_weights.len())?;
        check_blocks(&right_blocks, right_weights.len())?;
        if coeffs.dim() != left_blocks.len() * right_blocks.len() {
            return Err(Error::precondition("coefficient count does not match the blocks"));
        }
        Ok(StepForm { q, left_weights, right_weights, left_blocks, right_blocks, coeffs })
    }

    /// Every element over atomic `Lq` factors is a step form with singleton blocks:
    /// `ξ_{kl} = U_{(k,l)} (μ_k ν_l)^{1/q}`.
    pub fn from_atoms(u: &AmplifiedElement, factors: &TensorFactors) -> Result<Self> {
        let q = lq_product_exponent(u, factors)?;
        let (wy, wz) = factor_weights(factors);
        let df = wz.len();
        let scale: Vec<f64> = wy.iter().flat_map(|a| wz.iter().map(move |b| (a * b).powf(1.0 / q.value()))).collect();
        let coeffs = AmplifiedElement::new(
            u.p(),
            u.dim(),
            u.rows().iter().map(|(&i, r)| (i, r.iter().zip(&scale).map(|(x, s)| x * s).collect())),
        )?;
        let singles = |n: usize| (0..n).map(|i| vec![i]).collect();
        Self::new(q, wy.clone(), wz, singles(wy.len()), singles(df), coeffs)
    }

    pub fn factors(&self) -> Result<TensorFactors> {
        Ok(TensorFactors::new(
            QuantizedSpace::min(FiniteNormedSpace::weighted_lq(self.q, &self.left_weights)?),
            QuantizedSpace::min(FiniteNormedSpace::weighted_lq(self.q, &self.right_weights)?),
        ))
    }

    fn indicator(&self, weights: &[f64], block: &[usize]) -> Vec<f64> {
        let mass: f64 = block.iter().map(|&i| weights[i]).sum();
        let h = mass.powf(-1.0 / self.q.value());
        let mut y = vec![0.0; weights.len()];
        for &i in block {
            y[i] = h;
        }
        y
    }

    pub fn left_vector(&self, k: usize) -> Vec<f64> {
        self.indicator(&self.left_weights, &self.left_blocks[k])
    }

    pub fn right_vector(&self, l: usize) -> Vec<f64> {
        self.indicator(&self.right_weights, &self.right_blocks[l])
    }

    /// `U` in the coordinates of `Lq(Y) ⊗ Lq(Z)`.
    pub fn to_element(&self) -> AmplifiedElement {
        let (de, df) = (self.left_weights.len(), self.right_weights.len());
        let nr = self.right_blocks.len();
        let lefts: Vec<_> = (0..self.left_blocks.len()).map(|k| self.left_vector(k)).collect();
        let rights: Vec<_> = (0..nr).map(|l| self.right_vector(l)).collect();
        let rows = self.coeffs.rows().iter().map(|(&i, xi)| {
            let mut row = vec![0.0; de * df];
            for (kl, c) in xi.iter().enumerate() {
                let (y, z) = (&lefts[kl / nr], &rights[kl % nr]);
                for j in 0..de {
                    for m in 0..df {
                        row[j * df + m] += c * y[j] * z[m];
                    }
                }
            }
            (i, row)
        });
        AmplifiedElement::new(self.coeffs.p(), de * df, rows).expect("finite")
    }
}

/// One-term representation `U = (T ∘ I_0^⋆) · I_0 · (u ◇ v)` with
/// `u = Σ_k e_k ⊗ y_k`, `v = Σ_l e_l ⊗ z_l` (both of min norm one) and
/// `T : e_{pairing(k,l)} ↦ ξ_{kl}`, so that `‖T‖` is the operator norm of the
/// coefficient matrix.
pub fn lq_product_representation(step: &StepForm, cfg: &SearchConfig) -> Result<PRepresentation> {
    let p = step.coeffs.p();
    if step.coeffs.is_zero() {
        return Ok(PRepresentation::zero(p));
    }
    let factors = step.factors()?;
    let nr = step.right_blocks.len();
    let u = AmplifiedElement::new(
        p,
        step.left_weights.len(),
        (0..step.left_blocks.len()).map(|k| (k as u64, step.left_vector(k))),
    )?;
    let v = AmplifiedElement::new(p, step.right_weights.len(), (0..nr).map(|l| (l as u64, step.right_vector(l))))?;
    let iso = ProperIsometry::new(0);
    let a = LpOperator::from_triplets(
        p,
        step.coeffs.rows().iter().flat_map(|(&i, xi)| {
            let iso = &iso;
            xi.iter()
                .enumerate()
                .map(move |(kl, &c)| (i, iso.map_index(pairing((kl / nr) as u64, (kl % nr) as u64)), c))
        }),
    );
    let bound = term_bound(&u, &v, &factors, cfg);
    let a_bound = a.norm_bracket(&cfg.opnorm).upper;
    Ok(PRepresentation { a, a_bound, terms: vec![PTerm { isometry: iso, u, v, bound }] })
}

pub fn pconvex_norm_lower(u: &AmplifiedElement, factors: &TensorFactors, cfg: &SearchConfig) -> Result<f64> {
    check_dims(u, factors)?;
    if u.is_zero() {
        return Ok(0.0);
    }
    let mut lower = product_functional_lower(u, factors, cfg);
    if lq_product_exponent(u, factors).is_ok() {
        lower = lower.max(lq_product_norm(u, factors, cfg)?.lower);
    }
    Ok(lower)
}

fn check_dims(u: &AmplifiedElement, factors: &TensorFactors) -> Result<()> {
    if u.dim() != factors.dim() {
        return Err(Error::invalid(format!(
            "element has {} coordinates, tensor product has {}",
            u.dim(),
            factors.dim()
        )));
    }
    Ok(())
}

/// Smallest certified cost among the constructive identification (for
/// min-quantized `Lq` factors with `q = p'`) and balanced conversions of
/// general representations.
pub fn pconvex_norm_upper(
    u: &AmplifiedElement,
    factors: &TensorFactors,
    cfg: &SearchConfig,
) -> Result<(f64, PRepresentation)> {
    check_dims(u, factors)?;
    let p = u.p();
    if u.is_zero() {
        return Ok((0.0, PRepresentation::zero(p)));
    }
    let scale = u.rows().values().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let mut candidates = Vec::new();
    if lq_product_exponent(u, factors).is_ok() {
        candidates.push(lq_product_representation(&StepForm::from_atoms(u, factors)?, cfg)?);
    }
    let rep = if cfg.term_cap == 0 || cfg.restarts == 0 {
        canonical_representation(u, factors)?
    } else {
        general_norm_upper(u, factors, cfg)?.1
    };
    candidates.push(balanced_prepresentation(&rep, factors, p, cfg)?);
    let mut best: Option<(f64, PRepresentation)> = None;
    for cand in candidates {
        if cand.residual(u)? > 1e-10 * scale {
            continue;
        }
        let cost = cand.cost();
        if best.as_ref().is_none_or(|b| cost < b.0) {
            best = Some((cost, cand));
        }
    }
    best.ok_or_else(|| Error::invalid("no representation reproduced the element"))
}

#[derive(Clone, Debug, Serialize)]
pub struct PConvexNorm {
    pub bracket: NormBracket,
    pub representation: PRepresentation,
    /// The exact identification value when it applies.
    pub oracle: Option<NormBracket>,
}

pub fn pconvex_norm(u: &AmplifiedElement, factors: &TensorFactors, cfg: &SearchConfig) -> Result<PConvexNorm> {
    let (upper, representation) = pconvex_norm_upper(u, factors, cfg)?;
    let lower = pconvex_norm_lower(u, factors, cfg)?;
    let oracle = lq_product_exponent(u, factors).ok().map(|_| lq_product_norm(u, factors, cfg)).transpose()?;
    Ok(PConvexNorm { bracket: NormBracket::new(lower.min(upper), upper), representation, oracle })
}

/// A pair with orthogonal proper supports that breaks p-convexity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PConvexityViolation {
    pub u: AmplifiedElement,
    pub v: AmplifiedElement,
    /// Lower bound on `‖u + v‖`.
    pub sum_lower: f64,
    /// `(upper(u)^p + upper(v)^p)^{1/p}`.
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PConvexityReport {
    pub trials: usize,
    pub largest_excess: f64,
    pub violations: Vec<PConvexityViolation>,
}

/// Random elements on disjoint base atoms among `0..8`.
pub fn random_orthogonal_pair(rng: &mut ChaCha8Rng, p: Exponent, dim: usize) -> (AmplifiedElement, AmplifiedElement) {
    let mut atoms: Vec<u64> = (0..8).collect();
    atoms.shuffle(rng);
    let split = rng.gen_range(1..4);
    let total = split + rng.gen_range(1..4);
    let row = |rng: &mut ChaCha8Rng| (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect::<Vec<_>>();
    let u = AmplifiedElement::new(p, dim, atoms[..split].iter().map(|&i| (i, row(rng))).collect::<Vec<_>>())
        .expect("finite");
    let v = AmplifiedElement::new(p, dim, atoms[split..total].iter().map(|&i| (i, row(rng))).collect::<Vec<_>>())
        .expect("finite");
    (u, v)
}

/// Tests `‖u + v‖ ≤ (‖u‖^p + ‖v‖^p)^{1/p}` on orthogonally supported pairs under
/// the quantization `space`. Basis probes `e_0 ⊗ b_j`, `e_1 ⊗ b_l` run first,
/// followed by `trials` random pairs.
pub fn pconvexity_check(space: &QuantizedSpace, p: Exponent, trials: usize, cfg: &SearchConfig) -> PConvexityReport {
    let dim = space.dim();
    let mut pairs = Vec::new();
    for j in 0..dim {
        for l in 0..dim {
            let b = |k: usize| (0..dim).map(|i| if i == k { 1.0 } else { 0.0 }).collect::<Vec<_>>();
            let u = AmplifiedElement::new(p, dim, [(0, b(j))]).expect("finite");
            let v = AmplifiedElement::new(p, dim, [(1, b(l))]).expect("finite");
            pairs.push((u, v));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    pairs.extend((0..trials).map(|_| random_orthogonal_pair(&mut rng, p, dim)));
    let mut report = PConvexityReport { trials: pairs.len(), largest_excess: f64::NEG_INFINITY, violations: vec![] };
    for (u, v) in pairs {
        let (sum_lower, bound) = pconvexity_sides(space, p, &u, &v, cfg);
        let excess = sum_lower - bound;
        report.largest_excess = report.largest_excess.max(excess);
        if excess > 1e-9 * bound.max(1.0) {
            report.violations.push(PConvexityViolation { u, v, sum_lower, bound });
        }
    }
    report
}

/// `(lower(‖u + v‖), (upper(‖u‖)^p + upper(‖v‖)^p)^{1/p})`.
pub fn pconvexity_sides(
    space: &QuantizedSpace,
    p: Exponent,
    u: &AmplifiedElement,
    v: &AmplifiedElement,
    cfg: &SearchConfig,
) -> (f64, f64) {
    let sum = u.add(v).expect("same shape");
    (space.norm(&sum, cfg).lower, p.combine([space.norm(u, cfg).upper, space.norm(v, cfg).upper]))
}

/// `A ⊗ B` on the product index set: `pairing` on the counting space,
/// row-major pairs on finite spaces with product weights.
pub fn kron_operator(a: &LpOperator, b: &LpOperator) -> Result<LpOperator> {
    if a.p() != b.p() {
        return Err(Error::ExponentMismatch { left: a.p().value(), right: b.p().value() });
    }
    let (sa, sb) = (a.space().as_ref(), b.space().as_ref());
    let space = product_space(sa, sb)?;
    let index = |i: u64, j: u64| product_index(sa, sb, i, j);
    let dom = a
        .dom()
        .iter()
        .flat_map(|&i| b.dom().iter().map(move |&j| (i, j)))
        .map(|(i, j)| index(i, j))
        .collect::<Result<Vec<_>>>()?;
    let cod = a
        .cod()
        .iter()
        .flat_map(|&i| b.cod().iter().map(move |&j| (i, j)))
        .map(|(i, j)| index(i, j))
        .collect::<Result<Vec<_>>>()?;
    let matrix = a.matrix().kronecker(b.matrix());
    LpOperator::new(a.p(), std::sync::Arc::new(space), dom, cod, matrix)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KronReport {
    pub kron: NormBracket,
    pub left: NormBracket,
    pub right: NormBracket,
    /// `upper(‖A‖) · upper(‖B‖)`.
    pub bound: f64,
    pub holds: bool,
}

/// Checks `‖A ⊗ B‖ ≤ ‖A‖ ‖B‖`.
pub fn kron_norm_check(a: &LpOperator, b: &LpOperator, cfg: &SearchConfig) -> Result<KronReport> {
    let k = kron_operator(a, b)?;
    let kron = k.norm_bracket(&cfg.opnorm);
    let (left, right) = (a.norm_bracket(&cfg.opnorm), b.norm_bracket(&cfg.opnorm));
    let bound = left.upper * right.upper;
    Ok(KronReport { kron, left, right, bound, holds: kron.lower <= bound + 1e-9 * bound.max(1.0) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::opnorm::spectral_norm;

    fn cfg() -> SearchConfig {
        SearchConfig::with_seed(5)
    }

    fn min_lq(q: f64, d: usize) -> QuantizedSpace {
        QuantizedSpace::min(FiniteNormedSpace::lq(Exponent::new(q).unwrap(), d))
    }

    #[test]
    fn canonical_conversion_reproduces_value() {
        let p = Exponent::new(3.0).unwrap();
        let fac = TensorFactors::new(min_lq(2.0, 2), QuantizedSpace::max(FiniteNormedSpace::lq(Exponent::ONE, 2)));
        let u = AmplifiedElement::new(p, 4, [(0, vec![1.0, 0.0, -2.0, 0.5]), (5, vec![0.0, 3.0, 0.0, 0.0])]).unwrap();
        let rep = canonical_representation(&u, &fac).unwrap();
        let pr = canonical_prepresentation(&rep, &fac, p, &cfg()).unwrap();
        assert!(pr.isometries_disjoint());
        assert!(pr.residual(&u).unwrap() < 1e-12);
        assert_eq!(pr.terms.len(), rep.terms.len());
        let balanced = balanced_prepresentation(&rep, &fac, p, &cfg()).unwrap();
        assert!(balanced.residual(&u).unwrap() < 1e-12);
        assert!(balanced.cost() <= rep.cost(&fac, &cfg()) * (1.0 + 1e-9));
    }

    #[test]
    fn single_term_is_a_times_star() {
        let p = Exponent::TWO;
        let fac = TensorFactors::new(min_lq(2.0, 1), min_lq(2.0, 1));
        let u = AmplifiedElement::new(p, 1, [(3, vec![2.0])]).unwrap();
        let rep = canonical_representation(&u, &fac).unwrap();
        let pr = canonical_prepresentation(&rep, &fac, p, &cfg()).unwrap();
        let want = rep.terms[0].a.compose(&ProperIsometry::new(0).star_operator(p, rep.terms[0].a.dom())).unwrap();
        assert!(pr.a.max_abs_diff(&want) < 1e-15);
        assert_eq!(pr.terms[0].isometry, ProperIsometry::new(0));
    }

    #[test]
    fn zero_cases() {
        let p = Exponent::TWO;
        let fac = TensorFactors::new(min_lq(2.0, 2), min_lq(2.0, 2));
        let zero = AmplifiedElement::zero(p, 4);
        let (c, r) = pconvex_norm_upper(&zero, &fac, &cfg()).unwrap();
        assert_eq!(c, 0.0);
        assert!(r.terms.is_empty());
        assert_eq!(pconvex_norm_lower(&zero, &fac, &cfg()).unwrap(), 0.0);
        assert_eq!(lq_product_norm(&zero, &fac, &cfg()).unwrap(), NormBracket::zero());
    }

    #[test]
    fn lq_product_examples() {
        let p = Exponent::TWO;
        let fac = TensorFactors::new(min_lq(2.0, 2), min_lq(2.0, 2));
        let (x, y) = ([3.0, 4.0], [1.0, -1.0]);
        let u = AmplifiedElement::elementary(&crate::lp::LpVector::basis(p, 0), &fac.tensor(&x, &y));
        let b = lq_product_norm(&u, &fac, &cfg()).unwrap();
        let want = 5.0 * 2f64.sqrt();
        assert!(b.contains(want, 1e-12) && b.is_exact(1e-12));

        // e_0 ⊗ (y_0 ⊗ z_0) + e_1 ⊗ (y_1 ⊗ z_1): the operator is the 2×2 identity.
        let u = AmplifiedElement::new(p, 4, [(0, vec![1.0, 0.0, 0.0, 0.0]), (1, vec![0.0, 0.0, 0.0, 1.0])]).unwrap();
        assert!(lq_product_norm(&u, &fac, &cfg()).unwrap().contains(1.0, 1e-12));

        let u1 = AmplifiedElement::zero(Exponent::ONE, 4);
        assert!(matches!(lq_product_norm(&u1, &fac, &cfg()), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn constructive_matches_oracle() {
        let p = Exponent::TWO;
        let q = p.conjugate();
        let coeffs =
            AmplifiedElement::new(p, 4, [(0, vec![1.0, 2.0, 0.0, -1.0]), (2, vec![0.5, 0.0, 3.0, 1.0])]).unwrap();
        let step = StepForm::new(
            q,
            vec![1.0, 2.0, 0.5],
            vec![1.0, 1.0, 3.0],
            vec![vec![0, 2], vec![1]],
            vec![vec![1], vec![0, 2]],
            coeffs.clone(),
        )
        .unwrap();
        let u = step.to_element();
        let fac = step.factors().unwrap();
        let rep = lq_product_representation(&step, &cfg()).unwrap();
        assert!(rep.residual(&u).unwrap() < 1e-12);
        let (_, m) = coeffs.matrix();
        let s = spectral_norm(&m);
        assert!((rep.cost() - s).abs() < 1e-9, "{} vs {s}", rep.cost());
        let oracle = lq_product_norm(&u, &fac, &cfg()).unwrap();
        assert!((oracle.upper - rep.cost()).abs() < 1e-9 && oracle.contains(s, 1e-9));

        let single = AmplifiedElement::new(p, 1, [(0, vec![3.0]), (1, vec![4.0])]).unwrap();
        let step = StepForm::new(q, vec![1.0], vec![2.0], vec![vec![0]], vec![vec![0]], single).unwrap();
        assert!((lq_product_representation(&step, &cfg()).unwrap().cost() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn step_form_rejects_overlapping_blocks() {
        let p = Exponent::TWO;
        let coeffs = AmplifiedElement::zero(p, 2);
        let r = StepForm::new(p, vec![1.0, 1.0], vec![1.0], vec![vec![0, 1], vec![1]], vec![vec![0]], coeffs);
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn merges_obey_bounds() {
        let p = Exponent::new(1.5).unwrap();
        let fac = TensorFactors::new(min_lq(3.0, 2), min_lq(2.0, 2));
        let c = cfg();
        let u = AmplifiedElement::new(p, 4, [(0, vec![1.0, 2.0, 0.0, 0.0]), (1, vec![0.0, 0.0, 1.0, -1.0])]).unwrap();
        let v = AmplifiedElement::new(p, 4, [(2, vec![0.0, 1.0, 1.0, 0.0])]).unwrap();
        let ru = canonical_prepresentation(&canonical_representation(&u, &fac).unwrap(), &fac, p, &c).unwrap();
        let rv = canonical_prepresentation(&canonical_representation(&v, &fac).unwrap(), &fac, p, &c).unwrap();
        let sum = u.add(&v).unwrap();
        let merged = merge_sum(&ru, &rv, &c).unwrap();
        assert!(merged.isometries_disjoint());
        assert!(merged.residual(&sum).unwrap() < 1e-12);
        assert!(merged.cost() <= ru.cost() + rv.cost() + 1e-9);
        let orth = merge_orthogonal(&ru, &rv, &[0, 1], &[2], &c).unwrap();
        assert!(orth.residual(&sum).unwrap() < 1e-12);
        assert!(orth.cost() <= p.combine([ru.cost(), rv.cost()]) + 1e-9);
        assert!(merge_orthogonal(&ru, &rv, &[0, 1], &[1], &c).is_err());
    }

    #[test]
    fn transported_bound() {
        let p = Exponent::TWO;
        let fac = TensorFactors::new(min_lq(2.0, 2), min_lq(2.0, 2));
        let c = cfg();
        let u = AmplifiedElement::new(p, 4, [(0, vec![1.0, 2.0, 0.0, 1.0])]).unwrap();
        let (cost, rep) = pconvex_norm_upper(&u, &fac, &c).unwrap();
        let b = LpOperator::from_triplets(p, [(0, 0, 2.0), (1, 0, -1.0)]);
        let bn = b.norm_bracket(&c.opnorm).upper;
        let moved = rep.transported(&b, bn).unwrap();
        assert!(moved.residual(&u.module_action(&b).unwrap()).unwrap() < 1e-12);
        assert!(moved.cost() <= bn * cost + 1e-9);
    }

    #[test]
    fn max_l1_is_not_two_convex() {
        let space = QuantizedSpace::max(FiniteNormedSpace::lq(Exponent::ONE, 2));
        let report = pconvexity_check(&space, Exponent::TWO, 5, &cfg());
        let w = report.violations.iter().map(|v| v.sum_lower - v.bound).fold(0.0, f64::max);
        assert!((w - (2.0 - 2f64.sqrt())).abs() < 1e-9, "{report:?}");
        let min = QuantizedSpace::min(FiniteNormedSpace::lq(Exponent::TWO, 2));
        assert!(pconvexity_check(&min, Exponent::TWO, 20, &cfg()).violations.is_empty());
    }

    #[test]
    fn kron_examples() {
        let c = cfg();
        for p in [Exponent::ONE, Exponent::TWO, Exponent::INFINITY] {
            let id = LpOperator::identity(p, vec![0, 1]);
            let r = kron_norm_check(&id, &id, &c).unwrap();
            assert!(r.holds && r.kron.contains(1.0, 1e-12));
            let r = kron_norm_check(&LpOperator::zero(p), &id, &c).unwrap();
            assert!(r.holds && r.kron.upper == 0.0);
        }
        let p = Exponent::TWO;
        let a = LpOperator::from_triplets(p, [(0, 0, 1.0), (0, 1, 2.0), (1, 1, -1.0)]);
        let b = LpOperator::from_triplets(p, [(0, 0, 0.5), (1, 0, 3.0), (1, 1, 1.0)]);
        let r = kron_norm_check(&a, &b, &c).unwrap();
        let want = spectral_norm(a.matrix()) * spectral_norm(b.matrix());
        assert!(r.kron.contains(want, 1e-9) && (r.bound - want).abs() < 1e-9);
    }
}
