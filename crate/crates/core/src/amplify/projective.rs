//! Projective tensor norms `‖M‖_π = inf Σ ‖x_k‖‖y_k‖` over decompositions
//! `M = Σ x_k y_kᵀ`, bracketed by a decomposition search from above and
//! bilinear-form witnesses from below.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::bracket::NormBracket;
use crate::lp::opnorm::nuclear_norm;
use crate::normed::{mixed_norm_bracket, FiniteNormedSpace, NormKind};
use crate::search::SearchConfig;

type TermPair = [(Vec<f64>, Vec<f64>); 2];

/// Norm on coordinate vectors as seen by a decomposition search.
pub trait NormOracle: Sync {
    fn dim(&self) -> usize;
    /// Cheap value that steers the search.
    fn estimate(&self, x: &[f64]) -> f64;
    /// Certified upper bound.
    fn upper(&self, x: &[f64]) -> f64;
}

impl NormOracle for FiniteNormedSpace {
    fn dim(&self) -> usize {
        FiniteNormedSpace::dim(self)
    }

    fn estimate(&self, x: &[f64]) -> f64 {
        self.norm(x)
    }

    fn upper(&self, x: &[f64]) -> f64 {
        self.norm(x)
    }
}

/// `M = Σ_k x_k y_kᵀ`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Decomposition {
    pub terms: Vec<(Vec<f64>, Vec<f64>)>,
}

fn col(m: &DMatrix<f64>, j: usize) -> Vec<f64> {
    m.column(j).iter().copied().collect()
}

fn row(m: &DMatrix<f64>, i: usize) -> Vec<f64> {
    m.row(i).iter().copied().collect()
}

fn unit(n: usize, k: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[k] = 1.0;
    e
}

fn is_zero(v: &[f64]) -> bool {
    v.iter().all(|x| *x == 0.0)
}

impl Decomposition {
    pub fn by_rows(m: &DMatrix<f64>) -> Self {
        let terms = (0..m.nrows()).map(|i| (unit(m.nrows(), i), row(m, i))).filter(|(_, y)| !is_zero(y)).collect();
        Decomposition { terms }
    }

    pub fn by_columns(m: &DMatrix<f64>) -> Self {
        let terms = (0..m.ncols()).map(|j| (col(m, j), unit(m.ncols(), j))).filter(|(x, _)| !is_zero(x)).collect();
        Decomposition { terms }
    }

    pub fn by_svd(m: &DMatrix<f64>) -> Self {
        if m.is_empty() {
            return Decomposition::default();
        }
        let svd = m.clone().svd(true, true);
        let (u, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
        let top = svd.singular_values.max();
        let terms = svd
            .singular_values
            .iter()
            .enumerate()
            .filter(|(_, s)| **s > 1e-14 * top)
            .map(|(k, s)| {
                let r = s.sqrt();
                (u.column(k).iter().map(|v| v * r).collect(), vt.row(k).iter().map(|v| v * r).collect())
            })
            .collect();
        Decomposition { terms }
    }

    pub fn reconstruct(&self, nrows: usize, ncols: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(nrows, ncols);
        for (x, y) in &self.terms {
            for i in 0..nrows {
                for j in 0..ncols {
                    m[(i, j)] += x[i] * y[j];
                }
            }
        }
        m
    }

    pub fn cost(&self, left: &dyn NormOracle, right: &dyn NormOracle) -> f64 {
        self.terms.iter().map(|(x, y)| left.upper(x) * right.upper(y)).sum()
    }

    fn estimate(&self, left: &dyn NormOracle, right: &dyn NormOracle) -> f64 {
        self.terms.iter().map(|(x, y)| left.estimate(x) * right.estimate(y)).sum()
    }
}

/// Effort knobs for [`search_decomposition`].
#[derive(Clone, Copy, Debug)]
pub struct SearchEffort {
    pub restarts: usize,
    pub grid: usize,
    pub sweeps: usize,
    pub seed: u64,
}

impl SearchEffort {
    pub fn from_config(cfg: &SearchConfig) -> Self {
        SearchEffort { restarts: cfg.restarts.min(10), grid: 12, sweeps: 6, seed: cfg.seed }
    }

    /// Lighter setting for oracles whose norm evaluations are themselves searches.
    pub fn light(cfg: &SearchConfig) -> Self {
        SearchEffort { restarts: cfg.restarts.min(2), grid: 6, sweeps: 2, seed: cfg.seed }
    }
}

/// Smallest certified decomposition cost found by local search.
pub fn search_decomposition(
    m: &DMatrix<f64>,
    left: &dyn NormOracle,
    right: &dyn NormOracle,
    effort: SearchEffort,
) -> (f64, Decomposition) {
    if m.iter().all(|v| *v == 0.0) {
        return (0.0, Decomposition::default());
    }
    let mut starts = vec![Decomposition::by_rows(m), Decomposition::by_columns(m), Decomposition::by_svd(m)];
    let svd = Decomposition::by_svd(m);
    let k = svd.terms.len();
    let mut rng = ChaCha8Rng::seed_from_u64(effort.seed ^ 0x0de_c0de);
    if k >= 2 {
        for _ in 0..effort.restarts {
            // Mix the SVD factors by a random orthogonal matrix.
            let g = DMatrix::<f64>::from_fn(k, k, |_, _| StandardNormal.sample(&mut rng));
            let q = g.qr().q();
            let terms = (0..k)
                .map(|c| {
                    let mut x = vec![0.0; m.nrows()];
                    let mut y = vec![0.0; m.ncols()];
                    for (t, (xt, yt)) in svd.terms.iter().enumerate() {
                        let w = q[(t, c)];
                        x.iter_mut().zip(xt).for_each(|(a, b)| *a += w * b);
                        y.iter_mut().zip(yt).for_each(|(a, b)| *a += w * b);
                    }
                    (x, y)
                })
                .collect();
            starts.push(Decomposition { terms });
        }
    }
    let mut improved: Vec<(f64, Decomposition)> = starts
        .into_iter()
        .map(|d| {
            let d = improve(d, left, right, effort);
            (d.estimate(left, right), d)
        })
        .collect();
    improved.sort_by(|a, b| a.0.total_cmp(&b.0));
    improved
        .into_iter()
        .take(3)
        .map(|(_, d)| (d.cost(left, right), d))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("at least one start")
}

fn term_estimate(x: &[f64], y: &[f64], left: &dyn NormOracle, right: &dyn NormOracle) -> f64 {
    left.estimate(x) * right.estimate(y)
}

/// Rewrites `x_k y_kᵀ + x_l y_lᵀ` as `X G (Y G^{-T})ᵀ` with
/// `G = [[cos α, cos β], [sin α, sin β]]`.
fn mix(xk: &[f64], xl: &[f64], yk: &[f64], yl: &[f64], alpha: f64, beta: f64) -> Option<[(Vec<f64>, Vec<f64>); 2]> {
    let det = (beta - alpha).sin();
    if det.abs() < 1e-3 {
        return None;
    }
    let (ca, sa, cb, sb) = (alpha.cos(), alpha.sin(), beta.cos(), beta.sin());
    let lin = |a: &[f64], b: &[f64], s: f64, t: f64| a.iter().zip(b).map(|(u, v)| s * u + t * v).collect::<Vec<f64>>();
    Some([
        (lin(xk, xl, ca, sa), lin(yk, yl, sb / det, -cb / det)),
        (lin(xk, xl, cb, sb), lin(yk, yl, -sa / det, ca / det)),
    ])
}

fn parallel(a: &[f64], b: &[f64]) -> Option<f64> {
    let aa: f64 = a.iter().map(|v| v * v).sum();
    let bb: f64 = b.iter().map(|v| v * v).sum();
    let ab: f64 = a.iter().zip(b).map(|(u, v)| u * v).sum();
    (aa > 0.0 && ab * ab >= (1.0 - 1e-12) * aa * bb).then(|| ab / aa)
}

fn improve(d: Decomposition, left: &dyn NormOracle, right: &dyn NormOracle, effort: SearchEffort) -> Decomposition {
    let mut terms: Vec<(Vec<f64>, Vec<f64>)> =
        d.terms.into_iter().filter(|(x, y)| !is_zero(x) && !is_zero(y)).collect();
    let mut costs: Vec<f64> = terms.iter().map(|(x, y)| term_estimate(x, y, left, right)).collect();
    let step = std::f64::consts::PI / effort.grid as f64;
    for _ in 0..effort.sweeps {
        let mut changed = false;
        let mut k = 0;
        while k < terms.len() {
            let mut l = k + 1;
            while l < terms.len() {
                // Merge parallel factors outright.
                if let Some(c) = parallel(&terms[k].0, &terms[l].0) {
                    let yl = terms[l].1.clone();
                    terms[k].1.iter_mut().zip(&yl).for_each(|(a, b)| *a += c * b);
                    terms.remove(l);
                    costs.remove(l);
                    costs[k] = term_estimate(&terms[k].0, &terms[k].1, left, right);
                    changed = true;
                    continue;
                }
                if let Some(c) = parallel(&terms[k].1, &terms[l].1) {
                    let xl = terms[l].0.clone();
                    terms[k].0.iter_mut().zip(&xl).for_each(|(a, b)| *a += c * b);
                    terms.remove(l);
                    costs.remove(l);
                    costs[k] = term_estimate(&terms[k].0, &terms[k].1, left, right);
                    changed = true;
                    continue;
                }
                let current = costs[k] + costs[l];
                let eval = |a: f64, b: f64| -> Option<(f64, TermPair)> {
                    let pair = mix(&terms[k].0, &terms[l].0, &terms[k].1, &terms[l].1, a, b)?;
                    let c = term_estimate(&pair[0].0, &pair[0].1, left, right)
                        + term_estimate(&pair[1].0, &pair[1].1, left, right);
                    Some((c, pair))
                };
                let mut best: Option<(f64, f64, f64)> = None;
                for ia in 0..effort.grid {
                    for ib in 0..effort.grid {
                        let (a, b) = (ia as f64 * step, ib as f64 * step);
                        if let Some((c, _)) = eval(a, b) {
                            if best.is_none_or(|(bc, _, _)| c < bc) {
                                best = Some((c, a, b));
                            }
                        }
                    }
                }
                if let Some((mut bc, mut ba, mut bb)) = best {
                    let mut h = step / 2.0;
                    for _ in 0..14 {
                        let mut moved = false;
                        for (da, db) in [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)] {
                            if let Some((c, _)) = eval(ba + da, bb + db) {
                                if c < bc {
                                    bc = c;
                                    ba += da;
                                    bb += db;
                                    moved = true;
                                }
                            }
                        }
                        if !moved {
                            h /= 2.0;
                        }
                    }
                    if bc < current * (1.0 - 1e-12) {
                        let (c, pair) = eval(ba, bb).expect("evaluated before");
                        let [p0, p1] = pair;
                        let c0 = term_estimate(&p0.0, &p0.1, left, right);
                        terms[k] = p0;
                        terms[l] = p1;
                        costs[k] = c0;
                        costs[l] = c - c0;
                        changed = true;
                    }
                }
                l += 1;
            }
            k += 1;
        }
        // Drop terms that collapsed to (numerical) zero.
        let scale = costs.iter().copied().fold(0.0, f64::max);
        let keep: Vec<bool> = costs.iter().map(|c| *c > 1e-15 * scale).collect();
        if keep.iter().any(|k| !k) {
            let mut it = keep.iter();
            terms.retain(|_| *it.next().unwrap());
            let mut it = keep.iter();
            costs.retain(|_| *it.next().unwrap());
        }
        if !changed {
            break;
        }
    }
    Decomposition { terms }
}

/// Closed forms for `X ⊗_π Y`, when one is available.
pub fn projective_exact(m: &DMatrix<f64>, left: &FiniteNormedSpace, right: &FiniteNormedSpace) -> Option<f64> {
    if m.iter().all(|v| *v == 0.0) {
        return Some(0.0);
    }
    if m.nrows() == 1 {
        return Some(left.basis_norm(0) * right.norm(&row(m, 0)));
    }
    if m.ncols() == 1 {
        return Some(right.basis_norm(0) * left.norm(&col(m, 0)));
    }
    match (left.kind(), right.kind()) {
        // ℓ1(X; Y) = ℓ1 ⊗_π Y
        (NormKind::Lq { q, scales }, _) if q.is_one() => {
            Some((0..m.nrows()).map(|i| scales[i] * right.norm(&row(m, i))).sum())
        }
        (_, NormKind::Lq { q, scales }) if q.is_one() => {
            Some((0..m.ncols()).map(|j| scales[j] * left.norm(&col(m, j))).sum())
        }
        (NormKind::Lq { q: ql, scales: sl }, NormKind::Lq { q: qr, scales: sr }) if ql.is_two() && qr.is_two() => {
            Some(nuclear_norm(&DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| sl[i] * m[(i, j)] * sr[j])))
        }
        _ => None,
    }
}

/// Lower bound `⟨Φ, M⟩ / ‖Φ‖` from a family of bilinear forms, where the
/// form norm is the norm of `Φᵀ : X → Y*`.
pub fn projective_lower(
    m: &DMatrix<f64>,
    left: &FiniteNormedSpace,
    right: &FiniteNormedSpace,
    hint: Option<&Decomposition>,
    cfg: &SearchConfig,
) -> f64 {
    let (r, d) = m.shape();
    let right_dual = right.dual();
    // The injective norm never exceeds the projective one.
    let mut best = mixed_norm_bracket(m, &right_dual, left, &cfg.opnorm).lower;
    let mut candidates: Vec<DMatrix<f64>> = Vec::new();
    let svd = m.clone().svd(true, true);
    if let (Some(u), Some(vt)) = (svd.u, svd.v_t) {
        candidates.push(u * vt);
    }
    candidates.push(DMatrix::from_fn(r, d, |i, j| right.norming_functional(&row(m, i))[j]));
    candidates.push(DMatrix::from_fn(r, d, |i, j| left.norming_functional(&col(m, j))[i]));
    if let Some(dec) = hint {
        let mut phi = DMatrix::zeros(r, d);
        for (x, y) in &dec.terms {
            let f = left.norming_functional(x);
            let g = right.norming_functional(y);
            for i in 0..r {
                for j in 0..d {
                    phi[(i, j)] += f[i] * g[j];
                }
            }
        }
        candidates.push(phi);
    }
    for phi in candidates {
        let pairing = phi.component_mul(m).sum();
        if pairing <= 0.0 {
            continue;
        }
        let norm = mixed_norm_bracket(&phi.transpose(), left, &right_dual, &cfg.opnorm).upper;
        if norm > 0.0 {
            best = best.max(pairing / norm);
        }
    }
    best
}

/// Bracket on the projective norm of `m ∈ X ⊗_π Y`.
pub fn projective_bracket(
    m: &DMatrix<f64>,
    left: &FiniteNormedSpace,
    right: &FiniteNormedSpace,
    cfg: &SearchConfig,
) -> (NormBracket, Option<Decomposition>) {
    if let Some(v) = projective_exact(m, left, right) {
        return (NormBracket::exact(v), None);
    }
    let (upper, dec) = search_decomposition(m, left, right, SearchEffort::from_config(cfg));
    let lower = projective_lower(m, left, right, Some(&dec), cfg);
    (NormBracket::new(lower.min(upper), upper), Some(dec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponent::Exponent;
    use rand::Rng;

    fn cfg() -> SearchConfig {
        SearchConfig::with_seed(5)
    }

    #[test]
    fn decompositions_reconstruct() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = DMatrix::from_fn(3, 4, |_, _| rng.gen_range(-1.0..1.0));
        let l = FiniteNormedSpace::lq(Exponent::new(3.0).unwrap(), 3);
        let rgt = FiniteNormedSpace::lq(Exponent::new(1.5).unwrap(), 4);
        for d in [Decomposition::by_rows(&m), Decomposition::by_columns(&m), Decomposition::by_svd(&m)] {
            assert!((d.reconstruct(3, 4) - &m).amax() < 1e-12);
        }
        let (cost, d) = search_decomposition(&m, &l, &rgt, SearchEffort::from_config(&cfg()));
        assert!((d.reconstruct(3, 4) - &m).amax() < 1e-10);
        assert!((cost - d.cost(&l, &rgt)).abs() < 1e-12);
    }

    #[test]
    fn nuclear_examples() {
        let l2 = FiniteNormedSpace::lq(Exponent::TWO, 2);
        let id = DMatrix::<f64>::identity(2, 2);
        assert_eq!(projective_bracket(&id, &l2, &l2, &cfg()).0, NormBracket::exact(2.0));
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let b = projective_bracket(&m, &l2, &l2, &cfg()).0;
        assert!((b.lower - 4.0).abs() < 1e-12 && (b.upper - 4.0).abs() < 1e-12);
    }

    #[test]
    fn search_brackets_contain_known_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let l = FiniteNormedSpace::lq(Exponent::new(3.0).unwrap(), 3);
        let r = FiniteNormedSpace::lq(Exponent::new(1.5).unwrap(), 3);
        for _ in 0..5 {
            let m = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
            let (b, _) = projective_bracket(&m, &l, &r, &cfg());
            assert!(b.lower <= b.upper);
            // Row and column decompositions bound from above.
            assert!(b.upper <= Decomposition::by_rows(&m).cost(&l, &r) + 1e-12);
            assert!(b.upper <= Decomposition::by_columns(&m).cost(&l, &r) + 1e-12);
            assert!(b.width() <= 0.5 * b.upper, "{b:?}");
        }
    }

    #[test]
    fn l1_counterexample_value() {
        let l2 = FiniteNormedSpace::lq(Exponent::TWO, 2);
        let l1 = FiniteNormedSpace::lq(Exponent::ONE, 2);
        let id = DMatrix::<f64>::identity(2, 2);
        assert_eq!(projective_bracket(&id, &l2, &l1, &cfg()).0, NormBracket::exact(2.0));
    }
}
