//! Operator norms of real matrices acting from ℓp to ℓp.
//!
//! Closed forms at p ∈ {1, 2, ∞}. Elsewhere the norm is enclosed: the lower
//! end is the best witness found by Boyd's nonlinear power iteration, the
//! upper end the smaller of the Riesz–Thorin interpolation bound and a
//! Collatz–Wielandt certificate for the entrywise absolute matrix. The
//! certificate is tight whenever the matrix is sign-equivalent to a
//! nonnegative one.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bracket::NormBracket;
use crate::exponent::Exponent;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OpNormConfig {
    pub starts: usize,
    pub iterations: usize,
    pub tol: f64,
    pub seed: u64,
    /// Iteration cap for the positive certificate vector.
    pub certificate_iterations: usize,
}

impl Default for OpNormConfig {
    fn default() -> Self {
        OpNormConfig { starts: 20, iterations: 500, tol: 1e-10, seed: 0x5eed_0f1e, certificate_iterations: 20_000 }
    }
}

impl OpNormConfig {
    /// Cheap settings used inside searches; final values are always recomputed
    /// with the full configuration.
    pub fn fast() -> Self {
        OpNormConfig { starts: 3, iterations: 60, tol: 1e-8, seed: 0x5eed_0f1e, certificate_iterations: 400 }
    }
}

pub fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn inf_norm(a: &DMatrix<f64>) -> f64 {
    a.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().svd(false, false).singular_values.max()
}

pub fn nuclear_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().svd(false, false).singular_values.sum()
}

/// `sign(t)|t|^{r-1}`, the duality map of ℓr applied entrywise.
pub(crate) fn duality_map(v: &[f64], r: f64) -> Vec<f64> {
    if r == 2.0 {
        return v.to_vec();
    }
    v.iter().map(|&t| t.signum() * t.abs().powf(r - 1.0)).collect()
}

pub(crate) fn mat_vec(a: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)] * x[j]).sum()).collect()
}

pub(crate) fn mat_t_vec(a: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    (0..a.ncols()).map(|j| (0..a.nrows()).map(|i| a[(i, j)] * y[i]).sum()).collect()
}

/// Bracket on `sup ‖Ax‖_p / ‖x‖_p`.
pub fn p_norm_bracket(a: &DMatrix<f64>, p: Exponent, cfg: &OpNormConfig) -> NormBracket {
    let pruned = prune(a);
    if pruned.is_empty() {
        return NormBracket::zero();
    }
    let components = components(&pruned);
    if components.len() > 1 {
        // Block-diagonal after permutation: the norm is the largest block norm.
        let mut lower = 0.0f64;
        let mut upper = 0.0f64;
        for (rows, cols) in components {
            let block = DMatrix::from_fn(rows.len(), cols.len(), |i, j| pruned[(rows[i], cols[j])]);
            let b = connected_bracket(&block, p, cfg);
            lower = lower.max(b.lower);
            upper = upper.max(b.upper);
        }
        return NormBracket::new(lower, upper);
    }
    connected_bracket(&pruned, p, cfg)
}

/// Witness vector attaining the lower end of [`p_norm_bracket`] (not pruned;
/// indexed like the columns of `a`).
pub fn p_norm_witness(a: &DMatrix<f64>, p: Exponent, cfg: &OpNormConfig) -> (f64, Vec<f64>) {
    let n = a.ncols();
    if a.is_empty() || a.iter().all(|v| *v == 0.0) {
        return (0.0, vec![0.0; n]);
    }
    let mut best = (0.0, vec![0.0; n]);
    for x in starting_points(a, p, cfg) {
        let (val, x) = boyd(a, p, x, cfg.iterations, cfg.tol);
        if val > best.0 {
            best = (val, x);
        }
    }
    best
}

fn connected_bracket(a: &DMatrix<f64>, p: Exponent, cfg: &OpNormConfig) -> NormBracket {
    if p.is_one() {
        return NormBracket::exact(one_norm(a));
    }
    if p.is_infinite() {
        return NormBracket::exact(inf_norm(a));
    }
    if p.is_two() {
        return NormBracket::exact(spectral_norm(a));
    }
    let pv = p.value();
    if a.ncols() == 1 {
        return NormBracket::exact(p.norm(a.column(0).as_slice()));
    }
    if a.nrows() == 1 {
        let row: Vec<f64> = a.row(0).iter().copied().collect();
        return NormBracket::exact(p.conjugate().norm(&row));
    }
    let (lower, _) = p_norm_witness(a, p, cfg);
    let upper = riesz_thorin(a, pv).min(positive_certificate(a, pv, cfg));
    let lower = lower.max(positive_witness_value(a, pv, cfg).unwrap_or(0.0));
    NormBracket::new(lower, upper)
}

fn riesz_thorin(a: &DMatrix<f64>, p: f64) -> f64 {
    let n1 = one_norm(a);
    let ninf = inf_norm(a);
    let n2 = spectral_norm(a);
    let outer = n1.powf(1.0 / p) * ninf.powf(1.0 - 1.0 / p);
    let inner = if p < 2.0 {
        let theta = 2.0 * (1.0 - 1.0 / p);
        n1.powf(1.0 - theta) * n2.powf(theta)
    } else {
        n2.powf(2.0 / p) * ninf.powf(1.0 - 2.0 / p)
    };
    outer.min(inner)
}

fn starting_points(a: &DMatrix<f64>, p: Exponent, cfg: &OpNormConfig) -> Vec<Vec<f64>> {
    let n = a.ncols();
    let mut starts = Vec::new();
    if let Some(signs) = column_signs(a) {
        let abs = a.map(f64::abs);
        let x = perron_vector(&abs, p.value(), cfg.certificate_iterations.min(2000));
        starts.push(x.iter().zip(&signs).map(|(v, s)| v * s).collect());
    }
    starts.push(vec![1.0; n]);
    // best column
    let mut best_j = 0;
    let mut best = -1.0;
    for j in 0..n {
        let v = p.norm(a.column(j).as_slice());
        if v > best {
            best = v;
            best_j = j;
        }
    }
    let mut e = vec![0.0; n];
    e[best_j] = 1.0;
    starts.push(e);
    // dominant right singular vector
    let svd = a.clone().svd(false, true);
    if let Some(vt) = svd.v_t {
        let k = svd.singular_values.imax();
        starts.push(vt.row(k).iter().copied().collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ ((a.nrows() as u64) << 32 | n as u64));
    for _ in 0..cfg.starts {
        starts.push((0..n).map(|_| StandardNormal.sample(&mut rng)).collect());
    }
    starts
}

/// Boyd's iteration `x ← ψ_{p'}(Aᵀ ψ_p(Ax))`; returns the best ratio seen.
fn boyd(a: &DMatrix<f64>, p: Exponent, x0: Vec<f64>, iterations: usize, tol: f64) -> (f64, Vec<f64>) {
    let pv = p.value();
    let q = p.conjugate().value();
    let nx = p.norm(&x0);
    if nx == 0.0 || !nx.is_finite() {
        return (0.0, x0);
    }
    let mut x: Vec<f64> = x0.iter().map(|v| v / nx).collect();
    let mut best_val = p.norm(&mat_vec(a, &x));
    let mut best_x = x.clone();
    for _ in 0..iterations {
        let y = mat_vec(a, &x);
        if p.norm(&y) == 0.0 {
            break;
        }
        let s = mat_t_vec(a, &duality_map(&y, pv));
        let mut next = duality_map(&s, q);
        let nn = p.norm(&next);
        if nn == 0.0 || !nn.is_finite() {
            break;
        }
        next.iter_mut().for_each(|v| *v /= nn);
        let val = p.norm(&mat_vec(a, &next));
        let step = next.iter().zip(&x).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        x = next;
        if val > best_val {
            best_val = val;
            best_x = x.clone();
        }
        if step < tol {
            break;
        }
    }
    (best_val, best_x)
}

/// Iterates the positive power map for a nonnegative matrix.
fn perron_vector(b: &DMatrix<f64>, p: f64, iterations: usize) -> Vec<f64> {
    let n = b.ncols();
    let mut x = vec![1.0; n];
    for _ in 0..iterations {
        let next = perron_step(b, p, &x);
        let step = next.iter().zip(&x).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        x = next;
        if step < 1e-15 {
            break;
        }
    }
    x
}

fn perron_step(b: &DMatrix<f64>, p: f64, x: &[f64]) -> Vec<f64> {
    let y: Vec<f64> = mat_vec(b, x).iter().map(|v| v.powf(p - 1.0)).collect();
    let s = mat_t_vec(b, &y);
    let mut next: Vec<f64> = s.iter().map(|v| v.powf(1.0 / (p - 1.0))).collect();
    let norm = Exponent::new(p).expect("p >= 1").norm(&next);
    let floor = 1e-150;
    next.iter_mut().for_each(|v| *v = (*v / norm).max(floor));
    next
}

/// Collatz–Wielandt bound: for `B = |A|` and any positive `x`,
/// `‖A‖_p ≤ ‖B‖_p ≤ (max_j [Bᵀ(Bx)^{p-1}]_j / x_j^{p-1})^{1/p}`.
fn cw_bound(b: &DMatrix<f64>, p: f64, x: &[f64]) -> f64 {
    let y: Vec<f64> = mat_vec(b, x).iter().map(|v| v.powf(p - 1.0)).collect();
    let s = mat_t_vec(b, &y);
    let worst =
        s.iter().zip(x).map(|(sj, xj)| if *sj == 0.0 { 0.0 } else { sj / xj.powf(p - 1.0) }).fold(0.0, f64::max);
    worst.powf(1.0 / p)
}

fn positive_certificate(a: &DMatrix<f64>, p: f64, cfg: &OpNormConfig) -> f64 {
    let b = a.map(f64::abs);
    let pe = Exponent::new(p).expect("p >= 1");
    let mut x = vec![1.0; b.ncols()];
    let mut best = cw_bound(&b, p, &x);
    let check_every = 25;
    for it in 0..cfg.certificate_iterations {
        x = perron_step(&b, p, &x);
        if it % check_every == 0 || it + 1 == cfg.certificate_iterations {
            let bound = cw_bound(&b, p, &x);
            best = best.min(bound);
            let value = pe.norm(&mat_vec(&b, &x)) / pe.norm(&x);
            if best - value <= 1e-15 * best {
                break;
            }
        }
    }
    best
}

/// Exact witness for matrices that are sign-equivalent to nonnegative ones.
fn positive_witness_value(a: &DMatrix<f64>, p: f64, cfg: &OpNormConfig) -> Option<f64> {
    let signs = column_signs(a)?;
    let b = a.map(f64::abs);
    let x = perron_vector(&b, p, cfg.certificate_iterations);
    let xs: Vec<f64> = x.iter().zip(&signs).map(|(v, s)| v * s).collect();
    let pe = Exponent::new(p).expect("p >= 1");
    Some(pe.norm(&mat_vec(a, &xs)) / pe.norm(&xs))
}

/// Column signs `c` with `sign(a_ij) = r_i c_j` on every nonzero entry, if any exist.
fn column_signs(a: &DMatrix<f64>) -> Option<Vec<f64>> {
    let (m, n) = a.shape();
    let mut row_sign = vec![0.0f64; m];
    let mut col_sign = vec![0.0f64; n];
    for start in 0..n {
        if col_sign[start] != 0.0 {
            continue;
        }
        col_sign[start] = 1.0;
        let mut stack = vec![(false, start)];
        while let Some((is_row, k)) = stack.pop() {
            if is_row {
                for j in 0..n {
                    let v = a[(k, j)];
                    if v == 0.0 {
                        continue;
                    }
                    let want = v.signum() * row_sign[k];
                    if col_sign[j] == 0.0 {
                        col_sign[j] = want;
                        stack.push((false, j));
                    } else if col_sign[j] != want {
                        return None;
                    }
                }
            } else {
                for i in 0..m {
                    let v = a[(i, k)];
                    if v == 0.0 {
                        continue;
                    }
                    let want = v.signum() * col_sign[k];
                    if row_sign[i] == 0.0 {
                        row_sign[i] = want;
                        stack.push((true, i));
                    } else if row_sign[i] != want {
                        return None;
                    }
                }
            }
        }
    }
    Some(col_sign)
}

/// Drops zero rows and zero columns.
fn prune(a: &DMatrix<f64>) -> DMatrix<f64> {
    let rows: Vec<usize> = (0..a.nrows()).filter(|&i| a.row(i).iter().any(|v| *v != 0.0)).collect();
    let cols: Vec<usize> = (0..a.ncols()).filter(|&j| a.column(j).iter().any(|v| *v != 0.0)).collect();
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

/// Connected components of the bipartite row/column graph of nonzero entries.
fn components(a: &DMatrix<f64>) -> Vec<(Vec<usize>, Vec<usize>)> {
    let (m, n) = a.shape();
    let mut parent: Vec<usize> = (0..m + n).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while parent[r] != r {
            r = parent[r];
        }
        let mut c = x;
        while parent[c] != r {
            let next = parent[c];
            parent[c] = r;
            c = next;
        }
        r
    }
    for i in 0..m {
        for j in 0..n {
            if a[(i, j)] != 0.0 {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, m + j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, (Vec<usize>, Vec<usize>)> = Default::default();
    for i in 0..m {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().0.push(i);
    }
    for j in 0..n {
        let r = find(&mut parent, m + j);
        groups.entry(r).or_default().1.push(j);
    }
    groups.into_values().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn cfg() -> OpNormConfig {
        OpNormConfig::default()
    }

    #[test]
    fn identity_is_one_for_every_p() {
        let id = DMatrix::<f64>::identity(3, 3);
        for p in [1.0, 1.5, 2.0, 3.0, f64::INFINITY] {
            let b = p_norm_bracket(&id, Exponent::new(p).unwrap(), &cfg());
            assert!((b.lower - 1.0).abs() < 1e-12 && (b.upper - 1.0).abs() < 1e-12, "p={p}: {b:?}");
        }
    }

    #[test]
    fn two_by_two_examples() {
        // Extreme points of the ℓ1 ball are ±e_j: ‖A e_0‖_1 = ‖A e_1‖_1 = 1.
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 0.0]);
        let b = p_norm_bracket(&a, Exponent::ONE, &cfg());
        assert_eq!((b.lower, b.upper), (1.0, 1.0));
        // Singular values of [[1,1],[0,0]] are √2 and 0.
        let b = p_norm_bracket(&a, Exponent::TWO, &cfg());
        assert!((b.lower - 2f64.sqrt()).abs() < 1e-12);
        assert!((b.upper - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn empty_and_zero() {
        let e = DMatrix::<f64>::zeros(0, 0);
        assert_eq!(p_norm_bracket(&e, Exponent::new(3.0).unwrap(), &cfg()), NormBracket::zero());
        let z = DMatrix::<f64>::zeros(2, 3);
        assert_eq!(p_norm_bracket(&z, Exponent::new(1.5).unwrap(), &cfg()), NormBracket::zero());
    }

    #[test]
    fn nonnegative_matrices_collapse() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &p in &[1.5, 3.0, 4.0, 1.2] {
            for _ in 0..20 {
                let a = DMatrix::from_fn(4, 5, |_, _| rng.gen_range(0.0..1.0));
                let b = p_norm_bracket(&a, Exponent::new(p).unwrap(), &cfg());
                assert!(b.width() <= 1e-9 * b.upper, "p={p}: {b:?}");
            }
        }
    }

    #[test]
    fn sign_equivalent_matrices_collapse() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = DMatrix::from_fn(3, 4, |_, _| rng.gen_range(0.1..1.0));
        let r = [1.0, -1.0, 1.0];
        let c = [-1.0, 1.0, 1.0, -1.0];
        let s = DMatrix::from_fn(3, 4, |i, j| a[(i, j)] * r[i] * c[j]);
        let p = Exponent::new(1.5).unwrap();
        let b1 = p_norm_bracket(&a, p, &cfg());
        let b2 = p_norm_bracket(&s, p, &cfg());
        assert!(b2.width() <= 1e-9 * b2.upper);
        assert!((b1.lower - b2.lower).abs() < 1e-9);
    }

    #[test]
    fn block_diagonal_takes_max() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, -1.0]);
        // second block is √2 times an orthogonal matrix
        let b = p_norm_bracket(&a, Exponent::TWO, &cfg());
        assert!((b.upper - 2.0).abs() < 1e-12);
    }

    /// Lower end is attained; sampled ratios never exceed the upper end.
    #[test]
    fn bracket_contains_sampled_sup() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = Exponent::new(1.5).unwrap();
        for _ in 0..5 {
            let a = DMatrix::from_fn(3, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
            let b = p_norm_bracket(&a, p, &cfg());
            let mut best = 0.0f64;
            for _ in 0..10_000 {
                let x: Vec<f64> = (0..3).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                best = best.max(p.norm(&mat_vec(&a, &x)) / p.norm(&x));
            }
            assert!(best <= b.upper * (1.0 + 1e-12), "{best} > {b:?}");
            assert!(b.lower <= b.upper);
            assert!(b.lower >= best * (1.0 - 1e-3), "witness search weaker than sampling: {} vs {best}", b.lower);
        }
    }
}
