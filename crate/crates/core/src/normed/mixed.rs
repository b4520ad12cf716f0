//! Norms of matrices between two finite normed spaces,
//! `sup ‖Ax‖_to / ‖x‖_from`.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::space::{FiniteNormedSpace, NormKind};
use crate::bracket::NormBracket;
use crate::exponent::Exponent;
use crate::lp::opnorm::{mat_t_vec, mat_vec, p_norm_bracket, spectral_norm, OpNormConfig};

/// Bracket on the norm of `a : from → to` (`a` is `to.dim × from.dim`).
pub fn mixed_norm_bracket(
    a: &DMatrix<f64>,
    from: &FiniteNormedSpace,
    to: &FiniteNormedSpace,
    cfg: &OpNormConfig,
) -> NormBracket {
    assert_eq!(a.shape(), (to.dim(), from.dim()), "matrix shape must be to.dim x from.dim");
    if a.iter().all(|v| *v == 0.0) {
        return NormBracket::zero();
    }
    if let Some(b) = exact_bracket(a, from, to, cfg) {
        return b;
    }
    let (lower, _) = mixed_norm_witness(a, from, to, cfg);
    NormBracket::new(lower, upper_bound(a, from, to, cfg).max(lower))
}

fn column(a: &DMatrix<f64>, j: usize) -> Vec<f64> {
    a.column(j).iter().copied().collect()
}

fn row(a: &DMatrix<f64>, i: usize) -> Vec<f64> {
    a.row(i).iter().copied().collect()
}

fn exact_bracket(
    a: &DMatrix<f64>,
    from: &FiniteNormedSpace,
    to: &FiniteNormedSpace,
    cfg: &OpNormConfig,
) -> Option<NormBracket> {
    // Extreme points of the source ball.
    match from.kind() {
        NormKind::Lq { q, scales } if q.is_one() => {
            let v = (0..a.ncols()).map(|j| to.norm(&column(a, j)) / scales[j]).fold(0.0, f64::max);
            return Some(NormBracket::exact(v));
        }
        NormKind::Gauge { samples } => {
            let v = samples.iter().map(|s| to.norm(&mat_vec(a, s))).fold(0.0, f64::max);
            return Some(NormBracket::exact(v));
        }
        _ => {}
    }
    // Extreme points of the target's dual ball.
    match to.kind() {
        NormKind::Lq { q, scales } if q.is_infinite() => {
            let v = (0..a.nrows()).map(|i| scales[i] * from.dual_norm_value(&row(a, i))).fold(0.0, f64::max);
            return Some(NormBracket::exact(v));
        }
        NormKind::Polyhedral { functionals } => {
            let v = functionals.iter().map(|g| from.dual_norm_value(&mat_t_vec(a, g))).fold(0.0, f64::max);
            return Some(NormBracket::exact(v));
        }
        _ => {}
    }
    let (NormKind::Lq { q: qf, scales: sf }, NormKind::Lq { q: qt, scales: st }) = (from.kind(), to.kind()) else {
        return None;
    };
    let b = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| st[i] * a[(i, j)] / sf[j]);
    if qf == qt {
        return Some(p_norm_bracket(&b, *qf, cfg));
    }
    None
}

/// Best value of the generalised power iteration `x ← J_from^*(Aᵀ J_to(Ax))`
/// together with its (unit) witness.
pub fn mixed_norm_witness(
    a: &DMatrix<f64>,
    from: &FiniteNormedSpace,
    to: &FiniteNormedSpace,
    cfg: &OpNormConfig,
) -> (f64, Vec<f64>) {
    let n = a.ncols();
    let mut starts: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    for i in 0..a.nrows() {
        starts.push(from.norming_vector(&row(a, i)));
    }
    if !a.is_empty() {
        let svd = a.clone().svd(false, true);
        if let Some(vt) = svd.v_t {
            starts.push(vt.row(svd.singular_values.imax()).iter().copied().collect());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xa5a5 ^ (n as u64));
    for _ in 0..cfg.starts {
        starts.push((0..n).map(|_| StandardNormal.sample(&mut rng)).collect());
    }
    let mut best = (0.0, vec![0.0; n]);
    for x in starts {
        let (v, x) = ascend(a, from, to, x, cfg.iterations, cfg.tol);
        if v > best.0 {
            best = (v, x);
        }
    }
    best
}

fn ascend(
    a: &DMatrix<f64>,
    from: &FiniteNormedSpace,
    to: &FiniteNormedSpace,
    x0: Vec<f64>,
    iterations: usize,
    tol: f64,
) -> (f64, Vec<f64>) {
    let nx = from.norm(&x0);
    if nx == 0.0 {
        return (0.0, x0);
    }
    let mut x: Vec<f64> = x0.iter().map(|v| v / nx).collect();
    let mut val = to.norm(&mat_vec(a, &x));
    for _ in 0..iterations {
        let y = mat_vec(a, &x);
        let g = to.norming_functional(&y);
        let h = mat_t_vec(a, &g);
        let next = from.norming_vector(&h);
        let nn = from.norm(&next);
        if nn == 0.0 {
            break;
        }
        let next: Vec<f64> = next.iter().map(|v| v / nn).collect();
        let next_val = to.norm(&mat_vec(a, &next));
        if next_val <= val * (1.0 + tol) {
            if next_val > val {
                x = next;
                val = next_val;
            }
            break;
        }
        x = next;
        val = next_val;
    }
    (val, x)
}

fn identity_norm(from: Exponent, to: Exponent, n: usize) -> f64 {
    // ‖id : ℓ_from^n → ℓ_to^n‖
    let inv = |e: Exponent| if e.is_infinite() { 0.0 } else { 1.0 / e.value() };
    if to.value() >= from.value() {
        1.0
    } else {
        (n as f64).powf(inv(to) - inv(from))
    }
}

fn upper_bound(a: &DMatrix<f64>, from: &FiniteNormedSpace, to: &FiniteNormedSpace, cfg: &OpNormConfig) -> f64 {
    let mut best = column_bound(a, from, to);
    if let NormKind::Lq { q: qt, scales: st } = to.kind() {
        let rows = (0..a.nrows()).map(|i| st[i] * from.dual_norm_value(&row(a, i)));
        best = best.min(qt.combine(rows));
    }
    if let (NormKind::Lq { q: qf, scales: sf }, NormKind::Lq { q: qt, scales: st }) = (from.kind(), to.kind()) {
        let b = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| st[i] * a[(i, j)] / sf[j]);
        let (m, n) = b.shape();
        let via_from = p_norm_bracket(&b, *qf, cfg).upper * identity_norm(*qf, *qt, m);
        let via_to = identity_norm(*qf, *qt, n) * p_norm_bracket(&b, *qt, cfg).upper;
        let via_two = identity_norm(*qf, Exponent::TWO, n) * spectral_norm(&b) * identity_norm(Exponent::TWO, *qt, m);
        best = best.min(via_from).min(via_to).min(via_two);
    }
    best
}

/// `‖Ax‖ ≤ Σ|x_j| ‖a_j‖ ≤ ‖x‖ · sup_{‖x‖≤1} Σ|x_j| c_j`.
fn column_bound(a: &DMatrix<f64>, from: &FiniteNormedSpace, to: &FiniteNormedSpace) -> f64 {
    let c: Vec<f64> = (0..a.ncols()).map(|j| to.norm(&column(a, j))).collect();
    let n = c.len();
    match from.kind() {
        // Lq norms are monotone, so the sup sits at nonnegative x.
        NormKind::Lq { .. } => from.dual_norm_value(&c),
        _ if n <= 12 => (0..1u32 << n)
            .map(|mask| {
                let f: Vec<f64> = c.iter().enumerate().map(|(j, v)| if mask >> j & 1 == 1 { -v } else { *v }).collect();
                from.dual_norm_value(&f)
            })
            .fold(0.0, f64::max),
        _ => c.iter().enumerate().map(|(j, v)| v * from.coordinate_dual_norm(j)).sum(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn cfg() -> OpNormConfig {
        OpNormConfig::default()
    }

    fn sampled_sup(a: &DMatrix<f64>, from: &FiniteNormedSpace, to: &FiniteNormedSpace, rng: &mut ChaCha8Rng) -> f64 {
        (0..5000)
            .map(|_| {
                let x: Vec<f64> = (0..a.ncols()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                to.norm(&mat_vec(a, &x)) / from.norm(&x)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn brackets_enclose_samples_across_families() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let custom =
            FiniteNormedSpace::custom(vec![vec![1.0, 0.0, 0.5], vec![0.2, 1.0, 0.0], vec![0.0, -0.3, 1.0]]).unwrap();
        let spaces = vec![
            FiniteNormedSpace::lq(Exponent::ONE, 3),
            FiniteNormedSpace::lq(Exponent::new(1.5).unwrap(), 3),
            FiniteNormedSpace::weighted_lq(Exponent::TWO, &[1.0, 2.0, 0.5]).unwrap(),
            FiniteNormedSpace::lq(Exponent::new(4.0).unwrap(), 3),
            FiniteNormedSpace::lq(Exponent::INFINITY, 3),
            custom.clone(),
            custom.dual(),
        ];
        for from in &spaces {
            for to in &spaces {
                let a = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
                let b = mixed_norm_bracket(&a, from, to, &cfg());
                let s = sampled_sup(&a, from, to, &mut rng);
                assert!(s <= b.upper * (1.0 + 1e-9), "{} -> {}: {s} > {b:?}", from.family(), to.family());
                assert!(b.lower <= b.upper);
                assert!(b.lower >= 0.9 * s, "{} -> {}: weak witness {b:?} vs {s}", from.family(), to.family());
            }
        }
    }

    #[test]
    fn l2_to_l2_is_spectral() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        let l2 = FiniteNormedSpace::lq(Exponent::TWO, 2);
        let b = mixed_norm_bracket(&a, &l2, &l2, &cfg());
        assert!((b.lower - 2f64.sqrt()).abs() < 1e-12 && b.is_exact(1e-12));
    }
}
