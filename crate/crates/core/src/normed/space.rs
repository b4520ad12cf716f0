use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bracket::NormBracket;
use crate::error::{Error, Result};
use crate::exponent::Exponent;

/// How the norm of a [`FiniteNormedSpace`] is evaluated.
#[derive(Clone, Debug, PartialEq)]
pub enum NormKind {
    /// `‖x‖ = ‖(s_j x_j)_j‖_q`; a weighted `Lq` over finitely many atoms
    /// with weights `w_j = s_j^q`.
    Lq { q: Exponent, scales: Vec<f64> },
    /// Unit ball is the absolutely convex hull of the samples.
    Gauge { samples: Vec<Vec<f64>> },
    /// `‖x‖ = max_k |g_k · x|`; the dual of a gauge.
    Polyhedral { functionals: Vec<Vec<f64>> },
}

/// A finite-dimensional real normed space with exact norm and dual-norm oracles.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteNormedSpace {
    dim: usize,
    kind: NormKind,
}

impl FiniteNormedSpace {
    /// Unweighted `ℓq^dim`.
    pub fn lq(q: Exponent, dim: usize) -> Self {
        FiniteNormedSpace { dim, kind: NormKind::Lq { q, scales: vec![1.0; dim] } }
    }

    /// `Lq` of the finite atomic space with the given weights.
    pub fn weighted_lq(q: Exponent, weights: &[f64]) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::invalid(format!("atom weight {w} must be positive and finite")));
        }
        let scales = if q.is_infinite() {
            vec![1.0; weights.len()]
        } else {
            weights.iter().map(|w| w.powf(1.0 / q.value())).collect()
        };
        Ok(FiniteNormedSpace { dim: weights.len(), kind: NormKind::Lq { q, scales } })
    }

    /// Space whose unit ball is the absolutely convex hull of `samples`.
    pub fn custom(samples: Vec<Vec<f64>>) -> Result<Self> {
        let dim = spanning_dim(&samples, "unit ball samples")?;
        Ok(FiniteNormedSpace { dim, kind: NormKind::Gauge { samples } })
    }

    /// Space normed by `max_k |g_k · x|`.
    pub fn polyhedral(functionals: Vec<Vec<f64>>) -> Result<Self> {
        let dim = spanning_dim(&functionals, "norming functionals")?;
        Ok(FiniteNormedSpace { dim, kind: NormKind::Polyhedral { functionals } })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &NormKind {
        &self.kind
    }

    pub fn family(&self) -> &'static str {
        match self.kind {
            NormKind::Lq { .. } => "lq",
            NormKind::Gauge { .. } => "custom",
            NormKind::Polyhedral { .. } => "polyhedral",
        }
    }

    pub fn lq_params(&self) -> Option<(Exponent, &[f64])> {
        match &self.kind {
            NormKind::Lq { q, scales } => Some((*q, scales)),
            _ => None,
        }
    }

    /// Atom weights of an `Lq` space.
    pub fn weights(&self) -> Option<Vec<f64>> {
        let (q, scales) = self.lq_params()?;
        Some(if q.is_infinite() { vec![1.0; scales.len()] } else { scales.iter().map(|s| s.powf(q.value())).collect() })
    }

    pub fn exponent(&self) -> Option<Exponent> {
        self.lq_params().map(|(q, _)| q)
    }

    pub fn is_lq_with(&self, pred: impl Fn(Exponent) -> bool) -> bool {
        self.exponent().is_some_and(pred)
    }

    pub fn norm(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        match &self.kind {
            NormKind::Lq { q, scales } => q.combine(x.iter().zip(scales).map(|(v, s)| (v * s).abs())),
            NormKind::Polyhedral { functionals } => max_abs_pairing(functionals, x),
            NormKind::Gauge { samples } => gauge_lp(samples, x).0,
        }
    }

    /// `sup{|f·x| : ‖x‖ ≤ 1}`; exact for every family.
    pub fn dual_norm(&self, f: &[f64]) -> NormBracket {
        NormBracket::exact(self.dual_norm_value(f))
    }

    pub fn dual_norm_value(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.dim);
        match &self.kind {
            NormKind::Lq { q, scales } => q.conjugate().combine(f.iter().zip(scales).map(|(v, s)| (v / s).abs())),
            NormKind::Gauge { samples } => max_abs_pairing(samples, f),
            NormKind::Polyhedral { functionals } => gauge_lp(functionals, f).0,
        }
    }

    pub fn dual(&self) -> FiniteNormedSpace {
        let kind = match &self.kind {
            NormKind::Lq { q, scales } => {
                NormKind::Lq { q: q.conjugate(), scales: scales.iter().map(|s| 1.0 / s).collect() }
            }
            NormKind::Gauge { samples } => NormKind::Polyhedral { functionals: samples.clone() },
            NormKind::Polyhedral { functionals } => NormKind::Gauge { samples: functionals.clone() },
        };
        FiniteNormedSpace { dim: self.dim, kind }
    }

    /// A functional `f` with `f·x = ‖x‖` and dual norm at most one.
    pub fn norming_functional(&self, x: &[f64]) -> Vec<f64> {
        let n = self.norm(x);
        if n == 0.0 {
            return vec![0.0; self.dim];
        }
        match &self.kind {
            NormKind::Lq { q, scales } => {
                let y: Vec<f64> = x.iter().zip(scales).map(|(v, s)| v * s).collect();
                if q.is_infinite() {
                    let k = argmax_abs(&y);
                    let mut f = vec![0.0; self.dim];
                    f[k] = scales[k] * y[k].signum();
                    return f;
                }
                let qv = q.value();
                y.iter()
                    .zip(scales)
                    .map(|(t, s)| {
                        let r = t.abs() / n;
                        let d = if qv == 1.0 { 1.0 } else { r.powf(qv - 1.0) };
                        if *t == 0.0 {
                            0.0
                        } else {
                            s * t.signum() * d
                        }
                    })
                    .collect()
            }
            NormKind::Polyhedral { functionals } => {
                let (k, v) = functionals
                    .iter()
                    .map(|g| dot(g, x))
                    .enumerate()
                    .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                    .expect("nonempty family");
                functionals[k].iter().map(|g| g * v.signum()).collect()
            }
            NormKind::Gauge { samples } => gauge_lp(samples, x).1,
        }
    }

    /// A vector `x` with `‖x‖ = 1` and `f·x = ‖f‖_*`.
    pub fn norming_vector(&self, f: &[f64]) -> Vec<f64> {
        self.dual().norming_functional(f)
    }

    /// `‖e_j‖`.
    pub fn basis_norm(&self, j: usize) -> f64 {
        let mut e = vec![0.0; self.dim];
        e[j] = 1.0;
        self.norm(&e)
    }

    /// `‖e_j^*‖_*`, the dual norm of the coordinate functional.
    pub fn coordinate_dual_norm(&self, j: usize) -> f64 {
        let mut e = vec![0.0; self.dim];
        e[j] = 1.0;
        self.dual_norm_value(&e)
    }
}

fn spanning_dim(vectors: &[Vec<f64>], what: &str) -> Result<usize> {
    let Some(first) = vectors.first() else {
        return Err(Error::invalid(format!("{what}: empty family")));
    };
    let dim = first.len();
    if dim == 0 || vectors.iter().any(|v| v.len() != dim) {
        return Err(Error::invalid(format!("{what}: inconsistent or zero lengths")));
    }
    if vectors.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{what}: non-finite entry")));
    }
    let m = DMatrix::from_fn(dim, vectors.len(), |i, k| vectors[k][i]);
    if m.rank(1e-10) < dim {
        return Err(Error::invalid(format!("{what} do not span the space")));
    }
    Ok(dim)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs_pairing(family: &[Vec<f64>], x: &[f64]) -> f64 {
    family.iter().map(|g| dot(g, x).abs()).fold(0.0, f64::max)
}

fn argmax_abs(v: &[f64]) -> usize {
    v.iter().enumerate().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())).map(|(k, _)| k).unwrap_or(0)
}

/// Gauge of the absolutely convex hull of `samples` at `x`, computed as
/// `max f·x` subject to `|f·s_k| ≤ 1`; returns the value and the optimal `f`.
fn gauge_lp(samples: &[Vec<f64>], x: &[f64]) -> (f64, Vec<f64>) {
    if x.iter().all(|v| *v == 0.0) {
        return (0.0, vec![0.0; x.len()]);
    }
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = x.iter().map(|&c| lp.add_var(c, (f64::NEG_INFINITY, f64::INFINITY))).collect();
    for s in samples {
        let expr: Vec<_> = vars.iter().zip(s).map(|(v, c)| (*v, *c)).collect();
        lp.add_constraint(expr.as_slice(), ComparisonOp::Le, 1.0);
        lp.add_constraint(expr.as_slice(), ComparisonOp::Ge, -1.0);
    }
    let sol = lp.solve().expect("spanning samples give a bounded feasible program");
    (sol.objective(), vars.iter().map(|v| sol[*v]).collect())
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
enum RawSpace {
    Lq {
        q: Exponent,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dim: Option<usize>,
    },
    Custom {
        unit_ball_samples: Vec<Vec<f64>>,
    },
    Polyhedral {
        functionals: Vec<Vec<f64>>,
    },
}

impl Serialize for FiniteNormedSpace {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let raw = match &self.kind {
            NormKind::Lq { q, .. } => RawSpace::Lq { q: *q, weights: self.weights(), dim: None },
            NormKind::Gauge { samples } => RawSpace::Custom { unit_ball_samples: samples.clone() },
            NormKind::Polyhedral { functionals } => RawSpace::Polyhedral { functionals: functionals.clone() },
        };
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for FiniteNormedSpace {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let built = match RawSpace::deserialize(d)? {
            RawSpace::Lq { q, weights: Some(w), dim } => {
                if dim.is_some_and(|n| n != w.len()) {
                    return Err(D::Error::custom("dim disagrees with the number of weights"));
                }
                FiniteNormedSpace::weighted_lq(q, &w)
            }
            RawSpace::Lq { q, weights: None, dim: Some(n) } => Ok(FiniteNormedSpace::lq(q, n)),
            RawSpace::Lq { weights: None, dim: None, .. } => {
                return Err(D::Error::custom("lq space needs weights or dim"))
            }
            RawSpace::Custom { unit_ball_samples } => FiniteNormedSpace::custom(unit_ball_samples),
            RawSpace::Polyhedral { functionals } => FiniteNormedSpace::polyhedral(functionals),
        };
        built.map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dual_norm_examples() {
        let l2 = FiniteNormedSpace::lq(Exponent::TWO, 2);
        assert_eq!(l2.dual_norm(&[3.0, 4.0]), NormBracket::exact(5.0));
        let l1 = FiniteNormedSpace::lq(Exponent::ONE, 2);
        assert_eq!(l1.dual_norm(&[3.0, -4.0]), NormBracket::exact(4.0));
        let w = FiniteNormedSpace::weighted_lq(Exponent::TWO, &[2.0, 0.5]).unwrap();
        let b = w.dual_norm(&[1.0, 1.0]);
        assert!((b.lower - 2.5f64.sqrt()).abs() < 1e-15);
    }

    /// Brute-force maximisation of `f·x` over the boundary of the weighted ball.
    #[test]
    fn weighted_dual_matches_brute_force() {
        let w = FiniteNormedSpace::weighted_lq(Exponent::TWO, &[2.0, 0.5]).unwrap();
        let best = (0..20_000)
            .map(|k| {
                let t = k as f64 * std::f64::consts::TAU / 20_000.0;
                // (√2 x_0, x_1/√2) on the unit circle
                let x = [t.cos() / 2f64.sqrt(), t.sin() * 2f64.sqrt()];
                x[0] + x[1]
            })
            .fold(f64::MIN, f64::max);
        assert!((best - w.dual_norm_value(&[1.0, 1.0])).abs() < 1e-6);
    }

    #[test]
    fn custom_square_is_l_infinity() {
        let sq = FiniteNormedSpace::custom(vec![vec![1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        assert!((sq.norm(&[0.3, -0.7]) - 0.7).abs() < 1e-12);
        assert!((sq.dual_norm_value(&[0.3, -0.7]) - 1.0).abs() < 1e-12);
        let f = sq.norming_functional(&[0.3, -0.7]);
        assert!((dot(&f, &[0.3, -0.7]) - 0.7).abs() < 1e-12);
        assert!(sq.dual_norm_value(&f) <= 1.0 + 1e-12);
        assert!(FiniteNormedSpace::custom(vec![vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn json_families() {
        let s: FiniteNormedSpace = serde_json::from_str(r#"{"family":"lq","q":2,"weights":[1,1,1]}"#).unwrap();
        assert_eq!(s, FiniteNormedSpace::lq(Exponent::TWO, 3));
        let c: FiniteNormedSpace =
            serde_json::from_str(r#"{"family":"custom","unit_ball_samples":[[1,0],[0,1]]}"#).unwrap();
        assert!((c.norm(&[1.0, -2.0]) - 3.0).abs() < 1e-12);
        let back: FiniteNormedSpace = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    /// Hölder duality: random functionals never beat the norm, and the
    /// analytic norming functional attains it.
    #[test]
    fn duality_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for q in [1.0, 1.5, 2.0, 4.0, f64::INFINITY] {
            let q = Exponent::new(q).unwrap();
            let weights: Vec<f64> = (0..4).map(|_| rng.gen_range(0.2..3.0)).collect();
            let e = FiniteNormedSpace::weighted_lq(q, &weights).unwrap();
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let nx = e.norm(&x);
            let sampled = (0..1000)
                .map(|_| {
                    let f: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    dot(&f, &x).abs() / e.dual_norm_value(&f)
                })
                .fold(0.0, f64::max);
            assert!(sampled <= nx * (1.0 + 1e-12));
            let f = e.norming_functional(&x);
            assert!((dot(&f, &x) - nx).abs() <= 1e-9 * nx);
            assert!(e.dual_norm_value(&f) <= 1.0 + 1e-9);
        }
    }

    proptest! {
        #[test]
        fn norm_axioms(
            x in proptest::collection::vec(-5.0f64..5.0, 3),
            y in proptest::collection::vec(-5.0f64..5.0, 3),
            c in -3.0f64..3.0,
            q in prop_oneof![Just(1.0), Just(1.5), Just(2.0), Just(3.0), Just(f64::INFINITY)],
        ) {
            let e = FiniteNormedSpace::weighted_lq(Exponent::new(q).unwrap(), &[0.5, 1.0, 2.0]).unwrap();
            let g = FiniteNormedSpace::custom(vec![vec![1.0, 0.0, 0.0], vec![1.0, 1.0, 0.0], vec![0.0, 1.0, 1.0], vec![0.0, 0.0, 2.0]]).unwrap();
            for s in [&e, &g] {
                let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
                prop_assert!(s.norm(&sum) <= s.norm(&x) + s.norm(&y) + 1e-9);
                let cx: Vec<f64> = x.iter().map(|a| c * a).collect();
                prop_assert!((s.norm(&cx) - c.abs() * s.norm(&x)).abs() <= 1e-9 * (1.0 + s.norm(&x)));
                if x.iter().any(|v| *v != 0.0) {
                    prop_assert!(s.norm(&x) > 0.0);
                }
            }
        }
    }
}
