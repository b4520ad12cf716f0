//! The metric diamond `ξ ◇ η` on ℓp(ℕ), induced by the Cantor pairing of atoms,
//! and its extensions to amplified elements.

use std::collections::BTreeMap;

use crate::amplify::AmplifiedElement;
use crate::error::{Error, Result};
use crate::exponent::Exponent;
use crate::lp::{LpOperator, LpVector};
use crate::measure::pairing;

fn check_exponents(a: Exponent, b: Exponent) -> Result<()> {
    if a != b {
        return Err(Error::ExponentMismatch { left: a.value(), right: b.value() });
    }
    Ok(())
}

fn check_counting(v: &LpVector) -> Result<()> {
    if !v.space().is_counting() {
        return Err(Error::Unsupported("the diamond needs the counting base ℓp(ℕ)".into()));
    }
    Ok(())
}

/// `(ξ ◇ η)_{pairing(m,n)} = ξ_m η_n`.
pub fn diamond_base(xi: &LpVector, eta: &LpVector) -> Result<LpVector> {
    check_exponents(xi.p(), eta.p())?;
    check_counting(xi)?;
    check_counting(eta)?;
    let entries =
        xi.entries().iter().flat_map(|(&m, &a)| eta.entries().iter().map(move |(&n, &b)| (pairing(m, n), a * b)));
    Ok(LpVector::counting(xi.p(), entries))
}

/// `ξ ◇ u`, i.e. `T_ξ` applied to every base coefficient of `u`.
pub fn diamond_left(xi: &LpVector, u: &AmplifiedElement) -> Result<AmplifiedElement> {
    check_exponents(xi.p(), u.p())?;
    check_counting(xi)?;
    let rows = xi
        .entries()
        .iter()
        .flat_map(|(&m, &a)| u.rows().iter().map(move |(&n, r)| (pairing(m, n), r.iter().map(|v| a * v).collect())));
    AmplifiedElement::new(u.p(), u.dim(), rows)
}

/// `u ◇ η`.
pub fn diamond_right(u: &AmplifiedElement, eta: &LpVector) -> Result<AmplifiedElement> {
    check_exponents(eta.p(), u.p())?;
    check_counting(eta)?;
    let rows = u.rows().iter().flat_map(|(&m, r)| {
        eta.entries().iter().map(move |(&n, &b)| (pairing(m, n), r.iter().map(|v| v * b).collect()))
    });
    AmplifiedElement::new(u.p(), u.dim(), rows)
}

/// `u ◇ v ∈ L(E ⊗ F)`, with coordinate `(j, l)` stored at `j · dim F + l`.
pub fn diamond_amp(u: &AmplifiedElement, v: &AmplifiedElement) -> Result<AmplifiedElement> {
    check_exponents(u.p(), v.p())?;
    let (de, df) = (u.dim(), v.dim());
    let mut rows: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for (&m, a) in u.rows() {
        for (&n, b) in v.rows() {
            let row = rows.entry(pairing(m, n)).or_insert_with(|| vec![0.0; de * df]);
            for j in 0..de {
                for l in 0..df {
                    row[j * df + l] += a[j] * b[l];
                }
            }
        }
    }
    AmplifiedElement::new(u.p(), de * df, rows)
}

/// Matrix of `T_ξ : η ↦ ξ ◇ η` restricted to a domain window.
pub fn diamond_operator(xi: &LpVector, window: &[u64]) -> LpOperator {
    LpOperator::from_triplets(
        xi.p(),
        xi.entries().iter().flat_map(|(&m, &a)| window.iter().map(move |&n| (pairing(m, n), n, a))),
    )
}
