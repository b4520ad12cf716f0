use std::fmt;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// An exponent `p` in `[1, ∞]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Exponent(f64);

impl Exponent {
    pub const ONE: Exponent = Exponent(1.0);
    pub const TWO: Exponent = Exponent(2.0);
    pub const INFINITY: Exponent = Exponent(f64::INFINITY);

    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::OutOfRange(format!("exponent must lie in [1, inf], got {p}")));
        }
        Ok(Exponent(p))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    pub fn is_one(self) -> bool {
        self.0 == 1.0
    }

    pub fn is_two(self) -> bool {
        self.0 == 2.0
    }

    /// `true` for 1 < p < ∞.
    pub fn is_interior(self) -> bool {
        self.0 > 1.0 && self.0.is_finite()
    }

    /// Conjugate exponent, 1 and ∞ being mutually conjugate.
    pub fn conjugate(self) -> Exponent {
        if self.0 == 1.0 {
            Exponent::INFINITY
        } else if self.0.is_infinite() {
            Exponent::ONE
        } else {
            Exponent(self.0 / (self.0 - 1.0))
        }
    }

    /// `(Σ λ_k^p)^{1/p}` for nonnegative `λ_k`, read as the maximum when p = ∞.
    pub fn combine<I: IntoIterator<Item = f64>>(self, values: I) -> f64 {
        if self.is_infinite() {
            return values.into_iter().fold(0.0, f64::max);
        }
        let vals: Vec<f64> = values.into_iter().collect();
        let scale = vals.iter().copied().fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        if !scale.is_finite() {
            return f64::INFINITY;
        }
        let s: f64 = vals.iter().map(|v| (v / scale).powf(self.0)).sum();
        scale * s.powf(1.0 / self.0)
    }

    /// Weighted norm `(Σ w_i |x_i|^p)^{1/p}`, or `max |x_i|` at p = ∞ (positive weights).
    pub fn weighted_norm<I: IntoIterator<Item = (f64, f64)>>(self, entries: I) -> f64 {
        if self.is_infinite() {
            return entries.into_iter().filter(|(w, _)| *w > 0.0).map(|(_, x)| x.abs()).fold(0.0, f64::max);
        }
        let p = self.0;
        self.combine(entries.into_iter().map(|(w, x)| w.powf(1.0 / p) * x.abs()))
    }

    pub fn norm(self, x: &[f64]) -> f64 {
        self.combine(x.iter().map(|v| v.abs()))
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let p = match Raw::deserialize(d)? {
            Raw::Num(v) => v,
            Raw::Text(t) => parse_exponent_text(&t).map_err(de::Error::custom)?,
        };
        Exponent::new(p).map_err(de::Error::custom)
    }
}

fn parse_exponent_text(t: &str) -> std::result::Result<f64, String> {
    match t.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "∞" => Ok(f64::INFINITY),
        other => other.parse::<f64>().map_err(|e| format!("bad exponent {t:?}: {e}")),
    }
}

impl std::str::FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let p = parse_exponent_text(s).map_err(Error::Invalid)?;
        Exponent::new(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conjugates() {
        assert_eq!(Exponent::ONE.conjugate(), Exponent::INFINITY);
        assert_eq!(Exponent::INFINITY.conjugate(), Exponent::ONE);
        assert_eq!(Exponent::TWO.conjugate(), Exponent::TWO);
        let p = Exponent::new(3.0).unwrap();
        assert!((p.conjugate().value() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_below_one() {
        assert!(Exponent::new(0.5).is_err());
        assert!(Exponent::new(f64::NAN).is_err());
    }

    #[test]
    fn combine_uses_max_at_infinity() {
        assert_eq!(Exponent::INFINITY.combine([1.0, 3.0, 2.0]), 3.0);
        assert!((Exponent::TWO.combine([3.0, 4.0]) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let p: Exponent = serde_json::from_str("\"inf\"").unwrap();
        assert!(p.is_infinite());
        assert_eq!(serde_json::to_string(&p).unwrap(), "\"inf\"");
        let q: Exponent = serde_json::from_str("1.5").unwrap();
        assert_eq!(q.value(), 1.5);
        assert!(serde_json::from_str::<Exponent>("0.2").is_err());
    }
}
