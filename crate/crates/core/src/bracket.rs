use serde::{Deserialize, Serialize};

/// A certified enclosure `[lower, upper]` of a norm defined by a sup or an inf.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormBracket {
    pub lower: f64,
    pub upper: f64,
}

impl NormBracket {
    /// Builds a bracket, repairing round-off inversions (a witness value that
    /// lands a few ulps above an analytic bound).
    pub fn new(lower: f64, upper: f64) -> Self {
        debug_assert!(lower <= upper * (1.0 + 1e-8) + 1e-12, "inverted bracket [{lower}, {upper}]");
        let lower = lower.max(0.0);
        let upper = upper.max(lower);
        NormBracket { lower, upper }
    }

    pub fn exact(value: f64) -> Self {
        NormBracket::new(value, value)
    }

    pub fn zero() -> Self {
        NormBracket { lower: 0.0, upper: 0.0 }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn is_exact(&self, tol: f64) -> bool {
        self.width() <= tol * self.upper.max(1.0)
    }

    pub fn contains(&self, value: f64, tol: f64) -> bool {
        value >= self.lower - tol && value <= self.upper + tol
    }

    pub fn overlaps(&self, other: &NormBracket, tol: f64) -> bool {
        self.lower <= other.upper + tol && other.lower <= self.upper + tol
    }

    /// Tightest bracket consistent with both enclosures of the same quantity.
    pub fn intersect(&self, other: &NormBracket) -> NormBracket {
        NormBracket::new(self.lower.max(other.lower), self.upper.min(other.upper))
    }

    pub fn scale(&self, c: f64) -> NormBracket {
        let c = c.abs();
        NormBracket::new(self.lower * c, self.upper * c)
    }

    /// Product of two nonnegative enclosed quantities.
    pub fn times(&self, other: &NormBracket) -> NormBracket {
        NormBracket::new(self.lower * other.lower, self.upper * other.upper)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repairs_inverted_roundoff() {
        let b = NormBracket::new(1.0 + 1e-16, 1.0);
        assert!(b.lower <= b.upper);
    }

    #[test]
    fn intersect_and_overlap() {
        let a = NormBracket::new(1.0, 3.0);
        let b = NormBracket::new(2.0, 4.0);
        assert!(a.overlaps(&b, 0.0));
        assert_eq!(a.intersect(&b), NormBracket::new(2.0, 3.0));
        assert!(!a.overlaps(&NormBracket::new(3.5, 4.0), 0.0));
    }
}
