//! Amplified norms, diamond products and L-tensor norms over ℓp base spaces.

pub mod amplify;
pub mod bracket;
pub mod diamond;
pub mod error;
pub mod exponent;
pub mod gtensor;
pub mod lp;
pub mod measure;
pub mod normed;
pub mod pctensor;
pub mod search;
pub mod suites;

pub use bracket::NormBracket;
pub use error::{Error, Result};
pub use exponent::Exponent;
pub use measure::{pairing, unpairing, MeasureSpace};
pub use normed::FiniteNormedSpace;
