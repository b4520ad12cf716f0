//! Finite-dimensional normed spaces `E`, their duals, and norms of maps between them.

mod mixed;
mod space;

pub use mixed::{mixed_norm_bracket, mixed_norm_witness};
pub use space::{FiniteNormedSpace, NormKind};
