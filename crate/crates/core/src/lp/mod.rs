//! Sequences and windowed operators on `Lp` of an atomic measure space.

mod isometry;
mod operator;
pub mod opnorm;
mod vector;

pub use isometry::{block_assemble, disjoint_isometries, projection_mask, proper_projection, ProperIsometry};
pub use operator::LpOperator;
pub use opnorm::OpNormConfig;
pub use vector::LpVector;
