//! Amplified elements `u ∈ L ⊗ E`, their quantizations, and amplified maps.

mod beta;
mod element;
mod linear;
pub mod projective;
mod quant;

pub(crate) use beta::base_functionals;
pub use beta::{beta_norm, BetaResult};
pub use element::AmplifiedElement;
pub use linear::{amplify_bilinear, lbounded_norm_bilinear, lbounded_norm_linear, BilinearMap, LBoundedNorm};
pub(crate) use quant::check_dim;
pub use quant::{
    max_norm, max_norm_with_decomposition, min_norm, underlying_norm, AmplifiedNorm, Quantization, QuantizedSpace,
};
