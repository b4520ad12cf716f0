use serde::{Deserialize, Serialize};

use crate::lp::OpNormConfig;

/// Budgets shared by every search-based norm oracle. All randomness is
/// derived from `seed`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Most terms kept in a representation during local search.
    pub term_cap: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Base atoms allowed in witnesses for L-bounded norms.
    pub window: usize,
    #[serde(skip)]
    pub opnorm: OpNormConfig,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { term_cap: 8, restarts: 20, seed: 0, window: 16, opnorm: OpNormConfig::default() }
    }
}

impl SearchConfig {
    pub fn with_seed(seed: u64) -> Self {
        let mut cfg = SearchConfig { seed, ..Default::default() };
        cfg.opnorm.seed = seed ^ 0x5eed_0f1e;
        cfg
    }

    /// Operator-norm settings for inner loops whose values only steer a search.
    pub fn fast_opnorm(&self) -> OpNormConfig {
        OpNormConfig { seed: self.opnorm.seed, ..OpNormConfig::fast() }
    }

    /// Derived configuration for an independent sub-search.
    pub fn fork(&self, salt: u64) -> Self {
        let mix = self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(salt.wrapping_mul(0xbf58_476d_1ce4_e5b9));
        SearchConfig { seed: mix ^ (mix >> 31), opnorm: OpNormConfig { seed: mix, ..self.opnorm }, ..*self }
    }
}
