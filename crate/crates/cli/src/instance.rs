use std::path::Path;

use multinorm::amplify::{AmplifiedElement, QuantizedSpace};
use multinorm::gtensor::TensorFactors;
use multinorm::{Exponent, FiniteNormedSpace};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// An input file: the element and whichever spaces the chosen norm needs.
///
/// `space` serves `min`/`max`; `left`/`right` serve `beta`, `gnorm` and `pnorm`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub element: AmplifiedElement,
    #[serde(default)]
    pub space: Option<FiniteNormedSpace>,
    #[serde(default)]
    pub left: Option<QuantizedSpace>,
    #[serde(default)]
    pub right: Option<QuantizedSpace>,
}

pub struct Loaded {
    pub instance: Instance,
    pub digest: String,
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let instance: Instance = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Usage(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column())))?;
    let digest = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
    Ok(Loaded { instance, digest })
}

impl Instance {
    /// The element, re-read over ℓp for an overriding `p`.
    pub fn element_with(&self, p: Option<f64>) -> Result<AmplifiedElement, CliError> {
        match p {
            None => Ok(self.element.clone()),
            Some(p) => {
                let p = Exponent::new(p)?;
                Ok(AmplifiedElement::new(p, self.element.dim(), self.element.rows().clone())?)
            }
        }
    }

    /// `space`, or `ℓq` of the element's dimension when only `q` is given.
    pub fn single_space(&self, q: Option<f64>) -> Result<FiniteNormedSpace, CliError> {
        match (&self.space, q) {
            (Some(s), _) => Ok(s.clone()),
            (None, Some(q)) => Ok(FiniteNormedSpace::lq(Exponent::new(q)?, self.element.dim())),
            (None, None) => Err(CliError::Usage("instance has no \"space\"; pass --q or add one".into())),
        }
    }

    pub fn factors(&self) -> Result<TensorFactors, CliError> {
        match (&self.left, &self.right) {
            (Some(l), Some(r)) => Ok(TensorFactors::new(l.clone(), r.clone())),
            _ => Err(CliError::Usage("instance needs both \"left\" and \"right\" factors".into())),
        }
    }
}
