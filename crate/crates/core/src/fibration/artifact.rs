use serde::{Deserialize, Serialize};

use super::base::FibrationBase;
use super::bump::BumpProfile;
use super::margin::{Margin, MarginGrid, MarginWitness};
use crate::error::{ForgeError, Result};
use crate::grassmann::OrientedTwoPlane;
use crate::numeric::{RealLinearMap, DEFAULT_REAL_TOL};

/// Serialized form of a [`FibrationBase`]. The fibre `P` is the standard
/// plane `span{e₁, e₂}` and `A` is written row by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FibrationArtifact {
    pub n: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub bump: BumpProfile,
    pub epsilon: f64,
    pub epsilon_witness: MarginWitness,
    pub grid_params: MarginGrid,
}

impl FibrationArtifact {
    pub fn from_base(base: &FibrationBase) -> Self {
        Self {
            n: base.n(),
            a: base.a().rows(),
            bump: *base.bump(),
            epsilon: base.epsilon(),
            epsilon_witness: base.margin().witness.clone(),
            grid_params: base.margin().grid,
        }
    }

    /// Rebuilds the base with the stored `ε` and bump; nothing is re-derived
    /// except `J_A`.
    pub fn to_base(&self) -> Result<FibrationBase> {
        let a = RealLinearMap::from_rows(&self.a)?;
        if a.dim() != 2 * self.n {
            return Err(ForgeError::DimensionMismatch(format!(
                "artifact declares n={} but A is {}x{}",
                self.n,
                a.dim(),
                a.dim()
            )));
        }
        let bump = BumpProfile::new(self.bump.r0, self.bump.r1, self.bump.n_exp)?;
        if self.epsilon_witness.v.len() != a.dim() {
            return Err(ForgeError::DimensionMismatch(format!(
                "epsilon witness has length {} but A acts on R^{}",
                self.epsilon_witness.v.len(),
                a.dim()
            )));
        }
        let margin = Margin {
            epsilon: self.epsilon,
            witness: self.epsilon_witness.clone(),
            lambda: f64::NAN,
            grid: self.grid_params,
        };
        FibrationBase::from_parts(a, OrientedTwoPlane::standard(self.n), bump, margin, DEFAULT_REAL_TOL)
    }
}
