//! Construction, deformation and certification of great-circle fibrations
//! of odd-dimensional spheres.
//!
//! The pipeline retracts a linear map without real eigenvalues to an
//! orthogonal complex structure ([`structures`]), builds a fibration of
//! `S^{2n+1}` tangent at a fibre to a prescribed plane ([`fibration`]), and
//! certifies the result by sampled transversality and disjointness checks.

pub mod angles;
pub mod error;
pub mod fibration;
pub mod grassmann;
pub mod io;
pub mod numeric;
pub mod sampling;
pub mod structures;

pub use angles::{AngleProfile, ComplexSubspace, RealSubspace};
pub use error::{ForgeError, Result};
pub use fibration::{
    BumpProfile, FibrationArtifact, FibrationBase, GermSpec, VerificationReport,
};
pub use grassmann::{ChartPoint, GreatCircle, OrientedTwoPlane};
pub use numeric::{CMatrix, ConjugateSplit, RealLinearMap};
pub use structures::{ComplexStructure, RetractionPath};
