use nalgebra::DVector;

use crate::error::{ForgeError, Result};
use crate::grassmann::{great_circle_of, GreatCircle, OrientedTwoPlane};
use crate::numeric::RealLinearMap;
use crate::structures::ComplexStructure;

const UNIT_TOL: f64 = 1e-9;

/// Ambient structure rotating `P` by 90° (`e₁ ↦ e₂`) and acting as `J_perp`
/// on `P⊥`.
pub fn extend_structure(j_perp: &ComplexStructure, p: &OrientedTwoPlane) -> Result<ComplexStructure> {
    if j_perp.dim() + 2 != p.ambient_dim() {
        return Err(ForgeError::DimensionMismatch(format!(
            "structure on R^{} cannot act on the complement of a plane in R^{}",
            j_perp.dim(),
            p.ambient_dim()
        )));
    }
    let (e1, e2) = (p.e1(), p.e2());
    let c = p.complement();
    let j = &e2 * e1.transpose() - &e1 * e2.transpose() + c * j_perp.matrix() * c.transpose();
    ComplexStructure::new(RealLinearMap::new(j)?, 1e-8)
}

/// Oriented circle `t ↦ cos t·v + sin t·Jv` through `v` in its `J`-complex line.
pub fn hopf_fibre_through(j: &ComplexStructure, v: &DVector<f64>) -> Result<GreatCircle> {
    if v.len() != j.dim() {
        return Err(ForgeError::DimensionMismatch(format!(
            "vector has length {} but J acts on R^{}",
            v.len(),
            j.dim()
        )));
    }
    let norm = v.norm();
    if !((norm - 1.0).abs() <= UNIT_TOL) {
        return Err(ForgeError::NotUnit { norm });
    }
    let jv = j.matrix() * v;
    let residual = (jv.norm() - 1.0).abs().max(v.dot(&jv).abs());
    if !(residual < UNIT_TOL) || !j.is_orthogonal() {
        return Err(ForgeError::NotOrthogonal { residual });
    }
    let plane = OrientedTwoPlane::spanned_by(v, &jv)?;
    Ok(great_circle_of(&plane))
}

/// The Hopf map `S³ → S²`.
pub fn hopf_map(x: &[f64]) -> Result<[f64; 3]> {
    if x.len() != 4 {
        return Err(ForgeError::DimensionMismatch(format!(
            "the Hopf map takes points of R^4, got length {}",
            x.len()
        )));
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !((norm - 1.0).abs() <= UNIT_TOL) {
        return Err(ForgeError::NotUnit { norm });
    }
    let (x1, x2, x3, x4) = (x[0], x[1], x[2], x[3]);
    Ok([
        2.0 * (x1 * x3 + x2 * x4),
        2.0 * (x2 * x3 - x1 * x4),
        x1 * x1 + x2 * x2 - x3 * x3 - x4 * x4,
    ])
}

/// Standard structure on `R^{2n+2}` pairing `(x₁, x₂)`, `(x₃, x₄)`, ….
pub fn standard_hopf_structure(n: usize) -> ComplexStructure {
    ComplexStructure::standard(n + 1)
}

/// Stereographic projection from `(0, 0, 0, 1)`.
pub fn stereographic(x: &[f64; 4]) -> [f64; 3] {
    let d = 1.0 - x[3];
    [x[0] / d, x[1] / d, x[2] / d]
}
