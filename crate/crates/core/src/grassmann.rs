//! Oriented 2-planes in `R^{2n+2}` and the graph chart around a fixed plane.
//!
//! A plane `Q` near `P` is the graph of a linear map `L: P → P⊥`. In the
//! orthonormal frame `{e₁, e₂}` of `P` and the oriented frame `{f₁ … f₂ₙ}` of
//! `P⊥`, `L` is the `2n × 2` matrix `A₁ | A₂` with `Aᵢ = L(eᵢ)`.
//! The planes meeting `P` in a line are exactly the rank `≤ 1` chart points;
//! in the chart they form a cone through the origin.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ForgeError, Result};
use crate::numeric::{
    complete_orthonormal_basis, has_real_eigenvalue, min_abs_imag_eigenvalue,
    min_singular_value, orthonormalize, singular_values, RealLinearMap,
};
use crate::structures::ComplexStructure;

/// Default relative threshold for [`planes_intersect`].
pub const DEFAULT_INTERSECT_TOL: f64 = 1e-8;

const FRAME_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct OrientedTwoPlane {
    frame: DMatrix<f64>,
    complement: DMatrix<f64>,
}

impl OrientedTwoPlane {
    /// Plane with oriented orthonormal frame `(e1, e2)`.
    pub fn new(e1: DVector<f64>, e2: DVector<f64>) -> Result<Self> {
        let dim = e1.len();
        if e2.len() != dim {
            return Err(ForgeError::DimensionMismatch(format!(
                "frame vectors have lengths {} and {}",
                dim,
                e2.len()
            )));
        }
        if dim < 4 || dim % 2 != 0 {
            return Err(ForgeError::InvalidInput(format!(
                "ambient dimension must be 2n+2 with n >= 1, got {dim}"
            )));
        }
        let resid = (e1.norm() - 1.0)
            .abs()
            .max((e2.norm() - 1.0).abs())
            .max(e1.dot(&e2).abs());
        if !(resid < FRAME_TOL) {
            return Err(ForgeError::InvalidInput(format!(
                "plane frame is not orthonormal (residual {resid:e})"
            )));
        }
        let mut frame = DMatrix::zeros(dim, 2);
        frame.set_column(0, &e1);
        frame.set_column(1, &e2);
        Ok(Self::from_orthonormal_frame(frame))
    }

    /// Oriented plane spanned by `(a, b)` in that order.
    pub fn spanned_by(a: &DVector<f64>, b: &DVector<f64>) -> Result<Self> {
        let mut m = DMatrix::zeros(a.len(), 2);
        m.set_column(0, a);
        m.set_column(1, b);
        let q = orthonormalize(&m, 1e-12)?;
        Self::new(q.column(0).into_owned(), q.column(1).into_owned())
    }

    /// `span{e₁, e₂}` in `R^{2n+2}`.
    pub fn standard(n: usize) -> Self {
        let dim = 2 * n + 2;
        let mut frame = DMatrix::zeros(dim, 2);
        frame[(0, 0)] = 1.0;
        frame[(1, 1)] = 1.0;
        Self::from_orthonormal_frame(frame)
    }

    fn from_orthonormal_frame(frame: DMatrix<f64>) -> Self {
        let mut full = complete_orthonormal_basis(&frame);
        // orient P⊥ so that (frame, complement) is positively oriented
        if full.determinant() < 0.0 {
            let last = full.ncols() - 1;
            let mut c = full.column_mut(last);
            c.neg_mut();
        }
        let complement = full.columns(2, full.ncols() - 2).into_owned();
        Self { frame, complement }
    }

    pub fn ambient_dim(&self) -> usize {
        self.frame.nrows()
    }

    /// `n`, where the ambient space is `R^{2n+2}`.
    pub fn n(&self) -> usize {
        (self.frame.nrows() - 2) / 2
    }

    pub fn e1(&self) -> DVector<f64> {
        self.frame.column(0).into_owned()
    }

    pub fn e2(&self) -> DVector<f64> {
        self.frame.column(1).into_owned()
    }

    /// `(e₁ | e₂)`.
    pub fn frame(&self) -> &DMatrix<f64> {
        &self.frame
    }

    /// Oriented orthonormal basis of `P⊥` as columns.
    pub fn complement(&self) -> &DMatrix<f64> {
        &self.complement
    }

    /// Same plane, opposite orientation.
    pub fn reversed(&self) -> Self {
        Self::from_orthonormal_frame(DMatrix::from_columns(&[
            self.frame.column(1).into_owned(),
            self.frame.column(0).into_owned(),
        ]))
    }

    /// Distance of `v` from the plane.
    pub fn distance_to(&self, v: &DVector<f64>) -> f64 {
        (v - &self.frame * (self.frame.transpose() * v)).norm()
    }
}

/// `A₁ | A₂`: a point of the chart `Hom(P, P⊥)`. The zero point is `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    a: DMatrix<f64>,
}

impl ChartPoint {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if a.ncols() != 2 || a.nrows() < 2 || a.nrows() % 2 != 0 {
            return Err(ForgeError::InvalidInput(format!(
                "chart point must be 2n x 2, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().any(|x| !x.is_finite()) {
            return Err(ForgeError::InvalidInput("chart point has non-finite entries".into()));
        }
        Ok(Self { a })
    }

    pub fn from_columns(a1: &DVector<f64>, a2: &DVector<f64>) -> Result<Self> {
        if a1.len() != a2.len() {
            return Err(ForgeError::DimensionMismatch(format!(
                "chart columns have lengths {} and {}",
                a1.len(),
                a2.len()
            )));
        }
        let mut a = DMatrix::zeros(a1.len(), 2);
        a.set_column(0, a1);
        a.set_column(1, a2);
        Self::new(a)
    }

    pub fn zero(n: usize) -> Self {
        Self {
            a: DMatrix::zeros(2 * n, 2),
        }
    }

    pub fn n(&self) -> usize {
        self.a.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn a1(&self) -> DVector<f64> {
        self.a.column(0).into_owned()
    }

    pub fn a2(&self) -> DVector<f64> {
        self.a.column(1).into_owned()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { a: &self.a * s }
    }
}

impl std::ops::Add for &ChartPoint {
    type Output = ChartPoint;
    fn add(self, rhs: &ChartPoint) -> ChartPoint {
        ChartPoint {
            a: &self.a + &rhs.a,
        }
    }
}

impl std::ops::Sub for &ChartPoint {
    type Output = ChartPoint;
    fn sub(self, rhs: &ChartPoint) -> ChartPoint {
        ChartPoint {
            a: &self.a - &rhs.a,
        }
    }
}

/// Oriented unit circle `t ↦ cos t·u₁ + sin t·u₂` of a plane.
#[derive(Debug, Clone, PartialEq)]
pub struct GreatCircle {
    plane: OrientedTwoPlane,
}

impl GreatCircle {
    pub fn plane(&self) -> &OrientedTwoPlane {
        &self.plane
    }

    pub fn point(&self, t: f64) -> DVector<f64> {
        self.plane.frame.column(0) * t.cos() + self.plane.frame.column(1) * t.sin()
    }

    /// `count` points at `t = 2πk / count`.
    pub fn sample(&self, count: usize) -> Vec<(f64, DVector<f64>)> {
        (0..count)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / count as f64;
                (t, self.point(t))
            })
            .collect()
    }
}

pub fn great_circle_of(plane: &OrientedTwoPlane) -> GreatCircle {
    GreatCircle {
        plane: plane.clone(),
    }
}

fn check_chart_dims(p: &OrientedTwoPlane, c: &ChartPoint) -> Result<()> {
    if c.a.nrows() + 2 != p.ambient_dim() {
        return Err(ForgeError::DimensionMismatch(format!(
            "chart point has {} rows but the plane lives in R^{}",
            c.a.nrows(),
            p.ambient_dim()
        )));
    }
    Ok(())
}

/// Plane spanned by `{e₁ + A₁, e₂ + A₂}`, oriented so that projection to `P`
/// preserves orientation.
pub fn chart_to_plane(p: &OrientedTwoPlane, c: &ChartPoint) -> Result<OrientedTwoPlane> {
    check_chart_dims(p, c)?;
    let raw = &p.frame + &p.complement * &c.a;
    // Gram–Schmidt keeps the orientation of the raw frame, whose projection
    // to P is the identity
    let q = orthonormalize(&raw, 0.0)?;
    Ok(OrientedTwoPlane::from_orthonormal_frame(q))
}

/// Chart coordinates of `Q`, the matrix of `L_Q: P → P⊥` whose graph is `Q`.
pub fn plane_to_chart(p: &OrientedTwoPlane, q: &OrientedTwoPlane) -> Result<ChartPoint> {
    if p.ambient_dim() != q.ambient_dim() {
        return Err(ForgeError::DimensionMismatch(format!(
            "planes live in R^{} and R^{}",
            p.ambient_dim(),
            q.ambient_dim()
        )));
    }
    let along = p.frame.transpose() * &q.frame;
    let det = along.determinant();
    if !(det > 1e-12) {
        return Err(ForgeError::NotInChart { det });
    }
    let across = p.complement.transpose() * &q.frame;
    let inv = along.try_inverse().ok_or(ForgeError::NotInChart { det })?;
    ChartPoint::new(across * inv)
}

/// True iff the graph of `C` meets `P` in at least a line (rank `≤ 1`).
pub fn in_bad_set(c: &ChartPoint, tol: f64) -> bool {
    min_singular_value(&c.a) <= tol
}

/// True iff the great circles of the two chart planes meet, i.e. the
/// difference of the chart matrices has a kernel. `tol` is relative to
/// `‖A(C1)‖ + ‖A(C2)‖ + 1`.
pub fn planes_intersect(c1: &ChartPoint, c2: &ChartPoint, tol: f64) -> bool {
    intersection_margin(c1, c2) <= tol
}

/// Scaled smallest singular value of `A(C1) − A(C2)`; zero iff the planes
/// share a line.
pub fn intersection_margin(c1: &ChartPoint, c2: &ChartPoint) -> f64 {
    let scale = c1.a.norm() + c2.a.norm() + 1.0;
    min_singular_value(&(&c1.a - &c2.a)) / scale
}

/// `σ_min/σ_max` of `A(C1) − A(C2)`: invariant under scaling the
/// difference, so nearby fibres of a fibration are not mistaken for
/// intersecting ones. Zero when the chart points coincide.
pub fn relative_intersection_margin(c1: &ChartPoint, c2: &ChartPoint) -> f64 {
    let s = singular_values(&(&c1.a - &c2.a));
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if hi > 0.0 => lo / hi,
        _ => 0.0,
    }
}

/// A `2n`-plane in the chart that is the graph of `T: P⊥ → P⊥` is transverse
/// to the bad cone iff `T` has no real eigenvalue.
pub fn transverse_to_bad_cone(t: &RealLinearMap, tol: f64) -> bool {
    !has_real_eigenvalue(t, tol)
}

/// Matrix of `J|P⊥` in the oriented basis of `P⊥`; its graph is the tangent
/// plane at `P` of the Hopf base defined by `J`.
pub fn hopf_base_chart(j: &ComplexStructure, p: &OrientedTwoPlane) -> Result<RealLinearMap> {
    let jm = j.matrix();
    if jm.nrows() != p.ambient_dim() {
        return Err(ForgeError::DimensionMismatch(format!(
            "structure acts on R^{} but the plane lives in R^{}",
            jm.nrows(),
            p.ambient_dim()
        )));
    }
    let residual = (p.complement.transpose() * jm * &p.frame).norm();
    if residual > 1e-9 {
        return Err(ForgeError::NotInvariant { residual });
    }
    RealLinearMap::new(p.complement.transpose() * jm * &p.complement)
}

#[derive(Debug, Clone, Serialize)]
pub struct ImmersionPoint {
    pub index: usize,
    /// Smallest singular value of the finite-difference Jacobian.
    pub jacobian_min_singular: f64,
    /// Smallest `|Im λ|` of the tangent map `d(A₂)·d(A₁)⁻¹`; zero when
    /// `d(A₁)` is singular.
    pub min_abs_imag: f64,
}

impl ImmersionPoint {
    pub fn margin(&self) -> f64 {
        self.jacobian_min_singular.min(self.min_abs_imag)
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ImmersionReport {
    pub points: Vec<ImmersionPoint>,
}

impl ImmersionReport {
    pub fn min_margin(&self) -> f64 {
        self.points
            .iter()
            .map(ImmersionPoint::margin)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Central-difference Jacobian of a base sampler `x ↦ A(x)`, stacked as
/// `[dA₁; dA₂]` (`4n × 2n`).
pub fn sampler_jacobian<F>(sampler: &F, x: &DVector<f64>) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> ChartPoint,
{
    let dim = x.len();
    let h = 1e-5 * (1.0 + x.norm());
    let mut jac = DMatrix::zeros(2 * dim, dim);
    for k in 0..dim {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[k] += h;
        xm[k] -= h;
        let ap = sampler(&xp);
        let am = sampler(&xm);
        let d = (&ap.a - &am.a) / (2.0 * h);
        jac.view_mut((0, k), (dim, 1)).copy_from(&d.column(0));
        jac.view_mut((dim, k), (dim, 1)).copy_from(&d.column(1));
    }
    jac
}

fn immersion_point<F>(sampler: &F, index: usize, x: &DVector<f64>) -> ImmersionPoint
where
    F: Fn(&DVector<f64>) -> ChartPoint,
{
    let dim = x.len();
    let jac = sampler_jacobian(sampler, x);
    let jacobian_min_singular = min_singular_value(&jac);
    let d1 = jac.rows(0, dim).into_owned();
    let d2 = jac.rows(dim, dim).into_owned();
    let min_abs_imag = match d1.try_inverse() {
        Some(inv) if min_singular_value(&jac.rows(0, dim).into_owned()) > 1e-12 => {
            min_abs_imag_eigenvalue(&(d2 * inv)).unwrap_or(0.0)
        }
        _ => 0.0,
    };
    ImmersionPoint {
        index,
        jacobian_min_singular,
        min_abs_imag,
    }
}

/// Certifies at each sample that the base `x ↦ A(x)` is immersed and that its
/// tangent plane avoids the bad cone. Any margin `≤ tol` is a tangency.
pub fn immersion_check<F>(sampler: F, points: &[DVector<f64>], tol: f64) -> Result<ImmersionReport>
where
    F: Fn(&DVector<f64>) -> ChartPoint + Sync,
{
    let results: Vec<ImmersionPoint> = points
        .par_iter()
        .enumerate()
        .map(|(i, x)| immersion_point(&sampler, i, x))
        .collect();
    if let Some(bad) = results.iter().find(|p| !(p.margin() > tol)) {
        return Err(ForgeError::Tangency {
            index: bad.index,
            margin: bad.margin(),
        });
    }
    Ok(ImmersionReport { points: results })
}
