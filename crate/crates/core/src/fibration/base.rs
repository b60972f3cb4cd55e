use nalgebra::{DMatrix, DVector};

use super::bump::BumpProfile;
use super::margin::{transversality_margin, Margin, MarginGrid};
use crate::error::{ForgeError, Result};
use crate::grassmann::{chart_to_plane, great_circle_of, ChartPoint, GreatCircle, OrientedTwoPlane};
use crate::numeric::{scaled_norm, spectral_norm, RealLinearMap, DEFAULT_REAL_TOL};
use crate::structures::{make_complex_structure, ComplexStructure};

/// Default cap on the bump exponent.
pub const DEFAULT_EXPONENT_CAP: u64 = 1_000_000;

/// A smooth map `N: P⊥ → P⊥` whose graph `{(x | N(x))}` is the base space of
/// a candidate great-circle fibration.
pub trait BaseMap: Sync {
    /// Dimension of `P⊥`.
    fn dim(&self) -> usize;

    fn eval(&self, x: &DVector<f64>) -> DVector<f64>;

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64>;

    /// Radius beyond which `N(x) = Jx` exactly, and that `J`.
    fn exterior_reference(&self) -> (f64, &DMatrix<f64>);

    /// Radius of the region around `0` where the map is fixed by its
    /// local data.
    fn inner_radius(&self) -> f64;

    fn plane(&self) -> &OrientedTwoPlane;

    /// The chart point `(x | N(x))`.
    fn chart_point(&self, x: &DVector<f64>) -> ChartPoint {
        ChartPoint::from_columns(x, &self.eval(x)).expect("finite base point")
    }

    /// Great circle of the fibre with base point `x`.
    fn fibre(&self, x: &DVector<f64>) -> Result<GreatCircle> {
        Ok(great_circle_of(&chart_to_plane(self.plane(), &self.chart_point(x))?))
    }
}

/// `N(x) = f(|x|)·Ax + (1 − f(|x|))·Jx` with `J = J_A`, certified by
/// `S(f_n)·‖A − J‖ < ε`.
#[derive(Debug, Clone)]
pub struct FibrationBase {
    a: RealLinearMap,
    j: ComplexStructure,
    bump: BumpProfile,
    margin: Margin,
    plane: OrientedTwoPlane,
    diff_norm: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    pub grid: MarginGrid,
    pub exponent_cap: u64,
    pub real_tol: f64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            grid: MarginGrid::default(),
            exponent_cap: DEFAULT_EXPONENT_CAP,
            real_tol: DEFAULT_REAL_TOL,
        }
    }
}

fn check_plane(a: &RealLinearMap, p: &OrientedTwoPlane) -> Result<()> {
    if a.dim() + 2 != p.ambient_dim() {
        return Err(ForgeError::DimensionMismatch(format!(
            "A acts on R^{} but P⊥ has dimension {}",
            a.dim(),
            p.ambient_dim() - 2
        )));
    }
    Ok(())
}

pub fn build_fibration(
    a: &RealLinearMap,
    p: &OrientedTwoPlane,
    base_bump: &BumpProfile,
) -> Result<FibrationBase> {
    build_fibration_with(a, p, base_bump, &BuildOptions::default())
}

/// Chooses the smallest bump exponent with `S(f_n)·‖A − J‖ < ε`.
pub fn build_fibration_with(
    a: &RealLinearMap,
    p: &OrientedTwoPlane,
    base_bump: &BumpProfile,
    opts: &BuildOptions,
) -> Result<FibrationBase> {
    check_plane(a, p)?;
    let j = make_complex_structure(a, opts.real_tol)?;
    let margin = transversality_margin(a, &j, &opts.grid)?;
    let diff_norm = spectral_norm(&(a.matrix() - j.matrix()));
    let base = base_bump.with_exponent(1);

    let mut n_exp = if diff_norm <= 1e-14 * a.matrix().norm().max(1.0) {
        1
    } else {
        let estimate = (base.slope_sup() * diff_norm / margin.epsilon).floor() + 1.0;
        if !(estimate <= opts.exponent_cap as f64) {
            return Err(ForgeError::ExponentOverflow {
                required: if estimate.is_finite() { estimate as u64 } else { u64::MAX },
                cap: opts.exponent_cap,
            });
        }
        estimate as u64
    };
    // the estimate is exact up to rounding in S(f); confirm it numerically
    while base.with_exponent(n_exp).slope_sup() * diff_norm >= margin.epsilon {
        n_exp += 1;
        if n_exp > opts.exponent_cap {
            return Err(ForgeError::ExponentOverflow {
                required: n_exp,
                cap: opts.exponent_cap,
            });
        }
    }
    Ok(FibrationBase {
        a: a.clone(),
        j,
        bump: base.with_exponent(n_exp),
        margin,
        plane: p.clone(),
        diff_norm,
    })
}

impl FibrationBase {
    /// Reassembles a base from stored data without re-deriving `ε` or the
    /// exponent; [`FibrationBase::recheck`] tests whether they still certify.
    pub fn from_parts(
        a: RealLinearMap,
        p: OrientedTwoPlane,
        bump: BumpProfile,
        margin: Margin,
        real_tol: f64,
    ) -> Result<Self> {
        check_plane(&a, &p)?;
        let j = make_complex_structure(&a, real_tol)?;
        let diff_norm = spectral_norm(&(a.matrix() - j.matrix()));
        Ok(Self {
            a,
            j,
            bump,
            margin,
            plane: p,
            diff_norm,
        })
    }

    pub fn n(&self) -> usize {
        self.a.half_dim()
    }

    pub fn a(&self) -> &RealLinearMap {
        &self.a
    }

    pub fn j(&self) -> &ComplexStructure {
        &self.j
    }

    pub fn bump(&self) -> &BumpProfile {
        &self.bump
    }

    pub fn margin(&self) -> &Margin {
        &self.margin
    }

    pub fn epsilon(&self) -> f64 {
        self.margin.epsilon
    }

    /// `‖A − J‖` in the spectral norm.
    pub fn diff_norm(&self) -> f64 {
        self.diff_norm
    }

    /// `ε − S(f_n)·‖A − J‖`; positive for a certified base.
    pub fn certified_gap(&self) -> f64 {
        self.margin.epsilon - self.bump.slope_sup() * self.diff_norm
    }

    /// Recomputes `ε` on `grid` and the slope bound from scratch.
    pub fn recheck(&self, grid: &MarginGrid) -> Certificate {
        let slope = self.bump.slope_sup();
        let recomputed = transversality_margin(&self.a, &self.j, grid)
            .map(|m| m.epsilon)
            .unwrap_or(0.0);
        Certificate {
            stored_epsilon: self.margin.epsilon,
            recomputed_epsilon: recomputed,
            slope_sup: slope,
            diff_norm: self.diff_norm,
        }
    }

    pub fn eval_n(&self, x: &DVector<f64>) -> DVector<f64> {
        let f = self.bump.value(scaled_norm(x));
        if f == 1.0 {
            self.a.matrix() * x
        } else if f == 0.0 {
            self.j.matrix() * x
        } else {
            let jx = self.j.matrix() * x;
            let ax = self.a.matrix() * x;
            &jx + (ax - &jx) * f
        }
    }

    pub fn eval_base(&self, x: &DVector<f64>) -> ChartPoint {
        BaseMap::chart_point(self, x)
    }

    /// `dN_x(v) = f·Av + (1 − f)·Jv + f'(|x|)(x̂·v)(A − J)x`.
    pub fn eval_dn(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let r = scaled_norm(x);
        let f = self.bump.value(r);
        let fp = self.bump.slope(r);
        if fp == 0.0 {
            if f == 1.0 {
                return self.a.matrix().clone();
            }
            if f == 0.0 {
                return self.j.matrix().clone();
            }
        }
        let gap = self.a.matrix() - self.j.matrix();
        let mut d = self.j.matrix() + &gap * f;
        if fp != 0.0 {
            let unit = x / r;
            d += (&gap * &unit) * unit.transpose() * (fp * r);
        }
        d
    }
}

impl BaseMap for FibrationBase {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        self.eval_n(x)
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.eval_dn(x)
    }

    fn exterior_reference(&self) -> (f64, &DMatrix<f64>) {
        (self.bump.outer_radius(), self.j.matrix())
    }

    fn inner_radius(&self) -> f64 {
        self.bump.inner_radius()
    }

    fn plane(&self) -> &OrientedTwoPlane {
        &self.plane
    }
}

pub fn eval_base(f: &FibrationBase, x: &DVector<f64>) -> ChartPoint {
    f.eval_base(x)
}

pub fn eval_dn(f: &FibrationBase, x: &DVector<f64>) -> RealLinearMap {
    RealLinearMap::new(f.eval_dn(x)).expect("finite Jacobian")
}

/// Independent re-evaluation of the inequality `S(f_n)·‖A − J‖ < ε`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Certificate {
    pub stored_epsilon: f64,
    pub recomputed_epsilon: f64,
    pub slope_sup: f64,
    pub diff_norm: f64,
}

impl Certificate {
    /// The stored `ε` is reproduced (up to refinement noise) and the slope
    /// bound stays strictly below it.
    pub fn holds(&self) -> bool {
        let reproduced = self.recomputed_epsilon >= self.stored_epsilon * (1.0 - 1e-6);
        reproduced && self.slope_sup * self.diff_norm < self.recomputed_epsilon.min(self.stored_epsilon)
    }
}
