//! Principal angles between subspaces, with paired bases and the isometries
//! they determine.
//!
//! Three settings are covered: two real subspaces of `R^m` (classified up to
//! `O(m)`), two complex subspaces of `C^m` (up to `U(m)`), and a complex
//! subspace of `C^{2n}` against its own conjugate (up to `O(2n)`).
//!
//! Angles come from singular values of the cross-Gram matrix `PᴴQ`. Each angle
//! is recovered as `atan2(sin, cos)` with the sine measured directly as the
//! distance of the paired vector from the other subspace, which keeps small
//! angles accurate.

use nalgebra::{ComplexField, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{ForgeError, Result};
use crate::numeric::{
    complete_orthonormal_basis, thin_svd, min_singular_value, orthonormality_residual, orthonormalize,
    CMatrix,
};

const BASIS_TOL: f64 = 1e-10;
/// Singular values of `PᴴP̄` below this are treated as exact right angles.
const RIGHT_ANGLE_TOL: f64 = 1e-10;
/// Below this sine a paired couple is treated as coincident.
const COINCIDENT_SIN: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct RealSubspace {
    basis: DMatrix<f64>,
}

impl RealSubspace {
    /// Wraps a basis that must already be orthonormal.
    pub fn new(basis: DMatrix<f64>) -> Result<Self> {
        check_basis(&basis)?;
        Ok(Self { basis })
    }

    /// Orthonormalizes a spanning set of linearly independent columns.
    pub fn spanned_by(columns: &DMatrix<f64>) -> Result<Self> {
        Self::new(orthonormalize(columns, 1e-12)?)
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn transformed(&self, g: &DMatrix<f64>) -> Result<Self> {
        Self::spanned_by(&(g * &self.basis))
    }

    /// `‖(I − BBᵀ) v‖`.
    pub fn distance_to(&self, v: &DVector<f64>) -> f64 {
        (v - &self.basis * (self.basis.transpose() * v)).norm()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSubspace {
    basis: CMatrix,
}

impl ComplexSubspace {
    pub fn new(basis: CMatrix) -> Result<Self> {
        check_basis(&basis)?;
        Ok(Self { basis })
    }

    pub fn spanned_by(columns: &CMatrix) -> Result<Self> {
        Self::new(orthonormalize(columns, 1e-12)?)
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    /// Entrywise conjugate subspace.
    pub fn conj(&self) -> Self {
        Self {
            basis: self.basis.map(|z| z.conj()),
        }
    }

    pub fn transformed(&self, g: &CMatrix) -> Result<Self> {
        Self::spanned_by(&(g * &self.basis))
    }

    pub fn distance_to(&self, v: &DVector<Complex64>) -> f64 {
        (v - &self.basis * (self.basis.adjoint() * v)).norm()
    }
}

fn check_basis<T: ComplexField<RealField = f64>>(basis: &DMatrix<T>) -> Result<()> {
    let (m, k) = basis.shape();
    if k == 0 || k > m {
        return Err(ForgeError::InvalidInput(format!(
            "subspace basis must be m x k with 1 <= k <= m, got {m}x{k}"
        )));
    }
    let resid = orthonormality_residual(basis);
    if !(resid < BASIS_TOL) {
        return Err(ForgeError::InvalidInput(format!(
            "subspace basis is not orthonormal (residual {resid:e})"
        )));
    }
    Ok(())
}

/// Sorted principal angles with bases `first`, `second` such that the angle
/// between `first[r]` and `second[r]` is `angles[r]` and `first[r] ⟂ second[s]`
/// for `r ≠ s`.
#[derive(Debug, Clone, Serialize)]
pub struct AngleProfile<T: nalgebra::Scalar> {
    pub angles: Vec<f64>,
    #[serde(skip)]
    pub first: DMatrix<T>,
    #[serde(skip)]
    pub second: DMatrix<T>,
}

impl<T: ComplexField<RealField = f64>> AngleProfile<T> {
    /// Largest `|⟨first[r], second[s]⟩|` over `r ≠ s`.
    pub fn pairing_defect(&self) -> f64 {
        let g = self.first.adjoint() * &self.second;
        let mut worst: f64 = 0.0;
        for r in 0..g.nrows() {
            for s in 0..g.ncols() {
                if r != s {
                    worst = worst.max(g[(r, s)].clone().modulus());
                }
            }
        }
        worst
    }

    pub fn max_angle_diff(&self, other: &Self) -> f64 {
        self.angles
            .iter()
            .zip(&other.angles)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn check_pair_dims(am: usize, ak: usize, bm: usize, bk: usize) -> Result<()> {
    if am != bm || ak != bk {
        return Err(ForgeError::DimensionMismatch(format!(
            "subspaces must share ambient dimension and dimension: {ak} in {am} vs {bk} in {bm}"
        )));
    }
    Ok(())
}

/// Reorders columns of the paired bases so the angles ascend.
fn sorted_profile<T: ComplexField<RealField = f64>>(
    angles: Vec<f64>,
    first: DMatrix<T>,
    second: DMatrix<T>,
) -> AngleProfile<T> {
    let mut order: Vec<usize> = (0..angles.len()).collect();
    order.sort_by(|&a, &b| angles[a].total_cmp(&angles[b]));
    let pick = |m: &DMatrix<T>| {
        DMatrix::from_columns(&order.iter().map(|&i| m.column(i).into_owned()).collect::<Vec<_>>())
    };
    AngleProfile {
        angles: order.iter().map(|&i| angles[i]).collect(),
        first: pick(&first),
        second: pick(&second),
    }
}

fn svd_profile<T: ComplexField<RealField = f64>>(p: &DMatrix<T>, q: &DMatrix<T>) -> AngleProfile<T> {
    let cross = p.adjoint() * q;
    let (u, sigma, v) = thin_svd(&cross);
    let first = p * u;
    let second = q * v;
    let angles = (0..first.ncols())
        .map(|r| {
            let w = second.column(r).into_owned();
            let cos = sigma[r].min(1.0);
            let sin = (&w - p * (p.adjoint() * &w)).norm();
            sin.atan2(cos)
        })
        .collect();
    sorted_profile(angles, first, second)
}

pub fn principal_angles_real(p: &RealSubspace, q: &RealSubspace) -> Result<AngleProfile<f64>> {
    check_pair_dims(p.ambient_dim(), p.dim(), q.ambient_dim(), q.dim())?;
    Ok(svd_profile(&p.basis, &q.basis))
}

/// Complex principal angles; each angle stands for a doubled real pair
/// `(v, iv)`, `(w, iw)`.
pub fn principal_angles_complex(
    p: &ComplexSubspace,
    q: &ComplexSubspace,
) -> Result<AngleProfile<Complex64>> {
    check_pair_dims(p.ambient_dim(), p.dim(), q.ambient_dim(), q.dim())?;
    Ok(svd_profile(&p.basis, &q.basis))
}

/// Unitary `W` with `M = W Σ Wᵀ` for complex symmetric `M`, via the real
/// symmetric embedding `[[Re M, Im M], [Im M, −Re M]]` whose `+σ`
/// eigenvectors `(x; y)` give Takagi vectors `x + iy`.
fn takagi_vectors(m: &CMatrix) -> CMatrix {
    let k = m.nrows();
    let mut h = DMatrix::<f64>::zeros(2 * k, 2 * k);
    for r in 0..k {
        for c in 0..k {
            let z = m[(r, c)];
            h[(r, c)] = z.re;
            h[(r, k + c)] = z.im;
            h[(k + r, c)] = z.im;
            h[(k + r, k + c)] = -z.re;
        }
    }
    // symmetrize against rounding in PᴴP̄
    let h = (&h + h.transpose()) * 0.5;
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..2 * k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let as_complex = |idx: usize| -> DVector<Complex64> {
        let col = eig.eigenvectors.column(idx);
        DVector::from_fn(k, |i, _| Complex64::new(col[i], col[k + i]))
    };

    let mut chosen: Vec<DVector<Complex64>> = Vec::with_capacity(k);
    let mut zero_cluster = Vec::new();
    for &idx in &order {
        let lam = eig.eigenvalues[idx];
        if lam > RIGHT_ANGLE_TOL && chosen.len() < k {
            let mut w = as_complex(idx);
            let norm = w.norm();
            w.unscale_mut(norm);
            chosen.push(w);
        } else if lam.abs() <= RIGHT_ANGLE_TOL {
            zero_cluster.push(as_complex(idx));
        }
    }
    // the zero eigenspace is closed under w ↦ iw; pick a complex
    // orthonormal basis of it
    for mut cand in zero_cluster {
        if chosen.len() == k {
            break;
        }
        for _ in 0..2 {
            for c in &chosen {
                let proj = c.dotc(&cand);
                cand -= c * proj;
            }
        }
        let norm = cand.norm();
        if norm > 0.5 {
            cand.unscale_mut(norm);
            chosen.push(cand);
        }
    }
    DMatrix::from_columns(&chosen)
}

/// Basis `v₁ … v_k` of `P` with `vᵣ · vᵣ` real and nonnegative and
/// `⟨vᵣ, v̄ₛ⟩ = 0` for `r ≠ s`, ordered by ascending angle to the conjugate.
/// Returns the basis together with the angles.
pub(crate) fn coincidence_basis(p: &CMatrix) -> (CMatrix, Vec<f64>) {
    let pbar = p.map(|z| z.conj());
    let m = p.adjoint() * &pbar;
    let w = takagi_vectors(&m);
    let mut v = p * w;
    let mut angles = Vec::with_capacity(v.ncols());
    for r in 0..v.ncols() {
        let col = v.column(r).into_owned();
        let norm = col.norm();
        let mut col = col.unscale(norm);
        let c: Complex64 = col.iter().map(|z| z * z).sum();
        // closed-form phase making ⟨e^{iφ}v, conj(e^{iφ}v)⟩ real and ≥ 0
        let phase = Complex64::from_polar(1.0, -c.arg() / 2.0);
        col *= phase;
        let vbar = col.map(|z| z.conj());
        let sin = (&vbar - p * (p.adjoint() * &vbar)).norm();
        let cos = c.norm().min(1.0);
        angles.push(sin.atan2(cos));
        v.set_column(r, &col);
    }
    let prof = sorted_profile(angles, v.clone(), v);
    (prof.first, prof.angles)
}

/// Principal angles between `P` and its conjugate, with `second = conj(first)`.
pub fn principal_angles_conjugate(p: &ComplexSubspace) -> Result<AngleProfile<Complex64>> {
    let k = p.dim();
    if 2 * k > p.ambient_dim() {
        return Err(ForgeError::NotTransverse { min_singular: 0.0 });
    }
    let mut stacked = CMatrix::zeros(p.ambient_dim(), 2 * k);
    stacked.columns_mut(0, k).copy_from(&p.basis);
    stacked.columns_mut(k, k).copy_from(&p.basis.map(|z| z.conj()));
    let sigma = min_singular_value(&stacked);
    if sigma <= 1e-9 {
        return Err(ForgeError::NotTransverse {
            min_singular: sigma,
        });
    }
    let (first, angles) = coincidence_basis(&p.basis);
    let second = first.map(|z| z.conj());
    Ok(AngleProfile {
        angles,
        first,
        second,
    })
}

fn check_profiles_match<T: ComplexField<RealField = f64>>(
    a: &AngleProfile<T>,
    b: &AngleProfile<T>,
    tol: f64,
) -> Result<()> {
    let max_diff = a.max_angle_diff(b);
    if a.angles.len() != b.angles.len() || !(max_diff <= tol) {
        return Err(ForgeError::Mismatch { max_diff, tol });
    }
    Ok(())
}

/// Orthonormal frame `(v₁ … v_k, u_r …)` of `P + Q` built from a profile,
/// where `u_r` completes `v_r` to an orthonormal basis of `span{v_r, w_r}`
/// for every non-coincident pair. `keep[r]` selects which `u_r` to include.
fn pair_frame<T: ComplexField<RealField = f64>>(
    prof: &AngleProfile<T>,
    keep: &[bool],
) -> DMatrix<T> {
    let mut cols: Vec<DVector<T>> = (0..prof.first.ncols())
        .map(|r| prof.first.column(r).into_owned())
        .collect();
    for (r, &k) in keep.iter().enumerate() {
        if k {
            let v = prof.first.column(r).into_owned();
            let w = prof.second.column(r).into_owned();
            let proj = v.dotc(&w);
            let u = &w - &v * proj;
            let n = u.norm();
            cols.push(u.unscale(n));
        }
    }
    DMatrix::from_columns(&cols)
}

fn isometry_from_profiles<T: ComplexField<RealField = f64>>(
    src: &AngleProfile<T>,
    dst: &AngleProfile<T>,
) -> Result<DMatrix<T>> {
    let keep: Vec<bool> = src
        .angles
        .iter()
        .zip(&dst.angles)
        .map(|(a, b)| (0.5 * (a + b)).sin() > COINCIDENT_SIN)
        .collect();
    let s = orthonormalize(&pair_frame(src, &keep), 1e-12)?;
    let t = orthonormalize(&pair_frame(dst, &keep), 1e-12)?;
    let s_full = complete_orthonormal_basis(&s);
    let t_full = complete_orthonormal_basis(&t);
    Ok(t_full * s_full.adjoint())
}

/// Orthogonal `F` with `F(P) = P2` and `F(Q) = Q2`, if the angle profiles agree.
pub fn aligning_isometry_real(
    p: &RealSubspace,
    q: &RealSubspace,
    p2: &RealSubspace,
    q2: &RealSubspace,
    tol: f64,
) -> Result<DMatrix<f64>> {
    check_pair_dims(p.ambient_dim(), p.dim(), p2.ambient_dim(), p2.dim())?;
    let a = principal_angles_real(p, q)?;
    let b = principal_angles_real(p2, q2)?;
    check_profiles_match(&a, &b, tol)?;
    isometry_from_profiles(&a, &b)
}

/// Unitary `F` with `F(P) = P2` and `F(Q) = Q2`, if the angle profiles agree.
pub fn aligning_isometry_complex(
    p: &ComplexSubspace,
    q: &ComplexSubspace,
    p2: &ComplexSubspace,
    q2: &ComplexSubspace,
    tol: f64,
) -> Result<CMatrix> {
    check_pair_dims(p.ambient_dim(), p.dim(), p2.ambient_dim(), p2.dim())?;
    let a = principal_angles_complex(p, q)?;
    let b = principal_angles_complex(p2, q2)?;
    check_profiles_match(&a, &b, tol)?;
    isometry_from_profiles(&a, &b)
}

/// Real (hence conjugation-commuting) orthogonal `F` with `F(P) = Q`, for
/// subspaces transverse to their conjugates with matching angle profiles.
///
/// Each coincidence vector splits as `v = cos β·r + i sin β·m` with `r ⟂ m`
/// real unit vectors; `F` sends the frame `(rᵢ, mᵢ)` of `P` to that of `Q`
/// and any orthonormal completion to any other.
pub fn aligning_isometry_conjugate(
    p: &ComplexSubspace,
    q: &ComplexSubspace,
    tol: f64,
) -> Result<DMatrix<f64>> {
    check_pair_dims(p.ambient_dim(), p.dim(), q.ambient_dim(), q.dim())?;
    let a = principal_angles_conjugate(p)?;
    let b = principal_angles_conjugate(q)?;
    check_profiles_match(&a, &b, tol)?;
    let s = real_frame(&a.first)?;
    let t = real_frame(&b.first)?;
    let s = orthonormalize(&s, 1e-12)?;
    let t = orthonormalize(&t, 1e-12)?;
    Ok(complete_orthonormal_basis(&t) * complete_orthonormal_basis(&s).transpose())
}

/// Real frame `(r₁, m₁, …, r_k, m_k)` of a coincidence basis.
pub(crate) fn real_frame(v: &CMatrix) -> Result<DMatrix<f64>> {
    let (dim, k) = v.shape();
    let mut out = DMatrix::zeros(dim, 2 * k);
    for i in 0..k {
        let re = v.column(i).map(|z| z.re);
        let im = v.column(i).map(|z| z.im);
        let (rn, mn) = (re.norm(), im.norm());
        if rn < 1e-10 || mn < 1e-10 {
            return Err(ForgeError::DegenerateSplit {
                index: i,
                real_norm: rn,
                imag_norm: mn,
            });
        }
        out.set_column(2 * i, &(re / rn));
        out.set_column(2 * i + 1, &(im / mn));
    }
    Ok(out)
}
