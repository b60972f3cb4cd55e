//! Dense real/complex kernels shared by the rest of the crate.
//!
//! The central object is the conjugate split of a real map `T` with no real
//! eigenvalues: `C^{2n} = V+ ⊕ V-`, where `V+` is the sum of the generalized
//! eigenspaces for eigenvalues with positive imaginary part and `V-` is its
//! entrywise conjugate. Two independent routes compute it:
//!
//! * [`eigen_split`] reorders a complex Schur form so that the upper half
//!   eigenvalues lead, and reads `V+` off the leading Schur vectors;
//! * [`bezout_projectors`] factors the characteristic polynomial as
//!   `p+ · p-`, solves `a+ p+ + a- p- = 1`, and evaluates the spectral
//!   projectors `a- (T) p- (T)` and `a+ (T) p+ (T)`.
//!
//! Neither route assumes diagonalizability.

use nalgebra::{ComplexField, DMatrix, DVector, Schur};
use num_complex::Complex64;

use crate::error::{ForgeError, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Default tolerance for "is this eigenvalue real".
pub const DEFAULT_REAL_TOL: f64 = 1e-9;

const SCHUR_MAX_ITER: usize = 50_000;

/// Square real matrix of even dimension `2n`, all entries finite.
#[derive(Debug, Clone, PartialEq)]
pub struct RealLinearMap(DMatrix<f64>);

impl RealLinearMap {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(ForgeError::InvalidInput(format!(
                "linear map must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let dim = matrix.nrows();
        if dim < 2 || dim % 2 != 0 {
            return Err(ForgeError::InvalidInput(format!(
                "linear map dimension must be even and at least 2, got {dim}"
            )));
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(ForgeError::InvalidInput(
                "linear map has non-finite entries".into(),
            ));
        }
        Ok(Self(matrix))
    }

    pub fn from_row_slice(dim: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(ForgeError::InvalidInput(format!(
                "expected {} entries for a {dim}x{dim} map, got {}",
                dim * dim,
                entries.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(ForgeError::InvalidInput(
                "linear map rows must all have length equal to the row count".into(),
            ));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_row_slice(dim, &flat)
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(DMatrix::identity(dim, dim))
    }

    /// Block-diagonal map with `n` copies of the 90° rotation `[[0,-1],[1,0]]`.
    pub fn standard_complex_structure(n: usize) -> Self {
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        for k in 0..n {
            m[(2 * k + 1, 2 * k)] = 1.0;
            m[(2 * k, 2 * k + 1)] = -1.0;
        }
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Half the dimension.
    pub fn half_dim(&self) -> usize {
        self.0.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn to_complex(&self) -> CMatrix {
        to_complex(&self.0)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.0
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }
}

/// `V+` as an orthonormal complex basis; `V-` is its entrywise conjugate.
#[derive(Debug, Clone)]
pub struct ConjugateSplit {
    basis_plus: CMatrix,
}

impl ConjugateSplit {
    /// Wraps an orthonormal basis of `V+`, checking the split invariants.
    pub fn from_basis(basis_plus: CMatrix, tol: f64) -> Result<Self> {
        let dim = basis_plus.nrows();
        if dim != 2 * basis_plus.ncols() {
            return Err(ForgeError::DimensionMismatch(format!(
                "conjugate split basis must be 2n x n, got {}x{}",
                dim,
                basis_plus.ncols()
            )));
        }
        let gram_err = orthonormality_residual(&basis_plus);
        if gram_err > 1e-9 {
            return Err(ForgeError::InvalidInput(format!(
                "conjugate split basis is not orthonormal (residual {gram_err:e})"
            )));
        }
        let split = Self { basis_plus };
        let sigma = min_singular_value(&split.stacked());
        if sigma <= tol {
            return Err(ForgeError::NotTransverse {
                min_singular: sigma,
            });
        }
        Ok(split)
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis_plus.nrows()
    }

    pub fn basis_plus(&self) -> &CMatrix {
        &self.basis_plus
    }

    pub fn basis_minus(&self) -> CMatrix {
        self.basis_plus.map(|z| z.conj())
    }

    /// `(basis_plus | basis_minus)`, a basis of `C^{2n}`.
    pub fn stacked(&self) -> CMatrix {
        let n = self.basis_plus.ncols();
        let mut w = CMatrix::zeros(2 * n, 2 * n);
        w.columns_mut(0, n).copy_from(&self.basis_plus);
        w.columns_mut(n, n).copy_from(&self.basis_minus());
        w
    }

    /// Oblique projector onto `V+` along `V-`.
    pub fn spectral_projector_plus(&self) -> Result<CMatrix> {
        let n = self.basis_plus.ncols();
        let w = self.stacked();
        let w_inv = w
            .try_inverse()
            .ok_or(ForgeError::IllConditioned {
                residual: f64::INFINITY,
                context: "conjugate split basis is singular",
            })?;
        Ok(&self.basis_plus * w_inv.rows(0, n))
    }

    /// Orthogonal projector onto `V+`.
    pub fn orthogonal_projector_plus(&self) -> CMatrix {
        &self.basis_plus * self.basis_plus.adjoint()
    }
}

pub fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Eigenvalues of a real matrix, from its real Schur form.
pub fn eigenvalues(t: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let schur = Schur::try_new(t.clone(), f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or(ForgeError::NoConvergence("real Schur decomposition"))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Smallest `|Im λ|` over the spectrum of `t`.
pub fn min_abs_imag_eigenvalue(t: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(t)?
        .iter()
        .map(|z| z.im.abs())
        .fold(f64::INFINITY, f64::min))
}

/// True iff some eigenvalue satisfies `|Im λ| <= tol`.
///
/// A failed eigenvalue iteration is reported as `true`: the map is then
/// not certified to lie in the domain.
pub fn has_real_eigenvalue(t: &RealLinearMap, tol: f64) -> bool {
    match min_abs_imag_eigenvalue(t.matrix()) {
        Ok(m) => m <= tol,
        Err(_) => true,
    }
}

fn complex_schur(m: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let schur = Schur::try_new(m.clone(), f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or(ForgeError::NoConvergence("complex Schur decomposition"))?;
    let (q, mut u) = schur.unpack();
    // strictly upper triangular form, cleaned below the diagonal
    for j in 0..u.ncols() {
        for i in (j + 1)..u.nrows() {
            u[(i, j)] = Complex64::new(0.0, 0.0);
        }
    }
    Ok((q, u))
}

/// Swaps the diagonal entries `j` and `j+1` of the upper triangular `u`
/// with a unitary rotation, updating the Schur vectors `q`.
fn swap_schur_pair(u: &mut CMatrix, q: &mut CMatrix, j: usize) {
    let a = u[(j, j)];
    let b = u[(j + 1, j + 1)];
    let x = u[(j, j + 1)];
    let v0 = x;
    let v1 = b - a;
    let norm = (v0.norm_sqr() + v1.norm_sqr()).sqrt();
    if norm == 0.0 {
        return;
    }
    let (c0, c1) = (v0 / norm, v1 / norm);
    // G = [v | w], w = (-conj v1, conj v0)
    let g = [[c0, -c1.conj()], [c1, c0.conj()]];
    let dim = u.nrows();
    for col in 0..dim {
        let r0 = u[(j, col)];
        let r1 = u[(j + 1, col)];
        u[(j, col)] = g[0][0].conj() * r0 + g[1][0].conj() * r1;
        u[(j + 1, col)] = g[0][1].conj() * r0 + g[1][1].conj() * r1;
    }
    for row in 0..dim {
        let c_0 = u[(row, j)];
        let c_1 = u[(row, j + 1)];
        u[(row, j)] = c_0 * g[0][0] + c_1 * g[1][0];
        u[(row, j + 1)] = c_0 * g[0][1] + c_1 * g[1][1];
        let d0 = q[(row, j)];
        let d1 = q[(row, j + 1)];
        q[(row, j)] = d0 * g[0][0] + d1 * g[1][0];
        q[(row, j + 1)] = d0 * g[0][1] + d1 * g[1][1];
    }
    u[(j + 1, j)] = Complex64::new(0.0, 0.0);
}

fn check_upper_half_count(eigs: &[Complex64], tol: f64) -> Result<()> {
    let n = eigs.len() / 2;
    let min_imag = eigs.iter().map(|z| z.im.abs()).fold(f64::INFINITY, f64::min);
    let upper = eigs.iter().filter(|z| z.im > 0.0).count();
    if min_imag <= tol || upper != n {
        return Err(ForgeError::RealEigenvalue {
            min_imag: if upper != n { 0.0 } else { min_imag },
            tol,
        });
    }
    Ok(())
}

/// Conjugate split of `T` via a reordered complex Schur form.
pub fn eigen_split(t: &RealLinearMap, tol: f64) -> Result<ConjugateSplit> {
    let dim = t.dim();
    let n = dim / 2;
    if has_real_eigenvalue(t, tol) {
        return Err(ForgeError::RealEigenvalue {
            min_imag: min_abs_imag_eigenvalue(t.matrix()).unwrap_or(0.0),
            tol,
        });
    }
    let (mut q, mut u) = complex_schur(&t.to_complex())?;
    let diag: Vec<Complex64> = (0..dim).map(|k| u[(k, k)]).collect();
    check_upper_half_count(&diag, tol)?;

    let mut next = 0;
    for k in 0..dim {
        if u[(k, k)].im > 0.0 {
            for j in (next..k).rev() {
                swap_schur_pair(&mut u, &mut q, j);
            }
            next += 1;
        }
    }
    if (0..n).any(|k| u[(k, k)].im <= 0.0) {
        return Err(ForgeError::IllConditioned {
            residual: f64::NAN,
            context: "Schur reordering lost the eigenvalue ordering",
        });
    }
    let basis = orthonormalize(&q.columns(0, n).into_owned(), 1e-12)?;
    ConjugateSplit::from_basis(basis, 1e-12)
}

/// Polynomial coefficients (ascending powers) of `∏ (z - root)`.
fn poly_from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    let mut coeffs = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); coeffs.len() + 1];
        for (k, &c) in coeffs.iter().enumerate() {
            next[k + 1] += c;
            next[k] -= r * c;
        }
        coeffs = next;
    }
    coeffs
}

/// Horner evaluation of `Σ c_k M^k`.
fn poly_eval_matrix(coeffs: &[Complex64], m: &CMatrix) -> CMatrix {
    let dim = m.nrows();
    let ident = CMatrix::identity(dim, dim);
    let mut acc = CMatrix::zeros(dim, dim);
    for &c in coeffs.iter().rev() {
        acc = &acc * m + &ident * c;
    }
    acc
}

/// Spectral projectors `(Π+, Π-)` of `T` from the Bezout identity
/// `a+ p+ + a- p- = 1`, where `p±` are the characteristic polynomials of `T`
/// restricted to `V±`. `Π+ = a-(T) p-(T)` and `Π- = a+(T) p+(T)`.
///
/// The cofactors are the unique solution with `deg a± < n` of the Sylvester
/// system, which is what the extended Euclidean algorithm produces.
pub fn bezout_projectors(t: &RealLinearMap, tol: f64) -> Result<(CMatrix, CMatrix)> {
    let dim = t.dim();
    let n = dim / 2;
    let eigs = eigenvalues(t.matrix())?;
    check_upper_half_count(&eigs, tol)?;

    // affine rescaling with a real shift keeps the half-planes and the
    // projectors, and brings the roots into the unit disc
    let shift = t.matrix().trace() / dim as f64;
    let radius = eigs
        .iter()
        .map(|z| (z - shift).norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let scaled_eigs: Vec<Complex64> = eigs.iter().map(|z| (z - shift) / radius).collect();
    let ts = (t.matrix() - DMatrix::identity(dim, dim) * shift) / radius;
    let ts = to_complex(&ts);

    let plus_roots: Vec<Complex64> = scaled_eigs.iter().copied().filter(|z| z.im > 0.0).collect();
    let minus_roots: Vec<Complex64> = plus_roots.iter().map(|z| z.conj()).collect();
    let p_plus = poly_from_roots(&plus_roots);
    let p_minus = poly_from_roots(&minus_roots);

    let mut sylvester = CMatrix::zeros(dim, dim);
    for j in 0..n {
        for (k, &c) in p_plus.iter().enumerate() {
            sylvester[(j + k, j)] = c;
        }
        for (k, &c) in p_minus.iter().enumerate() {
            sylvester[(j + k, n + j)] = c;
        }
    }
    let mut rhs = CVector::zeros(dim);
    rhs[0] = Complex64::new(1.0, 0.0);
    let sol = sylvester
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or(ForgeError::IllConditioned {
            residual: f64::INFINITY,
            context: "Bezout cofactor system is singular",
        })?;
    let residual = (&sylvester * &sol - &rhs).norm();
    if !residual.is_finite() || residual > 1e-6 {
        return Err(ForgeError::IllConditioned {
            residual,
            context: "Bezout cofactor solve",
        });
    }
    let a_plus: Vec<Complex64> = sol.rows(0, n).iter().copied().collect();
    let a_minus: Vec<Complex64> = sol.rows(n, n).iter().copied().collect();

    let pi_plus = poly_eval_matrix(&a_minus, &ts) * poly_eval_matrix(&p_minus, &ts);
    let pi_minus = poly_eval_matrix(&a_plus, &ts) * poly_eval_matrix(&p_plus, &ts);
    Ok((pi_plus, pi_minus))
}

/// One-sided Jacobi on the columns of `m` (`nrows ≥ ncols`). Returns the
/// rotated columns `m V / c`, the scale `c` and, when requested, the unitary
/// `V`. Dividing by the largest entry keeps squared column norms clear of
/// underflow and overflow.
fn jacobi_columns<T: ComplexField<RealField = f64>>(
    m: &DMatrix<T>,
    with_v: bool,
) -> (DMatrix<T>, f64, Option<DMatrix<T>>) {
    let n = m.ncols();
    let big = m.iter().map(|z| z.clone().modulus()).fold(0.0, f64::max);
    let scale = if big > 0.0 && big.is_finite() { big } else { 1.0 };
    let mut a = m.unscale(scale);
    let mut v = with_v.then(|| DMatrix::<T>::identity(n, n));
    for _sweep in 0..80 {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let alpha = a.column(i).norm_squared();
                let beta = a.column(j).norm_squared();
                let gamma = a.column(i).dotc(&a.column(j));
                let g = gamma.clone().modulus();
                if g <= f64::EPSILON * (alpha * beta).sqrt() || g == 0.0 {
                    continue;
                }
                rotated = true;
                // rotate (a_i, e^{-iφ} a_j) by a real Givens rotation
                let phase = gamma.unscale(g).conjugate();
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let rotate = |mat: &mut DMatrix<T>| {
                    let x = mat.column(i).into_owned();
                    let y = mat.column(j).map(|z| z * phase.clone());
                    mat.set_column(i, &(x.scale(c) - y.scale(s)));
                    mat.set_column(j, &(x.scale(s) + y.scale(c)));
                };
                rotate(&mut a);
                if let Some(v) = v.as_mut() {
                    rotate(v);
                }
            }
        }
        if !rotated {
            break;
        }
    }
    (a, scale, v)
}

/// Singular values in decreasing order.
pub fn singular_values<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> Vec<f64> {
    let tall = if m.nrows() >= m.ncols() { m.clone() } else { m.adjoint() };
    let (a, scale, _) = jacobi_columns(&tall, false);
    let mut s: Vec<f64> = a.column_iter().map(|c| c.norm() * scale).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Thin SVD `M = U diag(σ) Vᴴ`, singular values in decreasing order.
/// nalgebra's bidiagonal SVD can lose accuracy on clustered singular
/// values, so decompositions go through one-sided Jacobi.
pub fn thin_svd<T: ComplexField<RealField = f64>>(
    m: &DMatrix<T>,
) -> (DMatrix<T>, Vec<f64>, DMatrix<T>) {
    if m.nrows() < m.ncols() {
        let (u, s, v) = thin_svd(&m.adjoint());
        return (v, s, u);
    }
    let (r, k) = m.shape();
    let (a, factor, v) = jacobi_columns(m, true);
    let v = v.expect("requested V");
    let mut order: Vec<(f64, usize)> = a.column_iter().map(|c| c.norm()).zip(0..k).collect();
    order.sort_by(|x, y| y.0.total_cmp(&x.0));
    let top = order.first().map_or(0.0, |o| o.0);
    let mut us: Vec<DVector<T>> = Vec::with_capacity(k);
    for &(s, j) in &order {
        if !(s > 1e-14 * top) {
            break;
        }
        us.push(a.column(j).unscale(s));
    }
    let u = if us.len() < k {
        let partial = if us.is_empty() { DMatrix::zeros(r, 0) } else { DMatrix::from_columns(&us) };
        complete_orthonormal_basis(&partial).columns(0, k).into_owned()
    } else {
        DMatrix::from_columns(&us)
    };
    let v_sorted = DMatrix::from_columns(&order.iter().map(|&(_, j)| v.column(j).into_owned()).collect::<Vec<_>>());
    (u, order.iter().map(|&(s, _)| s * factor).collect(), v_sorted)
}

/// Smallest singular value of a real or complex matrix.
pub fn min_singular_value<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    singular_values(m).last().copied().unwrap_or(0.0)
}

/// Largest singular value.
pub fn spectral_norm<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// `‖BᴴB − I‖_F`.
pub fn orthonormality_residual<T: ComplexField<RealField = f64>>(b: &DMatrix<T>) -> f64 {
    let k = b.ncols();
    (b.adjoint() * b - DMatrix::<T>::identity(k, k)).norm()
}

/// Gram–Schmidt (applied twice) onto an orthonormal basis of the same span.
/// The change of basis is upper triangular with positive diagonal, so the
/// orientation of the span is kept.
pub fn orthonormalize<T: ComplexField<RealField = f64>>(
    columns: &DMatrix<T>,
    tol: f64,
) -> Result<DMatrix<T>> {
    let sigma = min_singular_value(columns);
    if sigma <= tol {
        return Err(ForgeError::RankDeficient {
            min_singular: sigma,
        });
    }
    let mut q = columns.clone();
    for j in 0..q.ncols() {
        for _ in 0..2 {
            for i in 0..j {
                let qi = q.column(i).into_owned();
                let proj = qi.dotc(&q.column(j));
                let update = qi * proj;
                let mut cj = q.column_mut(j);
                cj -= update;
            }
        }
        let norm = q.column(j).norm();
        if norm <= tol {
            return Err(ForgeError::RankDeficient { min_singular: norm });
        }
        let mut cj = q.column_mut(j);
        cj.unscale_mut(norm);
    }
    Ok(q)
}

/// Extends the orthonormal columns of `basis` to an orthonormal basis of the
/// whole space. The leading columns are returned unchanged.
pub fn complete_orthonormal_basis<T: ComplexField<RealField = f64>>(
    basis: &DMatrix<T>,
) -> DMatrix<T> {
    let dim = basis.nrows();
    let k = basis.ncols();
    let mut out = DMatrix::<T>::zeros(dim, dim);
    out.columns_mut(0, k).copy_from(basis);
    let mut filled = k;
    let mut candidate = 0;
    while filled < dim && candidate < dim {
        let mut v = DVector::<T>::zeros(dim);
        v[candidate] = T::one();
        candidate += 1;
        for _ in 0..2 {
            for i in 0..filled {
                let qi = out.column(i).into_owned();
                let proj = qi.dotc(&v);
                v -= qi * proj;
            }
        }
        let norm = v.norm();
        // a unit coordinate vector keeps at least 1/sqrt(dim) of its norm
        // against some remaining candidate; accept only well-conditioned ones
        if norm > 0.5 / (dim as f64).sqrt() {
            v.unscale_mut(norm);
            out.column_mut(filled).copy_from(&v);
            filled += 1;
        }
    }
    if filled < dim {
        // second pass with a lower acceptance threshold
        for c in 0..dim {
            if filled == dim {
                break;
            }
            let mut v = DVector::<T>::zeros(dim);
            v[c] = T::one();
            for _ in 0..2 {
                for i in 0..filled {
                    let qi = out.column(i).into_owned();
                    let proj = qi.dotc(&v);
                    v -= qi * proj;
                }
            }
            let norm = v.norm();
            if norm > 1e-8 {
                v.unscale_mut(norm);
                out.column_mut(filled).copy_from(&v);
                filled += 1;
            }
        }
    }
    out
}

/// 2-norm condition number of a real square matrix.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let s = singular_values(m);
    s[0] / s[s.len() - 1]
}

/// Euclidean norm that stays exact for vectors whose squares underflow.
pub fn scaled_norm(x: &DVector<f64>) -> f64 {
    let m = x.amax();
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    m * (x / m).norm()
}
