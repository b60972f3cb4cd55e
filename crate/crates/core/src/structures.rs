//! Complex structures on `R^{2n}` and the two retractions onto them.
//!
//! The first stage sends a map `T` without real eigenvalues to the complex
//! structure `J_T` that acts as `+i` on `V+` and `−i` on `V−`, moving along the
//! segment `(1 − t)T + tJ_T`. The second stage opens the principal angles
//! between `V+` and `V−` to `π/2`, which makes the structure orthogonal.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::angles::{coincidence_basis, real_frame};
use crate::error::{ForgeError, Result};
use crate::numeric::{
    eigen_split, thin_svd, orthonormality_residual, spectral_norm, CMatrix, RealLinearMap, DEFAULT_REAL_TOL,
};
use crate::sampling::{rng_from_seed, unit_vector};

/// Tolerance on `‖J² + I‖` and `‖JᵀJ − I‖` accepted for a stored structure.
pub const STRUCTURE_TOL: f64 = 1e-8;
const REALIFY_TOL: f64 = 1e-8;
const FRAME_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexStructure {
    map: RealLinearMap,
    orthogonal: bool,
}

impl ComplexStructure {
    /// Accepts `map` if `‖J² + I‖ < tol` (relative to `‖J‖²` when that is
    /// larger than one). The orthogonality flag is detected.
    pub fn new(map: RealLinearMap, tol: f64) -> Result<Self> {
        let j = map.matrix();
        let dim = j.nrows();
        let residual = square_residual(j);
        let scale = spectral_norm(j).powi(2).max(1.0);
        if !(residual < tol * scale) {
            return Err(ForgeError::InvalidInput(format!(
                "not a complex structure: ‖J² + I‖ = {residual:e}"
            )));
        }
        let orthogonal = (j.transpose() * j - DMatrix::identity(dim, dim)).norm() < STRUCTURE_TOL;
        Ok(Self { map, orthogonal })
    }

    /// The standard structure with `J e_{2k} = e_{2k+1}`.
    pub fn standard(n: usize) -> Self {
        Self {
            map: RealLinearMap::standard_complex_structure(n),
            orthogonal: true,
        }
    }

    pub fn map(&self) -> &RealLinearMap {
        &self.map
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        self.map.matrix()
    }

    pub fn dim(&self) -> usize {
        self.map.dim()
    }

    pub fn is_orthogonal(&self) -> bool {
        self.orthogonal
    }

    /// Orthonormal basis of the `+i` eigenspace, the range of `(I − iJ)/2`.
    pub fn plus_space(&self) -> CMatrix {
        let dim = self.dim();
        let j = self.matrix();
        let proj = CMatrix::from_fn(dim, dim, |r, c| {
            let id = if r == c { 0.5 } else { 0.0 };
            Complex64::new(id, -0.5 * j[(r, c)])
        });
        thin_svd(&proj).0.columns(0, dim / 2).into_owned()
    }
}

fn square_residual(j: &DMatrix<f64>) -> f64 {
    let dim = j.nrows();
    (j * j + DMatrix::identity(dim, dim)).norm()
}

/// Newton step for the matrix sign function applied to `−iJ`; fixes `J`'s
/// eigenvectors and drives `J²` to `−I`.
fn polish(mut j: DMatrix<f64>) -> DMatrix<f64> {
    for _ in 0..6 {
        if square_residual(&j) < 1e-13 * j.norm().max(1.0) {
            break;
        }
        match j.clone().try_inverse() {
            Some(inv) => j = (&j - inv) * 0.5,
            None => break,
        }
    }
    j
}

/// `J_T = Re(i(Π+ − Π−))` with `Π±` the spectral projectors of `T`.
pub fn make_complex_structure(t: &RealLinearMap, tol: f64) -> Result<ComplexStructure> {
    let split = eigen_split(t, tol)?;
    // a complex structure is its own J_T; keep it bit for bit
    if square_residual(t.matrix()) <= 4.0 * f64::EPSILON * t.matrix().norm_squared().max(1.0) {
        return ComplexStructure::new(t.clone(), 1e-7);
    }
    let pi_plus = split.spectral_projector_plus()?;
    let dim = t.dim();
    let imag_part = (pi_plus.map(|z| 2.0 * z.re) - DMatrix::<f64>::identity(dim, dim)).norm();
    if imag_part > REALIFY_TOL * pi_plus.norm().max(1.0) {
        return Err(ForgeError::IllConditioned {
            residual: imag_part,
            context: "J_T has a nonzero imaginary part",
        });
    }
    let j = polish(pi_plus.map(|z| -2.0 * z.im));
    let residual = square_residual(&j);
    if !(residual < 1e-7) {
        return Err(ForgeError::IllConditioned {
            residual,
            context: "J_T² + I",
        });
    }
    ComplexStructure::new(RealLinearMap::new(j)?, 1e-7)
}

/// `(1 − t)T + tJ_T`.
pub fn mckay_path(t_map: &RealLinearMap, t: f64) -> Result<RealLinearMap> {
    let j = make_complex_structure(t_map, DEFAULT_REAL_TOL)?;
    Ok(segment(t_map, &j, t))
}

fn segment(t_map: &RealLinearMap, j: &ComplexStructure, t: f64) -> RealLinearMap {
    RealLinearMap::new(t_map.matrix() * (1.0 - t) + j.matrix() * t).expect("finite combination")
}

/// `‖JᵀJ − I‖ < tol`, cross-checked by `|v·Jv| < tol·|v|²` on a fixed sample.
pub fn is_orthogonal_structure(j: &ComplexStructure, tol: f64) -> bool {
    let m = j.matrix();
    let dim = m.nrows();
    if !((m.transpose() * m - DMatrix::identity(dim, dim)).norm() < tol) {
        return false;
    }
    let mut rng = rng_from_seed(0x5eed);
    (0..64).all(|_| {
        let v = unit_vector(&mut rng, dim);
        v.dot(&(m * &v)).abs() < tol
    })
}

/// Cosine of the smallest angle between `V+(J)` and `V−(J)`: the largest
/// Hermitian inner product of unit vectors from the two spaces.
pub fn split_orthogonality_defect(j: &ComplexStructure) -> f64 {
    let plus = j.plus_space();
    let minus = plus.map(|z| z.conj());
    spectral_norm(&(plus.adjoint() * minus))
}

/// Real orthonormal frame `(r_i, m_i)` and half-angles `β_i` such that
/// `cos β_i r_i + i sin β_i m_i` spans `V+` of the structure.
#[derive(Debug, Clone)]
pub struct ScissorsFrame {
    frame: DMatrix<f64>,
    betas: Vec<f64>,
}

impl ScissorsFrame {
    pub fn of(j: &ComplexStructure) -> Result<Self> {
        let (v, _) = coincidence_basis(&j.plus_space());
        Self::from_coincidence_basis(&v)
    }

    /// Builds the frame from unit vectors with `v_i · v_i` real and positive
    /// and `⟨v_i, v̄_j⟩ = 0` for `i ≠ j`.
    pub fn from_coincidence_basis(v: &CMatrix) -> Result<Self> {
        let frame = real_frame(v)?;
        let residual = orthonormality_residual(&frame);
        if !(residual < FRAME_TOL) {
            return Err(ForgeError::IllConditioned {
                residual,
                context: "scissors frame is not orthonormal",
            });
        }
        let betas = (0..v.ncols())
            .map(|i| {
                let re = v.column(i).iter().map(|z| z.re * z.re).sum::<f64>().sqrt();
                let im = v.column(i).iter().map(|z| z.im * z.im).sum::<f64>().sqrt();
                im.atan2(re)
            })
            .collect();
        Ok(Self { frame, betas })
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// Structure whose `+i` space is spanned by `cos β r + i sin β m` with
    /// `β = (1 − t)β_i + tπ/4`.
    pub fn at(&self, t: f64) -> DMatrix<f64> {
        let dim = self.frame.nrows();
        let mut j = DMatrix::zeros(dim, dim);
        for (i, &b0) in self.betas.iter().enumerate() {
            let b = (1.0 - t) * b0 + t * std::f64::consts::FRAC_PI_4;
            let r = self.frame.column(2 * i);
            let m = self.frame.column(2 * i + 1);
            j -= m * r.transpose() * b.tan();
            j += r * m.transpose() / b.tan();
        }
        j
    }
}

/// Opens the angles between `V+(J)` and `V−(J)` towards `π/2`; orthogonal at
/// `t = 1` and equal to `J` at `t = 0`.
pub fn open_scissors(j: &ComplexStructure, t: f64) -> Result<ComplexStructure> {
    let frame = ScissorsFrame::of(j)?;
    scissors_structure(&frame, t)
}

fn scissors_structure(frame: &ScissorsFrame, t: f64) -> Result<ComplexStructure> {
    ComplexStructure::new(RealLinearMap::new(frame.at(t))?, 1e-7)
}

/// The composite retraction: the segment to `J_T` on `[0, ½]`, then the
/// scissors opening on `[½, 1]`.
#[derive(Debug, Clone)]
pub struct RetractionPath {
    start: RealLinearMap,
    j: ComplexStructure,
    frame: ScissorsFrame,
}

impl RetractionPath {
    pub fn new(t_map: &RealLinearMap, tol: f64) -> Result<Self> {
        let j = make_complex_structure(t_map, tol)?;
        let frame = ScissorsFrame::of(&j)?;
        Ok(Self {
            start: t_map.clone(),
            j,
            frame,
        })
    }

    pub fn start(&self) -> &RealLinearMap {
        &self.start
    }

    pub fn complex_structure(&self) -> &ComplexStructure {
        &self.j
    }

    pub fn eval(&self, t: f64) -> RealLinearMap {
        let t = t.clamp(0.0, 1.0);
        if t <= 0.5 {
            segment(&self.start, &self.j, 2.0 * t)
        } else {
            RealLinearMap::new(self.frame.at(2.0 * t - 1.0)).expect("finite structure")
        }
    }

    /// The orthogonal structure at `t = 1`.
    pub fn endpoint(&self) -> RealLinearMap {
        self.eval(1.0)
    }

    /// Gap between the two stages at `t = ½`.
    pub fn junction_residual(&self) -> f64 {
        (self.frame.at(0.0) - self.j.matrix()).norm()
    }
}

pub fn full_retraction(t_map: &RealLinearMap, t: f64) -> Result<RealLinearMap> {
    Ok(RetractionPath::new(t_map, DEFAULT_REAL_TOL)?.eval(t))
}

/// `max |v·Jv| / |v|²` over random unit `v`, the quantity whose vanishing
/// characterizes orthogonal structures.
pub fn sampled_orthogonality<R: Rng + ?Sized>(j: &DMatrix<f64>, rng: &mut R, count: usize) -> f64 {
    (0..count)
        .map(|_| {
            let v: DVector<f64> = unit_vector(rng, j.nrows());
            v.dot(&(j * &v)).abs()
        })
        .fold(0.0, f64::max)
}
