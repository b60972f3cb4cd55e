//! Seeded random generators for maps, structures, subspaces and sample
//! points. Everything here is deterministic given the RNG state.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::numeric::{
    self, condition_number, min_abs_imag_eigenvalue, CMatrix, RealLinearMap,
};

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal variate (Box–Muller).
pub fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

pub fn uniform_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    half_width: f64,
) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-half_width..=half_width))
}

pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(dim, |_, _| gaussian(rng));
        let n = v.norm();
        if n > 1e-6 {
            return v / n;
        }
    }
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with the
/// sign of `R`'s diagonal absorbed).
pub fn random_orthogonal<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DMatrix<f64> {
    let g = gaussian_matrix(rng, dim, dim);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            let mut c = q.column_mut(j);
            c.neg_mut();
        }
    }
    q
}

pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| Complex64::new(gaussian(rng), gaussian(rng)));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        let mut c = q.column_mut(j);
        c *= phase;
    }
    q
}

/// Invertible matrix with condition number below `max_cond`.
pub fn random_invertible<R: Rng + ?Sized>(rng: &mut R, dim: usize, max_cond: f64) -> DMatrix<f64> {
    loop {
        let g = gaussian_matrix(rng, dim, dim);
        if condition_number(&g) < max_cond {
            return g;
        }
    }
}

/// Rejection sample of a map with entries uniform in `[-half_width, half_width]`
/// and every eigenvalue satisfying `|Im λ| > min_imag`.
pub fn random_no_real_eigen<R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    half_width: f64,
    min_imag: f64,
) -> RealLinearMap {
    loop {
        let m = uniform_matrix(rng, dim, dim, half_width);
        if let Ok(mi) = min_abs_imag_eigenvalue(&m) {
            if mi > min_imag {
                return RealLinearMap::new(m).expect("finite even-dimensional matrix");
            }
        }
    }
}

/// `g J₀ g⁻¹` for the standard structure `J₀` and random `g` of bounded
/// condition number: a generic, usually non-orthogonal, complex structure.
pub fn random_complex_structure<R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    max_cond: f64,
) -> DMatrix<f64> {
    let g = random_invertible(rng, dim, max_cond);
    let g_inv = g.clone().try_inverse().expect("bounded condition number");
    let j0 = RealLinearMap::standard_complex_structure(dim / 2);
    &g * j0.matrix() * g_inv
}

/// Random orthogonal complex structure `Q J₀ Qᵀ`.
pub fn random_orthogonal_structure<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DMatrix<f64> {
    let q = random_orthogonal(rng, dim);
    let j0 = RealLinearMap::standard_complex_structure(dim / 2);
    &q * j0.matrix() * q.transpose()
}

/// Random `k`-dimensional real subspace basis (orthonormal columns).
pub fn random_real_basis<R: Rng + ?Sized>(rng: &mut R, dim: usize, k: usize) -> DMatrix<f64> {
    loop {
        let g = gaussian_matrix(rng, dim, k);
        if let Ok(q) = numeric::orthonormalize(&g, 1e-6) {
            return q;
        }
    }
}

pub fn random_complex_basis<R: Rng + ?Sized>(rng: &mut R, dim: usize, k: usize) -> CMatrix {
    loop {
        let g = CMatrix::from_fn(dim, k, |_, _| Complex64::new(gaussian(rng), gaussian(rng)));
        if let Ok(q) = numeric::orthonormalize(&g, 1e-6) {
            return q;
        }
    }
}

/// Point of `R^dim` with uniformly random direction and the given radius.
pub fn point_at_radius<R: Rng + ?Sized>(rng: &mut R, dim: usize, radius: f64) -> DVector<f64> {
    unit_vector(rng, dim) * radius
}

/// Radius drawn log-uniformly from `[lo, hi]` (`lo > 0`).
pub fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let (a, b) = (lo.ln(), hi.ln());
    (a + (b - a) * rng.gen::<f64>()).exp()
}
