#![allow(dead_code)]

use fibration_forge::numeric::{CMatrix, RealLinearMap};
use fibration_forge::sampling::random_no_real_eigen;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

/// Map with entries uniform in `[-10, 10]` and no real eigenvalue.
pub fn valid_map<R: Rng>(rng: &mut R, dim: usize) -> RealLinearMap {
    random_no_real_eigen(rng, dim, 10.0, 1e-9)
}

/// Largest distance from a column of `a` to the span of `b` (orthonormal).
pub fn span_gap(a: &CMatrix, b: &CMatrix) -> f64 {
    let proj = b * (b.adjoint() * a);
    (0..a.ncols())
        .map(|j| (a.column(j) - proj.column(j)).norm())
        .fold(0.0, f64::max)
}

/// Maximizes `score` over the unit circle `(cos α, sin α)` by a grid followed
/// by shrinking pattern search.
pub fn maximize_1d<F: Fn(f64) -> f64>(score: F, grid: usize, period: f64) -> f64 {
    let mut best = (0.0, f64::NEG_INFINITY);
    for k in 0..grid {
        let a = period * k as f64 / grid as f64;
        let v = score(a);
        if v > best.1 {
            best = (a, v);
        }
    }
    let mut step = period / grid as f64;
    while step > 1e-12 {
        let mut moved = false;
        for cand in [best.0 - step, best.0 + step] {
            let v = score(cand);
            if v > best.1 {
                best = (cand, v);
                moved = true;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    best.0
}

pub fn maximize_2d<F: Fn(f64, f64) -> f64>(score: F, grid: usize, periods: (f64, f64)) -> (f64, f64) {
    let mut best = ((0.0, 0.0), f64::NEG_INFINITY);
    for i in 0..grid {
        for j in 0..grid {
            let p = (periods.0 * i as f64 / grid as f64, periods.1 * j as f64 / grid as f64);
            let v = score(p.0, p.1);
            if v > best.1 {
                best = (p, v);
            }
        }
    }
    let mut step = (periods.0 / grid as f64, periods.1 / grid as f64);
    while step.0 > 1e-12 {
        let mut moved = false;
        for (di, dj) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)] {
            let c = (best.0 .0 + di * step.0, best.0 .1 + dj * step.1);
            let v = score(c.0, c.1);
            if v > best.1 {
                best = (c, v);
                moved = true;
            }
        }
        if !moved {
            step = (step.0 * 0.5, step.1 * 0.5);
        }
    }
    best.0
}

/// Unit coefficient vector of `C^k` (k ≤ 2) up to global phase.
pub fn complex_coeffs(k: usize, alpha: f64, phi: f64) -> DVector<Complex64> {
    if k == 1 {
        DVector::from_element(1, Complex64::new(1.0, 0.0))
    } else {
        DVector::from_vec(vec![
            Complex64::new(alpha.cos(), 0.0),
            Complex64::from_polar(alpha.sin(), phi),
        ])
    }
}

/// Orthonormal basis of the part of span(`basis`) orthogonal to `v`.
pub fn complement_in<T>(basis: &DMatrix<T>, v: &DVector<T>) -> DVector<T>
where
    T: nalgebra::ComplexField<RealField = f64>,
{
    let coeff = basis.adjoint() * v;
    // any unit vector in span orthogonal to `coeff`, valid for k = 2
    let c0 = coeff[0].clone();
    let c1 = coeff[1].clone();
    let w = DVector::from_vec(vec![-c1.conjugate(), c0.conjugate()]);
    let n = w.norm();
    basis * (w.unscale(n))
}

/// Greedy principal angles of real `k`-planes (`k ≤ 2`) by direct search:
/// the first angle minimizes the angle from `P` to `Q` over unit vectors of
/// `P`, the second repeats on the orthogonal complements of the first pair.
pub fn greedy_real(p: &DMatrix<f64>, q: &DMatrix<f64>) -> Vec<f64> {
    let k = p.ncols();
    let score = |pb: &DMatrix<f64>, qb: &DMatrix<f64>, a: f64| {
        let coeff = if pb.ncols() == 1 {
            DVector::from_element(1, 1.0)
        } else {
            DVector::from_vec(vec![a.cos(), a.sin()])
        };
        (qb.transpose() * (pb * coeff)).norm()
    };
    let a1 = maximize_1d(|a| score(p, q, a), 720, std::f64::consts::PI);
    let v1 = if k == 1 {
        p.column(0).into_owned()
    } else {
        p * DVector::from_vec(vec![a1.cos(), a1.sin()])
    };
    let w1raw = q * (q.transpose() * &v1);
    let c1 = w1raw.norm().min(1.0);
    let mut angles = vec![c1.acos()];
    if k == 2 {
        let w1 = w1raw / c1.max(1e-300);
        let p2 = complement_in(p, &v1);
        let q2 = complement_in(q, &w1);
        let c2 = q2.dot(&p2).abs().min(1.0);
        angles.push(c2.acos());
    }
    angles.sort_by(f64::total_cmp);
    angles
}

pub fn greedy_complex(p: &CMatrix, q: &CMatrix) -> Vec<f64> {
    let k = p.ncols();
    let score = |a: f64, f: f64| (q.adjoint() * (p * complex_coeffs(k, a, f))).norm();
    let (a1, f1) = if k == 1 {
        (0.0, 0.0)
    } else {
        maximize_2d(score, 120, (std::f64::consts::FRAC_PI_2, std::f64::consts::TAU))
    };
    let v1 = p * complex_coeffs(k, a1, f1);
    let w1raw = q * (q.adjoint() * &v1);
    let c1 = w1raw.norm().min(1.0);
    let mut angles = vec![c1.acos()];
    if k == 2 {
        let w1 = w1raw.unscale(c1.max(1e-300));
        let p2 = complement_in(p, &v1);
        let q2 = complement_in(q, &w1);
        angles.push(q2.dotc(&p2).norm().min(1.0).acos());
    }
    angles.sort_by(f64::total_cmp);
    angles
}

/// Constrained angles between `P` and its conjugate: the first maximizes
/// `|v·v|` (the cosine between `v` and `v̄`) over unit `v ∈ P`.
pub fn greedy_conjugate(p: &CMatrix) -> Vec<f64> {
    let k = p.ncols();
    let bil = |v: &DVector<Complex64>| v.iter().map(|z| z * z).sum::<Complex64>().norm();
    let (a1, f1) = if k == 1 {
        (0.0, 0.0)
    } else {
        maximize_2d(|a, f| bil(&(p * complex_coeffs(k, a, f))), 120, (std::f64::consts::FRAC_PI_2, std::f64::consts::TAU))
    };
    let v1 = p * complex_coeffs(k, a1, f1);
    let mut angles = vec![bil(&v1).min(1.0).acos()];
    if k == 2 {
        let v2 = complement_in(p, &v1);
        angles.push(bil(&v2).min(1.0).acos());
    }
    angles.sort_by(f64::total_cmp);
    angles
}

/// `min_v |Mv − (v·Mv)v|` over unit `v` by projected gradient descent on
/// `g(v) = |Mv|² − (v·Mv)²` from many starts.
pub fn sphere_descent_margin<R: Rng>(m: &DMatrix<f64>, rng: &mut R, starts: usize) -> f64 {
    let dim = m.nrows();
    let g = |v: &DVector<f64>| {
        let mv = m * v;
        let q = v.dot(&mv);
        (mv.norm_squared() - q * q).max(0.0)
    };
    let mut best = f64::INFINITY;
    for _ in 0..starts {
        let mut v = fibration_forge::sampling::unit_vector(rng, dim);
        let mut step = 0.1 / (m.norm() * m.norm()).max(1e-12);
        let mut val = g(&v);
        for _ in 0..4000 {
            let mv = m * &v;
            let q = v.dot(&mv);
            // gradient of g: 2Mᵀ(Mv) − 2q(M + Mᵀ)v
            let grad = (m.transpose() * &mv) * 2.0 - (&mv + m.transpose() * &v) * (2.0 * q);
            let tangent = &grad - &v * v.dot(&grad);
            if tangent.norm() < 1e-14 {
                break;
            }
            let cand = (&v - &tangent * step).normalize();
            let cv = g(&cand);
            if cv < val {
                v = cand;
                val = cv;
                step *= 1.2;
            } else {
                step *= 0.5;
                if step < 1e-18 {
                    break;
                }
            }
        }
        best = best.min(val.sqrt());
    }
    best
}
