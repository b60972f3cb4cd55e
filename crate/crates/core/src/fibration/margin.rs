use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bump::golden_min;
use crate::error::{ForgeError, Result};
use crate::numeric::{min_singular_value, spectral_norm, thin_svd, RealLinearMap};
use crate::structures::ComplexStructure;

/// Sampling resolution for [`transversality_margin`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginGrid {
    pub t_count: usize,
    pub lambda_count: usize,
    pub refine_iters: usize,
}

impl Default for MarginGrid {
    fn default() -> Self {
        Self {
            t_count: 101,
            lambda_count: 64,
            refine_iters: 60,
        }
    }
}

/// Point `(t, v)` at which the margin is attained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginWitness {
    pub t: f64,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Margin {
    pub epsilon: f64,
    pub witness: MarginWitness,
    pub lambda: f64,
    pub grid: MarginGrid,
}

fn sigma_min(m: &DMatrix<f64>, lambda: f64) -> f64 {
    let mut shifted = m.clone();
    for k in 0..m.nrows() {
        shifted[(k, k)] -= lambda;
    }
    min_singular_value(&shifted)
}

/// `min_λ σ_min(M − λI)` over real `λ`, with the minimizing `λ`.
fn min_over_lambda(m: &DMatrix<f64>, grid: &MarginGrid) -> (f64, f64) {
    let radius = spectral_norm(m).max(1e-12);
    let count = grid.lambda_count.max(3);
    let step = 2.0 * radius / (count - 1) as f64;
    let vals: Vec<f64> = (0..count)
        .map(|k| sigma_min(m, -radius + step * k as f64))
        .collect();
    // refine around the three lowest local minima of the grid
    let mut minima: Vec<usize> = (0..count)
        .filter(|&k| {
            (k == 0 || vals[k] <= vals[k - 1]) && (k + 1 == count || vals[k] <= vals[k + 1])
        })
        .collect();
    minima.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    minima.truncate(3);
    let mut best = (f64::INFINITY, 0.0);
    for k in minima {
        let a = -radius + step * k.saturating_sub(1) as f64;
        let b = (-radius + step * (k + 1) as f64).min(radius);
        let (lam, val) = golden_min(|l| sigma_min(m, l), a, b, grid.refine_iters);
        let (lam, val) = if vals[k] < val {
            (-radius + step * k as f64, vals[k])
        } else {
            (lam, val)
        };
        if val < best.0 {
            best = (val, lam);
        }
    }
    best
}

fn interpolate(a: &DMatrix<f64>, j: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    a * t + j * (1.0 - t)
}

/// Sampled lower bound `ε` on `|λv − (tA + (1 − t)J)v|` over `t ∈ [0, 1]`,
/// real `λ` and unit `v`. For each `t` the minimum over `(λ, v)` is
/// `min_λ σ_min(M − λI)`, equivalently `min_v |Mv − (v·Mv)v|`.
pub fn transversality_margin(
    a: &RealLinearMap,
    j: &ComplexStructure,
    grid: &MarginGrid,
) -> Result<Margin> {
    let (am, jm) = (a.matrix(), j.matrix());
    if am.shape() != jm.shape() {
        return Err(ForgeError::DimensionMismatch(format!(
            "A is {}x{} but J is {}x{}",
            am.nrows(),
            am.ncols(),
            jm.nrows(),
            jm.ncols()
        )));
    }
    let t_count = grid.t_count.max(2);
    let ts: Vec<f64> = (0..t_count).map(|k| k as f64 / (t_count - 1) as f64).collect();
    let per_t: Vec<(f64, f64)> = ts
        .par_iter()
        .map(|&t| min_over_lambda(&interpolate(am, jm, t), grid))
        .collect();
    let k = (0..t_count)
        .min_by(|&x, &y| per_t[x].0.total_cmp(&per_t[y].0))
        .expect("nonempty grid");
    let (mut t_best, (mut eps, mut lambda)) = (ts[k], per_t[k]);

    let lo = ts[k.saturating_sub(1)];
    let hi = ts[(k + 1).min(t_count - 1)];
    let phi = |t: f64| min_over_lambda(&interpolate(am, jm, t), grid).0;
    let (t_ref, val) = golden_min(phi, lo, hi, grid.refine_iters);
    if val < eps {
        t_best = t_ref;
        let (v, l) = min_over_lambda(&interpolate(am, jm, t_ref), grid);
        eps = v;
        lambda = l;
    }

    if !(eps > 1e-12) {
        return Err(ForgeError::NonPositiveMargin { value: eps });
    }
    let mut shifted = interpolate(am, jm, t_best);
    for d in 0..shifted.nrows() {
        shifted[(d, d)] -= lambda;
    }
    let (_, _, right) = thin_svd(&shifted);
    let v: Vec<f64> = right.column(right.ncols() - 1).iter().copied().collect();
    Ok(Margin {
        epsilon: eps,
        witness: MarginWitness { t: t_best, v },
        lambda,
        grid: *grid,
    })
}
