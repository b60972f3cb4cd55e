use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::base::BaseMap;
use crate::grassmann::{relative_intersection_margin, DEFAULT_INTERSECT_TOL};
use crate::numeric::min_abs_imag_eigenvalue;
use crate::sampling::{log_uniform, rng_from_seed, unit_vector};

/// Failures beyond this many are counted but not listed.
const MAX_LISTED_FAILURES: usize = 32;

const MIN_RADIUS: f64 = 1e-280;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    /// Number of base points checked for real eigenvalues of `dN`.
    pub samples: usize,
    /// Number of base-point pairs checked for disjoint fibres.
    pub pairs: usize,
    pub seed: u64,
    /// Smallest accepted `|Im λ|` of `dN_x`.
    pub eigen_tol: f64,
    /// Smallest accepted `σ_min/σ_max` of the difference of two chart points.
    pub intersect_tol: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            samples: 10_000,
            pairs: 500,
            seed: 0,
            eigen_tol: 1e-9,
            intersect_tol: DEFAULT_INTERSECT_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub check: &'static str,
    pub index: usize,
    pub value: f64,
    pub witness: Vec<f64>,
}

/// Outcome of one named check over many samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckSummary {
    pub name: &'static str,
    pub samples: usize,
    pub failures: usize,
    /// Worst value observed (smallest margin, or largest deviation for the
    /// exterior check).
    pub margin: f64,
    pub witness: Vec<f64>,
}

impl CheckSummary {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckSummary>,
    pub failures: Vec<Failure>,
}

impl VerificationReport {
    pub fn is_clean(&self) -> bool {
        self.checks.iter().all(CheckSummary::passed)
    }

    pub fn total_failures(&self) -> usize {
        self.checks.iter().map(|c| c.failures).sum()
    }

    pub fn check(&self, name: &str) -> Option<&CheckSummary> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Partial result of one check, merged associatively across samples.
#[derive(Debug, Clone)]
struct Partial {
    samples: usize,
    worst: Option<(f64, usize, Vec<f64>)>,
    failures: Vec<Failure>,
    failure_count: usize,
    /// Larger values are worse when set.
    maximize: bool,
}

impl Partial {
    fn empty(maximize: bool) -> Self {
        Self {
            samples: 0,
            worst: None,
            failures: Vec::new(),
            failure_count: 0,
            maximize,
        }
    }

    fn single(
        check: &'static str,
        index: usize,
        value: f64,
        witness: Vec<f64>,
        failed: bool,
        maximize: bool,
    ) -> Self {
        let failures = if failed {
            vec![Failure {
                check,
                index,
                value,
                witness: witness.clone(),
            }]
        } else {
            Vec::new()
        };
        Self {
            samples: 1,
            worst: Some((value, index, witness)),
            failures,
            failure_count: usize::from(failed),
            maximize,
        }
    }

    fn worse(&self, a: &(f64, usize, Vec<f64>), b: &(f64, usize, Vec<f64>)) -> bool {
        // NaN counts as worst; ties go to the lower index
        let key = |v: f64| if v.is_nan() { f64::INFINITY } else if self.maximize { v } else { -v };
        match key(a.0).total_cmp(&key(b.0)) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => a.1 < b.1,
        }
    }

    fn merge(mut self, other: Self) -> Self {
        self.samples += other.samples;
        self.failure_count += other.failure_count;
        self.worst = match (self.worst.take(), other.worst) {
            (Some(a), Some(b)) => Some(if self.worse(&b, &a) { b } else { a }),
            (a, b) => a.or(b),
        };
        self.failures.extend(other.failures);
        self.failures.sort_by_key(|f| f.index);
        self.failures.truncate(MAX_LISTED_FAILURES);
        self
    }

    fn summary(self, name: &'static str) -> (CheckSummary, Vec<Failure>) {
        let (margin, witness) = match self.worst {
            Some((v, _, w)) => (v, w),
            None => (if self.maximize { 0.0 } else { f64::INFINITY }, Vec::new()),
        };
        (
            CheckSummary {
                name,
                samples: self.samples,
                failures: self.failure_count,
                margin,
                witness,
            },
            self.failures,
        )
    }
}

fn random_point<R: Rng>(rng: &mut R, dim: usize, radius: f64) -> DVector<f64> {
    unit_vector(rng, dim) * radius
}

/// Sample base points split evenly between the inner region, the
/// transition annulus (log-uniform radius) and the exterior.
pub fn sample_points<M: BaseMap + ?Sized>(base: &M, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = rng_from_seed(seed);
    let dim = base.dim();
    // a large exponent can push the inner radius below the smallest
    // normal float; such plateaus are only reachable at x = 0
    let inner = base.inner_radius().max(MIN_RADIUS);
    let outer = base.exterior_reference().0.max(inner);
    (0..count)
        .map(|k| {
            let radius = match k % 3 {
                0 => inner * rng.gen::<f64>(),
                1 if outer > inner => log_uniform(&mut rng, inner, outer),
                1 => inner,
                _ => outer * (1.0 + 3.0 * rng.gen::<f64>()) + 1e-12,
            };
            random_point(&mut rng, dim, radius)
        })
        .collect()
}

fn pair_indices(count: usize, pairs: usize, seed: u64) -> Vec<(usize, usize)> {
    if count < 2 {
        return Vec::new();
    }
    let mut rng = rng_from_seed(seed ^ 0x9e37_79b9_7f4a_7c15);
    (0..pairs)
        .map(|_| {
            let i = rng.gen_range(0..count);
            let mut j = rng.gen_range(0..count - 1);
            if j >= i {
                j += 1;
            }
            (i, j)
        })
        .collect()
}

/// Sampled certificate that the base is transverse to the bad cones
/// (no real eigenvalue of `dN_x`), that distinct base points give disjoint
/// fibres, and that the base agrees with `x ↦ Jx` outside the bump support.
pub fn verify_fibration<M: BaseMap + ?Sized>(base: &M, opts: &VerifyOptions) -> VerificationReport {
    let points = sample_points(base, opts.samples, opts.seed);
    verify_points(base, &points, opts)
}

pub fn verify_points<M: BaseMap + ?Sized>(
    base: &M,
    points: &[DVector<f64>],
    opts: &VerifyOptions,
) -> VerificationReport {
    let (outer, j) = base.exterior_reference();

    let eigen = points
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let value = min_abs_imag_eigenvalue(&base.jacobian(x)).unwrap_or(0.0);
            let failed = !(value > opts.eigen_tol);
            Partial::single("eigen_margin", i, value, x.iter().copied().collect(), failed, false)
        })
        .reduce(|| Partial::empty(false), Partial::merge);

    let charts: Vec<_> = points.par_iter().map(|x| base.chart_point(x)).collect();
    let disjoint = pair_indices(points.len(), opts.pairs, opts.seed)
        .into_par_iter()
        .enumerate()
        .map(|(k, (i, jdx))| {
            let value = relative_intersection_margin(&charts[i], &charts[jdx]);
            let failed = !(value > opts.intersect_tol);
            let witness = points[i].iter().chain(points[jdx].iter()).copied().collect();
            Partial::single("pair_disjoint", k, value, witness, failed, false)
        })
        .reduce(|| Partial::empty(false), Partial::merge);

    let exterior = points
        .par_iter()
        .enumerate()
        .filter(|(_, x)| x.norm() > outer)
        .map(|(i, x)| {
            let value = (base.eval(x) - j * x).norm();
            let failed = !(value <= 4.0 * f64::EPSILON * x.norm());
            Partial::single("exterior_agreement", i, value, x.iter().copied().collect(), failed, true)
        })
        .reduce(|| Partial::empty(true), Partial::merge);

    let mut checks = Vec::new();
    let mut failures = Vec::new();
    for (part, name) in [(eigen, "eigen_margin"), (disjoint, "pair_disjoint"), (exterior, "exterior_agreement")] {
        let (summary, fails) = part.summary(name);
        checks.push(summary);
        failures.extend(fails);
    }
    VerificationReport { checks, failures }
}
