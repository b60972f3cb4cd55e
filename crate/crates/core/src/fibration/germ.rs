use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use super::base::{build_fibration_with, BaseMap, BuildOptions, FibrationBase};
use super::bump::BumpProfile;
use super::verify::{verify_fibration, VerificationReport, VerifyOptions};
use crate::error::{ForgeError, Result};
use crate::grassmann::OrientedTwoPlane;
use crate::numeric::{min_abs_imag_eigenvalue, scaled_norm, RealLinearMap};
use crate::sampling::{rng_from_seed, unit_vector};

pub const MAX_GERM_DEGREE: usize = 4;
const GERM_SAMPLES: usize = 256;

/// Polynomial map `h: P⊥ → P⊥` without constant term,
/// `h(x) = Σ_d C_d (x ⊗ … ⊗ x)` with `C_d` of shape `2n × (2n)^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct GermSpec {
    n: usize,
    coeffs: Vec<DMatrix<f64>>,
    valid_radius: f64,
}

fn kron_power(x: &DVector<f64>, d: usize) -> DVector<f64> {
    let mut acc = DVector::from_element(1, 1.0);
    for _ in 0..d {
        acc = acc.kronecker(x);
    }
    acc
}

impl GermSpec {
    pub fn new(n: usize, coeffs: Vec<DMatrix<f64>>, valid_radius: f64) -> Result<Self> {
        let dim = 2 * n;
        if n == 0 || coeffs.is_empty() || coeffs.len() > MAX_GERM_DEGREE {
            return Err(ForgeError::InvalidInput(format!(
                "germ needs n >= 1 and degree 1..={MAX_GERM_DEGREE}, got n={n}, degree={}",
                coeffs.len()
            )));
        }
        for (k, c) in coeffs.iter().enumerate() {
            let cols = dim.pow(k as u32 + 1);
            if c.shape() != (dim, cols) {
                return Err(ForgeError::DimensionMismatch(format!(
                    "degree {} coefficient must be {dim}x{cols}, got {}x{}",
                    k + 1,
                    c.nrows(),
                    c.ncols()
                )));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(ForgeError::InvalidInput("germ coefficients must be finite".into()));
            }
        }
        if !(valid_radius > 0.0 && valid_radius.is_finite()) {
            return Err(ForgeError::InvalidInput(format!(
                "valid_radius must be positive, got {valid_radius}"
            )));
        }
        Ok(Self {
            n,
            coeffs,
            valid_radius,
        })
    }

    /// The linear germ `x ↦ Ax`.
    pub fn linear(a: &RealLinearMap, valid_radius: f64) -> Result<Self> {
        Self::new(a.half_dim(), vec![a.matrix().clone()], valid_radius)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[DMatrix<f64>] {
        &self.coeffs
    }

    pub fn valid_radius(&self) -> f64 {
        self.valid_radius
    }

    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(2 * self.n);
        for (k, c) in self.coeffs.iter().enumerate() {
            out += c * kron_power(x, k + 1);
        }
        out
    }

    pub fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let dim = 2 * self.n;
        let mut jac = self.coeffs[0].clone();
        for (k, c) in self.coeffs.iter().enumerate().skip(1) {
            let d = k + 1;
            for col in 0..dim {
                let mut e = DVector::zeros(dim);
                e[col] = 1.0;
                let mut tensor = DVector::zeros(dim.pow(d as u32));
                for pos in 0..d {
                    let left = kron_power(x, pos);
                    let right = kron_power(x, d - pos - 1);
                    tensor += left.kronecker(&e).kronecker(&right);
                }
                let contrib = c * tensor;
                let mut target = jac.column_mut(col);
                target += contrib;
            }
        }
        jac
    }

    /// `dh₀`.
    pub fn linear_part(&self) -> RealLinearMap {
        RealLinearMap::new(self.coeffs[0].clone()).expect("validated coefficients")
    }

    /// Checks that `dh_x` has no real eigenvalue at `0` and at sampled points
    /// with `|x| ≤ valid_radius`.
    pub fn validate(&self, tol: f64, seed: u64) -> Result<()> {
        let min_imag = min_abs_imag_eigenvalue(&self.coeffs[0]).unwrap_or(0.0);
        if !(min_imag > tol) {
            return Err(ForgeError::GermInvalid { radius: 0.0, min_imag });
        }
        if self.degree() == 1 {
            return Ok(());
        }
        let mut rng = rng_from_seed(seed);
        for _ in 0..GERM_SAMPLES {
            let r = self.valid_radius * rng.gen::<f64>().sqrt();
            let x = unit_vector(&mut rng, 2 * self.n) * r;
            let min_imag = min_abs_imag_eigenvalue(&self.jacobian(&x)).unwrap_or(0.0);
            if !(min_imag > tol) {
                return Err(ForgeError::GermInvalid { radius: r, min_imag });
            }
        }
        Ok(())
    }
}

/// `N''(x) = g(|x|)·h(x) + (1 − g(|x|))·N'(x)` with `g ≡ 1` on `[0, ρ/2]`
/// and `g ≡ 0` on `[ρ, ∞)`.
#[derive(Debug, Clone)]
pub struct GermComposite {
    germ: GermSpec,
    outer: FibrationBase,
    cutoff: BumpProfile,
}

impl GermComposite {
    pub fn new(germ: GermSpec, outer: FibrationBase, rho: f64) -> Result<Self> {
        if germ.n() != outer.n() {
            return Err(ForgeError::DimensionMismatch(format!(
                "germ has n={} but the fibration has n={}",
                germ.n(),
                outer.n()
            )));
        }
        Ok(Self {
            germ,
            outer,
            cutoff: BumpProfile::new(rho / 2.0, rho, 1)?,
        })
    }

    pub fn rho(&self) -> f64 {
        self.cutoff.r1
    }

    pub fn germ(&self) -> &GermSpec {
        &self.germ
    }

    pub fn outer(&self) -> &FibrationBase {
        &self.outer
    }
}

impl BaseMap for GermComposite {
    fn dim(&self) -> usize {
        2 * self.germ.n()
    }

    fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        let g = self.cutoff.value(scaled_norm(x));
        if g == 1.0 {
            self.germ.eval(x)
        } else if g == 0.0 {
            self.outer.eval_n(x)
        } else {
            self.germ.eval(x) * g + self.outer.eval_n(x) * (1.0 - g)
        }
    }

    /// `g·dh + (1 − g)·dN' + g'(|x|)(x̂·v)(h − N')`.
    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let r = scaled_norm(x);
        let g = self.cutoff.value(r);
        let gp = self.cutoff.slope(r);
        if gp == 0.0 && g == 1.0 {
            return self.germ.jacobian(x);
        }
        if gp == 0.0 && g == 0.0 {
            return self.outer.eval_dn(x);
        }
        let mut d = self.germ.jacobian(x) * g + self.outer.eval_dn(x) * (1.0 - g);
        if gp != 0.0 {
            let gap = self.germ.eval(x) - self.outer.eval_n(x);
            d += gap * (x.transpose() / r) * gp;
        }
        d
    }

    fn exterior_reference(&self) -> (f64, &DMatrix<f64>) {
        let (outer, j) = self.outer.exterior_reference();
        (outer.max(self.rho()), j)
    }

    fn inner_radius(&self) -> f64 {
        self.rho() / 2.0
    }

    fn plane(&self) -> &OrientedTwoPlane {
        self.outer.plane()
    }
}

/// `{1, ½, ¼, …, 2⁻¹⁰}`.
pub fn default_schedule() -> Vec<f64> {
    (0..=10).map(|k| 0.5f64.powi(k)).collect()
}

#[derive(Debug, Clone, Copy)]
pub struct ExtendOptions {
    pub build: BuildOptions,
    pub verify: VerifyOptions,
    /// Profile of the outer fibration `F'`. Its inner plateau should
    /// contain every scheduled radius so that `F'` is linear where the germ
    /// is blended in.
    pub outer_bump: BumpProfile,
}

impl Default for ExtendOptions {
    fn default() -> Self {
        Self {
            build: BuildOptions::default(),
            verify: VerifyOptions::default(),
            outer_bump: BumpProfile {
                r0: 1.0,
                r1: 4.0,
                n_exp: 1,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Attempt {
    pub rho: f64,
    /// `"pass"`, `"fail"` or `"skipped"` (radius beyond the germ's validity).
    pub status: &'static str,
    pub failures: usize,
}

#[derive(Debug, Clone)]
pub struct Extension {
    pub composite: GermComposite,
    pub report: VerificationReport,
    pub attempts: Vec<Attempt>,
}

impl Extension {
    pub fn rho(&self) -> f64 {
        self.composite.rho()
    }
}

/// Extends a germ to a global base by blending it into the fibration built
/// from `dh₀`, shrinking the blending radius along `schedule` until the
/// verification report is clean.
pub fn extend_germ(
    germ: &GermSpec,
    p: &OrientedTwoPlane,
    schedule: &[f64],
    opts: &ExtendOptions,
) -> Result<Extension> {
    germ.validate(opts.verify.eigen_tol, opts.verify.seed)?;
    let outer = build_fibration_with(&germ.linear_part(), p, &opts.outer_bump, &opts.build)?;
    let mut attempts = Vec::new();
    let mut best: Option<VerificationReport> = None;
    for &rho in schedule {
        if !(rho > 0.0) || rho > germ.valid_radius() {
            attempts.push(Attempt {
                rho,
                status: "skipped",
                failures: 0,
            });
            continue;
        }
        let composite = GermComposite::new(germ.clone(), outer.clone(), rho)?;
        let report = verify_fibration(&composite, &opts.verify);
        let failures = report.total_failures();
        attempts.push(Attempt {
            rho,
            status: if failures == 0 { "pass" } else { "fail" },
            failures,
        });
        if failures == 0 {
            return Ok(Extension {
                composite,
                report,
                attempts,
            });
        }
        if best.as_ref().map_or(true, |b| failures < b.total_failures()) {
            best = Some(report);
        }
    }
    Err(ForgeError::ExtensionFailed {
        attempts: attempts.iter().filter(|a| a.status != "skipped").count(),
        best_report: Box::new(best.unwrap_or(VerificationReport {
            checks: Vec::new(),
            failures: Vec::new(),
        })),
    })
}
