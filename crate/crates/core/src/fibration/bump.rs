use serde::{Deserialize, Serialize};

use crate::error::{ForgeError, Result};

const SLOPE_GRID: usize = 4001;
const GOLDEN_ITERS: usize = 80;

/// `exp(−1/x)` for `x > 0`, zero otherwise.
fn psi(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

fn psi_slope(x: f64) -> f64 {
    if x > 0.0 {
        psi(x) / (x * x)
    } else {
        0.0
    }
}

/// Smooth nonincreasing cutoff `f` with `f ≡ 1` on `[0, r0]` and `f ≡ 0` on
/// `[r1, ∞)`, and its rescaled family `f_n(s) = f(s^{1/n})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpProfile {
    pub r0: f64,
    pub r1: f64,
    pub n_exp: u64,
}

impl Default for BumpProfile {
    fn default() -> Self {
        Self {
            r0: 0.25,
            r1: 1.0,
            n_exp: 1,
        }
    }
}

impl BumpProfile {
    pub fn new(r0: f64, r1: f64, n_exp: u64) -> Result<Self> {
        if !(r0 > 0.0 && r1 > r0 && r1.is_finite()) || n_exp == 0 {
            return Err(ForgeError::InvalidInput(format!(
                "bump needs 0 < r0 < r1 and n_exp >= 1, got r0={r0}, r1={r1}, n_exp={n_exp}"
            )));
        }
        Ok(Self { r0, r1, n_exp })
    }

    pub fn with_exponent(&self, n_exp: u64) -> Self {
        Self { n_exp, ..*self }
    }

    /// Radius below which `f_n ≡ 1`.
    pub fn inner_radius(&self) -> f64 {
        self.r0.powf(self.n_exp as f64)
    }

    /// Radius beyond which `f_n ≡ 0`.
    pub fn outer_radius(&self) -> f64 {
        self.r1.powf(self.n_exp as f64)
    }

    /// The base profile `f(u)`.
    pub fn base_value(&self, u: f64) -> f64 {
        if u <= self.r0 {
            return 1.0;
        }
        if u >= self.r1 {
            return 0.0;
        }
        let a = psi(self.r1 - u);
        let b = psi(u - self.r0);
        a / (a + b)
    }

    pub fn base_slope(&self, u: f64) -> f64 {
        if u <= self.r0 || u >= self.r1 {
            return 0.0;
        }
        let a = psi(self.r1 - u);
        let b = psi(u - self.r0);
        let da = -psi_slope(self.r1 - u);
        let db = psi_slope(u - self.r0);
        let sum = a + b;
        (da * b - a * db) / (sum * sum)
    }

    fn root(&self, s: f64) -> f64 {
        if self.n_exp == 1 {
            s
        } else {
            s.powf(1.0 / self.n_exp as f64)
        }
    }

    /// `f_n(s)`.
    pub fn value(&self, s: f64) -> f64 {
        if s <= self.inner_radius() {
            return 1.0;
        }
        if s >= self.outer_radius() {
            return 0.0;
        }
        self.base_value(self.root(s))
    }

    /// `f_n'(s) = f'(s^{1/n}) · s^{1/n − 1} / n`.
    pub fn slope(&self, s: f64) -> f64 {
        if s <= self.inner_radius() || s >= self.outer_radius() {
            return 0.0;
        }
        let n = self.n_exp as f64;
        let u = self.root(s);
        self.base_slope(u) * (u / s) / n
    }

    /// `s·|f_n'(s)|` at `s = exp(log_s)`.
    fn weighted_slope(&self, log_s: f64) -> f64 {
        let s = log_s.exp();
        if s > 1e-280 && s.is_finite() {
            s * self.slope(s).abs()
        } else {
            // s is not representable; s·s^{1/n−1} = s^{1/n}
            let u = (log_s / self.n_exp as f64).exp();
            u * self.base_slope(u).abs() / self.n_exp as f64
        }
    }

    /// `S(f_n) = sup_s s·|f_n'(s)|`, maximized on a grid uniform in `log s`
    /// over the transition interval and refined by golden-section search.
    pub fn slope_sup(&self) -> f64 {
        let n = self.n_exp as f64;
        let lo = n * self.r0.ln();
        let hi = n * self.r1.ln();
        let step = (hi - lo) / (SLOPE_GRID - 1) as f64;
        let mut best = (0usize, f64::NEG_INFINITY);
        for k in 0..SLOPE_GRID {
            let val = self.weighted_slope(lo + step * k as f64);
            if val > best.1 {
                best = (k, val);
            }
        }
        let a = lo + step * best.0.saturating_sub(1) as f64;
        let b = (lo + step * (best.0 + 1) as f64).min(hi);
        let (_, refined) = golden_max(|x| self.weighted_slope(x), a, b, GOLDEN_ITERS);
        refined.max(best.1)
    }
}

pub fn bump_eval(b: &BumpProfile, s: f64) -> f64 {
    b.value(s)
}

pub fn bump_slope(b: &BumpProfile, s: f64) -> f64 {
    b.slope(s)
}

pub fn slope_sup(b: &BumpProfile) -> f64 {
    b.slope_sup()
}

/// Golden-section search for a local maximum of `f` on `[a, b]`.
pub(crate) fn golden_max<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, iters: usize) -> (f64, f64) {
    let (x, v) = golden_min(|x| -f(x), a, b, iters);
    (x, -v)
}

/// Golden-section search for a local minimum of `f` on `[a, b]`.
pub(crate) fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
