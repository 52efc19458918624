//! Initial data `f: ℝᵈ → ℝ` with analytic iterated Laplacians.

use std::fmt::Debug;

use crate::error::{Result, SheetError};

/// Growth class of an initial function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Growth {
    Bounded,
    /// Admitted only when the caller opts into polynomial growth.
    Polynomial,
}

/// An initial function together with the data the solvers need.
pub trait InitialFunction: Debug + Send + Sync {
    fn name(&self) -> String;
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    /// `Δᵏ f(x)` for `k ≤ max_k()`; `k = 0` is the value.
    fn laplacian_k(&self, x: &[f64], k: u32) -> Result<f64>;
    fn max_k(&self) -> u32;
    fn holder_alpha(&self) -> f64;
    fn growth(&self) -> Growth;

    /// `E f(x + √v Z)` for a standard normal `Z ∈ ℝᵈ`, when known in closed form.
    fn heat_mean(&self, _x: &[f64], _v: f64) -> Option<f64> {
        None
    }

    /// `Some(R)` when `f(y)` depends only on `|y|` and vanishes for `|y| ≥ R`.
    fn radial_support(&self) -> Option<f64> {
        None
    }
}

/// The shipped catalog.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestFunction {
    /// `Σ yₖ²`
    Quadratic { d: usize },
    /// `Σ yₖ⁴`
    Quartic { d: usize },
    /// `exp(−|y|²/2)`
    Gaussian { d: usize },
    /// `C exp(1/(|y|^{2α} − 1))` on the unit ball, 0 outside.
    Bump { d: usize, c: f64, alpha: f64 },
    Constant { d: usize, c: f64 },
}

/// Every catalog entry in dimension `d` (bump with `C = 1`, `α = 1`).
pub fn catalog(d: usize) -> Vec<TestFunction> {
    vec![
        TestFunction::Quadratic { d },
        TestFunction::Quartic { d },
        TestFunction::Gaussian { d },
        TestFunction::Bump { d, c: 1.0, alpha: 1.0 },
        TestFunction::Constant { d, c: 1.0 },
    ]
}

impl TestFunction {
    /// Looks up a catalog entry by name. `c` and `alpha` apply to `bump`
    /// (and `c` to `constant`).
    pub fn from_name(name: &str, d: usize, c: f64, alpha: f64) -> Result<Self> {
        if d == 0 {
            return Err(SheetError::domain("TestFunction::from_name", "dimension must be at least 1"));
        }
        Ok(match name.to_ascii_lowercase().as_str() {
            "quadratic" => TestFunction::Quadratic { d },
            "quartic" => TestFunction::Quartic { d },
            "gaussian" => TestFunction::Gaussian { d },
            "bump" => {
                if !(alpha > 0.0 && alpha <= 1.0) {
                    return Err(SheetError::domain("TestFunction::from_name", format!("alpha = {alpha} must lie in (0, 1]")));
                }
                TestFunction::Bump { d, c, alpha }
            }
            "constant" => TestFunction::Constant { d, c },
            other => {
                return Err(SheetError::domain(
                    "TestFunction::from_name",
                    format!("unknown initial function {other:?}"),
                ))
            }
        })
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Probabilists' Hermite polynomial `He_n(y)`.
pub fn hermite_he(n: u32, y: f64) -> f64 {
    let (mut a, mut b) = (1.0, y);
    if n == 0 {
        return a;
    }
    for k in 1..n {
        let c = y * b - k as f64 * a;
        a = b;
        b = c;
    }
    b
}

/// `Δᵏ exp(−|y|²/2)` via `∂^{2m} e^{−y²/2} = He_{2m}(y) e^{−y²/2}` and the
/// multinomial expansion of `(Σ ∂ᵢ²)ᵏ`.
fn gaussian_laplacian(x: &[f64], k: u32) -> f64 {
    let k = k as usize;
    // dp[j] = Σ over the axes seen so far, orders summing to j, of ∏ He_{2m}/m!
    let mut dp = vec![0.0; k + 1];
    dp[0] = 1.0;
    for &y in x {
        let mut next = vec![0.0; k + 1];
        let mut fact = 1.0;
        let terms: Vec<f64> = (0..=k)
            .map(|m| {
                if m > 0 {
                    fact *= m as f64;
                }
                hermite_he(2 * m as u32, y) / fact
            })
            .collect();
        for j in 0..=k {
            for m in 0..=j {
                next[j] += dp[j - m] * terms[m];
            }
        }
        dp = next;
    }
    let kfact: f64 = (1..=k).map(|v| v as f64).product();
    kfact * dp[k] * (-0.5 * norm2(x)).exp()
}

/// `C exp(1/(|x|^{2α} − 1))` for `|x| < 1`, else 0.
pub fn bump_f0(c: f64, alpha: f64, x: &[f64]) -> f64 {
    let q = norm2(x).powf(alpha) - 1.0;
    if q >= 0.0 {
        0.0
    } else {
        c * (1.0 / q).exp()
    }
}

/// `Δ f₀` for `α = 1`, `d = 2`:
/// `4C(|x|⁴ + |x|² − 1) exp(1/(|x|² − 1)) / (|x|² − 1)⁴` inside the ball.
///
/// `|x| = 1` is rejected unless `limit` is set, in which case the limit 0 is returned.
pub fn bump_laplacian_d2(c: f64, x: &[f64; 2], limit: bool) -> Result<f64> {
    let rho = norm2(x);
    if rho == 1.0 {
        return if limit {
            Ok(0.0)
        } else {
            Err(SheetError::domain("bump_laplacian_d2", "formula is singular at |x| = 1"))
        };
    }
    if rho > 1.0 {
        return Ok(0.0);
    }
    let q = rho - 1.0;
    Ok(4.0 * c * (rho * rho + rho - 1.0) * (1.0 / q).exp() / q.powi(4))
}

/// Laplacian of the bump in dimension `d` for any `α ∈ (0, 1]`, via the
/// radial form `F'' + (d − 1) F'/r`.
fn bump_laplacian(c: f64, alpha: f64, x: &[f64]) -> Result<f64> {
    let d = x.len() as f64;
    let rho = norm2(x);
    let r = rho.sqrt();
    let q = rho.powf(alpha) - 1.0;
    if q >= 0.0 {
        return Ok(0.0);
    }
    if r == 0.0 {
        if alpha < 1.0 {
            return Err(SheetError::domain("bump laplacian", "singular at the origin for alpha < 1"));
        }
        // F = C e^{1/(r²−1)} ≈ C e^{-1}(1 − r²), so ΔF(0) = −2dC e^{-1}
        return Ok(-2.0 * d * c * (-1.0f64).exp());
    }
    let e = c * (1.0 / q).exp();
    if e == 0.0 {
        return Ok(0.0);
    }
    let a2 = 2.0 * alpha;
    let q1 = a2 * r.powf(a2 - 1.0);
    let q2 = a2 * (a2 - 1.0) * r.powf(a2 - 2.0);
    let f1 = -e * q1 / (q * q);
    let f2 = e * ((q1 / (q * q)).powi(2) - q2 / (q * q) + 2.0 * q1 * q1 / (q * q * q));
    Ok(f2 + (d - 1.0) * f1 / r)
}

impl InitialFunction for TestFunction {
    fn name(&self) -> String {
        match self {
            TestFunction::Quadratic { .. } => "quadratic".into(),
            TestFunction::Quartic { .. } => "quartic".into(),
            TestFunction::Gaussian { .. } => "gaussian".into(),
            TestFunction::Bump { c, alpha, .. } => format!("bump(c={c},alpha={alpha})"),
            TestFunction::Constant { c, .. } => format!("constant(c={c})"),
        }
    }

    fn dim(&self) -> usize {
        match *self {
            TestFunction::Quadratic { d }
            | TestFunction::Quartic { d }
            | TestFunction::Gaussian { d }
            | TestFunction::Bump { d, .. }
            | TestFunction::Constant { d, .. } => d,
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        match *self {
            TestFunction::Quadratic { .. } => norm2(x),
            TestFunction::Quartic { .. } => x.iter().map(|v| v.powi(4)).sum(),
            TestFunction::Gaussian { .. } => (-0.5 * norm2(x)).exp(),
            TestFunction::Bump { c, alpha, .. } => bump_f0(c, alpha, x),
            TestFunction::Constant { c, .. } => c,
        }
    }

    fn laplacian_k(&self, x: &[f64], k: u32) -> Result<f64> {
        if k == 0 {
            return Ok(self.value(x));
        }
        if k > self.max_k() {
            return Err(SheetError::domain(
                "laplacian_k",
                format!("{} supports Laplacian powers up to {}", self.name(), self.max_k()),
            ));
        }
        let d = x.len() as f64;
        Ok(match *self {
            TestFunction::Quadratic { .. } => {
                if k == 1 {
                    2.0 * d
                } else {
                    0.0
                }
            }
            TestFunction::Quartic { .. } => match k {
                1 => 12.0 * norm2(x),
                2 => 24.0 * d,
                _ => 0.0,
            },
            TestFunction::Gaussian { .. } => gaussian_laplacian(x, k),
            TestFunction::Bump { c, alpha, .. } => bump_laplacian(c, alpha, x)?,
            TestFunction::Constant { .. } => 0.0,
        })
    }

    fn max_k(&self) -> u32 {
        match self {
            TestFunction::Bump { .. } => 1,
            _ => u32::MAX,
        }
    }

    fn holder_alpha(&self) -> f64 {
        match *self {
            TestFunction::Bump { alpha, .. } => alpha,
            _ => 1.0,
        }
    }

    fn growth(&self) -> Growth {
        match self {
            TestFunction::Quadratic { .. } | TestFunction::Quartic { .. } => Growth::Polynomial,
            _ => Growth::Bounded,
        }
    }

    fn heat_mean(&self, x: &[f64], v: f64) -> Option<f64> {
        match *self {
            TestFunction::Quadratic { .. } => Some(x.iter().map(|y| y * y + v).sum()),
            TestFunction::Quartic { .. } => Some(x.iter().map(|y| y.powi(4) + 6.0 * y * y * v + 3.0 * v * v).sum()),
            TestFunction::Gaussian { .. } => {
                let s = 1.0 + v;
                Some(x.iter().map(|y| (-0.5 * y * y / s).exp() / s.sqrt()).product())
            }
            TestFunction::Constant { c, .. } => Some(c),
            TestFunction::Bump { .. } => None,
        }
    }

    fn radial_support(&self) -> Option<f64> {
        match self {
            TestFunction::Bump { .. } => Some(1.0),
            _ => None,
        }
    }
}
