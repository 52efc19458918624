//! Transition kernels: Brownian motion, Brownian sheet, the one-sided stable
//! density `g_β` and the density of the inverse stable subordinator.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Result, SheetError};
use crate::extrapolate::derivatives_at_zero;
use crate::fractional::{caputo_l1, FractionalOrder, TimeGrid};
use crate::grid::Axis;
use crate::quadrature::integrate;
use crate::report::{Check, ResidualPoint, ResidualReport, SystemKind};
use crate::scalar::Real;
use crate::special::{ln_factorial, ln_gamma, rgamma};
use crate::talbot::{self, TALBOT_NODES};

/// Default absolute tolerance for kernel evaluations.
pub const DEFAULT_TOL: f64 = 1e-8;

/// `(2πt)^{-1/2} exp(−s²/2t)`.
pub fn bm_density<T: Real>(t: T, s: T) -> Result<T> {
    if !(t > T::zero()) {
        return Err(SheetError::domain("bm_density", format!("t = {t} must be positive")));
    }
    let two = T::c(2.0);
    Ok((-(s * s) / (two * t)).exp() / (two * T::PI() * t).sqrt())
}

/// Brownian-sheet transition density: Gaussian in `y` with mean `x` and
/// covariance `(∏ sᵢ)·I_d`.
pub fn bs_density<T: Real>(s: &[T], x: &[T], y: &[T]) -> Result<T> {
    if s.is_empty() || s.iter().any(|&v| !(v > T::zero())) {
        return Err(SheetError::domain("bs_density", "every s_i must be positive"));
    }
    if x.len() != y.len() || x.is_empty() {
        return Err(SheetError::domain("bs_density", "x and y must share a positive dimension"));
    }
    let var = s.iter().fold(T::one(), |acc, &v| acc * v);
    let r2 = x.iter().zip(y).fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b));
    let two = T::c(2.0);
    let d = T::from_usize_lossy(x.len());
    Ok((-r2 / (two * var)).exp() / (two * T::PI() * var).powf(d / two))
}

/// Evaluation route for `g_β`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StableMethod {
    /// Closed form for `β = 1/2` when available, otherwise the series with a
    /// Talbot fallback.
    #[default]
    Auto,
    /// Alternating power series in `x^{-β}`.
    Series,
    /// `x^{-3/2} e^{-1/(4x)} / (2√π)`; only for `β = 1/2`.
    ClosedFormHalf,
    /// Talbot inversion of `s^{β-1} e^{-x s^β}`.
    Talbot,
}

const SERIES_TERMS: usize = 2048;

fn is_half(beta: f64) -> bool {
    (beta - 0.5).abs() < 1e-15
}

/// Density of `Λ(t)` for one order `β`, with the series coefficients cached.
///
/// Internally everything goes through the Wright function
/// `M_β(z) = Σ (−z)^m / (m! Γ(1 − β − mβ))`, for which
/// `K(t, x) = t^{-β} M_β(x t^{-β})` and `g_β(y) = β y^{-β-1} M_β(y^{-β})`.
#[derive(Debug, Clone)]
pub struct InverseStableKernel {
    order: FractionalOrder,
    tol: f64,
    /// `ln |c_m|` with `c_m = 1/(m! Γ(1−β−mβ))`; `-inf` at the poles.
    ln_coef: Vec<f64>,
    sign: Vec<f64>,
    /// `ln(Γ((m+1)β)/(π m!))`, an upper envelope for `|c_m|`.
    ln_env: Vec<f64>,
}

impl InverseStableKernel {
    pub fn new(order: FractionalOrder) -> Self {
        Self::with_tolerance(order, DEFAULT_TOL)
    }

    pub fn with_tolerance(order: FractionalOrder, tol: f64) -> Self {
        let beta = order.beta();
        let pi = std::f64::consts::PI;
        let mut ln_coef = Vec::with_capacity(SERIES_TERMS);
        let mut sign = Vec::with_capacity(SERIES_TERMS);
        let mut ln_env = Vec::with_capacity(SERIES_TERMS);
        for m in 0..SERIES_TERMS {
            let a = (m + 1) as f64 * beta;
            let env = ln_gamma(a) - ln_factorial(m) - pi.ln();
            ln_env.push(env);
            // 1/Γ(1−a) = Γ(a) sin(πa)/π
            if (a - a.round()).abs() < 1e-12 {
                ln_coef.push(f64::NEG_INFINITY);
                sign.push(0.0);
            } else {
                let s = (pi * a).sin();
                ln_coef.push(env + s.abs().ln());
                sign.push(s.signum());
            }
        }
        Self {
            order,
            tol,
            ln_coef,
            sign,
            ln_env,
        }
    }

    pub fn order(&self) -> FractionalOrder {
        self.order
    }

    pub fn beta(&self) -> f64 {
        self.order.beta()
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    /// Series coefficient `1/(m! Γ(1 − β − mβ))`.
    pub fn coefficient(&self, m: usize) -> f64 {
        if m < SERIES_TERMS {
            self.sign[m] * self.ln_coef[m].exp()
        } else {
            rgamma(1.0 - (m + 1) as f64 * self.beta()) / crate::special::factorial(m)
        }
    }

    /// Wright function by its power series. Fails with a range error when
    /// cancellation makes the attained bound exceed the tolerance.
    pub fn wright_series(&self, z: f64) -> Result<f64> {
        const OP: &str = "stable_g";
        if z == 0.0 {
            return Ok(self.sign[0] * self.ln_coef[0].exp());
        }
        let lz = z.abs().ln();
        let alt = if z > 0.0 { -1.0 } else { 1.0 };
        let mut sum = 0.0;
        let mut abs_sum = 0.0;
        let mut prev_env = f64::NEG_INFINITY;
        let mut parity = 1.0;
        for m in 0..SERIES_TERMS {
            if self.sign[m] != 0.0 {
                let mag = (self.ln_coef[m] + m as f64 * lz).exp();
                sum += parity * self.sign[m] * mag;
                abs_sum += mag;
            }
            parity *= alt;
            let env = self.ln_env[m] + m as f64 * lz;
            let env_v = env.exp();
            if env < prev_env && m > 2 && env_v <= f64::EPSILON * abs_sum * 0.1 && env_v < self.tol * 1e-3 {
                let bound = 4.0 * f64::EPSILON * abs_sum + env_v;
                if bound > self.tol {
                    return Err(SheetError::Range {
                        op: OP,
                        attained: bound,
                        requested: self.tol,
                    });
                }
                return Ok(sum);
            }
            prev_env = env;
        }
        Err(SheetError::Range {
            op: OP,
            attained: (4.0 * f64::EPSILON * abs_sum).max((prev_env).exp()),
            requested: self.tol,
        })
    }

    /// Wright function by Talbot inversion of its Laplace transform.
    pub fn wright_talbot(&self, z: f64) -> f64 {
        let beta = self.beta();
        talbot::invert(
            |s: Complex64| s.powf(beta - 1.0) * (-z * s.powf(beta)).exp(),
            1.0,
            TALBOT_NODES,
        )
    }

    /// `M_β(z)`, `z ≥ 0`.
    pub fn wright(&self, z: f64, method: StableMethod) -> Result<f64> {
        let beta = self.beta();
        match method {
            StableMethod::ClosedFormHalf => {
                self.require_half()?;
                Ok((-z * z / 4.0).exp() / std::f64::consts::PI.sqrt())
            }
            StableMethod::Series => self.wright_series(z),
            StableMethod::Talbot => Ok(self.wright_talbot(z)),
            StableMethod::Auto => {
                if is_half(beta) {
                    return self.wright(z, StableMethod::ClosedFormHalf);
                }
                match self.wright_series(z) {
                    Ok(v) => Ok(v),
                    Err(SheetError::Range { .. }) => Ok(self.wright_talbot(z).max(0.0)),
                    Err(e) => Err(e),
                }
            }
        }
    }

    fn require_half(&self) -> Result<()> {
        if is_half(self.beta()) {
            Ok(())
        } else {
            Err(SheetError::domain(
                "stable_g",
                format!("closed form needs beta = 1/2, got {}", self.beta()),
            ))
        }
    }

    /// Density `g_β(y)` of `L(1)`.
    pub fn stable_g(&self, y: f64, method: StableMethod) -> Result<f64> {
        if !(y > 0.0) {
            return Err(SheetError::domain("stable_g", format!("x = {y} must be positive")));
        }
        let beta = self.beta();
        if method == StableMethod::ClosedFormHalf {
            self.require_half()?;
            return Ok(y.powf(-1.5) * (-0.25 / y).exp() / (2.0 * std::f64::consts::PI.sqrt()));
        }
        let z = y.powf(-beta);
        Ok(beta * y.powf(-beta - 1.0) * self.wright(z, method)?)
    }

    /// `K^{Λ,β}(t, x) = t β^{-1} x^{-1-1/β} g_β(t x^{-1/β})`.
    pub fn density(&self, t: f64, x: f64) -> Result<f64> {
        self.density_with(t, x, StableMethod::Auto)
    }

    pub fn density_with(&self, t: f64, x: f64, method: StableMethod) -> Result<f64> {
        if !(t > 0.0) || !(x > 0.0) {
            return Err(SheetError::domain(
                "inv_subordinator_density",
                format!("need t > 0 and x > 0, got t = {t}, x = {x}"),
            ));
        }
        let beta = self.beta();
        let y = t * x.powf(-1.0 / beta);
        let g = self.stable_g(y, method)?;
        Ok((t / beta * x.powf(-1.0 - 1.0 / beta) * g).max(0.0))
    }

    /// Same value through `t^{-β} M_β(x t^{-β})`. Also valid at `x = 0`.
    pub fn density_scaled(&self, t: f64, x: f64) -> Result<f64> {
        if !(t > 0.0) || x < 0.0 {
            return Err(SheetError::domain(
                "inv_subordinator_density",
                format!("need t > 0 and x ≥ 0, got t = {t}, x = {x}"),
            ));
        }
        let tb = t.powf(-self.beta());
        Ok((tb * self.wright(x * tb, StableMethod::Auto)?).max(0.0))
    }

    /// `∂_x^k K(t, 0⁺)` by one-sided polynomial extrapolation, `k < 7`.
    pub fn boundary_derivatives(&self, t: f64, h: f64) -> Result<Vec<f64>> {
        let xs: Vec<f64> = (1..=7).map(|i| i as f64 * h).collect();
        let ys = xs.iter().map(|&x| self.density(t, x)).collect::<Result<Vec<_>>>()?;
        Ok(derivatives_at_zero(&xs, &ys))
    }

    /// `x` beyond which `K(1, ·)` carries less than `mass` of probability.
    pub fn unit_tail_radius(&self, mass: f64) -> f64 {
        let tail = |r: f64| {
            integrate("unit_tail_radius", |x| self.density_scaled(1.0, x).unwrap_or(0.0), r, r + 64.0, mass * 1e-3)
                .map(|v| v.0)
                .unwrap_or(f64::INFINITY)
        };
        let mut r = 1.0;
        while tail(r) > mass && r < 1e3 {
            r *= 1.25;
        }
        r
    }
}

/// `g_β(x)` through a one-off kernel.
pub fn stable_g(order: FractionalOrder, x: f64, method: StableMethod) -> Result<f64> {
    InverseStableKernel::new(order).stable_g(x, method)
}

/// `K^{Λ,β}(t, x)` through a one-off kernel.
pub fn inv_subordinator_density(order: FractionalOrder, t: f64, x: f64) -> Result<f64> {
    InverseStableKernel::new(order).density(t, x)
}

/// Numerical Laplace transform in `t` of `K^{Λ,β}(·, x)` compared with
/// `s^{β-1} e^{-x s^β}`; returns the largest absolute deviation.
pub fn laplace_check(order: FractionalOrder, x: f64, s_points: &[f64]) -> Result<f64> {
    const OP: &str = "laplace_check";
    if !(x > 0.0) || s_points.iter().any(|&s| !(s > 0.0)) {
        return Err(SheetError::domain(OP, "need x > 0 and s > 0"));
    }
    let kernel = InverseStableKernel::with_tolerance(order, 1e-12);
    let beta = order.beta();
    let mut worst: f64 = 0.0;
    for &s in s_points {
        let f = |t: f64| {
            if t <= 0.0 {
                0.0
            } else {
                (-s * t).exp() * kernel.density_scaled(t, x).unwrap_or(f64::NAN)
            }
        };
        // Panels of doubling length until the remaining mass is negligible.
        let mut lo = 0.0;
        let mut width = 1.0 / s;
        let mut total = 0.0;
        loop {
            let (v, _) = integrate(OP, f, lo, lo + width, 1e-14)?;
            total += v;
            lo += width;
            width *= 2.0;
            if s * lo > 40.0 && v.abs() < 1e-16 * total.abs().max(1e-300) + 1e-18 {
                break;
            }
            if lo > 1e8 / s {
                return Err(SheetError::Quadrature { op: OP, estimate: v.abs() });
            }
        }
        let target = s.powf(beta - 1.0) * (-x * s.powf(beta)).exp();
        worst = worst.max((total - target).abs());
    }
    Ok(worst)
}

/// Options for [`density_pde_residual`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityPdeOptions {
    /// Excluded band `x < epsilon` around the delta term.
    pub epsilon: f64,
    /// Spacing used for the `x → 0⁺` extrapolation.
    pub boundary_step: f64,
    pub keep_points: bool,
}

impl Default for DensityPdeOptions {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            boundary_step: 0.02,
            keep_points: false,
        }
    }
}

// Central stencils for d^ν/dx^ν, offsets -r..=r.
fn x_stencil(nu: u32) -> (&'static [f64], usize) {
    match nu {
        2 => (&[1.0, -2.0, 1.0], 1),
        3 => (&[-0.5, 1.0, 0.0, -1.0, 0.5], 2),
        _ => unreachable!(),
    }
}

/// Finite-difference residual of `∂_t K − (−1)^ν ∂_x^ν K` over `t × x`,
/// with the `x → 0⁺` boundary rows attached as checks.
pub fn density_pde_residual(
    order: FractionalOrder,
    t_axis: Axis,
    x_axis: Axis,
    opts: DensityPdeOptions,
) -> Result<ResidualReport> {
    const OP: &str = "density_pde_residual";
    let nu = order.require_nu(OP)?;
    if !(nu == 2 || nu == 3) {
        return Err(SheetError::domain(OP, format!("nu = {nu} must be 2 or 3")));
    }
    if !(opts.epsilon > 0.0) || x_axis.start < opts.epsilon {
        return Err(SheetError::grid(OP, format!("x-grid must start at or beyond epsilon = {}", opts.epsilon)));
    }
    if t_axis.start <= 0.0 || t_axis.points < 2 || x_axis.points < 2 {
        return Err(SheetError::grid(OP, "need t > 0 and at least two points per axis"));
    }
    let (stencil, r) = x_stencil(nu);
    let h = x_axis.step();
    let tau = t_axis.step();
    if x_axis.points < stencil.len() || h > 0.05 || tau > 0.05 || x_axis.start - r as f64 * h <= 0.0 {
        return Err(SheetError::grid(
            OP,
            format!("grid too coarse for the order-{nu} stencil (h = {h}, tau = {tau})"),
        ));
    }
    let kernel = InverseStableKernel::with_tolerance(order, 1e-12);
    let sign = if nu % 2 == 0 { 1.0 } else { -1.0 };
    let hnu = h.powi(nu as i32);
    let ts = t_axis.values();
    let xs = x_axis.values();
    let rows: Result<Vec<Vec<ResidualPoint>>> = ts
        .par_iter()
        .map(|&t| {
            let mut row = Vec::with_capacity(xs.len());
            for &x in &xs {
                let dt = (kernel.density(t + tau, x)? - kernel.density(t - tau, x)?) / (2.0 * tau);
                let mut dx = 0.0;
                for (i, &w) in stencil.iter().enumerate() {
                    if w != 0.0 {
                        dx += w * kernel.density(t, x + (i as f64 - r as f64) * h)?;
                    }
                }
                row.push(ResidualPoint {
                    t: vec![t],
                    x: vec![x],
                    residual: dt - sign * dx / hnu,
                });
            }
            Ok(row)
        })
        .collect();
    let points: Vec<ResidualPoint> = rows?.into_iter().flatten().collect();

    let mut checks = Vec::new();
    let mut sample_t = vec![t_axis.start, 0.5 * (t_axis.start + t_axis.end), t_axis.end];
    sample_t.dedup();
    for &t in &sample_t {
        let d = kernel.boundary_derivatives(t, opts.boundary_step)?;
        for (k, &dk) in d.iter().enumerate().take(nu as usize) {
            checks.push(Check::new(format!("dx^{k} K(t={t}, 0+)"), dk, boundary_value(order, k as u32, t)));
        }
    }
    let desc = format!("nu={nu};t={};x={}", t_axis.describe(), x_axis.describe());
    Ok(ResidualReport::from_points(SystemKind::DensityPde, 1, desc, points, opts.keep_points).with_checks(checks))
}

/// `∂_x^k K(t, 0⁺) = (−1)^k t^{−(k+1)β} / Γ(1 − (k+1)β)`.
pub fn boundary_value(order: FractionalOrder, k: u32, t: f64) -> f64 {
    let beta = order.beta();
    let a = (k + 1) as f64 * beta;
    let s = if k % 2 == 0 { 1.0 } else { -1.0 };
    s * t.powf(-a) * rgamma(1.0 - a)
}

/// Residual of the fractional form `∂_t^β K + ∂_x K = 0` for `x ≥ ε`, with
/// the Caputo derivative taken by the L1 scheme from `t = 0` (where `K`
/// vanishes for `x > 0`). Points with `t < t_min` are skipped.
pub fn density_fractional_residual(
    order: FractionalOrder,
    t_end: f64,
    steps: usize,
    t_min: f64,
    x_axis: Axis,
    epsilon: f64,
) -> Result<ResidualReport> {
    const OP: &str = "density_fractional_residual";
    if x_axis.start < epsilon || !(epsilon > 0.0) {
        return Err(SheetError::grid(OP, format!("x-grid must start at or beyond epsilon = {epsilon}")));
    }
    let grid = TimeGrid::uniform(t_end, steps)?;
    let kernel = InverseStableKernel::with_tolerance(order, 1e-12);
    let h = 1e-4;
    let xs = x_axis.values();
    let rows: Result<Vec<Vec<ResidualPoint>>> = xs
        .par_iter()
        .map(|&x| {
            let mut vals = Vec::with_capacity(grid.len());
            for &t in grid.points() {
                vals.push(if t == 0.0 { 0.0 } else { kernel.density(t, x)? });
            }
            let cap = caputo_l1(&vals, &grid, order.beta())?;
            let mut row = Vec::new();
            for (m, &t) in grid.points().iter().enumerate().skip(1) {
                if t < t_min {
                    continue;
                }
                let dx = (kernel.density(t, x + h)? - kernel.density(t, x - h)?) / (2.0 * h);
                row.push(ResidualPoint {
                    t: vec![t],
                    x: vec![x],
                    residual: cap.values[m] + dx,
                });
            }
            Ok(row)
        })
        .collect();
    let points = rows?.into_iter().flatten().collect();
    let desc = format!("fractional;t=[{t_min},{t_end}]/{steps};x={}", x_axis.describe());
    Ok(ResidualReport::from_points(SystemKind::DensityPde, 1, desc, points, false))
}

/// Which kernel a [`KernelEval`] refers to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelId {
    Bm,
    Bs { n: usize, d: usize },
    StableG { order: FractionalOrder },
    InvSubordinator { order: FractionalOrder },
}

/// A kernel evaluated at `(t, source, target)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelEval {
    pub kernel: KernelId,
    pub t: Vec<f64>,
    pub source: Vec<f64>,
    pub target: Vec<f64>,
    pub value: f64,
}

impl KernelId {
    /// Evaluates the kernel. `t` has one entry except for the sheet
    /// (`n` entries); the stable density ignores `t` and uses `target − source`.
    pub fn evaluate(&self, t: &[f64], source: &[f64], target: &[f64]) -> Result<KernelEval> {
        const OP: &str = "KernelId::evaluate";
        let scalar_arg = |v: &[f64]| -> Result<f64> {
            match v {
                [a] => Ok(*a),
                _ => Err(SheetError::domain(OP, "expected a scalar argument")),
            }
        };
        let value = match *self {
            KernelId::Bm => bm_density(scalar_arg(t)?, scalar_arg(target)? - scalar_arg(source)?)?,
            KernelId::Bs { n, d } => {
                if n == 0 || d == 0 || t.len() != n || source.len() != d {
                    return Err(SheetError::domain(OP, "sheet kernel needs n times and d coordinates"));
                }
                bs_density(t, source, target)?
            }
            KernelId::StableG { order } => stable_g(order, scalar_arg(target)? - scalar_arg(source)?, StableMethod::Auto)?,
            KernelId::InvSubordinator { order } => {
                inv_subordinator_density(order, scalar_arg(t)?, scalar_arg(target)? - scalar_arg(source)?)?
            }
        };
        Ok(KernelEval {
            kernel: *self,
            t: t.to_vec(),
            source: source.to_vec(),
            target: target.to_vec(),
            value,
        })
    }
}
