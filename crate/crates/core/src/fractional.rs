//! Caputo fractional derivatives: analytic power rule, L1 and
//! Grünwald–Letnikov schemes on uniform grids, iterated derivatives and the
//! composition identity for consecutive Caputo derivatives.

use std::str::FromStr;

use crate::error::{Result, SheetError};
use crate::scalar::Real;
use crate::special::{gamma, rgamma};

/// Fractional order `0 < β < 1`, optionally tagged with `ν` when `β = 1/ν`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalOrder<T: Real = f64> {
    beta: T,
    nu: Option<u32>,
}

impl<T: Real> FractionalOrder<T> {
    pub fn from_beta(beta: T) -> Result<Self> {
        if !(beta > T::zero() && beta < T::one()) {
            return Err(SheetError::domain(
                "FractionalOrder",
                format!("beta = {beta} must lie in (0, 1)"),
            ));
        }
        Ok(Self { beta, nu: None })
    }

    /// `β = 1/ν` for an integer `ν ≥ 2`; `ν` is stored and `β` derived.
    pub fn from_nu(nu: u32) -> Result<Self> {
        if nu < 2 {
            return Err(SheetError::domain(
                "FractionalOrder",
                format!("nu = {nu} must be at least 2"),
            ));
        }
        Ok(Self {
            beta: T::one() / T::c(nu as f64),
            nu: Some(nu),
        })
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn nu(&self) -> Option<u32> {
        self.nu
    }

    /// `ν`, or a domain error naming `op` when the order is not a reciprocal integer.
    pub fn require_nu(&self, op: &'static str) -> Result<u32> {
        self.nu
            .ok_or_else(|| SheetError::domain(op, format!("beta = {} is not of the form 1/nu", self.beta)))
    }
}

impl FromStr for FractionalOrder<f64> {
    type Err = SheetError;

    /// Accepts `"1/3"` (kept exact as `ν = 3`), `"p/q"` or a decimal.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || SheetError::domain("FractionalOrder::from_str", format!("cannot parse order {s:?}"));
        if let Some((num, den)) = s.split_once('/') {
            let num: u32 = num.trim().parse().map_err(|_| bad())?;
            let den: u32 = den.trim().parse().map_err(|_| bad())?;
            if num == 1 {
                return Self::from_nu(den);
            }
            if den == 0 {
                return Err(bad());
            }
            return Self::from_beta(num as f64 / den as f64);
        }
        let beta: f64 = s.parse().map_err(|_| bad())?;
        let recip = 1.0 / beta;
        if (recip - recip.round()).abs() < 1e-12 && recip.round() >= 2.0 {
            return Self::from_nu(recip.round() as u32);
        }
        Self::from_beta(beta)
    }
}

/// Strictly increasing time points starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid<T: Real = f64> {
    points: Vec<T>,
    uniform_step: Option<T>,
}

impl<T: Real> TimeGrid<T> {
    /// `steps + 1` equally spaced points on `[0, t_end]`.
    pub fn uniform(t_end: T, steps: usize) -> Result<Self> {
        if !(t_end > T::zero()) || steps == 0 {
            return Err(SheetError::grid(
                "TimeGrid::uniform",
                "need t_end > 0 and at least one step",
            ));
        }
        let tau = t_end / T::from_usize_lossy(steps);
        let points = (0..=steps).map(|k| tau * T::from_usize_lossy(k)).collect();
        Ok(Self {
            points,
            uniform_step: Some(tau),
        })
    }

    /// Arbitrary grid; uniformity is detected (gaps equal within 1e-12 relative).
    pub fn from_points(points: Vec<T>) -> Result<Self> {
        if points.is_empty() || points[0] != T::zero() {
            return Err(SheetError::grid("TimeGrid::from_points", "grid must start at 0"));
        }
        if points.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SheetError::grid(
                "TimeGrid::from_points",
                "grid must be strictly increasing",
            ));
        }
        let uniform_step = if points.len() >= 2 {
            let h = points[1] - points[0];
            let tol = T::c(1e-12) * h;
            points
                .windows(2)
                .all(|w| ((w[1] - w[0]) - h).abs() <= tol)
                .then_some(h)
        } else {
            None
        };
        Ok(Self {
            points,
            uniform_step,
        })
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn uniform_step(&self) -> Option<T> {
        self.uniform_step
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Numerical scheme for the Caputo derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CaputoScheme {
    /// Piecewise-linear interpolation of `u`; order `2 − β`.
    #[default]
    L1,
    /// Grünwald–Letnikov applied to `u − u(0)`; first order. Cross-checks only.
    GrunwaldLetnikov,
}

/// Caputo derivative sampled on a grid. `values[0]` is undefined (NaN);
/// the `t → 0⁺` limit is carried separately in `origin_limit`.
#[derive(Debug, Clone)]
pub struct CaputoResult<T: Real = f64> {
    pub grid: TimeGrid<T>,
    pub values: Vec<T>,
    pub beta: T,
    pub iterations: usize,
    pub origin_limit: T,
}

impl<T: Real> CaputoResult<T> {
    /// Values with the origin slot replaced by the extrapolated limit.
    pub fn filled(&self) -> Vec<T> {
        let mut v = self.values.clone();
        v[0] = self.origin_limit;
        v
    }
}

/// `∂^β t^p = Γ(p+1)/Γ(p+1−β) · t^{p−β}`.
pub fn caputo_power<T: Real>(p: T, beta: T, t: T) -> Result<T> {
    if !(p > T::zero()) || !(t > T::zero()) || !(beta > T::zero() && beta < T::one()) {
        return Err(SheetError::domain(
            "caputo_power",
            format!("need p > 0, t > 0, beta in (0,1); got p={p}, t={t}, beta={beta}"),
        ));
    }
    let one = T::one();
    Ok(gamma(p + one) * rgamma(p + one - beta) * t.powf(p - beta))
}

fn check_uniform<T: Real>(op: &'static str, values: &[T], grid: &TimeGrid<T>) -> Result<T> {
    let tau = grid
        .uniform_step()
        .ok_or_else(|| SheetError::grid(op, "non-uniform grids are not supported"))?;
    if grid.len() < 3 {
        return Err(SheetError::grid(op, "need at least 3 grid points"));
    }
    if values.len() != grid.len() {
        return Err(SheetError::grid(
            op,
            format!("{} values for {} grid points", values.len(), grid.len()),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(SheetError::domain(op, "values must be finite"));
    }
    Ok(tau)
}

fn check_beta<T: Real>(op: &'static str, beta: T) -> Result<()> {
    if beta > T::zero() && beta < T::one() {
        Ok(())
    } else {
        Err(SheetError::domain(op, format!("beta = {beta} must lie in (0, 1)")))
    }
}

/// L1 coefficients `b_k = (k+1)^{1−β} − k^{1−β}`.
fn l1_weights<T: Real>(n: usize, beta: T) -> Vec<T> {
    let e = T::one() - beta;
    (0..n)
        .map(|k| T::from_usize_lossy(k + 1).powf(e) - T::from_usize_lossy(k).powf(e))
        .collect()
}

fn gl_weights<T: Real>(n: usize, beta: T) -> Vec<T> {
    let mut g = Vec::with_capacity(n + 1);
    g.push(T::one());
    for k in 1..=n {
        let prev = g[k - 1];
        g.push(prev * (T::one() - (beta + T::one()) / T::from_usize_lossy(k)));
    }
    g
}

/// Extrapolates `t → 0⁺` from the first three interior values assuming
/// `v(t) ≈ a + b t^β + c t^{2β}`.
pub fn origin_limit<T: Real>(v1: T, v2: T, v3: T, beta: T) -> T {
    let p: [T; 3] = [T::one(), T::c(2.0).powf(beta), T::c(3.0).powf(beta)];
    let q: [T; 3] = [p[0] * p[0], p[1] * p[1], p[2] * p[2]];
    let det = |c0: [T; 3], c1: [T; 3], c2: [T; 3]| {
        c0[0] * (c1[1] * c2[2] - c1[2] * c2[1]) - c1[0] * (c0[1] * c2[2] - c0[2] * c2[1])
            + c2[0] * (c0[1] * c1[2] - c0[2] * c1[1])
    };
    let ones = [T::one(); 3];
    let rhs = [v1, v2, v3];
    det(rhs, p, q) / det(ones, p, q)
}

/// Caputo derivative of order `beta` on a uniform grid with the chosen scheme.
pub fn caputo<T: Real>(
    values: &[T],
    grid: &TimeGrid<T>,
    beta: T,
    scheme: CaputoScheme,
) -> Result<CaputoResult<T>> {
    let tau = check_uniform("caputo", values, grid)?;
    check_beta("caputo", beta)?;
    let n = values.len();
    let mut out = vec![T::nan(); n];
    match scheme {
        CaputoScheme::L1 => {
            let b = l1_weights(n, beta);
            let scale = tau.powf(-beta) * rgamma(T::c(2.0) - beta);
            let diffs: Vec<T> = values.windows(2).map(|w| w[1] - w[0]).collect();
            for (m, slot) in out.iter_mut().enumerate().skip(1) {
                // sum_{k=0}^{m-1} b_k (u_{m-k} - u_{m-k-1})
                let mut acc = T::zero();
                for k in 0..m {
                    acc = acc + b[k] * diffs[m - k - 1];
                }
                *slot = scale * acc;
            }
        }
        CaputoScheme::GrunwaldLetnikov => {
            let g = gl_weights(n, beta);
            let scale = tau.powf(-beta);
            for (m, slot) in out.iter_mut().enumerate().skip(1) {
                let mut acc = T::zero();
                for k in 0..=m {
                    acc = acc + g[k] * (values[m - k] - values[0]);
                }
                *slot = scale * acc;
            }
        }
    }
    let origin = origin_limit(out[1], out[2], out[3.min(n - 1)], beta);
    Ok(CaputoResult {
        grid: grid.clone(),
        values: out,
        beta,
        iterations: 1,
        origin_limit: origin,
    })
}

/// L1 Caputo derivative.
pub fn caputo_l1<T: Real>(values: &[T], grid: &TimeGrid<T>, beta: T) -> Result<CaputoResult<T>> {
    caputo(values, grid, beta, CaputoScheme::L1)
}

/// Non-integer exponents `mβ < 2`, `m ≥ 1`, at most `max` of them.
pub fn power_exponents<T: Real>(beta: T, max: usize) -> Vec<T> {
    let two = T::c(2.0);
    (1..)
        .map(|m| T::from_usize_lossy(m) * beta)
        .take_while(|&s| s < two)
        .filter(|s| (*s - s.round()).abs() > T::c(1e-9))
        .take(max)
        .collect()
}

/// Solves `a x = b` in place by Gaussian elimination with partial pivoting.
fn solve_dense<T: Real>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Vec<T> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap_or(col);
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                let v = a[col][c];
                a[r][c] = a[r][c] - f * v;
            }
            let v = b[col];
            b[r] = b[r] - f * v;
        }
    }
    let mut x = vec![T::zero(); n];
    for r in (0..n).rev() {
        let mut acc = b[r];
        for c in r + 1..n {
            acc = acc - a[r][c] * x[c];
        }
        x[r] = acc / a[r][r];
    }
    x
}

/// L1 with starting weights: exact on `u(0) + c t + Σ c_σ t^σ` for every
/// `σ` in `exponents`. Plain L1 has an `O(1)` error at the
/// first few points for such data, whatever the step.
pub fn caputo_l1_corrected<T: Real>(
    values: &[T],
    grid: &TimeGrid<T>,
    beta: T,
    exponents: &[T],
) -> Result<CaputoResult<T>> {
    let mut base = caputo_l1(values, grid, beta)?;
    let n = values.len();
    // σ = 1 has no L1 defect; keeping it in the system stops the weights
    // from disturbing linear data.
    let mut exps: Vec<T> = exponents.iter().copied().filter(|s| (*s - T::one()).abs() > T::c(1e-9)).collect();
    if !exps.is_empty() {
        exps.push(T::one());
    }
    exps.truncate(n - 1);
    let m = exps.len();
    if m == 0 {
        return Ok(base);
    }
    let tau = grid.uniform_step().unwrap_or(T::one());
    let unit = TimeGrid::uniform(T::from_usize_lossy(n - 1), n - 1)?;
    // defect[s][i]: exact minus L1 for k^σ on the unit-step grid
    let mut defect = Vec::with_capacity(m);
    for &s in &exps {
        let pw: Vec<T> = (0..n).map(|k| T::from_usize_lossy(k).powf(s)).collect();
        let l1 = caputo_l1(&pw, &unit, beta)?;
        let c = gamma(T::one() + s) * rgamma(T::one() + s - beta);
        let d: Vec<T> = (0..n)
            .map(|i| if i == 0 { T::zero() } else { c * T::from_usize_lossy(i).powf(s - beta) - l1.values[i] })
            .collect();
        defect.push(d);
    }
    let a: Vec<Vec<T>> = exps
        .iter()
        .map(|&s| (1..=m).map(|j| T::from_usize_lossy(j).powf(s)).collect())
        .collect();
    let scale = tau.powf(-beta);
    for i in 1..n {
        let rhs: Vec<T> = defect.iter().map(|d| d[i]).collect();
        let w = solve_dense(a.clone(), rhs);
        let mut acc = T::zero();
        for (j, wj) in w.iter().enumerate() {
            acc = acc + *wj * (values[j + 1] - values[0]);
        }
        base.values[i] = base.values[i] + scale * acc;
    }
    // output is a + Σ b_σ t^{σ−β}; fit it through the first points
    let out_exps: Vec<T> = exps.iter().map(|&s| s - beta).filter(|&e| e > T::zero()).collect();
    let k = (out_exps.len() + 1).min(n - 1);
    let a: Vec<Vec<T>> = (1..=k)
        .map(|i| {
            let t = T::from_usize_lossy(i);
            std::iter::once(T::one()).chain(out_exps.iter().take(k - 1).map(|&e| t.powf(e))).collect()
        })
        .collect();
    base.origin_limit = solve_dense(a, base.values[1..=k].to_vec())[0];
    Ok(base)
}

/// `k`-fold Caputo derivative `∂^{k⊗β}`; each pass is re-seeded at `t = 0`
/// with the extrapolated `t → 0⁺` limit of the previous pass. Passes use
/// starting weights for the powers `t^{mβ}`.
pub fn iterated_caputo<T: Real>(
    values: &[T],
    grid: &TimeGrid<T>,
    beta: T,
    k: usize,
) -> Result<CaputoResult<T>> {
    if k == 0 {
        return Err(SheetError::domain("iterated_caputo", "k must be at least 1"));
    }
    if T::from_usize_lossy(k) * beta > T::one() + T::c(1e-12) {
        return Err(SheetError::domain(
            "iterated_caputo",
            format!("k * beta = {} exceeds 1", T::from_usize_lossy(k) * beta),
        ));
    }
    let exps = power_exponents(beta, 6);
    let mut current = caputo_l1_corrected(values, grid, beta, &exps)?;
    for _ in 1..k {
        let seed = current.filled();
        current = caputo_l1_corrected(&seed, grid, beta, &exps)?;
    }
    current.iterations = k;
    Ok(current)
}

/// First derivative (order 1) on a uniform grid: central differences in the
/// interior, second-order one-sided stencils at the ends.
pub fn first_derivative<T: Real>(values: &[T], grid: &TimeGrid<T>) -> Result<Vec<T>> {
    let tau = check_uniform("first_derivative", values, grid)?;
    let n = values.len();
    let two = T::c(2.0);
    let mut out = vec![T::zero(); n];
    out[0] = (-T::c(3.0) * values[0] + T::c(4.0) * values[1] - values[2]) / (two * tau);
    out[n - 1] = (T::c(3.0) * values[n - 1] - T::c(4.0) * values[n - 2] + values[n - 3]) / (two * tau);
    for i in 1..n - 1 {
        out[i] = (values[i + 1] - values[i - 1]) / (two * tau);
    }
    Ok(out)
}

/// Caputo derivative of order `0 < order ≤ 1`; order 1 is the ordinary derivative.
fn caputo_up_to_one<T: Real>(values: &[T], grid: &TimeGrid<T>, order: T) -> Result<Vec<T>> {
    if (order - T::one()).abs() <= T::c(1e-12) {
        let mut d = first_derivative(values, grid)?;
        d[0] = T::nan();
        Ok(d)
    } else {
        Ok(caputo_l1(values, grid, order)?.values)
    }
}

/// Pointwise residual of
/// `∂^{β₁}(∂^{β₂} f) − [∂^{β₁+β₂} f − t^{−β₁}/Γ(1−β₁) · (∂^{β₂} f)(0⁺)]`.
#[derive(Debug, Clone)]
pub struct CompositionResidual<T: Real = f64> {
    /// Residual per grid point; index 0 is NaN.
    pub residual: Vec<T>,
    pub inf_norm: T,
    /// First grid index included in `inf_norm`.
    pub window_start: usize,
}

/// Composition identity residual. The norm skips grid points with
/// `t < window_start_time` (the start-up layer of the L1 scheme).
pub fn composition_residual<T: Real>(
    values: &[T],
    grid: &TimeGrid<T>,
    beta1: T,
    beta2: T,
    window_start_time: T,
) -> Result<CompositionResidual<T>> {
    check_beta("composition_residual", beta1)?;
    check_beta("composition_residual", beta2)?;
    if beta1 + beta2 > T::one() + T::c(1e-12) {
        return Err(SheetError::domain(
            "composition_residual",
            format!("beta1 + beta2 = {} exceeds 1", beta1 + beta2),
        ));
    }
    let inner = caputo_l1(values, grid, beta2)?;
    let mut exps = vec![T::one() - beta2];
    exps.extend(power_exponents(beta1, 4));
    let lhs = caputo_l1_corrected(&inner.filled(), grid, beta1, &exps)?;
    let direct = caputo_up_to_one(values, grid, beta1 + beta2)?;
    let corr = rgamma(T::one() - beta1) * inner.origin_limit;
    let pts = grid.points();
    let mut residual = vec![T::nan(); values.len()];
    for i in 1..values.len() {
        residual[i] = lhs.values[i] - (direct[i] - pts[i].powf(-beta1) * corr);
    }
    let window_start = pts
        .iter()
        .position(|&t| t >= window_start_time)
        .unwrap_or(values.len())
        .max(1);
    let inf_norm = residual[window_start..]
        .iter()
        .fold(T::zero(), |m, r| m.max(r.abs()));
    Ok(CompositionResidual {
        residual,
        inf_norm,
        window_start,
    })
}

/// `∂^{ν⊗β} f` and the right-hand side
/// `f' − Σ_{κ=1}^{ν−1} t^{−κ/ν}/Γ(1−κ/ν) · (∂^{(ν−κ)⊗β} f)(0⁺)` for `β = 1/ν`.
pub fn nu_fold_composition<T: Real>(
    values: &[T],
    grid: &TimeGrid<T>,
    nu: u32,
) -> Result<(Vec<T>, Vec<T>)> {
    if nu < 2 {
        return Err(SheetError::domain("nu_fold_composition", "nu must be at least 2"));
    }
    let beta = T::one() / T::c(nu as f64);
    let mut limits = Vec::with_capacity(nu as usize);
    let exps = power_exponents(beta, 6);
    let mut current = caputo_l1_corrected(values, grid, beta, &exps)?;
    limits.push(current.origin_limit);
    for _ in 1..nu {
        current = caputo_l1_corrected(&current.filled(), grid, beta, &exps)?;
        limits.push(current.origin_limit);
    }
    let lhs = current.values;
    let deriv = first_derivative(values, grid)?;
    let pts = grid.points();
    let mut rhs = vec![T::nan(); values.len()];
    for i in 1..values.len() {
        let mut acc = deriv[i];
        for kappa in 1..nu {
            let frac = T::c(kappa as f64) * beta;
            // limits[m - 1] holds (∂^{m⊗β} f)(0⁺)
            let lim = limits[(nu - kappa) as usize - 1];
            acc = acc - pts[i].powf(-frac) * rgamma(T::one() - frac) * lim;
        }
        rhs[i] = acc;
    }
    Ok((lhs, rhs))
}
