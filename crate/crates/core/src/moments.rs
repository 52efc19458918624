//! Moment constants `E(β, γ) = E[Λ(1)^γ] = E[L(1)^{−γβ}]` and the time
//! profiles `M_κ⁽ʲ⁾`, `N_ν⁽ʲ⁾` of the 2ν-order system.

use crate::densities::{InverseStableKernel, StableMethod};
use crate::error::{Result, SheetError};
use crate::fractional::FractionalOrder;
use crate::quadrature::integrate;
use crate::samplers::{mc_mean, sample_stable_l1, RngStream};
use crate::special::{factorial, gamma};

/// How a moment constant is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentRoute {
    /// `Γ(1+k)/Γ(1+k/ν) = ν(k−1)!/Γ(k/ν)`; only `β = 1/ν` and integer `γ = k`.
    ClosedForm,
    /// `∫₀^∞ x^{−γβ} g_β(x) dx`.
    Quadrature,
    /// Average of `L(1)^{−γβ}`.
    MonteCarlo { samples: u64, stream: RngStream },
}

impl MomentRoute {
    pub fn name(&self) -> &'static str {
        match self {
            MomentRoute::ClosedForm => "closed-form",
            MomentRoute::Quadrature => "quadrature",
            MomentRoute::MonteCarlo { .. } => "monte-carlo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentConstant {
    pub order: FractionalOrder,
    pub gamma: f64,
    pub value: f64,
    pub route: MomentRoute,
    /// Error estimate: quadrature error or Monte-Carlo standard error.
    pub error: f64,
}

/// Split point between the contour-route piece near 0 and the rest.
const SPLIT: f64 = 0.05;
/// Beyond this the series is integrated termwise.
const TAIL_START: f64 = 64.0;

/// `E(β, γ)` by the requested route.
pub fn moment_e(order: FractionalOrder, gamma_exp: f64, route: MomentRoute) -> Result<MomentConstant> {
    const OP: &str = "moment_E";
    if !(gamma_exp > -1.0) {
        return Err(SheetError::domain(OP, format!("gamma = {gamma_exp} must exceed -1")));
    }
    let beta = order.beta();
    let (value, error) = match route {
        MomentRoute::ClosedForm => {
            order.require_nu(OP)?;
            if gamma_exp != gamma_exp.round() || gamma_exp < 0.0 {
                return Err(SheetError::domain(OP, format!("closed form needs a nonnegative integer gamma, got {gamma_exp}")));
            }
            (gamma(1.0 + gamma_exp) / gamma(1.0 + gamma_exp * beta), 0.0)
        }
        MomentRoute::Quadrature => moment_quadrature(order, gamma_exp)?,
        MomentRoute::MonteCarlo { samples, stream } => {
            if samples < 2 {
                return Err(SheetError::domain(OP, "Monte Carlo needs at least two samples"));
            }
            let p = -gamma_exp * beta;
            let est = mc_mean(stream, samples, |rng| sample_stable_l1(order, rng).powf(p));
            (est.estimate, est.std_error)
        }
    };
    Ok(MomentConstant {
        order,
        gamma: gamma_exp,
        value,
        route,
        error,
    })
}

fn moment_quadrature(order: FractionalOrder, gamma_exp: f64) -> Result<(f64, f64)> {
    const OP: &str = "moment_E";
    let kernel = InverseStableKernel::with_tolerance(order, 1e-13);
    let p = -gamma_exp * order.beta();
    let integrand = |method: StableMethod| {
        let kernel = &kernel;
        move |x: f64| {
            if x <= 0.0 {
                0.0
            } else {
                x.powf(p) * kernel.stable_g(x, method).unwrap_or(f64::NAN)
            }
        }
    };
    let (left, e1) = integrate(OP, integrand(StableMethod::Talbot), 0.0, SPLIT, 1e-11)?;
    let (mid, e2) = integrate(OP, integrand(StableMethod::Auto), SPLIT, TAIL_START, 1e-10)?;
    let tail = kernel.g_power_tail(TAIL_START, p)?;
    Ok((left + mid + tail, e1 + e2))
}

/// `E(1/ν, k)` in closed form.
fn e_closed(nu: u32, k: u32) -> f64 {
    factorial(k as usize) / gamma(1.0 + k as f64 / nu as f64)
}

/// Which time profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    MKappa(u32),
    NNu,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeProfile {
    pub kind: ProfileKind,
    pub nu: u32,
    pub j: usize,
    pub t: Vec<f64>,
    pub value: f64,
    /// `∂_{t_j}` of the profile.
    pub dt_j: f64,
}

fn check_profile_args(op: &'static str, j: usize, t: &[f64]) -> Result<()> {
    if t.is_empty() || t.iter().any(|&v| !(v >= 0.0)) {
        return Err(SheetError::domain(op, "t must lie in [0, inf)^n"));
    }
    if j == 0 || j > t.len() {
        return Err(SheetError::domain(op, format!("active index j = {j} outside 1..={}", t.len())));
    }
    Ok(())
}

/// `M_κ⁽ʲ⁾(t) = E(1/ν, κ)ⁿ/κ! · ∏ tᵢ^{κ/ν}` and its `t_j`-derivative.
pub fn profile_m(order: FractionalOrder, j: usize, kappa: u32, t: &[f64]) -> Result<TimeProfile> {
    const OP: &str = "profile_M";
    let nu = order.require_nu(OP)?;
    check_profile_args(OP, j, t)?;
    if kappa == 0 || kappa >= nu {
        return Err(SheetError::domain(OP, format!("kappa = {kappa} outside 1..={}", nu - 1)));
    }
    let n = t.len() as i32;
    let a = kappa as f64 / nu as f64;
    let c = e_closed(nu, kappa).powi(n) / factorial(kappa as usize);
    let value = c * t.iter().map(|&v| v.powf(a)).product::<f64>();
    let others: f64 = t
        .iter()
        .enumerate()
        .filter(|(i, _)| i + 1 != j)
        .map(|(_, &v)| v.powf(a))
        .product();
    let tj = t[j - 1];
    let dt_j = if tj > 0.0 { c * others * a * tj.powf(a - 1.0) } else { f64::INFINITY * others.signum() };
    Ok(TimeProfile {
        kind: ProfileKind::MKappa(kappa),
        nu,
        j,
        t: t.to_vec(),
        value,
        dt_j,
    })
}

/// `N_ν⁽ʲ⁾(t) = E(1/ν, ν)^{n−1} ∏_{i≠j} tᵢ`; 1 for `n = 1`.
pub fn profile_n(order: FractionalOrder, j: usize, t: &[f64]) -> Result<TimeProfile> {
    const OP: &str = "profile_N";
    let nu = order.require_nu(OP)?;
    check_profile_args(OP, j, t)?;
    let n = t.len() as i32;
    let prod: f64 = t.iter().enumerate().filter(|(i, _)| i + 1 != j).map(|(_, &v)| v).product();
    Ok(TimeProfile {
        kind: ProfileKind::NNu,
        nu,
        j,
        t: t.to_vec(),
        value: e_closed(nu, nu).powi(n - 1) * prod,
        dt_j: 0.0,
    })
}

impl InverseStableKernel {
    /// `∫_Y^∞ x^p g_β(x) dx` for `p < β`, by integrating the series in
    /// `x^{−β}` term by term.
    pub fn g_power_tail(&self, y: f64, p: f64) -> Result<f64> {
        let beta = self.beta();
        if !(p < beta) || !(y > 0.0) {
            return Err(SheetError::domain("g_power_tail", "need p < beta and Y > 0"));
        }
        // g(x) = β Σ_m (−1)^m c_m x^{−(m+1)β−1}
        // ∫_Y^∞ x^{p−(m+1)β−1} dx = Y^{p−(m+1)β} / ((m+1)β − p)
        let z = y.powf(-beta);
        let mut sum = 0.0;
        let mut m = 0usize;
        let mut zm = 1.0;
        loop {
            let c = self.coefficient(m);
            let term = c * zm * beta / ((m + 1) as f64 * beta - p);
            sum += if m % 2 == 0 { term } else { -term };
            if m > 4 && c != 0.0 && term.abs() < 1e-18 * sum.abs().max(1e-300) {
                break;
            }
            m += 1;
            zm *= z;
            if m > 400 {
                return Err(SheetError::Range {
                    op: "g_power_tail",
                    attained: term.abs(),
                    requested: 1e-18,
                });
            }
        }
        Ok(sum * y.powf(p - beta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn o(nu: u32) -> FractionalOrder {
        FractionalOrder::from_nu(nu).unwrap()
    }

    #[test]
    fn closed_form_examples() {
        let e = moment_e(o(2), 1.0, MomentRoute::ClosedForm).unwrap();
        assert_relative_eq!(e.value, 1.128_379_167_1, epsilon = 1e-10);
        let e = moment_e(o(3), 1.0, MomentRoute::ClosedForm).unwrap();
        assert_relative_eq!(e.value, 3.0 / 2.678_938_534_7, epsilon = 1e-9);
        assert!(moment_e(o(2), 0.5, MomentRoute::ClosedForm).is_err());
        assert!(moment_e(FractionalOrder::from_beta(0.4).unwrap(), 1.0, MomentRoute::ClosedForm).is_err());
        assert!(moment_e(o(2), -1.0, MomentRoute::Quadrature).is_err());
    }

    #[test]
    fn quadrature_matches_closed_form() {
        for (nu, k) in [(2, 1), (2, 2), (3, 1), (3, 2)] {
            let c = moment_e(o(nu), k as f64, MomentRoute::ClosedForm).unwrap().value;
            let q = moment_e(o(nu), k as f64, MomentRoute::Quadrature).unwrap().value;
            assert!((c - q).abs() < 1e-5, "nu={nu} k={k}: {c} vs {q}");
        }
        // γ = 0 and a negative moment
        let q = moment_e(o(3), 0.0, MomentRoute::Quadrature).unwrap().value;
        assert!((q - 1.0).abs() < 1e-6);
        let q = moment_e(o(2), -0.5, MomentRoute::Quadrature).unwrap().value;
        let exact = gamma(0.5) / gamma(0.75);
        assert!((q - exact).abs() < 1e-6, "{q} vs {exact}");
    }

    #[test]
    fn profiles() {
        let m = profile_m(o(2), 1, 1, &[1.0]).unwrap();
        assert_relative_eq!(m.value, 2.0 / std::f64::consts::PI.sqrt(), epsilon = 1e-12);
        let m = profile_m(o(3), 1, 2, &[1.0]).unwrap();
        assert_relative_eq!(m.value, 3.0 / (2.0 * 1.354_117_939_4), epsilon = 1e-9);
        assert_eq!(profile_m(o(3), 1, 1, &[1.0, 0.0]).unwrap().value, 0.0);
        assert!(profile_m(o(3), 1, 3, &[1.0]).is_err());
        assert_eq!(profile_n(o(3), 1, &[7.0]).unwrap().value, 1.0);
        assert_relative_eq!(profile_n(o(2), 1, &[5.0, 3.0]).unwrap().value, 6.0, epsilon = 1e-13);
        assert_eq!(profile_n(o(2), 1, &[5.0, 0.0]).unwrap().value, 0.0);
    }

    #[test]
    fn profile_derivative_by_differences() {
        let t = [0.7, 1.9];
        let h = 1e-6;
        let m = profile_m(o(3), 2, 1, &t).unwrap();
        let up = profile_m(o(3), 2, 1, &[0.7, 1.9 + h]).unwrap().value;
        let dn = profile_m(o(3), 2, 1, &[0.7, 1.9 - h]).unwrap().value;
        assert_relative_eq!(m.dt_j, (up - dn) / (2.0 * h), max_relative = 1e-7);
    }
}
