//! Numerical Laplace inversion on the fixed Talbot contour.

use num_complex::Complex64;

/// Default node count.
pub const TALBOT_NODES: usize = 32;

/// Inverts a Laplace transform `F(s)` at time `t > 0` using `m` contour
/// nodes (fixed-Talbot parametrisation `s(θ) = rθ(cot θ + i)`, `r = 2m/(5t)`).
///
/// `F` must be analytic to the right of the negative real axis.
pub fn invert<F>(transform: F, t: f64, m: usize) -> f64
where
    F: Fn(Complex64) -> Complex64,
{
    debug_assert!(t > 0.0 && m >= 2);
    let r = 2.0 * m as f64 / (5.0 * t);
    let mut acc = 0.5 * (transform(Complex64::new(r, 0.0)) * (r * t).exp()).re;
    for k in 1..m {
        let theta = k as f64 * std::f64::consts::PI / m as f64;
        let cot = theta.cos() / theta.sin();
        let s = Complex64::new(r * theta * cot, r * theta);
        let sigma = theta + (theta * cot - 1.0) * cot;
        let term = (s * t).exp() * transform(s) * Complex64::new(1.0, sigma);
        acc += term.re;
    }
    acc * r / m as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverts_elementary_transforms() {
        // 1/(s+1) -> e^{-t}
        for &t in &[0.1, 1.0, 3.0] {
            let v = invert(|s| 1.0 / (s + 1.0), t, TALBOT_NODES);
            assert!((v - (-t as f64).exp()).abs() < 1e-10, "t={t} v={v}");
        }
        // s^{-1/2} -> 1/sqrt(pi t)
        let v = invert(|s: Complex64| s.powf(-0.5), 2.0, TALBOT_NODES);
        assert!((v - 1.0 / (std::f64::consts::PI * 2.0).sqrt()).abs() < 1e-10);
    }
}
