//! Moment constants and time profiles against gamma-function oracles and
//! Monte Carlo.

use sheetlab::moments::{moment_e, profile_m, profile_n, MomentRoute};
use sheetlab::samplers::{mc_mean, sample_inverse_subordinator, RngStream};
use sheetlab::FractionalOrder;
use statrs::function::gamma::gamma;

fn order(nu: u32) -> FractionalOrder {
    FractionalOrder::from_nu(nu).unwrap()
}

/// `ν (k−1)! / Γ(k/ν)`.
fn closed(nu: u32, k: u32) -> f64 {
    let fact: f64 = (1..k).map(f64::from).product();
    nu as f64 * fact / gamma(k as f64 / nu as f64)
}

#[test]
fn closed_form_values() {
    let pi = std::f64::consts::PI;
    assert!((moment_e(order(2), 1.0, MomentRoute::ClosedForm).unwrap().value - 2.0 / pi.sqrt()).abs() < 1e-13);
    assert!((moment_e(order(3), 1.0, MomentRoute::ClosedForm).unwrap().value - 3.0 / 2.678_938_534_707_747).abs() < 1e-12);
    for nu in 2..=5 {
        for k in 1..=6 {
            let v = moment_e(order(nu), k as f64, MomentRoute::ClosedForm).unwrap().value;
            assert!((v - closed(nu, k)).abs() < 1e-12 * v, "nu={nu} k={k}");
        }
    }
    assert!(moment_e(order(3), 0.5, MomentRoute::ClosedForm).is_err());
    assert!(moment_e(order(3), -1.0, MomentRoute::Quadrature).is_err());
    assert!(moment_e(FractionalOrder::from_beta(0.37).unwrap(), 1.0, MomentRoute::ClosedForm).is_err());
}

#[test]
fn half_order_mean_is_reflected_brownian_mean() {
    // Λ(1) for β = 1/2 is |B(2)|, whose mean is √(2·2/π)
    let e = moment_e(order(2), 1.0, MomentRoute::ClosedForm).unwrap().value;
    assert!((e - (4.0 / std::f64::consts::PI).sqrt()).abs() < 1e-13);
}

#[test]
fn routes_agree() {
    for (i, &(nu, k)) in [(2u32, 1u32), (2, 2), (3, 1), (3, 2)].iter().enumerate() {
        let c = closed(nu, k);
        let q = moment_e(order(nu), k as f64, MomentRoute::Quadrature).unwrap();
        assert!((q.value - c).abs() < 1e-5, "nu={nu} k={k} quadrature {}", q.value);
        let route = MomentRoute::MonteCarlo { samples: 1_000_000, stream: RngStream::new(2024, i as u64) };
        let m = moment_e(order(nu), k as f64, route).unwrap();
        assert!((m.value - c).abs() < 3.0 * m.error, "nu={nu} k={k} mc {} ± {}", m.value, m.error);
    }
}

#[test]
fn non_integer_moment_by_quadrature() {
    // E(β, γ) = Γ(1+γ)/Γ(1+γβ) for any γ > −1
    for &(nu, g) in &[(2u32, 0.5f64), (3, -0.5), (4, 1.5)] {
        let b = 1.0 / nu as f64;
        let q = moment_e(order(nu), g, MomentRoute::Quadrature).unwrap().value;
        assert!((q - gamma(1.0 + g) / gamma(1.0 + g * b)).abs() < 1e-5, "nu={nu} gamma={g}");
    }
}

#[test]
fn time_scaling_of_moments() {
    for (i, &t) in [0.5f64, 2.0].iter().enumerate() {
        for nu in [2u32, 3] {
            let o = order(nu);
            let est = mc_mean(RngStream::new(99, 10 + i as u64 * 4 + nu as u64), 400_000, |rng| {
                sample_inverse_subordinator(o, t, rng).powi(2)
            });
            let exact = t.powf(2.0 / nu as f64) * closed(nu, 2);
            assert!((est.estimate - exact).abs() < 3.0 * est.std_error, "t={t} nu={nu}: {} ± {} vs {exact}", est.estimate, est.std_error);
        }
    }
}

#[test]
fn profiles() {
    let pi = std::f64::consts::PI;
    assert!((profile_m(order(2), 1, 1, &[1.0]).unwrap().value - 2.0 / pi.sqrt()).abs() < 1e-13);
    assert!((profile_m(order(3), 1, 2, &[1.0]).unwrap().value - closed(3, 2) / 2.0).abs() < 1e-12);
    assert!((profile_m(order(3), 1, 2, &[1.0]).unwrap().value - 1.1077).abs() < 1e-4);
    assert_eq!(profile_m(order(4), 2, 3, &[2.0, 0.0, 1.0]).unwrap().value, 0.0);
    let t = [0.7, 1.9, 1.1];
    let m = profile_m(order(3), 2, 1, &t).unwrap();
    let expected = closed(3, 1).powi(3) * t.iter().map(|v: &f64| v.cbrt()).product::<f64>();
    assert!((m.value - expected).abs() < 1e-12);
    assert!((m.dt_j - m.value / (3.0 * t[1])).abs() < 1e-12);
    assert_eq!(profile_n(order(5), 1, &[3.3]).unwrap().value, 1.0);
    assert!((profile_n(order(2), 1, &[5.0, 3.0]).unwrap().value - 6.0).abs() < 1e-13);
    assert_eq!(profile_n(order(2), 1, &[5.0, 0.0]).unwrap().value, 0.0);
    let n = profile_n(order(3), 2, &[2.0, 9.0, 0.5]).unwrap();
    assert!((n.value - closed(3, 3).powi(2) * 1.0).abs() < 1e-12);
    assert!(profile_m(order(3), 1, 3, &[1.0]).is_err());
    assert!(profile_m(order(3), 2, 1, &[1.0]).is_err());
}
