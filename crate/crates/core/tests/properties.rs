//! Property tests: operator linearity, kernel positivity, normalisation and
//! scaling, and the one-parameter collapse of the solution family.

use proptest::prelude::*;
use sheetlab::densities::{bm_density, bs_density, InverseStableKernel, StableMethod};
use sheetlab::fractional::{caputo_l1, caputo_l1_corrected, power_exponents};
use sheetlab::initial_functions::TestFunction;
use sheetlab::samplers::FieldKind;
use sheetlab::solutions::{Evaluator, Functional, QuadratureSpec};
use sheetlab::{FractionalOrder, TimeGrid};

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

/// Composite Simpson with `n` (even) intervals.
fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

fn beta_strategy() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.5), Just(1.0 / 3.0), Just(0.25), 0.2f64..0.8]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn caputo_is_linear(
        a in prop::collection::vec(-5.0f64..5.0, 17),
        b in prop::collection::vec(-5.0f64..5.0, 17),
        p in -3.0f64..3.0,
        q in -3.0f64..3.0,
        beta in 0.05f64..0.95,
        t_end in 0.5f64..3.0,
    ) {
        let grid = TimeGrid::uniform(t_end, 16).unwrap();
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| p * x + q * y).collect();
        let ca = caputo_l1(&a, &grid, beta).unwrap();
        let cb = caputo_l1(&b, &grid, beta).unwrap();
        let cm = caputo_l1(&mix, &grid, beta).unwrap();
        for k in 1..17 {
            prop_assert!(close(cm.values[k], p * ca.values[k] + q * cb.values[k], 1e-10));
        }
        let exps = power_exponents(beta, 4);
        let ca = caputo_l1_corrected(&a, &grid, beta, &exps).unwrap();
        let cb = caputo_l1_corrected(&b, &grid, beta, &exps).unwrap();
        let cm = caputo_l1_corrected(&mix, &grid, beta, &exps).unwrap();
        for k in 1..17 {
            prop_assert!(close(cm.values[k], p * ca.values[k] + q * cb.values[k], 1e-8));
        }
        prop_assert!(close(cm.origin_limit, p * ca.origin_limit + q * cb.origin_limit, 1e-8));
    }

    #[test]
    fn caputo_kills_constants(c in -1e3f64..1e3, beta in 0.05f64..0.95, steps in 2usize..64) {
        let grid = TimeGrid::uniform(1.7, steps).unwrap();
        let v = vec![c; steps + 1];
        let r = caputo_l1(&v, &grid, beta).unwrap();
        prop_assert!(r.values[1..].iter().all(|&d| d == 0.0));
        let r = caputo_l1_corrected(&v, &grid, beta, &power_exponents(beta, 4)).unwrap();
        prop_assert!(r.values[1..].iter().all(|&d| d.abs() < 1e-12 * c.abs().max(1.0)));
    }

    #[test]
    fn gaussian_kernels_are_nonnegative(
        t in 1e-3f64..50.0,
        s in -30.0f64..30.0,
        times in prop::collection::vec(1e-3f64..5.0, 1..4),
        y in prop::collection::vec(-10.0f64..10.0, 1..4),
    ) {
        prop_assert!(bm_density(t, s).unwrap() >= 0.0);
        let x = vec![0.3; y.len()];
        prop_assert!(bs_density(&times, &x, &y).unwrap() >= 0.0);
    }

    #[test]
    fn brownian_kernel_normalises(t in 0.01f64..20.0) {
        let r = 12.0 * t.sqrt();
        let m = simpson(|s| bm_density(t, s).unwrap(), -r, r, 2000);
        prop_assert!((m - 1.0).abs() < 1e-8);
    }

    #[test]
    fn sheet_kernel_normalises(times in prop::collection::vec(0.05f64..3.0, 1..4), x in -2.0f64..2.0) {
        let v: f64 = times.iter().product();
        let r = 12.0 * v.sqrt();
        let m = simpson(|y| bs_density(&times, &[x], &[y]).unwrap(), x - r, x + r, 2000);
        prop_assert!((m - 1.0).abs() < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn inverse_subordinator_kernel_is_nonnegative(beta in beta_strategy(), t in 0.05f64..10.0, x in 1e-3f64..20.0) {
        let k = InverseStableKernel::new(FractionalOrder::from_beta(beta).unwrap());
        prop_assert!(k.density(t, x).unwrap() >= 0.0);
        prop_assert!(k.stable_g(x, StableMethod::Auto).unwrap() >= 0.0);
    }

    #[test]
    fn inverse_subordinator_kernel_normalises(nu in 2u32..=4, t in 0.1f64..5.0) {
        let k = InverseStableKernel::new(FractionalOrder::from_nu(nu).unwrap());
        let r = k.unit_tail_radius(1e-11) * t.powf(1.0 / nu as f64);
        let m = simpson(|x| k.density_scaled(t, x).unwrap(), 0.0, r, 4000);
        prop_assert!((m - 1.0).abs() < 1e-6, "mass {}", m);
    }

    #[test]
    fn inverse_subordinator_scaling_law(beta in beta_strategy(), t in 0.2f64..3.0, x in 0.05f64..3.0, c in 0.3f64..3.0) {
        let k = InverseStableKernel::new(FractionalOrder::from_beta(beta).unwrap());
        let lhs = k.density(c * t, c.powf(beta) * x).unwrap();
        let rhs = c.powf(-beta) * k.density(t, x).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-8 * rhs.abs().max(1e-3), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn one_parameter_collapse(kind_ix in 0usize..3, t in 0.0f64..4.0, x in -2.0f64..2.0, which in 0usize..3) {
        let (kind, nu) = [
            (FieldKind::Btbs, None),
            (FieldKind::Isltbs(FractionalOrder::from_nu(2).unwrap()), Some(2)),
            (FieldKind::Isltbs(FractionalOrder::from_nu(3).unwrap()), Some(3)),
        ][kind_ix];
        let f = [TestFunction::Gaussian { d: 1 }, TestFunction::Quartic { d: 1 }, TestFunction::Bump { d: 1, c: 1.0, alpha: 0.5 }][which];
        let ev = Evaluator::new(kind, QuadratureSpec::for_n(1).with_polynomial_growth(true)).unwrap();
        let u = ev.eval(Functional::U, &f, &[t], &[x]).unwrap();
        prop_assert!((ev.eval(Functional::ScriptU(1), &f, &[t], &[x]).unwrap() - u).abs() <= 1e-12);
        prop_assert!((ev.eval(Functional::ScriptV(1), &f, &[t], &[x]).unwrap() - u).abs() <= 1e-12);
        if let Some(nu) = nu {
            prop_assert!((ev.eval(Functional::ScriptUNu(1, nu), &f, &[t], &[x]).unwrap() - u).abs() <= 1e-12);
        }
    }
}
