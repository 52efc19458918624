//! Residuals of the interacting PDE systems on analytic and quadrature fields.

use sheetlab::grid::Axis;
use sheetlab::initial_functions::TestFunction;
use sheetlab::pde_verify::{
    drift_coefficient, equivalence_residual, residual_fourth_order, residual_fractional, residual_order_2nu,
    u_coefficient_checks, QuadField, ResidualGrid, StencilSpec, BTBS_FRACTIONAL_COEF, COMMUTED_ORDER_CHECK,
    ISLTBS_FRACTIONAL_COEF,
};
use sheetlab::report::ResidualReport;
use sheetlab::samplers::FieldKind;
use sheetlab::solutions::{Evaluator, Functional, QuadratureSpec};
use sheetlab::{FractionalOrder, Result};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

fn order(nu: u32) -> FractionalOrder {
    FractionalOrder::from_nu(nu).unwrap()
}

fn spec(n: usize) -> QuadratureSpec {
    QuadratureSpec::for_n(n).with_polynomial_growth(true)
}

fn axis(a: f64, b: f64, k: usize) -> Axis {
    Axis::new(a, b, k).unwrap()
}

fn grid(t_axes: Vec<Axis>, x_axes: Vec<Axis>, j: usize, h: f64, tau: f64) -> ResidualGrid {
    ResidualGrid::new(t_axes, x_axes, j, StencilSpec::new(h, tau).unwrap())
}

/// `E[s^p]` for one clock.
fn clock_power_mean(kind: FieldKind, t: f64, p: u32) -> f64 {
    let p = p as f64;
    match kind {
        FieldKind::Btbs => (2.0 * t).powf(p / 2.0) * gamma((p + 1.0) / 2.0) / PI.sqrt(),
        FieldKind::Isltbs(o) => {
            let b = o.beta();
            t.powf(p * b) * gamma(1.0 + p) / gamma(1.0 + p * b)
        }
    }
}

/// Exact quadratic-data field `E[w(s)(|x|² + d∏sᵢ)]`.
fn exact(functional: Functional, kind: FieldKind) -> impl Fn(&[f64], &[f64]) -> Result<f64> + Sync {
    let j = functional.j();
    let p = match functional {
        Functional::U => 0,
        Functional::ScriptU(_) => 2,
        Functional::ScriptV(_) => 1,
        Functional::ScriptUNu(_, nu) => nu,
    };
    move |t: &[f64], x: &[f64]| {
        let m = |k: u32| -> f64 {
            t.iter()
                .enumerate()
                .map(|(i, &ti)| clock_power_mean(kind, ti, k + if i + 1 == j { 0 } else { p }))
                .product()
        };
        Ok(x.iter().map(|v| v * v).sum::<f64>() * m(0) + x.len() as f64 * m(1))
    }
}

fn max_boundary_error(r: &ResidualReport) -> f64 {
    r.checks.iter().filter(|c| c.name != COMMUTED_ORDER_CHECK).map(|c| c.abs_error()).fold(0.0, f64::max)
}

#[test]
fn pinned_coefficients() {
    assert_eq!(BTBS_FRACTIONAL_COEF, 0.125f64.sqrt());
    assert_eq!(ISLTBS_FRACTIONAL_COEF, 0.5);
    assert_ne!(BTBS_FRACTIONAL_COEF, ISLTBS_FRACTIONAL_COEF);
    // one time parameter: √(1/(8πt))
    for t in [0.25, 1.0, 3.7] {
        assert!((drift_coefficient(&[t], 1) - 1.0 / (8.0 * PI * t).sqrt()).abs() < 1e-15);
    }
    // two: √(t₂/(4t₁π²))
    let c = drift_coefficient(&[0.8, 2.5], 1);
    assert!((c - (2.5 / (4.0 * 0.8 * PI * PI)).sqrt()).abs() < 1e-15);
}

#[test]
fn one_parameter_quadratic_systems() {
    let q = TestFunction::Quadratic { d: 1 };
    let btbs = Evaluator::new(FieldKind::Btbs, spec(1)).unwrap();
    let u = QuadField::new(&btbs, Functional::U, &q);
    let su = QuadField::new(&btbs, Functional::ScriptU(1), &q);
    let sv = QuadField::new(&btbs, Functional::ScriptV(1), &q);
    let g = grid(vec![axis(0.5, 2.0, 7)], vec![axis(-1.0, 1.0, 5)], 1, 0.1, 1e-3);
    let r = residual_fourth_order(&u, &su, &q, &g).unwrap();
    assert!(r.residual_inf_norm < 1e-4, "fourth order {}", r.residual_inf_norm);
    assert!(max_boundary_error(&r) < 1e-6);
    let r = residual_fractional(&u, &sv, &q, FieldKind::Btbs, &g).unwrap();
    assert!(r.residual_inf_norm < 5e-3, "half fractional {}", r.residual_inf_norm);
    assert!(max_boundary_error(&r) < 1e-6);

    let kind = FieldKind::Isltbs(order(3));
    let ev = Evaluator::new(kind, spec(1)).unwrap();
    let u = QuadField::new(&ev, Functional::U, &q);
    let sv = QuadField::new(&ev, Functional::ScriptV(1), &q);
    let sn = QuadField::new(&ev, Functional::ScriptUNu(1, 3), &q);
    let r = residual_fractional(&u, &sv, &q, kind, &g).unwrap();
    assert!(r.residual_inf_norm < 5e-3, "beta fractional {}", r.residual_inf_norm);
    let r = residual_order_2nu(&u, &sn, &q, order(3), &g).unwrap();
    assert!(r.residual_inf_norm < 1e-3, "order 2nu {}", r.residual_inf_norm);
    assert!(max_boundary_error(&r) < 1e-5);
}

#[test]
fn two_parameter_quadratic_systems() {
    let q = TestFunction::Quadratic { d: 1 };
    let b = FieldKind::Btbs;
    // u = x² + (2/π)√(t₁t₂), 𝒰⁽¹⁾ = t₂x² + (4/π)√t₁ t₂^{3/2}, 𝒱⁽¹⁾ = √(2t₂/π)x² + √(2t₁/π)t₂
    let u = |t: &[f64], x: &[f64]| -> Result<f64> { Ok(x[0] * x[0] + 2.0 / PI * (t[0] * t[1]).sqrt()) };
    let su = |t: &[f64], x: &[f64]| -> Result<f64> { Ok(t[1] * x[0] * x[0] + 4.0 / PI * t[0].sqrt() * t[1].powf(1.5)) };
    let sv =
        |t: &[f64], x: &[f64]| -> Result<f64> { Ok((2.0 * t[1] / PI).sqrt() * x[0] * x[0] + (2.0 * t[0] / PI).sqrt() * t[1]) };
    // the generic moment algebra gives the same three fields
    for t in [[0.7, 1.3], [2.0, 0.5]] {
        for x in [-0.4, 0.9] {
            assert!((u(&t, &[x]).unwrap() - exact(Functional::U, b)(&t, &[x]).unwrap()).abs() < 1e-13);
            assert!((su(&t, &[x]).unwrap() - exact(Functional::ScriptU(1), b)(&t, &[x]).unwrap()).abs() < 1e-13);
            assert!((sv(&t, &[x]).unwrap() - exact(Functional::ScriptV(1), b)(&t, &[x]).unwrap()).abs() < 1e-13);
        }
    }
    let g = grid(vec![axis(0.5, 2.0, 4), axis(0.5, 2.0, 4)], vec![axis(-1.0, 1.0, 5)], 1, 0.1, 1.0 / 64.0);
    let r = residual_fourth_order(&u, &su, &q, &g).unwrap();
    assert!(r.residual_inf_norm < 1e-3, "fourth order {}", r.residual_inf_norm);
    assert!(max_boundary_error(&r) < 1e-12);
    let r = residual_fractional(&u, &sv, &q, b, &g).unwrap();
    assert!(r.residual_inf_norm < 5e-3, "half fractional {}", r.residual_inf_norm);
    assert!(max_boundary_error(&r) < 1e-12);
    // second active index
    let g2 = grid(g.t_axes.clone(), g.x_axes.clone(), 2, 0.1, 1.0 / 64.0);
    let r = residual_fractional(&u, &exact(Functional::ScriptV(2), b), &q, b, &g2).unwrap();
    assert!(r.residual_inf_norm < 5e-3);
    let r = residual_fourth_order(&u, &exact(Functional::ScriptU(2), b), &q, &g2).unwrap();
    assert!(r.residual_inf_norm < 1e-3);
}

#[test]
fn two_parameter_isltbs_systems() {
    let q = TestFunction::Quadratic { d: 2 };
    for nu in [2u32, 3] {
        let kind = FieldKind::Isltbs(order(nu));
        let u = exact(Functional::U, kind);
        let g = grid(vec![axis(0.5, 1.5, 3), axis(0.5, 1.5, 3)], vec![axis(-1.0, 1.0, 3), axis(-0.5, 0.5, 2)], 2, 0.1, 1.0 / 64.0);
        let r = residual_fractional(&u, &exact(Functional::ScriptV(2), kind), &q, kind, &g).unwrap();
        assert!(r.residual_inf_norm < 5e-3, "nu={nu}: {}", r.residual_inf_norm);
        assert!(max_boundary_error(&r) < 1e-12);
        let r = residual_order_2nu(&u, &exact(Functional::ScriptUNu(2, nu), kind), &q, order(nu), &g).unwrap();
        assert!(r.residual_inf_norm < 1e-3, "nu={nu}: {}", r.residual_inf_norm);
        assert!(max_boundary_error(&r) < 1e-12);
    }
}

#[test]
fn wrong_coefficient_is_detected() {
    // the quarter-scaled BTBS field does not satisfy the half-order system
    let q = TestFunction::Quadratic { d: 1 };
    let kind = FieldKind::Btbs;
    let u = exact(Functional::U, kind);
    let v = |t: &[f64], x: &[f64]| -> Result<f64> { Ok(exact(Functional::ScriptV(1), kind)(t, x)? * 2f64.sqrt()) };
    let g = grid(vec![axis(0.5, 2.0, 4)], vec![axis(-1.0, 1.0, 3)], 1, 0.1, 1.0 / 64.0);
    assert!(residual_fractional(&u, &v, &q, kind, &g).unwrap().residual_inf_norm > 0.1);
}

#[test]
fn fourth_order_and_order_four_agree_on_rescaled_clock() {
    // Λ(t) for β = 1/2 is |B(2t)|, so the ν = 2 residual at t is twice the
    // fourth-order residual at 2t
    let q = TestFunction::Quadratic { d: 1 };
    let b = Evaluator::new(FieldKind::Btbs, spec(1)).unwrap();
    let l = Evaluator::new(FieldKind::Isltbs(order(2)), spec(1)).unwrap();
    let tau = 1e-3;
    let gl = grid(vec![axis(0.25, 1.0, 4)], vec![axis(-1.0, 1.0, 5)], 1, 0.1, tau).keep_points(true);
    let gb = grid(vec![axis(0.5, 2.0, 4)], vec![axis(-1.0, 1.0, 5)], 1, 0.1, 2.0 * tau).keep_points(true);
    let rl = residual_order_2nu(&QuadField::new(&l, Functional::U, &q), &QuadField::new(&l, Functional::ScriptUNu(1, 2), &q), &q, order(2), &gl)
        .unwrap();
    let rb = residual_fourth_order(&QuadField::new(&b, Functional::U, &q), &QuadField::new(&b, Functional::ScriptU(1), &q), &q, &gb).unwrap();
    let (pl, pb) = (rl.per_point.unwrap(), rb.per_point.unwrap());
    assert_eq!(pl.len(), pb.len());
    for (a, c) in pl.iter().zip(&pb) {
        assert!((2.0 * a.t[0] - c.t[0]).abs() < 1e-12 && a.x == c.x);
        assert!((a.residual - 2.0 * c.residual).abs() < 1e-6, "t={:?}: {} vs {}", a.t, a.residual, c.residual);
    }
}

#[test]
fn constant_data_has_zero_residual() {
    let c = TestFunction::Constant { d: 1, c: 2.5 };
    let field = |_: &[f64], _: &[f64]| -> Result<f64> { Ok(2.5) };
    let g = grid(vec![axis(0.5, 1.0, 3)], vec![axis(-1.0, 1.0, 3)], 1, 0.1, 1.0 / 64.0);
    assert_eq!(residual_fourth_order(&field, &field, &c, &g).unwrap().residual_inf_norm, 0.0);
    assert_eq!(residual_fractional(&field, &field, &c, FieldKind::Btbs, &g).unwrap().residual_inf_norm, 0.0);
    assert_eq!(residual_order_2nu(&field, &field, &c, order(3), &g).unwrap().residual_inf_norm, 0.0);
    assert_eq!(equivalence_residual(&field, &field, &c, FieldKind::Isltbs(order(3)), &g).unwrap().residual_inf_norm, 0.0);
}

#[test]
fn equivalence_condition_vanishes_for_quadratic_data() {
    let q = TestFunction::Quadratic { d: 1 };
    let b = FieldKind::Btbs;
    let g = grid(vec![axis(0.5, 1.5, 3), axis(0.5, 1.5, 3)], vec![axis(-1.0, 1.0, 5)], 1, 0.1, 1.0 / 64.0);
    let r = equivalence_residual(&exact(Functional::ScriptU(1), b), &exact(Functional::ScriptV(1), b), &q, b, &g).unwrap();
    assert!(r.residual_inf_norm < 1e-6, "{}", r.residual_inf_norm);
    assert!(r.check(COMMUTED_ORDER_CHECK).unwrap().computed < 1e-6);
    assert!(max_boundary_error(&r) < 1e-12);
    let kind = FieldKind::Isltbs(order(3));
    let r = equivalence_residual(&exact(Functional::ScriptUNu(1, 3), kind), &exact(Functional::ScriptV(1), kind), &q, kind, &g).unwrap();
    assert!(r.residual_inf_norm < 1e-6, "{}", r.residual_inf_norm);
    assert!(max_boundary_error(&r) < 1e-12);
}

/// Three refinement levels `(h, τ)`, `(h/2, τ/2)`, `(h/4, τ/4)`.
fn refinement(kind: FieldKind, functional: Functional, h0: f64, tau0: f64) -> Vec<f64> {
    let f = TestFunction::Gaussian { d: 1 };
    let ev = Evaluator::new(kind, QuadratureSpec::for_n(1)).unwrap();
    let su = QuadField::new(&ev, functional, &f);
    let sv = QuadField::new(&ev, Functional::ScriptV(1), &f);
    (0..3)
        .map(|k| {
            let s = 0.5f64.powi(k);
            let g = grid(vec![axis(0.5, 1.5, 3)], vec![axis(-1.0, 1.0, 5)], 1, h0 * s, tau0 * s);
            equivalence_residual(&su, &sv, &f, kind, &g).unwrap().residual_inf_norm
        })
        .collect()
}

fn assert_converges(levels: &[f64], bound: f64) {
    for w in levels.windows(2) {
        assert!(w[1] <= 1.1 * w[0], "not monotone: {levels:?}");
        assert!((w[0] / w[1]).log2() >= 1.0, "order below 1: {levels:?}");
    }
    assert!(levels[2] < bound, "{levels:?}");
}

#[test]
fn equivalence_refinement_btbs() {
    let levels = refinement(FieldKind::Btbs, Functional::ScriptU(1), 1.0 / 16.0, 1.0 / 512.0);
    assert_converges(&levels, 2e-2);
}

#[test]
fn equivalence_refinement_isltbs() {
    // Δ³ amplifies quadrature noise as h⁻⁶, hence the coarser spatial steps
    let levels = refinement(FieldKind::Isltbs(order(3)), Functional::ScriptUNu(1, 3), 0.25, 1.0 / 512.0);
    assert_converges(&levels, 2e-2);
}

#[test]
fn origin_coefficients_of_iterated_derivatives() {
    let q = TestFunction::Quadratic { d: 1 };
    let ev = Evaluator::new(FieldKind::Isltbs(order(2)), spec(1)).unwrap();
    let u = QuadField::new(&ev, Functional::U, &q);
    let c = u_coefficient_checks(&u, &q, order(2), &[0.0], 1, &[0.3], 1.0, 256).unwrap();
    assert_eq!(c.len(), 1);
    // k/ν = 1/2: both formulas give Δf/2 = 1
    assert!((c[0].display - 1.0).abs() < 1e-12 && (c[0].expansion - 1.0).abs() < 1e-12);
    assert!((c[0].numeric - c[0].display).abs() < 5e-3, "{:?}", c[0]);

    let f = TestFunction::Quartic { d: 1 };
    let ev = Evaluator::new(FieldKind::Isltbs(order(3)), spec(1)).unwrap();
    let u = QuadField::new(&ev, Functional::U, &f);
    let c = u_coefficient_checks(&u, &f, order(3), &[0.0], 1, &[0.3], 1.0, 512).unwrap();
    for uc in &c {
        let kb = uc.k as f64 / 3.0;
        // the display carries an extra Γ(1−kβ)/Γ(kβ)
        assert!((uc.display / uc.expansion - gamma(1.0 - kb) / gamma(kb)).abs() < 1e-12);
        assert!((uc.numeric - uc.expansion).abs() < 2e-2 * uc.expansion.abs(), "{uc:?}");
        assert!((uc.numeric - uc.display).abs() > 0.2 * uc.expansion.abs(), "{uc:?}");
    }
}

#[test]
fn one_parameter_functionals_coincide() {
    let g = TestFunction::Gaussian { d: 1 };
    for (kind, nu) in [(FieldKind::Btbs, None), (FieldKind::Isltbs(order(2)), Some(2)), (FieldKind::Isltbs(order(3)), Some(3))] {
        let ev = Evaluator::new(kind, QuadratureSpec::for_n(1)).unwrap();
        for t in [0.0, 0.3, 1.0, 2.7] {
            for x in [-1.1, 0.0, 0.4] {
                let u = ev.eval(Functional::U, &g, &[t], &[x]).unwrap();
                let mut others = vec![Functional::ScriptU(1), Functional::ScriptV(1)];
                if let Some(nu) = nu {
                    others.push(Functional::ScriptUNu(1, nu));
                }
                for fnl in others {
                    assert!((ev.eval(fnl, &g, &[t], &[x]).unwrap() - u).abs() <= 1e-12);
                }
            }
        }
    }
}

#[test]
fn boundary_rows_on_quadrature_fields() {
    let g = TestFunction::Gaussian { d: 1 };
    let grid2 = grid(vec![axis(0.5, 1.0, 2), axis(0.5, 1.5, 3)], vec![axis(-0.5, 0.5, 3)], 2, 0.1, 0.25);
    let b = Evaluator::new(FieldKind::Btbs, QuadratureSpec::for_n(2)).unwrap();
    let u = QuadField::new(&b, Functional::U, &g);
    let r = residual_fourth_order(&u, &QuadField::new(&b, Functional::ScriptU(2), &g), &g, &grid2).unwrap();
    assert!(!r.checks.is_empty());
    assert!(max_boundary_error(&r) < 1e-5, "{:?}", r.checks);
    let r = residual_fractional(&u, &QuadField::new(&b, Functional::ScriptV(2), &g), &g, FieldKind::Btbs, &grid2).unwrap();
    assert!(max_boundary_error(&r) < 1e-5);
    let kind = FieldKind::Isltbs(order(3));
    let l = Evaluator::new(kind, QuadratureSpec::for_n(2)).unwrap();
    let u = QuadField::new(&l, Functional::U, &g);
    let r = residual_order_2nu(&u, &QuadField::new(&l, Functional::ScriptUNu(2, 3), &g), &g, order(3), &grid2).unwrap();
    assert!(max_boundary_error(&r) < 1e-5, "{:?}", r.checks);
    assert!(r.checks.iter().any(|c| c.name.starts_with("(d) scriptUnu")));
    let r = residual_fractional(&u, &QuadField::new(&l, Functional::ScriptV(2), &g), &g, kind, &grid2).unwrap();
    assert!(max_boundary_error(&r) < 1e-5);
}
