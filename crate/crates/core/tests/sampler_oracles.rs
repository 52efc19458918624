//! Sampler distributions against closed-form oracles.

use rand::Rng;
use sheetlab::initial_functions::TestFunction;
use sheetlab::samplers::{
    ks_statistic, mc_expectation, mc_mean, sample_field, sample_inverse_subordinator, sample_stable_l1, sheet_value,
    FieldKind, RngStream, Weight, MC_SHARDS,
};
use sheetlab::FractionalOrder;
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

fn order(nu: u32) -> FractionalOrder {
    FractionalOrder::from_nu(nu).unwrap()
}

#[test]
fn laplace_transform_of_stable_draws() {
    for nu in [2u32, 3] {
        let beta = 1.0 / nu as f64;
        for (i, &s) in [0.5f64, 1.0, 2.0].iter().enumerate() {
            let o = order(nu);
            let est = mc_mean(RngStream::new(7, nu as u64 * 10 + i as u64), 1_000_000, |rng| {
                (-s * sample_stable_l1(o, rng)).exp()
            });
            let exact = (-s.powf(beta)).exp();
            assert!(
                (est.estimate - exact).abs() < 3.0 * est.std_error,
                "nu={nu} s={s}: {} ± {} vs {exact}",
                est.estimate,
                est.std_error
            );
        }
    }
}

#[test]
fn half_order_law_is_one_over_two_z_squared() {
    let mut rng = RngStream::new(11, 0).rng();
    let mut draws: Vec<f64> = (0..1_000_000).map(|_| sample_stable_l1(order(2), &mut rng)).collect();
    // P(1/(2Z²) ≤ y) = P(|Z| ≥ 1/√(2y)) = erfc(1/(2√y))
    let ks = ks_statistic(&mut draws, |y| if y > 0.0 { erfc(0.5 / y.sqrt()) } else { 0.0 });
    assert!(ks < 0.002, "KS = {ks}");
    // 1/(4Z²) is a different law and must be rejected
    let ks_quarter = ks_statistic(&mut draws, |y| if y > 0.0 { erfc(1.0 / (8.0 * y).sqrt()) } else { 0.0 });
    assert!(ks_quarter > 0.1, "KS = {ks_quarter}");
}

#[test]
fn inverse_subordinator_means() {
    let cases = [(2u32, 1.0f64, 2.0 / PI.sqrt()), (3, 8.0, 6.0 / gamma(1.0 / 3.0)), (4, 0.3, 0.3f64.powf(0.25) / gamma(1.25))];
    for (i, &(nu, t, exact)) in cases.iter().enumerate() {
        let o = order(nu);
        let est = mc_mean(RngStream::new(5, i as u64), 400_000, |rng| sample_inverse_subordinator(o, t, rng));
        assert!((est.estimate - exact).abs() < 3.0 * est.std_error, "nu={nu} t={t}");
    }
    let mut rng = RngStream::new(5, 9).rng();
    assert_eq!(sample_inverse_subordinator(order(3), 0.0, &mut rng), 0.0);
}

#[test]
fn field_returns_start_point_on_the_boundary() {
    let mut rng = RngStream::new(3, 3).rng();
    let x = [0.25, -1.5];
    for kind in [FieldKind::Btbs, FieldKind::Isltbs(order(3))] {
        for _ in 0..10_000 {
            let s = sample_field(kind, &[1.3, 0.0, 2.0], &x, &mut rng).unwrap();
            assert_eq!(s.value, x.to_vec());
            assert_eq!(s.inner_times[1], 0.0);
        }
    }
    assert!(sample_field(FieldKind::Btbs, &[-1.0], &[0.0], &mut rng).is_err());
}

#[test]
fn conditional_law_is_gaussian_with_product_variance() {
    let mut rng = RngStream::new(13, 1).rng();
    let s = [0.7, 1.3, 0.45];
    let x = [1.0, -2.0];
    let var = s.iter().product::<f64>();
    let n = 100_000;
    let mut sum = [0.0; 2];
    let mut sq = [0.0; 2];
    for _ in 0..n {
        let y = sheet_value(&x, &s, &mut rng);
        for k in 0..2 {
            sum[k] += y[k] - x[k];
            sq[k] += (y[k] - x[k]).powi(2);
        }
    }
    for k in 0..2 {
        let mean = sum[k] / n as f64;
        let v = sq[k] / n as f64 - mean * mean;
        assert!(mean.abs() < 4.0 * (var / n as f64).sqrt());
        assert!((v / var - 1.0).abs() < 0.05, "coordinate {k}: {v} vs {var}");
    }
}

#[test]
fn quadratic_field_means() {
    let q = TestFunction::Quadratic { d: 1 };
    let cases = [
        (FieldKind::Btbs, vec![1.0], 0.0, (2.0 / PI).sqrt()),
        (FieldKind::Btbs, vec![1.0], 2.0, 4.0 + (2.0 / PI).sqrt()),
        (FieldKind::Btbs, vec![1.0, 1.0], 0.0, 2.0 / PI),
        (FieldKind::Isltbs(order(2)), vec![1.0], 0.0, 2.0 / PI.sqrt()),
    ];
    for (i, (kind, t, x, exact)) in cases.into_iter().enumerate() {
        let est = mc_expectation(kind, &q, Weight::None, 1, &t, &[x], 1_000_000, RngStream::new(19, i as u64)).unwrap();
        assert!((est.estimate - exact).abs() < 3.0 * est.std_error, "case {i}: {} vs {exact}", est.estimate);
    }
}

#[test]
fn estimates_do_not_depend_on_thread_count() {
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            mc_expectation(
                FieldKind::Isltbs(order(3)),
                &TestFunction::Quartic { d: 2 },
                Weight::ProdS,
                2,
                &[0.5, 1.5],
                &[0.1, 0.2],
                50_000,
                RngStream::new(42, 7),
            )
            .unwrap()
        })
    };
    let a = run(1);
    let b = run(8);
    assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
    assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
}

#[test]
fn shards_draw_distinct_sequences() {
    let stream = RngStream::new(1, 2);
    let mut first: Vec<u64> = (0..MC_SHARDS).map(|k| stream.shard_rng(k).random()).collect();
    first.sort_unstable();
    first.dedup();
    assert_eq!(first.len() as u64, MC_SHARDS);
}
