//! Seeded sampling of the clocks, the composed fields and Monte-Carlo means.
//!
//! Generator: ChaCha20 keyed by `seed`, with `stream_id` selecting the
//! ChaCha stream. Monte-Carlo work is split into a fixed number of shards;
//! shard `k` reads the stream from word position `k·2⁶⁴`, so results do not
//! depend on the number of worker threads.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;

use crate::error::{Result, SheetError};
use crate::fractional::FractionalOrder;
use crate::initial_functions::InitialFunction;

/// Fixed shard count for [`mc_mean`].
pub const MC_SHARDS: u64 = 64;

/// `(seed, stream_id)` pair naming a reproducible draw sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Generator for shard `k < 64`: same stream, disjoint block of `2⁶²`
    /// words. The ChaCha word position is 68 bits wide.
    pub fn shard_rng(&self, k: u64) -> ChaCha20Rng {
        debug_assert!(k < 64);
        let mut rng = self.rng();
        rng.set_word_pos((k as u128) << 62);
        rng
    }
}

/// `A(u) = sin(βπu)^{β/(1−β)} sin((1−β)πu) / sin(πu)^{1/(1−β)}`.
fn kanter_a(beta: f64, u: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let b1 = 1.0 - beta;
    (beta * pi * u).sin().powf(beta / b1) * (b1 * pi * u).sin() / (pi * u).sin().powf(1.0 / b1)
}

/// One draw of `L(1)` with `E e^{−sL(1)} = e^{−s^β}` (Kanter's representation).
pub fn sample_stable_l1<R: Rng + ?Sized>(order: FractionalOrder, rng: &mut R) -> f64 {
    let beta = order.beta();
    // u in (0,1): the open interval keeps sin(πu) away from 0.
    let u: f64 = loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            break u;
        }
    };
    let e: f64 = Exp1.sample(rng);
    (kanter_a(beta, u) / e).powf((1.0 - beta) / beta)
}

/// One draw of `Λ(t) = t^β L(1)^{−β}`; exactly 0 at `t = 0`.
pub fn sample_inverse_subordinator<R: Rng + ?Sized>(order: FractionalOrder, t: f64, rng: &mut R) -> f64 {
    let l = sample_stable_l1(order, rng);
    if t == 0.0 {
        return 0.0;
    }
    let beta = order.beta();
    t.powf(beta) * l.powf(-beta)
}

/// Outer clock of a composed field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldKind {
    /// Brownian clocks `|B⁽ⁱ⁾(tᵢ)|`.
    Btbs,
    /// Inverse stable subordinator clocks `Λ⁽ⁱ⁾(tᵢ)`.
    Isltbs(FractionalOrder),
}

impl FieldKind {
    pub fn name(&self) -> &'static str {
        match self {
            FieldKind::Btbs => "btbs",
            FieldKind::Isltbs(_) => "isltbs",
        }
    }

    pub fn order(&self) -> Option<FractionalOrder> {
        match self {
            FieldKind::Btbs => None,
            FieldKind::Isltbs(o) => Some(*o),
        }
    }

    /// One draw of the `i`-th inner time at `t`.
    pub fn sample_clock<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> f64 {
        match self {
            FieldKind::Btbs => {
                let z: f64 = StandardNormal.sample(rng);
                (t.sqrt() * z).abs()
            }
            FieldKind::Isltbs(order) => sample_inverse_subordinator(*order, t, rng),
        }
    }
}

/// One realisation of the sheet at random inner times.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub kind: FieldKind,
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub inner_times: Vec<f64>,
    pub value: Vec<f64>,
}

fn check_times(op: &'static str, t: &[f64]) -> Result<()> {
    if t.is_empty() || t.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(SheetError::domain(op, "t must be a nonempty vector in [0, inf)^n"));
    }
    Ok(())
}

/// Draws the inner times, then `N(x, (∏ inner_times) I_d)`. Returns `x`
/// exactly when some `tᵢ = 0`.
pub fn sample_field<R: Rng + ?Sized>(kind: FieldKind, t: &[f64], x: &[f64], rng: &mut R) -> Result<FieldSample> {
    check_times("sample_field", t)?;
    let inner_times: Vec<f64> = t.iter().map(|&ti| kind.sample_clock(ti, rng)).collect();
    let value = gaussian_at(x, inner_times.iter().product(), rng);
    Ok(FieldSample {
        kind,
        t: t.to_vec(),
        x: x.to_vec(),
        inner_times,
        value,
    })
}

/// One draw of `W^x(s)` for given inner times `s`: `N(x, (∏sᵢ) I_d)`.
pub fn sheet_value<R: Rng + ?Sized>(x: &[f64], inner_times: &[f64], rng: &mut R) -> Vec<f64> {
    gaussian_at(x, inner_times.iter().product(), rng)
}

fn gaussian_at<R: Rng + ?Sized>(x: &[f64], var: f64, rng: &mut R) -> Vec<f64> {
    if var == 0.0 {
        return x.to_vec();
    }
    let sd = var.sqrt();
    x.iter()
        .map(|&xi| {
            let z: f64 = StandardNormal.sample(rng);
            xi + sd * z
        })
        .collect()
}

/// Per-sample weight `∏_{i≠j} sᵢ^p` applied inside the expectation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weight {
    /// `u`
    None,
    /// `∏_{i≠j} sᵢ`: `𝒱⁽ʲ⁾`.
    ProdS,
    /// `∏_{i≠j} sᵢ²`: `𝒰⁽ʲ⁾`.
    ProdSSq,
    /// `∏_{i≠j} sᵢ^ν`: `𝒰_ν⁽ʲ⁾`.
    ProdSNu(u32),
}

impl Weight {
    pub fn power(&self) -> u32 {
        match *self {
            Weight::None => 0,
            Weight::ProdS => 1,
            Weight::ProdSSq => 2,
            Weight::ProdSNu(nu) => nu,
        }
    }

    /// `∏_{i≠j} sᵢ^p` with `j` 1-based.
    pub fn apply(&self, s: &[f64], j: usize) -> f64 {
        let p = self.power() as i32;
        if p == 0 {
            return 1.0;
        }
        s.iter()
            .enumerate()
            .filter(|(i, _)| i + 1 != j)
            .map(|(_, &v)| v.powi(p))
            .product()
    }
}

/// Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: u64,
}

#[derive(Clone, Copy)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn merge(a: Moments, b: Moments) -> Moments {
        if a.n == 0.0 {
            return b;
        }
        if b.n == 0.0 {
            return a;
        }
        let n = a.n + b.n;
        let delta = b.mean - a.mean;
        Moments {
            n,
            mean: a.mean + delta * b.n / n,
            m2: a.m2 + b.m2 + delta * delta * a.n * b.n / n,
        }
    }
}

fn pairwise(parts: &[Moments]) -> Moments {
    match parts.len() {
        0 => Moments { n: 0.0, mean: 0.0, m2: 0.0 },
        1 => parts[0],
        len => {
            let (l, r) = parts.split_at(len / 2);
            Moments::merge(pairwise(l), pairwise(r))
        }
    }
}

/// Mean of `draw(rng)` over `samples` draws, sharded over [`MC_SHARDS`]
/// substreams and reduced pairwise in shard order.
pub fn mc_mean<F>(stream: RngStream, samples: u64, draw: F) -> McEstimate
where
    F: Fn(&mut ChaCha20Rng) -> f64 + Sync,
{
    let shards = MC_SHARDS.min(samples.max(1));
    let parts: Vec<Moments> = (0..shards)
        .into_par_iter()
        .map(|k| {
            let count = samples / shards + u64::from(k < samples % shards);
            let mut rng = stream.shard_rng(k);
            let mut m = Moments { n: 0.0, mean: 0.0, m2: 0.0 };
            for _ in 0..count {
                let v = draw(&mut rng);
                m.n += 1.0;
                let delta = v - m.mean;
                m.mean += delta / m.n;
                m.m2 += delta * (v - m.mean);
            }
            m
        })
        .collect();
    let total = pairwise(&parts);
    let var = if total.n > 1.0 { total.m2 / (total.n - 1.0) } else { 0.0 };
    McEstimate {
        estimate: total.mean,
        std_error: (var / total.n.max(1.0)).sqrt(),
        samples,
    }
}

/// Monte-Carlo estimate of `E[w(s) f(W^x(s))]` at the random inner times `s`,
/// with `w = ∏_{i≠j} sᵢ^p` per `weight` (`j` is 1-based).
#[allow(clippy::too_many_arguments)]
pub fn mc_expectation(
    kind: FieldKind,
    f: &dyn InitialFunction,
    weight: Weight,
    j: usize,
    t: &[f64],
    x: &[f64],
    samples: u64,
    stream: RngStream,
) -> Result<McEstimate> {
    const OP: &str = "mc_expectation";
    check_times(OP, t)?;
    if samples == 0 {
        return Err(SheetError::domain(OP, "need at least one sample"));
    }
    if j == 0 || j > t.len() {
        return Err(SheetError::domain(OP, format!("active index j = {j} outside 1..={}", t.len())));
    }
    if x.len() != f.dim() {
        return Err(SheetError::domain(OP, "x has the wrong dimension for f"));
    }
    Ok(mc_mean(stream, samples, |rng| {
        let s: Vec<f64> = t.iter().map(|&ti| kind.sample_clock(ti, rng)).collect();
        let y = gaussian_at(x, s.iter().product(), rng);
        weight.apply(&s, j) * f.value(&y)
    }))
}

/// Kolmogorov–Smirnov statistic of `samples` against the CDF `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let c = cdf(v);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial_functions::TestFunction;

    #[test]
    fn streams_are_reproducible() {
        let s = RngStream::new(7, 3);
        let a: Vec<f64> = (0..5).map(|_| 0.0).scan(s.rng(), |r, _| Some(r.random::<f64>())).collect();
        let b: Vec<f64> = (0..5).map(|_| 0.0).scan(s.rng(), |r, _| Some(r.random::<f64>())).collect();
        assert_eq!(a, b);
        let c: f64 = RngStream::new(7, 4).rng().random();
        assert_ne!(a[0], c);
        let d: f64 = s.shard_rng(1).random();
        assert_ne!(a[0], d);
    }

    #[test]
    fn inverse_subordinator_at_zero() {
        let mut rng = RngStream::new(1, 0).rng();
        let o = FractionalOrder::from_nu(3).unwrap();
        assert_eq!(sample_inverse_subordinator(o, 0.0, &mut rng), 0.0);
    }

    #[test]
    fn boundary_returns_start_point() {
        let mut rng = RngStream::new(2, 0).rng();
        for kind in [FieldKind::Btbs, FieldKind::Isltbs(FractionalOrder::from_nu(2).unwrap())] {
            for _ in 0..100 {
                let s = sample_field(kind, &[1.3, 0.0], &[0.25, -1.0], &mut rng).unwrap();
                assert_eq!(s.value, vec![0.25, -1.0]);
            }
        }
    }

    #[test]
    fn constant_has_zero_error() {
        let f = TestFunction::Constant { d: 1, c: 1.0 };
        let e = mc_expectation(FieldKind::Btbs, &f, Weight::None, 1, &[1.0], &[0.0], 1000, RngStream::new(0, 0)).unwrap();
        assert_eq!(e.estimate, 1.0);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn half_normal_clock_second_moment() {
        let f = TestFunction::Quadratic { d: 1 };
        let e = mc_expectation(FieldKind::Btbs, &f, Weight::None, 1, &[1.0], &[2.0], 200_000, RngStream::new(11, 0)).unwrap();
        let exact = 4.0 + (2.0 / std::f64::consts::PI).sqrt();
        assert!((e.estimate - exact).abs() < 4.0 * e.std_error, "{e:?}");
    }

    #[test]
    fn weights() {
        assert_eq!(Weight::ProdSSq.apply(&[2.0, 3.0], 1), 9.0);
        assert_eq!(Weight::ProdSNu(3).apply(&[2.0, 3.0], 2), 8.0);
        assert_eq!(Weight::None.apply(&[2.0, 3.0], 2), 1.0);
        assert_eq!(Weight::ProdS.apply(&[2.0], 1), 1.0);
    }
}
