//! Deterministic quadrature for the solution functionals `u`, `𝒰⁽ʲ⁾`,
//! `𝒱⁽ʲ⁾`, `𝒰_ν⁽ʲ⁾`, and closed-form oracles for polynomial data.
//!
//! Every functional has the form `E[w(s) f(W^x(s))]` where `s` holds the
//! independent inner times. Given `s`, `W^x(s) ~ N(x, (∏sᵢ) I_d)`.
//! The outer integral runs over `sᵢ = tᵢ^c wᵢ` (`c = 1/2` for Brownian
//! clocks, `c = β` for inverse-subordinator clocks) so the weight in `wᵢ`
//! does not depend on `t` and the rule is built once.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::csv::{coordinate_header, fmt_f64};
use crate::densities::InverseStableKernel;
use crate::error::{Result, SheetError};
use crate::grid::Axis;
use crate::initial_functions::{Growth, InitialFunction, TestFunction};
use crate::quadrature::{integrate, GaussHermite, GaussLegendre};
use crate::samplers::{FieldKind, Weight};
use crate::special::gamma;

/// Which member of the solution family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Functional {
    U,
    /// `𝒰⁽ʲ⁾`, weight `∏_{i≠j} sᵢ²`.
    ScriptU(usize),
    /// `𝒱⁽ʲ⁾`, weight `∏_{i≠j} sᵢ`.
    ScriptV(usize),
    /// `𝒰_ν⁽ʲ⁾`, weight `∏_{i≠j} sᵢ^ν`.
    ScriptUNu(usize, u32),
}

impl Functional {
    pub fn weight(&self) -> Weight {
        match *self {
            Functional::U => Weight::None,
            Functional::ScriptU(_) => Weight::ProdSSq,
            Functional::ScriptV(_) => Weight::ProdS,
            Functional::ScriptUNu(_, nu) => Weight::ProdSNu(nu),
        }
    }

    /// Active index (1-based); 1 for `u`.
    pub fn j(&self) -> usize {
        match *self {
            Functional::U => 1,
            Functional::ScriptU(j) | Functional::ScriptV(j) | Functional::ScriptUNu(j, _) => j,
        }
    }

    pub fn name(&self) -> String {
        match *self {
            Functional::U => "u".into(),
            Functional::ScriptU(j) => format!("scriptU({j})"),
            Functional::ScriptV(j) => format!("scriptV({j})"),
            Functional::ScriptUNu(j, nu) => format!("scriptUnu({j},{nu})"),
        }
    }
}

/// Quadrature settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Gauss–Hermite nodes per spatial axis for `E f(W^x_s)`.
    pub inner: usize,
    /// Gauss–Legendre nodes per unit-length panel of the outer variable.
    pub outer: usize,
    /// Truncation radius in the outer variable; chosen from the tolerance when `None`.
    pub radius: Option<f64>,
    pub tolerance: f64,
    /// Admit initial functions of polynomial growth.
    pub polynomial_growth: bool,
}

impl QuadratureSpec {
    /// Defaults by parameter count: tolerance `1e-6` for `n = 1`, `1e-5` otherwise.
    pub fn for_n(n: usize) -> Self {
        Self {
            inner: 24,
            outer: 12,
            radius: None,
            tolerance: if n <= 1 { 1e-6 } else { 1e-5 },
            polynomial_growth: false,
        }
    }

    pub fn with_polynomial_growth(mut self, on: bool) -> Self {
        self.polynomial_growth = on;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.inner < 8 || self.outer < 8 {
            return Err(SheetError::domain("QuadratureSpec", "node counts must be at least 8"));
        }
        if !(self.tolerance > 0.0) {
            return Err(SheetError::domain("QuadratureSpec", "tolerance must be positive"));
        }
        Ok(())
    }
}

fn admit(f: &dyn InitialFunction, spec: &QuadratureSpec) -> Result<()> {
    if f.growth() == Growth::Polynomial && !spec.polynomial_growth {
        return Err(SheetError::domain(
            "eval_functional",
            format!("{} has polynomial growth; enable polynomial_growth to admit it", f.name()),
        ));
    }
    Ok(())
}

/// `E f(x + √v Z)` by a tensor Gauss–Hermite rule. The rule is checked
/// against one with twice the nodes; a disagreement above the tolerance is
/// reported as a range error.
pub fn gaussian_expectation(f: &dyn InitialFunction, x: &[f64], variance: f64, spec: &QuadratureSpec) -> Result<f64> {
    const OP: &str = "gaussian_expectation";
    if !(variance >= 0.0) {
        return Err(SheetError::domain(OP, format!("variance = {variance} must be nonnegative")));
    }
    if x.len() != f.dim() {
        return Err(SheetError::domain(OP, "x has the wrong dimension for f"));
    }
    if variance == 0.0 {
        return Ok(f.value(x));
    }
    let (a, b) = match f.radial_support() {
        Some(r) => (
            radial_mean(f, x, variance, r, &GaussLegendre::new(PANEL_NODES)),
            radial_mean(f, x, variance, r, &GaussLegendre::new(2 * PANEL_NODES)),
        ),
        _ => (
            hermite_tensor(f, x, variance, &GaussHermite::new(spec.inner)),
            hermite_tensor(f, x, variance, &GaussHermite::new(2 * spec.inner)),
        ),
    };
    let diff = (a - b).abs();
    if diff > spec.tolerance {
        return Err(SheetError::Range {
            op: OP,
            attained: diff,
            requested: spec.tolerance,
        });
    }
    Ok(b)
}

/// Half-width of the Gaussian window, in standard deviations.
const WINDOW_SD: f64 = 9.0;
/// Gauss–Legendre nodes per panel of the radial rule.
const PANEL_NODES: usize = 8;
const CUSP_RATIO: f64 = 0.15;
const CUSP_LEVELS: usize = 10;

/// `|S^m|`, the area of the unit `m`-sphere.
fn sphere_area(m: usize) -> f64 {
    let h = (m + 1) as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(h) / gamma(h)
}

/// `∫_{S^{d−1}} exp(−κ(1 − ω·e)) dω`.
fn spherical_mean_factor(d: usize, kappa: f64, gl: &GaussLegendre) -> f64 {
    let pi = std::f64::consts::PI;
    match d {
        1 => 1.0 + (-2.0 * kappa).exp(),
        3 if kappa > 1e-8 => 2.0 * pi * -(-2.0 * kappa).exp_m1() / kappa,
        3 => 4.0 * pi,
        _ => {
            let top = if kappa > 0.0 { (10.0 / kappa.sqrt()).min(pi) } else { pi };
            let panels = 8;
            let h = top / panels as f64;
            let mut acc = 0.0;
            for p in 0..panels {
                let (ts, ws) = gl.on_interval(p as f64 * h, (p + 1) as f64 * h);
                for (t, w) in ts.into_iter().zip(ws) {
                    acc += w * (-2.0 * kappa * (0.5 * t).sin().powi(2)).exp() * t.sin().powi(d as i32 - 2);
                }
            }
            sphere_area(d - 2) * acc
        }
    }
}

/// `E f(x + √v Z)` for radial `f` supported in `|y| ≤ radius`, as
/// `∫₀^R f(r) r^{d−1} ∫_{S^{d−1}} φ_v(rω − x) dω dr`. Panels grade
/// geometrically into `r = 0`, where the profile may have a cusp.
fn radial_mean(f: &dyn InitialFunction, x: &[f64], variance: f64, radius: f64, gl: &GaussLegendre) -> f64 {
    let d = x.len();
    let sd = variance.sqrt();
    let rho = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let lo = (rho - WINDOW_SD * sd).max(0.0);
    let hi = (rho + WINDOW_SD * sd).min(radius);
    if lo >= hi {
        return 0.0;
    }
    let width = (1.5 * sd).min(0.125);
    let panels = ((hi - lo) / width).ceil().max(1.0) as usize;
    let h = (hi - lo) / panels as f64;
    let mut edges = Vec::new();
    if lo == 0.0 {
        edges.push(0.0);
        edges.extend((0..=CUSP_LEVELS).rev().map(|k| h * CUSP_RATIO.powi(k as i32)));
        edges.extend((2..=panels).map(|p| p as f64 * h));
    } else {
        edges.extend((0..=panels).map(|p| lo + p as f64 * h));
    }
    let norm = (2.0 * std::f64::consts::PI * variance).powf(-(d as f64) / 2.0);
    let mut y = vec![0.0; d];
    let mut acc = 0.0;
    for e in edges.windows(2) {
        let (rs, ws) = gl.on_interval(e[0], e[1]);
        for (r, w) in rs.into_iter().zip(ws) {
            y[0] = r;
            let g = f.value(&y);
            if g == 0.0 {
                continue;
            }
            let z = (r - rho) / sd;
            acc += w * g * r.powi(d as i32 - 1) * (-0.5 * z * z).exp() * spherical_mean_factor(d, r * rho / variance, gl);
        }
    }
    norm * acc
}

fn hermite_tensor(f: &dyn InitialFunction, x: &[f64], variance: f64, gh: &GaussHermite) -> f64 {
    let d = x.len();
    let m = gh.len();
    let sd = variance.sqrt();
    let mut idx = vec![0usize; d];
    let mut y = vec![0.0; d];
    let mut acc = 0.0;
    loop {
        let mut w = 1.0;
        for k in 0..d {
            y[k] = x[k] + sd * gh.nodes[idx[k]];
            w *= gh.weights[idx[k]];
        }
        acc += w * f.value(&y);
        let mut k = 0;
        loop {
            if k == d {
                return acc;
            }
            idx[k] += 1;
            if idx[k] < m {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// One-dimensional outer rule in the scale-free variable `w`.
#[derive(Debug, Clone)]
struct OuterRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `t ↦ s` exponent.
    scale_power: f64,
    /// Probability mass beyond the radius.
    neglected_mass: f64,
}

fn unit_clock_density(kind: &FieldKind, kernel: Option<&InverseStableKernel>, w: f64) -> f64 {
    match kind {
        FieldKind::Btbs => (2.0 / std::f64::consts::PI).sqrt() * (-0.5 * w * w).exp(),
        FieldKind::Isltbs(_) => kernel.expect("kernel").density_scaled(1.0, w).unwrap_or(0.0),
    }
}

impl OuterRule {
    fn new(kind: FieldKind, spec: &QuadratureSpec) -> Result<Self> {
        const OP: &str = "eval_functional";
        let kernel = kind.order().map(|o| InverseStableKernel::with_tolerance(o, 1e-13));
        let p = |w: f64| unit_clock_density(&kind, kernel.as_ref(), w);
        let tail = |r: f64| integrate(OP, &p, r, r + 60.0, 1e-16).map(|v| v.0.max(0.0));
        let radius = match spec.radius {
            Some(r) => r,
            None => {
                // Polynomially weighted tail must be negligible too.
                let mut r = 4.0;
                while p(r) * (1.0 + r).powi(12) > spec.tolerance * 1e-6 && r < 200.0 {
                    r += 1.0;
                }
                r
            }
        };
        let neglected_mass = tail(radius)?;
        if neglected_mass > spec.tolerance / 10.0 {
            return Err(SheetError::Range {
                op: OP,
                attained: neglected_mass,
                requested: spec.tolerance / 10.0,
            });
        }
        let gl = GaussLegendre::new(spec.outer);
        let panels = radius.ceil() as usize;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for k in 0..panels {
            let (a, b) = (k as f64 * radius / panels as f64, (k + 1) as f64 * radius / panels as f64);
            let (xs, ws) = gl.on_interval(a, b);
            for (x, w) in xs.into_iter().zip(ws) {
                let v = w * p(x);
                if v > 0.0 {
                    nodes.push(x);
                    weights.push(v);
                }
            }
        }
        Ok(Self {
            nodes,
            weights,
            scale_power: match kind {
                FieldKind::Btbs => 0.5,
                FieldKind::Isltbs(o) => o.beta(),
            },
            neglected_mass,
        })
    }
}

/// Chebyshev points per panel of [`InnerTable`].
const TABLE_NODES: usize = 12;
const TABLE_DEPTH: u32 = 24;

/// Piecewise Chebyshev interpolant of `v ↦ E f(x + √v Z)` in `log v`,
/// refined until off-node checks agree to the requested tolerance.
struct InnerTable {
    panels: Vec<(f64, f64, Vec<f64>)>,
}

impl InnerTable {
    fn build<G: Fn(f64) -> f64>(g: &G, vmin: f64, vmax: f64, tol: f64) -> Self {
        let mut panels = Vec::new();
        let (a, b) = (vmin.ln(), vmax.ln().max(vmin.ln() + 1e-9));
        let step = 2.0;
        let count = ((b - a) / step).ceil().max(1.0) as usize;
        let h = (b - a) / count as f64;
        for k in 0..count {
            Self::refine(g, a + k as f64 * h, a + (k + 1) as f64 * h, tol, 0, &mut panels);
        }
        Self { panels }
    }

    fn node(a: f64, b: f64, k: usize) -> f64 {
        let c = (k as f64 * std::f64::consts::PI / (TABLE_NODES - 1) as f64).cos();
        0.5 * (a + b) + 0.5 * (b - a) * c
    }

    fn refine<G: Fn(f64) -> f64>(g: &G, a: f64, b: f64, tol: f64, depth: u32, out: &mut Vec<(f64, f64, Vec<f64>)>) {
        let values: Vec<f64> = (0..TABLE_NODES).map(|k| g(Self::node(a, b, k).exp())).collect();
        let ok = depth >= TABLE_DEPTH
            || [-0.83, -0.41, 0.07, 0.52, 0.91].iter().all(|&c| {
                let u = 0.5 * (a + b) + 0.5 * (b - a) * c;
                (Self::interpolate(a, b, &values, u) - g(u.exp())).abs() <= tol
            });
        if ok {
            out.push((a, b, values));
        } else {
            let m = 0.5 * (a + b);
            Self::refine(g, a, m, tol, depth + 1, out);
            Self::refine(g, m, b, tol, depth + 1, out);
        }
    }

    /// Barycentric formula on Chebyshev points of the second kind.
    fn interpolate(a: f64, b: f64, values: &[f64], u: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (k, &fk) in values.iter().enumerate() {
            let xk = Self::node(a, b, k);
            let diff = u - xk;
            if diff == 0.0 {
                return fk;
            }
            let mut w = if k % 2 == 0 { 1.0 } else { -1.0 };
            if k == 0 || k == TABLE_NODES - 1 {
                w *= 0.5;
            }
            num += w * fk / diff;
            den += w / diff;
        }
        num / den
    }

    fn eval(&self, v: f64) -> f64 {
        let u = v.ln();
        let i = self.panels.partition_point(|p| p.1 < u).min(self.panels.len() - 1);
        let (a, b, values) = &self.panels[i];
        Self::interpolate(*a, *b, values, u)
    }
}

/// Evaluates functionals for one clock kind with the outer rule built once.
#[derive(Debug, Clone)]
pub struct Evaluator {
    kind: FieldKind,
    spec: QuadratureSpec,
    outer: OuterRule,
    hermite: GaussHermite,
    legendre: GaussLegendre,
}

impl Evaluator {
    pub fn new(kind: FieldKind, spec: QuadratureSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            kind,
            outer: OuterRule::new(kind, &spec)?,
            hermite: GaussHermite::new(spec.inner),
            legendre: GaussLegendre::new(PANEL_NODES),
            spec,
        })
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn spec(&self) -> &QuadratureSpec {
        &self.spec
    }

    /// Kernel mass beyond the truncation radius (per axis).
    pub fn neglected_mass(&self) -> f64 {
        self.outer.neglected_mass
    }

    fn inner_mean(&self, f: &dyn InitialFunction, x: &[f64], v: f64) -> f64 {
        if v == 0.0 {
            return f.value(x);
        }
        if let Some(m) = f.heat_mean(x, v) {
            return m;
        }
        match f.radial_support() {
            Some(r) => radial_mean(f, x, v, r, &self.legendre),
            _ => hermite_tensor(f, x, v, &self.hermite),
        }
    }

    /// `E[w(s) f(W^x(s))]` at one point.
    pub fn eval(&self, functional: Functional, f: &dyn InitialFunction, t: &[f64], x: &[f64]) -> Result<f64> {
        const OP: &str = "eval_functional";
        admit(f, &self.spec)?;
        let n = t.len();
        if n == 0 || t.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(SheetError::domain(OP, "t must be a nonempty vector in [0, inf)^n"));
        }
        let j = functional.j();
        if j == 0 || j > n {
            return Err(SheetError::domain(OP, format!("active index j = {j} outside 1..={n}")));
        }
        if x.len() != f.dim() {
            return Err(SheetError::domain(OP, "x has the wrong dimension for f"));
        }
        if let Functional::ScriptUNu(_, nu) = functional {
            match self.kind.order().and_then(|o| o.nu()) {
                Some(k) if k == nu => {}
                _ => return Err(SheetError::domain(OP, format!("scriptUnu needs an inverse-subordinator clock with beta = 1/{nu}"))),
            }
        }
        if functional == Functional::U && t.contains(&0.0) {
            return Ok(f.value(x));
        }
        let weight = functional.weight();
        // Per-axis (node, weight) lists; a zero time collapses to s = 0.
        let axes: Vec<Vec<(f64, f64)>> = t
            .iter()
            .map(|&ti| {
                if ti == 0.0 {
                    vec![(0.0, 1.0)]
                } else {
                    let scale = ti.powf(self.outer.scale_power);
                    self.outer.nodes.iter().zip(&self.outer.weights).map(|(&w, &q)| (scale * w, q)).collect()
                }
            })
            .collect();
        // Without a closed-form heat mean, n ≥ 2 tabulates the inner mean
        // in v = ∏sᵢ once instead of at every outer node.
        let extent = |pick: fn(f64, f64) -> f64| -> f64 { axes.iter().map(|a| a.iter().map(|p| p.0).fold(a[0].0, pick)).product() };
        let (vmin, vmax) = (extent(f64::min), extent(f64::max));
        let table = (n >= 2 && vmin > 0.0 && f.heat_mean(x, 1.0).is_none())
            .then(|| InnerTable::build(&|v| self.inner_mean(f, x, v), vmin, vmax, 1e-3 * self.spec.tolerance));
        let mut idx = vec![0usize; n];
        let mut s = vec![0.0; n];
        let mut acc = 0.0;
        loop {
            let mut q = 1.0;
            for i in 0..n {
                let (si, qi) = axes[i][idx[i]];
                s[i] = si;
                q *= qi;
            }
            let w = weight.apply(&s, j);
            if w != 0.0 {
                let v = s.iter().product();
                let mean = match &table {
                    Some(tb) => tb.eval(v),
                    None => self.inner_mean(f, x, v),
                };
                acc += q * w * mean;
            }
            let mut i = 0;
            loop {
                if i == n {
                    return Ok(acc);
                }
                idx[i] += 1;
                if idx[i] < axes[i].len() {
                    break;
                }
                idx[i] = 0;
                i += 1;
            }
        }
    }
}

/// One-off evaluation; builds the outer rule on every call.
pub fn eval_functional(
    functional: Functional,
    kind: FieldKind,
    f: &dyn InitialFunction,
    t: &[f64],
    x: &[f64],
    spec: QuadratureSpec,
) -> Result<f64> {
    Evaluator::new(kind, spec)?.eval(functional, f, t, x)
}

/// `E[s^p]` for one inner time at parameter `t`, `p` a nonnegative integer.
pub fn clock_moment(kind: FieldKind, t: f64, p: u32) -> f64 {
    if p == 0 {
        return 1.0;
    }
    let p = p as f64;
    match kind {
        // E|√t Z|^p = t^{p/2} 2^{p/2} Γ((p+1)/2)/√π
        FieldKind::Btbs => t.powf(p / 2.0) * 2f64.powf(p / 2.0) * gamma((p + 1.0) / 2.0) / std::f64::consts::PI.sqrt(),
        // E Λ(t)^p = t^{pβ} Γ(1+p)/Γ(1+pβ)
        FieldKind::Isltbs(o) => {
            let b = o.beta();
            t.powf(p * b) * gamma(1.0 + p) / gamma(1.0 + p * b)
        }
    }
}

/// Closed form for `QUADRATIC` and `QUARTIC` data.
pub fn oracle_polynomial(functional: Functional, kind: FieldKind, f: &TestFunction, t: &[f64], x: &[f64]) -> Result<f64> {
    const OP: &str = "oracle_polynomial";
    let j = functional.j();
    if t.is_empty() || j == 0 || j > t.len() {
        return Err(SheetError::domain(OP, "bad time vector or active index"));
    }
    let p = functional.weight().power();
    // E[w(s) v^m], v = ∏ sᵢ
    let wv = |m: u32| -> f64 {
        t.iter()
            .enumerate()
            .map(|(i, &ti)| clock_moment(kind, ti, m + if i + 1 == j { 0 } else { p }))
            .product()
    };
    match f {
        TestFunction::Quadratic { d } if *d == x.len() => Ok(x.iter().map(|y| y * y * wv(0) + wv(1)).sum()),
        TestFunction::Quartic { d } if *d == x.len() => {
            Ok(x.iter().map(|y| y.powi(4) * wv(0) + 6.0 * y * y * wv(1) + 3.0 * wv(2)).sum())
        }
        TestFunction::Quadratic { .. } | TestFunction::Quartic { .. } => Err(SheetError::domain(OP, "x has the wrong dimension for f")),
        other => Err(SheetError::domain(OP, format!("no closed form for {}", other.name()))),
    }
}

/// A functional sampled on a `(t, x)` lattice. Values are stored with the
/// first time axis varying slowest and the last spatial axis fastest.
#[derive(Debug, Clone)]
pub struct SolutionField {
    pub functional: Functional,
    pub kind: FieldKind,
    pub t_axes: Vec<Axis>,
    pub x_axes: Vec<Axis>,
    pub values: Vec<f64>,
}

/// All lattice points of the given axes, last axis fastest.
pub fn lattice_points(axes: &[Axis]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for a in axes {
        let vals = a.values();
        out = out
            .into_iter()
            .flat_map(|p| {
                vals.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

impl SolutionField {
    /// Evaluates the functional at every lattice point (in parallel).
    pub fn compute(
        evaluator: &Evaluator,
        functional: Functional,
        f: &dyn InitialFunction,
        t_axes: Vec<Axis>,
        x_axes: Vec<Axis>,
    ) -> Result<Self> {
        let ts = lattice_points(&t_axes);
        let xs = lattice_points(&x_axes);
        let pairs: Vec<(&Vec<f64>, &Vec<f64>)> = ts.iter().flat_map(|t| xs.iter().map(move |x| (t, x))).collect();
        let values = pairs
            .par_iter()
            .map(|(t, x)| evaluator.eval(functional, f, t, x))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self {
            functional,
            kind: evaluator.kind(),
            t_axes,
            x_axes,
            values,
        })
    }

    /// CSV with header `t1,...,tn,x1,...,xd,value`, preceded by `comment`
    /// lines when given.
    pub fn write_csv<W: Write>(&self, mut w: W, comment: Option<&str>) -> io::Result<()> {
        if let Some(c) = comment {
            writeln!(w, "{c}")?;
        }
        writeln!(w, "{},value", coordinate_header(self.t_axes.len(), self.x_axes.len()))?;
        let ts = lattice_points(&self.t_axes);
        let xs = lattice_points(&self.x_axes);
        let mut k = 0;
        for t in &ts {
            for x in &xs {
                let row: Vec<String> = t.iter().chain(x).chain(std::iter::once(&self.values[k])).map(|&v| fmt_f64(v)).collect();
                writeln!(w, "{}", row.join(","))?;
                k += 1;
            }
        }
        Ok(())
    }
}
