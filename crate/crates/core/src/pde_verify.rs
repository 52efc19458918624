//! Finite-difference residuals of the interacting PDE systems satisfied by
//! the solution functionals, and of the conditions linking them.
//!
//! Fields are sampled pointwise: spatial operators use `(2k+1)`-point
//! stencils centred on each lattice point, time derivatives use `τ`-steps
//! in the active coordinate `t_j`, and Caputo derivatives are taken along
//! the whole `t_j`-line from 0.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Result, SheetError};
use crate::fractional::{caputo_l1_corrected, iterated_caputo, power_exponents, FractionalOrder, TimeGrid};
use crate::grid::Axis;
use crate::initial_functions::InitialFunction;
use crate::moments::{profile_m, profile_n};
use crate::report::{Check, ResidualPoint, ResidualReport, SystemKind};
use crate::samplers::FieldKind;
use crate::scalar::Real;
use crate::solutions::{lattice_points, Evaluator, Functional};
use crate::special::{factorial, gamma};

/// Coefficient of `Δ_x 𝒱⁽ʲ⁾` in the half-derivative system of Brownian clocks: `1/√8`.
pub const BTBS_FRACTIONAL_COEF: f64 = 0.353_553_390_593_273_8;
/// Coefficient of `Δ_x 𝒱⁽ʲ⁾` in the `β`-derivative system of inverse-subordinator clocks.
pub const ISLTBS_FRACTIONAL_COEF: f64 = 0.5;

/// A scalar field `(t, x) ↦ value`.
pub trait Field: Sync {
    fn at(&self, t: &[f64], x: &[f64]) -> Result<f64>;
}

impl<F> Field for F
where
    F: Fn(&[f64], &[f64]) -> Result<f64> + Sync,
{
    fn at(&self, t: &[f64], x: &[f64]) -> Result<f64> {
        self(t, x)
    }
}

/// A solution functional evaluated by quadrature.
pub struct QuadField<'a> {
    pub evaluator: &'a Evaluator,
    pub functional: Functional,
    pub f: &'a dyn InitialFunction,
}

impl<'a> QuadField<'a> {
    pub fn new(evaluator: &'a Evaluator, functional: Functional, f: &'a dyn InitialFunction) -> Self {
        Self { evaluator, functional, f }
    }
}

impl Field for QuadField<'_> {
    fn at(&self, t: &[f64], x: &[f64]) -> Result<f64> {
        self.evaluator.eval(self.functional, self.f, t, x)
    }
}

/// Spatial step `h` and time step `τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StencilSpec {
    pub h: f64,
    pub tau: f64,
}

impl StencilSpec {
    pub fn new(h: f64, tau: f64) -> Result<Self> {
        if !(h > 0.0 && tau > 0.0 && h.is_finite() && tau.is_finite()) {
            return Err(SheetError::grid("StencilSpec", format!("need h, tau > 0; got h={h}, tau={tau}")));
        }
        Ok(Self { h, tau })
    }
}

/// Lattice on which a residual is sampled.
#[derive(Debug, Clone)]
pub struct ResidualGrid {
    /// One axis per time coordinate; the `t_j` axis must stay positive.
    pub t_axes: Vec<Axis>,
    pub x_axes: Vec<Axis>,
    /// Active index, 1-based.
    pub j: usize,
    pub stencil: StencilSpec,
    pub keep_points: bool,
}

impl ResidualGrid {
    pub fn new(t_axes: Vec<Axis>, x_axes: Vec<Axis>, j: usize, stencil: StencilSpec) -> Self {
        Self {
            t_axes,
            x_axes,
            j,
            stencil,
            keep_points: false,
        }
    }

    pub fn keep_points(mut self, on: bool) -> Self {
        self.keep_points = on;
        self
    }

    pub fn n(&self) -> usize {
        self.t_axes.len()
    }

    pub fn describe(&self) -> String {
        let t: Vec<String> = self.t_axes.iter().map(Axis::describe).collect();
        let x: Vec<String> = self.x_axes.iter().map(Axis::describe).collect();
        format!("t={} x={} h={} tau={}", t.join("*"), x.join("*"), self.stencil.h, self.stencil.tau)
    }

    fn validate(&self, op: &'static str, f: &dyn InitialFunction) -> Result<()> {
        let n = self.n();
        if n == 0 || self.j == 0 || self.j > n {
            return Err(SheetError::grid(op, format!("active index j = {} outside 1..={n}", self.j)));
        }
        if self.x_axes.len() != f.dim() {
            return Err(SheetError::grid(
                op,
                format!("{} spatial axes for a {}-dimensional f", self.x_axes.len(), f.dim()),
            ));
        }
        if self.t_axes.iter().any(|a| a.start < 0.0) {
            return Err(SheetError::grid(op, "time axes must lie in [0, inf)"));
        }
        if !(self.t_axes[self.j - 1].start > 0.0) {
            return Err(SheetError::grid(op, "the active time axis must start above 0"));
        }
        Ok(())
    }

    fn x_points(&self) -> Vec<Vec<f64>> {
        lattice_points(&self.x_axes)
    }

    /// Lattice of the non-active time coordinates, as full vectors with
    /// `t_j` left at 0.
    fn other_times(&self) -> Vec<Vec<f64>> {
        let mut axes = self.t_axes.clone();
        axes[self.j - 1] = Axis::point(0.0);
        lattice_points(&axes)
    }

    fn active_axis(&self) -> &Axis {
        &self.t_axes[self.j - 1]
    }
}

/// Offsets and coefficients of the `k`-fold second-order Laplacian in
/// `d` dimensions, without the `h^{−2k}` factor.
pub fn laplacian_stencil<T: Real>(d: usize, k: u32) -> Vec<(Vec<i32>, T)> {
    let mut acc: BTreeMap<Vec<i32>, T> = BTreeMap::new();
    acc.insert(vec![0; d], T::one());
    let two = T::c(2.0);
    for _ in 0..k {
        let mut next: BTreeMap<Vec<i32>, T> = BTreeMap::new();
        for (off, c) in &acc {
            for axis in 0..d {
                for (shift, w) in [(-1, T::one()), (0, -two), (1, T::one())] {
                    let mut o = off.clone();
                    o[axis] += shift;
                    let e = next.entry(o).or_insert_with(T::zero);
                    *e = *e + *c * w;
                }
            }
        }
        next.retain(|_, c| *c != T::zero());
        acc = next;
    }
    acc.into_iter().collect()
}

/// `Δ_hᵏ` of lattice values (last axis fastest). Returns the values on the
/// interior lattice, which loses `k` points at each end of every axis, and
/// its shape.
pub fn fd_laplacian_power<T: Real>(values: &[T], shape: &[usize], h: T, k: u32) -> Result<(Vec<T>, Vec<usize>)> {
    const OP: &str = "fd_laplacian_power";
    if shape.is_empty() || values.len() != shape.iter().product::<usize>() {
        return Err(SheetError::grid(OP, "values do not match the lattice shape"));
    }
    if !(h > T::zero()) {
        return Err(SheetError::grid(OP, "h must be positive"));
    }
    let margin = k as usize;
    if shape.iter().any(|&s| s < 2 * margin + 1) {
        return Err(SheetError::grid(
            OP,
            format!("lattice {shape:?} has no interior for a margin of {margin} points"),
        ));
    }
    let d = shape.len();
    let stencil = laplacian_stencil::<T>(d, k);
    let out_shape: Vec<usize> = shape.iter().map(|&s| s - 2 * margin).collect();
    let mut strides = vec![1usize; d];
    for a in (0..d - 1).rev() {
        strides[a] = strides[a + 1] * shape[a + 1];
    }
    let scale = h.powi(-2 * k as i32);
    let total: usize = out_shape.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; d];
    for _ in 0..total {
        let centre: usize = (0..d).map(|a| (idx[a] + margin) * strides[a]).sum();
        let mut acc = T::zero();
        for (off, c) in &stencil {
            let mut flat = 0usize;
            for a in 0..d {
                flat += (idx[a] + margin).wrapping_add_signed(off[a] as isize) * strides[a];
            }
            acc = acc + *c * (values[flat] - values[centre]);
        }
        out.push(acc * scale);
        for a in (0..d).rev() {
            idx[a] += 1;
            if idx[a] < out_shape[a] {
                break;
            }
            idx[a] = 0;
        }
    }
    Ok((out, out_shape))
}

/// `Δ_hᵏ` of a field at one point.
pub fn laplacian_power_at(field: &dyn Field, t: &[f64], x: &[f64], h: f64, k: u32) -> Result<f64> {
    if k == 0 {
        return field.at(t, x);
    }
    let stencil = laplacian_stencil::<f64>(x.len(), k);
    // differences from the centre keep constant data exactly at 0
    let centre = field.at(t, x)?;
    let mut y = x.to_vec();
    let mut acc = 0.0;
    for (off, c) in &stencil {
        if off.iter().all(|&o| o == 0) {
            continue;
        }
        for (a, o) in off.iter().enumerate() {
            y[a] = x[a] + *o as f64 * h;
        }
        acc += c * (field.at(t, &y)? - centre);
    }
    Ok(acc * h.powi(-2 * k as i32))
}

/// `√(∏_{i≠j} tᵢ / (2^{4−n} t_j πⁿ))`, the weight of `Δf` in the fourth-order system.
pub fn drift_coefficient(t: &[f64], j: usize) -> f64 {
    let n = t.len() as i32;
    let others: f64 = t.iter().enumerate().filter(|(i, _)| i + 1 != j).map(|(_, &v)| v).product();
    (others / (2f64.powi(4 - n) * t[j - 1] * std::f64::consts::PI.powi(n))).sqrt()
}

/// `∂_{t_j}` by central differences, or a second-order forward stencil when
/// `t_j − τ` would leave the domain.
fn time_derivative(u: &dyn Field, t: &[f64], j: usize, x: &[f64], tau: f64) -> Result<f64> {
    let mut s = t.to_vec();
    let tj = t[j - 1];
    if tj - tau > 0.0 {
        s[j - 1] = tj + tau;
        let up = u.at(&s, x)?;
        s[j - 1] = tj - tau;
        let dn = u.at(&s, x)?;
        Ok((up - dn) / (2.0 * tau))
    } else {
        let u0 = u.at(&s, x)?;
        s[j - 1] = tj + tau;
        let u1 = u.at(&s, x)?;
        s[j - 1] = tj + 2.0 * tau;
        let u2 = u.at(&s, x)?;
        Ok((-3.0 * u0 + 4.0 * u1 - u2) / (2.0 * tau))
    }
}

fn with_active(t: &[f64], j: usize, v: f64) -> Vec<f64> {
    let mut s = t.to_vec();
    s[j - 1] = v;
    s
}

/// Uniform `τ`-grid on `[0, t_end]` and the grid index of every active-axis sample.
fn line_grid(op: &'static str, axis: &Axis, tau: f64) -> Result<(TimeGrid, Vec<usize>)> {
    let steps = (axis.end / tau).round();
    if steps < 3.0 || ((steps * tau - axis.end) / tau).abs() > 1e-6 {
        return Err(SheetError::grid(op, format!("t_j end {} is not a multiple of tau = {tau}", axis.end)));
    }
    let grid = TimeGrid::uniform(axis.end, steps as usize)?;
    let idx = axis
        .values()
        .into_iter()
        .map(|t| {
            let k = (t / tau).round();
            if ((k * tau - t) / tau).abs() > 1e-6 {
                Err(SheetError::grid(op, format!("t_j sample {t} is not on the tau-grid")))
            } else {
                Ok(k as usize)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((grid, idx))
}

/// Field values along the `t_j`-line through `t` at `x`.
fn line_values(field: &dyn Field, t: &[f64], j: usize, x: &[f64], grid: &TimeGrid) -> Result<Vec<f64>> {
    let mut s = t.to_vec();
    grid.points()
        .iter()
        .map(|&v| {
            s[j - 1] = v;
            field.at(&s, x)
        })
        .collect()
}

/// Clock exponent `c` (inner time scales as `t^c`) and fractional order.
fn clock_scale(kind: FieldKind) -> f64 {
    match kind {
        FieldKind::Btbs => 0.5,
        FieldKind::Isltbs(o) => o.beta(),
    }
}

/// Caputo derivative of order `c` along a line with starting weights for `t^{mc}`.
fn line_caputo(values: &[f64], grid: &TimeGrid, c: f64) -> Result<Vec<f64>> {
    Ok(caputo_l1_corrected(values, grid, c, &power_exponents(c, 6))?.values)
}

/// Which boundary face a check row lives on.
#[derive(Debug, Clone, Copy)]
enum Face {
    /// `t_j = 0`.
    Active,
    /// `tᵢ = 0` for a non-active `i` (0-based).
    Other(usize),
}

struct Row<'a> {
    label: &'a str,
    field: &'a dyn Field,
    face: Face,
    expected: &'a (dyn Fn(&[f64], &[f64]) -> f64 + Sync),
}

fn boundary_checks(grid: &ResidualGrid, rows: &[Row<'_>]) -> Result<Vec<Check>> {
    let xs = grid.x_points();
    let mut out = Vec::new();
    for row in rows {
        let mut axes = grid.t_axes.clone();
        match row.face {
            Face::Active => axes[grid.j - 1] = Axis::point(0.0),
            Face::Other(i) => axes[i] = Axis::point(0.0),
        }
        let ts = lattice_points(&axes);
        let pairs: Vec<(&Vec<f64>, &Vec<f64>)> = ts.iter().flat_map(|t| xs.iter().map(move |x| (t, x))).collect();
        let checks = pairs
            .par_iter()
            .map(|(t, x)| {
                Ok(Check::new(
                    format!("{} t={t:?} x={x:?}", row.label),
                    row.field.at(t, x)?,
                    (row.expected)(t, x),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        out.extend(checks);
    }
    Ok(out)
}

fn prod_others(t: &[f64], j: usize, g: impl Fn(f64) -> f64) -> f64 {
    t.iter().enumerate().filter(|(i, _)| i + 1 != j).map(|(_, &v)| g(v)).product()
}

fn other_indices(grid: &ResidualGrid) -> impl Iterator<Item = usize> + '_ {
    (0..grid.n()).filter(move |&i| i + 1 != grid.j)
}

/// Residual of `∂_{t_j}u = drift·Δf + ⅛Δ²𝒰⁽ʲ⁾` with boundary rows
/// `u = f` on the boundary, `𝒰⁽ʲ⁾ = 0` when another `tᵢ = 0`, and
/// `𝒰⁽ʲ⁾ = ∏_{i≠j}tᵢ f` at `t_j = 0`.
pub fn residual_fourth_order(
    u: &dyn Field,
    script_u: &dyn Field,
    f: &dyn InitialFunction,
    grid: &ResidualGrid,
) -> Result<ResidualReport> {
    const OP: &str = "residual_fourth_order";
    grid.validate(OP, f)?;
    let (h, tau, j) = (grid.stencil.h, grid.stencil.tau, grid.j);
    let ts = lattice_points(&grid.t_axes);
    let xs = grid.x_points();
    let pairs: Vec<(&Vec<f64>, &Vec<f64>)> = ts.iter().flat_map(|t| xs.iter().map(move |x| (t, x))).collect();
    let points = pairs
        .par_iter()
        .map(|(t, x)| {
            let lhs = time_derivative(u, t, j, x, tau)?;
            let rhs = drift_coefficient(t, j) * f.laplacian_k(x, 1)? + laplacian_power_at(script_u, t, x, h, 2)? / 8.0;
            Ok(ResidualPoint {
                t: t.to_vec(),
                x: x.to_vec(),
                residual: lhs - rhs,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let fv = |_: &[f64], x: &[f64]| f.value(x);
    let zero = |_: &[f64], _: &[f64]| 0.0;
    let d_row = |t: &[f64], x: &[f64]| prod_others(t, j, |v| v) * f.value(x);
    let mut rows = vec![Row { label: "(b) u", field: u, face: Face::Active, expected: &fv }];
    for i in other_indices(grid) {
        rows.push(Row { label: "(b) u", field: u, face: Face::Other(i), expected: &fv });
        rows.push(Row { label: "(c) scriptU", field: script_u, face: Face::Other(i), expected: &zero });
    }
    rows.push(Row { label: "(d) scriptU", field: script_u, face: Face::Active, expected: &d_row });
    let checks = boundary_checks(grid, &rows)?;
    Ok(ResidualReport::from_points(SystemKind::FourthOrder, j, grid.describe(), points, grid.keep_points).with_checks(checks))
}

/// Residual of `∂^c_{t_j} u = coef·Δ_x𝒱⁽ʲ⁾`: `c = 1/2`, `coef = 1/√8` for
/// Brownian clocks and `c = β`, `coef = 1/2` for inverse-subordinator
/// clocks. Boundary rows: `u = f`, `𝒱⁽ʲ⁾ = 0` when another `tᵢ = 0`, and
/// `𝒱⁽ʲ⁾ = ∏_{i≠j} E[s(tᵢ)] f` at `t_j = 0`.
pub fn residual_fractional(
    u: &dyn Field,
    script_v: &dyn Field,
    f: &dyn InitialFunction,
    kind: FieldKind,
    grid: &ResidualGrid,
) -> Result<ResidualReport> {
    const OP: &str = "residual_fractional";
    grid.validate(OP, f)?;
    let (h, tau, j) = (grid.stencil.h, grid.stencil.tau, grid.j);
    let c = clock_scale(kind);
    let (system, coef) = match kind {
        FieldKind::Btbs => (SystemKind::HalfFractional, BTBS_FRACTIONAL_COEF),
        FieldKind::Isltbs(_) => (SystemKind::BetaFractional, ISLTBS_FRACTIONAL_COEF),
    };
    let (tgrid, idx) = line_grid(OP, grid.active_axis(), tau)?;
    let samples = grid.active_axis().values();
    let others = grid.other_times();
    let xs = grid.x_points();
    let pairs: Vec<(&Vec<f64>, &Vec<f64>)> = others.iter().flat_map(|t| xs.iter().map(move |x| (t, x))).collect();
    let blocks = pairs
        .par_iter()
        .map(|(t, x)| {
            let line = line_values(u, t, j, x, &tgrid)?;
            let d = line_caputo(&line, &tgrid, c)?;
            samples
                .iter()
                .zip(&idx)
                .map(|(&tj, &k)| {
                    let s = with_active(t, j, tj);
                    let rhs = coef * laplacian_power_at(script_v, &s, x, h, 1)?;
                    Ok(ResidualPoint {
                        t: s,
                        x: x.to_vec(),
                        residual: d[k] - rhs,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<ResidualPoint> = blocks.into_iter().flatten().collect();
    let mean = clock_mean(kind);
    let fv = |_: &[f64], x: &[f64]| f.value(x);
    let zero = |_: &[f64], _: &[f64]| 0.0;
    let d_row = |t: &[f64], x: &[f64]| prod_others(t, j, &mean) * f.value(x);
    let mut rows = vec![Row { label: "(b) u", field: u, face: Face::Active, expected: &fv }];
    for i in other_indices(grid) {
        rows.push(Row { label: "(b) u", field: u, face: Face::Other(i), expected: &fv });
        rows.push(Row { label: "(c) scriptV", field: script_v, face: Face::Other(i), expected: &zero });
    }
    rows.push(Row { label: "(d) scriptV", field: script_v, face: Face::Active, expected: &d_row });
    let checks = boundary_checks(grid, &rows)?;
    Ok(ResidualReport::from_points(system, j, grid.describe(), points, grid.keep_points).with_checks(checks))
}

/// `t ↦ E[s(t)]`: `√(2t/π)` for Brownian clocks, `t^β/Γ(1+β)` otherwise.
fn clock_mean(kind: FieldKind) -> impl Fn(f64) -> f64 {
    move |t: f64| match kind {
        FieldKind::Btbs => (2.0 * t / std::f64::consts::PI).sqrt(),
        FieldKind::Isltbs(o) => t.powf(o.beta()) / gamma(1.0 + o.beta()),
    }
}

/// Residual of `∂_{t_j}u = Σ_κ Δᵏf/2ᵏ ∂_{t_j}M_κ⁽ʲ⁾ + 2^{−ν}Δ^ν𝒰_ν⁽ʲ⁾` for
/// `β = 1/ν`, with boundary rows `u = f`, `𝒰_ν⁽ʲ⁾ = 0` when another
/// `tᵢ = 0`, and `𝒰_ν⁽ʲ⁾ = f N_ν⁽ʲ⁾` at `t_j = 0`.
pub fn residual_order_2nu(
    u: &dyn Field,
    script_u_nu: &dyn Field,
    f: &dyn InitialFunction,
    order: FractionalOrder,
    grid: &ResidualGrid,
) -> Result<ResidualReport> {
    const OP: &str = "residual_order_2nu";
    let nu = order.require_nu(OP)?;
    grid.validate(OP, f)?;
    if f.max_k() < nu - 1 {
        return Err(SheetError::domain(OP, format!("{} has no analytic Laplacian of order {}", f.name(), nu - 1)));
    }
    let (h, tau, j) = (grid.stencil.h, grid.stencil.tau, grid.j);
    let ts = lattice_points(&grid.t_axes);
    let xs = grid.x_points();
    let pairs: Vec<(&Vec<f64>, &Vec<f64>)> = ts.iter().flat_map(|t| xs.iter().map(move |x| (t, x))).collect();
    let points = pairs
        .par_iter()
        .map(|(t, x)| {
            let lhs = time_derivative(u, t, j, x, tau)?;
            let mut rhs = laplacian_power_at(script_u_nu, t, x, h, nu)? / 2f64.powi(nu as i32);
            for kappa in 1..nu {
                let dm = profile_m(order, j, kappa, t)?.dt_j;
                rhs += f.laplacian_k(x, kappa)? / 2f64.powi(kappa as i32) * dm;
            }
            Ok(ResidualPoint {
                t: t.to_vec(),
                x: x.to_vec(),
                residual: lhs - rhs,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let fv = |_: &[f64], x: &[f64]| f.value(x);
    let zero = |_: &[f64], _: &[f64]| 0.0;
    let d_row = |t: &[f64], x: &[f64]| profile_n(order, j, t).map(|p| p.value).unwrap_or(f64::NAN) * f.value(x);
    let mut rows = vec![Row { label: "(b) u", field: u, face: Face::Active, expected: &fv }];
    for i in other_indices(grid) {
        rows.push(Row { label: "(b) u", field: u, face: Face::Other(i), expected: &fv });
        rows.push(Row { label: "(c) scriptUnu", field: script_u_nu, face: Face::Other(i), expected: &zero });
    }
    rows.push(Row { label: "(d) scriptUnu", field: script_u_nu, face: Face::Active, expected: &d_row });
    let checks = boundary_checks(grid, &rows)?;
    Ok(ResidualReport::from_points(SystemKind::Order2Nu, j, grid.describe(), points, grid.keep_points).with_checks(checks))
}

/// Name of the check carrying the largest gap between `Δ(∂𝒱)` and `∂(Δ𝒱)`.
pub const COMMUTED_ORDER_CHECK: &str = "commuted order max gap";

/// Residual of the equivalence condition.
///
/// * Brownian clocks: `√8 Δ_x(∂^{1/2}_{t_j}𝒱⁽ʲ⁾) − Δ²_x 𝒰⁽ʲ⁾`, with `script_u = 𝒰⁽ʲ⁾`.
/// * Inverse-subordinator clocks, `β = 1/ν`:
///   `2^{ν−1} Δ_x(∂^{(ν−1)⊗β}_{t_j}𝒱⁽ʲ⁾) − Δ^ν_x 𝒰_ν⁽ʲ⁾`, with `script_u = 𝒰_ν⁽ʲ⁾`.
///
/// The Caputo-then-Laplacian order is the residual; the commuted order is
/// attached as a check, together with the `t_j = 0` and `tᵢ = 0` rows.
pub fn equivalence_residual(
    script_u: &dyn Field,
    script_v: &dyn Field,
    f: &dyn InitialFunction,
    kind: FieldKind,
    grid: &ResidualGrid,
) -> Result<ResidualReport> {
    const OP: &str = "equivalence_residual";
    grid.validate(OP, f)?;
    let (h, tau, j) = (grid.stencil.h, grid.stencil.tau, grid.j);
    let (system, power, iterations, scale, beta) = match kind {
        FieldKind::Btbs => (SystemKind::EquivCondBtbs, 2u32, 1usize, 8f64.sqrt(), 0.5),
        FieldKind::Isltbs(o) => {
            let nu = o.require_nu(OP)?;
            (SystemKind::EquivCondIsltbs, nu, nu as usize - 1, 2f64.powi(nu as i32 - 1), o.beta())
        }
    };
    let (tgrid, idx) = line_grid(OP, grid.active_axis(), tau)?;
    let samples = grid.active_axis().values();
    let others = grid.other_times();
    let xs = grid.x_points();
    let d = xs.first().map_or(0, Vec::len);
    let stencil = laplacian_stencil::<f64>(d, 1);
    let h2 = h * h;
    let pairs: Vec<(&Vec<f64>, &Vec<f64>)> = others.iter().flat_map(|t| xs.iter().map(move |x| (t, x))).collect();
    let caputo = |line: &[f64]| -> Result<Vec<f64>> {
        if iterations == 1 {
            line_caputo(line, &tgrid, beta)
        } else {
            Ok(iterated_caputo(line, &tgrid, beta, iterations)?.values)
        }
    };
    let blocks = pairs
        .par_iter()
        .map(|(t, x)| {
            let mut lap_of_caputo = vec![0.0; tgrid.len()];
            let mut lap_line = vec![0.0; tgrid.len()];
            let mut y = x.to_vec();
            for (off, c) in &stencil {
                for (a, o) in off.iter().enumerate() {
                    y[a] = x[a] + *o as f64 * h;
                }
                let line = line_values(script_v, t, j, &y, &tgrid)?;
                let dv = caputo(&line)?;
                for k in 1..tgrid.len() {
                    lap_of_caputo[k] += c * dv[k] / h2;
                }
                for (k, v) in line.iter().enumerate() {
                    lap_line[k] += c * v / h2;
                }
            }
            let caputo_of_lap = caputo(&lap_line)?;
            let mut gap = 0.0f64;
            let pts = samples
                .iter()
                .zip(&idx)
                .map(|(&tj, &k)| {
                    gap = gap.max((lap_of_caputo[k] - caputo_of_lap[k]).abs() * scale);
                    let s = with_active(t, j, tj);
                    let rhs = laplacian_power_at(script_u, &s, x, h, power)?;
                    Ok(ResidualPoint {
                        t: s,
                        x: x.to_vec(),
                        residual: scale * lap_of_caputo[k] - rhs,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((pts, gap))
        })
        .collect::<Result<Vec<_>>>()?;
    let gap = blocks.iter().map(|b| b.1).fold(0.0, f64::max);
    let points: Vec<ResidualPoint> = blocks.into_iter().flat_map(|b| b.0).collect();
    let mean = clock_mean(kind);
    let zero = |_: &[f64], _: &[f64]| 0.0;
    let v_row = |t: &[f64], x: &[f64]| prod_others(t, j, &mean) * f.value(x);
    let u_row = |t: &[f64], x: &[f64]| -> f64 {
        match kind {
            FieldKind::Btbs => prod_others(t, j, |v| v) * f.value(x),
            FieldKind::Isltbs(o) => profile_n(o, j, t).map(|p| p.value).unwrap_or(f64::NAN) * f.value(x),
        }
    };
    let (u_label, v_label) = match kind {
        FieldKind::Btbs => ("(c) scriptU", "(e) scriptV"),
        FieldKind::Isltbs(_) => ("(b) scriptUnu", "(c) scriptV"),
    };
    let mut rows = vec![
        Row { label: u_label, field: script_u, face: Face::Active, expected: &u_row },
        Row { label: v_label, field: script_v, face: Face::Active, expected: &v_row },
    ];
    for i in other_indices(grid) {
        rows.push(Row { label: "(d) scriptU", field: script_u, face: Face::Other(i), expected: &zero });
        rows.push(Row { label: "(d) scriptV", field: script_v, face: Face::Other(i), expected: &zero });
    }
    let mut checks = vec![Check::new(COMMUTED_ORDER_CHECK, gap, 0.0)];
    checks.extend(boundary_checks(grid, &rows)?);
    Ok(ResidualReport::from_points(system, j, grid.describe(), points, grid.keep_points).with_checks(checks))
}

/// `∂^{k⊗β}_{t_j}u` at `t_j → 0⁺`: the extrapolated numeric limit, the value
/// of the published display
/// `Γ((ν−k)/ν) E(1/ν,k)ⁿ Δᵏf ∏_{i≠j}tᵢ^{k/ν} / (ν 2ᵏ (k−1)!)`, and the value
/// `Δᵏf/2ᵏ · E(1/ν,k)^{n−1} ∏_{i≠j}tᵢ^{k/ν}` obtained by differentiating the
/// moment expansion of `u` term by term. The two formulas differ by the
/// factor `Γ(1−k/ν)/Γ(k/ν)` and agree only at `k/ν = 1/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UCoefficient {
    pub k: u32,
    pub numeric: f64,
    pub display: f64,
    pub expansion: f64,
}

/// Evaluates [`UCoefficient`] for `k = 1, …, ν−1` along the `t_j`-line through
/// `t` (the value of `t_j` in `t` is ignored) on a `τ`-grid up to `t_end`.
#[allow(clippy::too_many_arguments)]
pub fn u_coefficient_checks(
    u: &dyn Field,
    f: &dyn InitialFunction,
    order: FractionalOrder,
    t: &[f64],
    j: usize,
    x: &[f64],
    t_end: f64,
    steps: usize,
) -> Result<Vec<UCoefficient>> {
    const OP: &str = "u_coefficient_checks";
    let nu = order.require_nu(OP)?;
    if j == 0 || j > t.len() {
        return Err(SheetError::domain(OP, format!("active index j = {j} outside 1..={}", t.len())));
    }
    if f.max_k() < nu - 1 {
        return Err(SheetError::domain(OP, format!("{} has no analytic Laplacian of order {}", f.name(), nu - 1)));
    }
    let beta = order.beta();
    let n = t.len() as i32;
    let grid = TimeGrid::uniform(t_end, steps)?;
    let line = line_values(u, t, j, x, &grid)?;
    (1..nu)
        .map(|k| {
            let numeric = iterated_caputo(&line, &grid, beta, k as usize)?.origin_limit;
            let kb = k as f64 * beta;
            let e = factorial(k as usize) / gamma(1.0 + kb);
            let lap = f.laplacian_k(x, k)?;
            let prod = prod_others(t, j, |v| v.powf(kb));
            let display = gamma(1.0 - kb) * e.powi(n) * lap * prod
                / (nu as f64 * 2f64.powi(k as i32) * factorial(k as usize - 1));
            let expansion = lap / 2f64.powi(k as i32) * e.powi(n - 1) * prod;
            Ok(UCoefficient { k, numeric, display, expansion })
        })
        .collect()
}
