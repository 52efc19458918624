//! Command execution: CSV artifacts plus a one-line summary.

use crate::config::{Command, RunConfig, System};
use sheetlab::csv::{fmt_f64, quote};
use sheetlab::densities::{bm_density, InverseStableKernel};
use sheetlab::initial_functions::InitialFunction;
use sheetlab::moments::moment_e;
use sheetlab::pde_verify::{
    equivalence_residual, residual_fourth_order, residual_fractional, residual_order_2nu, QuadField, ResidualGrid,
    StencilSpec, COMMUTED_ORDER_CHECK,
};
use sheetlab::report::ResidualReport;
use sheetlab::samplers::{mc_expectation, FieldKind, RngStream};
use sheetlab::solutions::{lattice_points, Evaluator, Functional, SolutionField};
use sheetlab::{FractionalOrder, SheetError};
use std::fs::File;
use std::io::{self, BufWriter, Write};

#[derive(Debug)]
pub enum RunError {
    Numerical(SheetError),
    Output { path: String, err: io::Error },
}

impl From<SheetError> for RunError {
    fn from(e: SheetError) -> Self {
        RunError::Numerical(e)
    }
}

type Res<T> = std::result::Result<T, RunError>;

pub fn header(cfg: &RunConfig) -> String {
    format!("# sheetlab {} config-hash={}", env!("CARGO_PKG_VERSION"), cfg.hash)
}

fn write_artifact(path: &Option<String>, cfg: &RunConfig, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Res<()> {
    let Some(path) = path else { return Ok(()) };
    let wrap = |err| RunError::Output { path: path.clone(), err };
    let mut w = BufWriter::new(File::create(path).map_err(wrap)?);
    writeln!(w, "{}", header(cfg)).map_err(wrap)?;
    body(&mut w).map_err(wrap)?;
    w.flush().map_err(wrap)
}

fn order_label(o: FractionalOrder) -> String {
    match o.nu() {
        Some(nu) => format!("1/{nu}"),
        None => format!("{}", o.beta()),
    }
}

fn kind_label(kind: FieldKind) -> String {
    match kind {
        FieldKind::Btbs => "kind=btbs".into(),
        FieldKind::Isltbs(o) => format!("kind=isltbs beta={}", order_label(o)),
    }
}

/// Plain decimal in the usual range, exponent form outside it.
fn num(v: f64) -> String {
    if v != 0.0 && v.is_finite() && (v.abs() < 1e-4 || v.abs() >= 1e7) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

/// `value=v` for one point, `min=.. max=..` otherwise.
fn value_summary(values: &[f64]) -> String {
    if let [v] = values {
        format!("value={}", num(*v))
    } else {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        format!("min={} max={}", num(lo), num(hi))
    }
}

/// Runs the command and returns the summary line.
pub fn run(cfg: &RunConfig) -> Res<String> {
    match cfg.command {
        Command::Density => density(cfg),
        Command::Moments => moments(cfg),
        Command::Solve => solve(cfg),
        Command::McCompare => mc_compare(cfg),
        Command::Residual | Command::Equivalence => residual(cfg),
    }
}

fn density(cfg: &RunConfig) -> Res<String> {
    let ts = cfg.t_axes[0].values();
    let xs = cfg.x_axes[0].values();
    let kernel = cfg.kind.order().map(InverseStableKernel::new);
    let mut rows = Vec::with_capacity(ts.len() * xs.len());
    for &t in &ts {
        for &x in &xs {
            let v = match &kernel {
                Some(k) => k.density(t, x)?,
                // law of |B(t)|
                None if x < 0.0 => 0.0,
                None => 2.0 * bm_density(t, x)?,
            };
            rows.push((t, x, v));
        }
    }
    write_artifact(&cfg.output, cfg, |w| {
        writeln!(w, "t,x,density")?;
        for (t, x, v) in &rows {
            writeln!(w, "{},{},{}", fmt_f64(*t), fmt_f64(*x), fmt_f64(*v))?;
        }
        Ok(())
    })?;
    let values: Vec<f64> = rows.iter().map(|r| r.2).collect();
    Ok(format!("density {} points={} {}", kind_label(cfg.kind), values.len(), value_summary(&values)))
}

fn moments(cfg: &RunConfig) -> Res<String> {
    let order = cfg.order.expect("validated");
    let m = moment_e(order, cfg.moment_k, cfg.route)?;
    write_artifact(&cfg.output, cfg, |w| {
        writeln!(w, "beta,gamma,route,value,error")?;
        writeln!(w, "{},{},{},{},{}", quote(&order_label(order)), fmt_f64(m.gamma), m.route.name(), fmt_f64(m.value), fmt_f64(m.error))
    })?;
    Ok(format!(
        "moments beta={} gamma={} route={} value={} error={}",
        order_label(order),
        m.gamma,
        m.route.name(),
        num(m.value),
        num(m.error)
    ))
}

fn solve(cfg: &RunConfig) -> Res<String> {
    let ev = Evaluator::new(cfg.kind, cfg.quadrature)?;
    let field = SolutionField::compute(&ev, cfg.functional, &cfg.f, cfg.t_axes.clone(), cfg.x_axes.clone())?;
    write_artifact(&cfg.output, cfg, |w| field.write_csv(w, None))?;
    Ok(format!(
        "solve {} functional={} f={} points={} {}",
        kind_label(cfg.kind),
        cfg.functional.name(),
        cfg.f.name(),
        field.values.len(),
        value_summary(&field.values)
    ))
}

fn mc_compare(cfg: &RunConfig) -> Res<String> {
    let ev = Evaluator::new(cfg.kind, cfg.quadrature)?;
    let ts = lattice_points(&cfg.t_axes);
    let xs = lattice_points(&cfg.x_axes);
    let mut rows = Vec::new();
    for t in &ts {
        for x in &xs {
            let q = ev.eval(cfg.functional, &cfg.f, t, x)?;
            let stream = RngStream::new(cfg.seed, rows.len() as u64);
            let mc = mc_expectation(cfg.kind, &cfg.f, cfg.functional.weight(), cfg.functional.j(), t, x, cfg.samples, stream)?;
            let z = if mc.std_error > 0.0 { (mc.estimate - q) / mc.std_error } else { 0.0 };
            rows.push((t, x, q, mc, z));
        }
    }
    write_artifact(&cfg.output, cfg, |w| {
        writeln!(w, "{},quadrature,monte_carlo,std_error,z", sheetlab::csv::coordinate_header(cfg.n, cfg.d))?;
        for (t, x, q, mc, z) in &rows {
            let mut row: Vec<String> = t.iter().chain(x.iter()).map(|&v| fmt_f64(v)).collect();
            row.extend([*q, mc.estimate, mc.std_error, *z].map(fmt_f64));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    })?;
    let max_z = rows.iter().map(|r| r.4.abs()).fold(0.0, f64::max);
    Ok(format!(
        "mc-compare {} functional={} f={} points={} samples={} max_abs_z={}",
        kind_label(cfg.kind),
        cfg.functional.name(),
        cfg.f.name(),
        rows.len(),
        cfg.samples,
        num(max_z)
    ))
}

fn residual(cfg: &RunConfig) -> Res<String> {
    let ev = Evaluator::new(cfg.kind, cfg.quadrature)?;
    let grid = ResidualGrid::new(cfg.t_axes.clone(), cfg.x_axes.clone(), cfg.j, StencilSpec::new(cfg.h, cfg.tau)?)
        .keep_points(cfg.points_output.is_some());
    let field = |fnl: Functional| QuadField::new(&ev, fnl, &cfg.f);
    let u = field(Functional::U);
    let sv = field(Functional::ScriptV(cfg.j));
    let nu = cfg.kind.order().and_then(|o| o.nu());
    let report: ResidualReport = match cfg.command {
        Command::Equivalence => {
            let su = match nu {
                Some(nu) => field(Functional::ScriptUNu(cfg.j, nu)),
                None => field(Functional::ScriptU(cfg.j)),
            };
            equivalence_residual(&su, &sv, &cfg.f, cfg.kind, &grid)?
        }
        _ => match cfg.system.expect("validated") {
            System::FourthOrder => residual_fourth_order(&u, &field(Functional::ScriptU(cfg.j)), &cfg.f, &grid)?,
            System::HalfFractional | System::BetaFractional => residual_fractional(&u, &sv, &cfg.f, cfg.kind, &grid)?,
            System::Order2Nu => {
                let order = cfg.kind.order().expect("validated");
                let nu = nu.expect("validated");
                residual_order_2nu(&u, &field(Functional::ScriptUNu(cfg.j, nu)), &cfg.f, order, &grid)?
            }
        },
    };
    write_artifact(&cfg.output, cfg, |w| {
        report.write_summary_csv(&mut *w)?;
        if !report.checks.is_empty() {
            writeln!(w)?;
            writeln!(w, "check,computed,expected,abs_error")?;
            for c in &report.checks {
                writeln!(w, "{},{},{},{}", quote(&c.name), fmt_f64(c.computed), fmt_f64(c.expected), fmt_f64(c.abs_error()))?;
            }
        }
        Ok(())
    })?;
    write_artifact(&cfg.points_output, cfg, |w| report.write_points_csv(w))?;
    let boundary =
        report.checks.iter().filter(|c| c.name != COMMUTED_ORDER_CHECK).map(|c| c.abs_error()).fold(0.0, f64::max);
    let system = match cfg.system {
        Some(s) if cfg.command == Command::Residual => format!(" system={}", s.name()),
        _ => String::new(),
    };
    Ok(format!(
        "{}{system} {} f={} j={} inf_norm={} l2_norm={} boundary_max_err={}",
        cfg.command.name(),
        kind_label(cfg.kind),
        cfg.f.name(),
        cfg.j,
        num(report.residual_inf_norm),
        num(report.residual_l2_norm),
        num(boundary)
    ))
}
