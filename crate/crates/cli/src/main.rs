//! `sheetlab`: kernels, moments, solution fields and PDE residuals from the
//! command line.

mod config;
mod run;

use clap::{Args, Parser, Subcommand};
use config::{parse_file, ConfigError, RunConfig};
use run::RunError;
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "sheetlab", version, about = "Brownian-time and inverse-stable-time Brownian sheet toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Clock density: |B(t)| for btbs, the inverse-subordinator kernel for isltbs.
    Density(Opts),
    /// Moment constant E(beta, k).
    Moments(Opts),
    /// Solution functional over a lattice.
    Solve(Opts),
    /// Quadrature against Monte Carlo on a lattice.
    McCompare(Opts),
    /// Finite-difference residual of one PDE system.
    Residual(Opts),
    /// Residual of the equivalence condition.
    Equivalence(Opts),
}

/// Every flag overrides the key of the same name in `--config`.
#[derive(Args, Default)]
struct Opts {
    /// Flat `key = value` file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// btbs or isltbs.
    #[arg(long)]
    kind: Option<String>,
    /// Order as a rational ("1/3") or decimal.
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    nu: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    d: Option<String>,
    #[arg(long)]
    j: Option<String>,
    /// quadratic, quartic, gaussian, bump or constant.
    #[arg(long)]
    f: Option<String>,
    #[arg(long = "f-c")]
    f_c: Option<String>,
    #[arg(long = "f-alpha")]
    f_alpha: Option<String>,
    /// Time axes: `v` or `start:end:points`, comma separated per parameter.
    #[arg(long)]
    t: Option<String>,
    /// Space axes, same syntax as `--t`.
    #[arg(long, allow_hyphen_values = true)]
    x: Option<String>,
    /// u, scriptU, scriptV or scriptUnu.
    #[arg(long)]
    functional: Option<String>,
    /// closed-form, quadrature or monte-carlo.
    #[arg(long)]
    route: Option<String>,
    /// Moment exponent.
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    samples: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// fourth-order, half-fractional, beta-fractional or order-2nu.
    #[arg(long)]
    system: Option<String>,
    /// Spatial stencil step.
    #[arg(long)]
    h: Option<String>,
    /// Time stencil step.
    #[arg(long)]
    tau: Option<String>,
    #[arg(long)]
    tolerance: Option<String>,
    #[arg(long)]
    inner: Option<String>,
    #[arg(long)]
    outer: Option<String>,
    #[arg(long)]
    radius: Option<String>,
    #[arg(long = "polynomial-growth")]
    polynomial_growth: Option<String>,
    /// CSV output path.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Per-point residual CSV path.
    #[arg(long = "points-output")]
    points_output: Option<PathBuf>,
}

impl Opts {
    fn overrides(&self) -> Vec<(&'static str, Option<String>)> {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        vec![
            ("kind", self.kind.clone()),
            ("beta", self.beta.clone()),
            ("nu", self.nu.clone()),
            ("n", self.n.clone()),
            ("d", self.d.clone()),
            ("j", self.j.clone()),
            ("f", self.f.clone()),
            ("f-c", self.f_c.clone()),
            ("f-alpha", self.f_alpha.clone()),
            ("t", self.t.clone()),
            ("x", self.x.clone()),
            ("functional", self.functional.clone()),
            ("route", self.route.clone()),
            ("k", self.k.clone()),
            ("samples", self.samples.clone()),
            ("seed", self.seed.clone()),
            ("system", self.system.clone()),
            ("h", self.h.clone()),
            ("tau", self.tau.clone()),
            ("tolerance", self.tolerance.clone()),
            ("inner", self.inner.clone()),
            ("outer", self.outer.clone()),
            ("radius", self.radius.clone()),
            ("polynomial-growth", self.polynomial_growth.clone()),
            ("output", path(&self.output)),
            ("points-output", path(&self.points_output)),
        ]
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn config_failure(e: &ConfigError) -> ExitCode {
    let key = e.key.as_deref().map(|k| format!(" key={k}")).unwrap_or_default();
    eprintln!("error kind=config{key} message=\"{}\"", escape(&e.msg));
    ExitCode::from(2)
}

fn load(command: &str, opts: &Opts) -> Result<RunConfig, ConfigError> {
    let mut map = match &opts.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| ConfigError { key: Some("config".into()), msg: format!("{}: {e}", p.display()) })?;
            parse_file(&text)?
        }
        None => BTreeMap::new(),
    };
    if let Some(c) = map.get("command") {
        if c != command {
            return Err(ConfigError { key: Some("command".into()), msg: format!("file says {c:?}, invoked as {command:?}") });
        }
    }
    map.insert("command".into(), command.into());
    for (k, v) in opts.overrides() {
        if let Some(v) = v {
            map.insert(k.into(), v);
        }
    }
    RunConfig::from_map(&map)
}

fn set_threads() -> Result<(), ConfigError> {
    let Ok(v) = std::env::var("SHEETLAB_THREADS") else { return Ok(()) };
    let bad = || ConfigError { key: Some("SHEETLAB_THREADS".into()), msg: format!("expected a positive integer, got {v:?}") };
    let n: usize = v.trim().parse().map_err(|_| bad())?;
    if n == 0 {
        return Err(bad());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| ConfigError { key: Some("SHEETLAB_THREADS".into()), msg: e.to_string() })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, opts) = match &cli.command {
        Cmd::Density(o) => ("density", o),
        Cmd::Moments(o) => ("moments", o),
        Cmd::Solve(o) => ("solve", o),
        Cmd::McCompare(o) => ("mc-compare", o),
        Cmd::Residual(o) => ("residual", o),
        Cmd::Equivalence(o) => ("equivalence", o),
    };
    if let Err(e) = set_threads() {
        return config_failure(&e);
    }
    let cfg = match load(name, opts) {
        Ok(c) => c,
        Err(e) => return config_failure(&e),
    };
    match run::run(&cfg) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(RunError::Numerical(e)) => {
            eprintln!("error kind=numerical op={} message=\"{}\"", e.operation(), escape(&e.to_string()));
            ExitCode::from(3)
        }
        Err(RunError::Output { path, err }) => config_failure(&ConfigError { key: Some("output".into()), msg: format!("{path}: {err}") }),
    }
}
