//! Residual reports shared by the density and PDE-system verifiers.

use std::fmt;
use std::io::{self, Write};

/// Which identity a residual belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SystemKind {
    /// `∂_t K − (−1)^ν ∂_x^ν K` for the inverse-subordinator density.
    DensityPde,
    FourthOrder,
    HalfFractional,
    BetaFractional,
    Order2Nu,
    EquivCondBtbs,
    EquivCondIsltbs,
}

impl SystemKind {
    pub fn name(&self) -> &'static str {
        match self {
            SystemKind::DensityPde => "density-pde",
            SystemKind::FourthOrder => "fourth-order",
            SystemKind::HalfFractional => "half-fractional",
            SystemKind::BetaFractional => "beta-fractional",
            SystemKind::Order2Nu => "order-2nu",
            SystemKind::EquivCondBtbs => "equiv-cond-btbs",
            SystemKind::EquivCondIsltbs => "equiv-cond-isltbs",
        }
    }
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A named scalar check (boundary row, extrapolated limit, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub computed: f64,
    pub expected: f64,
}

impl Check {
    pub fn new(name: impl Into<String>, computed: f64, expected: f64) -> Self {
        Self {
            name: name.into(),
            computed,
            expected,
        }
    }

    pub fn abs_error(&self) -> f64 {
        (self.computed - self.expected).abs()
    }

    pub fn rel_error(&self) -> f64 {
        self.abs_error() / self.expected.abs().max(f64::MIN_POSITIVE)
    }
}

/// One residual sample: coordinates `(t, x)` and the residual value.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualPoint {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub residual: f64,
}

/// LHS − RHS of one identity over a lattice, with norms and auxiliary checks.
#[derive(Debug, Clone)]
pub struct ResidualReport {
    pub system: SystemKind,
    /// Active time index (1-based, as in the systems' notation).
    pub j: usize,
    pub grid_desc: String,
    pub residual_inf_norm: f64,
    pub residual_l2_norm: f64,
    pub per_point: Option<Vec<ResidualPoint>>,
    /// Boundary rows and other scalar checks.
    pub checks: Vec<Check>,
}

impl ResidualReport {
    /// Builds a report from per-point residuals. The l2 norm is the root
    /// mean square over the points.
    pub fn from_points(
        system: SystemKind,
        j: usize,
        grid_desc: impl Into<String>,
        points: Vec<ResidualPoint>,
        keep_points: bool,
    ) -> Self {
        let (inf, sq) = points.iter().fold((0.0_f64, 0.0_f64), |(m, s), p| {
            (m.max(p.residual.abs()), s + p.residual * p.residual)
        });
        let l2 = if points.is_empty() {
            0.0
        } else {
            (sq / points.len() as f64).sqrt()
        };
        Self {
            system,
            j,
            grid_desc: grid_desc.into(),
            residual_inf_norm: inf,
            residual_l2_norm: l2,
            per_point: keep_points.then_some(points),
            checks: Vec::new(),
        }
    }

    pub fn with_checks(mut self, checks: Vec<Check>) -> Self {
        self.checks = checks;
        self
    }

    /// Largest absolute error over the attached checks.
    pub fn max_check_error(&self) -> f64 {
        self.checks.iter().map(Check::abs_error).fold(0.0, f64::max)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub const CSV_HEADER: &'static str = "system,j,inf_norm,l2_norm,grid_desc";

    /// One summary row: `system,j,inf_norm,l2_norm,grid_desc`.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.system,
            self.j,
            crate::csv::fmt_f64(self.residual_inf_norm),
            crate::csv::fmt_f64(self.residual_l2_norm),
            crate::csv::quote(&self.grid_desc)
        )
    }

    /// Summary CSV (header plus one row).
    pub fn write_summary_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        writeln!(w, "{}", self.csv_row())
    }

    /// Per-point CSV in the solution-field layout with a `residual` column.
    pub fn write_points_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let Some(points) = &self.per_point else {
            return Ok(());
        };
        let (n, d) = points
            .first()
            .map(|p| (p.t.len(), p.x.len()))
            .unwrap_or((0, 0));
        writeln!(w, "{},residual", crate::csv::coordinate_header(n, d))?;
        for p in points {
            let mut row: Vec<String> = p.t.iter().chain(&p.x).map(|&v| crate::csv::fmt_f64(v)).collect();
            row.push(crate::csv::fmt_f64(p.residual));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}
