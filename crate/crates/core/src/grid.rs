//! Equally spaced evaluation axes.

use crate::error::{Result, SheetError};

/// `points` equally spaced values on `[start, end]` (both included).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

impl Axis {
    pub fn new(start: f64, end: f64, points: usize) -> Result<Self> {
        if !(start.is_finite() && end.is_finite()) || points == 0 || (points > 1 && end <= start) {
            return Err(SheetError::grid(
                "Axis::new",
                format!("invalid axis [{start}, {end}] with {points} points"),
            ));
        }
        Ok(Self { start, end, points })
    }

    /// A single point.
    pub fn point(v: f64) -> Self {
        Self {
            start: v,
            end: v,
            points: 1,
        }
    }

    /// Spacing; zero for a single point.
    pub fn step(&self) -> f64 {
        if self.points <= 1 {
            0.0
        } else {
            (self.end - self.start) / (self.points - 1) as f64
        }
    }

    pub fn value(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            self.end
        } else {
            self.start + i as f64 * self.step()
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.value(i)).collect()
    }

    pub fn describe(&self) -> String {
        format!("[{},{}]x{}", self.start, self.end, self.points)
    }
}
