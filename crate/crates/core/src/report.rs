use std::fmt;

use serde::{Deserialize, Serialize};

/// Outcome of a single named constraint check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Magnitude of the violation; zero when the constraint holds exactly.
    pub residual: f64,
    pub tolerance: f64,
}

impl Check {
    /// Builds a check from a residual. Negative residuals are treated as zero
    /// violation; NaN never passes.
    pub fn new(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        let residual = if residual.is_nan() {
            f64::NAN
        } else {
            residual.max(0.0)
        };
        Self {
            name: name.into(),
            passed: residual <= tolerance,
            residual,
            tolerance,
        }
    }

    /// Check for `lhs <= rhs`.
    pub fn at_most(name: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self::new(name, lhs - rhs, tolerance)
    }

    /// Check for `lo <= value <= hi`.
    pub fn within(name: impl Into<String>, value: f64, lo: f64, hi: f64, tolerance: f64) -> Self {
        Self::new(name, (lo - value).max(value - hi), tolerance)
    }
}

/// A list of named checks with pass/fail status and residuals.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub checks: Vec<Check>,
}

impl ConstraintReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Largest residual over all checks whose name starts with `prefix`.
    pub fn max_residual(&self, prefix: &str) -> f64 {
        self.checks
            .iter()
            .filter(|c| c.name.starts_with(prefix))
            .map(|c| c.residual)
            .fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.checks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.checks.is_empty()
    }
}

impl Extend<Check> for ConstraintReport {
    fn extend<T: IntoIterator<Item = Check>>(&mut self, iter: T) {
        self.checks.extend(iter);
    }
}

impl fmt::Display for ConstraintReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
        writeln!(f, "{:<width$}  {:<6}  {:>12}  {:>9}", "check", "status", "residual", "tol")?;
        for c in &self.checks {
            writeln!(
                f,
                "{:<width$}  {:<6}  {:>12.3e}  {:>9.1e}",
                c.name,
                if c.passed { "pass" } else { "FAIL" },
                c.residual,
                c.tolerance
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_follows_residual() {
        assert!(Check::new("a", 1e-10, 1e-9).passed);
        assert!(!Check::new("a", 1e-8, 1e-9).passed);
        assert_eq!(Check::new("a", -3.0, 1e-9).residual, 0.0);
        assert!(!Check::new("a", f64::NAN, 1e-9).passed);
    }

    #[test]
    fn interval_check() {
        let c = Check::within("x", 1.25, 0.0, 1.0, 1e-9);
        assert!(!c.passed);
        assert_eq!(c.residual, 0.25);
        assert!(Check::within("x", 0.5, 0.0, 1.0, 1e-9).passed);
    }
}
