//! Pass/fail reports shared by the validation entry points.

use serde::{Deserialize, Serialize};

/// Outcome of a structural check: `pass` is true exactly when `violations`
/// is empty. Violations are ordered deterministically by the checker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub pass: bool,
    pub violations: Vec<String>,
}

impl CheckReport {
    pub fn passing() -> Self {
        CheckReport { pass: true, violations: Vec::new() }
    }

    pub fn failing(violation: impl Into<String>) -> Self {
        CheckReport { pass: false, violations: vec![violation.into()] }
    }

    pub fn push(&mut self, violation: impl Into<String>) {
        self.pass = false;
        self.violations.push(violation.into());
    }

    pub fn absorb(&mut self, other: CheckReport) {
        self.pass &= other.pass;
        self.violations.extend(other.violations);
    }

    /// First violation, if any; convenient for terse diagnostics.
    pub fn first(&self) -> Option<&str> {
        self.violations.first().map(|s| s.as_str())
    }
}

impl std::fmt::Display for CheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.pass {
            write!(f, "pass")
        } else {
            write!(f, "fail: {}", self.violations.join("; "))
        }
    }
}
