//! Shared vocabulary of machine-readable reports.

use serde::Serialize;

/// Version of the JSON and CSV layouts written by the command-line tool.
pub const SCHEMA_VERSION: u32 = 1;

/// A number with either an error estimate or an exactness tag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Measured {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<f64>,
    pub exact: bool,
}

impl Measured {
    pub fn exact(value: f64) -> Self {
        Self { value, error: None, exact: true }
    }

    pub fn approx(value: f64, error: f64) -> Self {
        Self { value, error: Some(error), exact: false }
    }
}

/// One asserted invariant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: Measured,
    /// Human-readable form of the asserted bound.
    pub bound: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, measured: Measured, bound: impl Into<String>) -> Self {
        Self { name: name.into(), passed, measured, bound: bound.into(), note: None }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed)
}
