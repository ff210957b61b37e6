use std::path::Path;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// A drift, constraint or verification check exceeded its tolerance.
    Violation,
    /// Two particles came closer than the minimum separation.
    Singular,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::Violation => 2,
            Status::Singular => 3,
        }
    }

    pub fn from_pass(pass: bool) -> Self {
        if pass {
            Status::Ok
        } else {
            Status::Violation
        }
    }
}

/// One verified property: the largest residual seen and its bound.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn below(suite: &str, name: &str, residual: f64, tolerance: f64) -> Self {
        Self { suite: suite.into(), name: name.into(), residual, tolerance, pass: residual < tolerance }
    }
}

pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    std::fs::write(path, toml::to_string(value)?)?;
    Ok(())
}

/// Shortest round-trip form; negative zero prints as `0e0`.
pub fn num(v: f64) -> String {
    format!("{:e}", v + 0.0)
}
