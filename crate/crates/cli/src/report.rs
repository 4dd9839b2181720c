//! The JSON envelope written to stdout by every command.

use serde::Serialize;
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Violated,
    Infeasible,
    Error,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::Violated => 4,
            Status::Infeasible => 5,
            Status::Error => 2,
        }
    }
}

/// Why a command could not run.
#[derive(Debug)]
pub enum Failure {
    /// Well-formed input that breaks a rule (exit 2).
    Invalid(String),
    /// Input that is not readable as intended (exit 3).
    Parse(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 2,
            Failure::Parse(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Invalid(m) | Failure::Parse(m) => m,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Failure::Invalid(_) => "invalid",
            Failure::Parse(_) => "parse",
        }
    }
}

#[derive(Serialize)]
pub struct Report {
    pub command: String,
    pub arguments: Vec<String>,
    pub status: Status,
    pub tool_version: &'static str,
    pub input_digest: Option<String>,
    pub payload: Value,
}
