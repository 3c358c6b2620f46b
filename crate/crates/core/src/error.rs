use std::fmt;

use thiserror::Error;

/// One broken invariant found by [`crate::model::validate_instance`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub layer: Option<usize>,
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.layer {
            Some(layer) => write!(f, "layer {layer}: {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("selection has {got} choices, instance has {expected} layers")]
    LengthMismatch { expected: usize, got: usize },

    #[error("layer {layer}: op index {index} out of range ({ops} ops)")]
    InvalidSelection {
        layer: usize,
        index: usize,
        ops: usize,
    },

    #[error("budget ratio must be positive and finite, got {0}")]
    InvalidRatio(f64),

    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("instance failed validation:\n{}", format_violations(.0))]
    Validation(Vec<Violation>),

    #[error("empty sample group for layer {layer}, op {op_id:?}")]
    EmptyGroup { layer: usize, op_id: String },

    #[error("pool restriction drops the teacher op at layer(s) {0:?}")]
    TeacherDropped(Vec<usize>),

    #[error("no feasible selection after {attempts} attempts")]
    SamplingFailure { attempts: u64 },

    #[error("kendall tau undefined: every value in {0} is tied")]
    AllTied(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| format!("  - {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
