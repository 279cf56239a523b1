use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {}", join_violations(.0))]
    InvalidParams(Vec<Violation>),

    #[error("unknown preset `{0}` (expected fig3, fig4 or eq2_demo)")]
    UnknownPreset(String),

    #[error("quadrature did not converge (last relative change {last_change:e})")]
    Quadrature { last_change: f64 },

    #[error("value {value} outside domain of `{name}`: {expected}")]
    OutOfDomain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("slice statistics incomplete: {0}")]
    MissingSlice(String),

    #[error("sample budget exceeded: {accepted} of {target} accepted after {drawn} draws")]
    SampleBudget { accepted: u64, target: u64, drawn: u64 },

    #[error("config parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("invalid sweep: {0}")]
    Sweep(String),

    #[error("Monte Carlo disagreement at L = {l_km} km: {checks}")]
    ValidationFailed { l_km: f64, checks: String },
}

/// One failed parameter check, tagged with the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub reason: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.reason)
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

impl Error {
    /// Field names of every violation, empty for other variants.
    pub fn violated_fields(&self) -> Vec<&'static str> {
        match self {
            Error::InvalidParams(v) => v.iter().map(|x| x.field).collect(),
            _ => Vec::new(),
        }
    }
}
