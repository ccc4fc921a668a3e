//! Exit-code policy: 2 for configuration/schema problems, 3 when an engine
//! rejects the circuit or observable, 1 for everything else.

use std::fmt;

use serde_json::json;
use subspace_sim::SimError;

#[derive(Debug)]
pub enum CliError {
    Schema { field: String, message: String },
    Inadmissible { gate: Option<usize>, message: String },
    Runtime(String),
}

impl CliError {
    pub fn schema(field: impl Into<String>, message: impl fmt::Display) -> Self {
        CliError::Schema { field: field.into(), message: message.to_string() }
    }

    /// Engine errors during a run; inadmissibility keeps its own exit code.
    pub fn from_sim(e: SimError) -> Self {
        match e {
            SimError::InadmissibleCircuit { gate, reason } => {
                CliError::Inadmissible { gate: Some(gate), message: format!("gate {gate}: {reason}") }
            }
            SimError::InadmissibleObservable(_) | SimError::UnanswerableWord { .. } => {
                CliError::Inadmissible { gate: None, message: e.to_string() }
            }
            SimError::Evaluation { source, .. } => Self::from_sim(*source),
            other => CliError::Runtime(other.to_string()),
        }
    }

    /// A [`SimError`] raised while resolving a config field is a schema error,
    /// except for inadmissibility.
    pub fn at(field: &str) -> impl Fn(SimError) -> CliError + '_ {
        move |e| match Self::from_sim(e) {
            CliError::Runtime(m) => CliError::schema(field, m),
            other => other,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema { .. } => 2,
            CliError::Inadmissible { .. } => 3,
            CliError::Runtime(_) => 1,
        }
    }

    #[cfg(test)]
    pub fn field(&self) -> Option<&str> {
        match self {
            CliError::Schema { field, .. } => Some(field),
            _ => None,
        }
    }

    /// Machine-readable record printed to stderr.
    pub fn record(&self) -> String {
        let v = match self {
            CliError::Schema { field, message } => json!({"error": "schema", "field": field, "message": message}),
            CliError::Inadmissible { gate, message } => {
                json!({"error": "inadmissible", "gate": gate, "message": message})
            }
            CliError::Runtime(message) => json!({"error": "runtime", "message": message}),
        };
        v.to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.record())
    }
}

impl std::error::Error for CliError {}
