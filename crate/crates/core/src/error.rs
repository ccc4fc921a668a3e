use thiserror::Error;

/// Errors produced across the simulation engines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    #[error("algebra dimension cap {cap} exceeded (reached {reached})")]
    DimCapExceeded { cap: usize, reached: usize },
    #[error("consistency check failed: {0}")]
    Consistency(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("inadmissible circuit: gate {gate}: {reason}")]
    InadmissibleCircuit { gate: usize, reason: String },
    #[error("inadmissible observable: {0}")]
    InadmissibleObservable(String),
    #[error("unanswerable words (locality budget {budget}): {words:?}")]
    UnanswerableWord { budget: usize, words: Vec<String> },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("evaluation failed at n={n}, sample seed {seed}: {source}")]
    Evaluation {
        n: usize,
        seed: u64,
        #[source]
        source: Box<SimError>,
    },
}

pub type Result<T> = std::result::Result<T, SimError>;

pub(crate) fn check_dims(what: &str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(SimError::Dimension(format!("{what}: {a} != {b}")));
    }
    Ok(())
}
