use thiserror::Error;

/// Failure report produced when a run leaves the admissible state space.
#[derive(Debug, Clone, PartialEq)]
pub struct BlowUpReport {
    pub step: usize,
    pub time: f64,
    pub element: usize,
    pub min_density: f64,
    pub min_pressure: f64,
}

impl std::fmt::Display for BlowUpReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "blow-up at step {} (t = {:.6e}): element {}, min density {:.6e}, min pressure {:.6e}",
            self.step, self.time, self.element, self.min_density, self.min_pressure
        )
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("config line {line}: {msg}")]
    ConfigLine { line: usize, msg: String },
    #[error("non-positive density {0:e}")]
    NonPositiveDensity(f64),
    #[error("non-positive pressure {0:e}")]
    NonPositivePressure(f64),
    #[error("entropy variable w5 = {0:e} must be negative")]
    InvalidEntropyVariables(f64),
    #[error("logarithmic mean requires positive arguments, got ({0:e}, {1:e})")]
    LogMeanDomain(f64, f64),
    #[error("non-finite wave speed")]
    NonFiniteWaveSpeed,
    #[error("{0}")]
    BlowUp(BlowUpReport),
    #[error("step limit of {0} reached before the final time")]
    StepLimit(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
