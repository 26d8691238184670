use thiserror::Error;

/// Errors raised by the simulation and evaluation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge: estimate {estimate}, error estimate {error_estimate}")]
    Quadrature { estimate: f64, error_estimate: f64 },

    #[error("rate table inconsistency at b={b}, k={k}: relative error {rel_err:e}")]
    Inconsistent { b: usize, k: usize, rel_err: f64 },

    #[error("population cap of {cap} individuals exceeded at time {time}")]
    PopulationCap { cap: usize, time: f64 },

    #[error("time-change inverse requested at level {level} beyond the simulated range {max_level}")]
    BeyondLifetime { level: f64, max_level: f64 },

    #[error("no mutations: the family-size distribution is empty")]
    NoMutations,

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("report merge error: {0}")]
    Merge(String),

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 1.0 && alpha < 2.0 {
        Ok(())
    } else {
        domain(format!("alpha must lie in (1, 2), got {alpha}"))
    }
}
