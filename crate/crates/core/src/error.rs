use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("duplicate bus id {0}")]
    DuplicateBus(i64),

    #[error("reference to unknown bus {bus} in {context}")]
    DanglingBus { bus: i64, context: &'static str },

    #[error("case must contain exactly one slack bus, found {0}")]
    SlackCount(usize),

    #[error("branch {from}-{to} has zero series impedance")]
    ZeroImpedanceBranch { from: i64, to: i64 },

    #[error("branch {from}-{to} has invalid field {field}")]
    BadBranch {
        from: i64,
        to: i64,
        field: &'static str,
    },

    #[error("no branches in service")]
    EmptyNetwork,

    #[error("missing dynamics data for generator at bus {0}")]
    MissingDynamics(i64),

    #[error("no generator dynamics supplied; reduction needs at least one machine")]
    NoDynamics,

    #[error("more than one generator at bus {0}; aggregate before reduction")]
    DuplicateGeneratorBus(i64),

    #[error("no solved voltages available; supply a `solution` block or solved bus voltages")]
    MissingSolution,

    #[error("missing mechanical power for generator at bus {0} and no solution to derive it from")]
    MissingMechanicalPower(i64),

    #[error("generator at bus {bus} has nonpositive {field}")]
    BadDynamics { bus: i64, field: &'static str },

    #[error(
        "eliminated block is numerically singular (reciprocal condition estimate {rcond:.3e})"
    )]
    SingularElimination { rcond: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("Newton iteration did not converge after {iterations} iterations (residual trace: {trace:?})")]
    NewtonNonConvergence { iterations: usize, trace: Vec<f64> },

    #[error("reduced Newton matrix is singular at iteration {iteration}")]
    SingularNewtonMatrix { iteration: usize },

    #[error("nonpositive parameter: {name}[{index}] = {value}")]
    NonPositiveParameter {
        name: &'static str,
        index: usize,
        value: f64,
    },

    #[error("QR eigenvalue iteration exceeded {0} sweeps without converging")]
    EigenNonConvergence(usize),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
