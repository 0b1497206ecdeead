use thiserror::Error;

/// Everything that can go wrong while building states, stepping them, or
/// analyzing ensembles. Statistical estimators never error on data content;
/// errors are reserved for contract violations (wrong model kind, mismatched
/// dimensions, invalid parameters).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("a state needs at least two entries, got {0}")]
    TooFewEntries(usize),
    #[error("probability at position {index} must be finite and non-negative, got {value}")]
    BadProbability { index: usize, value: f64 },
    #[error("probabilities must sum to 1 within 1e-9, got {sum}")]
    NotNormalized { sum: f64 },
    #[error("qudit dimension must be at least 2, got {dim}")]
    InvalidDimension { dim: usize },
    #[error("register size must be between 1 and {max} qubits, got {qubits}")]
    InvalidQubitCount { qubits: usize, max: usize },
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("operation is defined for qudit models only")]
    ExpectedQudit,
    #[error("operation is defined for register models only")]
    ExpectedRegister,
    #[error("qubit index {index} out of range for a {qubits}-qubit register")]
    QubitOutOfRange { index: usize, qubits: usize },
    #[error("state has {state} entries but the model expects {model}")]
    DimensionMismatch { state: usize, model: usize },
    #[error("noise vector has {got} entries, expected {expected}")]
    NoiseDimensionMismatch { got: usize, expected: usize },
    #[error("mapping is not a bijection on its positions")]
    NotABijection,
    #[error("exhaustive search is capped at 6 qudit levels / 3 qubits, got {dim} positions")]
    BruteForceTooLarge { dim: usize },
    #[error("the instantaneous rate diverges at zero infidelity")]
    ZeroInfidelity,
    #[error("rate formula expects the largest eigenvalue at position 0, found it at {found}")]
    MaxNotAtReference { found: usize },
    #[error("epsilon must lie in (0, 1], got {value}")]
    EpsilonOutOfRange { value: f64 },
    #[error("epsilons must be strictly decreasing and lie in (0, 1)")]
    EpsilonsNotDescending,
    #[error("sample_interval {sample_interval} must not be smaller than dt {dt}")]
    SampleIntervalBelowDt { sample_interval: f64, dt: f64 },
    #[error("an ensemble needs at least one trajectory")]
    NoTrajectories,
    #[error("baseline and candidate ensembles use different models")]
    ModelMismatch,
    #[error("baseline and candidate ensembles use different epsilon grids")]
    EpsilonGridMismatch,
    #[error("asymptotic fit needs {0}")]
    InsufficientEpsilonGrid(&'static str),
    #[error("passage-time fit is degenerate (non-positive or non-finite slope)")]
    DegenerateFit,
}

pub type Result<T> = std::result::Result<T, Error>;
