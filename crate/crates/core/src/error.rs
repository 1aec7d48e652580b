use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("asymptotic coefficients are only defined on the whole plane")]
    FiniteDomain,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("need at least {min} elements, got {got}")]
    TooFewElements { got: usize, min: usize },
    #[error("grading ratio must be positive and finite, got {0}")]
    BadGrading(f64),
    #[error("element degree must be in 1..={max}, got {got}")]
    BadDegree { got: usize, max: usize },
    #[error("outer radius must be positive and finite, got {0}")]
    BadRadius(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("matrix is singular at row {0}")]
    Singular(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(
        "nonlinear solve did not converge: residual {residual:e} after {iterations} iterations"
    )]
    NonConvergence { residual: f64, iterations: usize },
    #[error(
        "converged iterate left the cone u >= 0, v <= 0 (worst violation {violation:e} at r = {r})"
    )]
    SignViolation { violation: f64, r: f64 },
    #[error("initial guess violates essential boundary data: {0}")]
    BadGuess(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigenError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("could not find a shift below the spectrum after {0} attempts")]
    FactorizationFailure(usize),
    #[error("eigen-iteration did not converge: worst residual {residual:e} after {iterations} iterations")]
    NonConvergence { residual: f64, iterations: usize },
    #[error("requested {requested} eigenpairs but the form has only {available} unknowns")]
    TooMany { requested: usize, available: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormError {
    #[error("profile is not converged (residual {0:e})")]
    Unconverged(f64),
    #[error("samples must vanish at the first and last two nodes")]
    NotCompactlySupported,
    #[error("sample length {got} does not match the {expected} profile nodes")]
    BadLength { got: usize, expected: usize },
    #[error("mode index m must be nonnegative, got {0}")]
    NegativeMode(i32),
    #[error("mode index {got} out of range for this operation (need {need})")]
    ModeOutOfRange { got: i32, need: &'static str },
    #[error("winding mismatch: form asked for k = {asked}, profile has k = {profile}")]
    WindingMismatch { asked: i32, profile: i32 },
    #[error("operation needs |k| = 1, got k = {0}")]
    NeedsUnitWinding(i32),
    #[error("operation needs |k| >= 2, got k = {0}")]
    NeedsHigherWinding(i32),
    #[error("v' vanishes identically in the critical regime; use the w0-decoupled form instead")]
    CriticalRegime,
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("no negative direction found in the scan (smallest eigenvalue {0:e})")]
    NoNegativeDirection(f64),
    #[error("need at least two starts, got {0}")]
    TooFewStarts(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("n_phi must be even and at least 8, got {0}")]
    BadAngularGrid(usize),
    #[error("n_r must be at least 4, got {0}")]
    BadRadialGrid(usize),
    #[error("band limit {band} too large for {n_phi} angular samples and |k| = {k}")]
    Aliasing { band: usize, n_phi: usize, k: u32 },
    #[error("perturbation does not vanish on the outer ring")]
    NotCompactlySupported,
    #[error("perturbation was built on a different radial discretization")]
    GridMismatch,
    #[error("field was not reconstructed from a radial profile")]
    NoProfile,
    #[error(transparent)]
    Form(#[from] FormError),
}
