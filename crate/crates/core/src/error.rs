use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("system has no atoms")]
    EmptySystem,
    #[error("molecule partition leaves atom {0} unassigned")]
    PartitionGap(usize),
    #[error("molecule partition assigns atom {0} more than once")]
    PartitionOverlap(usize),
    #[error("atom {index} ({label}) has non-positive mass {mass}")]
    NonpositiveMass { index: usize, label: String, mass: f64 },
    #[error("photon mode {index} has non-positive frequency {omega}")]
    NonpositiveOmega { index: usize, omega: f64 },
    #[error("non-finite input: {0}")]
    NonfiniteInput(String),
    #[error("unknown frequency unit `{0}`")]
    UnknownUnit(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid backend specification: {0}")]
    InvalidSpec(String),
    #[error("electronic response problem is singular")]
    SingularElectronicProblem,
    #[error("query coordinate {axis} = {value} lies outside the grid [{lo}, {hi}]")]
    OutOfHull { axis: usize, value: f64, lo: f64, hi: f64 },
    #[error("backend refused evaluation: {0}")]
    BackendRefused(String),
    #[error("backend cannot separate the explicit coupling force contribution")]
    BackendLacksForceSplit,
    #[error("relaxation did not converge in {iterations} iterations (max |F| = {max_force:.3e})")]
    MaxIterationsExceeded { iterations: usize, max_force: f64 },
    #[error("non-finite value encountered: {0}")]
    NonFiniteValue(String),
    #[error("matrix is not symmetric (max |A - A^T| = {0:.3e})")]
    NonSymmetricInput(f64),
    #[error("symmetric eigensolver failed to converge")]
    EigenSolverFailure,
    #[error("dipole derivatives are missing")]
    MissingDipoleDerivatives,
    #[error("broadening must be positive, got {0}")]
    NonpositiveBroadening(f64),
    #[error("two-mode reduction needs exactly one vibration and one photon mode: {0}")]
    NotTwoMode(String),
    #[error("basis is not orthogonal (max |U^T U - I| = {0:.3e})")]
    NonOrthogonalBasis(f64),
    #[error("inconsistent coupling scaling: {0}")]
    InconsistentScaling(String),
    #[error("molecules are not well separated: {0}")]
    NotWellSeparated(String),
    #[error("molecules are not equivalent copies: {0}")]
    InequivalentMolecules(String),
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
    #[error("unsupported config format {0}, expected 1")]
    UnsupportedFormat(u64),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for problems with the user's input rather than internal failures.
    pub fn is_user_error(&self) -> bool {
        !matches!(
            self,
            Error::SingularElectronicProblem
                | Error::NonFiniteValue(_)
                | Error::NonSymmetricInput(_)
                | Error::EigenSolverFailure
                | Error::MissingDipoleDerivatives
        )
    }
}
