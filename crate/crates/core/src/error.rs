use thiserror::Error;

/// Failure modes shared by every solver layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("adaptive procedure did not converge: {0}")]
    NonConvergent(String),
    #[error("no sign change on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("point {0} lies outside the state interval")]
    OutOfDomain(f64),
    #[error("generator requested at declared kink {0}")]
    AtKink(f64),
    #[error("unknown process `{0}`")]
    UnknownProcess(String),
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("threshold not found: {0}")]
    NotFound(String),
    #[error("majorant check failed at x = {at}: V - g = {margin:e}")]
    MajorantViolated { at: f64, margin: f64 },
    #[error("(alpha - L)g is not single-crossing: {0}")]
    NotSingleCrossing(String),
    #[error("negative set unresolved on the scan grid: {0}")]
    UnresolvedSign(String),
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("region merging did not terminate after {0} iterations")]
    NonTermination(usize),
    #[error("threshold equations disagree at x = {x}: integral residual {residual:e}")]
    EquationMismatch { x: f64, residual: f64 },
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("exponential moment diverges: {0}")]
    MomentDiverges(String),
    #[error("kernel row mass {mass} differs from 1/alpha = {expected} (aliasing)")]
    AliasingDetected { mass: f64, expected: f64 },
    #[error("kernel has imaginary residue {0:e} relative to its maximum")]
    ImaginaryResidue(f64),
    #[error("process cannot be simulated: {0}")]
    UnsupportedProcess(String),
    #[error("dominance violated: {0}")]
    DominanceViolated(String),
    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    /// True for errors that signal a failed optimality hypothesis rather than bad input.
    pub fn is_hypothesis_failure(&self) -> bool {
        matches!(
            self,
            Error::MajorantViolated { .. }
                | Error::HypothesisViolated(_)
                | Error::DominanceViolated(_)
                | Error::EquationMismatch { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
