use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    /// A gradient (or another interior-only quantity) was requested outside
    /// the interior of the kernel's domain.
    #[error("point outside the interior of the domain: {0}")]
    DomainViolation(String),
    #[error("argument out of domain: {0}")]
    ArgumentDomain(String),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("invalid operator: {0}")]
    InvalidOperator(String),
    /// No closed form or smooth fallback exists for this operator/kernel pair.
    #[error("unsupported resolvent: {0}")]
    UnsupportedResolvent(String),
    #[error("scalar Newton solve did not converge after {iterations} iterations (target {target})")]
    NewtonFailure { iterations: usize, target: f64 },
    /// The multiplier search could not bracket a root: the half-space does
    /// not meet the interior of the kernel's domain numerically.
    #[error("could not bracket the Lagrange multiplier: {0}")]
    BracketFailure(String),
    /// None of the candidate active sets produced a KKT point.
    #[error("intersection of half-spaces is numerically empty: {0}")]
    Infeasible(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("Kuhn-Tucker set is empty")]
    EmptyKtSet,
    #[error("unsupported oracle configuration: {0}")]
    UnsupportedOracle(String),
    #[error("oracle did not converge: {0}")]
    OracleNonConvergence(String),
}

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}
