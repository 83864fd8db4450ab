use std::fmt;

use thiserror::Error;

use crate::config::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {}", ViolationList(.0))]
    InvalidConfig(Vec<Violation>),

    #[error("point outside the slit domain: {0}")]
    OutsideDomain(String),

    /// The direction cosine `sqrt(cos^2 alpha - sin^2 beta)` would be imaginary.
    #[error("detector direction out of domain: sin^2(beta) = {sin2_beta:.6e} exceeds cos^2(alpha) = {cos2_alpha:.6e}")]
    DirectionOutOfDomain { cos2_alpha: f64, sin2_beta: f64 },

    #[error("quadrature did not converge after {subdivisions} subdivisions (estimate {estimate}, error bound {error:.3e})")]
    Convergence {
        estimate: num_complex::Complex64,
        error: f64,
        subdivisions: usize,
    },

    #[error("model evaluation failed at beta = {beta:.6e} rad: {source}")]
    Model {
        beta: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

struct ViolationList<'a>(&'a [Violation]);

impl fmt::Display for ViolationList<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}
