use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Which of the chained distortion constraints a schedule violates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    /// `D_X1 <= 1`
    Stage1,
    /// `D_Y2 <= sigma_1^2`
    Stage2,
    /// `D_X3 <= sigma_2^2`
    Stage3,
}

impl Constraint {
    pub fn stage(self) -> u8 {
        match self {
            Constraint::Stage1 => 1,
            Constraint::Stage2 => 2,
            Constraint::Stage3 => 3,
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Constraint::Stage1 => "d_x1 <= 1",
            Constraint::Stage2 => "d_y2 <= sigma1^2",
            Constraint::Stage3 => "d_x3 <= sigma2^2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is outside its domain ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("infeasible schedule at stage {}: {} violated ({value} > {bound})", .constraint.stage(), .constraint.describe())]
    Infeasible {
        constraint: Constraint,
        value: f64,
        bound: f64,
    },

    #[error("conditioning on a singular covariance block (pivot {pivot:e})")]
    Singular { pivot: f64 },

    #[error("no solution: {0}")]
    NoSolution(&'static str),

    #[error("bisection did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, expected: &'static str) -> Self {
        Error::Domain {
            name,
            value,
            expected,
        }
    }
}
