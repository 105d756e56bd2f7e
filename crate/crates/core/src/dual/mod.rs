//! The dual program: maximize the Bayes risk `f(Σx, Σw)` of the normal prior
//! with covariances `(Σx, Σw)` over the product of two Gelbrich balls.

mod frank_wolfe;
mod instance;
pub(crate) mod objective;
mod oracle;
mod regularity;

pub(crate) use frank_wolfe::regularize;
pub use frank_wolfe::{fw_solve, FwConfig, IterationRecord, SolveReport, StepRule};
pub use instance::{CovariancePair, ProblemInstance};
pub use objective::{gradients, hessian_quadratic_form, objective_f, Gradients};
pub use oracle::{
    bisection_bracket, closed_form_inner_max, oracle_linmax, phi_and_derivative, OracleOutput,
};
pub use regularity::{regularity_constants, RegularityConstants};
