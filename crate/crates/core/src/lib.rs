//! Distributionally robust minimum mean square error estimation.
//!
//! The signal `x` and noise `w` of a linear observation model `y = H x + w`
//! are only known through nominal first and second moments. Nature may pick
//! any pair of uncorrelated distributions whose moments lie within Gelbrich
//! balls around the nominal ones. The statistician picks an affine estimator
//! `ψ(y) = A y + b` minimizing the worst-case mean square error.
//!
//! The crate solves the dual problem, a nonlinear SDP over covariance pairs,
//! with a Frank-Wolfe method ([`dual::fw_solve`]) whose linear subproblems
//! are solved by bisection on a scalar dual variable ([`dual::oracle_linmax`]).
//! The maximizing pair defines a least favorable normal prior and, through
//! the usual Bayes formula, the robust estimator ([`estimator::solve_nash`]).
//!
//! Only the moments of the nominal distributions enter any computation. The
//! robust estimator is therefore the same for every nominal distribution
//! sharing those moments, normal or not.

pub mod dual;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod gelbrich;
pub mod linalg;
pub mod sdp_export;

pub use error::{Error, Result};
