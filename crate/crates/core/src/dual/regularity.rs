//! Closed-form smoothness, strong-convexity and steepness constants of the
//! dual program, and the linear rate they imply for the fully adaptive rule.

use crate::error::{Error, Result};
use crate::linalg::{gram_lambda_max, ABS_FLOOR};

use super::ProblemInstance;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityConstants {
    /// Smoothness constant `β`.
    pub beta: f64,
    /// Strong-convexity constant `α = min(αx, αw)`.
    pub alpha: f64,
    pub alpha_x: f64,
    pub alpha_w: f64,
    /// Steepness constant `ε = min(εx, εw)`.
    pub epsilon: f64,
    pub epsilon_x: f64,
    pub epsilon_w: f64,
    /// Auxiliary constant `C`.
    pub c_aux: f64,
}

impl RegularityConstants {
    /// Per-iteration contraction factor
    /// `max(1 − δ/2, 1 − (1 − √(1−δ)) α ε / (4 β̄))` of the suboptimality for
    /// smoothness bound `beta_bar`.
    pub fn rate(&self, delta: f64, beta_bar: f64) -> f64 {
        let first = 1.0 - delta / 2.0;
        let second = 1.0 - (1.0 - (1.0 - delta).sqrt()) * self.alpha * self.epsilon / (4.0 * beta_bar);
        first.max(second)
    }

    /// Backtracking cap `β̄ = max(τ β, β₋₁)`.
    pub fn beta_bar(&self, tau: f64, beta_init: f64) -> f64 {
        (tau * self.beta).max(beta_init)
    }
}

/// Evaluates the constants for `instance`.
pub fn regularity_constants(instance: &ProblemInstance) -> Result<RegularityConstants> {
    let (bx, bw) = (instance.ball_x(), instance.ball_w());
    let lmin_x = bx.lambda_min();
    let lmin_w = bw.lambda_min();
    if lmin_x <= ABS_FLOOR || lmin_w <= ABS_FLOOR {
        return Err(Error::NotPositiveDefinite(
            "regularity constants need positive definite nominal covariances".into(),
        ));
    }
    let (rho_x, rho_w) = (instance.rho_x(), instance.rho_w());
    if !(rho_x > 0.0 && rho_w > 0.0) {
        return Err(Error::InvalidInput("regularity constants need positive radii".into()));
    }
    let lh = gram_lambda_max(instance.h());
    let rx = rho_x + bx.nominal_trace().sqrt();
    let rw = rho_w + bw.nominal_trace().sqrt();

    let c_aux = lh * lmin_w.powi(-2) * rx.powi(4);
    let beta = 2.0 / lmin_w * (c_aux + c_aux * lh * lh + lh);
    let alpha_x = lmin_x.powf(1.25) / (2.0 * rho_x * rx.powf(3.5));
    let alpha_w = lmin_w.powf(1.25) / (2.0 * rho_w * rw.powf(3.5));
    let epsilon_x = (lmin_w / (rx * rx * lh + rw * rw)).powi(2);
    let epsilon_w = lh * (lmin_x / (rw * rw + lmin_x * lh)).powi(2);

    Ok(RegularityConstants {
        beta,
        alpha: alpha_x.min(alpha_w),
        alpha_x,
        alpha_w,
        epsilon: epsilon_x.min(epsilon_w),
        epsilon_x,
        epsilon_w,
        c_aux,
    })
}
