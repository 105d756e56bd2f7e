//! Gelbrich distance between mean-covariance pairs and the associated
//! ambiguity balls.
//!
//! The Gelbrich distance
//!
//! ```text
//! G((μ₁,Σ₁),(μ₂,Σ₂)) = sqrt(‖μ₁−μ₂‖² + Tr[Σ₁ + Σ₂ − 2 (Σ₂^{1/2} Σ₁ Σ₂^{1/2})^{1/2}])
//! ```
//!
//! lower-bounds the type-2 Wasserstein distance between any two distributions
//! with these moments and coincides with it for normal (more generally,
//! same-generator elliptical) distributions.

use nalgebra::{DMatrix, DVector};

use crate::error::{dim_mismatch, Error, Result};
use crate::linalg::{
    block_diag, psd_sqrt, sym_eig, trace_sqrt_product, trace_sqrt_product_with_root, PsdMatrix,
    ABS_FLOOR,
};

/// Mean vector and covariance matrix of one marginal.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentPair {
    mean: DVector<f64>,
    cov: PsdMatrix,
}

impl MomentPair {
    pub fn new(mean: DVector<f64>, cov: PsdMatrix) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(dim_mismatch("mean length vs covariance dimension", cov.dim(), mean.len()));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("mean has non-finite entries".into()));
        }
        Ok(Self { mean, cov })
    }

    /// Zero-mean pair.
    pub fn centered(cov: PsdMatrix) -> Self {
        Self {
            mean: DVector::zeros(cov.dim()),
            cov,
        }
    }

    pub fn dim(&self) -> usize {
        self.cov.dim()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &PsdMatrix {
        &self.cov
    }
}

/// Gelbrich ball of mean-covariance pairs around a nominal pair.
///
/// Caches the spectral data of the nominal covariance that the oracle and the
/// constraint evaluations need repeatedly.
#[derive(Debug, Clone)]
pub struct AmbiguityBall {
    center: MomentPair,
    radius: f64,
    sqrt_cov: PsdMatrix,
    lambda_min: f64,
    trace: f64,
}

impl AmbiguityBall {
    pub fn new(center: MomentPair, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::InvalidInput(format!("radius must be finite and >= 0, got {radius}")));
        }
        let eig = sym_eig(center.cov().as_symmetric());
        let sqrt_cov =
            PsdMatrix::from_psd_product(eig.reconstruct_with(|l| l.max(0.0).sqrt()));
        Ok(Self {
            lambda_min: eig.min().max(0.0),
            trace: center.cov().trace(),
            center,
            radius,
            sqrt_cov,
        })
    }

    pub fn center(&self) -> &MomentPair {
        &self.center
    }

    pub fn nominal_cov(&self) -> &PsdMatrix {
        self.center.cov()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    /// `Σ̂^{1/2}`.
    pub fn sqrt_cov(&self) -> &PsdMatrix {
        &self.sqrt_cov
    }

    /// Smallest eigenvalue of the nominal covariance (clamped at 0).
    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn nominal_trace(&self) -> f64 {
        self.trace
    }

    /// Membership tolerance `1e-8 (1 + ρ²)`.
    pub fn feas_tol(&self) -> f64 {
        1e-8 * (1.0 + self.radius * self.radius)
    }

    /// Same ball with a different radius, reusing the cached decomposition.
    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::InvalidInput(format!("radius must be finite and >= 0, got {radius}")));
        }
        Ok(Self {
            radius,
            ..self.clone()
        })
    }

    /// Whether `sigma` satisfies the covariance constraint up to [`Self::feas_tol`].
    pub fn contains_cov(&self, sigma: &PsdMatrix) -> Result<bool> {
        Ok(cov_constraint_value(sigma, self)? <= self.feas_tol())
    }
}

fn squared_gelbrich(p1: &MomentPair, p2: &MomentPair) -> Result<f64> {
    if p1.dim() != p2.dim() {
        return Err(dim_mismatch("gelbrich_distance", p1.dim(), p2.dim()));
    }
    let mean_sq = (p1.mean() - p2.mean()).norm_squared();
    let cross = trace_sqrt_product(p1.cov(), p2.cov())?;
    let cov_term = p1.cov().trace() + p2.cov().trace() - 2.0 * cross;
    // Analytically nonnegative; rounding can leave a tiny negative residue.
    Ok(mean_sq + cov_term.max(0.0))
}

/// Gelbrich distance between two mean-covariance pairs.
pub fn gelbrich_distance(p1: &MomentPair, p2: &MomentPair) -> Result<f64> {
    Ok(squared_gelbrich(p1, p2)?.sqrt())
}

/// `Tr[Σ + Σ̂ − 2(Σ̂^{1/2} Σ Σ̂^{1/2})^{1/2}] − ρ²`; nonpositive iff `Σ` is
/// admissible in the ball (with the nominal mean).
pub fn cov_constraint_value(sigma: &PsdMatrix, ball: &AmbiguityBall) -> Result<f64> {
    if sigma.dim() != ball.dim() {
        return Err(dim_mismatch("cov_constraint_value", ball.dim(), sigma.dim()));
    }
    let cross = trace_sqrt_product_with_root(sigma, ball.sqrt_cov());
    Ok(sigma.trace() + ball.nominal_trace() - 2.0 * cross - ball.radius * ball.radius)
}

/// Upper bound `(ρ + sqrt(Tr Σ̂))²` on `Tr Σ` over the ball.
pub fn trace_bound(ball: &AmbiguityBall) -> f64 {
    let r = ball.radius + ball.nominal_trace().max(0.0).sqrt();
    r * r
}

/// Squared Gelbrich distance between the stacked pairs
/// `((μx¹, μw¹), diag(Σx¹, Σw¹))` and `((μx², μw²), diag(Σx², Σw²))`.
pub fn product_gelbrich_sq(
    px1: &MomentPair,
    pw1: &MomentPair,
    px2: &MomentPair,
    pw2: &MomentPair,
) -> Result<f64> {
    if px1.dim() != px2.dim() {
        return Err(dim_mismatch("product_gelbrich_sq signal blocks", px1.dim(), px2.dim()));
    }
    if pw1.dim() != pw2.dim() {
        return Err(dim_mismatch("product_gelbrich_sq noise blocks", pw1.dim(), pw2.dim()));
    }
    let stack = |px: &MomentPair, pw: &MomentPair| -> MomentPair {
        let mean = DVector::from_iterator(
            px.dim() + pw.dim(),
            px.mean().iter().chain(pw.mean().iter()).copied(),
        );
        let cov = PsdMatrix::from_psd_product(block_diag(px.cov(), pw.cov()));
        MomentPair { mean, cov }
    };
    squared_gelbrich(&stack(px1, pw1), &stack(px2, pw2))
}

/// Wasserstein-2 distance between `N(μ₁,Σ₁)` and `N(μ₂,Σ₂)`, evaluated as the
/// transport cost of the linear Monge map
/// `T = Σ₁^{-1/2} (Σ₁^{1/2} Σ₂ Σ₁^{1/2})^{1/2} Σ₁^{-1/2}`.
///
/// Requires `Σ₁ ≻ 0`. The same value holds for any pair of elliptical
/// distributions sharing a characteristic generator.
pub fn normal_wasserstein_distance(p1: &MomentPair, p2: &MomentPair) -> Result<f64> {
    if p1.dim() != p2.dim() {
        return Err(dim_mismatch("normal_wasserstein_distance", p1.dim(), p2.dim()));
    }
    let d = p1.dim();
    let eig = sym_eig(p1.cov().as_symmetric());
    if eig.min() <= ABS_FLOOR * eig.max().max(1.0) {
        return Err(Error::NotPositiveDefinite(
            "first covariance must be positive definite".into(),
        ));
    }
    let root = eig.reconstruct_with(f64::sqrt);
    let inv_root = eig.reconstruct_with(|l| 1.0 / l.sqrt());
    let middle = PsdMatrix::from_psd_product(&root * p2.cov().as_matrix() * &root);
    let map = &inv_root * psd_sqrt(&middle).as_matrix() * &inv_root;
    let residual = DMatrix::identity(d, d) - map;
    let cost = (&residual * p1.cov().as_matrix() * residual.transpose()).trace();
    Ok(((p1.mean() - p2.mean()).norm_squared() + cost.max(0.0)).sqrt())
}
