use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};

use crate::error::{dim_mismatch, Error, Result};
use crate::gelbrich::{AmbiguityBall, MomentPair};
use crate::linalg::PsdMatrix;

/// Observation model `y = H x + w` with nominal moments and ambiguity radii.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    h: DMatrix<f64>,
    ball_x: AmbiguityBall,
    ball_w: AmbiguityBall,
}

impl ProblemInstance {
    /// `h` is `m × n` where `n` is the signal and `m` the noise dimension.
    pub fn new(
        h: DMatrix<f64>,
        nominal_x: MomentPair,
        nominal_w: MomentPair,
        rho_x: f64,
        rho_w: f64,
    ) -> Result<Self> {
        if h.ncols() != nominal_x.dim() {
            return Err(dim_mismatch("H columns vs signal dimension", nominal_x.dim(), h.ncols()));
        }
        if h.nrows() != nominal_w.dim() {
            return Err(dim_mismatch("H rows vs noise dimension", nominal_w.dim(), h.nrows()));
        }
        if nominal_x.dim() == 0 || nominal_w.dim() == 0 {
            return Err(Error::InvalidInput("dimensions must be positive".into()));
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("H has non-finite entries".into()));
        }
        Ok(Self {
            h,
            ball_x: AmbiguityBall::new(nominal_x, rho_x)?,
            ball_w: AmbiguityBall::new(nominal_w, rho_w)?,
        })
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    /// Signal dimension.
    pub fn n(&self) -> usize {
        self.h.ncols()
    }

    /// Observation (noise) dimension.
    pub fn m(&self) -> usize {
        self.h.nrows()
    }

    pub fn nominal_x(&self) -> &MomentPair {
        self.ball_x.center()
    }

    pub fn nominal_w(&self) -> &MomentPair {
        self.ball_w.center()
    }

    pub fn rho_x(&self) -> f64 {
        self.ball_x.radius()
    }

    pub fn rho_w(&self) -> f64 {
        self.ball_w.radius()
    }

    pub fn ball_x(&self) -> &AmbiguityBall {
        &self.ball_x
    }

    pub fn ball_w(&self) -> &AmbiguityBall {
        &self.ball_w
    }

    /// Same model and nominal moments with different radii.
    pub fn with_radii(&self, rho_x: f64, rho_w: f64) -> Result<Self> {
        Ok(Self {
            h: self.h.clone(),
            ball_x: self.ball_x.with_radius(rho_x)?,
            ball_w: self.ball_w.with_radius(rho_w)?,
        })
    }

    /// Same model, means and radii with the nominal covariances replaced.
    pub fn with_nominal_covs(&self, sigma_x: PsdMatrix, sigma_w: PsdMatrix) -> Result<Self> {
        Self::new(
            self.h.clone(),
            MomentPair::new(self.nominal_x().mean().clone(), sigma_x)?,
            MomentPair::new(self.nominal_w().mean().clone(), sigma_w)?,
            self.rho_x(),
            self.rho_w(),
        )
    }

    /// Hex SHA-256 over the little-endian bytes of the dimensions, `H`
    /// (row-major), the means, the covariances (row-major) and the radii.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.n() as u64).to_le_bytes());
        hasher.update((self.m() as u64).to_le_bytes());
        let mut put_matrix = |m: &DMatrix<f64>| {
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    hasher.update(m[(i, j)].to_le_bytes());
                }
            }
        };
        put_matrix(&self.h);
        put_matrix(self.nominal_x().cov().as_matrix());
        put_matrix(self.nominal_w().cov().as_matrix());
        let put_vector = |h: &mut Sha256, v: &DVector<f64>| {
            for x in v.iter() {
                h.update(x.to_le_bytes());
            }
        };
        put_vector(&mut hasher, self.nominal_x().mean());
        put_vector(&mut hasher, self.nominal_w().mean());
        hasher.update(self.rho_x().to_le_bytes());
        hasher.update(self.rho_w().to_le_bytes());
        hex::encode(hasher.finalize())
    }
}

/// A candidate pair of signal and noise covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariancePair {
    pub sigma_x: PsdMatrix,
    pub sigma_w: PsdMatrix,
}

impl CovariancePair {
    pub fn new(sigma_x: PsdMatrix, sigma_w: PsdMatrix) -> Self {
        Self { sigma_x, sigma_w }
    }

    /// The nominal covariances of `instance`.
    pub fn nominal(instance: &ProblemInstance) -> Self {
        Self {
            sigma_x: instance.nominal_x().cov().clone(),
            sigma_w: instance.nominal_w().cov().clone(),
        }
    }

    /// Whether both blocks satisfy their Gelbrich covariance constraints.
    pub fn is_feasible(&self, instance: &ProblemInstance) -> Result<bool> {
        Ok(instance.ball_x().contains_cov(&self.sigma_x)?
            && instance.ball_w().contains_cov(&self.sigma_w)?)
    }
}
