//! Affine estimators, their average and worst-case risks, and the robust
//! (Nash) estimator built from a least favorable covariance pair.

use nalgebra::{DMatrix, DVector};

use crate::dual::{fw_solve, CovariancePair, FwConfig, ProblemInstance, SolveReport};
use crate::dual::{closed_form_inner_max, oracle_linmax};
use crate::error::{dim_mismatch, Error, Result};
use crate::gelbrich::{AmbiguityBall, MomentPair};
use crate::linalg::SymmetricMatrix;

/// Oracle precision used when evaluating worst-case risks.
const CERT_DELTA: f64 = 1.0 - 1e-9;

/// Bisection width used when evaluating worst-case risks.
const CERT_BISECT_TOL: f64 = 1e-15;

/// Relative tolerance for recognizing a centered intercept.
const CENTER_TOL: f64 = 1e-8;

/// The estimator `ψ(y) = A y + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineEstimator {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl AffineEstimator {
    /// `a` is `n × m`, `b` has length `n`.
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(dim_mismatch("intercept length vs rows of A", a.nrows(), b.len()));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("estimator has non-finite entries".into()));
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    /// `K = I − A H`.
    pub fn residual_map(&self, h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_model(h)?;
        Ok(DMatrix::identity(h.ncols(), h.ncols()) - &self.a * h)
    }

    pub fn apply(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.a * y + &self.b
    }

    /// The intercept that makes the estimate unbiased at the given means,
    /// `K μx − A μw`.
    pub fn centered_intercept(
        &self,
        h: &DMatrix<f64>,
        mu_x: &DVector<f64>,
        mu_w: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        let k = self.residual_map(h)?;
        Ok(k * mu_x - &self.a * mu_w)
    }

    fn check_model(&self, h: &DMatrix<f64>) -> Result<()> {
        if self.a.nrows() != h.ncols() {
            return Err(dim_mismatch("rows of A vs columns of H", h.ncols(), self.a.nrows()));
        }
        if self.a.ncols() != h.nrows() {
            return Err(dim_mismatch("columns of A vs rows of H", h.nrows(), self.a.ncols()));
        }
        Ok(())
    }
}

/// Robust estimator together with its least favorable prior.
///
/// The least favorable prior is the normal distribution with means
/// `prior_means` and covariances `least_favorable`.
#[derive(Debug, Clone)]
pub struct NashSolution {
    pub estimator: AffineEstimator,
    pub least_favorable: CovariancePair,
    pub prior_means: (DVector<f64>, DVector<f64>),
    /// Bayes risk of the least favorable prior (dual value).
    pub value: f64,
    /// Worst-case risk of the estimator over the ambiguity set (primal value).
    pub worst_case: f64,
    /// Certified duality gap `worst_case − value`.
    pub gap: f64,
    pub report: SolveReport,
}

/// Bayes estimator for the covariance pair and the instance's nominal means:
/// `A = Σx Hᵀ (H Σx Hᵀ + Σw)⁻¹`, `b = μ̂x − A (H μ̂x + μ̂w)`.
pub fn nash_estimator(pair: &CovariancePair, instance: &ProblemInstance) -> Result<AffineEstimator> {
    let h = instance.h();
    let eval = crate::dual::objective::Evaluation::new(pair, h)?;
    let mu_x = instance.nominal_x().mean();
    let mu_w = instance.nominal_w().mean();
    let b = mu_x - &eval.gain * (h * mu_x + mu_w);
    AffineEstimator::new(eval.gain, b)
}

/// Bayes estimator for the nominal moments.
pub fn nominal_bayes(instance: &ProblemInstance) -> Result<AffineEstimator> {
    nash_estimator(&CovariancePair::nominal(instance), instance)
}

/// Mean square error `E‖x − A(Hx + w) − b‖²` for uncorrelated `x` and `w`
/// with the given moments.
pub fn average_risk(
    est: &AffineEstimator,
    mx: &MomentPair,
    mw: &MomentPair,
    h: &DMatrix<f64>,
) -> Result<f64> {
    let k = est.residual_map(h)?;
    if mx.dim() != h.ncols() {
        return Err(dim_mismatch("signal moments vs columns of H", h.ncols(), mx.dim()));
    }
    if mw.dim() != h.nrows() {
        return Err(dim_mismatch("noise moments vs rows of H", h.nrows(), mw.dim()));
    }
    let a = est.a();
    let b = est.b();
    let (mu_x, mu_w) = (mx.mean(), mw.mean());
    let ktk = k.transpose() * &k;
    let ata = a.transpose() * a;
    let second_x = mx.cov().as_matrix() + mu_x * mu_x.transpose();
    let second_w = mw.cov().as_matrix() + mu_w * mu_w.transpose();
    let k_mu_x = &k * mu_x;
    let a_mu_w = a * mu_w;
    Ok(ktk.dot(&second_x) + ata.dot(&second_w) + b.norm_squared()
        - 2.0 * k_mu_x.dot(&a_mu_w)
        - 2.0 * b.dot(&(k_mu_x - &a_mu_w)))
}

/// `sup ⟨D, Σ⟩` over the ball's covariances, as an upper bound tight to the
/// certification precision.
fn linear_sup(ball: &AmbiguityBall, d: DMatrix<f64>) -> Result<f64> {
    let center = ball.nominal_cov();
    let d = SymmetricMatrix::symmetrized(d);
    let out = oracle_linmax(ball, center, &d, CERT_DELTA, CERT_BISECT_TOL)?;
    Ok(out.bound + center.dot(d.as_matrix()))
}

/// Worst-case mean square error of `est` over all distributions whose moments
/// lie in the instance's ambiguity set.
///
/// Only defined for the centered intercept `b = (I − AH) μ̂x − A μ̂w`, for which
/// the supremum over the means is attained at the nominal means and the
/// problem splits into two linear maximizations over covariance balls.
pub fn worst_case_risk(est: &AffineEstimator, instance: &ProblemInstance) -> Result<f64> {
    let h = instance.h();
    let centered =
        est.centered_intercept(h, instance.nominal_x().mean(), instance.nominal_w().mean())?;
    let deviation = (est.b() - &centered).norm();
    if deviation > CENTER_TOL * (1.0 + est.b().norm()) {
        return Err(Error::UncenteredIntercept { deviation });
    }
    let k = est.residual_map(h)?;
    let sup_x = linear_sup(instance.ball_x(), k.transpose() * &k)?;
    let sup_w = linear_sup(instance.ball_w(), est.a().transpose() * est.a())?;
    Ok(sup_x + sup_w)
}

/// Objective of the primal program in `(A, γx, γw)`:
/// `γx(ρx² − Tr Σ̂x) + γx² ⟨(γx I − KᵀK)⁻¹, Σ̂x⟩ + γw(ρw² − Tr Σ̂w) + γw² ⟨(γw I − AᵀA)⁻¹, Σ̂w⟩`.
///
/// For fixed `A` it upper-bounds the worst-case risk of the centered affine
/// estimator with sensitivity `A`, with equality at the minimizing multipliers.
pub fn primal_objective_gamma(
    a: &DMatrix<f64>,
    gamma_x: f64,
    gamma_w: f64,
    instance: &ProblemInstance,
) -> Result<f64> {
    let est = AffineEstimator::new(a.clone(), DVector::zeros(a.nrows()))?;
    let k = est.residual_map(instance.h())?;
    let term = |ball: &AmbiguityBall, d: DMatrix<f64>, gamma: f64| -> Result<f64> {
        let (inner, _) = closed_form_inner_max(&SymmetricMatrix::symmetrized(d), gamma, ball.nominal_cov())?;
        let rho = ball.radius();
        Ok(gamma * (rho * rho - ball.nominal_trace()) + inner)
    };
    Ok(term(instance.ball_x(), k.transpose() * &k, gamma_x)?
        + term(instance.ball_w(), a.transpose() * a, gamma_w)?)
}

/// Solves the dual program and certifies the resulting robust estimator.
pub fn solve_nash(instance: &ProblemInstance, config: &FwConfig) -> Result<NashSolution> {
    let report = fw_solve(instance, config)?;
    let regularized = crate::dual::regularize(instance)?;
    let work = regularized.as_ref().unwrap_or(instance);
    let pair = report.pair.clone();
    let estimator = nash_estimator(&pair, work)?;
    let value = report.objective;
    let worst_case = worst_case_risk(&estimator, work)?;
    Ok(NashSolution {
        estimator,
        least_favorable: pair,
        prior_means: (
            instance.nominal_x().mean().clone(),
            instance.nominal_w().mean().clone(),
        ),
        value,
        worst_case,
        gap: worst_case - value,
        report,
    })
}

/// Nominal moments built from a covariance pair and the instance's means.
pub fn moments_from_pair(
    pair: &CovariancePair,
    instance: &ProblemInstance,
) -> Result<(MomentPair, MomentPair)> {
    Ok((
        MomentPair::new(instance.nominal_x().mean().clone(), pair.sigma_x.clone())?,
        MomentPair::new(instance.nominal_w().mean().clone(), pair.sigma_w.clone())?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::PsdMatrix;

    fn identity_instance(n: usize, mu_x: DVector<f64>, rho: f64) -> ProblemInstance {
        ProblemInstance::new(
            DMatrix::identity(n, n),
            MomentPair::new(mu_x, PsdMatrix::identity(n)).unwrap(),
            MomentPair::centered(PsdMatrix::identity(n)),
            rho,
            rho,
        )
        .unwrap()
    }

    #[test]
    fn nominal_bayes_examples() {
        let inst = identity_instance(3, DVector::zeros(3), 1.0);
        let est = nominal_bayes(&inst).unwrap();
        assert!((est.a() - DMatrix::identity(3, 3) * 0.5).norm() < 1e-14);
        assert!(est.b().norm() < 1e-14);

        let e1 = DVector::from_column_slice(&[1.0, 0.0, 0.0]);
        let est = nominal_bayes(&identity_instance(3, e1.clone(), 1.0)).unwrap();
        assert!((est.b() - e1 * 0.5).norm() < 1e-14);
    }

    #[test]
    fn nash_scalar_example() {
        let inst = identity_instance(1, DVector::zeros(1), 1.0);
        let pair = CovariancePair::new(
            PsdMatrix::from_diagonal(&[4.0]).unwrap(),
            PsdMatrix::identity(1),
        );
        let est = nash_estimator(&pair, &inst).unwrap();
        assert!((est.a()[(0, 0)] - 0.8).abs() < 1e-14);
        assert_eq!(est.b()[0], 0.0);
    }

    #[test]
    fn average_risk_examples() {
        let h = DMatrix::identity(2, 2);
        let mx = MomentPair::new(
            DVector::from_column_slice(&[1.0, 2.0]),
            PsdMatrix::from_diagonal(&[3.0, 1.0]).unwrap(),
        )
        .unwrap();
        let mw = MomentPair::centered(PsdMatrix::identity(2));
        let zero = AffineEstimator::new(DMatrix::zeros(2, 2), DVector::zeros(2)).unwrap();
        assert!((average_risk(&zero, &mx, &mw, &h).unwrap() - 9.0).abs() < 1e-12);

        let perfect = AffineEstimator::new(DMatrix::identity(2, 2), DVector::zeros(2)).unwrap();
        let silent = MomentPair::centered(PsdMatrix::zeros(2));
        assert!(average_risk(&perfect, &mx, &silent, &h).unwrap().abs() < 1e-12);
    }

    #[test]
    fn uncentered_intercept_is_rejected() {
        let inst = identity_instance(2, DVector::zeros(2), 1.0);
        let est = AffineEstimator::new(DMatrix::zeros(2, 2), DVector::from_element(2, 1.0)).unwrap();
        assert!(matches!(
            worst_case_risk(&est, &inst),
            Err(Error::UncenteredIntercept { .. })
        ));
    }

    #[test]
    fn worst_case_of_zero_estimator_is_trace_bound() {
        let inst = identity_instance(3, DVector::zeros(3), 0.7);
        let est = AffineEstimator::new(DMatrix::zeros(3, 3), DVector::zeros(3)).unwrap();
        let v = worst_case_risk(&est, &inst).unwrap();
        let expected = (0.7 + 3f64.sqrt()).powi(2);
        assert!((v - expected).abs() < 1e-8 * expected, "{v} vs {expected}");
    }

    #[test]
    fn primal_objective_scalar_expansion() {
        // n = m = 1, H = 1, A = 0: K = 1, AᵀA = 0, Σ̂ = 1, ρ = 1:
        // γx(1 − 1) + γx²/(γx − 1) + γw(1 − 1) + γw²/γw.
        let inst = identity_instance(1, DVector::zeros(1), 1.0);
        let a = DMatrix::zeros(1, 1);
        let v = primal_objective_gamma(&a, 3.0, 2.0, &inst).unwrap();
        assert!((v - (4.5 + 2.0)).abs() < 1e-12);
        assert!(matches!(
            primal_objective_gamma(&a, 1.0, 2.0, &inst),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(primal_objective_gamma(&a, 1e9, 1e9, &inst).unwrap() > 1e8);
    }
}
