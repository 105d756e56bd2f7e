//! Linear maximization over a Gelbrich covariance ball,
//!
//! ```text
//! max ⟨L − Σ, D⟩  s.t.  Tr[L + Σ̂ − 2(Σ̂^{1/2} L Σ̂^{1/2})^{1/2}] ≤ ρ²,  L ⪰ λ_min(Σ̂) I,
//! ```
//!
//! solved through its one-dimensional Lagrangian dual
//! `φ(γ) = γ(ρ² + ⟨γ(γI − D)⁻¹ − I, Σ̂⟩) − ⟨Σ, D⟩` on `γ > λ_max(D)`.
//! For a dual point `γ` the matching primal candidate is
//! `L(γ) = γ²(γI − D)⁻¹ Σ̂ (γI − D)⁻¹`, which is feasible exactly when
//! `φ'(γ) ≥ 0`.

use nalgebra::{DMatrix, DVector};

use crate::error::{dim_mismatch, Error, Result};
use crate::gelbrich::{trace_bound, AmbiguityBall};
use crate::linalg::{psd_tol, scale_columns, sym_eig, PsdMatrix, SymmetricMatrix, ABS_FLOOR};

/// Hard cap on bisection steps.
const MAX_BISECTIONS: usize = 200;

/// Frobenius norm below which a gradient counts as zero.
const ZERO_GRADIENT: f64 = 1e-12;

/// Result of one oracle call.
#[derive(Debug, Clone)]
pub struct OracleOutput {
    /// The returned feasible point.
    pub l: PsdMatrix,
    /// Dual multiplier at which `l` was generated.
    pub gamma: f64,
    /// Attained linearized objective `⟨L − Σ, D⟩`.
    pub value: f64,
    /// Upper bound on the maximal linearized objective over the ball.
    pub bound: f64,
    pub bisections: usize,
}

/// `D` in its eigenbasis, with the nominal covariance and the reference
/// point projected onto it.
struct Spectral<'a> {
    ball: &'a AmbiguityBall,
    lambda: DVector<f64>,
    vectors: DMatrix<f64>,
    /// `s_i = v_iᵀ Σ̂ v_i`.
    weights: DVector<f64>,
    /// `⟨Σ, D⟩`.
    ref_dot: f64,
}

impl<'a> Spectral<'a> {
    fn new(ball: &'a AmbiguityBall, sigma_ref: &PsdMatrix, d: &SymmetricMatrix) -> Result<Self> {
        let dim = ball.dim();
        if d.dim() != dim {
            return Err(dim_mismatch("gradient vs ball dimension", dim, d.dim()));
        }
        if sigma_ref.dim() != dim {
            return Err(dim_mismatch("reference point vs ball dimension", dim, sigma_ref.dim()));
        }
        let eig = sym_eig(d);
        if eig.min() < -psd_tol(eig.max()) {
            return Err(Error::InvalidGradient {
                min_eigenvalue: eig.min(),
            });
        }
        let lambda = eig.values.map(|l| l.max(0.0));
        let projected = ball.nominal_cov().as_matrix() * &eig.vectors;
        let weights = DVector::from_iterator(
            dim,
            (0..dim).map(|i| eig.vectors.column(i).dot(&projected.column(i))),
        );
        Ok(Self {
            ball,
            lambda,
            vectors: eig.vectors,
            weights,
            ref_dot: sigma_ref.dot(d.as_matrix()),
        })
    }

    fn lambda_max(&self) -> f64 {
        self.lambda.get(0).copied().unwrap_or(0.0)
    }

    fn rho_sq(&self) -> f64 {
        self.ball.radius() * self.ball.radius()
    }

    fn check_domain(&self, gamma: f64) -> Result<()> {
        if gamma > self.lambda_max() && gamma.is_finite() {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                gamma,
                bound: self.lambda_max(),
            })
        }
    }

    fn terms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.lambda.iter().copied().zip(self.weights.iter().copied())
    }

    fn phi(&self, gamma: f64) -> f64 {
        let sum: f64 = self.terms().map(|(l, s)| s * l / (gamma - l)).sum();
        gamma * (self.rho_sq() + sum) - self.ref_dot
    }

    fn dphi(&self, gamma: f64) -> f64 {
        let sum: f64 = self.terms().map(|(l, s)| s * (l / (gamma - l)).powi(2)).sum();
        self.rho_sq() - sum
    }

    /// `⟨L(γ) − Σ, D⟩`.
    fn primal(&self, gamma: f64) -> f64 {
        let sum: f64 = self
            .terms()
            .map(|(l, s)| s * l * (gamma / (gamma - l)).powi(2))
            .sum();
        sum - self.ref_dot
    }

    fn candidate(&self, gamma: f64) -> PsdMatrix {
        // R = V diag(γ/(γ−λ)) Vᵀ, L = R Σ̂ R.
        let scaled = scale_columns(&self.vectors, self.lambda.iter().map(|&l| gamma / (gamma - l)));
        let r = &scaled * self.vectors.transpose();
        PsdMatrix::from_psd_product(&r * self.ball.nominal_cov().as_matrix() * &r)
    }

    /// `(γ̲, γ̄)`; `γ̲ ≤ γ★ ≤ γ̄` for the dual minimizer `γ★`.
    fn bracket(&self) -> (f64, f64) {
        let l1 = self.lambda_max();
        let rho = self.ball.radius();
        let lo = l1 * (1.0 + self.weights[0].max(0.0).sqrt() / rho);
        let hi = l1 * (1.0 + self.ball.nominal_trace().max(0.0).sqrt() / rho);
        (lo, hi.max(lo))
    }
}

/// Lagrangian dual function `φ(γ)` and its derivative
/// `φ'(γ) = ρ² − ⟨Σ̂, (I − γ(γI − D)⁻¹)²⟩`.
pub fn phi_and_derivative(
    gamma: f64,
    ball: &AmbiguityBall,
    sigma_ref: &PsdMatrix,
    d: &SymmetricMatrix,
) -> Result<(f64, f64)> {
    let sp = Spectral::new(ball, sigma_ref, d)?;
    sp.check_domain(gamma)?;
    Ok((sp.phi(gamma), sp.dphi(gamma)))
}

/// Initial bisection interval `(γ̲, γ̄)` with
/// `γ̲ = λ₁(1 + (v₁ᵀΣ̂v₁)^{1/2}/ρ)` and `γ̄ = λ₁(1 + Tr[Σ̂]^{1/2}/ρ)`.
pub fn bisection_bracket(ball: &AmbiguityBall, d: &SymmetricMatrix) -> Result<(f64, f64)> {
    if !(ball.radius() > 0.0) {
        return Err(Error::InvalidInput("bracket requires a positive radius".into()));
    }
    let sp = Spectral::new(ball, &PsdMatrix::zeros(ball.dim()), d)?;
    Ok(sp.bracket())
}

/// Maximum over `Σ ⪰ 0` of the Lagrangian `⟨D, Σ⟩ − γ Tr[Σ − 2(Σ̂^{1/2}ΣΣ̂^{1/2})^{1/2}]`
/// and its maximizer: `γ²⟨(γI − D)⁻¹, Σ̂⟩` attained at `γ²(γI − D)⁻¹ Σ̂ (γI − D)⁻¹`.
pub fn closed_form_inner_max(
    d: &SymmetricMatrix,
    gamma: f64,
    sigma_hat: &PsdMatrix,
) -> Result<(f64, PsdMatrix)> {
    if d.dim() != sigma_hat.dim() {
        return Err(dim_mismatch("closed_form_inner_max", sigma_hat.dim(), d.dim()));
    }
    let eig = sym_eig(d);
    if !(gamma > eig.max()) || !gamma.is_finite() {
        return Err(Error::OutOfDomain {
            gamma,
            bound: eig.max(),
        });
    }
    let resolvent = eig.reconstruct_with(|l| 1.0 / (gamma - l));
    let value = gamma * gamma * resolvent.dot(sigma_hat.as_matrix());
    let argmax = &resolvent * sigma_hat.as_matrix() * &resolvent * (gamma * gamma);
    Ok((value, PsdMatrix::from_psd_product(argmax)))
}

/// δ-approximate maximizer of `⟨L − Σ, D⟩` over the ball by bisection on `γ`.
///
/// The returned `l` is feasible and satisfies
/// `⟨L − Σ, D⟩ ≥ δ · max_{L' in ball} ⟨L' − Σ, D⟩`. Bisection stops once the
/// midpoint candidate is feasible and δ-optimal relative to `φ`, after
/// [`MAX_BISECTIONS`] steps, or when the interval has shrunk to
/// `bisect_tol · (γ̄ − γ̲)`. In the latter two cases the candidate at the
/// upper end, which is always feasible, is returned.
///
/// A vanishing gradient returns the ball center; so does a zero radius, the
/// ball being a single point.
pub fn oracle_linmax(
    ball: &AmbiguityBall,
    sigma_ref: &PsdMatrix,
    d: &SymmetricMatrix,
    delta: f64,
    bisect_tol: f64,
) -> Result<OracleOutput> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidConfig(format!("delta must lie in (0, 1), got {delta}")));
    }
    if !(bisect_tol > 0.0) {
        return Err(Error::InvalidConfig(format!("bisect_tol must be positive, got {bisect_tol}")));
    }
    let sp = Spectral::new(ball, sigma_ref, d)?;
    let center = ball.nominal_cov();
    let center_output = |gamma: f64, bound: f64| {
        let value = center.dot(d.as_matrix()) - sp.ref_dot;
        OracleOutput {
            l: center.clone(),
            gamma,
            value,
            bound: bound.max(value),
            bisections: 0,
        }
    };

    if ball.radius() == 0.0 {
        return Ok(center_output(f64::INFINITY, f64::NEG_INFINITY));
    }
    if d.norm() <= ZERO_GRADIENT {
        // ⟨L, D⟩ ≤ λ_max(D) Tr[L] ≤ λ_max(D) · (ρ + Tr[Σ̂]^{1/2})².
        let bound = sp.lambda_max() * trace_bound(ball) - sp.ref_dot;
        return Ok(center_output(sp.bracket().1, bound));
    }
    if ball.lambda_min() <= ABS_FLOOR * sym_eig(center.as_symmetric()).max().max(1.0) {
        return Err(Error::NotPositiveDefinite(
            "oracle requires a positive definite nominal covariance".into(),
        ));
    }

    let (lo0, hi0) = sp.bracket();
    let (mut lo, mut hi) = (lo0, hi0);
    let width_tol = bisect_tol * (hi0 - lo0);
    let mut steps = 0;
    while steps < MAX_BISECTIONS {
        steps += 1;
        let mid = 0.5 * (lo + hi);
        let slope = sp.dphi(mid);
        if slope < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if slope > 0.0 && sp.primal(mid) >= delta * sp.phi(mid) {
            return Ok(OracleOutput {
                l: sp.candidate(mid),
                gamma: mid,
                value: sp.primal(mid),
                bound: sp.phi(mid),
                bisections: steps,
            });
        }
        if hi - lo <= width_tol {
            break;
        }
    }
    Ok(OracleOutput {
        l: sp.candidate(hi),
        gamma: hi,
        value: sp.primal(hi),
        bound: sp.phi(hi),
        bisections: steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gelbrich::{cov_constraint_value, MomentPair};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_ball(rho: f64) -> AmbiguityBall {
        AmbiguityBall::new(MomentPair::centered(PsdMatrix::identity(1)), rho).unwrap()
    }

    fn random_psd(d: usize, shift: f64, rng: &mut ChaCha8Rng) -> PsdMatrix {
        let m = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
        PsdMatrix::from_psd_product(&m * m.transpose() + DMatrix::identity(d, d) * shift)
    }

    #[test]
    fn scalar_oracle() {
        let ball = scalar_ball(1.0);
        let d = SymmetricMatrix::identity(1);
        let out = oracle_linmax(&ball, ball.nominal_cov(), &d, 0.99, 1e-12).unwrap();
        assert!((out.gamma - 2.0).abs() < 1e-8);
        assert!((out.l[(0, 0)] - 4.0).abs() < 1e-8);
        assert!((out.value - 3.0).abs() < 1e-8);
        let c = cov_constraint_value(&out.l, &ball).unwrap();
        assert!(c.abs() < 1e-8);
    }

    #[test]
    fn tiny_ball_returns_center() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let center = random_psd(4, 0.5, &mut rng);
        let ball = AmbiguityBall::new(MomentPair::centered(center.clone()), 1e-6).unwrap();
        let d = random_psd(4, 0.0, &mut rng);
        let out = oracle_linmax(&ball, &center, d.as_symmetric(), 0.99, 1e-12).unwrap();
        assert!((out.l.as_matrix() - center.as_matrix()).norm() < 1e-3);
    }

    #[test]
    fn zero_gradient_and_zero_radius_short_circuit() {
        let ball = scalar_ball(1.0);
        let out =
            oracle_linmax(&ball, ball.nominal_cov(), &SymmetricMatrix::zeros(1), 0.99, 1e-12)
                .unwrap();
        assert_eq!(out.l, *ball.nominal_cov());
        assert_eq!(out.value, 0.0);
        let ball = scalar_ball(0.0);
        let out =
            oracle_linmax(&ball, ball.nominal_cov(), &SymmetricMatrix::identity(1), 0.99, 1e-12)
                .unwrap();
        assert_eq!(out.l, *ball.nominal_cov());
    }

    #[test]
    fn rejects_bad_inputs() {
        let ball = scalar_ball(1.0);
        let neg = SymmetricMatrix::from_diagonal(&[-1.0]).unwrap();
        assert!(matches!(
            oracle_linmax(&ball, ball.nominal_cov(), &neg, 0.99, 1e-12),
            Err(Error::InvalidGradient { .. })
        ));
        let singular = AmbiguityBall::new(
            MomentPair::centered(PsdMatrix::from_diagonal(&[1.0, 0.0]).unwrap()),
            1.0,
        )
        .unwrap();
        assert!(matches!(
            oracle_linmax(&singular, singular.nominal_cov(), &SymmetricMatrix::identity(2), 0.9, 1e-12),
            Err(Error::NotPositiveDefinite(_))
        ));
        let one = SymmetricMatrix::identity(1);
        assert!(oracle_linmax(&ball, ball.nominal_cov(), &one, 1.0, 1e-12).is_err());
    }

    #[test]
    fn phi_examples() {
        let ball = scalar_ball(1.0);
        let d = SymmetricMatrix::identity(1);
        let (phi, dphi) = phi_and_derivative(2.0, &ball, ball.nominal_cov(), &d).unwrap();
        assert!(dphi.abs() < 1e-14);
        // γ(ρ² + γ/(γ−1) − 1) − 1 at γ = 2.
        assert!((phi - 3.0).abs() < 1e-14);
        let (_, dphi) = phi_and_derivative(1e8, &ball, ball.nominal_cov(), &d).unwrap();
        assert!((dphi - 1.0).abs() < 1e-12);
        assert!(matches!(
            phi_and_derivative(1.0, &ball, ball.nominal_cov(), &d),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn dphi_matches_central_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let center = random_psd(5, 0.5, &mut rng);
        let ball = AmbiguityBall::new(MomentPair::centered(center.clone()), 0.8).unwrap();
        let d = random_psd(5, 0.0, &mut rng);
        let (lo, hi) = bisection_bracket(&ball, d.as_symmetric()).unwrap();
        for gamma in [lo, 0.5 * (lo + hi), hi, 2.0 * hi] {
            let h = 1e-5 * gamma;
            let f = |g: f64| phi_and_derivative(g, &ball, &center, d.as_symmetric()).unwrap();
            let fd = (f(gamma + h).0 - f(gamma - h).0) / (2.0 * h);
            let (_, dphi) = f(gamma);
            assert!((fd - dphi).abs() <= 1e-6 * dphi.abs().max(1.0), "{fd} vs {dphi}");
        }
    }

    #[test]
    fn inner_max_examples() {
        let (v, s) = closed_form_inner_max(&SymmetricMatrix::zeros(3), 1.0, &PsdMatrix::identity(3))
            .unwrap();
        assert!((v - 3.0).abs() < 1e-14);
        assert!((s.as_matrix() - DMatrix::identity(3, 3)).norm() < 1e-14);
        let (v, s) =
            closed_form_inner_max(&SymmetricMatrix::identity(1), 2.0, &PsdMatrix::identity(1))
                .unwrap();
        assert!((v - 4.0).abs() < 1e-14 && (s[(0, 0)] - 4.0).abs() < 1e-14);
        assert!(
            closed_form_inner_max(&SymmetricMatrix::identity(1), 1.0, &PsdMatrix::identity(1))
                .is_err()
        );
    }

    #[test]
    fn inner_max_substitutes_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let sigma_hat = random_psd(5, 0.3, &mut rng);
        let d = random_psd(5, 0.0, &mut rng);
        let gamma = 1.5 * sym_eig(d.as_symmetric()).max();
        let (v, s) = closed_form_inner_max(d.as_symmetric(), gamma, &sigma_hat).unwrap();
        let cross = crate::linalg::trace_sqrt_product(&s, &sigma_hat).unwrap();
        let lagrangian = d.dot(s.as_matrix()) - gamma * (s.trace() - 2.0 * cross);
        assert!((v - lagrangian).abs() <= 1e-8 * v.abs());
    }

    #[test]
    fn random_oracle_is_feasible_and_bounded_below() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let center = random_psd(5, 0.2, &mut rng);
            let ball = AmbiguityBall::new(MomentPair::centered(center.clone()), rng.random_range(0.1..2.0))
                .unwrap();
            let d = random_psd(5, 0.0, &mut rng);
            let out = oracle_linmax(&ball, &center, d.as_symmetric(), 0.99, 1e-12).unwrap();
            assert!(ball.contains_cov(&out.l).unwrap());
            assert!(out.value >= 0.99 * out.bound - 1e-12);
            let shifted = out.l.as_matrix() - DMatrix::identity(5, 5) * ball.lambda_min();
            assert!(sym_eig(&SymmetricMatrix::symmetrized(shifted)).min() >= -1e-8);
        }
    }
}
