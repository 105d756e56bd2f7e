//! Frank-Wolfe iterations for the dual program with three stepsize rules.
//!
//! The problem is a concave maximization. Iterations are carried out on
//! `h = −f` so that the backtracking condition reads as the usual
//! quadratic-majorant test; everything reported is in terms of `f`.

use std::time::Instant;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::gelbrich::MomentPair;
use crate::linalg::{sym_eig, PsdMatrix, ABS_FLOOR};

use super::objective::Evaluation;
use super::oracle::oracle_linmax;
use super::regularity::regularity_constants;
use super::{CovariancePair, ProblemInstance};

/// Cap on backtracking steps within one iteration.
const MAX_BACKTRACKS: usize = 100;

/// Floor applied to the eigenvalues of a (near-)singular nominal signal
/// covariance.
const SIGNAL_EIG_FLOOR: f64 = 1e-12;

/// Stepsize rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepRule {
    /// `η_t = 2 / (2 + t)`.
    Vanilla,
    /// `η_t = min(1, g_t / (β ‖d_t‖²))` with the global smoothness constant `β`.
    Adaptive,
    /// As `Adaptive` with `β` replaced by a backtracked local estimate `β_t`.
    FullyAdaptive,
}

impl StepRule {
    pub const ALL: [StepRule; 3] = [StepRule::Vanilla, StepRule::Adaptive, StepRule::FullyAdaptive];

    pub fn name(self) -> &'static str {
        match self {
            StepRule::Vanilla => "vanilla",
            StepRule::Adaptive => "adaptive",
            StepRule::FullyAdaptive => "fully_adaptive",
        }
    }
}

impl std::str::FromStr for StepRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vanilla" => Ok(StepRule::Vanilla),
            "adaptive" => Ok(StepRule::Adaptive),
            "fully_adaptive" | "fully-adaptive" => Ok(StepRule::FullyAdaptive),
            other => Err(Error::InvalidConfig(format!("unknown variant {other:?}"))),
        }
    }
}

impl std::fmt::Display for StepRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Solver parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FwConfig {
    pub variant: StepRule,
    /// Oracle precision in `(0, 1)`.
    pub delta: f64,
    /// Initial smoothness estimate `β₋₁` for the fully adaptive rule.
    pub beta_init: f64,
    /// Backtracking growth factor, `> 1`.
    pub tau: f64,
    /// Per-iteration shrink factor of the smoothness estimate, `> 1`.
    pub zeta: f64,
    /// Stop once the surrogate gap is at most this.
    pub gap_tol: f64,
    pub max_iters: usize,
    /// Relative bisection interval width at which the oracle gives up.
    pub bisect_tol: f64,
}

impl Default for FwConfig {
    fn default() -> Self {
        Self {
            variant: StepRule::FullyAdaptive,
            delta: 0.99,
            beta_init: 1.0,
            tau: 2.0,
            zeta: 2.0,
            gap_tol: 1e-3,
            max_iters: 500,
            bisect_tol: 1e-12,
        }
    }
}

impl FwConfig {
    pub fn with_variant(variant: StepRule) -> Self {
        Self {
            variant,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if !(self.beta_init > 0.0) || !self.beta_init.is_finite() {
            return bad(format!("beta_init must be positive, got {}", self.beta_init));
        }
        if !(self.tau > 1.0) || !self.tau.is_finite() {
            return bad(format!("tau must exceed 1, got {}", self.tau));
        }
        if !(self.zeta > 1.0) || !self.zeta.is_finite() {
            return bad(format!("zeta must exceed 1, got {}", self.zeta));
        }
        if !(self.gap_tol > 0.0) {
            return bad(format!("gap_tol must be positive, got {}", self.gap_tol));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive".into());
        }
        if !(self.bisect_tol > 0.0 && self.bisect_tol < 1.0) {
            return bad(format!("bisect_tol must lie in (0, 1), got {}", self.bisect_tol));
        }
        Ok(())
    }
}

/// State of one iterate `s_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `f(s_t)`.
    pub objective: f64,
    /// Surrogate gap `g_t = ⟨L̃x − Σx, D_x⟩ + ⟨L̃w − Σw, D_w⟩`.
    pub gap: f64,
    /// Step taken from `s_t`; zero on the final record.
    pub step: f64,
    /// Smoothness value used for the step; `None` for the vanilla rule.
    pub beta: Option<f64>,
    /// Backtracking steps spent (fully adaptive rule only).
    pub backtracks: usize,
    /// Seconds since the solve started, measured after the step.
    pub elapsed: f64,
}

/// Outcome of [`fw_solve`].
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub records: Vec<IterationRecord>,
    /// The last iterate.
    pub pair: CovariancePair,
    /// `f` at the last iterate.
    pub objective: f64,
    /// Surrogate gap at the last iterate.
    pub gap: f64,
    /// Number of steps taken.
    pub iterations: usize,
    pub converged: bool,
    pub variant: StepRule,
    /// Wall time of the whole solve in seconds.
    pub elapsed: f64,
}

/// Replaces a singular nominal signal covariance by its eigenvalue-clamped
/// version and rejects a singular noise covariance.
pub(crate) fn regularize(instance: &ProblemInstance) -> Result<Option<ProblemInstance>> {
    let w_eig = sym_eig(instance.nominal_w().cov().as_symmetric());
    if w_eig.min() <= ABS_FLOOR * w_eig.max().max(1.0) {
        return Err(Error::NotPositiveDefinite(
            "nominal noise covariance must be positive definite".into(),
        ));
    }
    let x_eig = sym_eig(instance.nominal_x().cov().as_symmetric());
    let floor = SIGNAL_EIG_FLOOR * x_eig.max().max(1.0);
    if x_eig.min() > floor {
        return Ok(None);
    }
    log::warn!(
        "nominal signal covariance is near-singular (min eigenvalue {:e}); clamping at {:e}, \
         convergence may be sublinear",
        x_eig.min(),
        2.0 * floor
    );
    // Twice the detection floor keeps the clamped spectrum clear of the
    // oracle's definiteness check after rounding.
    let clamped = PsdMatrix::from_psd_product(x_eig.reconstruct_with(|l| l.max(2.0 * floor)));
    let nominal_x = MomentPair::new(instance.nominal_x().mean().clone(), clamped)?;
    Ok(Some(ProblemInstance::new(
        instance.h().clone(),
        nominal_x,
        instance.nominal_w().clone(),
        instance.rho_x(),
        instance.rho_w(),
    )?))
}

struct Direction {
    l_x: PsdMatrix,
    l_w: PsdMatrix,
    d_x: DMatrix<f64>,
    d_w: DMatrix<f64>,
    gap: f64,
    norm_sq: f64,
}

fn direction(
    s: &CovariancePair,
    eval: &Evaluation,
    instance: &ProblemInstance,
    config: &FwConfig,
) -> Result<Direction> {
    let grads = eval.gradients(instance.h());
    let ox = oracle_linmax(
        instance.ball_x(),
        &s.sigma_x,
        grads.d_x.as_symmetric(),
        config.delta,
        config.bisect_tol,
    )?;
    let ow = oracle_linmax(
        instance.ball_w(),
        &s.sigma_w,
        grads.d_w.as_symmetric(),
        config.delta,
        config.bisect_tol,
    )?;
    let d_x = ox.l.as_matrix() - s.sigma_x.as_matrix();
    let d_w = ow.l.as_matrix() - s.sigma_w.as_matrix();
    let gap = d_x.dot(grads.d_x.as_matrix()) + d_w.dot(grads.d_w.as_matrix());
    let norm_sq = d_x.norm_squared() + d_w.norm_squared();
    Ok(Direction {
        l_x: ox.l,
        l_w: ow.l,
        d_x,
        d_w,
        gap,
        norm_sq,
    })
}

fn step_to(s: &CovariancePair, dir: &Direction, eta: f64) -> CovariancePair {
    if eta == 1.0 {
        return CovariancePair::new(dir.l_x.clone(), dir.l_w.clone());
    }
    CovariancePair::new(
        PsdMatrix::from_psd_product(s.sigma_x.as_matrix() + &dir.d_x * eta),
        PsdMatrix::from_psd_product(s.sigma_w.as_matrix() + &dir.d_w * eta),
    )
}

fn adaptive_step(gap: f64, beta: f64, norm_sq: f64) -> f64 {
    if norm_sq <= 0.0 {
        return 0.0;
    }
    (gap / (beta * norm_sq)).clamp(0.0, 1.0)
}

/// Maximizes `f` over the product of the two Gelbrich covariance balls,
/// starting from the nominal covariances.
///
/// Every iterate is a convex combination of feasible points and hence
/// feasible. The solve stops once the surrogate gap drops to
/// `config.gap_tol` or after `config.max_iters` steps.
pub fn fw_solve(instance: &ProblemInstance, config: &FwConfig) -> Result<SolveReport> {
    config.validate()?;
    let start = Instant::now();
    let regularized = regularize(instance)?;
    let work = regularized.as_ref().unwrap_or(instance);
    let h = work.h();

    let global_beta = match config.variant {
        StepRule::Adaptive => Some(regularity_constants(work)?.beta),
        _ => None,
    };

    let mut s = CovariancePair::nominal(work);
    let mut eval = Evaluation::new(&s, h)?;
    let mut beta_prev = config.beta_init;
    let mut records = Vec::new();
    let converged;
    let last_gap;
    let mut t = 0;
    loop {
        let dir = direction(&s, &eval, work, config)?;
        if dir.gap <= config.gap_tol || t >= config.max_iters {
            converged = dir.gap <= config.gap_tol;
            last_gap = dir.gap;
            records.push(IterationRecord {
                iteration: t,
                objective: eval.value,
                gap: dir.gap,
                step: 0.0,
                beta: None,
                backtracks: 0,
                elapsed: start.elapsed().as_secs_f64(),
            });
            break;
        }

        let (eta, beta, backtracks, next, next_eval) = match config.variant {
            StepRule::Vanilla => {
                let eta = 2.0 / (2.0 + t as f64);
                let next = step_to(&s, &dir, eta);
                let next_eval = Evaluation::new(&next, h)?;
                (eta, None, 0, next, next_eval)
            }
            StepRule::Adaptive => {
                let beta = global_beta.expect("computed for the adaptive rule");
                let eta = adaptive_step(dir.gap, beta, dir.norm_sq);
                let next = step_to(&s, &dir, eta);
                let next_eval = Evaluation::new(&next, h)?;
                (eta, Some(beta), 0, next, next_eval)
            }
            StepRule::FullyAdaptive => {
                // Minimization form: h = −f, accept when
                // h(s + ηd) ≤ h(s) − η g + η² β / 2 ‖d‖².
                let h_s = -eval.value;
                let mut beta = beta_prev / config.zeta;
                let mut eta = adaptive_step(dir.gap, beta, dir.norm_sq);
                let mut backtracks = 0;
                loop {
                    let next = step_to(&s, &dir, eta);
                    let next_eval = Evaluation::new(&next, h)?;
                    let majorant = h_s - eta * dir.gap + 0.5 * eta * eta * beta * dir.norm_sq;
                    if -next_eval.value <= majorant || backtracks >= MAX_BACKTRACKS {
                        break (eta, Some(beta), backtracks, next, next_eval);
                    }
                    beta *= config.tau;
                    eta = adaptive_step(dir.gap, beta, dir.norm_sq);
                    backtracks += 1;
                }
            }
        };
        if let Some(b) = beta {
            beta_prev = b;
        }
        records.push(IterationRecord {
            iteration: t,
            objective: eval.value,
            gap: dir.gap,
            step: eta,
            beta,
            backtracks,
            elapsed: start.elapsed().as_secs_f64(),
        });
        s = next;
        eval = next_eval;
        t += 1;
    }

    Ok(SolveReport {
        records,
        objective: eval.value,
        gap: last_gap,
        pair: s,
        iterations: t,
        converged,
        variant: config.variant,
        elapsed: start.elapsed().as_secs_f64(),
    })
}
