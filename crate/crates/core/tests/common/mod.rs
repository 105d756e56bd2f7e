//! Property suites shared by the `properties` and `acceptance` targets.
//!
//! Each suite runs a deterministic proptest runner for a given number of
//! cases and returns the first failure as a message.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use wmmse::dual::{
    fw_solve, gradients, hessian_quadratic_form, oracle_linmax, CovariancePair,
    FwConfig, ProblemInstance, StepRule,
};
use wmmse::gelbrich::{
    cov_constraint_value, gelbrich_distance, product_gelbrich_sq, trace_bound, AmbiguityBall,
    MomentPair,
};
use wmmse::linalg::{psd_sqrt, sym_eig, PsdMatrix, SymmetricMatrix};

pub const MIN_CASES: u32 = 200;

pub fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

fn wrap<T>(r: wmmse::Result<T>) -> Result<T, TestCaseError> {
    r.map_err(|e| TestCaseError::fail(e.to_string()))
}

// ---------------------------------------------------------------------------
// Strategies

fn entries(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len)
}

/// `M Mᵀ` for a `d × r` factor scaled into `[0, scale]`-ish entries plus `floor·I`.
pub fn psd(d: usize, rank: usize, scale: f64, floor: f64) -> impl Strategy<Value = PsdMatrix> {
    entries(d * rank).prop_map(move |v| {
        let f = DMatrix::from_vec(d, rank, v);
        let m = &f * f.transpose() * (scale / rank as f64) + DMatrix::identity(d, d) * floor;
        PsdMatrix::new(m).unwrap()
    })
}

pub fn spd(d: usize) -> impl Strategy<Value = PsdMatrix> {
    psd(d, d, 3.0, 0.3)
}

/// PSD matrix of random rank, possibly singular.
pub fn any_psd(d: usize) -> impl Strategy<Value = PsdMatrix> {
    (1..=d).prop_flat_map(move |r| psd(d, r, 3.0, 0.0))
}

pub fn vector(d: usize) -> impl Strategy<Value = DVector<f64>> {
    entries(d).prop_map(|v| DVector::from_vec(v) * 2.0)
}

pub fn moment_pair(d: usize) -> impl Strategy<Value = MomentPair> {
    (vector(d), any_psd(d)).prop_map(|(m, c)| MomentPair::new(m, c).unwrap())
}

pub fn symmetric(d: usize) -> impl Strategy<Value = SymmetricMatrix> {
    entries(d * d).prop_map(move |v| SymmetricMatrix::new({
        let m = DMatrix::from_vec(d, d, v);
        (&m + m.transpose()) * 0.5
    })
    .unwrap())
}

/// Random orthogonal matrix from the eigenvectors of a symmetric matrix.
pub fn orthogonal(d: usize) -> impl Strategy<Value = DMatrix<f64>> {
    symmetric(d).prop_map(|s| sym_eig(&s).vectors)
}

/// Small instance with positive definite nominal covariances.
pub fn small_instance() -> impl Strategy<Value = ProblemInstance> {
    (1usize..=3, 1usize..=3).prop_flat_map(|(n, m)| {
        (
            entries(m * n),
            spd(n),
            spd(m),
            vector(n),
            vector(m),
            0.1f64..2.0,
            0.1f64..2.0,
        )
            .prop_map(move |(h, sx, sw, mx, mw, rx, rw)| {
                ProblemInstance::new(
                    DMatrix::from_vec(m, n, h) * 1.5,
                    MomentPair::new(mx, sx).unwrap(),
                    MomentPair::new(mw, sw).unwrap(),
                    rx,
                    rw,
                )
                .unwrap()
            })
    })
}

/// Instance plus a feasible covariance pair (a convex combination of the
/// center and an oracle output).
pub fn instance_and_pair() -> impl Strategy<Value = (ProblemInstance, CovariancePair)> {
    small_instance().prop_flat_map(|inst| {
        let (n, m) = (inst.n(), inst.m());
        (Just(inst), psd(n, n, 1.0, 0.0), psd(m, m, 1.0, 0.0), 0.0f64..1.0)
            .prop_map(|(inst, dx, dw, theta)| {
                let pair = feasible_pair(&inst, &dx, &dw, theta);
                (inst, pair)
            })
    })
}

fn feasible_pair(inst: &ProblemInstance, dx: &PsdMatrix, dw: &PsdMatrix, theta: f64) -> CovariancePair {
    let mix = |ball: &AmbiguityBall, d: &PsdMatrix| {
        let l = oracle_linmax(ball, ball.nominal_cov(), d.as_symmetric(), 0.99, 1e-12)
            .unwrap()
            .l;
        PsdMatrix::new(ball.nominal_cov().as_matrix() * (1.0 - theta) + l.as_matrix() * theta)
            .unwrap()
    };
    CovariancePair::new(mix(inst.ball_x(), dx), mix(inst.ball_w(), dw))
}

// ---------------------------------------------------------------------------
// Suites

/// Symmetry, nonnegativity, triangle inequality, identity of indiscernibles.
pub fn gelbrich_metric_axioms(cases: u32) -> Result<(), String> {
    let strat = (1usize..=4).prop_flat_map(|d| (moment_pair(d), moment_pair(d), moment_pair(d)));
    run(cases, strat, |(a, b, c)| {
        let ab = wrap(gelbrich_distance(&a, &b))?;
        let ba = wrap(gelbrich_distance(&b, &a))?;
        let bc = wrap(gelbrich_distance(&b, &c))?;
        let ac = wrap(gelbrich_distance(&a, &c))?;
        let aa = wrap(gelbrich_distance(&a, &a))?;
        check((ab - ba).abs() <= 1e-8 * (1.0 + ab), || format!("asymmetric: {ab} vs {ba}"))?;
        check(ab >= 0.0 && bc >= 0.0 && ac >= 0.0, || "negative distance".into())?;
        check(ac <= ab + bc + 1e-7, || format!("triangle: {ac} > {ab} + {bc}"))?;
        let scale = a.cov().as_matrix().norm().max(1.0);
        check(aa <= 1e-6 * scale.sqrt(), || format!("G(a, a) = {aa}"))
    })
}

/// For commuting covariances the distance reduces to
/// `‖μ₁ − μ₂‖² + ‖Σ₁^{1/2} − Σ₂^{1/2}‖²_F`, computed here from the shared
/// eigenbasis alone.
pub fn commuting_closed_form(cases: u32) -> Result<(), String> {
    let strat = (1usize..=5).prop_flat_map(|d| {
        (
            orthogonal(d),
            prop::collection::vec(0.0f64..5.0, d),
            prop::collection::vec(0.0f64..5.0, d),
            vector(d),
            vector(d),
        )
    });
    run(cases, strat, |(q, a, b, m1, m2)| {
        let build = |ev: &[f64]| {
            PsdMatrix::new(&q * DMatrix::from_diagonal(&DVector::from_column_slice(ev)) * q.transpose())
                .unwrap()
        };
        let p1 = MomentPair::new(m1.clone(), build(&a)).unwrap();
        let p2 = MomentPair::new(m2.clone(), build(&b)).unwrap();
        let expected: f64 = (&m1 - &m2).norm_squared()
            + a.iter().zip(&b).map(|(x, y)| (x.sqrt() - y.sqrt()).powi(2)).sum::<f64>();
        let got = wrap(gelbrich_distance(&p1, &p2))?.powi(2);
        check((got - expected).abs() <= 1e-8 * (1.0 + expected), || {
            format!("G² = {got}, closed form {expected}")
        })
    })
}

/// The squared distance of block-diagonal stacks is the sum over blocks.
pub fn block_pythagoras(cases: u32) -> Result<(), String> {
    let strat = (1usize..=3, 1usize..=3)
        .prop_flat_map(|(n, m)| (moment_pair(n), moment_pair(m), moment_pair(n), moment_pair(m)));
    run(cases, strat, |(x1, w1, x2, w2)| {
        let stacked = wrap(product_gelbrich_sq(&x1, &w1, &x2, &w2))?;
        let parts = wrap(gelbrich_distance(&x1, &x2))?.powi(2) + wrap(gelbrich_distance(&w1, &w2))?.powi(2);
        check((stacked - parts).abs() <= 1e-8 * (1.0 + parts), || {
            format!("stacked {stacked} vs sum {parts}")
        })
    })
}

/// `‖A₁^{1/2} − A₂^{1/2}‖_F ≤ 2√d ‖A₁ − A₂‖_F^{1/2}`.
pub fn holder_sqrt_bound(cases: u32) -> Result<(), String> {
    let strat = (1usize..=6).prop_flat_map(|d| (Just(d), any_psd(d), any_psd(d)));
    run(cases, strat, |(d, a1, a2)| {
        let lhs = (psd_sqrt(&a1).into_inner() - psd_sqrt(&a2).into_inner()).norm();
        let rhs = 2.0 * (d as f64).sqrt() * (a1.as_matrix() - a2.as_matrix()).norm().sqrt();
        check(lhs <= rhs + 1e-12, || format!("{lhs} > {rhs}"))
    })
}

/// Every Frank-Wolfe iterate lies in both balls and obeys the trace bound.
/// The iterate after `t` steps is reproduced by a solve capped at `t`
/// iterations, the solver being deterministic.
pub fn fw_iterates_feasible(cases: u32) -> Result<(), String> {
    let strat = (small_instance(), prop::sample::select(StepRule::ALL.to_vec()));
    run(cases, strat, |(inst, variant)| {
        let mut config = FwConfig::with_variant(variant);
        config.max_iters = 25;
        let full = wrap(fw_solve(&inst, &config))?;
        for t in 0..=full.iterations {
            let mut capped = config.clone();
            capped.max_iters = t.max(1);
            let pair = if t == 0 {
                CovariancePair::nominal(&inst)
            } else {
                wrap(fw_solve(&inst, &capped))?.pair
            };
            for (sigma, ball) in [(&pair.sigma_x, inst.ball_x()), (&pair.sigma_w, inst.ball_w())] {
                let c = wrap(cov_constraint_value(sigma, ball))?;
                check(c <= ball.feas_tol(), || format!("iterate {t}: constraint {c}"))?;
                let tr = sigma.trace();
                let bound = trace_bound(ball);
                check(tr <= bound * (1.0 + 1e-10), || format!("iterate {t}: trace {tr} > {bound}"))?;
            }
        }
        Ok(())
    })
}

/// The oracle's output dominates `λ_min(Σ̂) I` and is feasible.
pub fn oracle_lower_bound(cases: u32) -> Result<(), String> {
    let strat = (1usize..=5).prop_flat_map(|d| (spd(d), psd(d, d, 2.0, 0.0), 0.05f64..3.0));
    run(cases, strat, |(center, dmat, rho)| {
        let ball = AmbiguityBall::new(MomentPair::centered(center), rho).unwrap();
        let out = wrap(oracle_linmax(&ball, ball.nominal_cov(), dmat.as_symmetric(), 0.99, 1e-12))?;
        let shifted = out.l.as_matrix() - DMatrix::identity(ball.dim(), ball.dim()) * ball.lambda_min();
        let lmin = sym_eig(&SymmetricMatrix::new(shifted).unwrap()).min();
        check(lmin >= -1e-8, || format!("L − λ_min I has eigenvalue {lmin}"))?;
        let c = wrap(cov_constraint_value(&out.l, &ball))?;
        check(c <= ball.feas_tol(), || format!("oracle output infeasible: {c}"))
    })
}

/// Analytic gradients against central differences along random directions.
pub fn gradient_finite_differences(cases: u32) -> Result<(), String> {
    let strat = instance_and_pair().prop_flat_map(|(inst, pair)| {
        let (n, m) = (inst.n(), inst.m());
        (Just(inst), Just(pair), symmetric(n), symmetric(m))
    });
    run(cases, strat, |(inst, pair, dx, dw)| {
        let h = inst.h();
        let g = wrap(gradients(&pair, h))?;
        let scale = pair.sigma_x.as_matrix().norm().max(pair.sigma_w.as_matrix().norm()).max(1.0);
        let step = 1e-5 * scale;
        let f_at = |tx: f64, tw: f64| -> Result<f64, TestCaseError> {
            let sx = pair.sigma_x.as_matrix() + dx.as_matrix() * tx;
            let sw = pair.sigma_w.as_matrix() + dw.as_matrix() * tw;
            evaluate_unconstrained(&sx, &sw, h)
        };
        let fd_x = (f_at(step, 0.0)? - f_at(-step, 0.0)?) / (2.0 * step);
        let fd_w = (f_at(0.0, step)? - f_at(0.0, -step)?) / (2.0 * step);
        let an_x = g.d_x.as_matrix().dot(dx.as_matrix());
        let an_w = g.d_w.as_matrix().dot(dw.as_matrix());
        let tol_x = 1e-4 * an_x.abs().max(1e-3 * g.d_x.as_matrix().norm() * dx.as_matrix().norm());
        let tol_w = 1e-4 * an_w.abs().max(1e-3 * g.d_w.as_matrix().norm() * dw.as_matrix().norm());
        check((fd_x - an_x).abs() <= tol_x.max(1e-9), || format!("∂x: fd {fd_x} vs {an_x}"))?;
        check((fd_w - an_w).abs() <= tol_w.max(1e-9), || format!("∂w: fd {fd_w} vs {an_w}"))
    })
}

/// `f` at symmetric (not necessarily PSD) perturbations of a feasible pair,
/// evaluated directly from its definition with an explicit inverse.
fn evaluate_unconstrained(sx: &DMatrix<f64>, sw: &DMatrix<f64>, h: &DMatrix<f64>) -> Result<f64, TestCaseError> {
    let g = h * sx * h.transpose() + sw;
    let ginv = g
        .try_inverse()
        .ok_or_else(|| TestCaseError::reject("singular G"))?;
    Ok(sx.trace() - (sx * h.transpose() * ginv * h * sx).trace())
}

/// Hessian quadratic form of `−f` against second differences at `t = 1e-3`.
pub fn hessian_second_differences(cases: u32) -> Result<(), String> {
    let strat = instance_and_pair().prop_flat_map(|(inst, pair)| {
        let (n, m) = (inst.n(), inst.m());
        (Just(inst), Just(pair), symmetric(n), symmetric(m))
    });
    run(cases, strat, |(inst, pair, dx, dw)| {
        let h = inst.h();
        let q = wrap(hessian_quadratic_form(&pair, h, &dx, &dw))?;
        let t = 1e-3;
        let f_at = |s: f64| {
            evaluate_unconstrained(
                &(pair.sigma_x.as_matrix() + dx.as_matrix() * s),
                &(pair.sigma_w.as_matrix() + dw.as_matrix() * s),
                h,
            )
        };
        let second = -(f_at(t)? - 2.0 * f_at(0.0)? + f_at(-t)?) / (t * t);
        let dir_sq = dx.as_matrix().norm_squared() + dw.as_matrix().norm_squared();
        let tol = 1e-3 * q.abs().max(1e-3 * dir_sq);
        check(q >= -1e-8, || format!("negative curvature {q}"))?;
        check((q - second).abs() <= tol, || format!("quadratic form {q} vs second difference {second}"))
    })
}

/// `g_t ≥ δ (f★ − f(s_t)) − 1e-6` on every recorded iteration, with `f★`
/// from a high-precision solve.
pub fn surrogate_gap_bound(cases: u32) -> Result<(), String> {
    let strat = (small_instance(), prop::sample::select(StepRule::ALL.to_vec()));
    run(cases, strat, |(inst, variant)| {
        let mut config = FwConfig::with_variant(variant);
        config.max_iters = 100;
        let trace = wrap(fw_solve(&inst, &config))?;
        let f_star = high_precision_value(&inst)?;
        for r in &trace.records {
            let bound = config.delta * (f_star - r.objective) - 1e-6;
            check(r.gap >= bound, || format!("iteration {}: gap {} < {bound}", r.iteration, r.gap))?;
        }
        Ok(())
    })
}

pub fn high_precision_value(inst: &ProblemInstance) -> Result<f64, TestCaseError> {
    let config = FwConfig {
        delta: 1.0 - 1e-9,
        gap_tol: 1e-10,
        max_iters: 20_000,
        bisect_tol: 1e-15,
        ..FwConfig::default()
    };
    let report = wrap(fw_solve(inst, &config))?;
    // The certified optimum lies within the final gap of the last value.
    Ok(report.objective + report.gap / config.delta)
}

/// Adaptive and fully adaptive steps never decrease the objective.
pub fn monotone_objective(cases: u32) -> Result<(), String> {
    let strat = (
        small_instance(),
        prop::sample::select(vec![StepRule::Adaptive, StepRule::FullyAdaptive]),
    );
    run(cases, strat, |(inst, variant)| {
        let mut config = FwConfig::with_variant(variant);
        config.max_iters = 200;
        let report = wrap(fw_solve(&inst, &config))?;
        for w in report.records.windows(2) {
            check(w[1].objective >= w[0].objective - 1e-10, || {
                format!("objective fell from {} to {} at iteration {}", w[0].objective, w[1].objective, w[1].iteration)
            })?;
        }
        Ok(())
    })
}

/// Criterion-6 suites in reporting order.
pub fn acceptance_suites() -> Vec<(&'static str, fn(u32) -> Result<(), String>)> {
    vec![
        ("Gelbrich metric axioms", gelbrich_metric_axioms),
        ("commuting closed form", commuting_closed_form),
        ("block-diagonal Pythagoras", block_pythagoras),
        ("Hölder square-root bound 2√d", holder_sqrt_bound),
        ("trace bound on FW iterates", fw_iterates_feasible),
        ("oracle output ⪰ λ_min(Σ̂)I", oracle_lower_bound),
        ("gradients vs finite differences", gradient_finite_differences),
        ("Hessian vs second differences", hessian_second_differences),
        ("surrogate gap bound on traces", surrogate_gap_bound),
        ("monotone objective", monotone_objective),
    ]
}

// ---------------------------------------------------------------------------
// SDP fixtures

/// `H = 2`, `Σ̂x = 4`, `Σ̂w = 1`, `ρx = 1`, `ρw = 0.5`, zero means.
pub fn scalar_sdp_instance() -> ProblemInstance {
    ProblemInstance::new(
        DMatrix::from_element(1, 1, 2.0),
        MomentPair::centered(PsdMatrix::from_diagonal(&[4.0]).unwrap()),
        MomentPair::centered(PsdMatrix::identity(1)),
        1.0,
        0.5,
    )
    .unwrap()
}

/// Hand-assembled primal file for [`scalar_sdp_instance`]. Variables:
/// `A, γx, γw, Ux, Vx, Uw, Vw`. Blocks:
/// `[Ux, 2γx; 2γx, Vx]`, `[γx − Vx, 1 − 2A; 1 − 2A, 1]`,
/// `[Uw, γw; γw, Vw]`, `[γw − Vw, A; A, 1]`.
pub fn scalar_primal_sdpa(fingerprint: &str, cholesky: bool) -> String {
    let kind = if cholesky { "primal (Cholesky factors)" } else { "primal" };
    format!(
        "* wmmse {kind} SDP
* instance sha256 {fingerprint}
* rho_x 1 rho_w 0.5
* variables A(1x1 row-major) gamma_x gamma_w Ux Vx Uw Vw (upper triangles row-major)
7
4
2 2 2 2
0 -3 -0.75 1 0 1 0
0 2 1 2 -1
0 2 2 2 -1
0 4 2 2 -1
1 2 1 2 -2
1 4 1 2 1
2 1 1 2 2
2 2 1 1 1
3 3 1 2 1
3 4 1 1 1
4 1 1 1 1
5 1 2 2 1
5 2 1 1 -1
6 3 1 1 1
7 3 2 2 1
7 4 1 1 -1
"
    )
}

/// Hand-assembled dual file for [`scalar_sdp_instance`]. Variables:
/// `Σx, Σw, Vx, Vw, U`. Blocks: `[4Σx, Vx; Vx, 1]`, `[Σw, Vw; Vw, 1]`,
/// `diag(1 − Σx − 4 + 2Vx, 0.25 − Σw − 1 + 2Vw)`, `[U, 2Σx; 2Σx, 4Σx + Σw]`,
/// `Σx − 4`, `Σw − 1`, `Vx`, `Vw`.
pub fn scalar_dual_sdpa(fingerprint: &str) -> String {
    format!(
        "* wmmse dual SDP
* instance sha256 {fingerprint}
* rho_x 1 rho_w 0.5
* variables Sigma_x Sigma_w Vx Vw U (upper triangles row-major)
5
8
2 2 -2 2 1 1 1 1
-1 0 0 0 1
0 1 2 2 -1
0 2 2 2 -1
0 3 1 1 3
0 3 2 2 0.75
0 5 1 1 4
0 6 1 1 1
1 1 1 1 4
1 3 1 1 -1
1 4 1 2 2
1 4 2 2 4
1 5 1 1 1
2 2 1 1 1
2 3 2 2 -1
2 4 2 2 1
2 6 1 1 1
3 1 1 2 1
3 3 1 1 2
3 7 1 1 1
4 2 1 2 1
4 3 2 2 2
4 8 1 1 1
5 4 1 1 1
"
    )
}
