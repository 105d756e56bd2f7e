//! Seeded instance generation and the scalability and regret experiments.
//!
//! All randomness comes from ChaCha8 generators. Each run draws from its own
//! stream of the generator seeded with the experiment seed, so a run's data
//! does not depend on which other runs are executed or in what order.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dual::{objective_f, CovariancePair, FwConfig, ProblemInstance, StepRule};
use crate::error::{Error, Result};
use crate::estimator::{average_risk, solve_nash};
use crate::gelbrich::MomentPair;
use crate::linalg::{psd_sqrt, scale_columns, sym_eig, PsdMatrix, SymmetricMatrix};

/// Radius substituted for a zero grid value.
pub const ZERO_RADIUS: f64 = 1e-9;

/// Recipe for random instances: nominal covariances with uniformly drawn
/// spectra and uniformly random eigenvectors, zero means.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceRecipe {
    pub n: usize,
    pub m: usize,
    pub eig_range_x: (f64, f64),
    pub eig_range_w: (f64, f64),
    pub seed: u64,
}

impl InstanceRecipe {
    /// Spectra in `[1, 5]` for the signal and `[1, 2]` for the noise.
    pub fn new(n: usize, m: usize, seed: u64) -> Self {
        Self {
            n,
            m,
            eig_range_x: (1.0, 5.0),
            eig_range_w: (1.0, 2.0),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::InvalidInput("recipe dimensions must be positive".into()));
        }
        for (lo, hi) in [self.eig_range_x, self.eig_range_w] {
            if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
                return Err(Error::InvalidInput(format!("invalid eigenvalue range [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    /// Generator for substream `stream` of this recipe's seed.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    /// Signal and noise covariances drawn from `rng`, signal first.
    pub fn covariances(&self, rng: &mut ChaCha8Rng) -> Result<(PsdMatrix, PsdMatrix)> {
        self.validate()?;
        let sx = gen_random_covariance(self.n, self.eig_range_x, rng)?;
        let sw = gen_random_covariance(self.m, self.eig_range_w, rng)?;
        Ok((sx, sw))
    }

    /// Instance drawn from substream `stream`. `H` is the `m × n` matrix with
    /// ones on its main diagonal (the identity when `n = m`).
    pub fn instance(&self, stream: u64, rho_x: f64, rho_w: f64) -> Result<ProblemInstance> {
        let mut rng = self.rng(stream);
        let (sx, sw) = self.covariances(&mut rng)?;
        ProblemInstance::new(
            DMatrix::identity(self.m, self.n),
            MomentPair::centered(sx),
            MomentPair::centered(sw),
            rho_x,
            rho_w,
        )
    }
}

/// `R diag(λ) Rᵀ` where `R` holds the eigenvectors of `Q + Qᵀ` for a standard
/// normal `Q` and the `λ` are uniform on `[lo, hi]`.
pub fn gen_random_covariance(
    d: usize,
    eig_range: (f64, f64),
    rng: &mut ChaCha8Rng,
) -> Result<PsdMatrix> {
    if d == 0 {
        return Err(Error::InvalidInput("dimension must be positive".into()));
    }
    let (lo, hi) = eig_range;
    if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
        return Err(Error::InvalidInput(format!("invalid eigenvalue range [{lo}, {hi}]")));
    }
    let q = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let r = sym_eig(&SymmetricMatrix::symmetrized(q)).vectors;
    let lambda: Vec<f64> = (0..d)
        .map(|_| if hi > lo { rng.random_range(lo..=hi) } else { lo })
        .collect();
    let scaled = scale_columns(&r, lambda);
    Ok(PsdMatrix::from_psd_product(&scaled * r.transpose()))
}

/// Empirical mean and `1/N`-normalized covariance of `n_samples` draws from
/// `N(mu, sigma)`.
pub fn sample_covariance(
    mu: &DVector<f64>,
    sigma: &PsdMatrix,
    n_samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<MomentPair> {
    if n_samples < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 samples, got {n_samples}")));
    }
    let d = sigma.dim();
    if mu.len() != d {
        return Err(crate::error::dim_mismatch("sample_covariance mean", d, mu.len()));
    }
    // Draw in whitened coordinates x = mu + R z with R = Σ^{1/2}.
    let z = DMatrix::from_fn(d, n_samples, |_, _| rng.sample::<f64, _>(StandardNormal));
    let z_bar = z.column_mean();
    let mut centered = z;
    for mut col in centered.column_iter_mut() {
        col -= &z_bar;
    }
    let cz = &centered * centered.transpose() / n_samples as f64;
    let r = psd_sqrt(sigma);
    let cov = PsdMatrix::from_psd_product(r.as_matrix() * cz * r.as_matrix());
    MomentPair::new(mu + r.as_matrix() * z_bar, cov)
}

/// One solve of the scalability benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub dim: usize,
    pub variant: StepRule,
    pub run: usize,
    pub iterations: usize,
    pub converged: bool,
    pub final_gap: f64,
    pub objective: f64,
    pub seconds: f64,
}

/// Aggregate over the runs of one `(dim, variant)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSummary {
    pub dim: usize,
    pub variant: StepRule,
    pub runs: usize,
    pub all_converged: bool,
    pub mean_iterations: f64,
    pub min_iterations: usize,
    pub max_iterations: usize,
    pub mean_seconds: f64,
    pub min_seconds: f64,
    pub max_seconds: f64,
}

/// Substream of run `run` at dimension `dim`.
pub fn benchmark_stream(dim: usize, run: usize) -> u64 {
    ((dim as u64) << 32) | run as u64
}

/// Solves `runs` random instances with `n = m = d` and `ρx = ρw = √d` for
/// every `d` in `dims` and every config. All configs of one run see the same
/// instance.
pub fn benchmark_scalability(
    dims: &[usize],
    configs: &[FwConfig],
    runs: usize,
    seed: u64,
) -> Result<Vec<BenchmarkRow>> {
    let mut rows = Vec::with_capacity(dims.len() * configs.len() * runs);
    for &dim in dims {
        let recipe = InstanceRecipe::new(dim, dim, seed);
        let rho = (dim as f64).sqrt();
        for run in 0..runs {
            let instance = recipe.instance(benchmark_stream(dim, run), rho, rho)?;
            for config in configs {
                let report = crate::dual::fw_solve(&instance, config)?;
                rows.push(BenchmarkRow {
                    dim,
                    variant: config.variant,
                    run,
                    iterations: report.iterations,
                    converged: report.converged,
                    final_gap: report.gap,
                    objective: report.objective,
                    seconds: report.elapsed,
                });
            }
        }
    }
    Ok(rows)
}

/// Groups rows by `(dim, variant)` in order of first appearance.
pub fn summarize_benchmark(rows: &[BenchmarkRow]) -> Vec<BenchmarkSummary> {
    let mut keys: Vec<(usize, StepRule)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.dim, r.variant)) {
            keys.push((r.dim, r.variant));
        }
    }
    keys.into_iter()
        .map(|(dim, variant)| {
            let cell: Vec<&BenchmarkRow> =
                rows.iter().filter(|r| r.dim == dim && r.variant == variant).collect();
            let k = cell.len() as f64;
            let secs = cell.iter().map(|r| r.seconds);
            BenchmarkSummary {
                dim,
                variant,
                runs: cell.len(),
                all_converged: cell.iter().all(|r| r.converged),
                mean_iterations: cell.iter().map(|r| r.iterations as f64).sum::<f64>() / k,
                min_iterations: cell.iter().map(|r| r.iterations).min().unwrap_or(0),
                max_iterations: cell.iter().map(|r| r.iterations).max().unwrap_or(0),
                mean_seconds: secs.clone().sum::<f64>() / k,
                min_seconds: secs.clone().fold(f64::INFINITY, f64::min),
                max_seconds: secs.fold(0.0, f64::max),
            }
        })
        .collect()
}

/// Regret of the robust estimator for one run and one pair of radii.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretRow {
    pub run_id: usize,
    pub rho_x: f64,
    pub rho_w: f64,
    pub regret: f64,
}

/// `0` followed by 20 log-spaced radii from `0.1` to `10`.
pub fn default_rho_grid() -> Vec<f64> {
    let mut grid = vec![0.0];
    grid.extend(log_grid(0.1, 10.0, 20));
    grid
}

/// `count` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
                .collect()
        }
    }
}

/// Regret experiment. For each run: draw true covariances from the recipe,
/// estimate nominal covariances from `samples_per_run` normal draws each
/// (nominal means are set to zero, the true means), and record for every
/// `(ρx, ρw)` on the grid the excess risk of the robust estimator over the
/// true Bayes risk. Zero radii are replaced by [`ZERO_RADIUS`].
///
/// Rows are ordered by run, then `ρx`, then `ρw`.
pub fn regret_experiment(
    recipe: &InstanceRecipe,
    rho_grid: &[f64],
    runs: usize,
    samples_per_run: usize,
    config: &FwConfig,
) -> Result<Vec<RegretRow>> {
    recipe.validate()?;
    let mut rows = Vec::with_capacity(runs * rho_grid.len() * rho_grid.len());
    let h = DMatrix::identity(recipe.m, recipe.n);
    for run in 0..runs {
        let mut rng = recipe.rng(run as u64);
        let (true_x, true_w) = recipe.covariances(&mut rng)?;
        let truth_x = MomentPair::centered(true_x.clone());
        let truth_w = MomentPair::centered(true_w.clone());
        let bayes_risk = objective_f(&CovariancePair::new(true_x, true_w), &h)?;
        let sample_x = sample_covariance(truth_x.mean(), truth_x.cov(), samples_per_run, &mut rng)?;
        let sample_w = sample_covariance(truth_w.mean(), truth_w.cov(), samples_per_run, &mut rng)?;
        let base = ProblemInstance::new(
            h.clone(),
            MomentPair::centered(sample_x.cov().clone()),
            MomentPair::centered(sample_w.cov().clone()),
            ZERO_RADIUS,
            ZERO_RADIUS,
        )?;
        for &rho_x in rho_grid {
            for &rho_w in rho_grid {
                let instance = base.with_radii(effective(rho_x), effective(rho_w))?;
                let solution = solve_nash(&instance, config)?;
                let risk = average_risk(&solution.estimator, &truth_x, &truth_w, &h)?;
                rows.push(RegretRow {
                    run_id: run,
                    rho_x,
                    rho_w,
                    regret: risk - bayes_risk,
                });
            }
        }
    }
    Ok(rows)
}

fn effective(rho: f64) -> f64 {
    if rho == 0.0 {
        ZERO_RADIUS
    } else {
        rho
    }
}

/// Run-averaged regrets of the estimator families compared in the
/// experiment. Each "best" entry is the minimum over the relevant grid
/// points of the regret averaged across runs.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretSummary {
    pub runs: usize,
    /// `ρx = ρw = 0`.
    pub nominal: f64,
    pub best_joint: f64,
    pub best_joint_radii: (f64, f64),
    /// Best over `ρx = 0`.
    pub best_rho_x_zero: f64,
    /// Best over `ρw = 0`.
    pub best_rho_w_zero: f64,
}

/// Averages rows over runs per grid point and extracts the summary values.
/// `None` if the grid does not contain `(0, 0)`.
pub fn summarize_regret(rows: &[RegretRow]) -> Option<RegretSummary> {
    let mut cells: Vec<((f64, f64), f64, usize)> = Vec::new();
    for r in rows {
        match cells.iter_mut().find(|c| c.0 == (r.rho_x, r.rho_w)) {
            Some(c) => {
                c.1 += r.regret;
                c.2 += 1;
            }
            None => cells.push(((r.rho_x, r.rho_w), r.regret, 1)),
        }
    }
    let means: Vec<((f64, f64), f64)> = cells.into_iter().map(|(k, s, c)| (k, s / c as f64)).collect();
    let nominal = means.iter().find(|(k, _)| *k == (0.0, 0.0))?.1;
    let argmin = |filter: &dyn Fn(&(f64, f64)) -> bool| {
        means
            .iter()
            .filter(|(k, _)| filter(k))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .copied()
    };
    let (best_joint_radii, best_joint) = argmin(&|_| true)?;
    let best_rho_x_zero = argmin(&|k| k.0 == 0.0)?.1;
    let best_rho_w_zero = argmin(&|k| k.1 == 0.0)?.1;
    let mut run_ids: Vec<usize> = rows.iter().map(|r| r.run_id).collect();
    run_ids.sort_unstable();
    run_ids.dedup();
    Some(RegretSummary {
        runs: run_ids.len(),
        nominal,
        best_joint,
        best_joint_radii,
        best_rho_x_zero,
        best_rho_w_zero,
    })
}
