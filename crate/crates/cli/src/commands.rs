use std::fs;

use anyhow::{bail, Context, Result};
use log::info;
use serde_json::{json, Value};

use wmmse::dual::{fw_solve, objective_f, CovariancePair, FwConfig, ProblemInstance, StepRule};
use wmmse::estimator::{solve_nash, worst_case_risk, AffineEstimator};
use wmmse::experiments::{
    benchmark_scalability, benchmark_stream, default_rho_grid, regret_experiment,
    summarize_benchmark, summarize_regret, InstanceRecipe,
};
use wmmse::sdp_export::{emit_dual_sdp, emit_primal_sdp};

use crate::io::{
    from_rows, pretty_json, psd, read_json, write_output, InstanceDoc, SolutionDoc, Table,
    CHECK_SCHEMA, REGRET_SUMMARY_SCHEMA, SOLUTION_SCHEMA,
};
use crate::{
    BenchmarkArgs, CheckArgs, ExportArgs, GenerateArgs, RegretArgs, SdpKind, SolveArgs,
    SolverArgs, SourceArgs, Status,
};

fn load_instance(src: &SourceArgs) -> Result<ProblemInstance> {
    if let Some(path) = &src.instance {
        let mut doc: InstanceDoc = read_json(path)?;
        if let Some(r) = src.rho_x {
            doc.rho_x = r;
        }
        if let Some(r) = src.rho_w {
            doc.rho_w = r;
        }
        return doc.to_instance().with_context(|| format!("invalid instance {}", path.display()));
    }
    let (n, m) = match (src.dim, src.n, src.m) {
        (Some(d), _, _) => (d, d),
        (None, Some(n), Some(m)) => (n, m),
        _ => bail!("an instance source is required: --instance FILE, --dim D or --n N --m M"),
    };
    let recipe = InstanceRecipe::new(n, m, src.seed);
    let rho_x = src.rho_x.unwrap_or((n as f64).sqrt());
    let rho_w = src.rho_w.unwrap_or((m as f64).sqrt());
    Ok(recipe.instance(src.stream, rho_x, rho_w)?)
}

fn solver_config(variant: StepRule, delta: Option<f64>, gap_tol: Option<f64>, max_iters: Option<usize>) -> Result<FwConfig> {
    let mut config = FwConfig::with_variant(variant);
    if let Some(d) = delta {
        config.delta = d;
    }
    if let Some(g) = gap_tol {
        config.gap_tol = g;
    }
    if let Some(k) = max_iters {
        config.max_iters = k;
    }
    config.validate()?;
    Ok(config)
}

fn config_from(args: &SolverArgs) -> Result<FwConfig> {
    solver_config(args.variant.parse()?, args.delta, args.gap_tol, args.max_iters)
}

pub fn generate(args: &GenerateArgs) -> Result<Status> {
    let inst = load_instance(&args.source)?;
    write_output(args.out.as_deref(), &pretty_json(&InstanceDoc::from_instance(&inst))?)?;
    Ok(Status::Ok)
}

pub fn solve(args: &SolveArgs) -> Result<Status> {
    let inst = load_instance(&args.source)?;
    let config = config_from(&args.solver)?;
    let sol = solve_nash(&inst, &config)?;
    info!(
        "{} iterations, value {:.6}, worst case {:.6}, gap {:.2e}",
        sol.report.iterations, sol.value, sol.worst_case, sol.gap
    );
    let doc = SolutionDoc::new(&inst, &sol, !args.no_timing);
    write_output(args.out.as_deref(), &pretty_json(&doc)?)?;
    if !sol.report.converged {
        return Ok(Status::NotCertified(format!(
            "not converged after {} iterations (surrogate gap {:e})",
            sol.report.iterations, sol.report.gap
        )));
    }
    if sol.gap > config.gap_tol {
        return Ok(Status::NotCertified(format!(
            "certified gap {:e} exceeds {:e}",
            sol.gap, config.gap_tol
        )));
    }
    Ok(Status::Ok)
}

pub fn check(args: &CheckArgs) -> Result<Status> {
    let doc: SolutionDoc = read_json(&args.solution)?;
    if doc.schema != SOLUTION_SCHEMA {
        bail!("unsupported schema {:?}, expected {SOLUTION_SCHEMA:?}", doc.schema);
    }
    let inst = doc.instance.to_instance().context("invalid instance")?;
    if inst.fingerprint() != doc.instance_sha256 {
        bail!("instance does not match its recorded fingerprint");
    }
    let est = AffineEstimator::new(
        from_rows(&doc.estimator.a).context("estimator A")?,
        doc.estimator.b.clone().into(),
    )?;
    let pair = CovariancePair::new(
        psd(&doc.least_favorable.sigma_x).context("least favorable sigma_x")?,
        psd(&doc.least_favorable.sigma_w).context("least favorable sigma_w")?,
    );
    let primal = worst_case_risk(&est, &inst)?;
    let feasible = pair.is_feasible(&inst)?;
    let dual = objective_f(&pair, inst.h())?;
    let gap = primal - dual;
    let consistent = gap >= -1e-8 * (1.0 + primal.abs());
    let pass = feasible && consistent && gap <= args.tol;
    let report = json!({
        "schema": CHECK_SCHEMA,
        "instance_sha256": doc.instance_sha256,
        "primal": primal,
        "dual": dual,
        "gap": gap,
        "feasible": feasible,
        "tol": args.tol,
        "pass": pass,
    });
    write_output(args.out.as_deref(), &pretty_json(&report)?)?;
    if !feasible {
        return Ok(Status::NotCertified("least favorable covariances lie outside the ambiguity set".into()));
    }
    if !pass {
        return Ok(Status::NotCertified(format!("gap {gap:e} is outside [0, {:e}]", args.tol)));
    }
    Ok(Status::Ok)
}

pub fn benchmark(args: &BenchmarkArgs) -> Result<Status> {
    let configs = args
        .variants
        .iter()
        .map(|v| solver_config(v.parse()?, args.delta, args.gap_tol, args.max_iters))
        .collect::<Result<Vec<_>>>()?;
    if args.runs == 0 || args.dims.is_empty() {
        bail!("need at least one run and one dimension");
    }
    let timing = !args.no_timing;
    let table = if args.trace {
        trace_table(args, &configs, timing)?
    } else {
        let rows = benchmark_scalability(&args.dims, &configs, args.runs, args.seed)?;
        for s in summarize_benchmark(&rows) {
            info!(
                "d = {} {}: mean {:.1} iterations, all converged: {}",
                s.dim, s.variant, s.mean_iterations, s.all_converged
            );
        }
        let mut cols = vec!["dim", "variant", "run", "iterations", "converged", "final_gap", "objective"];
        if timing {
            cols.push("seconds");
        }
        let mut t = Table::new(cols);
        for r in rows {
            let mut row = vec![
                json!(r.dim),
                json!(r.variant.name()),
                json!(r.run),
                json!(r.iterations),
                json!(r.converged),
                json!(r.final_gap),
                json!(r.objective),
            ];
            if timing {
                row.push(json!(r.seconds));
            }
            t.push(row);
        }
        t
    };
    write_output(args.out.as_deref(), &table.render(args.format)?)?;
    Ok(Status::Ok)
}

fn trace_table(args: &BenchmarkArgs, configs: &[FwConfig], timing: bool) -> Result<Table> {
    let mut cols = vec!["dim", "variant", "run", "iteration", "objective", "gap", "step", "beta", "backtracks"];
    if timing {
        cols.push("elapsed");
    }
    let mut t = Table::new(cols);
    for &dim in &args.dims {
        let recipe = InstanceRecipe::new(dim, dim, args.seed);
        let rho = (dim as f64).sqrt();
        for run in 0..args.runs {
            let inst = recipe.instance(benchmark_stream(dim, run), rho, rho)?;
            for config in configs {
                let report = fw_solve(&inst, config)?;
                for rec in &report.records {
                    let mut row = vec![
                        json!(dim),
                        json!(report.variant.name()),
                        json!(run),
                        json!(rec.iteration),
                        json!(rec.objective),
                        json!(rec.gap),
                        json!(rec.step),
                        rec.beta.map_or(Value::Null, |b| json!(b)),
                        json!(rec.backtracks),
                    ];
                    if timing {
                        row.push(json!(rec.elapsed));
                    }
                    t.push(row);
                }
            }
        }
    }
    Ok(t)
}

pub fn regret(args: &RegretArgs) -> Result<Status> {
    let config = config_from(&args.solver)?;
    let grid = args.rho_grid.clone().unwrap_or_else(default_rho_grid);
    let recipe = InstanceRecipe::new(args.dim, args.dim, args.seed);
    let rows = regret_experiment(&recipe, &grid, args.runs, args.samples, &config)?;
    let mut t = Table::new(vec!["run_id", "rho_x", "rho_w", "regret"]);
    for r in &rows {
        t.push(vec![json!(r.run_id), json!(r.rho_x), json!(r.rho_w), json!(r.regret)]);
    }
    write_output(args.out.as_deref(), &t.render(args.format)?)?;
    match summarize_regret(&rows) {
        Some(s) => {
            eprintln!(
                "runs {}: nominal {:.4}, best joint {:.4} at ({:.4}, {:.4}), best rho_x = 0 {:.4}, best rho_w = 0 {:.4}",
                s.runs, s.nominal, s.best_joint, s.best_joint_radii.0, s.best_joint_radii.1,
                s.best_rho_x_zero, s.best_rho_w_zero
            );
            if let Some(path) = &args.summary {
                let doc = json!({
                    "schema": REGRET_SUMMARY_SCHEMA,
                    "dim": args.dim,
                    "runs": s.runs,
                    "samples": args.samples,
                    "seed": args.seed,
                    "nominal": s.nominal,
                    "best_joint": s.best_joint,
                    "best_joint_rho_x": s.best_joint_radii.0,
                    "best_joint_rho_w": s.best_joint_radii.1,
                    "best_rho_x_zero": s.best_rho_x_zero,
                    "best_rho_w_zero": s.best_rho_w_zero,
                });
                fs::write(path, pretty_json(&doc)?).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        None if args.summary.is_some() => bail!("a summary needs 0 in the radius grid"),
        None => {}
    }
    Ok(Status::Ok)
}

pub fn export(args: &ExportArgs) -> Result<Status> {
    let inst = load_instance(&args.source)?;
    let problem = match args.kind {
        SdpKind::Primal => emit_primal_sdp(&inst, false)?,
        SdpKind::PrimalCholesky => emit_primal_sdp(&inst, true)?,
        SdpKind::Dual => emit_dual_sdp(&inst)?,
    };
    info!("{} variables, block sizes {:?}", problem.num_vars(), problem.block_sizes);
    fs::write(&args.out, problem.to_sdpa()).with_context(|| format!("writing {}", args.out.display()))?;
    Ok(Status::Ok)
}
