use std::time::Instant;

use mcqmc::ballwalk::{density_presets, metropolis_system};
use mcqmc::bounds::{
    ballwalk_gap_bound, beck_bound, corollary_main_bound, cover_size_bound, main_discrepancy_bound, push_back_bound,
    ballwalk_error_bound, tv_average_bound, BoundInputs,
};
use mcqmc::discrepancy::{
    build_quantile_cover, pullback_report, pullback_volumes, star_discrepancy_bracket, star_discrepancy_exact,
};
use mcqmc::measure::centered_norm;
use mcqmc::search::{
    best_of_k, invert_to_target, loglog_slope, median, rate_study, stratified_targets, theory_bound, Objective,
    SearchConfig,
};
use mcqmc::sequences::uniform_driver;
use mcqmc::{
    make_direct_kernel, make_lazy_direct_kernel, run_chain, ChainSystem, Density, Domain, Rng,
    TargetMeasure,
};
use serde_json::{json, Value};

use crate::config::{ExperimentKind, Kernel, Plan};
use crate::output::{Cell, Table};
use crate::CliError;

pub struct Outcome {
    pub table: Table,
    /// Wall time per CSV row; kept out of the CSV so reruns are byte-identical.
    pub row_runtime_ms: Vec<f64>,
    pub summary: Value,
}

/// Inputs of the bound table.
#[derive(Debug, Clone, Copy)]
pub struct BoundsRequest {
    pub d: usize,
    pub n: u64,
    pub alpha: Option<f64>,
    pub lambda0: f64,
    pub norm: f64,
    pub delta: Option<f64>,
    pub epsilon: f64,
}

pub fn bounds_table(req: &BoundsRequest) -> Result<Table, CliError> {
    let mut t = Table::new(vec!["bound", "value"]);
    let base = BoundInputs {
        n: req.n,
        d: req.d,
        lambda0: req.lambda0,
        nu_norm: req.norm,
        nu_norm_centered: centered_norm(req.norm),
        epsilon: req.epsilon,
        ..Default::default()
    };
    if req.n >= 16 {
        t.push(vec!["corollary_main_bound".into(), corollary_main_bound(&base)?.into()]);
    }
    let delta = req.delta.unwrap_or_else(|| (8.0 / (req.n as f64).powf(0.75)).min(1.0));
    let cover_size = cover_size_bound(delta, req.d, req.epsilon)?;
    let with_cover = BoundInputs { delta, cover_size, ..base };
    t.push(vec!["main_discrepancy_bound".into(), main_discrepancy_bound(&with_cover)?.value.into()]);
    t.push(vec!["push_back_bound".into(), push_back_bound(&with_cover)?.into()]);
    t.push(vec!["tv_average_bound".into(), tv_average_bound(&base)?.into()]);
    t.push(vec!["beck_bound".into(), beck_bound(req.n, req.d)?.into()]);
    t.push(vec!["cover_delta".into(), delta.into()]);
    t.push(vec!["cover_size_bound".into(), cover_size.into()]);
    if let Some(alpha) = req.alpha {
        let (gamma_star, gap) = ballwalk_gap_bound(alpha, req.d)?;
        t.push(vec!["ballwalk_gamma_star".into(), gamma_star.into()]);
        t.push(vec!["ballwalk_gap".into(), gap.into()]);
        if req.n >= 16 {
            t.push(vec!["ballwalk_error_bound".into(), ballwalk_error_bound(alpha, req.d, req.n)?.into()]);
        }
    }
    Ok(t)
}

fn target(plan: &Plan) -> Result<TargetMeasure, CliError> {
    let c = &plan.config;
    let density = match c.density.name.as_str() {
        "exp-linear" => Density::ExpLinear { alpha: c.density.alpha },
        _ => Density::Uniform,
    };
    Ok(TargetMeasure::new(Domain::ball(c.dimension)?, density)?)
}

pub fn build_system(plan: &Plan) -> Result<ChainSystem, CliError> {
    let c = &plan.config;
    Ok(match plan.kernel {
        Kernel::MetropolisBallwalk => {
            let gamma = plan.gamma.expect("validated: ball walk has gamma");
            metropolis_system(c.dimension, density_presets(&c.density.name, c.density.alpha, c.dimension)?, gamma)?
        }
        Kernel::Direct => make_direct_kernel(target(plan)?)?,
        Kernel::LazyDirect(a) => make_lazy_direct_kernel(target(plan)?, a)?,
    })
}

fn timed<T>(f: impl FnOnce() -> Result<T, CliError>) -> Result<(T, f64), CliError> {
    let start = Instant::now();
    let v = f()?;
    Ok((v, start.elapsed().as_secs_f64() * 1e3))
}

pub fn run(plan: &Plan) -> Result<Outcome, CliError> {
    match plan.config.experiment {
        ExperimentKind::Bounds => run_bounds(plan),
        ExperimentKind::Discrepancy => run_discrepancy(plan),
        ExperimentKind::Pullback => run_pullback(plan),
        ExperimentKind::Search => run_search(plan),
        ExperimentKind::RateStudy => run_rate_study(plan),
        ExperimentKind::Invert => run_invert(plan),
    }
}

fn run_bounds(plan: &Plan) -> Result<Outcome, CliError> {
    let c = &plan.config;
    let alpha = c.density.alpha;
    let lambda0 = match (c.lambda0, plan.kernel) {
        (Some(l), _) => l,
        (None, Kernel::MetropolisBallwalk) => 1.0 - ballwalk_gap_bound(alpha, c.dimension)?.1,
        (None, Kernel::Direct) => 0.0,
        (None, Kernel::LazyDirect(a)) => 1.0 - a,
    };
    let req = BoundsRequest {
        d: c.dimension,
        n: c.n.expect("validated") as u64,
        alpha: Some(alpha),
        lambda0,
        norm: c.norm.unwrap_or(1.0),
        delta: c.delta,
        epsilon: c.epsilon,
    };
    let (table, ms) = timed(|| bounds_table(&req))?;
    let rows = table.rows.len();
    Ok(Outcome { table, row_runtime_ms: vec![ms / rows as f64; rows], summary: json!({ "lambda0": lambda0 }) })
}

fn check_exact(plan: &Plan) -> Result<(), CliError> {
    if plan.objective == Objective::StarExact && plan.config.dimension > 3 {
        return Err(mcqmc::Error::Unsupported(format!(
            "exact star discrepancy needs dimension ≤ 3, got {}",
            plan.config.dimension
        ))
        .into());
    }
    Ok(())
}

fn run_discrepancy(plan: &Plan) -> Result<Outcome, CliError> {
    check_exact(plan)?;
    let c = &plan.config;
    let system = build_system(plan)?;
    let n = c.n.expect("validated");
    let cover = match plan.objective {
        Objective::StarBracket { delta } => Some(build_quantile_cover(system.target(), delta)?),
        _ => None,
    };
    let bound = theory_bound(&system, n)?;
    let mut table = Table::new(vec![
        "seed", "n", "n0", "method", "disc_lower", "disc_upper", "delta_used", "theory_bound",
    ]);
    let mut runtimes = Vec::new();
    for &seed in &plan.seeds {
        let (r, ms) = timed(|| {
            let driver = uniform_driver(c.n0 + n, system.driver_dim(), &Rng::new(seed))?;
            let path = run_chain(&system, &driver, c.n0)?;
            Ok(match &cover {
                Some(cover) => star_discrepancy_bracket(path.retained(), cover)?,
                None => star_discrepancy_exact(path.retained(), system.target())?,
            })
        })?;
        table.push(vec![
            seed.into(),
            n.into(),
            c.n0.into(),
            r.method.to_string().into(),
            r.lower.into(),
            r.upper.into(),
            r.delta_used.into(),
            bound.into(),
        ]);
        runtimes.push(ms);
    }
    Ok(Outcome { table, row_runtime_ms: runtimes, summary: json!({}) })
}

fn run_pullback(plan: &Plan) -> Result<Outcome, CliError> {
    let c = &plan.config;
    let Objective::PullbackMc { m, delta } = plan.objective else { unreachable!("validated") };
    let system = build_system(plan)?;
    let n = c.n.expect("validated");
    let cover = build_quantile_cover(system.target(), delta)?;
    let (volumes, volume_ms) =
        timed(|| Ok(pullback_volumes(&system, c.n0, n, &cover, m, &Rng::new(c.seed).split(u64::MAX))?))?;
    let mut table = Table::new(vec![
        "seed",
        "n",
        "n0",
        "star_lower",
        "star_upper",
        "pullback_lower",
        "pullback_upper",
        "delta",
        "mc_stderr",
        "marginal_bias",
    ]);
    let mut runtimes = Vec::new();
    for &seed in &plan.seeds {
        let ((star, pb), ms) = timed(|| {
            let driver = uniform_driver(c.n0 + n, system.driver_dim(), &Rng::new(seed))?;
            let path = run_chain(&system, &driver, c.n0)?;
            let star = star_discrepancy_bracket(path.retained(), &cover)?;
            Ok((star, pullback_report(&system, &driver, &cover, &volumes)?))
        })?;
        table.push(vec![
            seed.into(),
            n.into(),
            c.n0.into(),
            star.lower.into(),
            star.upper.into(),
            pb.lower.into(),
            pb.upper.into(),
            delta.into(),
            pb.mc_stderr.into(),
            pb.marginal_bias.into(),
        ]);
        runtimes.push(ms);
    }
    let exact_marginals = volumes.replications == 0;
    Ok(Outcome {
        table,
        row_runtime_ms: runtimes,
        summary: json!({ "volume_ms": volume_ms, "exact_marginals": exact_marginals, "replications": volumes.replications }),
    })
}

fn search_config(plan: &Plan, n: usize, seed: u64) -> SearchConfig {
    SearchConfig {
        n,
        n0: plan.config.n0,
        k: plan.config.k,
        seed,
        candidate_kinds: plan.candidate_kinds.clone(),
        objective: plan.objective,
    }
}

fn run_search(plan: &Plan) -> Result<Outcome, CliError> {
    check_exact(plan)?;
    let system = build_system(plan)?;
    let config = search_config(plan, plan.config.n.expect("validated"), plan.config.seed);
    let (result, ms) = timed(|| Ok(best_of_k(&system, &config)?))?;
    let mut table = Table::new(vec!["candidate", "provenance", "disc_upper", "best", "theory_bound"]);
    for (i, (prov, upper)) in result.all_scores.iter().enumerate() {
        table.push(vec![
            i.into(),
            prov.to_string().into(),
            (*upper).into(),
            Cell::Int((i == result.best_index) as u64),
            result.theory_bound.into(),
        ]);
    }
    let rows = table.rows.len();
    Ok(Outcome {
        table,
        row_runtime_ms: vec![ms / rows as f64; rows],
        summary: json!({
            "best_index": result.best_index,
            "best_lower": result.best_report.lower,
            "best_upper": result.best_report.upper,
            "method": result.best_report.method.to_string(),
        }),
    })
}

fn run_rate_study(plan: &Plan) -> Result<Outcome, CliError> {
    check_exact(plan)?;
    let system = build_system(plan)?;
    let mut table = Table::new(vec!["n", "seed", "disc_lower", "disc_upper", "theory_bound", "beck_bound"]);
    let mut runtimes = Vec::new();
    let mut medians = Vec::new();
    for &n in &plan.ns {
        let mut uppers = Vec::new();
        for &seed in &plan.seeds {
            let (rows, ms) = timed(|| Ok(rate_study(&system, &[n], &search_config(plan, n, seed), &[seed])?))?;
            let r = &rows[0];
            table.push(vec![
                r.n.into(),
                r.seed.into(),
                r.disc_lower.into(),
                r.disc_upper.into(),
                r.theory_bound.into(),
                r.beck_bound.into(),
            ]);
            uppers.push(r.disc_upper);
            runtimes.push(ms);
        }
        medians.push(median(&uppers));
    }
    let slope = slope_or_null(&plan.ns, &medians);
    Ok(Outcome { table, row_runtime_ms: runtimes, summary: json!({ "median_upper": medians, "loglog_slope": slope }) })
}

fn slope_or_null(ns: &[usize], ys: &[f64]) -> Value {
    if ns.len() < 2 {
        return Value::Null;
    }
    let xs: Vec<f64> = ns.iter().map(|n| *n as f64).collect();
    json!(loglog_slope(&xs, ys))
}

fn run_invert(plan: &Plan) -> Result<Outcome, CliError> {
    let system = build_system(plan)?;
    let mut table = Table::new(vec!["n", "max_deviation", "disc_lower", "disc_upper", "beck_bound"]);
    let mut runtimes = Vec::new();
    let mut uppers = Vec::new();
    for &n in &plan.ns {
        let ((dev, r), ms) = timed(|| {
            let targets = stratified_targets(system.target(), n)?;
            let driver = invert_to_target(&system, &targets, None)?;
            let path = run_chain(&system, &driver, 0)?;
            let dev = path.states.iter().zip(&targets).map(|(a, b)| a.sup_distance(b)).fold(0.0, f64::max);
            Ok((dev, star_discrepancy_exact(&path.states, system.target())?))
        })?;
        table.push(vec![n.into(), dev.into(), r.lower.into(), r.upper.into(), beck_bound(n as u64, 1)?.into()]);
        uppers.push(r.upper);
        runtimes.push(ms);
    }
    Ok(Outcome { table, row_runtime_ms: runtimes, summary: json!({ "loglog_slope": slope_or_null(&plan.ns, &uppers) }) })
}
