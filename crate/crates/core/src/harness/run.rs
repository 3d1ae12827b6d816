//! Mode runners and artifact writing.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{field_from_expr, Experiment, ExperimentConfig, Mode};
use super::plot::{line_chart, profile, Series};
use crate::energy::Model;
use crate::error::{Error, Result};
use crate::flux::check_structure;
use crate::mesh::{integrate, DiscreteField};
use crate::rothe::rothe_evolve;
use crate::solver::{apply_k, gamma_convergence_study, GAMMA_SLACK};
use crate::sources::check_hypotheses;
use crate::steady::{
    compute_extremal_solutions, constant_solution_analysis, iterate_from, symmetry_double, uniqueness_diagnostics,
    verify_solution, IterationTrace, ResidualReport,
};
use crate::varexp::check_modular_relations;

/// One checked invariant. `name` is `module.invariant`.
#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct FieldSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

/// Everything a run produces; `fields[0]` is the main field.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub name: String,
    pub report: Value,
    pub passed: bool,
    pub assertions: Vec<Assertion>,
    pub fields: Vec<(String, DiscreteField)>,
    pub plots: Vec<(String, String)>,
    pub timings: BTreeMap<String, f64>,
}

struct Ctx<'a> {
    exp: &'a Experiment,
    assertions: Vec<Assertion>,
    fields: Vec<(String, DiscreteField)>,
    plots: Vec<(String, String)>,
    timings: BTreeMap<String, f64>,
}

impl Ctx<'_> {
    fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.assertions.push(Assertion {
            name: name.into(),
            passed,
            detail,
        });
    }

    fn summary(&self, f: &DiscreteField) -> Result<FieldSummary> {
        let m = &self.exp.model.mesh;
        Ok(FieldSummary {
            min: f.min(),
            max: f.max(),
            mean: integrate(m, f)? / m.measure(),
        })
    }

    fn timed<T>(&mut self, key: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let clock = Instant::now();
        let out = f(self);
        self.timings.insert(key.into(), clock.elapsed().as_secs_f64());
        out
    }
}

fn sci(v: f64) -> String {
    format!("{v:.3e}")
}

/// Runs a validated experiment.
pub fn run_experiment(exp: &Experiment) -> Result<RunOutput> {
    let clock = Instant::now();
    let mut ctx = Ctx {
        exp,
        assertions: Vec::new(),
        fields: Vec::new(),
        plots: Vec::new(),
        timings: BTreeMap::new(),
    };
    let results = match exp.config.mode {
        Mode::Steady | Mode::BandSteady => run_steady(&mut ctx)?,
        Mode::GammaStudy => run_gamma(&mut ctx)?,
        Mode::Rothe => run_rothe(&mut ctx)?,
        Mode::PropertySuite => run_properties(&mut ctx)?,
    };
    ctx.timings.insert("total".into(), clock.elapsed().as_secs_f64());
    let passed = ctx.assertions.iter().all(|a| a.passed);
    let src = &exp.model.src;
    let mesh = &exp.model.mesh;
    let report = json!({
        "name": exp.name,
        "mode": exp.config.mode,
        "seed": exp.config.seed,
        "passed": passed,
        "assertions": ctx.assertions,
        "config": exp.config,
        "mesh": {
            "nodes": mesh.node_count(),
            "elements": mesh.elements().len(),
            "measure": mesh.measure(),
        },
        "operator": {
            "name": exp.model.op.name(),
            "closed_form_potential": exp.model.op.closed_form_potential(),
            "alpha": exp.model.op.alpha(),
            "p_min": exp.model.p.p_min(),
            "p_max": exp.model.p.p_max(),
            "embedding_warning": exp.model.p.embedding_warning(mesh.dimension()),
        },
        "source": {
            "name": src.name(),
            "delta0": src.delta0(),
            "lambda0": src.lambda0(),
            "lambda0_tilde": src.lambda0_tilde(),
            "band": src.band(),
            "x_independent": src.x_independent(),
            "alpha": src.alpha(),
            "eps0": exp.eps0,
        },
        "results": results,
    });
    check_report_finite(&report, "")?;
    Ok(RunOutput {
        name: exp.name.clone(),
        report,
        passed,
        assertions: ctx.assertions,
        fields: ctx.fields,
        plots: ctx.plots,
        timings: ctx.timings,
    })
}

fn check_report_finite(v: &Value, path: &str) -> Result<()> {
    match v {
        Value::Number(n) if n.as_f64().is_some_and(|f| !f.is_finite()) => {
            Err(Error::Structural(format!("report field {path} is not finite")))
        }
        Value::Array(a) => a.iter().enumerate().try_for_each(|(k, x)| check_report_finite(x, &format!("{path}[{k}]"))),
        Value::Object(o) => o.iter().try_for_each(|(k, x)| check_report_finite(x, &format!("{path}.{k}"))),
        _ => Ok(()),
    }
}

fn residual_checks(ctx: &mut Ctx<'_>, label: &str, r: &ResidualReport) {
    let tol = ctx.exp.config.steady.residual_tol;
    let bound_tol = ctx.exp.config.solver.bound_tol;
    ctx.check(
        "steady_state.weak_residual",
        r.weak_residual < tol,
        format!("{label}: residual {} (tolerance {})", sci(r.weak_residual), sci(tol)),
    );
    let limit = 1e-6 * r.mean_zero_scale;
    ctx.check(
        "steady_state.mean_zero",
        r.mean_zero_defect <= limit,
        format!("{label}: |∫f(x,U)| = {} (limit {})", sci(r.mean_zero_defect), sci(limit)),
    );
    ctx.check(
        "solver.bound_preservation",
        r.band_violation <= bound_tol,
        format!("{label}: band violation {}", sci(r.band_violation)),
    );
}

fn decay_plot(traces: &[(&str, &IterationTrace)]) -> String {
    let series: Vec<Series> = traces
        .iter()
        .map(|(n, t)| Series::new(*n, t.sup_diffs.iter().enumerate().map(|(k, d)| ((k + 1) as f64, *d)).collect()))
        .collect();
    line_chart("𝒦-iteration: sup |U_{n+1} − U_n|", "iteration", "sup difference", &series, false, true)
}

fn run_steady(ctx: &mut Ctx<'_>) -> Result<Value> {
    let exp = ctx.exp;
    let cfg = &exp.config;
    let model = &exp.model;
    let iter = cfg.steady.iterate_options();
    let solve = cfg.solver;
    let (eps, delta) = model.src.band();
    let agree = cfg.steady.agree_tol;

    let ex = ctx.timed("extremal", |_| compute_extremal_solutions(model, &iter, &solve))?;
    ctx.check(
        "steady_state.converged",
        ex.lower_trace.converged && ex.upper_trace.converged,
        format!("lower {} iterations, upper {} iterations", ex.lower_trace.iterations(), ex.upper_trace.iterations()),
    );
    ctx.check(
        "steady_state.ordering",
        ex.lower_trace.order_defect <= iter.order_tol && ex.upper_trace.order_defect <= iter.order_tol,
        format!(
            "largest step against the order: lower {}, upper {}",
            sci(ex.lower_trace.order_defect),
            sci(ex.upper_trace.order_defect)
        ),
    );
    let crossing = ex.lower.values.iter().zip(&ex.upper.values).map(|(l, u)| l - u).fold(0.0, f64::max);
    ctx.check("steady_state.sandwich", crossing <= 1e-10, format!("max(U_min − U_max) = {}", sci(crossing)));

    let mut accepted: Vec<(String, DiscreteField)> = vec![("lower".into(), ex.lower.clone()), ("upper".into(), ex.upper.clone())];
    let mut verifications = BTreeMap::new();
    for (label, u) in accepted.clone() {
        let r = verify_solution(model, &u)?;
        residual_checks(ctx, &label, &r);
        let k = apply_k(model, model.src.lambda0(), &u, &solve)?;
        let fp = k.sup_distance(&u);
        ctx.check(
            "steady_state.fixed_point",
            fp < 10.0 * iter.tol,
            format!("{label}: sup |𝒦(U) − U| = {}", sci(fp)),
        );
        verifications.insert(label, json!({ "residuals": r, "fixed_point_defect": fp }));
    }

    let mut random = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for k in 0..cfg.steady.random_starts {
        let start = DiscreteField::new((0..model.node_count()).map(|_| rng.gen_range(eps..=delta)).collect());
        let (u, trace) = ctx.timed(&format!("random_start_{k}"), |_| iterate_from(model, &start, &iter, &solve))?;
        let r = verify_solution(model, &u)?;
        residual_checks(ctx, &format!("random start {k}"), &r);
        let below = ex.lower.values.iter().zip(&u.values).map(|(l, v)| l - v).fold(0.0, f64::max);
        let above = u.values.iter().zip(&ex.upper.values).map(|(v, h)| v - h).fold(0.0, f64::max);
        ctx.check(
            "steady_state.sandwich",
            below <= agree && above <= agree && trace.converged,
            format!("random start {k}: below U_min by {}, above U_max by {}", sci(below), sci(above)),
        );
        random.push(json!({
            "iterations": trace.iterations(),
            "converged": trace.converged,
            "distance_to_lower": u.sup_distance(&ex.lower),
            "distance_to_upper": u.sup_distance(&ex.upper),
            "residuals": r,
        }));
        accepted.push((format!("random_{k}"), u));
    }
    if ex.unique && cfg.steady.random_starts > 0 {
        let worst = accepted.iter().map(|(_, u)| u.sup_distance(&ex.lower)).fold(0.0, f64::max);
        ctx.check(
            "steady_state.uniqueness",
            worst <= agree,
            format!("extremal and random-start solutions agree to {}", sci(worst)),
        );
    }

    let analysis = if model.src.x_independent() && cfg.mode == Mode::Steady && (eps, delta) == (0.0, model.src.delta0()) {
        let a = constant_solution_analysis(&model.src, 1e-14)?;
        if let (Some(cmin), Some(cmax)) = (a.predicted_min, a.predicted_max) {
            let dmin = ex.lower.values.iter().map(|v| (v - cmin).abs()).fold(0.0, f64::max);
            let dmax = ex.upper.values.iter().map(|v| (v - cmax).abs()).fold(0.0, f64::max);
            ctx.check(
                "steady_state.sign_table_prediction",
                dmin <= agree && dmax <= agree,
                format!("U_min vs {cmin:.6}: {}, U_max vs {cmax:.6}: {}", sci(dmin), sci(dmax)),
            );
        }
        Some(a)
    } else {
        None
    };

    let alphas = model.src.alpha().map(|a| vec![a]);
    let uniq = uniqueness_diagnostics(&model.op, &model.src, alphas.as_deref())?;
    if cfg.mode == Mode::BandSteady && uniq.at_most_one_strongly_positive && ex.lower.min() > 0.0 {
        ctx.check(
            "steady_state.strongly_positive_uniqueness",
            ex.sup_gap <= agree,
            format!("min U_min = {:.6}, sup |U_max − U_min| = {}", ex.lower.min(), sci(ex.sup_gap)),
        );
    }

    let mut reflections = Vec::new();
    if cfg.steady.check_reflection {
        for (label, u) in &accepted {
            let w = symmetry_double(&model.src, u)?;
            let r = verify_solution(model, &w)?;
            ctx.check(
                "steady_state.reflection",
                r.weak_residual < cfg.steady.residual_tol,
                format!("δ₀ − {label}: residual {}", sci(r.weak_residual)),
            );
            reflections.push(json!({ "of": label, "residuals": r }));
        }
    }

    ctx.plots.push(("profile.svg".into(), profile("extremal solutions", &model.mesh, &[("U_min", &ex.lower), ("U_max", &ex.upper)])));
    ctx.plots.push(("sup_diff.svg".into(), decay_plot(&[("from lower", &ex.lower_trace), ("from upper", &ex.upper_trace)])));
    ctx.fields.push(("upper".into(), ex.upper.clone()));
    ctx.fields.extend(accepted.iter().filter(|(n, _)| n != "upper").cloned());

    Ok(json!({
        "lower": { "summary": ctx.summary(&ex.lower)?, "trace": ex.lower_trace },
        "upper": { "summary": ctx.summary(&ex.upper)?, "trace": ex.upper_trace },
        "sup_gap": ex.sup_gap,
        "unique": ex.unique,
        "verification": verifications,
        "random_starts": random,
        "constant_analysis": analysis,
        "uniqueness": uniq,
        "reflections": reflections,
    }))
}

fn run_gamma(ctx: &mut Ctx<'_>) -> Result<Value> {
    let exp = ctx.exp;
    let model = &exp.model;
    let gcfg = exp.config.gamma.as_ref().ok_or_else(|| Error::Config("missing [gamma]".into()))?;
    let lambda = gcfg.lambda.unwrap_or(model.src.lambda0());
    let level = DiscreteField::constant(&model.mesh, gcfg.g_level);
    let g = model.src.g_field(lambda, model.mesh.nodes(), &level)?;
    let solve = exp.config.solver;
    let (limit, rows) = ctx.timed("gamma_study", |_| gamma_convergence_study(model, lambda, &g, &gcfg.eps, &solve))?;
    for r in &rows {
        ctx.timings.insert(format!("solve_eps_{:e}", r.eps), r.wall_time);
        ctx.check(
            "solver.gamma_sandwich",
            r.pass,
            format!("ε = {:e}: 0 ≤ gap = {} ≤ {}", r.eps, sci(r.gap), sci(r.bound)),
        );
        ctx.check(
            "solver.time_budget",
            r.wall_time < gcfg.time_limit,
            format!("ε = {:e}: solve within {} s", r.eps, gcfg.time_limit),
        );
    }
    let monotone = rows.windows(2).all(|w| w[1].gap <= w[0].gap + 1e-12);
    ctx.check("solver.gap_monotone", monotone, "gap is nonincreasing as ε decreases".into());
    for s in &limit.stages {
        ctx.check(
            "solver.continuation_sandwich",
            s.gap >= -GAMMA_SLACK && s.gap <= s.gap_bound + GAMMA_SLACK,
            format!("stage ε = {:e}: gap {} ≤ {}", s.eps, sci(s.gap), sci(s.gap_bound)),
        );
    }
    if let Some(last) = limit.stages.last() {
        ctx.check(
            "solver.continuation_limit",
            last.gap.abs() < 1e-9,
            format!("last stage ε = {:e}: gap {}", last.eps, sci(last.gap)),
        );
    }
    ctx.check(
        "solver.bound_preservation",
        limit.bound_violation <= solve.bound_tol,
        format!("band violation {}", sci(limit.bound_violation)),
    );
    ctx.check(
        "solver.energy_lower_bound",
        limit.lower_bound_slack >= 0.0,
        format!("smallest J − bound over iterates: {}", sci(limit.lower_bound_slack)),
    );
    let gap_series = Series::new("min J_ε − min J", rows.iter().map(|r| (r.eps, r.gap.max(1e-300))).collect());
    let bound_series = Series::new("ε|Ω|/p⁻", rows.iter().map(|r| (r.eps, r.bound)).collect()).dashed();
    ctx.plots.push(("gamma_gap.svg".into(), line_chart("Γ-sandwich gap", "ε", "gap", &[gap_series, bound_series], true, true)));
    ctx.plots.push(("profile.svg".into(), profile("minimizer of J_λ", &model.mesh, &[("V", &limit.minimizer)])));
    ctx.fields.push(("minimizer".into(), limit.minimizer.clone()));
    ctx.fields.push(("g".into(), g));
    Ok(json!({
        "lambda": lambda,
        "min_energy": limit.energy,
        "minimizer": ctx.summary(&limit.minimizer)?,
        "continuation": limit,
        "rows": rows,
    }))
}

/// Scalar oracle for a Rothe step from a constant: `b(v) = b(c) + τ f(c)`.
fn scalar_step(model: &Model, tau: f64, c: f64) -> f64 {
    let x = model.src.samples()[0];
    let target = model.src.b_bar(x, c) + tau * model.src.f(x, c);
    let (mut lo, mut hi) = (-1.0, model.src.delta0() + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if model.src.b_bar(x, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn run_rothe(ctx: &mut Ctx<'_>) -> Result<Value> {
    let exp = ctx.exp;
    let model = &exp.model;
    let rc = exp.config.rothe.as_ref().ok_or_else(|| Error::Config("missing [rothe]".into()))?;
    let solve = exp.config.solver;
    let bound_tol = solve.bound_tol;
    let u0 = field_from_expr(&model.mesh, "rothe.u0", &rc.u0)?;
    let traj = ctx.timed("trajectory", |_| rothe_evolve(model, &u0, rc.tau, rc.steps, &solve))?;
    let d = model.src.delta0();
    let worst = traj.states.iter().map(|u| u.band_violation(0.0, d)).fold(0.0, f64::max);
    ctx.check("rothe.invariance", worst <= bound_tol, format!("states leave [0, δ₀] by at most {}", sci(worst)));

    let constant = u0.max() == u0.min();
    let mut recursion = Value::Null;
    if constant && model.src.x_independent() {
        let mut c = u0.values[0];
        let mut err: f64 = 0.0;
        for u in &traj.states {
            err = err.max(u.values.iter().map(|v| (v - c).abs()).fold(0.0, f64::max));
            c = scalar_step(model, rc.tau, c);
        }
        ctx.check(
            "rothe.scalar_recursion",
            err <= rc.recursion_tol,
            format!("max deviation from b(c') = b(c) + τf(c) over {} steps: {}", rc.steps, sci(err)),
        );
        recursion = json!({ "max_error": err });
    }

    let mut comparison = Value::Null;
    let mut upper_traj = None;
    if let Some(text) = &rc.u0_upper {
        let v0 = field_from_expr(&model.mesh, "rothe.u0_upper", text)?;
        let initial = u0.values.iter().zip(&v0.values).map(|(a, b)| a - b).fold(0.0, f64::max);
        if initial > 0.0 {
            return Err(Error::Config(format!("rothe.u0_upper lies below rothe.u0 by {initial:e}")));
        }
        let t2 = ctx.timed("upper_trajectory", |_| rothe_evolve(model, &v0, rc.tau, rc.steps, &solve))?;
        let defect = traj.order_defect(&t2);
        ctx.check("rothe.comparison", defect <= 1e-8, format!("largest order defect {}", sci(defect)));
        comparison = json!({ "order_defect": defect, "upper_final": ctx.summary(t2.last())? });
        upper_traj = Some(t2);
    }

    let mut steady = Value::Null;
    if rc.steady_steps > 0 {
        let iter = exp.config.steady.iterate_options();
        let ex = ctx.timed("steady_state", |_| compute_extremal_solutions(model, &iter, &solve))?;
        let t3 = ctx.timed("steady_trajectory", |_| rothe_evolve(model, &ex.upper, rc.tau, rc.steady_steps, &solve))?;
        let drift = t3.distances_to(&ex.upper).into_iter().fold(0.0, f64::max);
        ctx.check(
            "rothe.steady_consistency",
            drift < rc.drift_tol,
            format!("drift from U_max over {} steps: {}", rc.steady_steps, sci(drift)),
        );
        steady = json!({ "drift": drift, "upper": ctx.summary(&ex.upper)? });
    }

    let range = |t: &crate::rothe::Trajectory, f: fn(&DiscreteField) -> f64| -> Vec<(f64, f64)> {
        t.times.iter().zip(&t.states).map(|(time, u)| (*time, f(u))).collect()
    };
    let mut series = vec![
        Series::new("min u", range(&traj, DiscreteField::min)),
        Series::new("max u", range(&traj, DiscreteField::max)).dashed(),
    ];
    if let Some(t2) = &upper_traj {
        series.push(Series::new("min v", range(t2, DiscreteField::min)));
        series.push(Series::new("max v", range(t2, DiscreteField::max)).dashed());
    }
    ctx.plots.push(("rothe_range.svg".into(), line_chart("Rothe trajectory range", "t", "u", &series, false, false)));
    ctx.plots.push(("profile.svg".into(), profile("Rothe states", &model.mesh, &[("final", traj.last()), ("initial", &u0)])));
    ctx.fields.push(("final".into(), traj.last().clone()));
    ctx.fields.push(("initial".into(), u0));
    let summaries = traj
        .states
        .iter()
        .map(|u| ctx.summary(u))
        .collect::<Result<Vec<_>>>()?;
    Ok(json!({
        "tau": rc.tau,
        "steps": rc.steps,
        "trajectory": traj,
        "state_summaries": summaries,
        "scalar_recursion": recursion,
        "comparison": comparison,
        "steady_consistency": steady,
    }))
}

fn run_properties(ctx: &mut Ctx<'_>) -> Result<Value> {
    let exp = ctx.exp;
    let model = &exp.model;
    let trials = exp.config.suite.trials;
    let seed = exp.config.seed;
    let modular = ctx.timed("modular", |_| check_modular_relations(&model.p, &model.mesh, trials, seed))?;
    ctx.check(
        "varexp_core.modular_relations",
        modular.passed(),
        format!("{} checks, {} violations", modular.checks, modular.violations.len()),
    );
    let structure = ctx.timed("structure", |_| check_structure(&model.op, &model.mesh, trials, seed))?;
    ctx.check(
        "flux_ops.structure",
        structure.passed(),
        format!("{} checks, {} violations", structure.checks, structure.violations.len()),
    );
    let hyp = ctx.timed("hypotheses", |_| check_hypotheses(&model.src, trials, seed))?;
    ctx.check(
        "sources.hypotheses",
        hyp.passed(),
        format!("{} checks, {} violations", hyp.checks, hyp.violations.len()),
    );
    let alphas = model.src.alpha().map(|a| vec![a]);
    let uniq = uniqueness_diagnostics(&model.op, &model.src, alphas.as_deref())?;
    Ok(json!({
        "modular": modular,
        "structure": structure,
        "hypotheses": hyp,
        "uniqueness": uniq,
    }))
}

fn csv(mesh: &crate::mesh::Mesh, f: &DiscreteField) -> String {
    let mut out = String::from("node_index,x,y,value\n");
    for (i, (p, v)) in mesh.nodes().iter().zip(&f.values).enumerate() {
        out.push_str(&format!("{i},{},{},{}\n", p[0], p[1], v));
    }
    out
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::Config(format!("cannot write {}: {e}", path.display()))
}

/// Writes `report.json`, `timing.json`, `fields.csv`, `fields/*.csv` and
/// `plots/*.svg` under `dir`.
pub fn write_outputs(dir: &Path, exp: &Experiment, out: &RunOutput) -> Result<()> {
    let mesh = &exp.model.mesh;
    fs::create_dir_all(dir.join("fields")).map_err(io(dir))?;
    fs::create_dir_all(dir.join("plots")).map_err(io(dir))?;
    let report = serde_json::to_string_pretty(&out.report).map_err(|e| Error::Numeric(e.to_string()))? + "\n";
    fs::write(dir.join("report.json"), report).map_err(io(dir))?;
    let timing = serde_json::to_string_pretty(&out.timings).map_err(|e| Error::Numeric(e.to_string()))? + "\n";
    fs::write(dir.join("timing.json"), timing).map_err(io(dir))?;
    if let Some((_, main)) = out.fields.first() {
        fs::write(dir.join("fields.csv"), csv(mesh, main)).map_err(io(dir))?;
    }
    for (name, f) in &out.fields {
        fs::write(dir.join("fields").join(format!("{name}.csv")), csv(mesh, f)).map_err(io(dir))?;
    }
    for (name, svg) in &out.plots {
        fs::write(dir.join("plots").join(name), svg).map_err(io(dir))?;
    }
    Ok(())
}

/// Overrides the seed of a configuration before validation.
pub fn with_seed(mut config: ExperimentConfig, seed: Option<u64>) -> ExperimentConfig {
    if let Some(s) = seed {
        config.seed = s;
    }
    config
}

/// Configurations shipped with the crate, run by `dnp-steady suite`.
pub const BUNDLED: &[(&str, &str)] = &[
    ("gamma_two_phase", include_str!("../../configs/gamma_two_phase.toml")),
    ("logistic_steady", include_str!("../../configs/logistic_steady.toml")),
    ("allee_rectangle", include_str!("../../configs/allee_rectangle.toml")),
    ("allee_band", include_str!("../../configs/allee_band.toml")),
    ("decreasing_unique", include_str!("../../configs/decreasing_unique.toml")),
    ("three_phase_signomial", include_str!("../../configs/three_phase_signomial.toml")),
    ("symmetric_sine", include_str!("../../configs/symmetric_sine.toml")),
    ("rothe_logistic", include_str!("../../configs/rothe_logistic.toml")),
    ("rothe_constant", include_str!("../../configs/rothe_constant.toml")),
    ("property_multiphase", include_str!("../../configs/property_multiphase.toml")),
    ("property_maxform", include_str!("../../configs/property_maxform.toml")),
];

/// Outcome of one bundled configuration.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteEntry {
    pub name: String,
    pub passed: bool,
    pub failed_assertions: Vec<String>,
    /// Set when the run stopped with an error instead of a report.
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteSummary {
    pub passed: bool,
    pub entries: Vec<SuiteEntry>,
}

/// Parses a configuration string and applies a seed override.
pub fn prepare(text: &str, seed: Option<u64>) -> Result<Experiment> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    super::config::validate(with_seed(config, seed))
}

/// Runs every bundled configuration; with `out`, each writes into
/// `out/<name>/` and the summary goes to `out/suite.json`.
pub fn run_suite(out: Option<&Path>, seed: Option<u64>) -> Result<SuiteSummary> {
    let mut entries = Vec::new();
    for (name, text) in BUNDLED {
        let result = prepare(text, seed).and_then(|exp| {
            let run = run_experiment(&exp)?;
            if let Some(dir) = out {
                write_outputs(&dir.join(name), &exp, &run)?;
            }
            Ok(run)
        });
        entries.push(match result {
            Ok(run) => SuiteEntry {
                name: name.to_string(),
                passed: run.passed,
                failed_assertions: run
                    .assertions
                    .iter()
                    .filter(|a| !a.passed)
                    .map(|a| format!("{}: {}", a.name, a.detail))
                    .collect(),
                error: None,
            },
            Err(e) => SuiteEntry {
                name: name.to_string(),
                passed: false,
                failed_assertions: Vec::new(),
                error: Some(e.to_string()),
            },
        });
    }
    let summary = SuiteSummary {
        passed: entries.iter().all(|e| e.passed),
        entries,
    };
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(io(dir))?;
        let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Numeric(e.to_string()))? + "\n";
        fs::write(dir.join("suite.json"), text).map_err(io(dir))?;
    }
    Ok(summary)
}
