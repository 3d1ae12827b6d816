//! Minimization of the perturbed energy, ε-continuation, and the operator 𝒦.
//!
//! Each subproblem is solved by damped Newton on the nodal values with an
//! Armijo backtracking line search. Bounds `0 ≤ V ≤ δ₀` are never enforced:
//! they must come out of the equation, and a violation is an error.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{assemble_energy_gradient, assemble_hessian, Load, Model};
use crate::error::{Error, Result};
use crate::mesh::DiscreteField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    /// Stationarity tolerance, relative to the size of the data.
    pub tol: f64,
    /// Largest tolerated distance of a minimizer to `[0, δ₀]`.
    pub bound_tol: f64,
    pub max_newton: usize,
    pub max_linesearch: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    pub eps_factor: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            bound_tol: 1e-8,
            max_newton: 200,
            max_linesearch: 60,
            eps_start: 1e-2,
            eps_end: 1e-10,
            eps_factor: 0.1,
        }
    }
}

impl SolveOptions {
    fn validate(&self) -> Result<()> {
        let ok = self.tol > 0.0
            && self.bound_tol >= 0.0
            && self.max_newton > 0
            && self.max_linesearch > 0
            && self.eps_start > 0.0
            && self.eps_end > 0.0
            && self.eps_end <= self.eps_start
            && self.eps_factor > 0.0
            && self.eps_factor < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid solver options {self:?}")))
        }
    }

    /// The continuation schedule `eps_start, eps_start·factor, …, ≥ eps_end`.
    pub fn eps_schedule(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut e = self.eps_start;
        while e >= self.eps_end * (1.0 - 1e-9) {
            out.push(e);
            e *= self.eps_factor;
        }
        out
    }
}

/// One ε-stage of a continuation run.
#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub eps: f64,
    /// `min J_{λ,ε}`.
    pub energy: f64,
    /// `min J_{λ,ε} − min J_λ`, filled in after the final stage.
    pub gap: f64,
    /// `ε |Ω| max(1, δ₀^{p⁺}) / p⁻`.
    pub gap_bound: f64,
    pub newton_iters: usize,
    pub grad_norm: f64,
    pub bound_violation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub minimizer: DiscreteField,
    pub energy: f64,
    /// `max_i |∂J/∂V_i| / m_i`, the nodal residual of the weak form.
    pub grad_norm: f64,
    pub tolerance: f64,
    pub newton_iters: usize,
    pub linesearch_steps: usize,
    pub gradient_steps: usize,
    pub eps_schedule: Vec<f64>,
    pub stages: Vec<StageRecord>,
    pub bound_violation: f64,
    /// Lowest energy lower-bound slack `J − bound` met by any iterate.
    pub lower_bound_slack: f64,
    #[serde(skip)]
    pub wall_time: f64,
}

struct Inner {
    v: DiscreteField,
    energy: f64,
    grad_norm: f64,
    newton: usize,
    linesearch: usize,
    gradient_steps: usize,
    min_energy_seen: f64,
}

fn nodal_norm(grad: &DiscreteField, mass: &[f64]) -> f64 {
    grad.values
        .iter()
        .zip(mass)
        .map(|(g, m)| (g / m).abs())
        .fold(0.0, f64::max)
}

fn data_scale(model: &Model, g: Option<&DiscreteField>, lambda: f64) -> f64 {
    let gmax = g.map_or(0.0, |g| g.values.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    let d = model.src.delta0();
    let bmax = model
        .mesh
        .nodes()
        .iter()
        .map(|&x| model.src.b(x, d).abs())
        .fold(0.0, f64::max);
    1.0 + gmax + lambda * bmax
}

/// Damped Newton for a strictly convex energy, starting at `start`.
fn minimize(
    model: &Model,
    load: Load<'_>,
    lambda: f64,
    eps: f64,
    start: DiscreteField,
    tol: f64,
    force_step: bool,
    opts: &SolveOptions,
) -> Result<Inner> {
    let mass = model.mesh.lumped_mass();
    let mut v = start;
    let (mut e, mut grad) = assemble_energy_gradient(model, load, lambda, eps, &v)?;
    let mut gn = nodal_norm(&grad, mass);
    let mut out = Inner {
        v: DiscreteField::new(Vec::new()),
        energy: e,
        grad_norm: gn,
        newton: 0,
        linesearch: 0,
        gradient_steps: 0,
        min_energy_seen: e,
    };
    let mut trace = Vec::new();
    while gn > tol || (force_step && out.newton == 0) {
        let forced = gn <= tol;
        if out.newton >= opts.max_newton {
            return Err(Error::Numeric(format!(
                "Newton did not converge in {} iterations (ε = {eps:e}, residual {gn:e} > {tol:e}); recent residuals {trace:?}",
                opts.max_newton
            )));
        }
        out.newton += 1;
        let newton_dir = assemble_hessian(model, load, lambda, eps, &v)
            .and_then(|h| h.cholesky())
            .map(|c| c.solve(&grad.values.iter().map(|g| -g).collect::<Vec<_>>()))
            .ok();
        let mut tried_gradient = false;
        let mut dir = match newton_dir {
            Some(d) => d,
            None => {
                tried_gradient = true;
                grad.values.iter().zip(mass).map(|(g, m)| -g / m).collect()
            }
        };
        let accepted = loop {
            let slope: f64 = dir.iter().zip(&grad.values).map(|(d, g)| d * g).sum();
            if slope < 0.0 {
                if let Some(step) = line_search(model, load, lambda, eps, &v, e, gn, slope, &dir, opts, &mut out.linesearch)? {
                    break Some(step);
                }
            }
            if tried_gradient {
                break None;
            }
            tried_gradient = true;
            out.gradient_steps += 1;
            dir = grad.values.iter().zip(mass).map(|(g, m)| -g / m).collect();
        };
        let Some((nv, ne, ng)) = accepted else {
            if forced {
                break;
            }
            return Err(Error::Numeric(format!(
                "line search failed at Newton iteration {} (ε = {eps:e}, residual {gn:e}); recent residuals {trace:?}",
                out.newton
            )));
        };
        v = nv;
        e = ne;
        grad = ng;
        gn = nodal_norm(&grad, mass);
        out.min_energy_seen = out.min_energy_seen.min(e);
        trace.push(gn);
        if trace.len() > 6 {
            trace.remove(0);
        }
    }
    out.v = v;
    out.energy = e;
    out.grad_norm = gn;
    Ok(out)
}

type Step = (DiscreteField, f64, DiscreteField);

#[allow(clippy::too_many_arguments)]
fn line_search(
    model: &Model,
    load: Load<'_>,
    lambda: f64,
    eps: f64,
    v: &DiscreteField,
    e: f64,
    gn: f64,
    slope: f64,
    dir: &[f64],
    opts: &SolveOptions,
    count: &mut usize,
) -> Result<Option<Step>> {
    const C: f64 = 1e-4;
    let mass = model.mesh.lumped_mass();
    let mut t = 1.0;
    for _ in 0..opts.max_linesearch {
        *count += 1;
        let trial = DiscreteField::new(v.values.iter().zip(dir).map(|(a, d)| a + t * d).collect());
        match assemble_energy_gradient(model, load, lambda, eps, &trial) {
            Ok((et, gt)) => {
                let armijo = et - e <= C * t * slope;
                // below roundoff the energy cannot rank steps; fall back on the residual
                let flat = (et - e).abs() <= 1e-13 * (1.0 + e.abs()) && nodal_norm(&gt, mass) < gn;
                if armijo || flat {
                    return Ok(Some((trial, et, gt)));
                }
            }
            Err(Error::Numeric(_)) => {}
            Err(other) => return Err(other),
        }
        t *= 0.5;
    }
    Ok(None)
}

fn check_m_lambda(model: &Model, lambda: f64, g: &DiscreteField) -> Result<()> {
    let viol = model.src.m_lambda_violation(lambda, model.mesh.nodes(), g);
    let scale = data_scale(model, Some(g), lambda);
    if viol > 1e-9 * scale {
        return Err(Error::Domain(format!(
            "right side leaves M_λ = [λ b(x,0), λ b(x,δ₀)] by {viol:e}"
        )));
    }
    Ok(())
}

/// Solves `λ b̄(x_i, V_i) = g_i` node by node: the minimizer when the
/// diffusion term is dropped. Used as the default starting field.
pub fn pointwise_start(model: &Model, lambda: f64, g: &DiscreteField) -> DiscreteField {
    let d = model.src.delta0();
    let vals = model
        .mesh
        .nodes()
        .iter()
        .zip(&g.values)
        .map(|(&x, &gv)| {
            if lambda == 0.0 {
                return 0.5 * d;
            }
            let target = gv / lambda;
            let (mut lo, mut hi) = (-1.0 - d, 1.0 + 2.0 * d);
            while model.src.b_bar(x, lo) > target {
                lo = 2.0 * lo - 1.0;
            }
            while model.src.b_bar(x, hi) < target {
                hi = 2.0 * hi + 1.0;
            }
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if model.src.b_bar(x, mid) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect();
    DiscreteField::new(vals)
}

fn gap_bound(model: &Model, eps: f64) -> f64 {
    let d = model.src.delta0();
    eps * model.mesh.measure() * d.powf(model.p.p_max()).max(1.0) / model.p.p_min()
}

fn bound_violation(model: &Model, v: &DiscreteField) -> f64 {
    v.band_violation(0.0, model.src.delta0())
}

fn enforce_bounds(model: &Model, v: &DiscreteField, opts: &SolveOptions, what: &str) -> Result<f64> {
    let viol = bound_violation(model, v);
    if viol > opts.bound_tol {
        return Err(Error::Structural(format!(
            "{what} leaves [0, δ₀] by {viol:e} > {:e}",
            opts.bound_tol
        )));
    }
    Ok(viol)
}

/// Unique minimizer of `J_{λ,ε}` for `ε > 0` and `g ∈ M_λ`.
pub fn solve_perturbed(
    model: &Model,
    lambda: f64,
    eps: f64,
    g: &DiscreteField,
    start: Option<&DiscreteField>,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    let clock = Instant::now();
    opts.validate()?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!("ε = {eps} must be positive")));
    }
    model.src.g_lambda(lambda, [0.0, 0.0], 0.0)?;
    g.check_mesh(&model.mesh)?;
    check_m_lambda(model, lambda, g)?;
    let v0 = match start {
        Some(s) => {
            s.check_mesh(&model.mesh)?;
            s.clone()
        }
        None => pointwise_start(model, lambda, g),
    };
    let tol = opts.tol * data_scale(model, Some(g), lambda);
    let inner = minimize(model, Load::Data(g), lambda, eps, v0, tol, true, opts)?;
    let viol = enforce_bounds(model, &inner.v, opts, "minimizer of J_{λ,ε}")?;
    let floor = crate::energy::energy_lower_bound(model, lambda);
    Ok(SolveReport {
        energy: inner.energy,
        grad_norm: inner.grad_norm,
        tolerance: tol,
        newton_iters: inner.newton,
        linesearch_steps: inner.linesearch,
        gradient_steps: inner.gradient_steps,
        eps_schedule: vec![eps],
        stages: Vec::new(),
        bound_violation: viol,
        lower_bound_slack: inner.min_energy_seen - floor,
        minimizer: inner.v,
        wall_time: clock.elapsed().as_secs_f64(),
    })
}

/// Minimizer of `J_λ` by ε-continuation followed by an ε = 0 polish. Every
/// stage is recorded together with its gap to the final minimum.
pub fn solve_auxiliary(
    model: &Model,
    lambda: f64,
    g: &DiscreteField,
    start: Option<&DiscreteField>,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    solve_auxiliary_with(model, lambda, g, start, opts, &opts.eps_schedule())
}

fn solve_auxiliary_with(
    model: &Model,
    lambda: f64,
    g: &DiscreteField,
    start: Option<&DiscreteField>,
    opts: &SolveOptions,
    schedule: &[f64],
) -> Result<SolveReport> {
    let clock = Instant::now();
    opts.validate()?;
    model.src.g_lambda(lambda, [0.0, 0.0], 0.0)?;
    g.check_mesh(&model.mesh)?;
    check_m_lambda(model, lambda, g)?;
    let mut v = match start {
        Some(s) => {
            s.check_mesh(&model.mesh)?;
            s.clone()
        }
        None => pointwise_start(model, lambda, g),
    };
    let tol = opts.tol * data_scale(model, Some(g), lambda);
    let mut stages = Vec::with_capacity(schedule.len());
    let (mut newton, mut ls, mut gd) = (0, 0, 0);
    let mut min_seen = f64::INFINITY;
    for &eps in schedule {
        let inner = minimize(model, Load::Data(g), lambda, eps, v, tol, false, opts)?;
        let viol = enforce_bounds(model, &inner.v, opts, &format!("minimizer of J_(λ,ε) at ε = {eps:e}"))?;
        newton += inner.newton;
        ls += inner.linesearch;
        gd += inner.gradient_steps;
        min_seen = min_seen.min(inner.min_energy_seen);
        stages.push(StageRecord {
            eps,
            energy: inner.energy,
            gap: f64::NAN,
            gap_bound: gap_bound(model, eps),
            newton_iters: inner.newton,
            grad_norm: inner.grad_norm,
            bound_violation: viol,
        });
        v = inner.v;
    }
    let last = minimize(model, Load::Data(g), lambda, 0.0, v, tol, true, opts)?;
    let viol = enforce_bounds(model, &last.v, opts, "minimizer of J_λ")?;
    min_seen = min_seen.min(last.min_energy_seen);
    for s in &mut stages {
        s.gap = s.energy - last.energy;
    }
    let floor = crate::energy::energy_lower_bound(model, lambda);
    let mut eps_schedule: Vec<f64> = schedule.to_vec();
    eps_schedule.push(0.0);
    Ok(SolveReport {
        energy: last.energy,
        grad_norm: last.grad_norm,
        tolerance: tol,
        newton_iters: newton + last.newton,
        linesearch_steps: ls + last.linesearch,
        gradient_steps: gd + last.gradient_steps,
        eps_schedule,
        stages,
        bound_violation: viol,
        lower_bound_slack: min_seen - floor,
        minimizer: last.v,
        wall_time: clock.elapsed().as_secs_f64(),
    })
}

/// `𝒦_λ(U)`: the solution of `−div a(x,∇V) + λ b̄(x,V) = f(x,U) + λ b(x,U)`.
pub fn apply_k_report(model: &Model, lambda: f64, u: &DiscreteField, opts: &SolveOptions) -> Result<SolveReport> {
    u.check_mesh(&model.mesh)?;
    let viol = bound_violation(model, u);
    if viol > opts.bound_tol {
        return Err(Error::Domain(format!(
            "𝒦 needs 0 ≤ U ≤ δ₀; the field leaves the band by {viol:e}"
        )));
    }
    let g = model.src.g_field(lambda, model.mesh.nodes(), u)?;
    solve_auxiliary(model, lambda, &g, Some(u), opts)
}

pub fn apply_k(model: &Model, lambda: f64, u: &DiscreteField, opts: &SolveOptions) -> Result<DiscreteField> {
    Ok(apply_k_report(model, lambda, u, opts)?.minimizer)
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaRow {
    pub eps: f64,
    pub min_perturbed: f64,
    pub min_limit: f64,
    pub gap: f64,
    pub bound: f64,
    pub pass: bool,
    pub newton_iters: usize,
    #[serde(skip)]
    pub wall_time: f64,
}

/// Slack added to the upper sandwich bound for roundoff.
pub const GAMMA_SLACK: f64 = 1e-9;

/// For each ε, solves the perturbed problem independently (cold start) and
/// compares its minimum with `min J_λ`.
pub fn gamma_convergence_study(
    model: &Model,
    lambda: f64,
    g: &DiscreteField,
    eps_list: &[f64],
    opts: &SolveOptions,
) -> Result<(SolveReport, Vec<GammaRow>)> {
    if eps_list.is_empty() || eps_list.iter().any(|e| !(*e > 0.0)) || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Domain("eps_list must be positive and strictly decreasing".into()));
    }
    let limit = solve_auxiliary(model, lambda, g, None, opts)?;
    let m = limit.energy;
    let rows = eps_list
        .par_iter()
        .map(|&eps| {
            let clock = Instant::now();
            let r = solve_perturbed(model, lambda, eps, g, None, opts)?;
            let gap = r.energy - m;
            let bound = gap_bound(model, eps);
            Ok(GammaRow {
                eps,
                min_perturbed: r.energy,
                min_limit: m,
                gap,
                bound,
                pass: gap >= -GAMMA_SLACK && gap <= bound + GAMMA_SLACK,
                newton_iters: r.newton_iters,
                wall_time: clock.elapsed().as_secs_f64(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((limit, rows))
}
