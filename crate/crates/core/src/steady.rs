//! Steady states: monotone 𝒦-iteration, verification and uniqueness
//! diagnostics.

use serde::{Deserialize, Serialize};

use crate::energy::{flux_residual, Model};
use crate::error::{Error, Result};
use crate::flux::{phi_ratio_monotonicity, FluxOperator, RatioMonotonicity};
use crate::mesh::{integrate, DiscreteField};
use crate::solver::{apply_k_report, SolveOptions};
use crate::sources::{f_ratio_monotonicity, FRatioMonotonicity, SourceSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Start {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    IncreasingFromLower,
    DecreasingFromUpper,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IterateOptions {
    /// Stop once `sup |U_{n+1} − U_n| < tol`.
    pub tol: f64,
    pub max_iters: usize,
    /// Keep only norms, not the iterates themselves.
    pub compact: bool,
    /// Tolerated ordering defect between consecutive iterates.
    pub order_tol: f64,
}

impl Default for IterateOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 10_000,
            compact: true,
            order_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationTrace {
    pub direction: Direction,
    pub lambda: f64,
    pub sup_diffs: Vec<f64>,
    /// Nodal minimum and maximum of each iterate, starting with `U₀`.
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
    #[serde(skip)]
    pub iterates: Vec<DiscreteField>,
    pub converged: bool,
    pub newton_iters: usize,
    /// Largest amount by which an iterate stepped against the declared order.
    pub order_defect: f64,
}

impl IterationTrace {
    pub fn iterations(&self) -> usize {
        self.sup_diffs.len()
    }
}

fn run(
    model: &Model,
    start: DiscreteField,
    direction: Direction,
    opts: &IterateOptions,
    solve: &SolveOptions,
) -> Result<(DiscreteField, IterationTrace)> {
    if !(opts.tol > 0.0) {
        return Err(Error::Domain(format!("tolerance {} must be positive", opts.tol)));
    }
    let lambda = model.src.lambda0();
    let mut trace = IterationTrace {
        direction,
        lambda,
        sup_diffs: Vec::new(),
        mins: vec![start.min()],
        maxs: vec![start.max()],
        iterates: Vec::new(),
        converged: false,
        newton_iters: 0,
        order_defect: 0.0,
    };
    if !opts.compact {
        trace.iterates.push(start.clone());
    }
    let mut u = start;
    for n in 0..opts.max_iters {
        let report = apply_k_report(model, lambda, &u, solve)?;
        trace.newton_iters += report.newton_iters;
        let next = report.minimizer;
        let defect = next
            .values
            .iter()
            .zip(&u.values)
            .map(|(a, b)| match direction {
                Direction::IncreasingFromLower => b - a,
                Direction::DecreasingFromUpper => a - b,
                Direction::Free => f64::NEG_INFINITY,
            })
            .fold(0.0, f64::max);
        trace.order_defect = trace.order_defect.max(defect);
        if defect > opts.order_tol {
            return Err(Error::Structural(format!(
                "𝒦-iteration lost monotonicity at step {}: iterate moved {defect:e} against the {direction:?} order",
                n + 1
            )));
        }
        let diff = next.sup_distance(&u);
        trace.sup_diffs.push(diff);
        trace.mins.push(next.min());
        trace.maxs.push(next.max());
        if !opts.compact {
            trace.iterates.push(next.clone());
        }
        u = next;
        if diff < opts.tol {
            trace.converged = true;
            break;
        }
    }
    Ok((u, trace))
}

/// Iterates `U_{n+1} = 𝒦_{λ₀}(U_n)` from the constant `ε` (lower) or `δ`
/// (upper) of the source's band, asserting the monotone order at each step.
pub fn monotone_iterate(
    model: &Model,
    start: Start,
    opts: &IterateOptions,
    solve: &SolveOptions,
) -> Result<(DiscreteField, IterationTrace)> {
    let (eps, delta) = model.src.band();
    let (c, dir) = match start {
        Start::Lower => (eps, Direction::IncreasingFromLower),
        Start::Upper => (delta, Direction::DecreasingFromUpper),
    };
    let (u, trace) = run(model, DiscreteField::constant(&model.mesh, c), dir, opts, solve)?;
    let viol = u.band_violation(eps, delta);
    if viol > solve.bound_tol {
        return Err(Error::Structural(format!(
            "limit leaves the band [{eps}, {delta}] by {viol:e}"
        )));
    }
    Ok((u, trace))
}

/// 𝒦-iteration from an arbitrary field in `[0, δ₀]`, with no order check.
pub fn iterate_from(
    model: &Model,
    start: &DiscreteField,
    opts: &IterateOptions,
    solve: &SolveOptions,
) -> Result<(DiscreteField, IterationTrace)> {
    start.check_mesh(&model.mesh)?;
    run(model, start.clone(), Direction::Free, opts, solve)
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtremalSolutions {
    pub lower: DiscreteField,
    pub upper: DiscreteField,
    pub lower_trace: IterationTrace,
    pub upper_trace: IterationTrace,
    pub sup_gap: f64,
    pub unique: bool,
}

/// Both monotone iterations (run concurrently); `unique` when the limits
/// agree to `10·tol`.
pub fn compute_extremal_solutions(
    model: &Model,
    opts: &IterateOptions,
    solve: &SolveOptions,
) -> Result<ExtremalSolutions> {
    let (lo, hi) = rayon::join(
        || monotone_iterate(model, Start::Lower, opts, solve),
        || monotone_iterate(model, Start::Upper, opts, solve),
    );
    let ((lower, lower_trace), (upper, upper_trace)) = (lo?, hi?);
    let sup_gap = lower.sup_distance(&upper);
    Ok(ExtremalSolutions {
        unique: sup_gap < 10.0 * opts.tol,
        lower,
        upper,
        lower_trace,
        upper_trace,
        sup_gap,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    /// `max_i |∫ a(x,∇U)·∇φ_i − ∫ f(x,U) φ_i| / ∫ φ_i` over the nodal hats.
    pub weak_residual: f64,
    /// `|∫ f(x, U)|`.
    pub mean_zero_defect: f64,
    /// `|Ω| · max |f|`, the scale of the mean-zero defect.
    pub mean_zero_scale: f64,
    pub band_violation: f64,
    pub min_value: f64,
}

impl ResidualReport {
    /// The residual and the mean-zero defect are below their thresholds.
    pub fn accepted(&self, residual_tol: f64, bound_tol: f64) -> bool {
        self.weak_residual < residual_tol
            && self.mean_zero_defect <= 1e-6 * self.mean_zero_scale.max(f64::MIN_POSITIVE)
            && self.band_violation <= bound_tol
    }
}

/// Residual of the weak form, the defect in `∫ f(x,U) = 0` and the distance
/// to the band.
pub fn verify_solution(model: &Model, u: &DiscreteField) -> Result<ResidualReport> {
    let flux = flux_residual(model, u)?;
    let mesh = &model.mesh;
    let src = &model.src;
    let fu = DiscreteField::new(
        mesh.nodes()
            .iter()
            .zip(&u.values)
            .map(|(&x, &s)| src.f(x, s))
            .collect(),
    );
    let weak_residual = flux
        .values
        .iter()
        .zip(&fu.values)
        .zip(mesh.lumped_mass())
        .map(|((r, f), m)| ((r - m * f) / m).abs())
        .fold(0.0, f64::max);
    let (eps, delta) = src.band();
    Ok(ResidualReport {
        weak_residual,
        mean_zero_defect: integrate(mesh, &fu)?.abs(),
        mean_zero_scale: mesh.measure() * src.max_abs_f(),
        band_violation: u.band_violation(eps, delta),
        min_value: u.min(),
    })
}

/// Returns `δ₀ − U` for a source with `f(x, δ₀ − s) = −f(x, s)`.
pub fn symmetry_double(src: &SourceSystem, u: &DiscreteField) -> Result<DiscreteField> {
    let defect = src.symmetry_defect();
    if defect > 1e-10 {
        return Err(Error::Domain(format!(
            "f(x, δ₀ − s) = −f(x, s) fails on the grid (defect {defect:e})"
        )));
    }
    let d = src.delta0();
    Ok(DiscreteField::new(u.values.iter().map(|v| d - v).collect()))
}

#[derive(Debug, Clone, Serialize)]
pub struct SignInterval {
    pub from: f64,
    pub to: f64,
    /// Sign of f at the midpoint: −1, 0 or 1.
    pub sign: i8,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstantAnalysis {
    /// Zeros of f in `[0, δ₀]`, increasing. Every one is a constant solution.
    pub zeros: Vec<f64>,
    pub sign_table: Vec<SignInterval>,
    /// Some zero `c_i` has `f ≥ 0` on `[0, c_i]` and `f ≤ 0` on `[c_i, δ₀]`.
    pub theorem_applies: bool,
    pub pivot: Option<f64>,
    pub predicted_min: Option<f64>,
    pub predicted_max: Option<f64>,
    pub predicted_unique: bool,
    pub message: String,
    pub caveat: String,
}

/// Points of the zero-finding grid.
pub const ZERO_GRID: usize = 4096;

/// Zeros and sign pattern of an x-independent source, and what the
/// sign-table theorem predicts about its extremal solutions.
pub fn constant_solution_analysis(src: &SourceSystem, zero_tol: f64) -> Result<ConstantAnalysis> {
    if !src.x_independent() {
        return Err(Error::Domain(
            "constant-solution analysis needs a source declared independent of x".into(),
        ));
    }
    let x = src.samples()[0];
    let d = src.delta0();
    let f = |s: f64| src.f(x, s);
    let grid: Vec<f64> = (0..=ZERO_GRID).map(|k| d * k as f64 / ZERO_GRID as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&s| f(s)).collect();
    let sign = |v: f64| -> i8 {
        if v.abs() <= zero_tol {
            0
        } else if v > 0.0 {
            1
        } else {
            -1
        }
    };
    let mut zeros: Vec<f64> = Vec::new();
    let push = |z: f64, zeros: &mut Vec<f64>| {
        if zeros.last().map_or(true, |&l| z - l > 2.0 * d / ZERO_GRID as f64) {
            zeros.push(z);
        }
    };
    for k in 0..=ZERO_GRID {
        if sign(vals[k]) == 0 {
            push(grid[k], &mut zeros);
        } else if k < ZERO_GRID && sign(vals[k + 1]) != 0 && sign(vals[k]) != sign(vals[k + 1]) {
            let (mut lo, mut hi) = (grid[k], grid[k + 1]);
            let s_lo = sign(vals[k]);
            while hi - lo > 1e-12 {
                let mid = 0.5 * (lo + hi);
                if sign(f(mid)) == s_lo {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            push(0.5 * (lo + hi), &mut zeros);
        }
    }
    let mut bounds = vec![0.0];
    bounds.extend(zeros.iter().copied().filter(|&z| z > 0.0 && z < d));
    bounds.push(d);
    let sign_table = bounds
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| SignInterval {
            from: w[0],
            to: w[1],
            sign: sign(f(0.5 * (w[0] + w[1]))),
        })
        .collect();
    let degenerate = vals.iter().all(|&v| sign(v) == 0);
    let pivot = zeros.iter().copied().find(|&c| {
        grid.iter()
            .zip(&vals)
            .all(|(&s, &v)| if s <= c { v >= -zero_tol } else { v <= zero_tol })
    });
    let theorem_applies = pivot.is_some() && !degenerate;
    let (predicted_min, predicted_max) = if theorem_applies {
        (zeros.first().copied(), zeros.last().copied())
    } else {
        (None, None)
    };
    let message = if degenerate {
        "f vanishes on the whole grid: every constant in [0, δ₀] is a solution".to_string()
    } else if theorem_applies {
        format!(
            "theorem applies with c_i = {:.12}: predicts minimal solution ≡ {:.12} and maximal ≡ {:.12}",
            pivot.unwrap_or(f64::NAN),
            predicted_min.unwrap_or(f64::NAN),
            predicted_max.unwrap_or(f64::NAN)
        )
    } else {
        "theorem inapplicable: no zero c_i with f ≥ 0 on [0, c_i] and f ≤ 0 on [c_i, δ₀]".to_string()
    };
    Ok(ConstantAnalysis {
        predicted_unique: theorem_applies && zeros.len() == 1,
        zeros,
        sign_table,
        theorem_applies,
        pivot,
        predicted_min,
        predicted_max,
        message,
        caveat: format!(
            "zeros are located on a {ZERO_GRID}-point grid; roots of even multiplicity between grid points can be missed"
        ),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AlphaDiagnostics {
    pub alpha: f64,
    pub phi_ratio: RatioMonotonicity,
    pub f_ratio: FRatioMonotonicity,
    /// α ≤ min(p⁻, 2), Φ ratio increasing, f ratio decreasing.
    pub eh: bool,
    /// α ∈ (1, 2), α ≤ p⁻, Φ ratio strictly increasing, f ratio decreasing.
    pub eh_phi: bool,
    /// α ∈ (1, 2), α ≤ p⁻, f ratio strictly decreasing, Φ ratio increasing.
    pub eh_f: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct UniquenessReport {
    pub p_min: f64,
    pub rows: Vec<AlphaDiagnostics>,
    pub eh: bool,
    pub eh_phi: bool,
    pub eh_f: bool,
    /// At most one strongly positive solution is predicted.
    pub at_most_one_strongly_positive: bool,
}

/// Scans the (EH)-type hypotheses for each α (or, by default, 16 values
/// evenly spread in `(1, min(p⁻, 2)]`).
pub fn uniqueness_diagnostics(
    op: &FluxOperator,
    src: &SourceSystem,
    alphas: Option<&[f64]>,
) -> Result<UniquenessReport> {
    let p_min = op.exponent_min();
    let top = p_min.min(2.0);
    let default: Vec<f64> = (1..=16).map(|k| 1.0 + (top - 1.0) * k as f64 / 16.0).collect();
    let alphas = alphas.unwrap_or(&default);
    if alphas.is_empty() || alphas.iter().any(|a| !(*a > 1.0)) {
        return Err(Error::Domain("α candidates must exceed 1".into()));
    }
    let samples = src.samples();
    let rows: Vec<AlphaDiagnostics> = alphas
        .iter()
        .map(|&alpha| {
            let phi_ratio = phi_ratio_monotonicity(op, samples, alpha);
            let f_ratio = f_ratio_monotonicity(src, alpha);
            let admissible = alpha <= top;
            let open = alpha < 2.0 && alpha <= p_min;
            AlphaDiagnostics {
                alpha,
                eh: admissible && phi_ratio.increasing && f_ratio.decreasing,
                eh_phi: open && phi_ratio.strictly_increasing && f_ratio.decreasing,
                eh_f: open && f_ratio.strictly_decreasing && phi_ratio.increasing,
                phi_ratio,
                f_ratio,
            }
        })
        .collect();
    let eh = rows.iter().any(|r| r.eh);
    let eh_phi = rows.iter().any(|r| r.eh_phi);
    let eh_f = rows.iter().any(|r| r.eh_f);
    Ok(UniquenessReport {
        p_min,
        rows,
        eh,
        eh_phi,
        eh_f,
        at_most_one_strongly_positive: eh_phi || eh_f,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::{multiphase_operator, sample_points};
    use crate::mesh::{build_mesh, Mesh, MeshSpec};
    use crate::sources::{allee, identity_capacity, logistic, make_source, symmetric_sine, tabulated, truncate_source};
    use crate::{constant, pointwise};

    fn mesh() -> Mesh {
        build_mesh(MeshSpec::Interval { n: 8, length: 1.0 }).unwrap()
    }

    fn laplace_model(src: impl Fn(&[crate::Point]) -> SourceSystem) -> Model {
        let m = mesh();
        let op = multiphase_operator(&m, vec![constant(1.0)], vec![constant(2.0)]).unwrap();
        let s = src(&sample_points(&m));
        Model::new(m, op, s).unwrap()
    }

    #[test]
    fn allee_extremals_and_band() {
        let model = laplace_model(|p| allee(0.25, 1.0, None, p).unwrap());
        let it = IterateOptions::default();
        let so = SolveOptions::default();
        let (up, tr) = monotone_iterate(&model, Start::Upper, &it, &so).unwrap();
        assert!(up.values.iter().all(|v| (v - 1.0).abs() < 1e-10));
        assert_eq!(tr.iterations(), 1);
        let (lo, _) = monotone_iterate(&model, Start::Lower, &it, &so).unwrap();
        assert!(lo.values.iter().all(|v| v.abs() < 1e-10));

        let band = model.with_source(truncate_source(&model.src, 0.3, 1.0).unwrap());
        let (lim, tr) = monotone_iterate(&band, Start::Lower, &IterateOptions { compact: false, ..it }, &so).unwrap();
        assert!(tr.converged);
        assert!(lim.values.iter().all(|v| (v - 1.0).abs() < 1e-6));
        let l0 = model.src.lambda0();
        let mut c = 0.3;
        for u in &tr.iterates {
            assert!(u.values.iter().all(|v| (v - c).abs() < 1e-8));
            c += c * (c - 0.25) * (1.0 - c) / l0;
        }
    }

    #[test]
    fn strictly_decreasing_source_is_unique() {
        let model = laplace_model(|p| tabulated(vec![0.25, -0.75], 1.0, None, p).unwrap());
        let ex = compute_extremal_solutions(&model, &IterateOptions::default(), &SolveOptions::default()).unwrap();
        assert!(ex.unique);
        assert!(ex.lower.values.iter().all(|v| (v - 0.25).abs() < 1e-6));
    }

    #[test]
    fn zero_source_extremals_are_endpoints() {
        let model = laplace_model(|p| {
            let (b, db, _) = identity_capacity();
            make_source("zero", pointwise(|_, _| 0.0), b, 1.0, None, p).unwrap().with_derivative_b(db)
        });
        let ex = compute_extremal_solutions(&model, &IterateOptions::default(), &SolveOptions::default()).unwrap();
        assert!(!ex.unique);
        assert!(ex.lower.max() < 1e-10 && ex.upper.min() > 1.0 - 1e-10);
    }

    #[test]
    fn verification_of_constants() {
        let model = laplace_model(|p| symmetric_sine(1.0, 1.0, None, p).unwrap());
        let half = DiscreteField::constant(&model.mesh, 0.5);
        let r = verify_solution(&model, &half).unwrap();
        assert!(r.weak_residual < 1e-12 && r.mean_zero_defect < 1e-12);
        assert_eq!(symmetry_double(&model.src, &half).unwrap(), half);
        let zero = DiscreteField::constant(&model.mesh, 0.0);
        assert!(symmetry_double(&model.src, &zero).unwrap().values.iter().all(|v| *v == 1.0));
        let logi = logistic(1.0, 1.0, None, model.src.samples()).unwrap();
        assert!(matches!(symmetry_double(&logi, &half), Err(Error::Domain(_))));
    }

    #[test]
    fn sign_tables() {
        let p = sample_points(&mesh());
        let a = constant_solution_analysis(&logistic(1.0, 1.0, None, &p).unwrap(), 1e-14).unwrap();
        assert_eq!(a.zeros.len(), 2);
        assert!(a.theorem_applies);
        assert_eq!((a.predicted_min, a.predicted_max), (Some(0.0), Some(1.0)));

        let a = constant_solution_analysis(&tabulated(vec![0.25, -0.75], 1.0, None, &p).unwrap(), 1e-14).unwrap();
        assert_eq!(a.zeros.len(), 1);
        assert!((a.zeros[0] - 0.25).abs() < 1e-12);
        assert!(a.predicted_unique);

        let a = constant_solution_analysis(&allee(0.25, 1.0, None, &p).unwrap(), 1e-14).unwrap();
        assert_eq!(a.zeros.len(), 3);
        assert!((a.zeros[1] - 0.25).abs() < 1e-12);
        assert!(!a.theorem_applies);
        assert!(a.message.contains("inapplicable"));
        assert_eq!(a.sign_table.iter().map(|s| s.sign).collect::<Vec<_>>(), vec![-1, 1]);
    }

    #[test]
    fn uniqueness_scan() {
        let m = mesh();
        let p = sample_points(&m);
        let lap = multiphase_operator(&m, vec![constant(1.0)], vec![constant(2.0)]).unwrap();
        let src = logistic(1.0, 1.0, None, &p).unwrap();
        let r = uniqueness_diagnostics(&lap, &src, Some(&[2.0])).unwrap();
        assert!(r.rows[0].phi_ratio.increasing && !r.rows[0].phi_ratio.strictly_increasing);
        // s(1−s)/s = 1 − s strictly decreases, and α = 2 is allowed for (EH)
        assert!(r.eh && !r.eh_phi && !r.eh_f);
        assert!(uniqueness_diagnostics(&lap, &src, Some(&[1.0])).is_err());
    }
}
