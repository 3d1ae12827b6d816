//! Diffusion laws `a(x, ξ) = Ψ(x, |ξ|) ξ` and their potentials.
//!
//! A [`FluxOperator`] is described by its scalar profile `Φ(x, s) = Ψ(x, s)·s`
//! for `s ≥ 0`. The vector flux is `Φ(x, |ξ|) ξ/|ξ|` and the potential is
//! `A(x, ξ) = ∫₀^{|ξ|} Φ(x, t) dt`, either in closed form or by adaptive
//! quadrature.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::quadrature::{adaptive_simpson, DEFAULT_ABS_TOL};
use crate::{Coefficient, Point, Pointwise};

#[derive(Clone)]
enum Potential {
    Closed(Pointwise),
    Quadrature,
}

#[derive(Clone)]
pub struct FluxOperator {
    name: String,
    phi: Pointwise,
    dphi: Option<Pointwise>,
    potential: Potential,
    alpha: Option<f64>,
    exponent: Coefficient,
    exponent_min: f64,
}

impl fmt::Debug for FluxOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FluxOperator")
            .field("name", &self.name)
            .field("closed_form_potential", &self.closed_form_potential())
            .field("alpha", &self.alpha)
            .field("exponent_min", &self.exponent_min)
            .finish()
    }
}

impl FluxOperator {
    /// Operator from a user-supplied profile. `exponent` is the growth
    /// exponent p(x) of the law; it is only used to build the matching
    /// [`ExponentField`](crate::ExponentField).
    pub fn custom(
        name: impl Into<String>,
        phi: Pointwise,
        dphi: Option<Pointwise>,
        potential: Option<Pointwise>,
        exponent: Coefficient,
        exponent_min: f64,
    ) -> Self {
        Self {
            name: name.into(),
            phi,
            dphi,
            potential: potential.map_or(Potential::Quadrature, Potential::Closed),
            alpha: None,
            exponent,
            exponent_min,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn closed_form_potential(&self) -> bool {
        matches!(self.potential, Potential::Closed(_))
    }

    /// α of the (EH)-type hypotheses, when the operator is known to satisfy
    /// the Φ half of them.
    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    pub fn with_alpha(mut self, alpha: Option<f64>) -> Self {
        self.alpha = alpha;
        self
    }

    /// Growth exponent p(x) (for multi-phase laws, the pointwise maximum).
    pub fn exponent(&self) -> &Coefficient {
        &self.exponent
    }

    /// Smallest exponent seen among all phases at construction samples.
    pub fn exponent_min(&self) -> f64 {
        self.exponent_min
    }

    /// Φ(x, s) for s ≥ 0.
    pub fn phi(&self, x: Point, s: f64) -> f64 {
        if s <= 0.0 {
            0.0
        } else {
            (self.phi)(x, s)
        }
    }

    /// ∂Φ/∂s, analytically when available, else by central differences.
    pub fn dphi(&self, x: Point, s: f64) -> f64 {
        if let Some(d) = &self.dphi {
            return d(x, s);
        }
        let h = 1e-6 * s.max(1e-3);
        if s > h {
            (self.phi(x, s + h) - self.phi(x, s - h)) / (2.0 * h)
        } else {
            (self.phi(x, s + h) - self.phi(x, s)) / h
        }
    }

    /// A(x, ξ) at |ξ| = s, or a numeric error when quadrature fails.
    pub fn potential_checked(&self, x: Point, s: f64) -> Result<f64> {
        if s <= 0.0 {
            return Ok(0.0);
        }
        match &self.potential {
            Potential::Closed(a) => Ok(a(x, s)),
            Potential::Quadrature => {
                adaptive_simpson(|t| self.phi(x, t), 0.0, s, DEFAULT_ABS_TOL)
            }
        }
    }

    /// A(x, ξ) at |ξ| = s; NaN if the potential quadrature fails.
    pub fn potential(&self, x: Point, s: f64) -> f64 {
        self.potential_checked(x, s).unwrap_or(f64::NAN)
    }

    /// Potential by quadrature of Φ regardless of any closed form.
    pub fn potential_by_quadrature(&self, x: Point, s: f64) -> Result<f64> {
        self.potential_with_tol(x, s, DEFAULT_ABS_TOL)
    }

    fn potential_with_tol(&self, x: Point, s: f64, tol: f64) -> Result<f64> {
        adaptive_simpson(|t| self.phi(x, t), 0.0, s.max(0.0), tol)
    }

    /// Potential accurate enough to be differenced with steps near 1e−6.
    fn fine_potential(&self, x: Point, s: f64) -> Result<f64> {
        match &self.potential {
            Potential::Closed(a) => Ok(a(x, s.max(0.0))),
            Potential::Quadrature => self.potential_with_tol(x, s, 1e-14),
        }
    }

    pub fn flux(&self, x: Point, xi: [f64; 2]) -> [f64; 2] {
        let s = xi[0].hypot(xi[1]);
        if s == 0.0 {
            return [0.0, 0.0];
        }
        let psi = self.phi(x, s) / s;
        [psi * xi[0], psi * xi[1]]
    }

    /// Jacobian `∂a/∂ξ = Ψ I + (Φ′ − Ψ) n nᵀ`, with `n = ξ/|ξ|`. At very small
    /// |ξ| the profile is evaluated at a floor value and taken isotropic.
    pub fn flux_jacobian(&self, x: Point, xi: [f64; 2]) -> [[f64; 2]; 2] {
        const FLOOR: f64 = 1e-8;
        let s = xi[0].hypot(xi[1]);
        if s < FLOOR {
            let d = self.dphi(x, FLOOR).min(self.phi(x, FLOOR) / FLOOR).max(0.0);
            let d = if d.is_finite() { d } else { 0.0 };
            return [[d, 0.0], [0.0, d]];
        }
        let psi = self.phi(x, s) / s;
        let dp = self.dphi(x, s);
        let n = [xi[0] / s, xi[1] / s];
        let c = dp - psi;
        [
            [psi + c * n[0] * n[0], c * n[0] * n[1]],
            [c * n[1] * n[0], psi + c * n[1] * n[1]],
        ]
    }
}

/// `(a(x, ξ), A(x, ξ))`; `(0, 0)` at ξ = 0.
pub fn eval_flux_and_potential(op: &FluxOperator, x: Point, xi: [f64; 2]) -> ([f64; 2], f64) {
    let s = xi[0].hypot(xi[1]);
    (op.flux(x, xi), op.potential(x, s))
}

/// Points used to sample coefficient hypotheses: the nodes and element
/// centroids of `mesh`.
pub fn sample_points(mesh: &Mesh) -> Vec<Point> {
    mesh.nodes()
        .iter()
        .copied()
        .chain(mesh.elements().iter().map(|e| e.centroid))
        .collect()
}

/// `Σ_k w_k(x)|ξ|^{p_k(x)−2} ξ`, the weighted multi-phase p(x)-Laplacian.
pub fn multiphase_operator(
    mesh: &Mesh,
    weights: Vec<Coefficient>,
    exponents: Vec<Coefficient>,
) -> Result<FluxOperator> {
    if weights.is_empty() || weights.len() != exponents.len() {
        return Err(Error::Construction(format!(
            "multi-phase operator needs equally many weights and exponents (got {} and {})",
            weights.len(),
            exponents.len()
        )));
    }
    let samples = sample_points(mesh);
    let mut omega = f64::INFINITY;
    let mut p_lo = f64::INFINITY;
    for (k, (w, p)) in weights.iter().zip(&exponents).enumerate() {
        for &x in &samples {
            let (wv, pv) = (w(x), p(x));
            if !(wv.is_finite() && wv > 0.0) {
                return Err(Error::Construction(format!(
                    "weight w_{} = {wv} at {x:?}; weights must be bounded below by a positive constant",
                    k + 1
                )));
            }
            if !(pv.is_finite() && pv > 1.0) {
                return Err(Error::Construction(format!(
                    "exponent p_{} = {pv} at {x:?}; exponents must exceed 1",
                    k + 1
                )));
            }
            omega = omega.min(wv);
            p_lo = p_lo.min(pv);
        }
    }
    let _ = omega;
    let phases: Arc<Vec<(Coefficient, Coefficient)>> =
        Arc::new(weights.into_iter().zip(exponents).collect());

    let ph = phases.clone();
    let phi: Pointwise = Arc::new(move |x, s| {
        ph.iter().map(|(w, p)| w(x) * s.powf(p(x) - 1.0)).sum()
    });
    let ph = phases.clone();
    let dphi: Pointwise = Arc::new(move |x, s| {
        ph.iter()
            .map(|(w, p)| {
                let pv = p(x);
                w(x) * (pv - 1.0) * s.powf(pv - 2.0)
            })
            .sum()
    });
    let ph = phases.clone();
    let potential: Pointwise = Arc::new(move |x, s| {
        ph.iter()
            .map(|(w, p)| {
                let pv = p(x);
                w(x) * s.powf(pv) / pv
            })
            .sum()
    });
    let ph = phases.clone();
    let exponent: Coefficient = Arc::new(move |x| {
        ph.iter().map(|(_, p)| p(x)).fold(f64::NEG_INFINITY, f64::max)
    });
    // any α in (1, min_k p_k) works for the Φ half of (EH_f); stay ≤ 2
    let alpha = 1.0 + 0.5 * (p_lo.min(2.0) - 1.0);
    Ok(FluxOperator {
        name: format!("multiphase[{}]", phases.len()),
        phi,
        dphi: Some(dphi),
        potential: Potential::Closed(potential),
        alpha: Some(alpha),
        exponent,
        exponent_min: p_lo,
    })
}

/// `Φ(x, s) = max{h(x, s), a(x, s) s^{p(x)−1} − ã(x)}` with its potential
/// computed by adaptive quadrature.
pub fn maxform_operator(
    mesh: &Mesh,
    h: Pointwise,
    a_coef: Pointwise,
    a_tilde: Coefficient,
    p: Coefficient,
) -> Result<FluxOperator> {
    let samples = sample_points(mesh);
    let grid: Vec<f64> = (0..=64).map(|k| 10f64.powf(-3.0 + 5.0 * k as f64 / 64.0)).collect();
    let mut p_lo = f64::INFINITY;
    for &x in &samples {
        let pv = p(x);
        if !(pv.is_finite() && pv > 1.0) {
            return Err(Error::Construction(format!(
                "exponent p = {pv} at {x:?} must exceed 1"
            )));
        }
        p_lo = p_lo.min(pv);
        let at = a_tilde(x);
        if !(at.is_finite() && at >= 0.0) {
            return Err(Error::Construction(format!(
                "a_tilde = {at} at {x:?} must be finite and nonnegative"
            )));
        }
        if h(x, 0.0).abs() > 1e-14 {
            return Err(Error::Construction(format!(
                "h(x, 0) = {} at {x:?}; condition h(x,0) = 0 fails",
                h(x, 0.0)
            )));
        }
        let mut prev_h = h(x, 0.0);
        let mut prev_a = 0.0;
        for &s in &grid {
            let av = a_coef(x, s);
            if !(av.is_finite() && av > 0.0) {
                return Err(Error::Construction(format!(
                    "a(x, s) = {av} at x = {x:?}, s = {s}; need ess inf a > 0"
                )));
            }
            let hv = h(x, s);
            let grow = av * s.powf(pv - 1.0);
            if !(hv > prev_h && grow > prev_a) || hv < 0.0 {
                return Err(Error::Construction(format!(
                    "h(x, ·) and a(x, ·)s^(p-1) must be nonnegative and strictly increasing (fails at x = {x:?}, s = {s})"
                )));
            }
            prev_h = hv;
            prev_a = grow;
        }
    }
    let pp = p.clone();
    let phi: Pointwise = Arc::new(move |x, s| {
        let branch = a_coef(x, s) * s.powf(pp(x) - 1.0) - a_tilde(x);
        h(x, s).max(branch)
    });
    let op = FluxOperator {
        name: "maxform".into(),
        phi,
        dphi: None,
        potential: Potential::Quadrature,
        alpha: None,
        exponent: p,
        exponent_min: p_lo,
    };
    for &x in samples.iter().take(8) {
        for s in [1e-2, 1.0, 10.0] {
            op.potential_checked(x, s)?;
        }
    }
    Ok(op)
}

/// Result of the (EH)-type monotonicity scan of `s ↦ Φ(x, s)/s^{α−1}`.
#[derive(Debug, Clone, Serialize)]
pub struct RatioMonotonicity {
    pub alpha: f64,
    pub increasing: bool,
    pub strictly_increasing: bool,
    /// First sample point and grid value where monotonicity failed, if any.
    pub witness: Option<(Point, f64)>,
}

/// Geometric grid `1e−4 … 1e4` with 65 points.
pub fn eh_grid() -> Vec<f64> {
    (0..65).map(|k| 10f64.powf(-4.0 + 8.0 * k as f64 / 64.0)).collect()
}

/// Scans `s ↦ Φ(x, s)/s^{α−1}` over [`eh_grid`] at every sample point.
pub fn phi_ratio_monotonicity(op: &FluxOperator, samples: &[Point], alpha: f64) -> RatioMonotonicity {
    let grid = eh_grid();
    let mut out = RatioMonotonicity {
        alpha,
        increasing: true,
        strictly_increasing: true,
        witness: None,
    };
    for &x in samples {
        let ratios: Vec<f64> = grid
            .iter()
            .map(|&s| op.phi(x, s) / s.powf(alpha - 1.0))
            .collect();
        for (k, w) in ratios.windows(2).enumerate() {
            let tol = 1e-12 * w[0].abs().max(w[1].abs());
            if w[1] < w[0] - tol {
                out.increasing = false;
                out.strictly_increasing = false;
                out.witness.get_or_insert((x, grid[k + 1]));
            } else if w[1] <= w[0] + tol {
                out.strictly_increasing = false;
                out.witness.get_or_insert((x, grid[k + 1]));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct StructureViolation {
    pub check: String,
    pub x: Point,
    pub xi1: [f64; 2],
    pub xi2: [f64; 2],
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct StructureReport {
    pub operator: String,
    pub trials: usize,
    pub checks: usize,
    pub violations: Vec<StructureViolation>,
    /// `(a(ξ₁) − a(ξ₂))·(ξ₁ − ξ₂)` vanished exactly on the diagonal samples
    /// and was strictly positive on every off-diagonal one.
    pub strict_monotonicity: bool,
    pub max_quadrature_rel_error: Option<f64>,
    pub eh: Option<RatioMonotonicity>,
}

impl StructureReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
            && self.strict_monotonicity
            && self.eh.as_ref().map_or(true, |e| e.increasing)
    }
}

/// Relative slack for the monotonicity and potential inequalities.
pub const STRUCTURE_SLACK: f64 = 1e-12;

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn random_vector(rng: &mut ChaCha8Rng, dimension: usize) -> [f64; 2] {
    let r = 10f64.powf(rng.gen_range(-3.0..2.0));
    if dimension == 1 {
        [if rng.gen_bool(0.5) { r } else { -r }, 0.0]
    } else {
        let t: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        [r * t.cos(), r * t.sin()]
    }
}

fn random_point(rng: &mut ChaCha8Rng, mesh: &Mesh) -> Point {
    let (lo, hi) = mesh.bounding_box();
    [
        rng.gen_range(lo[0]..=hi[0]),
        if mesh.dimension() == 2 {
            rng.gen_range(lo[1]..=hi[1])
        } else {
            0.0
        },
    ]
}

/// Samples `(x, ξ₁, ξ₂)` and checks monotonicity of `a`, the two-sided
/// potential inequality, convexity of `A` along segments, `A ≤ Φ·s`, the
/// derivative identity `∂A/∂s = Φ`, agreement of closed-form and quadrature
/// potentials, and (when α is set) the (EH) ratio scan.
pub fn check_structure(
    op: &FluxOperator,
    mesh: &Mesh,
    trials: usize,
    seed: u64,
) -> Result<StructureReport> {
    if trials == 0 {
        return Err(Error::Domain("trials must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = mesh.dimension();
    let mut report = StructureReport {
        operator: op.name().to_string(),
        trials,
        checks: 0,
        violations: Vec::new(),
        strict_monotonicity: true,
        max_quadrature_rel_error: None,
        eh: None,
    };
    let violation = |report: &mut StructureReport, check: &str, x, xi1, xi2, detail: String| {
        report.violations.push(StructureViolation {
            check: check.into(),
            x,
            xi1,
            xi2,
            detail,
        })
    };
    for _ in 0..trials {
        let x = random_point(&mut rng, mesh);
        let xi1 = random_vector(&mut rng, dim);
        let xi2 = if rng.gen_bool(0.1) {
            let d = random_vector(&mut rng, dim);
            let s = 1e-3 * xi1[0].hypot(xi1[1]) / d[0].hypot(d[1]);
            [xi1[0] + s * d[0], xi1[1] + s * d[1]]
        } else {
            random_vector(&mut rng, dim)
        };
        let (a1, pot1) = eval_flux_and_potential(op, x, xi1);
        let (a2, pot2) = eval_flux_and_potential(op, x, xi2);
        let diff = [xi1[0] - xi2[0], xi1[1] - xi2[1]];
        let da = [a1[0] - a2[0], a1[1] - a2[1]];

        report.checks += 1;
        let mono = dot(da, diff);
        let scale = dot(a1, a1).sqrt().max(dot(a2, a2).sqrt()) * dot(diff, diff).sqrt();
        if mono < -STRUCTURE_SLACK * scale {
            violation(&mut report, "monotonicity", x, xi1, xi2, format!("(a1-a2)·(xi1-xi2) = {mono:e}"));
        }

        // A(ξ₂) − A(ξ₁) ≥ a(ξ₁)·(ξ₂ − ξ₁) and ≤ a(ξ₂)·(ξ₂ − ξ₁)
        report.checks += 2;
        let rise = pot2 - pot1;
        let lower = -dot(a1, diff);
        let upper = -dot(a2, diff);
        let scale = pot1.abs() + pot2.abs() + lower.abs() + upper.abs();
        if rise < lower - STRUCTURE_SLACK * scale {
            violation(&mut report, "potential_lower", x, xi1, xi2, format!("{rise:e} < {lower:e}"));
        }
        if rise > upper + STRUCTURE_SLACK * scale {
            violation(&mut report, "potential_upper", x, xi1, xi2, format!("{rise:e} > {upper:e}"));
        }

        report.checks += 1;
        let t: f64 = rng.gen_range(0.0..1.0);
        let mid = [t * xi1[0] + (1.0 - t) * xi2[0], t * xi1[1] + (1.0 - t) * xi2[1]];
        let pot_mid = op.potential(x, mid[0].hypot(mid[1]));
        let chord = t * pot1 + (1.0 - t) * pot2;
        if pot_mid > chord + STRUCTURE_SLACK * (pot1.abs() + pot2.abs()) {
            violation(&mut report, "convexity", x, xi1, xi2, format!("{pot_mid:e} > {chord:e}"));
        }

        let s1 = xi1[0].hypot(xi1[1]);
        report.checks += 1;
        let bound = op.phi(x, s1) * s1;
        if pot1 > bound * (1.0 + STRUCTURE_SLACK) {
            violation(&mut report, "potential_le_phi_s", x, xi1, xi2, format!("{pot1:e} > {bound:e}"));
        }

        report.checks += 1;
        let h = 1e-6 * s1.max(1.0);
        if s1 > h {
            let fd = (op.fine_potential(x, s1 + h)? - op.fine_potential(x, s1 - h)?) / (2.0 * h);
            let phi = op.phi(x, s1);
            if (fd - phi).abs() > 1e-5 * phi.abs().max(1e-300) {
                violation(&mut report, "derivative", x, xi1, xi2, format!("dA/ds = {fd:e}, phi = {phi:e}"));
            }
        }

        report.checks += 1;
        let (a0, _) = eval_flux_and_potential(op, x, xi1);
        let diag = dot([a1[0] - a0[0], a1[1] - a0[1]], [0.0, 0.0]);
        if diag != 0.0 || (diff != [0.0, 0.0] && mono <= 0.0) {
            report.strict_monotonicity = false;
        }

        if op.closed_form_potential() {
            report.checks += 1;
            let q = op.potential_with_tol(x, s1, (1e-11 * pot1.abs()).max(f64::MIN_POSITIVE))?;
            let rel = (q - pot1).abs() / pot1.abs().max(1e-300);
            let worst = report.max_quadrature_rel_error.get_or_insert(0.0);
            *worst = worst.max(rel);
            if rel > 1e-8 {
                violation(&mut report, "closed_form_vs_quadrature", x, xi1, xi2, format!("relative error {rel:e}"));
            }
        }
    }
    if let Some(alpha) = op.alpha() {
        report.eh = Some(phi_ratio_monotonicity(op, &sample_points(mesh), alpha));
    }
    Ok(report)
}

/// Searches for large `ρ(|ξ|)/A(ξ)` ratios along a ray, illustrating that a
/// max-form law need not satisfy the Leray–Lions lower bound
/// `A(x, ξ) ≥ δ|ξ|^{p(x)} − δ̃`. Returns `(s, s^{p(x)}/A(x, s))` samples.
pub fn leray_lions_ratio_scan(op: &FluxOperator, x: Point, s_max: f64, points: usize) -> Vec<(f64, f64)> {
    let p = (op.exponent())(x);
    (1..=points)
        .map(|k| {
            let s = s_max * k as f64 / points as f64;
            (s, s.powf(p) / op.potential(x, s))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, MeshSpec};
    use crate::{constant, pointwise};

    fn mesh1() -> Mesh {
        build_mesh(MeshSpec::Interval { n: 8, length: 1.0 }).unwrap()
    }

    fn laplacian(m: &Mesh) -> FluxOperator {
        multiphase_operator(m, vec![constant(1.0)], vec![constant(2.0)]).unwrap()
    }

    #[test]
    fn laplacian_case() {
        let m = mesh1();
        let op = laplacian(&m);
        let x = [0.3, 0.0];
        assert_eq!(op.flux(x, [0.7, 0.0]), [0.7, 0.0]);
        assert!((op.potential(x, 3.0) - 4.5).abs() < 1e-15);
        assert_eq!(eval_flux_and_potential(&op, x, [0.0, 0.0]), ([0.0, 0.0], 0.0));
        assert!(op.closed_form_potential());
    }

    #[test]
    fn two_phase_direct_evaluation() {
        let m = mesh1();
        let op = multiphase_operator(&m, vec![constant(1.0), constant(1.0)], vec![constant(2.0), constant(3.0)]).unwrap();
        let x = [0.5, 0.0];
        assert!((op.phi(x, 1.0) - 2.0).abs() < 1e-15);
        assert!((op.potential(x, 1.0) - (0.5 + 1.0 / 3.0)).abs() < 1e-15);
        let alpha = op.alpha().unwrap();
        assert!(alpha > 1.0 && alpha < 2.0);
        assert!(((op.exponent())(x) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn multiphase_rejects_bad_weights() {
        let m = mesh1();
        assert!(multiphase_operator(&m, vec![constant(0.0)], vec![constant(2.0)]).is_err());
        assert!(multiphase_operator(&m, vec![constant(-1.0)], vec![constant(2.0)]).is_err());
        assert!(multiphase_operator(&m, vec![constant(1.0)], vec![constant(1.0)]).is_err());
        assert!(multiphase_operator(&m, vec![], vec![]).is_err());
        assert!(multiphase_operator(&m, vec![constant(1.0)], vec![]).is_err());
    }

    #[test]
    fn flux_norm_equals_profile() {
        let m = build_mesh(MeshSpec::Rectangle { nx: 2, ny: 2, lx: 1.0, ly: 1.0 }).unwrap();
        let op = multiphase_operator(&m, vec![constant(1.0), crate::coefficient(|x| 1.0 + x[1])], vec![constant(1.7), crate::coefficient(|x| 2.5 + x[0])]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let x = random_point(&mut rng, &m);
            let xi = random_vector(&mut rng, 2);
            let a = op.flux(x, xi);
            let s = xi[0].hypot(xi[1]);
            assert!((a[0].hypot(a[1]) - op.phi(x, s)).abs() <= 1e-12 * op.phi(x, s));
        }
    }

    fn maxform_example(m: &Mesh) -> FluxOperator {
        maxform_operator(
            m,
            pointwise(|_, s: f64| s.sqrt()),
            pointwise(|_, _| 1.0),
            constant(1.0),
            constant(3.0),
        )
        .unwrap()
    }

    #[test]
    fn maxform_branches() {
        let m = mesh1();
        let op = maxform_example(&m);
        let x = [0.2, 0.0];
        // max{√2, 1·2² − 1} = 3
        assert!((op.phi(x, 2.0) - 3.0).abs() < 1e-15);
        // below the switch the h branch wins
        assert!((op.phi(x, 0.25) - 0.5).abs() < 1e-15);
        assert!(!op.closed_form_potential());
        let plain = maxform_operator(&m, pointwise(|_, _| 0.0 * 1.0), pointwise(|_, _| 2.0), constant(0.0), constant(2.5));
        // h ≡ 0 is not strictly increasing
        assert!(plain.is_err());
        let tiny_h = maxform_operator(&m, pointwise(|_, s| 1e-9 * s), pointwise(|_, _| 2.0), constant(0.0), constant(2.5)).unwrap();
        assert!((tiny_h.phi(x, 1.5) - 2.0 * 1.5f64.powf(1.5)).abs() < 1e-12);
    }

    #[test]
    fn maxform_potential_matches_piecewise_integral() {
        let m = mesh1();
        let op = maxform_example(&m);
        let x = [0.0, 0.0];
        // switch where √s = s² − 1: solve by bisection oracle
        let (mut lo, mut hi) = (1.0f64, 2.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid.sqrt() > mid * mid - 1.0 { lo = mid } else { hi = mid }
        }
        let c = 0.5 * (lo + hi);
        let exact = 2.0 / 3.0 * c.powf(1.5) + (27.0 / 3.0 - 3.0) - (c.powi(3) / 3.0 - c);
        assert!((op.potential(x, 3.0) - exact).abs() < 1e-9);
    }

    #[test]
    fn structure_suite_on_examples() {
        let m = mesh1();
        let r = check_structure(&laplacian(&m), &m, 300, 1).unwrap();
        assert!(r.passed(), "{:?}", r.violations.first());
        let r = check_structure(&maxform_example(&m), &m, 300, 2).unwrap();
        assert!(r.passed(), "{:?}", r.violations.first());
        assert!(r.eh.is_none());
    }

    #[test]
    fn eh_ratio_for_multiphase_and_laplacian() {
        let m = mesh1();
        let samples = sample_points(&m);
        let op = multiphase_operator(&m, vec![constant(1.0), constant(0.5)], vec![constant(2.0), crate::coefficient(|x| 2.5 + 0.4 * x[0])]).unwrap();
        let r = phi_ratio_monotonicity(&op, &samples, 1.5);
        assert!(r.strictly_increasing);
        let r = phi_ratio_monotonicity(&laplacian(&m), &samples, 2.0);
        assert!(r.increasing && !r.strictly_increasing);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let m = mesh1();
        let op = multiphase_operator(&m, vec![constant(1.0), constant(2.0)], vec![constant(1.6), constant(3.2)]).unwrap();
        let x = [0.1, 0.0];
        let xi = [0.4, -0.9];
        let j = op.flux_jacobian(x, xi);
        let h = 1e-7;
        for c in 0..2 {
            let mut p = xi;
            let mut q = xi;
            p[c] += h;
            q[c] -= h;
            let (fp, fq) = (op.flux(x, p), op.flux(x, q));
            for r in 0..2 {
                let fd = (fp[r] - fq[r]) / (2.0 * h);
                assert!((fd - j[r][c]).abs() < 1e-6 * (1.0 + fd.abs()), "{fd} vs {}", j[r][c]);
            }
        }
    }

    #[test]
    fn leray_lions_ratio_grows_for_maxform() {
        let m = mesh1();
        let op = maxform_example(&m);
        let scan = leray_lions_ratio_scan(&op, [0.5, 0.0], 10.0, 10);
        assert_eq!(scan.len(), 10);
        assert!(scan.iter().all(|(_, r)| r.is_finite() && *r > 0.0));
    }
}
