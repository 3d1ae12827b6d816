//! Variable-exponent modulars and Luxemburg norms of discrete fields.
//!
//! Zero-order integrands use the lumped nodal rule with the nodal exponent
//! samples, so the discrete modular is a weighted sum `Σ mᵢ |uᵢ|^{pᵢ}`. Gradient
//! integrands use the per-element constant gradient and the element mean of the
//! exponent samples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::mesh::{DiscreteField, Mesh};
use crate::Point;

/// Nodal samples of a variable exponent `p: Ω̄ → (1, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentField {
    values: Vec<f64>,
    p_min: f64,
    p_max: f64,
}

impl ExponentField {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Construction("exponent field has no samples".into()));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 1.0))
        {
            return Err(Error::Construction(format!(
                "exponent sample {i} is {v}; every sample must be finite and > 1"
            )));
        }
        let p_min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let p_max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            values,
            p_min,
            p_max,
        })
    }

    pub fn from_fn<F: Fn(Point) -> f64>(mesh: &Mesh, p: F) -> Result<Self> {
        Self::from_values(mesh.nodes().iter().map(|&x| p(x)).collect())
    }

    pub fn constant(mesh: &Mesh, p: f64) -> Result<Self> {
        Self::from_values(vec![p; mesh.node_count()])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// p⁻
    pub fn p_min(&self) -> f64 {
        self.p_min
    }

    /// p⁺
    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    /// Nodal samples of p′ = p/(p−1).
    pub fn conjugate(&self) -> ExponentField {
        let values: Vec<f64> = self.values.iter().map(|p| p / (p - 1.0)).collect();
        let p_min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let p_max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        ExponentField {
            values,
            p_min,
            p_max,
        }
    }

    /// Warning text when p⁻ < 2N/(N+2), the threshold for W^{1,p(x)} ↪ L².
    /// Continuity vs log-Hölder regularity cannot be told apart on samples, so
    /// this is advisory only.
    pub fn embedding_warning(&self, dimension: usize) -> Option<String> {
        let n = dimension as f64;
        let threshold = 2.0 * n / (n + 2.0);
        (self.p_min < threshold).then(|| {
            format!(
                "p_min = {} is below 2N/(N+2) = {threshold} for N = {dimension}",
                self.p_min
            )
        })
    }

    pub fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        check_len("exponent field", mesh.node_count(), self.values.len())
    }
}

fn check_inputs(u: &DiscreteField, p: &ExponentField, mesh: &Mesh) -> Result<()> {
    u.check_mesh(mesh)?;
    p.check_mesh(mesh)?;
    if !u.all_finite() {
        return Err(Error::Numeric("field has non-finite samples".into()));
    }
    Ok(())
}

fn lumped_modular(values: &[f64], p: &[f64], mass: &[f64]) -> f64 {
    mass.iter()
        .zip(values)
        .zip(p)
        .map(|((m, u), p)| m * u.abs().powf(*p))
        .sum()
}

/// ρ_{p(x)}(u) = ∫Ω |u|^{p(x)} dx.
pub fn modular(u: &DiscreteField, p: &ExponentField, mesh: &Mesh) -> Result<f64> {
    check_inputs(u, p, mesh)?;
    Ok(lumped_modular(&u.values, &p.values, mesh.lumped_mass()))
}

/// ϱ_{p(x)}(u) = ∫Ω |u|^{p(x)} + |∇u|^{p(x)} dx.
pub fn sobolev_modular(u: &DiscreteField, p: &ExponentField, mesh: &Mesh) -> Result<f64> {
    let zero_order = modular(u, p, mesh)?;
    let gradient: f64 = mesh
        .elements()
        .iter()
        .map(|e| {
            let g = mesh.element_gradient(e, &u.values);
            let pe = mesh.element_mean(e, &p.values);
            e.measure * g[0].hypot(g[1]).powf(pe)
        })
        .sum();
    Ok(zero_order + gradient)
}

const BISECTION_STEPS: usize = 80;

/// The Luxemburg norm `inf{a > 0 : ρ(u/a) ≤ 1}`.
///
/// `a ↦ ρ(u/a)` is continuous and strictly decreasing for `u ≠ 0`, so the root
/// of `ρ(u/a) = 1` is bracketed geometrically from `a = 1` and then bisected.
pub fn luxemburg_norm(u: &DiscreteField, p: &ExponentField, mesh: &Mesh) -> Result<f64> {
    check_inputs(u, p, mesh)?;
    Ok(luxemburg_unchecked(&u.values, &p.values, mesh.lumped_mass()))
}

fn luxemburg_unchecked(values: &[f64], p: &[f64], mass: &[f64]) -> f64 {
    if values.iter().zip(mass).all(|(u, m)| *u == 0.0 || *m == 0.0) {
        return 0.0;
    }
    let rho = |a: f64| -> f64 {
        mass.iter()
            .zip(values)
            .zip(p)
            .map(|((m, u), p)| m * (u.abs() / a).powf(*p))
            .sum()
    };
    let (mut lo, mut hi) = (1.0_f64, 1.0_f64);
    if rho(1.0) >= 1.0 {
        while rho(hi) > 1.0 {
            lo = hi;
            hi *= 2.0;
        }
    } else {
        while rho(lo) < 1.0 {
            hi = lo;
            lo *= 0.5;
        }
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if hi - lo < 1e-12 * mid {
            break;
        }
        if rho(mid) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `(|a + bθ|^p − |a|^p)/(pθ)`, whose θ → 0 limit is `|a|^{p−2} a b`.
pub fn power_difference_quotient(a: f64, b: f64, p: f64, theta: f64) -> f64 {
    ((a + b * theta).abs().powf(p) - a.abs().powf(p)) / (p * theta)
}

/// `|a|^{p−2} a b`, read as 0 at `a = 0`.
pub fn power_derivative(a: f64, b: f64, p: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a.abs().powf(p - 2.0) * a * b
    }
}

/// One failed modular/norm relation together with the field that broke it.
#[derive(Debug, Clone, Serialize)]
pub struct RelationViolation {
    /// Item number in the standard list of modular/norm relations.
    pub item: u32,
    pub trial: usize,
    pub detail: String,
    pub witness: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ModularReport {
    pub trials: usize,
    pub checks: usize,
    pub violations: Vec<RelationViolation>,
}

impl ModularReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Relative slack used when comparing the two sides of a relation.
pub const RELATION_SLACK: f64 = 1e-10;

struct RelationCheck<'a> {
    report: &'a mut ModularReport,
    trial: usize,
    witness: &'a [f64],
}

impl RelationCheck<'_> {
    /// Records `lhs ≤ rhs` up to the relative slack.
    fn le(&mut self, item: u32, lhs: f64, rhs: f64, what: &str) {
        self.report.checks += 1;
        let scale = 1.0_f64.max(lhs.abs()).max(rhs.abs());
        if !(lhs <= rhs + RELATION_SLACK * scale) {
            self.report.violations.push(RelationViolation {
                item,
                trial: self.trial,
                detail: format!("{what}: {lhs:e} > {rhs:e}"),
                witness: self.witness.to_vec(),
            });
        }
    }

    fn holds(&mut self, item: u32, ok: bool, what: String) {
        self.report.checks += 1;
        if !ok {
            self.report.violations.push(RelationViolation {
                item,
                trial: self.trial,
                detail: what,
                witness: self.witness.to_vec(),
            });
        }
    }
}

fn random_field(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let scale = 10f64.powf(rng.gen_range(-1.5..1.5));
    let sparse = rng.gen_bool(0.2);
    (0..n)
        .map(|_| {
            if sparse && rng.gen_bool(0.3) {
                0.0
            } else {
                scale * rng.gen_range(-1.0..1.0)
            }
        })
        .collect()
}

/// Samples random fields and checks the modular/norm relations
/// (1)–(6), (11)–(14), (16) and (20)–(25) on each of them.
pub fn check_modular_relations(
    p: &ExponentField,
    mesh: &Mesh,
    trials: usize,
    seed: u64,
) -> Result<ModularReport> {
    p.check_mesh(mesh)?;
    if trials == 0 {
        return Err(Error::Domain("trials must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mass = mesh.lumped_mass();
    let pv = p.values();
    let (pm, pp) = (p.p_min(), p.p_max());
    let rho = |u: &[f64]| lumped_modular(u, pv, mass);
    let norm = |u: &[f64]| luxemburg_unchecked(u, pv, mass);
    let scaled = |u: &[f64], t: f64| u.iter().map(|v| v * t).collect::<Vec<_>>();
    let mut report = ModularReport {
        trials,
        ..Default::default()
    };
    for trial in 0..trials {
        let mut u = random_field(&mut rng, mesh.node_count());
        if u.iter().all(|v| *v == 0.0) {
            u[0] = 1.0;
        }
        let v = random_field(&mut rng, mesh.node_count());
        let r = rho(&u);
        let a = norm(&u);
        let mut c = RelationCheck {
            report: &mut report,
            trial,
            witness: &u,
        };

        // (1) and (2): ρ(u/‖u‖) = 1 and the normalised field has norm 1.
        let unit = scaled(&u, 1.0 / a);
        let r_unit = rho(&unit);
        c.holds(
            1,
            (r_unit - 1.0).abs() <= 1e-10,
            format!("rho(u/|u|) = {r_unit}"),
        );
        let a_unit = norm(&unit);
        c.holds(
            2,
            (a_unit - 1.0).abs() <= 1e-10 && (r_unit - 1.0).abs() <= 1e-10,
            format!("|u/|u|| = {a_unit}, rho = {r_unit}"),
        );
        // (3)/(4): the norm and the modular sit on the same side of 1.
        if (a - 1.0).abs() > 1e-9 {
            c.holds(
                if a > 1.0 { 3 } else { 4 },
                (a > 1.0) == (r > 1.0),
                format!("norm {a} vs modular {r}"),
            );
        }
        // (5)/(6) and (22)/(23): power bounds between norm and modular.
        if a > 1.0 {
            c.le(5, a.powf(pm), r, "|u|^p- <= rho");
            c.le(5, r, a.powf(pp), "rho <= |u|^p+");
            c.le(22, r.powf(1.0 / pp), a, "rho^(1/p+) <= |u|");
            c.le(22, a, r.powf(1.0 / pm), "|u| <= rho^(1/p-)");
        } else if a < 1.0 {
            c.le(6, a.powf(pp), r, "|u|^p+ <= rho");
            c.le(6, r, a.powf(pm), "rho <= |u|^p-");
            c.le(23, a, r.powf(1.0 / pp), "|u| <= rho^(1/p+)");
            c.le(23, r.powf(1.0 / pm), a, "rho^(1/p-) <= |u|");
        }
        // (25)
        if a <= 1.0 {
            c.le(25, r, a, "rho <= |u| when |u| <= 1");
        } else {
            c.le(25, a, r, "|u| <= rho when |u| >= 1");
        }
        // (11)
        let sum: Vec<f64> = u.iter().zip(&v).map(|(x, y)| x + y).collect();
        c.le(
            11,
            rho(&sum),
            2f64.powf(pp - 1.0) * (r + rho(&v)),
            "rho(u+v) <= 2^(p+-1)(rho(u)+rho(v))",
        );
        // (12)/(21) with t ∈ (0,1), (13)/(20) with t ≥ 1
        let t_small: f64 = c_range(&mut rng, 0.0, 1.0);
        let r_small = rho(&scaled(&u, t_small));
        c.le(12, r_small, t_small * r, "rho(tu) <= t rho(u), t<=1");
        c.le(21, t_small.powf(pp) * r, r_small, "t^p+ rho(u) <= rho(tu)");
        c.le(21, r_small, t_small.powf(pm) * r, "rho(tu) <= t^p- rho(u)");
        let t_big: f64 = 1.0 + c_range(&mut rng, 0.0, 9.0);
        let r_big = rho(&scaled(&u, t_big));
        c.le(13, t_big * r, r_big, "t rho(u) <= rho(tu), t>=1");
        c.le(20, t_big.powf(pm) * r, r_big, "t^p- rho(u) <= rho(tu)");
        c.le(20, r_big, t_big.powf(pp) * r, "rho(tu) <= t^p+ rho(u)");
        // (14) pointwise domination
        let dominated: Vec<f64> = u.iter().map(|x| x * c_range(&mut rng, 0.0, 1.0)).collect();
        c.le(14, rho(&dominated), r, "|v| <= |u| => rho(v) <= rho(u)");
        // (16) convexity along a segment
        let t: f64 = c_range(&mut rng, 0.0, 1.0);
        let mix: Vec<f64> = u.iter().zip(&v).map(|(x, y)| t * x + (1.0 - t) * y).collect();
        c.le(
            16,
            rho(&mix),
            t * r + (1.0 - t) * rho(&v),
            "rho(tu+(1-t)v) <= t rho(u) + (1-t) rho(v)",
        );
    }
    Ok(report)
}

fn c_range(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..hi)
}
