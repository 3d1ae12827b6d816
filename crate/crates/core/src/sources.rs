//! Reaction and capacity terms `(f, b)`, their extensions off `[0, δ₀]`,
//! primitives, and sampled hypothesis checks.
//!
//! Outside `[0, δ₀]` the data are extended linearly:
//!
//! ```text
//!   f̄(x,s) = f(x,0) − (λ₀/2) s            s < 0
//!          = f(x,δ₀) − λ̃₀ (s − δ₀)        s > δ₀
//!   b̄(x,s) = b(x,0) + s                    s < 0
//!          = b(x,δ₀) + s − δ₀              s > δ₀
//! ```
//!
//! and `F̄`, `B̄` are the matching primitives vanishing at `s = 0`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::DiscreteField;
use crate::quadrature::{adaptive_simpson, DEFAULT_ABS_TOL};
use crate::{Coefficient, Point, Pointwise};

/// Points of the grid used for λ₀ estimation and monotonicity checks.
pub const SLOPE_GRID: usize = 256;

/// Safety factor applied to the sampled slope bound when estimating λ₀.
pub const LAMBDA0_SAFETY: f64 = 1.05;

const SIGN_TOL: f64 = 1e-12;

#[derive(Clone)]
pub struct SourceSystem {
    name: String,
    f: Pointwise,
    b: Pointwise,
    db: Option<Pointwise>,
    big_f: Option<Pointwise>,
    big_b: Option<Pointwise>,
    delta0: f64,
    lambda0: f64,
    lambda0_tilde: f64,
    x_independent: bool,
    alpha: Option<f64>,
    band: (f64, f64),
    samples: Arc<Vec<Point>>,
}

impl fmt::Debug for SourceSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SourceSystem")
            .field("name", &self.name)
            .field("delta0", &self.delta0)
            .field("lambda0", &self.lambda0)
            .field("lambda0_tilde", &self.lambda0_tilde)
            .field("x_independent", &self.x_independent)
            .field("alpha", &self.alpha)
            .field("band", &self.band)
            .finish()
    }
}

/// Which extended evaluator [`SourceSystem::eval_extended`] should use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extended {
    FBar,
    BBar,
    BigFBar,
    BigBBar,
    GLambda(f64),
}

fn slope_grid(delta0: f64) -> Vec<f64> {
    (0..SLOPE_GRID)
        .map(|k| delta0 * k as f64 / (SLOPE_GRID - 1) as f64)
        .collect()
}

/// Builds and validates a source. `samples` are the points of Ω̄ at which the
/// hypotheses are checked (typically [`crate::flux::sample_points`]).
///
/// When `lambda0` is `None` it is estimated as 1.05 times the largest grid
/// slope of `−Δf/Δb`; a supplied value is checked against the same grid.
pub fn make_source(
    name: impl Into<String>,
    f: Pointwise,
    b: Pointwise,
    delta0: f64,
    lambda0: Option<f64>,
    samples: &[Point],
) -> Result<SourceSystem> {
    if !(delta0.is_finite() && delta0 > 0.0) {
        return Err(Error::Construction(format!("delta0 = {delta0} must be positive")));
    }
    if samples.is_empty() {
        return Err(Error::Construction("no sample points for hypothesis checks".into()));
    }
    let grid = slope_grid(delta0);
    let mut worst = f64::NEG_INFINITY;
    for &x in samples {
        let f0 = f(x, 0.0);
        let fd = f(x, delta0);
        if !(f0.is_finite() && fd.is_finite()) {
            return Err(Error::Construction(format!("f is not finite at x = {x:?}")));
        }
        if f0 < -SIGN_TOL {
            return Err(Error::Construction(format!(
                "(H8) fails at s=0: f({x:?}, 0) = {f0} < 0"
            )));
        }
        if fd > SIGN_TOL {
            return Err(Error::Construction(format!(
                "(H8) fails at s=δ₀: f({x:?}, {delta0}) = {fd} > 0"
            )));
        }
        let b0 = b(x, 0.0);
        if !(b0.is_finite() && b0 >= 0.0) {
            return Err(Error::Construction(format!(
                "b({x:?}, 0) = {b0}; b must be nonnegative"
            )));
        }
        for w in grid.windows(2) {
            let db = b(x, w[1]) - b(x, w[0]);
            let df = f(x, w[1]) - f(x, w[0]);
            if !(db.is_finite() && db > 0.0) {
                return Err(Error::Construction(format!(
                    "(H12) fails: b({x:?}, ·) is not strictly increasing on [{}, {}], so no finite λ₀ exists",
                    w[0], w[1]
                )));
            }
            if !df.is_finite() {
                return Err(Error::Construction(format!("f is not finite at x = {x:?}, s = {}", w[1])));
            }
            worst = worst.max(-df / db);
        }
    }
    let lambda0 = match lambda0 {
        Some(l) => {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::Construction(format!("lambda0 = {l} must be positive")));
            }
            if l <= worst {
                return Err(Error::Construction(format!(
                    "(H13) fails: s ↦ f + λ₀ b is not strictly increasing for λ₀ = {l} (grid slope bound {worst})"
                )));
            }
            l
        }
        None if worst > 0.0 => LAMBDA0_SAFETY * worst,
        None => 1.0,
    };
    Ok(SourceSystem {
        name: name.into(),
        f,
        b,
        db: None,
        big_f: None,
        big_b: None,
        delta0,
        lambda0,
        lambda0_tilde: 0.5 * lambda0,
        x_independent: false,
        alpha: None,
        band: (0.0, delta0),
        samples: Arc::new(samples.to_vec()),
    })
}

/// `b(x, s) = s` with its derivative and primitive.
pub fn identity_capacity() -> (Pointwise, Pointwise, Pointwise) {
    (
        Arc::new(|_, s| s),
        Arc::new(|_, _| 1.0),
        Arc::new(|_, s| 0.5 * s * s),
    )
}

fn with_identity_b(
    name: &str,
    f: Pointwise,
    big_f: Pointwise,
    delta0: f64,
    lambda0: Option<f64>,
    samples: &[Point],
) -> Result<SourceSystem> {
    let (b, db, big_b) = identity_capacity();
    Ok(make_source(name, f, b, delta0, lambda0, samples)?
        .with_derivative_b(db)
        .with_primitives(Some(big_f), Some(big_b))
        .with_x_independent(true))
}

/// `f(s) = r s (1 − s/δ₀)`, `b(s) = s`.
pub fn logistic(rate: f64, delta0: f64, lambda0: Option<f64>, samples: &[Point]) -> Result<SourceSystem> {
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(Error::Construction(format!("logistic rate {rate} must be nonnegative")));
    }
    let f: Pointwise = Arc::new(move |_, s| rate * s * (1.0 - s / delta0));
    let big_f: Pointwise = Arc::new(move |_, s| rate * (s * s / 2.0 - s * s * s / (3.0 * delta0)));
    with_identity_b("logistic", f, big_f, delta0, lambda0, samples)
}

/// Allee-type source `f(s) = s (s − θ)(δ₀ − s)`, `b(s) = s`.
pub fn allee(threshold: f64, delta0: f64, lambda0: Option<f64>, samples: &[Point]) -> Result<SourceSystem> {
    if !(threshold > 0.0 && threshold < delta0) {
        return Err(Error::Construction(format!(
            "Allee threshold {threshold} must lie in (0, δ₀)"
        )));
    }
    let t = threshold;
    let f: Pointwise = Arc::new(move |_, s| s * (s - t) * (delta0 - s));
    // s(s−t)(d−s) = −s³ + (t+d)s² − t d s
    let big_f: Pointwise = Arc::new(move |_, s| {
        -s.powi(4) / 4.0 + (t + delta0) * s.powi(3) / 3.0 - t * delta0 * s * s / 2.0
    });
    with_identity_b("allee", f, big_f, delta0, lambda0, samples)
}

/// Odd-about-δ₀/2 source `f(s) = A sin(2π s/δ₀)`, `b(s) = s`.
pub fn symmetric_sine(amplitude: f64, delta0: f64, lambda0: Option<f64>, samples: &[Point]) -> Result<SourceSystem> {
    let k = std::f64::consts::TAU / delta0;
    let f: Pointwise = Arc::new(move |_, s| amplitude * (k * s).sin());
    let big_f: Pointwise = Arc::new(move |_, s| amplitude * (1.0 - (k * s).cos()) / k);
    with_identity_b("symmetric", f, big_f, delta0, lambda0, samples)
}

/// x-independent source given by a table of values on a uniform grid of
/// `[0, δ₀]`, interpolated linearly; `b(s) = s`.
pub fn tabulated(values: Vec<f64>, delta0: f64, lambda0: Option<f64>, samples: &[Point]) -> Result<SourceSystem> {
    if values.len() < 2 || values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Construction(
            "a source table needs at least two finite values".into(),
        ));
    }
    let n = values.len() - 1;
    let table = Arc::new(values);
    let f: Pointwise = Arc::new(move |_, s| {
        let t = (s / delta0).clamp(0.0, 1.0) * n as f64;
        let k = (t.floor() as usize).min(n - 1);
        let w = t - k as f64;
        (1.0 - w) * table[k] + w * table[k + 1]
    });
    let (b, db, big_b) = identity_capacity();
    Ok(make_source("table", f, b, delta0, lambda0, samples)?
        .with_derivative_b(db)
        .with_primitives(None, Some(big_b))
        .with_x_independent(true))
}

/// Coefficients of the signomial family
/// `f(x,s) = Σ a_i(x) s^{q_i(x)} − Σ b_j(x) s^{r_j(x)} + c(x)`.
#[derive(Clone)]
pub struct Signomial {
    pub a: Vec<Coefficient>,
    pub q: Vec<Coefficient>,
    pub b: Vec<Coefficient>,
    pub r: Vec<Coefficient>,
    pub c: Coefficient,
    pub alpha: f64,
}

/// A signomial source with the δ₀ and ε₀ found for it.
#[derive(Debug, Clone)]
pub struct SignomialSource {
    pub source: SourceSystem,
    pub delta0: f64,
    pub eps0: f64,
    pub p0: f64,
}

/// Builds a signomial source with capacity `b_cap`. The coefficient
/// conditions are checked on `samples`; δ₀ starts from
/// `max{(nM/b₀)^{1/p₀}, 1}` (or `delta0_hint`, if larger) and grows by 10%
/// until `sup f(·, δ) < 0`, and ε₀ starts at 0.9 times
/// `min{(a₀/(mM′))^{1/p₀}, 1}` and shrinks by 10% until `inf f(·, ε) > 0`.
pub fn signomial_source(
    sig: &Signomial,
    b_cap: Pointwise,
    delta0_hint: Option<f64>,
    lambda0: Option<f64>,
    samples: &[Point],
) -> Result<SignomialSource> {
    let (n, m) = (sig.a.len(), sig.b.len());
    if n == 0 || m == 0 || sig.q.len() != n || sig.r.len() != m {
        return Err(Error::Construction(
            "signomial needs n ≥ 1 terms a_i s^q_i and m ≥ 1 terms b_j s^r_j with matching exponent lists".into(),
        ));
    }
    let alpha = sig.alpha;
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(Error::Construction(format!("condition ② fails: α = {alpha} not in (1, 2)")));
    }
    let mut a0 = f64::INFINITY;
    let mut b0 = f64::INFINITY;
    let mut big_m = 0.0f64;
    let mut big_m2 = 0.0f64;
    let mut p0 = f64::INFINITY;
    for &x in samples {
        for (i, (a, q)) in sig.a.iter().zip(&sig.q).enumerate() {
            let (av, qv) = (a(x), q(x));
            if !(av.is_finite() && av >= 0.0) {
                return Err(Error::Construction(format!("condition ① fails: a_{}({x:?}) = {av}", i + 1)));
            }
            if !(qv > 0.0 && qv < alpha - 1.0) {
                return Err(Error::Construction(format!(
                    "condition ② fails: q_{}({x:?}) = {qv} not in (0, α−1)",
                    i + 1
                )));
            }
            big_m = big_m.max(av);
            p0 = p0.min(sig.r[0](x) - qv);
        }
        for (j, (b, r)) in sig.b.iter().zip(&sig.r).enumerate() {
            let (bv, rv) = (b(x), r(x));
            if !(bv.is_finite() && bv >= 0.0) {
                return Err(Error::Construction(format!("condition ① fails: b_{}({x:?}) = {bv}", j + 1)));
            }
            if !(rv > alpha - 1.0 && rv.is_finite()) {
                return Err(Error::Construction(format!(
                    "condition ② fails: r_{}({x:?}) = {rv} not in (α−1, ∞)",
                    j + 1
                )));
            }
            big_m2 = big_m2.max(bv);
            p0 = p0.min(rv - sig.q[0](x));
        }
        let cv = (sig.c)(x);
        if !(cv.is_finite() && cv >= 0.0) {
            return Err(Error::Construction(format!("condition ① fails: c({x:?}) = {cv}")));
        }
        a0 = a0.min(sig.a[0](x));
        b0 = b0.min(sig.b[0](x));
    }
    if !(a0 > 0.0) {
        return Err(Error::Construction("condition ③ fails: ess inf a_1 = 0".into()));
    }
    if !(b0 > 0.0) {
        return Err(Error::Construction("condition ③ fails: ess inf b_1 = 0".into()));
    }
    if !(p0 > 0.0) {
        return Err(Error::Construction("condition ④ fails: exponent gap p₀ is not positive".into()));
    }

    let sig_f = sig.clone();
    let f: Pointwise = Arc::new(move |x, s| {
        let s = s.max(0.0);
        let gain: f64 = sig_f.a.iter().zip(&sig_f.q).map(|(a, q)| a(x) * s.powf(q(x))).sum();
        let loss: f64 = sig_f.b.iter().zip(&sig_f.r).map(|(b, r)| b(x) * s.powf(r(x))).sum();
        gain - loss + (sig_f.c)(x)
    });

    let formula = (n as f64 * big_m / b0).powf(1.0 / p0).max(1.0);
    let mut delta0 = formula.max(delta0_hint.unwrap_or(0.0));
    let sup_f = |s: f64| samples.iter().map(|&x| f(x, s)).fold(f64::NEG_INFINITY, f64::max);
    let mut guard = 0;
    while sup_f(delta0) >= 0.0 {
        delta0 *= 1.1;
        guard += 1;
        if guard > 400 || !delta0.is_finite() {
            return Err(Error::Construction("no δ₀ with sup f(·, δ₀) < 0 found".into()));
        }
    }

    let eps_formula = (a0 / (m as f64 * big_m2)).powf(1.0 / p0).min(1.0);
    let mut eps0 = 0.9 * eps_formula;
    let inf_f = |s: f64| samples.iter().map(|&x| f(x, s)).fold(f64::INFINITY, f64::min);
    guard = 0;
    while !(inf_f(eps0) > 0.0) || eps0 >= delta0 {
        eps0 *= 0.9;
        guard += 1;
        if guard > 400 {
            return Err(Error::Construction("no ε₀ with inf f(·, ε₀) > 0 found".into()));
        }
    }

    let source = make_source("signomial", f, b_cap, delta0, lambda0, samples)?
        .with_alpha(alpha)?;
    Ok(SignomialSource {
        source,
        delta0,
        eps0,
        p0,
    })
}

/// Restricts a source to the band `[eps, delta]`, replacing `f(x, s)` by
/// `f(x, eps)` for `s < eps`.
pub fn truncate_source(src: &SourceSystem, eps: f64, delta: f64) -> Result<SourceSystem> {
    if !(0.0 <= eps && eps <= delta && delta <= src.delta0) {
        return Err(Error::Domain(format!(
            "band [{eps}, {delta}] must satisfy 0 ≤ ε ≤ δ ≤ δ₀ = {}",
            src.delta0
        )));
    }
    for &x in src.samples.iter() {
        let fe = src.f(x, eps);
        if fe < -SIGN_TOL {
            return Err(Error::Domain(format!(
                "band lower end fails: f({x:?}, {eps}) = {fe:.6e} < 0"
            )));
        }
        let fd = src.f(x, delta);
        if fd > SIGN_TOL {
            return Err(Error::Domain(format!(
                "band upper end fails: f({x:?}, {delta}) = {fd:.6e} > 0"
            )));
        }
    }
    let mut out = src.clone();
    out.band = (eps, delta);
    if eps > 0.0 {
        let f = src.f.clone();
        out.f = Arc::new(move |x, s| f(x, s.max(eps)));
        out.big_f = None;
        out.name = format!("{}[{eps},{delta}]", src.name);
    }
    Ok(out)
}

impl SourceSystem {
    pub fn with_derivative_b(mut self, db: Pointwise) -> Self {
        self.db = Some(db);
        self
    }

    /// Registers closed-form primitives `F(x,s) = ∫₀ˢ f`, `B(x,s) = ∫₀ˢ b`.
    pub fn with_primitives(mut self, big_f: Option<Pointwise>, big_b: Option<Pointwise>) -> Self {
        if big_f.is_some() {
            self.big_f = big_f;
        }
        if big_b.is_some() {
            self.big_b = big_b;
        }
        self
    }

    pub fn with_x_independent(mut self, yes: bool) -> Self {
        self.x_independent = yes;
        self
    }

    /// Sets α for the (EH_f) check and raises λ̃₀ to
    /// `max(λ₀/2, sup −(α−1) f(x,δ₀)/δ₀)` over the samples.
    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        if !(alpha > 1.0 && alpha <= 2.0) {
            return Err(Error::Construction(format!("α = {alpha} must lie in (1, 2]")));
        }
        let need = self
            .samples
            .iter()
            .map(|&x| -(alpha - 1.0) * (self.f)(x, self.delta0) / self.delta0)
            .fold(0.5 * self.lambda0, f64::max);
        if need >= self.lambda0 {
            return Err(Error::Construction(format!(
                "λ̃₀ = {need} required by α = {alpha} is not below λ₀ = {}",
                self.lambda0
            )));
        }
        self.lambda0_tilde = need;
        self.alpha = Some(alpha);
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn delta0(&self) -> f64 {
        self.delta0
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn lambda0_tilde(&self) -> f64 {
        self.lambda0_tilde
    }

    pub fn x_independent(&self) -> bool {
        self.x_independent
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    /// The band `[ε, δ]` (`[0, δ₀]` unless truncated).
    pub fn band(&self) -> (f64, f64) {
        self.band
    }

    pub fn samples(&self) -> &[Point] {
        &self.samples
    }

    pub fn f(&self, x: Point, s: f64) -> f64 {
        (self.f)(x, s)
    }

    pub fn b(&self, x: Point, s: f64) -> f64 {
        (self.b)(x, s)
    }

    pub fn f_bar(&self, x: Point, s: f64) -> f64 {
        if s < 0.0 {
            self.f(x, 0.0) - 0.5 * self.lambda0 * s
        } else if s > self.delta0 {
            self.f(x, self.delta0) - self.lambda0_tilde * (s - self.delta0)
        } else {
            self.f(x, s)
        }
    }

    pub fn b_bar(&self, x: Point, s: f64) -> f64 {
        if s < 0.0 {
            self.b(x, 0.0) + s
        } else if s > self.delta0 {
            self.b(x, self.delta0) + s - self.delta0
        } else {
            self.b(x, s)
        }
    }

    /// ∂b̄/∂s; one-sided differences at the ends of `[0, δ₀]` when no closed
    /// form is registered.
    pub fn db_bar(&self, x: Point, s: f64) -> f64 {
        if s < 0.0 || s > self.delta0 {
            return 1.0;
        }
        if let Some(db) = &self.db {
            return db(x, s);
        }
        let h = 1e-7 * self.delta0.max(1.0);
        let lo = (s - h).max(0.0);
        let hi = (s + h).min(self.delta0);
        (self.b(x, hi) - self.b(x, lo)) / (hi - lo)
    }

    /// `F(x, s) = ∫₀ˢ f(x, t) dt` on `[0, δ₀]`.
    pub fn big_f(&self, x: Point, s: f64) -> Result<f64> {
        match &self.big_f {
            Some(p) => Ok(p(x, s)),
            None => adaptive_simpson(|t| self.f(x, t), 0.0, s, DEFAULT_ABS_TOL),
        }
    }

    /// `B(x, s) = ∫₀ˢ b(x, t) dt` on `[0, δ₀]`.
    pub fn big_b(&self, x: Point, s: f64) -> Result<f64> {
        match &self.big_b {
            Some(p) => Ok(p(x, s)),
            None => adaptive_simpson(|t| self.b(x, t), 0.0, s, DEFAULT_ABS_TOL),
        }
    }

    pub fn big_f_bar(&self, x: Point, s: f64) -> Result<f64> {
        if s < 0.0 {
            Ok(self.f(x, 0.0) * s - 0.25 * self.lambda0 * s * s)
        } else if s > self.delta0 {
            let t = s - self.delta0;
            Ok(self.big_f(x, self.delta0)? + self.f(x, self.delta0) * t
                - 0.5 * self.lambda0_tilde * t * t)
        } else {
            self.big_f(x, s)
        }
    }

    pub fn big_b_bar(&self, x: Point, s: f64) -> Result<f64> {
        if s < 0.0 {
            Ok(self.b(x, 0.0) * s + 0.5 * s * s)
        } else if s > self.delta0 {
            let t = s - self.delta0;
            Ok(self.big_b(x, self.delta0)? + self.b(x, self.delta0) * t + 0.5 * t * t)
        } else {
            self.big_b(x, s)
        }
    }

    fn check_lambda(&self, lambda: f64) -> Result<()> {
        if !(lambda.is_finite() && lambda >= self.lambda0 * (1.0 - 1e-12)) {
            return Err(Error::Domain(format!(
                "λ = {lambda} is below λ₀ = {}; g_λ(·, U) ∈ M_λ needs λ ≥ λ₀",
                self.lambda0
            )));
        }
        Ok(())
    }

    /// `g_λ(x, s) = f̄(x, s) + λ b̄(x, s)`; requires `λ ≥ λ₀`.
    pub fn g_lambda(&self, lambda: f64, x: Point, s: f64) -> Result<f64> {
        self.check_lambda(lambda)?;
        Ok(self.f_bar(x, s) + lambda * self.b_bar(x, s))
    }

    pub fn eval_extended(&self, kind: Extended, x: Point, s: f64) -> Result<f64> {
        match kind {
            Extended::FBar => Ok(self.f_bar(x, s)),
            Extended::BBar => Ok(self.b_bar(x, s)),
            Extended::BigFBar => self.big_f_bar(x, s),
            Extended::BigBBar => self.big_b_bar(x, s),
            Extended::GLambda(l) => self.g_lambda(l, x, s),
        }
    }

    /// Nodal right side `g_λ(x_i, U_i)`.
    pub fn g_field(&self, lambda: f64, nodes: &[Point], u: &DiscreteField) -> Result<DiscreteField> {
        crate::error::check_len("field", nodes.len(), u.len())?;
        self.check_lambda(lambda)?;
        Ok(DiscreteField::new(
            nodes
                .iter()
                .zip(u.as_slice())
                .map(|(&x, &s)| self.f_bar(x, s) + lambda * self.b_bar(x, s))
                .collect(),
        ))
    }

    /// Largest amount by which `g` leaves `[λ b(x,0), λ b(x,δ₀)]` at a node.
    pub fn m_lambda_violation(&self, lambda: f64, nodes: &[Point], g: &DiscreteField) -> f64 {
        nodes
            .iter()
            .zip(g.as_slice())
            .map(|(&x, &gv)| {
                let lo = lambda * self.b(x, 0.0);
                let hi = lambda * self.b(x, self.delta0);
                (lo - gv).max(gv - hi).max(0.0)
            })
            .fold(0.0, f64::max)
    }

    /// `max |f(x, s)|` over the samples and the slope grid.
    pub fn max_abs_f(&self) -> f64 {
        let grid = slope_grid(self.delta0);
        self.samples
            .iter()
            .flat_map(|&x| grid.iter().map(move |&s| (x, s)))
            .map(|(x, s)| self.f(x, s).abs())
            .fold(0.0, f64::max)
    }

    /// Checks `f(x, δ₀ − s) = −f(x, s)` on the slope grid.
    pub fn symmetry_defect(&self) -> f64 {
        let grid = slope_grid(self.delta0);
        self.samples
            .iter()
            .flat_map(|&x| grid.iter().map(move |&s| (x, s)))
            .map(|(x, s)| (self.f(x, self.delta0 - s) + self.f(x, s)).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisViolation {
    pub check: String,
    pub x: Point,
    pub s: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct FRatioMonotonicity {
    pub alpha: f64,
    pub decreasing: bool,
    pub strictly_decreasing: bool,
    pub witness: Option<(Point, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub source: String,
    pub trials: usize,
    pub checks: usize,
    pub violations: Vec<HypothesisViolation>,
    pub eh_f: Option<FRatioMonotonicity>,
}

impl HypothesisReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.eh_f.as_ref().map_or(true, |e| e.decreasing)
    }
}

/// Scans `τ ↦ f(x, τ)/τ^{α−1}` on a 256-point grid of `(0, δ₀]`, which is
/// monotone exactly when `s ↦ f(x, s^{1/α})/s^{(α−1)/α}` is.
pub fn f_ratio_monotonicity(src: &SourceSystem, alpha: f64) -> FRatioMonotonicity {
    let d = src.delta0();
    let grid: Vec<f64> = (1..=SLOPE_GRID).map(|k| d * k as f64 / SLOPE_GRID as f64).collect();
    let mut out = FRatioMonotonicity {
        alpha,
        decreasing: true,
        strictly_decreasing: true,
        witness: None,
    };
    for &x in src.samples() {
        let ratios: Vec<f64> = grid.iter().map(|&t| src.f(x, t) / t.powf(alpha - 1.0)).collect();
        for (k, w) in ratios.windows(2).enumerate() {
            let tol = 1e-12 * w[0].abs().max(w[1].abs());
            if w[1] > w[0] + tol {
                out.decreasing = false;
                out.strictly_decreasing = false;
                out.witness.get_or_insert((x, grid[k + 1]));
            } else if w[1] >= w[0] - tol {
                out.strictly_decreasing = false;
                out.witness.get_or_insert((x, grid[k + 1]));
            }
        }
    }
    out
}

/// Relative slack used by [`check_hypotheses`].
pub const HYPOTHESIS_SLACK: f64 = 1e-10;

/// Samples `(x, s)` and checks the two-sided bound on `f`, the bound
/// `|f| ≤ λ₀ (b(x,δ₀) − b(x,0))`, strict increase of `f̄ + λ b̄` for
/// `λ ∈ {λ₀, 2λ₀}`, the upper bound on `F̄`, the primitive identities, the
/// lower bound `B̄ ≥ −b(x,δ₀)²/2`, and (EH_f) when α is set.
pub fn check_hypotheses(src: &SourceSystem, trials: usize, seed: u64) -> Result<HypothesisReport> {
    if trials == 0 {
        return Err(Error::Domain("trials must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = src.delta0();
    let l0 = src.lambda0();
    let lt = src.lambda0_tilde();
    let mut report = HypothesisReport {
        source: src.name().to_string(),
        trials,
        checks: 0,
        violations: Vec::new(),
        eh_f: None,
    };
    let fail = |report: &mut HypothesisReport, check: &str, x: Point, s: f64, detail: String| {
        report.violations.push(HypothesisViolation {
            check: check.into(),
            x,
            s,
            detail,
        })
    };
    let samples = src.samples();
    for trial in 0..trials {
        let x = samples[rng.gen_range(0..samples.len())];
        // endpoints are included deterministically in the first trials
        let s = match trial {
            0 => 0.0,
            1 => d,
            _ => rng.gen_range(0.0..=d),
        };
        let (b0, bd, bs) = (src.b(x, 0.0), src.b(x, d), src.b(x, s));
        let fs = src.f(x, s);
        let span = bd - b0;
        let scale = l0 * (bd.abs() + b0.abs() + bs.abs()) + fs.abs();

        report.checks += 2;
        let lower = l0 * (b0 - bs);
        let upper = l0 * (bd - bs);
        if fs < lower - HYPOTHESIS_SLACK * scale {
            fail(&mut report, "f_lower_bound", x, s, format!("f = {fs:e} < {lower:e}"));
        }
        if fs > upper + HYPOTHESIS_SLACK * scale {
            fail(&mut report, "f_upper_bound", x, s, format!("f = {fs:e} > {upper:e}"));
        }
        report.checks += 1;
        if fs.abs() > l0 * span + HYPOTHESIS_SLACK * scale {
            fail(&mut report, "f_abs_bound", x, s, format!("|f| = {:e} > {:e}", fs.abs(), l0 * span));
        }

        let t1 = rng.gen_range(-1.0..d + 1.0);
        let t2 = rng.gen_range(-1.0..d + 1.0);
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        if hi > lo {
            for lambda in [l0, 2.0 * l0] {
                report.checks += 1;
                let glo = src.f_bar(x, lo) + lambda * src.b_bar(x, lo);
                let ghi = src.f_bar(x, hi) + lambda * src.b_bar(x, hi);
                if ghi <= glo {
                    fail(
                        &mut report,
                        "g_strictly_increasing",
                        x,
                        lo,
                        format!("λ = {lambda}: g({hi}) = {ghi:e} ≤ g({lo}) = {glo:e}"),
                    );
                }
            }
        }

        let t = rng.gen_range(-10.0..d + 10.0);
        report.checks += 1;
        let big_f = src.big_f_bar(x, t)?;
        let fd = src.f(x, d);
        let tail = if fd == 0.0 { 0.0 } else { fd * fd / (2.0 * lt) };
        let bound = src.f(x, 0.0).powi(2) / l0 + tail + d * l0 * span;
        if big_f > bound + HYPOTHESIS_SLACK * bound.abs().max(1.0) {
            fail(&mut report, "F_bar_upper_bound", x, t, format!("F̄ = {big_f:e} > {bound:e}"));
        }

        report.checks += 1;
        let big_b = src.big_b_bar(x, t)?;
        if big_b < -0.5 * bd * bd - HYPOTHESIS_SLACK * bd * bd {
            fail(&mut report, "B_bar_lower_bound", x, t, format!("B̄ = {big_b:e} < {:e}", -0.5 * bd * bd));
        }

        report.checks += 2;
        let h = 1e-6 * t.abs().max(1.0);
        let fd_f = (src.big_f_bar(x, t + h)? - src.big_f_bar(x, t - h)?) / (2.0 * h);
        let fb = src.f_bar(x, t);
        if (fd_f - fb).abs() > 1e-5 * fb.abs().max(1.0) {
            fail(&mut report, "F_bar_derivative", x, t, format!("dF̄/ds = {fd_f:e}, f̄ = {fb:e}"));
        }
        let fd_b = (src.big_b_bar(x, t + h)? - src.big_b_bar(x, t - h)?) / (2.0 * h);
        let bb = src.b_bar(x, t);
        if (fd_b - bb).abs() > 1e-5 * bb.abs().max(1.0) {
            fail(&mut report, "B_bar_derivative", x, t, format!("dB̄/ds = {fd_b:e}, b̄ = {bb:e}"));
        }
    }
    if let Some(alpha) = src.alpha() {
        report.eh_f = Some(f_ratio_monotonicity(src, alpha));
    }
    Ok(report)
}

/// Verifies a user λ₀ or returns the grid-based estimate for `f, b` on
/// `[0, δ₀]` without building a source.
pub fn estimate_lambda0(f: &Pointwise, b: &Pointwise, delta0: f64, samples: &[Point]) -> Result<f64> {
    Ok(make_source("probe", f.clone(), b.clone(), delta0, None, samples)?.lambda0())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{constant, pointwise};

    fn pts() -> Vec<Point> {
        (0..=8).map(|k| [k as f64 / 8.0, 0.0]).collect()
    }

    /// Direct oracle for the grid slope bound of the logistic law.
    fn logistic_slope_oracle() -> f64 {
        let g = slope_grid(1.0);
        g.windows(2).map(|w| w[0] + w[1] - 1.0).fold(f64::MIN, f64::max)
    }

    #[test]
    fn logistic_lambda0_estimate() {
        let src = logistic(1.0, 1.0, None, &pts()).unwrap();
        let want = LAMBDA0_SAFETY * logistic_slope_oracle();
        assert!((src.lambda0() - want).abs() < 1e-12);
        assert!((src.lambda0() - 1.05).abs() < 0.01);
        assert_eq!(src.lambda0_tilde(), 0.5 * src.lambda0());
    }

    #[test]
    fn membership_of_g_lambda() {
        let src = logistic(1.0, 1.0, None, &pts()).unwrap();
        for k in 0..=100 {
            let s = k as f64 / 100.0;
            let g = src.g_lambda(2.0, [0.0, 0.0], s).unwrap();
            assert!((0.0..=2.0).contains(&g));
        }
        assert!(matches!(src.g_lambda(0.5, [0.0, 0.0], 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn zero_source_accepts_any_lambda0() {
        let (b, _, _) = identity_capacity();
        let src = make_source("zero", pointwise(|_, _| 0.0), b.clone(), 1.0, None, &pts()).unwrap();
        assert!(src.lambda0() > 0.0);
        let src = make_source("zero", pointwise(|_, _| 0.0), b, 1.0, Some(1e-3), &pts()).unwrap();
        assert_eq!(src.lambda0(), 1e-3);
    }

    #[test]
    fn construction_errors() {
        let (b, _, _) = identity_capacity();
        let e = make_source("bad", pointwise(|_, s| s + 0.1), b.clone(), 1.0, None, &pts()).unwrap_err();
        assert!(e.to_string().contains("(H8)"));
        let flat = pointwise(|_, s: f64| s.min(0.5));
        let e = make_source("flat", pointwise(|_, _| 0.0), flat, 1.0, None, &pts()).unwrap_err();
        assert!(e.to_string().contains("(H12)"));
        let e = make_source("low", pointwise(|_, s| 1.0 - 2.0 * s), b, 0.5, Some(1.0), &pts()).unwrap_err();
        assert!(e.to_string().contains("(H13)"));
    }

    #[test]
    fn extension_branches() {
        let src = logistic(1.0, 1.0, None, &pts()).unwrap();
        let x = [0.3, 0.0];
        let l0 = src.lambda0();
        assert!((src.f_bar(x, -1.0) - (0.0 + l0 / 2.0)).abs() < 1e-15);
        assert!((src.b_bar(x, 2.0) - 2.0).abs() < 1e-15);
        assert_eq!(src.db_bar(x, -3.0), 1.0);
        assert_eq!(src.eval_extended(Extended::BBar, x, 2.0).unwrap(), 2.0);
        // F̄ continuous at δ₀ and B̄ ≥ −b(δ₀)²/2
        let a = src.big_f_bar(x, 1.0 - 1e-12).unwrap();
        let b = src.big_f_bar(x, 1.0 + 1e-12).unwrap();
        assert!((a - b).abs() < 1e-10);
        for k in -100..=100 {
            let s = k as f64 / 10.0;
            assert!(src.big_b_bar(x, s).unwrap() >= -0.5);
        }
    }

    #[test]
    fn quadrature_primitives_match_closed_forms() {
        let closed = allee(0.25, 1.0, None, &pts()).unwrap();
        let (b, _, _) = identity_capacity();
        let raw = make_source("allee", pointwise(|_, s| s * (s - 0.25) * (1.0 - s)), b, 1.0, None, &pts()).unwrap();
        for k in 0..=20 {
            let s = -1.0 + 3.0 * k as f64 / 20.0;
            let x = [0.5, 0.0];
            assert!((closed.big_f_bar(x, s).unwrap() - raw.big_f_bar(x, s).unwrap()).abs() < 1e-9);
            assert!((closed.big_b_bar(x, s).unwrap() - raw.big_b_bar(x, s).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn hypotheses_hold_for_examples() {
        for src in [
            logistic(1.0, 1.0, None, &pts()).unwrap(),
            allee(0.25, 1.0, None, &pts()).unwrap(),
            symmetric_sine(1.0, 1.0, None, &pts()).unwrap(),
            tabulated(vec![0.25, 0.0, -0.25, -0.5, -0.75], 1.0, None, &pts()).unwrap(),
        ] {
            let r = check_hypotheses(&src, 500, 4).unwrap();
            assert!(r.passed(), "{}: {:?}", src.name(), r.violations.first());
        }
        let (b, _, _) = identity_capacity();
        let zero = make_source("zero", pointwise(|_, _| 0.0), b, 1.0, None, &pts()).unwrap();
        assert!(check_hypotheses(&zero, 100, 1).unwrap().passed());
    }

    #[test]
    fn truncation() {
        let src = allee(0.25, 1.0, None, &pts()).unwrap();
        let same = truncate_source(&src, 0.0, 1.0).unwrap();
        assert_eq!(same.band(), (0.0, 1.0));
        assert_eq!(same.f([0.0, 0.0], 0.4), src.f([0.0, 0.0], 0.4));
        let band = truncate_source(&src, 0.3, 1.0).unwrap();
        assert_eq!(band.band(), (0.3, 1.0));
        assert_eq!(band.f([0.0, 0.0], 0.1), src.f([0.0, 0.0], 0.3));
        let e = truncate_source(&src, 0.1, 1.0).unwrap_err();
        assert!(matches!(e, Error::Domain(_)));
        assert!(e.to_string().contains("f("));
    }

    fn sqrt_signomial() -> Signomial {
        Signomial {
            a: vec![constant(1.0)],
            q: vec![constant(0.5)],
            b: vec![constant(1.0)],
            r: vec![constant(1.5)],
            c: constant(0.0),
            alpha: 1.6,
        }
    }

    #[test]
    fn signomial_example() {
        let (b, _, _) = identity_capacity();
        let s = signomial_source(&sqrt_signomial(), b, None, None, &pts()).unwrap();
        let x = [0.0, 0.0];
        assert!((s.source.f(x, 4.0) - (2.0 - 8.0)).abs() < 1e-12);
        // formula gives δ₀ = 1 where f vanishes; the scan moves past it
        assert!(s.delta0 > 1.0 && s.delta0 < 1.2);
        assert!(s.source.f(x, s.delta0) < 0.0);
        assert!(s.eps0 > 0.0 && s.eps0 < 1.0);
        for k in 1..100 {
            let e = k as f64 / 100.0;
            assert!(s.source.f(x, e) > 0.0);
        }
        let r = f_ratio_monotonicity(&s.source, 1.6);
        assert!(r.strictly_decreasing);
        assert!(check_hypotheses(&s.source, 300, 9).unwrap().passed());
    }

    #[test]
    fn signomial_condition_errors() {
        let (b, _, _) = identity_capacity();
        let mut bad = sqrt_signomial();
        bad.q = vec![constant(0.7)];
        let e = signomial_source(&bad, b.clone(), None, None, &pts()).unwrap_err();
        assert!(e.to_string().contains("②"));
        let mut bad = sqrt_signomial();
        bad.a = vec![constant(0.0)];
        let e = signomial_source(&bad, b, None, None, &pts()).unwrap_err();
        assert!(e.to_string().contains("③"));
    }

    #[test]
    fn symmetry_defect_of_sine() {
        let src = symmetric_sine(1.0, 1.0, None, &pts()).unwrap();
        assert!(src.symmetry_defect() < 1e-12);
        let logi = logistic(1.0, 1.0, None, &pts()).unwrap();
        assert!(logi.symmetry_defect() > 0.1);
    }
}
