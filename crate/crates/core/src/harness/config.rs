//! Experiment configuration files and their translation into a [`Model`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::energy::Model;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::flux::{maxform_operator, multiphase_operator, sample_points, FluxOperator};
use crate::mesh::{build_mesh, DiscreteField, Mesh, MeshSpec};
use crate::solver::SolveOptions;
use crate::sources::{
    allee, logistic, make_source, signomial_source, symmetric_sine, tabulated, truncate_source, Signomial,
    SourceSystem,
};
use crate::steady::IterateOptions;
use crate::{Coefficient, Pointwise};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Steady,
    BandSteady,
    GammaStudy,
    Rothe,
    PropertySuite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorConfig {
    Multiphase {
        weights: Vec<String>,
        exponents: Vec<String>,
    },
    Maxform {
        h: String,
        a: String,
        a_tilde: String,
        p: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceConfig {
    Logistic {
        #[serde(default = "one")]
        rate: f64,
        #[serde(default = "one")]
        delta0: f64,
        lambda0: Option<f64>,
        alpha: Option<f64>,
    },
    Allee {
        threshold: f64,
        #[serde(default = "one")]
        delta0: f64,
        lambda0: Option<f64>,
        alpha: Option<f64>,
    },
    Symmetric {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        delta0: f64,
        lambda0: Option<f64>,
        alpha: Option<f64>,
    },
    Custom {
        f: String,
        #[serde(default = "identity")]
        b: String,
        delta0: f64,
        lambda0: Option<f64>,
        alpha: Option<f64>,
    },
    Table {
        values: Vec<f64>,
        #[serde(default = "one")]
        delta0: f64,
        lambda0: Option<f64>,
        alpha: Option<f64>,
    },
    Signomial {
        a: Vec<String>,
        q: Vec<String>,
        b_coef: Vec<String>,
        r: Vec<String>,
        #[serde(default = "zero_expr")]
        c: String,
        alpha: f64,
        #[serde(default = "identity")]
        b: String,
        delta0: Option<f64>,
        lambda0: Option<f64>,
    },
}

fn one() -> f64 {
    1.0
}

fn identity() -> String {
    "s".into()
}

fn zero_expr() -> String {
    "0".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandConfig {
    pub eps: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SteadyConfig {
    pub tol: f64,
    pub max_iters: usize,
    /// Number of random-start 𝒦-iterations used as independent solutions.
    pub random_starts: usize,
    /// Sup-norm tolerance for sandwich and coincidence checks.
    pub agree_tol: f64,
    /// Threshold on the normalized weak-form residual of accepted states.
    pub residual_tol: f64,
    /// Also verify δ₀ − U for every accepted state (symmetric sources).
    pub check_reflection: bool,
}

impl Default for SteadyConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 10_000,
            random_starts: 0,
            agree_tol: 1e-6,
            residual_tol: 1e-6,
            check_reflection: false,
        }
    }
}

impl SteadyConfig {
    pub fn iterate_options(&self) -> IterateOptions {
        IterateOptions {
            tol: self.tol,
            max_iters: self.max_iters,
            ..IterateOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaConfig {
    pub eps: Vec<f64>,
    #[serde(default = "half")]
    pub g_level: f64,
    pub lambda: Option<f64>,
    /// Wall-clock budget per solve in seconds.
    #[serde(default = "ten")]
    pub time_limit: f64,
}

fn half() -> f64 {
    0.5
}

fn ten() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotheConfig {
    pub tau: f64,
    pub steps: usize,
    /// Initial datum as an expression in x, y.
    pub u0: String,
    /// A second initial datum above `u0`; the trajectories must stay ordered.
    pub u0_upper: Option<String>,
    /// Steps to run from the maximal steady state (0 disables the check).
    #[serde(default)]
    pub steady_steps: usize,
    #[serde(default = "drift")]
    pub drift_tol: f64,
    #[serde(default = "drift")]
    pub recursion_tol: f64,
}

fn drift() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub trials: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self { trials: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: Option<String>,
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    pub mesh: MeshSpec,
    pub operator: OperatorConfig,
    pub source: SourceConfig,
    pub band: Option<BandConfig>,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default)]
    pub steady: SteadyConfig,
    pub gamma: Option<GammaConfig>,
    pub rothe: Option<RotheConfig>,
    #[serde(default)]
    pub suite: SuiteConfig,
    /// Output directory, used when the command line gives none.
    pub out: Option<String>,
}

/// A validated configuration with everything built.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub name: String,
    /// The model on `[0, δ₀]`, or on the band for `band_steady`.
    pub model: Model,
    /// ε₀ of a signomial source.
    pub eps0: Option<f64>,
}

fn parse(field: &str, text: &str) -> Result<Expr> {
    Expr::parse(text).map_err(|e| Error::Config(format!("{field}: {e}")))
}

fn coef(field: &str, text: &str) -> Result<Coefficient> {
    parse(field, text)?
        .into_coefficient()
        .map_err(|e| Error::Config(format!("{field}: {e}")))
}

fn coefs(field: &str, list: &[String]) -> Result<Vec<Coefficient>> {
    list.iter()
        .enumerate()
        .map(|(k, t)| coef(&format!("{field}[{k}]"), t))
        .collect()
}

fn pointwise(field: &str, text: &str) -> Result<Pointwise> {
    Ok(parse(field, text)?.into_pointwise())
}

fn semantic(field: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Config(m) => Error::Config(m),
        other => Error::Config(format!("{field}: {other}")),
    }
}

fn check_finite(config: &ExperimentConfig) -> Result<()> {
    let json = serde_json::to_value(config).map_err(|e| Error::Config(e.to_string()))?;
    fn walk(v: &serde_json::Value, path: &str) -> Result<()> {
        match v {
            serde_json::Value::Number(n) => {
                if n.as_f64().is_some_and(|f| !f.is_finite()) {
                    return Err(Error::Config(format!("{path}: value must be finite")));
                }
                Ok(())
            }
            serde_json::Value::Null => Err(Error::Config(format!("{path}: value must be finite"))),
            serde_json::Value::Array(a) => a
                .iter()
                .enumerate()
                .try_for_each(|(k, x)| walk(x, &format!("{path}[{k}]"))),
            serde_json::Value::Object(o) => o.iter().try_for_each(|(k, x)| {
                // optional fields serialize as null
                if x.is_null() {
                    Ok(())
                } else {
                    walk(x, &if path.is_empty() { k.clone() } else { format!("{path}.{k}") })
                }
            }),
            _ => Ok(()),
        }
    }
    walk(&json, "")
}

pub fn build_operator(mesh: &Mesh, cfg: &OperatorConfig) -> Result<FluxOperator> {
    match cfg {
        OperatorConfig::Multiphase { weights, exponents } => multiphase_operator(
            mesh,
            coefs("operator.weights", weights)?,
            coefs("operator.exponents", exponents)?,
        )
        .map_err(semantic("operator")),
        OperatorConfig::Maxform { h, a, a_tilde, p } => maxform_operator(
            mesh,
            pointwise("operator.h", h)?,
            pointwise("operator.a", a)?,
            coef("operator.a_tilde", a_tilde)?,
            coef("operator.p", p)?,
        )
        .map_err(semantic("operator")),
    }
}

/// Builds the source; the second value is ε₀ for signomial sources.
pub fn build_source(mesh: &Mesh, cfg: &SourceConfig) -> Result<(SourceSystem, Option<f64>)> {
    let samples = sample_points(mesh);
    let s = &samples;
    let with_alpha = |src: SourceSystem, alpha: &Option<f64>| match alpha {
        Some(a) => src.with_alpha(*a),
        None => Ok(src),
    };
    let built = match cfg {
        SourceConfig::Logistic { rate, delta0, lambda0, alpha } => {
            logistic(*rate, *delta0, *lambda0, s).and_then(|x| with_alpha(x, alpha))
        }
        SourceConfig::Allee { threshold, delta0, lambda0, alpha } => {
            allee(*threshold, *delta0, *lambda0, s).and_then(|x| with_alpha(x, alpha))
        }
        SourceConfig::Symmetric { amplitude, delta0, lambda0, alpha } => {
            symmetric_sine(*amplitude, *delta0, *lambda0, s).and_then(|x| with_alpha(x, alpha))
        }
        SourceConfig::Table { values, delta0, lambda0, alpha } => {
            tabulated(values.clone(), *delta0, *lambda0, s).and_then(|x| with_alpha(x, alpha))
        }
        SourceConfig::Custom { f, b, delta0, lambda0, alpha } => {
            let fe = parse("source.f", f)?;
            let be = parse("source.b", b)?;
            let independent = !(fe.uses("x") || fe.uses("y") || be.uses("x") || be.uses("y"));
            make_source("custom", fe.into_pointwise(), be.into_pointwise(), *delta0, *lambda0, s)
                .map(|x| x.with_x_independent(independent))
                .and_then(|x| with_alpha(x, alpha))
        }
        SourceConfig::Signomial { a, q, b_coef, r, c, alpha, b, delta0, lambda0 } => {
            let sig = Signomial {
                a: coefs("source.a", a)?,
                q: coefs("source.q", q)?,
                b: coefs("source.b_coef", b_coef)?,
                r: coefs("source.r", r)?,
                c: coef("source.c", c)?,
                alpha: *alpha,
            };
            let out = signomial_source(&sig, pointwise("source.b", b)?, *delta0, *lambda0, s)
                .map_err(semantic("source"))?;
            return Ok((out.source, Some(out.eps0)));
        }
    };
    Ok((built.map_err(semantic("source"))?, None))
}

/// Evaluates an initial datum expression at the nodes.
pub fn field_from_expr(mesh: &Mesh, field: &str, text: &str) -> Result<DiscreteField> {
    let c = coef(field, text)?;
    Ok(DiscreteField::from_fn(mesh, |x| c(x)))
}

/// Parses and fully validates a configuration string, building the mesh,
/// operator and source and running the eager cross-checks.
pub fn validate_str(text: &str) -> Result<Experiment> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    validate(config)
}

pub fn validate(config: ExperimentConfig) -> Result<Experiment> {
    check_finite(&config)?;
    let mesh = build_mesh(config.mesh).map_err(semantic("mesh"))?;
    let op = build_operator(&mesh, &config.operator)?;
    let (src, eps0) = build_source(&mesh, &config.source)?;
    let mut model = Model::new(mesh, op, src).map_err(semantic("operator"))?;
    config.suite.trials.checked_sub(1).ok_or_else(|| Error::Config("suite.trials must be at least 1".into()))?;
    let name = config.name.clone().unwrap_or_else(|| format!("{:?}", config.mode).to_lowercase());

    match config.mode {
        Mode::BandSteady => {
            let band = match (config.band, eps0) {
                (Some(b), _) => b,
                (None, Some(e)) => BandConfig { eps: e, delta: model.src.delta0() },
                (None, None) => {
                    return Err(Error::Config("band_steady mode needs a [band] section".into()))
                }
            };
            let src = truncate_source(&model.src, band.eps, band.delta).map_err(semantic("band"))?;
            model = model.with_source(src);
        }
        Mode::GammaStudy => {
            let g = config
                .gamma
                .as_ref()
                .ok_or_else(|| Error::Config("gamma_study mode needs a [gamma] section".into()))?;
            let lambda = g.lambda.unwrap_or(model.src.lambda0());
            model.src.g_lambda(lambda, [0.0, 0.0], 0.0).map_err(semantic("gamma.lambda"))?;
            if !(0.0..=model.src.delta0()).contains(&g.g_level) {
                return Err(Error::Config(format!(
                    "gamma.g_level = {} must lie in [0, δ₀]",
                    g.g_level
                )));
            }
            if g.eps.is_empty() || g.eps.iter().any(|e| *e <= 0.0) || g.eps.windows(2).any(|w| w[1] >= w[0]) {
                return Err(Error::Config("gamma.eps must be positive and strictly decreasing".into()));
            }
        }
        Mode::Rothe => {
            let r = config
                .rothe
                .as_ref()
                .ok_or_else(|| Error::Config("rothe mode needs a [rothe] section".into()))?;
            if !(r.tau > 0.0) {
                return Err(Error::Config(format!("rothe.tau = {} must be positive", r.tau)));
            }
            let l0 = model.src.lambda0();
            if 1.0 / r.tau < l0 {
                return Err(Error::Config(format!(
                    "rothe.tau: 1/τ = {} < λ₀ = {l0}; each step needs λ = 1/τ ≥ λ₀ so that g_λ(·, u) stays in M_λ",
                    1.0 / r.tau
                )));
            }
            for (field, text) in std::iter::once(("rothe.u0", &r.u0)).chain(r.u0_upper.iter().map(|t| ("rothe.u0_upper", t))) {
                let u = field_from_expr(&model.mesh, field, text)?;
                let v = u.band_violation(0.0, model.src.delta0());
                if v > config.solver.bound_tol {
                    return Err(Error::Config(format!("{field}: initial datum leaves [0, δ₀] by {v:e}")));
                }
            }
        }
        Mode::Steady | Mode::PropertySuite => {
            if let Some(b) = config.band {
                let src = truncate_source(&model.src, b.eps, b.delta).map_err(semantic("band"))?;
                model = model.with_source(src);
            }
        }
    }
    Ok(Experiment { config, name, model, eps0 })
}

pub fn validate_config(path: &Path) -> Result<Experiment> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    validate_str(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
mode = "steady"
[mesh]
kind = "interval"
n = 16
length = 1.0
[operator]
kind = "multiphase"
weights = ["1"]
exponents = ["2"]
[source]
kind = "logistic"
"#;

    #[test]
    fn minimal_steady_config() {
        let e = validate_str(MINIMAL).unwrap();
        assert_eq!(e.config.mode, Mode::Steady);
        assert_eq!(e.model.node_count(), 17);
        assert_eq!(e.name, "steady");
    }

    #[test]
    fn allee_band_rejected() {
        let text = MINIMAL
            .replace("mode = \"steady\"", "mode = \"band_steady\"")
            .replace("kind = \"logistic\"", "kind = \"allee\"\nthreshold = 0.25\n[band]\neps = 0.1\ndelta = 1.0");
        let err = validate_str(&text).unwrap_err().to_string();
        assert!(err.contains("f(") && err.contains("0.1"), "{err}");
    }

    #[test]
    fn large_time_step_rejected() {
        let text = MINIMAL.replace("mode = \"steady\"", "mode = \"rothe\"")
            + "[rothe]\ntau = 2.0\nsteps = 3\nu0 = \"0.5\"\n";
        let err = validate_str(&text).unwrap_err().to_string();
        assert!(err.contains("1/τ ≥ λ₀"), "{err}");
    }

    #[test]
    fn parse_errors_have_locations() {
        let err = validate_str("mode = \"steady\"\n[mesh\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        let err = validate_str(&MINIMAL.replace("exponents = [\"2\"]", "exponents = [\"2 +\"]"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("operator.exponents[0]") && err.contains("column"), "{err}");
        let err = validate_str(&MINIMAL.replace("n = 16", "n = 16\nbogus = 1")).unwrap_err().to_string();
        assert!(err.contains("bogus"), "{err}");
    }

    #[test]
    fn hypothesis_failures_are_named() {
        let text = MINIMAL.replace("kind = \"logistic\"", "kind = \"custom\"\nf = \"s + 0.1\"\ndelta0 = 1.0");
        let err = validate_str(&text).unwrap_err().to_string();
        assert!(err.contains("(H8) fails at s=δ₀"), "{err}");
    }

    #[test]
    fn custom_source_detects_x_dependence() {
        let t = MINIMAL.replace("kind = \"logistic\"", "kind = \"custom\"\nf = \"0.25 - s\"\ndelta0 = 1.0");
        assert!(validate_str(&t).unwrap().model.src.x_independent());
        let t = MINIMAL.replace("kind = \"logistic\"", "kind = \"custom\"\nf = \"(1 + x) * s * (1 - s)\"\ndelta0 = 1.0");
        assert!(!validate_str(&t).unwrap().model.src.x_independent());
    }
}
