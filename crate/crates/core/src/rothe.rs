//! Rothe time stepping for `∂b(x,u)/∂t − div a(x,∇u) = f(x,u)`.
//!
//! One step with time step τ solves
//! `−div a(x,∇v) + b(x,v)/τ = f(x,u_k) + b(x,u_k)/τ`, i.e. `v = 𝒦_{1/τ}(u_k)`.
//! This needs `1/τ ≥ λ₀`.

use serde::Serialize;

use crate::energy::Model;
use crate::error::{Error, Result};
use crate::mesh::DiscreteField;
use crate::solver::{apply_k_report, SolveOptions, SolveReport};

fn lambda_for(model: &Model, tau: f64) -> Result<f64> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::Domain(format!("time step τ = {tau} must be positive")));
    }
    let lambda = 1.0 / tau;
    let l0 = model.src.lambda0();
    if lambda < l0 * (1.0 - 1e-12) {
        return Err(Error::Domain(format!(
            "1/τ = {lambda} is below λ₀ = {l0}; the step needs λ ≥ λ₀, so take τ ≤ {}",
            1.0 / l0
        )));
    }
    Ok(lambda)
}

/// `u_{k+1} = 𝒦_{1/τ}(u_k)` with the full solver report.
pub fn rothe_step_report(model: &Model, tau: f64, u: &DiscreteField, opts: &SolveOptions) -> Result<SolveReport> {
    let lambda = lambda_for(model, tau)?;
    apply_k_report(model, lambda, u, opts)
}

pub fn rothe_step(model: &Model, tau: f64, u: &DiscreteField, opts: &SolveOptions) -> Result<DiscreteField> {
    Ok(rothe_step_report(model, tau, u, opts)?.minimizer)
}

#[derive(Debug, Clone, Serialize)]
pub struct StepSummary {
    pub newton_iters: usize,
    pub grad_norm: f64,
    pub bound_violation: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub tau: f64,
    pub times: Vec<f64>,
    #[serde(skip)]
    pub states: Vec<DiscreteField>,
    pub step_reports: Vec<StepSummary>,
}

impl Trajectory {
    pub fn max_bound_violation(&self) -> f64 {
        self.step_reports.iter().map(|s| s.bound_violation).fold(0.0, f64::max)
    }

    /// `sup |u_k − w|` for every state.
    pub fn distances_to(&self, w: &DiscreteField) -> Vec<f64> {
        self.states.iter().map(|u| u.sup_distance(w)).collect()
    }

    /// Largest nodal excess of `self` over `upper`, over all common steps;
    /// zero when the order `self ≤ upper` holds throughout.
    pub fn order_defect(&self, upper: &Trajectory) -> f64 {
        self.states
            .iter()
            .zip(&upper.states)
            .flat_map(|(a, b)| a.values.iter().zip(&b.values).map(|(x, y)| x - y))
            .fold(0.0, f64::max)
    }

    pub fn last(&self) -> &DiscreteField {
        self.states.last().expect("a trajectory holds its initial state")
    }
}

/// `n_steps` Rothe steps from `u0`.
pub fn rothe_evolve(
    model: &Model,
    u0: &DiscreteField,
    tau: f64,
    n_steps: usize,
    opts: &SolveOptions,
) -> Result<Trajectory> {
    lambda_for(model, tau)?;
    u0.check_mesh(&model.mesh)?;
    let mut traj = Trajectory {
        tau,
        times: vec![0.0],
        states: vec![u0.clone()],
        step_reports: Vec::with_capacity(n_steps),
    };
    let mut u = u0.clone();
    for k in 1..=n_steps {
        let r = rothe_step_report(model, tau, &u, opts)?;
        traj.step_reports.push(StepSummary {
            newton_iters: r.newton_iters,
            grad_norm: r.grad_norm,
            bound_violation: r.bound_violation,
            energy: r.energy,
        });
        u = r.minimizer;
        traj.times.push(k as f64 * tau);
        traj.states.push(u.clone());
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::{multiphase_operator, sample_points};
    use crate::mesh::{build_mesh, MeshSpec};
    use crate::sources::logistic;
    use crate::constant;

    fn model() -> Model {
        let mesh = build_mesh(MeshSpec::Interval { n: 8, length: 1.0 }).unwrap();
        let op = multiphase_operator(&mesh, vec![constant(1.0)], vec![constant(2.0)]).unwrap();
        let src = logistic(1.0, 1.0, None, &sample_points(&mesh)).unwrap();
        Model::new(mesh, op, src).unwrap()
    }

    #[test]
    fn scalar_recursion() {
        let m = model();
        let u0 = DiscreteField::constant(&m.mesh, 0.1);
        let t = rothe_evolve(&m, &u0, 0.1, 20, &SolveOptions::default()).unwrap();
        let mut c = 0.1;
        for u in &t.states {
            assert!(u.values.iter().all(|v| (v - c).abs() < 1e-8));
            c += 0.1 * c * (1.0 - c);
        }
        assert_eq!(t.times.len(), 21);
        assert!((t.times[20] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_stays_zero_and_large_steps_rejected() {
        let m = model();
        let z = DiscreteField::constant(&m.mesh, 0.0);
        let t = rothe_evolve(&m, &z, 0.5, 5, &SolveOptions::default()).unwrap();
        assert!(t.states.iter().all(|u| u.max().abs() < 1e-12));
        let e = rothe_step(&m, 2.0, &z, &SolveOptions::default()).unwrap_err();
        assert!(matches!(e, Error::Domain(_)));
        assert!(e.to_string().contains("λ₀"));
    }
}
