//! Discrete energies and their exact nodal gradients.
//!
//! ```text
//!   J_{λ,ε}(V) = Σ_e |e| A(x_e, ∇V_e) + Σ_i m_i [λ B̄(x_i,V_i) + ε |V_i|^{p_i}/p_i − L_i(V_i)]
//! ```
//!
//! where `L_i(V_i) = g_i V_i` for a data right side and `F̄(x_i, V_i)` for the
//! source itself. Zero-flux boundary conditions are natural: there is no
//! boundary term.

use crate::banded::SymBanded;
use crate::error::{check_len, Error, Result};
use crate::flux::FluxOperator;
use crate::mesh::{DiscreteField, Mesh};
use crate::sources::SourceSystem;
use crate::varexp::ExponentField;

/// Everything that defines a discrete problem apart from the right side.
#[derive(Debug, Clone)]
pub struct Model {
    pub mesh: Mesh,
    pub op: FluxOperator,
    pub p: ExponentField,
    pub src: SourceSystem,
}

impl Model {
    /// Samples the operator's growth exponent at the nodes for the ε-term.
    pub fn new(mesh: Mesh, op: FluxOperator, src: SourceSystem) -> Result<Self> {
        let exponent = op.exponent().clone();
        let p = ExponentField::from_fn(&mesh, |x| exponent(x))?;
        Ok(Self { mesh, op, p, src })
    }

    pub fn with_exponent(mut self, p: ExponentField) -> Result<Self> {
        p.check_mesh(&self.mesh)?;
        self.p = p;
        Ok(self)
    }

    pub fn with_source(&self, src: SourceSystem) -> Self {
        Self {
            mesh: self.mesh.clone(),
            op: self.op.clone(),
            p: self.p.clone(),
            src,
        }
    }

    pub fn node_count(&self) -> usize {
        self.mesh.node_count()
    }
}

/// The linear term of the energy.
#[derive(Debug, Clone, Copy)]
pub enum Load<'a> {
    /// `∫ g V` for nodal data `g`.
    Data(&'a DiscreteField),
    /// `∫ F̄(x, V)`, the unconstrained energy.
    Source,
}

/// Energy split by term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Energy {
    pub flux: f64,
    pub capacity: f64,
    pub perturbation: f64,
    pub load: f64,
    pub value: f64,
}

fn check_inputs(model: &Model, load: Load<'_>, lambda: f64, eps: f64, v: &DiscreteField) -> Result<()> {
    v.check_mesh(&model.mesh)?;
    if let Load::Data(g) = load {
        check_len("right side", model.node_count(), g.len())?;
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::Domain(format!("λ = {lambda} must be finite and nonnegative")));
    }
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::Domain(format!("ε = {eps} must be finite and nonnegative")));
    }
    Ok(())
}

fn signed_power(v: f64, p: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v.signum() * v.abs().powf(p - 1.0)
    }
}

pub fn energy(model: &Model, load: Load<'_>, lambda: f64, eps: f64, v: &DiscreteField) -> Result<Energy> {
    check_inputs(model, load, lambda, eps, v)?;
    let mesh = &model.mesh;
    let vals = v.as_slice();
    let mut flux = 0.0;
    for e in mesh.elements() {
        let g = mesh.element_gradient(e, vals);
        flux += e.measure * model.op.potential_checked(e.centroid, g[0].hypot(g[1]))?;
    }
    let (mut capacity, mut perturbation, mut linear) = (0.0, 0.0, 0.0);
    let pv = model.p.values();
    for (i, (&x, &m)) in mesh.nodes().iter().zip(mesh.lumped_mass()).enumerate() {
        let s = vals[i];
        if lambda != 0.0 {
            capacity += m * model.src.big_b_bar(x, s)?;
        }
        if eps != 0.0 {
            perturbation += m * s.abs().powf(pv[i]) / pv[i];
        }
        linear += m * match load {
            Load::Data(g) => g.values[i] * s,
            Load::Source => model.src.big_f_bar(x, s)?,
        };
    }
    let (capacity, perturbation) = (lambda * capacity, eps * perturbation);
    let value = flux + capacity + perturbation - linear;
    if !value.is_finite() {
        return Err(Error::Numeric(format!("energy is not finite ({value})")));
    }
    Ok(Energy {
        flux,
        capacity,
        perturbation,
        load: linear,
        value,
    })
}

/// Flux part `Σ_e |e| a(x_e, ∇V_e)·∇φ_i` of the gradient.
pub fn flux_residual(model: &Model, v: &DiscreteField) -> Result<DiscreteField> {
    v.check_mesh(&model.mesh)?;
    let mesh = &model.mesh;
    let vals = v.as_slice();
    let mut out = vec![0.0; mesh.node_count()];
    for e in mesh.elements() {
        let g = mesh.element_gradient(e, vals);
        let a = model.op.flux(e.centroid, g);
        for (k, &n) in mesh.local_nodes(e).iter().enumerate() {
            let d = e.basis_grads[k];
            out[n] += e.measure * (a[0] * d[0] + a[1] * d[1]);
        }
    }
    Ok(DiscreteField::new(out))
}

/// Energy and its exact gradient with respect to the nodal values.
pub fn assemble_energy_gradient(
    model: &Model,
    load: Load<'_>,
    lambda: f64,
    eps: f64,
    v: &DiscreteField,
) -> Result<(f64, DiscreteField)> {
    let e = energy(model, load, lambda, eps, v)?;
    let mut grad = flux_residual(model, v)?;
    let mesh = &model.mesh;
    let pv = model.p.values();
    for (i, (&x, &m)) in mesh.nodes().iter().zip(mesh.lumped_mass()).enumerate() {
        let s = v.values[i];
        let mut r = lambda * model.src.b_bar(x, s) + eps * signed_power(s, pv[i]);
        r -= match load {
            Load::Data(g) => g.values[i],
            Load::Source => model.src.f_bar(x, s),
        };
        grad.values[i] += m * r;
    }
    if !grad.all_finite() {
        return Err(Error::Numeric("gradient is not finite".into()));
    }
    Ok((e.value, grad))
}

/// Floor applied to |V| in the Hessian of the ε-term when p < 2.
pub const PERTURBATION_FLOOR: f64 = 1e-8;

/// Hessian of the energy in banded form.
pub fn assemble_hessian(
    model: &Model,
    load: Load<'_>,
    lambda: f64,
    eps: f64,
    v: &DiscreteField,
) -> Result<SymBanded> {
    check_inputs(model, load, lambda, eps, v)?;
    let mesh = &model.mesh;
    let vals = v.as_slice();
    let mut h = SymBanded::zeros(mesh.node_count(), mesh.bandwidth());
    for e in mesh.elements() {
        let g = mesh.element_gradient(e, vals);
        let d = model.op.flux_jacobian(e.centroid, g);
        let local = mesh.local_nodes(e);
        for (a, &na) in local.iter().enumerate() {
            let ga = e.basis_grads[a];
            let dga = [d[0][0] * ga[0] + d[0][1] * ga[1], d[1][0] * ga[0] + d[1][1] * ga[1]];
            for (b, &nb) in local.iter().enumerate().take(a + 1) {
                let gb = e.basis_grads[b];
                h.add(na, nb, e.measure * (dga[0] * gb[0] + dga[1] * gb[1]))?;
            }
        }
    }
    let pv = model.p.values();
    for (i, (&x, &m)) in mesh.nodes().iter().zip(mesh.lumped_mass()).enumerate() {
        let s = vals[i];
        let mut diag = lambda * model.src.db_bar(x, s);
        if eps != 0.0 {
            let p = pv[i];
            let base = if p < 2.0 { s.abs().max(PERTURBATION_FLOOR) } else { s.abs() };
            diag += eps * (p - 1.0) * base.powf(p - 2.0);
        }
        if let Load::Source = load {
            let hh = 1e-7 * s.abs().max(1.0);
            diag -= (model.src.f_bar(x, s + hh) - model.src.f_bar(x, s - hh)) / (2.0 * hh);
        }
        h.add(i, i, m * diag)?;
    }
    Ok(h)
}

/// Lower bound `−λδ₀∫(b(·,δ₀) − b(·,0)) − (λ/2)∫(b(·,δ₀) − b(·,0))²` of
/// `J_λ` over all V when the data lie in `M_λ`.
pub fn energy_lower_bound(model: &Model, lambda: f64) -> f64 {
    let d = model.src.delta0();
    model
        .mesh
        .nodes()
        .iter()
        .zip(model.mesh.lumped_mass())
        .map(|(&x, &m)| {
            let span = model.src.b(x, d) - model.src.b(x, 0.0);
            m * (-lambda * d * span - 0.5 * lambda * span * span)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::{multiphase_operator, sample_points};
    use crate::mesh::{build_mesh, MeshSpec};
    use crate::sources::logistic;
    use crate::{coefficient, constant};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(spec: MeshSpec) -> Model {
        let mesh = build_mesh(spec).unwrap();
        let op = multiphase_operator(
            &mesh,
            vec![constant(1.0), constant(0.5)],
            vec![constant(2.0), coefficient(|x| 2.5 + 0.4 * (std::f64::consts::TAU * x[0]).sin())],
        )
        .unwrap();
        let src = logistic(1.0, 1.0, None, &sample_points(&mesh)).unwrap();
        Model::new(mesh, op, src).unwrap()
    }

    fn laplace_model() -> Model {
        let mesh = build_mesh(MeshSpec::Interval { n: 8, length: 1.0 }).unwrap();
        let op = multiphase_operator(&mesh, vec![constant(1.0)], vec![constant(2.0)]).unwrap();
        let src = logistic(1.0, 1.0, None, &sample_points(&mesh)).unwrap();
        Model::new(mesh, op, src).unwrap()
    }

    #[test]
    fn constant_solves_auxiliary_problem() {
        let m = laplace_model();
        let v = DiscreteField::constant(&m.mesh, 0.4);
        let g = DiscreteField::constant(&m.mesh, 0.4 * 1.3);
        let (_, grad) = assemble_energy_gradient(&m, Load::Data(&g), 1.3, 0.0, &v).unwrap();
        assert!(grad.values.iter().all(|c| c.abs() < 1e-15));
    }

    #[test]
    fn zero_field_zero_energy_in_source_mode() {
        let m = laplace_model();
        let v = DiscreteField::constant(&m.mesh, 0.0);
        let e = energy(&m, Load::Source, 0.0, 0.0, &v).unwrap();
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn rejects_negative_parameters_and_shapes() {
        let m = laplace_model();
        let v = DiscreteField::constant(&m.mesh, 0.0);
        assert!(matches!(energy(&m, Load::Source, -1.0, 0.0, &v), Err(Error::Domain(_))));
        assert!(matches!(energy(&m, Load::Source, 0.0, -1.0, &v), Err(Error::Domain(_))));
        let short = DiscreteField::new(vec![0.0; 3]);
        assert!(matches!(energy(&m, Load::Source, 0.0, 0.0, &short), Err(Error::Shape { .. })));
        assert!(matches!(energy(&m, Load::Data(&short), 0.0, 0.0, &v), Err(Error::Shape { .. })));
    }

    fn fd_check(m: &Model, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = m.node_count();
        let v = DiscreteField::new((0..n).map(|_| rng.gen_range(-0.5..1.5)).collect());
        let g = DiscreteField::new((0..n).map(|_| rng.gen_range(0.0..1.0)).collect());
        let dir: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for load in [Load::Data(&g), Load::Source] {
            let (_, grad) = assemble_energy_gradient(m, load, 1.2, 0.01, &v).unwrap();
            let h = 1e-6;
            let shift = |t: f64| DiscreteField::new(v.values.iter().zip(&dir).map(|(a, d)| a + t * d).collect());
            let ep = energy(m, load, 1.2, 0.01, &shift(h)).unwrap().value;
            let em = energy(m, load, 1.2, 0.01, &shift(-h)).unwrap().value;
            let fd = (ep - em) / (2.0 * h);
            let an: f64 = grad.values.iter().zip(&dir).map(|(a, d)| a * d).sum();
            assert!((fd - an).abs() < 1e-5 * an.abs().max(1e-3), "{fd} vs {an}");
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..10 {
            fd_check(&model(MeshSpec::Interval { n: 16, length: 1.0 }), seed);
            fd_check(&model(MeshSpec::Rectangle { nx: 4, ny: 4, lx: 1.0, ly: 1.0 }), seed);
        }
    }

    #[test]
    fn flux_part_sums_to_zero() {
        let m = model(MeshSpec::Rectangle { nx: 5, ny: 3, lx: 2.0, ly: 1.0 });
        let v = DiscreteField::from_fn(&m.mesh, |x| (3.0 * x[0]).sin() + x[1] * x[1]);
        let r = flux_residual(&m, &v).unwrap();
        let scale: f64 = r.values.iter().map(|c| c.abs()).sum();
        assert!(r.values.iter().sum::<f64>().abs() < 1e-13 * scale.max(1.0));
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let m = model(MeshSpec::Rectangle { nx: 3, ny: 3, lx: 1.0, ly: 1.0 });
        let n = m.node_count();
        let v = DiscreteField::from_fn(&m.mesh, |x| 0.3 + 0.4 * x[0] * x[1] + 0.1 * x[0]);
        let g = DiscreteField::constant(&m.mesh, 0.2);
        let h = assemble_hessian(&m, Load::Data(&g), 1.1, 0.01, &v).unwrap();
        let dir: Vec<f64> = (0..n).map(|i| ((i * 37 % 11) as f64 - 5.0) / 5.0).collect();
        let hv = h.mul_vec(&dir);
        let step = 1e-6;
        let shift = |t: f64| DiscreteField::new(v.values.iter().zip(&dir).map(|(a, d)| a + t * d).collect());
        let (_, gp) = assemble_energy_gradient(&m, Load::Data(&g), 1.1, 0.01, &shift(step)).unwrap();
        let (_, gm) = assemble_energy_gradient(&m, Load::Data(&g), 1.1, 0.01, &shift(-step)).unwrap();
        for i in 0..n {
            let fd = (gp.values[i] - gm.values[i]) / (2.0 * step);
            assert!((fd - hv[i]).abs() < 1e-5 * (1.0 + fd.abs()), "row {i}: {fd} vs {}", hv[i]);
        }
    }

    #[test]
    fn lower_bound_holds_for_admissible_data() {
        let m = model(MeshSpec::Interval { n: 16, length: 1.0 });
        let lambda = m.src.lambda0();
        let bound = energy_lower_bound(&m, lambda);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let g = DiscreteField::new((0..17).map(|_| rng.gen_range(0.0..lambda)).collect());
            let v = DiscreteField::new((0..17).map(|_| rng.gen_range(-3.0..4.0)).collect());
            let e = energy(&m, Load::Data(&g), lambda, 0.0, &v).unwrap().value;
            assert!(e >= bound);
        }
    }
}
