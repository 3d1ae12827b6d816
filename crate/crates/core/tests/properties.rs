//! Randomized invariants across module boundaries.

use dnp_core::energy::{assemble_energy_gradient, energy, Load};
use dnp_core::harness::{validate_str, Experiment};
use dnp_core::mesh::{build_mesh, DiscreteField, MeshSpec};
use dnp_core::solver::{apply_k, solve_auxiliary, SolveOptions};
use dnp_core::varexp::{luxemburg_norm, modular, ExponentField};
use proptest::prelude::*;

fn problem(source: &str) -> Experiment {
    validate_str(&format!(
        r#"
mode = "steady"
[mesh]
kind = "interval"
n = 12
length = 1.0
[operator]
kind = "multiphase"
weights = ["1", "0.5 + 0.5*x"]
exponents = ["2", "2.2 + 0.6*x"]
[source]
{source}
"#
    ))
    .unwrap()
}

fn allee() -> Experiment {
    problem("kind = \"allee\"\nthreshold = 0.3")
}

fn field(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn luxemburg_norm_is_homogeneous_and_normalizes(values in prop::collection::vec(-5.0..5.0f64, 25), t in -20.0..20.0f64) {
        let mesh = build_mesh(MeshSpec::Rectangle { nx: 4, ny: 4, lx: 1.0, ly: 1.0 }).unwrap();
        let p = ExponentField::from_fn(&mesh, |x| 1.2 + 2.0 * x[0] + x[1]).unwrap();
        let u = DiscreteField::new(values);
        let n = luxemburg_norm(&u, &p, &mesh).unwrap();
        prop_assume!(n > 1e-6);
        let tu = DiscreteField::new(u.values.iter().map(|v| t * v).collect());
        let nt = luxemburg_norm(&tu, &p, &mesh).unwrap();
        prop_assert!((nt - t.abs() * n).abs() <= 1e-9 * (1.0 + nt));
        let unit = DiscreteField::new(u.values.iter().map(|v| v / n).collect());
        prop_assert!((modular(&unit, &p, &mesh).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn energy_is_midpoint_convex(v in field(13), w in field(13), eps in 0.0..1e-2f64) {
        let exp = allee();
        let m = &exp.model;
        let lambda = m.src.lambda0();
        let mid = DiscreteField::new(v.iter().zip(&w).map(|(a, b)| 0.5 * (a + b)).collect());
        let e = |u: &DiscreteField| energy(m, Load::Source, lambda, eps, u).unwrap().value;
        let (v, w) = (DiscreteField::new(v), DiscreteField::new(w));
        prop_assert!(e(&mid) <= 0.5 * (e(&v) + e(&w)) + 1e-12);
    }

    #[test]
    fn gradient_matches_directional_difference(v in field(13), d in prop::collection::vec(-1.0..1.0f64, 13)) {
        let exp = allee();
        let m = &exp.model;
        let lambda = 2.0 * m.src.lambda0();
        let v = DiscreteField::new(v);
        let (_, g) = assemble_energy_gradient(m, Load::Source, lambda, 1e-3, &v).unwrap();
        let along = |t: f64| {
            let u = DiscreteField::new(v.values.iter().zip(&d).map(|(a, b)| a + t * b).collect());
            energy(m, Load::Source, lambda, 1e-3, &u).unwrap().value
        };
        let h = 1e-5;
        let fd = (along(h) - along(-h)) / (2.0 * h);
        let exact: f64 = g.values.iter().zip(&d).map(|(a, b)| a * b).sum();
        prop_assert!((fd - exact).abs() <= 1e-5 * (1.0 + exact.abs()), "{} vs {}", fd, exact);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn k_is_order_preserving(u in field(13), bump in field(13)) {
        let exp = allee();
        let m = &exp.model;
        let opts = SolveOptions::default();
        let w = DiscreteField::new(u.iter().zip(&bump).map(|(a, b)| a + (1.0 - a) * b).collect());
        let u = DiscreteField::new(u);
        let ku = apply_k(m, m.src.lambda0(), &u, &opts).unwrap();
        let kw = apply_k(m, m.src.lambda0(), &w, &opts).unwrap();
        for (a, b) in ku.values.iter().zip(&kw.values) {
            prop_assert!(*a <= b + 1e-9, "{} > {}", a, b);
        }
    }

    #[test]
    fn larger_data_gives_larger_minimizer(levels in field(13), bump in field(13)) {
        let exp = problem("kind = \"logistic\"\nrate = 1.5");
        let m = &exp.model;
        let lambda = 1.3 * m.src.lambda0();
        let opts = SolveOptions::default();
        let g1 = DiscreteField::new(levels.iter().map(|s| lambda * s).collect());
        let g2 = DiscreteField::new(levels.iter().zip(&bump).map(|(s, b)| lambda * (s + (1.0 - s) * b)).collect());
        let v1 = solve_auxiliary(m, lambda, &g1, None, &opts).unwrap().minimizer;
        let v2 = solve_auxiliary(m, lambda, &g2, None, &opts).unwrap().minimizer;
        for (a, b) in v1.values.iter().zip(&v2.values) {
            prop_assert!(*a <= b + 1e-9);
            prop_assert!(*a >= -1e-8 && *b <= 1.0 + 1e-8);
        }
    }
}

#[test]
fn constant_data_gives_constant_minimizer() {
    // with b(s) = s and g ≡ λc the minimizer is the constant c
    let exp = problem("kind = \"logistic\"");
    let m = &exp.model;
    let lambda = 2.0;
    let g = DiscreteField::constant(&m.mesh, lambda * 0.37);
    let v = solve_auxiliary(m, lambda, &g, None, &SolveOptions::default()).unwrap().minimizer;
    assert!(v.values.iter().all(|x| (x - 0.37).abs() < 1e-9), "{:?}", v.values);
}
