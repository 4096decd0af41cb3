use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srcopt::constraints::{linearized_oracle, OracleOptions};
use srcopt::mesh::generate_disk;
use srcopt::problems::{adjoint, cost};
use srcopt::{Coefficient, ConstraintSpec, Control, CostKind, CostSpec, Error, FemSpace, Mesh, ScalarField};

const TOL: f64 = 1e-12;

fn unit(mesh: &Mesh) -> Control {
    Control::from_density(ScalarField::constant(mesh.n_vertices(), 1.0))
}

fn cost_of(spec: &CostSpec, space: &FemSpace<'_>, f: &Control) -> f64 {
    let u = space.resolvent(f, TOL).unwrap();
    cost(spec, space, &u, f).unwrap()
}

/// Composite Simpson rule on `[a, b]`.
fn simpson(g: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = g(a) + g(b);
    for k in 1..n {
        s += g(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn tracking_cost_of_zero_source() {
    let m = generate_disk(1.0, 0.1).unwrap();
    let space = FemSpace::new(&m).unwrap();
    let spec = CostSpec::tracking(Coefficient::Const(0.1));
    let j = cost_of(&spec, &space, &Control::zero(m.n_vertices()));
    assert!((j - 0.01 * m.area()).abs() < 1e-14);
}

#[test]
fn power_cost_of_unit_source() {
    let oracle = -2.0 * PI * simpson(|r| ((1.0 - r * r) / 4.0).powi(4) * r, 0.0, 1.0, 2000);
    assert!((oracle + PI / 1280.0).abs() < 1e-14);
    let mut errors = Vec::new();
    for h in [0.05, 0.025] {
        let m = generate_disk(1.0, h).unwrap();
        let space = FemSpace::new(&m).unwrap();
        let j = cost_of(&CostSpec::power_max(4.0), &space, &unit(&m));
        errors.push((j - oracle).abs());
    }
    assert!(errors[0] < 0.02 * oracle.abs());
    assert!(errors[1] < errors[0] / 2.5, "{errors:?}");
}

#[test]
fn compliance_cost_of_unit_source() {
    let h = 0.05;
    let m = generate_disk(1.0, h).unwrap();
    let space = FemSpace::new(&m).unwrap();
    let j = cost_of(&CostSpec::compliance(), &space, &unit(&m));
    assert!((j - PI / 8.0).abs() < h * h, "{j}");
}

#[test]
fn partial_derivatives() {
    let t = CostSpec::tracking(Coefficient::Const(0.2));
    assert_eq!(t.dj_ds(0.2, 0.2, 1.0), 0.0);
    let c = CostSpec::compliance();
    assert_eq!((c.dj_ds(0.0, 0.3, 0.9), c.dj_dz(0.0, 0.3, 0.9)), (0.9, 0.3));
    let p = CostSpec::power_max(4.0);
    assert_eq!(p.dj_ds(0.0, -1.0, 0.0), 4.0);
    assert_eq!(p.dj_dz(0.0, -1.0, 0.0), 0.0);
    for kind in CostKind::ALL {
        assert_eq!(CostKind::parse(kind.name()), Some(kind));
    }
}

#[test]
fn linear_adjoint_matches_closed_form() {
    let exact = |p: [f64; 2]| (p[0] * p[0] - p[1] * p[1]) * (1.0 - p[0] * p[0] - p[1] * p[1]) / 12.0;
    let mut errors = Vec::new();
    for h in [0.05, 0.025] {
        let m = generate_disk(1.0, h).unwrap();
        let space = FemSpace::new(&m).unwrap();
        let spec = CostSpec::linear(Coefficient::SaddleX2MinusY2);
        let w = adjoint(&spec, &space, &unit(&m), TOL).unwrap();
        let e = m
            .vertices()
            .iter()
            .zip(&w.values)
            .map(|(&p, v)| (v - exact(p)).abs())
            .fold(0.0, f64::max);
        errors.push(e);
    }
    assert!(errors[0] < 0.5 * 0.05 * 0.05, "{errors:?}");
    assert!(errors[1] < errors[0] / 2.5, "{errors:?}");
}

#[test]
fn compliance_adjoint_is_twice_the_state() {
    let m = generate_disk(1.0, 0.1).unwrap();
    let space = FemSpace::new(&m).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let f = Control::from_density(ScalarField::new(
        (0..m.n_vertices()).map(|_| rng.gen_range(0.0..1.0)).collect(),
    ));
    let w = adjoint(&CostSpec::compliance(), &space, &f, TOL).unwrap();
    let u = space.resolvent(&f, TOL).unwrap();
    for (a, b) in w.values.iter().zip(&u.values) {
        assert_eq!(*a, 2.0 * b);
    }
}

#[test]
fn tracking_adjoint_vanishes_on_a_reachable_target() {
    let m = generate_disk(1.0, 0.1).unwrap();
    let space = FemSpace::new(&m).unwrap();
    let f = unit(&m);
    let target = space.resolvent(&f, TOL).unwrap();
    let spec = CostSpec::tracking(Coefficient::Field(target));
    let w = adjoint(&spec, &space, &f, TOL).unwrap();
    assert!(w.values.iter().all(|&v| v == 0.0));
}

#[test]
fn linear_duality_and_sign() {
    let m = generate_disk(1.0, 0.08).unwrap();
    let space = FemSpace::new(&m).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let g: Vec<f64> = (0..m.n_vertices()).map(|_| rng.gen_range(0.0..1.0)).collect();
    let spec = CostSpec::linear(Coefficient::Field(ScalarField::new(g.clone())));
    for _ in 0..10 {
        let f = Control::from_density(ScalarField::new(
            (0..m.n_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        ));
        let lhs = cost_of(&spec, &space, &f);
        let rg = space.solve_density(&g, TOL).unwrap();
        let rhs = space.inner(&rg, &f).unwrap();
        assert!((lhs - rhs).abs() <= 1e-8 * lhs.abs().max(rhs.abs()));
    }
    let w = adjoint(&spec, &space, &unit(&m), TOL).unwrap();
    let top = w.max();
    assert!(w.min() >= -1e-8 * top);
}

#[test]
fn mismatched_fields_are_rejected() {
    let m = generate_disk(1.0, 0.1).unwrap();
    let other = generate_disk(1.0, 0.2).unwrap();
    let space = FemSpace::new(&m).unwrap();
    let u = ScalarField::zeros(other.n_vertices());
    let f = Control::zero(m.n_vertices());
    assert!(matches!(
        cost(&CostSpec::compliance(), &space, &u, &f),
        Err(Error::Argument(_))
    ));
    let spec = CostSpec::tracking(Coefficient::Field(ScalarField::zeros(other.n_vertices())));
    assert!(adjoint(&spec, &space, &f, TOL).is_err());
}

fn specs() -> Vec<CostSpec> {
    vec![
        CostSpec::power_max(4.0),
        CostSpec::power_max(1.5),
        CostSpec::linear(Coefficient::SaddleX2MinusY2),
        CostSpec::tracking(Coefficient::Const(0.1)),
        CostSpec::compliance(),
    ]
}

/// `[J(f + εd) − J(f)]/ε − ∫ w d` for `d = f̂ − f`.
fn slope_errors(spec: &CostSpec, space: &FemSpace<'_>, f: &Control, f_hat: &Control) -> [f64; 2] {
    let w = adjoint(spec, space, f, TOL).unwrap();
    let predicted = space.inner(&w.values, f_hat).unwrap() - space.inner(&w.values, f).unwrap();
    let j0 = cost_of(spec, space, f);
    [1e-3, 1e-4].map(|eps| {
        let fe = f.blend(f_hat, eps);
        (cost_of(spec, space, &fe) - j0) / eps - predicted
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn adjoint_gradient_check(seed in any::<u64>()) {
        let m = generate_disk(1.0, 0.1).unwrap();
        let space = FemSpace::new(&m).unwrap();
        let box_spec = ConstraintSpec::box_mass(0.0, 1.0, 1.25);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.25 / m.area();
        let f = Control::from_density(ScalarField::new(
            (0..m.n_vertices()).map(|_| scale * rng.gen_range(0.2..1.0)).collect(),
        ));
        for spec in specs() {
            let w = adjoint(&spec, &space, &f, TOL).unwrap();
            let f_hat = linearized_oracle(&box_spec, &space, &w.values, OracleOptions::default()).unwrap().control;
            let [e3, e4] = slope_errors(&spec, &space, &f, &f_hat);
            let size = space.inner(&w.values, &f_hat).unwrap().abs().max(1e-6);
            if spec.kind == CostKind::Linear {
                prop_assert!(e3.abs() <= 1e-10 * size.max(1.0) && e4.abs() <= 1e-10 * size.max(1.0), "linear {e3} {e4}");
            } else if e3.abs() > 1e-9 * size {
                // first-order remainder: shrinks with ε
                let ratio = e3 / e4;
                prop_assert!((5.0..=20.0).contains(&ratio), "{:?}: {e3} {e4}", spec.kind);
            }
        }
    }
}
