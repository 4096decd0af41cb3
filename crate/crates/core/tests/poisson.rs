use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srcopt::mesh::{generate_annulus, generate_disk, generate_rectangle, norm, Point};
use srcopt::poisson::{
    assemble_full_stiffness, assemble_stiffness, gradient, integrate_cellwise, integrate_nodal, load_control,
    load_field, point_load_vector, save_control, save_field,
};
use srcopt::{Atom, Control, Error, FemSpace, Mesh, ScalarField};

const TOL: f64 = 1e-10;

fn disk_solution(p: Point) -> f64 {
    (1.0 - p[0] * p[0] - p[1] * p[1]) / 4.0
}

/// `u = −r²/4 + a ln r + b` with `u(1) = u(2) = 0`.
fn annulus_solution(r: f64) -> f64 {
    let a = 3.0 / (4.0 * 2f64.ln());
    -r * r / 4.0 + a * r.ln() + 0.25
}

fn max_nodal_error(mesh: &Mesh, u: &[f64], exact: impl Fn(Point) -> f64) -> f64 {
    mesh.vertices()
        .iter()
        .zip(u)
        .map(|(&p, v)| (v - exact(p)).abs())
        .fold(0.0, f64::max)
}

fn unit_source(mesh: &Mesh) -> Control {
    Control::from_density(ScalarField::constant(mesh.n_vertices(), 1.0))
}

fn random_density(mesh: &Mesh, rng: &mut ChaCha8Rng) -> Control {
    Control::from_density(ScalarField::new(
        (0..mesh.n_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    ))
}

#[test]
fn stiffness_structure() {
    let m = generate_disk(1.0, 0.1).unwrap();
    let full = assemble_full_stiffness(&m);
    assert!(full.is_symmetric());
    for i in 0..full.n() {
        let s: f64 = full.row(i).map(|(_, v)| v).sum();
        assert!(s.abs() < 1e-12, "row {i} sums to {s}");
    }
    let k = assemble_stiffness(&m).unwrap();
    assert!(k.matrix.is_symmetric());
    assert_eq!(k.free.len(), m.count_interior());
}

#[test]
fn all_boundary_triangle_is_degenerate() {
    let m = Mesh::new(
        vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
        vec![[0, 1, 2]],
        vec![true; 3],
        1.0,
    )
    .unwrap();
    assert!(matches!(assemble_stiffness(&m), Err(Error::Degenerate(_))));
}

#[test]
fn zero_source_gives_zero_state() {
    let m = generate_disk(1.0, 0.1).unwrap();
    let u = FemSpace::new(&m)
        .unwrap()
        .resolvent(&Control::zero(m.n_vertices()), TOL)
        .unwrap();
    assert!(u.values.iter().all(|&v| v == 0.0));
}

#[test]
fn disk_unit_source_converges_at_second_order() {
    let mut errors = Vec::new();
    for h in [0.05, 0.025] {
        let m = generate_disk(1.0, h).unwrap();
        let u = FemSpace::new(&m).unwrap().resolvent(&unit_source(&m), TOL).unwrap();
        for v in 0..m.n_vertices() {
            if m.is_boundary(v) {
                assert_eq!(u.values[v], 0.0);
            }
        }
        errors.push(max_nodal_error(&m, &u.values, disk_solution));
    }
    assert!(errors[0] <= 2e-3);
    let ratio = errors[0] / errors[1];
    assert!((2.8..=5.2).contains(&ratio), "ratio {ratio}");
}

#[test]
fn annulus_unit_source_matches_radial_solution() {
    let mut errors = Vec::new();
    for h in [0.1, 0.05] {
        let m = generate_annulus(1.0, 2.0, h).unwrap();
        let u = FemSpace::new(&m).unwrap().resolvent(&unit_source(&m), TOL).unwrap();
        let e = max_nodal_error(&m, &u.values, |p| annulus_solution(norm(p)));
        assert!(e <= 1.0 * h * h, "h {h}: error {e}");
        errors.push(e);
    }
    assert!(errors[1] < errors[0] / 2.5);
}

#[test]
fn point_loads_are_barycentric() {
    let m = generate_disk(1.0, 0.2).unwrap();
    let v = (0..m.n_vertices()).find(|&v| !m.is_boundary(v)).unwrap();
    let load = point_load_vector(
        &m,
        &[Atom {
            weight: 10.0,
            location: m.vertices()[v],
        }],
    )
    .unwrap();
    assert_eq!(load[v], 10.0);
    assert_eq!(load.iter().filter(|&&x| x != 0.0).count(), 1);

    let t = 5;
    let c = m.centroid(t);
    let load = point_load_vector(
        &m,
        &[Atom {
            weight: 3.0,
            location: c,
        }],
    )
    .unwrap();
    for &i in &m.triangles()[t] {
        assert!((load[i] - 1.0).abs() < 1e-12);
    }
    assert!((load.iter().sum::<f64>() - 3.0).abs() < 1e-12);

    let outside = point_load_vector(
        &m,
        &[Atom {
            weight: 1.0,
            location: [2.0, 0.0],
        }],
    );
    assert!(matches!(outside, Err(Error::Geometry { .. })));
}

#[test]
fn quadrature() {
    let h = 0.05;
    let m = generate_disk(1.0, h).unwrap();
    let ones = vec![1.0; m.n_vertices()];
    assert!((integrate_nodal(&m, &ones) - m.area()).abs() < 1e-12);
    assert!((integrate_cellwise(&m, &vec![1.0; m.n_triangles()]) - m.area()).abs() < 1e-12);
    let x: Vec<f64> = m.vertices().iter().map(|p| p[0]).collect();
    assert!(integrate_nodal(&m, &x).abs() < 1e-12);
    let x2: Vec<f64> = m.vertices().iter().map(|p| p[0] * p[0]).collect();
    assert!((integrate_nodal(&m, &x2) - PI / 4.0).abs() < 2.0 * h * h);
}

#[test]
fn gradients() {
    let m = generate_disk(1.0, 0.05).unwrap();
    let affine = ScalarField::interpolate(&m, |p| 0.3 - 2.0 * p[0] + 0.7 * p[1]);
    for g in gradient(&m, &affine.values) {
        assert!((g[0] + 2.0).abs() < 1e-10 && (g[1] - 0.7).abs() < 1e-10);
    }

    let mut worst: f64 = 0.0;
    for h in [0.1, 0.05] {
        let m = generate_disk(1.0, h).unwrap();
        let u = ScalarField::interpolate(&m, disk_solution);
        let e = gradient(&m, &u.values)
            .iter()
            .enumerate()
            .map(|(t, g)| {
                let c = m.centroid(t);
                (g[0] + c[0] / 2.0).hypot(g[1] + c[1] / 2.0)
            })
            .fold(0.0, f64::max);
        assert!(e <= h, "h {h}: gradient error {e}");
        worst = worst.max(e);
    }
    assert!(worst > 0.0);
}

#[test]
fn annulus_gradient_matches_closed_form() {
    let h = 0.05;
    let m = generate_annulus(1.0, 2.0, h).unwrap();
    let u = FemSpace::new(&m).unwrap().resolvent(&unit_source(&m), TOL).unwrap();
    let a = 3.0 / (4.0 * 2f64.ln());
    let mut worst: f64 = 0.0;
    for (t, g) in gradient(&m, &u.values).iter().enumerate() {
        let c = m.centroid(t);
        let r = norm(c);
        if r < 1.0 + 2.0 * h || r > 2.0 - 2.0 * h {
            continue;
        }
        let radial = -r / 2.0 + a / r;
        let exact = [radial * c[0] / r, radial * c[1] / r];
        worst = worst.max((g[0] - exact[0]).hypot(g[1] - exact[1]));
    }
    assert!(worst <= 2.0 * h, "gradient error {worst}");
}

#[test]
fn maximum_principle() {
    let square = generate_rectangle([0.0, 0.0], [1.0, 1.0], 16, 16).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let f = Control::from_density(ScalarField::new(
        (0..square.n_vertices()).map(|_| rng.gen_range(0.0..1.0)).collect(),
    ));
    let space = FemSpace::new(&square).unwrap().with_lumped_load(true);
    let u = space.resolvent(&f, TOL).unwrap();
    assert!(u.min() >= -1e-14);

    let disk = generate_disk(1.0, 0.05).unwrap();
    let f = Control::from_density(ScalarField::new(
        (0..disk.n_vertices()).map(|_| rng.gen_range(0.0..1.0)).collect(),
    ));
    let u = FemSpace::new(&disk).unwrap().resolvent(&f, TOL).unwrap();
    assert!(u.min() >= -1e-8 * u.max());
}

#[test]
fn linearity() {
    let m = generate_disk(1.0, 0.1).unwrap();
    let space = FemSpace::new(&m).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (f, g) = (random_density(&m, &mut rng), random_density(&m, &mut rng));
    let (a, b) = (1.7, -0.4);
    let combo = Control::from_density(ScalarField::new(
        f.density
            .values
            .iter()
            .zip(&g.density.values)
            .map(|(x, y)| a * x + b * y)
            .collect(),
    ));
    let lhs = space.resolvent(&combo, TOL).unwrap();
    let (uf, ug) = (space.resolvent(&f, TOL).unwrap(), space.resolvent(&g, TOL).unwrap());
    let scale = lhs.values.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    for i in 0..m.n_vertices() {
        assert!((lhs.values[i] - a * uf.values[i] - b * ug.values[i]).abs() <= 1e-8 * scale);
    }
}

#[test]
fn solver_failure_reports_residual() {
    let m = generate_disk(1.0, 0.05).unwrap();
    let space = FemSpace::new(&m).unwrap().with_iteration_cap(Some(2));
    match space.resolvent(&unit_source(&m), TOL) {
        Err(Error::Solver { iterations, residual }) => {
            assert_eq!(iterations, 2);
            assert!(residual > TOL);
        }
        other => panic!("expected solver error, got {other:?}"),
    }
    assert!(FemSpace::new(&m).unwrap().resolvent(&unit_source(&m), 1e-3).is_err());
}

#[test]
fn field_and_control_files_round_trip() {
    let m = generate_disk(1.0, 0.2).unwrap();
    let u = ScalarField::interpolate(&m, disk_solution);
    assert_eq!(load_field(&m, &save_field(&m, &u)).unwrap(), u);

    let mut f = Control::single_atom(m.n_vertices(), 2.5, [0.1, -0.2]);
    f.density.values[3] = 0.75;
    assert_eq!(load_control(&m, &save_control(&m, &f)).unwrap(), f);

    let other = generate_disk(1.0, 0.25).unwrap();
    assert!(load_field(&other, &save_field(&m, &u)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn self_adjoint(seed in any::<u64>()) {
        let m = generate_disk(1.0, 0.1).unwrap();
        let space = FemSpace::new(&m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = random_density(&m, &mut rng);
        let g = random_density(&m, &mut rng);
        f.atoms.push(Atom { weight: rng.gen_range(0.1..2.0), location: [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)] });
        let uf = space.resolvent(&f, TOL).unwrap();
        let ug = space.resolvent(&g, TOL).unwrap();
        let a = space.inner(&ug.values, &f).unwrap();
        let b = space.inner(&uf.values, &g).unwrap();
        prop_assert!((a - b).abs() <= 1e-8 * a.abs().max(b.abs()).max(1e-12));
    }

    #[test]
    fn point_load_partition_of_unity(weights in proptest::collection::vec(0.01f64..5.0, 1..8), seed in any::<u64>()) {
        let m = generate_disk(1.0, 0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let atoms: Vec<Atom> = weights.iter().map(|&w| {
            let r = rng.gen_range(0.0..0.9f64);
            let t = rng.gen_range(0.0..2.0 * PI);
            Atom { weight: w, location: [r * t.cos(), r * t.sin()] }
        }).collect();
        let load = point_load_vector(&m, &atoms).unwrap();
        let total: f64 = weights.iter().sum();
        prop_assert!((load.iter().sum::<f64>() - total).abs() <= 1e-12 * total.max(1.0));
        prop_assert!(load.iter().all(|&x| x >= 0.0));
    }
}
