//! Acceptance report: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

mod common;

use std::f64::consts::PI;
use std::fs;
use std::time::Instant;

use common::{distance_to_segments, random_admissible, saddle_level_curve, saddle_threshold};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srcopt::analysis::convexity::convexity_score;
use srcopt::analysis::radial::{radial_oracle, RadialProblem};
use srcopt::analysis::regularity::regularity_integral;
use srcopt::config::{preset, PRESET_NAMES};
use srcopt::constraints::{linearized_oracle, OracleOptions};
use srcopt::mesh::{dist, generate_annulus, generate_disk, norm, Point};
use srcopt::optimizer::{run, RunResult};
use srcopt::pipeline::{interface_geometry, run_pipeline_in};
use srcopt::problems::{adjoint, cost};
use srcopt::{
    parse_config, Coefficient, ConstraintSpec, Control, CostKind, CostSpec, Domain, FemSpace, Mesh, OptimizerConfig,
    ScalarField,
};

struct Outcome {
    pass: bool,
    detail: String,
}

type Check = fn() -> Outcome;

fn verdict(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn unit_source(mesh: &Mesh) -> Control {
    Control::from_density(ScalarField::constant(mesh.n_vertices(), 1.0))
}

fn optimize(cost: &CostSpec, c: &ConstraintSpec, space: &FemSpace<'_>, cfg: &OptimizerConfig) -> RunResult {
    run(cost, c, space, &c.initial_control(space), cfg).expect("optimizer run")
}

fn monotone(r: &RunResult) -> bool {
    r.history.windows(2).all(|p| p[1].cost <= p[0].cost)
}

fn poisson_correctness() -> Outcome {
    let mut errors = Vec::new();
    for h in [0.05, 0.025] {
        let mesh = generate_disk(1.0, h).unwrap();
        let space = FemSpace::new(&mesh).unwrap();
        let u = space.resolvent(&unit_source(&mesh), 1e-12).unwrap();
        let e = mesh
            .vertices()
            .iter()
            .zip(&u.values)
            .map(|(&p, v)| (v - (1.0 - norm(p).powi(2)) / 4.0).abs())
            .fold(0.0, f64::max);
        errors.push(e);
    }
    let ratio = errors[0] / errors[1];
    verdict(
        errors[0] <= 2e-3 && (2.8..=5.2).contains(&ratio),
        format!(
            "max error {:.3e} at h=0.05, {:.3e} at h=0.025, ratio {ratio:.2}",
            errors[0], errors[1]
        ),
    )
}

fn self_adjointness() -> Outcome {
    let mesh = generate_disk(1.0, 0.05).unwrap();
    let space = FemSpace::new(&mesh).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let mut draw = || {
            Control::from_density(ScalarField::new(
                (0..mesh.n_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            ))
        };
        let (f, g) = (draw(), draw());
        let rf = space.resolvent(&f, 1e-12).unwrap();
        let rg = space.resolvent(&g, 1e-12).unwrap();
        let a = space.inner(&rg.values, &f).unwrap();
        let b = space.inner(&rf.values, &g).unwrap();
        worst = worst.max((a - b).abs() / a.abs().max(b.abs()));
    }
    verdict(
        worst <= 1e-8,
        format!("worst relative asymmetry {worst:.2e} over 20 pairs"),
    )
}

/// Two-sided Hausdorff distance between a polyline and a dense point sample.
fn hausdorff(segments: &[srcopt::analysis::level_set::Segment], curve: &[Point]) -> f64 {
    let to_curve = |p: Point| curve.iter().map(|&q| dist(p, q)).fold(f64::INFINITY, f64::min);
    let one = segments
        .iter()
        .flat_map(|s| [s.a, s.b])
        .map(to_curve)
        .fold(0.0, f64::max);
    let other = curve
        .iter()
        .map(|&q| distance_to_segments(q, segments))
        .fold(0.0, f64::max);
    one.max(other)
}

fn example_62() -> Outcome {
    let h = 0.03;
    let mesh = generate_disk(1.0, h).unwrap();
    let space = FemSpace::new(&mesh).unwrap();
    let c = ConstraintSpec::box_mass(0.0, 1.0, 1.25);
    let r = optimize(
        &CostSpec::linear(Coefficient::SaddleX2MinusY2),
        &c,
        &space,
        &OptimizerConfig::default(),
    );
    let interface = interface_geometry(&mesh, &c, &r.control).unwrap();
    let off_band_binary = mesh.vertices().iter().zip(&r.control.density.values).all(|(&p, &v)| {
        distance_to_segments(p, &interface.segments) <= 2.0 * h || v.abs() <= 1e-9 || (v - 1.0).abs() <= 1e-9
    });
    let mass = space.total_mass(&r.control);
    let t = saddle_threshold(1.25);
    let d = hausdorff(&interface.segments, &saddle_level_curve(t, 20_000));
    verdict(
        off_band_binary && (mass - 1.25).abs() <= 0.0125 && d <= 3.0 * h,
        format!(
            "binary off band: {off_band_binary}, mass {mass:.5}, Hausdorff {d:.4} (limit {:.2}), exact threshold {t:.6e}",
            3.0 * h
        ),
    )
}

fn example_63() -> Outcome {
    let cfg = parse_config(preset("ex63").unwrap()).unwrap();
    let mesh = cfg.domain.generate(cfg.h).unwrap();
    let space = FemSpace::new(&mesh).unwrap();
    let r = optimize(
        cfg.cost.as_ref().unwrap(),
        cfg.constraint.as_ref().unwrap(),
        &space,
        &cfg.optimizer,
    );
    let rep = &r.report;
    verdict(
        rep.bang_fraction >= 0.98 && rep.fenchel_residual <= 5e-3 && monotone(&r),
        format!(
            "bang fraction {:.4}, off-band Fenchel residual {:.2e}, monotone {}, {} iterations",
            rep.bang_fraction,
            rep.fenchel_residual,
            monotone(&r),
            r.history.len() - 1
        ),
    )
}

fn dirac_optimum() -> Outcome {
    let h = 0.03;
    let mesh = generate_disk(1.0, h).unwrap();
    let space = FemSpace::new(&mesh).unwrap();
    let c = ConstraintSpec::nonneg_mass(10.0);
    let r = optimize(&CostSpec::power_max(4.0), &c, &space, &OptimizerConfig::default());
    let atoms = &r.control.atoms;
    let centered = atoms.len() == 1 && atoms[0].weight == 10.0 && norm(atoms[0].location) <= 2.0 * h;

    let cfg = parse_config(preset("ex61").unwrap()).unwrap();
    let holed = cfg.domain.generate(cfg.h).unwrap();
    let hspace = FemSpace::new(&holed).unwrap();
    let hr = optimize(
        cfg.cost.as_ref().unwrap(),
        cfg.constraint.as_ref().unwrap(),
        &hspace,
        &cfg.optimizer,
    );
    let w = &hr.adjoint.values;
    let argmin = (0..holed.n_vertices()).min_by(|&a, &b| w[a].total_cmp(&w[b])).unwrap();
    let holed_ok = hr.control.atoms.len() == 1
        && hr.control.atoms[0].weight == 10.0
        && hr.control.atoms[0].location == holed.vertices()[argmin]
        && monotone(&hr);
    let hl = hr.control.atoms.first().map(|a| a.location).unwrap_or([f64::NAN; 2]);
    verdict(
        centered && holed_ok,
        format!(
            "centered disk: {} atom(s), |x| = {:.4}; holed disk: atom at ({:.4}, {:.4}), at adjoint argmin and monotone: {holed_ok}",
            atoms.len(),
            atoms.first().map(|a| norm(a.location)).unwrap_or(f64::NAN),
            hl[0],
            hl[1]
        ),
    )
}

fn compliance_geometry() -> Outcome {
    let c = ConstraintSpec::box_mass_lower(0.0, 1.0, 1.25);
    let oracle = radial_oracle(
        RadialProblem::Compliance {
            alpha: 0.0,
            beta: 1.0,
            m: 1.25,
        },
        &Domain::Disk { radius: 1.0 },
        20_000,
    )
    .unwrap();
    let mut radius_ok = true;
    let mut perimeters = Vec::new();
    let mut scores = Vec::new();
    let mut radii = Vec::new();
    for h in [0.025, 0.0125] {
        let mesh = generate_disk(1.0, h).unwrap();
        let space = FemSpace::new(&mesh).unwrap();
        let r = optimize(&CostSpec::compliance(), &c, &space, &OptimizerConfig::default());
        // E is the region where the control sits at its lower value
        let e = interface_geometry(&mesh, &c, &r.control).unwrap();
        let radius = (e.volume / PI).sqrt();
        radius_ok &= (radius - oracle.interface_radius).abs() <= 2.0 * h;
        radii.push(radius);
        perimeters.push(e.perimeter);
        scores.push(convexity_score(&e).unwrap());
    }
    let stable = (perimeters[1] - perimeters[0]).abs() / perimeters[0] <= 0.05;
    verdict(
        radius_ok && scores[1] >= 0.99 && stable,
        format!(
            "oracle radius {:.4}, mesh radii {:.4}/{:.4}; convexity {:.4}/{:.4}; perimeter {:.4}/{:.4} at h = 0.025/0.0125",
            oracle.interface_radius, radii[0], radii[1], scores[0], scores[1], perimeters[0], perimeters[1]
        ),
    )
}

fn regularity_dichotomy() -> Outcome {
    let mut q1 = Vec::new();
    let mut q2 = Vec::new();
    for h in [0.05, 0.025, 0.0125, 0.00625] {
        let mesh = generate_annulus(1.0, 2.0, h).unwrap();
        let space = FemSpace::new(&mesh).unwrap();
        let u = space.resolvent(&unit_source(&mesh), 1e-10).unwrap();
        q1.push(regularity_integral(&mesh, &u.values, 1.0).unwrap().value);
        q2.push(regularity_integral(&mesh, &u.values, 2.0).unwrap().value);
    }
    let growth = |v: &[f64]| -> Vec<f64> { v.windows(2).map(|p| p[1] / p[0] - 1.0).collect() };
    let (g1, g2) = (growth(&q1), growth(&q2));
    let pass = g1.iter().all(|g| *g >= 0.20) && g2.iter().all(|g| g.abs() <= 0.05);
    let pct = |g: &[f64]| {
        g.iter()
            .map(|x| format!("{:+.1}%", 100.0 * x))
            .collect::<Vec<_>>()
            .join(" ")
    };
    verdict(
        pass,
        format!("q=1 values {q1:.2?} growth {}; q=2 growth {}", pct(&g1), pct(&g2)),
    )
}

fn property_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let kinds = [
        (ConstraintSpec::tv_bound(2.0), -10.0, 10.0),
        (ConstraintSpec::nonneg_mass(10.0), -1.0, 10.0),
        (ConstraintSpec::box_mass(0.0, 1.0, 1.25), -0.5, 1.5),
        (ConstraintSpec::box_mass_lower(0.0, 1.0, 1.25), -0.5, 1.5),
        (ConstraintSpec::quadratic(0.7), -10.0, 10.0),
    ];
    let mut fy = 0.0f64;
    for (spec, lo, hi) in &kinds {
        for _ in 0..10_000 {
            let (s, t) = (rng.gen_range(*lo..*hi), rng.gen_range(-10.0..10.0));
            fy = fy.max(s * t - spec.psi(s) - spec.psi_star(t));
        }
    }

    let mesh = generate_disk(1.0, 0.08).unwrap();
    let space = FemSpace::new(&mesh).unwrap();
    let w = space
        .solve_density(
            &ScalarField::interpolate(&mesh, |p| p[0] * p[0] - p[1] * p[1]).values,
            1e-12,
        )
        .unwrap();
    let mut oracle_ok = true;
    for (spec, _, _) in &kinds {
        let best = space
            .inner(
                &w,
                &linearized_oracle(spec, &space, &w, OracleOptions::default())
                    .unwrap()
                    .control,
            )
            .unwrap();
        for _ in 0..100 {
            let v = space.inner(&w, &random_admissible(spec, &space, &mut rng)).unwrap();
            oracle_ok &= best <= v + 1e-12 * (1.0 + v.abs());
        }
    }

    let box_spec = ConstraintSpec::box_mass(0.0, 1.0, 1.25);
    let scale = 1.25 / mesh.area();
    let f = Control::from_density(ScalarField::new(
        (0..mesh.n_vertices())
            .map(|_| scale * rng.gen_range(0.2..1.0))
            .collect(),
    ));
    let j = |spec: &CostSpec, f: &Control| cost(spec, &space, &space.resolvent(f, 1e-12).unwrap(), f).unwrap();
    let mut gradient_ok = true;
    let mut ratios = Vec::new();
    for spec in [
        CostSpec::power_max(4.0),
        CostSpec::linear(Coefficient::SaddleX2MinusY2),
        CostSpec::tracking(Coefficient::Const(0.1)),
        CostSpec::compliance(),
    ] {
        let wa = adjoint(&spec, &space, &f, 1e-12).unwrap().values;
        let f_hat = linearized_oracle(&box_spec, &space, &wa, OracleOptions::default())
            .unwrap()
            .control;
        let predicted = space.inner(&wa, &f_hat).unwrap() - space.inner(&wa, &f).unwrap();
        let j0 = j(&spec, &f);
        let [e3, e4] = [1e-3, 1e-4].map(|eps| (j(&spec, &f.blend(&f_hat, eps)) - j0) / eps - predicted);
        let size = predicted.abs().max(1e-6);
        if spec.kind == CostKind::Linear {
            gradient_ok &= e3.abs().max(e4.abs()) <= 1e-10 * size.max(1.0);
        } else {
            let ratio = e3 / e4;
            ratios.push(ratio);
            gradient_ok &= e3.abs() <= 1e-9 * size || (5.0..=20.0).contains(&ratio);
        }
    }
    verdict(
        fy <= 1e-12 && oracle_ok && gradient_ok,
        format!(
            "worst Fenchel-Young violation {fy:.1e}, oracle beats 100 random controls per kind: {oracle_ok}, \
             slope error ratios for eps 1e-3/1e-4 {ratios:.2?}"
        ),
    )
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut mismatches = Vec::new();
    for name in PRESET_NAMES {
        let cfg = parse_config(preset(name).unwrap()).unwrap();
        let a = run_pipeline_in(&cfg, &tmp.path().join(format!("{name}-a"))).unwrap();
        let b = run_pipeline_in(&cfg, &tmp.path().join(format!("{name}-b"))).unwrap();
        for f in &a.files {
            if fs::read(a.dir.join(f)).unwrap() != fs::read(b.dir.join(f)).unwrap() {
                mismatches.push(format!("{name}/{f}"));
            }
        }
    }
    verdict(
        mismatches.is_empty(),
        format!(
            "{} presets rerun, differing artifacts: {mismatches:?}",
            PRESET_NAMES.len()
        ),
    )
}

fn main() {
    let criteria: [(&str, f64, Check); 9] = [
        ("Poisson correctness", 10.0, poisson_correctness),
        ("Self-adjointness", f64::INFINITY, self_adjointness),
        ("Linear saddle example vs exact threshold", 60.0, example_62),
        ("Tracking example is bang-bang", 120.0, example_63),
        ("Dirac optimum", f64::INFINITY, dirac_optimum),
        ("Compliance geometry", f64::INFINITY, compliance_geometry),
        ("Regularity dichotomy on the annulus", 60.0, regularity_dichotomy),
        ("KKT/Fenchel property suite", f64::INFINITY, property_suite),
        ("Determinism of presets", f64::INFINITY, determinism),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = check();
        let secs = start.elapsed().as_secs_f64();
        let pass = out.pass && secs < *budget;
        if !pass {
            failed += 1;
        }
        let limit = if budget.is_finite() {
            format!(" (limit {budget} s)")
        } else {
            String::new()
        };
        println!(
            "{} {}. {name}: {} [{secs:.1} s{limit}]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            out.detail
        );
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
