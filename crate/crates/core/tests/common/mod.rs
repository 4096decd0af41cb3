//! Closed-form references shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use srcopt::analysis::level_set::Segment;
use srcopt::mesh::Point;
use srcopt::{Atom, ConstraintKind, ConstraintSpec, Control, FemSpace, ScalarField};

/// Adjoint of the linear cost with weight `x² − y²` on the unit disk.
pub fn saddle_adjoint(p: Point) -> f64 {
    let r2 = p[0] * p[0] + p[1] * p[1];
    (p[0] * p[0] - p[1] * p[1]) * (1.0 - r2) / 12.0
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
pub fn simpson(g: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = g(a) + g(b);
    for k in 1..n {
        s += g(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Area of `{saddle_adjoint < t}` for `t < 0`.
///
/// With `s = r²` and `c = cos 2θ < 0` the set is `s(1 − s) > 12|t|/|c|`, an
/// `s`-interval of length `√(1 − 48|t|/|c|)`. Folding the four sectors onto
/// `φ ∈ [0, π/2)` with `|c| = cos φ` gives `∫ √(1 − K/cos φ) dφ` over
/// `cos φ > K = 48|t|`; the substitution `φ = φ₀(1 − v²)` removes the
/// square-root endpoint.
pub fn saddle_sublevel_area(t: f64) -> f64 {
    let k = 48.0 * t.abs();
    if t >= 0.0 {
        return PI;
    }
    if k >= 1.0 {
        return 0.0;
    }
    let phi0 = k.acos();
    simpson(
        |v| {
            let phi = phi0 * (1.0 - v * v);
            (1.0 - k / phi.cos()).max(0.0).sqrt() * 2.0 * phi0 * v
        },
        0.0,
        1.0,
        4000,
    )
}

/// Threshold `t < 0` with `|{saddle_adjoint < t}| = area`.
pub fn saddle_threshold(area: f64) -> f64 {
    let (mut lo, mut hi) = (-1.0 / 48.0, 0.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if saddle_sublevel_area(mid) < area {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Points of the exact curve `{saddle_adjoint = t}`, `t < 0`, sampled by angle.
pub fn saddle_level_curve(t: f64, samples: usize) -> Vec<Point> {
    let mut pts = Vec::new();
    for j in 0..samples {
        let th = 2.0 * PI * (j as f64 + 0.5) / samples as f64;
        let c = (2.0 * th).cos();
        if c >= 0.0 {
            continue;
        }
        let disc = 1.0 - 48.0 * t.abs() / c.abs();
        if disc < 0.0 {
            continue;
        }
        for s in [(1.0 - disc.sqrt()) / 2.0, (1.0 + disc.sqrt()) / 2.0] {
            let r = s.sqrt();
            pts.push([r * th.cos(), r * th.sin()]);
        }
    }
    pts
}

pub fn point_segment_distance(p: Point, s: &Segment) -> f64 {
    let d = [s.b[0] - s.a[0], s.b[1] - s.a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let u = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - s.a[0]) * d[0] + (p[1] - s.a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    };
    (p[0] - s.a[0] - u * d[0]).hypot(p[1] - s.a[1] - u * d[1])
}

pub fn distance_to_segments(p: Point, segments: &[Segment]) -> f64 {
    segments
        .iter()
        .map(|s| point_segment_distance(p, s))
        .fold(f64::INFINITY, f64::min)
}

/// Area-weighted centroid of a set of clipped polygons.
pub fn centroid(pieces: &[(usize, Vec<Point>)]) -> Point {
    let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for (_, poly) in pieces {
        let n = poly.len();
        for k in 0..n {
            let (p, q) = (poly[k], poly[(k + 1) % n]);
            let cr = p[0] * q[1] - q[0] * p[1];
            a += cr;
            cx += (p[0] + q[0]) * cr;
            cy += (p[1] + q[1]) * cr;
        }
    }
    [cx / (3.0 * a), cy / (3.0 * a)]
}

/// A random control satisfying `spec` on `space`.
pub fn random_admissible(spec: &ConstraintSpec, space: &FemSpace<'_>, rng: &mut ChaCha8Rng) -> Control {
    let mesh = space.mesh();
    let n = mesh.n_vertices();
    let l = space.lumped_weights();
    let area = space.domain_area();
    match spec.kind {
        ConstraintKind::BoxMass | ConstraintKind::BoxMassLower => {
            let (a, b) = (spec.alpha, spec.beta);
            let mut f: Vec<f64> = (0..n).map(|_| rng.gen_range(a..=b)).collect();
            let mass: f64 = f.iter().zip(l).map(|(v, li)| v * li).sum();
            let violated = match spec.kind {
                ConstraintKind::BoxMass => mass > spec.m,
                _ => mass < spec.m,
            };
            if violated {
                // blend toward the bound that moves mass to m
                let anchor = if spec.kind == ConstraintKind::BoxMass { a } else { b };
                let theta = (spec.m - anchor * area) / (mass - anchor * area);
                f.iter_mut().for_each(|v| *v = anchor + theta * (*v - anchor));
            }
            Control::from_density(ScalarField::new(f))
        }
        ConstraintKind::Quadratic => {
            let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let q: f64 = f.iter().zip(l).map(|(v, li)| li * v * v).sum();
            let scale = (spec.m / q).sqrt() * rng.gen_range(0.0..=1.0f64);
            Control::from_density(ScalarField::new(f.iter().map(|v| v * scale).collect()))
        }
        ConstraintKind::TvBound | ConstraintKind::NonnegMass => {
            let signed = spec.kind == ConstraintKind::TvBound;
            let lo = if signed { -1.0 } else { 0.0 };
            let mut f = Control::from_density(ScalarField::new((0..n).map(|_| rng.gen_range(lo..1.0)).collect()));
            for _ in 0..rng.gen_range(0..3) {
                let r = rng.gen_range(0.0..0.95f64);
                let th = rng.gen_range(0.0..2.0 * PI);
                f.atoms.push(Atom {
                    weight: rng.gen_range(lo..1.0),
                    location: [r * th.cos(), r * th.sin()],
                });
            }
            let total = spec.integral(space, &f);
            let scale = spec.m / total * rng.gen_range(0.0..=1.0f64);
            f.density.values.iter_mut().for_each(|v| *v *= scale);
            f.atoms.iter_mut().for_each(|a| a.weight *= scale);
            f
        }
    }
}
