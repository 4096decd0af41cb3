//! Exact sublevel sets of P1 fields.

use std::fmt::Write as _;

use crate::mesh::{Mesh, Point};

/// One piece of the interface `{u = s}` inside a triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub triangle: usize,
    pub a: Point,
    pub b: Point,
}

impl Segment {
    pub fn length(&self) -> f64 {
        crate::mesh::dist(self.a, self.b)
    }
}

/// Sublevel set `{u < s}` of a P1 field and its interface.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetGeometry {
    pub threshold: f64,
    pub volume: f64,
    pub perimeter: f64,
    pub segments: Vec<Segment>,
    /// Clipped sublevel polygon of every triangle meeting the set.
    pub pieces: Vec<(usize, Vec<Point>)>,
}

impl LevelSetGeometry {
    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// Interface as CSV rows `x1,y1,x2,y2`.
    pub fn segments_csv(&self) -> String {
        let mut out = String::from("x1,y1,x2,y2\n");
        for s in &self.segments {
            let _ = writeln!(out, "{},{},{},{}", s.a[0], s.a[1], s.b[0], s.b[1]);
        }
        out
    }
}

/// Area of `{v < t}` inside one triangle of area `area` with nodal values `v`.
pub fn clipped_area(v: [f64; 3], area: f64, t: f64) -> f64 {
    let mut s = v;
    s.sort_by(f64::total_cmp);
    let [a, b, c] = s;
    if t <= a {
        0.0
    } else if t >= c {
        area
    } else if t <= b {
        area * (t - a) * (t - a) / ((b - a) * (c - a))
    } else {
        area * (1.0 - (c - t) * (c - t) / ((c - a) * (c - b)))
    }
}

/// `|{u < t}|` for the P1 interpolant of `values`.
pub fn sublevel_area(mesh: &Mesh, values: &[f64], t: f64) -> f64 {
    mesh.triangles()
        .iter()
        .enumerate()
        .map(|(k, tri)| {
            clipped_area(
                [values[tri[0]], values[tri[1]], values[tri[2]]],
                mesh.triangle_area(k),
                t,
            )
        })
        .sum()
}

fn lerp(p: Point, q: Point, s: f64) -> Point {
    [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])]
}

/// Clips a triangle to `{v < t}`; returns the polygon (possibly empty).
pub fn clip_triangle(p: [Point; 3], v: [f64; 3], t: f64) -> Vec<Point> {
    let mut out = Vec::with_capacity(4);
    for k in 0..3 {
        let j = (k + 1) % 3;
        let inside_k = v[k] < t;
        let inside_j = v[j] < t;
        if inside_k {
            out.push(p[k]);
        }
        if inside_k != inside_j {
            out.push(lerp(p[k], p[j], (t - v[k]) / (v[j] - v[k])));
        }
    }
    out
}

/// Sublevel geometry of `values` at threshold `s`.
pub fn level_set(mesh: &Mesh, values: &[f64], s: f64) -> LevelSetGeometry {
    let mut volume = 0.0;
    let mut perimeter = 0.0;
    let mut segments = Vec::new();
    let mut pieces = Vec::new();
    for (k, tri) in mesh.triangles().iter().enumerate() {
        let v = [values[tri[0]], values[tri[1]], values[tri[2]]];
        let p = mesh.triangle_points(k);
        let a = clipped_area(v, mesh.triangle_area(k), s);
        if a <= 0.0 {
            continue;
        }
        volume += a;
        pieces.push((k, clip_triangle(p, v, s)));
        let mut cut = Vec::with_capacity(2);
        for e in 0..3 {
            let f = (e + 1) % 3;
            if (v[e] < s) != (v[f] < s) {
                cut.push(lerp(p[e], p[f], (s - v[e]) / (v[f] - v[e])));
            }
        }
        if cut.len() == 2 {
            let seg = Segment {
                triangle: k,
                a: cut[0],
                b: cut[1],
            };
            perimeter += seg.length();
            segments.push(seg);
        }
    }
    LevelSetGeometry {
        threshold: s,
        volume,
        perimeter,
        segments,
        pieces,
    }
}

/// Splits a sublevel set into connected components. Two triangles are
/// joined when their common edge meets the set in more than a point.
pub fn components(mesh: &Mesh, values: &[f64], geometry: &LevelSetGeometry) -> Vec<LevelSetGeometry> {
    let s = geometry.threshold;
    let mut slot = vec![usize::MAX; mesh.n_triangles()];
    for (i, (t, _)) in geometry.pieces.iter().enumerate() {
        slot[*t] = i;
    }
    let neighbors = mesh.triangle_neighbors();
    let mut label = vec![usize::MAX; geometry.pieces.len()];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for start in 0..geometry.pieces.len() {
        if label[start] != usize::MAX {
            continue;
        }
        let id = groups.len();
        let mut stack = vec![start];
        label[start] = id;
        let mut members = Vec::new();
        while let Some(i) = stack.pop() {
            members.push(i);
            let t = geometry.pieces[i].0;
            let tri = mesh.triangles()[t];
            for k in 0..3 {
                let Some(nb) = neighbors[t][k] else { continue };
                let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                if values[a].min(values[b]) >= s {
                    continue;
                }
                let j = slot[nb];
                if j != usize::MAX && label[j] == usize::MAX {
                    label[j] = id;
                    stack.push(j);
                }
            }
        }
        members.sort_unstable();
        groups.push(members);
    }
    let mut seg_of = vec![Vec::new(); mesh.n_triangles()];
    for (i, seg) in geometry.segments.iter().enumerate() {
        seg_of[seg.triangle].push(i);
    }
    groups
        .into_iter()
        .map(|members| {
            let mut g = LevelSetGeometry {
                threshold: s,
                volume: 0.0,
                perimeter: 0.0,
                segments: Vec::new(),
                pieces: Vec::new(),
            };
            for i in members {
                let (t, poly) = &geometry.pieces[i];
                let tri = mesh.triangles()[*t];
                g.volume += clipped_area(
                    [values[tri[0]], values[tri[1]], values[tri[2]]],
                    mesh.triangle_area(*t),
                    s,
                );
                g.pieces.push((*t, poly.clone()));
                for &k in &seg_of[*t] {
                    g.perimeter += geometry.segments[k].length();
                    g.segments.push(geometry.segments[k]);
                }
            }
            g
        })
        .collect()
}
