//! Conforming triangle meshes of the disk, the annulus and the disk with an
//! off-center hole.
//!
//! Generated meshes are built from a hexagonal lattice of spacing `h` clipped
//! against the domain, boundary circles sampled at spacing at most `h`, and a
//! constrained Delaunay triangulation of the union. One round of Laplacian
//! smoothing followed by re-triangulation evens out the boundary layer.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use spade::{ConstrainedDelaunayTriangulation, Point2, Triangulation};

use crate::error::{Error, Result};

/// Upper bound on generated vertex counts.
pub const VERTEX_BUDGET: usize = 4_000_000;

/// Fraction of `h` kept free between lattice points and a boundary circle.
const BOUNDARY_CLEARANCE: f64 = 0.6;
const SMOOTHING_SWEEPS: usize = 4;

pub type Point = [f64; 2];

/// The continuous domains the generators understand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Disk {
        radius: f64,
    },
    Annulus {
        r_inner: f64,
        r_outer: f64,
    },
    DiskWithHole {
        radius: f64,
        hole_center: Point,
        hole_radius: f64,
    },
}

impl Domain {
    /// Area of the exact (curved) domain.
    pub fn area(&self) -> f64 {
        match *self {
            Domain::Disk { radius } => PI * radius * radius,
            Domain::Annulus { r_inner, r_outer } => PI * (r_outer * r_outer - r_inner * r_inner),
            Domain::DiskWithHole {
                radius, hole_radius, ..
            } => PI * (radius * radius - hole_radius * hole_radius),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Domain::Disk { radius } => {
                if !(radius > 0.0 && radius.is_finite()) {
                    return Err(Error::arg(format!("disk radius must be positive, got {radius}")));
                }
            }
            Domain::Annulus { r_inner, r_outer } => {
                if !(r_inner > 0.0 && r_inner < r_outer && r_outer.is_finite()) {
                    return Err(Error::arg(format!(
                        "annulus radii must satisfy 0 < r_inner < r_outer, got ({r_inner}, {r_outer})"
                    )));
                }
            }
            Domain::DiskWithHole {
                radius,
                hole_center,
                hole_radius,
            } => {
                if !(radius > 0.0 && radius.is_finite() && hole_radius > 0.0) {
                    return Err(Error::arg("disk and hole radii must be positive"));
                }
                let offset = norm(hole_center);
                if !(offset + hole_radius < radius) {
                    return Err(Error::arg(format!(
                        "hole must lie strictly inside the disk: |center| + hole_radius = {} >= {radius}",
                        offset + hole_radius
                    )));
                }
            }
        }
        Ok(())
    }

    /// Meshes the domain with target edge length `h`.
    pub fn generate(&self, h: f64) -> Result<Mesh> {
        match *self {
            Domain::Disk { radius } => generate_disk(radius, h),
            Domain::Annulus { r_inner, r_outer } => generate_annulus(r_inner, r_outer, h),
            Domain::DiskWithHole {
                radius,
                hole_center,
                hole_radius,
            } => generate_disk_with_hole(radius, hole_center, hole_radius, h),
        }
    }

    fn contains(&self, p: Point, clearance: f64) -> bool {
        match *self {
            Domain::Disk { radius } => norm(p) <= radius - clearance,
            Domain::Annulus { r_inner, r_outer } => {
                let r = norm(p);
                r <= r_outer - clearance && r >= r_inner + clearance
            }
            Domain::DiskWithHole {
                radius,
                hole_center,
                hole_radius,
            } => norm(p) <= radius - clearance && dist(p, hole_center) >= hole_radius + clearance,
        }
    }

    fn outer_radius(&self) -> f64 {
        match *self {
            Domain::Disk { radius } | Domain::DiskWithHole { radius, .. } => radius,
            Domain::Annulus { r_outer, .. } => r_outer,
        }
    }

    fn inner_circle(&self) -> Option<(Point, f64)> {
        match *self {
            Domain::Disk { .. } => None,
            Domain::Annulus { r_inner, .. } => Some(([0.0, 0.0], r_inner)),
            Domain::DiskWithHole {
                hole_center,
                hole_radius,
                ..
            } => Some((hole_center, hole_radius)),
        }
    }
}

/// A conforming triangulation with per-vertex boundary flags.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    h: f64,
    areas: Vec<f64>,
    n_loops: usize,
}

impl PartialEq for Mesh {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.triangles == other.triangles && self.boundary == other.boundary
    }
}

/// Extremal angles of a mesh, in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshQuality {
    pub min_angle: f64,
    pub max_angle: f64,
    pub nonobtuse_fraction: f64,
    pub n_triangles: usize,
}

impl Mesh {
    /// Builds a mesh and checks every structural invariant.
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>, boundary: Vec<bool>, h: f64) -> Result<Mesh> {
        match Self::build(vertices, triangles, boundary, h) {
            Ok(mesh) => Ok(mesh),
            Err((_, msg)) => Err(Error::InvalidMesh(msg)),
        }
    }

    /// On failure returns the offending triangle, when there is one.
    fn build(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<bool>,
        h: f64,
    ) -> std::result::Result<Mesh, (Option<usize>, String)> {
        let nv = vertices.len();
        if boundary.len() != nv {
            return Err((None, "boundary flag count differs from vertex count".into()));
        }
        if triangles.is_empty() {
            return Err((None, "mesh has no triangles".into()));
        }
        if let Some(i) = vertices.iter().position(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return Err((None, format!("vertex {i} has non-finite coordinates")));
        }
        let mut areas = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&v| v >= nv) {
                return Err((
                    Some(t),
                    format!("triangle {t} references vertex {bad}, only {nv} exist"),
                ));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err((Some(t), format!("triangle {t} repeats a vertex")));
            }
            let a = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if !(a > 0.0) {
                return Err((Some(t), format!("triangle {t} has non-positive signed area {a:e}")));
            }
            areas.push(a);
        }

        // directed edge -> owning triangle
        let mut directed: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let e = (tri[k], tri[(k + 1) % 3]);
                if directed.insert(e, t).is_some() {
                    return Err((
                        Some(t),
                        format!("edge ({}, {}) is used twice with the same orientation", e.0, e.1),
                    ));
                }
            }
        }
        // successor map of the boundary cycles
        let mut next: HashMap<usize, usize> = HashMap::new();
        for (&(a, b), &t) in &directed {
            if directed.contains_key(&(b, a)) {
                continue;
            }
            if !(boundary[a] && boundary[b]) {
                return Err((Some(t), format!("boundary edge ({a}, {b}) has an unflagged endpoint")));
            }
            if next.insert(a, b).is_some() {
                return Err((Some(t), format!("boundary vertex {a} starts two boundary edges")));
            }
        }
        let mut incoming: HashMap<usize, usize> = HashMap::with_capacity(next.len());
        for (&a, &b) in &next {
            *incoming.entry(b).or_default() += 1;
            let _ = a;
        }
        for &a in next.keys() {
            if incoming.get(&a).copied().unwrap_or(0) != 1 {
                let t = directed.get(&(a, next[&a])).copied();
                return Err((t, format!("boundary loop through vertex {a} is not closed")));
            }
        }
        let mut starts: Vec<usize> = next.keys().copied().collect();
        starts.sort_unstable();
        let mut seen = vec![false; nv];
        let mut n_loops = 0;
        for s in starts {
            if seen[s] {
                continue;
            }
            n_loops += 1;
            let mut v = s;
            loop {
                seen[v] = true;
                match next.get(&v) {
                    Some(&n) if n == s => break,
                    Some(&n) if !seen[n] => v = n,
                    _ => {
                        return Err((None, format!("boundary loop through vertex {s} is not closed")));
                    }
                }
            }
        }

        let h = if h > 0.0 && h.is_finite() {
            h
        } else {
            mean_edge_length(&vertices, &triangles)
        };
        Ok(Mesh {
            vertices,
            triangles,
            boundary,
            h,
            areas,
            n_loops,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    /// Characteristic edge length: the generator target, or the mean edge
    /// length for meshes read from text.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        self.areas[t]
    }

    pub fn triangle_areas(&self) -> &[f64] {
        &self.areas
    }

    /// Total area of the triangulated polygon.
    pub fn area(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn boundary_loop_count(&self) -> usize {
        self.n_loops
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangle_points(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Neighbor across the edge opposite each local vertex.
    pub fn triangle_neighbors(&self) -> Vec<[Option<usize>; 3]> {
        let mut owner: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * self.triangles.len());
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                owner.insert((tri[k], tri[(k + 1) % 3]), t);
            }
        }
        self.triangles
            .iter()
            .map(|tri| {
                let mut nb = [None; 3];
                for (k, slot) in nb.iter_mut().enumerate() {
                    let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                    *slot = owner.get(&(b, a)).copied();
                }
                nb
            })
            .collect()
    }

    /// Sorted vertex adjacency lists.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut nb = vec![Vec::new(); self.vertices.len()];
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                nb[a].push(b);
                nb[b].push(a);
            }
        }
        for list in &mut nb {
            list.sort_unstable();
            list.dedup();
        }
        nb
    }

    /// Triangles incident to each vertex.
    pub fn vertex_triangles(&self) -> Vec<Vec<usize>> {
        let mut star = vec![Vec::new(); self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                star[v].push(t);
            }
        }
        star
    }

    /// Undirected edges, each listed once with the smaller index first.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut edges: Vec<[usize; 2]> = self
            .triangles
            .iter()
            .flat_map(|tri| {
                (0..3).map(move |k| {
                    let (a, b) = (tri[k], tri[(k + 1) % 3]);
                    [a.min(b), a.max(b)]
                })
            })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Index of a triangle containing `p`, and the barycentric coordinates of
    /// `p` in it.
    pub fn locate(&self, p: Point) -> Option<(usize, [f64; 3])> {
        const TOL: f64 = 1e-12;
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for t in 0..self.triangles.len() {
            let bary = barycentric(self.triangle_points(t), p);
            let worst = bary.iter().cloned().fold(f64::INFINITY, f64::min);
            if worst >= -TOL {
                return Some((t, bary));
            }
            if best.as_ref().is_none_or(|b| worst > b.2) {
                best = Some((t, bary, worst));
            }
        }
        // tolerate points a hair outside a boundary edge
        best.filter(|b| b.2 >= -1e-9).map(|b| (b.0, b.1))
    }

    pub fn count_interior(&self) -> usize {
        self.boundary.iter().filter(|b| !**b).count()
    }
}

pub fn norm(p: Point) -> f64 {
    p[0].hypot(p[1])
}

pub fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

pub fn barycentric(tri: [Point; 3], p: Point) -> [f64; 3] {
    let [a, b, c] = tri;
    let area = signed_area(a, b, c);
    let l0 = signed_area(p, b, c) / area;
    let l1 = signed_area(a, p, c) / area;
    [l0, l1, 1.0 - l0 - l1]
}

fn mean_edge_length(vertices: &[Point], triangles: &[[usize; 3]]) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for tri in triangles {
        for k in 0..3 {
            total += dist(vertices[tri[k]], vertices[tri[(k + 1) % 3]]);
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

fn check_h(h: f64, scale: f64) -> Result<()> {
    if !(h > 0.0 && h < scale) {
        return Err(Error::arg(format!(
            "edge length h must satisfy 0 < h < {scale}, got {h}"
        )));
    }
    Ok(())
}

/// Unit-disk style mesh centered at the origin.
pub fn generate_disk(radius: f64, h: f64) -> Result<Mesh> {
    let domain = Domain::Disk { radius };
    domain.validate()?;
    check_h(h, radius)?;
    generate(&domain, h)
}

pub fn generate_annulus(r_inner: f64, r_outer: f64, h: f64) -> Result<Mesh> {
    let domain = Domain::Annulus { r_inner, r_outer };
    domain.validate()?;
    check_h(h, r_outer)?;
    generate(&domain, h)
}

pub fn generate_disk_with_hole(radius: f64, hole_center: Point, hole_radius: f64, h: f64) -> Result<Mesh> {
    let domain = Domain::DiskWithHole {
        radius,
        hole_center,
        hole_radius,
    };
    domain.validate()?;
    check_h(h, radius)?;
    generate(&domain, h)
}

/// Structured right-triangle mesh of the rectangle `[x0, x1] × [y0, y1]`.
pub fn generate_rectangle(lower: Point, upper: Point, nx: usize, ny: usize) -> Result<Mesh> {
    if nx == 0 || ny == 0 || !(upper[0] > lower[0] && upper[1] > lower[1]) {
        return Err(Error::arg("rectangle needs positive extent and cell counts"));
    }
    let dx = (upper[0] - lower[0]) / nx as f64;
    let dy = (upper[1] - lower[1]) / ny as f64;
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    let mut boundary = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([lower[0] + i as f64 * dx, lower[1] + j as f64 * dy]);
            boundary.push(i == 0 || j == 0 || i == nx || j == ny);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    Mesh::new(vertices, triangles, boundary, dx.max(dy))
}

fn circle(center: Point, radius: f64, h: f64) -> Vec<Point> {
    let n = ((2.0 * PI * radius / h).ceil() as usize).max(8).div_ceil(4) * 4;
    (0..n)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
        })
        .collect()
}

fn generate(domain: &Domain, h: f64) -> Result<Mesh> {
    let r_out = domain.outer_radius();
    let estimated = (domain.area() / (0.75f64.sqrt() * h * h)) as usize + (2.0 * PI * r_out / h) as usize;
    if estimated > VERTEX_BUDGET {
        return Err(Error::Capacity {
            estimated,
            budget: VERTEX_BUDGET,
        });
    }

    let mut points: Vec<Point> = Vec::with_capacity(estimated + 16);
    let mut loops: Vec<std::ops::Range<usize>> = Vec::new();
    let outer = circle([0.0, 0.0], r_out, h);
    loops.push(0..outer.len());
    points.extend(outer);
    let mut hole_polygon: Vec<Point> = Vec::new();
    if let Some((c, r)) = domain.inner_circle() {
        let inner = circle(c, r, h);
        let start = points.len();
        loops.push(start..start + inner.len());
        hole_polygon = inner.clone();
        points.extend(inner);
    }
    let n_fixed = points.len();

    let dy = 0.75f64.sqrt() * h;
    let rows = (r_out / dy).ceil() as i64 + 1;
    let cols = (r_out / h).ceil() as i64 + 1;
    let clearance = BOUNDARY_CLEARANCE * h;
    for j in -rows..=rows {
        let shift = if j.rem_euclid(2) == 1 { 0.5 } else { 0.0 };
        for i in -cols..=cols {
            let p = [(i as f64 + shift) * h, j as f64 * dy];
            if domain.contains(p, clearance) {
                points.push(p);
            }
        }
    }

    let mut edges: Vec<[usize; 2]> = Vec::new();
    for range in &loops {
        let n = range.len();
        for k in 0..n {
            edges.push([range.start + k, range.start + (k + 1) % n]);
        }
    }

    let triangles = triangulate(&points, &edges, &hole_polygon)?;
    let smoothed = smooth(domain, &points, &triangles, n_fixed, h);
    let triangles = triangulate(&smoothed, &edges, &hole_polygon)?;

    let boundary = (0..smoothed.len()).map(|i| i < n_fixed).collect();
    Mesh::new(smoothed, triangles, boundary, h)
}

fn triangulate(points: &[Point], edges: &[[usize; 2]], hole: &[Point]) -> Result<Vec<[usize; 3]>> {
    let vertices: Vec<Point2<f64>> = points.iter().map(|p| Point2::new(p[0], p[1])).collect();
    let cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::bulk_load_cdt(vertices, edges.to_vec())
        .map_err(|e| Error::InvalidMesh(format!("triangulation failed: {e:?}")))?;
    if cdt.num_vertices() != points.len() {
        return Err(Error::InvalidMesh("generator produced duplicate points".into()));
    }
    let mut triangles = Vec::with_capacity(cdt.num_inner_faces());
    for face in cdt.inner_faces() {
        let [a, b, c] = face.vertices().map(|v| v.fix().index());
        let mut tri = [a, b, c];
        if signed_area(points[a], points[b], points[c]) < 0.0 {
            tri.swap(1, 2);
        }
        let g = {
            let [p, q, r] = [points[tri[0]], points[tri[1]], points[tri[2]]];
            [(p[0] + q[0] + r[0]) / 3.0, (p[1] + q[1] + r[1]) / 3.0]
        };
        if !hole.is_empty() && inside_convex_polygon(hole, g) {
            continue;
        }
        triangles.push(tri);
    }
    // deterministic ordering independent of the triangulator's face order
    triangles.sort_unstable_by_key(|t| {
        let mut s = *t;
        s.sort_unstable();
        s
    });
    Ok(triangles)
}

fn inside_convex_polygon(poly: &[Point], p: Point) -> bool {
    let n = poly.len();
    (0..n).all(|k| signed_area(poly[k], poly[(k + 1) % n], p) > 0.0)
}

/// Jacobi Laplacian smoothing of the free lattice points.
fn smooth(domain: &Domain, points: &[Point], triangles: &[[usize; 3]], n_fixed: usize, h: f64) -> Vec<Point> {
    let mut nb = vec![Vec::new(); points.len()];
    for tri in triangles {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            nb[a].push(b);
            nb[b].push(a);
        }
    }
    for list in &mut nb {
        list.sort_unstable();
        list.dedup();
    }
    let min_clearance = 0.35 * h;
    let mut current = points.to_vec();
    for _ in 0..SMOOTHING_SWEEPS {
        let mut next = current.clone();
        for v in n_fixed..current.len() {
            if nb[v].is_empty() {
                continue;
            }
            let mut s = [0.0, 0.0];
            for &u in &nb[v] {
                s[0] += current[u][0];
                s[1] += current[u][1];
            }
            let k = nb[v].len() as f64;
            let cand = [s[0] / k, s[1] / k];
            if domain.contains(cand, min_clearance) {
                next[v] = cand;
            }
        }
        current = next;
    }
    current
}

/// Angle statistics over all triangles.
pub fn quality(mesh: &Mesh) -> MeshQuality {
    let mut min_angle = f64::INFINITY;
    let mut max_angle: f64 = 0.0;
    let mut nonobtuse = 0usize;
    for t in 0..mesh.n_triangles() {
        let angles = triangle_angles(mesh.triangle_points(t));
        let lo = angles.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = angles.iter().cloned().fold(0.0, f64::max);
        min_angle = min_angle.min(lo);
        max_angle = max_angle.max(hi);
        if hi <= 90.0 + 1e-9 {
            nonobtuse += 1;
        }
    }
    MeshQuality {
        min_angle,
        max_angle,
        nonobtuse_fraction: nonobtuse as f64 / mesh.n_triangles() as f64,
        n_triangles: mesh.n_triangles(),
    }
}

fn triangle_angles(p: [Point; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for k in 0..3 {
        let a = p[k];
        let b = p[(k + 1) % 3];
        let c = p[(k + 2) % 3];
        let u = [b[0] - a[0], b[1] - a[1]];
        let v = [c[0] - a[0], c[1] - a[1]];
        let cross = u[0] * v[1] - u[1] * v[0];
        let dot = u[0] * v[0] + u[1] * v[1];
        out[k] = cross.abs().atan2(dot).to_degrees();
    }
    out
}

/// Serializes a mesh: `nv nt`, then `x y b` per vertex, then `i j k` per
/// triangle. Coordinates carry 17 significant digits.
pub fn save_mesh(mesh: &Mesh) -> String {
    let mut out = String::with_capacity(64 * mesh.n_vertices() + 24 * mesh.n_triangles());
    let _ = writeln!(out, "{} {}", mesh.n_vertices(), mesh.n_triangles());
    for (p, &b) in mesh.vertices.iter().zip(&mesh.boundary) {
        let _ = writeln!(out, "{:.16e} {:.16e} {}", p[0], p[1], u8::from(b));
    }
    for t in &mesh.triangles {
        let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
    }
    out
}

/// Parses the format written by [`save_mesh`]. Errors carry 1-based line numbers.
pub fn load_mesh(text: &str) -> Result<Mesh> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let parse_err = |line: usize, message: String| Error::Parse { line, message };

    let (ln, header) = lines.next().ok_or_else(|| parse_err(1, "empty mesh file".into()))?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 2 {
        return Err(parse_err(ln, format!("expected `nv nt`, found `{header}`")));
    }
    let nv: usize = head[0]
        .parse()
        .map_err(|_| parse_err(ln, format!("bad vertex count `{}`", head[0])))?;
    let nt: usize = head[1]
        .parse()
        .map_err(|_| parse_err(ln, format!("bad triangle count `{}`", head[1])))?;

    let mut vertices = Vec::with_capacity(nv);
    let mut boundary = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| parse_err(2 + vertices.len(), "unexpected end of file in vertex block".into()))?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(parse_err(ln, format!("expected `x y b`, found `{line}`")));
        }
        let x: f64 = f[0]
            .parse()
            .map_err(|_| parse_err(ln, format!("bad coordinate `{}`", f[0])))?;
        let y: f64 = f[1]
            .parse()
            .map_err(|_| parse_err(ln, format!("bad coordinate `{}`", f[1])))?;
        let b = match f[2] {
            "0" => false,
            "1" => true,
            other => return Err(parse_err(ln, format!("boundary flag must be 0 or 1, found `{other}`"))),
        };
        vertices.push([x, y]);
        boundary.push(b);
    }
    let mut triangles = Vec::with_capacity(nt);
    let first_tri_line = nv + 2;
    for t in 0..nt {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| parse_err(first_tri_line + t, "unexpected end of file in triangle block".into()))?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(parse_err(ln, format!("expected `i j k`, found `{line}`")));
        }
        let mut tri = [0usize; 3];
        for (slot, s) in tri.iter_mut().zip(&f) {
            *slot = s
                .parse()
                .map_err(|_| parse_err(ln, format!("bad vertex index `{s}`")))?;
            if *slot >= nv {
                return Err(parse_err(
                    ln,
                    format!("vertex index {} out of range (nv = {nv})", *slot),
                ));
            }
        }
        triangles.push(tri);
    }
    if let Some((ln, extra)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(parse_err(ln, format!("unexpected trailing content `{extra}`")));
    }
    Mesh::build(vertices, triangles, boundary, 0.0).map_err(|(tri, message)| Error::Parse {
        line: tri.map_or(0, |t| first_tri_line + t),
        message,
    })
}
