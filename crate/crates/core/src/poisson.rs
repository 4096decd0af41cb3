//! P1 discretization of `−Δu = f` with homogeneous Dirichlet data.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::sparse::{conjugate_gradient, CgOptions, CgStats, CsrMatrix};

/// Nodal coefficients of a P1 function.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(values: Vec<f64>) -> Self {
        ScalarField { values }
    }

    pub fn zeros(n: usize) -> Self {
        ScalarField { values: vec![0.0; n] }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        ScalarField { values: vec![c; n] }
    }

    /// Interpolates `f` at the mesh vertices.
    pub fn interpolate(mesh: &Mesh, f: impl Fn(Point) -> f64) -> Self {
        ScalarField {
            values: mesh.vertices().iter().map(|&p| f(p)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        if self.values.len() != mesh.n_vertices() {
            return Err(Error::arg(format!(
                "field has {} values but the mesh has {} vertices",
                self.values.len(),
                mesh.n_vertices()
            )));
        }
        Ok(())
    }
}

/// A point mass of the control.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub weight: f64,
    pub location: Point,
}

/// A control: nodal density plus finitely many atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct Control {
    pub density: ScalarField,
    pub atoms: Vec<Atom>,
}

impl Control {
    pub fn from_density(density: ScalarField) -> Self {
        Control {
            density,
            atoms: Vec::new(),
        }
    }

    pub fn zero(n: usize) -> Self {
        Control::from_density(ScalarField::zeros(n))
    }

    pub fn single_atom(n: usize, weight: f64, location: Point) -> Self {
        Control {
            density: ScalarField::zeros(n),
            atoms: vec![Atom { weight, location }],
        }
    }

    pub fn total_atom_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// `(1−t)·self + t·other`, merging atoms at identical locations.
    pub fn blend(&self, other: &Control, t: f64) -> Control {
        let density = self
            .density
            .values
            .iter()
            .zip(&other.density.values)
            .map(|(a, b)| a + t * (b - a))
            .collect();
        let mut atoms: Vec<Atom> = self
            .atoms
            .iter()
            .map(|a| Atom {
                weight: (1.0 - t) * a.weight,
                location: a.location,
            })
            .collect();
        for b in &other.atoms {
            match atoms.iter_mut().find(|a| a.location == b.location) {
                Some(a) => a.weight += t * b.weight,
                None => atoms.push(Atom {
                    weight: t * b.weight,
                    location: b.location,
                }),
            }
        }
        atoms.retain(|a| a.weight != 0.0);
        Control {
            density: ScalarField::new(density),
            atoms,
        }
    }

    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        self.density.check_mesh(mesh)?;
        if let Some(i) = self.density.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::arg(format!("control density is not finite at vertex {i}")));
        }
        for a in &self.atoms {
            if !a.weight.is_finite() {
                return Err(Error::arg("atom weight is not finite"));
            }
            if mesh.locate(a.location).is_none() {
                return Err(Error::Geometry {
                    x: a.location[0],
                    y: a.location[1],
                });
            }
        }
        Ok(())
    }
}

/// Stiffness restricted to the free (interior) vertices.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    pub matrix: CsrMatrix,
    /// Mesh vertex of each free unknown.
    pub free: Vec<usize>,
    /// Free unknown of each mesh vertex, if any.
    pub slot: Vec<Option<usize>>,
}

impl SparseOperator {
    /// Solves with a load given over all vertices; boundary entries of the
    /// load are ignored and boundary values of the result are zero.
    pub fn solve(&self, load: &[f64], opts: CgOptions) -> Result<(Vec<f64>, CgStats)> {
        let b: Vec<f64> = self.free.iter().map(|&v| load[v]).collect();
        let (x, stats) = conjugate_gradient(&self.matrix, &b, opts)?;
        let mut u = vec![0.0; self.slot.len()];
        for (k, &v) in self.free.iter().enumerate() {
            u[v] = x[k];
        }
        Ok((u, stats))
    }
}

/// Gradients of the three barycentric basis functions, and the area.
pub fn basis_gradients(p: [Point; 3]) -> ([[f64; 2]; 3], f64) {
    let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let j = (i + 1) % 3;
        let k = (i + 2) % 3;
        g[i] = [(p[j][1] - p[k][1]) / (2.0 * area), (p[k][0] - p[j][0]) / (2.0 * area)];
    }
    (g, area)
}

fn stiffness_triplets(mesh: &Mesh) -> Vec<(usize, usize, f64)> {
    let mut t = Vec::with_capacity(9 * mesh.n_triangles());
    for (ti, tri) in mesh.triangles().iter().enumerate() {
        let (g, area) = basis_gradients(mesh.triangle_points(ti));
        for a in 0..3 {
            for b in a..3 {
                let k = area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                t.push((tri[a], tri[b], k));
                if a != b {
                    t.push((tri[b], tri[a], k));
                }
            }
        }
    }
    t
}

/// Stiffness matrix over every vertex, before boundary elimination.
pub fn assemble_full_stiffness(mesh: &Mesh) -> CsrMatrix {
    CsrMatrix::from_triplets(mesh.n_vertices(), stiffness_triplets(mesh))
}

/// Stiffness matrix over the interior vertices.
pub fn assemble_stiffness(mesh: &Mesh) -> Result<SparseOperator> {
    let mut slot = vec![None; mesh.n_vertices()];
    let mut free = Vec::new();
    for v in 0..mesh.n_vertices() {
        if !mesh.is_boundary(v) {
            slot[v] = Some(free.len());
            free.push(v);
        }
    }
    if free.is_empty() {
        return Err(Error::Degenerate("mesh has no interior vertex".into()));
    }
    let triplets = stiffness_triplets(mesh)
        .into_iter()
        .filter_map(|(i, j, v)| Some((slot[i]?, slot[j]?, v)))
        .collect();
    Ok(SparseOperator {
        matrix: CsrMatrix::from_triplets(free.len(), triplets),
        free,
        slot,
    })
}

/// Consistent P1 mass matrix.
pub fn assemble_mass(mesh: &Mesh) -> CsrMatrix {
    let mut t = Vec::with_capacity(9 * mesh.n_triangles());
    for (ti, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.triangle_area(ti);
        for a in 0..3 {
            for b in 0..3 {
                let w = if a == b { area / 6.0 } else { area / 12.0 };
                t.push((tri[a], tri[b], w));
            }
        }
    }
    CsrMatrix::from_triplets(mesh.n_vertices(), t)
}

/// Row sums of the mass matrix: the exact integral of each hat function.
pub fn lumped_mass(mesh: &Mesh) -> Vec<f64> {
    let mut l = vec![0.0; mesh.n_vertices()];
    for (ti, tri) in mesh.triangles().iter().enumerate() {
        let a = mesh.triangle_area(ti) / 3.0;
        for &v in tri {
            l[v] += a;
        }
    }
    l
}

/// Integral of the P1 interpolant of nodal values.
pub fn integrate_nodal(mesh: &Mesh, values: &[f64]) -> f64 {
    mesh.triangles()
        .iter()
        .enumerate()
        .map(|(t, tri)| mesh.triangle_area(t) * (values[tri[0]] + values[tri[1]] + values[tri[2]]) / 3.0)
        .sum()
}

/// Integral of a piecewise-constant function given per triangle.
pub fn integrate_cellwise(mesh: &Mesh, values: &[f64]) -> f64 {
    mesh.triangle_areas().iter().zip(values).map(|(a, v)| a * v).sum()
}

/// Gradient of the P1 interpolant, one vector per triangle.
pub fn gradient(mesh: &Mesh, values: &[f64]) -> Vec<[f64; 2]> {
    mesh.triangles()
        .iter()
        .enumerate()
        .map(|(t, tri)| {
            let (g, _) = basis_gradients(mesh.triangle_points(t));
            let mut d = [0.0; 2];
            for k in 0..3 {
                d[0] += values[tri[k]] * g[k][0];
                d[1] += values[tri[k]] * g[k][1];
            }
            d
        })
        .collect()
}

/// Value of the P1 interpolant at `p`.
pub fn evaluate(mesh: &Mesh, values: &[f64], p: Point) -> Result<f64> {
    let (t, bary) = mesh.locate(p).ok_or(Error::Geometry { x: p[0], y: p[1] })?;
    let tri = mesh.triangles()[t];
    Ok(bary[0] * values[tri[0]] + bary[1] * values[tri[1]] + bary[2] * values[tri[2]])
}

/// Load vector of a list of atoms: barycentric weights in the containing triangle.
pub fn point_load_vector(mesh: &Mesh, atoms: &[Atom]) -> Result<Vec<f64>> {
    let mut load = vec![0.0; mesh.n_vertices()];
    add_point_loads(mesh, atoms, &mut load)?;
    Ok(load)
}

fn add_point_loads(mesh: &Mesh, atoms: &[Atom], load: &mut [f64]) -> Result<()> {
    for a in atoms {
        let (t, bary) = mesh.locate(a.location).ok_or(Error::Geometry {
            x: a.location[0],
            y: a.location[1],
        })?;
        let tri = mesh.triangles()[t];
        for k in 0..3 {
            if bary[k] != 0.0 {
                load[tri[k]] += a.weight * bary[k];
            }
        }
    }
    Ok(())
}

pub(crate) fn check_cg_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol <= 1e-4) {
        return Err(Error::arg(format!("cg_tol must lie in (0, 1e-4], got {tol}")));
    }
    Ok(())
}

/// Cached operators for repeated solves on one mesh.
#[derive(Debug, Clone)]
pub struct FemSpace<'m> {
    mesh: &'m Mesh,
    stiffness: SparseOperator,
    mass: CsrMatrix,
    lumped: Vec<f64>,
    lumped_load: bool,
    max_iters: Option<usize>,
}

impl<'m> FemSpace<'m> {
    pub fn new(mesh: &'m Mesh) -> Result<Self> {
        Ok(FemSpace {
            mesh,
            stiffness: assemble_stiffness(mesh)?,
            mass: assemble_mass(mesh),
            lumped: lumped_mass(mesh),
            lumped_load: false,
            max_iters: None,
        })
    }

    /// Use the row-summed mass matrix for density loads.
    pub fn with_lumped_load(mut self, lumped: bool) -> Self {
        self.lumped_load = lumped;
        self
    }

    /// Overrides the default `20·√n` CG iteration cap.
    pub fn with_iteration_cap(mut self, cap: Option<usize>) -> Self {
        self.max_iters = cap;
        self
    }

    pub fn mesh(&self) -> &'m Mesh {
        self.mesh
    }

    pub fn stiffness(&self) -> &SparseOperator {
        &self.stiffness
    }

    pub fn mass_matrix(&self) -> &CsrMatrix {
        &self.mass
    }

    pub fn lumped_weights(&self) -> &[f64] {
        &self.lumped
    }

    pub fn domain_area(&self) -> f64 {
        self.mesh.area()
    }

    pub fn density_load(&self, density: &[f64]) -> Vec<f64> {
        if self.lumped_load {
            density.iter().zip(&self.lumped).map(|(f, l)| f * l).collect()
        } else {
            self.mass.mul_vec(density)
        }
    }

    /// Load vector `∫ f φ_i` of a control.
    pub fn control_load(&self, f: &Control) -> Result<Vec<f64>> {
        f.density.check_mesh(self.mesh)?;
        let mut load = self.density_load(&f.density.values);
        add_point_loads(self.mesh, &f.atoms, &mut load)?;
        Ok(load)
    }

    /// Solves against an explicit load vector.
    pub fn solve_load(&self, load: &[f64], cg_tol: f64) -> Result<Vec<f64>> {
        check_cg_tol(cg_tol)?;
        if load.len() != self.mesh.n_vertices() {
            return Err(Error::arg("load vector length differs from vertex count"));
        }
        let opts = CgOptions {
            tol: cg_tol,
            max_iters: self.max_iters,
        };
        Ok(self.stiffness.solve(load, opts)?.0)
    }

    /// The resolvent applied to a nodal density.
    pub fn solve_density(&self, density: &[f64], cg_tol: f64) -> Result<Vec<f64>> {
        self.solve_load(&self.density_load(density), cg_tol)
    }

    /// `u = ℛ(f)`.
    pub fn resolvent(&self, f: &Control, cg_tol: f64) -> Result<ScalarField> {
        let load = self.control_load(f)?;
        Ok(ScalarField::new(self.solve_load(&load, cg_tol)?))
    }

    /// Discrete pairing `∫ w f`, exact for P1 `w` against the control's load.
    pub fn inner(&self, w: &[f64], f: &Control) -> Result<f64> {
        let load = self.control_load(f)?;
        Ok(w.iter().zip(&load).map(|(a, b)| a * b).sum())
    }

    /// `∫ f`, atoms included.
    pub fn total_mass(&self, f: &Control) -> f64 {
        integrate_nodal(self.mesh, &f.density.values) + f.total_atom_weight()
    }
}

/// One-shot resolvent.
pub fn resolvent(mesh: &Mesh, f: &Control, cg_tol: f64) -> Result<ScalarField> {
    FemSpace::new(mesh)?.resolvent(f, cg_tol)
}

/// Writes `x y value` per vertex.
pub fn save_field(mesh: &Mesh, field: &ScalarField) -> String {
    let mut out = String::with_capacity(72 * field.len());
    for (p, v) in mesh.vertices().iter().zip(&field.values) {
        let _ = writeln!(out, "{:.16e} {:.16e} {:.16e}", p[0], p[1], v);
    }
    out
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad number `{s}`"),
    })
}

fn check_location(mesh: &Mesh, v: usize, x: f64, y: f64, line: usize) -> Result<()> {
    let p = mesh.vertices()[v];
    let scale = 1e-9 * (1.0 + p[0].abs().max(p[1].abs()));
    if (p[0] - x).abs() > scale || (p[1] - y).abs() > scale {
        return Err(Error::Parse {
            line,
            message: format!("coordinates ({x}, {y}) do not match vertex {v} of the mesh"),
        });
    }
    Ok(())
}

/// Reads the format written by [`save_field`].
pub fn load_field(mesh: &Mesh, text: &str) -> Result<ScalarField> {
    let mut values = Vec::with_capacity(mesh.n_vertices());
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ln = i + 1;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(Error::Parse {
                line: ln,
                message: format!("expected `x y value`, found `{line}`"),
            });
        }
        if values.len() >= mesh.n_vertices() {
            return Err(Error::Parse {
                line: ln,
                message: "more values than mesh vertices".into(),
            });
        }
        let (x, y) = (parse_f64(f[0], ln)?, parse_f64(f[1], ln)?);
        check_location(mesh, values.len(), x, y, ln)?;
        values.push(parse_f64(f[2], ln)?);
    }
    if values.len() != mesh.n_vertices() {
        return Err(Error::Parse {
            line: text.lines().count(),
            message: format!("found {} values for {} vertices", values.len(), mesh.n_vertices()),
        });
    }
    Ok(ScalarField::new(values))
}

/// Writes a control: `nv na`, then `x y density` per vertex, then `weight x y` per atom.
pub fn save_control(mesh: &Mesh, f: &Control) -> String {
    let mut out = format!("{} {}\n", f.density.len(), f.atoms.len());
    out.push_str(&save_field(mesh, &f.density));
    for a in &f.atoms {
        let _ = writeln!(out, "{:.16e} {:.16e} {:.16e}", a.weight, a.location[0], a.location[1]);
    }
    out
}

/// Reads the format written by [`save_control`].
pub fn load_control(mesh: &Mesh, text: &str) -> Result<Control> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (ln, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty control file".into(),
    })?;
    let head: Vec<&str> = header.split_whitespace().collect();
    let bad_header = || Error::Parse {
        line: ln,
        message: format!("expected `nv na`, found `{header}`"),
    };
    if head.len() != 2 {
        return Err(bad_header());
    }
    let nv: usize = head[0].parse().map_err(|_| bad_header())?;
    let na: usize = head[1].parse().map_err(|_| bad_header())?;
    if nv != mesh.n_vertices() {
        return Err(Error::Parse {
            line: ln,
            message: format!("control has {nv} vertices, mesh has {}", mesh.n_vertices()),
        });
    }
    let mut values = Vec::with_capacity(nv);
    let mut atoms = Vec::with_capacity(na);
    for k in 0..nv + na {
        let (ln, line) = lines.next().ok_or(Error::Parse {
            line: k + 2,
            message: "unexpected end of control file".into(),
        })?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(Error::Parse {
                line: ln,
                message: format!("expected three numbers, found `{line}`"),
            });
        }
        let nums = [parse_f64(f[0], ln)?, parse_f64(f[1], ln)?, parse_f64(f[2], ln)?];
        if k < nv {
            check_location(mesh, k, nums[0], nums[1], ln)?;
            values.push(nums[2]);
        } else {
            atoms.push(Atom {
                weight: nums[0],
                location: [nums[1], nums[2]],
            });
        }
    }
    let f = Control {
        density: ScalarField::new(values),
        atoms,
    };
    f.validate(mesh)?;
    Ok(f)
}
