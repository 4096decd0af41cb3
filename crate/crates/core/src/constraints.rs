//! Integral constraints `∫ψ(f) ≤ m`: the convex integrands, their conjugates,
//! and the exact minimizer of a linear functional over the admissible set.

use std::cmp::Ordering;
use std::fmt;

use crate::analysis::level_set::sublevel_area;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::poisson::{Atom, Control, FemSpace, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintKind {
    /// `ψ(s) = |s|`; atoms of either sign allowed.
    TvBound,
    /// `ψ(s) = s` on `[0, ∞)`; nonnegative atoms allowed.
    NonnegMass,
    /// `ψ(s) = s` on `[α, β]`: an upper mass bound with box bounds.
    BoxMass,
    /// `ψ(s) = −s` on `[α, β]`, level `−m`: a lower mass bound with box bounds.
    BoxMassLower,
    /// `ψ(s) = s²`.
    Quadratic,
}

impl ConstraintKind {
    pub const ALL: [ConstraintKind; 5] = [
        ConstraintKind::TvBound,
        ConstraintKind::NonnegMass,
        ConstraintKind::BoxMass,
        ConstraintKind::BoxMassLower,
        ConstraintKind::Quadratic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConstraintKind::TvBound => "tv_bound",
            ConstraintKind::NonnegMass => "nonneg_mass",
            ConstraintKind::BoxMass => "box_mass",
            ConstraintKind::BoxMassLower => "box_mass_lower",
            ConstraintKind::Quadratic => "quadratic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let s = s.to_ascii_lowercase().replace('-', "_");
        ConstraintKind::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn is_boxed(self) -> bool {
        matches!(self, ConstraintKind::BoxMass | ConstraintKind::BoxMassLower)
    }

    /// Kinds whose linearized minimizer is a point mass.
    pub fn allows_atoms(self) -> bool {
        matches!(self, ConstraintKind::TvBound | ConstraintKind::NonnegMass)
    }
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Closed interval of extended reals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi);
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Distance from `x` to the interval.
    pub fn distance(&self, x: f64) -> f64 {
        if x < self.lo {
            self.lo - x
        } else if x > self.hi {
            x - self.hi
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintSpec {
    pub kind: ConstraintKind,
    pub m: f64,
    pub alpha: f64,
    pub beta: f64,
}

const INF: f64 = f64::INFINITY;

impl ConstraintSpec {
    pub fn tv_bound(m: f64) -> Self {
        ConstraintSpec {
            kind: ConstraintKind::TvBound,
            m,
            alpha: f64::NAN,
            beta: f64::NAN,
        }
    }

    pub fn nonneg_mass(m: f64) -> Self {
        ConstraintSpec {
            kind: ConstraintKind::NonnegMass,
            ..Self::tv_bound(m)
        }
    }

    pub fn quadratic(m: f64) -> Self {
        ConstraintSpec {
            kind: ConstraintKind::Quadratic,
            ..Self::tv_bound(m)
        }
    }

    pub fn box_mass(alpha: f64, beta: f64, m: f64) -> Self {
        ConstraintSpec {
            kind: ConstraintKind::BoxMass,
            m,
            alpha,
            beta,
        }
    }

    pub fn box_mass_lower(alpha: f64, beta: f64, m: f64) -> Self {
        ConstraintSpec {
            kind: ConstraintKind::BoxMassLower,
            m,
            alpha,
            beta,
        }
    }

    /// Right-hand side of `∫ψ(f) ≤ level`.
    pub fn level(&self) -> f64 {
        match self.kind {
            ConstraintKind::BoxMassLower => -self.m,
            _ => self.m,
        }
    }

    /// Checks the spec against a domain of the given area.
    pub fn validate(&self, area: f64) -> Result<()> {
        if !(self.m > 0.0 && self.m.is_finite()) {
            return Err(Error::Constraint(format!(
                "mass level m must be positive, got {}",
                self.m
            )));
        }
        if !self.kind.is_boxed() {
            return Ok(());
        }
        let (a, b, m) = (self.alpha, self.beta, self.m);
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::Constraint(format!(
                "box bounds must satisfy alpha < beta, got ({a}, {b})"
            )));
        }
        let lo = a * area;
        let hi = b * area;
        if !(lo < m) {
            return Err(Error::Constraint(format!(
                "bound alpha|Omega| < m violated: alpha|Omega| = {lo}, m = {m}"
            )));
        }
        match self.kind {
            ConstraintKind::BoxMass if m > hi => Err(Error::Constraint(format!(
                "bound m <= beta|Omega| violated: m = {m}, beta|Omega| = {hi}"
            ))),
            ConstraintKind::BoxMassLower if m >= hi => Err(Error::Constraint(format!(
                "bound m < beta|Omega| violated: m = {m}, beta|Omega| = {hi}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn psi(&self, s: f64) -> f64 {
        match self.kind {
            ConstraintKind::TvBound => s.abs(),
            ConstraintKind::NonnegMass => {
                if s >= 0.0 {
                    s
                } else {
                    INF
                }
            }
            ConstraintKind::BoxMass => {
                if self.alpha <= s && s <= self.beta {
                    s
                } else {
                    INF
                }
            }
            ConstraintKind::BoxMassLower => {
                if self.alpha <= s && s <= self.beta {
                    -s
                } else {
                    INF
                }
            }
            ConstraintKind::Quadratic => s * s,
        }
    }

    /// `ψ*(t) = sup_s (ts − ψ(s))`.
    pub fn psi_star(&self, t: f64) -> f64 {
        let (a, b) = (self.alpha, self.beta);
        match self.kind {
            ConstraintKind::TvBound => {
                if t.abs() <= 1.0 {
                    0.0
                } else {
                    INF
                }
            }
            ConstraintKind::NonnegMass => {
                if t <= 1.0 {
                    0.0
                } else {
                    INF
                }
            }
            ConstraintKind::BoxMass => {
                if t <= 1.0 {
                    (t - 1.0) * a
                } else {
                    (t - 1.0) * b
                }
            }
            ConstraintKind::BoxMassLower => {
                if t <= -1.0 {
                    (t + 1.0) * a
                } else {
                    (t + 1.0) * b
                }
            }
            ConstraintKind::Quadratic => 0.25 * t * t,
        }
    }

    /// `∂ψ*(t)`; `None` when empty.
    pub fn psi_star_subdiff(&self, t: f64) -> Option<Interval> {
        let (a, b) = (self.alpha, self.beta);
        let kink = |pivot: f64| {
            Some(match t.partial_cmp(&pivot)? {
                Ordering::Less => Interval::point(a),
                Ordering::Equal => Interval::new(a, b),
                Ordering::Greater => Interval::point(b),
            })
        };
        match self.kind {
            ConstraintKind::TvBound => match t {
                t if t.abs() < 1.0 => Some(Interval::point(0.0)),
                t if t == 1.0 => Some(Interval::new(0.0, INF)),
                t if t == -1.0 => Some(Interval::new(-INF, 0.0)),
                _ => None,
            },
            ConstraintKind::NonnegMass => match t {
                t if t < 1.0 => Some(Interval::point(0.0)),
                t if t == 1.0 => Some(Interval::new(0.0, INF)),
                _ => None,
            },
            ConstraintKind::BoxMass => kink(1.0),
            ConstraintKind::BoxMassLower => kink(-1.0),
            ConstraintKind::Quadratic => Some(Interval::point(0.5 * t)),
        }
    }

    /// `∂ψ(s)`; `None` outside the domain of ψ.
    pub fn psi_subdiff(&self, s: f64) -> Option<Interval> {
        let (a, b) = (self.alpha, self.beta);
        let boxed = |slope: f64| {
            if s == a {
                Some(Interval::new(-INF, slope))
            } else if s == b {
                Some(Interval::new(slope, INF))
            } else if a < s && s < b {
                Some(Interval::point(slope))
            } else {
                None
            }
        };
        match self.kind {
            ConstraintKind::TvBound => Some(match s.partial_cmp(&0.0)? {
                Ordering::Less => Interval::point(-1.0),
                Ordering::Equal => Interval::new(-1.0, 1.0),
                Ordering::Greater => Interval::point(1.0),
            }),
            ConstraintKind::NonnegMass => match s.partial_cmp(&0.0)? {
                Ordering::Less => None,
                Ordering::Equal => Some(Interval::new(-INF, 1.0)),
                Ordering::Greater => Some(Interval::point(1.0)),
            },
            ConstraintKind::BoxMass => boxed(1.0),
            ConstraintKind::BoxMassLower => boxed(-1.0),
            ConstraintKind::Quadratic => Some(Interval::point(2.0 * s)),
        }
    }

    /// Recession slopes `(c−, c+)` of ψ.
    pub fn recession(&self) -> (f64, f64) {
        match self.kind {
            ConstraintKind::TvBound => (-1.0, 1.0),
            ConstraintKind::NonnegMass => (-INF, 1.0),
            ConstraintKind::BoxMass | ConstraintKind::BoxMassLower | ConstraintKind::Quadratic => (-INF, INF),
        }
    }

    /// `sup D(ψ)`.
    pub fn domain_sup(&self) -> f64 {
        if self.kind.is_boxed() {
            self.beta
        } else {
            INF
        }
    }

    /// `inf D(ψ)`.
    pub fn domain_inf(&self) -> f64 {
        match self.kind {
            ConstraintKind::NonnegMass => 0.0,
            ConstraintKind::BoxMass | ConstraintKind::BoxMassLower => self.alpha,
            _ => -INF,
        }
    }

    /// Discrete `∫ψ(f)`: the P1 integral of the nodal values of ψ(f), plus
    /// `c±·weight` for each atom.
    pub fn integral(&self, space: &FemSpace<'_>, f: &Control) -> f64 {
        let l = space.lumped_weights();
        let mut total = 0.0;
        for (fi, li) in f.density.values.iter().zip(l) {
            total += li * self.psi(*fi);
        }
        let (cm, cp) = self.recession();
        for a in &f.atoms {
            total += match a.weight.partial_cmp(&0.0) {
                Some(Ordering::Greater) => cp * a.weight,
                Some(Ordering::Less) => cm * a.weight,
                _ => 0.0,
            };
        }
        total
    }

    /// Checks `f` against the admissible set with an absolute slack `tol`.
    pub fn check_admissible(&self, space: &FemSpace<'_>, f: &Control, tol: f64) -> Result<()> {
        let (lo, hi) = (self.domain_inf(), self.domain_sup());
        if let Some(i) = f.density.values.iter().position(|&v| v < lo - tol || v > hi + tol) {
            return Err(Error::arg(format!(
                "control value {} at vertex {i} lies outside [{lo}, {hi}]",
                f.density.values[i]
            )));
        }
        if !f.atoms.is_empty() && !self.kind.allows_atoms() {
            return Err(Error::arg(format!("{} controls cannot carry atoms", self.kind)));
        }
        let clamped = Control {
            density: ScalarField::new(f.density.values.iter().map(|v| v.clamp(lo, hi)).collect()),
            atoms: f.atoms.clone(),
        };
        let total = self.integral(space, &clamped);
        if !(total <= self.level() + tol * (1.0 + self.m.abs())) {
            return Err(Error::arg(format!(
                "integral constraint violated: {total} > {}",
                self.level()
            )));
        }
        Ok(())
    }

    /// The uniform density saturating the constraint; admissible for every kind.
    pub fn initial_control(&self, space: &FemSpace<'_>) -> Control {
        let n = space.mesh().n_vertices();
        let level = match self.kind {
            ConstraintKind::Quadratic => (self.m / space.domain_area()).sqrt(),
            _ => self.m / space.domain_area(),
        };
        Control::from_density(ScalarField::constant(n, level))
    }
}

/// Result of the linearized problem.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutput {
    pub control: Control,
    /// Multiplier read off the minimizer.
    pub lambda: f64,
    /// Vertex carrying the atom, for atom-valued minimizers.
    pub vertex: Option<usize>,
}

/// Options for [`linearized_oracle`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OracleOptions {
    /// Move atoms off their vertex to the stationary point of a quadratic
    /// fitted over the 1-ring.
    pub refine_atoms: bool,
}

/// `(M w)_i / ℓ_i`: the weight each nodal control value sees in `∫ w f`.
pub fn projected_weights(space: &FemSpace<'_>, w: &[f64]) -> Vec<f64> {
    let mw = space.mass_matrix().mul_vec(w);
    mw.iter().zip(space.lumped_weights()).map(|(a, l)| a / l).collect()
}

fn sorted_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]).then(i.cmp(&j)));
    order
}

/// Minimizes the discrete `∫ w f` over `{f : ∫ψ(f) ≤ level}`.
pub fn linearized_oracle(
    spec: &ConstraintSpec,
    space: &FemSpace<'_>,
    w: &[f64],
    opts: OracleOptions,
) -> Result<OracleOutput> {
    let mesh = space.mesh();
    if w.len() != mesh.n_vertices() {
        return Err(Error::arg("adjoint length differs from vertex count"));
    }
    if let Some(i) = w.iter().position(|v| !v.is_finite()) {
        return Err(Error::arg(format!("adjoint is not finite at vertex {i}")));
    }
    spec.validate(space.domain_area())?;
    let n = mesh.n_vertices();
    let m = spec.m;
    match spec.kind {
        ConstraintKind::TvBound | ConstraintKind::NonnegMass => {
            let pick = if spec.kind == ConstraintKind::TvBound {
                argmax_by(w, |v| v.abs())
            } else {
                argmax_by(w, |v| -v)
            };
            let wv = w[pick];
            let (weight, lambda) = match spec.kind {
                ConstraintKind::TvBound if wv != 0.0 => (-m * wv.signum(), wv.abs()),
                ConstraintKind::NonnegMass if wv < 0.0 => (m, -wv),
                _ => (0.0, 0.0),
            };
            if weight == 0.0 {
                return Ok(OracleOutput {
                    control: Control::zero(n),
                    lambda,
                    vertex: None,
                });
            }
            let location = if opts.refine_atoms {
                refine_extremum(mesh, w, pick)
            } else {
                mesh.vertices()[pick]
            };
            Ok(OracleOutput {
                control: Control {
                    density: ScalarField::zeros(n),
                    atoms: vec![Atom { weight, location }],
                },
                lambda,
                vertex: Some(pick),
            })
        }
        ConstraintKind::BoxMass | ConstraintKind::BoxMassLower => {
            let wt = projected_weights(space, w);
            let l = space.lumped_weights();
            let (a, b) = (spec.alpha, spec.beta);
            let mut f = vec![a; n];
            let mut budget = m - a * space.domain_area();
            let mut lambda = 0.0;
            let lower = spec.kind == ConstraintKind::BoxMassLower;
            for &i in &sorted_order(&wt) {
                let gain = (b - a) * l[i];
                if lower {
                    if wt[i] < 0.0 {
                        f[i] = b;
                        budget -= gain;
                        continue;
                    }
                    if budget <= 0.0 {
                        break;
                    }
                } else if wt[i] >= 0.0 || budget <= 0.0 {
                    break;
                }
                if gain <= budget {
                    f[i] = b;
                    budget -= gain;
                    if budget == 0.0 {
                        lambda = if lower { wt[i] } else { -wt[i] };
                    }
                } else {
                    f[i] = a + budget / l[i];
                    lambda = if lower { wt[i] } else { -wt[i] };
                    break;
                }
            }
            Ok(OracleOutput {
                control: Control::from_density(ScalarField::new(f)),
                lambda: lambda.max(0.0),
                vertex: None,
            })
        }
        ConstraintKind::Quadratic => {
            let wt = projected_weights(space, w);
            let l = space.lumped_weights();
            let norm = wt.iter().zip(l).map(|(v, li)| li * v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Ok(OracleOutput {
                    control: Control::zero(n),
                    lambda: 0.0,
                    vertex: None,
                });
            }
            let s = m.sqrt();
            let f = wt.iter().map(|v| -s * v / norm).collect();
            Ok(OracleOutput {
                control: Control::from_density(ScalarField::new(f)),
                lambda: norm / (2.0 * s),
                vertex: None,
            })
        }
    }
}

fn argmax_by(values: &[f64], key: impl Fn(f64) -> f64) -> usize {
    let mut best = 0;
    for i in 1..values.len() {
        if key(values[i]) > key(values[best]) {
            best = i;
        }
    }
    best
}

/// Stationary point of the least-squares quadratic through `w` on the 1-ring
/// of `v`, or the vertex itself when the fit is not usable.
pub fn refine_extremum(mesh: &Mesh, w: &[f64], v: usize) -> [f64; 2] {
    let p0 = mesh.vertices()[v];
    if mesh.is_boundary(v) {
        return p0;
    }
    let ring = &mesh.vertex_neighbors()[v];
    let mut pts = vec![v];
    pts.extend(ring.iter().copied());
    if pts.len() < 6 {
        return p0;
    }
    // normal equations for c + gx x + gy y + ½hxx x² + hxy xy + ½hyy y²
    let mut ata = [[0.0; 6]; 6];
    let mut atb = [0.0; 6];
    let scale = ring
        .iter()
        .map(|&u| crate::mesh::dist(mesh.vertices()[u], p0))
        .fold(0.0, f64::max);
    for &u in &pts {
        let q = mesh.vertices()[u];
        let (x, y) = ((q[0] - p0[0]) / scale, (q[1] - p0[1]) / scale);
        let row = [1.0, x, y, 0.5 * x * x, x * y, 0.5 * y * y];
        for i in 0..6 {
            atb[i] += row[i] * w[u];
            for j in 0..6 {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    let Some(c) = solve_dense(ata, atb) else {
        return p0;
    };
    let (gx, gy, hxx, hxy, hyy) = (c[1], c[2], c[3], c[4], c[5]);
    let det = hxx * hyy - hxy * hxy;
    if !(det > 0.0) {
        return p0;
    }
    let dx = -(hyy * gx - hxy * gy) / det;
    let dy = -(-hxy * gx + hxx * gy) / det;
    if dx.hypot(dy) > 1.0 {
        return p0;
    }
    let cand = [p0[0] + dx * scale, p0[1] + dy * scale];
    match mesh.locate(cand) {
        Some(_) => cand,
        None => p0,
    }
}

fn solve_dense<const N: usize>(mut a: [[f64; N]; N], mut b: [f64; N]) -> Option<[f64; N]> {
    for col in 0..N {
        let piv = (col..N).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..N {
            let f = a[r][col] / a[col][col];
            for k in col..N {
                a[r][k] -= f * a[col][k];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; N];
    for r in (0..N).rev() {
        let s: f64 = (r + 1..N).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Threshold `t` with `α|Ω| + (β−α)·|{w < t}| = target`, volumes taken exactly
/// on the P1 interpolant. The box multiplier is `λ = −t`.
pub fn find_threshold(mesh: &Mesh, w: &[f64], target_mass: f64, alpha: f64, beta: f64) -> Result<f64> {
    if w.len() != mesh.n_vertices() {
        return Err(Error::arg("field length differs from vertex count"));
    }
    if !(alpha < beta) {
        return Err(Error::arg("find_threshold needs alpha < beta"));
    }
    let area = mesh.area();
    let lo_mass = alpha * area;
    let hi_mass = beta * area;
    if !(target_mass > lo_mass) || target_mass > hi_mass * (1.0 + 1e-12) {
        return Err(Error::Constraint(format!(
            "target mass {target_mass} outside (alpha|Omega|, beta|Omega|] = ({lo_mass}, {hi_mass}]"
        )));
    }
    let wmin = w.iter().cloned().fold(f64::INFINITY, f64::min);
    let wmax = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if wmin == wmax {
        return Err(Error::Degenerate(format!(
            "field is constant (value {wmin}); no threshold separates it"
        )));
    }
    let above_max = wmax.next_up();
    if target_mass >= hi_mass {
        return Ok(above_max);
    }
    let target_area = (target_mass - lo_mass) / (beta - alpha);
    let (mut lo, mut hi) = (wmin, above_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let a = sublevel_area(mesh, w, mid);
        if a < target_area {
            lo = mid;
        } else {
            hi = mid;
        }
        if (a - target_area).abs() <= 1e-13 * area {
            return Ok(mid);
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_roundtrip() {
        for k in ConstraintKind::ALL {
            assert_eq!(ConstraintKind::parse(k.name()), Some(k));
        }
        assert_eq!(ConstraintKind::parse("BOX-MASS"), Some(ConstraintKind::BoxMass));
    }

    #[test]
    fn box_bounds_checked() {
        let area = std::f64::consts::PI;
        assert!(ConstraintSpec::box_mass(0.0, 1.0, 1.25).validate(area).is_ok());
        let err = ConstraintSpec::box_mass(0.5, 1.0, 0.5 * area)
            .validate(area)
            .unwrap_err();
        assert!(err.to_string().contains("alpha|Omega| < m"));
        assert!(ConstraintSpec::box_mass(0.0, 1.0, area).validate(area).is_ok());
        assert!(ConstraintSpec::box_mass_lower(0.0, 1.0, area).validate(area).is_err());
    }

    #[test]
    fn dense_solver() {
        let x = solve_dense([[2.0, 1.0], [1.0, 3.0]], [3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
    }
}
