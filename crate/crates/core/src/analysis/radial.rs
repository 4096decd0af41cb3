//! Rotation-invariant reference solutions: closed forms on the annulus, a
//! one-dimensional finite-volume solver for `−(r u')' = r f`, single-interface
//! searches for box-constrained radial problems, and Green-function
//! quadrature for point sources in the unit disk.

use std::f64::consts::{LN_2, PI};

use crate::constraints::{ConstraintKind, ConstraintSpec};
use crate::error::{Error, Result};
use crate::mesh::{Domain, Point};
use crate::problems::{Coefficient, CostKind, CostSpec};

/// Coefficient of `ln r` in the annulus solution of `−Δu = 1` on `1 < r < 2`.
pub fn annulus_log_coefficient() -> f64 {
    3.0 / (4.0 * LN_2)
}

/// Radius where the annulus solution has zero gradient, `√(3 / (2 ln 2))`.
pub fn annulus_critical_radius() -> f64 {
    (3.0 / (2.0 * LN_2)).sqrt()
}

/// Exact `u(r)` for `−Δu = 1` on the annulus `1 < r < 2` with zero boundary values.
pub fn annulus_exact_solution(r: f64) -> f64 {
    -0.25 * r * r + annulus_log_coefficient() * r.ln() + 0.25
}

/// `∇u(x) = ½(−|x| + 3/(2 ln 2 |x|)) x/|x|` on `1 ≤ |x| ≤ 2`.
pub fn annulus_exact_gradient(x: Point) -> Result<[f64; 2]> {
    let r = x[0].hypot(x[1]);
    if !(1.0..=2.0).contains(&r) {
        return Err(Error::arg(format!("|x| = {r} lies outside [1, 2]")));
    }
    let radial = 0.5 * (-r + 3.0 / (2.0 * LN_2 * r));
    Ok([radial * x[0] / r, radial * x[1] / r])
}

/// Uniform grid on `[r_inner, r_outer]`; `r_inner = 0` means a full disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialGrid {
    pub r_inner: f64,
    pub r_outer: f64,
    pub intervals: usize,
}

impl RadialGrid {
    pub fn new(r_inner: f64, r_outer: f64, intervals: usize) -> Result<Self> {
        if !(r_inner >= 0.0 && r_inner < r_outer) || intervals < 2 {
            return Err(Error::arg(
                "radial grid needs 0 <= r_inner < r_outer and at least 2 intervals",
            ));
        }
        Ok(RadialGrid {
            r_inner,
            r_outer,
            intervals,
        })
    }

    /// Grid matching a disk or annulus centered at the origin.
    pub fn for_domain(domain: &Domain, intervals: usize) -> Result<Self> {
        match *domain {
            Domain::Disk { radius } => Self::new(0.0, radius, intervals),
            Domain::Annulus { r_inner, r_outer } => Self::new(r_inner, r_outer, intervals),
            Domain::DiskWithHole {
                radius,
                hole_center,
                hole_radius,
            } if hole_center == [0.0, 0.0] => Self::new(hole_radius, radius, intervals),
            Domain::DiskWithHole { .. } => Err(Error::arg("off-center hole: domain is not rotation invariant")),
        }
    }

    pub fn step(&self) -> f64 {
        (self.r_outer - self.r_inner) / self.intervals as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.r_inner + i as f64 * self.step()
    }

    pub fn is_disk(&self) -> bool {
        self.r_inner == 0.0
    }

    /// Control volume of node `i`, clipped to the domain.
    pub fn cell(&self, i: usize) -> (f64, f64) {
        let h = self.step();
        let r = self.node(i);
        ((r - 0.5 * h).max(self.r_inner), (r + 0.5 * h).min(self.r_outer))
    }
}

/// Nodal values of a radial solution.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    pub grid: RadialGrid,
    pub u: Vec<f64>,
    /// `∫ r f dr` over each control volume.
    pub moments: Vec<f64>,
}

impl RadialProfile {
    pub fn radii(&self) -> Vec<f64> {
        (0..=self.grid.intervals).map(|i| self.grid.node(i)).collect()
    }

    /// Piecewise-linear interpolation.
    pub fn value_at(&self, r: f64) -> f64 {
        let h = self.grid.step();
        let x = ((r - self.grid.r_inner) / h).clamp(0.0, self.grid.intervals as f64);
        let i = (x.floor() as usize).min(self.grid.intervals - 1);
        let s = x - i as f64;
        (1.0 - s) * self.u[i] + s * self.u[i + 1]
    }

    /// `∫ f u dx` over the rotation body.
    pub fn compliance(&self) -> f64 {
        2.0 * PI * self.u.iter().zip(&self.moments).map(|(u, m)| u * m).sum::<f64>()
    }

    /// `∫ g(r, u) dx` by the trapezoid rule in `r`.
    pub fn integrate(&self, g: impl Fn(f64, f64) -> f64) -> f64 {
        let h = self.grid.step();
        let mut total = 0.0;
        for i in 0..=self.grid.intervals {
            let r = self.grid.node(i);
            let w = if i == 0 || i == self.grid.intervals { 0.5 } else { 1.0 };
            total += w * g(r, self.u[i]) * r;
        }
        2.0 * PI * h * total
    }
}

/// Solves `−(r u')' = r f` with `u = 0` on the outer radius, and on the inner
/// radius for annuli, given the source moments `∫ r f dr` of each control
/// volume. Exact for constant `f` on disks.
pub fn solve_radial(grid: RadialGrid, moment: impl Fn(f64, f64) -> f64) -> Result<RadialProfile> {
    let n = grid.intervals;
    let h = grid.step();
    let moments: Vec<f64> = (0..=n)
        .map(|i| {
            let (lo, hi) = grid.cell(i);
            moment(lo, hi)
        })
        .collect();
    let first = if grid.is_disk() { 0 } else { 1 };
    let m = n - first;
    let mut lower = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut upper = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    for k in 0..m {
        let i = first + k;
        let r = grid.node(i);
        let right = (r + 0.5 * h) / h;
        let left = if i == 0 { 0.0 } else { (r - 0.5 * h) / h };
        diag[k] = left + right;
        if k > 0 {
            lower[k] = -left;
        }
        if k + 1 < m {
            upper[k] = -right;
        }
        rhs[k] = moments[i];
    }
    let x = thomas(&lower, &diag, &upper, &rhs)?;
    let mut u = vec![0.0; n + 1];
    u[first..n].copy_from_slice(&x);
    Ok(RadialProfile { grid, u, moments })
}

/// Source moments of a density `f(r)`, by Simpson's rule on each cell.
pub fn density_moment(f: impl Fn(f64) -> f64) -> impl Fn(f64, f64) -> f64 {
    move |lo, hi| {
        let mid = 0.5 * (lo + hi);
        (hi - lo) / 6.0 * (lo * f(lo) + 4.0 * mid * f(mid) + hi * f(hi))
    }
}

/// Exact moments of `inner` on `r < r_c` and `outer` on `r > r_c`.
pub fn step_moment(r_c: f64, inner: f64, outer: f64) -> impl Fn(f64, f64) -> f64 {
    move |lo, hi| {
        let split = r_c.clamp(lo, hi);
        0.5 * (inner * (split * split - lo * lo) + outer * (hi * hi - split * split))
    }
}

fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    if denom == 0.0 {
        return Err(Error::Degenerate("singular radial system".into()));
    }
    c[0] = upper[0] / denom;
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * c[i - 1];
        if denom == 0.0 {
            return Err(Error::Degenerate("singular radial system".into()));
        }
        c[i] = upper[i] / denom;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Ok(x)
}

/// Rotation-invariant problems with a closed search space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadialProblem {
    /// `min ∫ f u` subject to `∫ f ≥ m`, `α ≤ f ≤ β`.
    Compliance { alpha: f64, beta: f64, m: f64 },
    /// `min ∫ (u − u₀)²` subject to `∫ f ≤ m`, `α ≤ f ≤ β`, constant `u₀`.
    Tracking { alpha: f64, beta: f64, m: f64, target: f64 },
}

impl RadialProblem {
    /// Recognizes the radial problems among run specifications.
    pub fn from_specs(cost: &CostSpec, constraint: &ConstraintSpec) -> Result<Self> {
        let (alpha, beta, m) = (constraint.alpha, constraint.beta, constraint.m);
        match (cost.kind, constraint.kind, &cost.coefficient) {
            (CostKind::Compliance, ConstraintKind::BoxMassLower, _) => Ok(RadialProblem::Compliance { alpha, beta, m }),
            (CostKind::Tracking, ConstraintKind::BoxMass, Coefficient::Const(target)) => Ok(RadialProblem::Tracking {
                alpha,
                beta,
                m,
                target: *target,
            }),
            _ => Err(Error::arg(format!(
                "no radial oracle for cost {} with constraint {}",
                cost.kind, constraint.kind
            ))),
        }
    }
}

/// Best single-interface radial control.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialSolution {
    /// Interface radius; equals an end of the grid when the control is constant.
    pub interface_radius: f64,
    pub inner_value: f64,
    pub outer_value: f64,
    pub mass: f64,
    pub cost: f64,
    pub profile: RadialProfile,
}

fn step_mass(grid: &RadialGrid, r_c: f64, inner: f64, outer: f64) -> f64 {
    let (a, b) = (grid.r_inner, grid.r_outer);
    let r_c = r_c.clamp(a, b);
    PI * (inner * (r_c * r_c - a * a) + outer * (b * b - r_c * r_c))
}

/// Interface radius with `step_mass = m`, if one exists.
fn radius_for_mass(grid: &RadialGrid, m: f64, inner: f64, outer: f64) -> Option<f64> {
    let (a, b) = (grid.r_inner, grid.r_outer);
    if inner == outer {
        return None;
    }
    let sq = (m / PI - outer * b * b + inner * a * a) / (inner - outer);
    if sq < a * a || sq > b * b {
        return None;
    }
    Some(sq.sqrt())
}

/// Enumerates single-interface bang-bang controls of both orientations on a
/// radius grid, keeps the feasible ones, and refines the best.
pub fn radial_oracle(problem: RadialProblem, domain: &Domain, intervals: usize) -> Result<RadialSolution> {
    let grid = RadialGrid::for_domain(domain, intervals)?;
    let (alpha, beta, m) = match problem {
        RadialProblem::Compliance { alpha, beta, m } | RadialProblem::Tracking { alpha, beta, m, .. } => {
            (alpha, beta, m)
        }
    };
    if !(alpha < beta) {
        return Err(Error::arg("radial oracle needs alpha < beta"));
    }
    let feasible = |mass: f64| match problem {
        RadialProblem::Compliance { .. } => mass >= m * (1.0 - 1e-12),
        RadialProblem::Tracking { .. } => mass <= m * (1.0 + 1e-12),
    };
    let evaluate = |r_c: f64, inner: f64, outer: f64| -> Result<(f64, RadialProfile)> {
        let profile = solve_radial(grid, step_moment(r_c, inner, outer))?;
        let cost = match problem {
            RadialProblem::Compliance { .. } => profile.compliance(),
            RadialProblem::Tracking { target, .. } => profile.integrate(|_, u| (u - target) * (u - target)),
        };
        Ok((cost, profile))
    };

    let candidates = intervals.min(400);
    let mut best: Option<(f64, f64, f64, f64)> = None;
    for (inner, outer) in [(alpha, beta), (beta, alpha)] {
        for k in 0..=candidates {
            let r_c = grid.r_inner + (grid.r_outer - grid.r_inner) * k as f64 / candidates as f64;
            if !feasible(step_mass(&grid, r_c, inner, outer)) {
                continue;
            }
            let (cost, _) = evaluate(r_c, inner, outer)?;
            if best.is_none_or(|b| cost < b.0) {
                best = Some((cost, r_c, inner, outer));
            }
        }
    }
    let (_, coarse, inner, outer) =
        best.ok_or_else(|| Error::Constraint("no single-interface radial control is feasible".into()))?;

    let r_c = match problem {
        // cost grows with the source, so the mass bound is active
        RadialProblem::Compliance { .. } => radius_for_mass(&grid, m, inner, outer).unwrap_or(coarse),
        RadialProblem::Tracking { .. } => {
            let width = (grid.r_outer - grid.r_inner) / candidates as f64;
            let mut lo = (coarse - width).max(grid.r_inner);
            let mut hi = (coarse + width).min(grid.r_outer);
            if let Some(edge) = radius_for_mass(&grid, m, inner, outer) {
                if edge > lo && edge < hi {
                    if feasible(step_mass(&grid, lo, inner, outer)) {
                        hi = edge;
                    } else {
                        lo = edge;
                    }
                }
            }
            golden_section(lo, hi, 60, |r| {
                evaluate(r, inner, outer).map(|c| c.0).unwrap_or(f64::INFINITY)
            })
        }
    };
    let (cost, profile) = evaluate(r_c, inner, outer)?;
    Ok(RadialSolution {
        interface_radius: r_c,
        inner_value: inner,
        outer_value: outer,
        mass: step_mass(&grid, r_c, inner, outer),
        cost,
        profile,
    })
}

fn golden_section(mut a: f64, mut b: f64, iters: usize, f: impl Fn(f64) -> f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = 0.5 * (1.0 - z);
        w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Green's function of the unit disk with pole `y`.
pub fn disk_green(x: Point, y: Point) -> f64 {
    let d = (x[0] - y[0]).hypot(x[1] - y[1]);
    let ry2 = y[0] * y[0] + y[1] * y[1];
    if ry2 == 0.0 {
        return -d.ln() / (2.0 * PI);
    }
    let ys = [y[0] / ry2, y[1] / ry2];
    let ds = (x[0] - ys[0]).hypot(x[1] - ys[1]);
    (-d.ln() + (ry2.sqrt() * ds).ln()) / (2.0 * PI)
}

/// `∫_disk |m G(x, y)|^p dx` for the atom `m δ_y` at distance `rho` from the
/// center, by polar quadrature around the pole.
pub fn power_integral_atom(rho: f64, m: f64, p: f64, n_theta: usize, n_s: usize) -> Result<f64> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::arg(format!("atom radius {rho} outside [0, 1)")));
    }
    let y = [rho, 0.0];
    let (t, tw) = gauss_legendre(n_s);
    // s = L t³ clusters nodes at the logarithmic singularity
    const K: f64 = 3.0;
    let mut total = 0.0;
    for j in 0..n_theta {
        let th = 2.0 * PI * j as f64 / n_theta as f64;
        let e = [th.cos(), th.sin()];
        let ye = y[0] * e[0] + y[1] * e[1];
        let len = -ye + (ye * ye - rho * rho + 1.0).sqrt();
        let mut ray = 0.0;
        for (ti, wi) in t.iter().zip(&tw) {
            let s = len * ti.powf(K);
            let ds = len * K * ti.powf(K - 1.0);
            let x = [y[0] + s * e[0], y[1] + s * e[1]];
            ray += wi * (m * disk_green(x, y)).abs().powf(p) * s * ds;
        }
        total += ray;
    }
    Ok(total * 2.0 * PI / n_theta as f64)
}
