//! Cost integrands `j(x, s, z)`, discrete costs and adjoint states.
//!
//! Every cost is minimized. Maximizing `∫|u|^p` is stored as minimizing
//! `−∫|u|^p`.

use std::fmt;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::poisson::{Control, FemSpace, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CostKind {
    /// `j = −|s|^p`.
    PowerMax,
    /// `j = g(x) s`.
    Linear,
    /// `j = (s − u₀(x))²`.
    Tracking,
    /// `j = s z`.
    Compliance,
}

impl CostKind {
    pub const ALL: [CostKind; 4] = [
        CostKind::PowerMax,
        CostKind::Linear,
        CostKind::Tracking,
        CostKind::Compliance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CostKind::PowerMax => "power_max",
            CostKind::Linear => "linear",
            CostKind::Tracking => "tracking",
            CostKind::Compliance => "compliance",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let s = s.to_ascii_lowercase().replace('-', "_");
        CostKind::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Whether `f ↦ J(f)` is convex.
    pub fn is_convex(self) -> bool {
        matches!(self, CostKind::Linear | CostKind::Tracking | CostKind::Compliance)
    }
}

impl fmt::Display for CostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Coefficient field `g` (linear cost) or target `u₀` (tracking).
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficient {
    None,
    /// `x² − y²`.
    SaddleX2MinusY2,
    Const(f64),
    Field(ScalarField),
}

impl Coefficient {
    /// Parses the builtin selectors `x2-y2` and `const:c`.
    pub fn parse_builtin(s: &str) -> Option<Coefficient> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("x2-y2") {
            return Some(Coefficient::SaddleX2MinusY2);
        }
        let c = s.strip_prefix("const:")?;
        c.trim().parse().ok().map(Coefficient::Const)
    }

    pub fn at(&self, p: Point) -> Option<f64> {
        match self {
            Coefficient::None => Some(0.0),
            Coefficient::SaddleX2MinusY2 => Some(p[0] * p[0] - p[1] * p[1]),
            Coefficient::Const(c) => Some(*c),
            Coefficient::Field(_) => None,
        }
    }

    /// Nodal values on `mesh`.
    pub fn values(&self, mesh: &Mesh) -> Result<Vec<f64>> {
        match self {
            Coefficient::Field(f) => {
                f.check_mesh(mesh)?;
                Ok(f.values.clone())
            }
            other => Ok(mesh.vertices().iter().map(|&p| other.at(p).unwrap_or(0.0)).collect()),
        }
    }
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::None => f.write_str("none"),
            Coefficient::SaddleX2MinusY2 => f.write_str("x2-y2"),
            Coefficient::Const(c) => write!(f, "const:{c}"),
            Coefficient::Field(_) => f.write_str("field"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostSpec {
    pub kind: CostKind,
    /// Exponent of [`CostKind::PowerMax`].
    pub p: f64,
    pub coefficient: Coefficient,
}

impl CostSpec {
    pub fn power_max(p: f64) -> Self {
        CostSpec {
            kind: CostKind::PowerMax,
            p,
            coefficient: Coefficient::None,
        }
    }

    pub fn linear(g: Coefficient) -> Self {
        CostSpec {
            kind: CostKind::Linear,
            p: 1.0,
            coefficient: g,
        }
    }

    pub fn tracking(target: Coefficient) -> Self {
        CostSpec {
            kind: CostKind::Tracking,
            p: 2.0,
            coefficient: target,
        }
    }

    pub fn compliance() -> Self {
        CostSpec {
            kind: CostKind::Compliance,
            p: 1.0,
            coefficient: Coefficient::None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            CostKind::PowerMax if !(self.p >= 1.0 && self.p.is_finite()) => {
                Err(Error::arg(format!("power_max needs p >= 1, got {}", self.p)))
            }
            CostKind::Linear | CostKind::Tracking if self.coefficient == Coefficient::None => {
                Err(Error::arg(format!("{} cost needs a coefficient field", self.kind)))
            }
            _ => Ok(()),
        }
    }

    /// `j(x, s, z)` with `g` the coefficient value at `x`.
    pub fn integrand(&self, g: f64, s: f64, z: f64) -> f64 {
        match self.kind {
            CostKind::PowerMax => -s.abs().powf(self.p),
            CostKind::Linear => g * s,
            CostKind::Tracking => (s - g) * (s - g),
            CostKind::Compliance => s * z,
        }
    }

    /// `∂_s j(x, s, z)`.
    pub fn dj_ds(&self, g: f64, s: f64, z: f64) -> f64 {
        match self.kind {
            CostKind::PowerMax => {
                if s == 0.0 {
                    0.0
                } else {
                    -self.p * s.abs().powf(self.p - 1.0) * s.signum()
                }
            }
            CostKind::Linear => g,
            CostKind::Tracking => 2.0 * (s - g),
            CostKind::Compliance => z,
        }
    }

    /// `∂_z j(x, s, z)`.
    pub fn dj_dz(&self, _g: f64, s: f64, _z: f64) -> f64 {
        match self.kind {
            CostKind::Compliance => s,
            _ => 0.0,
        }
    }
}

/// Discrete `J(f) = ∫ j(x, u, f)` for `u = ℛ(f)`.
pub fn cost(spec: &CostSpec, space: &FemSpace<'_>, u: &ScalarField, f: &Control) -> Result<f64> {
    let mesh = space.mesh();
    u.check_mesh(mesh)?;
    f.density.check_mesh(mesh)?;
    let u = &u.values;
    Ok(match spec.kind {
        CostKind::PowerMax => -space
            .lumped_weights()
            .iter()
            .zip(u)
            .map(|(l, v)| l * v.abs().powf(spec.p))
            .sum::<f64>(),
        CostKind::Linear => {
            let g = spec.coefficient.values(mesh)?;
            dot(&space.mass_matrix().mul_vec(&g), u)
        }
        CostKind::Tracking => {
            let g = spec.coefficient.values(mesh)?;
            let d: Vec<f64> = u.iter().zip(&g).map(|(a, b)| a - b).collect();
            dot(&space.mass_matrix().mul_vec(&d), &d)
        }
        CostKind::Compliance => dot(&space.control_load(f)?, u),
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The adjoint state `w = ℛ(∂_s j(x, u, f)) + ∂_z j(x, u, f)` given `u = ℛ(f)`.
///
/// `∫ w d` is the exact directional derivative of the discrete cost.
pub fn adjoint_from_state(
    spec: &CostSpec,
    space: &FemSpace<'_>,
    f: &Control,
    u: &ScalarField,
    cg_tol: f64,
) -> Result<ScalarField> {
    let mesh = space.mesh();
    u.check_mesh(mesh)?;
    f.density.check_mesh(mesh)?;
    let g = spec.coefficient.values(mesh)?;
    let ds: Vec<f64> = (0..mesh.n_vertices())
        .map(|i| spec.dj_ds(g[i], u.values[i], f.density.values[i]))
        .collect();
    let w = match spec.kind {
        CostKind::PowerMax => {
            let load: Vec<f64> = ds.iter().zip(space.lumped_weights()).map(|(d, l)| d * l).collect();
            space.solve_load(&load, cg_tol)?
        }
        CostKind::Linear | CostKind::Tracking => space.solve_density(&ds, cg_tol)?,
        CostKind::Compliance => {
            // ℛ(∂_s j) = ℛ(f) = u, and ∂_z j = u
            let w: Vec<f64> = u.values.iter().map(|v| 2.0 * v).collect();
            debug_assert!(w.iter().zip(&u.values).all(|(a, b)| *a == *b + *b));
            w
        }
    };
    Ok(ScalarField::new(w))
}

/// State and adjoint of `f`.
pub fn adjoint(spec: &CostSpec, space: &FemSpace<'_>, f: &Control, cg_tol: f64) -> Result<ScalarField> {
    let u = space.resolvent(f, cg_tol)?;
    adjoint_from_state(spec, space, f, &u, cg_tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_selectors() {
        assert_eq!(Coefficient::parse_builtin("x2-y2"), Some(Coefficient::SaddleX2MinusY2));
        assert_eq!(Coefficient::parse_builtin("const:0.1"), Some(Coefficient::Const(0.1)));
        assert_eq!(Coefficient::parse_builtin("const:abc"), None);
        assert_eq!(Coefficient::parse_builtin("sin"), None);
    }

    #[test]
    fn partial_derivatives() {
        let t = CostSpec::tracking(Coefficient::Const(0.3));
        assert_eq!(t.dj_ds(0.3, 0.3, 7.0), 0.0);
        let c = CostSpec::compliance();
        assert_eq!((c.dj_ds(0.0, 2.0, 5.0), c.dj_dz(0.0, 2.0, 5.0)), (5.0, 2.0));
        assert_eq!(CostSpec::power_max(4.0).dj_ds(0.0, -1.0, 0.0), 4.0);
    }

    #[test]
    fn power_max_needs_p_at_least_one() {
        assert!(CostSpec::power_max(0.5).validate().is_err());
        assert!(CostSpec::linear(Coefficient::None).validate().is_err());
    }
}
