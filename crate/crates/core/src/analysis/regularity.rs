//! Integrals of inverse gradient powers near critical points.

use std::f64::consts::E;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::poisson::gradient;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityIntegral {
    pub q: f64,
    pub value: f64,
    /// Total area of triangles where the gradient vanishes exactly.
    pub excluded_area: f64,
}

/// Integrand `1 / (g · log^q(max(1/g, e)))` at gradient magnitude `g > 0`.
pub fn integrand(g: f64, q: f64) -> f64 {
    let l = (1.0 / g).max(E).ln();
    1.0 / (g * l.powf(q))
}

/// Midpoint rule over triangles with the per-triangle `|∇u|` of the P1 field.
pub fn regularity_integral(mesh: &Mesh, u: &[f64], q: f64) -> Result<RegularityIntegral> {
    if !(q > 0.0) {
        return Err(Error::arg(format!("exponent q must be positive, got {q}")));
    }
    let mut value = 0.0;
    let mut excluded_area = 0.0;
    for (t, g) in gradient(mesh, u).iter().enumerate() {
        let norm = g[0].hypot(g[1]);
        let area = mesh.triangle_area(t);
        if norm == 0.0 {
            excluded_area += area;
        } else {
            value += area * integrand(norm, q);
        }
    }
    Ok(RegularityIntegral {
        q,
        value,
        excluded_area,
    })
}
