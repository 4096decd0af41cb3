//! Residuals of the first-order optimality system for a candidate control.

use std::fmt::Write as _;

use crate::analysis::level_set::{level_set, LevelSetGeometry, Segment};
use crate::constraints::{find_threshold, linearized_oracle, ConstraintKind, ConstraintSpec, OracleOptions};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::poisson::{evaluate, Control, FemSpace, ScalarField};
use crate::problems::{adjoint, CostSpec};

/// Relative distance to `α` or `β` below which a nodal value counts as extremal.
pub const BANG_TOLERANCE: f64 = 1e-3;

/// Half-width of the excluded interface band, in units of `h`.
pub const BAND_WIDTH: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    pub lambda: f64,
    /// `∫ψ(f)`.
    pub constraint_value: f64,
    /// Right-hand side of the integral constraint.
    pub level: f64,
    pub slackness_residual: f64,
    /// Sup over nodes outside the interface band; zero on the `λ = 0` branch.
    pub fenchel_residual: f64,
    /// Area-weighted L¹ norm over all nodes.
    pub fenchel_residual_l1: f64,
    /// Sup inside the interface band.
    pub fenchel_residual_band: f64,
    pub band_residual: f64,
    pub sign_residual: f64,
    pub atom_support_residual: f64,
    /// Fraction of off-band nodes at an endpoint of the domain of ψ.
    pub bang_fraction: f64,
    /// The same fraction over every node.
    pub bang_fraction_all: f64,
    pub band_node_fraction: f64,
    pub fw_gap: f64,
    pub convex_cost: bool,
}

impl KktReport {
    /// Flat `key = value` text.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("lambda", self.lambda.to_string());
        kv(
            "branch",
            if self.lambda > 0.0 { "positive" } else { "zero" }.to_string(),
        );
        kv("constraint_value", self.constraint_value.to_string());
        kv("level", self.level.to_string());
        kv("slackness_residual", self.slackness_residual.to_string());
        kv("fenchel_residual", self.fenchel_residual.to_string());
        kv("fenchel_residual_l1", self.fenchel_residual_l1.to_string());
        kv("fenchel_residual_band", self.fenchel_residual_band.to_string());
        kv("band_residual", self.band_residual.to_string());
        kv("sign_residual", self.sign_residual.to_string());
        kv("atom_support_residual", self.atom_support_residual.to_string());
        kv("bang_fraction", self.bang_fraction.to_string());
        kv("bang_fraction_all", self.bang_fraction_all.to_string());
        kv("band_node_fraction", self.band_node_fraction.to_string());
        kv("fw_gap", self.fw_gap.to_string());
        kv("convex_cost", self.convex_cost.to_string());
        out
    }

    /// Reads the text written by [`KktReport::to_text`].
    pub fn parse(text: &str) -> Result<KktReport> {
        let mut map = std::collections::HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(Error::Parse {
                line: i + 1,
                message: format!("expected `key = value`, found `{line}`"),
            })?;
            map.insert(k.trim().to_string(), (i + 1, v.trim().to_string()));
        }
        let num = |k: &str| -> Result<f64> {
            let (line, v) = map.get(k).ok_or(Error::Parse {
                line: 0,
                message: format!("missing key `{k}`"),
            })?;
            v.parse().map_err(|_| Error::Parse {
                line: *line,
                message: format!("bad number `{v}` for `{k}`"),
            })
        };
        Ok(KktReport {
            lambda: num("lambda")?,
            constraint_value: num("constraint_value")?,
            level: num("level")?,
            slackness_residual: num("slackness_residual")?,
            fenchel_residual: num("fenchel_residual")?,
            fenchel_residual_l1: num("fenchel_residual_l1")?,
            fenchel_residual_band: num("fenchel_residual_band")?,
            band_residual: num("band_residual")?,
            sign_residual: num("sign_residual")?,
            atom_support_residual: num("atom_support_residual")?,
            bang_fraction: num("bang_fraction")?,
            bang_fraction_all: num("bang_fraction_all")?,
            band_node_fraction: num("band_node_fraction")?,
            fw_gap: num("fw_gap")?,
            convex_cost: map.get("convex_cost").map(|(_, v)| v == "true").unwrap_or(false),
        })
    }
}

/// Bang set `E = {w < −λ}`: nodal indicator and interface geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct BangSet {
    pub indicator: ScalarField,
    pub geometry: LevelSetGeometry,
}

pub fn extract_bang_set(mesh: &Mesh, w: &[f64], lambda: f64) -> BangSet {
    let t = -lambda;
    BangSet {
        indicator: ScalarField::new(w.iter().map(|&v| if v < t { 1.0 } else { 0.0 }).collect()),
        geometry: level_set(mesh, w, t),
    }
}

fn point_segment_distance(p: Point, s: &Segment) -> f64 {
    let d = [s.b[0] - s.a[0], s.b[1] - s.a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - s.a[0]) * d[0] + (p[1] - s.a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    };
    (p[0] - s.a[0] - t * d[0]).hypot(p[1] - s.a[1] - t * d[1])
}

/// Nodes within `width` of the interface segments.
pub fn interface_band(mesh: &Mesh, segments: &[Segment], width: f64) -> Vec<bool> {
    let mut band = vec![false; mesh.n_vertices()];
    if segments.is_empty() {
        return band;
    }
    let cell = width.max(1e-12);
    let key = |p: Point| ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64);
    let mut buckets: std::collections::HashMap<(i64, i64), Vec<usize>> = std::collections::HashMap::new();
    for (i, s) in segments.iter().enumerate() {
        let (a, b) = (key(s.a), key(s.b));
        for x in a.0.min(b.0)..=a.0.max(b.0) {
            for y in a.1.min(b.1)..=a.1.max(b.1) {
                buckets.entry((x, y)).or_default().push(i);
            }
        }
    }
    for (v, p) in mesh.vertices().iter().enumerate() {
        let (cx, cy) = key(*p);
        'search: for x in cx - 1..=cx + 1 {
            for y in cy - 1..=cy + 1 {
                if let Some(list) = buckets.get(&(x, y)) {
                    if list.iter().any(|&i| point_segment_distance(*p, &segments[i]) <= width) {
                        band[v] = true;
                        break 'search;
                    }
                }
            }
        }
    }
    band
}

/// Multiplier of the integral constraint recovered from `w` and `f`.
pub fn recover_lambda(spec: &ConstraintSpec, space: &FemSpace<'_>, w: &[f64], f: &Control) -> Result<f64> {
    let mesh = space.mesh();
    let value = spec.integral(space, f);
    let active = value >= spec.level() - 1e-8 * spec.m.abs().max(1.0);
    if !active {
        return Ok(0.0);
    }
    let wmin = w.iter().cloned().fold(f64::INFINITY, f64::min);
    let wmax = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(match spec.kind {
        ConstraintKind::BoxMass | ConstraintKind::BoxMassLower => {
            match find_threshold(mesh, w, spec.m, spec.alpha, spec.beta) {
                Ok(t) if spec.kind == ConstraintKind::BoxMass => (-t).max(0.0),
                Ok(t) => t.max(0.0),
                Err(Error::Degenerate(_)) => 0.0,
                Err(e) => return Err(e),
            }
        }
        ConstraintKind::NonnegMass => (-wmin).max(0.0),
        ConstraintKind::TvBound => wmin.abs().max(wmax.abs()),
        ConstraintKind::Quadratic => {
            // f = −w/(2λ) in the least-squares sense
            let l = space.lumped_weights();
            let fw: f64 = (0..w.len()).map(|i| l[i] * f.density.values[i] * w[i]).sum();
            let ww: f64 = (0..w.len()).map(|i| l[i] * w[i] * w[i]).sum();
            let mu = if ww > 0.0 { -fw / ww } else { 0.0 };
            if mu > 0.0 {
                0.5 / mu
            } else {
                0.0
            }
        }
    })
}

fn is_extremal(spec: &ConstraintSpec, v: f64) -> bool {
    let (lo, hi) = (spec.domain_inf(), spec.domain_sup());
    let scale = if lo.is_finite() && hi.is_finite() { hi - lo } else { 1.0 };
    let tol = BANG_TOLERANCE * scale;
    (lo.is_finite() && (v - lo).abs() <= tol) || (hi.is_finite() && (v - hi).abs() <= tol)
}

/// Recomputes the adjoint of `f` and evaluates every optimality condition.
pub fn kkt_report(
    cost: &CostSpec,
    constraint: &ConstraintSpec,
    space: &FemSpace<'_>,
    f: &Control,
    cg_tol: f64,
) -> Result<KktReport> {
    let w = adjoint(cost, space, f, cg_tol)?;
    kkt_report_with_adjoint(cost, constraint, space, f, &w)
}

/// As [`kkt_report`], with the adjoint supplied by the caller.
pub fn kkt_report_with_adjoint(
    cost: &CostSpec,
    constraint: &ConstraintSpec,
    space: &FemSpace<'_>,
    f: &Control,
    w: &ScalarField,
) -> Result<KktReport> {
    let mesh = space.mesh();
    w.check_mesh(mesh)?;
    f.density.check_mesh(mesh)?;
    let w = &w.values;
    let fa = &f.density.values;
    let l = space.lumped_weights();
    let n = mesh.n_vertices();

    let lambda = recover_lambda(constraint, space, w, f)?;
    let constraint_value = constraint.integral(space, f);
    let level = constraint.level();
    let slackness_residual = (lambda * (constraint_value - level)).abs();

    let interface = match constraint.kind {
        ConstraintKind::BoxMass => Some(-lambda),
        ConstraintKind::BoxMassLower => Some(lambda),
        _ if lambda == 0.0 => Some(0.0),
        _ => None,
    };
    let band = match interface {
        Some(t) => interface_band(mesh, &level_set(mesh, w, t).segments, BAND_WIDTH * mesh.h()),
        None => vec![false; n],
    };

    let (cm, cp) = constraint.recession();
    let (dlo, dhi) = (constraint.domain_inf(), constraint.domain_sup());
    let mut fenchel_residual = 0.0f64;
    let mut fenchel_residual_band = 0.0f64;
    let mut fenchel_residual_l1 = 0.0;
    let mut band_residual = 0.0f64;
    let mut sign_residual = 0.0f64;
    for i in 0..n {
        if lambda > 0.0 {
            let r = constraint.psi(fa[i]) + constraint.psi_star(-w[i] / lambda) + w[i] * fa[i] / lambda;
            let r = r.max(0.0);
            fenchel_residual_l1 += l[i] * r;
            if band[i] {
                fenchel_residual_band = fenchel_residual_band.max(r);
            } else {
                fenchel_residual = fenchel_residual.max(r);
            }
            let below = if cp.is_finite() { -lambda * cp - w[i] } else { 0.0 };
            let above = if cm.is_finite() { w[i] + lambda * cm } else { 0.0 };
            band_residual = band_residual.max(below).max(above);
        } else {
            if dhi == f64::INFINITY {
                sign_residual = sign_residual.max(-w[i]);
            }
            if dlo == f64::NEG_INFINITY {
                sign_residual = sign_residual.max(w[i]);
            }
            if !band[i] {
                if w[i] > 0.0 && dlo.is_finite() {
                    sign_residual = sign_residual.max((fa[i] - dlo).abs());
                }
                if w[i] < 0.0 && dhi.is_finite() {
                    sign_residual = sign_residual.max((fa[i] - dhi).abs());
                }
            }
        }
    }

    let mut atom_support_residual = 0.0f64;
    for a in &f.atoms {
        if a.weight == 0.0 {
            continue;
        }
        let wa = evaluate(mesh, w, a.location)?;
        let target = if lambda == 0.0 {
            0.0
        } else if a.weight > 0.0 {
            -lambda * cp
        } else {
            -lambda * cm
        };
        atom_support_residual = atom_support_residual.max((wa - target).abs());
    }

    let mut off = 0usize;
    let mut off_bang = 0usize;
    let mut all_bang = 0usize;
    for i in 0..n {
        let bang = is_extremal(constraint, fa[i]);
        all_bang += usize::from(bang);
        if !band[i] {
            off += 1;
            off_bang += usize::from(bang);
        }
    }
    let band_nodes = n - off;

    let oracle = linearized_oracle(constraint, space, w, OracleOptions::default())?;
    let fw_gap = space.inner(w, f)? - space.inner(w, &oracle.control)?;

    Ok(KktReport {
        lambda,
        constraint_value,
        level,
        slackness_residual,
        fenchel_residual,
        fenchel_residual_l1,
        fenchel_residual_band,
        band_residual,
        sign_residual,
        atom_support_residual,
        bang_fraction: if off == 0 { 0.0 } else { off_bang as f64 / off as f64 },
        bang_fraction_all: all_bang as f64 / n as f64,
        band_node_fraction: band_nodes as f64 / n as f64,
        fw_gap,
        convex_cost: cost.kind.is_convex(),
    })
}
