//! Drives mesh → optimize → diagnostics for a [`RunConfig`] and writes the
//! run directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::analysis::{components, convexity_score, level_set, regularity_integral, LevelSetGeometry};
use crate::config::{RunConfig, RunMode};
use crate::constraints::ConstraintSpec;
use crate::error::{Error, Result};
use crate::mesh::{save_mesh, Mesh};
use crate::optimizer::{self, RunResult, Termination};
use crate::poisson::{save_control, save_field, Control, FemSpace, ScalarField};

pub const MESH_FILE: &str = "mesh.txt";
pub const CONTROL_FILE: &str = "control.txt";
pub const STATE_FILE: &str = "state.txt";
pub const ADJOINT_FILE: &str = "adjoint.txt";
pub const HISTORY_FILE: &str = "history.csv";
pub const KKT_FILE: &str = "kkt.txt";
pub const LEVELSET_FILE: &str = "levelset.csv";
pub const ANALYSIS_FILE: &str = "analysis.txt";
pub const CONFIG_FILE: &str = "config.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    MaxIterations,
    /// Solve mode finished.
    Solved,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub status: RunStatus,
    pub dir: PathBuf,
    /// Artifact names relative to `dir`, in write order.
    pub files: Vec<String>,
    /// Short human-readable summary.
    pub summary: String,
}

struct Writer {
    dir: PathBuf,
    files: Vec<String>,
}

impl Writer {
    fn put(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.files.push(name.to_string());
        Ok(())
    }
}

/// Runs the configured pipeline, writing artifacts under `cfg.output_dir`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineOutcome> {
    run_pipeline_in(cfg, &cfg.output_dir)
}

/// As [`run_pipeline`] with an explicit output directory.
pub fn run_pipeline_in(cfg: &RunConfig, dir: &Path) -> Result<PipelineOutcome> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let mut out = Writer {
        dir: dir.to_path_buf(),
        files: Vec::new(),
    };
    out.put(CONFIG_FILE, &cfg.to_text())?;

    let mesh = cfg.domain.generate(cfg.h)?;
    out.put(MESH_FILE, &save_mesh(&mesh))?;
    let space = FemSpace::new(&mesh)?;

    let (status, summary) = match cfg.mode {
        RunMode::Solve => solve_mode(cfg, &space, &mut out)?,
        RunMode::Optimize => optimize_mode(cfg, &space, &mut out)?,
    };
    Ok(PipelineOutcome {
        status,
        dir: out.dir,
        files: out.files,
        summary,
    })
}

fn solve_mode(cfg: &RunConfig, space: &FemSpace<'_>, out: &mut Writer) -> Result<(RunStatus, String)> {
    let mesh = space.mesh();
    let f = Control::from_density(ScalarField::new(cfg.source.values(mesh)?));
    let u = space.resolvent(&f, cfg.optimizer.cg_tol)?;
    if cfg.emit.fields {
        out.put(CONTROL_FILE, &save_control(mesh, &f))?;
        out.put(STATE_FILE, &save_field(mesh, &u))?;
    }
    let mut text = String::new();
    mesh_summary(&mut text, mesh);
    let _ = writeln!(text, "state.min = {}", u.min());
    let _ = writeln!(text, "state.max = {}", u.max());
    regularity_summary(&mut text, cfg, mesh, &u)?;
    out.put(ANALYSIS_FILE, &text)?;
    let summary = format!("solved on {} vertices, max u = {:.6e}", mesh.n_vertices(), u.max());
    Ok((RunStatus::Solved, summary))
}

fn optimize_mode(cfg: &RunConfig, space: &FemSpace<'_>, out: &mut Writer) -> Result<(RunStatus, String)> {
    let mesh = space.mesh();
    let cost = cfg
        .cost
        .as_ref()
        .ok_or_else(|| Error::arg("optimize mode needs a cost"))?;
    let constraint = cfg
        .constraint
        .as_ref()
        .ok_or_else(|| Error::arg("optimize mode needs a constraint"))?;
    let f0 = constraint.initial_control(space);
    let result = optimizer::run(cost, constraint, space, &f0, &cfg.optimizer)?;

    if cfg.emit.fields {
        out.put(CONTROL_FILE, &save_control(mesh, &result.control))?;
        out.put(STATE_FILE, &save_field(mesh, &result.state))?;
        out.put(ADJOINT_FILE, &save_field(mesh, &result.adjoint))?;
    }
    if cfg.emit.history {
        out.put(HISTORY_FILE, &result.history_csv())?;
    }
    if cfg.emit.kkt {
        let mut report = result.report.to_text();
        let _ = writeln!(report, "absolute_stop = {}", result.absolute_stop);
        out.put(KKT_FILE, &report)?;
    }

    let mut text = String::new();
    mesh_summary(&mut text, mesh);
    let interface = interface_geometry(mesh, constraint, &result.control);
    if let Some(g) = &interface {
        interface_summary(&mut text, mesh, &result.control, g);
        if cfg.emit.levelsets {
            out.put(LEVELSET_FILE, &g.segments_csv())?;
        }
    }
    atom_summary(&mut text, mesh, &result);
    regularity_summary(&mut text, cfg, mesh, &result.state)?;
    out.put(ANALYSIS_FILE, &text)?;

    let status = match result.termination {
        Termination::Converged => RunStatus::Converged,
        Termination::MaxIterations => RunStatus::MaxIterations,
    };
    let last = result.history.last().map(|r| r.cost).unwrap_or(f64::NAN);
    let summary = format!(
        "{} after {} iterations: cost {:.9e}, fw gap {:.3e}, lambda {:.6e}, bang fraction {:.4}",
        match status {
            RunStatus::MaxIterations => "stopped at max_iters",
            _ => "converged",
        },
        result.history.len().saturating_sub(1),
        last,
        result.report.fw_gap,
        result.report.lambda,
        result.report.bang_fraction,
    );
    Ok((status, summary))
}

/// Boundary between the two bang values of a boxed control: the level set of
/// the density at `(α + β) / 2`, whose sublevel side is the `α`-region.
pub fn interface_geometry(mesh: &Mesh, constraint: &ConstraintSpec, f: &Control) -> Option<LevelSetGeometry> {
    if !constraint.kind.is_boxed() {
        return None;
    }
    let mid = 0.5 * (constraint.alpha + constraint.beta);
    Some(level_set(mesh, &f.density.values, mid))
}

fn mesh_summary(text: &mut String, mesh: &Mesh) {
    let _ = writeln!(text, "mesh.vertices = {}", mesh.n_vertices());
    let _ = writeln!(text, "mesh.triangles = {}", mesh.n_triangles());
    let _ = writeln!(text, "mesh.h = {}", mesh.h());
}

fn interface_summary(text: &mut String, mesh: &Mesh, f: &Control, g: &LevelSetGeometry) {
    let pieces = components(mesh, &f.density.values, g);
    let _ = writeln!(text, "interface.level = {}", g.threshold);
    let _ = writeln!(text, "interface.inner_area = {}", g.volume);
    let _ = writeln!(
        text,
        "interface.equivalent_radius = {}",
        (g.volume / std::f64::consts::PI).sqrt()
    );
    let _ = writeln!(text, "interface.perimeter = {}", g.perimeter);
    let _ = writeln!(text, "interface.components = {}", pieces.len());
    match convexity_score(g) {
        Ok(c) => {
            let _ = writeln!(text, "interface.convexity = {c}");
        }
        Err(_) => {
            let _ = writeln!(text, "interface.convexity = nan");
        }
    }
}

fn atom_summary(text: &mut String, mesh: &Mesh, result: &RunResult) {
    let atoms = &result.control.atoms;
    if atoms.is_empty() {
        return;
    }
    let _ = writeln!(text, "atoms.count = {}", atoms.len());
    for (i, a) in atoms.iter().enumerate() {
        let _ = writeln!(text, "atoms.{i}.weight = {}", a.weight);
        let _ = writeln!(text, "atoms.{i}.x = {}", a.location[0]);
        let _ = writeln!(text, "atoms.{i}.y = {}", a.location[1]);
    }
    let w = &result.adjoint.values;
    if let Some((i, v)) = w.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)) {
        let p = mesh.vertices()[i];
        let _ = writeln!(text, "adjoint.min = {v}");
        let _ = writeln!(text, "adjoint.argmin_x = {}", p[0]);
        let _ = writeln!(text, "adjoint.argmin_y = {}", p[1]);
    }
}

fn regularity_summary(text: &mut String, cfg: &RunConfig, mesh: &Mesh, u: &ScalarField) -> Result<()> {
    for &q in &cfg.regularity_q {
        let r = regularity_integral(mesh, &u.values, q)?;
        let _ = writeln!(text, "regularity.q{q}.value = {}", r.value);
        let _ = writeln!(text, "regularity.q{q}.excluded_area = {}", r.excluded_area);
    }
    Ok(())
}
