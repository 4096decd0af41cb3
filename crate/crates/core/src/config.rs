//! Run configuration: flat `section.key = value` text.
//!
//! Later assignments to the same key win, so overrides are plain lines
//! appended to the base text.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;

use crate::constraints::{ConstraintKind, ConstraintSpec};
use crate::mesh::Domain;
use crate::optimizer::{OptimizerConfig, StepRule};
use crate::problems::{Coefficient, CostKind, CostSpec};

pub const DEFAULT_H: f64 = 0.05;
pub const DEFAULT_HOLE_CENTER: [f64; 2] = [0.4, 0.0];
pub const DEFAULT_HOLE_RADIUS: f64 = 0.25;

const KEYS: &[&str] = &[
    "run.mode",
    "domain.kind",
    "domain.radius",
    "domain.r_inner",
    "domain.r_outer",
    "domain.hole_x",
    "domain.hole_y",
    "domain.hole_radius",
    "domain.h",
    "cost.kind",
    "cost.p",
    "cost.coefficient",
    "constraint.kind",
    "constraint.m",
    "constraint.alpha",
    "constraint.beta",
    "optimizer.step_rule",
    "optimizer.tol",
    "optimizer.max_iters",
    "optimizer.cg_tol",
    "source.density",
    "analysis.regularity_q",
    "output.dir",
    "emit.fields",
    "emit.history",
    "emit.kkt",
    "emit.levelsets",
];

/// One problem found while reading a config.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    /// Line of the offending assignment, when there is one.
    pub line: Option<usize>,
    /// Key path such as `constraint.m`.
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.key, self.message),
            None => write!(f, "{}: {}", self.key, self.message),
        }
    }
}

/// Every issue found in a config, in line order.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ConfigError {
    pub issues: Vec<ConfigIssue>,
}

impl ConfigError {
    pub fn mentions(&self, key: &str) -> bool {
        self.issues.iter().any(|i| i.key == key)
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    /// Conditional-gradient optimization.
    Optimize,
    /// A single state solve for `source.density`.
    Solve,
}

impl RunMode {
    pub fn name(self) -> &'static str {
        match self {
            RunMode::Optimize => "optimize",
            RunMode::Solve => "solve",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmitFlags {
    pub fields: bool,
    pub history: bool,
    pub kkt: bool,
    pub levelsets: bool,
}

impl Default for EmitFlags {
    fn default() -> Self {
        EmitFlags {
            fields: true,
            history: true,
            kkt: true,
            levelsets: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: RunMode,
    pub domain: Domain,
    pub h: f64,
    /// Present in optimize mode.
    pub cost: Option<CostSpec>,
    /// Present in optimize mode.
    pub constraint: Option<ConstraintSpec>,
    pub optimizer: OptimizerConfig,
    /// Source of solve mode.
    pub source: Coefficient,
    pub regularity_q: Vec<f64>,
    pub output_dir: PathBuf,
    pub emit: EmitFlags,
}

struct Entry {
    line: usize,
    value: String,
}

struct Reader {
    entries: BTreeMap<String, Entry>,
    issues: Vec<ConfigIssue>,
}

impl Reader {
    fn issue(&mut self, key: &str, message: impl Into<String>) {
        let line = self.entries.get(key).map(|e| e.line).filter(|&l| l > 0);
        self.issues.push(ConfigIssue {
            line,
            key: key.to_string(),
            message: message.into(),
        });
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    fn parsed<T>(&mut self, key: &str, what: &str, parse: impl Fn(&str) -> Option<T>) -> Option<T> {
        let raw = self.raw(key)?.to_string();
        match parse(&raw) {
            Some(v) => Some(v),
            None => {
                self.issue(key, format!("expected {what}, got `{raw}`"));
                None
            }
        }
    }

    fn required<T>(&mut self, key: &str, what: &str, parse: impl Fn(&str) -> Option<T>) -> Option<T> {
        if self.raw(key).is_none() {
            self.issue(key, "missing required key");
            return None;
        }
        self.parsed(key, what, parse)
    }

    fn number(&mut self, key: &str, default: Option<f64>) -> Option<f64> {
        match default {
            Some(d) if self.raw(key).is_none() => Some(d),
            Some(_) => self.parsed(key, "a number", parse_number),
            None => self.required(key, "a number", parse_number),
        }
    }

    fn flag(&mut self, key: &str, default: bool) -> bool {
        self.parsed(key, "true or false", parse_bool).unwrap_or(default)
    }
}

fn parse_number(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| !v.is_nan())
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Some(true),
        "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

fn parse_list(s: &str) -> Option<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(parse_number)
        .collect()
}

/// Splits `text` into assignments. Syntax problems become issues.
fn tokenize(text: &str, entries: &mut BTreeMap<String, Entry>, issues: &mut Vec<ConfigIssue>) {
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            issues.push(ConfigIssue {
                line: Some(line),
                key: content.to_string(),
                message: "expected `section.key = value`".into(),
            });
            continue;
        };
        let key = key.trim().to_ascii_lowercase();
        if !KEYS.contains(&key.as_str()) {
            issues.push(ConfigIssue {
                line: Some(line),
                key,
                message: "unknown key".into(),
            });
            continue;
        }
        entries.insert(
            key,
            Entry {
                line,
                value: value.trim().to_string(),
            },
        );
    }
}

/// Parses and validates a config, reporting every issue at once.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_with_overrides(text, &[])
}

/// Parses `text` and then applies `section.key=value` overrides in order.
pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut entries = BTreeMap::new();
    let mut issues = Vec::new();
    tokenize(text, &mut entries, &mut issues);
    for o in overrides {
        let mut local = Vec::new();
        let mut single = BTreeMap::new();
        tokenize(o, &mut single, &mut local);
        // line 0 marks values that came from an override
        entries.extend(single.into_iter().map(|(k, e)| (k, Entry { line: 0, ..e })));
        issues.extend(local.into_iter().map(|mut i| {
            i.line = None;
            i.message = format!("{} (in override `{o}`)", i.message);
            i
        }));
    }
    let mut r = Reader { entries, issues };
    let cfg = build(&mut r);
    if r.issues.is_empty() {
        Ok(cfg.expect("no issues implies a complete config"))
    } else {
        r.issues.sort_by_key(|i| i.line.unwrap_or(usize::MAX));
        Err(ConfigError { issues: r.issues })
    }
}

fn build(r: &mut Reader) -> Option<RunConfig> {
    let mode = r
        .parsed("run.mode", "optimize or solve", |s| {
            match s.to_ascii_lowercase().as_str() {
                "optimize" => Some(RunMode::Optimize),
                "solve" => Some(RunMode::Solve),
                _ => None,
            }
        })
        .unwrap_or(RunMode::Optimize);

    let domain = read_domain(r);
    let h = r.number("domain.h", Some(DEFAULT_H));
    if let Some(h) = h {
        if !(h > 0.0 && h.is_finite()) {
            r.issue("domain.h", format!("mesh size must be positive, got {h}"));
        }
    }

    let (cost, constraint) = if mode == RunMode::Optimize {
        (read_cost(r), read_constraint(r))
    } else {
        (None, None)
    };
    if let (Some(d), Some(c)) = (domain, constraint.as_ref()) {
        if let Err(e) = c.validate(d.area()) {
            r.issue("constraint.m", e.to_string());
        }
    }

    let optimizer = read_optimizer(r);
    let source = r
        .parsed("source.density", "x2-y2 or const:<value>", Coefficient::parse_builtin)
        .unwrap_or(Coefficient::Const(1.0));
    let regularity_q = r
        .parsed(
            "analysis.regularity_q",
            "a comma-separated list of exponents",
            parse_list,
        )
        .unwrap_or_default();
    if let Some(q) = regularity_q.iter().find(|q| !(**q > 0.0 && q.is_finite())) {
        r.issue("analysis.regularity_q", format!("exponents must be positive, got {q}"));
    }
    let output_dir = PathBuf::from(r.raw("output.dir").unwrap_or("run"));
    let emit = EmitFlags {
        fields: r.flag("emit.fields", true),
        history: r.flag("emit.history", true),
        kkt: r.flag("emit.kkt", true),
        levelsets: r.flag("emit.levelsets", true),
    };

    let (cost, constraint) = match mode {
        RunMode::Optimize => (Some(cost?), Some(constraint?)),
        RunMode::Solve => (None, None),
    };
    Some(RunConfig {
        mode,
        domain: domain?,
        h: h?,
        cost,
        constraint,
        optimizer: optimizer?,
        source,
        regularity_q,
        output_dir,
        emit,
    })
}

fn read_domain(r: &mut Reader) -> Option<Domain> {
    let kind = r.required("domain.kind", "disk, annulus or disk_with_hole", |s| {
        let s = s.to_ascii_lowercase().replace('-', "_");
        ["disk", "annulus", "disk_with_hole"].contains(&s.as_str()).then_some(s)
    })?;
    let domain = match kind.as_str() {
        "disk" => Domain::Disk {
            radius: r.number("domain.radius", Some(1.0))?,
        },
        "annulus" => Domain::Annulus {
            r_inner: r.number("domain.r_inner", Some(1.0))?,
            r_outer: r.number("domain.r_outer", Some(2.0))?,
        },
        _ => Domain::DiskWithHole {
            radius: r.number("domain.radius", Some(1.0))?,
            hole_center: [
                r.number("domain.hole_x", Some(DEFAULT_HOLE_CENTER[0]))?,
                r.number("domain.hole_y", Some(DEFAULT_HOLE_CENTER[1]))?,
            ],
            hole_radius: r.number("domain.hole_radius", Some(DEFAULT_HOLE_RADIUS))?,
        },
    };
    if let Err(e) = domain.validate() {
        r.issue("domain.kind", e.to_string());
        return None;
    }
    Some(domain)
}

fn read_cost(r: &mut Reader) -> Option<CostSpec> {
    let kind = r.required(
        "cost.kind",
        "power_max, linear, tracking or compliance",
        CostKind::parse,
    )?;
    let spec = match kind {
        CostKind::PowerMax => CostSpec::power_max(r.number("cost.p", Some(2.0))?),
        CostKind::Linear | CostKind::Tracking => {
            let g = r.required("cost.coefficient", "x2-y2 or const:<value>", Coefficient::parse_builtin)?;
            if kind == CostKind::Linear {
                CostSpec::linear(g)
            } else {
                CostSpec::tracking(g)
            }
        }
        CostKind::Compliance => CostSpec::compliance(),
    };
    if let Err(e) = spec.validate() {
        r.issue("cost.p", e.to_string());
        return None;
    }
    Some(spec)
}

fn read_constraint(r: &mut Reader) -> Option<ConstraintSpec> {
    let kind = r.required(
        "constraint.kind",
        "tv_bound, nonneg_mass, box_mass, box_mass_lower or quadratic",
        ConstraintKind::parse,
    )?;
    let m = r.number("constraint.m", None);
    let (alpha, beta) = if kind.is_boxed() {
        (r.number("constraint.alpha", None), r.number("constraint.beta", None))
    } else {
        (Some(f64::NAN), Some(f64::NAN))
    };
    Some(ConstraintSpec {
        kind,
        m: m?,
        alpha: alpha?,
        beta: beta?,
    })
}

fn read_optimizer(r: &mut Reader) -> Option<OptimizerConfig> {
    let d = OptimizerConfig::default();
    let step_rule = r
        .parsed("optimizer.step_rule", "harmonic or armijo", StepRule::parse)
        .unwrap_or(d.step_rule);
    let tol = r.number("optimizer.tol", Some(d.tol));
    let max_iters = r
        .parsed("optimizer.max_iters", "a positive integer", |s| s.parse::<usize>().ok())
        .unwrap_or(d.max_iters);
    let cg_tol = r.number("optimizer.cg_tol", Some(d.cg_tol));
    if let Some(tol) = tol.filter(|t| !(*t > 0.0)) {
        r.issue("optimizer.tol", format!("must be positive, got {tol}"));
    }
    if max_iters == 0 {
        r.issue("optimizer.max_iters", "must be at least 1");
    }
    if let Some(cg_tol) = cg_tol.filter(|t| !(*t > 0.0 && *t <= 1e-4)) {
        r.issue("optimizer.cg_tol", format!("must lie in (0, 1e-4], got {cg_tol}"));
    }
    Some(OptimizerConfig {
        step_rule,
        tol: tol?,
        max_iters,
        cg_tol: cg_tol?,
    })
}

impl RunConfig {
    /// Canonical text form; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("run.mode", self.mode.name().into());
        match self.domain {
            Domain::Disk { radius } => {
                kv("domain.kind", "disk".into());
                kv("domain.radius", radius.to_string());
            }
            Domain::Annulus { r_inner, r_outer } => {
                kv("domain.kind", "annulus".into());
                kv("domain.r_inner", r_inner.to_string());
                kv("domain.r_outer", r_outer.to_string());
            }
            Domain::DiskWithHole {
                radius,
                hole_center,
                hole_radius,
            } => {
                kv("domain.kind", "disk_with_hole".into());
                kv("domain.radius", radius.to_string());
                kv("domain.hole_x", hole_center[0].to_string());
                kv("domain.hole_y", hole_center[1].to_string());
                kv("domain.hole_radius", hole_radius.to_string());
            }
        }
        kv("domain.h", self.h.to_string());
        if let Some(c) = &self.cost {
            kv("cost.kind", c.kind.name().into());
            match c.kind {
                CostKind::PowerMax => kv("cost.p", c.p.to_string()),
                CostKind::Linear | CostKind::Tracking => kv("cost.coefficient", c.coefficient.to_string()),
                CostKind::Compliance => {}
            }
        }
        if let Some(c) = &self.constraint {
            kv("constraint.kind", c.kind.name().into());
            kv("constraint.m", c.m.to_string());
            if c.kind.is_boxed() {
                kv("constraint.alpha", c.alpha.to_string());
                kv("constraint.beta", c.beta.to_string());
            }
        }
        kv("optimizer.step_rule", self.optimizer.step_rule.name().into());
        kv("optimizer.tol", self.optimizer.tol.to_string());
        kv("optimizer.max_iters", self.optimizer.max_iters.to_string());
        kv("optimizer.cg_tol", self.optimizer.cg_tol.to_string());
        kv("source.density", self.source.to_string());
        if !self.regularity_q.is_empty() {
            let qs: Vec<String> = self.regularity_q.iter().map(|q| q.to_string()).collect();
            kv("analysis.regularity_q", qs.join(", "));
        }
        kv("output.dir", self.output_dir.display().to_string());
        kv("emit.fields", self.emit.fields.to_string());
        kv("emit.history", self.emit.history.to_string());
        kv("emit.kkt", self.emit.kkt.to_string());
        kv("emit.levelsets", self.emit.levelsets.to_string());
        s
    }
}

pub const PRESET_NAMES: [&str; 5] = ["ex61", "ex62", "ex63", "compliance-disk", "annulus-regularity"];

/// Text of a shipped preset.
pub fn preset(name: &str) -> Option<&'static str> {
    Some(match name {
        "ex61" => EX61,
        "ex62" => EX62,
        "ex63" => EX63,
        "compliance-disk" => COMPLIANCE_DISK,
        "annulus-regularity" => ANNULUS_REGULARITY,
        _ => return None,
    })
}

const EX61: &str = "\
# Maximize the L^4 norm of the state under a mass bound; the optimum is a point source.
run.mode = optimize
domain.kind = disk_with_hole
domain.radius = 1
domain.hole_x = 0.4
domain.hole_y = 0
domain.hole_radius = 0.25
domain.h = 0.03
cost.kind = power_max
cost.p = 4
constraint.kind = nonneg_mass
constraint.m = 10
output.dir = run-ex61
";

const EX62: &str = "\
# Linear cost with a saddle weight and a 0/1 box.
run.mode = optimize
domain.kind = disk
domain.radius = 1
domain.h = 0.03
cost.kind = linear
cost.coefficient = x2-y2
constraint.kind = box_mass
constraint.alpha = 0
constraint.beta = 1
constraint.m = 1.25
output.dir = run-ex62
";

const EX63: &str = "\
# Tracking a constant state with a 0/1 box.
run.mode = optimize
domain.kind = disk
domain.radius = 1
domain.h = 0.03
cost.kind = tracking
cost.coefficient = const:0.1
constraint.kind = box_mass
constraint.alpha = 0
constraint.beta = 1
constraint.m = 1.25
# the cost flattens long before the control is bang-bang
optimizer.tol = 1e-9
output.dir = run-ex63
";

const COMPLIANCE_DISK: &str = "\
# Compliance with a lower mass bound.
run.mode = optimize
domain.kind = disk
domain.radius = 1
domain.h = 0.0125
cost.kind = compliance
constraint.kind = box_mass_lower
constraint.alpha = 0
constraint.beta = 1
constraint.m = 1.25
output.dir = run-compliance-disk
";

const ANNULUS_REGULARITY: &str = "\
# Unit source on the annulus 1 < r < 2.
run.mode = solve
domain.kind = annulus
domain.r_inner = 1
domain.r_outer = 2
domain.h = 0.025
source.density = const:1
analysis.regularity_q = 1, 2
output.dir = run-annulus-regularity
";
