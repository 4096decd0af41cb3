//! Conditional-gradient iteration `f_{n+1} = f_n + ε_n (f̂_n − f_n)`.

use std::fmt::{self, Write as _};

use crate::constraints::{linearized_oracle, ConstraintSpec, OracleOptions};
use crate::error::{Error, Result};
use crate::kkt::{kkt_report, KktReport};
use crate::poisson::{check_cg_tol, Control, FemSpace, ScalarField};
use crate::problems::{adjoint_from_state, cost, CostSpec};

pub const ARMIJO_SHRINK: f64 = 0.5;
pub const ARMIJO_SLOPE: f64 = 1e-4;
const ARMIJO_MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepRule {
    /// `ε_n = 2 / (n + 2)`.
    Harmonic,
    /// Backtracking from `ε = 1` on the total cost.
    Armijo,
}

impl StepRule {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "harmonic" => Some(StepRule::Harmonic),
            "armijo" => Some(StepRule::Armijo),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StepRule::Harmonic => "harmonic",
            StepRule::Armijo => "armijo",
        }
    }
}

impl fmt::Display for StepRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub step_rule: StepRule,
    pub tol: f64,
    pub max_iters: usize,
    pub cg_tol: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            step_rule: StepRule::Armijo,
            tol: 1e-6,
            max_iters: 500,
            cg_tol: 1e-10,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::arg(format!("optimizer tol must be positive, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::arg("max_iters must be at least 1"));
        }
        check_cg_tol(self.cg_tol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub n: usize,
    /// `I_n = J(f_n) + ∫ψ(f_n)`.
    pub cost: f64,
    pub fw_gap: f64,
    pub lambda: f64,
    /// Step taken from `f_n`; zero on the final record.
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIterations,
}

/// Outcome of [`stop_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopDecision {
    pub stop: bool,
    /// The absolute test was used because `I_0 = 0`.
    pub absolute: bool,
}

/// `|I_n − I_{n−1}| / |I_0| < tol`, or `|I_n − I_{n−1}| < tol` when `I_0 = 0`.
pub fn stop_check(costs: &[f64], tol: f64) -> StopDecision {
    if costs.len() < 2 {
        return StopDecision {
            stop: false,
            absolute: costs.first() == Some(&0.0),
        };
    }
    let n = costs.len() - 1;
    let change = (costs[n] - costs[n - 1]).abs();
    if costs[0] == 0.0 {
        StopDecision {
            stop: change < tol,
            absolute: true,
        }
    } else {
        StopDecision {
            stop: change / costs[0].abs() < tol,
            absolute: false,
        }
    }
}

/// `∫ w (f − f̂)`.
pub fn fw_gap(space: &FemSpace<'_>, w: &[f64], f: &Control, f_hat: &Control) -> Result<f64> {
    Ok(space.inner(w, f)? - space.inner(w, f_hat)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub control: Control,
    pub state: ScalarField,
    pub adjoint: ScalarField,
    pub history: Vec<IterationRecord>,
    pub termination: Termination,
    pub absolute_stop: bool,
    pub report: KktReport,
}

impl RunResult {
    pub fn history_csv(&self) -> String {
        history_csv(&self.history)
    }
}

pub fn history_csv(history: &[IterationRecord]) -> String {
    let mut out = String::from("n,cost,fw_gap,lambda,step\n");
    for r in history {
        let _ = writeln!(out, "{},{},{},{},{}", r.n, r.cost, r.fw_gap, r.lambda, r.step);
    }
    out
}

/// Runs the iteration from an admissible `f0`.
pub fn run(
    cost_spec: &CostSpec,
    constraint: &ConstraintSpec,
    space: &FemSpace<'_>,
    f0: &Control,
    config: &OptimizerConfig,
) -> Result<RunResult> {
    config.validate()?;
    cost_spec.validate()?;
    constraint.validate(space.domain_area())?;
    f0.validate(space.mesh())?;
    constraint.check_admissible(space, f0, 1e-9)?;

    let tol = config.cg_tol;
    let replacement = constraint.kind.allows_atoms();
    let total = |f: &Control, u: &ScalarField| -> Result<f64> {
        Ok(cost(cost_spec, space, u, f)? + constraint.integral(space, f))
    };
    let at = |n: usize| {
        move |e: Error| Error::Iteration {
            iteration: n,
            source: Box::new(e),
        }
    };

    let mut f = f0.clone();
    let mut u = space.resolvent(&f, tol).map_err(at(0))?;
    let mut costs = vec![total(&f, &u)?];
    let mut history = Vec::new();
    let mut n = 0usize;
    let mut absolute_stop = costs[0] == 0.0;
    let (termination, w) = loop {
        let w = adjoint_from_state(cost_spec, space, &f, &u, tol).map_err(at(n))?;
        let oracle = linearized_oracle(constraint, space, &w.values, OracleOptions::default())?;
        let gap = fw_gap(space, &w.values, &f, &oracle.control)?;
        let current = costs[n];

        let decision = stop_check(&costs, config.tol);
        absolute_stop |= decision.absolute;
        if decision.stop || n >= config.max_iters {
            history.push(IterationRecord {
                n,
                cost: current,
                fw_gap: gap,
                lambda: oracle.lambda,
                step: 0.0,
            });
            let t = if decision.stop {
                Termination::Converged
            } else {
                Termination::MaxIterations
            };
            break (t, w);
        }

        let u_hat = space.resolvent(&oracle.control, tol).map_err(at(n))?;
        let trial = |eps: f64| -> Result<(Control, ScalarField, f64)> {
            let fe = f.blend(&oracle.control, eps);
            let ue = ScalarField::new(
                u.values
                    .iter()
                    .zip(&u_hat.values)
                    .map(|(a, b)| a + eps * (b - a))
                    .collect(),
            );
            let ie = total(&fe, &ue)?;
            Ok((fe, ue, ie))
        };

        let mut step = 0.0;
        let mut next = None;
        if replacement {
            let ie = total(&oracle.control, &u_hat)?;
            if ie < current {
                step = 1.0;
                next = Some((oracle.control.clone(), u_hat.clone(), ie));
            }
        } else {
            match config.step_rule {
                StepRule::Harmonic => {
                    step = 2.0 / (n as f64 + 2.0);
                    next = Some(trial(step)?);
                }
                StepRule::Armijo => {
                    let mut eps = 1.0;
                    for _ in 0..=ARMIJO_MAX_HALVINGS {
                        let cand = trial(eps)?;
                        if cand.2 <= current - ARMIJO_SLOPE * eps * gap.max(0.0) {
                            step = eps;
                            next = Some(cand);
                            break;
                        }
                        eps *= ARMIJO_SHRINK;
                    }
                }
            }
        }
        history.push(IterationRecord {
            n,
            cost: current,
            fw_gap: gap,
            lambda: oracle.lambda,
            step,
        });
        if let Some((fe, ue, ie)) = next {
            f = fe;
            u = ue;
            costs.push(ie);
        } else {
            costs.push(current);
        }
        n += 1;
    };

    let report = kkt_report(cost_spec, constraint, space, &f, tol).map_err(at(n))?;
    Ok(RunResult {
        control: f,
        state: u,
        adjoint: w,
        history,
        termination,
        absolute_stop,
        report,
    })
}
