//! Source-term optimal control for the Dirichlet Poisson problem on planar
//! domains, with a conditional-gradient solver and optimality diagnostics.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::redundant_guards)]

pub mod analysis;
pub mod config;
pub mod constraints;
pub mod error;
pub mod kkt;
pub mod mesh;
pub mod optimizer;
pub mod pipeline;
pub mod poisson;
pub mod problems;
pub mod sparse;

pub use config::{parse_config, RunConfig};
pub use constraints::{ConstraintKind, ConstraintSpec};
pub use error::{Error, Result};
pub use mesh::{Domain, Mesh};
pub use optimizer::{OptimizerConfig, StepRule};
pub use poisson::{Atom, Control, FemSpace, ScalarField};
pub use problems::{Coefficient, CostKind, CostSpec};
