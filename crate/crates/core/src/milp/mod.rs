//! Mixed-binary linear programs: a model builder, an embedded dense simplex
//! with branch-and-bound, LP-format export, and a pluggable backend registry.

mod backend;
mod bnb;
#[cfg(feature = "highs")]
mod highs;
mod lp_format;
mod model;
mod propagate;
mod simplex;

use thiserror::Error;

pub use backend::{backend_solve, BackendRegistry, EmbeddedBackend, LpFileBackend, SolverBackend};
pub use bnb::{solve_milp, solve_milp_traced};
#[cfg(feature = "highs")]
pub use highs::HighsBackend;
pub use lp_format::{parse_lp, sanitize_name, write_lp};
pub use model::{
    LinConstraint, LinExpr, MilpModel, ObjSense, Sense, SolveResult, SolveStats, SolveStatus, SolverLimits,
    VarId, VarKind, Variable,
};
pub use simplex::solve_lp;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MilpError {
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("bad bounds [{lower}, {upper}] for `{name}`")]
    BadBounds { name: String, lower: f64, upper: f64 },
    #[error("unknown variable id {0}")]
    UnknownVariable(usize),
    #[error("non-finite coefficient in `{0}`")]
    NonFinite(String),
    #[error("solver backend `{0}` is not available")]
    BackendUnavailable(String),
    #[error("backend failure: {0}")]
    Backend(String),
    #[error("LP parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}
