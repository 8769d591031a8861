//! Stackelberg synthesis of leader inputs under signal temporal logic tasks.
//!
//! A leader commits to an input sequence; a follower then picks its own
//! inputs to satisfy its task if it can. The leader's plan must satisfy the
//! leader task against whatever the follower chooses.

pub mod dynamics;
pub mod encode;
pub mod milp;
pub mod scenarios;
pub mod stl;
pub mod synth;

pub use dynamics::{
    eval_cost, simulate, superposition_decompose, AffineSystem, BoundsBox, CostSpec, DynamicsError, EffortNorm,
    Scenario, ScenarioFile, Trajectory,
};
pub use stl::{eval_bool, parse, robustness, Formula, Predicate, StlError, Trace};
