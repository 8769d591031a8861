//! Two-input discrete-time affine systems, scenarios and cost evaluation.
//!
//! The state evolves as `x_{t+1} = A x_t + B_L u^L_t + B_F u^F_t + c`, where
//! `u^L` is the leader input and `u^F` the follower input.

mod cost;
mod io;
mod simulate;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stl::{Formula, StlError};

pub use cost::{eval_cost, leader_effort, pwl_gap_bound, pwl_square, EffortNorm};
pub(crate) use cost::tangent_points;
pub use io::{read_trajectory_csv, write_trajectory_csv, ScenarioFile};
pub use simulate::{simulate, superposition_decompose, Superposition, Trajectory};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    Dimension {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("{which} input at t={t} component {component} is {value}, outside [{lower}, {upper}]")]
    InputOutOfBounds {
        which: &'static str,
        t: usize,
        component: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("bounds box has lower > upper at component {0}")]
    InvertedBounds(usize),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("formula error in {which}: {source}")]
    Formula {
        which: &'static str,
        #[source]
        source: StlError,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Row-major dense matrix used for the small system matrices.
pub type Matrix = Vec<Vec<f64>>;

pub(crate) fn mat_vec_add(m: &Matrix, v: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(m) {
        *o += row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineSystem {
    pub a: Matrix,
    pub b_leader: Matrix,
    pub b_follower: Matrix,
    pub drift: Vec<f64>,
}

impl AffineSystem {
    pub fn new(a: Matrix, b_leader: Matrix, b_follower: Matrix, drift: Option<Vec<f64>>) -> Result<Self, DynamicsError> {
        let n = a.len();
        let drift = drift.unwrap_or_else(|| vec![0.0; n]);
        let sys = AffineSystem {
            a,
            b_leader,
            b_follower,
            drift,
        };
        sys.validate()?;
        Ok(sys)
    }

    fn validate(&self) -> Result<(), DynamicsError> {
        let n = self.a.len();
        let dim = |what: &str, expected, found| {
            if expected == found {
                Ok(())
            } else {
                Err(DynamicsError::Dimension {
                    what: what.to_string(),
                    expected,
                    found,
                })
            }
        };
        if n == 0 {
            return Err(DynamicsError::Invalid("state dimension must be positive".into()));
        }
        for row in &self.a {
            dim("A columns", n, row.len())?;
        }
        dim("B_L rows", n, self.b_leader.len())?;
        dim("B_F rows", n, self.b_follower.len())?;
        dim("c", n, self.drift.len())?;
        let ml = self.b_leader[0].len();
        if ml == 0 {
            return Err(DynamicsError::Invalid("leader input dimension must be positive".into()));
        }
        for row in &self.b_leader {
            dim("B_L columns", ml, row.len())?;
        }
        let mf = self.b_follower[0].len();
        for row in &self.b_follower {
            dim("B_F columns", mf, row.len())?;
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.a.len()
    }

    pub fn leader_dim(&self) -> usize {
        self.b_leader[0].len()
    }

    pub fn follower_dim(&self) -> usize {
        self.b_follower[0].len()
    }

    pub fn step(&self, x: &[f64], u_leader: &[f64], u_follower: &[f64]) -> Vec<f64> {
        let mut next = self.drift.clone();
        mat_vec_add(&self.a, x, &mut next);
        mat_vec_add(&self.b_leader, u_leader, &mut next);
        mat_vec_add(&self.b_follower, u_follower, &mut next);
        next
    }
}

/// Componentwise interval `lower <= v <= upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoundsBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, DynamicsError> {
        if lower.len() != upper.len() {
            return Err(DynamicsError::Dimension {
                what: "bounds".into(),
                expected: lower.len(),
                found: upper.len(),
            });
        }
        if let Some(i) = (0..lower.len()).find(|&i| lower[i] > upper[i]) {
            return Err(DynamicsError::InvertedBounds(i));
        }
        Ok(BoundsBox { lower, upper })
    }

    pub fn symmetric(dim: usize, radius: f64) -> Self {
        BoundsBox {
            lower: vec![-radius; dim],
            upper: vec![radius; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        v.len() == self.dim()
            && v
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (l, u))| *x >= l - tol && *x <= u + tol)
    }

    /// All `2^dim` corner points (degenerate axes contribute one value).
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new()];
        for (l, u) in self.lower.iter().zip(&self.upper) {
            let vals: Vec<f64> = if l == u { vec![*l] } else { vec![*l, *u] };
            out = out
                .into_iter()
                .flat_map(|p| {
                    vals.iter().map(move |v| {
                        let mut q = p.clone();
                        q.push(*v);
                        q
                    })
                })
                .collect();
        }
        out
    }
}

/// Leader cost `J_S = w · Σ_t norm(u^L_t) − [robustness term] · ρ(φ^L)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    pub effort_weight: f64,
    pub effort_norm: EffortNorm,
    pub include_leader_robustness: bool,
}

impl CostSpec {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.effort_weight >= 0.0) {
            return Err(DynamicsError::Invalid("effort_weight must be nonnegative".into()));
        }
        if let EffortNorm::SquaredPwl { segments } = self.effort_norm {
            if segments < 2 {
                return Err(DynamicsError::Invalid("pwl_segments must be at least 2".into()));
            }
        }
        Ok(())
    }
}

/// Default big-M constant for the mixed-integer encodings.
pub const DEFAULT_BIG_M: f64 = 1e6;
/// Default strictness margin for the mixed-integer encodings.
pub const DEFAULT_EPSILON: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub state_names: Vec<String>,
    pub system: AffineSystem,
    pub x0: Vec<f64>,
    pub horizon: usize,
    pub state_bounds: BoundsBox,
    pub leader_bounds: BoundsBox,
    pub follower_bounds: BoundsBox,
    pub phi_leader: Formula,
    pub phi_follower: Formula,
    pub cost: CostSpec,
    /// Follower input used when no successful response exists (zero by default).
    pub noninterfering_input: Option<Vec<Vec<f64>>>,
    pub big_m: f64,
    pub epsilon: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let n = self.system.state_dim();
        let check = |what: &str, expected: usize, found: usize| {
            if expected != found {
                Err(DynamicsError::Dimension {
                    what: what.into(),
                    expected,
                    found,
                })
            } else {
                Ok(())
            }
        };
        self.system.validate()?;
        check("state_names", n, self.state_names.len())?;
        check("x0", n, self.x0.len())?;
        check("state_bounds", n, self.state_bounds.dim())?;
        check("leader_bounds", self.system.leader_dim(), self.leader_bounds.dim())?;
        check("follower_bounds", self.system.follower_dim(), self.follower_bounds.dim())?;
        self.cost.validate()?;
        self.phi_leader
            .check(n)
            .map_err(|source| DynamicsError::Formula { which: "phi_L", source })?;
        self.phi_follower
            .check(n)
            .map_err(|source| DynamicsError::Formula { which: "phi_F", source })?;
        let needed = self.phi_leader.horizon().max(self.phi_follower.horizon());
        if self.horizon < needed {
            return Err(DynamicsError::Invalid(format!(
                "horizon N={} is shorter than the formula horizon {needed}",
                self.horizon
            )));
        }
        if self.horizon == 0 {
            return Err(DynamicsError::Invalid("horizon must be positive".into()));
        }
        if !self.state_bounds.contains(&self.x0, 0.0) {
            return Err(DynamicsError::Invalid("x0 lies outside the state bounds".into()));
        }
        if let Some(seq) = &self.noninterfering_input {
            check("noninterfering_input length", self.horizon, seq.len())?;
            for (t, u) in seq.iter().enumerate() {
                if !self.follower_bounds.contains(u, 1e-12) {
                    return Err(DynamicsError::Invalid(format!(
                        "noninterfering_input at t={t} is outside the follower bounds"
                    )));
                }
            }
        }
        if !(self.big_m > 0.0) || !(self.epsilon > 0.0) {
            return Err(DynamicsError::Invalid("big_m and epsilon must be positive".into()));
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.system.state_dim()
    }

    pub fn leader_dim(&self) -> usize {
        self.system.leader_dim()
    }

    pub fn follower_dim(&self) -> usize {
        self.system.follower_dim()
    }

    /// The follower sequence assumed when the follower has no successful response.
    pub fn noninterfering(&self) -> Vec<Vec<f64>> {
        self.noninterfering_input
            .clone()
            .unwrap_or_else(|| vec![vec![0.0; self.follower_dim()]; self.horizon])
    }

    pub fn zero_leader(&self) -> Vec<Vec<f64>> {
        vec![vec![0.0; self.leader_dim()]; self.horizon]
    }
}
