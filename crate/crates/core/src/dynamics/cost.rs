use serde::{Deserialize, Serialize};

use super::{BoundsBox, CostSpec, DynamicsError, Scenario, Trajectory};
use crate::stl::robustness;

/// Per-step effort norm. `SquaredPwl` is `‖u‖²`; inside the MILP it is
/// replaced by the maximum of tangent lines at `segments + 1` evenly spaced
/// points of each component's bound interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffortNorm {
    SquaredPwl { segments: usize },
    L1,
}

/// Tangent points of `u²` over `[lower, upper]`.
pub(crate) fn tangent_points(lower: f64, upper: f64, segments: usize) -> Vec<f64> {
    (0..=segments)
        .map(|k| lower + (upper - lower) * k as f64 / segments as f64)
        .collect()
}

/// Tangent-line under-approximation of `u²`, including the tangent at zero.
pub fn pwl_square(u: f64, lower: f64, upper: f64, segments: usize) -> f64 {
    tangent_points(lower, upper, segments)
        .into_iter()
        .map(|a| 2.0 * a * u - a * a)
        .fold(0.0, f64::max)
}

/// Upper bound on `w · Σ (u² − pwl(u))` over a whole input sequence.
pub fn pwl_gap_bound(cost: &CostSpec, bounds: &BoundsBox, horizon: usize) -> f64 {
    match cost.effort_norm {
        EffortNorm::L1 => 0.0,
        EffortNorm::SquaredPwl { segments } => {
            let per_step: f64 = bounds
                .lower
                .iter()
                .zip(&bounds.upper)
                .map(|(l, u)| {
                    let half = (u - l) / segments as f64 / 2.0;
                    half * half
                })
                .sum();
            cost.effort_weight * per_step * horizon as f64
        }
    }
}

/// `w · Σ_t norm(u_t)`; `pwl` selects the tangent approximation used by the MILP.
pub fn leader_effort(cost: &CostSpec, bounds: &BoundsBox, u_leader: &[Vec<f64>], pwl: bool) -> f64 {
    let total: f64 = u_leader
        .iter()
        .flat_map(|u| u.iter().enumerate())
        .map(|(j, v)| match cost.effort_norm {
            EffortNorm::L1 => v.abs(),
            EffortNorm::SquaredPwl { segments } if pwl => {
                pwl_square(*v, bounds.lower[j], bounds.upper[j], segments)
            }
            EffortNorm::SquaredPwl { .. } => v * v,
        })
        .sum();
    cost.effort_weight * total
}

/// Exact leader cost of a trajectory.
pub fn eval_cost(scenario: &Scenario, traj: &Trajectory) -> Result<f64, DynamicsError> {
    let effort = leader_effort(&scenario.cost, &scenario.leader_bounds, &traj.u_leader, false);
    if !scenario.cost.include_leader_robustness {
        return Ok(effort);
    }
    let rho = robustness(&scenario.phi_leader, &traj.states, 0)
        .map_err(|source| DynamicsError::Formula { which: "phi_L", source })?;
    Ok(effort - rho)
}
