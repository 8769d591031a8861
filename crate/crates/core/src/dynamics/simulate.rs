use serde::{Deserialize, Serialize};

use super::{BoundsBox, DynamicsError, Scenario};
use crate::stl::Trace;

/// Tolerance used when re-checking the dynamics recurrence.
pub const RECURRENCE_TOL: f64 = 1e-9;
const BOUNDS_TOL: f64 = 1e-9;

/// States `x_0 … x_N` together with the inputs that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Trace,
    pub u_leader: Vec<Vec<f64>>,
    pub u_follower: Vec<Vec<f64>>,
}

impl Trajectory {
    /// Largest violation of `x_{t+1} = A x_t + B_L u^L_t + B_F u^F_t + c`.
    pub fn recurrence_error(&self, scenario: &Scenario) -> f64 {
        let sys = &scenario.system;
        let mut worst: f64 = 0.0;
        for t in 0..self.u_leader.len() {
            let next = sys.step(self.states.state(t), &self.u_leader[t], &self.u_follower[t]);
            for (a, b) in next.iter().zip(self.states.state(t + 1)) {
                worst = worst.max((a - b).abs());
            }
        }
        for (a, b) in self.states.state(0).iter().zip(&scenario.x0) {
            worst = worst.max((a - b).abs());
        }
        worst
    }

    pub fn check(&self, scenario: &Scenario) -> Result<(), DynamicsError> {
        let n = scenario.horizon;
        if self.states.len() != n + 1 || self.u_leader.len() != n || self.u_follower.len() != n {
            return Err(DynamicsError::Dimension {
                what: "trajectory length".into(),
                expected: n + 1,
                found: self.states.len(),
            });
        }
        let err = self.recurrence_error(scenario);
        if err > RECURRENCE_TOL {
            return Err(DynamicsError::Invalid(format!(
                "trajectory violates the dynamics by {err:e}"
            )));
        }
        Ok(())
    }
}

fn check_inputs(
    which: &'static str,
    seq: &[Vec<f64>],
    bounds: &BoundsBox,
    horizon: usize,
) -> Result<(), DynamicsError> {
    if seq.len() != horizon {
        return Err(DynamicsError::Dimension {
            what: format!("{which} input sequence length"),
            expected: horizon,
            found: seq.len(),
        });
    }
    for (t, u) in seq.iter().enumerate() {
        if u.len() != bounds.dim() {
            return Err(DynamicsError::Dimension {
                what: format!("{which} input at t={t}"),
                expected: bounds.dim(),
                found: u.len(),
            });
        }
        for (component, value) in u.iter().enumerate() {
            let (lower, upper) = (bounds.lower[component], bounds.upper[component]);
            if !(*value >= lower - BOUNDS_TOL && *value <= upper + BOUNDS_TOL) {
                return Err(DynamicsError::InputOutOfBounds {
                    which,
                    t,
                    component,
                    value: *value,
                    lower,
                    upper,
                });
            }
        }
    }
    Ok(())
}

/// Rolls the system forward from `x0`. Inputs outside their boxes are an
/// error, never clipped.
pub fn simulate(
    scenario: &Scenario,
    u_leader: &[Vec<f64>],
    u_follower: &[Vec<f64>],
) -> Result<Trajectory, DynamicsError> {
    check_inputs("leader", u_leader, &scenario.leader_bounds, scenario.horizon)?;
    check_inputs("follower", u_follower, &scenario.follower_bounds, scenario.horizon)?;
    let mut states = Vec::with_capacity(scenario.horizon + 1);
    states.push(scenario.x0.clone());
    for t in 0..scenario.horizon {
        let next = scenario.system.step(&states[t], &u_leader[t], &u_follower[t]);
        states.push(next);
    }
    Ok(Trajectory {
        states: Trace::new(states).expect("states share the system dimension"),
        u_leader: u_leader.to_vec(),
        u_follower: u_follower.to_vec(),
    })
}

/// Linear split `x_t = nominal_t + Φ_t · vec(u^F)` for a fixed leader input.
///
/// `vec(u^F)` stacks the follower inputs time-major: entry `s * m_F + j` is
/// component `j` at step `s`.
#[derive(Debug, Clone)]
pub struct Superposition {
    pub nominal: Trace,
    /// `response[t][i]` is the row of `Φ` for state component `i` at time `t`.
    pub response: Vec<Vec<Vec<f64>>>,
}

impl Superposition {
    pub fn reconstruct(&self, u_follower: &[Vec<f64>]) -> Trace {
        let flat: Vec<f64> = u_follower.iter().flatten().copied().collect();
        let states = self
            .nominal
            .states()
            .iter()
            .zip(&self.response)
            .map(|(x, rows)| {
                x.iter()
                    .zip(rows)
                    .map(|(xi, row)| xi + row.iter().zip(&flat).map(|(a, b)| a * b).sum::<f64>())
                    .collect()
            })
            .collect();
        Trace::new(states).expect("consistent dimensions")
    }
}

pub fn superposition_decompose(
    scenario: &Scenario,
    u_leader: &[Vec<f64>],
) -> Result<Superposition, DynamicsError> {
    let zero = vec![vec![0.0; scenario.follower_dim()]; scenario.horizon];
    let nominal = simulate(scenario, u_leader, &zero)?.states;
    let sys = &scenario.system;
    let (n, mf, horizon) = (sys.state_dim(), sys.follower_dim(), scenario.horizon);
    let cols = mf * horizon;
    let mut response = Vec::with_capacity(horizon + 1);
    let mut current = vec![vec![0.0; cols]; n];
    response.push(current.clone());
    for t in 0..horizon {
        // Φ_{t+1} = A Φ_t + B_F E_t
        let mut next = vec![vec![0.0; cols]; n];
        for (i, row) in next.iter_mut().enumerate() {
            for (k, a) in sys.a[i].iter().enumerate() {
                if *a != 0.0 {
                    for (r, c) in row.iter_mut().zip(&current[k]) {
                        *r += a * c;
                    }
                }
            }
            for j in 0..mf {
                row[t * mf + j] += sys.b_follower[i][j];
            }
        }
        current = next;
        response.push(current.clone());
    }
    Ok(Superposition { nominal, response })
}


#[cfg(test)]
mod tests {
    use super::*;
    use tests_support::integrator;

    #[test]
    fn zero_input_matrices_give_constant_trajectory() {
        let mut sc = integrator(4);
        sc.system.b_leader = vec![vec![0.0, 0.0]; 2];
        sc.system.b_follower = vec![vec![0.0, 0.0]; 2];
        let u = vec![vec![0.5, -0.5]; 4];
        let tr = simulate(&sc, &u, &u).unwrap();
        assert!(tr.states.states().iter().all(|s| s == &vec![2.0, 6.0]));
    }

    #[test]
    fn single_integrator_moves_one_step_per_input() {
        let sc = integrator(3);
        let tr = simulate(&sc, &vec![vec![1.0, 0.0]; 3], &vec![vec![0.0, 0.0]; 3]).unwrap();
        assert_eq!(tr.states.state(1), &[3.0, 6.0]);
        assert_eq!(tr.states.state(2), &[4.0, 6.0]);
        assert_eq!(tr.states.state(3), &[5.0, 6.0]);
        tr.check(&sc).unwrap();
    }

    #[test]
    fn out_of_bounds_and_length_errors() {
        let sc = integrator(2);
        let ok = vec![vec![0.0, 0.0]; 2];
        let bad = vec![vec![0.0, 0.0], vec![1.5, 0.0]];
        assert!(matches!(
            simulate(&sc, &bad, &ok),
            Err(DynamicsError::InputOutOfBounds { which: "leader", t: 1, component: 0, .. })
        ));
        assert!(matches!(simulate(&sc, &ok, &ok[..1]), Err(DynamicsError::Dimension { .. })));
    }

    #[test]
    fn integrator_response_columns_are_unit_steps() {
        let sc = integrator(3);
        let sp = superposition_decompose(&sc, &sc.zero_leader()).unwrap();
        // state component 0 at time 3 responds with weight 1 to u^F_s[0] for s < 3
        assert_eq!(sp.response[3][0], vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        assert_eq!(sp.response[1][1], vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(sp.response[0].iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn zero_follower_reconstruction_is_nominal() {
        let sc = integrator(3);
        let ul = vec![vec![0.5, -1.0]; 3];
        let sp = superposition_decompose(&sc, &ul).unwrap();
        let full = simulate(&sc, &ul, &vec![vec![0.0, 0.0]; 3]).unwrap();
        assert_eq!(sp.reconstruct(&vec![vec![0.0, 0.0]; 3]), full.states);
    }
}
