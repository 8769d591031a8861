//! Independent checks of a synthesis outcome: monitors on the planned
//! trajectory, a fresh falsifier model and a seeded random sampler.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::{eval_cost, pwl_gap_bound, simulate, Scenario};
use crate::stl::{eval_bool, robustness};

use super::cegis::cooperative_falsifier;
use super::{
    max_follower_robustness, random_follower, Certificate, Check, Mode, SynthConfig, SynthError, SynthesisOutcome,
    BLOCK_TOL,
};

/// Verdict of one sampled follower sequence.
enum Sample {
    Fine,
    Violation(String, Vec<Vec<f64>>),
}

/// Checks `outcome` without reusing any model built by the loop.
///
/// Cooperative: (a) the witness response satisfies φ^F and φ^L; (b) a
/// freshly built falsifier finds nothing below `−cegis_tol`; (c) no sampled
/// successful response violates φ^L or exceeds `k` plus the PWL gap.
/// Antagonistic: (a) φ^L holds under the non-interfering input; (b) a fresh
/// `max ρ^F` solve is at most `−ε`; (c) no sampled response satisfies φ^F.
pub fn verify_outcome(
    scenario: &Scenario,
    outcome: &SynthesisOutcome,
    config: &SynthConfig,
) -> Result<Certificate, SynthError> {
    let s = &config.apply(scenario);
    if outcome.u_leader.len() != s.horizon {
        return Err(SynthError::Mismatch(format!(
            "leader sequence has {} steps, scenario horizon is {}",
            outcome.u_leader.len(),
            s.horizon
        )));
    }
    let mut checks = Vec::new();
    if let Some(t) = outcome
        .u_leader
        .iter()
        .position(|u| !s.leader_bounds.contains(u, 0.0))
    {
        checks.push(Check {
            name: "leader_bounds".into(),
            passed: false,
            detail: format!("leader input at t={t} is outside its box"),
        });
        return Ok(Certificate {
            passed: false,
            checks,
            witness: None,
        });
    }
    let mut witness = None;
    let tol = config.cegis_tol;
    let k = outcome.k.unwrap_or(f64::INFINITY);
    let gap = pwl_gap_bound(&s.cost, &s.leader_bounds, s.horizon);

    // (a) monitors on the planned trajectory
    let planned = outcome.planned_follower(s);
    let traj = simulate(s, &outcome.u_leader, &planned)?;
    let rho_l = robustness(&s.phi_leader, &traj.states, 0)?;
    let leader_ok = eval_bool(&s.phi_leader, &traj.states, 0)?;
    match outcome.mode {
        Mode::Cooperative => {
            let follower_ok = eval_bool(&s.phi_follower, &traj.states, 0)?;
            let cost = eval_cost(s, &traj)?;
            let cost_ok = cost <= k + gap + tol;
            checks.push(Check {
                name: "witness_monitor".into(),
                passed: outcome.witness_follower.is_some() && follower_ok && leader_ok && cost_ok,
                detail: format!(
                    "phi_F {follower_ok}, phi_L {leader_ok} (rho {rho_l:.9}), cost {cost:.9} vs k {k:.9}"
                ),
            });
        }
        Mode::Antagonistic => {
            checks.push(Check {
                name: "noninterfering_monitor".into(),
                passed: leader_ok,
                detail: format!("phi_L {leader_ok} (rho {rho_l:.9})"),
            });
        }
    }

    // (b) fresh falsifier
    match outcome.mode {
        Mode::Cooperative => {
            let (value, cex) = cooperative_falsifier(s, config, &outcome.u_leader, k)?;
            let passed = value >= -tol;
            if !passed {
                witness = Some(cex);
            }
            checks.push(Check {
                name: "fresh_falsifier".into(),
                passed,
                detail: format!("min over follower inputs {value:.9}"),
            });
        }
        Mode::Antagonistic => {
            let eps = config.encode_options(s).epsilon;
            let (value, maximizer) = max_follower_robustness(s, &outcome.u_leader, config)?;
            let passed = value <= -eps + BLOCK_TOL;
            if !passed {
                witness = Some(maximizer);
            }
            checks.push(Check {
                name: "fresh_falsifier".into(),
                passed,
                detail: format!("max follower robustness {value:.9}"),
            });
        }
    }

    // (c) random and corner follower sequences
    let corners: Vec<Vec<Vec<f64>>> = s
        .follower_bounds
        .corners()
        .into_iter()
        .map(|c| vec![c; s.horizon])
        .collect();
    let n_random = config.verify_samples;
    let total = n_random + corners.len();
    let verdicts: Vec<Sample> = (0..total)
        .into_par_iter()
        .map(|i| {
            let u_f = if i < n_random {
                let mut rng = ChaCha8Rng::seed_from_u64(outcome.seed);
                rng.set_stream(i as u64 + 1);
                random_follower(s, &mut rng)
            } else {
                corners[i - n_random].clone()
            };
            match sample_verdict(s, outcome, &u_f, k + gap + tol, tol) {
                Ok(Some(msg)) => Sample::Violation(msg, u_f),
                Ok(None) => Sample::Fine,
                Err(e) => Sample::Violation(format!("simulation error: {e}"), u_f),
            }
        })
        .collect();
    let first_bad = verdicts.into_iter().enumerate().find_map(|(i, v)| match v {
        Sample::Violation(m, u) => Some((i, m, u)),
        Sample::Fine => None,
    });
    let passed = first_bad.is_none();
    let detail = match first_bad {
        None => format!("{n_random} random and {} corner sequences", corners.len()),
        Some((i, msg, u)) => {
            witness.get_or_insert(u);
            format!("sample {i}: {msg}")
        }
    };
    checks.push(Check {
        name: "random_falsifier".into(),
        passed,
        detail,
    });

    Ok(Certificate {
        passed: checks.iter().all(|c| c.passed),
        checks,
        witness,
    })
}

fn sample_verdict(
    s: &Scenario,
    outcome: &SynthesisOutcome,
    u_f: &[Vec<f64>],
    cost_cap: f64,
    tol: f64,
) -> Result<Option<String>, SynthError> {
    let traj = simulate(s, &outcome.u_leader, u_f)?;
    if !eval_bool(&s.phi_follower, &traj.states, 0)? {
        return Ok(None);
    }
    if outcome.mode == Mode::Antagonistic {
        return Ok(Some("successful follower response".into()));
    }
    let rho_l = robustness(&s.phi_leader, &traj.states, 0)?;
    if rho_l < -tol {
        return Ok(Some(format!("phi_L violated (rho {rho_l:.9})")));
    }
    let cost = eval_cost(s, &traj)?;
    if cost > cost_cap {
        return Ok(Some(format!("cost {cost:.9} above bound {cost_cap:.9}")));
    }
    Ok(None)
}
