//! Exhaustive oracles over discretized input grids, and the master problems
//! restricted to the same grids.

use rayon::prelude::*;

use crate::dynamics::{eval_cost, simulate, EffortNorm, Scenario};
use crate::encode::{EncodingContext, Polarity};
use crate::milp::{LinExpr, ObjSense, Sense, SolveStatus};
use crate::stl::eval_bool;

use super::cegis::{
    add_blocking_candidates, add_cooperative_candidates, add_existential, eval_seq, leader_part_from, solve,
};
use super::{max_follower_robustness, Mode, SynthConfig, SynthError, BLOCK_TOL};

/// Largest number of sequences any oracle here enumerates.
pub const BRUTE_FORCE_LIMIT: usize = 1_000_000;

/// Optimal grid plan and its exact cost.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteResult {
    pub u_leader: Vec<Vec<f64>>,
    pub cost: f64,
    /// Cooperative when the follower has a successful grid response.
    pub mode: Mode,
}

/// `n` evenly spaced values from `lo` to `hi` inclusive (the midpoint when `n = 1`).
pub fn grid_levels(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![(lo + hi) / 2.0],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Per-component level lists of a box.
fn box_levels(b: &crate::dynamics::BoundsBox, n: usize) -> Vec<Vec<f64>> {
    b.lower.iter().zip(&b.upper).map(|(l, u)| grid_levels(*l, *u, n)).collect()
}

fn sequence_count(levels: &[Vec<f64>], horizon: usize) -> Result<usize, SynthError> {
    let count = levels.iter().map(|l| l.len() as f64).product::<f64>().powi(horizon as i32);
    if count > BRUTE_FORCE_LIMIT as f64 {
        return Err(SynthError::TooLarge {
            count,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    Ok(count as usize)
}

/// The `index`-th grid sequence in mixed radix, time-major.
fn nth_sequence(levels: &[Vec<f64>], horizon: usize, mut index: usize) -> Vec<Vec<f64>> {
    (0..horizon)
        .map(|_| {
            levels
                .iter()
                .map(|l| {
                    let v = l[index % l.len()];
                    index /= l.len();
                    v
                })
                .collect()
        })
        .collect()
}

fn all_sequences(levels: &[Vec<f64>], horizon: usize) -> Result<Vec<Vec<Vec<f64>>>, SynthError> {
    let n = sequence_count(levels, horizon)?;
    Ok((0..n).map(|i| nth_sequence(levels, horizon, i)).collect())
}

/// Exhaustive leader-follower optimum on the grids. For every leader grid
/// sequence the successful follower grid responses are collected; when there
/// is one, the leader task must hold under all of them and the cost is the
/// worst over them, otherwise the leader task must hold under the
/// non-interfering input and the cost is taken there. Ties keep the lowest
/// leader index.
pub fn brute_force_ssp(
    scenario: &Scenario,
    leader_levels: usize,
    follower_levels: usize,
) -> Result<Option<BruteResult>, SynthError> {
    let leaders = all_sequences(&box_levels(&scenario.leader_bounds, leader_levels), scenario.horizon)?;
    let followers = all_sequences(&box_levels(&scenario.follower_bounds, follower_levels), scenario.horizon)?;
    let ni = scenario.noninterfering();
    let evaluated: Vec<Option<(f64, Mode)>> = leaders
        .par_iter()
        .map(|u_l| -> Result<Option<(f64, Mode)>, SynthError> {
            let mut worst: Option<f64> = None;
            for u_f in &followers {
                let traj = simulate(scenario, u_l, u_f)?;
                if !eval_bool(&scenario.phi_follower, &traj.states, 0)? {
                    continue;
                }
                if !eval_bool(&scenario.phi_leader, &traj.states, 0)? {
                    return Ok(None);
                }
                let c = eval_cost(scenario, &traj)?;
                worst = Some(worst.map_or(c, |w: f64| w.max(c)));
            }
            if let Some(w) = worst {
                return Ok(Some((w, Mode::Cooperative)));
            }
            let traj = simulate(scenario, u_l, &ni)?;
            if !eval_bool(&scenario.phi_leader, &traj.states, 0)? {
                return Ok(None);
            }
            Ok(Some((eval_cost(scenario, &traj)?, Mode::Antagonistic)))
        })
        .collect::<Result<_, _>>()?;
    Ok(pick_min(&leaders, &evaluated))
}

fn pick_min(leaders: &[Vec<Vec<f64>>], evaluated: &[Option<(f64, Mode)>]) -> Option<BruteResult> {
    let mut best: Option<usize> = None;
    for (i, e) in evaluated.iter().enumerate() {
        if let Some((c, _)) = e {
            if best.map_or(true, |b| *c < evaluated[b].expect("best is feasible").0) {
                best = Some(i);
            }
        }
    }
    best.map(|i| {
        let (cost, mode) = evaluated[i].expect("best is feasible");
        BruteResult {
            u_leader: leaders[i].clone(),
            cost,
            mode,
        }
    })
}

/// Cheapest leader grid sequence that satisfies φ^L under the non-interfering
/// input and blocks the follower over its continuous box, judged by the
/// MILP falsifier (`max ρ^F ≤ −ε`).
pub fn brute_force_antagonistic(
    scenario: &Scenario,
    leader_levels: usize,
    config: &SynthConfig,
) -> Result<Option<BruteResult>, SynthError> {
    let s = &config.apply(scenario);
    let eps = config.encode_options(s).epsilon;
    let leaders = all_sequences(&box_levels(&s.leader_bounds, leader_levels), s.horizon)?;
    let ni = s.noninterfering();
    let mut feasible: Vec<(f64, usize)> = leaders
        .par_iter()
        .enumerate()
        .map(|(i, u_l)| -> Result<Option<(f64, usize)>, SynthError> {
            let traj = simulate(s, u_l, &ni)?;
            if !eval_bool(&s.phi_leader, &traj.states, 0)? {
                return Ok(None);
            }
            Ok(Some((eval_cost(s, &traj)?, i)))
        })
        .filter_map(Result::transpose)
        .collect::<Result<_, _>>()?;
    feasible.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    // blocking is only checked in cost order, so the first hit is optimal
    for (cost, i) in feasible {
        let (value, _) = max_follower_robustness(s, &leaders[i], config)?;
        if value <= -eps + BLOCK_TOL {
            return Ok(Some(BruteResult {
                u_leader: leaders[i].clone(),
                cost,
                mode: Mode::Antagonistic,
            }));
        }
    }
    Ok(None)
}

/// One-hot grid variables: each input component is `Σ_l level_l b_l` with
/// `Σ_l b_l = 1`. Also returns the exact effort `Σ norm(level_l) b_l`.
/// The selectors get branching priority `priority`.
fn one_hot_inputs(
    ctx: &mut EncodingContext<'_>,
    levels: &[Vec<f64>],
    stem: &str,
    norm: Option<EffortNorm>,
    priority: u32,
) -> Result<(Vec<Vec<LinExpr>>, LinExpr), SynthError> {
    let mut effort = LinExpr::default();
    let mut seq = Vec::new();
    for t in 0..ctx.scenario.horizon {
        let mut step = Vec::new();
        for (j, lv) in levels.iter().enumerate() {
            let mut u = LinExpr::default();
            let mut one = LinExpr::default();
            for (l, v) in lv.iter().enumerate() {
                let b = ctx.model.add_binary(&format!("{stem}[{t}][{j}][{l}]"))?;
                ctx.model.set_priority(b, priority);
                u.add_term(b, *v);
                one.add_term(b, 1.0);
                if let Some(n) = norm {
                    let cost = match n {
                        EffortNorm::L1 => v.abs(),
                        EffortNorm::SquaredPwl { .. } => v * v,
                    };
                    effort.add_term(b, cost);
                }
            }
            ctx.model
                .add_constraint(&format!("{stem}_one[{t}][{j}]"), one, Sense::Eq, 1.0)?;
            step.push(u);
        }
        seq.push(step);
    }
    Ok((seq, effort))
}

/// The master problem of `mode` with the leader and the existential follower
/// tied to grid levels and every follower grid sequence as a candidate.
/// Effort is exact on the grid, so the optimum is directly comparable with
/// [`brute_force_ssp`].
pub fn grid_master(
    scenario: &Scenario,
    leader_levels: usize,
    follower_levels: usize,
    mode: Mode,
    config: &SynthConfig,
) -> Result<Option<BruteResult>, SynthError> {
    let s = &config.apply(scenario);
    let f_levels = box_levels(&s.follower_bounds, follower_levels);
    let candidates = all_sequences(&f_levels, s.horizon)?;
    let l_levels = box_levels(&s.leader_bounds, leader_levels);
    sequence_count(&l_levels, s.horizon)?;
    let mut ctx = EncodingContext::new(s, config.encode_options(s))?;
    let (u, effort) = one_hot_inputs(&mut ctx, &l_levels, "gL", Some(s.cost.effort_norm), 2)?;
    let leader = leader_part_from(&mut ctx, u)?;
    let objective = match mode {
        Mode::Cooperative => {
            let (uf, _) = one_hot_inputs(&mut ctx, &f_levels, "gF", None, 1)?;
            let ex = add_existential(&mut ctx, &leader, uf, &effort)?;
            let k = add_cooperative_candidates(&mut ctx, &leader, &ex, &effort, candidates.iter())?;
            LinExpr::var(k)
        }
        Mode::Antagonistic => {
            ctx.require_sat(leader.nominal, &s.phi_leader, 0, true)?;
            let j = ctx.encode_cost(leader.nominal, &effort, Polarity::Over)?;
            add_blocking_candidates(&mut ctx, &leader, candidates.iter())?;
            j.expr
        }
    };
    ctx.model.set_objective(ObjSense::Minimize, objective)?;
    let r = solve(config, &ctx.model, "grid master")?;
    // a limit-hit incumbent is useless as an oracle
    match r.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => return Ok(None),
        status => return Err(SynthError::Solver { what: "grid master", status }),
    }
    Ok(Some(BruteResult {
        u_leader: eval_seq(&leader.u, &r),
        cost: r.objective,
        mode,
    }))
}
