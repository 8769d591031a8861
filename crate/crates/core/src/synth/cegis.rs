//! Master problems and falsifiers of the two counterexample-guided loops.
//!
//! Every encoding is one-sided in the direction that keeps the loop sound:
//! requirements use under-approximations, quantities the master minimizes use
//! over-approximations, and the falsifiers use the opposite sides so that
//! their optima are exact.

use std::time::Instant;

use crate::dynamics::{eval_cost, simulate, Scenario};
use crate::encode::{CopyId, Encoded, EncodingContext, Polarity};
use crate::milp::{LinExpr, MilpModel, ObjSense, SolveResult, SolveStatus, VarId};

use super::{
    verify_outcome, CandidateSet, IterationRecord, Mode, Provenance, Status, SynthConfig, SynthError,
    SynthesisOutcome, BLOCK_TOL,
};

pub(crate) fn constants(seq: &[Vec<f64>]) -> Vec<Vec<LinExpr>> {
    seq.iter()
        .map(|u| u.iter().map(|v| LinExpr::constant(*v)).collect())
        .collect()
}

pub(crate) fn vars(seq: &[Vec<VarId>]) -> Vec<Vec<LinExpr>> {
    seq.iter().map(|u| u.iter().map(|v| LinExpr::var(*v)).collect()).collect()
}

pub(crate) fn values(seq: &[Vec<VarId>], r: &SolveResult) -> Vec<Vec<f64>> {
    seq.iter().map(|u| u.iter().map(|v| r.value(*v)).collect()).collect()
}

pub(crate) fn eval_seq(seq: &[Vec<LinExpr>], r: &SolveResult) -> Vec<Vec<f64>> {
    seq.iter().map(|u| u.iter().map(|e| e.eval(&r.values)).collect()).collect()
}

/// Solves and maps "no solution" statuses other than infeasibility to errors.
pub(crate) fn solve(config: &SynthConfig, model: &MilpModel, what: &'static str) -> Result<SolveResult, SynthError> {
    let r = config.solver()?.solve(model, &config.limits)?;
    match r.status {
        SolveStatus::Optimal | SolveStatus::Infeasible => Ok(r),
        _ if r.has_solution() => Ok(r),
        status => Err(SynthError::Solver { what, status }),
    }
}

/// Leader part shared by the masters: input variables plus the nominal copy
/// under the non-interfering follower input, with the state bounds imposed.
pub(crate) struct LeaderPart {
    pub u: Vec<Vec<LinExpr>>,
    pub nominal: CopyId,
}

pub(crate) fn leader_part(ctx: &mut EncodingContext<'_>) -> Result<LeaderPart, SynthError> {
    let v = ctx.leader_inputs("m")?;
    leader_part_from(ctx, vars(&v))
}

pub(crate) fn leader_part_from(ctx: &mut EncodingContext<'_>, u: Vec<Vec<LinExpr>>) -> Result<LeaderPart, SynthError> {
    let ni = constants(&ctx.scenario.noninterfering());
    let nominal = ctx.add_trajectory("nom", &u, &ni, None)?;
    ctx.impose_state_bounds(nominal)?;
    Ok(LeaderPart { u, nominal })
}

/// Existential follower of the cooperative master: a successful response
/// under which the leader task holds.
pub(crate) struct Existential {
    pub u: Vec<Vec<LinExpr>>,
    pub cost: Encoded,
}

pub(crate) fn add_existential(
    ctx: &mut EncodingContext<'_>,
    leader: &LeaderPart,
    u_follower: Vec<Vec<LinExpr>>,
    effort: &LinExpr,
) -> Result<Existential, SynthError> {
    let s = ctx.scenario;
    let ex = ctx.add_trajectory("ex", &leader.u, &u_follower, Some(leader.nominal))?;
    ctx.require_sat(ex, &s.phi_follower, 0, true)?;
    ctx.require_sat(ex, &s.phi_leader, 0, true)?;
    let cost = ctx.encode_cost(ex, effort, Polarity::Over)?;
    Ok(Existential { u: u_follower, cost })
}

/// Adds the cooperative candidate constraints `ρ^K(k, u^L, u′^F) ≥ 0` and
/// `z^L ≥ z^F` for every candidate and returns `k`, bounded by the cost
/// ranges of all copies.
pub(crate) fn add_cooperative_candidates<'a>(
    ctx: &mut EncodingContext<'_>,
    leader: &LeaderPart,
    existential: &Existential,
    effort: &LinExpr,
    candidates: impl Iterator<Item = &'a Vec<Vec<f64>>>,
) -> Result<VarId, SynthError> {
    let s = ctx.scenario;
    let mut copies = Vec::new();
    let (mut lo, mut hi) = (existential.cost.lo, existential.cost.hi);
    for (i, c) in candidates.enumerate() {
        let copy = ctx.add_trajectory(&format!("c{i}"), &leader.u, &constants(c), Some(leader.nominal))?;
        let j = ctx.encode_cost(copy, effort, Polarity::Over)?;
        let rho_f = ctx.encode_robustness(copy, &s.phi_follower, 0, Polarity::Over)?;
        lo = lo.min(j.lo);
        hi = hi.max(j.hi);
        copies.push((copy, j, rho_f));
    }
    let k = ctx.model.add_continuous("k", lo - 1.0, hi + 1.0)?;
    let kx = LinExpr::var(k);
    ctx.model.add_constraint(
        "k_ex",
        kx.clone() - existential.cost.expr.clone(),
        crate::milp::Sense::Ge,
        0.0,
    )?;
    for (i, (copy, j, rho_f)) in copies.into_iter().enumerate() {
        // A follower that surely fails leaves ρ^K = −ρ^F > 0; one that surely
        // succeeds reduces ρ^K ≥ 0 to k ≥ J_S.
        if rho_f.lo > 0.0 {
            ctx.model
                .add_constraint(&format!("k_c{i}"), kx.clone() - j.expr, crate::milp::Sense::Ge, 0.0)?;
        } else if rho_f.hi >= 0.0 {
            let rk = ctx.encode_rho_k(&kx, &j.expr, &rho_f.expr, &format!("c{i}"))?;
            ctx.model
                .add_constraint(&format!("rhoK_nonneg[c{i}]"), LinExpr::var(rk), crate::milp::Sense::Ge, 0.0)?;
        }
        let z_l = ctx.encode_sat(copy, &s.phi_leader, 0, Polarity::Under)?;
        let z_f = ctx.encode_sat(copy, &s.phi_follower, 0, Polarity::Over)?;
        ctx.encode_implication(&z_l, &z_f, &format!("c{i}"))?;
    }
    Ok(k)
}

struct CoopMaster {
    u_leader: Vec<Vec<f64>>,
    witness: Vec<Vec<f64>>,
    k: f64,
}

fn build_cooperative_master<'s>(
    scenario: &'s Scenario,
    config: &SynthConfig,
    candidates: &CandidateSet,
) -> Result<(EncodingContext<'s>, LeaderPart, Existential, VarId), SynthError> {
    let mut ctx = EncodingContext::new(scenario, config.encode_options(scenario))?;
    let leader = leader_part(&mut ctx)?;
    let effort = ctx.encode_effort(&leader.u)?;
    let fv = ctx.follower_inputs("ex")?;
    let existential = add_existential(&mut ctx, &leader, vars(&fv), &effort)?;
    let k = add_cooperative_candidates(&mut ctx, &leader, &existential, &effort, candidates.sequences())?;
    ctx.model.set_objective(ObjSense::Minimize, LinExpr::var(k))?;
    Ok((ctx, leader, existential, k))
}

fn cooperative_master(
    scenario: &Scenario,
    config: &SynthConfig,
    candidates: &CandidateSet,
) -> Result<Option<CoopMaster>, SynthError> {
    let (ctx, leader, existential, k) = build_cooperative_master(scenario, config, candidates)?;
    let r = solve(config, &ctx.model, "cooperative master")?;
    if !r.has_solution() {
        return Ok(None);
    }
    Ok(Some(CoopMaster {
        u_leader: clamp_seq(eval_seq(&leader.u, &r), &scenario.leader_bounds),
        witness: clamp_seq(eval_seq(&existential.u, &r), &scenario.follower_bounds),
        k: r.value(k),
    }))
}

/// Snaps solver values onto their boxes; simplex output can overshoot a
/// bound by the feasibility tolerance, which `simulate` would reject.
pub(crate) fn clamp_seq(seq: Vec<Vec<f64>>, b: &crate::dynamics::BoundsBox) -> Vec<Vec<f64>> {
    seq.into_iter()
        .map(|u| {
            u.into_iter()
                .enumerate()
                .map(|(j, v)| v.clamp(b.lower[j], b.upper[j]))
                .collect()
        })
        .collect()
}

/// Cooperative falsifier: with `u^L` and `k` fixed, minimizes over `u^F`
/// `min[max(k − J_S, −ρ^F), max(−ρ^F, ρ^L)]`. A negative optimum is a
/// successful response that breaks the cost bound or the leader task.
pub(crate) fn cooperative_falsifier(
    scenario: &Scenario,
    config: &SynthConfig,
    u_leader: &[Vec<f64>],
    k: f64,
) -> Result<(f64, Vec<Vec<f64>>), SynthError> {
    let mut ctx = EncodingContext::new(scenario, config.encode_options(scenario))?;
    let ul = constants(u_leader);
    let fv = ctx.follower_inputs("f")?;
    let copy = ctx.add_trajectory("f", &ul, &vars(&fv), None)?;
    let effort = ctx.encode_effort(&ul)?;
    // k − J_S is over-approximated, so J_S is encoded from below
    let j = ctx.encode_cost(copy, &effort, Polarity::Under)?;
    let rho_f = ctx.encode_robustness(copy, &scenario.phi_follower, 0, Polarity::Under)?;
    let rho_l = ctx.encode_robustness(copy, &scenario.phi_leader, 0, Polarity::Over)?;
    let kx = LinExpr::constant(k);
    let rk = if rho_f.lo == rho_f.hi {
        // a constant ρ^F (trivially true or false task) needs no selector
        ctx.encode_max(vec![kx - j.expr, -rho_f.expr.clone()], Polarity::Over, "rhoK")?.expr
    } else {
        LinExpr::var(ctx.encode_rho_k(&kx, &j.expr, &rho_f.expr, "f")?)
    };
    let imp = ctx.encode_max(vec![-rho_f.expr.clone(), rho_l.expr], Polarity::Over, "imp")?;
    let obj = ctx.encode_min(vec![rk, imp.expr], Polarity::Over, "obj")?;
    ctx.model.set_objective(ObjSense::Minimize, obj.expr)?;
    let r = solve(config, &ctx.model, "cooperative falsifier")?;
    if !r.has_solution() {
        return Err(SynthError::Solver {
            what: "cooperative falsifier",
            status: r.status,
        });
    }
    let proven = if r.status == SolveStatus::Optimal { r.objective } else { r.best_bound };
    Ok((proven.min(r.objective), clamp_seq(values(&fv, &r), &scenario.follower_bounds)))
}

/// Antagonistic master: minimize the over-approximated cost under the
/// non-interfering input subject to the leader task there and every
/// candidate failing the follower task.
fn build_antagonistic_master<'s>(
    scenario: &'s Scenario,
    config: &SynthConfig,
    candidates: &CandidateSet,
) -> Result<(EncodingContext<'s>, LeaderPart), SynthError> {
    let mut ctx = EncodingContext::new(scenario, config.encode_options(scenario))?;
    let leader = leader_part(&mut ctx)?;
    ctx.require_sat(leader.nominal, &scenario.phi_leader, 0, true)?;
    let effort = ctx.encode_effort(&leader.u)?;
    let j = ctx.encode_cost(leader.nominal, &effort, Polarity::Over)?;
    add_blocking_candidates(&mut ctx, &leader, candidates.sequences())?;
    ctx.model.set_objective(ObjSense::Minimize, j.expr)?;
    Ok((ctx, leader))
}

fn antagonistic_master(
    scenario: &Scenario,
    config: &SynthConfig,
    candidates: &CandidateSet,
) -> Result<Option<(Vec<Vec<f64>>, f64)>, SynthError> {
    let (ctx, leader) = build_antagonistic_master(scenario, config, candidates)?;
    let r = solve(config, &ctx.model, "antagonistic master")?;
    if !r.has_solution() {
        return Ok(None);
    }
    Ok(Some((clamp_seq(eval_seq(&leader.u, &r), &scenario.leader_bounds), r.objective)))
}

/// The first master problem of `mode`, built over the seeded initial
/// candidates, for export to external solvers.
pub fn initial_master_model(scenario: &Scenario, mode: Mode, config: &SynthConfig) -> Result<MilpModel, SynthError> {
    let s = &config.apply(scenario);
    let candidates = CandidateSet::random(s, config.init_candidates, config.seed);
    Ok(match mode {
        Mode::Cooperative => build_cooperative_master(s, config, &candidates)?.0.model,
        Mode::Antagonistic => build_antagonistic_master(s, config, &candidates)?.0.model,
    })
}

pub(crate) fn add_blocking_candidates<'a>(
    ctx: &mut EncodingContext<'_>,
    leader: &LeaderPart,
    candidates: impl Iterator<Item = &'a Vec<Vec<f64>>>,
) -> Result<(), SynthError> {
    let phi_f = ctx.scenario.phi_follower.clone();
    for (i, c) in candidates.enumerate() {
        let copy = ctx.add_trajectory(&format!("c{i}"), &leader.u, &constants(c), Some(leader.nominal))?;
        ctx.require_sat(copy, &phi_f, 0, false)?;
    }
    Ok(())
}

/// `max_{u^F} ρ^F` with `u^L` fixed, and a maximizer.
pub fn max_follower_robustness(
    scenario: &Scenario,
    u_leader: &[Vec<f64>],
    config: &SynthConfig,
) -> Result<(f64, Vec<Vec<f64>>), SynthError> {
    let scenario = &config.apply(scenario);
    let mut ctx = EncodingContext::new(scenario, config.encode_options(scenario))?;
    let fv = ctx.follower_inputs("f")?;
    let copy = ctx.add_trajectory("f", &constants(u_leader), &vars(&fv), None)?;
    let rho = ctx.encode_robustness(copy, &scenario.phi_follower, 0, Polarity::Under)?;
    ctx.model.set_objective(ObjSense::Maximize, rho.expr)?;
    let r = solve(config, &ctx.model, "antagonistic falsifier")?;
    if !r.has_solution() {
        return Err(SynthError::Solver {
            what: "antagonistic falsifier",
            status: r.status,
        });
    }
    let proven = if r.status == SolveStatus::Optimal { r.objective } else { r.best_bound };
    Ok((proven.max(r.objective), clamp_seq(values(&fv, &r), &scenario.follower_bounds)))
}

/// A follower sequence satisfying φ^F with margin `ε` under `u^L`, if the
/// feasibility MILP finds one. Responses whose robustness lies in `(0, ε)`
/// are not seen.
pub fn sr_nonempty(
    scenario: &Scenario,
    u_leader: &[Vec<f64>],
    config: &SynthConfig,
) -> Result<Option<Vec<Vec<f64>>>, SynthError> {
    let scenario = &config.apply(scenario);
    let mut ctx = EncodingContext::new(scenario, config.encode_options(scenario))?;
    let fv = ctx.follower_inputs("f")?;
    let copy = ctx.add_trajectory("f", &constants(u_leader), &vars(&fv), None)?;
    ctx.require_sat(copy, &scenario.phi_follower, 0, true)?;
    ctx.model.set_objective(ObjSense::Minimize, LinExpr::default())?;
    let r = solve(config, &ctx.model, "response feasibility")?;
    Ok(r.has_solution()
        .then(|| clamp_seq(values(&fv, &r), &scenario.follower_bounds)))
}

/// Verifies the current outcome. Returns whether the loop should stop: on
/// success, or when a failed certificate offers no new candidate.
fn certify(
    s: &Scenario,
    out: &mut SynthesisOutcome,
    config: &SynthConfig,
    candidates: &mut CandidateSet,
    iteration: usize,
) -> Result<bool, SynthError> {
    let t = Instant::now();
    let cert = verify_outcome(s, out, config)?;
    out.timing.verify += t.elapsed();
    let passed = cert.passed;
    let witness = cert.witness.clone();
    out.certificate = Some(cert);
    if passed {
        out.status = Status::Success;
        return Ok(true);
    }
    if witness.is_some_and(|w| candidates.push(w, Provenance::Counterexample)) {
        out.notes
            .push(format!("iteration {iteration}: verification witness added as a candidate"));
        return Ok(false);
    }
    out.notes
        .push(format!("iteration {iteration}: verification failed without a new witness"));
    Ok(true)
}

/// Cooperative counterexample-guided synthesis.
pub fn cooperative_synthesize(scenario: &Scenario, config: &SynthConfig) -> Result<SynthesisOutcome, SynthError> {
    let start = Instant::now();
    let s = &config.apply(scenario);
    let mut out = SynthesisOutcome::empty(Mode::Cooperative, Status::IterationLimit, config, config.seed);
    let mut candidates = CandidateSet::random(s, config.init_candidates, config.seed);
    for iteration in 0..config.max_iters {
        let t = Instant::now();
        let master = cooperative_master(s, config, &candidates)?;
        out.timing.master += t.elapsed();
        let mut record = IterationRecord {
            iteration,
            candidates: candidates.len(),
            master_objective: master.as_ref().map(|m| m.k),
            counterexample: false,
            falsifier_objective: None,
        };
        let Some(m) = master else {
            out.iterations.push(record);
            out.status = Status::Infeasible;
            out.notes.push("cooperative master infeasible".into());
            break;
        };
        let t = Instant::now();
        let (value, cex) = cooperative_falsifier(s, config, &m.u_leader, m.k)?;
        out.timing.falsifier += t.elapsed();
        log::debug!(
            "cooperative iteration {iteration}: {} candidates, k = {}, falsifier {value}, u^L {:?}, u^F {:?}",
            candidates.len(),
            m.k,
            m.u_leader,
            cex
        );
        record.falsifier_objective = Some(value);
        out.u_leader = m.u_leader;
        out.k = Some(m.k);
        out.witness_follower = Some(m.witness);
        if value < -config.cegis_tol {
            record.counterexample = true;
            out.iterations.push(record);
            if !candidates.push(cex, Provenance::Counterexample) {
                out.notes.push(format!(
                    "stalled at iteration {iteration}: counterexample repeats a candidate"
                ));
                break;
            }
            continue;
        }
        out.iterations.push(record);
        let traj = simulate(s, &out.u_leader, out.witness_follower.as_deref().unwrap_or(&[]))?;
        out.exact_cost = Some(eval_cost(s, &traj)?);
        if certify(s, &mut out, config, &mut candidates, iteration)? {
            break;
        }
    }
    if out.status != Status::Success && out.status != Status::Infeasible {
        out.status = Status::IterationLimit;
    }
    out.timing.total = start.elapsed();
    Ok(out)
}

/// Antagonistic counterexample-guided synthesis.
pub fn antagonistic_synthesize(scenario: &Scenario, config: &SynthConfig) -> Result<SynthesisOutcome, SynthError> {
    let start = Instant::now();
    let s = &config.apply(scenario);
    let eps = config.encode_options(s).epsilon;
    let mut out = SynthesisOutcome::empty(Mode::Antagonistic, Status::IterationLimit, config, config.seed);
    let mut candidates = CandidateSet::random(s, config.init_candidates, config.seed);
    for iteration in 0..config.max_iters {
        let t = Instant::now();
        let master = antagonistic_master(s, config, &candidates)?;
        out.timing.master += t.elapsed();
        let mut record = IterationRecord {
            iteration,
            candidates: candidates.len(),
            master_objective: master.as_ref().map(|m| m.1),
            counterexample: false,
            falsifier_objective: None,
        };
        let Some((u_leader, cost)) = master else {
            out.iterations.push(record);
            out.status = Status::Infeasible;
            out.notes.push("antagonistic master infeasible".into());
            break;
        };
        let t = Instant::now();
        let (value, cex) = max_follower_robustness(s, &u_leader, config)?;
        out.timing.falsifier += t.elapsed();
        log::debug!(
            "antagonistic iteration {iteration}: {} candidates, cost {cost}, max follower robustness {value}",
            candidates.len()
        );
        record.falsifier_objective = Some(value);
        out.u_leader = u_leader;
        out.k = Some(cost);
        if value > -eps + BLOCK_TOL {
            record.counterexample = true;
            out.iterations.push(record);
            if !candidates.push(cex, Provenance::Counterexample) {
                out.notes.push(format!(
                    "stalled at iteration {iteration}: counterexample repeats a candidate"
                ));
                break;
            }
            continue;
        }
        out.iterations.push(record);
        let traj = simulate(s, &out.u_leader, &s.noninterfering())?;
        out.exact_cost = Some(eval_cost(s, &traj)?);
        if certify(s, &mut out, config, &mut candidates, iteration)? {
            break;
        }
    }
    if out.status != Status::Success && out.status != Status::Infeasible {
        out.status = Status::IterationLimit;
    }
    out.timing.total = start.elapsed();
    Ok(out)
}
