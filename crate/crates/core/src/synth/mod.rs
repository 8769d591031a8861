//! Stackelberg synthesis: the cooperative and antagonistic counterexample-guided
//! loops, response-set queries, independent verification and a brute-force
//! grid oracle.
//!
//! A cooperative plan lets the follower succeed and guarantees the leader task
//! and the cost bound `k` under every successful response. An antagonistic plan
//! makes every follower response fail, so the follower falls back to its
//! non-interfering input.

mod brute;
mod cegis;
mod report;
mod verify;

use std::sync::Arc;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{simulate, DynamicsError, Scenario};
use crate::encode::{EncodeError, EncodeOptions, SatEncoding, StateEncoding};
use crate::milp::{BackendRegistry, MilpError, SolveStatus, SolverBackend, SolverLimits};
use crate::stl::{eval_bool, StlError};

pub use brute::{
    brute_force_antagonistic, brute_force_ssp, grid_levels, grid_master, BruteResult, BRUTE_FORCE_LIMIT,
};
pub use cegis::{
    antagonistic_synthesize, cooperative_synthesize, initial_master_model, max_follower_robustness, sr_nonempty,
};
pub use report::{write_outcome_artifacts, OutcomeArtifacts};
pub use verify::verify_outcome;

/// Candidate sequences closer than this in the max norm count as duplicates.
pub const DEDUP_TOL: f64 = 1e-9;

/// Slack on the antagonistic blocking test `max ρ^F ≤ −ε` for LP noise.
pub const BLOCK_TOL: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error(transparent)]
    Stl(#[from] StlError),
    #[error("{what} solve ended with status {status:?}")]
    Solver { what: &'static str, status: SolveStatus },
    #[error("enumeration of {count} grid points exceeds the limit of {limit}")]
    TooLarge { count: f64, limit: usize },
    #[error("outcome does not fit the scenario: {0}")]
    Mismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Cooperative,
    Antagonistic,
}

/// Which modes a driver run tries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModeChoice {
    Cooperative,
    Antagonistic,
    #[default]
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Success,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Provenance {
    RandomInit,
    Counterexample,
}

/// Follower sequences the master must respect, without duplicates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CandidateSet {
    items: Vec<(Vec<Vec<f64>>, Provenance)>,
}

impl CandidateSet {
    /// `count` sequences drawn uniformly from the follower box.
    pub fn random(scenario: &Scenario, count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut set = CandidateSet::default();
        for _ in 0..count {
            let seq = random_follower(scenario, &mut rng);
            set.push(seq, Provenance::RandomInit);
        }
        set
    }

    /// Adds `seq` unless a sequence within [`DEDUP_TOL`] is already present.
    pub fn push(&mut self, seq: Vec<Vec<f64>>, provenance: Provenance) -> bool {
        if self.contains_near(&seq) {
            return false;
        }
        self.items.push((seq, provenance));
        true
    }

    pub fn contains_near(&self, seq: &[Vec<f64>]) -> bool {
        self.items.iter().any(|(s, _)| max_distance(s, seq) <= DEDUP_TOL)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn sequences(&self) -> impl Iterator<Item = &Vec<Vec<f64>>> {
        self.items.iter().map(|(s, _)| s)
    }

    pub fn provenance(&self, i: usize) -> Provenance {
        self.items[i].1
    }
}

pub(crate) fn random_follower(scenario: &Scenario, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let b = &scenario.follower_bounds;
    (0..scenario.horizon)
        .map(|_| {
            b.lower
                .iter()
                .zip(&b.upper)
                .map(|(l, u)| if l < u { rng.gen_range(*l..=*u) } else { *l })
                .collect()
        })
        .collect()
}

pub(crate) fn max_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Knobs of one synthesis session. Serialized into the outcome report, so
/// it holds no wall-clock data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub mode: ModeChoice,
    pub seed: u64,
    pub init_candidates: usize,
    pub max_iters: usize,
    /// Extra runs with seeds `seed + 1, seed + 2, …`; the best verified cost wins.
    pub restarts: usize,
    pub limits: SolverLimits,
    pub backend: String,
    /// Falsifier acceptance threshold: the cooperative loop exits when the
    /// falsifier optimum is at least `−cegis_tol`.
    pub cegis_tol: f64,
    /// Random follower sequences tried by the verification sampler.
    pub verify_samples: usize,
    /// Overrides of the scenario's big-M and margin.
    pub big_m: Option<f64>,
    pub epsilon: Option<f64>,
    pub states: StateEncoding,
    pub sat: SatEncoding,
    pub tight_m: bool,
    pub prune: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            mode: ModeChoice::Auto,
            seed: 0,
            init_candidates: 5,
            max_iters: 50,
            restarts: 0,
            limits: SolverLimits::default(),
            backend: "embedded".into(),
            cegis_tol: 1e-6,
            verify_samples: 10_000,
            big_m: None,
            epsilon: None,
            states: StateEncoding::Condensed,
            sat: SatEncoding::RobustnessSign,
            tight_m: true,
            prune: true,
        }
    }
}

impl SynthConfig {
    /// The scenario with this config's big-M and margin overrides applied.
    pub fn apply(&self, scenario: &Scenario) -> Scenario {
        let mut s = scenario.clone();
        if let Some(m) = self.big_m {
            s.big_m = m;
        }
        if let Some(e) = self.epsilon {
            s.epsilon = e;
        }
        s
    }

    pub fn encode_options(&self, scenario: &Scenario) -> EncodeOptions {
        EncodeOptions {
            big_m: self.big_m.unwrap_or(scenario.big_m),
            epsilon: self.epsilon.unwrap_or(scenario.epsilon),
            tight_m: self.tight_m,
            prune: self.prune,
            states: self.states,
            sat: self.sat,
        }
    }

    pub(crate) fn solver(&self) -> Result<Arc<dyn SolverBackend>, SynthError> {
        Ok(BackendRegistry::default().get(&self.backend)?)
    }
}

/// One pass of the loop: master solve, then falsifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub candidates: usize,
    pub master_objective: Option<f64>,
    pub counterexample: bool,
    pub falsifier_objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Verdict of [`verify_outcome`]; `witness` is a violating follower sequence
/// when one was found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub passed: bool,
    pub checks: Vec<Check>,
    pub witness: Option<Vec<Vec<f64>>>,
}

/// Wall-clock split of a run, kept out of the serialized outcome.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total: Duration,
    pub master: Duration,
    pub falsifier: Duration,
    pub verify: Duration,
}

impl Timing {
    fn absorb(&mut self, other: &Timing) {
        self.total += other.total;
        self.master += other.master;
        self.falsifier += other.falsifier;
        self.verify += other.verify;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisOutcome {
    pub mode: Mode,
    pub status: Status,
    /// Empty unless a master solution exists.
    pub u_leader: Vec<Vec<f64>>,
    /// Worst-case cost bound (cooperative) or master cost (antagonistic).
    pub k: Option<f64>,
    /// Exact cost of the leader plan: against the witness response in
    /// cooperative mode, against the non-interfering input otherwise.
    pub exact_cost: Option<f64>,
    /// Successful response found by the master (cooperative only).
    pub witness_follower: Option<Vec<Vec<f64>>>,
    pub iterations: Vec<IterationRecord>,
    pub certificate: Option<Certificate>,
    pub seed: u64,
    pub config: SynthConfig,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub timing: Timing,
}

impl SynthesisOutcome {
    pub(crate) fn empty(mode: Mode, status: Status, config: &SynthConfig, seed: u64) -> Self {
        SynthesisOutcome {
            mode,
            status,
            u_leader: Vec::new(),
            k: None,
            exact_cost: None,
            witness_follower: None,
            iterations: Vec::new(),
            certificate: None,
            seed,
            config: config.clone(),
            notes: Vec::new(),
            timing: Timing::default(),
        }
    }

    pub fn is_success(&self) -> bool {
        self.status == Status::Success
    }

    /// Pretty JSON with a trailing newline; deterministic for a given run.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("outcome serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// The follower input the leader plans against: the witness in
    /// cooperative mode, the non-interfering input otherwise.
    pub fn planned_follower(&self, scenario: &Scenario) -> Vec<Vec<f64>> {
        match (self.mode, &self.witness_follower) {
            (Mode::Cooperative, Some(w)) => w.clone(),
            _ => scenario.noninterfering(),
        }
    }
}

/// Membership of one follower sequence in the response sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResponseQuery {
    pub successful: bool,
    pub in_best_response: bool,
    pub sr_nonempty: bool,
}

/// `u^F` makes the joint trajectory satisfy the follower task.
pub fn is_successful_response(
    scenario: &Scenario,
    u_leader: &[Vec<f64>],
    u_follower: &[Vec<f64>],
) -> Result<bool, SynthError> {
    let traj = simulate(scenario, u_leader, u_follower)?;
    Ok(eval_bool(&scenario.phi_follower, &traj.states, 0)?)
}

/// Classifies `u^F` against the successful and best response sets. A
/// successful `u^F` is its own witness of nonemptiness; otherwise the MILP
/// decides, and with no successful response only the non-interfering input
/// is a best response.
pub fn classify_response(
    scenario: &Scenario,
    u_leader: &[Vec<f64>],
    u_follower: &[Vec<f64>],
    config: &SynthConfig,
) -> Result<ResponseQuery, SynthError> {
    let successful = is_successful_response(scenario, u_leader, u_follower)?;
    let nonempty = successful || sr_nonempty(scenario, u_leader, config)?.is_some();
    let in_best_response = if nonempty {
        successful
    } else {
        max_distance(u_follower, &scenario.noninterfering()) == 0.0
    };
    Ok(ResponseQuery {
        successful,
        in_best_response,
        sr_nonempty: nonempty,
    })
}

/// Runs the requested mode(s) with restarts and returns the outcome with the
/// lowest verified exact cost; ties favour the cooperative outcome. When no
/// run succeeds, an iteration-limit outcome is preferred over an infeasible
/// one, since it leaves the question open.
pub fn solve_ssp(scenario: &Scenario, config: &SynthConfig) -> Result<SynthesisOutcome, SynthError> {
    let modes: &[Mode] = match config.mode {
        ModeChoice::Cooperative => &[Mode::Cooperative],
        ModeChoice::Antagonistic => &[Mode::Antagonistic],
        ModeChoice::Auto => &[Mode::Cooperative, Mode::Antagonistic],
    };
    let mut results = Vec::new();
    for &mode in modes {
        results.push(synthesize_with_restarts(scenario, mode, config)?);
    }
    let mut total = Timing::default();
    results.iter().for_each(|o| total.absorb(&o.timing));
    let mut best = pick_best(results);
    best.timing = total;
    Ok(best)
}

/// One mode with `config.restarts` extra seeds.
pub fn synthesize_with_restarts(
    scenario: &Scenario,
    mode: Mode,
    config: &SynthConfig,
) -> Result<SynthesisOutcome, SynthError> {
    let mut runs = Vec::new();
    for r in 0..=config.restarts {
        let mut c = config.clone();
        c.seed = config.seed.wrapping_add(r as u64);
        let mut o = match mode {
            Mode::Cooperative => cooperative_synthesize(scenario, &c)?,
            Mode::Antagonistic => antagonistic_synthesize(scenario, &c)?,
        };
        o.config = config.clone();
        runs.push(o);
    }
    let mut total = Timing::default();
    runs.iter().for_each(|o| total.absorb(&o.timing));
    let mut best = pick_best(runs);
    best.timing = total;
    Ok(best)
}

/// Earliest successful outcome of least exact cost, else the first
/// iteration-limit outcome, else the first outcome.
fn pick_best(outcomes: Vec<SynthesisOutcome>) -> SynthesisOutcome {
    let mut best: Option<usize> = None;
    for (i, o) in outcomes.iter().enumerate() {
        if !o.is_success() {
            continue;
        }
        let cost = o.exact_cost.unwrap_or(f64::INFINITY);
        match best {
            Some(b) if outcomes[b].exact_cost.unwrap_or(f64::INFINITY) <= cost => {}
            _ => best = Some(i),
        }
    }
    let idx = best
        .or_else(|| outcomes.iter().position(|o| o.status == Status::IterationLimit))
        .unwrap_or(0);
    outcomes.into_iter().nth(idx).expect("at least one run")
}
