//! MILP encodings of trajectories, STL satisfaction and robustness, the
//! leader cost, and the Stackelberg gadgets.
//!
//! Every encoding takes a [`Polarity`]. `Exact` pins the encoded value to the
//! true one. `Under` only guarantees `encoded ≤ true`, `Over` only
//! `encoded ≥ true`; a one-sided encoding drops the selector binaries on the
//! side it does not need. Callers pick the side that keeps their constraint
//! sound (a requirement `ρ ≥ 0` needs `Under`).

mod gadgets;
mod terms;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::Scenario;
use crate::milp::{LinExpr, MilpError, MilpModel, Sense, VarId};
use crate::stl::{Formula, Predicate, Trace};

pub use terms::{TermArena, TermId, TermNode};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EncodeError {
    #[error("big-M {configured} is smaller than the {needed} required by {what}")]
    BigMTooSmall { what: String, needed: f64, configured: f64 },
    #[error("formula with horizon {horizon} at t={t} does not fit the horizon N={n}")]
    Horizon { t: usize, horizon: usize, n: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Milp(#[from] MilpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Exact,
    /// Encoded value never exceeds the true value.
    Under,
    /// Encoded value is never below the true value.
    Over,
}

impl Polarity {
    pub fn flip(self) -> Polarity {
        match self {
            Polarity::Exact => Polarity::Exact,
            Polarity::Under => Polarity::Over,
            Polarity::Over => Polarity::Under,
        }
    }

    fn suffix(self) -> &'static str {
        match self {
            Polarity::Exact => "",
            Polarity::Under => "_u",
            Polarity::Over => "_o",
        }
    }

    fn upper_side(self) -> bool {
        self != Polarity::Over
    }

    fn lower_side(self) -> bool {
        self != Polarity::Under
    }
}

/// How states enter the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateEncoding {
    /// One variable per state component and an equality row per step.
    Explicit,
    /// States are affine expressions of the inputs; no state variables.
    Condensed,
}

/// How a satisfaction bit `z` for a whole formula is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SatEncoding {
    /// Binary per predicate and time, combined by the and/or rules.
    Boolean,
    /// One binary on the sign of the robustness encoding.
    RobustnessSign,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodeOptions {
    pub big_m: f64,
    pub epsilon: f64,
    /// Use the smallest valid big-M per constraint (never above `big_m`).
    pub tight_m: bool,
    /// Replace subterms whose value is decided by interval bounds with constants.
    pub prune: bool,
    pub states: StateEncoding,
    pub sat: SatEncoding,
}

impl EncodeOptions {
    pub fn for_scenario(s: &Scenario) -> Self {
        EncodeOptions {
            big_m: s.big_m,
            epsilon: s.epsilon,
            tight_m: true,
            prune: true,
            states: StateEncoding::Condensed,
            sat: SatEncoding::RobustnessSign,
        }
    }

    /// No pruning, no tightening, explicit states, Boolean satisfaction.
    pub fn plain(s: &Scenario) -> Self {
        EncodeOptions {
            big_m: s.big_m,
            epsilon: s.epsilon,
            tight_m: false,
            prune: false,
            states: StateEncoding::Explicit,
            sat: SatEncoding::Boolean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CopyId(pub usize);

#[derive(Debug, Clone)]
struct TrajCopy {
    tag: String,
    /// Model-facing state at each time.
    states: Vec<Vec<LinExpr>>,
    /// State as an affine function of inputs, used for ranges.
    condensed: Vec<Vec<LinExpr>>,
    /// Valid interval per state component.
    ranges: Vec<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Kind {
    Sat,
    Rob,
}

/// An encoded value with its interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    pub expr: LinExpr,
    pub lo: f64,
    pub hi: f64,
}

impl Encoded {
    fn constant(v: f64) -> Self {
        Encoded {
            expr: LinExpr::constant(v),
            lo: v,
            hi: v,
        }
    }

    fn is_constant(&self) -> bool {
        self.lo == self.hi || self.expr.is_constant()
    }
}

/// A MILP under construction together with the trajectory copies encoded in it.
pub struct EncodingContext<'s> {
    pub model: MilpModel,
    pub scenario: &'s Scenario,
    pub options: EncodeOptions,
    pub arena: TermArena,
    copies: Vec<TrajCopy>,
    cache: HashMap<(CopyId, TermId, Kind, Polarity), Encoded>,
    pred_cache: HashMap<(CopyId, usize, usize, Polarity), Encoded>,
    pub(crate) cache_hits: usize,
    serial: usize,
}

impl<'s> EncodingContext<'s> {
    /// Starts an empty model. Fails when the configured big-M cannot cover the
    /// predicates of either task over the state bounds.
    pub fn new(scenario: &'s Scenario, options: EncodeOptions) -> Result<Self, EncodeError> {
        let ctx = EncodingContext {
            model: MilpModel::new(),
            scenario,
            options,
            arena: TermArena::default(),
            copies: Vec::new(),
            cache: HashMap::new(),
            pred_cache: HashMap::new(),
            cache_hits: 0,
            serial: 0,
        };
        let boxes: Vec<(f64, f64)> = scenario
            .state_bounds
            .lower
            .iter()
            .zip(&scenario.state_bounds.upper)
            .map(|(l, u)| (*l, *u))
            .collect();
        for (which, phi) in [("phi_L", &scenario.phi_leader), ("phi_F", &scenario.phi_follower)] {
            for p in phi.predicates() {
                let (lo, hi) = pred_range(p, &boxes);
                let needed = lo.abs().max(hi.abs()) + options.epsilon;
                if needed > options.big_m {
                    return Err(EncodeError::BigMTooSmall {
                        what: format!("a predicate of {which} over the state bounds"),
                        needed,
                        configured: options.big_m,
                    });
                }
            }
        }
        Ok(ctx)
    }

    pub(crate) fn fresh(&mut self, stem: &str) -> String {
        self.serial += 1;
        format!("{stem}#{}", self.serial)
    }

    /// Big-M for a constraint that needs at least `needed`.
    pub(crate) fn big_m(&self, needed: f64, what: &str) -> Result<f64, EncodeError> {
        if !needed.is_finite() {
            return Ok(self.options.big_m);
        }
        if needed > self.options.big_m {
            return Err(EncodeError::BigMTooSmall {
                what: what.to_string(),
                needed,
                configured: self.options.big_m,
            });
        }
        Ok(if self.options.tight_m {
            needed.max(0.0)
        } else {
            self.options.big_m
        })
    }

    /// Leader input variables `uL[prefix][t][j]` within the leader bounds.
    pub fn leader_inputs(&mut self, prefix: &str) -> Result<Vec<Vec<VarId>>, EncodeError> {
        let b = &self.scenario.leader_bounds;
        self.input_vars(&format!("uL[{prefix}]"), b.lower.clone(), b.upper.clone())
    }

    /// Follower input variables `uF[prefix][t][j]` within the follower bounds.
    pub fn follower_inputs(&mut self, prefix: &str) -> Result<Vec<Vec<VarId>>, EncodeError> {
        let b = &self.scenario.follower_bounds;
        self.input_vars(&format!("uF[{prefix}]"), b.lower.clone(), b.upper.clone())
    }

    fn input_vars(&mut self, stem: &str, lower: Vec<f64>, upper: Vec<f64>) -> Result<Vec<Vec<VarId>>, EncodeError> {
        (0..self.scenario.horizon)
            .map(|t| {
                (0..lower.len())
                    .map(|j| Ok(self.model.add_continuous(&format!("{stem}[{t}][{j}]"), lower[j], upper[j])?))
                    .collect()
            })
            .collect()
    }

    /// Adds a trajectory driven by the given inputs. When `base` is given,
    /// ranges are derived from the base copy's ranges plus the range of the
    /// difference, so state bounds imposed on the base carry over.
    pub fn add_trajectory(
        &mut self,
        tag: &str,
        u_leader: &[Vec<LinExpr>],
        u_follower: &[Vec<LinExpr>],
        base: Option<CopyId>,
    ) -> Result<CopyId, EncodeError> {
        let s = self.scenario;
        let (n, horizon) = (s.state_dim(), s.horizon);
        if u_leader.len() != horizon || u_follower.len() != horizon {
            return Err(EncodeError::Dimension(format!(
                "input sequences must have length {horizon}"
            )));
        }
        if u_leader.iter().any(|u| u.len() != s.leader_dim()) || u_follower.iter().any(|u| u.len() != s.follower_dim())
        {
            return Err(EncodeError::Dimension("input width".into()));
        }
        let sys = &s.system;
        let mut condensed = vec![s.x0.iter().map(|v| LinExpr::constant(*v)).collect::<Vec<_>>()];
        for t in 0..horizon {
            let prev = &condensed[t];
            let next: Vec<LinExpr> = (0..n)
                .map(|i| {
                    let mut e = LinExpr::constant(sys.drift[i]);
                    for (k, x) in prev.iter().enumerate() {
                        e.add_scaled(x, sys.a[i][k]);
                    }
                    for (j, u) in u_leader[t].iter().enumerate() {
                        e.add_scaled(u, sys.b_leader[i][j]);
                    }
                    for (j, u) in u_follower[t].iter().enumerate() {
                        e.add_scaled(u, sys.b_follower[i][j]);
                    }
                    e.normalized()
                })
                .collect();
            condensed.push(next);
        }
        let ranges: Vec<Vec<(f64, f64)>> = (0..=horizon)
            .map(|t| {
                (0..n)
                    .map(|i| {
                        let own = condensed[t][i].bounds(&self.model);
                        match base {
                            Some(b) => {
                                let bc = &self.copies[b.0];
                                let diff = (condensed[t][i].clone() - bc.condensed[t][i].clone()).normalized();
                                let (dl, dh) = diff.bounds(&self.model);
                                let (bl, bh) = bc.ranges[t][i];
                                (own.0.max(bl + dl), own.1.min(bh + dh))
                            }
                            None => own,
                        }
                    })
                    .collect()
            })
            .collect();
        let states = match self.options.states {
            StateEncoding::Condensed => condensed.clone(),
            StateEncoding::Explicit => self.explicit_states(tag, u_leader, u_follower, &ranges)?,
        };
        self.copies.push(TrajCopy {
            tag: tag.to_string(),
            states,
            condensed,
            ranges,
        });
        Ok(CopyId(self.copies.len() - 1))
    }

    fn explicit_states(
        &mut self,
        tag: &str,
        u_leader: &[Vec<LinExpr>],
        u_follower: &[Vec<LinExpr>],
        ranges: &[Vec<(f64, f64)>],
    ) -> Result<Vec<Vec<LinExpr>>, EncodeError> {
        let s = self.scenario;
        let sys = &s.system;
        let mut states = vec![s.x0.iter().map(|v| LinExpr::constant(*v)).collect::<Vec<_>>()];
        for t in 0..s.horizon {
            let mut next = Vec::with_capacity(s.state_dim());
            for i in 0..s.state_dim() {
                let (lo, hi) = ranges[t + 1][i];
                let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, hi) };
                let x = self.model.add_continuous(&format!("x[{tag}][{}][{i}]", t + 1), lo, hi)?;
                // x_{t+1} − A x_t − B_L u^L_t − B_F u^F_t = c
                let mut row = LinExpr::var(x);
                for (k, xp) in states[t].iter().enumerate() {
                    row.add_scaled(xp, -sys.a[i][k]);
                }
                for (j, u) in u_leader[t].iter().enumerate() {
                    row.add_scaled(u, -sys.b_leader[i][j]);
                }
                for (j, u) in u_follower[t].iter().enumerate() {
                    row.add_scaled(u, -sys.b_follower[i][j]);
                }
                self.model
                    .add_constraint(&format!("dyn[{tag}][{t}][{i}]"), row, Sense::Eq, sys.drift[i])?;
                next.push(LinExpr::var(x));
            }
            states.push(next);
        }
        Ok(states)
    }

    /// A copy whose states are fixed to `trace`. With `as_variables` the
    /// states are variables pinned by their bounds, otherwise constants.
    pub fn add_fixed_trace(&mut self, tag: &str, trace: &Trace, as_variables: bool) -> Result<CopyId, EncodeError> {
        let mut states = Vec::with_capacity(trace.len());
        let mut ranges = Vec::with_capacity(trace.len());
        for (t, x) in trace.states().iter().enumerate() {
            let mut row = Vec::with_capacity(x.len());
            for (i, v) in x.iter().enumerate() {
                row.push(if as_variables {
                    LinExpr::var(self.model.add_continuous(&format!("x[{tag}][{t}][{i}]"), *v, *v)?)
                } else {
                    LinExpr::constant(*v)
                });
            }
            states.push(row);
            ranges.push(x.iter().map(|v| (*v, *v)).collect());
        }
        self.copies.push(TrajCopy {
            tag: tag.to_string(),
            condensed: states.clone(),
            states,
            ranges,
        });
        Ok(CopyId(self.copies.len() - 1))
    }

    pub fn state(&self, copy: CopyId, t: usize) -> &[LinExpr] {
        &self.copies[copy.0].states[t]
    }

    pub fn copy_len(&self, copy: CopyId) -> usize {
        self.copies[copy.0].states.len()
    }

    pub fn state_range(&self, copy: CopyId, t: usize) -> &[(f64, f64)] {
        &self.copies[copy.0].ranges[t]
    }

    /// Constrains the copy's states to the scenario's state bounds for
    /// `t = 1..=N` and narrows its ranges accordingly. Rows implied by the
    /// ranges are skipped when pruning.
    pub fn impose_state_bounds(&mut self, copy: CopyId) -> Result<(), EncodeError> {
        let bounds = self.scenario.state_bounds.clone();
        let len = self.copies[copy.0].states.len();
        for t in 1..len {
            for i in 0..bounds.dim() {
                let (lo, hi) = self.copies[copy.0].ranges[t][i];
                let expr = self.copies[copy.0].states[t][i].clone();
                let tag = self.copies[copy.0].tag.clone();
                if !self.options.prune || lo < bounds.lower[i] {
                    self.model
                        .add_constraint(&format!("X_lo[{tag}][{t}][{i}]"), expr.clone(), Sense::Ge, bounds.lower[i])?;
                }
                if !self.options.prune || hi > bounds.upper[i] {
                    self.model
                        .add_constraint(&format!("X_hi[{tag}][{t}][{i}]"), expr, Sense::Le, bounds.upper[i])?;
                }
                self.copies[copy.0].ranges[t][i] = (lo.max(bounds.lower[i]), hi.min(bounds.upper[i]));
            }
        }
        Ok(())
    }

    fn check_horizon(&self, copy: CopyId, phi: &Formula, t: usize) -> Result<(), EncodeError> {
        let n = self.copy_len(copy) - 1;
        if t + phi.horizon() > n {
            return Err(EncodeError::Horizon {
                t,
                horizon: phi.horizon(),
                n,
            });
        }
        Ok(())
    }

    /// `μ(x_t)` as an expression, with its range.
    fn predicate_value(&self, copy: CopyId, pred: usize, t: usize) -> Encoded {
        let c = &self.copies[copy.0];
        let p = self.arena.predicate(pred);
        let mut expr = LinExpr::constant(p.offset);
        let mut cond = LinExpr::constant(p.offset);
        for (i, a) in p.coeffs.iter().enumerate() {
            expr.add_scaled(&c.states[t][i], *a);
            cond.add_scaled(&c.condensed[t][i], *a);
        }
        let (rl, rh) = pred_range(p, &c.ranges[t]);
        let (cl, ch) = cond.normalized().bounds(&self.model);
        Encoded {
            expr: expr.normalized(),
            lo: rl.max(cl),
            hi: rh.min(ch),
        }
    }

    /// Binary `z` with `z = 1 ⇒ μ(x_t) ≥ ε` and `z = 0 ⇒ μ(x_t) ≤ −ε`
    /// (both constraints of the standard predicate encoding).
    pub fn encode_predicate(&mut self, copy: CopyId, mu: &Predicate, t: usize) -> Result<LinExpr, EncodeError> {
        if t >= self.copy_len(copy) {
            return Err(EncodeError::Horizon {
                t,
                horizon: 0,
                n: self.copy_len(copy) - 1,
            });
        }
        let id = self.arena.unroll(&Formula::Pred(mu.clone()), t, false);
        let TermNode::Lit { pred, .. } = *self.arena.node(id) else {
            unreachable!("a predicate unrolls to a literal")
        };
        Ok(self.pred_sat(copy, pred, t, Polarity::Exact)?.expr)
    }

    pub(crate) fn pred_sat(&mut self, copy: CopyId, pred: usize, t: usize, pol: Polarity) -> Result<Encoded, EncodeError> {
        for key in [(copy, pred, t, Polarity::Exact), (copy, pred, t, pol)] {
            if let Some(e) = self.pred_cache.get(&key) {
                self.cache_hits += 1;
                return Ok(e.clone());
            }
        }
        let mu = self.predicate_value(copy, pred, t);
        let name = format!("z{}[{}][p{pred}][{t}]", pol.suffix(), self.copies[copy.0].tag);
        let z = self.sign_binary(&mu, pol, &name)?;
        self.pred_cache.insert((copy, pred, t, pol), z.clone());
        Ok(z)
    }

    /// Satisfaction of `phi` at `t` via the and/or encoding over predicate binaries.
    pub fn encode_bool(&mut self, copy: CopyId, phi: &Formula, t: usize, pol: Polarity) -> Result<LinExpr, EncodeError> {
        self.check_horizon(copy, phi, t)?;
        let id = self.arena.unroll(phi, t, false);
        Ok(self.sat_term(copy, id, pol)?.expr)
    }

    /// Robustness of `phi` at `t` via min/max selector gadgets.
    pub fn encode_robustness(&mut self, copy: CopyId, phi: &Formula, t: usize, pol: Polarity) -> Result<Encoded, EncodeError> {
        self.check_horizon(copy, phi, t)?;
        let id = self.arena.unroll(phi, t, false);
        self.rob_term(copy, id, pol)
    }

    /// Satisfaction bit for `phi` at `t` using the configured [`SatEncoding`].
    pub fn encode_sat(&mut self, copy: CopyId, phi: &Formula, t: usize, pol: Polarity) -> Result<LinExpr, EncodeError> {
        match self.options.sat {
            SatEncoding::Boolean => self.encode_bool(copy, phi, t, pol),
            SatEncoding::RobustnessSign => {
                let rho = self.encode_robustness(copy, phi, t, pol)?;
                let name = format!("zrho[{}]", self.copies[copy.0].tag);
                let name = self.fresh(&name);
                Ok(self.sign_binary(&rho, pol, &name)?.expr)
            }
        }
    }

    /// Requires `phi` to hold (`value`) or fail at `t`, soundly: a true
    /// requirement uses the under-approximation, a false one the
    /// over-approximation. With robustness-sign satisfaction this is a single
    /// row `ρ ≥ ε` or `ρ ≤ −ε`.
    pub fn require_sat(&mut self, copy: CopyId, phi: &Formula, t: usize, value: bool) -> Result<(), EncodeError> {
        let pol = if value { Polarity::Under } else { Polarity::Over };
        let eps = self.options.epsilon;
        let name = format!("req[{}]", self.copies[copy.0].tag);
        let name = self.fresh(&name);
        let (expr, sense, rhs) = match self.options.sat {
            SatEncoding::Boolean => {
                let z = self.encode_bool(copy, phi, t, pol)?;
                (z, if value { Sense::Ge } else { Sense::Le }, if value { 1.0 } else { 0.0 })
            }
            SatEncoding::RobustnessSign => {
                let rho = self.encode_robustness(copy, phi, t, pol)?;
                (rho.expr, if value { Sense::Ge } else { Sense::Le }, if value { eps } else { -eps })
            }
        };
        self.model.add_constraint(&name, expr, sense, rhs)?;
        Ok(())
    }

    pub(crate) fn sat_term(&mut self, copy: CopyId, id: TermId, pol: Polarity) -> Result<Encoded, EncodeError> {
        if let Some(e) = self.lookup(copy, id, Kind::Sat, pol) {
            return Ok(e);
        }
        let out = match self.arena.node(id).clone() {
            TermNode::Top => Encoded::constant(1.0),
            TermNode::Bottom => Encoded::constant(0.0),
            TermNode::Lit { pred, t, neg: false } => self.pred_sat(copy, pred, t, pol)?,
            TermNode::Lit { pred, t, neg: true } => {
                let z = self.pred_sat(copy, pred, t, pol.flip())?;
                Encoded {
                    expr: LinExpr::constant(1.0) - z.expr,
                    lo: 1.0 - z.hi,
                    hi: 1.0 - z.lo,
                }
            }
            TermNode::Min(kids) | TermNode::Max(kids) => {
                let is_and = matches!(self.arena.node(id), TermNode::Min(_));
                let zs = kids
                    .iter()
                    .map(|k| self.sat_term(copy, *k, pol))
                    .collect::<Result<Vec<_>, _>>()?;
                let name = format!("z{}[{}][n{}]", pol.suffix(), self.copies[copy.0].tag, id.0);
                if is_and {
                    self.and_gadget(zs, pol, &name)?
                } else {
                    self.or_gadget(zs, pol, &name)?
                }
            }
        };
        self.cache.insert((copy, id, Kind::Sat, pol), out.clone());
        Ok(out)
    }

    pub(crate) fn rob_term(&mut self, copy: CopyId, id: TermId, pol: Polarity) -> Result<Encoded, EncodeError> {
        if let Some(e) = self.lookup(copy, id, Kind::Rob, pol) {
            return Ok(e);
        }
        let big = self.options.big_m;
        let out = match self.arena.node(id).clone() {
            TermNode::Top => Encoded::constant(big),
            TermNode::Bottom => Encoded::constant(-big),
            TermNode::Lit { pred, t, neg } => {
                let mu = self.predicate_value(copy, pred, t);
                if neg {
                    Encoded {
                        expr: -mu.expr,
                        lo: -mu.hi,
                        hi: -mu.lo,
                    }
                } else {
                    mu
                }
            }
            TermNode::Min(kids) | TermNode::Max(kids) => {
                let is_min = matches!(self.arena.node(id), TermNode::Min(_));
                let rs = kids
                    .iter()
                    .map(|k| self.rob_term(copy, *k, pol))
                    .collect::<Result<Vec<_>, _>>()?;
                let name = format!("rho{}[{}][n{}]", pol.suffix(), self.copies[copy.0].tag, id.0);
                if is_min {
                    self.min_gadget(rs, pol, &name)?
                } else {
                    self.max_gadget(rs, pol, &name)?
                }
            }
        };
        self.cache.insert((copy, id, Kind::Rob, pol), out.clone());
        Ok(out)
    }

    fn lookup(&mut self, copy: CopyId, id: TermId, kind: Kind, pol: Polarity) -> Option<Encoded> {
        let hit = self
            .cache
            .get(&(copy, id, kind, Polarity::Exact))
            .or_else(|| self.cache.get(&(copy, id, kind, pol)))
            .cloned();
        if hit.is_some() {
            self.cache_hits += 1;
        }
        hit
    }

    /// The encoded model in LP format, with the metadata variable names.
    pub fn dump_lp(&self) -> String {
        crate::milp::write_lp(&self.model)
    }
}

/// Interval of `μ(x)` for `x` in the given box.
fn pred_range(p: &Predicate, boxes: &[(f64, f64)]) -> (f64, f64) {
    let (mut lo, mut hi) = (p.offset, p.offset);
    for (a, (l, u)) in p.coeffs.iter().zip(boxes) {
        if *a > 0.0 {
            lo += a * l;
            hi += a * u;
        } else if *a < 0.0 {
            lo += a * u;
            hi += a * l;
        }
    }
    (lo, hi)
}
