//! Best-bound branch-and-bound with depth-first plunging.
//!
//! Nodes are popped by `(bound, id)`. After branching, one child is pushed
//! and the other is solved immediately, warm-starting the dual simplex from
//! the parent's basis. Everything runs on one thread, so results do not
//! depend on the machine.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use log::{debug, warn};

use super::model::{MilpModel, ObjSense, SolveResult, SolveStats, SolveStatus, SolverLimits, VarKind};
use super::propagate::{propagate, RowSet};
use super::simplex::{Budget, LpStatus, Tableau};

#[derive(Debug, Clone)]
struct Node {
    id: u64,
    bound: f64,
    /// Fixings of binaries relative to the root, as `(var, value)`.
    fixings: Vec<(usize, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // Max-heap order: the smallest bound, then the smallest id, is greatest.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| other.id.cmp(&self.id))
    }
}

fn gap_closed(bound: f64, incumbent: f64, limits: &SolverLimits) -> bool {
    incumbent - bound <= limits.mip_gap_abs.max(limits.mip_gap_rel * incumbent.abs())
}

struct Search<'a> {
    model: &'a MilpModel,
    limits: &'a SolverLimits,
    tab: Tableau,
    budget: Budget,
    binaries: Vec<usize>,
    rows: RowSet,
    root_bounds: Vec<(f64, f64)>,
    incumbent: Option<(f64, Vec<f64>)>,
    heap: BinaryHeap<Node>,
    next_id: u64,
    nodes: u64,
    best_bound: f64,
    bound_trace: Vec<f64>,
    numerical_trouble: bool,
}

enum Polish {
    Accept(f64, Vec<f64>),
    Branch(usize),
    Prune,
    Stop(SolveStatus),
}

enum NodeOutcome {
    Pruned,
    Branched(Node, Node),
    Stop(SolveStatus),
}

impl<'a> Search<'a> {
    fn apply(&mut self, fixings: &[(usize, f64)]) {
        for (i, &j) in self.binaries.iter().enumerate() {
            let (l, u) = self.root_bounds[i];
            if self.tab.bounds(j) != (l, u) {
                self.tab.set_bounds(j, l, u);
            }
        }
        for &(j, v) in fixings {
            self.tab.set_bounds(j, v, v);
        }
    }

    fn cutoff(&self) -> Option<f64> {
        self.incumbent.as_ref().map(|(inc, _)| {
            inc - self.limits.mip_gap_abs.max(self.limits.mip_gap_rel * inc.abs())
        })
    }

    fn solve_node(&mut self, node: &Node) -> NodeOutcome {
        self.nodes += 1;
        let mut fixings = node.fixings.clone();
        match propagate(self.model, &self.rows, &fixings) {
            Some(implied) => fixings.extend(implied),
            None => return NodeOutcome::Pruned,
        }
        let node = &Node {
            id: node.id,
            bound: node.bound,
            fixings,
        };
        self.apply(&node.fixings);
        let cutoff = self.cutoff();
        let mut status = self.tab.solve(cutoff, &mut self.budget);
        if status == LpStatus::Numerical {
            // Rebuild from a slack basis once before giving up on the node.
            let iterations = self.tab.iterations;
            self.tab = Tableau::new(self.model);
            self.tab.iterations = iterations;
            self.apply(&node.fixings);
            status = self.tab.solve(cutoff, &mut self.budget);
        }
        match status {
            LpStatus::Infeasible | LpStatus::Cutoff => return NodeOutcome::Pruned,
            LpStatus::Unbounded => return NodeOutcome::Stop(SolveStatus::Unbounded),
            LpStatus::IterLimit => return NodeOutcome::Stop(SolveStatus::IterLimit),
            LpStatus::TimeLimit => return NodeOutcome::Stop(SolveStatus::TimeLimit),
            LpStatus::Numerical => {
                warn!("numerical failure at node {}; node discarded", node.id);
                self.numerical_trouble = true;
                return NodeOutcome::Pruned;
            }
            LpStatus::Optimal => {}
        }
        let obj = self.tab.objective();
        if let Some(c) = cutoff {
            if obj >= c {
                return NodeOutcome::Pruned;
            }
        }
        let values = self.tab.values();
        // most fractional binary within the highest fractional priority class
        let mut branch: Option<(usize, f64)> = None;
        let mut best = (0u32, self.limits.integrality_tol);
        for &j in &self.binaries {
            let v = values[j];
            let frac = (v - v.floor()).min(v.ceil() - v);
            if frac <= self.limits.integrality_tol {
                continue;
            }
            let p = self.model.variables[j].priority;
            if branch.is_none() || p > best.0 || (p == best.0 && frac > best.1) {
                best = (p, frac);
                branch = Some((j, v));
            }
        }
        let (j, v) = match branch {
            Some(b) => b,
            None => match self.polish(&values, &node.fixings) {
                Polish::Accept(obj, values) => {
                    if self.incumbent.as_ref().map_or(true, |(inc, _)| obj < *inc) {
                        debug!("incumbent {obj} at node {}", node.id);
                        self.incumbent = Some((obj, values));
                    }
                    return NodeOutcome::Pruned;
                }
                Polish::Branch(j) => (j, values[j]),
                Polish::Prune => return NodeOutcome::Pruned,
                Polish::Stop(s) => return NodeOutcome::Stop(s),
            },
        };
        let mut child = |value: f64| {
            let mut fixings = node.fixings.clone();
            fixings.push((j, value));
            self.next_id += 1;
            Node {
                id: self.next_id,
                bound: obj,
                fixings,
            }
        };
        let (down, up) = (child(0.0), child(1.0));
        if v >= 0.5 {
            NodeOutcome::Branched(up, down)
        } else {
            NodeOutcome::Branched(down, up)
        }
    }

    /// Minimization-sense objective of `values`, without the offset.
    fn min_objective(&self, values: &[f64]) -> f64 {
        let sign = match self.model.sense() {
            ObjSense::Minimize => 1.0,
            ObjSense::Maximize => -1.0,
        };
        sign * self.model.objective.iter().map(|(v, c)| c * values[v.0]).sum::<f64>()
    }

    /// Checks an LP point whose binaries are integral within tolerance
    /// against the unscaled model. Row equilibration and the integrality
    /// tolerance can hide violations of big-M rows, so binaries are rounded,
    /// substituted out of the rows, and the continuous part is re-solved.
    fn polish(&mut self, values: &[f64], fixings: &[(usize, f64)]) -> Polish {
        let mut rounded = values.to_vec();
        for &j in &self.binaries {
            rounded[j] = rounded[j].round();
        }
        if self.model.max_violation(&rounded) <= self.limits.feasibility_tol {
            return Polish::Accept(self.min_objective(&rounded), rounded);
        }
        let mut sub = self.model.clone();
        for &j in &self.binaries {
            sub.variables[j].lower = rounded[j];
            sub.variables[j].upper = rounded[j];
        }
        let is_binary = |j: usize| self.model.variables[j].kind == VarKind::Binary;
        for c in &mut sub.constraints {
            let moved: f64 = c
                .terms
                .iter()
                .filter(|(v, _)| is_binary(v.0))
                .map(|(v, a)| a * rounded[v.0])
                .sum();
            c.terms.retain(|(v, _)| !is_binary(v.0));
            c.rhs -= moved;
        }
        let mut tab = Tableau::new(&sub);
        let status = tab.solve(None, &mut self.budget);
        self.tab.iterations += tab.iterations;
        match status {
            LpStatus::Optimal => {
                let polished = tab.values();
                if self.model.max_violation(&polished) <= self.limits.feasibility_tol {
                    return Polish::Accept(self.min_objective(&polished), polished);
                }
            }
            LpStatus::IterLimit => return Polish::Stop(SolveStatus::IterLimit),
            LpStatus::TimeLimit => return Polish::Stop(SolveStatus::TimeLimit),
            _ => {}
        }
        // Branch on a free binary of the most violated row, else on any free one.
        let free = |j: usize| !fixings.iter().any(|(f, _)| *f == j);
        let worst = self
            .model
            .constraints
            .iter()
            .max_by(|a, b| a.violation(&rounded).total_cmp(&b.violation(&rounded)));
        let in_row = worst.and_then(|c| {
            c.terms
                .iter()
                .filter(|(v, _)| is_binary(v.0) && free(v.0))
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .map(|(v, _)| v.0)
        });
        match in_row.or_else(|| self.binaries.iter().copied().find(|j| free(*j))) {
            Some(j) => Polish::Branch(j),
            None => Polish::Prune,
        }
    }

    fn open_bound(&self, dive: Option<&Node>) -> f64 {
        let heap_min = self.heap.peek().map_or(f64::INFINITY, |n| n.bound);
        let dive_min = dive.map_or(f64::INFINITY, |n| n.bound);
        heap_min.min(dive_min)
    }

    fn run(&mut self) -> SolveStatus {
        let mut dive = Some(Node {
            id: 0,
            bound: f64::NEG_INFINITY,
            fixings: Vec::new(),
        });
        loop {
            let open = self.open_bound(dive.as_ref());
            let open = match &self.incumbent {
                Some((inc, _)) => open.min(*inc),
                None => open,
            };
            if open > self.best_bound {
                self.best_bound = open;
            }
            self.bound_trace.push(self.best_bound);
            if let Some((inc, _)) = &self.incumbent {
                if gap_closed(self.best_bound, *inc, self.limits) {
                    return SolveStatus::Optimal;
                }
            }
            let node = match dive.take() {
                Some(n) => n,
                None => match self.heap.pop() {
                    Some(n) => n,
                    None => {
                        return if self.incumbent.is_some() {
                            SolveStatus::Optimal
                        } else {
                            SolveStatus::Infeasible
                        };
                    }
                },
            };
            if let Some(c) = self.cutoff() {
                if node.bound >= c {
                    continue;
                }
            }
            if self.nodes >= self.limits.node_limit {
                self.heap.push(node);
                return SolveStatus::IterLimit;
            }
            match self.solve_node(&node) {
                NodeOutcome::Pruned => {}
                NodeOutcome::Branched(first, second) => {
                    self.heap.push(second);
                    dive = Some(first);
                }
                NodeOutcome::Stop(s) => {
                    if s != SolveStatus::Unbounded {
                        self.heap.push(node);
                    }
                    return s;
                }
            }
        }
    }
}

/// Branch-and-bound over the binaries of `model`.
pub fn solve_milp(model: &MilpModel, limits: &SolverLimits) -> SolveResult {
    solve_milp_traced(model, limits).0
}

/// Like `solve_milp`, also returning the global bound (minimization sense)
/// recorded before each node.
pub fn solve_milp_traced(model: &MilpModel, limits: &SolverLimits) -> (SolveResult, Vec<f64>) {
    let start = Instant::now();
    let binaries: Vec<usize> = model
        .variables
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.id.0)
        .collect();
    let root_bounds = binaries
        .iter()
        .map(|&j| (model.variables[j].lower, model.variables[j].upper))
        .collect();
    let mut search = Search {
        model,
        limits,
        tab: Tableau::new(model),
        budget: Budget::from_limits(limits, start),
        binaries,
        rows: RowSet::new(model),
        root_bounds,
        incumbent: None,
        heap: BinaryHeap::new(),
        next_id: 0,
        nodes: 0,
        best_bound: f64::NEG_INFINITY,
        bound_trace: Vec::new(),
        numerical_trouble: false,
    };
    let mut status = search.run();
    if status == SolveStatus::Infeasible && search.numerical_trouble {
        status = SolveStatus::Numerical;
    }
    let stats = SolveStats {
        nodes: search.nodes,
        simplex_iterations: search.tab.iterations,
        wall_time: start.elapsed(),
    };
    let sign = match model.sense() {
        ObjSense::Minimize => 1.0,
        ObjSense::Maximize => -1.0,
    };
    let to_model = |v: f64| sign * v + model.objective_offset;
    let open = search.open_bound(None);
    let trace = std::mem::take(&mut search.bound_trace);
    let result = match search.incumbent.take() {
        Some((inc, values)) => {
            let bound = if status == SolveStatus::Optimal {
                search.best_bound.min(inc)
            } else {
                open.min(inc).max(search.best_bound)
            };
            SolveResult {
                status,
                objective: model.objective_value(&values),
                values,
                best_bound: to_model(bound),
                stats,
            }
        }
        None => {
            let mut r = SolveResult::without_solution(status, model.sense());
            if matches!(status, SolveStatus::IterLimit | SolveStatus::TimeLimit) {
                r.best_bound = to_model(search.best_bound);
            }
            r.stats = stats;
            r
        }
    };
    (result, trace)
}
