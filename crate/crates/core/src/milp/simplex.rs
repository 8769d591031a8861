//! Bounded-variable simplex on a dense condensed tableau.
//!
//! Every row `i` gets a slack `s_i = r_i · a_i·x` whose bounds carry the
//! constraint sense (`r_i` equilibrates the row). The tableau expresses each
//! basic variable as a linear combination of the nonbasic ones:
//! `x_B[r] = Σ_k T[r][k] · x_N[k]`. Nonbasic variables sit at a finite bound,
//! or at zero when free.

use std::time::Instant;

use rayon::prelude::*;

use super::model::{MilpModel, ObjSense, Sense, SolveResult, SolveStats, SolveStatus, SolverLimits};

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const DROP_TOL: f64 = 1e-14;
const RESIDUAL_TOL: f64 = 1e-9;
const CHECK_EVERY: u64 = 100;
const DEGENERATE_BEFORE_BLAND: u32 = 50;
const PARALLEL_CELLS: usize = 1 << 17;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// The dual objective passed the cutoff, so the LP optimum is no better.
    Cutoff,
    IterLimit,
    TimeLimit,
    Numerical,
}

#[derive(Debug, Clone, Copy)]
enum Loc {
    Basic,
    Nonbasic(usize),
}

/// Iteration and wall-clock allowance shared across repeated solves.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Budget {
    pub iterations_left: u64,
    pub deadline: Option<Instant>,
}

impl Budget {
    pub fn from_limits(limits: &SolverLimits, start: Instant) -> Self {
        Budget {
            iterations_left: limits.iteration_limit,
            deadline: limits.time_limit.map(|d| start + d),
        }
    }

    fn exhausted(&self) -> Option<LpStatus> {
        if self.iterations_left == 0 {
            return Some(LpStatus::IterLimit);
        }
        match self.deadline {
            Some(d) if Instant::now() >= d => Some(LpStatus::TimeLimit),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Tableau {
    n: usize,
    m: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
    obj_scale: f64,
    basis: Vec<usize>,
    nonbasic: Vec<usize>,
    loc: Vec<Loc>,
    t: Vec<f64>,
    d: Vec<f64>,
    x: Vec<f64>,
    pub iterations: u64,
    since_check: u64,
}

fn nonbasic_start(l: f64, u: f64) -> f64 {
    if l.is_finite() {
        l
    } else if u.is_finite() {
        u
    } else {
        0.0
    }
}

impl Tableau {
    /// Slack basis for the LP relaxation of `model`, always minimizing.
    pub fn new(model: &MilpModel) -> Self {
        let n = model.num_vars();
        let m = model.constraints.len();
        let mut lower = Vec::with_capacity(n + m);
        let mut upper = Vec::with_capacity(n + m);
        for v in &model.variables {
            lower.push(v.lower);
            upper.push(v.upper);
        }
        let mut rows = Vec::with_capacity(m);
        for c in &model.constraints {
            let scale = c.terms.iter().map(|(_, a)| a.abs()).fold(0.0, f64::max);
            let r = if scale > 0.0 { 1.0 / scale } else { 1.0 };
            rows.push(c.terms.iter().map(|(v, a)| (v.0, a * r)).collect::<Vec<_>>());
            let rhs = c.rhs * r;
            let (l, u) = match c.sense {
                Sense::Le => (f64::NEG_INFINITY, rhs),
                Sense::Ge => (rhs, f64::INFINITY),
                Sense::Eq => (rhs, rhs),
            };
            lower.push(l);
            upper.push(u);
        }
        let sign = match model.sense() {
            ObjSense::Minimize => 1.0,
            ObjSense::Maximize => -1.0,
        };
        let cmax = model.objective.iter().map(|(_, c)| c.abs()).fold(0.0, f64::max);
        let obj_scale = if cmax > 0.0 { 1.0 / cmax } else { 1.0 };
        let mut cost = vec![0.0; n + m];
        for (v, c) in &model.objective {
            cost[v.0] = sign * c * obj_scale;
        }
        let mut t = vec![0.0; m * n];
        for (i, row) in rows.iter().enumerate() {
            for (j, a) in row {
                t[i * n + j] = *a;
            }
        }
        let x: Vec<f64> = (0..n + m).map(|j| nonbasic_start(lower[j], upper[j])).collect();
        let mut tab = Tableau {
            n,
            m,
            lower,
            upper,
            cost,
            rows,
            obj_scale,
            basis: (n..n + m).collect(),
            nonbasic: (0..n).collect(),
            loc: (0..n).map(Loc::Nonbasic).chain((0..m).map(|_| Loc::Basic)).collect(),
            t,
            d: vec![0.0; n],
            x,
            iterations: 0,
            since_check: 0,
        };
        tab.recompute_reduced_costs();
        tab.recompute_basics();
        tab
    }

    /// Values of the structural variables.
    pub fn values(&self) -> Vec<f64> {
        self.x[..self.n].to_vec()
    }

    /// Objective `c·x` of the original model in minimization sense (negated
    /// when maximizing), excluding its constant offset.
    pub fn objective(&self) -> f64 {
        let s: f64 = (0..self.n).map(|j| self.cost[j] * self.x[j]).sum();
        s / self.obj_scale
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    /// Changes the bounds of a structural variable; takes effect at the next solve.
    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
        if let Loc::Nonbasic(_) = self.loc[j] {
            self.x[j] = self.x[j].clamp(lower, upper);
            if !(self.x[j] == lower || self.x[j] == upper) {
                self.x[j] = nonbasic_start(lower, upper);
            }
        }
    }

    fn row(&self, r: usize) -> &[f64] {
        &self.t[r * self.n..(r + 1) * self.n]
    }

    fn recompute_basics(&mut self) {
        let n = self.n;
        let xn: Vec<f64> = self.nonbasic.iter().map(|&v| self.x[v]).collect();
        for r in 0..self.m {
            let row = &self.t[r * n..(r + 1) * n];
            self.x[self.basis[r]] = row.iter().zip(&xn).map(|(a, b)| a * b).sum();
        }
    }

    fn recompute_reduced_costs(&mut self) {
        let n = self.n;
        let mut d: Vec<f64> = self.nonbasic.iter().map(|&v| self.cost[v]).collect();
        for r in 0..self.m {
            let c = self.cost[self.basis[r]];
            if c != 0.0 {
                for (dk, a) in d.iter_mut().zip(&self.t[r * n..(r + 1) * n]) {
                    *dk += c * a;
                }
            }
        }
        self.d = d;
    }

    /// Largest violation of the defining row equations by the current values.
    fn residual(&self) -> f64 {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let a: f64 = row.iter().map(|(j, c)| c * self.x[*j]).sum();
                let scale = 1.0 + self.x[self.n + i].abs();
                (a - self.x[self.n + i]).abs() / scale
            })
            .fold(0.0, f64::max)
    }

    fn infeasibility(&self, v: usize) -> f64 {
        (self.lower[v] - self.x[v]).max(self.x[v] - self.upper[v]).max(0.0)
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let n = self.n;
        let p = self.t[r * n + q];
        let inv = 1.0 / p;
        {
            let row = &mut self.t[r * n..(r + 1) * n];
            row.iter_mut().for_each(|v| *v *= -inv);
            row[q] = inv;
        }
        let prow: Vec<f64> = self.t[r * n..(r + 1) * n].to_vec();
        let update = |(i, row): (usize, &mut [f64])| {
            if i == r {
                return;
            }
            let f = row[q];
            if f == 0.0 {
                return;
            }
            row[q] = 0.0;
            for (v, pk) in row.iter_mut().zip(&prow) {
                if *pk != 0.0 {
                    *v += f * pk;
                    if v.abs() < DROP_TOL {
                        *v = 0.0;
                    }
                }
            }
        };
        if self.m * n >= PARALLEL_CELLS {
            self.t.par_chunks_mut(n).enumerate().for_each(update);
        } else {
            self.t.chunks_mut(n).enumerate().for_each(update);
        }
        let dq = self.d[q];
        self.d[q] = 0.0;
        if dq != 0.0 {
            for (dk, pk) in self.d.iter_mut().zip(&prow) {
                *dk += dq * pk;
            }
        }
        let entering = self.nonbasic[q];
        let leaving = self.basis[r];
        self.basis[r] = entering;
        self.nonbasic[q] = leaving;
        self.loc[entering] = Loc::Basic;
        self.loc[leaving] = Loc::Nonbasic(q);
        self.iterations += 1;
        self.since_check += 1;
    }

    /// Periodic accuracy check; rebuilds the tableau when the values drift.
    fn maintain(&mut self) -> Result<(), LpStatus> {
        if self.since_check < CHECK_EVERY {
            return Ok(());
        }
        self.since_check = 0;
        if self.residual() > RESIDUAL_TOL {
            self.refactor()?;
        }
        Ok(())
    }

    /// Recomputes `T`, the reduced costs and the basic values from the basis.
    ///
    /// With `S` the basic structurals and `R` the rows whose slack is nonbasic,
    /// `|S| = |R|` and `x_S = M⁻¹ (s_R − A_{R,N} x_N)` with `M = A_{R,S}`.
    pub(crate) fn refactor(&mut self) -> Result<(), LpStatus> {
        let (n, m) = (self.n, self.m);
        let basic_struct: Vec<usize> = self.basis.iter().copied().filter(|&v| v < n).collect();
        let slack_rows: Vec<usize> = self
            .nonbasic
            .iter()
            .filter(|&&v| v >= n)
            .map(|&v| v - n)
            .collect();
        let k = basic_struct.len();
        debug_assert_eq!(k, slack_rows.len());
        let mut spos = vec![usize::MAX; n];
        for (i, &j) in basic_struct.iter().enumerate() {
            spos[j] = i;
        }
        // M (k×k) and right-hand sides Q (k × n over nonbasic columns).
        let mut mat = vec![0.0; k * k];
        let mut rhs = vec![0.0; k * n];
        for (ri, &row) in slack_rows.iter().enumerate() {
            for &(j, a) in &self.rows[row] {
                match self.loc[j] {
                    Loc::Basic => mat[ri * k + spos[j]] = a,
                    Loc::Nonbasic(c) => rhs[ri * n + c] = -a,
                }
            }
            if let Loc::Nonbasic(c) = self.loc[n + row] {
                rhs[ri * n + c] = 1.0;
            }
        }
        lu_solve_in_place(&mut mat, k, &mut rhs, n).ok_or(LpStatus::Numerical)?;
        let mut t = vec![0.0; m * n];
        for r in 0..m {
            let v = self.basis[r];
            let out = &mut t[r * n..(r + 1) * n];
            if v < n {
                out.copy_from_slice(&rhs[spos[v] * n..(spos[v] + 1) * n]);
            } else {
                for &(j, a) in &self.rows[v - n] {
                    match self.loc[j] {
                        Loc::Basic => {
                            let src = &rhs[spos[j] * n..(spos[j] + 1) * n];
                            for (o, s) in out.iter_mut().zip(src) {
                                *o += a * s;
                            }
                        }
                        Loc::Nonbasic(c) => out[c] += a,
                    }
                }
            }
            for o in out.iter_mut() {
                if o.abs() < DROP_TOL {
                    *o = 0.0;
                }
            }
        }
        self.t = t;
        self.recompute_reduced_costs();
        self.recompute_basics();
        self.since_check = 0;
        Ok(())
    }

    fn primal_infeasible(&self) -> bool {
        self.basis.iter().any(|&v| self.infeasibility(v) > PRIMAL_TOL)
    }

    /// Places nonbasic variables on the bound their reduced cost prefers.
    /// Returns false when some reduced cost points at an infinite bound.
    fn prepare_dual(&mut self) -> bool {
        for k in 0..self.n {
            let v = self.nonbasic[k];
            let (l, u, d) = (self.lower[v], self.upper[v], self.d[k]);
            if d > DUAL_TOL {
                if !l.is_finite() {
                    return false;
                }
                self.x[v] = l;
            } else if d < -DUAL_TOL {
                if !u.is_finite() {
                    return false;
                }
                self.x[v] = u;
            } else if !(self.x[v] == l || self.x[v] == u) {
                self.x[v] = nonbasic_start(l, u);
            }
        }
        self.recompute_basics();
        true
    }

    fn primal(&mut self, budget: &mut Budget) -> LpStatus {
        let mut degenerate = 0u32;
        let mut phase1_d = vec![0.0; self.n];
        loop {
            if let Err(s) = self.maintain() {
                return s;
            }
            if let Some(s) = budget.exhausted() {
                return s;
            }
            let phase1 = self.primal_infeasible();
            if phase1 {
                phase1_d.iter_mut().for_each(|v| *v = 0.0);
                for r in 0..self.m {
                    let v = self.basis[r];
                    let w = if self.x[v] < self.lower[v] - PRIMAL_TOL {
                        -1.0
                    } else if self.x[v] > self.upper[v] + PRIMAL_TOL {
                        1.0
                    } else {
                        continue;
                    };
                    for (dk, a) in phase1_d.iter_mut().zip(self.row(r)) {
                        *dk += w * a;
                    }
                }
            }
            let bland = degenerate >= DEGENERATE_BEFORE_BLAND;
            let dvec = if phase1 { &phase1_d } else { &self.d };
            let mut best: Option<(usize, f64)> = None;
            let mut best_score = 0.0;
            for k in 0..self.n {
                let v = self.nonbasic[k];
                let dk = dvec[k];
                let dir = if dk < -DUAL_TOL && self.x[v] < self.upper[v] {
                    1.0
                } else if dk > DUAL_TOL && self.x[v] > self.lower[v] {
                    -1.0
                } else {
                    continue;
                };
                if bland {
                    if best.map_or(true, |(bk, _)| v < self.nonbasic[bk]) {
                        best = Some((k, dir));
                    }
                } else if dk.abs() > best_score {
                    best_score = dk.abs();
                    best = Some((k, dir));
                }
            }
            let Some((q, dir)) = best else {
                return if phase1 { LpStatus::Infeasible } else { LpStatus::Optimal };
            };
            let entering = self.nonbasic[q];
            // Harris two-pass ratio test.
            let mut relaxed_max = f64::INFINITY;
            let mut limits: Vec<(usize, f64, f64, f64)> = Vec::new();
            for r in 0..self.m {
                let alpha = self.t[r * self.n + q] * dir;
                if alpha.abs() < PIVOT_TOL {
                    continue;
                }
                let v = self.basis[r];
                let (x, l, u) = (self.x[v], self.lower[v], self.upper[v]);
                let (target, relaxed) = if alpha > 0.0 {
                    if x < l - PRIMAL_TOL {
                        (l, l)
                    } else if x > u + PRIMAL_TOL || !u.is_finite() {
                        continue;
                    } else {
                        (u, u + PRIMAL_TOL)
                    }
                } else if x > u + PRIMAL_TOL {
                    (u, u)
                } else if x < l - PRIMAL_TOL || !l.is_finite() {
                    continue;
                } else {
                    (l, l - PRIMAL_TOL)
                };
                let exact = ((target - x) / alpha).max(0.0);
                relaxed_max = relaxed_max.min(((relaxed - x) / alpha).max(0.0));
                limits.push((r, exact, alpha, target));
            }
            let mut leave: Option<(usize, f64, f64)> = None;
            if bland {
                let theta_min = limits.iter().map(|l| l.1).fold(f64::INFINITY, f64::min);
                for &(r, exact, _, target) in &limits {
                    if exact <= theta_min
                        && leave.map_or(true, |(br, _, _)| self.basis[r] < self.basis[br])
                    {
                        leave = Some((r, exact, target));
                    }
                }
            } else {
                let mut best_alpha = 0.0;
                for &(r, exact, alpha, target) in &limits {
                    if exact <= relaxed_max && alpha.abs() > best_alpha {
                        best_alpha = alpha.abs();
                        leave = Some((r, exact, target));
                    }
                }
            }
            let span = self.upper[entering] - self.lower[entering];
            let flip = span.is_finite() && leave.map_or(true, |(_, th, _)| span <= th);
            if leave.is_none() && !flip {
                return if phase1 { LpStatus::Numerical } else { LpStatus::Unbounded };
            }
            let theta = if flip { span } else { leave.unwrap().1 };
            degenerate = if theta < 1e-12 { degenerate + 1 } else { 0 };
            budget.iterations_left = budget.iterations_left.saturating_sub(1);
            if theta != 0.0 {
                for r in 0..self.m {
                    let a = self.t[r * self.n + q];
                    if a != 0.0 {
                        self.x[self.basis[r]] += a * dir * theta;
                    }
                }
            }
            if flip {
                self.x[entering] = if dir > 0.0 { self.upper[entering] } else { self.lower[entering] };
                self.iterations += 1;
                continue;
            }
            let (r, _, target) = leave.unwrap();
            self.x[entering] += dir * theta;
            let leaving = self.basis[r];
            self.pivot(r, q);
            self.x[leaving] = target;
        }
    }

    fn dual(&mut self, cutoff: Option<f64>, budget: &mut Budget) -> LpStatus {
        loop {
            if let Err(s) = self.maintain() {
                return s;
            }
            if let Some(s) = budget.exhausted() {
                return s;
            }
            if let Some(c) = cutoff {
                if self.objective() > c {
                    return LpStatus::Cutoff;
                }
            }
            let mut pick: Option<(usize, f64)> = None;
            let mut worst = PRIMAL_TOL;
            for r in 0..self.m {
                let v = self.basis[r];
                let inf = self.infeasibility(v);
                if inf > worst {
                    worst = inf;
                    let target = if self.x[v] < self.lower[v] { self.lower[v] } else { self.upper[v] };
                    pick = Some((r, target));
                }
            }
            let Some((r, target)) = pick else {
                return LpStatus::Optimal;
            };
            let want = (target - self.x[self.basis[r]]).signum();
            let mut relaxed_max = f64::INFINITY;
            let mut cands: Vec<(usize, f64, f64)> = Vec::new();
            let row = self.row(r);
            for k in 0..self.n {
                let a = row[k];
                if a.abs() < PIVOT_TOL {
                    continue;
                }
                let v = self.nonbasic[k];
                let dir = a.signum() * want;
                if (dir > 0.0 && self.x[v] >= self.upper[v]) || (dir < 0.0 && self.x[v] <= self.lower[v]) {
                    continue;
                }
                let dk = self.d[k];
                let ratio = (dk.abs() / a.abs()).max(0.0);
                let relaxed = (dk.abs() + DUAL_TOL) / a.abs();
                relaxed_max = relaxed_max.min(relaxed);
                cands.push((k, ratio, a));
            }
            let mut enter: Option<usize> = None;
            let mut best_a = 0.0;
            for &(k, ratio, a) in &cands {
                if ratio <= relaxed_max && a.abs() > best_a {
                    best_a = a.abs();
                    enter = Some(k);
                }
            }
            let Some(q) = enter else {
                return LpStatus::Infeasible;
            };
            budget.iterations_left = budget.iterations_left.saturating_sub(1);
            let leaving = self.basis[r];
            let delta = (target - self.x[leaving]) / self.t[r * self.n + q];
            let entering = self.nonbasic[q];
            for i in 0..self.m {
                let a = self.t[i * self.n + q];
                if a != 0.0 {
                    self.x[self.basis[i]] += a * delta;
                }
            }
            self.x[entering] += delta;
            self.pivot(r, q);
            self.x[leaving] = target;
        }
    }

    /// Solves from the current basis. Uses the dual simplex when the basis is
    /// dual feasible, the primal simplex otherwise. `cutoff` is in the
    /// minimization sense of the scaled objective returned by `objective`.
    pub fn solve(&mut self, cutoff: Option<f64>, budget: &mut Budget) -> LpStatus {
        for attempt in 0..3 {
            let status = if self.prepare_dual() {
                match self.dual(cutoff, budget) {
                    LpStatus::Optimal => self.primal(budget),
                    other => other,
                }
            } else {
                self.recompute_basics();
                self.primal(budget)
            };
            if status != LpStatus::Optimal {
                if status == LpStatus::Infeasible && attempt == 0 && self.residual() > RESIDUAL_TOL {
                    if self.refactor().is_err() {
                        return LpStatus::Numerical;
                    }
                    continue;
                }
                return status;
            }
            self.recompute_basics();
            if self.residual() <= RESIDUAL_TOL * 10.0 && !self.primal_infeasible_loose() {
                return LpStatus::Optimal;
            }
            if self.refactor().is_err() {
                return LpStatus::Numerical;
            }
        }
        LpStatus::Numerical
    }

    fn primal_infeasible_loose(&self) -> bool {
        self.basis.iter().any(|&v| self.infeasibility(v) > 1e3 * PRIMAL_TOL)
    }
}

/// Solves `M X = B` in place (`B` becomes `X`) by LU with partial pivoting.
/// `M` is `k×k`, `B` is `k×cols`, both row-major. Returns `None` if singular.
fn lu_solve_in_place(mat: &mut [f64], k: usize, b: &mut [f64], cols: usize) -> Option<()> {
    let mut perm: Vec<usize> = (0..k).collect();
    for c in 0..k {
        let (p, pv) = (c..k)
            .map(|r| (r, mat[r * k + c].abs()))
            .fold((c, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if pv < 1e-13 {
            return None;
        }
        if p != c {
            for j in 0..k {
                mat.swap(c * k + j, p * k + j);
            }
            for j in 0..cols {
                b.swap(c * cols + j, p * cols + j);
            }
            perm.swap(c, p);
        }
        let piv = mat[c * k + c];
        for r in c + 1..k {
            let f = mat[r * k + c] / piv;
            if f == 0.0 {
                continue;
            }
            mat[r * k + c] = 0.0;
            for j in c + 1..k {
                mat[r * k + j] -= f * mat[c * k + j];
            }
            let (top, bottom) = b.split_at_mut(r * cols);
            let src = &top[c * cols..(c + 1) * cols];
            for (dst, s) in bottom[..cols].iter_mut().zip(src) {
                *dst -= f * s;
            }
        }
    }
    for c in (0..k).rev() {
        let piv = mat[c * k + c];
        {
            let row = &mut b[c * cols..(c + 1) * cols];
            row.iter_mut().for_each(|v| *v /= piv);
        }
        for r in 0..c {
            let f = mat[r * k + c];
            if f == 0.0 {
                continue;
            }
            let (top, bottom) = b.split_at_mut(c * cols);
            let src = &bottom[..cols];
            for (dst, s) in top[r * cols..(r + 1) * cols].iter_mut().zip(src) {
                *dst -= f * s;
            }
        }
    }
    Some(())
}

/// Solves the LP relaxation of `model` (binaries treated as `[lower, upper]`).
pub fn solve_lp(model: &MilpModel, limits: &SolverLimits) -> SolveResult {
    let start = Instant::now();
    let mut tab = Tableau::new(model);
    let mut budget = Budget::from_limits(limits, start);
    let status = tab.solve(None, &mut budget);
    let stats = SolveStats {
        nodes: 0,
        simplex_iterations: tab.iterations,
        wall_time: start.elapsed(),
    };
    let mapped = match status {
        LpStatus::Optimal => SolveStatus::Optimal,
        LpStatus::Infeasible => SolveStatus::Infeasible,
        LpStatus::Unbounded => SolveStatus::Unbounded,
        LpStatus::IterLimit => SolveStatus::IterLimit,
        LpStatus::TimeLimit => SolveStatus::TimeLimit,
        LpStatus::Cutoff | LpStatus::Numerical => SolveStatus::Numerical,
    };
    if mapped != SolveStatus::Optimal {
        let mut r = SolveResult::without_solution(mapped, model.sense());
        r.stats = stats;
        return r;
    }
    let values = tab.values();
    let objective = model.objective_value(&values);
    SolveResult {
        status: mapped,
        values,
        objective,
        best_bound: objective,
        stats,
    }
}
