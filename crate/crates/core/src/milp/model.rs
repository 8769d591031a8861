use std::collections::BTreeMap;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::MilpError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub id: VarId,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
    pub name: String,
    /// Branching priority for the embedded solver; fractional binaries of
    /// the highest priority are branched on first.
    #[serde(default)]
    pub priority: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjSense {
    Minimize,
    Maximize,
}

/// `Σ coeff · var (sense) rhs`; terms are sorted by id without duplicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinConstraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl LinConstraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|(v, c)| c * values[v.0]).sum()
    }

    /// Amount by which `values` violates the constraint (zero when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let a = self.activity(values);
        match self.sense {
            Sense::Le => (a - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - a).max(0.0),
            Sense::Eq => (a - self.rhs).abs(),
        }
    }
}

/// Affine expression over model variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        LinExpr {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(v: VarId) -> Self {
        LinExpr {
            terms: vec![(v, 1.0)],
            constant: 0.0,
        }
    }

    pub fn term(v: VarId, c: f64) -> Self {
        LinExpr {
            terms: vec![(v, c)],
            constant: 0.0,
        }
    }

    pub fn add_term(&mut self, v: VarId, c: f64) {
        self.terms.push((v, c));
    }

    /// `self += c · other`.
    pub fn add_scaled(&mut self, other: &LinExpr, c: f64) {
        if c == 0.0 {
            return;
        }
        self.terms.extend(other.terms.iter().map(|(v, a)| (*v, a * c)));
        self.constant += c * other.constant;
    }

    /// Merges duplicate variables and drops zero coefficients.
    pub fn normalized(mut self) -> Self {
        self.terms.sort_by_key(|(v, _)| *v);
        let mut out: Vec<(VarId, f64)> = Vec::with_capacity(self.terms.len());
        for (v, c) in self.terms {
            match out.last_mut() {
                Some((lv, lc)) if *lv == v => *lc += c,
                _ => out.push((v, c)),
            }
        }
        out.retain(|(_, c)| *c != 0.0);
        LinExpr {
            terms: out,
            constant: self.constant,
        }
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|(v, c)| c * values[v.0]).sum::<f64>()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|(_, c)| *c == 0.0)
    }

    /// Range of the expression over the variables' bounds.
    pub fn bounds(&self, model: &MilpModel) -> (f64, f64) {
        let (mut lo, mut hi) = (self.constant, self.constant);
        for (v, c) in &self.terms {
            let var = &model.variables[v.0];
            if *c > 0.0 {
                lo += c * var.lower;
                hi += c * var.upper;
            } else if *c < 0.0 {
                lo += c * var.upper;
                hi += c * var.lower;
            }
        }
        (lo, hi)
    }
}

impl From<VarId> for LinExpr {
    fn from(v: VarId) -> Self {
        LinExpr::var(v)
    }
}

impl Add for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: LinExpr) -> LinExpr {
        self.add_scaled(&rhs, 1.0);
        self
    }
}

impl AddAssign<&LinExpr> for LinExpr {
    fn add_assign(&mut self, rhs: &LinExpr) {
        self.add_scaled(rhs, 1.0);
    }
}

impl Sub for LinExpr {
    type Output = LinExpr;
    fn sub(mut self, rhs: LinExpr) -> LinExpr {
        self.add_scaled(&rhs, -1.0);
        self
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self * -1.0
    }
}

impl Mul<f64> for LinExpr {
    type Output = LinExpr;
    fn mul(mut self, c: f64) -> LinExpr {
        self.terms.iter_mut().for_each(|(_, a)| *a *= c);
        self.constant *= c;
        self
    }
}

impl Add<f64> for LinExpr {
    type Output = LinExpr;
    fn add(mut self, c: f64) -> LinExpr {
        self.constant += c;
        self
    }
}

/// A mixed-binary linear program with named variables.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MilpModel {
    pub variables: Vec<Variable>,
    pub constraints: Vec<LinConstraint>,
    pub objective_sense: Option<ObjSense>,
    pub objective: Vec<(VarId, f64)>,
    pub objective_offset: f64,
    names: BTreeMap<String, VarId>,
    constraint_names: BTreeMap<String, usize>,
}

impl MilpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.variables.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn add_variable(&mut self, name: &str, kind: VarKind, lower: f64, upper: f64) -> Result<VarId, MilpError> {
        if self.names.contains_key(name) {
            return Err(MilpError::DuplicateName(name.to_string()));
        }
        if lower.is_nan() || upper.is_nan() || lower > upper || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
            return Err(MilpError::BadBounds {
                name: name.to_string(),
                lower,
                upper,
            });
        }
        if kind == VarKind::Binary && (lower < 0.0 || upper > 1.0) {
            return Err(MilpError::BadBounds {
                name: name.to_string(),
                lower,
                upper,
            });
        }
        let id = VarId(self.variables.len());
        self.variables.push(Variable {
            id,
            kind,
            lower,
            upper,
            name: name.to_string(),
            priority: 0,
        });
        self.names.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn add_binary(&mut self, name: &str) -> Result<VarId, MilpError> {
        self.add_variable(name, VarKind::Binary, 0.0, 1.0)
    }

    pub fn add_continuous(&mut self, name: &str, lower: f64, upper: f64) -> Result<VarId, MilpError> {
        self.add_variable(name, VarKind::Continuous, lower, upper)
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.names.get(name).copied()
    }

    pub fn set_priority(&mut self, id: VarId, priority: u32) {
        self.variables[id.0].priority = priority;
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn set_bounds(&mut self, id: VarId, lower: f64, upper: f64) -> Result<(), MilpError> {
        let var = &mut self.variables[id.0];
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(MilpError::BadBounds {
                name: var.name.clone(),
                lower,
                upper,
            });
        }
        var.lower = lower;
        var.upper = upper;
        Ok(())
    }

    fn check_terms(&self, terms: &[(VarId, f64)]) -> Result<(), MilpError> {
        for (v, c) in terms {
            if v.0 >= self.variables.len() {
                return Err(MilpError::UnknownVariable(v.0));
            }
            if !c.is_finite() {
                return Err(MilpError::NonFinite(self.variables[v.0].name.clone()));
            }
        }
        Ok(())
    }

    /// Adds `expr (sense) rhs`; the expression constant moves to the right-hand side.
    pub fn add_constraint(&mut self, name: &str, expr: LinExpr, sense: Sense, rhs: f64) -> Result<usize, MilpError> {
        let expr = expr.normalized();
        self.check_terms(&expr.terms)?;
        let rhs = rhs - expr.constant;
        if !rhs.is_finite() {
            return Err(MilpError::NonFinite(name.to_string()));
        }
        let name = if name.is_empty() {
            format!("c{}", self.constraints.len())
        } else {
            name.to_string()
        };
        if self.constraint_names.contains_key(&name) {
            return Err(MilpError::DuplicateName(name));
        }
        self.constraint_names.insert(name.clone(), self.constraints.len());
        self.constraints.push(LinConstraint {
            name,
            terms: expr.terms,
            sense,
            rhs,
        });
        Ok(self.constraints.len() - 1)
    }

    pub fn set_objective(&mut self, sense: ObjSense, expr: LinExpr) -> Result<(), MilpError> {
        let expr = expr.normalized();
        self.check_terms(&expr.terms)?;
        self.objective_sense = Some(sense);
        self.objective = expr.terms;
        self.objective_offset = expr.constant;
        Ok(())
    }

    pub fn sense(&self) -> ObjSense {
        self.objective_sense.unwrap_or(ObjSense::Minimize)
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective_offset + self.objective.iter().map(|(v, c)| c * values[v.0]).sum::<f64>()
    }

    /// Largest constraint or bound violation of `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let rows = self.constraints.iter().map(|c| c.violation(values));
        let bounds = self
            .variables
            .iter()
            .map(|v| (v.lower - values[v.id.0]).max(values[v.id.0] - v.upper).max(0.0));
        rows.chain(bounds).fold(0.0, f64::max)
    }

    /// Largest distance of a binary variable from {0, 1}.
    pub fn max_integrality_violation(&self, values: &[f64]) -> f64 {
        self.variables
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .map(|v| (values[v.id.0] - values[v.id.0].round()).abs())
            .fold(0.0, f64::max)
    }

    /// The same model with every binary relaxed to a continuous `[lower, upper]` variable.
    pub fn relaxed(&self) -> MilpModel {
        let mut m = self.clone();
        m.variables.iter_mut().for_each(|v| v.kind = VarKind::Continuous);
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterLimit,
    TimeLimit,
    /// The LP core lost accuracy beyond recovery.
    Numerical,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SolveStats {
    pub nodes: u64,
    pub simplex_iterations: u64,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Indexed by `VarId`; empty when no feasible point is known.
    pub values: Vec<f64>,
    pub objective: f64,
    pub best_bound: f64,
    pub stats: SolveStats,
}

impl SolveResult {
    pub fn has_solution(&self) -> bool {
        !self.values.is_empty()
    }

    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.0]
    }

    pub(crate) fn without_solution(status: SolveStatus, sense: ObjSense) -> Self {
        let inf = match sense {
            ObjSense::Minimize => f64::INFINITY,
            ObjSense::Maximize => f64::NEG_INFINITY,
        };
        SolveResult {
            status,
            values: Vec::new(),
            objective: inf,
            best_bound: -inf,
            stats: SolveStats::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverLimits {
    pub node_limit: u64,
    pub time_limit: Option<Duration>,
    pub iteration_limit: u64,
    pub mip_gap_abs: f64,
    pub mip_gap_rel: f64,
    pub integrality_tol: f64,
    pub feasibility_tol: f64,
}

impl Default for SolverLimits {
    fn default() -> Self {
        SolverLimits {
            node_limit: 1_000_000,
            time_limit: None,
            iteration_limit: 50_000_000,
            mip_gap_abs: 1e-6,
            mip_gap_rel: 1e-6,
            integrality_tol: 1e-6,
            feasibility_tol: 1e-7,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_gets_unit_bounds() {
        let mut m = MilpModel::new();
        let b = m.add_binary("b").unwrap();
        assert_eq!(m.var(b).kind, VarKind::Binary);
        assert_eq!((m.var(b).lower, m.var(b).upper), (0.0, 1.0));
    }

    #[test]
    fn constraint_is_stored_verbatim() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 10.0).unwrap();
        let y = m.add_continuous("y", 0.0, 10.0).unwrap();
        m.add_constraint("xy", LinExpr::var(x) + LinExpr::var(y), Sense::Le, 1.0).unwrap();
        assert_eq!(m.constraints[0].terms, vec![(x, 1.0), (y, 1.0)]);
        assert_eq!(m.constraints[0].sense, Sense::Le);
        assert_eq!(m.constraints[0].rhs, 1.0);
    }

    #[test]
    fn duplicate_names_and_bad_bounds() {
        let mut m = MilpModel::new();
        m.add_continuous("k", 0.0, 1.0).unwrap();
        assert_eq!(m.add_binary("k"), Err(MilpError::DuplicateName("k".into())));
        assert!(matches!(m.add_continuous("z", 2.0, 1.0), Err(MilpError::BadBounds { .. })));
        assert!(matches!(m.add_variable("w", VarKind::Binary, 0.0, 2.0), Err(MilpError::BadBounds { .. })));
    }

    #[test]
    fn expression_normalization_merges_terms() {
        let e = (LinExpr::var(VarId(1)) + LinExpr::term(VarId(0), 2.0) + LinExpr::term(VarId(1), -1.0) + 3.0).normalized();
        assert_eq!(e.terms, vec![(VarId(0), 2.0)]);
        assert_eq!(e.constant, 3.0);
    }

    #[test]
    fn constant_moves_to_rhs() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 1.0).unwrap();
        m.add_constraint("", LinExpr::var(x) + 2.0, Sense::Ge, 3.0).unwrap();
        assert_eq!(m.constraints[0].rhs, 1.0);
        assert_eq!(m.constraints[0].name, "c0");
    }
}
