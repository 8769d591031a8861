//! Signal temporal logic over discrete-time traces.
//!
//! Formulas are built from affine predicates `coeffs·x + offset >= 0` with
//! integer step intervals. [`eval_bool`] implements the Boolean semantics and
//! [`robustness`] the min/max space robustness.

mod monitor;
mod parse;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use monitor::{eval_bool, robustness, robustness_signal, satisfaction_signal};
pub use parse::parse;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StlError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown state variable `{name}` at {line}:{column}")]
    UnknownVariable {
        name: String,
        line: usize,
        column: usize,
    },
    #[error("invalid interval [{a},{b}] at {line}:{column}: lower bound exceeds upper bound")]
    Interval {
        a: usize,
        b: usize,
        line: usize,
        column: usize,
    },
    #[error("predicate has no nonzero coefficient; write `true` or `false` instead")]
    ConstantPredicate,
    #[error("trace of length {len} too short: evaluating at t={t} needs {needed} states")]
    TraceTooShort { len: usize, t: usize, needed: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
}

/// Affine predicate `μ(x) = coeffs·x + offset`, satisfied when `μ(x) >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub coeffs: Vec<f64>,
    pub offset: f64,
}

impl Predicate {
    pub fn new(coeffs: Vec<f64>, offset: f64) -> Result<Self, StlError> {
        if coeffs.iter().all(|c| *c == 0.0) {
            return Err(StlError::ConstantPredicate);
        }
        Ok(Predicate { coeffs, offset })
    }

    /// `x[index] >= value`
    pub fn ge(dim: usize, index: usize, value: f64) -> Self {
        let mut coeffs = vec![0.0; dim];
        coeffs[index] = 1.0;
        Predicate {
            coeffs,
            offset: -value,
        }
    }

    /// `x[index] <= value`
    pub fn le(dim: usize, index: usize, value: f64) -> Self {
        let mut coeffs = vec![0.0; dim];
        coeffs[index] = -1.0;
        Predicate {
            coeffs,
            offset: value,
        }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .zip(x)
            .fold(self.offset, |acc, (c, v)| acc + c * v)
    }
}

/// Bounded-time STL abstract syntax tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Formula {
    True,
    Pred(Predicate),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Until(Box<Formula>, Box<Formula>, usize, usize),
    Eventually(Box<Formula>, usize, usize),
    Always(Box<Formula>, usize, usize),
}

impl Formula {
    pub fn pred(p: Predicate) -> Self {
        Formula::Pred(p)
    }

    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn eventually(f: Formula, a: usize, b: usize) -> Self {
        Formula::Eventually(Box::new(f), a, b)
    }

    pub fn always(f: Formula, a: usize, b: usize) -> Self {
        Formula::Always(Box::new(f), a, b)
    }

    pub fn until(lhs: Formula, rhs: Formula, a: usize, b: usize) -> Self {
        Formula::Until(Box::new(lhs), Box::new(rhs), a, b)
    }

    pub fn implies(lhs: Formula, rhs: Formula) -> Self {
        Formula::Or(vec![Formula::not(lhs), rhs])
    }

    /// Number of steps beyond the evaluation time the formula looks at.
    pub fn horizon(&self) -> usize {
        match self {
            Formula::True | Formula::Pred(_) => 0,
            Formula::Not(f) => f.horizon(),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().map(Formula::horizon).max().unwrap_or(0),
            Formula::Until(l, r, _, b) => b + l.horizon().max(r.horizon()),
            Formula::Eventually(f, _, b) | Formula::Always(f, _, b) => b + f.horizon(),
        }
    }

    /// Nesting depth; atoms have depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Formula::True | Formula::Pred(_) => 0,
            Formula::Not(f) | Formula::Eventually(f, ..) | Formula::Always(f, ..) => 1 + f.depth(),
            Formula::And(fs) | Formula::Or(fs) => 1 + fs.iter().map(Formula::depth).max().unwrap_or(0),
            Formula::Until(l, r, ..) => 1 + l.depth().max(r.depth()),
        }
    }

    /// Visits every predicate in the formula.
    pub fn predicates(&self) -> Vec<&Predicate> {
        let mut out = Vec::new();
        self.collect_predicates(&mut out);
        out
    }

    fn collect_predicates<'a>(&'a self, out: &mut Vec<&'a Predicate>) {
        match self {
            Formula::True => {}
            Formula::Pred(p) => out.push(p),
            Formula::Not(f) | Formula::Eventually(f, ..) | Formula::Always(f, ..) => {
                f.collect_predicates(out)
            }
            Formula::And(fs) | Formula::Or(fs) => {
                fs.iter().for_each(|f| f.collect_predicates(out))
            }
            Formula::Until(l, r, ..) => {
                l.collect_predicates(out);
                r.collect_predicates(out);
            }
        }
    }

    /// Checks that every predicate has `dim` coefficients and every interval is well formed.
    pub fn check(&self, dim: usize) -> Result<(), StlError> {
        for p in self.predicates() {
            if p.dim() != dim {
                return Err(StlError::Dimension {
                    expected: dim,
                    found: p.dim(),
                });
            }
        }
        Ok(())
    }

    /// Renders the formula with the given state names. The output re-parses to
    /// an identical tree.
    pub fn display<'a>(&'a self, names: &'a [String]) -> FormulaDisplay<'a> {
        FormulaDisplay {
            formula: self,
            names,
        }
    }
}

pub struct FormulaDisplay<'a> {
    formula: &'a Formula,
    names: &'a [String],
}

impl fmt::Display for FormulaDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_formula(f, self.formula, self.names)
    }
}

fn write_formula(f: &mut fmt::Formatter<'_>, phi: &Formula, names: &[String]) -> fmt::Result {
    match phi {
        Formula::True => write!(f, "true"),
        Formula::Pred(p) => write_predicate(f, p, names),
        Formula::Not(inner) => {
            write!(f, "!")?;
            write_formula(f, inner, names)
        }
        Formula::And(fs) | Formula::Or(fs) => {
            let op = if matches!(phi, Formula::And(_)) { " & " } else { " | " };
            write!(f, "(")?;
            for (i, sub) in fs.iter().enumerate() {
                if i > 0 {
                    write!(f, "{op}")?;
                }
                write_formula(f, sub, names)?;
            }
            write!(f, ")")
        }
        Formula::Until(l, r, a, b) => {
            write!(f, "(")?;
            write_formula(f, l, names)?;
            write!(f, " U[{a},{b}] ")?;
            write_formula(f, r, names)?;
            write!(f, ")")
        }
        Formula::Eventually(inner, a, b) => {
            write!(f, "F[{a},{b}] ")?;
            write_formula(f, inner, names)
        }
        Formula::Always(inner, a, b) => {
            write!(f, "G[{a},{b}] ")?;
            write_formula(f, inner, names)
        }
    }
}

fn write_predicate(f: &mut fmt::Formatter<'_>, p: &Predicate, names: &[String]) -> fmt::Result {
    write!(f, "(")?;
    let mut first = true;
    for (i, c) in p.coeffs.iter().enumerate() {
        if *c == 0.0 {
            continue;
        }
        let name = names.get(i).map(String::as_str).unwrap_or("?");
        let (sign, mag) = if c.is_sign_negative() { ("-", -c) } else { ("+", *c) };
        if first {
            if sign == "-" {
                write!(f, "-")?;
            }
        } else {
            write!(f, " {sign} ")?;
        }
        first = false;
        if mag == 1.0 {
            write!(f, "{name}")?;
        } else {
            write!(f, "{mag:?}*{name}")?;
        }
    }
    write!(f, " >= {:?})", -p.offset)
}

/// Finite discrete-time signal `x_0 … x_{len-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    states: Vec<Vec<f64>>,
    dim: usize,
}

impl Trace {
    pub fn new(states: Vec<Vec<f64>>) -> Result<Self, StlError> {
        let dim = states.first().map(Vec::len).unwrap_or(0);
        if dim == 0 {
            return Err(StlError::Dimension {
                expected: 1,
                found: 0,
            });
        }
        if let Some(bad) = states.iter().find(|s| s.len() != dim) {
            return Err(StlError::Dimension {
                expected: dim,
                found: bad.len(),
            });
        }
        Ok(Trace { states, dim })
    }

    /// One-dimensional trace from scalar samples.
    pub fn scalar(values: &[f64]) -> Self {
        Trace {
            states: values.iter().map(|v| vec![*v]).collect(),
            dim: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn state(&self, t: usize) -> &[f64] {
        &self.states[t]
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn into_states(self) -> Vec<Vec<f64>> {
        self.states
    }
}
