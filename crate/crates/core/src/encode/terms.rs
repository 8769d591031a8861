//! Time-unrolled min/max terms over signed predicate literals.
//!
//! Unrolling pushes negation to the leaves (negated until becomes a release
//! pattern), flattens nested min/max and interns structurally equal terms, so
//! every distinct subterm is encoded at most once per trajectory copy.

use std::collections::HashMap;

use crate::stl::{Formula, Predicate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TermId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TermNode {
    /// `μ_pred(x_t)` when `neg` is false, `−μ_pred(x_t)` otherwise.
    Lit { pred: usize, t: usize, neg: bool },
    /// `+∞` (true) or `−∞` (false).
    Top,
    Bottom,
    Min(Vec<TermId>),
    Max(Vec<TermId>),
}

#[derive(Debug, Default, Clone)]
pub struct TermArena {
    nodes: Vec<TermNode>,
    index: HashMap<TermNode, TermId>,
    predicates: Vec<Predicate>,
    pred_index: HashMap<(Vec<u64>, u64), usize>,
}

impl TermArena {
    pub fn node(&self, id: TermId) -> &TermNode {
        &self.nodes[id.0]
    }

    pub fn predicate(&self, idx: usize) -> &Predicate {
        &self.predicates[idx]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    fn intern(&mut self, node: TermNode) -> TermId {
        if let Some(id) = self.index.get(&node) {
            return *id;
        }
        let id = TermId(self.nodes.len());
        self.nodes.push(node.clone());
        self.index.insert(node, id);
        id
    }

    fn pred_id(&mut self, p: &Predicate) -> usize {
        let key = (p.coeffs.iter().map(|c| c.to_bits()).collect(), p.offset.to_bits());
        if let Some(i) = self.pred_index.get(&key) {
            return *i;
        }
        self.predicates.push(p.clone());
        self.pred_index.insert(key, self.predicates.len() - 1);
        self.predicates.len() - 1
    }

    /// `min` (when `is_min`) over `children`, flattened and deduplicated.
    pub fn combine(&mut self, is_min: bool, children: Vec<TermId>) -> TermId {
        let (absorbing, neutral) = if is_min {
            (TermNode::Bottom, TermNode::Top)
        } else {
            (TermNode::Top, TermNode::Bottom)
        };
        let mut flat = Vec::with_capacity(children.len());
        for c in children {
            match self.node(c) {
                n if *n == absorbing => return self.intern(absorbing),
                n if *n == neutral => {}
                TermNode::Min(inner) if is_min => flat.extend(inner.iter().copied()),
                TermNode::Max(inner) if !is_min => flat.extend(inner.iter().copied()),
                _ => flat.push(c),
            }
        }
        flat.sort_unstable();
        flat.dedup();
        match flat.len() {
            0 => self.intern(neutral),
            1 => flat[0],
            _ => self.intern(if is_min { TermNode::Min(flat) } else { TermNode::Max(flat) }),
        }
    }

    /// Robustness term of `phi` at time `t`, negated when `neg` is set.
    pub fn unroll(&mut self, phi: &Formula, t: usize, neg: bool) -> TermId {
        match phi {
            Formula::True => self.intern(if neg { TermNode::Bottom } else { TermNode::Top }),
            Formula::Pred(p) => {
                let pred = self.pred_id(p);
                self.intern(TermNode::Lit { pred, t, neg })
            }
            Formula::Not(f) => self.unroll(f, t, !neg),
            Formula::And(fs) | Formula::Or(fs) => {
                let kids = fs.iter().map(|f| self.unroll(f, t, neg)).collect();
                let is_min = matches!(phi, Formula::And(_)) != neg;
                self.combine(is_min, kids)
            }
            Formula::Eventually(f, a, b) | Formula::Always(f, a, b) => {
                let kids = (t + a..=t + b).map(|tp| self.unroll(f, tp, neg)).collect();
                let is_min = matches!(phi, Formula::Always(..)) != neg;
                self.combine(is_min, kids)
            }
            Formula::Until(l, r, a, b) => {
                // max over t' of min(r@t', min over t''∈[t,t'] of l@t''); the
                // negation swaps every min and max.
                let mut outer = Vec::new();
                for tp in t + a..=t + b {
                    let mut inner = vec![self.unroll(r, tp, neg)];
                    inner.extend((t..=tp).map(|tpp| self.unroll(l, tpp, neg)));
                    outer.push(self.combine(!neg, inner));
                }
                self.combine(neg, outer)
            }
        }
    }

    /// Evaluates a term on concrete states (robustness semantics).
    pub fn eval(&self, id: TermId, states: &[Vec<f64>]) -> f64 {
        match self.node(id) {
            TermNode::Lit { pred, t, neg } => {
                let v = self.predicates[*pred].eval(&states[*t]);
                if *neg {
                    -v
                } else {
                    v
                }
            }
            TermNode::Top => f64::INFINITY,
            TermNode::Bottom => f64::NEG_INFINITY,
            TermNode::Min(ks) => ks.iter().map(|k| self.eval(*k, states)).fold(f64::INFINITY, f64::min),
            TermNode::Max(ks) => ks.iter().map(|k| self.eval(*k, states)).fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Number of distinct subterms reachable from `root`.
    pub fn size(&self, root: TermId) -> usize {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            if seen.insert(id) {
                if let TermNode::Min(ks) | TermNode::Max(ks) = self.node(id) {
                    stack.extend(ks.iter().copied());
                }
            }
        }
        seen.len()
    }
}
