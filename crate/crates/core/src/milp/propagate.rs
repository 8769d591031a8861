//! Activity-based bound propagation used at every branch-and-bound node.
//!
//! Only deductions about binaries leave this module; tightened continuous
//! bounds are kept internal so the LP sees the model's own boxes. Each
//! deduction carries a safety margin proportional to the magnitude of the
//! row, so rounding in big-M rows never removes a feasible point.

use super::model::{MilpModel, Sense, VarKind};

const PASSES: usize = 8;
const REL_EPS: f64 = 1e-9;
const ABS_EPS: f64 = 1e-6;

/// Rows in `Σ a_j x_j ≤ b` form.
pub(crate) struct RowSet {
    rows: Vec<(Vec<(usize, f64)>, f64)>,
}

impl RowSet {
    pub fn new(model: &MilpModel) -> Self {
        let mut rows = Vec::new();
        for c in &model.constraints {
            let terms: Vec<(usize, f64)> = c.terms.iter().map(|(v, a)| (v.0, *a)).collect();
            let neg = || terms.iter().map(|(j, a)| (*j, -a)).collect::<Vec<_>>();
            match c.sense {
                Sense::Le => rows.push((terms.clone(), c.rhs)),
                Sense::Ge => rows.push((neg(), -c.rhs)),
                Sense::Eq => {
                    rows.push((terms.clone(), c.rhs));
                    rows.push((neg(), -c.rhs));
                }
            }
        }
        RowSet { rows }
    }
}

/// Binary fixings implied by `fixings`, or `None` when the node is infeasible.
pub(crate) fn propagate(model: &MilpModel, rows: &RowSet, fixings: &[(usize, f64)]) -> Option<Vec<(usize, f64)>> {
    let mut lb: Vec<f64> = model.variables.iter().map(|v| v.lower).collect();
    let mut ub: Vec<f64> = model.variables.iter().map(|v| v.upper).collect();
    for &(j, v) in fixings {
        lb[j] = v;
        ub[j] = v;
    }
    let is_bin = |j: usize| model.variables[j].kind == VarKind::Binary;
    for _ in 0..PASSES {
        let mut changed = false;
        for (terms, rhs) in &rows.rows {
            // minimum activity, with infinite contributions counted apart
            let mut min_act = 0.0;
            let mut n_inf = 0usize;
            let mut inf_var = usize::MAX;
            let mut scale = rhs.abs();
            for &(j, a) in terms {
                let b = if a > 0.0 { lb[j] } else { ub[j] };
                if b.is_finite() {
                    min_act += a * b;
                    scale += (a * b).abs();
                } else {
                    n_inf += 1;
                    inf_var = j;
                }
            }
            let slack_eps = REL_EPS * scale + ABS_EPS;
            if n_inf == 0 && min_act > rhs + slack_eps {
                return None;
            }
            if n_inf > 1 {
                continue;
            }
            for &(j, a) in terms {
                if n_inf == 1 && j != inf_var {
                    continue;
                }
                let own = if a > 0.0 { lb[j] } else { ub[j] };
                let rest = if n_inf == 1 { min_act } else { min_act - a * own };
                // a·x_j ≤ rhs − rest
                let limit = (rhs - rest) / a;
                let margin = slack_eps / a.abs();
                if a > 0.0 {
                    let new_ub = limit + margin;
                    if new_ub < ub[j] - ABS_EPS * (1.0 + ub[j].abs().min(1e6)) {
                        if is_bin(j) {
                            if new_ub < 1.0 {
                                if lb[j] > 0.5 {
                                    return None;
                                }
                                changed |= ub[j] != 0.0;
                                ub[j] = 0.0;
                            }
                        } else {
                            ub[j] = new_ub;
                            changed = true;
                        }
                    }
                } else {
                    let new_lb = limit - margin;
                    if new_lb > lb[j] + ABS_EPS * (1.0 + lb[j].abs().min(1e6)) {
                        if is_bin(j) {
                            if new_lb > 0.0 {
                                if ub[j] < 0.5 {
                                    return None;
                                }
                                changed |= lb[j] != 1.0;
                                lb[j] = 1.0;
                            }
                        } else {
                            lb[j] = new_lb;
                            changed = true;
                        }
                    }
                }
                if lb[j] > ub[j] + slack_eps.max(ABS_EPS) {
                    return None;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let fixed: Vec<(usize, f64)> = (0..lb.len())
        .filter(|&j| is_bin(j) && lb[j] == ub[j] && !fixings.iter().any(|(f, _)| *f == j))
        .map(|j| (j, lb[j]))
        .collect();
    Some(fixed)
}
