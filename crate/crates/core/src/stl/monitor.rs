use super::{Formula, StlError, Trace};

fn check_length(phi: &Formula, trace: &Trace, t: usize) -> Result<(), StlError> {
    let needed = t + phi.horizon() + 1;
    if trace.len() < needed {
        return Err(StlError::TraceTooShort {
            len: trace.len(),
            t,
            needed,
        });
    }
    if let Some(p) = phi.predicates().into_iter().find(|p| p.dim() != trace.dim()) {
        return Err(StlError::Dimension {
            expected: trace.dim(),
            found: p.dim(),
        });
    }
    Ok(())
}

/// Robustness of `phi` at every time where it is defined, i.e. for
/// `t = 0 ..= len - 1 - horizon(phi)`.
pub fn robustness_signal(phi: &Formula, trace: &Trace) -> Result<Vec<f64>, StlError> {
    check_length(phi, trace, 0)?;
    Ok(rob(phi, trace))
}

/// Boolean satisfaction of `phi` at every time where it is defined.
pub fn satisfaction_signal(phi: &Formula, trace: &Trace) -> Result<Vec<bool>, StlError> {
    check_length(phi, trace, 0)?;
    Ok(sat(phi, trace))
}

/// Space robustness `ρ(phi, trace, t)`.
pub fn robustness(phi: &Formula, trace: &Trace, t: usize) -> Result<f64, StlError> {
    check_length(phi, trace, t)?;
    Ok(rob(phi, trace)[t])
}

/// `(trace, t) ⊨ phi`, with predicates satisfied when `μ(x_t) >= 0`.
pub fn eval_bool(phi: &Formula, trace: &Trace, t: usize) -> Result<bool, StlError> {
    check_length(phi, trace, t)?;
    Ok(sat(phi, trace)[t])
}

fn defined_len(phi: &Formula, trace: &Trace) -> usize {
    trace.len() - phi.horizon()
}

fn rob(phi: &Formula, trace: &Trace) -> Vec<f64> {
    let len = defined_len(phi, trace);
    match phi {
        Formula::True => vec![f64::INFINITY; len],
        Formula::Pred(p) => (0..len).map(|t| p.eval(trace.state(t))).collect(),
        Formula::Not(f) => rob(f, trace).into_iter().take(len).map(|v| -v).collect(),
        Formula::And(fs) => combine(fs, trace, len, f64::INFINITY, f64::min),
        Formula::Or(fs) => combine(fs, trace, len, f64::NEG_INFINITY, f64::max),
        Formula::Until(l, r, a, b) => {
            let (rl, rr) = (rob(l, trace), rob(r, trace));
            (0..len)
                .map(|t| {
                    let mut best = f64::NEG_INFINITY;
                    let mut run = f64::INFINITY;
                    for tp in t..=t + b {
                        run = run.min(rl[tp]);
                        if tp >= t + a {
                            best = best.max(rr[tp].min(run));
                        }
                    }
                    best
                })
                .collect()
        }
        Formula::Eventually(f, a, b) => window(&rob(f, trace), len, *a, *b, f64::NEG_INFINITY, f64::max),
        Formula::Always(f, a, b) => window(&rob(f, trace), len, *a, *b, f64::INFINITY, f64::min),
    }
}

fn combine(
    fs: &[Formula],
    trace: &Trace,
    len: usize,
    init: f64,
    op: fn(f64, f64) -> f64,
) -> Vec<f64> {
    let mut out = vec![init; len];
    for f in fs {
        for (o, v) in out.iter_mut().zip(rob(f, trace)) {
            *o = op(*o, v);
        }
    }
    out
}

fn window(sig: &[f64], len: usize, a: usize, b: usize, init: f64, op: fn(f64, f64) -> f64) -> Vec<f64> {
    (0..len)
        .map(|t| sig[t + a..=t + b].iter().fold(init, |acc, v| op(acc, *v)))
        .collect()
}

fn sat(phi: &Formula, trace: &Trace) -> Vec<bool> {
    let len = defined_len(phi, trace);
    match phi {
        Formula::True => vec![true; len],
        Formula::Pred(p) => (0..len).map(|t| p.eval(trace.state(t)) >= 0.0).collect(),
        Formula::Not(f) => sat(f, trace).into_iter().take(len).map(|v| !v).collect(),
        Formula::And(fs) => {
            let mut out = vec![true; len];
            for f in fs {
                out.iter_mut().zip(sat(f, trace)).for_each(|(o, v)| *o &= v);
            }
            out
        }
        Formula::Or(fs) => {
            let mut out = vec![false; len];
            for f in fs {
                out.iter_mut().zip(sat(f, trace)).for_each(|(o, v)| *o |= v);
            }
            out
        }
        Formula::Until(l, r, a, b) => {
            let (sl, sr) = (sat(l, trace), sat(r, trace));
            (0..len)
                .map(|t| {
                    (t + a..=t + b).any(|tp| sr[tp] && (t..=tp).all(|tpp| sl[tpp]))
                })
                .collect()
        }
        Formula::Eventually(f, a, b) => {
            let s = sat(f, trace);
            (0..len).map(|t| s[t + a..=t + b].iter().any(|v| *v)).collect()
        }
        Formula::Always(f, a, b) => {
            let s = sat(f, trace);
            (0..len).map(|t| s[t + a..=t + b].iter().all(|v| *v)).collect()
        }
    }
}
