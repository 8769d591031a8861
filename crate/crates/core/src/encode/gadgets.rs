//! Big-M gadgets: sign bits, and/or over bits, min/max with selector
//! binaries, the ρ^K max gadget, effort terms and the implication row.

use super::{CopyId, EncodeError, Encoded, EncodingContext, Polarity};
use crate::dynamics::{tangent_points, EffortNorm};
use crate::milp::{LinExpr, Sense, VarId};

impl<'s> EncodingContext<'s> {
    /// Binary `z` tied to the sign of `v`: the upper side adds
    /// `−v ≤ M(1 − z) − ε` (so `z = 1 ⇒ v ≥ ε`), the lower side adds
    /// `v ≤ M z − ε` (so `z = 0 ⇒ v ≤ −ε`).
    pub(crate) fn sign_binary(&mut self, v: &Encoded, pol: Polarity, name: &str) -> Result<Encoded, EncodeError> {
        let eps = self.options.epsilon;
        if self.options.prune {
            let decided = match pol {
                Polarity::Exact if v.lo >= eps => Some(1.0),
                Polarity::Exact if v.hi <= -eps => Some(0.0),
                Polarity::Under if v.lo >= eps => Some(1.0),
                Polarity::Under if v.hi < eps => Some(0.0),
                Polarity::Over if v.hi <= -eps => Some(0.0),
                Polarity::Over if v.lo > -eps => Some(1.0),
                _ => None,
            };
            if let Some(c) = decided {
                return Ok(Encoded::constant(c));
            }
        }
        let z = self.model.add_binary(name)?;
        if pol.upper_side() {
            let m = self.big_m(-v.lo + eps, name)?;
            let row = -v.expr.clone() + LinExpr::term(z, m);
            self.model.add_constraint(&format!("{name}:up"), row, Sense::Le, m - eps)?;
        }
        if pol.lower_side() {
            let m = self.big_m(v.hi + eps, name)?;
            let row = v.expr.clone() - LinExpr::term(z, m);
            self.model.add_constraint(&format!("{name}:lo"), row, Sense::Le, -eps)?;
        }
        Ok(Encoded {
            expr: LinExpr::var(z),
            lo: 0.0,
            hi: 1.0,
        })
    }

    /// Conjunction of bits: `z ≤ z_i` (upper side) and `z ≥ Σ z_i − (n − 1)`
    /// (lower side).
    pub(crate) fn and_gadget(&mut self, zs: Vec<Encoded>, pol: Polarity, name: &str) -> Result<Encoded, EncodeError> {
        let mut zs = zs;
        if self.options.prune {
            if zs.iter().any(|z| z.hi <= 0.0) {
                return Ok(Encoded::constant(0.0));
            }
            zs.retain(|z| z.lo < 1.0);
            match zs.len() {
                0 => return Ok(Encoded::constant(1.0)),
                1 => return Ok(zs.pop().expect("one element")),
                _ => {}
            }
        }
        let z = self.model.add_continuous(name, 0.0, 1.0)?;
        let n = zs.len() as f64;
        if pol.upper_side() {
            for (i, zi) in zs.iter().enumerate() {
                self.model
                    .add_constraint(&format!("{name}:le{i}"), LinExpr::var(z) - zi.expr.clone(), Sense::Le, 0.0)?;
            }
        }
        if pol.lower_side() {
            let mut row = LinExpr::var(z);
            for zi in &zs {
                row.add_scaled(&zi.expr, -1.0);
            }
            self.model.add_constraint(&format!("{name}:sum"), row, Sense::Ge, -(n - 1.0))?;
        }
        Ok(Encoded {
            expr: LinExpr::var(z),
            lo: (zs.iter().map(|z| z.lo).sum::<f64>() - (n - 1.0)).max(0.0),
            hi: zs.iter().map(|z| z.hi).fold(1.0, f64::min),
        })
    }

    /// Disjunction of bits: `z ≥ z_i` (lower side) and `z ≤ Σ z_i` (upper side).
    pub(crate) fn or_gadget(&mut self, zs: Vec<Encoded>, pol: Polarity, name: &str) -> Result<Encoded, EncodeError> {
        let mut zs = zs;
        if self.options.prune {
            if zs.iter().any(|z| z.lo >= 1.0) {
                return Ok(Encoded::constant(1.0));
            }
            zs.retain(|z| z.hi > 0.0);
            match zs.len() {
                0 => return Ok(Encoded::constant(0.0)),
                1 => return Ok(zs.pop().expect("one element")),
                _ => {}
            }
        }
        let z = self.model.add_continuous(name, 0.0, 1.0)?;
        if pol.lower_side() {
            for (i, zi) in zs.iter().enumerate() {
                self.model
                    .add_constraint(&format!("{name}:ge{i}"), LinExpr::var(z) - zi.expr.clone(), Sense::Ge, 0.0)?;
            }
        }
        if pol.upper_side() {
            let mut row = LinExpr::var(z);
            for zi in &zs {
                row.add_scaled(&zi.expr, -1.0);
            }
            self.model.add_constraint(&format!("{name}:sum"), row, Sense::Le, 0.0)?;
        }
        Ok(Encoded {
            expr: LinExpr::var(z),
            lo: zs.iter().map(|z| z.lo).fold(0.0, f64::max),
            hi: zs.iter().map(|z| z.hi).sum::<f64>().min(1.0),
        })
    }

    /// `ρ = min r_i`: `ρ ≤ r_i` (upper side) and, with selectors `Σ s_i = 1`,
    /// `ρ ≥ r_i − M_i (1 − s_i)` (lower side).
    pub fn min_gadget(&mut self, rs: Vec<Encoded>, pol: Polarity, name: &str) -> Result<Encoded, EncodeError> {
        self.extremum(rs, pol, name, true)
    }

    /// `ρ = max r_i`: `ρ ≥ r_i` (lower side) and, with selectors `Σ s_i = 1`,
    /// `ρ ≤ r_i + M_i (1 − s_i)` (upper side).
    pub fn max_gadget(&mut self, rs: Vec<Encoded>, pol: Polarity, name: &str) -> Result<Encoded, EncodeError> {
        self.extremum(rs, pol, name, false)
    }

    fn extremum(&mut self, rs: Vec<Encoded>, pol: Polarity, name: &str, is_min: bool) -> Result<Encoded, EncodeError> {
        // Work on the min; a max is the min of the negated arguments.
        let sign = if is_min { 1.0 } else { -1.0 };
        let mut args: Vec<Encoded> = rs
            .into_iter()
            .map(|r| {
                if is_min {
                    r
                } else {
                    Encoded {
                        expr: -r.expr,
                        lo: -r.hi,
                        hi: -r.lo,
                    }
                }
            })
            .collect();
        let pol = if is_min { pol } else { pol.flip() };
        if self.options.prune && !args.is_empty() {
            let (best, min_hi) = args
                .iter()
                .enumerate()
                .map(|(i, a)| (i, a.hi))
                .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
            let mut i = 0;
            args.retain(|a| {
                let keep = i == best || a.lo < min_hi;
                i += 1;
                keep
            });
            if args.iter().all(Encoded::is_constant) {
                let v = args.iter().map(|a| a.lo).fold(f64::INFINITY, f64::min);
                return Ok(Encoded::constant(sign * v));
            }
        }
        let out = if args.len() == 1 {
            args.pop().expect("one element")
        } else {
            let lo = args.iter().map(|a| a.lo).fold(f64::INFINITY, f64::min);
            let hi = args.iter().map(|a| a.hi).fold(f64::INFINITY, f64::min);
            let (vlo, vhi) = if is_min { (lo, hi) } else { (-hi, -lo) };
            let rho = self.model.add_continuous(name, vlo, vhi)?;
            let r = LinExpr::term(rho, sign);
            if pol.upper_side() {
                for (i, a) in args.iter().enumerate() {
                    self.model
                        .add_constraint(&format!("{name}:b{i}"), r.clone() - a.expr.clone(), Sense::Le, 0.0)?;
                }
            }
            if pol.lower_side() {
                let mut pick = LinExpr::default();
                for (i, a) in args.iter().enumerate() {
                    let s = self.model.add_binary(&format!("{name}:s{i}"))?;
                    pick.add_term(s, 1.0);
                    let m = self.big_m(a.hi - lo, name)?;
                    // r − a_i − M s_i ≥ −M
                    let row = r.clone() - a.expr.clone() - LinExpr::term(s, m);
                    self.model.add_constraint(&format!("{name}:sel{i}"), row, Sense::Ge, -m)?;
                }
                self.model.add_constraint(&format!("{name}:one"), pick, Sense::Eq, 1.0)?;
            }
            Encoded {
                expr: LinExpr::var(rho) * sign,
                lo,
                hi,
            }
        };
        Ok(if is_min {
            out
        } else {
            Encoded {
                expr: -out.expr,
                lo: -out.hi,
                hi: -out.lo,
            }
        })
    }

    fn encoded_of(&self, expr: LinExpr) -> Encoded {
        let expr = expr.normalized();
        let (lo, hi) = expr.bounds(&self.model);
        Encoded { expr, lo, hi }
    }

    /// `min` of arbitrary affine arguments.
    pub fn encode_min(&mut self, args: Vec<LinExpr>, pol: Polarity, name: &str) -> Result<Encoded, EncodeError> {
        let rs = args.into_iter().map(|a| self.encoded_of(a)).collect();
        self.min_gadget(rs, pol, name)
    }

    /// `max` of arbitrary affine arguments.
    pub fn encode_max(&mut self, args: Vec<LinExpr>, pol: Polarity, name: &str) -> Result<Encoded, EncodeError> {
        let rs = args.into_iter().map(|a| self.encoded_of(a)).collect();
        self.max_gadget(rs, pol, name)
    }

    /// `ρ^K = max(k − J_S, −ρ^F)` with selector `b`:
    /// `ρ^K ≥ k − J_S`, `ρ^K ≥ −ρ^F`, `ρ^K ≤ k − J_S + M(1 − b)`, `ρ^K ≤ −ρ^F + M b`.
    pub fn encode_rho_k(&mut self, k: &LinExpr, j_s: &LinExpr, rho_f: &LinExpr, name: &str) -> Result<VarId, EncodeError> {
        let a = self.encoded_of(k.clone() - j_s.clone());
        let c = self.encoded_of(-rho_f.clone());
        let (lo, hi) = (a.lo.max(c.lo), a.hi.max(c.hi));
        let rho_k = self.model.add_continuous(&format!("rhoK[{name}]"), lo, hi)?;
        let b = self.model.add_binary(&format!("b[{name}]"))?;
        let m = self.big_m((hi - a.lo).max(hi - c.lo), name)?;
        let r = LinExpr::var(rho_k);
        self.model
            .add_constraint(&format!("rhoK[{name}]:cost"), r.clone() - a.expr.clone(), Sense::Ge, 0.0)?;
        self.model
            .add_constraint(&format!("rhoK[{name}]:fail"), r.clone() - c.expr.clone(), Sense::Ge, 0.0)?;
        self.model.add_constraint(
            &format!("rhoK[{name}]:cost_sel"),
            r.clone() - a.expr + LinExpr::term(b, m),
            Sense::Le,
            m,
        )?;
        self.model.add_constraint(
            &format!("rhoK[{name}]:fail_sel"),
            r - c.expr - LinExpr::term(b, m),
            Sense::Le,
            0.0,
        )?;
        Ok(rho_k)
    }

    /// `Σ_t Σ_j norm(u_tj)` before weighting: tangent lines of `u²` (plus the
    /// tangent at zero) or `|u|`, one epigraph variable per component.
    pub fn encode_effort(&mut self, u_leader: &[Vec<LinExpr>]) -> Result<LinExpr, EncodeError> {
        let bounds = self.scenario.leader_bounds.clone();
        let norm = self.scenario.cost.effort_norm;
        let mut total = LinExpr::default();
        for (t, u) in u_leader.iter().enumerate() {
            for (j, uj) in u.iter().enumerate() {
                let (lo, hi) = (bounds.lower[j], bounds.upper[j]);
                let cap = lo.abs().max(hi.abs());
                if uj.is_constant() {
                    let v = uj.constant;
                    total.constant += match norm {
                        EffortNorm::L1 => v.abs(),
                        EffortNorm::SquaredPwl { segments } => crate::dynamics::pwl_square(v, lo, hi, segments),
                    };
                    continue;
                }
                let name = format!("eff[{t}][{j}]");
                let name = self.fresh(&name);
                match norm {
                    EffortNorm::L1 => {
                        let e = self.model.add_continuous(&name, 0.0, cap)?;
                        self.model
                            .add_constraint(&format!("{name}:pos"), LinExpr::var(e) - uj.clone(), Sense::Ge, 0.0)?;
                        self.model
                            .add_constraint(&format!("{name}:neg"), LinExpr::var(e) + uj.clone(), Sense::Ge, 0.0)?;
                        total.add_term(e, 1.0);
                    }
                    EffortNorm::SquaredPwl { segments } => {
                        let e = self.model.add_continuous(&name, 0.0, cap * cap)?;
                        for (i, a) in tangent_points(lo, hi, segments).into_iter().enumerate() {
                            if a == 0.0 {
                                continue;
                            }
                            // e ≥ 2a u − a²
                            let row = LinExpr::var(e) - uj.clone() * (2.0 * a);
                            self.model.add_constraint(&format!("{name}:t{i}"), row, Sense::Ge, -a * a)?;
                        }
                        total.add_term(e, 1.0);
                    }
                }
            }
        }
        Ok(total)
    }

    /// `J_S = w · effort − ρ^L` on the given copy (the robustness term only
    /// when the cost includes it). `pol` refers to `J_S`, so `ρ^L` is encoded
    /// with the flipped polarity.
    pub fn encode_cost(&mut self, copy: CopyId, effort: &LinExpr, pol: Polarity) -> Result<Encoded, EncodeError> {
        let w = self.scenario.cost.effort_weight;
        let mut j = effort.clone() * w;
        if self.scenario.cost.include_leader_robustness {
            let phi = self.scenario.phi_leader.clone();
            let rho = self.encode_robustness(copy, &phi, 0, pol.flip())?;
            j.add_scaled(&rho.expr, -1.0);
        }
        Ok(self.encoded_of(j))
    }

    /// `z_L ≥ z_F`.
    pub fn encode_implication(&mut self, z_l: &LinExpr, z_f: &LinExpr, name: &str) -> Result<(), EncodeError> {
        self.model
            .add_constraint(&format!("impl[{name}]"), z_l.clone() - z_f.clone(), Sense::Ge, 0.0)?;
        Ok(())
    }
}
