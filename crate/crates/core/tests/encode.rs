use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use stackstl::dynamics::{AffineSystem, BoundsBox, CostSpec, EffortNorm, Scenario};
use stackstl::encode::{EncodeOptions, EncodingContext, Polarity, SatEncoding, StateEncoding};
use stackstl::milp::{solve_milp, LinExpr, MilpModel, ObjSense, Sense, SolveStatus, SolverLimits};
use stackstl::stl::{eval_bool, robustness, Formula, Predicate, Trace};

const TOL: f64 = 1e-6;

/// Single integrator with identity dynamics of the given width.
fn scenario(dim: usize, horizon: usize) -> Scenario {
    let eye: Vec<Vec<f64>> = (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    Scenario {
        name: "test".into(),
        state_names: (0..dim).map(|i| format!("x{i}")).collect(),
        system: AffineSystem::new(eye.clone(), eye.clone(), eye, None).unwrap(),
        x0: vec![0.0; dim],
        horizon,
        state_bounds: BoundsBox::symmetric(dim, 10.0),
        leader_bounds: BoundsBox::symmetric(dim, 3.0),
        follower_bounds: BoundsBox::symmetric(dim, 1.0),
        phi_leader: Formula::True,
        phi_follower: Formula::True,
        cost: CostSpec {
            effort_weight: 1.0,
            effort_norm: EffortNorm::SquaredPwl { segments: 6 },
            include_leader_robustness: false,
        },
        noninterfering_input: None,
        big_m: 1e6,
        epsilon: 1e-4,
    }
}

fn with_rows(model: &MilpModel, rows: &[(LinExpr, f64)]) -> MilpModel {
    let mut m = model.clone();
    for (e, v) in rows {
        m.add_constraint("", e.clone(), Sense::Eq, *v).unwrap();
    }
    m
}

fn feasible(model: &MilpModel, rows: &[(LinExpr, f64)]) -> bool {
    let m = with_rows(model, rows);
    let r = solve_milp(&m, &SolverLimits::default());
    assert!(
        matches!(r.status, SolveStatus::Optimal | SolveStatus::Infeasible),
        "unexpected status {:?}",
        r.status
    );
    r.status == SolveStatus::Optimal
}

/// Minimum and maximum of `e` over the model.
fn range_of(model: &MilpModel, e: &LinExpr) -> (f64, f64) {
    let mut out = [0.0; 2];
    for (i, sense) in [ObjSense::Minimize, ObjSense::Maximize].into_iter().enumerate() {
        let mut m = model.clone();
        m.set_objective(sense, e.clone()).unwrap();
        let r = solve_milp(&m, &SolverLimits::default());
        assert_eq!(r.status, SolveStatus::Optimal);
        out[i] = r.objective;
    }
    (out[0], out[1])
}

fn x_ge(dim: usize, i: usize, c: f64) -> Formula {
    Formula::Pred(Predicate::ge(dim, i, c))
}

#[test]
fn predicate_on_positive_state_forces_one() {
    let s = scenario(1, 2);
    let mut ctx = EncodingContext::new(&s, EncodeOptions::plain(&s)).unwrap();
    let copy = ctx.add_fixed_trace("fix", &Trace::scalar(&[5.0]), true).unwrap();
    let z = ctx.encode_predicate(copy, &Predicate::ge(1, 0, 0.0), 0).unwrap();
    assert!(feasible(&ctx.model, &[(z.clone(), 1.0)]));
    assert!(!feasible(&ctx.model, &[(z, 0.0)]));
    assert_eq!(ctx.model.constraints.len(), 2);
}

#[test]
fn predicate_on_negative_state_forces_zero() {
    let s = scenario(1, 2);
    let mut ctx = EncodingContext::new(&s, EncodeOptions::plain(&s)).unwrap();
    let copy = ctx.add_fixed_trace("fix", &Trace::scalar(&[-5.0]), true).unwrap();
    let z = ctx.encode_predicate(copy, &Predicate::ge(1, 0, 0.0), 0).unwrap();
    assert!(!feasible(&ctx.model, &[(z.clone(), 1.0)]));
    assert!(feasible(&ctx.model, &[(z, 0.0)]));
}

#[test]
fn predicate_inside_the_margin_band_is_infeasible() {
    // Both predicate constraints exclude |μ| < ε.
    let s = scenario(1, 2);
    let mut ctx = EncodingContext::new(&s, EncodeOptions::plain(&s)).unwrap();
    let copy = ctx.add_fixed_trace("fix", &Trace::scalar(&[0.0]), true).unwrap();
    ctx.encode_predicate(copy, &Predicate::ge(1, 0, 0.0), 0).unwrap();
    assert!(!feasible(&ctx.model, &[]));
}

#[test]
fn big_m_below_reachable_predicate_range_is_rejected() {
    let mut s = scenario(1, 2);
    s.phi_leader = x_ge(1, 0, 0.0);
    let mut opts = EncodeOptions::plain(&s);
    opts.big_m = 5.0;
    assert!(matches!(
        EncodingContext::new(&s, opts),
        Err(stackstl::encode::EncodeError::BigMTooSmall { .. })
    ));
}

#[test]
fn conjunction_with_a_false_argument_is_false() {
    let s = scenario(1, 2);
    let mut ctx = EncodingContext::new(&s, EncodeOptions::plain(&s)).unwrap();
    let copy = ctx.add_fixed_trace("fix", &Trace::scalar(&[1.0]), true).unwrap();
    let phi = Formula::And(vec![x_ge(1, 0, 0.5), x_ge(1, 0, -0.5), x_ge(1, 0, 1.5)]);
    let z = ctx.encode_bool(copy, &phi, 0, Polarity::Exact).unwrap();
    assert!(feasible(&ctx.model, &[(z.clone(), 0.0)]));
    assert!(!feasible(&ctx.model, &[(z, 1.0)]));
}

#[test]
fn eventually_sees_the_last_step() {
    let s = scenario(1, 3);
    let mut ctx = EncodingContext::new(&s, EncodeOptions::plain(&s)).unwrap();
    let copy = ctx
        .add_fixed_trace("fix", &Trace::scalar(&[-1.0, -1.0, 1.0]), true)
        .unwrap();
    let phi = Formula::eventually(x_ge(1, 0, 0.0), 0, 2);
    let z = ctx.encode_bool(copy, &phi, 0, Polarity::Exact).unwrap();
    assert!(feasible(&ctx.model, &[(z.clone(), 1.0)]));
    assert!(!feasible(&ctx.model, &[(z, 0.0)]));
}

#[test]
fn horizon_overflow_is_an_error() {
    let s = scenario(1, 3);
    let mut ctx = EncodingContext::new(&s, EncodeOptions::plain(&s)).unwrap();
    let copy = ctx.add_fixed_trace("fix", &Trace::scalar(&[0.0, 1.0]), true).unwrap();
    let phi = Formula::eventually(x_ge(1, 0, 0.0), 0, 2);
    assert!(ctx.encode_bool(copy, &phi, 0, Polarity::Exact).is_err());
}

#[test]
fn robustness_of_a_single_predicate() {
    let s = scenario(1, 2);
    let mut ctx = EncodingContext::new(&s, EncodeOptions::plain(&s)).unwrap();
    let copy = ctx.add_fixed_trace("fix", &Trace::scalar(&[9.0]), true).unwrap();
    let rho = ctx.encode_robustness(copy, &x_ge(1, 0, 8.0), 0, Polarity::Exact).unwrap();
    let (lo, hi) = range_of(&ctx.model, &rho.expr);
    assert!((lo - 1.0).abs() < TOL && (hi - 1.0).abs() < TOL);
}

#[test]
fn min_gadget_over_constants() {
    let s = scenario(1, 2);
    let mut ctx = EncodingContext::new(&s, EncodeOptions::plain(&s)).unwrap();
    let args = [3.0, -2.0, 5.0].map(LinExpr::constant).to_vec();
    let rho = ctx.encode_min(args, Polarity::Exact, "m").unwrap();
    let (lo, hi) = range_of(&ctx.model, &rho.expr);
    assert!((lo + 2.0).abs() < TOL && (hi + 2.0).abs() < TOL);
}

fn rho_k_range(cost_gap: f64, neg_rho_f: f64) -> (f64, f64) {
    let s = scenario(1, 2);
    let mut ctx = EncodingContext::new(&s, EncodeOptions::plain(&s)).unwrap();
    let k = ctx.model.add_continuous("k", cost_gap, cost_gap).unwrap();
    let rf = ctx.model.add_continuous("rhoF", -neg_rho_f, -neg_rho_f).unwrap();
    let before = ctx.model.constraints.len();
    let rk = ctx
        .encode_rho_k(&LinExpr::var(k), &LinExpr::constant(0.0), &LinExpr::var(rf), "cand=0")
        .unwrap();
    assert_eq!(ctx.model.constraints.len() - before, 4);
    assert_eq!(ctx.model.num_binaries(), 1);
    range_of(&ctx.model, &LinExpr::var(rk))
}

#[test]
fn rho_k_takes_the_larger_argument() {
    let (lo, hi) = rho_k_range(2.0, -1.0);
    assert!((lo - 2.0).abs() < TOL && (hi - 2.0).abs() < TOL);
    let (lo, hi) = rho_k_range(-3.0, 0.5);
    assert!((lo - 0.5).abs() < TOL && (hi - 0.5).abs() < TOL);
}

#[test]
fn rho_k_matches_max_on_random_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let a: f64 = rng.gen_range(-20.0..20.0);
        let b: f64 = rng.gen_range(-20.0..20.0);
        let (lo, hi) = rho_k_range(a, b);
        let expected = a.max(b);
        assert!((lo - expected).abs() < TOL && (hi - expected).abs() < TOL, "{a} {b}");
    }
}

fn effort_value(u: f64, segments: usize) -> f64 {
    let mut s = scenario(1, 1);
    s.cost.effort_norm = EffortNorm::SquaredPwl { segments };
    let mut ctx = EncodingContext::new(&s, EncodeOptions::plain(&s)).unwrap();
    let v = ctx.model.add_continuous("u", u, u).unwrap();
    let e = ctx.encode_effort(&[vec![LinExpr::var(v)]]).unwrap();
    range_of(&ctx.model, &e).0
}

#[test]
fn effort_is_exact_at_tangent_points_and_below_the_square() {
    assert!(effort_value(0.0, 6).abs() < TOL);
    assert!(effort_value(0.0, 5).abs() < TOL);
    assert!((effort_value(3.0, 6) - 9.0).abs() < TOL);
    for k in 0..=24 {
        let u = -3.0 + 0.25 * k as f64;
        let e = effort_value(u, 6);
        assert!(e <= u * u + TOL);
        assert!(u * u - e <= 0.25 + TOL, "gap at {u}");
    }
}

#[test]
fn implication_forces_leader_bit() {
    let s = scenario(1, 2);
    let mut ctx = EncodingContext::new(&s, EncodeOptions::plain(&s)).unwrap();
    let zl = ctx.model.add_binary("z_L").unwrap();
    let zf = ctx.model.add_binary("z_F").unwrap();
    ctx.encode_implication(&LinExpr::var(zl), &LinExpr::var(zf), "cand=0").unwrap();
    assert!(!feasible(&ctx.model, &[(LinExpr::var(zf), 1.0), (LinExpr::var(zl), 0.0)]));
    assert!(feasible(&ctx.model, &[(LinExpr::var(zf), 0.0), (LinExpr::var(zl), 0.0)]));
    assert!(feasible(&ctx.model, &[(LinExpr::var(zf), 0.0), (LinExpr::var(zl), 1.0)]));
}

/// Random formula over two states with half-integer thresholds so that
/// integer-grid traces never land inside the margin band.
fn random_formula(rng: &mut ChaCha8Rng, depth: usize) -> Formula {
    let leaf = |rng: &mut ChaCha8Rng| {
        let i = rng.gen_range(0..2);
        let c = rng.gen_range(-3..3) as f64 + 0.5;
        if rng.gen_bool(0.5) {
            Formula::Pred(Predicate::ge(2, i, c))
        } else {
            Formula::Pred(Predicate::le(2, i, c))
        }
    };
    if depth == 0 {
        return leaf(rng);
    }
    match rng.gen_range(0..7) {
        0 => leaf(rng),
        1 => Formula::not(random_formula(rng, depth - 1)),
        2 => Formula::And(vec![random_formula(rng, depth - 1), random_formula(rng, depth - 1)]),
        3 => Formula::Or(vec![random_formula(rng, depth - 1), random_formula(rng, depth - 1)]),
        4 => {
            let a = rng.gen_range(0..2);
            Formula::eventually(random_formula(rng, depth - 1), a, a + rng.gen_range(0..2))
        }
        5 => {
            let a = rng.gen_range(0..2);
            Formula::always(random_formula(rng, depth - 1), a, a + rng.gen_range(0..2))
        }
        _ => {
            let a = rng.gen_range(0..2);
            Formula::until(random_formula(rng, depth - 1), random_formula(rng, depth - 1), a, a + 1)
        }
    }
}

fn random_trace(rng: &mut ChaCha8Rng, len: usize) -> Trace {
    Trace::new(
        (0..len)
            .map(|_| vec![rng.gen_range(-4..=4) as f64, rng.gen_range(-4..=4) as f64])
            .collect(),
    )
    .unwrap()
}

#[test]
fn robustness_encoding_matches_the_monitor() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cases: Vec<(Formula, Trace, bool)> = (0..200)
        .map(|i| {
            let phi = random_formula(&mut rng, 3);
            let trace = random_trace(&mut rng, phi.horizon() + 1);
            (phi, trace, i % 2 == 0)
        })
        .collect();
    cases.par_iter().for_each(|(phi, trace, plain)| {
        let s = scenario(2, trace.len().max(2));
        let opts = if *plain {
            EncodeOptions::plain(&s)
        } else {
            EncodeOptions::for_scenario(&s)
        };
        let expected = robustness(phi, trace, 0).unwrap();
        for pol in [Polarity::Exact, Polarity::Under, Polarity::Over] {
            let mut ctx = EncodingContext::new(&s, opts).unwrap();
            let copy = ctx.add_fixed_trace("fix", trace, true).unwrap();
            let rho = ctx.encode_robustness(copy, phi, 0, pol).unwrap();
            let (lo, hi) = range_of(&ctx.model, &rho.expr);
            match pol {
                Polarity::Exact => {
                    assert!((lo - expected).abs() < TOL && (hi - expected).abs() < TOL, "{phi:?}")
                }
                Polarity::Under => assert!((hi - expected).abs() < TOL, "{phi:?}"),
                Polarity::Over => assert!((lo - expected).abs() < TOL, "{phi:?}"),
            }
        }
    });
}

/// Depth ≤ 2 formulas built from two atoms with ¬, F[0,1], G[1,2], ∧ and U[0,1].
fn small_formulas() -> Vec<Formula> {
    let p = x_ge(2, 0, 0.5);
    let q = Formula::Pred(Predicate::le(2, 1, -0.5));
    let atoms = vec![p.clone(), q.clone()];
    let unary = |f: &Formula| {
        vec![
            Formula::not(f.clone()),
            Formula::eventually(f.clone(), 0, 1),
            Formula::always(f.clone(), 1, 2),
        ]
    };
    let mut depth1: Vec<Formula> = atoms.iter().flat_map(unary).collect();
    for a in &atoms {
        for b in &atoms {
            depth1.push(Formula::And(vec![a.clone(), b.clone()]));
            depth1.push(Formula::until(a.clone(), b.clone(), 0, 1));
        }
    }
    let mut all = atoms.clone();
    all.extend(depth1.iter().cloned());
    for f in &depth1 {
        all.extend(unary(f));
        all.push(Formula::And(vec![f.clone(), q.clone()]));
        all.push(Formula::until(p.clone(), f.clone(), 0, 1));
    }
    all
}

fn grid_traces(len: usize) -> Vec<Trace> {
    let cells = 2 * len;
    (0..1u32 << cells)
        .map(|bits| {
            let v = |k: usize| if bits >> k & 1 == 1 { 1.0 } else { -1.0 };
            Trace::new((0..len).map(|t| vec![v(2 * t), v(2 * t + 1)]).collect()).unwrap()
        })
        .collect()
}

#[test]
fn boolean_encoding_agrees_with_eval_bool_exhaustively() {
    let formulas: Vec<Formula> = small_formulas().into_iter().filter(|f| f.horizon() <= 3).collect();
    assert!(formulas.len() > 60);
    let s = scenario(2, 4);
    formulas.par_iter().for_each(|phi| {
        for trace in &grid_traces(phi.horizon() + 1) {
            let expected = eval_bool(phi, trace, 0).unwrap();
            let mut ctx = EncodingContext::new(&s, EncodeOptions::plain(&s)).unwrap();
            let copy = ctx.add_fixed_trace("fix", trace, true).unwrap();
            let z = ctx.encode_bool(copy, phi, 0, Polarity::Exact).unwrap();
            for v in [false, true] {
                let ok = feasible(&ctx.model, &[(z.clone(), if v { 1.0 } else { 0.0 })]);
                assert_eq!(ok, v == expected, "{phi:?} on {trace:?} with z={v}");
            }
        }
    });
}

#[test]
fn cache_reuses_shared_subformulas() {
    let s = scenario(2, 4);
    let mut ctx = EncodingContext::new(&s, EncodeOptions::plain(&s)).unwrap();
    let trace = grid_traces(4).remove(5);
    let copy = ctx.add_fixed_trace("fix", &trace, true).unwrap();
    let inner = Formula::eventually(x_ge(2, 0, 0.5), 0, 1);
    ctx.encode_bool(copy, &inner, 0, Polarity::Exact).unwrap();
    let vars = ctx.model.num_vars();
    ctx.encode_bool(copy, &inner, 0, Polarity::Exact).unwrap();
    assert_eq!(ctx.model.num_vars(), vars);
}

#[test]
fn explicit_states_follow_the_dynamics() {
    let mut s = scenario(2, 3);
    s.x0 = vec![1.0, -1.0];
    let mut opts = EncodeOptions::plain(&s);
    opts.states = StateEncoding::Explicit;
    let mut ctx = EncodingContext::new(&s, opts).unwrap();
    let ul = ctx.leader_inputs("L").unwrap();
    let u_leader: Vec<Vec<LinExpr>> = ul.iter().map(|u| u.iter().map(|v| LinExpr::var(*v)).collect()).collect();
    let u_follower = vec![vec![LinExpr::constant(0.5), LinExpr::constant(0.0)]; 3];
    let copy = ctx.add_trajectory("nom", &u_leader, &u_follower, None).unwrap();
    let dyn_rows = ctx.model.constraints.iter().filter(|c| c.name.starts_with("dyn[")).count();
    assert_eq!(dyn_rows, 2 * 3);
    let x3 = ctx.state(copy, 3)[0].clone();
    let mut m = ctx.model.clone();
    for u in &ul {
        m.set_bounds(u[0], 1.0, 1.0).unwrap();
    }
    let (lo, hi) = range_of(&m, &x3);
    assert!((lo - 5.5).abs() < TOL && (hi - 5.5).abs() < TOL);
}

#[test]
fn both_satisfaction_encodings_agree_with_the_monitor() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..60 {
        let phi = random_formula(&mut rng, 2);
        let trace = random_trace(&mut rng, phi.horizon() + 1);
        let s = scenario(2, trace.len().max(2));
        let expected = eval_bool(&phi, &trace, 0).unwrap();
        for sat in [SatEncoding::Boolean, SatEncoding::RobustnessSign] {
            let mut opts = EncodeOptions::for_scenario(&s);
            opts.sat = sat;
            opts.prune = false;
            let mut ctx = EncodingContext::new(&s, opts).unwrap();
            let copy = ctx.add_fixed_trace("fix", &trace, true).unwrap();
            let z = ctx.encode_sat(copy, &phi, 0, Polarity::Exact).unwrap();
            let one = feasible(&ctx.model, &[(z.clone(), 1.0)]);
            let zero = feasible(&ctx.model, &[(z, 0.0)]);
            assert_eq!((one, zero), (expected, !expected), "{phi:?} {sat:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// One-sided satisfaction bits only err on their allowed side.
    #[test]
    fn one_sided_bits_are_sound(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_formula(&mut rng, 2);
        let trace = random_trace(&mut rng, phi.horizon() + 1);
        let s = scenario(2, trace.len().max(2));
        let truth = eval_bool(&phi, &trace, 0).unwrap();
        for sat in [SatEncoding::Boolean, SatEncoding::RobustnessSign] {
            for (pol, forbidden) in [(Polarity::Under, 1.0), (Polarity::Over, 0.0)] {
                let mut opts = EncodeOptions::for_scenario(&s);
                opts.sat = sat;
                let mut ctx = EncodingContext::new(&s, opts).unwrap();
                let copy = ctx.add_fixed_trace("fix", &trace, true).unwrap();
                let z = ctx.encode_sat(copy, &phi, 0, pol).unwrap();
                // Under may not claim a false formula; Over may not deny a true one.
                let violating = if pol == Polarity::Under { !truth } else { truth };
                if violating {
                    prop_assert!(!feasible(&ctx.model, &[(z.clone(), forbidden)]));
                }
                let actual = if truth { 1.0 } else { 0.0 };
                prop_assert!(feasible(&ctx.model, &[(z, actual)]));
            }
        }
    }
}
