use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stackstl::milp::*;

/// Classic dense-tableau simplex for `max c·x, A x <= b, x >= 0` with `b >= 0`,
/// using Bland's rule throughout. Returns `None` when unbounded.
fn textbook_max(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Option<f64> {
    let (m, n) = (a.len(), c.len());
    let width = n + m + 1;
    let mut tab = vec![vec![0.0; width]; m + 1];
    for i in 0..m {
        tab[i][..n].copy_from_slice(&a[i]);
        tab[i][n + i] = 1.0;
        tab[i][width - 1] = b[i];
    }
    for j in 0..n {
        tab[m][j] = -c[j];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    loop {
        let Some(q) = (0..n + m).find(|&j| tab[m][j] < -1e-12) else {
            return Some(tab[m][width - 1]);
        };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            if tab[i][q] > 1e-12 {
                let ratio = tab[i][width - 1] / tab[i][q];
                let better = match leave {
                    None => true,
                    Some((li, lr)) => ratio < lr - 1e-12 || (ratio <= lr + 1e-12 && basis[i] < basis[li]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let (r, _) = leave?;
        let p = tab[r][q];
        tab[r].iter_mut().for_each(|v| *v /= p);
        let prow = tab[r].clone();
        for (i, row) in tab.iter_mut().enumerate() {
            if i != r && row[q] != 0.0 {
                let f = row[q];
                row.iter_mut().zip(&prow).for_each(|(v, pv)| *v -= f * pv);
            }
        }
        basis[r] = q;
    }
}

fn build_lp(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> MilpModel {
    let mut m = MilpModel::new();
    let vars: Vec<VarId> = (0..c.len())
        .map(|j| m.add_continuous(&format!("x{j}"), 0.0, f64::INFINITY).unwrap())
        .collect();
    for (i, row) in a.iter().enumerate() {
        let mut e = LinExpr::default();
        for (v, coef) in vars.iter().zip(row) {
            e.add_term(*v, *coef);
        }
        m.add_constraint(&format!("r{i}"), e, Sense::Le, b[i]).unwrap();
    }
    let mut obj = LinExpr::default();
    for (v, coef) in vars.iter().zip(c) {
        obj.add_term(*v, *coef);
    }
    m.set_objective(ObjSense::Maximize, obj).unwrap();
    m
}

#[test]
fn random_lps_match_textbook_simplex() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..50 {
        let n = rng.gen_range(2..7);
        let m = rng.gen_range(2..8);
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..5.0)).collect();
        let mut a: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.gen_range(-3.0..6.0)).collect()).collect();
        let mut b: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..20.0)).collect();
        // A box row per variable keeps every instance bounded.
        for j in 0..n {
            let mut row = vec![0.0; n];
            row[j] = 1.0;
            a.push(row);
            b.push(10.0);
        }
        let oracle = textbook_max(&c, &a, &b).expect("bounded");
        let model = build_lp(&c, &a, &b);
        let r = solve_lp(&model, &SolverLimits::default());
        assert_eq!(r.status, SolveStatus::Optimal, "case {case}");
        assert!((r.objective - oracle).abs() <= 1e-6, "case {case}: {} vs {oracle}", r.objective);
        assert!(model.max_violation(&r.values) <= 1e-7, "case {case}");
        assert!((model.objective_value(&r.values) - r.objective).abs() <= 1e-7);
    }
}

fn knapsack() -> MilpModel {
    let mut m = MilpModel::new();
    let (values, weights) = ([6.0, 10.0, 12.0], [1.0, 2.0, 3.0]);
    let mut obj = LinExpr::default();
    let mut cap = LinExpr::default();
    for i in 0..3 {
        let v = m.add_binary(&format!("item{i}")).unwrap();
        obj.add_term(v, values[i]);
        cap.add_term(v, weights[i]);
    }
    m.add_constraint("capacity", cap, Sense::Le, 5.0).unwrap();
    m.set_objective(ObjSense::Maximize, obj).unwrap();
    m
}

fn enumerate_binary(model: &MilpModel) -> Option<f64> {
    let n = model.num_vars();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << n) {
        let x: Vec<f64> = (0..n).map(|j| f64::from((mask >> j) & 1)).collect();
        if model.max_violation(&x) <= 1e-9 {
            let v = model.objective_value(&x);
            best = Some(match (best, model.sense()) {
                (None, _) => v,
                (Some(b), ObjSense::Maximize) => b.max(v),
                (Some(b), ObjSense::Minimize) => b.min(v),
            });
        }
    }
    best
}

#[test]
fn knapsack_optimum_is_22() {
    let m = knapsack();
    assert_eq!(enumerate_binary(&m), Some(22.0));
    let r = solve_milp(&m, &SolverLimits::default());
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.objective - 22.0).abs() < 1e-9);
    let registry = BackendRegistry::default();
    let r = backend_solve(&registry, "embedded", &m, &SolverLimits::default()).unwrap();
    assert!((r.objective - 22.0).abs() < 1e-9);
}

#[test]
fn lp_file_backend_writes_a_reparseable_model() {
    let dir = tempdir();
    let path = dir.join("knapsack.lp");
    let backend = LpFileBackend { path: path.clone() };
    let m = knapsack();
    let r = backend.solve(&m, &SolverLimits::default()).unwrap();
    assert!((r.objective - 22.0).abs() < 1e-9);
    let text = std::fs::read_to_string(&path).unwrap();
    let back = parse_lp(&text).unwrap();
    assert_eq!(back.num_binaries(), 3);
    assert!((solve_milp(&back, &SolverLimits::default()).objective - 22.0).abs() < 1e-9);
    std::fs::remove_dir_all(dir).unwrap();
}

fn tempdir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("stackstl-milp-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[cfg(feature = "highs")]
#[test]
fn highs_agrees_on_knapsack() {
    let registry = BackendRegistry::default();
    let r = backend_solve(&registry, "highs", &knapsack(), &SolverLimits::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.objective - 22.0).abs() < 1e-6);
}

#[derive(Debug, Clone)]
struct SmallMilp {
    n_bin: usize,
    n_cont: usize,
    rows: Vec<(Vec<i32>, i32, u8)>,
    obj: Vec<i32>,
    maximize: bool,
}

fn small_milp(n_bin: usize, n_cont: usize, max_rows: usize) -> impl Strategy<Value = SmallMilp> {
    let n = n_bin + n_cont;
    let row = (prop::collection::vec(-4i32..5, n), -3i32..8, 0u8..3);
    (
        prop::collection::vec(row, 0..=max_rows),
        prop::collection::vec(-5i32..6, n),
        any::<bool>(),
    )
        .prop_map(move |(rows, obj, maximize)| SmallMilp {
            n_bin,
            n_cont,
            rows,
            obj,
            maximize,
        })
}

fn to_model(s: &SmallMilp) -> MilpModel {
    let mut m = MilpModel::new();
    let mut vars = Vec::new();
    for i in 0..s.n_bin {
        vars.push(m.add_binary(&format!("b{i}")).unwrap());
    }
    for i in 0..s.n_cont {
        vars.push(m.add_continuous(&format!("y{i}"), -2.0, 3.0).unwrap());
    }
    for (k, (coeffs, rhs, sense)) in s.rows.iter().enumerate() {
        let mut e = LinExpr::default();
        for (v, c) in vars.iter().zip(coeffs) {
            e.add_term(*v, f64::from(*c));
        }
        let sense = [Sense::Le, Sense::Ge, Sense::Eq][*sense as usize];
        m.add_constraint(&format!("r{k}"), e, sense, f64::from(*rhs)).unwrap();
    }
    let mut obj = LinExpr::default();
    for (v, c) in vars.iter().zip(&s.obj) {
        obj.add_term(*v, f64::from(*c));
    }
    let sense = if s.maximize { ObjSense::Maximize } else { ObjSense::Minimize };
    m.set_objective(sense, obj).unwrap();
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn two_binary_models_match_enumeration(s in small_milp(2, 0, 3)) {
        let m = to_model(&s);
        let oracle = enumerate_binary(&m);
        let r = solve_milp(&m, &SolverLimits::default());
        match oracle {
            None => prop_assert_eq!(r.status, SolveStatus::Infeasible),
            Some(best) => {
                prop_assert_eq!(r.status, SolveStatus::Optimal);
                prop_assert!((r.objective - best).abs() <= 1e-6, "{} vs {}", r.objective, best);
            }
        }
    }

    #[test]
    fn optimal_results_are_feasible_integral_and_bounded_by_relaxation(s in small_milp(4, 2, 4)) {
        let m = to_model(&s);
        let limits = SolverLimits::default();
        let r = solve_milp(&m, &limits);
        if r.status == SolveStatus::Optimal {
            prop_assert!(m.max_violation(&r.values) <= 1e-7);
            prop_assert!(m.max_integrality_violation(&r.values) <= limits.integrality_tol);
            prop_assert!((m.objective_value(&r.values) - r.objective).abs() <= 1e-7);
            let gap = (r.objective - r.best_bound).abs();
            prop_assert!(gap <= limits.mip_gap_abs.max(limits.mip_gap_rel * r.objective.abs()) + 1e-9);
            let lp = solve_lp(&m.relaxed(), &limits);
            prop_assert_eq!(lp.status, SolveStatus::Optimal);
            match m.sense() {
                ObjSense::Minimize => prop_assert!(r.objective >= lp.objective - 1e-7),
                ObjSense::Maximize => prop_assert!(r.objective <= lp.objective + 1e-7),
            }
        }
    }

    #[test]
    fn best_bound_is_monotone(s in small_milp(6, 1, 5)) {
        let m = to_model(&s);
        let (_, trace) = solve_milp_traced(&m, &SolverLimits::default());
        for w in trace.windows(2) {
            prop_assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn repeated_solves_are_identical(s in small_milp(5, 2, 4)) {
        let m = to_model(&s);
        let a = solve_milp(&m, &SolverLimits::default());
        let b = solve_milp(&m, &SolverLimits::default());
        prop_assert_eq!(a.status, b.status);
        prop_assert_eq!(a.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                        b.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        prop_assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        prop_assert_eq!(a.best_bound.to_bits(), b.best_bound.to_bits());
        prop_assert_eq!((a.stats.nodes, a.stats.simplex_iterations), (b.stats.nodes, b.stats.simplex_iterations));
    }

    #[test]
    fn lp_text_round_trips(s in small_milp(3, 2, 4)) {
        let m = to_model(&s);
        let text = write_lp(&m);
        let back = parse_lp(&text).unwrap();
        prop_assert_eq!(write_lp(&back), text);
        let (r1, r2) = (solve_milp(&m, &SolverLimits::default()), solve_milp(&back, &SolverLimits::default()));
        prop_assert_eq!(r1.status, r2.status);
        if r1.status == SolveStatus::Optimal {
            prop_assert!((r1.objective - r2.objective).abs() <= 1e-9);
        }
    }
}
