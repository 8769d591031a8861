use criterion::{black_box, criterion_group, criterion_main, Criterion};

use stackstl::milp::{solve_milp, LinExpr, MilpModel, ObjSense, Sense, SolverLimits};
use stackstl::scenarios::{double_integrator, toy_family};
use stackstl::synth::{max_follower_robustness, SynthConfig};
use stackstl::{robustness, simulate};

/// 0/1 knapsack with 16 items; weights and values from a fixed recurrence.
fn knapsack() -> MilpModel {
    let mut m = MilpModel::new();
    let mut weight = LinExpr::default();
    let mut value = LinExpr::default();
    for i in 0..16u32 {
        let b = m.add_binary(&format!("b{i}")).unwrap();
        weight.add_term(b, f64::from((i * 7 + 3) % 11 + 1));
        value.add_term(b, f64::from((i * 5 + 2) % 13 + 1));
    }
    m.add_constraint("cap", weight, Sense::Le, 30.0).unwrap();
    m.set_objective(ObjSense::Maximize, value).unwrap();
    m
}

fn bench_milp(c: &mut Criterion) {
    let m = knapsack();
    let limits = SolverLimits::default();
    c.bench_function("embedded knapsack 16", |b| b.iter(|| solve_milp(black_box(&m), &limits)));
}

fn bench_monitor(c: &mut Criterion) {
    let s = double_integrator();
    let traj = simulate(&s, &s.zero_leader(), &s.noninterfering()).unwrap();
    c.bench_function("robustness case 1 leader task", |b| {
        b.iter(|| robustness(black_box(&s.phi_leader), &traj.states, 0).unwrap())
    });
}

fn bench_falsifier(c: &mut Criterion) {
    let s = toy_family(3);
    let config = SynthConfig {
        backend: "embedded".into(),
        ..SynthConfig::default()
    };
    let plan = s.zero_leader();
    c.bench_function("toy follower robustness query", |b| {
        b.iter(|| max_follower_robustness(black_box(&s), &plan, &config).unwrap())
    });
}

criterion_group!(benches, bench_milp, bench_monitor, bench_falsifier);
criterion_main!(benches);
