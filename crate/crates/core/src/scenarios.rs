//! Bundled case-study scenarios and small generated instances for testing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{AffineSystem, BoundsBox, CostSpec, DynamicsError, EffortNorm, Scenario, DEFAULT_BIG_M};
use crate::stl::parse;

/// Double integrator with a low-authority follower (N = 25).
pub const DOUBLE_INTEGRATOR_JSON: &str = include_str!("../scenarios/double_integrator.json");
/// Leader plus two single-integrator followers with distance-keeping tasks (N = 25).
pub const THREE_AGENTS_JSON: &str = include_str!("../scenarios/three_agents.json");

pub fn double_integrator() -> Scenario {
    Scenario::from_json(DOUBLE_INTEGRATOR_JSON).expect("bundled scenario is valid")
}

pub fn three_agents() -> Scenario {
    Scenario::from_json(THREE_AGENTS_JSON).expect("bundled scenario is valid")
}

/// Bundled scenario by case number (1 or 2).
pub fn case(n: u32) -> Option<Scenario> {
    match n {
        1 => Some(double_integrator()),
        2 => Some(three_agents()),
        _ => None,
    }
}

/// Step of the toy follower grid; all toy thresholds sit off multiples of it.
pub const TOY_GRID_STEP: f64 = 0.25;

/// Scalar integrator `x⁺ = x + u^L + u^F` from `x0 = 0` with `|u^L| ≤ 1`,
/// `|u^F| ≤ 0.5`, `X = [−5, 5]` and cost `0.1 · Σ|u^L| − ρ^L`.
pub fn toy_1d(phi_leader: &str, phi_follower: &str, horizon: usize) -> Result<Scenario, DynamicsError> {
    let names = vec!["x".to_string()];
    let formula = |which: &'static str, text: &str| {
        parse(text, &names).map_err(|source| DynamicsError::Formula { which, source })
    };
    let s = Scenario {
        name: "toy_1d".into(),
        state_names: names.clone(),
        system: AffineSystem::new(vec![vec![1.0]], vec![vec![1.0]], vec![vec![1.0]], None)?,
        x0: vec![0.0],
        horizon,
        state_bounds: BoundsBox::new(vec![-5.0], vec![5.0])?,
        leader_bounds: BoundsBox::new(vec![-1.0], vec![1.0])?,
        follower_bounds: BoundsBox::new(vec![-0.5], vec![0.5])?,
        phi_leader: formula("phi_L", phi_leader)?,
        phi_follower: formula("phi_F", phi_follower)?,
        cost: CostSpec {
            effort_weight: 0.1,
            effort_norm: EffortNorm::L1,
            include_leader_robustness: true,
        },
        noninterfering_input: None,
        big_m: DEFAULT_BIG_M,
        epsilon: 1e-4,
    };
    s.validate()?;
    Ok(s)
}

/// Threshold `k · 0.25 + 0.13`, never within 0.12 of a grid state.
fn off_grid(rng: &mut ChaCha8Rng, lo: i32, hi: i32) -> f64 {
    rng.gen_range(lo..=hi) as f64 * TOY_GRID_STEP + 0.13
}

/// A seeded toy where the follower wants to reach an upper level and the
/// leader has a reach obligation plus a floor to respect.
pub fn toy_family(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = 3;
    let reach = off_grid(&mut rng, 1, 6);
    let floor = -off_grid(&mut rng, 2, 8);
    let goal = off_grid(&mut rng, 2, 8);
    let a = rng.gen_range(1..=2);
    let phi_l = format!("F[{a},3] x >= {reach} & G[1,3] x >= {floor}");
    let b = rng.gen_range(1..=2);
    let phi_f = if rng.gen_bool(0.5) {
        format!("F[{b},3] x >= {goal}")
    } else {
        format!("G[{b},3] x >= {}", goal - 1.0)
    };
    let mut s = toy_1d(&phi_l, &phi_f, horizon).expect("toy family is valid");
    s.name = format!("toy_family_{seed}");
    s
}
