use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use stackstl::dynamics::read_trajectory_csv;
use stackstl::milp::{write_lp, BackendRegistry};
use stackstl::synth::{
    initial_master_model, solve_ssp, verify_outcome, write_outcome_artifacts, Certificate, Mode, ModeChoice,
    Status, SynthConfig, SynthesisOutcome,
};
use stackstl::{eval_bool, eval_cost, parse, robustness, simulate, Scenario, Trace};

use crate::config::RunConfig;
use crate::error::{code, status_code, CliError};
use crate::plot::{render_svg, Series};

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    Scenario::load(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn check_backend(name: &str) -> Result<(), CliError> {
    BackendRegistry::default().get(name).map(|_| ()).map_err(|e| {
        let known = BackendRegistry::default().names().join(", ");
        CliError::input(format!("{e} (available: {known})"))
    })
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

/// State-index pairs drawn in the plot. Two-dimensional blocks `(2i, 2i+1)`
/// when the state names look like per-agent `x`/`y` pairs, otherwise the
/// first and third components (position axes of a double integrator).
pub fn plot_pairs(s: &Scenario) -> Vec<(usize, usize)> {
    let n = s.state_dim();
    let names = &s.state_names;
    let xy = n % 2 == 0 && (0..n / 2).all(|i| names[2 * i].starts_with('x') && names[2 * i + 1].starts_with('y'));
    if xy && n > 2 {
        (0..n / 2).map(|i| (2 * i, 2 * i + 1)).collect()
    } else if n >= 3 {
        vec![(0, 2)]
    } else {
        vec![(0, n.saturating_sub(1))]
    }
}

fn plot_outcome(s: &Scenario, outcome: &SynthesisOutcome, title: &str) -> Result<Option<String>, CliError> {
    if outcome.u_leader.len() != s.horizon {
        return Ok(None);
    }
    let traj = simulate(s, &outcome.u_leader, &outcome.planned_follower(s)).map_err(|e| CliError::internal(e.to_string()))?;
    let pairs = plot_pairs(s);
    let series: Vec<Series<'_>> = pairs
        .iter()
        .enumerate()
        .map(|(i, &dims)| Series {
            label: if pairs.len() > 1 {
                format!("agent {}", i + 1)
            } else {
                format!("{} response", if outcome.mode == Mode::Cooperative { "witness" } else { "non-interfering" })
            },
            trace: &traj.states,
            dims,
        })
        .collect();
    Ok(Some(render_svg(s, &series, title)))
}

/// Writes JSON, timing, CSV and SVG artifacts under `dir/stem.*`.
pub fn write_artifacts(dir: &Path, stem: &str, s: &Scenario, outcome: &SynthesisOutcome) -> Result<Vec<PathBuf>, CliError> {
    let a = write_outcome_artifacts(dir, stem, s, outcome).map_err(|e| CliError::input(e.to_string()))?;
    let mut paths = vec![a.outcome, a.timing];
    paths.extend(a.leader_csv);
    paths.extend(a.witness_csv);
    let title = format!("{} ({:?}, {:?})", s.name, outcome.mode, outcome.status);
    if let Some(svg) = plot_outcome(s, outcome, &title)? {
        let p = dir.join(format!("{stem}.svg"));
        write(&p, &svg)?;
        paths.push(p);
    }
    Ok(paths)
}

fn print_outcome(outcome: &SynthesisOutcome) {
    println!("mode: {:?}", outcome.mode);
    println!("status: {:?}", outcome.status);
    println!("iterations: {}", outcome.iterations.len());
    if let Some(k) = outcome.k {
        println!("k: {k:?}");
    }
    if let Some(c) = outcome.exact_cost {
        println!("exact cost: {c:?}");
    }
    for n in &outcome.notes {
        println!("note: {n}");
    }
    if let Some(c) = &outcome.certificate {
        print_certificate(c);
    }
}

fn print_certificate(c: &Certificate) {
    println!("certificate: {}", if c.passed { "PASSED" } else { "FAILED" });
    for k in &c.checks {
        println!("  {} {}: {}", if k.passed { "ok  " } else { "FAIL" }, k.name, k.detail);
    }
    if let Some(w) = &c.witness {
        println!("witness follower input: {w:?}");
    }
}

pub fn cmd_synthesize(scenario: &Path, run: &RunConfig) -> Result<u8, CliError> {
    run.validate()?;
    check_backend(&run.backend)?;
    let s = run.adjust(load_scenario(scenario)?);
    let outcome = solve_ssp(&s, &run.synth_config())?;
    print_outcome(&outcome);
    for p in write_artifacts(&run.out, &s.name, &s, &outcome)? {
        println!("wrote {}", p.display());
    }
    Ok(status_code(outcome.status))
}

/// Reads a trajectory CSV. State names come from the scenario when given,
/// otherwise from the `x_i` columns.
fn read_trace(path: &Path, names: Option<&[String]>) -> Result<Trace, CliError> {
    let f = File::open(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    read_trajectory_csv(BufReader::new(f), names).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn cmd_monitor(trace: &Path, formula: &str, scenario: Option<&Path>, t: usize) -> Result<u8, CliError> {
    let s = scenario.map(load_scenario).transpose()?;
    let trace = read_trace(trace, s.as_ref().map(|s| s.state_names.as_slice()))?;
    let names: Vec<String> = match &s {
        Some(s) => s.state_names.clone(),
        None => (0..trace.dim()).map(|i| format!("x_{i}")).collect(),
    };
    let phi = parse(formula, &names).map_err(|e| CliError::input(format!("formula: {e}")))?;
    let sat = eval_bool(&phi, &trace, t).map_err(|e| CliError::input(e.to_string()))?;
    let rho = robustness(&phi, &trace, t).map_err(|e| CliError::input(e.to_string()))?;
    println!("satisfied: {sat}");
    println!("robustness: {rho:?}");
    Ok(if sat { code::SUCCESS } else { code::NEGATIVE })
}

pub fn cmd_verify(
    outcome: &Path,
    scenario: &Path,
    backend: Option<&str>,
    samples: Option<usize>,
) -> Result<u8, CliError> {
    let text = std::fs::read_to_string(outcome).map_err(|e| CliError::input(format!("{}: {e}", outcome.display())))?;
    let o = SynthesisOutcome::from_json(&text)
        .map_err(|e| CliError::input(format!("{}: outcome schema mismatch: {e}", outcome.display())))?;
    let s = load_scenario(scenario)?;
    let mut config = o.config.clone();
    if let Some(b) = backend {
        config.backend = b.to_string();
    }
    if let Some(n) = samples {
        config.verify_samples = n;
    }
    check_backend(&config.backend)?;
    let cert = verify_outcome(&s, &o, &config)?;
    print_certificate(&cert);
    Ok(if cert.passed { code::SUCCESS } else { code::NEGATIVE })
}

/// Reference costs of the bundled case studies and their tolerances.
pub struct Reference {
    pub case: u32,
    pub mode: Mode,
    pub cost: f64,
    pub tolerance: &'static str,
}

pub const REFERENCES: [Reference; 3] = [
    Reference {
        case: 1,
        mode: Mode::Cooperative,
        cost: -0.3613,
        tolerance: "+/-0.05",
    },
    Reference {
        case: 1,
        mode: Mode::Antagonistic,
        cost: -0.9999,
        tolerance: "+/-0.02",
    },
    Reference {
        case: 2,
        mode: Mode::Cooperative,
        cost: 2.7439e-6,
        tolerance: "|cost| <= 1e-5",
    },
];

/// Whether `cost` meets the tolerance of `r`.
pub fn within(r: &Reference, cost: f64) -> bool {
    match (r.case, r.mode) {
        (1, Mode::Cooperative) => (cost - r.cost).abs() <= 0.05,
        (1, Mode::Antagonistic) => (cost - r.cost).abs() <= 0.02,
        _ => cost.abs() <= 1e-5,
    }
}

/// Largest true Euclidean distance between the first agent and each other
/// agent of a multi-agent trace, over all steps.
pub fn max_agent_distance(trace: &Trace, pairs: &[(usize, usize)]) -> f64 {
    let Some(&(lx, ly)) = pairs.first() else { return 0.0 };
    let mut worst: f64 = 0.0;
    for st in trace.states() {
        for &(fx, fy) in &pairs[1..] {
            worst = worst.max((st[lx] - st[fx]).hypot(st[ly] - st[fy]));
        }
    }
    worst
}

pub fn cmd_reproduce(case: u32, run: &RunConfig) -> Result<u8, CliError> {
    let Some(s) = stackstl::scenarios::case(case) else {
        return Err(CliError::input(format!("unknown case {case}; expected 1 or 2")));
    };
    run.validate()?;
    check_backend(&run.backend)?;
    let s = run.adjust(s);
    let dir = run.out.join(format!("case{case}"));
    let mut exit = code::SUCCESS;
    let mut rows = Vec::new();
    for r in REFERENCES.iter().filter(|r| r.case == case) {
        let mut config: SynthConfig = run.synth_config();
        config.mode = match r.mode {
            Mode::Cooperative => ModeChoice::Cooperative,
            Mode::Antagonistic => ModeChoice::Antagonistic,
        };
        let o = solve_ssp(&s, &config)?;
        let stem = match r.mode {
            Mode::Cooperative => "cooperative",
            Mode::Antagonistic => "antagonistic",
        };
        for p in write_artifacts(&dir, stem, &s, &o)? {
            println!("wrote {}", p.display());
        }
        if case == 2 && o.u_leader.len() == s.horizon {
            let traj = simulate(&s, &o.u_leader, &o.planned_follower(&s)).map_err(|e| CliError::internal(e.to_string()))?;
            let d = max_agent_distance(&traj.states, &plot_pairs(&s));
            println!("largest leader-follower distance: {d:.6} (limit 1)");
            let cost = eval_cost(&s, &traj).map_err(|e| CliError::internal(e.to_string()))?;
            println!("re-evaluated cost: {cost:?}");
        }
        if o.status != Status::Success && exit == code::SUCCESS {
            exit = status_code(o.status);
        }
        rows.push((r, o));
    }
    println!();
    println!(
        "{:<6} {:<13} {:<16} {:>14} {:>12} {:<16} {:<6} {:>10}",
        "case", "mode", "status", "exact cost", "reference", "tolerance", "within", "time [s]"
    );
    for (r, o) in &rows {
        let cost = o.exact_cost.filter(|_| o.is_success());
        println!(
            "{:<6} {:<13} {:<16} {:>14} {:>12} {:<16} {:<6} {:>10.3}",
            r.case,
            format!("{:?}", r.mode),
            format!("{:?}", o.status),
            cost.map_or("-".into(), |c| format!("{c:.6e}")),
            format!("{:.4e}", r.cost),
            r.tolerance,
            cost.is_some_and(|c| within(r, c)),
            o.timing.total.as_secs_f64()
        );
    }
    Ok(exit)
}

pub fn cmd_export_lp(scenario: &Path, run: &RunConfig, output: Option<&Path>) -> Result<u8, CliError> {
    run.validate()?;
    let s = run.adjust(load_scenario(scenario)?);
    let mode = match run.mode {
        crate::config::ModeArg::Ant => Mode::Antagonistic,
        _ => Mode::Cooperative,
    };
    let model = initial_master_model(&s, mode, &run.synth_config())?;
    let text = write_lp(&model);
    let path = match output {
        Some(p) => p.to_path_buf(),
        None => run.out.join(format!("{}.{}.lp", s.name, if mode == Mode::Cooperative { "cooperative" } else { "antagonistic" })),
    };
    write(&path, &text)?;
    println!(
        "wrote {} ({} variables, {} binaries)",
        path.display(),
        model.num_vars(),
        model.num_binaries()
    );
    Ok(code::SUCCESS)
}
