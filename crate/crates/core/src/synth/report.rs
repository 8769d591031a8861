//! On-disk artifacts of a run: the outcome report, a separate timing file and
//! trajectory CSVs.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::dynamics::{simulate, write_trajectory_csv, Scenario};

use super::{Mode, SynthError, SynthesisOutcome};

/// Paths written by [`write_outcome_artifacts`].
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeArtifacts {
    pub outcome: PathBuf,
    pub timing: PathBuf,
    /// Leader plan under the non-interfering follower input.
    pub leader_csv: Option<PathBuf>,
    /// Leader plan under the witness response (cooperative only).
    pub witness_csv: Option<PathBuf>,
}

#[derive(Serialize)]
struct TimingFile {
    total_s: f64,
    master_s: f64,
    falsifier_s: f64,
    verify_s: f64,
}

/// Writes `<stem>.json`, `<stem>.timing.json` and, when the outcome carries a
/// leader plan, `<stem>.leader.csv` and `<stem>.witness.csv` into `dir`.
pub fn write_outcome_artifacts(
    dir: &Path,
    stem: &str,
    scenario: &Scenario,
    outcome: &SynthesisOutcome,
) -> Result<OutcomeArtifacts, SynthError> {
    std::fs::create_dir_all(dir).map_err(crate::dynamics::DynamicsError::from)?;
    let io = |e: std::io::Error| SynthError::from(crate::dynamics::DynamicsError::from(e));
    let outcome_path = dir.join(format!("{stem}.json"));
    std::fs::write(&outcome_path, outcome.to_json()).map_err(io)?;
    let t = &outcome.timing;
    let timing = TimingFile {
        total_s: t.total.as_secs_f64(),
        master_s: t.master.as_secs_f64(),
        falsifier_s: t.falsifier.as_secs_f64(),
        verify_s: t.verify.as_secs_f64(),
    };
    let timing_path = dir.join(format!("{stem}.timing.json"));
    let text = serde_json::to_string_pretty(&timing).expect("timing serializes");
    std::fs::write(&timing_path, text + "\n").map_err(io)?;
    let mut artifacts = OutcomeArtifacts {
        outcome: outcome_path,
        timing: timing_path,
        leader_csv: None,
        witness_csv: None,
    };
    if outcome.u_leader.len() != scenario.horizon {
        return Ok(artifacts);
    }
    let leader = dir.join(format!("{stem}.leader.csv"));
    let traj = simulate(scenario, &outcome.u_leader, &scenario.noninterfering())?;
    write_trajectory_csv(&traj, BufWriter::new(File::create(&leader).map_err(io)?))?;
    artifacts.leader_csv = Some(leader);
    if let (Mode::Cooperative, Some(w)) = (outcome.mode, &outcome.witness_follower) {
        let path = dir.join(format!("{stem}.witness.csv"));
        let traj = simulate(scenario, &outcome.u_leader, w)?;
        write_trajectory_csv(&traj, BufWriter::new(File::create(&path).map_err(io)?))?;
        artifacts.witness_csv = Some(path);
    }
    Ok(artifacts)
}
