use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{
    AffineSystem, BoundsBox, CostSpec, DynamicsError, EffortNorm, Matrix, Scenario, Trajectory,
    DEFAULT_BIG_M, DEFAULT_EPSILON,
};
use crate::stl::{parse, Trace};

/// On-disk scenario document. Bounds are `[lower, upper]` pairs per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub state_names: Vec<String>,
    #[serde(rename = "A")]
    pub a: Matrix,
    #[serde(rename = "B_L")]
    pub b_leader: Matrix,
    #[serde(rename = "B_F")]
    pub b_follower: Matrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
    pub x0: Vec<f64>,
    #[serde(rename = "N")]
    pub horizon: usize,
    pub state_bounds: Vec<[f64; 2]>,
    pub leader_bounds: Vec<[f64; 2]>,
    pub follower_bounds: Vec<[f64; 2]>,
    #[serde(rename = "phi_L")]
    pub phi_leader: String,
    #[serde(rename = "phi_F")]
    pub phi_follower: String,
    pub cost: CostFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noninterfering_input: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub big_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormName {
    Squared,
    L1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostFile {
    pub effort_weight: f64,
    pub effort_norm: NormName,
    #[serde(default = "default_segments")]
    pub pwl_segments: usize,
    pub include_leader_robustness: bool,
}

fn default_segments() -> usize {
    8
}

fn to_box(pairs: &[[f64; 2]]) -> Result<BoundsBox, DynamicsError> {
    BoundsBox::new(pairs.iter().map(|p| p[0]).collect(), pairs.iter().map(|p| p[1]).collect())
}

fn from_box(b: &BoundsBox) -> Vec<[f64; 2]> {
    b.lower.iter().zip(&b.upper).map(|(l, u)| [*l, *u]).collect()
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self, DynamicsError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn into_scenario(self) -> Result<Scenario, DynamicsError> {
        let system = AffineSystem::new(self.a, self.b_leader, self.b_follower, self.c)?;
        if self.state_names.len() != system.state_dim() {
            return Err(DynamicsError::Dimension {
                what: "state_names".into(),
                expected: system.state_dim(),
                found: self.state_names.len(),
            });
        }
        let phi_leader = parse(&self.phi_leader, &self.state_names)
            .map_err(|source| DynamicsError::Formula { which: "phi_L", source })?;
        let phi_follower = parse(&self.phi_follower, &self.state_names)
            .map_err(|source| DynamicsError::Formula { which: "phi_F", source })?;
        let effort_norm = match self.cost.effort_norm {
            NormName::Squared => EffortNorm::SquaredPwl {
                segments: self.cost.pwl_segments,
            },
            NormName::L1 => EffortNorm::L1,
        };
        let scenario = Scenario {
            name: self.name.unwrap_or_else(|| "scenario".into()),
            state_names: self.state_names,
            system,
            x0: self.x0,
            horizon: self.horizon,
            state_bounds: to_box(&self.state_bounds)?,
            leader_bounds: to_box(&self.leader_bounds)?,
            follower_bounds: to_box(&self.follower_bounds)?,
            phi_leader,
            phi_follower,
            cost: CostSpec {
                effort_weight: self.cost.effort_weight,
                effort_norm,
                include_leader_robustness: self.cost.include_leader_robustness,
            },
            noninterfering_input: self.noninterfering_input,
            big_m: self.big_m.unwrap_or(DEFAULT_BIG_M),
            epsilon: self.epsilon.unwrap_or(DEFAULT_EPSILON),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_scenario(s: &Scenario) -> Self {
        let (effort_norm, pwl_segments) = match s.cost.effort_norm {
            EffortNorm::SquaredPwl { segments } => (NormName::Squared, segments),
            EffortNorm::L1 => (NormName::L1, default_segments()),
        };
        ScenarioFile {
            name: Some(s.name.clone()),
            state_names: s.state_names.clone(),
            a: s.system.a.clone(),
            b_leader: s.system.b_leader.clone(),
            b_follower: s.system.b_follower.clone(),
            c: Some(s.system.drift.clone()),
            x0: s.x0.clone(),
            horizon: s.horizon,
            state_bounds: from_box(&s.state_bounds),
            leader_bounds: from_box(&s.leader_bounds),
            follower_bounds: from_box(&s.follower_bounds),
            phi_leader: s.phi_leader.display(&s.state_names).to_string(),
            phi_follower: s.phi_follower.display(&s.state_names).to_string(),
            cost: CostFile {
                effort_weight: s.cost.effort_weight,
                effort_norm,
                pwl_segments,
                include_leader_robustness: s.cost.include_leader_robustness,
            },
            noninterfering_input: s.noninterfering_input.clone(),
            big_m: Some(s.big_m),
            epsilon: Some(s.epsilon),
        }
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, DynamicsError> {
        ScenarioFile::from_json(text)?.into_scenario()
    }

    pub fn load(path: &std::path::Path) -> Result<Self, DynamicsError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Writes `t, x_0.., uL_0.., uF_0..`; the final state row has empty input cells.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, out: W) -> Result<(), DynamicsError> {
    let n = traj.states.dim();
    let ml = traj.u_leader.first().map_or(0, Vec::len);
    let mf = traj.u_follower.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((0..n).map(|i| format!("x_{i}")));
    header.extend((0..ml).map(|i| format!("uL_{i}")));
    header.extend((0..mf).map(|i| format!("uF_{i}")));
    w.write_record(&header)?;
    for (t, x) in traj.states.states().iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(x.iter().map(|v| format!("{v:?}")));
        let input = |seq: &[Vec<f64>], m: usize| -> Vec<String> {
            match seq.get(t) {
                Some(u) => u.iter().map(|v| format!("{v:?}")).collect(),
                None => vec![String::new(); m],
            }
        };
        row.extend(input(&traj.u_leader, ml));
        row.extend(input(&traj.u_follower, mf));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the state columns `x_*` of a trajectory CSV in header order.
///
/// Columns may also be named by state name when `names` is given; the
/// resulting trace is ordered like `names`.
pub fn read_trajectory_csv<R: Read>(input: R, names: Option<&[String]>) -> Result<Trace, DynamicsError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let columns: Vec<usize> = match names {
        Some(names) => names
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let by_index = format!("x_{i}");
                header
                    .iter()
                    .position(|h| h == name)
                    .or_else(|| header.iter().position(|h| *h == by_index))
                    .ok_or_else(|| DynamicsError::Invalid(format!("CSV has no column for state {name}")))
            })
            .collect::<Result<_, _>>()?,
        None => (0..)
            .map_while(|i| header.iter().position(|h| *h == format!("x_{i}")))
            .collect(),
    };
    if columns.is_empty() {
        return Err(DynamicsError::Invalid("CSV has no state columns".into()));
    }
    let mut states = Vec::new();
    for (row, record) in r.records().enumerate() {
        let record = record?;
        let x = columns
            .iter()
            .map(|&c| {
                let cell = record.get(c).unwrap_or("");
                cell.parse::<f64>().map_err(|_| {
                    DynamicsError::Invalid(format!("row {}: cannot parse {cell:?} as a number", row + 1))
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        states.push(x);
    }
    if states.is_empty() {
        return Err(DynamicsError::Invalid("CSV has no rows".into()));
    }
    Ok(Trace::new(states).expect("every row has one value per column"))
}
