use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, ValueEnum};
use stackstl::synth::{ModeChoice, SynthConfig};
use stackstl::{EffortNorm, Scenario};

use crate::error::CliError;

/// Backend used when `--backend` is absent.
#[cfg(feature = "highs")]
pub const DEFAULT_BACKEND: &str = "highs";
#[cfg(not(feature = "highs"))]
pub const DEFAULT_BACKEND: &str = "embedded";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Coop,
    Ant,
    Auto,
}

impl From<ModeArg> for ModeChoice {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Coop => ModeChoice::Cooperative,
            ModeArg::Ant => ModeChoice::Antagonistic,
            ModeArg::Auto => ModeChoice::Auto,
        }
    }
}

/// Synthesis knobs shared by `synthesize`, `reproduce` and `export-lp`.
#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random follower sequences seeding the candidate set.
    #[arg(long, default_value_t = 5)]
    pub init_candidates: usize,
    /// Extra runs with seeds seed+1, seed+2, ...; the best verified cost wins.
    #[arg(long, default_value_t = 0)]
    pub restarts: usize,
    #[arg(long, default_value_t = 50)]
    pub max_iters: usize,
    #[arg(long)]
    pub big_m: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Relative and absolute MIP gap of every solve.
    #[arg(long)]
    pub mip_gap: Option<f64>,
    #[arg(long)]
    pub node_limit: Option<u64>,
    /// Per-solve time limit in seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
    /// Overrides the scenario's tangent count for squared effort.
    #[arg(long)]
    pub pwl_segments: Option<usize>,
    /// Random follower sequences tried by the verification sampler.
    #[arg(long, default_value_t = 10_000)]
    pub verify_samples: usize,
    #[arg(long, default_value = DEFAULT_BACKEND)]
    pub backend: String,
    /// Directory for all written artifacts.
    #[arg(long, env = "STACKSTL_OUT", default_value = "stackstl-out")]
    pub out: PathBuf,
}

impl RunConfig {
    /// Rejects non-positive knobs and makes sure the output directory exists.
    pub fn validate(&self) -> Result<(), CliError> {
        let positive = [
            ("--init-candidates", self.init_candidates as f64),
            ("--max-iters", self.max_iters as f64),
            ("--verify-samples", self.verify_samples as f64),
        ];
        let optional = [
            ("--big-m", self.big_m),
            ("--epsilon", self.epsilon),
            ("--mip-gap", self.mip_gap),
            ("--node-limit", self.node_limit.map(|n| n as f64)),
            ("--time-limit", self.time_limit),
            ("--pwl-segments", self.pwl_segments.map(|n| n as f64)),
        ];
        let all = positive.into_iter().chain(optional.into_iter().filter_map(|(n, v)| v.map(|v| (n, v))));
        for (name, v) in all {
            if !(v > 0.0) || !v.is_finite() {
                return Err(CliError::input(format!("{name} must be positive, got {v}")));
            }
        }
        std::fs::create_dir_all(&self.out)
            .map_err(|e| CliError::input(format!("output directory {}: {e}", self.out.display())))?;
        Ok(())
    }

    pub fn synth_config(&self) -> SynthConfig {
        let mut c = SynthConfig {
            mode: self.mode.into(),
            seed: self.seed,
            init_candidates: self.init_candidates,
            max_iters: self.max_iters,
            restarts: self.restarts,
            backend: self.backend.clone(),
            verify_samples: self.verify_samples,
            big_m: self.big_m,
            epsilon: self.epsilon,
            ..SynthConfig::default()
        };
        if let Some(g) = self.mip_gap {
            c.limits.mip_gap_rel = g;
            c.limits.mip_gap_abs = g;
        }
        if let Some(n) = self.node_limit {
            c.limits.node_limit = n;
        }
        if let Some(t) = self.time_limit {
            c.limits.time_limit = Some(Duration::from_secs_f64(t));
        }
        c
    }

    /// The scenario with `--pwl-segments` applied.
    pub fn adjust(&self, mut s: Scenario) -> Scenario {
        if let (Some(n), EffortNorm::SquaredPwl { .. }) = (self.pwl_segments, s.cost.effort_norm) {
            s.cost.effort_norm = EffortNorm::SquaredPwl { segments: n };
        }
        s
    }
}
