use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use super::model::{MilpModel, SolveResult, SolverLimits};
use super::{solve_milp, write_lp, MilpError};

/// A MILP solver reachable by name.
pub trait SolverBackend: Send + Sync {
    fn name(&self) -> &str;
    fn solve(&self, model: &MilpModel, limits: &SolverLimits) -> Result<SolveResult, MilpError>;
}

/// The built-in simplex and branch-and-bound.
#[derive(Debug, Default, Clone, Copy)]
pub struct EmbeddedBackend;

impl SolverBackend for EmbeddedBackend {
    fn name(&self) -> &str {
        "embedded"
    }

    fn solve(&self, model: &MilpModel, limits: &SolverLimits) -> Result<SolveResult, MilpError> {
        Ok(solve_milp(model, limits))
    }
}

/// Writes each model to an LP file, then solves it with the embedded solver.
#[derive(Debug, Clone)]
pub struct LpFileBackend {
    pub path: PathBuf,
}

impl SolverBackend for LpFileBackend {
    fn name(&self) -> &str {
        "lp-file"
    }

    fn solve(&self, model: &MilpModel, limits: &SolverLimits) -> Result<SolveResult, MilpError> {
        std::fs::write(&self.path, write_lp(model))
            .map_err(|e| MilpError::Backend(format!("cannot write {}: {e}", self.path.display())))?;
        Ok(solve_milp(model, limits))
    }
}

#[derive(Clone)]
pub struct BackendRegistry {
    backends: BTreeMap<String, Arc<dyn SolverBackend>>,
}

impl Default for BackendRegistry {
    /// `embedded`, `lp-file` (writes `stackstl-model.lp` in the temp dir) and,
    /// when compiled in, `highs`.
    fn default() -> Self {
        let mut r = BackendRegistry {
            backends: BTreeMap::new(),
        };
        r.register(Arc::new(EmbeddedBackend));
        r.register(Arc::new(LpFileBackend {
            path: std::env::temp_dir().join("stackstl-model.lp"),
        }));
        #[cfg(feature = "highs")]
        r.register(Arc::new(super::HighsBackend));
        r
    }
}

impl BackendRegistry {
    pub fn empty() -> Self {
        BackendRegistry {
            backends: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, backend: Arc<dyn SolverBackend>) {
        self.backends.insert(backend.name().to_string(), backend);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn SolverBackend>, MilpError> {
        self.backends
            .get(name)
            .cloned()
            .ok_or_else(|| MilpError::BackendUnavailable(name.to_string()))
    }

    pub fn names(&self) -> Vec<&str> {
        self.backends.keys().map(String::as_str).collect()
    }
}

/// Solves `model` with the backend registered under `name`.
pub fn backend_solve(
    registry: &BackendRegistry,
    name: &str,
    model: &MilpModel,
    limits: &SolverLimits,
) -> Result<SolveResult, MilpError> {
    registry.get(name)?.solve(model, limits)
}
