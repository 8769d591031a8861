use std::num::NonZeroU32;
use std::time::Instant;

use highs::{HighsModelStatus, RowProblem};

use super::backend::SolverBackend;
use super::model::{MilpModel, ObjSense, Sense, SolveResult, SolveStats, SolveStatus, SolverLimits, VarKind};
use super::MilpError;

/// External HiGHS solver, run single-threaded with a fixed seed.
#[derive(Debug, Default, Clone, Copy)]
pub struct HighsBackend;

impl SolverBackend for HighsBackend {
    fn name(&self) -> &str {
        "highs"
    }

    fn solve(&self, model: &MilpModel, limits: &SolverLimits) -> Result<SolveResult, MilpError> {
        let start = Instant::now();
        let mut pb = RowProblem::default();
        let cols: Vec<_> = model
            .variables
            .iter()
            .map(|v| {
                let cost = model
                    .objective
                    .binary_search_by_key(&v.id, |(id, _)| *id)
                    .map(|i| model.objective[i].1)
                    .unwrap_or(0.0);
                match v.kind {
                    VarKind::Binary => pb.add_integer_column(cost, v.lower..=v.upper),
                    VarKind::Continuous => pb.add_column(cost, v.lower..=v.upper),
                }
            })
            .collect();
        for c in &model.constraints {
            let row: Vec<_> = c.terms.iter().map(|(v, a)| (cols[v.0], *a)).collect();
            match c.sense {
                Sense::Le => pb.add_row(..=c.rhs, row),
                Sense::Ge => pb.add_row(c.rhs.., row),
                Sense::Eq => pb.add_row(c.rhs..=c.rhs, row),
            }
        }
        let sense = match model.sense() {
            ObjSense::Minimize => highs::Sense::Minimise,
            ObjSense::Maximize => highs::Sense::Maximise,
        };
        let mut hm = pb
            .try_optimise(sense)
            .map_err(|e| MilpError::Backend(format!("HiGHS rejected the model: {e:?}")))?;
        hm.make_quiet();
        hm.set_threads(NonZeroU32::new(1).expect("nonzero"));
        hm.set_option("random_seed", 0);
        hm.set_option("mip_rel_gap", limits.mip_gap_rel);
        hm.set_option("mip_abs_gap", limits.mip_gap_abs);
        hm.set_option("mip_feasibility_tolerance", limits.integrality_tol);
        hm.set_option("primal_feasibility_tolerance", limits.feasibility_tol);
        hm.set_option("mip_max_nodes", limits.node_limit.min(i32::MAX as u64) as i32);
        if let Some(t) = limits.time_limit {
            hm.set_option("time_limit", t.as_secs_f64());
        }
        let solved = hm
            .try_solve()
            .map_err(|e| MilpError::Backend(format!("HiGHS failed: {e:?}")))?;
        let status = match solved.status() {
            HighsModelStatus::Optimal | HighsModelStatus::ModelEmpty => SolveStatus::Optimal,
            HighsModelStatus::Infeasible => SolveStatus::Infeasible,
            HighsModelStatus::Unbounded | HighsModelStatus::UnboundedOrInfeasible => SolveStatus::Unbounded,
            HighsModelStatus::ReachedTimeLimit => SolveStatus::TimeLimit,
            HighsModelStatus::ReachedIterationLimit | HighsModelStatus::ReachedSolutionLimit => {
                SolveStatus::IterLimit
            }
            other => return Err(MilpError::Backend(format!("HiGHS status {other:?}"))),
        };
        let nodes = solved.int_info_value(c"mip_node_count").unwrap_or(0).max(0) as u64;
        let stats = SolveStats {
            nodes,
            simplex_iterations: solved.simplex_iteration_count().max(0) as u64,
            wall_time: start.elapsed(),
        };
        let values: Vec<f64> = solved.get_solution().columns().to_vec();
        let has_point = values.len() == model.num_vars()
            && !values.is_empty()
            && model.max_violation(&values) <= 1e-5;
        if !has_point || status == SolveStatus::Infeasible || status == SolveStatus::Unbounded {
            let mut r = SolveResult::without_solution(status, model.sense());
            r.stats = stats;
            return Ok(r);
        }
        let objective = model.objective_value(&values);
        let best_bound = if model.num_binaries() == 0 || status == SolveStatus::Optimal && nodes == 0 {
            objective
        } else {
            solved
                .double_info_value(c"mip_dual_bound")
                .map(|b| b + 0.0)
                .unwrap_or(objective)
        };
        Ok(SolveResult {
            status,
            values,
            objective,
            best_bound,
            stats,
        })
    }
}
