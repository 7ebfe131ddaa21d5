//! Batch runs: exhaustive single-fault healing and multi-seed sweeps.
//!
//! Each case or seed runs on its own model, so batches map cleanly over a
//! thread pool. Results come back in input order whichever way they ran.

use crate::harness::{
    run_scenario, HarnessError, RoundRecord, ScenarioConfig, ScenarioReport, ScriptedFault, Simulation,
};
use crate::injector::FaultKind;
use crate::model::{ArchitectureModel, Blueprint};
use crate::par;
use crate::planner::Planner;
use crate::rules::RuleSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Execution {
    fn is_parallel(self) -> bool {
        self == Execution::Parallel
    }
}

/// Every single fault the blueprint admits: CF1–CF3 on each slot, CF4 on
/// each intended connector. CF2 uses the smallest magnitude that trips the
/// threshold.
pub fn single_fault_cases(blueprint: &Blueprint) -> Vec<ScriptedFault> {
    let mut cases = Vec::new();
    for kind in [FaultKind::CF1, FaultKind::CF2, FaultKind::CF3] {
        for slot in blueprint.slots() {
            cases.push(ScriptedFault::slot(kind, &slot.name));
        }
    }
    for c in blueprint.intended_connectors() {
        cases.push(ScriptedFault::connector(&c.from, &c.to));
    }
    cases
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseOutcome {
    pub fault: ScriptedFault,
    pub record: RoundRecord,
}

impl CaseOutcome {
    /// Exactly one report, one plan, executed, and the model validates.
    pub fn healed(&self) -> bool {
        let r = &self.record;
        r.reports.len() == 1 && r.plans.len() == 1 && r.unhandled == 0 && r.verified()
    }
}

/// Runs each case as one round on a fresh copy of `model`.
pub fn heal_all(
    model: &ArchitectureModel,
    rules: &RuleSet,
    cases: &[ScriptedFault],
    execution: Execution,
) -> Result<Vec<CaseOutcome>, HarnessError> {
    par::map(cases, execution.is_parallel(), |fault| {
        let mut sim = Simulation::new(model.clone(), 0, Planner::in_proc(rules.clone()), 3);
        let record = sim.run_round(Some(fault))?;
        Ok(CaseOutcome {
            fault: fault.clone(),
            record,
        })
    })
    .into_iter()
    .collect()
}

/// Runs `base` once per seed. `out_dir` is ignored; nothing is written.
pub fn run_seeds(
    base: &ScenarioConfig,
    seeds: &[u64],
    execution: Execution,
) -> Result<Vec<ScenarioReport>, HarnessError> {
    par::map(seeds, execution.is_parallel(), |&seed| {
        let config = ScenarioConfig {
            seed,
            out_dir: None,
            ..base.clone()
        };
        run_scenario(&config)
    })
    .into_iter()
    .collect()
}
