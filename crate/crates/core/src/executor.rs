//! Execute stage: apply AS1–AS4 repairs to the model.
//!
//! Every repair is a sequence of primitive [`Mutation`]s; each one advances
//! the logical clock by 1 ms. Connectors are recreated from the blueprint
//! whenever the repaired slot is missing some of its intended ones.

use serde::Serialize;
use thiserror::Error;

use crate::model::{ArchitectureModel, ComponentState, ModelError, Mutation, Subject};
use crate::rules::Strategy;

/// Logical time one mutation takes.
pub const MUTATION_COST_MS: u64 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExecError {
    #[error("repair subject `{0}` is not in the blueprint")]
    SubjectUnknown(String),
    #[error("cannot restart absent component `{0}`")]
    RestartAbsent(String),
    #[error("cannot reconnect {connector}: endpoint `{endpoint}` is absent")]
    EndpointAbsent { connector: String, endpoint: String },
    #[error("{strategy} does not apply to {subject}")]
    SubjectShape { strategy: Strategy, subject: Subject },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RepairPlan {
    pub strategy: Strategy,
    pub subject: Subject,
    pub fired_rule: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExecutionResult {
    pub plan: RepairPlan,
    pub applied_mutations: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub new_instance_id: Option<u64>,
    pub completed_at: u64,
}

/// Intended connectors touching `slot` whose other endpoint is present.
/// With `only_missing`, connectors already live are skipped.
fn reconnect_mutations(model: &ArchitectureModel, slot: &str, only_missing: bool) -> Vec<Mutation> {
    model
        .blueprint()
        .incident_connectors(slot)
        .filter(|c| !(only_missing && model.has_connector(c)))
        .filter(|c| model.is_present(if c.from == slot { &c.to } else { &c.from }))
        .map(|c| Mutation::AddConnector(c.clone()))
        .collect()
}

fn slot_of(plan: &RepairPlan, model: &ArchitectureModel) -> Result<String, ExecError> {
    let slot = plan.subject.slot().ok_or_else(|| ExecError::SubjectShape {
        strategy: plan.strategy,
        subject: plan.subject.clone(),
    })?;
    if !model.blueprint().has_slot(slot) {
        return Err(ExecError::SubjectUnknown(slot.to_string()));
    }
    Ok(slot.to_string())
}

/// The mutations `plan` would apply, plus the instance id it would create.
/// Does not touch the model.
pub fn plan_mutations(model: &ArchitectureModel, plan: &RepairPlan) -> Result<(Vec<Mutation>, Option<u64>), ExecError> {
    let mut out = Vec::new();
    let mut new_instance = None;
    match plan.strategy {
        Strategy::AS1 => {
            let slot = slot_of(plan, model)?;
            if !model.is_present(&slot) {
                return Err(ExecError::RestartAbsent(slot));
            }
            out.push(Mutation::SetState {
                slot: slot.clone(),
                state: ComponentState::Started,
            });
            out.push(Mutation::ResetExceptions { slot });
        }
        Strategy::AS2 => {
            let slot = slot_of(plan, model)?;
            if model.is_present(&slot) {
                out.push(Mutation::SetState {
                    slot: slot.clone(),
                    state: ComponentState::Undeployed,
                });
                out.push(Mutation::SetState {
                    slot: slot.clone(),
                    state: ComponentState::Started,
                });
                out.push(Mutation::ResetExceptions { slot: slot.clone() });
            } else {
                let id = model.fresh_instance_id();
                new_instance = Some(id);
                out.push(Mutation::Instantiate {
                    slot: slot.clone(),
                    instance_id: id,
                });
            }
            out.extend(reconnect_mutations(model, &slot, true));
        }
        Strategy::AS3 => {
            let c = plan.subject.connector().ok_or_else(|| ExecError::SubjectShape {
                strategy: plan.strategy,
                subject: plan.subject.clone(),
            })?;
            if !model.blueprint().is_intended(c) {
                return Err(ExecError::SubjectUnknown(c.to_string()));
            }
            for end in [&c.from, &c.to] {
                if !model.is_present(end) {
                    return Err(ExecError::EndpointAbsent {
                        connector: c.to_string(),
                        endpoint: end.clone(),
                    });
                }
            }
            if !model.has_connector(c) {
                out.push(Mutation::AddConnector(c.clone()));
            }
        }
        Strategy::AS4 => {
            let slot = slot_of(plan, model)?;
            let id = model.fresh_instance_id();
            new_instance = Some(id);
            if model.is_present(&slot) {
                out.push(Mutation::RemoveComponent { slot: slot.clone() });
            }
            out.push(Mutation::Instantiate {
                slot: slot.clone(),
                instance_id: id,
            });
            // all incident connectors go with the old instance
            out.extend(reconnect_mutations(model, &slot, false));
        }
    }
    Ok((out, new_instance))
}

/// Applies `plan`. On error nothing has been applied.
pub fn execute(model: &mut ArchitectureModel, plan: &RepairPlan) -> Result<ExecutionResult, ExecError> {
    let (mutations, new_instance_id) = plan_mutations(model, plan)?;
    let mut applied = Vec::with_capacity(mutations.len());
    for m in &mutations {
        model.apply(m)?;
        model.apply(&Mutation::AdvanceClock(MUTATION_COST_MS))?;
        applied.push(m.to_string());
    }
    Ok(ExecutionResult {
        plan: plan.clone(),
        applied_mutations: applied,
        new_instance_id,
        completed_at: model.clock(),
    })
}
