//! Seeded CF1–CF4 fault injection.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ArchitectureModel, ComponentState, ModelError, Mutation, Subject};
use crate::rng::Rng;

/// Lower bound of the gap between two injections, logical ms.
pub const MIN_INTERVAL_MS: u64 = 100;
/// Upper bound (inclusive) of the gap between two injections, logical ms.
pub const MAX_INTERVAL_MS: u64 = 500;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InjectError {
    #[error("no eligible target for {0}")]
    NoEligibleTarget(FaultKind),
    #[error("{kind} cannot target {target}")]
    BadTarget { kind: FaultKind, target: Subject },
    #[error("CF2 needs a positive magnitude; other kinds take none")]
    BadMagnitude,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// The four architectural failure classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FaultKind {
    /// Component entered the UNKNOWN state.
    CF1,
    /// Component exception count above the threshold.
    CF2,
    /// Component removed from the architecture.
    CF3,
    /// Connector between two components removed.
    CF4,
}

impl FaultKind {
    pub const ALL: [FaultKind; 4] = [FaultKind::CF1, FaultKind::CF2, FaultKind::CF3, FaultKind::CF4];

    pub fn as_str(self) -> &'static str {
        match self {
            FaultKind::CF1 => "CF1",
            FaultKind::CF2 => "CF2",
            FaultKind::CF3 => "CF3",
            FaultKind::CF4 => "CF4",
        }
    }

    pub fn parse(s: &str) -> Option<FaultKind> {
        FaultKind::ALL.into_iter().find(|k| k.as_str() == s)
    }

    pub fn targets_connector(self) -> bool {
        self == FaultKind::CF4
    }
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FaultInstance {
    pub kind: FaultKind,
    pub target: Subject,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub magnitude: Option<u32>,
    pub injected_at: u64,
}

impl FaultInstance {
    /// Builds a fault after checking that the target shape and magnitude
    /// agree with the kind.
    pub fn new(
        kind: FaultKind,
        target: Subject,
        magnitude: Option<u32>,
        injected_at: u64,
    ) -> Result<FaultInstance, InjectError> {
        if kind.targets_connector() != matches!(target, Subject::Connector(_)) {
            return Err(InjectError::BadTarget { kind, target });
        }
        match (kind, magnitude) {
            (FaultKind::CF2, Some(m)) if m > 0 => {}
            (FaultKind::CF2, _) | (_, Some(_)) => return Err(InjectError::BadMagnitude),
            _ => {}
        }
        Ok(FaultInstance {
            kind,
            target,
            magnitude,
            injected_at,
        })
    }
}

/// Logical milliseconds until the next injection, uniform over [100, 500].
pub fn draw_interval(rng: &mut Rng) -> u64 {
    interval_for(rng.next())
}

/// Maps one raw generator output onto the injection interval.
pub fn interval_for(output: u64) -> u64 {
    MIN_INTERVAL_MS + output % (MAX_INTERVAL_MS - MIN_INTERVAL_MS + 1)
}

/// Targets a fault of `kind` could hit, in blueprint order.
pub fn eligible_targets(model: &ArchitectureModel, kind: FaultKind) -> Vec<Subject> {
    if kind.targets_connector() {
        model
            .live_connectors()
            .into_iter()
            .map(|c| Subject::Connector(c.clone()))
            .collect()
    } else {
        model.present_slots().map(|s| Subject::Slot(s.to_string())).collect()
    }
}

/// Draws a fault: kind, then target, then (CF2 only) magnitude, each from
/// one `next()` of the generator.
pub fn draw_fault(rng: &mut Rng, model: &ArchitectureModel) -> Result<FaultInstance, InjectError> {
    let kind = FaultKind::ALL[rng.below(4) as usize];
    let targets = eligible_targets(model, kind);
    if targets.is_empty() {
        return Err(InjectError::NoEligibleTarget(kind));
    }
    let target = targets[rng.below(targets.len() as u64) as usize].clone();
    let magnitude = (kind == FaultKind::CF2).then(|| model.exception_threshold() + 1 + rng.below(5) as u32);
    Ok(FaultInstance {
        kind,
        target,
        magnitude,
        injected_at: model.clock(),
    })
}

/// The primitive mutation that realises `fault`.
pub fn fault_mutation(fault: &FaultInstance) -> Result<Mutation, InjectError> {
    let bad = || InjectError::BadTarget {
        kind: fault.kind,
        target: fault.target.clone(),
    };
    Ok(match fault.kind {
        FaultKind::CF4 => Mutation::RemoveConnector(fault.target.connector().ok_or_else(bad)?.clone()),
        kind => {
            let slot = fault.target.slot().ok_or_else(bad)?.to_string();
            match kind {
                FaultKind::CF1 => Mutation::SetState {
                    slot,
                    state: ComponentState::Unknown,
                },
                FaultKind::CF2 => Mutation::AddExceptions {
                    slot,
                    count: fault.magnitude.ok_or(InjectError::BadMagnitude)?,
                },
                _ => Mutation::RemoveComponent { slot },
            }
        }
    })
}

/// Applies `fault` to the model. CF3 takes the component's connectors with
/// it; nothing else is touched. On error the model is unchanged.
pub fn inject(model: &mut ArchitectureModel, fault: &FaultInstance) -> Result<Mutation, InjectError> {
    let mutation = fault_mutation(fault)?;
    model.apply(&mutation)?;
    Ok(mutation)
}
