//! Monitor stage: snapshot the model and diff consecutive snapshots.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::model::{ArchitectureModel, ComponentState, Connector};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MonitorError {
    #[error("clock went backwards: {prev} -> {cur}")]
    ClockRegression { prev: u64, cur: u64 },
    #[error("snapshots come from different blueprints")]
    BlueprintMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SlotView {
    pub state: ComponentState,
    pub exception_count: u32,
}

/// Read-only capture of a model at one instant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    slot_names: Arc<[String]>,
    /// Intended connectors in blueprint order; fixes the connector diff order.
    intended: Arc<[Connector]>,
    slots: Vec<Option<SlotView>>,
    connectors: BTreeSet<Connector>,
    clock: u64,
}

impl Snapshot {
    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn slot(&self, name: &str) -> Option<SlotView> {
        let i = self.slot_names.iter().position(|s| s == name)?;
        self.slots[i]
    }

    pub fn connectors(&self) -> &BTreeSet<Connector> {
        &self.connectors
    }

    /// Same slots and connectors, ignoring the clock.
    pub fn same_content(&self, other: &Snapshot) -> bool {
        self.slot_names == other.slot_names && self.slots == other.slots && self.connectors == other.connectors
    }

    fn connector_order<'a>(&self, c: &'a Connector) -> (usize, Option<&'a Connector>) {
        match self.intended.iter().position(|i| i == c) {
            Some(i) => (i, None),
            None => (self.intended.len(), Some(c)),
        }
    }

    /// Applies one change event. Used to check that a diff is complete.
    pub fn apply(&mut self, event: &ChangeEvent) {
        let idx = |name: &str| self.slot_names.iter().position(|s| s == name);
        match &event.change {
            Change::StateChanged { slot, new, .. } => {
                if let Some(Some(v)) = idx(slot).map(|i| &mut self.slots[i]) {
                    v.state = *new;
                }
            }
            Change::ExceptionsChanged { slot, new, .. } => {
                if let Some(Some(v)) = idx(slot).map(|i| &mut self.slots[i]) {
                    v.exception_count = *new;
                }
            }
            Change::ComponentRemoved { slot } => {
                if let Some(i) = idx(slot) {
                    self.slots[i] = None;
                }
            }
            Change::ComponentAdded {
                slot,
                state,
                exception_count,
            } => {
                if let Some(i) = idx(slot) {
                    self.slots[i] = Some(SlotView {
                        state: *state,
                        exception_count: *exception_count,
                    });
                }
            }
            Change::ConnectorRemoved(c) => {
                self.connectors.remove(c);
            }
            Change::ConnectorAdded(c) => {
                self.connectors.insert(c.clone());
            }
        }
        self.clock = self.clock.max(event.at);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Change {
    StateChanged {
        slot: String,
        old: ComponentState,
        new: ComponentState,
    },
    ExceptionsChanged {
        slot: String,
        old: u32,
        new: u32,
    },
    ComponentRemoved {
        slot: String,
    },
    ComponentAdded {
        slot: String,
        state: ComponentState,
        exception_count: u32,
    },
    ConnectorRemoved(Connector),
    ConnectorAdded(Connector),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChangeEvent {
    #[serde(flatten)]
    pub change: Change,
    pub at: u64,
}

pub fn take_snapshot(model: &ArchitectureModel) -> Snapshot {
    let bp = model.blueprint();
    Snapshot {
        slot_names: bp.slots().iter().map(|s| s.name.clone()).collect(),
        intended: bp.intended_connectors().into(),
        slots: model
            .slots()
            .map(|(_, c)| {
                c.map(|c| SlotView {
                    state: c.state,
                    exception_count: c.exception_count,
                })
            })
            .collect(),
        connectors: model.live_connectors().into_iter().cloned().collect(),
        clock: model.clock(),
    }
}

/// The minimal set of changes turning `prev` into `cur`: slot events in
/// blueprint order, then connector events (intended connectors in blueprint
/// order, extras after them).
pub fn observe(prev: &Snapshot, cur: &Snapshot) -> Result<Vec<ChangeEvent>, MonitorError> {
    if cur.clock < prev.clock {
        return Err(MonitorError::ClockRegression {
            prev: prev.clock,
            cur: cur.clock,
        });
    }
    if prev.slot_names != cur.slot_names || prev.intended != cur.intended {
        return Err(MonitorError::BlueprintMismatch);
    }
    let at = cur.clock;
    let mut changes = Vec::new();

    for (name, (old, new)) in cur.slot_names.iter().zip(prev.slots.iter().zip(&cur.slots)) {
        match (old, new) {
            (None, None) => {}
            (Some(_), None) => changes.push(Change::ComponentRemoved { slot: name.clone() }),
            (None, Some(v)) => changes.push(Change::ComponentAdded {
                slot: name.clone(),
                state: v.state,
                exception_count: v.exception_count,
            }),
            (Some(o), Some(n)) => {
                if o.state != n.state {
                    changes.push(Change::StateChanged {
                        slot: name.clone(),
                        old: o.state,
                        new: n.state,
                    });
                }
                if o.exception_count != n.exception_count {
                    changes.push(Change::ExceptionsChanged {
                        slot: name.clone(),
                        old: o.exception_count,
                        new: n.exception_count,
                    });
                }
            }
        }
    }

    let mut touched: Vec<(&Connector, bool)> = prev
        .connectors
        .symmetric_difference(&cur.connectors)
        .map(|c| (c, cur.connectors.contains(c)))
        .collect();
    touched.sort_by(|a, b| cur.connector_order(a.0).cmp(&cur.connector_order(b.0)));
    for (c, added) in touched {
        changes.push(if added {
            Change::ConnectorAdded(c.clone())
        } else {
            Change::ConnectorRemoved(c.clone())
        });
    }

    Ok(changes.into_iter().map(|change| ChangeEvent { change, at }).collect())
}
