//! Analyze stage: failure classification and dependent-component blame.
//!
//! Each failure of a component is also counted against every component it
//! depends on (per the blueprint). A dependency whose count reaches the
//! ledger threshold is reported as a possible root cause, while the failed
//! component itself is still repaired as usual.

use std::collections::BTreeMap;
use std::io;
use std::path::Path;

use serde::Serialize;

use crate::injector::FaultKind;
use crate::model::{ArchitectureModel, ComponentState, Subject};
use crate::monitor::{Change, ChangeEvent};

/// Root-cause threshold used when no other value is configured.
pub const DEFAULT_ROOTCAUSE_THRESHOLD: u32 = 3;

pub const SUSPECT_CSV_HEADER: [&str; 5] = ["component", "count", "implicated_by", "first_at", "last_at"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FailureReport {
    pub report_id: u64,
    pub kind: FaultKind,
    pub subject: Subject,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exception_count: Option<u32>,
    pub detected_at: u64,
    pub dependent_slots: Vec<String>,
}

impl FailureReport {
    /// The failed component, if the failure has one (CF4 does not).
    pub fn failed_slot(&self) -> Option<&str> {
        match self.kind {
            FaultKind::CF4 => None,
            _ => self.subject.slot(),
        }
    }
}

/// Turns change events into failure reports, numbering them from `first_id`.
///
/// A connector removal whose endpoint is absent in `model` is part of a
/// component removal and is not reported on its own.
pub fn classify(
    events: &[ChangeEvent],
    model: &ArchitectureModel,
    exception_threshold: u32,
    first_id: u64,
) -> Vec<FailureReport> {
    let mut reports = Vec::new();
    for event in events {
        let (kind, subject, exception_count) = match &event.change {
            Change::StateChanged {
                slot,
                new: ComponentState::Unknown,
                ..
            } => (FaultKind::CF1, Subject::Slot(slot.clone()), None),
            Change::ExceptionsChanged { slot, new, .. } if *new > exception_threshold => {
                (FaultKind::CF2, Subject::Slot(slot.clone()), Some(*new))
            }
            Change::ComponentRemoved { slot } => (FaultKind::CF3, Subject::Slot(slot.clone()), None),
            Change::ConnectorRemoved(c) if model.is_present(&c.from) && model.is_present(&c.to) => {
                (FaultKind::CF4, Subject::Connector(c.clone()), None)
            }
            _ => continue,
        };
        let dependent_slots = match (&subject, kind) {
            (Subject::Slot(slot), _) => model.dependencies_of(slot).unwrap_or_default(),
            _ => Vec::new(),
        };
        reports.push(FailureReport {
            report_id: first_id + reports.len() as u64,
            kind,
            subject,
            exception_count,
            detected_at: event.at,
            dependent_slots,
        });
    }
    reports
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Implication {
    pub report_id: u64,
    pub failed_slot: String,
    pub at: u64,
}

/// Per-slot blame counters. A slot's counter is the number of recorded
/// failures that listed it as a dependency; it never decreases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootCauseLedger {
    implications: BTreeMap<String, Vec<Implication>>,
    threshold: u32,
}

impl Default for RootCauseLedger {
    fn default() -> Self {
        RootCauseLedger::new(DEFAULT_ROOTCAUSE_THRESHOLD)
    }
}

impl RootCauseLedger {
    pub fn new(threshold: u32) -> RootCauseLedger {
        RootCauseLedger {
            implications: BTreeMap::new(),
            threshold,
        }
    }

    pub fn threshold(&self) -> u32 {
        self.threshold
    }

    pub fn counter(&self, slot: &str) -> usize {
        self.implications.get(slot).map_or(0, Vec::len)
    }

    /// Non-zero counters by slot name.
    pub fn counters(&self) -> BTreeMap<String, usize> {
        self.implications.iter().map(|(k, v)| (k.clone(), v.len())).collect()
    }

    pub fn implications(&self, slot: &str) -> &[Implication] {
        self.implications.get(slot).map_or(&[], Vec::as_slice)
    }

    /// Blames every dependency of the failed component. CF4 reports have no
    /// failed component and leave the ledger alone.
    pub fn record_failure(&mut self, report: &FailureReport) {
        let Some(failed) = report.failed_slot() else {
            return;
        };
        for dep in &report.dependent_slots {
            self.implications.entry(dep.clone()).or_default().push(Implication {
                report_id: report.report_id,
                failed_slot: failed.to_string(),
                at: report.detected_at,
            });
        }
    }

    /// Slots whose counter reached the threshold, highest count first, ties
    /// by name.
    pub fn suspects(&self) -> Vec<RootCauseSuspect> {
        let mut out: Vec<RootCauseSuspect> = self
            .implications
            .iter()
            .filter(|(_, imps)| imps.len() >= self.threshold as usize)
            .map(|(slot, imps)| RootCauseSuspect {
                slot: slot.clone(),
                count: imps.len(),
                implicated_by: imps.iter().map(|i| i.failed_slot.clone()).collect(),
                first_at: imps.first().map_or(0, |i| i.at),
                last_at: imps.last().map_or(0, |i| i.at),
            })
            .collect();
        out.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.slot.cmp(&b.slot)));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RootCauseSuspect {
    pub slot: String,
    pub count: usize,
    pub implicated_by: Vec<String>,
    pub first_at: u64,
    pub last_at: u64,
}

/// Renders suspects as CSV (LF line endings, header always present).
pub fn suspects_csv(suspects: &[RootCauseSuspect]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(SUSPECT_CSV_HEADER).expect("write to Vec");
    for s in suspects {
        w.write_record([
            s.slot.clone(),
            s.count.to_string(),
            s.implicated_by.join(";"),
            s.first_at.to_string(),
            s.last_at.to_string(),
        ])
        .expect("write to Vec");
    }
    w.into_inner().expect("flush to Vec")
}

pub fn write_suspect_report(suspects: &[RootCauseSuspect], path: impl AsRef<Path>) -> io::Result<()> {
    std::fs::write(path, suspects_csv(suspects))
}
