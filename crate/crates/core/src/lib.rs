//! A self-healing architecture simulator.
//!
//! Faults are injected into a component/connector model of a small online
//! shop. A MAPE loop then notices them ([`monitor`]), classifies them and
//! tracks which dependencies keep getting blamed ([`analyzer`]), asks a rule
//! engine for a repair ([`rules`], optionally across a TCP socket via
//! [`service`]), applies the repair ([`executor`]) and checks the result
//! against the blueprint ([`model::validate`]). [`harness`] drives whole
//! scenarios; [`sweep`] runs independent cases in parallel.

pub mod analyzer;
pub mod executor;
pub mod harness;
pub mod injector;
pub mod model;
pub mod monitor;
pub mod planner;
pub mod protocol;
pub mod rng;
pub mod rules;
pub mod service;
pub mod sweep;

mod par;

pub use analyzer::{FailureReport, RootCauseLedger, RootCauseSuspect};
pub use executor::{execute, ExecutionResult, RepairPlan};
pub use harness::{run_scenario, ScenarioConfig, ScenarioReport};
pub use injector::{FaultInstance, FaultKind};
pub use model::{build_default_model, validate, ArchitectureModel, Blueprint, Connector, Subject, Violation};
pub use rng::Rng;
pub use rules::{evaluate, parse_rules, Fact, RuleSet, Strategy};
