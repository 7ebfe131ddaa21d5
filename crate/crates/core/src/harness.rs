//! Scenario driver: inject → monitor → analyze → plan → execute → verify.
//!
//! A round advances the logical clock by a drawn interval, injects one
//! fault (scripted or drawn), runs one MAPE cycle and validates the model.
//! Everything a round did is kept in a [`RoundRecord`]; a run's records,
//! ledger and suspects form the [`ScenarioReport`], which is written as
//! `scenario.json`, `rounds.csv` and `suspects.csv`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analyzer::{
    classify, suspects_csv, FailureReport, RootCauseLedger, RootCauseSuspect, DEFAULT_ROOTCAUSE_THRESHOLD,
};
use crate::executor::{execute, ExecutionResult, RepairPlan};
use crate::injector::{draw_fault, draw_interval, inject, FaultInstance, FaultKind, InjectError};
use crate::model::{
    validate, ArchitectureModel, Blueprint, BlueprintError, Connector, Mutation, Subject, Violation,
    DEFAULT_EXCEPTION_THRESHOLD,
};
use crate::monitor::{observe, take_snapshot};
use crate::planner::{FailureHistory, PlanDecision, Planner, PlannerError, PlannerSpec, DEFAULT_TIMEOUT};
use crate::protocol::canonical_json;
use crate::rng::Rng;
use crate::rules::{parse_rules, RuleError, RuleSet};

pub const ROUNDS_CSV_HEADER: [&str; 9] = [
    "round",
    "clock",
    "fault_kind",
    "fault_target",
    "reports",
    "plans",
    "strategies",
    "post_violations",
    "unhandled",
];

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("rules {path}: {source}")]
    Rules {
        path: String,
        #[source]
        source: RuleError,
    },
    #[error(transparent)]
    Blueprint(#[from] BlueprintError),
    #[error("script: {0}")]
    Script(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Planner(#[from] PlannerError),
}

impl HarnessError {
    pub fn is_planner_unreachable(&self) -> bool {
        matches!(
            self,
            HarnessError::Planner(PlannerError::ConnectionFailed { .. } | PlannerError::Timeout(_))
        )
    }
}

/// A fault as written in a script file. CF4 targets name their endpoints;
/// the interface is looked up in the blueprint unless given.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedFault {
    pub kind: FaultKind,
    pub target: ScriptTarget,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub magnitude: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum ScriptTarget {
    Slot(String),
    Connector {
        from: String,
        to: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        interface: Option<String>,
    },
}

impl ScriptedFault {
    pub fn slot(kind: FaultKind, slot: &str) -> ScriptedFault {
        ScriptedFault {
            kind,
            target: ScriptTarget::Slot(slot.to_string()),
            magnitude: None,
        }
    }

    pub fn connector(from: &str, to: &str) -> ScriptedFault {
        ScriptedFault {
            kind: FaultKind::CF4,
            target: ScriptTarget::Connector {
                from: from.to_string(),
                to: to.to_string(),
                interface: None,
            },
            magnitude: None,
        }
    }

    /// Checks the fault against the blueprint and fills in defaults (CF2
    /// magnitude is `exception_threshold + 1` when omitted).
    pub fn resolve(&self, blueprint: &Blueprint, exception_threshold: u32, at: u64) -> Result<FaultInstance, String> {
        let target = match &self.target {
            ScriptTarget::Slot(s) => {
                if !blueprint.has_slot(s) {
                    return Err(format!("unknown slot `{s}`"));
                }
                Subject::Slot(s.clone())
            }
            ScriptTarget::Connector { from, to, interface } => {
                let c = match interface {
                    Some(i) => Connector::new(from, to, i),
                    None => blueprint
                        .find_connector(from, to)
                        .cloned()
                        .ok_or_else(|| format!("no connector {from}->{to} in the blueprint"))?,
                };
                if !blueprint.is_intended(&c) {
                    return Err(format!("no connector {c} over `{}` in the blueprint", c.interface));
                }
                Subject::Connector(c)
            }
        };
        let magnitude = match self.kind {
            FaultKind::CF2 => Some(self.magnitude.unwrap_or(exception_threshold + 1)),
            _ => self.magnitude,
        };
        FaultInstance::new(self.kind, target, magnitude, at).map_err(|e| e.to_string())
    }
}

pub fn parse_script(text: &str) -> Result<Vec<ScriptedFault>, HarnessError> {
    serde_json::from_str(text).map_err(|e| HarnessError::Script(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub rounds: usize,
    pub exception_threshold: u32,
    pub rootcause_threshold: u32,
    pub planner: PlannerSpec,
    pub planner_timeout: Duration,
    /// `None` uses the bundled rules.
    pub rules_path: Option<PathBuf>,
    /// `None` uses the bundled blueprint.
    pub blueprint_path: Option<PathBuf>,
    /// Faults for the first rounds; later rounds draw at random.
    pub script: Option<Vec<ScriptedFault>>,
    pub script_path: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 0,
            rounds: 0,
            exception_threshold: DEFAULT_EXCEPTION_THRESHOLD,
            rootcause_threshold: DEFAULT_ROOTCAUSE_THRESHOLD,
            planner: PlannerSpec::InProc,
            planner_timeout: DEFAULT_TIMEOUT,
            rules_path: None,
            blueprint_path: None,
            script: None,
            script_path: None,
            out_dir: None,
        }
    }
}

/// The part of the config that is echoed into `scenario.json`. The output
/// directory is left out so that reruns elsewhere stay byte-identical.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfigEcho {
    pub seed: u64,
    pub rounds: usize,
    pub exception_threshold: u32,
    pub rootcause_threshold: u32,
    pub planner: String,
    pub rules: String,
    pub blueprint: String,
    pub script: Option<String>,
}

impl ConfigEcho {
    fn of(config: &ScenarioConfig) -> ConfigEcho {
        let path_or_default =
            |p: &Option<PathBuf>| p.as_ref().map_or("<default>".to_string(), |p| p.display().to_string());
        ConfigEcho {
            seed: config.seed,
            rounds: config.rounds,
            exception_threshold: config.exception_threshold,
            rootcause_threshold: config.rootcause_threshold,
            planner: config.planner.to_string(),
            rules: path_or_default(&config.rules_path),
            blueprint: path_or_default(&config.blueprint_path),
            script: match (&config.script_path, &config.script) {
                (Some(p), _) => Some(p.display().to_string()),
                (None, Some(_)) => Some("<inline>".to_string()),
                (None, None) => None,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanRecord {
    Plan(RepairPlan),
    NoMatch {
        report_id: u64,
    },
    RemoteError {
        report_id: u64,
        code: String,
        message: String,
    },
}

impl PlanRecord {
    fn label(&self) -> &str {
        match self {
            PlanRecord::Plan(p) => p.strategy.as_str(),
            PlanRecord::NoMatch { .. } => "NO_MATCH",
            PlanRecord::RemoteError { .. } => "ERROR",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionRecord {
    Applied(ExecutionResult),
    Failed { plan: RepairPlan, error: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    pub clock_start: u64,
    pub clock_end: u64,
    pub fault: Option<FaultInstance>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub injection_error: Option<String>,
    pub pre_violations: Vec<Violation>,
    pub reports: Vec<FailureReport>,
    pub plans: Vec<PlanRecord>,
    pub executions: Vec<ExecutionRecord>,
    pub violations: Vec<Violation>,
    pub unhandled: usize,
}

impl RoundRecord {
    pub fn verified(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScenarioReport {
    pub config: ConfigEcho,
    pub rounds: Vec<RoundRecord>,
    pub ledger: BTreeMap<String, usize>,
    pub suspects: Vec<RootCauseSuspect>,
    pub unhandled: usize,
}

impl ScenarioReport {
    pub fn to_json(&self) -> String {
        let mut s = canonical_json(self);
        s.push('\n');
        s
    }

    pub fn rounds_csv(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(ROUNDS_CSV_HEADER).expect("write to Vec");
        for r in &self.rounds {
            let (kind, target, clock) = match &r.fault {
                Some(f) => (f.kind.to_string(), f.target.to_string(), f.injected_at),
                None => (String::new(), String::new(), r.clock_start),
            };
            let plans = r.plans.iter().filter(|p| matches!(p, PlanRecord::Plan(_))).count();
            let strategies = r.plans.iter().map(PlanRecord::label).collect::<Vec<_>>().join(";");
            w.write_record([
                r.round.to_string(),
                clock.to_string(),
                kind,
                target,
                r.reports.len().to_string(),
                plans.to_string(),
                strategies,
                r.violations.len().to_string(),
                r.unhandled.to_string(),
            ])
            .expect("write to Vec");
        }
        w.into_inner().expect("flush to Vec")
    }

    pub fn suspects_csv(&self) -> Vec<u8> {
        suspects_csv(&self.suspects)
    }

    /// Every report of the run, in order.
    pub fn all_reports(&self) -> impl Iterator<Item = &FailureReport> {
        self.rounds.iter().flat_map(|r| &r.reports)
    }
}

/// Writes `scenario.json`, `rounds.csv` and `suspects.csv` into `out_dir`.
pub fn emit_reports(report: &ScenarioReport, out_dir: &Path) -> Result<(), HarnessError> {
    let write = |name: &str, bytes: &[u8]| {
        let path = out_dir.join(name);
        fs::write(&path, bytes).map_err(|source| HarnessError::Write { path, source })
    };
    fs::create_dir_all(out_dir).map_err(|source| HarnessError::Write {
        path: out_dir.to_path_buf(),
        source,
    })?;
    write("scenario.json", report.to_json().as_bytes())?;
    write("rounds.csv", &report.rounds_csv())?;
    write("suspects.csv", &report.suspects_csv())
}

/// Live state threaded through the rounds of one run.
pub struct Simulation {
    pub model: ArchitectureModel,
    pub rng: Rng,
    pub ledger: RootCauseLedger,
    pub history: FailureHistory,
    planner: Planner,
    exception_threshold: u32,
    next_report_id: u64,
    rounds_run: usize,
}

impl Simulation {
    pub fn new(model: ArchitectureModel, seed: u64, planner: Planner, rootcause_threshold: u32) -> Simulation {
        Simulation {
            exception_threshold: model.exception_threshold(),
            model,
            rng: Rng::new(seed),
            ledger: RootCauseLedger::new(rootcause_threshold),
            history: FailureHistory::default(),
            planner,
            next_report_id: 1,
            rounds_run: 0,
        }
    }

    /// One round. `scripted` replaces the random draw; the interval is drawn
    /// either way so a script does not shift the random stream.
    pub fn run_round(&mut self, scripted: Option<&ScriptedFault>) -> Result<RoundRecord, HarnessError> {
        self.rounds_run += 1;
        let clock_start = self.model.clock();
        let pre_violations = validate(&self.model);
        let interval = draw_interval(&mut self.rng);
        self.model
            .apply(&Mutation::AdvanceClock(interval))
            .expect("clock advance cannot fail");

        let drawn = match scripted {
            Some(s) => s
                .resolve(self.model.blueprint(), self.exception_threshold, self.model.clock())
                .map_err(HarnessError::Script),
            None => draw_fault(&mut self.rng, &self.model).map_err(|e| HarnessError::Script(e.to_string())),
        };
        let mut record = RoundRecord {
            round: self.rounds_run,
            clock_start,
            clock_end: clock_start,
            fault: None,
            injection_error: None,
            pre_violations,
            reports: vec![],
            plans: vec![],
            executions: vec![],
            violations: vec![],
            unhandled: 0,
        };
        let fault = match drawn {
            Ok(f) => f,
            Err(HarnessError::Script(e)) if scripted.is_none() => {
                // nothing left to break of the drawn kind
                record.injection_error = Some(e);
                return Ok(self.finish(record));
            }
            Err(e) => return Err(e),
        };

        let before = take_snapshot(&self.model);
        let injected = inject(&mut self.model, &fault);
        record.fault = Some(fault);
        if let Err(e) = injected {
            record.injection_error = Some(match e {
                InjectError::Model(m) => m.to_string(),
                other => other.to_string(),
            });
            return Ok(self.finish(record));
        }
        let after = take_snapshot(&self.model);
        let events = observe(&before, &after).expect("clock is monotone within a round");

        record.reports = classify(&events, &self.model, self.exception_threshold, self.next_report_id);
        self.next_report_id += record.reports.len() as u64;
        for report in &record.reports {
            self.ledger.record_failure(report);
        }

        for report in &record.reports {
            let decision = self.planner.request_plan(report, &self.history);
            self.history.record(report);
            let plan = match decision {
                Ok(PlanDecision::Plan(plan)) => plan,
                Ok(PlanDecision::NoMatch) => {
                    record.plans.push(PlanRecord::NoMatch {
                        report_id: report.report_id,
                    });
                    record.unhandled += 1;
                    continue;
                }
                Err(PlannerError::RemoteError { code, message }) => {
                    record.plans.push(PlanRecord::RemoteError {
                        report_id: report.report_id,
                        code,
                        message,
                    });
                    record.unhandled += 1;
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            record.plans.push(PlanRecord::Plan(plan.clone()));
            match execute(&mut self.model, &plan) {
                Ok(result) => record.executions.push(ExecutionRecord::Applied(result)),
                Err(e) => {
                    record.unhandled += 1;
                    record.executions.push(ExecutionRecord::Failed {
                        plan,
                        error: e.to_string(),
                    });
                }
            }
        }
        Ok(self.finish(record))
    }

    fn finish(&self, mut record: RoundRecord) -> RoundRecord {
        record.violations = validate(&self.model);
        record.clock_end = self.model.clock();
        record
    }
}

pub fn load_rules(path: Option<&Path>) -> Result<RuleSet, HarnessError> {
    match path {
        None => Ok(RuleSet::default_rules()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|source| HarnessError::Read {
                path: p.to_path_buf(),
                source,
            })?;
            parse_rules(&text).map_err(|source| HarnessError::Rules {
                path: p.display().to_string(),
                source,
            })
        }
    }
}

fn load_script(config: &ScenarioConfig) -> Result<Vec<ScriptedFault>, HarnessError> {
    if let Some(s) = &config.script {
        return Ok(s.clone());
    }
    match &config.script_path {
        None => Ok(Vec::new()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|source| HarnessError::Read {
                path: p.clone(),
                source,
            })?;
            parse_script(&text)
        }
    }
}

/// Runs `config.rounds` rounds and, if `out_dir` is set, writes the report
/// files there. Rules, blueprint and script are all checked before the
/// first round.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioReport, HarnessError> {
    if config.exception_threshold < 1 || config.rootcause_threshold < 1 {
        return Err(HarnessError::Config("thresholds must be at least 1".into()));
    }
    let blueprint = match &config.blueprint_path {
        Some(p) => Blueprint::load(p)?,
        None => Blueprint::default_shop(),
    };
    let rules = load_rules(config.rules_path.as_deref())?;
    let script = load_script(config)?;
    for (i, s) in script.iter().enumerate() {
        s.resolve(&blueprint, config.exception_threshold, 0)
            .map_err(|e| HarnessError::Script(format!("entry {}: {e}", i + 1)))?;
    }
    let planner = match &config.planner {
        PlannerSpec::InProc => Planner::in_proc(rules),
        PlannerSpec::Remote(addr) => Planner::remote(addr.clone(), config.planner_timeout),
    };

    let model = ArchitectureModel::from_blueprint(blueprint).with_exception_threshold(config.exception_threshold);
    let mut sim = Simulation::new(model, config.seed, planner, config.rootcause_threshold);
    let mut rounds = Vec::with_capacity(config.rounds);
    for i in 0..config.rounds {
        rounds.push(sim.run_round(script.get(i))?);
    }

    let report = ScenarioReport {
        config: ConfigEcho::of(config),
        unhandled: rounds.iter().map(|r| r.unhandled).sum(),
        rounds,
        ledger: sim.ledger.counters(),
        suspects: sim.ledger.suspects(),
    };
    if let Some(dir) = &config.out_dir {
        emit_reports(&report, dir)?;
    }
    Ok(report)
}
