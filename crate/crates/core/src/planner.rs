//! Plan stage client: ask the rule engine in-process or over TCP.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;

use crate::analyzer::FailureReport;
use crate::executor::RepairPlan;
use crate::protocol::{decode, encode, read_frame, Message, Outcome, PlanRequest};
use crate::rules::{evaluate, Fact, Plan, RuleSet};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_millis(1000);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlannerError {
    #[error("cannot reach planner at {addr}: {reason}")]
    ConnectionFailed { addr: String, reason: String },
    #[error("planner at {0} did not answer in time")]
    Timeout(String),
    #[error("planner error {code}: {message}")]
    RemoteError { code: String, message: String },
    #[error("planner protocol violation: {0}")]
    Protocol(String),
}

/// Where plans come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlannerSpec {
    InProc,
    Remote(String),
}

impl PlannerSpec {
    /// Parses `inproc` or `tcp://HOST:PORT`.
    pub fn parse(s: &str) -> Result<PlannerSpec, String> {
        if s == "inproc" {
            return Ok(PlannerSpec::InProc);
        }
        match s.strip_prefix("tcp://") {
            Some(addr) if !addr.is_empty() => Ok(PlannerSpec::Remote(addr.to_string())),
            _ => Err(format!("planner must be `inproc` or `tcp://HOST:PORT`, got `{s}`")),
        }
    }
}

impl fmt::Display for PlannerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlannerSpec::InProc => f.write_str("inproc"),
            PlannerSpec::Remote(addr) => write!(f, "tcp://{addr}"),
        }
    }
}

/// Failures seen so far, by rendered subject.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FailureHistory {
    counts: BTreeMap<String, i64>,
}

impl FailureHistory {
    pub fn prior_failures(&self, subject: &str) -> i64 {
        self.counts.get(subject).copied().unwrap_or(0)
    }

    pub fn record(&mut self, report: &FailureReport) {
        *self.counts.entry(report.subject.to_string()).or_default() += 1;
    }
}

pub fn fact_for(report: &FailureReport, history: &FailureHistory) -> Fact {
    let subject = report.subject.to_string();
    Fact {
        kind: report.kind,
        exception_count: report.exception_count.map_or(0, i64::from),
        dependent_count: report.dependent_slots.len() as i64,
        prior_failures_of_subject: history.prior_failures(&subject),
        subject,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanDecision {
    Plan(RepairPlan),
    NoMatch,
}

pub struct RemotePlanner {
    addr: String,
    timeout: Duration,
    conn: Option<(TcpStream, BufReader<TcpStream>)>,
    next_request_id: u64,
}

impl RemotePlanner {
    pub fn new(addr: impl Into<String>, timeout: Duration) -> RemotePlanner {
        RemotePlanner {
            addr: addr.into(),
            timeout,
            conn: None,
            next_request_id: 1,
        }
    }

    fn connect(&mut self) -> Result<&mut (TcpStream, BufReader<TcpStream>), PlannerError> {
        if self.conn.is_none() {
            let failed = |reason: String| PlannerError::ConnectionFailed {
                addr: self.addr.clone(),
                reason,
            };
            let sock = self
                .addr
                .to_socket_addrs()
                .map_err(|e| failed(e.to_string()))?
                .next()
                .ok_or_else(|| failed("address resolves to nothing".into()))?;
            let stream = TcpStream::connect_timeout(&sock, self.timeout).map_err(|e| failed(e.to_string()))?;
            let setup = || -> io::Result<(TcpStream, BufReader<TcpStream>)> {
                stream.set_read_timeout(Some(self.timeout))?;
                stream.set_write_timeout(Some(self.timeout))?;
                stream.set_nodelay(true)?;
                Ok((stream.try_clone()?, BufReader::new(stream.try_clone()?)))
            };
            self.conn = Some(setup().map_err(|e| failed(e.to_string()))?);
        }
        Ok(self.conn.as_mut().unwrap())
    }

    fn io_error(&self, e: io::Error) -> PlannerError {
        match e.kind() {
            io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut => PlannerError::Timeout(self.addr.clone()),
            _ => PlannerError::ConnectionFailed {
                addr: self.addr.clone(),
                reason: e.to_string(),
            },
        }
    }

    /// One request/response round trip.
    pub fn ask(&mut self, fact: &Fact) -> Result<Outcome, PlannerError> {
        let request_id = self.next_request_id;
        self.next_request_id += 1;
        let frame = encode(&Message::Request(PlanRequest {
            request_id,
            fact: fact.clone(),
        }));
        let result = self.round_trip(&frame);
        if result.is_err() {
            // a connection in an unknown state is not reused
            self.conn = None;
        }
        match decode(&result?).map_err(|e| PlannerError::Protocol(e.to_string()))? {
            Message::Response(r) if r.request_id == request_id => Ok(r.outcome),
            Message::Response(r) => Err(PlannerError::Protocol(format!(
                "response id {} does not match request id {request_id}",
                r.request_id
            ))),
            Message::Request(_) => Err(PlannerError::Protocol("planner sent a request".into())),
        }
    }

    fn round_trip(&mut self, frame: &[u8]) -> Result<Vec<u8>, PlannerError> {
        let (writer, reader) = self.connect()?;
        let sent = writer.write_all(frame).and_then(|_| writer.flush());
        let received = sent.and_then(|_| read_frame(reader));
        match received {
            Ok(Some(bytes)) => Ok(bytes),
            Ok(None) => Err(PlannerError::ConnectionFailed {
                addr: self.addr.clone(),
                reason: "connection closed".into(),
            }),
            Err(e) => Err(self.io_error(e)),
        }
    }
}

/// A planner handle in one of its two modes.
pub enum Planner {
    InProc(Arc<RuleSet>),
    Remote(RemotePlanner),
}

impl Planner {
    pub fn in_proc(rules: RuleSet) -> Planner {
        Planner::InProc(Arc::new(rules))
    }

    pub fn remote(addr: impl Into<String>, timeout: Duration) -> Planner {
        Planner::Remote(RemotePlanner::new(addr, timeout))
    }

    /// Plans for a bare fact. Both modes return identical outcomes for the
    /// same rules.
    pub fn plan_fact(&mut self, fact: &Fact) -> Result<Option<Plan>, PlannerError> {
        match self {
            Planner::InProc(rules) => Ok(evaluate(rules, fact).ok()),
            Planner::Remote(remote) => match remote.ask(fact)? {
                Outcome::Plan(p) => Ok(Some(p)),
                Outcome::NoMatch => Ok(None),
                Outcome::Error { code, message } => Err(PlannerError::RemoteError { code, message }),
            },
        }
    }

    pub fn request_plan(
        &mut self,
        report: &FailureReport,
        history: &FailureHistory,
    ) -> Result<PlanDecision, PlannerError> {
        let fact = fact_for(report, history);
        Ok(match self.plan_fact(&fact)? {
            Some(plan) => {
                if plan.subject != fact.subject {
                    return Err(PlannerError::Protocol(format!(
                        "plan subject `{}` does not match `{}`",
                        plan.subject, fact.subject
                    )));
                }
                PlanDecision::Plan(RepairPlan {
                    strategy: plan.strategy,
                    subject: report.subject.clone(),
                    fired_rule: plan.fired_rule,
                })
            }
            None => PlanDecision::NoMatch,
        })
    }
}
