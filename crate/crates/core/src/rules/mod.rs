//! Adaptation rules: a small condition language mapping failure facts to
//! repair strategies.
//!
//! ```text
//! # comment
//! rule "escalate" salience 10
//!     when kind == CF1 and prior_failures_of_subject >= 2
//!     then AS4
//! ```
//!
//! Rules are matched against a single [`Fact`]. Among the matching rules the
//! highest salience wins; equal salience falls back to file order.

mod eval;
mod parser;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::injector::FaultKind;

pub use eval::{evaluate, EvalError, Plan};
pub use parser::{parse_rules, RuleError};

const DEFAULT_RULES: &str = include_str!("../../rules/default.rules");

/// Repair strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    /// Restart the component.
    AS1,
    /// Redeploy the component.
    AS2,
    /// Re-establish a connector.
    AS3,
    /// Replace the component with a fresh instance of the same type.
    AS4,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::AS1, Strategy::AS2, Strategy::AS3, Strategy::AS4];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::AS1 => "AS1",
            Strategy::AS2 => "AS2",
            Strategy::AS3 => "AS3",
            Strategy::AS4 => "AS4",
        }
    }

    pub fn parse(s: &str) -> Option<Strategy> {
        Strategy::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What the planner knows about one failure.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fact {
    pub kind: FaultKind,
    pub subject: String,
    pub exception_count: i64,
    pub dependent_count: i64,
    pub prior_failures_of_subject: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Field {
    Kind,
    Subject,
    ExceptionCount,
    DependentCount,
    PriorFailuresOfSubject,
}

impl Field {
    pub const ALL: [Field; 5] = [
        Field::Kind,
        Field::Subject,
        Field::ExceptionCount,
        Field::DependentCount,
        Field::PriorFailuresOfSubject,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Field::Kind => "kind",
            Field::Subject => "subject",
            Field::ExceptionCount => "exception_count",
            Field::DependentCount => "dependent_count",
            Field::PriorFailuresOfSubject => "prior_failures_of_subject",
        }
    }

    pub fn parse(s: &str) -> Option<Field> {
        Field::ALL.into_iter().find(|f| f.as_str() == s)
    }

    pub fn is_integer(self) -> bool {
        !matches!(self, Field::Kind | Field::Subject)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Eq,
    Ne,
    Gt,
    Ge,
    Lt,
    Le,
}

impl Op {
    pub fn as_str(self) -> &'static str {
        match self {
            Op::Eq => "==",
            Op::Ne => "!=",
            Op::Gt => ">",
            Op::Ge => ">=",
            Op::Lt => "<",
            Op::Le => "<=",
        }
    }

    pub fn is_ordering(self) -> bool {
        !matches!(self, Op::Eq | Op::Ne)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Literal {
    Kind(FaultKind),
    Str(String),
    Int(i64),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Condition {
    Compare { field: Field, op: Op, value: Literal },
    Not(Box<Condition>),
    And(Vec<Condition>),
    Or(Vec<Condition>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Rule {
    pub name: String,
    pub salience: i64,
    pub condition: Condition,
    pub strategy: Strategy,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct RuleSet {
    rules: Vec<Rule>,
}

impl RuleSet {
    /// The bundled rule file: one rule per failure class.
    pub fn default_rules() -> RuleSet {
        parse_rules(DEFAULT_RULES).expect("bundled rules parse")
    }

    pub fn default_rules_text() -> &'static str {
        DEFAULT_RULES
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }
}

fn write_quoted(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("\"")?;
    for ch in s.chars() {
        match ch {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("\"")
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Kind(k) => write!(f, "{k}"),
            Literal::Str(s) => write_quoted(f, s),
            Literal::Int(i) => write!(f, "{i}"),
        }
    }
}

impl Condition {
    fn write_operand(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Compare { .. } => write!(f, "{self}"),
            _ => write!(f, "({self})"),
        }
    }
}

// Compound operands are always parenthesized, so printing and reparsing
// reproduces the same tree.
impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Compare { field, op, value } => {
                write!(f, "{} {} {}", field.as_str(), op.as_str(), value)
            }
            Condition::Not(inner) => {
                f.write_str("not ")?;
                inner.write_operand(f)
            }
            Condition::And(items) | Condition::Or(items) => {
                let sep = if matches!(self, Condition::And(_)) {
                    " and "
                } else {
                    " or "
                };
                for (i, c) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    c.write_operand(f)?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("rule ")?;
        write_quoted(f, &self.name)?;
        if self.salience != 0 {
            write!(f, " salience {}", self.salience)?;
        }
        write!(f, " when {} then {}", self.condition, self.strategy)
    }
}

impl fmt::Display for RuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}
