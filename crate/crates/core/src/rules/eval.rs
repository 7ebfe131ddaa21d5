use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Condition, Fact, Field, Literal, Op, Rule, RuleSet, Strategy};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("no rule matches {} on {}", .0.kind, .0.subject)]
    NoMatchingRule(Fact),
}

/// The rule engine's answer: which strategy, for what, and why.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Plan {
    pub strategy: Strategy,
    pub subject: String,
    pub fired_rule: String,
}

fn compare<T: Ord + ?Sized>(op: Op, lhs: &T, rhs: &T) -> bool {
    match op {
        Op::Eq => lhs == rhs,
        Op::Ne => lhs != rhs,
        Op::Gt => lhs > rhs,
        Op::Ge => lhs >= rhs,
        Op::Lt => lhs < rhs,
        Op::Le => lhs <= rhs,
    }
}

impl Condition {
    /// Total on any fact; a parsed condition is always well-typed.
    pub fn matches(&self, fact: &Fact) -> bool {
        match self {
            Condition::Compare { field, op, value } => match (field, value) {
                (Field::Kind, Literal::Kind(k)) => compare(*op, &fact.kind, k),
                (Field::Subject, Literal::Str(s)) => compare(*op, fact.subject.as_str(), s.as_str()),
                (Field::ExceptionCount, Literal::Int(n)) => compare(*op, &fact.exception_count, n),
                (Field::DependentCount, Literal::Int(n)) => compare(*op, &fact.dependent_count, n),
                (Field::PriorFailuresOfSubject, Literal::Int(n)) => compare(*op, &fact.prior_failures_of_subject, n),
                // ill-typed comparisons cannot come out of the parser
                _ => false,
            },
            Condition::Not(inner) => !inner.matches(fact),
            Condition::And(items) => items.iter().all(|c| c.matches(fact)),
            Condition::Or(items) => items.iter().any(|c| c.matches(fact)),
        }
    }
}

/// Picks the matching rule with the highest salience; the earliest rule in
/// file order wins a tie.
pub fn evaluate(rules: &RuleSet, fact: &Fact) -> Result<Plan, EvalError> {
    let mut best: Option<&Rule> = None;
    for rule in rules.rules().iter().filter(|r| r.condition.matches(fact)) {
        if best.is_none_or(|b| rule.salience > b.salience) {
            best = Some(rule);
        }
    }
    best.map(|r| Plan {
        strategy: r.strategy,
        subject: fact.subject.clone(),
        fired_rule: r.name.clone(),
    })
    .ok_or_else(|| EvalError::NoMatchingRule(fact.clone()))
}
