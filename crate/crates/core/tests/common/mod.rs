//! Generators and reference implementations shared by the property and
//! acceptance suites.
#![allow(dead_code)]

use std::collections::BTreeMap;

use proptest::prelude::*;

use healsim::analyzer::FailureReport;
use healsim::injector::{FaultInstance, FaultKind};
use healsim::model::{ArchitectureModel, ComponentState, Connector, Mutation, Subject};
use healsim::protocol::{Message, Outcome, PlanRequest, PlanResponse};
use healsim::rules::{Condition, Fact, Field, Literal, Op, Plan, Rule, RuleSet, Strategy as Repair};

pub const SLOTS: [&str; 7] = [
    "Frontend",
    "Auth Service",
    "Query Service",
    "Reputation Service",
    "Last Second Sales Item Filter",
    "Bid Service",
    "Persistence Service",
];

pub fn arb_kind() -> impl Strategy<Value = FaultKind> {
    prop::sample::select(FaultKind::ALL.to_vec())
}

pub fn arb_strategy() -> impl Strategy<Value = Repair> {
    prop::sample::select(Repair::ALL.to_vec())
}

pub fn arb_state() -> impl Strategy<Value = ComponentState> {
    prop::sample::select(vec![
        ComponentState::Started,
        ComponentState::Stopped,
        ComponentState::Undeployed,
        ComponentState::Unknown,
    ])
}

fn arb_subject_text() -> impl Strategy<Value = String> {
    prop_oneof![
        prop::sample::select(SLOTS.to_vec()).prop_map(String::from),
        Just("Query Service->Reputation Service".to_string()),
        "[a-z \"\\\\]{0,6}",
    ]
}

pub fn arb_fact() -> impl Strategy<Value = Fact> {
    (arb_kind(), arb_subject_text(), -2i64..8, 0i64..4, 0i64..4).prop_map(|(kind, subject, e, d, p)| Fact {
        kind,
        subject,
        exception_count: e,
        dependent_count: d,
        prior_failures_of_subject: p,
    })
}

fn arb_op(ordering: bool) -> BoxedStrategy<Op> {
    if ordering {
        prop::sample::select(vec![Op::Eq, Op::Ne, Op::Gt, Op::Ge, Op::Lt, Op::Le]).boxed()
    } else {
        prop::sample::select(vec![Op::Eq, Op::Ne]).boxed()
    }
}

fn arb_compare() -> impl Strategy<Value = Condition> {
    prop::sample::select(Field::ALL.to_vec()).prop_flat_map(|field| {
        let value: BoxedStrategy<Literal> = match field {
            Field::Kind => arb_kind().prop_map(Literal::Kind).boxed(),
            Field::Subject => arb_subject_text().prop_map(Literal::Str).boxed(),
            _ => (-3i64..6).prop_map(Literal::Int).boxed(),
        };
        (arb_op(field.is_integer()), value).prop_map(move |(op, value)| Condition::Compare { field, op, value })
    })
}

/// Well-typed conditions in the shape the parser produces: `and`/`or`
/// nodes have at least two operands.
pub fn arb_condition() -> impl Strategy<Value = Condition> {
    arb_compare().prop_recursive(3, 16, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(|c| Condition::Not(Box::new(c))),
            prop::collection::vec(inner.clone(), 2..4).prop_map(Condition::And),
            prop::collection::vec(inner, 2..4).prop_map(Condition::Or),
        ]
    })
}

/// Rule files with unique names `r0, r1, …`. Salience is drawn from a
/// narrow range so ties are common.
pub fn arb_rules_text() -> impl Strategy<Value = String> {
    prop::collection::vec((-2i64..3, arb_condition(), arb_strategy()), 0..7).prop_map(|rules| {
        rules
            .into_iter()
            .enumerate()
            .map(|(i, (salience, condition, strategy))| {
                Rule {
                    name: format!("r{i}"),
                    salience,
                    condition,
                    strategy,
                }
                .to_string()
                    + "\n"
            })
            .collect()
    })
}

/// Reference conflict resolution: filter the matches, sort by
/// (−salience, position), take the first.
pub fn naive_evaluate(rules: &RuleSet, fact: &Fact) -> Option<Plan> {
    let mut matching: Vec<(usize, &Rule)> = rules
        .rules()
        .iter()
        .enumerate()
        .filter(|(_, r)| r.condition.matches(fact))
        .collect();
    matching.sort_by_key(|(i, r)| (-r.salience, *i));
    matching.first().map(|(_, r)| Plan {
        strategy: r.strategy,
        subject: fact.subject.clone(),
        fired_rule: r.name.clone(),
    })
}

pub fn arb_message() -> impl Strategy<Value = Message> {
    let outcome = prop_oneof![
        (arb_strategy(), "\\PC{0,12}", "\\PC{0,12}").prop_map(|(strategy, subject, fired_rule)| Outcome::Plan(Plan {
            strategy,
            subject,
            fired_rule
        })),
        Just(Outcome::NoMatch),
        ("[a-z_]{1,10}", "\\PC{0,20}").prop_map(|(code, message)| Outcome::Error { code, message }),
    ];
    let fact =
        (arb_kind(), "\\PC{0,16}", any::<i64>(), any::<i64>(), any::<i64>()).prop_map(|(kind, subject, e, d, p)| {
            Fact {
                kind,
                subject,
                exception_count: e,
                dependent_count: d,
                prior_failures_of_subject: p,
            }
        });
    prop_oneof![
        (any::<u64>(), fact).prop_map(|(request_id, fact)| Message::Request(PlanRequest { request_id, fact })),
        (any::<u64>(), outcome)
            .prop_map(|(request_id, outcome)| Message::Response(PlanResponse { request_id, outcome })),
    ]
}

/// A raw mutation drawn by index so it can be resolved against any model.
/// Many of these fail to apply; callers ignore the errors.
pub fn arb_mutation() -> impl Strategy<Value = (u8, usize, usize, u32)> {
    (0u8..8, 0usize..16, 0usize..16, 0u32..8)
}

pub fn resolve_mutation(model: &ArchitectureModel, (tag, a, b, n): (u8, usize, usize, u32)) -> Mutation {
    let bp = model.blueprint();
    let slot = bp.slots()[a % bp.slots().len()].name.clone();
    let conn = bp.intended_connectors()[b % bp.intended_connectors().len()].clone();
    let states = [
        ComponentState::Started,
        ComponentState::Stopped,
        ComponentState::Undeployed,
        ComponentState::Unknown,
    ];
    match tag {
        0 => Mutation::SetState {
            slot,
            state: states[n as usize % 4],
        },
        1 => Mutation::AddExceptions { slot, count: n },
        2 => Mutation::ResetExceptions { slot },
        3 => Mutation::RemoveComponent { slot },
        4 => Mutation::RemoveConnector(conn),
        5 => Mutation::AddConnector(conn),
        6 => Mutation::Instantiate {
            slot,
            instance_id: model.fresh_instance_id(),
        },
        _ => Mutation::AdvanceClock(n as u64),
    }
}

/// A fault on any slot or intended connector of the default blueprint.
pub fn arb_fault() -> impl Strategy<Value = FaultInstance> {
    (arb_kind(), 0usize..16, 0u32..10).prop_map(|(kind, idx, extra)| {
        let bp = healsim::Blueprint::default_shop();
        let (target, magnitude) = match kind {
            FaultKind::CF4 => {
                let c: Connector = bp.intended_connectors()[idx % 9].clone();
                (Subject::Connector(c), None)
            }
            FaultKind::CF2 => (Subject::Slot(SLOTS[idx % 7].into()), Some(6 + extra)),
            _ => (Subject::Slot(SLOTS[idx % 7].into()), None),
        };
        FaultInstance::new(kind, target, magnitude, 0).unwrap()
    })
}

/// Per-slot count of reports naming it as a dependency, counted afresh.
pub fn brute_force_recount(reports: &[FailureReport]) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for r in reports {
        if r.kind == FaultKind::CF4 {
            continue;
        }
        for s in SLOTS {
            let n = r.dependent_slots.iter().filter(|d| d.as_str() == s).count();
            if n > 0 {
                *out.entry(s.to_string()).or_insert(0) += n;
            }
        }
    }
    out
}
