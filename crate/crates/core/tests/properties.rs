mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use common::*;
use healsim::analyzer::{classify, RootCauseLedger};
use healsim::executor::{execute, RepairPlan};
use healsim::harness::{run_scenario, ExecutionRecord, ScenarioConfig};
use healsim::injector::{draw_fault, draw_interval, inject, FaultKind};
use healsim::model::{build_default_model, validate, Mutation, Subject, ViolationKind};
use healsim::monitor::{observe, take_snapshot};
use healsim::protocol::{decode, encode};
use healsim::rules::{evaluate, parse_rules, Strategy};
use healsim::Rng;

fn mutated_model(muts: &[(u8, usize, usize, u32)]) -> healsim::ArchitectureModel {
    let mut m = build_default_model();
    for raw in muts {
        let mutation = resolve_mutation(&m, *raw);
        let _ = m.apply(&mutation);
    }
    m
}

proptest! {
    #[test]
    fn dependencies_ignore_live_damage(muts in prop::collection::vec(arb_mutation(), 0..20)) {
        let fresh = build_default_model();
        let m = mutated_model(&muts);
        for s in SLOTS {
            prop_assert_eq!(m.dependencies_of(s).unwrap(), fresh.dependencies_of(s).unwrap());
        }
    }

    #[test]
    fn validate_is_pure_and_subjects_resolve(muts in prop::collection::vec(arb_mutation(), 0..20)) {
        let m = mutated_model(&muts);
        let before = m.clone();
        let v1 = validate(&m);
        prop_assert_eq!(&m, &before);
        prop_assert_eq!(&v1, &validate(&m));
        for v in &v1 {
            match &v.subject {
                Subject::Slot(s) => {
                    prop_assert!(m.blueprint().has_slot(s));
                    prop_assert!(v.kind != ViolationKind::MissingConnector);
                }
                Subject::Connector(c) => {
                    prop_assert!(m.blueprint().is_intended(c));
                    prop_assert_eq!(v.kind, ViolationKind::MissingConnector);
                }
            }
        }
    }

    #[test]
    fn connector_remove_add_restores(muts in prop::collection::vec(arb_mutation(), 0..10), idx in 0usize..9) {
        let mut m = mutated_model(&muts);
        let c = m.blueprint().intended_connectors()[idx].clone();
        if m.has_connector(&c) {
            let before: Vec<_> = m.live_connectors().into_iter().cloned().collect();
            m.apply(&Mutation::RemoveConnector(c.clone())).unwrap();
            m.apply(&Mutation::AddConnector(c)).unwrap();
            let after: Vec<_> = m.live_connectors().into_iter().cloned().collect();
            prop_assert_eq!(before, after);
        }
    }

    #[test]
    fn intervals_in_range(seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        for _ in 0..64 {
            let v = draw_interval(&mut rng);
            prop_assert!((100..=500).contains(&v));
        }
    }

    #[test]
    fn same_seed_same_faults(seed in any::<u64>()) {
        let m = build_default_model();
        let (mut a, mut b) = (Rng::new(seed), Rng::new(seed));
        for _ in 0..16 {
            prop_assert_eq!(draw_interval(&mut a), draw_interval(&mut b));
            prop_assert_eq!(draw_fault(&mut a, &m).unwrap(), draw_fault(&mut b, &m).unwrap());
        }
    }

    #[test]
    fn injection_always_breaks_and_stays_local(fault in arb_fault()) {
        let mut m = build_default_model();
        let before = m.clone();
        inject(&mut m, &fault).unwrap();
        prop_assert!(!validate(&m).is_empty());
        for s in SLOTS {
            let touched = fault.target.slot() == Some(s);
            if !touched {
                prop_assert_eq!(m.component(s), before.component(s));
            }
        }
        for c in before.live_connectors() {
            let expected_gone = match &fault.target {
                Subject::Connector(t) => t == c,
                Subject::Slot(s) => fault.kind == FaultKind::CF3 && c.touches(s),
            };
            prop_assert_eq!(m.has_connector(c), !expected_gone);
        }
    }

    #[test]
    fn observe_replays_to_current(muts in prop::collection::vec(arb_mutation(), 0..20)) {
        let start = build_default_model();
        let prev = take_snapshot(&start);
        prop_assert!(observe(&prev, &prev).unwrap().is_empty());
        let cur = take_snapshot(&mutated_model(&muts));
        let events = observe(&prev, &cur).unwrap();
        let mut replay = prev.clone();
        for e in &events {
            replay.apply(e);
        }
        prop_assert!(replay.same_content(&cur));
        prop_assert_eq!(events, observe(&prev, &cur).unwrap());
    }

    #[test]
    fn classify_inverts_inject(fault in arb_fault()) {
        let mut m = build_default_model();
        let prev = take_snapshot(&m);
        inject(&mut m, &fault).unwrap();
        let events = observe(&prev, &take_snapshot(&m)).unwrap();
        let reports = classify(&events, &m, m.exception_threshold(), 1);
        prop_assert_eq!(reports.len(), 1);
        prop_assert_eq!(reports[0].kind, fault.kind);
        prop_assert_eq!(&reports[0].subject, &fault.target);
        prop_assert_eq!(&reports, &classify(&events, &m, m.exception_threshold(), 1));
    }

    #[test]
    fn ledger_matches_recount_and_suspects_only_grow(faults in prop::collection::vec(arb_fault(), 0..30)) {
        let mut ledger = RootCauseLedger::new(3);
        let mut reports = Vec::new();
        let mut suspects: BTreeSet<String> = BTreeSet::new();
        for (i, f) in faults.iter().enumerate() {
            let mut m = build_default_model();
            let prev = take_snapshot(&m);
            inject(&mut m, f).unwrap();
            let events = observe(&prev, &take_snapshot(&m)).unwrap();
            for r in classify(&events, &m, m.exception_threshold(), i as u64 + 1) {
                ledger.record_failure(&r);
                reports.push(r);
            }
            let now: BTreeSet<String> = ledger.suspects().into_iter().map(|s| s.slot).collect();
            prop_assert!(suspects.is_subset(&now));
            suspects = now;
        }
        prop_assert_eq!(ledger.counters(), brute_force_recount(&reports));
    }

    #[test]
    fn rules_print_parse_identity(text in arb_rules_text()) {
        let rules = parse_rules(&text).unwrap();
        let printed = rules.to_string();
        prop_assert_eq!(parse_rules(&printed).unwrap(), rules);
    }

    #[test]
    fn evaluate_matches_reference(text in arb_rules_text(), fact in arb_fact()) {
        let rules = parse_rules(&text).unwrap();
        let got = evaluate(&rules, &fact).ok();
        prop_assert_eq!(&got, &naive_evaluate(&rules, &fact));
        prop_assert_eq!(got, evaluate(&rules, &fact).ok());
    }

    #[test]
    fn higher_salience_wins(lo in -5i64..5, gap in 1i64..5, fact in arb_fact(), flip in any::<bool>()) {
        let hi = lo + gap;
        let (first, second) = if flip { (hi, lo) } else { (lo, hi) };
        let text = format!(
            "rule \"a\" salience {first} when kind == {k} then AS1\nrule \"b\" salience {second} when kind == {k} then AS2\n",
            k = fact.kind
        );
        let plan = evaluate(&parse_rules(&text).unwrap(), &fact).unwrap();
        prop_assert_eq!(plan.strategy, if flip { Strategy::AS1 } else { Strategy::AS2 });
    }

    #[test]
    fn protocol_round_trip(msg in arb_message()) {
        let bytes = encode(&msg);
        prop_assert_eq!(bytes.iter().filter(|&&b| b == b'\n').count(), 1);
        prop_assert_eq!(decode(&bytes).unwrap(), msg);
    }

    #[test]
    fn encode_is_injective(a in arb_message(), b in arb_message()) {
        prop_assert_eq!(a == b, encode(&a) == encode(&b));
    }

    #[test]
    fn as3_is_idempotent(fault in arb_fault()) {
        let mut m = build_default_model();
        inject(&mut m, &fault).unwrap();
        if fault.kind == FaultKind::CF4 {
            let plan = RepairPlan { strategy: Strategy::AS3, subject: fault.target.clone(), fired_rule: "t".into() };
            execute(&mut m, &plan).unwrap();
            let once: Vec<_> = m.live_connectors().into_iter().cloned().collect();
            let _ = execute(&mut m, &plan);
            let twice: Vec<_> = m.live_connectors().into_iter().cloned().collect();
            prop_assert_eq!(once, twice);
            prop_assert!(validate(&m).is_empty());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fresh_instances_are_never_reused(seed in any::<u64>()) {
        let report = run_scenario(&ScenarioConfig { seed, rounds: 40, ..Default::default() }).unwrap();
        let mut seen: BTreeSet<u64> = (1..=7).collect();
        for r in &report.rounds {
            for e in &r.executions {
                if let ExecutionRecord::Applied(x) = e {
                    if let Some(id) = x.new_instance_id {
                        prop_assert!(seen.insert(id), "instance id {} reused", id);
                    }
                }
            }
        }
    }

    #[test]
    fn scenario_is_deterministic(seed in any::<u64>(), rounds in 0usize..30) {
        let config = ScenarioConfig { seed, rounds, ..Default::default() };
        let a = run_scenario(&config).unwrap();
        let b = run_scenario(&config).unwrap();
        prop_assert_eq!(a.to_json(), b.to_json());
        prop_assert_eq!(a.rounds_csv(), b.rounds_csv());
        let reports: Vec<_> = a.all_reports().cloned().collect();
        prop_assert_eq!(&a.ledger, &brute_force_recount(&reports));
    }
}
