//! Runtime architecture model.
//!
//! An [`ArchitectureModel`] is the live component/connector graph of one
//! shop, paired with the [`Blueprint`] it was instantiated from. The
//! blueprint is the intended architecture: [`validate`] reports every
//! deviation from it, and repairs use it to recreate what was lost.
//!
//! Connectors are identified at the slot level (`from`, `to`, `interface`).
//! Slot identity survives instance replacement, so a connector between two
//! slots stays the same connector after either endpoint is swapped.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const DEFAULT_BLUEPRINT: &str = include_str!("../blueprints/default.json");

/// Exception threshold used when no other value is configured.
pub const DEFAULT_EXCEPTION_THRESHOLD: u32 = 5;

#[derive(Debug, Error)]
pub enum BlueprintError {
    #[error("blueprint is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot read blueprint {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("duplicate component type `{0}`")]
    DuplicateType(String),
    #[error("type `{type_name}` requires `{interface}` more than once")]
    DuplicateRequirement { type_name: String, interface: String },
    #[error("duplicate slot `{0}`")]
    DuplicateSlot(String),
    #[error("invalid slot name `{0}`")]
    InvalidSlotName(String),
    #[error("slot `{slot}` has unknown type `{type_name}`")]
    UnknownType { slot: String, type_name: String },
    #[error("connector references unknown slot `{0}`")]
    UnknownSlot(String),
    #[error("connector {0} does not match the endpoint interfaces")]
    InterfaceMismatch(Connector),
    #[error("connector {0} is declared twice")]
    DuplicateConnector(Connector),
    #[error("slot dependency graph has a cycle through `{0}`")]
    Cycle(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("unknown slot `{0}`")]
    UnknownSlot(String),
    #[error("target `{0}` is absent")]
    TargetAbsent(String),
    #[error("connector {0} does not match the endpoint interfaces")]
    InterfaceMismatch(Connector),
    #[error("instance id {0} was already used")]
    DuplicateInstance(u64),
}

/// Lifecycle state of a deployed component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ComponentState {
    Started,
    Stopped,
    Undeployed,
    Unknown,
}

impl fmt::Display for ComponentState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ComponentState::Started => "STARTED",
            ComponentState::Stopped => "STOPPED",
            ComponentState::Undeployed => "UNDEPLOYED",
            ComponentState::Unknown => "UNKNOWN",
        })
    }
}

/// A replacement template: what a component provides and what it needs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentType {
    pub name: String,
    pub required_interfaces: Vec<String>,
    pub provided_interface: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slot {
    pub name: String,
    pub type_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Component {
    pub instance_id: u64,
    pub type_name: String,
    pub state: ComponentState,
    pub exception_count: u32,
}

/// A directed link from a slot requiring `interface` to the slot providing it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Connector {
    pub from: String,
    pub to: String,
    pub interface: String,
}

impl Connector {
    pub fn new(from: impl Into<String>, to: impl Into<String>, interface: impl Into<String>) -> Self {
        Connector {
            from: from.into(),
            to: to.into(),
            interface: interface.into(),
        }
    }

    pub fn touches(&self, slot: &str) -> bool {
        self.from == slot || self.to == slot
    }
}

impl fmt::Display for Connector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.from, self.to)
    }
}

/// What a failure, violation or repair is about: a slot or a connector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Subject {
    Slot(String),
    Connector(Connector),
}

impl Subject {
    pub fn slot(&self) -> Option<&str> {
        match self {
            Subject::Slot(s) => Some(s),
            Subject::Connector(_) => None,
        }
    }

    pub fn connector(&self) -> Option<&Connector> {
        match self {
            Subject::Slot(_) => None,
            Subject::Connector(c) => Some(c),
        }
    }
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::Slot(s) => f.write_str(s),
            Subject::Connector(c) => c.fmt(f),
        }
    }
}

#[derive(Deserialize)]
struct BlueprintFile {
    types: Vec<TypeEntry>,
    slots: Vec<SlotEntry>,
    connectors: Vec<Connector>,
}

#[derive(Deserialize)]
struct TypeEntry {
    name: String,
    provides: String,
    #[serde(default)]
    requires: Vec<String>,
}

#[derive(Deserialize)]
struct SlotEntry {
    slot: String,
    #[serde(rename = "type")]
    type_name: String,
}

/// The intended architecture.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Blueprint {
    component_types: Vec<ComponentType>,
    slots: Vec<Slot>,
    intended_connectors: Vec<Connector>,
    slot_index: HashMap<String, usize>,
}

impl Blueprint {
    /// The bundled single-shop blueprint.
    pub fn default_shop() -> Blueprint {
        Blueprint::from_json(DEFAULT_BLUEPRINT).expect("bundled blueprint is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Blueprint, BlueprintError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| BlueprintError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Blueprint::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Blueprint, BlueprintError> {
        let file: BlueprintFile = serde_json::from_str(text)?;
        let component_types = file
            .types
            .into_iter()
            .map(|t| ComponentType {
                name: t.name,
                required_interfaces: t.requires,
                provided_interface: t.provides,
            })
            .collect();
        let slots = file
            .slots
            .into_iter()
            .map(|s| Slot {
                name: s.slot,
                type_name: s.type_name,
            })
            .collect();
        Blueprint::new(component_types, slots, file.connectors)
    }

    pub fn new(
        component_types: Vec<ComponentType>,
        slots: Vec<Slot>,
        intended_connectors: Vec<Connector>,
    ) -> Result<Blueprint, BlueprintError> {
        let mut type_names = HashSet::new();
        for t in &component_types {
            if !type_names.insert(t.name.as_str()) {
                return Err(BlueprintError::DuplicateType(t.name.clone()));
            }
            let mut seen = HashSet::new();
            for iface in &t.required_interfaces {
                if !seen.insert(iface.as_str()) {
                    return Err(BlueprintError::DuplicateRequirement {
                        type_name: t.name.clone(),
                        interface: iface.clone(),
                    });
                }
            }
        }

        let mut slot_index = HashMap::new();
        for (i, slot) in slots.iter().enumerate() {
            // "->" separates connector endpoints in rendered subjects.
            if slot.name.is_empty() || slot.name.contains("->") {
                return Err(BlueprintError::InvalidSlotName(slot.name.clone()));
            }
            if !type_names.contains(slot.type_name.as_str()) {
                return Err(BlueprintError::UnknownType {
                    slot: slot.name.clone(),
                    type_name: slot.type_name.clone(),
                });
            }
            if slot_index.insert(slot.name.clone(), i).is_some() {
                return Err(BlueprintError::DuplicateSlot(slot.name.clone()));
            }
        }

        let bp = Blueprint {
            component_types,
            slots,
            intended_connectors,
            slot_index,
        };

        let mut pairs = HashSet::new();
        for c in &bp.intended_connectors {
            for end in [&c.from, &c.to] {
                if !bp.slot_index.contains_key(end) {
                    return Err(BlueprintError::UnknownSlot(end.clone()));
                }
            }
            if !bp.connector_fits(c) {
                return Err(BlueprintError::InterfaceMismatch(c.clone()));
            }
            if !pairs.insert((c.from.as_str(), c.to.as_str())) {
                return Err(BlueprintError::DuplicateConnector(c.clone()));
            }
        }
        bp.check_acyclic()?;
        Ok(bp)
    }

    fn check_acyclic(&self) -> Result<(), BlueprintError> {
        // 0 = unvisited, 1 = on stack, 2 = done
        fn visit(bp: &Blueprint, i: usize, marks: &mut [u8]) -> Result<(), BlueprintError> {
            match marks[i] {
                1 => return Err(BlueprintError::Cycle(bp.slots[i].name.clone())),
                2 => return Ok(()),
                _ => {}
            }
            marks[i] = 1;
            for c in bp.intended_connectors.iter().filter(|c| c.from == bp.slots[i].name) {
                visit(bp, bp.slot_index[&c.to], marks)?;
            }
            marks[i] = 2;
            Ok(())
        }
        let mut marks = vec![0u8; self.slots.len()];
        for i in 0..self.slots.len() {
            visit(self, i, &mut marks)?;
        }
        Ok(())
    }

    pub fn component_types(&self) -> &[ComponentType] {
        &self.component_types
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn intended_connectors(&self) -> &[Connector] {
        &self.intended_connectors
    }

    pub fn slot_position(&self, slot: &str) -> Option<usize> {
        self.slot_index.get(slot).copied()
    }

    pub fn has_slot(&self, slot: &str) -> bool {
        self.slot_index.contains_key(slot)
    }

    pub fn component_type(&self, name: &str) -> Option<&ComponentType> {
        self.component_types.iter().find(|t| t.name == name)
    }

    pub fn slot_type(&self, slot: &str) -> Option<&ComponentType> {
        let i = self.slot_position(slot)?;
        self.component_type(&self.slots[i].type_name)
    }

    /// Type-level connector rule: the source requires the interface, the
    /// target provides it, and the endpoints differ.
    pub fn connector_fits(&self, c: &Connector) -> bool {
        if c.from == c.to {
            return false;
        }
        match (self.slot_type(&c.from), self.slot_type(&c.to)) {
            (Some(src), Some(dst)) => {
                src.required_interfaces.contains(&c.interface) && dst.provided_interface == c.interface
            }
            _ => false,
        }
    }

    pub fn is_intended(&self, c: &Connector) -> bool {
        self.intended_connectors.contains(c)
    }

    /// The intended connector between two slots, if the blueprint has one.
    pub fn find_connector(&self, from: &str, to: &str) -> Option<&Connector> {
        self.intended_connectors.iter().find(|c| c.from == from && c.to == to)
    }

    /// Slots `slot` requires, in declaration order of the intended connectors.
    pub fn dependencies_of(&self, slot: &str) -> Result<Vec<String>, ModelError> {
        if !self.has_slot(slot) {
            return Err(ModelError::UnknownSlot(slot.to_string()));
        }
        Ok(self
            .intended_connectors
            .iter()
            .filter(|c| c.from == slot)
            .map(|c| c.to.clone())
            .collect())
    }

    /// Intended connectors with `slot` as either endpoint.
    pub fn incident_connectors<'a>(&'a self, slot: &'a str) -> impl Iterator<Item = &'a Connector> + 'a {
        self.intended_connectors.iter().filter(move |c| c.touches(slot))
    }
}

/// A primitive change to the live model. Injector and executor both speak
/// in terms of these.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mutation {
    SetState {
        slot: String,
        state: ComponentState,
    },
    AddExceptions {
        slot: String,
        count: u32,
    },
    ResetExceptions {
        slot: String,
    },
    /// Removes the component together with every connector touching it.
    RemoveComponent {
        slot: String,
    },
    RemoveConnector(Connector),
    AddConnector(Connector),
    Instantiate {
        slot: String,
        instance_id: u64,
    },
    AdvanceClock(u64),
}

impl fmt::Display for Mutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mutation::SetState { slot, state } => write!(f, "set_state({slot}, {state})"),
            Mutation::AddExceptions { slot, count } => write!(f, "add_exceptions({slot}, {count})"),
            Mutation::ResetExceptions { slot } => write!(f, "reset_exceptions({slot})"),
            Mutation::RemoveComponent { slot } => write!(f, "remove_component({slot})"),
            Mutation::RemoveConnector(c) => write!(f, "remove_connector({c})"),
            Mutation::AddConnector(c) => write!(f, "add_connector({c})"),
            Mutation::Instantiate { slot, instance_id } => write!(f, "instantiate({slot}, #{instance_id})"),
            Mutation::AdvanceClock(ms) => write!(f, "advance_clock({ms})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationKind {
    UnknownState,
    NotStarted,
    MissingComponent,
    ExceptionsOverThreshold,
    MissingConnector,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub subject: Subject,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}({})", self.kind, self.subject)
    }
}

/// Live component/connector graph validated against its blueprint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchitectureModel {
    blueprint: Arc<Blueprint>,
    components: Vec<Option<Component>>,
    connectors: BTreeSet<Connector>,
    clock: u64,
    next_instance_id: u64,
    exception_threshold: u32,
}

impl ArchitectureModel {
    /// Instantiates every slot (STARTED, no exceptions) and every intended
    /// connector at clock 0.
    pub fn from_blueprint(blueprint: Blueprint) -> ArchitectureModel {
        let blueprint = Arc::new(blueprint);
        let components = blueprint
            .slots()
            .iter()
            .enumerate()
            .map(|(i, slot)| {
                Some(Component {
                    instance_id: i as u64 + 1,
                    type_name: slot.type_name.clone(),
                    state: ComponentState::Started,
                    exception_count: 0,
                })
            })
            .collect::<Vec<_>>();
        let connectors = blueprint.intended_connectors().iter().cloned().collect();
        ArchitectureModel {
            next_instance_id: components.len() as u64 + 1,
            blueprint,
            components,
            connectors,
            clock: 0,
            exception_threshold: DEFAULT_EXCEPTION_THRESHOLD,
        }
    }

    pub fn with_exception_threshold(mut self, threshold: u32) -> Self {
        self.exception_threshold = threshold;
        self
    }

    pub fn blueprint(&self) -> &Blueprint {
        &self.blueprint
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn exception_threshold(&self) -> u32 {
        self.exception_threshold
    }

    pub fn component(&self, slot: &str) -> Option<&Component> {
        let i = self.blueprint.slot_position(slot)?;
        self.components[i].as_ref()
    }

    pub fn is_present(&self, slot: &str) -> bool {
        self.component(slot).is_some()
    }

    /// `(slot name, component)` pairs in blueprint order, absent slots included.
    pub fn slots(&self) -> impl Iterator<Item = (&str, Option<&Component>)> {
        self.blueprint
            .slots()
            .iter()
            .zip(&self.components)
            .map(|(s, c)| (s.name.as_str(), c.as_ref()))
    }

    /// Present slots in blueprint order.
    pub fn present_slots(&self) -> impl Iterator<Item = &str> {
        self.slots().filter(|(_, c)| c.is_some()).map(|(s, _)| s)
    }

    pub fn has_connector(&self, c: &Connector) -> bool {
        self.connectors.contains(c)
    }

    pub fn connector_count(&self) -> usize {
        self.connectors.len()
    }

    /// Live connectors: intended ones in blueprint order, then any extras.
    pub fn live_connectors(&self) -> Vec<&Connector> {
        let mut out: Vec<&Connector> = self
            .blueprint
            .intended_connectors()
            .iter()
            .filter(|c| self.connectors.contains(*c))
            .collect();
        out.extend(self.connectors.iter().filter(|c| !self.blueprint.is_intended(c)));
        out
    }

    /// The lowest instance id that has never been used in this model.
    /// Instantiating with it (or anything larger) marks it used.
    pub fn fresh_instance_id(&self) -> u64 {
        self.next_instance_id
    }

    pub fn dependencies_of(&self, slot: &str) -> Result<Vec<String>, ModelError> {
        self.blueprint.dependencies_of(slot)
    }

    fn index(&self, slot: &str) -> Result<usize, ModelError> {
        self.blueprint
            .slot_position(slot)
            .ok_or_else(|| ModelError::UnknownSlot(slot.to_string()))
    }

    fn present_mut(&mut self, slot: &str) -> Result<&mut Component, ModelError> {
        let i = self.index(slot)?;
        self.components[i]
            .as_mut()
            .ok_or_else(|| ModelError::TargetAbsent(slot.to_string()))
    }

    pub fn apply(&mut self, mutation: &Mutation) -> Result<(), ModelError> {
        match mutation {
            Mutation::SetState { slot, state } => self.present_mut(slot)?.state = *state,
            Mutation::AddExceptions { slot, count } => {
                let c = self.present_mut(slot)?;
                c.exception_count = c.exception_count.saturating_add(*count);
            }
            Mutation::ResetExceptions { slot } => self.present_mut(slot)?.exception_count = 0,
            Mutation::RemoveComponent { slot } => {
                let i = self.index(slot)?;
                if self.components[i].take().is_none() {
                    return Err(ModelError::TargetAbsent(slot.clone()));
                }
                self.connectors.retain(|c| !c.touches(slot));
            }
            Mutation::RemoveConnector(c) => {
                if !self.connectors.remove(c) {
                    return Err(ModelError::TargetAbsent(c.to_string()));
                }
            }
            Mutation::AddConnector(c) => {
                for end in [&c.from, &c.to] {
                    let i = self.index(end)?;
                    if self.components[i].is_none() {
                        return Err(ModelError::TargetAbsent(end.clone()));
                    }
                }
                if !self.blueprint.connector_fits(c) {
                    return Err(ModelError::InterfaceMismatch(c.clone()));
                }
                self.connectors.insert(c.clone());
            }
            Mutation::Instantiate { slot, instance_id } => {
                let i = self.index(slot)?;
                if *instance_id < self.next_instance_id {
                    return Err(ModelError::DuplicateInstance(*instance_id));
                }
                self.next_instance_id = instance_id + 1;
                self.components[i] = Some(Component {
                    instance_id: *instance_id,
                    type_name: self.blueprint.slots()[i].type_name.clone(),
                    state: ComponentState::Started,
                    exception_count: 0,
                });
            }
            Mutation::AdvanceClock(ms) => self.clock += ms,
        }
        Ok(())
    }
}

/// Builds the bundled single-shop model: seven components, nine connectors,
/// everything STARTED, clock 0.
pub fn build_default_model() -> ArchitectureModel {
    ArchitectureModel::from_blueprint(Blueprint::default_shop())
}

/// Every deviation of the live model from its blueprint.
///
/// Per slot in blueprint order: a state violation (UNKNOWN, or not STARTED),
/// a missing component, or an exception count above the model's threshold.
/// Then, in blueprint order, each intended connector absent between two
/// present components. An empty result means the architecture is healthy.
pub fn validate(model: &ArchitectureModel) -> Vec<Violation> {
    let mut out = Vec::new();
    for (slot, component) in model.slots() {
        let subject = || Subject::Slot(slot.to_string());
        match component {
            None => out.push(Violation {
                kind: ViolationKind::MissingComponent,
                subject: subject(),
            }),
            Some(c) => {
                match c.state {
                    ComponentState::Started => {}
                    ComponentState::Unknown => out.push(Violation {
                        kind: ViolationKind::UnknownState,
                        subject: subject(),
                    }),
                    ComponentState::Stopped | ComponentState::Undeployed => out.push(Violation {
                        kind: ViolationKind::NotStarted,
                        subject: subject(),
                    }),
                }
                if c.exception_count > model.exception_threshold {
                    out.push(Violation {
                        kind: ViolationKind::ExceptionsOverThreshold,
                        subject: subject(),
                    });
                }
            }
        }
    }
    for c in model.blueprint().intended_connectors() {
        if model.is_present(&c.from) && model.is_present(&c.to) && !model.has_connector(c) {
            out.push(Violation {
                kind: ViolationKind::MissingConnector,
                subject: Subject::Connector(c.clone()),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qs_rep() -> Connector {
        Connector::new("Query Service", "Reputation Service", "Reputation Service")
    }

    #[test]
    fn default_model_shape() {
        let m = build_default_model();
        assert_eq!(m.present_slots().count(), 7);
        assert_eq!(m.connector_count(), 9);
        assert_eq!(m.clock(), 0);
        assert!(validate(&m).is_empty());
        for (_, c) in m.slots() {
            let c = c.unwrap();
            assert_eq!(c.state, ComponentState::Started);
            assert_eq!(c.exception_count, 0);
        }
    }

    #[test]
    fn dependencies_follow_blueprint() {
        let mut m = build_default_model();
        assert_eq!(
            m.dependencies_of("Query Service").unwrap(),
            vec!["Last Second Sales Item Filter", "Reputation Service"]
        );
        assert_eq!(
            m.dependencies_of("Frontend").unwrap(),
            vec!["Query Service", "Auth Service", "Bid Service"]
        );
        assert!(m.dependencies_of("Persistence Service").unwrap().is_empty());
        assert_eq!(m.dependencies_of("Cart"), Err(ModelError::UnknownSlot("Cart".into())));

        m.apply(&Mutation::RemoveConnector(qs_rep())).unwrap();
        assert_eq!(
            m.dependencies_of("Query Service").unwrap(),
            vec!["Last Second Sales Item Filter", "Reputation Service"]
        );
    }

    #[test]
    fn unknown_state_violation() {
        let mut m = build_default_model();
        m.apply(&Mutation::SetState {
            slot: "Query Service".into(),
            state: ComponentState::Unknown,
        })
        .unwrap();
        assert_eq!(
            validate(&m),
            vec![Violation {
                kind: ViolationKind::UnknownState,
                subject: Subject::Slot("Query Service".into())
            }]
        );
    }

    #[test]
    fn missing_connector_violation() {
        let mut m = build_default_model();
        m.apply(&Mutation::RemoveConnector(qs_rep())).unwrap();
        assert_eq!(
            validate(&m),
            vec![Violation {
                kind: ViolationKind::MissingConnector,
                subject: Subject::Connector(qs_rep())
            }]
        );
    }

    #[test]
    fn stopped_and_absent_are_reported_in_slot_order() {
        let mut m = build_default_model();
        m.apply(&Mutation::RemoveComponent {
            slot: "Persistence Service".into(),
        })
        .unwrap();
        m.apply(&Mutation::SetState {
            slot: "Auth Service".into(),
            state: ComponentState::Stopped,
        })
        .unwrap();
        let v = validate(&m);
        assert_eq!(v.len(), 2);
        assert_eq!(v[0].kind, ViolationKind::NotStarted);
        assert_eq!(v[0].subject, Subject::Slot("Auth Service".into()));
        // connectors into an absent slot are not separately reported
        assert_eq!(v[1].kind, ViolationKind::MissingComponent);
    }

    #[test]
    fn exceptions_over_threshold() {
        let mut m = build_default_model();
        m.apply(&Mutation::AddExceptions {
            slot: "Bid Service".into(),
            count: 6,
        })
        .unwrap();
        assert_eq!(m.component("Bid Service").unwrap().exception_count, 6);
        assert_eq!(validate(&m)[0].kind, ViolationKind::ExceptionsOverThreshold);

        let lenient = m.clone().with_exception_threshold(6);
        assert!(validate(&lenient).is_empty());
    }

    #[test]
    fn connector_remove_add_roundtrip() {
        let mut m = build_default_model();
        let before = m.clone();
        m.apply(&Mutation::RemoveConnector(qs_rep())).unwrap();
        m.apply(&Mutation::AddConnector(qs_rep())).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn mutation_errors() {
        let mut m = build_default_model();
        let bad = Connector::new("Query Service", "Bid Service", "Bid Service");
        assert_eq!(
            m.apply(&Mutation::AddConnector(bad.clone())),
            Err(ModelError::InterfaceMismatch(bad))
        );
        m.apply(&Mutation::RemoveComponent {
            slot: "Reputation Service".into(),
        })
        .unwrap();
        assert_eq!(
            m.apply(&Mutation::AddConnector(qs_rep())),
            Err(ModelError::TargetAbsent("Reputation Service".into()))
        );
        assert_eq!(
            m.apply(&Mutation::SetState {
                slot: "Reputation Service".into(),
                state: ComponentState::Started
            }),
            Err(ModelError::TargetAbsent("Reputation Service".into()))
        );
        assert_eq!(
            m.apply(&Mutation::RemoveConnector(qs_rep())),
            Err(ModelError::TargetAbsent(qs_rep().to_string()))
        );
        assert_eq!(
            m.apply(&Mutation::Instantiate {
                slot: "Reputation Service".into(),
                instance_id: 1
            }),
            Err(ModelError::DuplicateInstance(1))
        );
    }

    #[test]
    fn instantiate_resets_component() {
        let mut m = build_default_model();
        m.apply(&Mutation::RemoveComponent {
            slot: "Bid Service".into(),
        })
        .unwrap();
        let id = m.fresh_instance_id();
        assert_eq!(id, 8);
        m.apply(&Mutation::Instantiate {
            slot: "Bid Service".into(),
            instance_id: id,
        })
        .unwrap();
        let c = m.component("Bid Service").unwrap();
        assert_eq!(c.instance_id, 8);
        assert_eq!(c.state, ComponentState::Started);
        assert_eq!(m.fresh_instance_id(), 9);
    }

    #[test]
    fn blueprint_rejects_cycles_and_mismatches() {
        let types = vec![
            ComponentType {
                name: "A".into(),
                required_interfaces: vec!["B".into()],
                provided_interface: "A".into(),
            },
            ComponentType {
                name: "B".into(),
                required_interfaces: vec!["A".into()],
                provided_interface: "B".into(),
            },
        ];
        let slots = vec![
            Slot {
                name: "a".into(),
                type_name: "A".into(),
            },
            Slot {
                name: "b".into(),
                type_name: "B".into(),
            },
        ];
        let cyclic = Blueprint::new(
            types.clone(),
            slots.clone(),
            vec![Connector::new("a", "b", "B"), Connector::new("b", "a", "A")],
        );
        assert!(matches!(cyclic, Err(BlueprintError::Cycle(_))));

        let mismatch = Blueprint::new(types.clone(), slots.clone(), vec![Connector::new("a", "b", "A")]);
        assert!(matches!(mismatch, Err(BlueprintError::InterfaceMismatch(_))));

        let unknown = Blueprint::new(types, slots, vec![Connector::new("a", "z", "B")]);
        assert!(matches!(unknown, Err(BlueprintError::UnknownSlot(s)) if s == "z"));
    }

    #[test]
    fn blueprint_json_errors() {
        assert!(matches!(Blueprint::from_json("{"), Err(BlueprintError::Json(_))));
        let dup = r#"{"types":[{"name":"T","provides":"T","requires":["X","X"]}],"slots":[],"connectors":[]}"#;
        assert!(matches!(
            Blueprint::from_json(dup),
            Err(BlueprintError::DuplicateRequirement { .. })
        ));
        let bad_type = r#"{"types":[],"slots":[{"slot":"s","type":"Nope"}],"connectors":[]}"#;
        assert!(matches!(
            Blueprint::from_json(bad_type),
            Err(BlueprintError::UnknownType { .. })
        ));
    }
}
