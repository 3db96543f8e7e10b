//! Role taxonomy, notifications, and servicing protocols.
//!
//! Roles form a DAG of is-a edges. `subsumes` is the reflexive-transitive
//! closure of those edges, and a requirement for role `r` is satisfied by any
//! advertisement of a role that `r` subsumes: asking for a caregiver accepts
//! a nurse, never the other way around.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::agents::{AgentId, Point};

/// Symbolic role name. Equality is exact; hierarchy lives in [`Ontology`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Role(String);

impl Role {
    pub fn new(name: impl Into<String>) -> Self {
        Role(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Role {
    fn from(name: &str) -> Self {
        Role::new(name)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OntologyError {
    #[error("role `{0}` is already defined")]
    DuplicateRole(Role),
    #[error("role `{0}` is not defined")]
    UnknownRole(Role),
    #[error("parent role `{0}` is not defined")]
    UnknownParent(Role),
    #[error("is-a edge `{child}` -> `{parent}` would close a cycle")]
    CycleIntroduced { child: Role, parent: Role },
    #[error("protocol `{0}` lists no requirements")]
    EmptyRequirements(String),
    #[error("requirement on `{role}` has bad bounds {min}..={max}")]
    BadBounds { role: Role, min: u32, max: u32 },
}

/// Is-a DAG over roles. Immutable once a scenario starts; shared read-only.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Ontology {
    parents: BTreeMap<Role, BTreeSet<Role>>,
}

impl Ontology {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds an ontology from a full role list and is-a edge list, rejecting
    /// unknown endpoints and cycles. Scenario files funnel through here, so
    /// forward references between roles are allowed.
    pub fn from_parts(
        roles: impl IntoIterator<Item = Role>,
        edges: impl IntoIterator<Item = (Role, Role)>,
    ) -> Result<Self, OntologyError> {
        let mut ontology = Ontology::new();
        for role in roles {
            if ontology.parents.insert(role.clone(), BTreeSet::new()).is_some() {
                return Err(OntologyError::DuplicateRole(role));
            }
        }
        for (child, parent) in edges {
            if !ontology.parents.contains_key(&child) {
                return Err(OntologyError::UnknownRole(child));
            }
            if !ontology.parents.contains_key(&parent) {
                return Err(OntologyError::UnknownParent(parent));
            }
            // Adding child -> parent closes a cycle iff parent already
            // reaches child through existing edges.
            if ontology.reaches(&parent, &child) {
                return Err(OntologyError::CycleIntroduced { child, parent });
            }
            ontology.parents.get_mut(&child).expect("checked").insert(parent);
        }
        Ok(ontology)
    }

    /// Adds a new role under the given (already defined) parents.
    pub fn add_role(&mut self, role: Role, parents: &[Role]) -> Result<(), OntologyError> {
        if self.parents.contains_key(&role) {
            return Err(OntologyError::DuplicateRole(role));
        }
        for parent in parents {
            if !self.parents.contains_key(parent) {
                return Err(OntologyError::UnknownParent(parent.clone()));
            }
        }
        self.parents.insert(role, parents.iter().cloned().collect());
        Ok(())
    }

    pub fn contains(&self, role: &Role) -> bool {
        self.parents.contains_key(role)
    }

    pub fn roles(&self) -> impl Iterator<Item = &Role> {
        self.parents.keys()
    }

    /// Direct is-a parents of a defined role.
    pub fn parents_of(&self, role: &Role) -> Option<&BTreeSet<Role>> {
        self.parents.get(role)
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    /// Upward BFS from `specific` along is-a edges, no role bookkeeping.
    fn reaches(&self, specific: &Role, general: &Role) -> bool {
        if specific == general {
            return true;
        }
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([specific]);
        while let Some(role) = queue.pop_front() {
            for parent in &self.parents[role] {
                if parent == general {
                    return true;
                }
                if seen.insert(parent) {
                    queue.push_back(parent);
                }
            }
        }
        false
    }

    /// True iff `general` is an ancestor of `specific` (or the same role):
    /// the reflexive-transitive closure of the is-a relation.
    pub fn subsumes(&self, general: &Role, specific: &Role) -> Result<bool, OntologyError> {
        if !self.contains(general) {
            return Err(OntologyError::UnknownRole(general.clone()));
        }
        if !self.contains(specific) {
            return Err(OntologyError::UnknownRole(specific.clone()));
        }
        Ok(self.reaches(specific, general))
    }

    /// True iff an advertisement of `advertised` fulfills a requirement for
    /// `required`: a specialization satisfies the general request.
    pub fn satisfies(&self, advertised: &Role, required: &Role) -> Result<bool, OntologyError> {
        self.subsumes(required, advertised)
    }

    /// The care-domain taxonomy used when a scenario does not declare its
    /// own roles.
    pub fn default_care() -> Self {
        let mut o = Ontology::new();
        let root = |o: &mut Ontology, name: &str| o.add_role(Role::new(name), &[]).expect("fresh");
        let under = |o: &mut Ontology, name: &str, parent: &str| {
            o.add_role(Role::new(name), &[Role::new(parent)]).expect("fresh")
        };
        root(&mut o, "caregiver");
        under(&mut o, "professional caregiver", "caregiver");
        under(&mut o, "general practitioner", "professional caregiver");
        under(&mut o, "nurse", "professional caregiver");
        under(&mut o, "informal caregiver", "caregiver");
        root(&mut o, "sensor");
        under(&mut o, "accelerometer", "sensor");
        under(&mut o, "localization device", "sensor");
        root(&mut o, "patient");
        o
    }
}

/// Urgency tag carried by a notification. Recorded in the trace; routing and
/// matching treat all severities alike.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Routine,
    Alarm,
    Crisis,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Routine => "routine",
            Severity::Alarm => "alarm",
            Severity::Crisis => "crisis",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NotificationId(pub u64);

impl fmt::Display for NotificationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// A condition observed somewhere in the population that asks for service.
#[derive(Debug, Clone, PartialEq)]
pub struct Notification {
    pub id: NotificationId,
    /// Kind string; resolves to exactly one servicing protocol per scenario.
    pub kind: String,
    pub source: AgentId,
    pub location: Point,
    pub time: u64,
    pub severity: Severity,
}

/// One role slot of a protocol: how many agents playing (a specialization
/// of) `role` a team needs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Requirement {
    pub role: Role,
    pub min_count: u32,
    pub max_count: u32,
}

impl Requirement {
    pub fn new(role: impl Into<String>, min_count: u32, max_count: u32) -> Self {
        Requirement { role: Role::new(role), min_count, max_count }
    }
}

/// Recipe for servicing one notification kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServicingProtocol {
    pub id: String,
    pub trigger_kind: String,
    pub requirements: Vec<Requirement>,
    /// Ticks the enrolled team works once dispatched. Strictly positive.
    pub service_duration: u64,
    /// Latency bound that separates in-time from late completions.
    pub deadline: u64,
    /// Lifetime budget of the overlay network spawned per service in
    /// fractal organizations; unused elsewhere.
    pub son_lifespan: u64,
}

/// Checks a protocol against the ontology in force: requirements must be
/// nonempty, each role defined, and each slot must ask for at least one and
/// at most `max_count` agents.
pub fn validate_protocol(
    protocol: &ServicingProtocol,
    ontology: &Ontology,
) -> Result<(), OntologyError> {
    if protocol.requirements.is_empty() {
        return Err(OntologyError::EmptyRequirements(protocol.id.clone()));
    }
    for req in &protocol.requirements {
        if !ontology.contains(&req.role) {
            return Err(OntologyError::UnknownRole(req.role.clone()));
        }
        if req.min_count < 1 || req.min_count > req.max_count {
            return Err(OntologyError::BadBounds {
                role: req.role.clone(),
                min: req.min_count,
                max: req.max_count,
            });
        }
    }
    Ok(())
}
