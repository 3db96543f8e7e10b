//! Scenario descriptions: everything a run needs, resolved into plain data.
//!
//! A scenario carries the roster, the organization shape to wire it into,
//! the servicing protocols, a seeded workload description, and a fault
//! schedule. Loading concrete files into this form is the front end's job;
//! this module only defines the resolved structures and the validation the
//! engine relies on.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::agents::{Agent, AgentId, CohesionParams, Point};
use crate::indicators::PersistenceParams;
use crate::ontology::{validate_protocol, Ontology, OntologyError, Role, ServicingProtocol, Severity};
use crate::organization::{CcId, NodeId, DEVICE_ID_PREFIX};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("scenario needs a horizon of at least 1 tick")]
    ZeroHorizon,
    #[error("scenario roster is empty")]
    EmptyRoster,
    #[error("agent id `{0}` appears twice in the roster")]
    DuplicateAgent(AgentId),
    #[error("agent id `{0}` uses a reserved prefix")]
    ReservedId(AgentId),
    #[error("`{0}` is referenced but not in the roster")]
    UnknownMember(AgentId),
    #[error("initial cohesion {0} is outside [0, 1]")]
    BadInitialCohesion(f64),
    #[error("workload stream {stream} has a bad inter-arrival: {reason}")]
    BadInterarrival { stream: usize, reason: String },
    #[error("workload stream {stream} triggers kind `{kind}` but no protocol services it")]
    UnservicedKind { stream: usize, kind: String },
    #[error("fault at t={at} targets unknown node `{node}`")]
    UnknownFaultNode { at: u64, node: NodeId },
    #[error("fault at t={at} names an empty black-swan tag")]
    EmptyBlackSwanTag { at: u64 },
    #[error("collective perception needs an organization with coordination centers")]
    PerceptionNeedsCc,
    #[error(transparent)]
    Ontology(#[from] OntologyError),
}

/// Which organization to build over the roster.
#[derive(Debug, Clone, PartialEq)]
pub enum OrgSpec {
    SafetyNet {
        patients: Vec<AgentId>,
        doctors: Vec<AgentId>,
        assignment: BTreeMap<AgentId, AgentId>,
        devices_per_patient: u32,
    },
    Mac {
        members: Vec<AgentId>,
    },
    Fso {
        layers: Vec<Vec<AgentId>>,
        escalation_threshold: u32,
    },
    Heterarchy {
        members: Vec<AgentId>,
    },
}

impl OrgSpec {
    /// Every roster id the spec mentions.
    pub fn referenced_ids(&self) -> Vec<&AgentId> {
        match self {
            OrgSpec::SafetyNet { patients, doctors, assignment, .. } => patients
                .iter()
                .chain(doctors)
                .chain(assignment.iter().flat_map(|(p, d)| [p, d]))
                .collect(),
            OrgSpec::Mac { members } | OrgSpec::Heterarchy { members } => members.iter().collect(),
            OrgSpec::Fso { layers, .. } => layers.iter().flatten().collect(),
        }
    }

    pub fn cc_count(&self) -> u32 {
        match self {
            OrgSpec::Mac { .. } => 1,
            OrgSpec::Fso { layers, .. } => layers.len() as u32,
            _ => 0,
        }
    }
}

/// Gap distribution between consecutive notifications of one stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Interarrival {
    Fixed(u64),
    Uniform(u64, u64),
    Geometric(f64),
}

/// Who may emit a stream's notifications.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum SourceFilter {
    #[default]
    All,
    Role(Role),
    Ids(Vec<AgentId>),
}

/// One notification stream of the workload.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamSpec {
    pub kind: String,
    pub interarrival: Interarrival,
    pub severity: Severity,
    pub sources: SourceFilter,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FaultAction {
    Fail(NodeId),
    Recover(NodeId),
    /// Simultaneously fails every agent carrying this solution tag.
    BlackSwan(String),
    CrisisStart,
    CrisisEnd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaultEntry {
    pub at: u64,
    pub action: FaultAction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerceptionMode {
    /// Members in range react on their own at the event instant.
    Individual,
    /// Members in range publish to their coordination center, which
    /// broadcasts one reaction order to the whole organization.
    Collective,
}

/// An environmental stimulus at a point, noticed by agents whose own
/// perception radius covers it.
#[derive(Debug, Clone, PartialEq)]
pub struct PerceptionEvent {
    pub time: u64,
    pub location: Point,
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerceptionSpec {
    pub mode: PerceptionMode,
    pub events: Vec<PerceptionEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub horizon: u64,
    pub ontology: Ontology,
    pub roster: Vec<Agent>,
    pub organization: OrgSpec,
    pub hop_delay: u64,
    pub cc_processing_time: u64,
    pub protocols: Vec<ServicingProtocol>,
    pub workload: Vec<StreamSpec>,
    pub faults: Vec<FaultEntry>,
    pub cohesion: CohesionParams,
    pub initial_cohesion: f64,
    pub persistence: PersistenceParams,
    pub perception: Option<PerceptionSpec>,
}

impl Scenario {
    pub fn protocol_for(&self, kind: &str) -> Option<&ServicingProtocol> {
        self.protocols.iter().find(|p| p.trigger_kind == kind)
    }

    /// Static checks the engine depends on. Source filters are resolved
    /// against the built organization at run time, so they are not checked
    /// here.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.horizon == 0 {
            return Err(ScenarioError::ZeroHorizon);
        }
        if self.roster.is_empty() {
            return Err(ScenarioError::EmptyRoster);
        }
        let mut ids = BTreeMap::new();
        for agent in &self.roster {
            let raw = agent.id.as_str();
            if raw.starts_with("cc:") || raw.starts_with(DEVICE_ID_PREFIX) {
                return Err(ScenarioError::ReservedId(agent.id.clone()));
            }
            if ids.insert(agent.id.clone(), ()).is_some() {
                return Err(ScenarioError::DuplicateAgent(agent.id.clone()));
            }
        }
        for id in self.organization.referenced_ids() {
            if !ids.contains_key(id) {
                return Err(ScenarioError::UnknownMember(id.clone()));
            }
        }
        if !(0.0..=1.0).contains(&self.initial_cohesion) || !self.initial_cohesion.is_finite() {
            return Err(ScenarioError::BadInitialCohesion(self.initial_cohesion));
        }
        for protocol in &self.protocols {
            validate_protocol(protocol, &self.ontology)?;
        }
        for (i, stream) in self.workload.iter().enumerate() {
            match stream.interarrival {
                Interarrival::Fixed(0) => {
                    return Err(ScenarioError::BadInterarrival {
                        stream: i,
                        reason: "fixed gap must be at least 1".into(),
                    });
                }
                Interarrival::Uniform(a, b) if a == 0 || a > b => {
                    return Err(ScenarioError::BadInterarrival {
                        stream: i,
                        reason: format!("uniform bounds {a}..={b} need 1 <= low <= high"),
                    });
                }
                Interarrival::Geometric(p) if !(p > 0.0 && p <= 1.0) => {
                    return Err(ScenarioError::BadInterarrival {
                        stream: i,
                        reason: format!("geometric probability {p} must be in (0, 1]"),
                    });
                }
                _ => {}
            }
            if let SourceFilter::Role(role) = &stream.sources {
                if !self.ontology.contains(role) {
                    return Err(ScenarioError::Ontology(OntologyError::UnknownRole(role.clone())));
                }
            }
            if let SourceFilter::Ids(list) = &stream.sources {
                for id in list {
                    let synthetic = id.as_str().starts_with(DEVICE_ID_PREFIX);
                    if !ids.contains_key(id) && !synthetic {
                        return Err(ScenarioError::UnknownMember(id.clone()));
                    }
                }
            }
            if self.protocol_for(&stream.kind).is_none() {
                return Err(ScenarioError::UnservicedKind { stream: i, kind: stream.kind.clone() });
            }
        }
        let cc_count = self.organization.cc_count();
        for fault in &self.faults {
            match &fault.action {
                FaultAction::Fail(node) | FaultAction::Recover(node) => match node {
                    NodeId::Agent(id) => {
                        let synthetic = id.as_str().starts_with(DEVICE_ID_PREFIX);
                        if !ids.contains_key(id) && !synthetic {
                            return Err(ScenarioError::UnknownFaultNode {
                                at: fault.at,
                                node: node.clone(),
                            });
                        }
                    }
                    NodeId::Cc(CcId(layer)) => {
                        if *layer >= cc_count {
                            return Err(ScenarioError::UnknownFaultNode {
                                at: fault.at,
                                node: node.clone(),
                            });
                        }
                    }
                },
                FaultAction::BlackSwan(tag) => {
                    if tag.is_empty() {
                        return Err(ScenarioError::EmptyBlackSwanTag { at: fault.at });
                    }
                }
                FaultAction::CrisisStart | FaultAction::CrisisEnd => {}
            }
        }
        if let Some(perception) = &self.perception {
            if perception.mode == PerceptionMode::Collective && cc_count == 0 {
                return Err(ScenarioError::PerceptionNeedsCc);
            }
        }
        Ok(())
    }

    /// Stretches every time quantity by an integer factor: hop delays,
    /// processing costs, protocol durations and deadlines, fault and
    /// perception instants, inter-arrival gaps, and the horizon. Only fixed
    /// and uniform gaps stretch exactly; a geometric stream keeps its
    /// success probability, so its draws do not scale tick for tick.
    pub fn scaled(&self, factor: u64) -> Scenario {
        assert!(factor >= 1, "scale factor must be at least 1");
        let mut out = self.clone();
        out.horizon *= factor;
        out.hop_delay *= factor;
        out.cc_processing_time *= factor;
        for protocol in &mut out.protocols {
            protocol.service_duration *= factor;
            protocol.deadline *= factor;
            protocol.son_lifespan *= factor;
        }
        for stream in &mut out.workload {
            stream.interarrival = match stream.interarrival {
                Interarrival::Fixed(d) => Interarrival::Fixed(d * factor),
                Interarrival::Uniform(a, b) => Interarrival::Uniform(a * factor, b * factor),
                Interarrival::Geometric(p) => Interarrival::Geometric(p),
            };
        }
        for fault in &mut out.faults {
            fault.at *= factor;
        }
        if let Some(perception) = &mut out.perception {
            for event in &mut perception.events {
                event.time *= factor;
            }
        }
        out
    }
}
