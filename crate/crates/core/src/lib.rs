//! Deterministic discrete-event simulator for collective-assistance
//! organizations.
//!
//! The crate models a population of agents that advertise care roles drawn
//! from an is-a ontology, wires them into one of four organization shapes
//! (hierarchical safety net, centralized mutual-assistance community,
//! layered fractal organization, or a flat heterarchy), drives a seeded
//! notification workload through the matching pipeline, and scores the run
//! with resilience indicators: behavior/role mismatch, emergence
//! persistence of the collective, and service response metrics.
//!
//! Everything is deterministic: integer tick clock, a total event order of
//! `(time, insertion sequence)`, ordered containers throughout, and a single
//! seeded ChaCha8 stream consumed only by workload generation. Two runs of
//! the same scenario and seed produce byte-identical traces.

pub mod agents;
pub mod fso;
pub mod indicators;
pub mod matching;
pub mod ontology;
pub mod organization;
pub mod scenario;
pub mod sim;

pub use agents::{
    Agent, AgentError, AgentId, Availability, BehaviorClass, CohesionParams, CohesionStimulus,
    PersonaClass, Point, ServiceAdvertisement, SocialPersona, SubscriptionRecord,
};
pub use fso::{EscalationResult, FsoError, Son, SonId};
pub use indicators::{
    BopReport, DiversityMetrics, EmergenceSample, IndicatorError, IndicatorReport,
    PersistenceParams, PersonaLoss, ResponseMetrics,
};
pub use matching::{MatchError, MatchResult, RolePool, TeamState, WalkMove};
pub use ontology::{
    Notification, NotificationId, Ontology, OntologyError, Requirement, Role, ServicingProtocol,
    Severity,
};
pub use organization::{
    CcId, Channel, ChannelKind, NodeId, OrgError, OrgStructure, Organization,
};
pub use scenario::{
    FaultAction, FaultEntry, Interarrival, OrgSpec, PerceptionEvent, PerceptionMode,
    PerceptionSpec, Scenario, ScenarioError, SourceFilter, StreamSpec,
};
pub use sim::{SimError, SimOutput, Trace, TraceEvent, TraceRecord, UnservicedReason};

