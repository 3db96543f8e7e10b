//! Layer escalation and service-oriented networks.
//!
//! A fractal organization services a notification as close to its origin
//! layer as it can: the origin coordination center tries its own registry
//! first, then widens the candidate pool one layer at a time, up to its
//! escalation threshold. Dead coordination centers along the way are
//! skipped but still count against the threshold. A successful match spawns
//! a service-oriented network, a short-lived team bound to one objective
//! that dissolves when the service completes or its lifespan runs out,
//! whichever comes first.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::agents::{Agent, AgentId, Availability};
use crate::matching::{match_pooled, MatchError, MatchResult};
use crate::ontology::{Notification, NotificationId, Ontology, Role, ServicingProtocol};
use crate::organization::{CcId, CcState, Organization};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FsoError {
    #[error("origin coordination center `{0}` is not alive")]
    OriginCcDead(CcId),
    #[error("a service-oriented network needs at least one participant")]
    EmptyParticipants,
    #[error("participant `{0}` is not idle")]
    ParticipantUnavailable(AgentId),
    #[error(transparent)]
    Match(#[from] MatchError),
}

/// Where an escalation ended up.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EscalationResult {
    Resolved {
        /// Absolute layer whose pooled registries produced the match.
        layer_reached: u32,
        /// Layers climbed above the origin; never above the threshold.
        depth: u32,
        /// Selected agents per requirement, as in `MatchResult::Assignment`.
        assignment: Vec<Vec<AgentId>>,
        /// Alive layers whose registries were pooled along the way.
        span: BTreeSet<u32>,
        /// Every quorum shortfall seen at the layers that failed to match.
        attempts: u32,
    },
    Unserviced {
        /// Highest layer visited before giving up.
        layer_reached: u32,
        /// Shortfalls of the final, widest match attempt.
        shortfalls: Vec<(Role, u32)>,
    },
}

/// Climbs the layer ladder from `origin_layer`, pooling alive registries
/// cumulatively, until the protocol quorum is met or the escalation
/// threshold is spent.
pub fn escalate(
    org: &Organization,
    ccs: &BTreeMap<CcId, CcState>,
    agents: &BTreeMap<AgentId, Agent>,
    origin_layer: u32,
    notification: &Notification,
    protocol: &ServicingProtocol,
    ontology: &Ontology,
) -> Result<EscalationResult, FsoError> {
    let origin = &ccs[&CcId(origin_layer)];
    if !origin.alive {
        return Err(FsoError::OriginCcDead(origin.id));
    }
    let limit = org.top_layer().min(origin_layer + org.escalation_threshold);
    let mut pooled: Vec<&Vec<crate::agents::SubscriptionRecord>> = Vec::new();
    let mut span: BTreeSet<u32> = BTreeSet::new();
    let mut last_shortfalls: Vec<(Role, u32)> = Vec::new();
    let mut attempts = 0;
    for layer in origin_layer..=limit {
        let cc = &ccs[&CcId(layer)];
        if !cc.alive {
            // A dead center widens nothing, so the previous attempt's
            // outcome stands; the layer still counts as visited.
            continue;
        }
        pooled.push(&cc.registry);
        span.insert(layer);
        attempts += 1;
        match match_pooled(&pooled, notification, protocol, ontology, agents)? {
            MatchResult::Assignment(assignment) => {
                return Ok(EscalationResult::Resolved {
                    layer_reached: layer,
                    depth: layer - origin_layer,
                    assignment,
                    span,
                    attempts,
                });
            }
            MatchResult::MissingRoles(shortfalls) => last_shortfalls = shortfalls,
        }
    }
    Ok(EscalationResult::Unserviced { layer_reached: limit, shortfalls: last_shortfalls })
}

/// The member a group would elect to coordinate it: highest intrinsic
/// behavior class, ties broken by lowest id.
pub fn elect_cc(
    agents: &BTreeMap<AgentId, Agent>,
    members: &BTreeSet<AgentId>,
) -> Result<AgentId, FsoError> {
    members
        .iter()
        .filter_map(|id| agents.get(id))
        .max_by(|a, b| {
            a.intrinsic_behavior
                .ordinal()
                .cmp(&b.intrinsic_behavior.ordinal())
                .then_with(|| b.id.cmp(&a.id))
        })
        .map(|agent| agent.id.clone())
        .ok_or(FsoError::EmptyParticipants)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct SonId(pub u64);

impl std::fmt::Display for SonId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "son:{}", self.0)
    }
}

/// A service-oriented network: one objective, a fixed team, a bounded life.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Son {
    pub id: SonId,
    pub cc: CcId,
    pub participants: BTreeSet<AgentId>,
    pub objective: NotificationId,
    pub created: u64,
    pub lifespan: u64,
    pub span: BTreeSet<u32>,
}

impl Son {
    /// Latest instant the network may still exist.
    pub fn expires_at(&self) -> u64 {
        self.created + self.lifespan
    }
}

/// Creates the network and enrolls every participant, atomically: all of
/// them must be idle, and all of them come out busy.
#[allow(clippy::too_many_arguments)]
pub fn spawn_son(
    id: SonId,
    cc: CcId,
    participants: BTreeSet<AgentId>,
    objective: NotificationId,
    created: u64,
    lifespan: u64,
    span: BTreeSet<u32>,
    agents: &mut BTreeMap<AgentId, Agent>,
) -> Result<Son, FsoError> {
    if participants.is_empty() {
        return Err(FsoError::EmptyParticipants);
    }
    for id in &participants {
        match agents.get(id).map(|a| a.availability) {
            Some(Availability::Idle) => {}
            _ => return Err(FsoError::ParticipantUnavailable(id.clone())),
        }
    }
    for id in &participants {
        agents.get_mut(id).unwrap().availability = Availability::Busy;
    }
    Ok(Son { id, cc, participants, objective, created, lifespan, span })
}

/// Releases the network's participants. Only busy agents return to idle;
/// anyone who failed or defected mid-service keeps that state.
pub fn dissolve_son(son: &Son, agents: &mut BTreeMap<AgentId, Agent>) {
    for id in &son.participants {
        if let Some(agent) = agents.get_mut(id) {
            if agent.availability == Availability::Busy {
                agent.availability = Availability::Idle;
            }
        }
    }
}
