//! Organization shapes and their wiring.
//!
//! Four shapes are supported. The hierarchical safety net chains each
//! assisted person through their devices up to a responder, with feedback
//! edges pointing up and control edges pointing down. The centralized
//! community is a star around one coordination center (CC) that owns the
//! registry of member advertisements. The fractal organization stacks one
//! such star per layer and couples adjacent CCs with escalation channels.
//! The heterarchy has no coordination node at all; members reach each other
//! by one-hop broadcast.
//!
//! Builders set each member's exercised behavior: the safety net pins
//! assisted persons to passive objects, devices to goal-driven trackers,
//! and responders to expert extrapolation, while community, fractal, and
//! heterarchical organizations let every member exercise its full
//! intrinsic behavior.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::agents::{Agent, AgentId, Availability, BehaviorClass, PersonaClass, SubscriptionRecord};
use crate::ontology::NotificationId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum OrgStructure {
    Hierarchical,
    Centralized,
    Fractal,
    Heterarchical,
}

impl fmt::Display for OrgStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OrgStructure::Hierarchical => "hierarchical",
            OrgStructure::Centralized => "centralized",
            OrgStructure::Fractal => "fractal",
            OrgStructure::Heterarchical => "heterarchical",
        })
    }
}

/// Coordination center id; the value is the layer index it serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CcId(pub u32);

impl fmt::Display for CcId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cc:{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeId {
    Agent(AgentId),
    Cc(CcId),
}

impl NodeId {
    pub fn agent(id: impl Into<String>) -> Self {
        NodeId::Agent(AgentId::new(id))
    }

    pub fn cc(layer: u32) -> Self {
        NodeId::Cc(CcId(layer))
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Agent(id) => id.fmt(f),
            NodeId::Cc(cc) => cc.fmt(f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ChannelKind {
    /// Upward reporting: member to device, device to responder, member to CC.
    Feedback,
    /// Downward direction: responder to member, CC to member.
    Control,
    /// Lateral coupling between adjacent-layer CCs.
    Escalation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Channel {
    pub from: NodeId,
    pub to: NodeId,
    pub hop_delay: u64,
    pub kind: ChannelKind,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OrgError {
    #[error("patient `{0}` has no assigned responder")]
    UnassignedPatient(AgentId),
    #[error("organization has no members")]
    EmptyMembership,
    #[error("layer {0} has no members")]
    EmptyLayer(u32),
    #[error("no path from `{from}` to `{to}`")]
    Unreachable { from: NodeId, to: NodeId },
    #[error("node `{0}` is not part of the organization")]
    UnknownNode(NodeId),
}

/// Static topology of one organization. Runtime state (availabilities,
/// registries, inboxes) lives in the agent map and in [`CcState`] values.
#[derive(Debug, Clone, PartialEq)]
pub struct Organization {
    pub structure: OrgStructure,
    pub nodes: BTreeSet<NodeId>,
    pub channels: Vec<Channel>,
    /// One CC per layer for fractal shapes, exactly one for centralized,
    /// none otherwise.
    pub cc_nodes: Vec<CcId>,
    /// Member layer assignment; 0 everywhere except in fractal shapes.
    pub layer_of: BTreeMap<AgentId, u32>,
    pub hop_delay: u64,
    pub cc_processing_time: u64,
    /// How many layers above the origin an escalation may visit.
    pub escalation_threshold: u32,
    /// Hierarchical responders, and which responder serves each member.
    pub roots: Vec<AgentId>,
    pub responder_of: BTreeMap<AgentId, AgentId>,
}

impl Organization {
    /// Member agent ids, in id order.
    pub fn members(&self) -> impl Iterator<Item = &AgentId> {
        self.nodes.iter().filter_map(|n| match n {
            NodeId::Agent(id) => Some(id),
            NodeId::Cc(_) => None,
        })
    }

    pub fn top_layer(&self) -> u32 {
        self.cc_nodes.iter().map(|cc| cc.0).max().unwrap_or(0)
    }

    fn check_node(&self, node: &NodeId) -> Result<(), OrgError> {
        if self.nodes.contains(node) {
            Ok(())
        } else {
            Err(OrgError::UnknownNode(node.clone()))
        }
    }
}

/// Shortest accumulated hop delay from `from` to `to` along directed
/// channels. In a heterarchy every pair of distinct nodes is one broadcast
/// hop apart.
pub fn propagation_delay(org: &Organization, from: &NodeId, to: &NodeId) -> Result<u64, OrgError> {
    org.check_node(from)?;
    org.check_node(to)?;
    if from == to {
        return Ok(0);
    }
    if org.structure == OrgStructure::Heterarchical {
        return Ok(org.hop_delay);
    }
    let mut dist: BTreeMap<&NodeId, u64> = BTreeMap::new();
    let mut heap = BinaryHeap::new();
    dist.insert(from, 0);
    heap.push(Reverse((0u64, from)));
    while let Some(Reverse((d, node))) = heap.pop() {
        if node == to {
            return Ok(d);
        }
        if dist.get(node).is_some_and(|&best| d > best) {
            continue;
        }
        for ch in org.channels.iter().filter(|ch| &ch.from == node) {
            let next = d + ch.hop_delay;
            if dist.get(&ch.to).is_none_or(|&best| next < best) {
                dist.insert(&ch.to, next);
                heap.push(Reverse((next, &ch.to)));
            }
        }
    }
    Err(OrgError::Unreachable { from: from.clone(), to: to.clone() })
}

/// Runtime state of one coordination center.
#[derive(Debug, Clone, PartialEq)]
pub struct CcState {
    pub id: CcId,
    /// Subscription records in arrival order; this is the matching registry.
    pub registry: Vec<SubscriptionRecord>,
    /// Pending work in arrival order. A dead CC never dequeues; the queue
    /// freezes as-is and thaws on recovery.
    pub inbox: VecDeque<InboxItem>,
    pub alive: bool,
    /// True while the head item is being processed.
    pub processing: bool,
    /// Bumped on every fail/recover so stale processing timers are ignored.
    pub epoch: u64,
}

impl CcState {
    pub fn new(id: CcId) -> Self {
        CcState {
            id,
            registry: Vec::new(),
            inbox: VecDeque::new(),
            alive: true,
            processing: false,
            epoch: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InboxItem {
    Notification(NotificationId),
    /// Collective-perception publication, by perception event index.
    Perception(u64),
}

/// Marks a node failed: agents freeze in place, CCs stop dequeuing.
pub fn fail_node(
    org: &Organization,
    agents: &mut BTreeMap<AgentId, Agent>,
    ccs: &mut BTreeMap<CcId, CcState>,
    node: &NodeId,
) -> Result<(), OrgError> {
    org.check_node(node)?;
    match node {
        NodeId::Agent(id) => {
            let agent = agents.get_mut(id).ok_or_else(|| OrgError::UnknownNode(node.clone()))?;
            agent.availability = Availability::Failed;
        }
        NodeId::Cc(cc) => {
            let state = ccs.get_mut(cc).ok_or_else(|| OrgError::UnknownNode(node.clone()))?;
            state.alive = false;
            state.processing = false;
            state.epoch += 1;
        }
    }
    Ok(())
}

/// Reverses a failure. Recovered agents come back idle; defection is not a
/// failure and is not reversed. Recovered CCs resume their frozen inbox.
pub fn recover_node(
    org: &Organization,
    agents: &mut BTreeMap<AgentId, Agent>,
    ccs: &mut BTreeMap<CcId, CcState>,
    node: &NodeId,
) -> Result<(), OrgError> {
    org.check_node(node)?;
    match node {
        NodeId::Agent(id) => {
            let agent = agents.get_mut(id).ok_or_else(|| OrgError::UnknownNode(node.clone()))?;
            if agent.availability == Availability::Failed {
                agent.availability = Availability::Idle;
            }
        }
        NodeId::Cc(cc) => {
            let state = ccs.get_mut(cc).ok_or_else(|| OrgError::UnknownNode(node.clone()))?;
            state.alive = true;
            state.processing = false;
            state.epoch += 1;
        }
    }
    Ok(())
}

/// Reserved id prefix for synthesized monitoring devices.
pub const DEVICE_ID_PREFIX: &str = "dev:";

/// Builds the hierarchical safety net: each assisted person reports through
/// a chain of `devices_per_patient` synthesized monitoring devices to their
/// assigned responder. Exercised behaviors are pinned by position: persons
/// are treated as passive objects, devices track goals, responders apply
/// expert extrapolation.
pub fn build_safety_net(
    agents: &mut BTreeMap<AgentId, Agent>,
    patients: &[AgentId],
    doctors: &[AgentId],
    assignment: &BTreeMap<AgentId, AgentId>,
    devices_per_patient: u32,
    hop_delay: u64,
    cc_processing_time: u64,
) -> Result<Organization, OrgError> {
    assert!(devices_per_patient >= 1, "a safety net needs at least one device per patient");
    let doctor_set: BTreeSet<&AgentId> = doctors.iter().collect();
    let mut nodes = BTreeSet::new();
    let mut channels = Vec::new();
    let mut layer_of = BTreeMap::new();
    let mut responder_of = BTreeMap::new();

    for doctor in doctors {
        let agent =
            agents.get_mut(doctor).ok_or_else(|| OrgError::UnknownNode(NodeId::Agent(doctor.clone())))?;
        agent.exercised_behavior = BehaviorClass::ComplexMultivariateExtrapolative;
        agent.layer = 0;
        nodes.insert(NodeId::Agent(doctor.clone()));
        layer_of.insert(doctor.clone(), 0);
        responder_of.insert(doctor.clone(), doctor.clone());
    }

    for patient in patients {
        let doctor = assignment
            .get(patient)
            .filter(|d| doctor_set.contains(d))
            .ok_or_else(|| OrgError::UnassignedPatient(patient.clone()))?
            .clone();
        let location = {
            let agent = agents
                .get_mut(patient)
                .ok_or_else(|| OrgError::UnknownNode(NodeId::Agent(patient.clone())))?;
            agent.exercised_behavior = BehaviorClass::Passive;
            agent.layer = 0;
            agent.location
        };
        nodes.insert(NodeId::Agent(patient.clone()));
        layer_of.insert(patient.clone(), 0);
        responder_of.insert(patient.clone(), doctor.clone());

        // Chain: patient -> dev:0 -> ... -> dev:k-1 -> doctor, feedback up,
        // control down. Keeping devices in series keeps the control graph a
        // tree and makes the chain depth configurable.
        let mut below = NodeId::Agent(patient.clone());
        for k in 0..devices_per_patient {
            let dev_id = AgentId::new(format!("{DEVICE_ID_PREFIX}{patient}:{k}"));
            let mut device = Agent::new(dev_id.as_str(), PersonaClass::CyberPhysicalSystem);
            // Monitoring devices only track thresholds; their capable grade
            // is pinned down to match the goal-driven job they do.
            device.intrinsic_behavior = BehaviorClass::Teleological;
            device.exercised_behavior = BehaviorClass::Teleological;
            device.location = location;
            device.solution_tag = "device".into();
            assert!(
                agents.insert(dev_id.clone(), device).is_none(),
                "device id collision for {dev_id}"
            );
            let dev_node = NodeId::Agent(dev_id.clone());
            nodes.insert(dev_node.clone());
            layer_of.insert(dev_id.clone(), 0);
            responder_of.insert(dev_id.clone(), doctor.clone());
            channels.push(Channel {
                from: below.clone(),
                to: dev_node.clone(),
                hop_delay,
                kind: ChannelKind::Feedback,
            });
            channels.push(Channel {
                from: dev_node.clone(),
                to: below,
                hop_delay,
                kind: ChannelKind::Control,
            });
            below = dev_node;
        }
        let doctor_node = NodeId::Agent(doctor);
        channels.push(Channel {
            from: below.clone(),
            to: doctor_node.clone(),
            hop_delay,
            kind: ChannelKind::Feedback,
        });
        channels.push(Channel { from: doctor_node, to: below, hop_delay, kind: ChannelKind::Control });
    }

    Ok(Organization {
        structure: OrgStructure::Hierarchical,
        nodes,
        channels,
        cc_nodes: Vec::new(),
        layer_of,
        hop_delay,
        cc_processing_time,
        escalation_threshold: 0,
        roots: doctors.to_vec(),
        responder_of,
    })
}

/// Builds the centralized community: a star of bidirectional channels
/// around a single CC. Every member keeps its intrinsic behavior.
pub fn build_mac(
    agents: &mut BTreeMap<AgentId, Agent>,
    members: &[AgentId],
    hop_delay: u64,
    cc_processing_time: u64,
) -> Result<Organization, OrgError> {
    if members.is_empty() {
        return Err(OrgError::EmptyMembership);
    }
    let cc = CcId(0);
    let mut nodes = BTreeSet::from([NodeId::Cc(cc)]);
    let mut channels = Vec::new();
    let mut layer_of = BTreeMap::new();
    for member in members {
        let agent =
            agents.get_mut(member).ok_or_else(|| OrgError::UnknownNode(NodeId::Agent(member.clone())))?;
        agent.exercised_behavior = agent.intrinsic_behavior;
        agent.layer = 0;
        nodes.insert(NodeId::Agent(member.clone()));
        layer_of.insert(member.clone(), 0);
        channels.push(Channel {
            from: NodeId::Agent(member.clone()),
            to: NodeId::Cc(cc),
            hop_delay,
            kind: ChannelKind::Feedback,
        });
        channels.push(Channel {
            from: NodeId::Cc(cc),
            to: NodeId::Agent(member.clone()),
            hop_delay,
            kind: ChannelKind::Control,
        });
    }
    Ok(Organization {
        structure: OrgStructure::Centralized,
        nodes,
        channels,
        cc_nodes: vec![cc],
        layer_of,
        hop_delay,
        cc_processing_time,
        escalation_threshold: 0,
        roots: Vec::new(),
        responder_of: BTreeMap::new(),
    })
}

/// Builds the fractal organization: one community star per layer plus
/// escalation channels between adjacent-layer CCs.
pub fn build_fso(
    agents: &mut BTreeMap<AgentId, Agent>,
    layers: &[Vec<AgentId>],
    hop_delay: u64,
    cc_processing_time: u64,
    escalation_threshold: u32,
) -> Result<Organization, OrgError> {
    if layers.is_empty() {
        return Err(OrgError::EmptyMembership);
    }
    let mut nodes = BTreeSet::new();
    let mut channels = Vec::new();
    let mut layer_of = BTreeMap::new();
    let mut cc_nodes = Vec::new();
    for (index, members) in layers.iter().enumerate() {
        let layer = index as u32;
        if members.is_empty() {
            return Err(OrgError::EmptyLayer(layer));
        }
        let cc = CcId(layer);
        cc_nodes.push(cc);
        nodes.insert(NodeId::Cc(cc));
        for member in members {
            let agent = agents
                .get_mut(member)
                .ok_or_else(|| OrgError::UnknownNode(NodeId::Agent(member.clone())))?;
            agent.exercised_behavior = agent.intrinsic_behavior;
            agent.layer = layer;
            nodes.insert(NodeId::Agent(member.clone()));
            layer_of.insert(member.clone(), layer);
            channels.push(Channel {
                from: NodeId::Agent(member.clone()),
                to: NodeId::Cc(cc),
                hop_delay,
                kind: ChannelKind::Feedback,
            });
            channels.push(Channel {
                from: NodeId::Cc(cc),
                to: NodeId::Agent(member.clone()),
                hop_delay,
                kind: ChannelKind::Control,
            });
        }
        if layer > 0 {
            let below = CcId(layer - 1);
            channels.push(Channel {
                from: NodeId::Cc(below),
                to: NodeId::Cc(cc),
                hop_delay,
                kind: ChannelKind::Escalation,
            });
            channels.push(Channel {
                from: NodeId::Cc(cc),
                to: NodeId::Cc(below),
                hop_delay,
                kind: ChannelKind::Escalation,
            });
        }
    }
    Ok(Organization {
        structure: OrgStructure::Fractal,
        nodes,
        channels,
        cc_nodes,
        layer_of,
        hop_delay,
        cc_processing_time,
        escalation_threshold,
        roots: Vec::new(),
        responder_of: BTreeMap::new(),
    })
}

/// Builds the flat heterarchy: members only, no coordination node, implicit
/// one-hop broadcast between any two members.
pub fn build_heterarchy(
    agents: &mut BTreeMap<AgentId, Agent>,
    members: &[AgentId],
    hop_delay: u64,
) -> Result<Organization, OrgError> {
    if members.is_empty() {
        return Err(OrgError::EmptyMembership);
    }
    let mut nodes = BTreeSet::new();
    let mut layer_of = BTreeMap::new();
    for member in members {
        let agent =
            agents.get_mut(member).ok_or_else(|| OrgError::UnknownNode(NodeId::Agent(member.clone())))?;
        agent.exercised_behavior = agent.intrinsic_behavior;
        agent.layer = 0;
        nodes.insert(NodeId::Agent(member.clone()));
        layer_of.insert(member.clone(), 0);
    }
    Ok(Organization {
        structure: OrgStructure::Heterarchical,
        nodes,
        channels: Vec::new(),
        cc_nodes: Vec::new(),
        layer_of,
        hop_delay,
        cc_processing_time: 0,
        escalation_threshold: 0,
        roots: Vec::new(),
        responder_of: BTreeMap::new(),
    })
}
