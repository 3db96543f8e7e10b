//! The discrete-event engine.
//!
//! One run owns an integer tick clock and a single event queue ordered by
//! `(time, insertion sequence)`, so simultaneous events fire in the order
//! they were scheduled and every run of the same scenario and seed replays
//! identically. The only randomness is the seeded workload generator; the
//! pipelines themselves are fully deterministic.
//!
//! The notification pipeline per organization shape, uncontended:
//!
//! * centralized: emit `t`, reach the center at `t+h`, wait `p` in its
//!   FIFO, dispatch one hop, serve; complete at `t + 2h + p + duration`.
//! * fractal: as centralized, plus one extra hop per escalated layer.
//! * hierarchical: the alarm climbs its chain of monitoring devices to the
//!   responder (`L` hops), who works cases one at a time at `p + duration`
//!   each.
//! * heterarchical: one broadcast hop to decide, then the service runs;
//!   complete at `t + h + duration`.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::agents::{Agent, AgentId, Availability, CohesionStimulus, SubscriptionRecord};
use crate::fso::{dissolve_son, escalate, spawn_son, EscalationResult, Son, SonId};
use crate::matching::{match_notification, match_pooled, MatchResult};
use crate::ontology::{Notification, NotificationId, Role, Severity};
use crate::organization::{
    build_fso, build_heterarchy, build_mac, build_safety_net, fail_node, propagation_delay,
    recover_node, CcId, CcState, InboxItem, NodeId, OrgError, OrgStructure, Organization,
};
use crate::scenario::{
    FaultAction, Interarrival, OrgSpec, PerceptionEvent, PerceptionMode, Scenario, ScenarioError,
    SourceFilter,
};

/// Cohesion is re-sampled and decay/reinforcement applied every this many
/// ticks.
pub const COHESION_TICK_INTERVAL: u64 = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Org(#[from] OrgError),
    #[error("workload stream {stream} has no eligible sources")]
    EmptySources { stream: usize },
}

/// Why a notification definitively went unserviced. Notifications still in
/// flight when the horizon ends carry no record; they are counted by
/// subtraction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UnservicedReason {
    MissingRoles(Vec<(Role, u32)>),
    EscalationExhausted { layer_reached: u32, shortfalls: Vec<(Role, u32)> },
    SonExpired(SonId),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    Published { member: AgentId },
    Notified { notification: NotificationId, kind: String, source: AgentId, severity: Severity },
    NotifyArrived { notification: NotificationId, node: NodeId },
    Matched { notification: NotificationId, coordinator: NodeId, participants: Vec<AgentId> },
    Escalated {
        notification: NotificationId,
        origin: u32,
        layer_reached: u32,
        depth: u32,
        span: Vec<u32>,
    },
    SonSpawned {
        son: SonId,
        cc: CcId,
        notification: NotificationId,
        participants: Vec<AgentId>,
        expires_at: u64,
    },
    SonDissolved { son: SonId, completed: bool },
    ServiceCompleted { notification: NotificationId, emitted: u64, latency: u64, in_time: bool },
    Unserviced { notification: NotificationId, reason: UnservicedReason },
    NodeFailed { node: NodeId },
    NodeRecovered { node: NodeId },
    BlackSwanStruck { tag: String, victims: Vec<AgentId> },
    CrisisStarted,
    CrisisEnded,
    CohesionSampled { agent: AgentId, cohesion: f64, available: bool },
    MatchingLive { live: bool },
    Defected { agent: AgentId },
    PerceptionOccurred { index: usize, kind: String },
    PerceptionReacted { index: usize, agent: AgentId },
}

fn join_ids(ids: &[AgentId]) -> String {
    ids.iter().map(|id| id.as_str()).collect::<Vec<_>>().join(",")
}

impl std::fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TraceEvent::Published { member } => write!(f, "publish member={member}"),
            TraceEvent::Notified { notification, kind, source, severity } => {
                write!(f, "notify id={notification} kind={kind} source={source} severity={severity}")
            }
            TraceEvent::NotifyArrived { notification, node } => {
                write!(f, "arrive id={notification} node={node}")
            }
            TraceEvent::Matched { notification, coordinator, participants } => {
                write!(
                    f,
                    "match id={notification} coordinator={coordinator} team=[{}]",
                    join_ids(participants)
                )
            }
            TraceEvent::Escalated { notification, origin, layer_reached, depth, span } => {
                let span: Vec<String> = span.iter().map(u32::to_string).collect();
                write!(
                    f,
                    "escalate id={notification} origin={origin} reached={layer_reached} depth={depth} span=[{}]",
                    span.join(",")
                )
            }
            TraceEvent::SonSpawned { son, cc, notification, participants, expires_at } => {
                write!(
                    f,
                    "son-spawn {son} cc={cc} id={notification} team=[{}] expires={expires_at}",
                    join_ids(participants)
                )
            }
            TraceEvent::SonDissolved { son, completed } => {
                write!(f, "son-dissolve {son} completed={completed}")
            }
            TraceEvent::ServiceCompleted { notification, emitted, latency, in_time } => {
                write!(
                    f,
                    "complete id={notification} emitted={emitted} latency={latency} in_time={in_time}"
                )
            }
            TraceEvent::Unserviced { notification, reason } => {
                write!(f, "unserviced id={notification} reason=")?;
                match reason {
                    UnservicedReason::MissingRoles(short) => {
                        let short: Vec<String> =
                            short.iter().map(|(r, n)| format!("{r}:{n}")).collect();
                        write!(f, "missing-roles[{}]", short.join(","))
                    }
                    UnservicedReason::EscalationExhausted { layer_reached, shortfalls } => {
                        let short: Vec<String> =
                            shortfalls.iter().map(|(r, n)| format!("{r}:{n}")).collect();
                        write!(f, "escalation-exhausted reached={layer_reached} missing=[{}]", short.join(","))
                    }
                    UnservicedReason::SonExpired(son) => write!(f, "son-expired {son}"),
                }
            }
            TraceEvent::NodeFailed { node } => write!(f, "fail node={node}"),
            TraceEvent::NodeRecovered { node } => write!(f, "recover node={node}"),
            TraceEvent::BlackSwanStruck { tag, victims } => {
                write!(f, "black-swan tag={tag} victims=[{}]", join_ids(victims))
            }
            TraceEvent::CrisisStarted => write!(f, "crisis-start"),
            TraceEvent::CrisisEnded => write!(f, "crisis-end"),
            TraceEvent::CohesionSampled { agent, cohesion, available } => {
                write!(f, "cohesion agent={agent} value={cohesion:.6} available={available}")
            }
            TraceEvent::MatchingLive { live } => write!(f, "matching-live {live}"),
            TraceEvent::Defected { agent } => write!(f, "defect agent={agent}"),
            TraceEvent::PerceptionOccurred { index, kind } => {
                write!(f, "perceive index={index} kind={kind}")
            }
            TraceEvent::PerceptionReacted { index, agent } => {
                write!(f, "perceive-react index={index} agent={agent}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub time: u64,
    pub seq: u64,
    pub event: TraceEvent,
}

impl std::fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{:>6}:{:>4}] {}", self.time, self.seq, self.event)
    }
}

/// Full record of one run, in `(time, seq)` order, plus the metadata the
/// indicator layer needs to interpret it.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub scenario: String,
    pub seed: u64,
    pub horizon: u64,
    /// Defection threshold the cohesion samples were taken against.
    pub c_def: f64,
    pub records: Vec<TraceRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub trace: Trace,
    pub organization: Organization,
    /// Roster right after the organization was built, devices included.
    pub initial_agents: BTreeMap<AgentId, Agent>,
    pub final_agents: BTreeMap<AgentId, Agent>,
}

fn draw_gap(interarrival: Interarrival, rng: &mut ChaCha8Rng) -> u64 {
    match interarrival {
        Interarrival::Fixed(d) => d,
        Interarrival::Uniform(a, b) => rng.gen_range(a..=b),
        Interarrival::Geometric(p) => {
            if p >= 1.0 {
                1
            } else {
                let u: f64 = rng.gen();
                ((1.0 - u).ln() / (1.0 - p).ln()).floor() as u64 + 1
            }
        }
    }
}

/// Draws every stream of the scenario workload: gaps first, then a uniform
/// source pick per notification. Streams are drawn in declared order and
/// stably merged by `(time, stream, ordinal)`, so ids follow merged time
/// order.
pub fn generate_workload(
    scenario: &Scenario,
    org: &Organization,
    agents: &BTreeMap<AgentId, Agent>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Notification>, SimError> {
    let members: Vec<&AgentId> = org.members().collect();
    let mut raw: Vec<(u64, usize, u64, AgentId)> = Vec::new();
    for (stream_idx, stream) in scenario.workload.iter().enumerate() {
        let candidates: Vec<&AgentId> = match &stream.sources {
            SourceFilter::All => members.clone(),
            SourceFilter::Role(role) => members
                .iter()
                .copied()
                .filter(|id| {
                    agents[*id].advertisements.iter().any(|ad| {
                        scenario.ontology.satisfies(ad, role).unwrap_or(false)
                    })
                })
                .collect(),
            SourceFilter::Ids(ids) => {
                ids.iter().filter(|id| org.layer_of.contains_key(*id)).collect()
            }
        };
        if candidates.is_empty() {
            return Err(SimError::EmptySources { stream: stream_idx });
        }
        let mut t = 0u64;
        let mut ordinal = 0u64;
        loop {
            t += draw_gap(stream.interarrival, rng);
            if t >= scenario.horizon {
                break;
            }
            let source = candidates[rng.gen_range(0..candidates.len())].clone();
            raw.push((t, stream_idx, ordinal, source));
            ordinal += 1;
        }
    }
    raw.sort_by_key(|r| (r.0, r.1, r.2));
    Ok(raw
        .into_iter()
        .enumerate()
        .map(|(i, (time, stream_idx, _, source))| {
            let stream = &scenario.workload[stream_idx];
            Notification {
                id: NotificationId(i as u64),
                kind: stream.kind.clone(),
                source: source.clone(),
                location: agents[&source].location,
                time,
                severity: stream.severity,
            }
        })
        .collect())
}

/// Reaction schedule for one perception event, assuming uncontended
/// coordination centers. Individual mode: members whose perception radius
/// covers the point react on the spot. Collective mode: the earliest
/// publication to arrive wins, its center broadcasts after one processing
/// cost, and every member reacts one propagation away.
pub fn perception_reactions(
    org: &Organization,
    agents: &BTreeMap<AgentId, Agent>,
    event: &PerceptionEvent,
    mode: PerceptionMode,
) -> Vec<(u64, AgentId)> {
    let in_range = |agent: &Agent| agent.location.distance(event.location) <= agent.perception_radius;
    match mode {
        PerceptionMode::Individual => org
            .members()
            .filter_map(|id| {
                let agent = &agents[id];
                (agent.availability != Availability::Failed && in_range(agent))
                    .then(|| (event.time, id.clone()))
            })
            .collect(),
        PerceptionMode::Collective => {
            let mut best: Option<(u64, CcId)> = None;
            for id in org.members() {
                let agent = &agents[id];
                let perceives = matches!(
                    agent.availability,
                    Availability::Idle | Availability::Busy
                ) && in_range(agent);
                if !perceives {
                    continue;
                }
                let cc = CcId(org.layer_of[id]);
                let delay =
                    propagation_delay(org, &NodeId::Agent(id.clone()), &NodeId::Cc(cc))
                        .expect("member has a channel to its center");
                let arrival = (event.time + delay, cc);
                if best.is_none_or(|b| arrival < b) {
                    best = Some(arrival);
                }
            }
            let Some((arrival, cc)) = best else { return Vec::new() };
            let broadcast = arrival + org.cc_processing_time;
            let mut out: Vec<(u64, AgentId)> = org
                .members()
                .filter(|id| agents[*id].availability != Availability::Failed)
                .map(|id| {
                    let delay = propagation_delay(org, &NodeId::Cc(cc), &NodeId::Agent(id.clone()))
                        .expect("center has a channel to every member");
                    (broadcast + delay, id.clone())
                })
                .collect();
            out.sort();
            out
        }
    }
}

#[derive(Debug, Clone)]
enum EventKind {
    Notify(NotificationId),
    CcArrive { cc: CcId, item: InboxItem },
    CcProcess { cc: CcId, epoch: u64 },
    RootArrive { root: AgentId, notification: NotificationId },
    HetDecide(NotificationId),
    ServiceComplete(NotificationId),
    SonDissolve(SonId),
    Fault(usize),
    CohesionTick,
    PerceptionOccur(usize),
    PerceptionReact { index: usize, agent: AgentId },
}

struct Scheduled {
    time: u64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

struct NoteState {
    notification: Notification,
    completed: bool,
    aborted: bool,
    participants: Vec<AgentId>,
    son: Option<SonId>,
}

struct SonRuntime {
    son: Son,
    notification: NotificationId,
    completed: bool,
    dissolved: bool,
}

struct Engine<'s> {
    scenario: &'s Scenario,
    org: Organization,
    agents: BTreeMap<AgentId, Agent>,
    ccs: BTreeMap<CcId, CcState>,
    het_registry: Vec<SubscriptionRecord>,
    notes: BTreeMap<NotificationId, NoteState>,
    sons: BTreeMap<SonId, SonRuntime>,
    next_son: u64,
    root_queue: BTreeMap<AgentId, VecDeque<NotificationId>>,
    queue: BinaryHeap<Reverse<Scheduled>>,
    seq: u64,
    now: u64,
    crisis: bool,
    completed_since_tick: BTreeSet<AgentId>,
    defected_seen: BTreeSet<AgentId>,
    perception_broadcast: BTreeSet<usize>,
    perception_reacted: BTreeSet<(usize, AgentId)>,
    records: Vec<TraceRecord>,
    record_seq: u64,
}

impl<'s> Engine<'s> {
    fn record(&mut self, event: TraceEvent) {
        self.records.push(TraceRecord { time: self.now, seq: self.record_seq, event });
        self.record_seq += 1;
    }

    /// Events past the horizon are never scheduled; work whose finish falls
    /// off the end simply stays pending.
    fn schedule(&mut self, time: u64, kind: EventKind) {
        if time > self.scenario.horizon {
            return;
        }
        self.queue.push(Reverse(Scheduled { time, seq: self.seq, kind }));
        self.seq += 1;
    }

    fn protocol_for(&self, kind: &str) -> &crate::ontology::ServicingProtocol {
        self.scenario.protocol_for(kind).expect("workload kinds are validated against protocols")
    }

    fn setup(&mut self, seed: u64) -> Result<(), SimError> {
        // Registration happens at tick zero and costs nothing; the queueing
        // model applies to notifications, not to joining.
        let members: Vec<AgentId> = self.org.members().cloned().collect();
        for id in &members {
            let record = self
                .agents
                .get_mut(id)
                .expect("org members exist")
                .subscribe()
                .expect("all agents start idle");
            match self.org.structure {
                OrgStructure::Centralized => {
                    self.ccs.get_mut(&CcId(0)).unwrap().registry.push(record);
                }
                OrgStructure::Fractal => {
                    let cc = CcId(self.org.layer_of[id]);
                    self.ccs.get_mut(&cc).unwrap().registry.push(record);
                }
                OrgStructure::Hierarchical => {}
                OrgStructure::Heterarchical => self.het_registry.push(record),
            }
            self.record(TraceEvent::Published { member: id.clone() });
        }
        self.schedule(COHESION_TICK_INTERVAL, EventKind::CohesionTick);
        if let Some(perception) = &self.scenario.perception {
            for (index, event) in perception.events.iter().enumerate() {
                self.schedule(event.time, EventKind::PerceptionOccur(index));
            }
        }
        for (index, fault) in self.scenario.faults.iter().enumerate() {
            self.schedule(fault.at, EventKind::Fault(index));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let notifications = generate_workload(self.scenario, &self.org, &self.agents, &mut rng)?;
        for n in notifications {
            let id = n.id;
            let time = n.time;
            self.notes.insert(
                id,
                NoteState {
                    notification: n,
                    completed: false,
                    aborted: false,
                    participants: Vec::new(),
                    son: None,
                },
            );
            self.schedule(time, EventKind::Notify(id));
        }
        Ok(())
    }

    fn run_loop(&mut self) -> Result<(), SimError> {
        while let Some(Reverse(event)) = self.queue.pop() {
            self.now = event.time;
            self.handle(event.kind)?;
        }
        Ok(())
    }

    fn handle(&mut self, kind: EventKind) -> Result<(), SimError> {
        match kind {
            EventKind::Notify(id) => self.on_notify(id),
            EventKind::CcArrive { cc, item } => {
                self.on_cc_arrive(cc, item);
                Ok(())
            }
            EventKind::CcProcess { cc, epoch } => {
                self.on_cc_process(cc, epoch);
                Ok(())
            }
            EventKind::RootArrive { root, notification } => {
                self.on_root_arrive(root, notification);
                Ok(())
            }
            EventKind::HetDecide(id) => {
                self.on_het_decide(id);
                Ok(())
            }
            EventKind::ServiceComplete(id) => {
                self.on_service_complete(id);
                Ok(())
            }
            EventKind::SonDissolve(id) => {
                self.on_son_dissolve(id);
                Ok(())
            }
            EventKind::Fault(index) => self.on_fault(index),
            EventKind::CohesionTick => {
                self.on_cohesion_tick();
                Ok(())
            }
            EventKind::PerceptionOccur(index) => {
                self.on_perception_occur(index);
                Ok(())
            }
            EventKind::PerceptionReact { index, agent } => {
                self.on_perception_react(index, agent);
                Ok(())
            }
        }
    }

    fn on_notify(&mut self, id: NotificationId) -> Result<(), SimError> {
        let n = self.notes[&id].notification.clone();
        self.record(TraceEvent::Notified {
            notification: id,
            kind: n.kind.clone(),
            source: n.source.clone(),
            severity: n.severity,
        });
        match self.org.structure {
            OrgStructure::Centralized => {
                let delay = propagation_delay(
                    &self.org,
                    &NodeId::Agent(n.source.clone()),
                    &NodeId::cc(0),
                )?;
                self.schedule(
                    self.now + delay,
                    EventKind::CcArrive { cc: CcId(0), item: InboxItem::Notification(id) },
                );
            }
            OrgStructure::Fractal => {
                let cc = CcId(self.org.layer_of[&n.source]);
                let delay =
                    propagation_delay(&self.org, &NodeId::Agent(n.source.clone()), &NodeId::Cc(cc))?;
                self.schedule(
                    self.now + delay,
                    EventKind::CcArrive { cc, item: InboxItem::Notification(id) },
                );
            }
            OrgStructure::Hierarchical => {
                let root = self.org.responder_of[&n.source].clone();
                let delay = propagation_delay(
                    &self.org,
                    &NodeId::Agent(n.source.clone()),
                    &NodeId::Agent(root.clone()),
                )?;
                self.schedule(self.now + delay, EventKind::RootArrive { root, notification: id });
            }
            OrgStructure::Heterarchical => {
                self.schedule(self.now + self.org.hop_delay, EventKind::HetDecide(id));
            }
        }
        Ok(())
    }

    fn on_cc_arrive(&mut self, cc: CcId, item: InboxItem) {
        if let InboxItem::Notification(id) = item {
            self.record(TraceEvent::NotifyArrived { notification: id, node: NodeId::Cc(cc) });
        }
        let p = self.org.cc_processing_time;
        let state = self.ccs.get_mut(&cc).unwrap();
        state.inbox.push_back(item);
        if state.alive && !state.processing {
            state.processing = true;
            let epoch = state.epoch;
            self.schedule(self.now + p, EventKind::CcProcess { cc, epoch });
        }
    }

    fn on_cc_process(&mut self, cc: CcId, epoch: u64) {
        let state = self.ccs.get_mut(&cc).unwrap();
        if state.epoch != epoch {
            return;
        }
        if !state.alive {
            state.processing = false;
            return;
        }
        let Some(item) = state.inbox.pop_front() else {
            state.processing = false;
            return;
        };
        match item {
            InboxItem::Notification(id) => self.decide(cc, id),
            InboxItem::Perception(index) => self.cc_broadcast_perception(cc, index as usize),
        }
        let p = self.org.cc_processing_time;
        let state = self.ccs.get_mut(&cc).unwrap();
        if state.alive && !state.inbox.is_empty() {
            let epoch = state.epoch;
            self.schedule(self.now + p, EventKind::CcProcess { cc, epoch });
        } else {
            state.processing = false;
        }
    }

    fn decide(&mut self, cc: CcId, id: NotificationId) {
        let n = self.notes[&id].notification.clone();
        let protocol = self.protocol_for(&n.kind).clone();
        match self.org.structure {
            OrgStructure::Centralized => {
                let outcome = match_notification(
                    &self.ccs[&cc],
                    &n,
                    &protocol,
                    &self.scenario.ontology,
                    &self.agents,
                )
                .expect("center is alive and the kind has this protocol");
                match outcome {
                    MatchResult::Assignment(slots) => {
                        let participants: Vec<AgentId> = slots.into_iter().flatten().collect();
                        for pid in &participants {
                            self.agents.get_mut(pid).unwrap().availability = Availability::Busy;
                        }
                        self.record(TraceEvent::Matched {
                            notification: id,
                            coordinator: NodeId::Cc(cc),
                            participants: participants.clone(),
                        });
                        let completion = self.now + self.org.hop_delay + protocol.service_duration;
                        self.notes.get_mut(&id).unwrap().participants = participants;
                        self.schedule(completion, EventKind::ServiceComplete(id));
                    }
                    MatchResult::MissingRoles(short) => {
                        self.record(TraceEvent::Unserviced {
                            notification: id,
                            reason: UnservicedReason::MissingRoles(short),
                        });
                    }
                }
            }
            OrgStructure::Fractal => {
                let origin = cc.0;
                let outcome = escalate(
                    &self.org,
                    &self.ccs,
                    &self.agents,
                    origin,
                    &n,
                    &protocol,
                    &self.scenario.ontology,
                )
                .expect("the processing center is alive");
                match outcome {
                    EscalationResult::Resolved { layer_reached, depth, assignment, span, .. } => {
                        let flat: Vec<AgentId> = assignment.into_iter().flatten().collect();
                        let participants: BTreeSet<AgentId> = flat.iter().cloned().collect();
                        self.record(TraceEvent::Escalated {
                            notification: id,
                            origin,
                            layer_reached,
                            depth,
                            span: span.iter().copied().collect(),
                        });
                        self.record(TraceEvent::Matched {
                            notification: id,
                            coordinator: NodeId::Cc(CcId(layer_reached)),
                            participants: flat.clone(),
                        });
                        let son_id = SonId(self.next_son);
                        self.next_son += 1;
                        let son = spawn_son(
                            son_id,
                            CcId(layer_reached),
                            participants.clone(),
                            id,
                            self.now,
                            protocol.son_lifespan,
                            span,
                            &mut self.agents,
                        )
                        .expect("freshly matched agents are idle");
                        let expires_at = son.expires_at();
                        self.record(TraceEvent::SonSpawned {
                            son: son_id,
                            cc: CcId(layer_reached),
                            notification: id,
                            participants: participants.iter().cloned().collect(),
                            expires_at,
                        });
                        let completion = self.now
                            + u64::from(depth) * self.org.hop_delay
                            + self.org.hop_delay
                            + protocol.service_duration;
                        {
                            let note = self.notes.get_mut(&id).unwrap();
                            note.participants = flat;
                            note.son = Some(son_id);
                        }
                        self.sons.insert(
                            son_id,
                            SonRuntime { son, notification: id, completed: false, dissolved: false },
                        );
                        if expires_at < completion {
                            // The network will die before the service can
                            // finish; only the expiry is scheduled.
                            self.schedule(expires_at, EventKind::SonDissolve(son_id));
                        } else {
                            self.schedule(completion, EventKind::ServiceComplete(id));
                            self.schedule(completion, EventKind::SonDissolve(son_id));
                        }
                    }
                    EscalationResult::Unserviced { layer_reached, shortfalls } => {
                        self.record(TraceEvent::Unserviced {
                            notification: id,
                            reason: UnservicedReason::EscalationExhausted {
                                layer_reached,
                                shortfalls,
                            },
                        });
                    }
                }
            }
            _ => unreachable!("only centralized and fractal shapes have coordination centers"),
        }
    }

    fn on_root_arrive(&mut self, root: AgentId, id: NotificationId) {
        self.record(TraceEvent::NotifyArrived {
            notification: id,
            node: NodeId::Agent(root.clone()),
        });
        self.root_queue.entry(root.clone()).or_default().push_back(id);
        self.root_dequeue(&root);
    }

    /// Starts the responder's next case if they are idle. Cases cost the
    /// processing time plus the service duration, one at a time; a failed
    /// or defected responder leaves the queue frozen.
    fn root_dequeue(&mut self, root: &AgentId) {
        if self.agents[root].availability != Availability::Idle {
            return;
        }
        let Some(id) = self.root_queue.get_mut(root).and_then(|q| q.pop_front()) else {
            return;
        };
        self.agents.get_mut(root).unwrap().availability = Availability::Busy;
        self.record(TraceEvent::Matched {
            notification: id,
            coordinator: NodeId::Agent(root.clone()),
            participants: vec![root.clone()],
        });
        let protocol = self.protocol_for(&self.notes[&id].notification.kind);
        let completion = self.now + self.org.cc_processing_time + protocol.service_duration;
        self.notes.get_mut(&id).unwrap().participants = vec![root.clone()];
        self.schedule(completion, EventKind::ServiceComplete(id));
    }

    fn on_het_decide(&mut self, id: NotificationId) {
        let n = self.notes[&id].notification.clone();
        let protocol = self.protocol_for(&n.kind).clone();
        let outcome = match_pooled(
            &[&self.het_registry],
            &n,
            &protocol,
            &self.scenario.ontology,
            &self.agents,
        )
        .expect("workload kinds are validated against protocols");
        match outcome {
            MatchResult::Assignment(slots) => {
                let participants: Vec<AgentId> = slots.into_iter().flatten().collect();
                for pid in &participants {
                    self.agents.get_mut(pid).unwrap().availability = Availability::Busy;
                }
                self.record(TraceEvent::Matched {
                    notification: id,
                    coordinator: NodeId::Agent(n.source.clone()),
                    participants: participants.clone(),
                });
                self.notes.get_mut(&id).unwrap().participants = participants;
                self.schedule(self.now + protocol.service_duration, EventKind::ServiceComplete(id));
            }
            MatchResult::MissingRoles(short) => {
                self.record(TraceEvent::Unserviced {
                    notification: id,
                    reason: UnservicedReason::MissingRoles(short),
                });
            }
        }
    }

    fn on_service_complete(&mut self, id: NotificationId) {
        let (emitted, kind, participants, son) = {
            let note = self.notes.get_mut(&id).unwrap();
            if note.completed || note.aborted {
                return;
            }
            note.completed = true;
            (
                note.notification.time,
                note.notification.kind.clone(),
                note.participants.clone(),
                note.son,
            )
        };
        let latency = self.now - emitted;
        let in_time = latency <= self.protocol_for(&kind).deadline;
        self.record(TraceEvent::ServiceCompleted { notification: id, emitted, latency, in_time });
        for pid in &participants {
            let agent = self.agents.get_mut(pid).unwrap();
            if agent.availability == Availability::Busy {
                agent.availability = Availability::Idle;
            }
            self.completed_since_tick.insert(pid.clone());
        }
        if let Some(son_id) = son {
            self.sons.get_mut(&son_id).unwrap().completed = true;
        }
        if self.org.structure == OrgStructure::Hierarchical {
            if let Some(root) = participants.first().cloned() {
                self.root_dequeue(&root);
            }
        }
    }

    fn on_son_dissolve(&mut self, son_id: SonId) {
        let (son, completed, notification) = {
            let runtime = self.sons.get_mut(&son_id).unwrap();
            if runtime.dissolved {
                return;
            }
            runtime.dissolved = true;
            (runtime.son.clone(), runtime.completed, runtime.notification)
        };
        dissolve_son(&son, &mut self.agents);
        self.record(TraceEvent::SonDissolved { son: son_id, completed });
        if !completed {
            self.notes.get_mut(&notification).unwrap().aborted = true;
            self.record(TraceEvent::Unserviced {
                notification,
                reason: UnservicedReason::SonExpired(son_id),
            });
        }
    }

    fn on_fault(&mut self, index: usize) -> Result<(), SimError> {
        let action = self.scenario.faults[index].action.clone();
        match action {
            FaultAction::Fail(node) => {
                fail_node(&self.org, &mut self.agents, &mut self.ccs, &node)?;
                self.record(TraceEvent::NodeFailed { node });
            }
            FaultAction::Recover(node) => {
                recover_node(&self.org, &mut self.agents, &mut self.ccs, &node)?;
                self.record(TraceEvent::NodeRecovered { node: node.clone() });
                match node {
                    NodeId::Cc(cc) => {
                        let p = self.org.cc_processing_time;
                        let state = self.ccs.get_mut(&cc).unwrap();
                        if state.alive && !state.inbox.is_empty() && !state.processing {
                            state.processing = true;
                            let epoch = state.epoch;
                            self.schedule(self.now + p, EventKind::CcProcess { cc, epoch });
                        }
                    }
                    NodeId::Agent(id) => {
                        if self.org.structure == OrgStructure::Hierarchical
                            && self.root_queue.contains_key(&id)
                        {
                            self.root_dequeue(&id);
                        }
                    }
                }
            }
            FaultAction::BlackSwan(tag) => {
                let victims: Vec<AgentId> = self
                    .org
                    .members()
                    .filter(|id| {
                        let agent = &self.agents[*id];
                        agent.solution_tag == tag && agent.availability != Availability::Failed
                    })
                    .cloned()
                    .collect();
                self.record(TraceEvent::BlackSwanStruck { tag, victims: victims.clone() });
                for victim in victims {
                    let node = NodeId::Agent(victim);
                    fail_node(&self.org, &mut self.agents, &mut self.ccs, &node)?;
                    self.record(TraceEvent::NodeFailed { node });
                }
            }
            FaultAction::CrisisStart => {
                self.crisis = true;
                self.record(TraceEvent::CrisisStarted);
            }
            FaultAction::CrisisEnd => {
                self.crisis = false;
                self.record(TraceEvent::CrisisEnded);
            }
        }
        Ok(())
    }

    fn on_cohesion_tick(&mut self) {
        let members: Vec<AgentId> = self.org.members().cloned().collect();
        for id in &members {
            let mut newly_defected = false;
            let (cohesion, available) = {
                let crisis = self.crisis;
                let returned = self.completed_since_tick.contains(id);
                let agent = self.agents.get_mut(id).unwrap();
                if agent.availability != Availability::Failed {
                    if returned {
                        let stimulus = if crisis {
                            CohesionStimulus::CrisisUtilizedReturn
                        } else {
                            CohesionStimulus::UtilizedReturn
                        };
                        agent.update_cohesion(stimulus, &self.scenario.cohesion).unwrap();
                    }
                    if agent.bop_gap() > 0 {
                        agent.update_cohesion(CohesionStimulus::BopTick, &self.scenario.cohesion).unwrap();
                    }
                    if agent.availability == Availability::Defected
                        && !self.defected_seen.contains(id)
                    {
                        newly_defected = true;
                    }
                }
                (
                    agent.cohesion,
                    matches!(agent.availability, Availability::Idle | Availability::Busy),
                )
            };
            if newly_defected {
                self.defected_seen.insert(id.clone());
                self.record(TraceEvent::Defected { agent: id.clone() });
            }
            self.record(TraceEvent::CohesionSampled { agent: id.clone(), cohesion, available });
        }
        let live = self.matching_live();
        self.record(TraceEvent::MatchingLive { live });
        self.completed_since_tick.clear();
        self.schedule(self.now + COHESION_TICK_INTERVAL, EventKind::CohesionTick);
    }

    /// Whether the organization could still convene assistance right now.
    fn matching_live(&self) -> bool {
        match self.org.structure {
            OrgStructure::Centralized | OrgStructure::Fractal => {
                let any_cc_alive = self.ccs.values().any(|cc| cc.alive);
                let any_member = self
                    .org
                    .members()
                    .any(|id| self.agents[id].availability != Availability::Failed);
                any_cc_alive && any_member
            }
            OrgStructure::Hierarchical => self.org.roots.iter().any(|root| {
                matches!(
                    self.agents[root].availability,
                    Availability::Idle | Availability::Busy
                )
            }),
            OrgStructure::Heterarchical => {
                self.org
                    .members()
                    .filter(|id| self.agents[*id].availability != Availability::Failed)
                    .count()
                    >= 2
            }
        }
    }

    fn on_perception_occur(&mut self, index: usize) {
        let spec = self.scenario.perception.as_ref().expect("scheduled from the spec");
        let event = spec.events[index].clone();
        let mode = spec.mode;
        self.record(TraceEvent::PerceptionOccurred { index, kind: event.kind.clone() });
        let members: Vec<AgentId> = self.org.members().cloned().collect();
        match mode {
            PerceptionMode::Individual => {
                for id in members {
                    let agent = &self.agents[&id];
                    if agent.availability == Availability::Failed {
                        continue;
                    }
                    if agent.location.distance(event.location) <= agent.perception_radius {
                        self.perception_reacted.insert((index, id.clone()));
                        self.record(TraceEvent::PerceptionReacted { index, agent: id });
                    }
                }
            }
            PerceptionMode::Collective => {
                for id in members {
                    let agent = &self.agents[&id];
                    let perceives = matches!(
                        agent.availability,
                        Availability::Idle | Availability::Busy
                    ) && agent.location.distance(event.location)
                        <= agent.perception_radius;
                    if !perceives {
                        continue;
                    }
                    let cc = CcId(self.org.layer_of[&id]);
                    let delay =
                        propagation_delay(&self.org, &NodeId::Agent(id.clone()), &NodeId::Cc(cc))
                            .expect("member has a channel to its center");
                    self.schedule(
                        self.now + delay,
                        EventKind::CcArrive { cc, item: InboxItem::Perception(index as u64) },
                    );
                }
            }
        }
    }

    /// First processed publication wins; the center orders every member to
    /// react, one propagation away. Later publications of the same event
    /// still cost their queue slot but broadcast nothing.
    fn cc_broadcast_perception(&mut self, cc: CcId, index: usize) {
        if !self.perception_broadcast.insert(index) {
            return;
        }
        let members: Vec<AgentId> = self.org.members().cloned().collect();
        for id in members {
            let delay = propagation_delay(&self.org, &NodeId::Cc(cc), &NodeId::Agent(id.clone()))
                .expect("center has a channel to every member");
            self.schedule(self.now + delay, EventKind::PerceptionReact { index, agent: id });
        }
    }

    fn on_perception_react(&mut self, index: usize, agent: AgentId) {
        if self.perception_reacted.contains(&(index, agent.clone())) {
            return;
        }
        if self.agents[&agent].availability == Availability::Failed {
            return;
        }
        self.perception_reacted.insert((index, agent.clone()));
        self.record(TraceEvent::PerceptionReacted { index, agent });
    }
}

/// Runs one scenario to its horizon and returns the full trace.
pub fn run(scenario: &Scenario, seed: u64) -> Result<SimOutput, SimError> {
    scenario.validate()?;
    let mut agents: BTreeMap<AgentId, Agent> = scenario
        .roster
        .iter()
        .map(|agent| {
            let mut agent = agent.clone();
            agent.cohesion = scenario.initial_cohesion;
            (agent.id.clone(), agent)
        })
        .collect();
    let org = match &scenario.organization {
        OrgSpec::SafetyNet { patients, doctors, assignment, devices_per_patient } => {
            build_safety_net(
                &mut agents,
                patients,
                doctors,
                assignment,
                *devices_per_patient,
                scenario.hop_delay,
                scenario.cc_processing_time,
            )?
        }
        OrgSpec::Mac { members } => {
            build_mac(&mut agents, members, scenario.hop_delay, scenario.cc_processing_time)?
        }
        OrgSpec::Fso { layers, escalation_threshold } => build_fso(
            &mut agents,
            layers,
            scenario.hop_delay,
            scenario.cc_processing_time,
            *escalation_threshold,
        )?,
        OrgSpec::Heterarchy { members } => {
            build_heterarchy(&mut agents, members, scenario.hop_delay)?
        }
    };
    let ccs: BTreeMap<CcId, CcState> =
        org.cc_nodes.iter().map(|&cc| (cc, CcState::new(cc))).collect();
    let initial_agents = agents.clone();
    let mut engine = Engine {
        scenario,
        org,
        agents,
        ccs,
        het_registry: Vec::new(),
        notes: BTreeMap::new(),
        sons: BTreeMap::new(),
        next_son: 0,
        root_queue: BTreeMap::new(),
        queue: BinaryHeap::new(),
        seq: 0,
        now: 0,
        crisis: false,
        completed_since_tick: BTreeSet::new(),
        defected_seen: BTreeSet::new(),
        perception_broadcast: BTreeSet::new(),
        perception_reacted: BTreeSet::new(),
        records: Vec::new(),
        record_seq: 0,
    };
    engine.setup(seed)?;
    engine.run_loop()?;
    Ok(SimOutput {
        trace: Trace {
            scenario: scenario.name.clone(),
            seed,
            horizon: scenario.horizon,
            c_def: scenario.cohesion.c_def,
            records: engine.records,
        },
        organization: engine.org,
        initial_agents,
        final_agents: engine.agents,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{CohesionParams, PersonaClass, Point};
    use crate::indicators::PersistenceParams;
    use crate::ontology::{Ontology, Requirement, ServicingProtocol};
    use crate::scenario::{FaultEntry, PerceptionSpec, StreamSpec};

    fn fall_protocol() -> ServicingProtocol {
        ServicingProtocol {
            id: "fall".into(),
            trigger_kind: "member_fallen".into(),
            requirements: vec![
                Requirement::new("informal caregiver", 1, 2),
                Requirement::new("professional caregiver", 1, 1),
            ],
            service_duration: 5,
            deadline: 30,
            son_lifespan: 50,
        }
    }

    fn mac_roster() -> Vec<Agent> {
        vec![
            Agent::new("x", PersonaClass::HumanBeing).advertising(["patient"]),
            Agent::new("n1", PersonaClass::HumanBeing).at(1.0, 0.0).advertising(["informal caregiver"]),
            Agent::new("n2", PersonaClass::HumanBeing).at(2.0, 0.0).advertising(["informal caregiver"]),
            Agent::new("n3", PersonaClass::HumanBeing).at(3.0, 0.0).advertising(["informal caregiver"]),
            Agent::new("n4", PersonaClass::HumanBeing).at(4.0, 0.0).advertising(["informal caregiver"]),
            Agent::new("gp", PersonaClass::HumanBeing).at(5.0, 0.0).advertising(["general practitioner"]),
        ]
    }

    fn member_ids(roster: &[Agent]) -> Vec<AgentId> {
        roster.iter().map(|a| a.id.clone()).collect()
    }

    fn mac_scenario() -> Scenario {
        let roster = mac_roster();
        let members = member_ids(&roster);
        Scenario {
            name: "mac-test".into(),
            horizon: 100,
            ontology: Ontology::default_care(),
            roster,
            organization: OrgSpec::Mac { members },
            hop_delay: 1,
            cc_processing_time: 0,
            protocols: vec![fall_protocol()],
            workload: vec![StreamSpec {
                kind: "member_fallen".into(),
                interarrival: Interarrival::Fixed(10),
                severity: Severity::Alarm,
                sources: SourceFilter::Ids(vec![AgentId::new("x")]),
            }],
            faults: Vec::new(),
            cohesion: CohesionParams::default(),
            initial_cohesion: 0.8,
            persistence: PersistenceParams::default(),
            perception: None,
        }
    }

    fn completions(trace: &Trace) -> Vec<(u64, u64)> {
        trace
            .records
            .iter()
            .filter_map(|r| match &r.event {
                TraceEvent::ServiceCompleted { emitted, latency, .. } => Some((*emitted, *latency)),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn centralized_pipeline_costs_two_hops_plus_service() {
        // Emission at t, arrival t+1, zero processing, dispatch t+2,
        // service for 5: completion at t+7 for every uncontended fall.
        let out = run(&mac_scenario(), 0).unwrap();
        let done = completions(&out.trace);
        assert_eq!(done.len(), 9);
        for (emitted, latency) in done {
            assert_eq!(latency, 7, "emission at {emitted}");
        }
    }

    #[test]
    fn fixed_gaps_fill_the_horizon_exclusively() {
        let mut scenario = mac_scenario();
        scenario.horizon = 35;
        let out = run(&scenario, 3).unwrap();
        let times: Vec<u64> = out
            .trace
            .records
            .iter()
            .filter_map(|r| match &r.event {
                TraceEvent::Notified { .. } => Some(r.time),
                _ => None,
            })
            .collect();
        assert_eq!(times, vec![10, 20, 30]);
    }

    #[test]
    fn geometric_gaps_hit_their_mean() {
        let mut scenario = mac_scenario();
        scenario.horizon = 200_000;
        scenario.workload[0].interarrival = Interarrival::Geometric(0.1);
        let mut agents: BTreeMap<AgentId, Agent> =
            scenario.roster.iter().map(|a| (a.id.clone(), a.clone())).collect();
        let org = build_mac(&mut agents, &member_ids(&scenario.roster), 1, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let notifications = generate_workload(&scenario, &org, &agents, &mut rng).unwrap();
        assert!(notifications.len() > 10_000);
        let mut previous = 0;
        let mut total_gap = 0u64;
        for n in &notifications {
            total_gap += n.time - previous;
            previous = n.time;
        }
        let mean = total_gap as f64 / notifications.len() as f64;
        assert!((mean - 10.0).abs() < 1.0, "mean gap {mean}");
    }

    #[test]
    fn identical_seeds_replay_identically() {
        let scenario = mac_scenario();
        let a = run(&scenario, 42).unwrap();
        let b = run(&scenario, 42).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.final_agents, b.final_agents);
    }

    #[test]
    fn uniform_gaps_differ_across_seeds() {
        let mut scenario = mac_scenario();
        scenario.workload[0].interarrival = Interarrival::Uniform(5, 15);
        let times = |seed: u64| -> Vec<u64> {
            run(&scenario, seed)
                .unwrap()
                .trace
                .records
                .iter()
                .filter_map(|r| match &r.event {
                    TraceEvent::Notified { .. } => Some(r.time),
                    _ => None,
                })
                .collect()
        };
        assert_ne!(times(1), times(2));
    }

    #[test]
    fn every_notification_is_completed_unserviced_or_pending() {
        let mut scenario = mac_scenario();
        scenario.workload[0].interarrival = Interarrival::Uniform(2, 6);
        for seed in 0..5 {
            let out = run(&scenario, seed).unwrap();
            let mut notified = BTreeSet::new();
            let mut settled = BTreeSet::new();
            for r in &out.trace.records {
                match &r.event {
                    TraceEvent::Notified { notification, .. } => {
                        assert!(notified.insert(*notification));
                    }
                    TraceEvent::ServiceCompleted { notification, .. }
                    | TraceEvent::Unserviced { notification, .. } => {
                        assert!(settled.insert(*notification), "{notification} settled twice");
                    }
                    _ => {}
                }
            }
            assert!(settled.is_subset(&notified));
        }
    }

    #[test]
    fn dead_center_freezes_and_recovery_drains() {
        let mut scenario = mac_scenario();
        scenario.horizon = 100;
        // One helper per fall, so the backlog can drain in parallel.
        scenario.protocols[0].requirements = vec![Requirement::new("informal caregiver", 1, 1)];
        scenario.faults = vec![
            FaultEntry { at: 5, action: FaultAction::Fail(NodeId::cc(0)) },
            FaultEntry { at: 50, action: FaultAction::Recover(NodeId::cc(0)) },
        ];
        let out = run(&scenario, 0).unwrap();
        let done = completions(&out.trace);
        // Falls at 10..40 pile up in the frozen inbox; recovery at 50
        // dispatches all four at once (zero processing time), one helper
        // each, completing together at 56.
        let drained: Vec<(u64, u64)> = done.iter().take(4).copied().collect();
        assert_eq!(drained, vec![(10, 46), (20, 36), (30, 26), (40, 16)]);
        // The fall emitted at 50 arrives while all four helpers are still
        // busy and goes unserviced; later falls are back to nominal.
        let unserviced = out
            .trace
            .records
            .iter()
            .filter(|r| matches!(r.event, TraceEvent::Unserviced { .. }))
            .count();
        assert_eq!(unserviced, 1);
        assert_eq!(done[4..], [(60, 7), (70, 7), (80, 7), (90, 7)]);
    }

    #[test]
    fn hierarchy_alarm_climbs_the_device_chain() {
        let roster = vec![
            Agent::new("x", PersonaClass::HumanBeing).advertising(["patient"]),
            Agent::new("doc", PersonaClass::HumanBeing).advertising(["general practitioner"]),
        ];
        let scenario = Scenario {
            name: "chain".into(),
            horizon: 60,
            ontology: Ontology::default_care(),
            roster,
            organization: OrgSpec::SafetyNet {
                patients: vec![AgentId::new("x")],
                doctors: vec![AgentId::new("doc")],
                assignment: [(AgentId::new("x"), AgentId::new("doc"))].into(),
                devices_per_patient: 1,
            },
            hop_delay: 1,
            cc_processing_time: 0,
            protocols: vec![ServicingProtocol {
                id: "alarm".into(),
                trigger_kind: "member_fallen".into(),
                requirements: vec![Requirement::new("general practitioner", 1, 1)],
                service_duration: 5,
                deadline: 30,
                son_lifespan: 50,
            }],
            workload: vec![StreamSpec {
                kind: "member_fallen".into(),
                interarrival: Interarrival::Fixed(20),
                severity: Severity::Alarm,
                sources: SourceFilter::Ids(vec![AgentId::new("x")]),
            }],
            faults: Vec::new(),
            cohesion: CohesionParams::default(),
            initial_cohesion: 0.8,
            persistence: PersistenceParams::default(),
            perception: None,
        };
        let out = run(&scenario, 0).unwrap();
        // Patient -> device -> responder is two hops.
        let arrivals: Vec<(u64, NodeId)> = out
            .trace
            .records
            .iter()
            .filter_map(|r| match &r.event {
                TraceEvent::NotifyArrived { node, .. } => Some((r.time, node.clone())),
                _ => None,
            })
            .collect();
        assert_eq!(
            arrivals,
            vec![
                (22, NodeId::agent("doc")),
                (42, NodeId::agent("doc")),
            ]
        );
        // Case starts on arrival: completion at 22 + 0 + 5.
        assert_eq!(completions(&out.trace), vec![(20, 7), (40, 7)]);
        // The synthesized device chain joined the roster.
        assert!(out.initial_agents.contains_key(&AgentId::new("dev:x:0")));
    }

    #[test]
    fn heterarchy_decides_in_one_hop() {
        let roster = mac_roster();
        let members = member_ids(&roster);
        let mut scenario = mac_scenario();
        scenario.roster = roster;
        scenario.organization = OrgSpec::Heterarchy { members };
        let out = run(&scenario, 0).unwrap();
        let done = completions(&out.trace);
        assert_eq!(done.len(), 9);
        for (_, latency) in done {
            assert_eq!(latency, 6); // one hop plus five ticks of service
        }
    }

    #[test]
    fn single_layer_fractal_behaves_like_centralized() {
        let mac = mac_scenario();
        let mut fso = mac.clone();
        fso.organization = OrgSpec::Fso {
            layers: vec![member_ids(&mac.roster)],
            escalation_threshold: 3,
        };
        let mac_out = run(&mac, 9).unwrap();
        let fso_out = run(&fso, 9).unwrap();
        let strip = |trace: &Trace| -> Vec<(u64, TraceEvent)> {
            trace
                .records
                .iter()
                .filter(|r| {
                    !matches!(
                        r.event,
                        TraceEvent::Escalated { .. }
                            | TraceEvent::SonSpawned { .. }
                            | TraceEvent::SonDissolved { .. }
                    )
                })
                .map(|r| (r.time, r.event.clone()))
                .collect()
        };
        assert_eq!(strip(&mac_out.trace), strip(&fso_out.trace));
    }

    #[test]
    fn expired_network_aborts_its_service() {
        let mut scenario = mac_scenario();
        scenario.organization = OrgSpec::Fso {
            layers: vec![member_ids(&scenario.roster)],
            escalation_threshold: 3,
        };
        // Lifespan 3 < dispatch + duration = 6: every service dies early.
        scenario.protocols[0].son_lifespan = 3;
        scenario.horizon = 40;
        let out = run(&scenario, 0).unwrap();
        assert!(completions(&out.trace).is_empty());
        let mut aborts = 0;
        for r in &out.trace.records {
            match &r.event {
                TraceEvent::SonDissolved { completed, .. } => {
                    assert!(!completed);
                    aborts += 1;
                }
                TraceEvent::Unserviced { reason, .. } => {
                    assert!(matches!(reason, UnservicedReason::SonExpired(_)));
                }
                _ => {}
            }
        }
        assert_eq!(aborts, 3);
        // Participants were released at expiry, not leaked busy.
        for agent in out.final_agents.values() {
            assert_eq!(agent.availability, Availability::Idle);
        }
    }

    #[test]
    fn black_swan_fells_exactly_the_tagged() {
        let mut scenario = mac_scenario();
        scenario.roster = scenario
            .roster
            .into_iter()
            .enumerate()
            .map(|(i, agent)| agent.tagged(if i % 2 == 0 { "alpha" } else { "beta" }))
            .collect();
        scenario.faults =
            vec![FaultEntry { at: 15, action: FaultAction::BlackSwan("alpha".into()) }];
        let out = run(&scenario, 0).unwrap();
        let struck: Vec<AgentId> = out
            .trace
            .records
            .iter()
            .find_map(|r| match &r.event {
                TraceEvent::BlackSwanStruck { victims, .. } => Some(victims.clone()),
                _ => None,
            })
            .unwrap();
        assert_eq!(struck, vec![AgentId::new("n2"), AgentId::new("n4"), AgentId::new("x")]);
        for (id, agent) in &out.final_agents {
            let expect = if struck.contains(id) {
                Availability::Failed
            } else {
                Availability::Idle
            };
            assert_eq!(agent.availability, expect, "{id}");
        }
    }

    #[test]
    fn behavior_gap_decays_cohesion_to_defection() {
        let roster = vec![
            Agent::new("x", PersonaClass::HumanBeing).advertising(["patient"]),
            Agent::new("doc", PersonaClass::HumanBeing).advertising(["general practitioner"]),
        ];
        let scenario = Scenario {
            name: "decay".into(),
            horizon: 300,
            ontology: Ontology::default_care(),
            roster,
            organization: OrgSpec::SafetyNet {
                patients: vec![AgentId::new("x")],
                doctors: vec![AgentId::new("doc")],
                assignment: [(AgentId::new("x"), AgentId::new("doc"))].into(),
                devices_per_patient: 1,
            },
            hop_delay: 1,
            cc_processing_time: 0,
            protocols: vec![fall_protocol()],
            workload: Vec::new(),
            faults: Vec::new(),
            cohesion: CohesionParams::default(),
            initial_cohesion: 0.8,
            persistence: PersistenceParams::default(),
            perception: None,
        };
        let out = run(&scenario, 0).unwrap();
        // Treated as a passive object, the human's gap of six decays their
        // cohesion below the threshold; the device and responder exercise
        // their full class and never decay.
        let defections: Vec<AgentId> = out
            .trace
            .records
            .iter()
            .filter_map(|r| match &r.event {
                TraceEvent::Defected { agent } => Some(agent.clone()),
                _ => None,
            })
            .collect();
        assert_eq!(defections, vec![AgentId::new("x")]);
        assert_eq!(out.final_agents[&AgentId::new("x")].availability, Availability::Defected);
        assert_eq!(out.final_agents[&AgentId::new("doc")].availability, Availability::Idle);
        // Per-tick leak 0.05 * (6/7) * (6/7); 0.8 - k*leak < 0.2 first
        // holds at k = 17, tick 170.
        let defect_time = out
            .trace
            .records
            .iter()
            .find(|r| matches!(r.event, TraceEvent::Defected { .. }))
            .unwrap()
            .time;
        assert_eq!(defect_time, 170);
    }

    #[test]
    fn crisis_window_brackets_are_recorded() {
        let mut scenario = mac_scenario();
        scenario.faults = vec![
            FaultEntry { at: 12, action: FaultAction::CrisisStart },
            FaultEntry { at: 35, action: FaultAction::CrisisEnd },
        ];
        let out = run(&scenario, 0).unwrap();
        let marks: Vec<(u64, bool)> = out
            .trace
            .records
            .iter()
            .filter_map(|r| match r.event {
                TraceEvent::CrisisStarted => Some((r.time, true)),
                TraceEvent::CrisisEnded => Some((r.time, false)),
                _ => None,
            })
            .collect();
        assert_eq!(marks, vec![(12, true), (35, false)]);
    }

    #[test]
    fn collective_perception_spreads_through_the_center() {
        let mut roster = vec![Agent::new("s0", PersonaClass::HumanBeing)
            .at(0.0, 0.0)
            .with_radius(5.0)
            .advertising(["informal caregiver"])];
        for i in 1..10 {
            roster.push(
                Agent::new(format!("m{i}"), PersonaClass::HumanBeing)
                    .at(100.0 + i as f64, 0.0)
                    .with_radius(5.0)
                    .advertising(["informal caregiver"]),
            );
        }
        let members = member_ids(&roster);
        let mut scenario = mac_scenario();
        scenario.roster = roster;
        scenario.organization = OrgSpec::Mac { members };
        scenario.workload = Vec::new();
        scenario.perception = Some(PerceptionSpec {
            mode: PerceptionMode::Collective,
            events: vec![PerceptionEvent {
                time: 50,
                location: Point::new(1.0, 0.0),
                kind: "smoke".into(),
            }],
        });
        let out = run(&scenario, 0).unwrap();
        let reactions: Vec<(u64, AgentId)> = out
            .trace
            .records
            .iter()
            .filter_map(|r| match &r.event {
                TraceEvent::PerceptionReacted { agent, .. } => Some((r.time, agent.clone())),
                _ => None,
            })
            .collect();
        assert_eq!(reactions.len(), 10);
        for (time, _) in &reactions {
            assert_eq!(*time, 52); // publish hop at 51, broadcast hop at 52
        }
        // The uncontended helper predicts the same schedule.
        let org = &out.organization;
        let spec = scenario.perception.as_ref().unwrap();
        let predicted = perception_reactions(
            org,
            &out.initial_agents,
            &spec.events[0],
            PerceptionMode::Collective,
        );
        let mut got = reactions;
        got.sort();
        assert_eq!(got, predicted);
    }

    #[test]
    fn individual_perception_reacts_on_the_spot() {
        let mut scenario = mac_scenario();
        scenario.workload = Vec::new();
        scenario.perception = Some(PerceptionSpec {
            mode: PerceptionMode::Individual,
            events: vec![PerceptionEvent {
                time: 30,
                location: Point::new(0.0, 0.0),
                kind: "smoke".into(),
            }],
        });
        // Default radius only covers the member standing on the point.
        let out = run(&scenario, 0).unwrap();
        let reactions: Vec<(u64, AgentId)> = out
            .trace
            .records
            .iter()
            .filter_map(|r| match &r.event {
                TraceEvent::PerceptionReacted { agent, .. } => Some((r.time, agent.clone())),
                _ => None,
            })
            .collect();
        assert_eq!(reactions, vec![(30, AgentId::new("x"))]);
    }

    #[test]
    fn time_rescaling_multiplies_latencies() {
        let base = mac_scenario();
        let scaled = base.scaled(10);
        let a = completions(&run(&base, 5).unwrap().trace);
        let b = completions(&run(&scaled, 5).unwrap().trace);
        assert_eq!(a.len(), b.len());
        for ((e1, l1), (e2, l2)) in a.iter().zip(&b) {
            assert_eq!(e1 * 10, *e2);
            assert_eq!(l1 * 10, *l2);
        }
    }
}
