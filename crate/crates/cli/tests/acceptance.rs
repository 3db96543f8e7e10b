//! End-to-end acceptance drills over the shipped fixtures and synthesized
//! scenarios. Each test prints one `criterion N: PASS/FAIL` line.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resilsim_cli::commands::cmd_simulate;
use resilsim_cli::load_scenario;
use resilsim_core::agents::{
    Agent, AgentId, Availability, BehaviorClass, CohesionParams, CohesionStimulus, PersonaClass,
    Point,
};
use resilsim_core::fso::{escalate, EscalationResult};
use resilsim_core::indicators::{
    report, response_metrics_windowed, PersistenceParams,
};
use resilsim_core::matching::{
    count_teams, enumerate_teams, RolePool, TeamState, DEFAULT_ENUMERATION_CAP,
};
use resilsim_core::ontology::{
    Notification, NotificationId, Ontology, Requirement, Role, ServicingProtocol, Severity,
};
use resilsim_core::organization::{build_fso, CcId, CcState, NodeId};
use resilsim_core::scenario::{
    FaultAction, FaultEntry, Interarrival, OrgSpec, PerceptionMode, Scenario, SourceFilter,
    StreamSpec,
};
use resilsim_core::sim::{run, Trace, TraceEvent};

fn verdict(criterion: u32, pass: bool) -> bool {
    println!("criterion {criterion}: {}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn fixture(name: &str) -> Scenario {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    let scenario = load_scenario(&fs::read_to_string(path).unwrap()).unwrap();
    scenario.validate().unwrap();
    scenario
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
fn criterion_01_center_outage_stops_flat_but_not_layered_help() {
    let outage = FaultEntry { at: 500, action: FaultAction::Fail(NodeId::cc(0)) };
    let mut flat = fixture("mac_basic.toml");
    flat.faults.push(outage.clone());
    let mut layered = fixture("fso_3layer.toml");
    layered.faults.push(outage);

    let mut pass = true;
    for seed in 0..3 {
        let after = response_metrics_windowed(&run(&flat, seed).unwrap().trace, 500, u64::MAX);
        pass &= after.notifications > 0 && after.service_ratio == 0.0;
        let after = response_metrics_windowed(&run(&layered, seed).unwrap().trace, 500, u64::MAX);
        pass &= after.service_ratio > 0.0;
    }
    assert!(verdict(1, pass));
}

/// Population of `n` members, alternating help seekers and helpers, under
/// an arrival rate that grows with `n` while one center tick costs one
/// time unit. The fractal variant splits the same population into thirds.
fn load_sharing_scenario(n: usize, fractal: bool) -> Scenario {
    let ids: Vec<AgentId> = (0..n).map(|i| AgentId::new(format!("m{i:03}"))).collect();
    let roster: Vec<Agent> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let role = if i % 2 == 0 { "patient" } else { "informal caregiver" };
            Agent::new(id.as_str(), PersonaClass::HumanBeing).at(i as f64, 0.0).advertising([role])
        })
        .collect();
    let organization = if fractal {
        OrgSpec::Fso {
            layers: ids.chunks(n / 3).map(<[AgentId]>::to_vec).collect(),
            escalation_threshold: 1,
        }
    } else {
        OrgSpec::Mac { members: ids.clone() }
    };
    Scenario {
        name: format!("load{n}{}", if fractal { "fso" } else { "mac" }),
        horizon: 1500,
        ontology: Ontology::default_care(),
        roster,
        organization,
        hop_delay: 1,
        cc_processing_time: 1,
        protocols: vec![ServicingProtocol {
            id: "assist".into(),
            trigger_kind: "assist_request".into(),
            requirements: vec![Requirement::new("informal caregiver", 1, 1)],
            service_duration: 3,
            deadline: 50,
            son_lifespan: 200,
        }],
        workload: vec![StreamSpec {
            kind: "assist_request".into(),
            interarrival: Interarrival::Geometric(n as f64 / 300.0),
            severity: Severity::Routine,
            sources: SourceFilter::Role(Role::new("patient")),
        }],
        faults: Vec::new(),
        cohesion: CohesionParams::default(),
        initial_cohesion: 0.8,
        persistence: PersistenceParams::default(),
        perception: None,
    }
}

#[test]
fn criterion_02_latency_grows_with_population_and_layers_shed_load() {
    let sizes = [60usize, 120, 240];
    let mut monotone_seeds = 0;
    let mut split_wins = 0;
    for seed in 0..5u64 {
        let mac_latency: Vec<f64> = sizes
            .iter()
            .map(|&n| {
                let out = run(&load_sharing_scenario(n, false), seed).unwrap();
                response_metrics_windowed(&out.trace, 0, u64::MAX).mean_latency
            })
            .collect();
        if mac_latency.windows(2).all(|w| w[0] <= w[1]) {
            monotone_seeds += 1;
        }
        let fso = run(&load_sharing_scenario(240, true), seed).unwrap();
        if response_metrics_windowed(&fso.trace, 0, u64::MAX).mean_latency <= mac_latency[2] {
            split_wins += 1;
        }
    }
    assert!(verdict(2, monotone_seeds >= 4 && split_wins >= 4));
}

#[test]
fn criterion_03_under_use_shows_in_the_hierarchy_only() {
    let net = report(&run(&fixture("safety_net_basic.toml"), 0).unwrap(), &PersistenceParams::default())
        .unwrap();
    let flat = report(&run(&fixture("mac_basic.toml"), 0).unwrap(), &PersistenceParams::default())
        .unwrap();
    let pass = net.bop.bop_index > 0.0
        && net.bop.mismatched_count > 0
        && flat.bop.bop_index == 0.0
        && flat.bop.mismatched_count == 0;
    assert!(verdict(3, pass));
}

#[test]
fn criterion_04_team_lattice_counts_match_brute_force() {
    // Bitmask oracle: count subsets per slot directly, multiply.
    let subset_count = |n: u32, min: u32, max: u32| -> u128 {
        (0u32..1 << n)
            .filter(|mask| {
                let size = mask.count_ones();
                min <= size && size <= max
            })
            .count() as u128
    };
    let oracle = |slots: &[(u32, u32, u32)]| -> u128 {
        slots.iter().map(|&(n, min, max)| subset_count(n, min, max)).product()
    };

    let open = [(1u32, 0u32, 1u32), (4, 0, 4), (1, 0, 1)];
    let quorate = [(1u32, 1u32, 1u32), (4, 1, 4), (1, 1, 1)];
    let mut pass = count_teams(&open).unwrap() == 64 && oracle(&open) == 64;
    pass &= count_teams(&quorate).unwrap() == 15 && oracle(&quorate) == 15;

    for slots in [&open, &quorate] {
        let pools: Vec<RolePool> = slots
            .iter()
            .enumerate()
            .map(|(r, &(n, min, max))| {
                RolePool::new((0..n).map(|i| format!("r{r}m{i}")), min, max)
            })
            .collect();
        let teams: Vec<TeamState> =
            enumerate_teams(&pools, DEFAULT_ENUMERATION_CAP).unwrap().collect();
        let unique: BTreeSet<&TeamState> = teams.iter().collect();
        pass &= teams.len() as u128 == count_teams(slots).unwrap();
        pass &= unique.len() == teams.len();
        pass &= teams.iter().all(|t| t.is_valid(&pools) && t.is_accepting(&pools));
    }
    assert!(verdict(4, pass));
}

#[test]
fn criterion_05_escalation_respects_the_ontology_and_stays_bounded() {
    let ontology = Ontology::default_care();
    let roles: Vec<Role> = ontology.roles().cloned().collect();
    // Independent subsumption check: breadth-first walk of the raw parent
    // edges, no shared code with the matcher.
    let satisfies = |offered: &Role, required: &Role| -> bool {
        let mut frontier = vec![offered.clone()];
        let mut seen = BTreeSet::new();
        while let Some(role) = frontier.pop() {
            if !seen.insert(role.clone()) {
                continue;
            }
            if &role == required {
                return true;
            }
            if let Some(parents) = ontology.parents_of(&role) {
                frontier.extend(parents.iter().cloned());
            }
        }
        false
    };

    let mut rng = ChaCha8Rng::seed_from_u64(901);
    let mut pass = true;
    for trial in 0..1000u64 {
        let mut agents: BTreeMap<AgentId, Agent> = BTreeMap::new();
        let mut layers: Vec<Vec<AgentId>> = Vec::new();
        for layer in 0..4u32 {
            let mut members = Vec::new();
            for m in 0..rng.gen_range(1..=3usize) {
                let mut picks = BTreeSet::new();
                for _ in 0..rng.gen_range(1..=2usize) {
                    picks.insert(roles[rng.gen_range(0..roles.len())].to_string());
                }
                let agent = Agent::new(format!("t{trial}l{layer}m{m}"), PersonaClass::HumanBeing)
                    .at(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0))
                    .advertising(picks);
                members.push(agent.id.clone());
                agents.insert(agent.id.clone(), agent);
            }
            layers.push(members);
        }
        let org = build_fso(&mut agents, &layers, 1, 0, 3).unwrap();
        let mut ccs = BTreeMap::new();
        for (layer, members) in layers.iter().enumerate() {
            let mut cc = CcState::new(CcId(layer as u32));
            for id in members {
                cc.registry.push(agents[id].subscribe().unwrap());
            }
            ccs.insert(cc.id, cc);
        }
        for agent in agents.values_mut() {
            if rng.gen_bool(0.25) {
                agent.availability =
                    if rng.gen_bool(0.5) { Availability::Busy } else { Availability::Failed };
            }
        }

        let requirements: Vec<Requirement> = (0..rng.gen_range(1..=2usize))
            .map(|_| {
                let min = rng.gen_range(1..=2u32);
                Requirement::new(
                    roles[rng.gen_range(0..roles.len())].as_str(),
                    min,
                    min + rng.gen_range(0..=1u32),
                )
            })
            .collect();
        let protocol = ServicingProtocol {
            id: "drill".into(),
            trigger_kind: "drill".into(),
            requirements,
            service_duration: 1,
            deadline: 10,
            son_lifespan: 10,
        };
        let origin = rng.gen_range(0..4u32);
        let notification = Notification {
            id: NotificationId(trial),
            kind: "drill".into(),
            source: layers[origin as usize][0].clone(),
            location: Point::new(0.0, 0.0),
            time: 1,
            severity: Severity::Alarm,
        };

        match escalate(&org, &ccs, &agents, origin, &notification, &protocol, &ontology).unwrap() {
            EscalationResult::Resolved { layer_reached, depth, assignment, span, attempts } => {
                pass &= depth <= 3;
                pass &= layer_reached >= origin && layer_reached <= 3;
                pass &= depth == layer_reached - origin;
                pass &= span.iter().all(|l| (origin..=layer_reached).contains(l));
                pass &= attempts as usize == span.len();
                let mut chosen = BTreeSet::new();
                for (slot, req) in assignment.iter().zip(&protocol.requirements) {
                    pass &= slot.len() == req.min_count as usize;
                    for id in slot {
                        pass &= chosen.insert(id.clone());
                        let agent = &agents[id];
                        pass &= agent.availability == Availability::Idle;
                        pass &= span.contains(&agent.layer);
                        pass &= agent
                            .advertisements
                            .iter()
                            .any(|offered| satisfies(offered, &req.role));
                    }
                }
            }
            EscalationResult::Unserviced { layer_reached, .. } => {
                pass &= layer_reached == 3.min(origin + 3);
            }
        }
    }
    assert!(verdict(5, pass));
}

#[test]
fn criterion_06_replays_are_byte_identical_and_time_scales_linearly() {
    let dir = std::env::temp_dir().join(format!("resilsim-accept-{}", std::process::id()));
    let scenario_path =
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/mac_basic.toml");
    let first = dir.join("first");
    let second = dir.join("second");
    cmd_simulate(&scenario_path, 42, &first).unwrap();
    cmd_simulate(&scenario_path, 42, &second).unwrap();
    let trace_bytes = fs::read(first.join("trace.log")).unwrap();
    let mut pass = !trace_bytes.is_empty();
    pass &= trace_bytes == fs::read(second.join("trace.log")).unwrap();
    pass &= fs::read(first.join("results.csv")).unwrap()
        == fs::read(second.join("results.csv")).unwrap();
    fs::remove_dir_all(&dir).ok();

    let base = fixture("mac_basic.toml");
    let plain = completions(&run(&base, 0).unwrap().trace);
    let stretched = completions(&run(&base.scaled(10), 0).unwrap().trace);
    pass &= !plain.is_empty() && plain.len() == stretched.len();
    pass &= plain
        .iter()
        .zip(&stretched)
        .all(|(&(emit, latency), &(s_emit, s_latency))| {
            s_emit == emit * 10 && s_latency == latency * 10
        });
    assert!(verdict(6, pass));
}

#[test]
fn criterion_07_correlated_failure_strikes_by_tag_and_monocultures_pay() {
    let diverse = fixture("blackswan_diversity.toml");
    let out = run(&diverse, 0).unwrap();
    let victims = out
        .trace
        .records
        .iter()
        .find_map(|r| match &r.event {
            TraceEvent::BlackSwanStruck { victims, .. } => Some(victims.clone()),
            _ => None,
        })
        .unwrap_or_default();
    let tagged = diverse.roster.iter().filter(|a| a.solution_tag == "A").count();
    let failed = out
        .final_agents
        .values()
        .filter(|a| a.availability == Availability::Failed)
        .count();
    let mut pass = victims.len() == tagged && failed == tagged;
    pass &= failed as f64 / diverse.roster.len() as f64 == 0.25;

    let mut monoculture = diverse.clone();
    monoculture.name = "blackswan_monoculture".into();
    for agent in &mut monoculture.roster {
        agent.solution_tag = "A".into();
    }
    for seed in 0..5 {
        let kept = response_metrics_windowed(&run(&diverse, seed).unwrap().trace, 300, u64::MAX);
        let lost =
            response_metrics_windowed(&run(&monoculture, seed).unwrap().trace, 300, u64::MAX);
        pass &= lost.service_ratio <= kept.service_ratio;
    }
    let mono_report =
        report(&run(&monoculture, 0).unwrap(), &PersistenceParams::default()).unwrap();
    pass &= mono_report.diversity.tag_entropy == 0.0
        && mono_report.diversity.dominant_tag_share == 1.0;
    assert!(verdict(7, pass));
}

/// Alarm chain with `levels` feedback hops between the emitting node and
/// the responder: one device sourced by the device itself, or `levels - 1`
/// devices sourced by the patient.
fn alarm_chain(levels: u32, hop: u64) -> Scenario {
    let devices = if levels == 1 { 1 } else { levels - 1 };
    let source =
        if levels == 1 { AgentId::new("dev:x:0") } else { AgentId::new("x") };
    Scenario {
        name: format!("chain{levels}h{hop}"),
        horizon: 200,
        ontology: Ontology::default_care(),
        roster: vec![
            Agent::new("x", PersonaClass::HumanBeing).advertising(["patient"]),
            Agent::new("doc", PersonaClass::HumanBeing)
                .at(5.0, 0.0)
                .advertising(["general practitioner"]),
        ],
        organization: OrgSpec::SafetyNet {
            patients: vec![AgentId::new("x")],
            doctors: vec![AgentId::new("doc")],
            assignment: [(AgentId::new("x"), AgentId::new("doc"))].into(),
            devices_per_patient: devices,
        },
        hop_delay: hop,
        cc_processing_time: 0,
        protocols: vec![ServicingProtocol {
            id: "alarm".into(),
            trigger_kind: "member_fallen".into(),
            requirements: vec![Requirement::new("general practitioner", 1, 1)],
            service_duration: 5,
            deadline: 100,
            son_lifespan: 100,
        }],
        workload: vec![StreamSpec {
            kind: "member_fallen".into(),
            interarrival: Interarrival::Fixed(50),
            severity: Severity::Alarm,
            sources: SourceFilter::Ids(vec![source]),
        }],
        faults: Vec::new(),
        cohesion: CohesionParams::default(),
        initial_cohesion: 0.8,
        persistence: PersistenceParams::default(),
        perception: None,
    }
}

#[test]
fn criterion_08_alarms_climb_exactly_one_hop_per_level() {
    let mut pass = true;
    for hop in [1u64, 3] {
        for levels in [1u32, 2, 4] {
            let out = run(&alarm_chain(levels, hop), 0).unwrap();
            let emissions: Vec<u64> = out
                .trace
                .records
                .iter()
                .filter_map(|r| match &r.event {
                    TraceEvent::Notified { .. } => Some(r.time),
                    _ => None,
                })
                .collect();
            let arrivals: Vec<(u64, NodeId)> = out
                .trace
                .records
                .iter()
                .filter_map(|r| match &r.event {
                    TraceEvent::NotifyArrived { node, .. } => Some((r.time, node.clone())),
                    _ => None,
                })
                .collect();
            pass &= emissions.len() == 3 && arrivals.len() == 3;
            pass &= emissions.iter().zip(&arrivals).all(|(&emit, (arrived, node))| {
                *node == NodeId::agent("doc") && *arrived == emit + u64::from(levels) * hop
            });
        }
    }
    assert!(verdict(8, pass));
}

#[test]
fn criterion_09_heavy_identities_defect_sooner_and_crisis_returns_retain() {
    let mut pass = true;

    // Decay-only trajectories: an under-used member with a heavier identity
    // weight must never outlast a lighter one.
    let weights = [0.15, 0.3, 0.45, 0.6, 0.75, 0.9];
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..100 {
        let start = rng.gen_range(0.25..1.0);
        let beta = rng.gen_range(0.02..0.12);
        let mut previous = u64::MAX;
        for &weight in &weights {
            let mut params = CohesionParams { beta, ..CohesionParams::default() };
            params.persona_weight.insert(PersonaClass::HumanBeing, weight);
            let mut agent = Agent::new("solo", PersonaClass::HumanBeing);
            agent.exercised_behavior = BehaviorClass::Passive;
            agent.cohesion = start;
            let mut defected_at = u64::MAX;
            for tick in 0..5_000u64 {
                agent.update_cohesion(CohesionStimulus::BopTick, &params).unwrap();
                if agent.availability == Availability::Defected {
                    defected_at = tick;
                    break;
                }
            }
            pass &= defected_at <= previous;
            previous = defected_at;
        }
    }

    // A responder held below its capable grade leaks cohesion; amplified
    // crisis returns must keep at least as many members aboard as plain
    // ones. The patient defects under both settings, the responder only
    // under the plain one.
    let mut defections = Vec::new();
    for gamma in [1.0, 3.0] {
        let mut scenario = alarm_chain(2, 1);
        scenario.name = format!("crisis_gamma{gamma}");
        scenario.horizon = 400;
        scenario.workload[0].interarrival = Interarrival::Fixed(10);
        scenario.roster[1] = Agent::new("doc", PersonaClass::SocietyOfHumans)
            .at(5.0, 0.0)
            .advertising(["general practitioner"]);
        scenario.cohesion.beta = 0.6;
        scenario.cohesion.gamma = gamma;
        scenario.faults.push(FaultEntry { at: 0, action: FaultAction::CrisisStart });
        let out = run(&scenario, 0).unwrap();
        defections.push(
            out.trace
                .records
                .iter()
                .filter(|r| matches!(r.event, TraceEvent::Defected { .. }))
                .count(),
        );
    }
    pass &= defections[0] > 0 && defections[1] <= defections[0];
    assert!(verdict(9, pass));
}

#[test]
fn criterion_10_perception_reacts_in_place_or_spreads_through_the_center() {
    let collective = fixture("canary_perception.toml");
    let spec = collective.perception.as_ref().unwrap();
    let event_time = spec.events[0].time;
    let hop = collective.hop_delay;

    let reactions = |scenario: &Scenario| -> Vec<(u64, AgentId)> {
        run(scenario, 0)
            .unwrap()
            .trace
            .records
            .iter()
            .filter_map(|r| match &r.event {
                TraceEvent::PerceptionReacted { agent, .. } => Some((r.time, agent.clone())),
                _ => None,
            })
            .collect()
    };

    let spread = reactions(&collective);
    let mut pass = spread.len() == collective.roster.len();
    pass &= spread.iter().all(|(t, _)| *t == event_time + 2 * hop);

    let mut individual = collective.clone();
    individual.perception.as_mut().unwrap().mode = PerceptionMode::Individual;
    let solo = reactions(&individual);
    pass &= solo == vec![(event_time, AgentId::new("s0"))];
    assert!(verdict(10, pass));
}
