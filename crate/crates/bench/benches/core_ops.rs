//! Hot-path benchmarks: role subsumption, team counting and enumeration,
//! registry matching, escalation, and a full scenario run.

use std::collections::BTreeMap;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use resilsim_core::agents::{Agent, AgentId, CohesionParams, PersonaClass, Point};
use resilsim_core::fso::escalate;
use resilsim_core::matching::{
    count_teams, enumerate_teams, match_notification, RolePool, DEFAULT_ENUMERATION_CAP,
};
use resilsim_core::indicators::PersistenceParams;
use resilsim_core::ontology::{
    Notification, NotificationId, Ontology, Requirement, Role, ServicingProtocol, Severity,
};
use resilsim_core::organization::{build_fso, CcId, CcState};
use resilsim_core::scenario::{Interarrival, OrgSpec, Scenario, SourceFilter, StreamSpec};
use resilsim_core::sim::run;

fn role_subsumption(c: &mut Criterion) {
    let ontology = Ontology::default_care();
    let roles: Vec<Role> = ontology.roles().cloned().collect();
    c.bench_function("satisfies_all_pairs", |b| {
        b.iter(|| {
            let mut hits = 0u32;
            for offered in &roles {
                for required in &roles {
                    if ontology.satisfies(black_box(offered), black_box(required)).unwrap() {
                        hits += 1;
                    }
                }
            }
            hits
        })
    });
}

fn team_lattice(c: &mut Criterion) {
    let open = [(1u32, 0u32, 1u32), (4, 0, 4), (1, 0, 1)];
    c.bench_function("count_teams_open_lattice", |b| {
        b.iter(|| count_teams(black_box(&open)).unwrap())
    });

    let pools: Vec<RolePool> = open
        .iter()
        .enumerate()
        .map(|(r, &(n, min, max))| RolePool::new((0..n).map(|i| format!("r{r}m{i}")), min, max))
        .collect();
    c.bench_function("enumerate_teams_open_lattice", |b| {
        b.iter(|| enumerate_teams(black_box(&pools), DEFAULT_ENUMERATION_CAP).unwrap().count())
    });
}

fn hundred_member_registry() -> (CcState, BTreeMap<AgentId, Agent>) {
    let mut cc = CcState::new(CcId(0));
    let mut agents = BTreeMap::new();
    let roles = ["patient", "informal caregiver", "nurse", "general practitioner"];
    for i in 0..100 {
        let agent = Agent::new(format!("m{i:03}"), PersonaClass::HumanBeing)
            .at(f64::from(i), 0.0)
            .advertising([roles[i as usize % roles.len()]]);
        cc.registry.push(agent.subscribe().unwrap());
        agents.insert(agent.id.clone(), agent);
    }
    (cc, agents)
}

fn registry_matching(c: &mut Criterion) {
    let (cc, agents) = hundred_member_registry();
    let ontology = Ontology::default_care();
    let protocol = ServicingProtocol {
        id: "assist".into(),
        trigger_kind: "assist_request".into(),
        requirements: vec![
            Requirement::new("informal caregiver", 2, 3),
            Requirement::new("professional caregiver", 1, 1),
        ],
        service_duration: 3,
        deadline: 50,
        son_lifespan: 100,
    };
    let notification = Notification {
        id: NotificationId(1),
        kind: "assist_request".into(),
        source: AgentId::new("m000"),
        location: Point::new(50.0, 0.0),
        time: 1,
        severity: Severity::Routine,
    };
    c.bench_function("match_hundred_member_registry", |b| {
        b.iter(|| {
            match_notification(
                black_box(&cc),
                black_box(&notification),
                &protocol,
                &ontology,
                &agents,
            )
            .unwrap()
        })
    });
}

fn four_layer_climb(c: &mut Criterion) {
    let ontology = Ontology::default_care();
    let mut agents = BTreeMap::new();
    let mut layers = Vec::new();
    for layer in 0..4u32 {
        let mut members = Vec::new();
        for m in 0..5 {
            // Only the top layer advertises the role the drill asks for.
            let role = if layer == 3 { "general practitioner" } else { "informal caregiver" };
            let agent = Agent::new(format!("l{layer}m{m}"), PersonaClass::HumanBeing)
                .at(f64::from(m), f64::from(layer))
                .advertising([role]);
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
    let protocol = ServicingProtocol {
        id: "drill".into(),
        trigger_kind: "drill".into(),
        requirements: vec![Requirement::new("general practitioner", 1, 1)],
        service_duration: 1,
        deadline: 10,
        son_lifespan: 10,
    };
    let notification = Notification {
        id: NotificationId(1),
        kind: "drill".into(),
        source: layers[0][0].clone(),
        location: Point::new(0.0, 0.0),
        time: 1,
        severity: Severity::Alarm,
    };
    c.bench_function("escalate_four_layers", |b| {
        b.iter(|| {
            escalate(
                black_box(&org),
                &ccs,
                &agents,
                0,
                black_box(&notification),
                &protocol,
                &ontology,
            )
            .unwrap()
        })
    });
}

fn assist_scenario(n: usize) -> Scenario {
    let ids: Vec<AgentId> = (0..n).map(|i| AgentId::new(format!("m{i:03}"))).collect();
    let roster: Vec<Agent> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let role = if i % 2 == 0 { "patient" } else { "informal caregiver" };
            Agent::new(id.as_str(), PersonaClass::HumanBeing).at(i as f64, 0.0).advertising([role])
        })
        .collect();
    Scenario {
        name: format!("bench_assist_{n}"),
        horizon: 500,
        ontology: Ontology::default_care(),
        roster,
        organization: OrgSpec::Mac { members: ids },
        hop_delay: 1,
        cc_processing_time: 0,
        protocols: vec![ServicingProtocol {
            id: "assist".into(),
            trigger_kind: "assist_request".into(),
            requirements: vec![Requirement::new("informal caregiver", 1, 1)],
            service_duration: 3,
            deadline: 50,
            son_lifespan: 100,
        }],
        workload: vec![StreamSpec {
            kind: "assist_request".into(),
            interarrival: Interarrival::Fixed(5),
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

fn full_run(c: &mut Criterion) {
    let scenario = assist_scenario(40);
    scenario.validate().unwrap();
    c.bench_function("run_assist_scenario_40", |b| {
        b.iter(|| run(black_box(&scenario), 0).unwrap())
    });
}

criterion_group!(
    benches,
    role_subsumption,
    team_lattice,
    registry_matching,
    four_layer_climb,
    full_run
);
criterion_main!(benches);
