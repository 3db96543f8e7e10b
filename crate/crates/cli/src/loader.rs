//! The scenario file format: TOML in, `Scenario` out, and back.
//!
//! Parsing is done by hand against `toml::Value` so that every complaint
//! can name the exact key path it is about, unknown keys are rejected
//! instead of silently ignored, and role references are checked against
//! the ontology while the file location is still known.

use std::collections::BTreeSet;

use resilsim_core::agents::{Agent, AgentId, BehaviorClass, CohesionParams, PersonaClass, Point};
use resilsim_core::indicators::PersistenceParams;
use resilsim_core::ontology::{Ontology, OntologyError, Requirement, Role, ServicingProtocol, Severity};
use resilsim_core::organization::NodeId;
use resilsim_core::scenario::{
    FaultAction, FaultEntry, Interarrival, OrgSpec, PerceptionEvent, PerceptionMode,
    PerceptionSpec, Scenario, SourceFilter, StreamSpec,
};
use toml::Value;

use crate::CliError;

type Table = toml::map::Map<String, Value>;

fn schema(path: &str, message: impl Into<String>) -> CliError {
    CliError::Schema { path: path.to_string(), message: message.into() }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn as_table<'a>(value: &'a Value, path: &str) -> Result<&'a Table, CliError> {
    value.as_table().ok_or_else(|| schema(path, "expected a table"))
}

fn as_array<'a>(value: &'a Value, path: &str) -> Result<&'a [Value], CliError> {
    value.as_array().map(Vec::as_slice).ok_or_else(|| schema(path, "expected an array"))
}

fn as_str<'a>(value: &'a Value, path: &str) -> Result<&'a str, CliError> {
    value.as_str().ok_or_else(|| schema(path, "expected a string"))
}

fn as_u64(value: &Value, path: &str) -> Result<u64, CliError> {
    value
        .as_integer()
        .and_then(|i| u64::try_from(i).ok())
        .ok_or_else(|| schema(path, "expected a non-negative integer"))
}

fn as_u32(value: &Value, path: &str) -> Result<u32, CliError> {
    value
        .as_integer()
        .and_then(|i| u32::try_from(i).ok())
        .ok_or_else(|| schema(path, "expected a non-negative integer"))
}

fn as_f64(value: &Value, path: &str) -> Result<f64, CliError> {
    match value {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(schema(path, "expected a number")),
    }
}

fn get<'a>(table: &'a Table, path: &str, key: &str) -> Option<(&'a Value, String)> {
    table.get(key).map(|value| (value, join(path, key)))
}

fn req<'a>(table: &'a Table, path: &str, key: &str) -> Result<(&'a Value, String), CliError> {
    get(table, path, key).ok_or_else(|| schema(path, format!("missing key `{key}`")))
}

fn check_keys(table: &Table, path: &str, allowed: &[&str]) -> Result<(), CliError> {
    for key in table.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(schema(&join(path, key), "unknown key"));
        }
    }
    Ok(())
}

fn id_list(value: &Value, path: &str) -> Result<Vec<AgentId>, CliError> {
    as_array(value, path)?
        .iter()
        .enumerate()
        .map(|(i, v)| Ok(AgentId::new(as_str(v, &format!("{path}[{i}]"))?)))
        .collect()
}

fn point(value: &Value, path: &str) -> Result<Point, CliError> {
    let coords = as_array(value, path)?;
    if coords.len() != 2 {
        return Err(schema(path, "expected a [x, y] pair"));
    }
    Ok(Point::new(as_f64(&coords[0], &format!("{path}[0]"))?, as_f64(&coords[1], &format!("{path}[1]"))?))
}

fn parse_node(raw: &str, path: &str) -> Result<NodeId, CliError> {
    if let Some(layer) = raw.strip_prefix("cc:") {
        let layer = layer
            .parse::<u32>()
            .map_err(|_| schema(path, format!("`{raw}` is not a coordination-center id")))?;
        Ok(NodeId::cc(layer))
    } else {
        Ok(NodeId::agent(raw))
    }
}

fn known_role(ontology: &Ontology, name: &str, path: &str) -> Result<Role, CliError> {
    let role = Role::new(name);
    if ontology.contains(&role) {
        Ok(role)
    } else {
        Err(CliError::Dangling { path: path.to_string(), reference: name.to_string() })
    }
}

/// Parses one scenario document. The result still has to pass
/// [`Scenario::validate`] before it can run.
pub fn load_scenario(text: &str) -> Result<Scenario, CliError> {
    let root: Table = text.parse()?;
    let root = &root;
    check_keys(
        root,
        "",
        &[
            "schema_version",
            "name",
            "horizon",
            "hop_delay",
            "cc_processing_time",
            "initial_cohesion",
            "ontology",
            "organization",
            "agents",
            "protocols",
            "workload",
            "faults",
            "cohesion",
            "persistence",
            "perception",
        ],
    )?;

    let (version_value, version_path) = req(root, "", "schema_version")?;
    let version = as_u64(version_value, &version_path)?;
    if version != 1 {
        return Err(schema(&version_path, format!("unsupported version {version}, expected 1")));
    }

    let (name_value, name_path) = req(root, "", "name")?;
    let name = as_str(name_value, &name_path)?.to_string();
    let (horizon_value, horizon_path) = req(root, "", "horizon")?;
    let horizon = as_u64(horizon_value, &horizon_path)?;
    let hop_delay = match get(root, "", "hop_delay") {
        Some((v, p)) => as_u64(v, &p)?,
        None => 1,
    };
    let cc_processing_time = match get(root, "", "cc_processing_time") {
        Some((v, p)) => as_u64(v, &p)?,
        None => 0,
    };
    let initial_cohesion = match get(root, "", "initial_cohesion") {
        Some((v, p)) => as_f64(v, &p)?,
        None => 0.8,
    };

    let ontology = match get(root, "", "ontology") {
        Some((v, p)) => load_ontology(v, &p)?,
        None => Ontology::default_care(),
    };

    let (agents_value, agents_path) = req(root, "", "agents")?;
    let roster = load_agents(agents_value, &agents_path, &ontology)?;

    let (org_value, org_path) = req(root, "", "organization")?;
    let organization = load_org(org_value, &org_path)?;

    let protocols = match get(root, "", "protocols") {
        Some((v, p)) => load_protocols(v, &p, &ontology)?,
        None => Vec::new(),
    };
    let workload = match get(root, "", "workload") {
        Some((v, p)) => load_workload(v, &p, &ontology)?,
        None => Vec::new(),
    };
    let faults = match get(root, "", "faults") {
        Some((v, p)) => load_faults(v, &p)?,
        None => Vec::new(),
    };
    let cohesion = match get(root, "", "cohesion") {
        Some((v, p)) => load_cohesion(v, &p)?,
        None => CohesionParams::default(),
    };
    let persistence = match get(root, "", "persistence") {
        Some((v, p)) => load_persistence(v, &p)?,
        None => PersistenceParams::default(),
    };
    let perception = match get(root, "", "perception") {
        Some((v, p)) => Some(load_perception(v, &p)?),
        None => None,
    };

    Ok(Scenario {
        name,
        horizon,
        ontology,
        roster,
        organization,
        hop_delay,
        cc_processing_time,
        protocols,
        workload,
        faults,
        cohesion,
        initial_cohesion,
        persistence,
        perception,
    })
}

fn load_ontology(value: &Value, path: &str) -> Result<Ontology, CliError> {
    let table = as_table(value, path)?;
    check_keys(table, path, &["roles"])?;
    let (roles_value, roles_path) = req(table, path, "roles")?;
    let mut names = Vec::new();
    let mut edges = Vec::new();
    for (i, item) in as_array(roles_value, &roles_path)?.iter().enumerate() {
        let item_path = format!("{roles_path}[{i}]");
        let entry = as_table(item, &item_path)?;
        check_keys(entry, &item_path, &["name", "parents"])?;
        let (name_value, name_path) = req(entry, &item_path, "name")?;
        let name = as_str(name_value, &name_path)?;
        names.push(Role::new(name));
        if let Some((parents_value, parents_path)) = get(entry, &item_path, "parents") {
            for (j, parent) in as_array(parents_value, &parents_path)?.iter().enumerate() {
                let parent = as_str(parent, &format!("{parents_path}[{j}]"))?;
                edges.push((Role::new(name), Role::new(parent)));
            }
        }
    }
    Ontology::from_parts(names, edges).map_err(|err| match err {
        OntologyError::UnknownRole(role) | OntologyError::UnknownParent(role) => {
            CliError::Dangling { path: roles_path.clone(), reference: role.to_string() }
        }
        other => schema(&roles_path, other.to_string()),
    })
}

fn load_agents(value: &Value, path: &str, ontology: &Ontology) -> Result<Vec<Agent>, CliError> {
    let mut roster = Vec::new();
    for (i, item) in as_array(value, path)?.iter().enumerate() {
        let item_path = format!("{path}[{i}]");
        let entry = as_table(item, &item_path)?;
        check_keys(
            entry,
            &item_path,
            &["id", "persona", "location", "roles", "tag", "perception_radius", "intrinsic", "relationships"],
        )?;
        let (id_value, id_path) = req(entry, &item_path, "id")?;
        let id = as_str(id_value, &id_path)?;
        let (persona_value, persona_path) = req(entry, &item_path, "persona")?;
        let persona_token = as_str(persona_value, &persona_path)?;
        let persona = PersonaClass::from_token(persona_token)
            .ok_or_else(|| schema(&persona_path, format!("unknown persona `{persona_token}`")))?;
        let mut agent = Agent::new(id, persona);
        if let Some((v, p)) = get(entry, &item_path, "location") {
            let at = point(v, &p)?;
            agent = agent.at(at.x, at.y);
        }
        if let Some((v, p)) = get(entry, &item_path, "roles") {
            let mut roles = Vec::new();
            for (j, role) in as_array(v, &p)?.iter().enumerate() {
                let role_path = format!("{p}[{j}]");
                let name = as_str(role, &role_path)?;
                roles.push(known_role(ontology, name, &role_path)?.to_string());
            }
            agent = agent.advertising(roles);
        }
        if let Some((v, p)) = get(entry, &item_path, "tag") {
            agent = agent.tagged(as_str(v, &p)?);
        }
        if let Some((v, p)) = get(entry, &item_path, "perception_radius") {
            agent = agent.with_radius(as_f64(v, &p)?);
        }
        if let Some((v, p)) = get(entry, &item_path, "intrinsic") {
            let token = as_str(v, &p)?;
            let behavior = BehaviorClass::from_token(token)
                .ok_or_else(|| schema(&p, format!("unknown behavior `{token}`")))?;
            agent = agent.with_intrinsic(behavior);
        }
        if let Some((v, p)) = get(entry, &item_path, "relationships") {
            let mut relationships = BTreeSet::new();
            for (j, pair) in as_array(v, &p)?.iter().enumerate() {
                let pair_path = format!("{p}[{j}]");
                let pair = as_array(pair, &pair_path)?;
                if pair.len() != 2 {
                    return Err(schema(&pair_path, "expected a [kind, agent] pair"));
                }
                relationships.insert((
                    as_str(&pair[0], &format!("{pair_path}[0]"))?.to_string(),
                    AgentId::new(as_str(&pair[1], &format!("{pair_path}[1]"))?),
                ));
            }
            agent.relationships = relationships;
        }
        roster.push(agent);
    }
    Ok(roster)
}

fn load_org(value: &Value, path: &str) -> Result<OrgSpec, CliError> {
    let table = as_table(value, path)?;
    let (kind_value, kind_path) = req(table, path, "kind")?;
    let kind = as_str(kind_value, &kind_path)?;
    match kind {
        "safety_net" => {
            check_keys(table, path, &["kind", "patients", "doctors", "assignment", "devices_per_patient"])?;
            let (patients_value, patients_path) = req(table, path, "patients")?;
            let (doctors_value, doctors_path) = req(table, path, "doctors")?;
            let (assignment_value, assignment_path) = req(table, path, "assignment")?;
            let assignment = as_table(assignment_value, &assignment_path)?
                .iter()
                .map(|(patient, doctor)| {
                    let doctor_path = join(&assignment_path, patient);
                    Ok((AgentId::new(patient.as_str()), AgentId::new(as_str(doctor, &doctor_path)?)))
                })
                .collect::<Result<_, CliError>>()?;
            let devices_per_patient = match get(table, path, "devices_per_patient") {
                Some((v, p)) => as_u32(v, &p)?,
                None => 1,
            };
            Ok(OrgSpec::SafetyNet {
                patients: id_list(patients_value, &patients_path)?,
                doctors: id_list(doctors_value, &doctors_path)?,
                assignment,
                devices_per_patient,
            })
        }
        "mac" => {
            check_keys(table, path, &["kind", "members"])?;
            let (members_value, members_path) = req(table, path, "members")?;
            Ok(OrgSpec::Mac { members: id_list(members_value, &members_path)? })
        }
        "fso" => {
            check_keys(table, path, &["kind", "layers", "escalation_threshold"])?;
            let (layers_value, layers_path) = req(table, path, "layers")?;
            let layers = as_array(layers_value, &layers_path)?
                .iter()
                .enumerate()
                .map(|(i, layer)| id_list(layer, &format!("{layers_path}[{i}]")))
                .collect::<Result<_, _>>()?;
            let escalation_threshold = match get(table, path, "escalation_threshold") {
                Some((v, p)) => as_u32(v, &p)?,
                None => 1,
            };
            Ok(OrgSpec::Fso { layers, escalation_threshold })
        }
        "heterarchy" => {
            check_keys(table, path, &["kind", "members"])?;
            let (members_value, members_path) = req(table, path, "members")?;
            Ok(OrgSpec::Heterarchy { members: id_list(members_value, &members_path)? })
        }
        other => Err(schema(&kind_path, format!("unknown organization kind `{other}`"))),
    }
}

fn load_protocols(
    value: &Value,
    path: &str,
    ontology: &Ontology,
) -> Result<Vec<ServicingProtocol>, CliError> {
    let mut protocols = Vec::new();
    for (i, item) in as_array(value, path)?.iter().enumerate() {
        let item_path = format!("{path}[{i}]");
        let entry = as_table(item, &item_path)?;
        check_keys(
            entry,
            &item_path,
            &["id", "trigger", "requirements", "duration", "deadline", "son_lifespan"],
        )?;
        let (id_value, id_path) = req(entry, &item_path, "id")?;
        let (trigger_value, trigger_path) = req(entry, &item_path, "trigger")?;
        let (reqs_value, reqs_path) = req(entry, &item_path, "requirements")?;
        let mut requirements = Vec::new();
        for (j, req_item) in as_array(reqs_value, &reqs_path)?.iter().enumerate() {
            let req_path = format!("{reqs_path}[{j}]");
            let req_table = as_table(req_item, &req_path)?;
            check_keys(req_table, &req_path, &["role", "min", "max"])?;
            let (role_value, role_path) = req(req_table, &req_path, "role")?;
            let role = known_role(ontology, as_str(role_value, &role_path)?, &role_path)?;
            let (min_value, min_path) = req(req_table, &req_path, "min")?;
            let (max_value, max_path) = req(req_table, &req_path, "max")?;
            requirements.push(Requirement {
                role,
                min_count: as_u32(min_value, &min_path)?,
                max_count: as_u32(max_value, &max_path)?,
            });
        }
        let (duration_value, duration_path) = req(entry, &item_path, "duration")?;
        let (deadline_value, deadline_path) = req(entry, &item_path, "deadline")?;
        let (lifespan_value, lifespan_path) = req(entry, &item_path, "son_lifespan")?;
        protocols.push(ServicingProtocol {
            id: as_str(id_value, &id_path)?.to_string(),
            trigger_kind: as_str(trigger_value, &trigger_path)?.to_string(),
            requirements,
            service_duration: as_u64(duration_value, &duration_path)?,
            deadline: as_u64(deadline_value, &deadline_path)?,
            son_lifespan: as_u64(lifespan_value, &lifespan_path)?,
        });
    }
    Ok(protocols)
}

fn load_workload(value: &Value, path: &str, ontology: &Ontology) -> Result<Vec<StreamSpec>, CliError> {
    let mut workload = Vec::new();
    for (i, item) in as_array(value, path)?.iter().enumerate() {
        let item_path = format!("{path}[{i}]");
        let entry = as_table(item, &item_path)?;
        check_keys(entry, &item_path, &["kind", "severity", "interarrival", "sources"])?;
        let (kind_value, kind_path) = req(entry, &item_path, "kind")?;
        let (severity_value, severity_path) = req(entry, &item_path, "severity")?;
        let severity = match as_str(severity_value, &severity_path)? {
            "routine" => Severity::Routine,
            "alarm" => Severity::Alarm,
            "crisis" => Severity::Crisis,
            other => return Err(schema(&severity_path, format!("unknown severity `{other}`"))),
        };
        let (gap_value, gap_path) = req(entry, &item_path, "interarrival")?;
        let interarrival = load_interarrival(gap_value, &gap_path)?;
        let sources = match get(entry, &item_path, "sources") {
            Some((v, p)) => load_sources(v, &p, ontology)?,
            None => SourceFilter::All,
        };
        workload.push(StreamSpec {
            kind: as_str(kind_value, &kind_path)?.to_string(),
            interarrival,
            severity,
            sources,
        });
    }
    Ok(workload)
}

fn load_interarrival(value: &Value, path: &str) -> Result<Interarrival, CliError> {
    let table = as_table(value, path)?;
    check_keys(table, path, &["fixed", "uniform", "geometric"])?;
    if table.len() != 1 {
        return Err(schema(path, "expected exactly one of `fixed`, `uniform`, `geometric`"));
    }
    if let Some((v, p)) = get(table, path, "fixed") {
        return Ok(Interarrival::Fixed(as_u64(v, &p)?));
    }
    if let Some((v, p)) = get(table, path, "uniform") {
        let bounds = as_array(v, &p)?;
        if bounds.len() != 2 {
            return Err(schema(&p, "expected a [low, high] pair"));
        }
        return Ok(Interarrival::Uniform(
            as_u64(&bounds[0], &format!("{p}[0]"))?,
            as_u64(&bounds[1], &format!("{p}[1]"))?,
        ));
    }
    let (v, p) = req(table, path, "geometric")?;
    Ok(Interarrival::Geometric(as_f64(v, &p)?))
}

fn load_sources(value: &Value, path: &str, ontology: &Ontology) -> Result<SourceFilter, CliError> {
    if let Some(token) = value.as_str() {
        return if token == "all" {
            Ok(SourceFilter::All)
        } else {
            Err(schema(path, format!("unknown source filter `{token}`, expected \"all\" or a table")))
        };
    }
    let table = as_table(value, path)?;
    check_keys(table, path, &["role", "ids"])?;
    if table.len() != 1 {
        return Err(schema(path, "expected exactly one of `role`, `ids`"));
    }
    if let Some((v, p)) = get(table, path, "role") {
        return Ok(SourceFilter::Role(known_role(ontology, as_str(v, &p)?, &p)?));
    }
    let (v, p) = req(table, path, "ids")?;
    Ok(SourceFilter::Ids(id_list(v, &p)?))
}

fn load_faults(value: &Value, path: &str) -> Result<Vec<FaultEntry>, CliError> {
    let mut faults = Vec::new();
    for (i, item) in as_array(value, path)?.iter().enumerate() {
        let item_path = format!("{path}[{i}]");
        let entry = as_table(item, &item_path)?;
        check_keys(entry, &item_path, &["at", "action"])?;
        let (at_value, at_path) = req(entry, &item_path, "at")?;
        let (action_value, action_path) = req(entry, &item_path, "action")?;
        let action = load_fault_action(action_value, &action_path)?;
        faults.push(FaultEntry { at: as_u64(at_value, &at_path)?, action });
    }
    Ok(faults)
}

fn load_fault_action(value: &Value, path: &str) -> Result<FaultAction, CliError> {
    if let Some(token) = value.as_str() {
        return match token {
            "crisis_start" => Ok(FaultAction::CrisisStart),
            "crisis_end" => Ok(FaultAction::CrisisEnd),
            other => Err(schema(path, format!("unknown action `{other}`"))),
        };
    }
    let table = as_table(value, path)?;
    check_keys(table, path, &["fail", "recover", "black_swan"])?;
    if table.len() != 1 {
        return Err(schema(path, "expected exactly one of `fail`, `recover`, `black_swan`"));
    }
    if let Some((v, p)) = get(table, path, "fail") {
        return Ok(FaultAction::Fail(parse_node(as_str(v, &p)?, &p)?));
    }
    if let Some((v, p)) = get(table, path, "recover") {
        return Ok(FaultAction::Recover(parse_node(as_str(v, &p)?, &p)?));
    }
    let (v, p) = req(table, path, "black_swan")?;
    Ok(FaultAction::BlackSwan(as_str(v, &p)?.to_string()))
}

fn load_cohesion(value: &Value, path: &str) -> Result<CohesionParams, CliError> {
    let table = as_table(value, path)?;
    check_keys(table, path, &["alpha", "beta", "gamma", "c_def", "persona_weight"])?;
    let mut params = CohesionParams::default();
    if let Some((v, p)) = get(table, path, "alpha") {
        params.alpha = as_f64(v, &p)?;
    }
    if let Some((v, p)) = get(table, path, "beta") {
        params.beta = as_f64(v, &p)?;
    }
    if let Some((v, p)) = get(table, path, "gamma") {
        params.gamma = as_f64(v, &p)?;
    }
    if let Some((v, p)) = get(table, path, "c_def") {
        params.c_def = as_f64(v, &p)?;
    }
    if let Some((v, p)) = get(table, path, "persona_weight") {
        for (token, weight) in as_table(v, &p)? {
            let weight_path = join(&p, token);
            let persona = PersonaClass::from_token(token)
                .ok_or_else(|| schema(&weight_path, format!("unknown persona `{token}`")))?;
            params.persona_weight.insert(persona, as_f64(weight, &weight_path)?);
        }
    }
    Ok(params)
}

fn load_persistence(value: &Value, path: &str) -> Result<PersistenceParams, CliError> {
    let table = as_table(value, path)?;
    check_keys(table, path, &["theta", "tau_t", "k"])?;
    let mut params = PersistenceParams::default();
    if let Some((v, p)) = get(table, path, "theta") {
        params.theta = as_f64(v, &p)?;
    }
    if let Some((v, p)) = get(table, path, "tau_t") {
        params.tau_t = as_u64(v, &p)?;
    }
    if let Some((v, p)) = get(table, path, "k") {
        params.k = as_u32(v, &p)?;
    }
    Ok(params)
}

fn load_perception(value: &Value, path: &str) -> Result<PerceptionSpec, CliError> {
    let table = as_table(value, path)?;
    check_keys(table, path, &["mode", "events"])?;
    let (mode_value, mode_path) = req(table, path, "mode")?;
    let mode = match as_str(mode_value, &mode_path)? {
        "individual" => PerceptionMode::Individual,
        "collective" => PerceptionMode::Collective,
        other => return Err(schema(&mode_path, format!("unknown perception mode `{other}`"))),
    };
    let (events_value, events_path) = req(table, path, "events")?;
    let mut events = Vec::new();
    for (i, item) in as_array(events_value, &events_path)?.iter().enumerate() {
        let item_path = format!("{events_path}[{i}]");
        let entry = as_table(item, &item_path)?;
        check_keys(entry, &item_path, &["time", "location", "kind"])?;
        let (time_value, time_path) = req(entry, &item_path, "time")?;
        let (location_value, location_path) = req(entry, &item_path, "location")?;
        let (kind_value, kind_path) = req(entry, &item_path, "kind")?;
        events.push(PerceptionEvent {
            time: as_u64(time_value, &time_path)?,
            location: point(location_value, &location_path)?,
            kind: as_str(kind_value, &kind_path)?.to_string(),
        });
    }
    Ok(PerceptionSpec { mode, events })
}

fn int(n: u64) -> Value {
    Value::Integer(n as i64)
}

fn ids_value(ids: &[AgentId]) -> Value {
    Value::Array(ids.iter().map(|id| Value::String(id.to_string())).collect())
}

/// Renders a scenario back into the document format [`load_scenario`]
/// reads. Loading the output reproduces the scenario exactly, which makes
/// programmatically generated scenarios inspectable on disk.
pub fn scenario_to_toml(scenario: &Scenario) -> String {
    let mut root = Table::new();
    root.insert("schema_version".into(), int(1));
    root.insert("name".into(), Value::String(scenario.name.clone()));
    root.insert("horizon".into(), int(scenario.horizon));
    root.insert("hop_delay".into(), int(scenario.hop_delay));
    root.insert("cc_processing_time".into(), int(scenario.cc_processing_time));
    root.insert("initial_cohesion".into(), Value::Float(scenario.initial_cohesion));

    let mut ontology = Table::new();
    let roles: Vec<Value> = scenario
        .ontology
        .roles()
        .map(|role| {
            let mut entry = Table::new();
            entry.insert("name".into(), Value::String(role.to_string()));
            let parents = scenario.ontology.parents_of(role).expect("listed role");
            if !parents.is_empty() {
                entry.insert(
                    "parents".into(),
                    Value::Array(parents.iter().map(|p| Value::String(p.to_string())).collect()),
                );
            }
            Value::Table(entry)
        })
        .collect();
    ontology.insert("roles".into(), Value::Array(roles));
    root.insert("ontology".into(), Value::Table(ontology));

    let mut org = Table::new();
    match &scenario.organization {
        OrgSpec::SafetyNet { patients, doctors, assignment, devices_per_patient } => {
            org.insert("kind".into(), Value::String("safety_net".into()));
            org.insert("patients".into(), ids_value(patients));
            org.insert("doctors".into(), ids_value(doctors));
            org.insert("devices_per_patient".into(), int(u64::from(*devices_per_patient)));
            let mut map = Table::new();
            for (patient, doctor) in assignment {
                map.insert(patient.to_string(), Value::String(doctor.to_string()));
            }
            org.insert("assignment".into(), Value::Table(map));
        }
        OrgSpec::Mac { members } => {
            org.insert("kind".into(), Value::String("mac".into()));
            org.insert("members".into(), ids_value(members));
        }
        OrgSpec::Fso { layers, escalation_threshold } => {
            org.insert("kind".into(), Value::String("fso".into()));
            org.insert("escalation_threshold".into(), int(u64::from(*escalation_threshold)));
            org.insert(
                "layers".into(),
                Value::Array(layers.iter().map(|layer| ids_value(layer)).collect()),
            );
        }
        OrgSpec::Heterarchy { members } => {
            org.insert("kind".into(), Value::String("heterarchy".into()));
            org.insert("members".into(), ids_value(members));
        }
    }
    root.insert("organization".into(), Value::Table(org));

    let agents: Vec<Value> = scenario
        .roster
        .iter()
        .map(|agent| {
            let mut entry = Table::new();
            entry.insert("id".into(), Value::String(agent.id.to_string()));
            entry.insert("persona".into(), Value::String(agent.persona.token().into()));
            entry.insert(
                "location".into(),
                Value::Array(vec![Value::Float(agent.location.x), Value::Float(agent.location.y)]),
            );
            if !agent.advertisements.is_empty() {
                entry.insert(
                    "roles".into(),
                    Value::Array(
                        agent.advertisements.iter().map(|r| Value::String(r.to_string())).collect(),
                    ),
                );
            }
            if agent.solution_tag != "default" {
                entry.insert("tag".into(), Value::String(agent.solution_tag.clone()));
            }
            if agent.perception_radius != 0.0 {
                entry.insert("perception_radius".into(), Value::Float(agent.perception_radius));
            }
            if agent.intrinsic_behavior != agent.persona.intrinsic_behavior() {
                entry.insert("intrinsic".into(), Value::String(agent.intrinsic_behavior.token().into()));
            }
            if !agent.relationships.is_empty() {
                entry.insert(
                    "relationships".into(),
                    Value::Array(
                        agent
                            .relationships
                            .iter()
                            .map(|(kind, other)| {
                                Value::Array(vec![
                                    Value::String(kind.clone()),
                                    Value::String(other.to_string()),
                                ])
                            })
                            .collect(),
                    ),
                );
            }
            Value::Table(entry)
        })
        .collect();
    root.insert("agents".into(), Value::Array(agents));

    if !scenario.protocols.is_empty() {
        let protocols: Vec<Value> = scenario
            .protocols
            .iter()
            .map(|protocol| {
                let mut entry = Table::new();
                entry.insert("id".into(), Value::String(protocol.id.clone()));
                entry.insert("trigger".into(), Value::String(protocol.trigger_kind.clone()));
                entry.insert("duration".into(), int(protocol.service_duration));
                entry.insert("deadline".into(), int(protocol.deadline));
                entry.insert("son_lifespan".into(), int(protocol.son_lifespan));
                entry.insert(
                    "requirements".into(),
                    Value::Array(
                        protocol
                            .requirements
                            .iter()
                            .map(|req| {
                                let mut slot = Table::new();
                                slot.insert("role".into(), Value::String(req.role.to_string()));
                                slot.insert("min".into(), int(u64::from(req.min_count)));
                                slot.insert("max".into(), int(u64::from(req.max_count)));
                                Value::Table(slot)
                            })
                            .collect(),
                    ),
                );
                Value::Table(entry)
            })
            .collect();
        root.insert("protocols".into(), Value::Array(protocols));
    }

    if !scenario.workload.is_empty() {
        let workload: Vec<Value> = scenario
            .workload
            .iter()
            .map(|stream| {
                let mut entry = Table::new();
                entry.insert("kind".into(), Value::String(stream.kind.clone()));
                entry.insert("severity".into(), Value::String(stream.severity.to_string()));
                let mut gap = Table::new();
                match stream.interarrival {
                    Interarrival::Fixed(d) => {
                        gap.insert("fixed".into(), int(d));
                    }
                    Interarrival::Uniform(a, b) => {
                        gap.insert("uniform".into(), Value::Array(vec![int(a), int(b)]));
                    }
                    Interarrival::Geometric(p) => {
                        gap.insert("geometric".into(), Value::Float(p));
                    }
                }
                entry.insert("interarrival".into(), Value::Table(gap));
                match &stream.sources {
                    SourceFilter::All => {
                        entry.insert("sources".into(), Value::String("all".into()));
                    }
                    SourceFilter::Role(role) => {
                        let mut filter = Table::new();
                        filter.insert("role".into(), Value::String(role.to_string()));
                        entry.insert("sources".into(), Value::Table(filter));
                    }
                    SourceFilter::Ids(ids) => {
                        let mut filter = Table::new();
                        filter.insert("ids".into(), ids_value(ids));
                        entry.insert("sources".into(), Value::Table(filter));
                    }
                }
                Value::Table(entry)
            })
            .collect();
        root.insert("workload".into(), Value::Array(workload));
    }

    if !scenario.faults.is_empty() {
        let faults: Vec<Value> = scenario
            .faults
            .iter()
            .map(|fault| {
                let mut entry = Table::new();
                entry.insert("at".into(), int(fault.at));
                let action = match &fault.action {
                    FaultAction::Fail(node) => {
                        let mut t = Table::new();
                        t.insert("fail".into(), Value::String(node.to_string()));
                        Value::Table(t)
                    }
                    FaultAction::Recover(node) => {
                        let mut t = Table::new();
                        t.insert("recover".into(), Value::String(node.to_string()));
                        Value::Table(t)
                    }
                    FaultAction::BlackSwan(tag) => {
                        let mut t = Table::new();
                        t.insert("black_swan".into(), Value::String(tag.clone()));
                        Value::Table(t)
                    }
                    FaultAction::CrisisStart => Value::String("crisis_start".into()),
                    FaultAction::CrisisEnd => Value::String("crisis_end".into()),
                };
                entry.insert("action".into(), action);
                Value::Table(entry)
            })
            .collect();
        root.insert("faults".into(), Value::Array(faults));
    }

    let mut cohesion = Table::new();
    cohesion.insert("alpha".into(), Value::Float(scenario.cohesion.alpha));
    cohesion.insert("beta".into(), Value::Float(scenario.cohesion.beta));
    cohesion.insert("gamma".into(), Value::Float(scenario.cohesion.gamma));
    cohesion.insert("c_def".into(), Value::Float(scenario.cohesion.c_def));
    if !scenario.cohesion.persona_weight.is_empty() {
        let mut weights = Table::new();
        for (persona, weight) in &scenario.cohesion.persona_weight {
            weights.insert(persona.token().into(), Value::Float(*weight));
        }
        cohesion.insert("persona_weight".into(), Value::Table(weights));
    }
    root.insert("cohesion".into(), Value::Table(cohesion));

    let mut persistence = Table::new();
    persistence.insert("theta".into(), Value::Float(scenario.persistence.theta));
    persistence.insert("tau_t".into(), int(scenario.persistence.tau_t));
    persistence.insert("k".into(), int(u64::from(scenario.persistence.k)));
    root.insert("persistence".into(), Value::Table(persistence));

    if let Some(perception) = &scenario.perception {
        let mut table = Table::new();
        let mode = match perception.mode {
            PerceptionMode::Individual => "individual",
            PerceptionMode::Collective => "collective",
        };
        table.insert("mode".into(), Value::String(mode.into()));
        table.insert(
            "events".into(),
            Value::Array(
                perception
                    .events
                    .iter()
                    .map(|event| {
                        let mut entry = Table::new();
                        entry.insert("time".into(), int(event.time));
                        entry.insert(
                            "location".into(),
                            Value::Array(vec![
                                Value::Float(event.location.x),
                                Value::Float(event.location.y),
                            ]),
                        );
                        entry.insert("kind".into(), Value::String(event.kind.clone()));
                        Value::Table(entry)
                    })
                    .collect(),
            ),
        );
        root.insert("perception".into(), Value::Table(table));
    }

    toml::to_string(&Value::Table(root)).expect("scenario values are plain data")
}
