//! Quality indicators computed from a finished trace.
//!
//! Three families: behavior mismatch over the final population, presence
//! and loss classification of a social persona over the assessment ticks,
//! and response statistics over the notification lifecycle. All of them
//! are pure functions of a [`Trace`] and the agent maps; nothing here
//! touches the engine.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::agents::{Agent, AgentId, SocialPersona};
use crate::sim::{SimOutput, Trace, TraceEvent};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IndicatorError {
    #[error("member `{0}` has no cohesion samples in the trace")]
    UnknownMember(AgentId),
    #[error("presence series is empty")]
    EmptySeries,
    #[error("population is empty")]
    EmptyPopulation,
}

/// Knobs of the persona-loss classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceParams {
    /// Fraction of standing members below which the persona is absent.
    pub theta: f64,
    /// A recovered outage at least this long still counts as intermittent.
    pub tau_t: u64,
    /// This many separate outages count as intermittent.
    pub k: u32,
}

impl Default for PersistenceParams {
    fn default() -> Self {
        PersistenceParams { theta: 0.5, tau_t: 50, k: 3 }
    }
}

/// How a social persona's presence behaved over the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PersonaLoss {
    None,
    Transient,
    Intermittent,
    Permanent,
}

impl PersonaLoss {
    pub fn token(self) -> &'static str {
        match self {
            PersonaLoss::None => "none",
            PersonaLoss::Transient => "transient",
            PersonaLoss::Intermittent => "intermittent",
            PersonaLoss::Permanent => "permanent",
        }
    }
}

impl std::fmt::Display for PersonaLoss {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.token())
    }
}

/// Behavior shortfall over a population.
#[derive(Debug, Clone, PartialEq)]
pub struct BopReport {
    /// Mean gap between capable and exercised behavior, in grade steps.
    pub bop_index: f64,
    /// Members exercising strictly less than they could.
    pub mismatched_count: usize,
}

pub fn bop_report<'a>(
    population: impl IntoIterator<Item = &'a Agent>,
) -> Result<BopReport, IndicatorError> {
    let mut total = 0u64;
    let mut mismatched = 0usize;
    let mut n = 0usize;
    for agent in population {
        let gap = agent.bop_gap();
        total += u64::from(gap);
        if gap > 0 {
            mismatched += 1;
        }
        n += 1;
    }
    if n == 0 {
        return Err(IndicatorError::EmptyPopulation);
    }
    Ok(BopReport { bop_index: total as f64 / n as f64, mismatched_count: mismatched })
}

/// One assessment tick of a persona's presence.
#[derive(Debug, Clone, PartialEq)]
pub struct EmergenceSample {
    pub time: u64,
    /// Share of persona members still standing: available and not under
    /// the defection floor.
    pub fraction: f64,
    /// Standing share reached the persona's threshold while the
    /// organization could still convene assistance.
    pub present: bool,
}

/// Presence of one persona at every assessment tick of the trace. Errors
/// if a persona member was never sampled.
pub fn emergence_series(
    trace: &Trace,
    persona: &SocialPersona,
) -> Result<Vec<EmergenceSample>, IndicatorError> {
    if persona.members.is_empty() {
        return Err(IndicatorError::EmptyPopulation);
    }
    let mut series = Vec::new();
    let mut tick: BTreeMap<&AgentId, (f64, bool)> = BTreeMap::new();
    for record in &trace.records {
        match &record.event {
            TraceEvent::CohesionSampled { agent, cohesion, available } => {
                tick.insert(agent, (*cohesion, *available));
            }
            TraceEvent::MatchingLive { live } => {
                let mut standing = 0usize;
                for member in &persona.members {
                    let &(cohesion, available) = tick
                        .get(member)
                        .ok_or_else(|| IndicatorError::UnknownMember(member.clone()))?;
                    if available && cohesion >= trace.c_def {
                        standing += 1;
                    }
                }
                let fraction = standing as f64 / persona.members.len() as f64;
                series.push(EmergenceSample {
                    time: record.time,
                    fraction,
                    present: *live && fraction >= persona.theta,
                });
                tick.clear();
            }
            _ => {}
        }
    }
    Ok(series)
}

/// Classifies a presence series. Precedence: never absent, then absent at
/// the end and not recovered, then repeatedly or for long absent, then a
/// single short recovered dip.
pub fn classify_persona_loss(
    presence: &[(u64, bool)],
    params: &PersistenceParams,
) -> Result<PersonaLoss, IndicatorError> {
    if presence.is_empty() {
        return Err(IndicatorError::EmptySeries);
    }
    // Maximal absent runs as (first absent sample, recovery sample).
    let mut runs: Vec<(u64, Option<u64>)> = Vec::new();
    let mut open: Option<u64> = None;
    for &(time, present) in presence {
        match (present, open) {
            (false, None) => open = Some(time),
            (true, Some(start)) => {
                runs.push((start, Some(time)));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(start) = open {
        runs.push((start, None));
    }
    if runs.is_empty() {
        return Ok(PersonaLoss::None);
    }
    if runs.last().unwrap().1.is_none() {
        return Ok(PersonaLoss::Permanent);
    }
    let long_outage = runs
        .iter()
        .any(|&(start, recovered)| recovered.unwrap() - start >= params.tau_t);
    if runs.len() as u32 >= params.k || long_outage {
        Ok(PersonaLoss::Intermittent)
    } else {
        Ok(PersonaLoss::Transient)
    }
}

/// Notification lifecycle statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMetrics {
    pub notifications: usize,
    pub completions: usize,
    /// Completions within their protocol deadline.
    pub in_time: usize,
    /// In-time completions over notifications; vacuously 1 with none.
    pub service_ratio: f64,
    /// Mean over all completions, timely or not; 0 with none.
    pub mean_latency: f64,
    /// Smallest completion latency at or above the 95th percentile; 0
    /// with no completions.
    pub p95_latency: u64,
    /// Notifications never completed, whether refused or still pending.
    pub unserviced: usize,
}

pub fn response_metrics(trace: &Trace) -> ResponseMetrics {
    response_metrics_windowed(trace, 0, u64::MAX)
}

/// Same statistics restricted to notifications emitted in `[from, to)`.
pub fn response_metrics_windowed(trace: &Trace, from: u64, to: u64) -> ResponseMetrics {
    let mut notifications = 0usize;
    let mut in_time_count = 0usize;
    let mut latencies: Vec<u64> = Vec::new();
    for record in &trace.records {
        match &record.event {
            TraceEvent::Notified { .. } => {
                if record.time >= from && record.time < to {
                    notifications += 1;
                }
            }
            TraceEvent::ServiceCompleted { emitted, latency, in_time, .. }
                if *emitted >= from && *emitted < to =>
            {
                latencies.push(*latency);
                if *in_time {
                    in_time_count += 1;
                }
            }
            _ => {}
        }
    }
    let completions = latencies.len();
    let service_ratio = if notifications == 0 {
        1.0
    } else {
        in_time_count as f64 / notifications as f64
    };
    let mean_latency = if completions == 0 {
        0.0
    } else {
        latencies.iter().sum::<u64>() as f64 / completions as f64
    };
    let p95_latency = if completions == 0 {
        0
    } else {
        latencies.sort_unstable();
        // Ceiling of 0.95 n in integer arithmetic, as a 1-indexed rank.
        let rank = (95 * completions).div_ceil(100);
        latencies[rank - 1]
    };
    ResponseMetrics {
        notifications,
        completions,
        in_time: in_time_count,
        service_ratio,
        mean_latency,
        p95_latency,
        unserviced: notifications - completions.min(notifications),
    }
}

/// Spread of solution approaches across a population.
#[derive(Debug, Clone, PartialEq)]
pub struct DiversityMetrics {
    /// Shannon entropy of the tag distribution, in nats.
    pub tag_entropy: f64,
    /// Share of the most common tag.
    pub dominant_tag_share: f64,
}

pub fn diversity_metrics<'a>(
    population: impl IntoIterator<Item = &'a Agent>,
) -> Result<DiversityMetrics, IndicatorError> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut total = 0usize;
    for agent in population {
        *counts.entry(agent.solution_tag.as_str()).or_default() += 1;
        total += 1;
    }
    if total == 0 {
        return Err(IndicatorError::EmptyPopulation);
    }
    let mut entropy = 0.0;
    let mut dominant = 0usize;
    for &count in counts.values() {
        let p = count as f64 / total as f64;
        entropy -= p * p.ln();
        dominant = dominant.max(count);
    }
    Ok(DiversityMetrics {
        tag_entropy: entropy,
        dominant_tag_share: dominant as f64 / total as f64,
    })
}

/// Count of matches resolved per escalation depth.
pub fn escalation_histogram(trace: &Trace) -> BTreeMap<u32, usize> {
    let mut histogram = BTreeMap::new();
    for record in &trace.records {
        if let TraceEvent::Escalated { depth, .. } = record.event {
            *histogram.entry(depth).or_default() += 1;
        }
    }
    histogram
}

pub fn max_escalation_depth(trace: &Trace) -> u32 {
    escalation_histogram(trace).keys().last().copied().unwrap_or(0)
}

pub fn defection_count(trace: &Trace) -> usize {
    trace
        .records
        .iter()
        .filter(|r| matches!(r.event, TraceEvent::Defected { .. }))
        .count()
}

/// Everything one results row needs, computed from one run.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorReport {
    pub scenario: String,
    pub seed: u64,
    pub response: ResponseMetrics,
    pub max_escalation_depth: u32,
    pub bop: BopReport,
    pub defections: usize,
    pub persona_loss: PersonaLoss,
    pub diversity: DiversityMetrics,
}

/// Assembles the full report for one run. The persona tracked for loss is
/// the whole membership with the classifier's threshold.
pub fn report(output: &SimOutput, params: &PersistenceParams) -> Result<IndicatorReport, IndicatorError> {
    let members: Vec<&AgentId> = output.organization.members().collect();
    let agents: Vec<&Agent> = members.iter().map(|id| &output.final_agents[*id]).collect();
    let bop = bop_report(agents.iter().copied())?;
    let diversity = diversity_metrics(agents.iter().copied())?;
    let persona = SocialPersona {
        id: output.trace.scenario.clone(),
        members: members.into_iter().cloned().collect(),
        theta: params.theta,
    };
    let series = emergence_series(&output.trace, &persona)?;
    let persona_loss = if series.is_empty() {
        PersonaLoss::None
    } else {
        let presence: Vec<(u64, bool)> = series.iter().map(|s| (s.time, s.present)).collect();
        classify_persona_loss(&presence, params)?
    };
    Ok(IndicatorReport {
        scenario: output.trace.scenario.clone(),
        seed: output.trace.seed,
        response: response_metrics(&output.trace),
        max_escalation_depth: max_escalation_depth(&output.trace),
        bop,
        defections: defection_count(&output.trace),
        persona_loss,
        diversity,
    })
}
