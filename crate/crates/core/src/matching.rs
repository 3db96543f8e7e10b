//! Team matching: the registry-driven switchboard used by coordination
//! centers, and the team lattice it implicitly searches.
//!
//! `match_notification` is the deterministic greedy matcher: it walks the
//! protocol requirements in declared order and picks the minimum quorum for
//! each, ranked by distance to the notification and then by agent id, all
//! or nothing. The lattice operations (`count_teams`, `enumerate_teams`,
//! `walk_step`, `form_team`) expose the underlying space of candidate
//! teams: every per-requirement subset of the eligible pools is a lattice
//! point, and a biased random walk over single add/remove moves models
//! decentralized enrollment.

use std::collections::BTreeSet;

use rand::Rng;
use thiserror::Error;

use crate::agents::{Agent, AgentId, Availability, SubscriptionRecord};
use crate::ontology::{Notification, Ontology, Role, ServicingProtocol};
use crate::organization::{CcId, CcState};
use std::collections::BTreeMap;

/// Ceiling on how many teams `enumerate_teams` will agree to yield.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MatchError {
    #[error("coordination center `{0}` is not alive")]
    DeadCc(CcId),
    #[error("protocol `{protocol}` services kind `{expected}`, not `{got}`")]
    KindMismatch { protocol: String, expected: String, got: String },
    #[error("slot has bad bounds {min}..={max} over a pool of {pool}")]
    BadBounds { pool: u32, min: u32, max: u32 },
    #[error("team space holds {count} teams, above the cap of {cap}")]
    SpaceTooLarge { count: u128, cap: u128 },
    #[error("max_steps must be at least 1")]
    ZeroMaxSteps,
}

/// Outcome of one switchboard match attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatchResult {
    /// One selected agent list per requirement, in requirement order; the
    /// lists are pairwise disjoint and each holds exactly `min_count` ids.
    Assignment(Vec<Vec<AgentId>>),
    /// Requirements that could not reach quorum, with how many agents each
    /// was short, in requirement order. Nothing was selected.
    MissingRoles(Vec<(Role, u32)>),
}

/// Idle registry members whose advertisements satisfy `required`.
pub fn eligible(
    registry: &[SubscriptionRecord],
    required: &Role,
    ontology: &Ontology,
    agents: &BTreeMap<AgentId, Agent>,
) -> BTreeSet<AgentId> {
    let mut out = BTreeSet::new();
    for record in registry {
        let Some(agent) = agents.get(&record.member) else { continue };
        if agent.availability != Availability::Idle {
            continue;
        }
        let offers = record
            .advertisements
            .iter()
            .any(|ad| ontology.satisfies(&ad.role, required).unwrap_or(false));
        if offers {
            out.insert(record.member.clone());
        }
    }
    out
}

/// Greedy all-or-nothing quorum selection against a CC's registry.
pub fn match_notification(
    cc: &CcState,
    notification: &Notification,
    protocol: &ServicingProtocol,
    ontology: &Ontology,
    agents: &BTreeMap<AgentId, Agent>,
) -> Result<MatchResult, MatchError> {
    if !cc.alive {
        return Err(MatchError::DeadCc(cc.id));
    }
    match_pooled(&[&cc.registry], notification, protocol, ontology, agents)
}

/// Same greedy selection over several registries pooled together; this is
/// what escalation feeds with the registries of the layers visited so far.
pub fn match_pooled(
    registries: &[&Vec<SubscriptionRecord>],
    notification: &Notification,
    protocol: &ServicingProtocol,
    ontology: &Ontology,
    agents: &BTreeMap<AgentId, Agent>,
) -> Result<MatchResult, MatchError> {
    if protocol.trigger_kind != notification.kind {
        return Err(MatchError::KindMismatch {
            protocol: protocol.id.clone(),
            expected: protocol.trigger_kind.clone(),
            got: notification.kind.clone(),
        });
    }
    let mut taken: BTreeSet<AgentId> = BTreeSet::new();
    let mut assignment: Vec<Vec<AgentId>> = Vec::new();
    let mut missing: Vec<(Role, u32)> = Vec::new();
    for req in &protocol.requirements {
        let mut candidates: BTreeSet<AgentId> = BTreeSet::new();
        for registry in registries {
            candidates.extend(eligible(registry, &req.role, ontology, agents));
        }
        let mut ranked: Vec<AgentId> =
            candidates.into_iter().filter(|id| !taken.contains(id)).collect();
        ranked.sort_by(|a, b| {
            let da = agents[a].location.distance(notification.location);
            let db = agents[b].location.distance(notification.location);
            da.total_cmp(&db).then_with(|| a.cmp(b))
        });
        let need = req.min_count as usize;
        if ranked.len() < need {
            missing.push((req.role.clone(), (need - ranked.len()) as u32));
            // Earlier slots still consume what little is there, so later
            // shortfalls reflect sequential selection.
            taken.extend(ranked);
            assignment.push(Vec::new());
        } else {
            let chosen: Vec<AgentId> = ranked.into_iter().take(need).collect();
            taken.extend(chosen.iter().cloned());
            assignment.push(chosen);
        }
    }
    if missing.is_empty() {
        Ok(MatchResult::Assignment(assignment))
    } else {
        Ok(MatchResult::MissingRoles(missing))
    }
}

/// One requirement slot of the team lattice: the eligible members and the
/// accepted enrollment bounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RolePool {
    pub members: Vec<AgentId>,
    pub min: u32,
    pub max: u32,
}

impl RolePool {
    pub fn new<I: Into<String>>(members: impl IntoIterator<Item = I>, min: u32, max: u32) -> Self {
        let set: BTreeSet<AgentId> = members.into_iter().map(AgentId::new).collect();
        RolePool { members: set.into_iter().collect(), min, max }
    }
}

/// Point of the team lattice: who is enrolled for each requirement.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct TeamState {
    pub enrolled: Vec<BTreeSet<AgentId>>,
}

impl TeamState {
    pub fn empty(requirements: usize) -> Self {
        TeamState { enrolled: vec![BTreeSet::new(); requirements] }
    }

    /// Enrollments drawn from their pools and pairwise disjoint.
    pub fn is_valid(&self, pools: &[RolePool]) -> bool {
        if self.enrolled.len() != pools.len() {
            return false;
        }
        let mut seen = BTreeSet::new();
        for (set, pool) in self.enrolled.iter().zip(pools) {
            for id in set {
                if !pool.members.contains(id) || !seen.insert(id) {
                    return false;
                }
            }
        }
        true
    }

    /// Every slot within its accepted bounds.
    pub fn is_accepting(&self, pools: &[RolePool]) -> bool {
        self.enrolled.len() == pools.len()
            && self
                .enrolled
                .iter()
                .zip(pools)
                .all(|(set, pool)| {
                    let n = set.len() as u32;
                    pool.min <= n && n <= pool.max
                })
    }
}

fn binomial(n: u32, k: u32) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut result: u128 = 1;
    for i in 0..u128::from(k) {
        result = result.checked_mul(u128::from(n) - i)?;
        result /= i + 1;
    }
    Some(result)
}

/// Number of lattice points whose every slot is within bounds:
/// the product over slots of `sum_{k=min..max} C(n, k)`.
pub fn count_teams(slots: &[(u32, u32, u32)]) -> Result<u128, MatchError> {
    let mut total: u128 = 1;
    for &(n, min, max) in slots {
        if min > max || max > n {
            return Err(MatchError::BadBounds { pool: n, min, max });
        }
        let mut sum: u128 = 0;
        for k in min..=max {
            let term = binomial(n, k)
                .ok_or(MatchError::SpaceTooLarge { count: u128::MAX, cap: u128::MAX })?;
            sum = sum
                .checked_add(term)
                .ok_or(MatchError::SpaceTooLarge { count: u128::MAX, cap: u128::MAX })?;
        }
        total = total
            .checked_mul(sum)
            .ok_or(MatchError::SpaceTooLarge { count: u128::MAX, cap: u128::MAX })?;
    }
    Ok(total)
}

/// Iterator over every accepted team, smallest-role-index most significant,
/// member subsets in lexicographic prefix order.
pub struct TeamEnumerator {
    subsets: Vec<Vec<Vec<AgentId>>>,
    cursor: Vec<usize>,
    done: bool,
}

impl Iterator for TeamEnumerator {
    type Item = TeamState;

    fn next(&mut self) -> Option<TeamState> {
        if self.done {
            return None;
        }
        let state = TeamState {
            enrolled: self
                .subsets
                .iter()
                .zip(&self.cursor)
                .map(|(options, &i)| options[i].iter().cloned().collect())
                .collect(),
        };
        // Odometer increment, last slot fastest.
        let mut slot = self.subsets.len();
        loop {
            if slot == 0 {
                self.done = true;
                break;
            }
            slot -= 1;
            self.cursor[slot] += 1;
            if self.cursor[slot] < self.subsets[slot].len() {
                break;
            }
            self.cursor[slot] = 0;
        }
        Some(state)
    }
}

fn subsets_in_bounds(pool: &RolePool) -> Vec<Vec<AgentId>> {
    fn extend(
        members: &[AgentId],
        start: usize,
        prefix: &mut Vec<AgentId>,
        min: usize,
        max: usize,
        out: &mut Vec<Vec<AgentId>>,
    ) {
        if prefix.len() >= min {
            out.push(prefix.clone());
        }
        if prefix.len() == max {
            return;
        }
        for i in start..members.len() {
            prefix.push(members[i].clone());
            extend(members, i + 1, prefix, min, max, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    extend(&pool.members, 0, &mut Vec::new(), pool.min as usize, pool.max as usize, &mut out);
    out
}

/// Enumerates every accepted team, refusing spaces larger than `cap`.
pub fn enumerate_teams(pools: &[RolePool], cap: u128) -> Result<TeamEnumerator, MatchError> {
    let slots: Vec<(u32, u32, u32)> =
        pools.iter().map(|p| (p.members.len() as u32, p.min, p.max)).collect();
    let count = count_teams(&slots)?;
    if count > cap {
        return Err(MatchError::SpaceTooLarge { count, cap });
    }
    Ok(TeamEnumerator {
        subsets: pools.iter().map(subsets_in_bounds).collect(),
        cursor: vec![0; pools.len()],
        done: pools.is_empty() || count == 0,
    })
}

/// Single add/remove move on the team lattice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WalkMove {
    Add { requirement: usize, member: AgentId },
    Remove { requirement: usize, member: AgentId },
}

/// One step of the biased enrollment walk. With probability `q` the step is
/// drawn uniformly from the quorum-repairing moves (add to a slot below its
/// minimum, remove from a slot above its maximum), otherwise uniformly from
/// all single add/remove moves. An empty chosen kind falls back to the
/// other; with no legal move at all the state is returned unchanged.
pub fn walk_step(
    state: &TeamState,
    pools: &[RolePool],
    q: f64,
    rng: &mut impl Rng,
) -> TeamState {
    let enrolled_anywhere: BTreeSet<&AgentId> = state.enrolled.iter().flatten().collect();
    let mut toward: Vec<WalkMove> = Vec::new();
    let mut any: Vec<WalkMove> = Vec::new();
    for (r, pool) in pools.iter().enumerate() {
        let slot = &state.enrolled[r];
        let size = slot.len() as u32;
        for member in &pool.members {
            if !enrolled_anywhere.contains(member) {
                let mv = WalkMove::Add { requirement: r, member: member.clone() };
                if size < pool.min {
                    toward.push(mv.clone());
                }
                any.push(mv);
            }
        }
        for member in slot {
            let mv = WalkMove::Remove { requirement: r, member: member.clone() };
            if size > pool.max {
                toward.push(mv.clone());
            }
            any.push(mv);
        }
    }
    // The kind draw is always consumed, so the stream stays aligned whether
    // or not the preferred kind has moves.
    let prefer_toward = rng.gen::<f64>() < q;
    if any.is_empty() {
        return state.clone();
    }
    let moves = if prefer_toward && !toward.is_empty() { &toward } else { &any };
    let mv = &moves[rng.gen_range(0..moves.len())];
    let mut next = state.clone();
    match mv {
        WalkMove::Add { requirement, member } => {
            next.enrolled[*requirement].insert(member.clone());
        }
        WalkMove::Remove { requirement, member } => {
            next.enrolled[*requirement].remove(member);
        }
    }
    next
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FormOutcome {
    Team { state: TeamState, steps: u64 },
    Timeout { state: TeamState },
}

/// Walks from the empty team until every slot is within bounds or the step
/// budget runs out.
pub fn form_team(
    pools: &[RolePool],
    q: f64,
    max_steps: u64,
    rng: &mut impl Rng,
) -> Result<FormOutcome, MatchError> {
    if max_steps == 0 {
        return Err(MatchError::ZeroMaxSteps);
    }
    let mut state = TeamState::empty(pools.len());
    if state.is_accepting(pools) {
        return Ok(FormOutcome::Team { state, steps: 0 });
    }
    for step in 1..=max_steps {
        state = walk_step(&state, pools, q, rng);
        if state.is_accepting(pools) {
            return Ok(FormOutcome::Team { state, steps: step });
        }
    }
    Ok(FormOutcome::Timeout { state })
}
