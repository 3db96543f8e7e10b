//! Agents: who they are, how they can behave, and how firmly they stay in
//! the collective.
//!
//! Each agent carries two behavior grades on the same eight-step scale: the
//! intrinsic one it is capable of (defaulted from its persona) and the
//! exercised one its organization lets it play. The distance between the
//! two feeds a cohesion leak; cohesion is restored whenever the collective
//! actually uses the agent. An agent whose cohesion falls below the
//! defection floor leaves for good.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::ontology::Role;

/// Behavior grades, coarsest to richest. The ordinal distance between two
/// grades is what the mismatch metrics consume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BehaviorClass {
    Passive,
    Active,
    PurposefulActive,
    Teleological,
    SimpleExtrapolative,
    SocialPredictive,
    ComplexMultivariateExtrapolative,
    FutureResponsiveSocialLearning,
}

impl BehaviorClass {
    pub const ALL: [BehaviorClass; 8] = [
        BehaviorClass::Passive,
        BehaviorClass::Active,
        BehaviorClass::PurposefulActive,
        BehaviorClass::Teleological,
        BehaviorClass::SimpleExtrapolative,
        BehaviorClass::SocialPredictive,
        BehaviorClass::ComplexMultivariateExtrapolative,
        BehaviorClass::FutureResponsiveSocialLearning,
    ];

    pub fn ordinal(self) -> u8 {
        match self {
            BehaviorClass::Passive => 0,
            BehaviorClass::Active => 1,
            BehaviorClass::PurposefulActive => 2,
            BehaviorClass::Teleological => 3,
            BehaviorClass::SimpleExtrapolative => 4,
            BehaviorClass::SocialPredictive => 5,
            BehaviorClass::ComplexMultivariateExtrapolative => 6,
            BehaviorClass::FutureResponsiveSocialLearning => 7,
        }
    }

    pub fn from_ordinal(ordinal: u8) -> Option<Self> {
        Self::ALL.get(ordinal as usize).copied()
    }

    pub fn token(self) -> &'static str {
        match self {
            BehaviorClass::Passive => "passive",
            BehaviorClass::Active => "active",
            BehaviorClass::PurposefulActive => "purposeful_active",
            BehaviorClass::Teleological => "teleological",
            BehaviorClass::SimpleExtrapolative => "simple_extrapolative",
            BehaviorClass::SocialPredictive => "social_predictive",
            BehaviorClass::ComplexMultivariateExtrapolative => "complex_multivariate_extrapolative",
            BehaviorClass::FutureResponsiveSocialLearning => "future_responsive_social_learning",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.token() == token)
    }
}

impl fmt::Display for BehaviorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// What kind of system an agent is, from plain servo-mechanisms up to whole
/// ecosystems. The persona fixes the default intrinsic behavior grade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PersonaClass {
    ServoMechanism,
    SimpleControlMechanism,
    BiologicalCell,
    CyberPhysicalSystem,
    Plant,
    Animal,
    HumanBeing,
    SocietyOfAnimals,
    SocietyOfHumans,
    SystemOfCyberPhysicalSystems,
    CyberPhysicalSociety,
    Ecosystem,
}

impl PersonaClass {
    pub const ALL: [PersonaClass; 12] = [
        PersonaClass::ServoMechanism,
        PersonaClass::SimpleControlMechanism,
        PersonaClass::BiologicalCell,
        PersonaClass::CyberPhysicalSystem,
        PersonaClass::Plant,
        PersonaClass::Animal,
        PersonaClass::HumanBeing,
        PersonaClass::SocietyOfAnimals,
        PersonaClass::SocietyOfHumans,
        PersonaClass::SystemOfCyberPhysicalSystems,
        PersonaClass::CyberPhysicalSociety,
        PersonaClass::Ecosystem,
    ];

    /// Default behavior grade an agent of this persona is capable of.
    pub fn intrinsic_behavior(self) -> BehaviorClass {
        match self {
            PersonaClass::ServoMechanism => BehaviorClass::PurposefulActive,
            PersonaClass::SimpleControlMechanism => BehaviorClass::Teleological,
            PersonaClass::BiologicalCell => BehaviorClass::Teleological,
            PersonaClass::Plant => BehaviorClass::Teleological,
            PersonaClass::CyberPhysicalSystem => BehaviorClass::SimpleExtrapolative,
            PersonaClass::Animal => BehaviorClass::SimpleExtrapolative,
            PersonaClass::SocietyOfAnimals => BehaviorClass::SocialPredictive,
            PersonaClass::SystemOfCyberPhysicalSystems => BehaviorClass::SocialPredictive,
            PersonaClass::HumanBeing => BehaviorClass::ComplexMultivariateExtrapolative,
            PersonaClass::SocietyOfHumans => BehaviorClass::FutureResponsiveSocialLearning,
            PersonaClass::CyberPhysicalSociety => BehaviorClass::FutureResponsiveSocialLearning,
            PersonaClass::Ecosystem => BehaviorClass::FutureResponsiveSocialLearning,
        }
    }

    /// Default sensitivity of this persona to being under-used, on [0, 1]:
    /// the richer the capable behavior, the harder the mismatch bites.
    pub fn default_weight(self) -> f64 {
        f64::from(self.intrinsic_behavior().ordinal()) / 7.0
    }

    pub fn token(self) -> &'static str {
        match self {
            PersonaClass::ServoMechanism => "servo_mechanism",
            PersonaClass::SimpleControlMechanism => "simple_control_mechanism",
            PersonaClass::BiologicalCell => "biological_cell",
            PersonaClass::CyberPhysicalSystem => "cyber_physical_system",
            PersonaClass::Plant => "plant",
            PersonaClass::Animal => "animal",
            PersonaClass::HumanBeing => "human_being",
            PersonaClass::SocietyOfAnimals => "society_of_animals",
            PersonaClass::SocietyOfHumans => "society_of_humans",
            PersonaClass::SystemOfCyberPhysicalSystems => "system_of_cyber_physical_systems",
            PersonaClass::CyberPhysicalSociety => "cyber_physical_society",
            PersonaClass::Ecosystem => "ecosystem",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.token() == token)
    }
}

impl fmt::Display for PersonaClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentId(String);

impl AgentId {
    pub fn new(id: impl Into<String>) -> Self {
        AgentId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AgentId {
    fn from(id: &str) -> Self {
        AgentId::new(id)
    }
}

/// Plane position used for perception ranges and match ranking.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Availability {
    Idle,
    Busy,
    Failed,
    Defected,
}

impl fmt::Display for Availability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Availability::Idle => "idle",
            Availability::Busy => "busy",
            Availability::Failed => "failed",
            Availability::Defected => "defected",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AgentError {
    #[error("agent `{0}` has failed")]
    AgentFailed(AgentId),
    #[error("agent `{0}` is not idle")]
    NotIdle(AgentId),
}

/// One member of the population.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub id: AgentId,
    pub persona: PersonaClass,
    /// Behavior grade the agent is capable of.
    pub intrinsic_behavior: BehaviorClass,
    /// Behavior grade its current organization lets it exercise.
    pub exercised_behavior: BehaviorClass,
    pub location: Point,
    pub perception_radius: f64,
    /// Roles this agent offers to play.
    pub advertisements: BTreeSet<Role>,
    /// Declared social ties, as (kind, other member) pairs.
    pub relationships: BTreeSet<(String, AgentId)>,
    pub availability: Availability,
    /// Technology/approach label; correlated failures strike by tag.
    pub solution_tag: String,
    pub cohesion: f64,
    /// Layer index inside a fractal organization; 0 in flat ones.
    pub layer: u32,
}

impl Agent {
    /// New idle agent at the origin with persona defaults. Builder-style
    /// setters below fill in the rest.
    pub fn new(id: impl Into<String>, persona: PersonaClass) -> Self {
        let intrinsic = persona.intrinsic_behavior();
        Agent {
            id: AgentId::new(id),
            persona,
            intrinsic_behavior: intrinsic,
            exercised_behavior: intrinsic,
            location: Point::default(),
            perception_radius: 0.0,
            advertisements: BTreeSet::new(),
            relationships: BTreeSet::new(),
            availability: Availability::Idle,
            solution_tag: "default".into(),
            cohesion: 0.8,
            layer: 0,
        }
    }

    pub fn at(mut self, x: f64, y: f64) -> Self {
        self.location = Point::new(x, y);
        self
    }

    pub fn advertising<R: Into<String>>(mut self, roles: impl IntoIterator<Item = R>) -> Self {
        self.advertisements = roles.into_iter().map(|r| Role::new(r)).collect();
        self
    }

    pub fn tagged(mut self, tag: impl Into<String>) -> Self {
        self.solution_tag = tag.into();
        self
    }

    pub fn with_intrinsic(mut self, behavior: BehaviorClass) -> Self {
        self.intrinsic_behavior = behavior;
        self.exercised_behavior = behavior;
        self
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.perception_radius = radius;
        self
    }

    /// How far the agent's exercised behavior falls short of what it could
    /// do. Being asked for more than it can do is not a shortfall.
    pub fn bop_gap(&self) -> u8 {
        self.intrinsic_behavior
            .ordinal()
            .saturating_sub(self.exercised_behavior.ordinal())
    }

    /// Publishes the agent's registry entry: identity, persona, location,
    /// relationships, and one advertisement per offered role.
    pub fn subscribe(&self) -> Result<SubscriptionRecord, AgentError> {
        if self.availability != Availability::Idle {
            return Err(AgentError::NotIdle(self.id.clone()));
        }
        Ok(SubscriptionRecord {
            member: self.id.clone(),
            persona: self.persona,
            location: self.location,
            relationships: self.relationships.clone(),
            advertisements: self
                .advertisements
                .iter()
                .map(|role| ServiceAdvertisement { member: self.id.clone(), role: role.clone() })
                .collect(),
        })
    }

    /// Applies one cohesion stimulus. Returns functions clamp to [0, 1];
    /// the under-use leak clamps at 0 and, once cohesion lands below the
    /// defection floor, the agent defects and stays defected.
    pub fn update_cohesion(
        &mut self,
        stimulus: CohesionStimulus,
        params: &CohesionParams,
    ) -> Result<(), AgentError> {
        if self.availability == Availability::Failed {
            return Err(AgentError::AgentFailed(self.id.clone()));
        }
        self.cohesion = match stimulus {
            CohesionStimulus::UtilizedReturn => (self.cohesion + params.alpha).min(1.0),
            CohesionStimulus::CrisisUtilizedReturn => {
                (self.cohesion + params.alpha * params.gamma).min(1.0)
            }
            CohesionStimulus::BopTick => {
                let gap = f64::from(self.bop_gap()) / 7.0;
                let weight = params.weight_of(self.persona);
                (self.cohesion - params.beta * gap * weight).max(0.0)
            }
        };
        if self.cohesion < params.c_def && self.availability != Availability::Failed {
            self.availability = Availability::Defected;
        }
        Ok(())
    }
}

/// One offered role, as published to a coordination registry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceAdvertisement {
    pub member: AgentId,
    pub role: Role,
}

/// Registry entry a member publishes when joining an organization.
#[derive(Debug, Clone, PartialEq)]
pub struct SubscriptionRecord {
    pub member: AgentId,
    pub persona: PersonaClass,
    pub location: Point,
    pub relationships: BTreeSet<(String, AgentId)>,
    pub advertisements: Vec<ServiceAdvertisement>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CohesionStimulus {
    /// The collective used this agent since the last assessment.
    UtilizedReturn,
    /// Same, but during an open crisis window: the return is amplified.
    CrisisUtilizedReturn,
    /// Periodic toll for exercising less behavior than the agent could.
    BopTick,
}

/// Knobs of the cohesion dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct CohesionParams {
    /// Gain per utilized return.
    pub alpha: f64,
    /// Leak rate per under-use tick.
    pub beta: f64,
    /// Crisis amplification of the utilized return.
    pub gamma: f64,
    /// Defection floor: dropping below it is absorbing.
    pub c_def: f64,
    /// Per-persona sensitivity override; personas absent here fall back to
    /// their default weight.
    pub persona_weight: BTreeMap<PersonaClass, f64>,
}

impl CohesionParams {
    pub fn weight_of(&self, persona: PersonaClass) -> f64 {
        self.persona_weight.get(&persona).copied().unwrap_or_else(|| persona.default_weight())
    }
}

impl Default for CohesionParams {
    fn default() -> Self {
        CohesionParams {
            alpha: 0.05,
            beta: 0.05,
            gamma: 3.0,
            c_def: 0.2,
            persona_weight: BTreeMap::new(),
        }
    }
}

/// A named collective whose emergence is tracked over time.
#[derive(Debug, Clone, PartialEq)]
pub struct SocialPersona {
    pub id: String,
    pub members: BTreeSet<AgentId>,
    /// Fraction of members that must still stand for the collective to
    /// count as emergent.
    pub theta: f64,
}
