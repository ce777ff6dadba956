//! Health-intervention scoring, adaptive weight fitting, content selection and
//! gamification parameters.
//!
//! The intervention effect model in [`apply_intervention`] is synthetic: effect
//! sizes are configuration, not measurements.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{in_closed, BiometricSample, EmployeeProfile, Violation};

#[derive(Debug, Error, PartialEq)]
pub enum WellnessError {
    #[error("{name} out of range {range} (got {value})")]
    OutOfRange {
        name: &'static str,
        range: &'static str,
        value: f64,
    },
    #[error("invalid health weights ({w1}, {w2}): need w1, w2 >= 0 and w1 + w2 > 0")]
    InvalidWeights { w1: f64, w2: f64 },
    #[error("need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("design columns P and E are collinear")]
    Collinear,
    #[error("no nonnegative weight fit explains the data")]
    NoNonnegativeFit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HealthWeights {
    pub w1: f64,
    pub w2: f64,
}

impl HealthWeights {
    pub fn new(w1: f64, w2: f64) -> Result<Self, WellnessError> {
        let w = Self { w1, w2 };
        if w.is_valid() {
            Ok(w)
        } else {
            Err(WellnessError::InvalidWeights { w1, w2 })
        }
    }

    pub fn is_valid(&self) -> bool {
        self.w1 >= 0.0
            && self.w2 >= 0.0
            && self.w1.is_finite()
            && self.w2.is_finite()
            && self.w1 + self.w2 > 0.0
    }
}

impl Default for HealthWeights {
    fn default() -> Self {
        Self { w1: 0.6, w2: 0.4 }
    }
}

fn check_unit(name: &'static str, v: f64) -> Result<(), WellnessError> {
    if in_closed(v, 0.0, 1.0) {
        Ok(())
    } else {
        Err(WellnessError::OutOfRange {
            name,
            range: "[0,1]",
            value: v,
        })
    }
}

/// `H = w1·P + w2·E`.
pub fn health_effectiveness(
    physiological: f64,
    environmental: f64,
    weights: &HealthWeights,
) -> Result<f64, WellnessError> {
    check_unit("physiological", physiological)?;
    check_unit("environmental", environmental)?;
    if !weights.is_valid() {
        return Err(WellnessError::InvalidWeights {
            w1: weights.w1,
            w2: weights.w2,
        });
    }
    Ok(weights.w1 * physiological + weights.w2 * environmental)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HealthObservation {
    pub physiological: f64,
    pub environmental: f64,
    pub effectiveness: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HealthFit {
    pub weights: HealthWeights,
    pub residual_norm: f64,
}

/// Relative determinant below which the 2×2 normal matrix counts as singular.
const COLLINEARITY_TOL: f64 = 1e-10;

/// Least-squares fit of `(w1, w2)` through the origin.
///
/// A negative component is clamped to zero and the other refit alone; when both
/// single-column refits are admissible the one with the smaller residual wins.
pub fn fit_health_weights(observations: &[HealthObservation]) -> Result<HealthFit, WellnessError> {
    if observations.len() < 2 {
        return Err(WellnessError::InsufficientData {
            needed: 2,
            got: observations.len(),
        });
    }
    let (mut spp, mut see, mut spe, mut sph, mut seh) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for o in observations {
        spp += o.physiological * o.physiological;
        see += o.environmental * o.environmental;
        spe += o.physiological * o.environmental;
        sph += o.physiological * o.effectiveness;
        seh += o.environmental * o.effectiveness;
    }
    let det = spp * see - spe * spe;
    if !(det > COLLINEARITY_TOL * spp * see) || spp == 0.0 || see == 0.0 {
        return Err(WellnessError::Collinear);
    }
    let w1 = (sph * see - seh * spe) / det;
    let w2 = (seh * spp - sph * spe) / det;

    let residual = |w1: f64, w2: f64| -> f64 {
        observations
            .iter()
            .map(|o| {
                let r = o.effectiveness - w1 * o.physiological - w2 * o.environmental;
                r * r
            })
            .sum::<f64>()
            .sqrt()
    };

    if w1 >= 0.0 && w2 >= 0.0 && w1 + w2 > 0.0 {
        return Ok(HealthFit {
            weights: HealthWeights { w1, w2 },
            residual_norm: residual(w1, w2),
        });
    }
    let only_p = (sph / spp).max(0.0);
    let only_e = (seh / see).max(0.0);
    let candidates = [
        (only_p > 0.0).then_some((only_p, 0.0)),
        (only_e > 0.0).then_some((0.0, only_e)),
    ];
    candidates
        .into_iter()
        .flatten()
        .map(|(a, b)| (a, b, residual(a, b)))
        .min_by(|x, y| x.2.total_cmp(&y.2))
        .map(|(w1, w2, r)| HealthFit {
            weights: HealthWeights { w1, w2 },
            residual_norm: r,
        })
        .ok_or(WellnessError::NoNonnegativeFit)
}

pub const DEFAULT_REFIT_WINDOW: usize = 200;

/// Sliding-window refitting of health weights.
#[derive(Debug, Clone)]
pub struct AdaptiveHealthWeights {
    window: VecDeque<HealthObservation>,
    capacity: usize,
    current: HealthWeights,
    refits: usize,
}

impl AdaptiveHealthWeights {
    pub fn new(initial: HealthWeights, capacity: usize) -> Self {
        Self {
            window: VecDeque::with_capacity(capacity),
            capacity: capacity.max(2),
            current: initial,
            refits: 0,
        }
    }

    pub fn current(&self) -> HealthWeights {
        self.current
    }

    pub fn refits(&self) -> usize {
        self.refits
    }

    pub fn observe(&mut self, obs: HealthObservation) {
        if self.window.len() == self.capacity {
            self.window.pop_front();
        }
        self.window.push_back(obs);
    }

    /// Refits on the current window. A failed fit keeps the previous weights.
    pub fn refit(&mut self) -> Result<HealthWeights, WellnessError> {
        let data: Vec<HealthObservation> = self.window.iter().copied().collect();
        let fit = fit_health_weights(&data)?;
        self.current = fit.weights;
        self.refits += 1;
        Ok(self.current)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContentId {
    StretchPrompt,
    HydrationPrompt,
    WalkPrompt,
    BreathPrompt,
    None,
}

impl ContentId {
    pub const ALL: [ContentId; 5] = [
        ContentId::StretchPrompt,
        ContentId::HydrationPrompt,
        ContentId::WalkPrompt,
        ContentId::BreathPrompt,
        ContentId::None,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ContentId::StretchPrompt => "stretch_prompt",
            ContentId::HydrationPrompt => "hydration_prompt",
            ContentId::WalkPrompt => "walk_prompt",
            ContentId::BreathPrompt => "breath_prompt",
            ContentId::None => "none",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }
}

impl fmt::Display for ContentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterventionContent {
    pub content_id: ContentId,
    pub intensity: f64,
}

impl InterventionContent {
    pub const NONE: InterventionContent = InterventionContent {
        content_id: ContentId::None,
        intensity: 0.0,
    };
}

/// Which prompt answers a weak signal, and how strongly each prompt acts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContentCatalog {
    #[serde(default = "default_physiological_prompt")]
    pub physiological_prompt: ContentId,
    #[serde(default = "default_environmental_prompt")]
    pub environmental_prompt: ContentId,
    /// Productivity effect (score units) at full intensity and responsiveness.
    #[serde(default = "default_effect_sizes")]
    pub effect_sizes: BTreeMap<ContentId, f64>,
}

fn default_physiological_prompt() -> ContentId {
    ContentId::WalkPrompt
}
fn default_environmental_prompt() -> ContentId {
    ContentId::BreathPrompt
}

pub const DEFAULT_EFFECT_SIZE: f64 = 0.05;

fn default_effect_sizes() -> BTreeMap<ContentId, f64> {
    [
        ContentId::StretchPrompt,
        ContentId::HydrationPrompt,
        ContentId::WalkPrompt,
        ContentId::BreathPrompt,
    ]
    .into_iter()
    .map(|c| (c, DEFAULT_EFFECT_SIZE))
    .collect()
}

impl Default for ContentCatalog {
    fn default() -> Self {
        Self {
            physiological_prompt: default_physiological_prompt(),
            environmental_prompt: default_environmental_prompt(),
            effect_sizes: default_effect_sizes(),
        }
    }
}

impl ContentCatalog {
    /// Same catalog with every prompt's effect set to `effect`.
    pub fn with_uniform_effect(mut self, effect: f64) -> Self {
        for v in self.effect_sizes.values_mut() {
            *v = effect;
        }
        for c in [self.physiological_prompt, self.environmental_prompt] {
            if c != ContentId::None {
                self.effect_sizes.insert(c, effect);
            }
        }
        self
    }

    pub fn effect_size(&self, content: ContentId) -> f64 {
        match content {
            ContentId::None => 0.0,
            c => self
                .effect_sizes
                .get(&c)
                .copied()
                .unwrap_or(DEFAULT_EFFECT_SIZE),
        }
    }

    pub fn validate(&self) -> Vec<Violation> {
        self.effect_sizes
            .iter()
            .filter(|(_, v)| !(v.is_finite() && **v >= 0.0))
            .map(|(c, v)| {
                Violation::new(
                    format!("health.catalog.effect_sizes.{c}"),
                    format!("effect size must be finite and >= 0 (got {v})"),
                )
            })
            .collect()
    }
}

/// Picks a prompt for the weakest of P and E (ties go to P) when `H < threshold`.
pub fn select_content(
    sample: &BiometricSample,
    weights: &HealthWeights,
    threshold: f64,
    catalog: &ContentCatalog,
) -> InterventionContent {
    let h = weights.w1 * sample.physiological + weights.w2 * sample.environmental;
    if !(h < threshold) {
        return InterventionContent::NONE;
    }
    let content_id = if sample.physiological <= sample.environmental {
        catalog.physiological_prompt
    } else {
        catalog.environmental_prompt
    };
    InterventionContent {
        content_id,
        intensity: (threshold - h).clamp(0.0, 1.0),
    }
}

/// `responsiveness · intensity · effect_size`, zero for no content.
pub fn apply_intervention(
    profile: &EmployeeProfile,
    content: &InterventionContent,
    catalog: &ContentCatalog,
) -> f64 {
    if content.content_id == ContentId::None {
        return 0.0;
    }
    let delta = profile.intervention_responsiveness.clamp(0.0, 1.0)
        * content.intensity.clamp(0.0, 1.0)
        * catalog.effect_size(content.content_id);
    delta.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameMechanics {
    pub challenge_level: f64,
    /// Prompts per 100 ticks.
    pub reward_frequency: f64,
    pub leaderboard_visibility: bool,
}

/// Maps performance and sentiment to game mechanics.
pub trait GamificationStrategy {
    fn mechanics(&self, performance_percentile: f64, sentiment: f64) -> GameMechanics;
}

/// Challenge tracks performance; negative sentiment raises reward frequency
/// and hides the leaderboard.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefaultGamification {
    pub base_frequency: f64,
}

impl Default for DefaultGamification {
    fn default() -> Self {
        Self {
            base_frequency: 5.0,
        }
    }
}

impl GamificationStrategy for DefaultGamification {
    fn mechanics(&self, performance_percentile: f64, sentiment: f64) -> GameMechanics {
        GameMechanics {
            challenge_level: performance_percentile,
            reward_frequency: self.base_frequency * (1.0 + (-sentiment).max(0.0)),
            leaderboard_visibility: sentiment >= 0.0,
        }
    }
}

pub fn gamification_params(
    performance_percentile: f64,
    sentiment: f64,
) -> Result<GameMechanics, WellnessError> {
    gamification_with(
        &DefaultGamification::default(),
        performance_percentile,
        sentiment,
    )
}

pub fn gamification_with<S: GamificationStrategy + ?Sized>(
    strategy: &S,
    performance_percentile: f64,
    sentiment: f64,
) -> Result<GameMechanics, WellnessError> {
    check_unit("performance_percentile", performance_percentile)?;
    if !in_closed(sentiment, -1.0, 1.0) {
        return Err(WellnessError::OutOfRange {
            name: "sentiment",
            range: "[-1,1]",
            value: sentiment,
        });
    }
    Ok(strategy.mechanics(performance_percentile, sentiment))
}
