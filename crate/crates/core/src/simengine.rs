//! Scenario-driven simulation loop and run artifacts.
//!
//! Per tick and employee the engine samples biometrics, derives distraction and
//! engagement, picks an action from the arm's Q-table, assigns the tick's tasks,
//! optionally delivers a health prompt and then updates productivity:
//!
//! ```text
//! productivity += task_value_scale · Σ w(assigned)
//!               + intervention delta
//!               − distraction_penalty · max(0, D − D_floor)
//! ```
//!
//! `D` already carries the employee's sensitivity, and `D_floor` is the minimum
//! distraction found by the offline calibration in [`crate::neuroecon::calibrate`].
//! All three terms are logged per row.
//!
//! Every random draw comes from a sub-stream keyed by `(seed, stream, employee,
//! tick)`, never by arm, so arms see the same employees, signals and tasks. The
//! Q-learning reward leaves out the intervention delta, which keeps the learned
//! policy and therefore the assignments identical across arms too.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{EmployeeProfile, GroupLabel, RngState, TaskInstance, Violation};
use crate::evalstats::{
    anova_oneway, build_report, f_critical_1pct, pairwise_sum, AnovaResult, ArmOutcomes,
    EmployeeOutcome, MetricsReport, StatsError,
};
use crate::neuroecon::{
    calibrate, distraction_level, engagement_index, CalibrationSpec, DistractionWeights,
    NeuroError, ObjectivePreset,
};
use crate::scheduler::{
    q_update, scalarize, schedule_assignments, select_action, workplace_state, AssignmentInstance,
    LearningParams, QTable, RewardVector, ScalarizationWeights, ScheduleError, WorkAction,
    WORKPLACE_STATES,
};
use crate::synthgen::{
    generate_cohort, generate_task_batch, join_violations, read_cohort_csv, sample_biometrics,
    write_cohort_csv, AffinityTable, CohortSpec, SignalSpec, SynthError, TaskStreamSpec,
};
use crate::wellness::{
    apply_intervention, gamification_params, health_effectiveness, select_content,
    AdaptiveHealthWeights, ContentCatalog, ContentId, HealthObservation, HealthWeights,
    InterventionContent, WellnessError, DEFAULT_REFIT_WINDOW,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Sub-stream tags for [`RngState::derive`].
const STREAM_COHORT: u64 = 1;
const STREAM_SIGNALS: u64 = 2;
const STREAM_TASKS: u64 = 3;
const STREAM_ACTIONS: u64 = 4;
const STREAM_HEALTH: u64 = 5;

/// Employees holding this many unfinished tasks receive no new ones.
pub const BACKLOG_LIMIT: usize = 2;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid scenario: {}", join_violations(.0))]
    InvalidConfig(Vec<Violation>),
    #[error("tick {tick}{}: {message}", employee_suffix(*.employee))]
    Step {
        tick: u64,
        employee: Option<u64>,
        message: String,
    },
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Neuro(#[from] NeuroError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("comparison needs at least 2 arms, got {0}")]
    TooFewArms(usize),
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{file}: {message}")]
    Artifact { file: String, message: String },
}

fn employee_suffix(employee: Option<u64>) -> String {
    employee
        .map(|e| format!(", employee {e}"))
        .unwrap_or_default()
}

fn step_err(tick: u64, employee: Option<u64>, e: impl fmt::Display) -> EngineError {
    EngineError::Step {
        tick,
        employee,
        message: e.to_string(),
    }
}

fn artifact_err(file: &str, e: impl fmt::Display) -> EngineError {
    EngineError::Artifact {
        file: file.to_string(),
        message: e.to_string(),
    }
}

/// Fixed weights, or the literal string `"fit"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HealthWeightsMode {
    Fixed(HealthWeights),
    Fit(FitKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitKeyword {
    #[serde(rename = "fit")]
    Fit,
}

/// Settings for `"weights": "fit"`: noisy effectiveness observations are drawn
/// around `planted` and the weights refit on a sliding window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSettings {
    pub initial: HealthWeights,
    pub planted: HealthWeights,
    pub noise_stddev: f64,
    pub window: usize,
    pub refit_every: u64,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            initial: HealthWeights { w1: 0.5, w2: 0.5 },
            planted: HealthWeights::default(),
            noise_stddev: 0.02,
            window: DEFAULT_REFIT_WINDOW,
            refit_every: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HealthConfig {
    #[serde(default = "default_weights_mode")]
    pub weights: HealthWeightsMode,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub catalog: ContentCatalog,
    #[serde(default)]
    pub fit: FitSettings,
}

fn default_weights_mode() -> HealthWeightsMode {
    HealthWeightsMode::Fixed(HealthWeights::default())
}

fn default_threshold() -> f64 {
    0.6
}

impl Default for HealthConfig {
    fn default() -> Self {
        Self {
            weights: default_weights_mode(),
            threshold: default_threshold(),
            catalog: ContentCatalog::default(),
            fit: FitSettings::default(),
        }
    }
}

/// Coefficients of the per-tick productivity update and the action reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProductivityModel {
    /// Score units per unit of assigned task weight.
    pub task_value_scale: f64,
    /// Score units lost per unit of distraction above the calibrated floor.
    pub distraction_penalty: f64,
    /// Wellbeing reward for a break, multiplied by cognitive load.
    pub break_wellbeing_bonus: f64,
    /// Relative weight boost for tasks in the focused category.
    pub focus_bonus: f64,
}

impl Default for ProductivityModel {
    fn default() -> Self {
        Self {
            task_value_scale: 0.01,
            distraction_penalty: 0.01,
            break_wellbeing_bonus: 0.2,
            focus_bonus: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmSpec {
    pub name: String,
    pub interventions_enabled: bool,
    /// Overrides every catalog effect size for this arm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effect_size: Option<f64>,
}

impl ArmSpec {
    pub fn new(name: impl Into<String>, interventions_enabled: bool) -> Self {
        Self {
            name: name.into(),
            interventions_enabled,
            effect_size: None,
        }
    }

    pub fn with_effect(mut self, effect: f64) -> Self {
        self.effect_size = Some(effect);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub ticks: u64,
    pub cohort: CohortSpec,
    #[serde(default)]
    pub signals: SignalSpec,
    #[serde(default)]
    pub tasks: TaskStreamSpec,
    #[serde(default)]
    pub affinity: AffinityTable,
    #[serde(default)]
    pub learning: LearningParams,
    #[serde(default)]
    pub scalarization: ScalarizationWeights,
    #[serde(default)]
    pub health: HealthConfig,
    #[serde(default)]
    pub objective: CalibrationSpec,
    #[serde(default)]
    pub productivity: ProductivityModel,
    pub arms: Vec<ArmSpec>,
}

fn nonneg(out: &mut Vec<Violation>, field: &str, v: f64) {
    if !(v >= 0.0 && v.is_finite()) {
        out.push(Violation::new(
            field,
            format!("must be finite and >= 0 (got {v})"),
        ));
    }
}

fn unit(out: &mut Vec<Violation>, field: &str, v: f64) {
    if !(0.0..=1.0).contains(&v) {
        out.push(Violation::new(
            field,
            format!("must lie in [0,1] (got {v})"),
        ));
    }
}

fn valid_arm_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

impl ScenarioConfig {
    /// A small two-arm scenario over the reference groups.
    pub fn example(seed: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed,
            ticks: 50,
            cohort: CohortSpec::reference_table(3, 0.3),
            signals: SignalSpec::default(),
            tasks: TaskStreamSpec::default(),
            affinity: AffinityTable::default(),
            learning: LearningParams::default(),
            scalarization: ScalarizationWeights::default(),
            health: HealthConfig::default(),
            objective: CalibrationSpec::default(),
            productivity: ProductivityModel::default(),
            arms: vec![
                ArmSpec::new("control", false),
                ArmSpec::new("prompts", true),
            ],
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Every violation, each tagged with its dotted path.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            out.push(Violation::new(
                "schema_version",
                format!(
                    "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                    self.schema_version
                ),
            ));
        }
        if self.ticks < 1 {
            out.push(Violation::new("ticks", "ticks must be >= 1"));
        }
        out.extend(self.cohort.validate());
        if self.cohort.total_count() == 0 {
            out.push(Violation::new(
                "cohort.groups",
                "cohort must contain at least one employee",
            ));
        }
        out.extend(self.signals.validate());
        out.extend(self.tasks.validate());
        out.extend(self.affinity.validate());
        out.extend(self.learning.validate().into_iter().map(|v| Violation {
            field: format!("learning.{}", v.field),
            ..v
        }));
        out.extend(self.scalarization.validate());

        let h = &self.health;
        unit(&mut out, "health.threshold", h.threshold);
        if let HealthWeightsMode::Fixed(w) = h.weights {
            if !w.is_valid() {
                out.push(Violation::new(
                    "health.weights",
                    "need w1, w2 >= 0 and w1 + w2 > 0",
                ));
            }
        }
        for (name, w) in [
            ("health.fit.initial", h.fit.initial),
            ("health.fit.planted", h.fit.planted),
        ] {
            if !w.is_valid() {
                out.push(Violation::new(name, "need w1, w2 >= 0 and w1 + w2 > 0"));
            }
        }
        nonneg(&mut out, "health.fit.noise_stddev", h.fit.noise_stddev);
        if h.fit.window < 2 {
            out.push(Violation::new("health.fit.window", "window must be >= 2"));
        }
        if h.fit.refit_every < 1 {
            out.push(Violation::new(
                "health.fit.refit_every",
                "refit_every must be >= 1",
            ));
        }
        out.extend(h.catalog.validate());

        let o = &self.objective;
        nonneg(&mut out, "objective.lambda", o.lambda);
        unit(&mut out, "objective.workload_floor", o.workload_floor);
        unit(&mut out, "objective.ambient_floor", o.ambient_floor);

        let p = &self.productivity;
        nonneg(
            &mut out,
            "productivity.task_value_scale",
            p.task_value_scale,
        );
        nonneg(
            &mut out,
            "productivity.distraction_penalty",
            p.distraction_penalty,
        );
        nonneg(
            &mut out,
            "productivity.break_wellbeing_bonus",
            p.break_wellbeing_bonus,
        );
        nonneg(&mut out, "productivity.focus_bonus", p.focus_bonus);

        if self.arms.is_empty() {
            out.push(Violation::new("arms", "at least one arm is required"));
        }
        let mut seen = BTreeSet::new();
        for (i, arm) in self.arms.iter().enumerate() {
            if !valid_arm_name(&arm.name) {
                out.push(Violation::new(
                    format!("arms[{i}].name"),
                    format!(
                        "arm name {:?} must be non-empty ASCII letters, digits, '_' or '-'",
                        arm.name
                    ),
                ));
            }
            if !seen.insert(arm.name.as_str()) {
                out.push(Violation::new(
                    format!("arms[{i}].name"),
                    format!("duplicate arm name {:?}", arm.name),
                ));
            }
            if let Some(e) = arm.effect_size {
                nonneg(&mut out, &format!("arms[{i}].effect_size"), e);
            }
        }
        out
    }
}

/// Run-level values needed to rebuild the report from artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub schema_version: u32,
    pub seed: u64,
    pub ticks: u64,
    pub objective_preset: ObjectivePreset,
    pub distraction_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmRecord {
    pub arm: String,
    pub interventions_enabled: bool,
    /// Effect size of the prompt answering a weak physiological signal.
    pub effect_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub arm: String,
    pub tick: u64,
    pub employee: u64,
    pub physiological: f64,
    pub environmental: f64,
    pub cognitive_load: f64,
    pub emotional_state: f64,
    pub distraction: f64,
    pub engagement: f64,
    pub state: usize,
    #[serde(with = "action_label")]
    pub action: WorkAction,
    pub tasks_assigned: usize,
    pub task_value: f64,
    pub distraction_penalty: f64,
    pub health: f64,
    pub content_id: ContentId,
    pub intensity: f64,
    pub intervention_delta: f64,
    pub productivity: f64,
    pub reward: f64,
    pub challenge_level: f64,
    pub reward_frequency: f64,
    pub leaderboard_visible: bool,
}

mod action_label {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    use crate::scheduler::WorkAction;

    pub fn serialize<S: Serializer>(a: &WorkAction, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(a.label())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<WorkAction, D::Error> {
        let label = String::deserialize(d)?;
        WorkAction::from_label(&label)
            .ok_or_else(|| D::Error::custom(format!("unknown action {label:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionRecord {
    pub arm: String,
    pub tick: u64,
    pub employee: u64,
    pub content_id: ContentId,
    pub intensity: f64,
    #[serde(rename = "H")]
    pub health: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmRun {
    pub record: ArmRecord,
    pub log: Vec<LogRow>,
    pub interventions: Vec<InterventionRecord>,
    pub qtable: QTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub seed: u64,
    pub ticks: u64,
    pub employees: usize,
    pub objective_preset: ObjectivePreset,
    pub distraction_floor: f64,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub meta: RunMeta,
    pub cohort: Vec<EmployeeProfile>,
    pub arms: Vec<ArmRun>,
    pub report: RunReport,
}

fn mid_rank_percentiles(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n < 2 {
        return vec![0.5; n];
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut out = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end + 1 < n && values[idx[end + 1]] == values[idx[start]] {
            end += 1;
        }
        let pct = (start + end) as f64 / 2.0 / (n - 1) as f64;
        for &i in &idx[start..=end] {
            out[i] = pct;
        }
        start = end + 1;
    }
    out
}

fn arm_catalog(config: &ScenarioConfig, arm: &ArmSpec) -> ContentCatalog {
    match arm.effect_size {
        Some(e) => config.health.catalog.clone().with_uniform_effect(e),
        None => config.health.catalog.clone(),
    }
}

/// Runs every arm and assembles the report. Pure in `config`.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunArtifacts, EngineError> {
    let violations = config.validate();
    if !violations.is_empty() {
        return Err(EngineError::InvalidConfig(violations));
    }
    let cohort = generate_cohort(
        &config.cohort,
        RngState::derive(config.seed, &[STREAM_COHORT]),
    )?;
    let sens = config.cohort.distraction_sensitivity;
    let calibration = calibrate(
        &config.objective,
        0.5 * (sens.lo + sens.hi),
        DistractionWeights::default(),
    )?;
    let meta = RunMeta {
        schema_version: SCHEMA_VERSION,
        seed: config.seed,
        ticks: config.ticks,
        objective_preset: calibration.preset,
        distraction_floor: calibration.distraction_floor,
    };
    let arms = config
        .arms
        .iter()
        .map(|arm| run_arm(config, arm, &cohort, meta.distraction_floor))
        .collect::<Result<Vec<_>, _>>()?;
    let report = assemble_report(&meta, &cohort, &arms)?;
    Ok(RunArtifacts {
        meta,
        cohort,
        arms,
        report,
    })
}

fn run_arm(
    config: &ScenarioConfig,
    arm: &ArmSpec,
    cohort: &[EmployeeProfile],
    distraction_floor: f64,
) -> Result<ArmRun, EngineError> {
    let catalog = arm_catalog(config, arm);
    let record = ArmRecord {
        arm: arm.name.clone(),
        interventions_enabled: arm.interventions_enabled,
        effect_size: catalog.effect_size(catalog.physiological_prompt),
    };
    let model = config.productivity;
    let params = config.learning;
    let signal_seed = RngState::derive(config.seed, &[STREAM_SIGNALS]);
    let mut q =
        QTable::new(WORKPLACE_STATES, WorkAction::COUNT).map_err(|e| step_err(0, None, e))?;
    let (mut health, fit) = match config.health.weights {
        HealthWeightsMode::Fixed(w) => (AdaptiveHealthWeights::new(w, 2), None),
        HealthWeightsMode::Fit(_) => {
            let f = config.health.fit;
            (AdaptiveHealthWeights::new(f.initial, f.window), Some(f))
        }
    };

    let n = cohort.len();
    let mut productivity: Vec<f64> = cohort.iter().map(|p| p.baseline_productivity).collect();
    let mut backlog: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut samples: Vec<_> = cohort
        .iter()
        .map(|p| sample_biometrics(p, &config.signals, 0, signal_seed))
        .collect();
    let mut log = Vec::with_capacity(n * config.ticks as usize);
    let mut interventions = Vec::new();
    let mut epsilon = params.epsilon;
    let per_tick = config.tasks.per_tick as usize;

    for tick in 0..config.ticks {
        let weights = health.current();
        let tasks: Vec<TaskInstance> = generate_task_batch(
            per_tick,
            &config.tasks.category_mix,
            config.tasks.weight_range,
            config.tasks.slots,
            config.tasks.duration_range,
            tick * per_tick as u64,
            RngState::derive(config.seed, &[STREAM_TASKS, tick]),
        )
        .map_err(|e| step_err(tick, None, e))?;
        let percentiles = mid_rank_percentiles(&productivity);

        let mut distraction = Vec::with_capacity(n);
        let mut states = Vec::with_capacity(n);
        let mut actions = Vec::with_capacity(n);
        for (i, profile) in cohort.iter().enumerate() {
            let s = &samples[i];
            let d = distraction_level(
                s.cognitive_load,
                1.0 - s.environmental,
                profile.distraction_sensitivity,
            )
            .map_err(|e| step_err(tick, Some(profile.id), e))?;
            let state = workplace_state(s.cognitive_load, backlog[i].len());
            let mut rng = RngState::derive(config.seed, &[STREAM_ACTIONS, profile.id, tick]);
            let a = select_action(&q, state, epsilon, &mut rng)
                .map_err(|e| step_err(tick, Some(profile.id), e))?;
            distraction.push(d);
            states.push(state);
            actions.push(WorkAction::from_index(a).expect("table has one column per action"));
        }

        let slots = config.tasks.slots as usize;
        let instance = AssignmentInstance::from_fn(n, tasks.len(), slots, |i, j, k| {
            let task = &tasks[j];
            let focus = match actions[i] {
                WorkAction::Focus(c) => c,
                WorkAction::PromptBreak => return 0.0,
            };
            if k != task.slot as usize || backlog[i].len() >= BACKLOG_LIMIT {
                return 0.0;
            }
            let affinity = config.affinity.bonus(cohort[i].group_label, task.category);
            let boost = if focus == task.category {
                1.0 + model.focus_bonus
            } else {
                1.0
            };
            task.priority_weight * (1.0 + affinity) * boost
        });
        let schedule =
            schedule_assignments(&instance).map_err(|e: ScheduleError| step_err(tick, None, e))?;
        let mut units = vec![Vec::new(); n];
        for a in &schedule.chosen {
            units[a.employee].push(instance.weight(a.employee, a.task, a.slot));
            backlog[a.employee].push(tasks[a.task].duration_ticks);
        }

        let mut next_samples = Vec::with_capacity(n);
        for (i, profile) in cohort.iter().enumerate() {
            let id = profile.id;
            let s = samples[i];
            let d = distraction[i];
            let engagement = engagement_index(d).value();
            let excess = (d - distraction_floor).max(0.0);
            let task_units = pairwise_sum(&units[i]);
            let task_value = model.task_value_scale * task_units;
            let penalty = model.distraction_penalty * excess;
            let h = health_effectiveness(s.physiological, s.environmental, &weights)
                .map_err(|e| step_err(tick, Some(id), e))?;
            let content = if arm.interventions_enabled {
                select_content(&s, &weights, config.health.threshold, &catalog)
            } else {
                InterventionContent::NONE
            };
            let delta = apply_intervention(profile, &content, &catalog);
            if content.content_id != ContentId::None {
                interventions.push(InterventionRecord {
                    arm: arm.name.clone(),
                    tick,
                    employee: id,
                    content_id: content.content_id,
                    intensity: content.intensity,
                    health: h,
                });
            }
            productivity[i] += task_value + delta - penalty;
            let mech = gamification_params(percentiles[i], s.emotional_state)
                .map_err(|e: WellnessError| step_err(tick, Some(id), e))?;

            let rest = if actions[i] == WorkAction::PromptBreak {
                model.break_wellbeing_bonus * s.cognitive_load
            } else {
                0.0
            };
            let reward = scalarize(
                &RewardVector {
                    productivity_component: task_units - excess,
                    wellbeing_component: engagement + rest,
                },
                &config.scalarization,
            );

            let tasks_assigned = units[i].len();
            for left in backlog[i].iter_mut() {
                *left -= 1;
            }
            backlog[i].retain(|&left| left > 0);
            let next = sample_biometrics(profile, &config.signals, tick + 1, signal_seed);
            let s_next = workplace_state(next.cognitive_load, backlog[i].len());
            q_update(
                &mut q,
                states[i],
                actions[i].index(),
                reward,
                s_next,
                &params,
            )
            .map_err(|e| step_err(tick, Some(id), e))?;
            next_samples.push(next);

            log.push(LogRow {
                arm: arm.name.clone(),
                tick,
                employee: id,
                physiological: s.physiological,
                environmental: s.environmental,
                cognitive_load: s.cognitive_load,
                emotional_state: s.emotional_state,
                distraction: d,
                engagement,
                state: states[i],
                action: actions[i],
                tasks_assigned,
                task_value,
                distraction_penalty: penalty,
                health: h,
                content_id: content.content_id,
                intensity: content.intensity,
                intervention_delta: delta,
                productivity: productivity[i],
                reward,
                challenge_level: mech.challenge_level,
                reward_frequency: mech.reward_frequency,
                leaderboard_visible: mech.leaderboard_visibility,
            });
        }

        if let Some(f) = fit {
            for (i, profile) in cohort.iter().enumerate() {
                let s = &samples[i];
                let mut rng = RngState::derive(config.seed, &[STREAM_HEALTH, profile.id, tick]);
                let observed = f.planted.w1 * s.physiological
                    + f.planted.w2 * s.environmental
                    + f.noise_stddev * rng.next_gaussian();
                health.observe(HealthObservation {
                    physiological: s.physiological,
                    environmental: s.environmental,
                    effectiveness: observed,
                });
            }
            if (tick + 1) % f.refit_every == 0 {
                // A degenerate window keeps the previous weights.
                let _ = health.refit();
            }
        }
        samples = next_samples;
        epsilon *= params.epsilon_decay;
    }

    Ok(ArmRun {
        record,
        log,
        interventions,
        qtable: q,
    })
}

/// `1 + 4·(½·(mean sentiment + 1)/2 + ½·mean engagement)`, on `[1, 5]`.
pub fn satisfaction_rating(mean_sentiment: f64, mean_engagement: f64) -> f64 {
    let mood = ((mean_sentiment + 1.0) / 2.0).clamp(0.0, 1.0);
    let engaged = mean_engagement.clamp(0.0, 1.0);
    1.0 + 4.0 * (0.5 * mood + 0.5 * engaged)
}

fn employee_outcomes(
    cohort: &[EmployeeProfile],
    ticks: u64,
    arm: &str,
    log: &[&LogRow],
) -> Result<Vec<EmployeeOutcome>, EngineError> {
    let expected = cohort.len() * ticks as usize;
    if log.len() != expected {
        return Err(artifact_err(
            "log.csv",
            format!(
                "arm {arm} has {} rows, expected ticks × employees = {expected}",
                log.len()
            ),
        ));
    }
    let index: BTreeMap<u64, usize> = cohort.iter().enumerate().map(|(i, p)| (p.id, i)).collect();
    let mut health = vec![Vec::with_capacity(ticks as usize); cohort.len()];
    let mut mood = health.clone();
    let mut engaged = health.clone();
    let mut last = vec![None; cohort.len()];
    for row in log {
        let i = *index
            .get(&row.employee)
            .ok_or_else(|| artifact_err("log.csv", format!("unknown employee {}", row.employee)))?;
        health[i].push(row.health);
        mood[i].push(row.emotional_state);
        engaged[i].push(row.engagement);
        last[i] = Some(row.productivity);
    }
    cohort
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let k = health[i].len() as f64;
            let final_productivity = last[i]
                .ok_or_else(|| artifact_err("log.csv", format!("no rows for employee {}", p.id)))?;
            Ok(EmployeeOutcome {
                employee_id: p.id,
                group_label: p.group_label,
                baseline_productivity: p.baseline_productivity,
                final_productivity,
                mean_health: pairwise_sum(&health[i]) / k,
                satisfaction: satisfaction_rating(
                    pairwise_sum(&mood[i]) / k,
                    pairwise_sum(&engaged[i]) / k,
                ),
            })
        })
        .collect()
}

fn assemble_report_from(
    meta: &RunMeta,
    cohort: &[EmployeeProfile],
    records: &[ArmRecord],
    logs: &[Vec<&LogRow>],
    intervention_counts: &[usize],
) -> Result<RunReport, EngineError> {
    let outcomes = records
        .iter()
        .zip(logs)
        .zip(intervention_counts)
        .map(|((r, log), &count)| {
            Ok(ArmOutcomes {
                name: r.arm.clone(),
                interventions_enabled: r.interventions_enabled,
                effect_size: r.effect_size,
                interventions: count,
                employees: employee_outcomes(cohort, meta.ticks, &r.arm, log)?,
            })
        })
        .collect::<Result<Vec<_>, EngineError>>()?;
    Ok(RunReport {
        schema_version: meta.schema_version,
        seed: meta.seed,
        ticks: meta.ticks,
        employees: cohort.len(),
        objective_preset: meta.objective_preset,
        distraction_floor: meta.distraction_floor,
        metrics: build_report(&outcomes)?,
    })
}

fn assemble_report(
    meta: &RunMeta,
    cohort: &[EmployeeProfile],
    arms: &[ArmRun],
) -> Result<RunReport, EngineError> {
    let records: Vec<ArmRecord> = arms.iter().map(|a| a.record.clone()).collect();
    let logs: Vec<Vec<&LogRow>> = arms.iter().map(|a| a.log.iter().collect()).collect();
    let counts: Vec<usize> = arms.iter().map(|a| a.interventions.len()).collect();
    assemble_report_from(meta, cohort, &records, &logs, &counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmBrief {
    pub name: String,
    pub interventions_enabled: bool,
    pub effect_size: f64,
    pub employees: usize,
    pub interventions: usize,
    pub mean_final_productivity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmComparison {
    pub arms: Vec<ArmBrief>,
    pub anova: AnovaResult,
    pub critical_1pct: Option<f64>,
}

/// Per-arm means and an ANOVA over final per-employee productivity.
pub fn compare_arms(artifacts: &RunArtifacts) -> Result<ArmComparison, EngineError> {
    if artifacts.arms.len() < 2 {
        return Err(EngineError::TooFewArms(artifacts.arms.len()));
    }
    let n = artifacts.cohort.len();
    let finals: Vec<Vec<f64>> = artifacts
        .arms
        .iter()
        .map(|a| {
            a.log[a.log.len() - n..]
                .iter()
                .map(|r| r.productivity)
                .collect()
        })
        .collect();
    let anova = anova_oneway(&finals)?;
    let arms = artifacts
        .arms
        .iter()
        .zip(&finals)
        .map(|(a, f)| ArmBrief {
            name: a.record.arm.clone(),
            interventions_enabled: a.record.interventions_enabled,
            effect_size: a.record.effect_size,
            employees: f.len(),
            interventions: a.interventions.len(),
            mean_final_productivity: pairwise_sum(f) / f.len() as f64,
        })
        .collect();
    Ok(ArmComparison {
        arms,
        critical_1pct: f_critical_1pct(anova.df_between, anova.df_within),
        anova,
    })
}

pub const REPORT_FILE: &str = "report.json";
pub const LOG_FILE: &str = "log.csv";
pub const INTERVENTIONS_FILE: &str = "interventions.csv";
pub const COHORT_FILE: &str = "cohort.csv";
pub const ARMS_FILE: &str = "arms.csv";
pub const RUN_FILE: &str = "run.csv";
pub const GROUPS_FILE: &str = "groups.csv";

pub fn qtable_file(arm: &str) -> String {
    format!("qtable_{arm}.csv")
}

/// Per-group table in the reference layout plus simulated columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCsvRow {
    pub group: GroupLabel,
    pub age_range: crate::domain::AgeRange,
    pub gender: crate::domain::Gender,
    pub productivity_score: f64,
    pub arm: String,
    pub employees: usize,
    pub simulated_baseline: f64,
    pub simulated_final: f64,
    pub productivity_change_pct: f64,
    pub satisfaction: f64,
}

pub fn group_rows(report: &RunReport) -> Vec<GroupCsvRow> {
    report
        .metrics
        .arms
        .iter()
        .flat_map(|arm| {
            arm.groups.iter().map(move |g| GroupCsvRow {
                group: g.group,
                age_range: g.age_range,
                gender: g.gender,
                productivity_score: g.reference_productivity,
                arm: arm.name.clone(),
                employees: g.employees,
                simulated_baseline: g.mean_baseline,
                simulated_final: g.mean_final,
                productivity_change_pct: g.productivity_change_pct,
                satisfaction: g.satisfaction,
            })
        })
        .collect()
}

fn csv_bytes<T: Serialize>(
    file: &str,
    rows: impl IntoIterator<Item = T>,
) -> Result<Vec<u8>, EngineError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| artifact_err(file, e))?;
    }
    w.into_inner().map_err(|e| artifact_err(file, e.error()))
}

/// Pretty JSON with a trailing newline.
pub fn report_json(report: &RunReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

/// Every artifact file as bytes, keyed by file name. `report.json` sorts last
/// when written in [`artifact_write_order`].
pub fn render_artifacts(
    artifacts: &RunArtifacts,
) -> Result<BTreeMap<String, Vec<u8>>, EngineError> {
    let mut files = BTreeMap::new();
    files.insert(
        RUN_FILE.to_string(),
        csv_bytes(RUN_FILE, [&artifacts.meta])?,
    );
    let mut cohort = Vec::new();
    write_cohort_csv(&artifacts.cohort, &mut cohort).map_err(|e| artifact_err(COHORT_FILE, e))?;
    files.insert(COHORT_FILE.to_string(), cohort);
    files.insert(
        ARMS_FILE.to_string(),
        csv_bytes(ARMS_FILE, artifacts.arms.iter().map(|a| &a.record))?,
    );
    files.insert(
        LOG_FILE.to_string(),
        csv_bytes(LOG_FILE, artifacts.arms.iter().flat_map(|a| a.log.iter()))?,
    );
    files.insert(
        INTERVENTIONS_FILE.to_string(),
        interventions_csv(artifacts.arms.iter().flat_map(|a| a.interventions.iter()))?,
    );
    let labels = WorkAction::labels();
    for arm in &artifacts.arms {
        let name = qtable_file(&arm.record.arm);
        let mut buf = Vec::new();
        arm.qtable
            .write_csv_labeled(&mut buf, &labels)
            .map_err(|e| artifact_err(&name, e))?;
        files.insert(name, buf);
    }
    files.insert(
        GROUPS_FILE.to_string(),
        csv_bytes(GROUPS_FILE, group_rows(&artifacts.report))?,
    );
    files.insert(
        REPORT_FILE.to_string(),
        report_json(&artifacts.report).into_bytes(),
    );
    Ok(files)
}

/// The intervention log keeps its header even when empty.
fn interventions_csv<'a>(
    rows: impl Iterator<Item = &'a InterventionRecord>,
) -> Result<Vec<u8>, EngineError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(["arm", "tick", "employee", "content_id", "intensity", "H"])
        .map_err(|e| artifact_err(INTERVENTIONS_FILE, e))?;
    for row in rows {
        w.serialize(row)
            .map_err(|e| artifact_err(INTERVENTIONS_FILE, e))?;
    }
    w.into_inner()
        .map_err(|e| artifact_err(INTERVENTIONS_FILE, e.error()))
}

/// File names with the report last, so a reader never sees a report without its data.
pub fn artifact_write_order(files: &BTreeMap<String, Vec<u8>>) -> Vec<&str> {
    let mut names: Vec<&str> = files
        .keys()
        .map(String::as_str)
        .filter(|n| *n != REPORT_FILE)
        .collect();
    if files.contains_key(REPORT_FILE) {
        names.push(REPORT_FILE);
    }
    names
}

/// Writes every artifact into an existing directory.
pub fn write_artifacts(artifacts: &RunArtifacts, dir: &Path) -> Result<(), EngineError> {
    let files = render_artifacts(artifacts)?;
    for name in artifact_write_order(&files) {
        let path = dir.join(name);
        fs::write(&path, &files[name]).map_err(|source| EngineError::Io { path, source })?;
    }
    Ok(())
}

/// Artifacts as read back from a run directory.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredArtifacts {
    pub meta: RunMeta,
    pub cohort: Vec<EmployeeProfile>,
    pub arms: Vec<ArmRecord>,
    pub log: Vec<LogRow>,
    pub interventions: Vec<InterventionRecord>,
    pub qtables: Vec<(String, QTable)>,
}

fn open(dir: &Path, name: &str) -> Result<fs::File, EngineError> {
    let path = dir.join(name);
    fs::File::open(&path).map_err(|source| EngineError::Io { path, source })
}

fn read_rows<T: serde::de::DeserializeOwned>(
    dir: &Path,
    name: &str,
) -> Result<Vec<T>, EngineError> {
    csv::Reader::from_reader(open(dir, name)?)
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| artifact_err(name, e))
}

pub fn read_artifacts(dir: &Path) -> Result<StoredArtifacts, EngineError> {
    let meta = read_rows::<RunMeta>(dir, RUN_FILE)?
        .into_iter()
        .next()
        .ok_or_else(|| artifact_err(RUN_FILE, "no run row"))?;
    let cohort =
        read_cohort_csv(open(dir, COHORT_FILE)?).map_err(|e| artifact_err(COHORT_FILE, e))?;
    let arms: Vec<ArmRecord> = read_rows(dir, ARMS_FILE)?;
    if arms.is_empty() {
        return Err(artifact_err(ARMS_FILE, "no arms"));
    }
    let log = read_rows(dir, LOG_FILE)?;
    let interventions = read_rows(dir, INTERVENTIONS_FILE)?;
    let qtables = arms
        .iter()
        .map(|a| {
            let name = qtable_file(&a.arm);
            QTable::read_csv(open(dir, &name)?)
                .map(|q| (a.arm.clone(), q))
                .map_err(|e| artifact_err(&name, e))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(StoredArtifacts {
        meta,
        cohort,
        arms,
        log,
        interventions,
        qtables,
    })
}

impl StoredArtifacts {
    /// Recomputes the report exactly as the run did.
    pub fn report(&self) -> Result<RunReport, EngineError> {
        let logs: Vec<Vec<&LogRow>> = self
            .arms
            .iter()
            .map(|a| self.log.iter().filter(|r| r.arm == a.arm).collect())
            .collect();
        let counts: Vec<usize> = self
            .arms
            .iter()
            .map(|a| self.interventions.iter().filter(|r| r.arm == a.arm).count())
            .collect();
        assemble_report_from(&self.meta, &self.cohort, &self.arms, &logs, &counts)
    }
}

pub fn rebuild_report(dir: &Path) -> Result<RunReport, EngineError> {
    read_artifacts(dir)?.report()
}
