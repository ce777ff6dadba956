//! Deterministic synthetic data: cohorts, biometric streams and task arrivals.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    in_closed, BiometricSample, EmployeeProfile, GroupLabel, RngState, TaskCategory, TaskInstance,
    Violation,
};

/// Rejection attempts before a truncated-normal draw falls back to clamping.
pub const TRUNCATION_ATTEMPTS: usize = 100;
pub const DEFAULT_PRODUCTIVITY_STDDEV: f64 = 0.3;
pub const PRODUCTIVITY_MIN: f64 = 1.0;
pub const PRODUCTIVITY_MAX: f64 = 5.0;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid specification: {}", join_violations(.0))]
    InvalidSpec(Vec<Violation>),
    #[error("malformed category mix: {0}")]
    InvalidMix(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub(crate) fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// Closed interval `[lo, hi]`, serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct UniformRange {
    pub lo: f64,
    pub hi: f64,
}

impl UniformRange {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn is_valid(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi
    }

    pub fn sample(&self, rng: &mut RngState) -> f64 {
        let u = rng.next_f64();
        if self.lo == self.hi {
            self.lo
        } else {
            self.lo + (self.hi - self.lo) * u
        }
    }
}

impl From<[f64; 2]> for UniformRange {
    fn from(v: [f64; 2]) -> Self {
        Self { lo: v[0], hi: v[1] }
    }
}

impl From<UniformRange> for [f64; 2] {
    fn from(r: UniformRange) -> Self {
        [r.lo, r.hi]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortEntry {
    pub group_label: GroupLabel,
    pub count: u32,
    /// Falls back to the group's reference productivity when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_mean_productivity: Option<f64>,
    #[serde(default = "default_stddev")]
    pub productivity_stddev: f64,
}

fn default_stddev() -> f64 {
    DEFAULT_PRODUCTIVITY_STDDEV
}

impl CohortEntry {
    pub fn new(group_label: GroupLabel, count: u32, productivity_stddev: f64) -> Self {
        Self {
            group_label,
            count,
            target_mean_productivity: None,
            productivity_stddev,
        }
    }

    pub fn target_mean(&self) -> f64 {
        self.target_mean_productivity
            .unwrap_or_else(|| self.group_label.reference_productivity())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortSpec {
    pub groups: Vec<CohortEntry>,
    #[serde(default = "default_sensitivity")]
    pub distraction_sensitivity: UniformRange,
    #[serde(default = "default_responsiveness")]
    pub intervention_responsiveness: UniformRange,
}

fn default_sensitivity() -> UniformRange {
    UniformRange::new(0.5, 1.5)
}

fn default_responsiveness() -> UniformRange {
    UniformRange::new(0.0, 1.0)
}

impl CohortSpec {
    pub fn new(groups: Vec<CohortEntry>) -> Self {
        Self {
            groups,
            distraction_sensitivity: default_sensitivity(),
            intervention_responsiveness: default_responsiveness(),
        }
    }

    /// One entry per reference group, each with the same count and spread.
    pub fn reference_table(count: u32, productivity_stddev: f64) -> Self {
        Self::new(
            GroupLabel::ALL
                .iter()
                .map(|&g| CohortEntry::new(g, count, productivity_stddev))
                .collect(),
        )
    }

    pub fn total_count(&self) -> u64 {
        self.groups.iter().map(|g| u64::from(g.count)).sum()
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut seen = BTreeMap::new();
        for (i, entry) in self.groups.iter().enumerate() {
            if let Some(prev) = seen.insert(entry.group_label, i) {
                out.push(Violation::new(
                    format!("cohort.groups[{i}].group_label"),
                    format!("group {} already listed at index {prev}", entry.group_label),
                ));
            }
            let mean = entry.target_mean();
            if !in_closed(mean, PRODUCTIVITY_MIN, PRODUCTIVITY_MAX) {
                out.push(Violation::new(
                    format!("cohort.groups[{i}].target_mean_productivity"),
                    format!("target_mean_productivity out of [1,5] (got {mean})"),
                ));
            }
            let sd = entry.productivity_stddev;
            if !(sd >= 0.0 && sd.is_finite()) {
                out.push(Violation::new(
                    format!("cohort.groups[{i}].productivity_stddev"),
                    format!("productivity_stddev must be finite and >= 0 (got {sd})"),
                ));
            }
        }
        let sens = self.distraction_sensitivity;
        if !sens.is_valid() || sens.lo < 0.0 {
            out.push(Violation::new(
                "cohort.distraction_sensitivity",
                format!("expected 0 <= lo <= hi (got [{}, {}])", sens.lo, sens.hi),
            ));
        }
        let resp = self.intervention_responsiveness;
        if !resp.is_valid() || resp.lo < 0.0 || resp.hi > 1.0 {
            out.push(Violation::new(
                "cohort.intervention_responsiveness",
                format!(
                    "expected 0 <= lo <= hi <= 1 (got [{}, {}])",
                    resp.lo, resp.hi
                ),
            ));
        }
        out
    }
}

/// Normal draw truncated to `[lo, hi]` by rejection, clamping after
/// [`TRUNCATION_ATTEMPTS`] misses.
pub fn truncated_normal(rng: &mut RngState, mean: f64, stddev: f64, lo: f64, hi: f64) -> f64 {
    let mut x = mean;
    for _ in 0..TRUNCATION_ATTEMPTS {
        x = mean + stddev * rng.next_gaussian();
        if x >= lo && x <= hi {
            return x;
        }
    }
    x.clamp(lo, hi)
}

/// Generates `Σ count` profiles, numbered consecutively in spec order.
///
/// Each employee draws from its own sub-stream derived from `(seed, id)`, so the
/// result for one employee does not depend on the rest of the cohort.
pub fn generate_cohort(
    spec: &CohortSpec,
    seed: RngState,
) -> Result<Vec<EmployeeProfile>, SynthError> {
    let violations = spec.validate();
    if !violations.is_empty() {
        return Err(SynthError::InvalidSpec(violations));
    }
    let mut out = Vec::with_capacity(spec.total_count() as usize);
    let mut id = 0u64;
    for entry in &spec.groups {
        for _ in 0..entry.count {
            let mut rng = RngState::derive(seed.state, &[id]);
            let baseline = truncated_normal(
                &mut rng,
                entry.target_mean(),
                entry.productivity_stddev,
                PRODUCTIVITY_MIN,
                PRODUCTIVITY_MAX,
            );
            let sensitivity = spec.distraction_sensitivity.sample(&mut rng);
            let responsiveness = spec.intervention_responsiveness.sample(&mut rng);
            out.push(EmployeeProfile::for_group(
                id,
                entry.group_label,
                baseline,
                sensitivity,
                responsiveness,
            ));
            id += 1;
        }
    }
    Ok(out)
}

pub fn write_cohort_csv<W: Write>(profiles: &[EmployeeProfile], w: W) -> Result<(), SynthError> {
    let mut writer = csv::Writer::from_writer(w);
    for p in profiles {
        writer.serialize(p)?;
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_cohort_csv<R: Read>(r: R) -> Result<Vec<EmployeeProfile>, SynthError> {
    let mut reader = csv::Reader::from_reader(r);
    reader
        .deserialize()
        .collect::<Result<Vec<_>, _>>()
        .map_err(SynthError::from)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalShape {
    pub mean: f64,
    pub amplitude: f64,
}

/// Diurnal sinusoid plus gaussian noise for each biometric channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSpec {
    pub physiological: SignalShape,
    pub environmental: SignalShape,
    pub cognitive_load: SignalShape,
    pub emotional_state: SignalShape,
    pub noise_stddev: f64,
    pub diurnal_period_ticks: u64,
}

impl Default for SignalSpec {
    fn default() -> Self {
        Self {
            physiological: SignalShape {
                mean: 0.6,
                amplitude: 0.15,
            },
            environmental: SignalShape {
                mean: 0.55,
                amplitude: 0.1,
            },
            cognitive_load: SignalShape {
                mean: 0.5,
                amplitude: 0.2,
            },
            emotional_state: SignalShape {
                mean: 0.1,
                amplitude: 0.3,
            },
            noise_stddev: 0.08,
            diurnal_period_ticks: 32,
        }
    }
}

impl SignalSpec {
    /// Every channel set to the same constant shape.
    pub fn uniform(shape: SignalShape, noise_stddev: f64, diurnal_period_ticks: u64) -> Self {
        Self {
            physiological: shape,
            environmental: shape,
            cognitive_load: shape,
            emotional_state: shape,
            noise_stddev,
            diurnal_period_ticks,
        }
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (name, s) in [
            ("physiological", self.physiological),
            ("environmental", self.environmental),
            ("cognitive_load", self.cognitive_load),
            ("emotional_state", self.emotional_state),
        ] {
            if !s.mean.is_finite() || !s.amplitude.is_finite() {
                out.push(Violation::new(
                    format!("signals.{name}"),
                    "mean and amplitude must be finite",
                ));
            }
        }
        if !(self.noise_stddev >= 0.0 && self.noise_stddev.is_finite()) {
            out.push(Violation::new(
                "signals.noise_stddev",
                format!(
                    "noise_stddev must be finite and >= 0 (got {})",
                    self.noise_stddev
                ),
            ));
        }
        if self.diurnal_period_ticks < 1 {
            out.push(Violation::new(
                "signals.diurnal_period_ticks",
                "diurnal_period_ticks must be >= 1",
            ));
        }
        out
    }
}

fn clamp_signal(v: f64, lo: f64, hi: f64) -> f64 {
    if v.is_nan() {
        lo
    } else {
        v.clamp(lo, hi)
    }
}

/// One biometric observation; a pure function of `(profile.id, tick, seed)`.
pub fn sample_biometrics(
    profile: &EmployeeProfile,
    spec: &SignalSpec,
    tick: u64,
    seed: RngState,
) -> BiometricSample {
    let mut rng = RngState::derive(seed.state, &[profile.id, tick]);
    let period = spec.diurnal_period_ticks.max(1) as f64;
    let phase = (std::f64::consts::TAU * tick as f64 / period).sin();
    let mut channel = |shape: SignalShape| {
        shape.mean + shape.amplitude * phase + spec.noise_stddev * rng.next_gaussian()
    };
    let physiological = clamp_signal(channel(spec.physiological), 0.0, 1.0);
    let environmental = clamp_signal(channel(spec.environmental), 0.0, 1.0);
    let cognitive_load = clamp_signal(channel(spec.cognitive_load), 0.0, 1.0);
    let emotional_state = clamp_signal(channel(spec.emotional_state), -1.0, 1.0);
    BiometricSample {
        employee_id: profile.id,
        tick,
        physiological,
        environmental,
        cognitive_load,
        emotional_state,
    }
}

/// Task arrival distribution used by the simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskStreamSpec {
    pub per_tick: u32,
    pub category_mix: BTreeMap<TaskCategory, f64>,
    pub weight_range: UniformRange,
    pub slots: u32,
    #[serde(default = "default_duration")]
    pub duration_range: [u32; 2],
}

fn default_duration() -> [u32; 2] {
    [1, 1]
}

impl Default for TaskStreamSpec {
    fn default() -> Self {
        Self {
            per_tick: 6,
            category_mix: TaskCategory::ALL.iter().map(|&c| (c, 1.0 / 7.0)).collect(),
            weight_range: UniformRange::new(0.5, 2.0),
            slots: 2,
            duration_range: default_duration(),
        }
    }
}

impl TaskStreamSpec {
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if let Err(e) = check_mix(&self.category_mix) {
            out.push(Violation::new("tasks.category_mix", e));
        }
        let w = self.weight_range;
        if !w.is_valid() || w.lo < 0.0 {
            out.push(Violation::new(
                "tasks.weight_range",
                format!("expected 0 <= lo <= hi (got [{}, {}])", w.lo, w.hi),
            ));
        }
        if self.slots < 1 {
            out.push(Violation::new("tasks.slots", "slots must be >= 1"));
        }
        let [dlo, dhi] = self.duration_range;
        if dlo < 1 || dlo > dhi {
            out.push(Violation::new(
                "tasks.duration_range",
                format!("expected 1 <= lo <= hi (got [{dlo}, {dhi}])"),
            ));
        }
        out
    }
}

const MIX_TOLERANCE: f64 = 1e-9;

fn check_mix(mix: &BTreeMap<TaskCategory, f64>) -> Result<(), String> {
    if mix.is_empty() {
        return Err("probability vector is empty".into());
    }
    if let Some((c, p)) = mix.iter().find(|(_, p)| !(**p >= 0.0 && p.is_finite())) {
        return Err(format!(
            "probability for {c} must be finite and >= 0 (got {p})"
        ));
    }
    let total: f64 = mix.values().sum();
    if (total - 1.0).abs() > MIX_TOLERANCE {
        return Err(format!("probabilities sum to {total}, expected 1"));
    }
    Ok(())
}

/// `n` tasks with uniform weights, multinomial categories and uniform slots,
/// each lasting one tick.
pub fn generate_tasks(
    n: usize,
    category_mix: &BTreeMap<TaskCategory, f64>,
    weight_range: UniformRange,
    slots: u32,
    seed: RngState,
) -> Result<Vec<TaskInstance>, SynthError> {
    generate_task_batch(n, category_mix, weight_range, slots, [1, 1], 0, seed)
}

/// As [`generate_tasks`], with a duration range and an id offset.
pub fn generate_task_batch(
    n: usize,
    category_mix: &BTreeMap<TaskCategory, f64>,
    weight_range: UniformRange,
    slots: u32,
    duration_range: [u32; 2],
    first_id: u64,
    seed: RngState,
) -> Result<Vec<TaskInstance>, SynthError> {
    check_mix(category_mix).map_err(SynthError::InvalidMix)?;
    if !weight_range.is_valid() || weight_range.lo < 0.0 {
        return Err(SynthError::InvalidSpec(vec![Violation::new(
            "weight_range",
            format!(
                "expected 0 <= lo <= hi (got [{}, {}])",
                weight_range.lo, weight_range.hi
            ),
        )]));
    }
    if n > 0 && slots == 0 {
        return Err(SynthError::InvalidSpec(vec![Violation::new(
            "slots",
            "slots must be >= 1",
        )]));
    }
    let [dlo, dhi] = duration_range;
    if dlo < 1 || dlo > dhi {
        return Err(SynthError::InvalidSpec(vec![Violation::new(
            "duration_range",
            format!("expected 1 <= lo <= hi (got [{dlo}, {dhi}])"),
        )]));
    }

    let categories: Vec<(TaskCategory, f64)> = mix_cdf(category_mix);
    let mut rng = seed;
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let u = rng.next_f64();
        let category = categories
            .iter()
            .find(|(_, cum)| u < *cum)
            .or_else(|| categories.iter().rev().find(|(_, cum)| *cum > 0.0))
            .map(|(c, _)| *c)
            .expect("validated mix has positive mass");
        let priority_weight = weight_range.sample(&mut rng);
        let slot = rng.below(u64::from(slots)) as u32;
        let duration_ticks = dlo + rng.below(u64::from(dhi - dlo) + 1) as u32;
        out.push(TaskInstance {
            task_id: first_id + j as u64,
            category,
            priority_weight,
            duration_ticks,
            slot,
        });
    }
    Ok(out)
}

fn mix_cdf(mix: &BTreeMap<TaskCategory, f64>) -> Vec<(TaskCategory, f64)> {
    let mut cum = 0.0;
    mix.iter()
        .map(|(&c, &p)| {
            cum += p;
            (c, cum)
        })
        .collect()
}

/// Per-group multiplicative bonus on task value, keyed by category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AffinityTable(pub BTreeMap<GroupLabel, BTreeMap<TaskCategory, f64>>);

impl AffinityTable {
    pub fn bonus(&self, group: GroupLabel, category: TaskCategory) -> f64 {
        self.0
            .get(&group)
            .and_then(|m| m.get(&category))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (g, row) in &self.0 {
            for (c, v) in row {
                if !(v.is_finite() && *v >= -1.0) {
                    out.push(Violation::new(
                        format!("affinity.{g}.{c}"),
                        format!("affinity bonus must be finite and >= -1 (got {v})"),
                    ));
                }
            }
        }
        out
    }
}

impl Default for AffinityTable {
    /// Encodes the qualitative key findings of each reference group.
    fn default() -> Self {
        use GroupLabel as G;
        use TaskCategory as T;
        let rows: Vec<(GroupLabel, Vec<(TaskCategory, f64)>)> = vec![
            (G::A, vec![(T::Collaborative, 0.2)]),
            (G::B, vec![(T::Creative, 0.2)]),
            (G::C, vec![(T::Technical, 0.2)]),
            (G::D, vec![(T::Strategic, 0.2)]),
            (G::E, vec![(T::Independent, 0.2), (T::Collaborative, -0.1)]),
            (G::F, T::ALL.iter().map(|&c| (c, 0.05)).collect()),
            (G::G, vec![(T::Technical, -0.05)]),
            (G::H, vec![(T::Mentoring, 0.2)]),
            (G::I, vec![(T::Technical, 0.1), (T::Creative, -0.1)]),
            (G::J, vec![(T::Advisory, 0.2)]),
        ];
        Self(
            rows.into_iter()
                .map(|(g, r)| (g, r.into_iter().collect()))
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::validate_profile;
    use proptest::prelude::*;

    fn one_group(g: GroupLabel, count: u32, sd: f64) -> CohortSpec {
        CohortSpec::new(vec![CohortEntry::new(g, count, sd)])
    }

    fn mean(v: impl Iterator<Item = f64>) -> f64 {
        let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
        s / n as f64
    }

    #[test]
    fn group_a_mean_matches_reference() {
        let cohort =
            generate_cohort(&one_group(GroupLabel::A, 1000, 0.3), RngState::new(11)).unwrap();
        assert_eq!(cohort.len(), 1000);
        let m = mean(cohort.iter().map(|p| p.baseline_productivity));
        assert!((m - 4.2).abs() <= 0.05, "mean {m}");
        assert!(cohort.iter().all(|p| validate_profile(p).is_empty()));
    }

    #[test]
    fn zero_count_gives_empty_cohort() {
        let cohort = generate_cohort(&one_group(GroupLabel::C, 0, 0.3), RngState::new(1)).unwrap();
        assert!(cohort.is_empty());
    }

    #[test]
    fn zero_stddev_is_exact() {
        let cohort =
            generate_cohort(&one_group(GroupLabel::B, 1000, 0.0), RngState::new(3)).unwrap();
        assert!(cohort.iter().all(|p| p.baseline_productivity == 4.5));
    }

    #[test]
    fn zero_stddev_reproduces_every_reference_mean() {
        let cohort =
            generate_cohort(&CohortSpec::reference_table(5, 0.0), RngState::new(3)).unwrap();
        for g in GroupLabel::ALL {
            let m = mean(
                cohort
                    .iter()
                    .filter(|p| p.group_label == g)
                    .map(|p| p.baseline_productivity),
            );
            assert_eq!(m, g.reference_productivity());
        }
    }

    #[test]
    fn duplicate_group_is_rejected() {
        let spec = CohortSpec::new(vec![
            CohortEntry::new(GroupLabel::A, 1, 0.3),
            CohortEntry::new(GroupLabel::A, 2, 0.3),
        ]);
        let err = generate_cohort(&spec, RngState::new(0)).unwrap_err();
        assert!(err.to_string().contains("already listed"));
    }

    #[test]
    fn bad_mean_and_stddev_are_rejected() {
        let mut spec = one_group(GroupLabel::A, 1, -0.1);
        spec.groups[0].target_mean_productivity = Some(7.0);
        assert_eq!(spec.validate().len(), 2);
    }

    #[test]
    fn cohort_regeneration_is_identical() {
        let spec = CohortSpec::reference_table(20, 0.3);
        let a = generate_cohort(&spec, RngState::new(99)).unwrap();
        let b = generate_cohort(&spec, RngState::new(99)).unwrap();
        let mut ca = Vec::new();
        let mut cb = Vec::new();
        write_cohort_csv(&a, &mut ca).unwrap();
        write_cohort_csv(&b, &mut cb).unwrap();
        assert_eq!(ca, cb);
        assert_eq!(read_cohort_csv(ca.as_slice()).unwrap(), a);
    }

    #[test]
    fn cohort_csv_header_matches_json_fields() {
        let cohort = generate_cohort(&one_group(GroupLabel::D, 1, 0.3), RngState::new(0)).unwrap();
        let mut buf = Vec::new();
        write_cohort_csv(&cohort, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "id,group_label,age_range,gender,baseline_productivity,distraction_sensitivity,intervention_responsiveness"
        );
        assert!(text
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("0,D,26-35,female,"));
    }

    fn profile() -> EmployeeProfile {
        EmployeeProfile::for_group(4, GroupLabel::F, 4.0, 1.0, 0.5)
    }

    #[test]
    fn constant_signal() {
        let spec = SignalSpec::uniform(
            SignalShape {
                mean: 0.5,
                amplitude: 0.0,
            },
            0.0,
            10,
        );
        for tick in 0..20 {
            let s = sample_biometrics(&profile(), &spec, tick, RngState::new(1));
            assert_eq!(
                (
                    s.physiological,
                    s.environmental,
                    s.cognitive_load,
                    s.emotional_state
                ),
                (0.5, 0.5, 0.5, 0.5)
            );
        }
    }

    #[test]
    fn quarter_period_hits_the_peak() {
        let spec = SignalSpec::uniform(
            SignalShape {
                mean: 0.5,
                amplitude: 0.2,
            },
            0.0,
            4,
        );
        let s = sample_biometrics(&profile(), &spec, 1, RngState::new(1));
        assert!((s.physiological - 0.7).abs() < 1e-12);
    }

    #[test]
    fn peak_is_clamped() {
        let spec = SignalSpec::uniform(
            SignalShape {
                mean: 0.95,
                amplitude: 0.2,
            },
            0.0,
            4,
        );
        let s = sample_biometrics(&profile(), &spec, 1, RngState::new(1));
        assert_eq!(s.physiological, 1.0);
        assert_eq!(s.cognitive_load, 1.0);
    }

    #[test]
    fn biometrics_depend_only_on_id_tick_seed() {
        let spec = SignalSpec::default();
        let a = sample_biometrics(&profile(), &spec, 17, RngState::new(5));
        let b = sample_biometrics(&profile(), &spec, 17, RngState::new(5));
        assert_eq!(a, b);
        let c = sample_biometrics(&profile(), &spec, 18, RngState::new(5));
        assert_ne!(a, c);
    }

    #[test]
    fn biometric_range_fuzz() {
        // 10^5 draws across extreme shapes.
        let mut meta = RngState::new(2024);
        for i in 0..25_000u64 {
            let mut shape = || SignalShape {
                mean: meta.next_f64() * 4.0 - 2.0,
                amplitude: meta.next_f64() * 3.0,
            };
            let spec = SignalSpec {
                physiological: shape(),
                environmental: shape(),
                cognitive_load: shape(),
                emotional_state: shape(),
                noise_stddev: meta.next_f64() * 2.0,
                diurnal_period_ticks: 1 + meta.below(50),
            };
            for tick in 0..4 {
                let s = sample_biometrics(&profile(), &spec, i * 4 + tick, RngState::new(i));
                assert!(s.validate().is_empty(), "{s:?}");
            }
        }
    }

    fn two_way_mix() -> BTreeMap<TaskCategory, f64> {
        [
            (TaskCategory::Creative, 0.5),
            (TaskCategory::Technical, 0.5),
        ]
        .into_iter()
        .collect()
    }

    #[test]
    fn zero_tasks() {
        let t = generate_tasks(
            0,
            &two_way_mix(),
            UniformRange::new(0.0, 1.0),
            3,
            RngState::new(0),
        )
        .unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn degenerate_weight_range() {
        let t = generate_tasks(
            500,
            &two_way_mix(),
            UniformRange::new(2.0, 2.0),
            3,
            RngState::new(0),
        )
        .unwrap();
        assert!(t.iter().all(|t| t.priority_weight == 2.0));
        assert!(t.iter().all(|t| t.slot < 3 && t.duration_ticks == 1));
    }

    #[test]
    fn category_counts_are_binomial() {
        let t = generate_tasks(
            10_000,
            &two_way_mix(),
            UniformRange::new(0.0, 1.0),
            4,
            RngState::new(8),
        )
        .unwrap();
        let creative = t
            .iter()
            .filter(|t| t.category == TaskCategory::Creative)
            .count() as i64;
        let technical = t
            .iter()
            .filter(|t| t.category == TaskCategory::Technical)
            .count() as i64;
        assert_eq!(creative + technical, 10_000);
        // 3 sigma of Binomial(10000, 0.5) is 150.
        assert!((creative - 5000).abs() <= 150, "{creative}");
        assert!((technical - 5000).abs() <= 150, "{technical}");
    }

    #[test]
    fn malformed_mix_is_rejected() {
        let bad: BTreeMap<_, _> = [
            (TaskCategory::Creative, 0.6),
            (TaskCategory::Technical, 0.5),
        ]
        .into_iter()
        .collect();
        let err =
            generate_tasks(3, &bad, UniformRange::new(0.0, 1.0), 1, RngState::new(0)).unwrap_err();
        assert!(matches!(err, SynthError::InvalidMix(_)));
        let neg: BTreeMap<_, _> = [
            (TaskCategory::Creative, 1.5),
            (TaskCategory::Technical, -0.5),
        ]
        .into_iter()
        .collect();
        assert!(generate_tasks(3, &neg, UniformRange::new(0.0, 1.0), 1, RngState::new(0)).is_err());
        assert!(generate_tasks(
            3,
            &BTreeMap::new(),
            UniformRange::new(0.0, 1.0),
            1,
            RngState::new(0)
        )
        .is_err());
    }

    #[test]
    fn inverted_weight_range_is_rejected() {
        assert!(generate_tasks(
            1,
            &two_way_mix(),
            UniformRange::new(2.0, 1.0),
            1,
            RngState::new(0)
        )
        .is_err());
    }

    #[test]
    fn default_affinity_reflects_findings() {
        let t = AffinityTable::default();
        assert_eq!(t.bonus(GroupLabel::A, TaskCategory::Collaborative), 0.2);
        assert_eq!(t.bonus(GroupLabel::A, TaskCategory::Technical), 0.0);
        assert!(t.validate().is_empty());
    }

    proptest! {
        #[test]
        fn task_batches_respect_bounds(
            n in 0usize..200, lo in 0.0f64..5.0, span in 0.0f64..5.0,
            slots in 1u32..6, dlo in 1u32..4, dspan in 0u32..4, seed in any::<u64>(),
        ) {
            let w = UniformRange::new(lo, lo + span);
            let t = generate_task_batch(n, &two_way_mix(), w, slots, [dlo, dlo + dspan], 10, RngState::new(seed)).unwrap();
            prop_assert_eq!(t.len(), n);
            for (j, task) in t.iter().enumerate() {
                prop_assert_eq!(task.task_id, 10 + j as u64);
                prop_assert!(task.priority_weight >= w.lo && task.priority_weight <= w.hi);
                prop_assert!(task.slot < slots);
                prop_assert!(task.duration_ticks >= dlo && task.duration_ticks <= dlo + dspan);
                prop_assert!(task.validate().is_empty());
            }
        }

        #[test]
        fn cohort_profiles_always_valid(seed in any::<u64>(), sd in 0.0f64..3.0, g in 0usize..10) {
            let spec = one_group(GroupLabel::ALL[g], 30, sd);
            for p in generate_cohort(&spec, RngState::new(seed)).unwrap() {
                prop_assert!(validate_profile(&p).is_empty());
            }
        }
    }
}
