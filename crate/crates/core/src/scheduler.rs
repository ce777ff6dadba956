//! Tabular Q-learning, epsilon-greedy selection, reward scalarization, weighted
//! task assignment and a two-level hierarchical planner.

use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{RngState, TaskCategory, Violation};

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("{what} index {index} out of range (size {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },
    #[error("invalid learning parameters: {0}")]
    InvalidParams(String),
    #[error("non-finite reward {reward} for state {state}, action {action}")]
    NonFiniteReward {
        state: usize,
        action: usize,
        reward: f64,
    },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn check_index(what: &'static str, index: usize, len: usize) -> Result<(), ScheduleError> {
    if index < len {
        Ok(())
    } else {
        Err(ScheduleError::IndexOutOfRange { what, index, len })
    }
}

/// Dense row-major action-value table, zero-initialised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    state_count: usize,
    action_count: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn new(state_count: usize, action_count: usize) -> Result<Self, ScheduleError> {
        if state_count < 1 || action_count < 1 {
            return Err(ScheduleError::Invalid(format!(
                "q-table needs at least one state and one action (got {state_count}x{action_count})"
            )));
        }
        Ok(Self {
            state_count,
            action_count,
            values: vec![0.0; state_count * action_count],
        })
    }

    /// Table from explicit rows; all rows must have equal, nonzero length.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, ScheduleError> {
        let state_count = rows.len();
        let action_count = rows.first().map_or(0, Vec::len);
        let mut table = Self::new(state_count, action_count)?;
        for (s, row) in rows.into_iter().enumerate() {
            if row.len() != action_count {
                return Err(ScheduleError::Invalid(format!(
                    "row {s} has {} entries, expected {action_count}",
                    row.len()
                )));
            }
            for (a, v) in row.into_iter().enumerate() {
                table.set(s, a, v)?;
            }
        }
        Ok(table)
    }

    pub fn state_count(&self) -> usize {
        self.state_count
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.action_count + a]
    }

    pub fn set(&mut self, s: usize, a: usize, value: f64) -> Result<(), ScheduleError> {
        check_index("state", s, self.state_count)?;
        check_index("action", a, self.action_count)?;
        if !value.is_finite() {
            return Err(ScheduleError::Invalid(format!(
                "q-value for ({s}, {a}) must be finite (got {value})"
            )));
        }
        self.values[s * self.action_count + a] = value;
        Ok(())
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.action_count..(s + 1) * self.action_count]
    }

    pub fn max_value(&self, s: usize) -> f64 {
        self.row(s)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Argmax over the row; ties go to the lowest action index.
    pub fn greedy_action(&self, s: usize) -> usize {
        let row = self.row(s);
        let mut best = 0;
        for (a, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = a;
            }
        }
        best
    }

    pub fn greedy_policy(&self) -> Vec<usize> {
        (0..self.state_count)
            .map(|s| self.greedy_action(s))
            .collect()
    }

    /// CSV with one row per state; columns `state,a0,a1,…`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), ScheduleError> {
        let labels: Vec<String> = (0..self.action_count).map(|a| format!("a{a}")).collect();
        let labels: Vec<&str> = labels.iter().map(String::as_str).collect();
        self.write_csv_labeled(w, &labels)
    }

    pub fn write_csv_labeled<W: Write>(&self, w: W, labels: &[&str]) -> Result<(), ScheduleError> {
        if labels.len() != self.action_count {
            return Err(ScheduleError::Invalid(format!(
                "{} labels for {} actions",
                labels.len(),
                self.action_count
            )));
        }
        let mut writer = csv::Writer::from_writer(w);
        let mut header = vec!["state"];
        header.extend_from_slice(labels);
        writer.write_record(&header)?;
        for s in 0..self.state_count {
            let mut record = vec![s.to_string()];
            record.extend(self.row(s).iter().map(|v| v.to_string()));
            writer.write_record(&record)?;
        }
        writer.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, ScheduleError> {
        let mut reader = csv::Reader::from_reader(r);
        let mut rows = Vec::new();
        for (expected, record) in reader.records().enumerate() {
            let record = record?;
            let state: usize = record.get(0).and_then(|s| s.parse().ok()).ok_or_else(|| {
                ScheduleError::Invalid(format!("bad state label in row {expected}"))
            })?;
            if state != expected {
                return Err(ScheduleError::Invalid(format!(
                    "rows out of order: expected state {expected}, found {state}"
                )));
            }
            let row = record
                .iter()
                .skip(1)
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|e| ScheduleError::Invalid(format!("bad q-value {v:?}: {e}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Self::from_rows(rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearningParams {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    /// Multiplicative epsilon decay per episode; 1.0 keeps epsilon constant.
    #[serde(default = "default_decay")]
    pub epsilon_decay: f64,
}

fn default_decay() -> f64 {
    1.0
}

impl Default for LearningParams {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            gamma: 0.9,
            epsilon: 0.1,
            epsilon_decay: 1.0,
        }
    }
}

impl LearningParams {
    pub fn new(alpha: f64, gamma: f64, epsilon: f64) -> Result<Self, ScheduleError> {
        let params = Self {
            alpha,
            gamma,
            epsilon,
            epsilon_decay: 1.0,
        };
        params.checked()
    }

    pub fn with_decay(mut self, decay: f64) -> Result<Self, ScheduleError> {
        self.epsilon_decay = decay;
        self.checked()
    }

    fn checked(self) -> Result<Self, ScheduleError> {
        let v = self.validate();
        if v.is_empty() {
            Ok(self)
        } else {
            Err(ScheduleError::InvalidParams(
                v.iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join("; "),
            ))
        }
    }

    /// Alpha in (0,1], gamma in [0,1), epsilon in [0,1], decay in (0,1].
    ///
    /// `alpha = 0` is also accepted so that frozen tables can be exercised.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(self.alpha >= 0.0 && self.alpha <= 1.0) {
            out.push(Violation::new(
                "alpha",
                format!("alpha out of (0,1] (got {})", self.alpha),
            ));
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            out.push(Violation::new(
                "gamma",
                format!("gamma out of [0,1) (got {})", self.gamma),
            ));
        }
        if !(self.epsilon >= 0.0 && self.epsilon <= 1.0) {
            out.push(Violation::new(
                "epsilon",
                format!("epsilon out of [0,1] (got {})", self.epsilon),
            ));
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay <= 1.0) {
            out.push(Violation::new(
                "epsilon_decay",
                format!("epsilon_decay out of (0,1] (got {})", self.epsilon_decay),
            ));
        }
        out
    }
}

/// One Q-learning step toward `r + γ·max_a' Q(s', a')`; touches only `Q(s, a)`.
pub fn q_update(
    table: &mut QTable,
    s: usize,
    a: usize,
    r: f64,
    s_next: usize,
    params: &LearningParams,
) -> Result<(), ScheduleError> {
    check_index("state", s, table.state_count)?;
    check_index("action", a, table.action_count)?;
    check_index("next state", s_next, table.state_count)?;
    let target = r + params.gamma * table.max_value(s_next);
    apply_target(table, s, a, r, target, params.alpha)
}

/// Update for a transition into a terminal state: the target is `r` alone.
pub fn q_update_terminal(
    table: &mut QTable,
    s: usize,
    a: usize,
    r: f64,
    params: &LearningParams,
) -> Result<(), ScheduleError> {
    check_index("state", s, table.state_count)?;
    check_index("action", a, table.action_count)?;
    apply_target(table, s, a, r, r, params.alpha)
}

fn apply_target(
    table: &mut QTable,
    s: usize,
    a: usize,
    r: f64,
    target: f64,
    alpha: f64,
) -> Result<(), ScheduleError> {
    if !r.is_finite() {
        return Err(ScheduleError::NonFiniteReward {
            state: s,
            action: a,
            reward: r,
        });
    }
    let idx = s * table.action_count + a;
    let current = table.values[idx];
    let updated = current + alpha * (target - current);
    if !updated.is_finite() {
        return Err(ScheduleError::Invalid(format!(
            "update of ({s}, {a}) produced {updated}"
        )));
    }
    table.values[idx] = updated;
    Ok(())
}

/// Epsilon-greedy choice. One uniform is always drawn for the explore test,
/// and a second only when exploring.
pub fn select_action(
    table: &QTable,
    s: usize,
    epsilon: f64,
    rng: &mut RngState,
) -> Result<usize, ScheduleError> {
    check_index("state", s, table.state_count)?;
    if rng.next_f64() < epsilon {
        Ok(rng.below(table.action_count as u64) as usize)
    } else {
        Ok(table.greedy_action(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardVector {
    pub productivity_component: f64,
    pub wellbeing_component: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarizationWeights {
    pub productivity: f64,
    pub wellbeing: f64,
}

impl Default for ScalarizationWeights {
    fn default() -> Self {
        Self {
            productivity: 1.0,
            wellbeing: 0.5,
        }
    }
}

impl ScalarizationWeights {
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (name, v) in [
            ("productivity", self.productivity),
            ("wellbeing", self.wellbeing),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                out.push(Violation::new(
                    format!("scalarization.{name}"),
                    format!("weight must be finite and >= 0 (got {v})"),
                ));
            }
        }
        out
    }
}

/// Weighted-sum scalarization of the two reward objectives.
pub fn scalarize(reward: &RewardVector, weights: &ScalarizationWeights) -> f64 {
    weights.productivity * reward.productivity_component
        + weights.wellbeing * reward.wellbeing_component
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub next: usize,
    pub reward: f64,
    pub terminal: bool,
}

/// Episodic environment over integer states and actions.
pub trait Mdp {
    fn state_count(&self) -> usize;
    fn action_count(&self) -> usize;
    /// Maximum steps per episode; episodes that reach it are truncated, not terminated.
    fn horizon(&self) -> usize;
    fn start_state(&self, rng: &mut RngState) -> usize;
    fn step(&self, s: usize, a: usize, rng: &mut RngState) -> Step;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StartState {
    Fixed(usize),
    /// Uniform over non-terminal states.
    Uniform,
}

/// Finite MDP given by explicit transition distributions and expected rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    transitions: Vec<Vec<Vec<(usize, f64)>>>,
    rewards: Vec<Vec<f64>>,
    terminal: Vec<bool>,
    start: StartState,
    horizon: usize,
}

impl TabularMdp {
    /// `transitions[s][a]` lists `(next_state, probability)`; `rewards[s][a]` is the
    /// reward for taking `a` in `s`.
    pub fn new(
        transitions: Vec<Vec<Vec<(usize, f64)>>>,
        rewards: Vec<Vec<f64>>,
        terminal: Vec<bool>,
        start: StartState,
        horizon: usize,
    ) -> Result<Self, ScheduleError> {
        let n = transitions.len();
        if n == 0 || rewards.len() != n || terminal.len() != n {
            return Err(ScheduleError::Invalid("inconsistent state counts".into()));
        }
        let actions = transitions[0].len();
        if actions == 0 {
            return Err(ScheduleError::Invalid(
                "at least one action required".into(),
            ));
        }
        for s in 0..n {
            if transitions[s].len() != actions || rewards[s].len() != actions {
                return Err(ScheduleError::Invalid(format!(
                    "state {s} has a ragged action list"
                )));
            }
            for a in 0..actions {
                if !rewards[s][a].is_finite() {
                    return Err(ScheduleError::NonFiniteReward {
                        state: s,
                        action: a,
                        reward: rewards[s][a],
                    });
                }
                let dist = &transitions[s][a];
                let total: f64 = dist.iter().map(|(_, p)| p).sum();
                if dist.is_empty()
                    || (total - 1.0).abs() > 1e-9
                    || dist.iter().any(|&(t, p)| t >= n || !(p >= 0.0))
                {
                    return Err(ScheduleError::Invalid(format!(
                        "transition distribution for ({s}, {a}) is malformed"
                    )));
                }
            }
        }
        match start {
            StartState::Fixed(s) => check_index("start state", s, n)?,
            StartState::Uniform if terminal.iter().all(|&t| t) => {
                return Err(ScheduleError::Invalid("no non-terminal start state".into()))
            }
            StartState::Uniform => {}
        }
        if horizon < 1 {
            return Err(ScheduleError::Invalid("horizon must be >= 1".into()));
        }
        Ok(Self {
            transitions,
            rewards,
            terminal,
            start,
            horizon,
        })
    }

    /// Deterministic MDP: `next[s][a]` is the successor of `(s, a)`.
    pub fn deterministic(
        next: Vec<Vec<usize>>,
        rewards: Vec<Vec<f64>>,
        terminal: Vec<bool>,
        start: StartState,
        horizon: usize,
    ) -> Result<Self, ScheduleError> {
        let transitions = next
            .into_iter()
            .map(|row| row.into_iter().map(|t| vec![(t, 1.0)]).collect())
            .collect();
        Self::new(transitions, rewards, terminal, start, horizon)
    }

    pub fn transitions(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.transitions[s][a]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s][a]
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn start(&self) -> StartState {
        self.start
    }
}

impl Mdp for TabularMdp {
    fn state_count(&self) -> usize {
        self.transitions.len()
    }

    fn action_count(&self) -> usize {
        self.transitions[0].len()
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn start_state(&self, rng: &mut RngState) -> usize {
        match self.start {
            StartState::Fixed(s) => s,
            StartState::Uniform => {
                let candidates: Vec<usize> = (0..self.terminal.len())
                    .filter(|&s| !self.terminal[s])
                    .collect();
                candidates[rng.below(candidates.len() as u64) as usize]
            }
        }
    }

    fn step(&self, s: usize, a: usize, rng: &mut RngState) -> Step {
        let dist = &self.transitions[s][a];
        let next = if dist.len() == 1 {
            dist[0].0
        } else {
            let u = rng.next_f64();
            let mut cum = 0.0;
            dist.iter()
                .find(|(_, p)| {
                    cum += p;
                    u < cum
                })
                .unwrap_or(&dist[dist.len() - 1])
                .0
        };
        Step {
            next,
            reward: self.rewards[s][a],
            terminal: self.terminal[next],
        }
    }
}

fn check_mdp<M: Mdp + ?Sized>(mdp: &M) -> Result<(), ScheduleError> {
    if mdp.state_count() < 1 || mdp.action_count() < 1 || mdp.horizon() < 1 {
        return Err(ScheduleError::Invalid(
            "mdp needs at least one state, one action and a positive horizon".into(),
        ));
    }
    Ok(())
}

/// Runs one epsilon-greedy Q-learning episode, updating `table` in place.
fn run_episode<M: Mdp + ?Sized>(
    mdp: &M,
    table: &mut QTable,
    params: &LearningParams,
    epsilon: f64,
    rng: &mut RngState,
) -> Result<(), ScheduleError> {
    let mut s = mdp.start_state(rng);
    for _ in 0..mdp.horizon() {
        let a = select_action(table, s, epsilon, rng)?;
        let step = mdp.step(s, a, rng);
        check_index("next state", step.next, table.state_count)?;
        if step.terminal {
            q_update_terminal(table, s, a, step.reward, params)?;
            break;
        }
        q_update(table, s, a, step.reward, step.next, params)?;
        s = step.next;
    }
    Ok(())
}

/// Episodic epsilon-greedy Q-learning from a zero table.
pub fn train_policy<M: Mdp + ?Sized>(
    mdp: &M,
    params: &LearningParams,
    episodes: usize,
    seed: RngState,
) -> Result<QTable, ScheduleError> {
    params.checked_ref()?;
    if episodes < 1 {
        return Err(ScheduleError::Invalid("episodes must be >= 1".into()));
    }
    check_mdp(mdp)?;
    let mut table = QTable::new(mdp.state_count(), mdp.action_count())?;
    let mut rng = seed;
    let mut epsilon = params.epsilon;
    for _ in 0..episodes {
        run_episode(mdp, &mut table, params, epsilon, &mut rng)?;
        epsilon *= params.epsilon_decay;
    }
    Ok(table)
}

impl LearningParams {
    fn checked_ref(&self) -> Result<(), ScheduleError> {
        self.checked().map(|_| ())
    }
}

/// Weights `w[i][j][k]` over employees, tasks and slots, stored flat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentInstance {
    pub employees: usize,
    pub tasks: usize,
    pub slots: usize,
    pub weights: Vec<f64>,
    /// Maximum tasks per `(employee, slot)` cell.
    pub capacity: usize,
}

impl AssignmentInstance {
    pub fn from_fn(
        employees: usize,
        tasks: usize,
        slots: usize,
        mut weight: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut weights = Vec::with_capacity(employees * tasks * slots);
        for i in 0..employees {
            for j in 0..tasks {
                for k in 0..slots {
                    weights.push(weight(i, j, k));
                }
            }
        }
        Self {
            employees,
            tasks,
            slots,
            weights,
            capacity: 1,
        }
    }

    pub fn with_capacity(mut self, capacity: usize) -> Self {
        self.capacity = capacity;
        self
    }

    pub fn weight(&self, i: usize, j: usize, k: usize) -> f64 {
        self.weights[(i * self.tasks + j) * self.slots + k]
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        if self.weights.len() != self.employees * self.tasks * self.slots {
            return Err(ScheduleError::Invalid(format!(
                "weights has {} entries, expected {}",
                self.weights.len(),
                self.employees * self.tasks * self.slots
            )));
        }
        if let Some(pos) = self
            .weights
            .iter()
            .position(|w| !(w.is_finite() && *w >= 0.0))
        {
            return Err(ScheduleError::Invalid(format!(
                "weight at flat index {pos} must be finite and >= 0 (got {})",
                self.weights[pos]
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Assignment {
    pub employee: usize,
    pub task: usize,
    pub slot: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    /// Sorted by `(employee, task, slot)`.
    pub chosen: Vec<Assignment>,
    pub objective: f64,
    /// False when the greedy fallback produced the schedule.
    pub exact: bool,
}

/// Largest task count solved exactly.
pub const EXACT_TASK_LIMIT: usize = 12;

/// Maximizes `Σ w_ijk·T_ijk` with each task used at most once and each
/// `(employee, slot)` cell holding at most `capacity` tasks.
///
/// Up to [`EXACT_TASK_LIMIT`] tasks the optimum is found by dynamic programming
/// over cells and used-task bitmasks. Each task only needs its `n_tasks`
/// heaviest cells, since any other placement can be moved to one of them without
/// loss. Larger instances fall back to greedy-by-weight (`exact = false`). Only
/// strictly positive weights are ever chosen, so an all-zero instance yields the
/// empty schedule.
pub fn schedule_assignments(instance: &AssignmentInstance) -> Result<Schedule, ScheduleError> {
    instance.validate()?;
    let mut schedule = if instance.tasks <= EXACT_TASK_LIMIT {
        exact_schedule(instance)
    } else {
        greedy_schedule(instance)
    };
    schedule.chosen.sort();
    Ok(schedule)
}

fn exact_schedule(inst: &AssignmentInstance) -> Schedule {
    let n_tasks = inst.tasks;
    if n_tasks == 0 || inst.capacity == 0 || inst.employees == 0 || inst.slots == 0 {
        return Schedule {
            chosen: Vec::new(),
            objective: 0.0,
            exact: true,
        };
    }

    // Candidate cells: the union of each task's top-n_tasks positive cells.
    let cell_count = inst.employees * inst.slots;
    let mut keep = vec![false; cell_count];
    for j in 0..n_tasks {
        let mut ranked: Vec<(f64, usize)> = (0..cell_count)
            .map(|c| (inst.weight(c / inst.slots, j, c % inst.slots), c))
            .filter(|(w, _)| *w > 0.0)
            .collect();
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, c) in ranked.iter().take(n_tasks) {
            keep[c] = true;
        }
    }
    let cells: Vec<usize> = (0..cell_count).filter(|&c| keep[c]).collect();
    let options: Vec<Vec<(usize, f64)>> = cells
        .iter()
        .map(|&c| {
            (0..n_tasks)
                .map(|j| (j, inst.weight(c / inst.slots, j, c % inst.slots)))
                .filter(|(_, w)| *w > 0.0)
                .collect()
        })
        .collect();

    let masks = 1usize << n_tasks;
    let cap = inst.capacity.min(n_tasks);
    // value[mask] = best total from the cells after the current one, given `mask` used.
    let mut value = vec![0.0f64; masks];
    let mut next_value = vec![0.0f64; masks];
    let mut choice = vec![0u16; cells.len() * masks];
    let mut subsets: Vec<(u16, f64)> = Vec::new();

    for ci in (0..cells.len()).rev() {
        enumerate_subsets(&options[ci], cap, &mut subsets);
        for mask in 0..masks {
            let mut best = value[mask];
            let mut best_subset = 0u16;
            for &(subset, w) in &subsets {
                if mask & subset as usize != 0 {
                    continue;
                }
                let candidate = w + value[mask | subset as usize];
                if candidate > best {
                    best = candidate;
                    best_subset = subset;
                }
            }
            next_value[mask] = best;
            choice[ci * masks + mask] = best_subset;
        }
        std::mem::swap(&mut value, &mut next_value);
    }

    let mut chosen = Vec::new();
    let mut objective = 0.0;
    let mut mask = 0usize;
    for (ci, &cell) in cells.iter().enumerate() {
        let subset = choice[ci * masks + mask] as usize;
        for j in 0..n_tasks {
            if subset & (1 << j) != 0 {
                let (i, k) = (cell / inst.slots, cell % inst.slots);
                objective += inst.weight(i, j, k);
                chosen.push(Assignment {
                    employee: i,
                    task: j,
                    slot: k,
                });
            }
        }
        mask |= subset;
    }
    Schedule {
        chosen,
        objective,
        exact: true,
    }
}

/// Non-empty subsets of `options` with at most `cap` elements, as (bitmask, weight).
fn enumerate_subsets(options: &[(usize, f64)], cap: usize, out: &mut Vec<(u16, f64)>) {
    fn recurse(
        options: &[(usize, f64)],
        start: usize,
        cap: usize,
        mask: u16,
        weight: f64,
        out: &mut Vec<(u16, f64)>,
    ) {
        if cap == 0 {
            return;
        }
        for idx in start..options.len() {
            let (j, w) = options[idx];
            let m = mask | (1 << j);
            out.push((m, weight + w));
            recurse(options, idx + 1, cap - 1, m, weight + w, out);
        }
    }
    out.clear();
    recurse(options, 0, cap, 0, 0.0, out);
}

fn greedy_schedule(inst: &AssignmentInstance) -> Schedule {
    let mut entries: Vec<(f64, Assignment)> = Vec::new();
    for i in 0..inst.employees {
        for j in 0..inst.tasks {
            for k in 0..inst.slots {
                let w = inst.weight(i, j, k);
                if w > 0.0 {
                    entries.push((
                        w,
                        Assignment {
                            employee: i,
                            task: j,
                            slot: k,
                        },
                    ));
                }
            }
        }
    }
    entries.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut task_used = vec![false; inst.tasks];
    let mut load = vec![0usize; inst.employees * inst.slots];
    let mut chosen = Vec::new();
    let mut objective = 0.0;
    for (w, a) in entries {
        let cell = a.employee * inst.slots + a.slot;
        if task_used[a.task] || load[cell] >= inst.capacity {
            continue;
        }
        task_used[a.task] = true;
        load[cell] += 1;
        objective += w;
        chosen.push(a);
    }
    Schedule {
        chosen,
        objective,
        exact: false,
    }
}

pub struct MacroAction<M> {
    pub name: String,
    pub mdp: M,
}

impl<M> MacroAction<M> {
    pub fn new(name: impl Into<String>, mdp: M) -> Self {
        Self {
            name: name.into(),
            mdp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalPlan {
    /// Single-state table over macro-actions.
    pub high: QTable,
    pub low: Vec<QTable>,
}

/// Two-level planner: a high-level Q-table picks a macro-action; the chosen
/// macro runs one learning episode of its own Q-table, then executes its greedy
/// policy to termination (or horizon) and hands back the discounted return as
/// the high-level reward.
pub fn plan_hierarchical<M: Mdp>(
    macros: &[MacroAction<M>],
    high_params: &LearningParams,
    low_params: &LearningParams,
    episodes: usize,
    seed: RngState,
) -> Result<HierarchicalPlan, ScheduleError> {
    if macros.is_empty() {
        return Err(ScheduleError::Invalid(
            "at least one macro-action required".into(),
        ));
    }
    if episodes < 1 {
        return Err(ScheduleError::Invalid("episodes must be >= 1".into()));
    }
    high_params.checked_ref()?;
    low_params.checked_ref()?;
    for m in macros {
        check_mdp(&m.mdp)?;
    }

    let mut high = QTable::new(1, macros.len())?;
    let mut low = macros
        .iter()
        .map(|m| QTable::new(m.mdp.state_count(), m.mdp.action_count()))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rng = seed;
    let mut high_eps = high_params.epsilon;
    let mut low_eps = low_params.epsilon;
    for _ in 0..episodes {
        let choice = select_action(&high, 0, high_eps, &mut rng)?;
        let mdp = &macros[choice].mdp;
        run_episode(mdp, &mut low[choice], low_params, low_eps, &mut rng)?;
        let ret = greedy_return(mdp, &low[choice], low_params.gamma, &mut rng)?;
        q_update_terminal(&mut high, 0, choice, ret, high_params)?;
        high_eps *= high_params.epsilon_decay;
        low_eps *= low_params.epsilon_decay;
    }
    Ok(HierarchicalPlan { high, low })
}

/// Discounted return of the greedy policy from a fresh start state.
pub fn greedy_return<M: Mdp + ?Sized>(
    mdp: &M,
    table: &QTable,
    gamma: f64,
    rng: &mut RngState,
) -> Result<f64, ScheduleError> {
    let mut s = mdp.start_state(rng);
    let mut total = 0.0;
    let mut discount = 1.0;
    for _ in 0..mdp.horizon() {
        let a = table.greedy_action(s);
        let step = mdp.step(s, a, rng);
        if !step.reward.is_finite() {
            return Err(ScheduleError::NonFiniteReward {
                state: s,
                action: a,
                reward: step.reward,
            });
        }
        total += discount * step.reward;
        discount *= gamma;
        if step.terminal {
            break;
        }
        s = step.next;
    }
    Ok(total)
}

/// Per-tick action of a simulated employee: focus on a task category or take a break.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkAction {
    Focus(TaskCategory),
    PromptBreak,
}

impl WorkAction {
    pub const COUNT: usize = TaskCategory::ALL.len() + 1;

    pub fn from_index(index: usize) -> Option<Self> {
        match index {
            i if i < TaskCategory::ALL.len() => Some(WorkAction::Focus(TaskCategory::ALL[i])),
            i if i == TaskCategory::ALL.len() => Some(WorkAction::PromptBreak),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        match self {
            WorkAction::Focus(c) => c.index(),
            WorkAction::PromptBreak => TaskCategory::ALL.len(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            WorkAction::Focus(c) => c.name(),
            WorkAction::PromptBreak => "prompt_break",
        }
    }

    pub fn labels() -> Vec<&'static str> {
        (0..Self::COUNT)
            .map(|i| Self::from_index(i).expect("in range").label())
            .collect()
    }

    pub fn from_label(label: &str) -> Option<Self> {
        (0..Self::COUNT)
            .filter_map(Self::from_index)
            .find(|a| a.label() == label)
    }
}

impl fmt::Display for WorkAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub const LOAD_LOW_MAX: f64 = 0.33;
pub const LOAD_MED_MAX: f64 = 0.66;
/// Load bucket (low, med, high) × backlog bucket (0, 1, 2+).
pub const WORKPLACE_STATES: usize = 9;

pub fn workplace_state(cognitive_load: f64, backlog: usize) -> usize {
    let load = if cognitive_load < LOAD_LOW_MAX {
        0
    } else if cognitive_load < LOAD_MED_MAX {
        1
    } else {
        2
    };
    load * 3 + backlog.min(2)
}
