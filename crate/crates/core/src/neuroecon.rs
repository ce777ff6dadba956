//! Neuroeconomic action value, the distraction model, and a quadratic-penalty
//! optimizer for constrained distraction minimization.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::in_closed;

#[derive(Debug, Error, PartialEq)]
pub enum NeuroError {
    #[error("{name} out of range {range} (got {value})")]
    OutOfRange {
        name: &'static str,
        range: &'static str,
        value: f64,
    },
    #[error("non-finite {what} at x = {x:?}")]
    NonFinite { what: &'static str, x: Vec<f64> },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueInputs {
    pub expected_reward: f64,
    pub cost: f64,
}

/// `V = E[R] − C`.
pub fn action_value(inputs: &ValueInputs) -> f64 {
    inputs.expected_reward - inputs.cost
}

/// Mixing weights for cognitive load and environment in the distraction model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistractionWeights {
    pub cognitive: f64,
    pub environmental: f64,
}

impl Default for DistractionWeights {
    fn default() -> Self {
        Self {
            cognitive: 0.6,
            environmental: 0.4,
        }
    }
}

/// `D = clamp(sensitivity · (0.6·C + 0.4·E), 0, 1)`.
pub fn distraction_level(
    cognitive_load: f64,
    environment: f64,
    sensitivity: f64,
) -> Result<f64, NeuroError> {
    distraction_level_weighted(
        cognitive_load,
        environment,
        sensitivity,
        DistractionWeights::default(),
    )
}

pub fn distraction_level_weighted(
    cognitive_load: f64,
    environment: f64,
    sensitivity: f64,
    weights: DistractionWeights,
) -> Result<f64, NeuroError> {
    if !in_closed(cognitive_load, 0.0, 1.0) {
        return Err(NeuroError::OutOfRange {
            name: "cognitive_load",
            range: "[0,1]",
            value: cognitive_load,
        });
    }
    if !in_closed(environment, 0.0, 1.0) {
        return Err(NeuroError::OutOfRange {
            name: "environment",
            range: "[0,1]",
            value: environment,
        });
    }
    if !(sensitivity >= 0.0 && sensitivity.is_finite()) {
        return Err(NeuroError::OutOfRange {
            name: "sensitivity",
            range: "[0,inf)",
            value: sensitivity,
        });
    }
    let raw =
        sensitivity * (weights.cognitive * cognitive_load + weights.environmental * environment);
    Ok(raw.clamp(0.0, 1.0))
}

/// Cognitive engagement on `[0, 1]`, the complement of distraction.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EngagementIndex(f64);

impl EngagementIndex {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for EngagementIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// `1 − D`; out-of-range input is clamped first and NaN counts as full distraction.
pub fn engagement_index(distraction: f64) -> EngagementIndex {
    let d = if distraction.is_nan() {
        1.0
    } else {
        distraction.clamp(0.0, 1.0)
    };
    EngagementIndex(1.0 - d)
}

pub type ScalarFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradientFn = Box<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// A scalar function of the decision vector, optionally with an analytic gradient.
/// Terms without a gradient are differentiated by central differences.
pub struct Term {
    value: ScalarFn,
    gradient: Option<GradientFn>,
}

impl Term {
    pub fn new(value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            value: Box::new(value),
            gradient: None,
        }
    }

    pub fn with_gradient(
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Box::new(value),
            gradient: Some(Box::new(gradient)),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn has_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    /// Writes the gradient at `x` into `out`.
    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        match &self.gradient {
            Some(g) => g(x, out),
            None => central_difference(&*self.value, x, out),
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Term")
            .field("analytic_gradient", &self.gradient.is_some())
            .finish()
    }
}

fn central_difference(f: &dyn Fn(&[f64]) -> f64, x: &[f64], out: &mut [f64]) {
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let h = 1e-6 * x[i].abs().max(1.0);
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        out[i] = (up - down) / (2.0 * h);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub lo: f64,
    pub hi: f64,
}

impl Bound {
    pub const FREE: Bound = Bound {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }
}

/// `min f(x)` subject to `g_i(x) ≤ 0`, `h_j(x) = 0` and box bounds.
#[derive(Debug)]
pub struct ConstrainedProblem {
    pub dimension: usize,
    pub objective: Term,
    pub inequality_constraints: Vec<Term>,
    pub equality_constraints: Vec<Term>,
    pub bounds: Vec<Bound>,
}

impl ConstrainedProblem {
    /// Unconstrained, unbounded problem of the given dimension.
    pub fn new(dimension: usize, objective: Term) -> Self {
        Self {
            dimension,
            objective,
            inequality_constraints: Vec::new(),
            equality_constraints: Vec::new(),
            bounds: vec![Bound::FREE; dimension],
        }
    }

    pub fn inequality(mut self, g: Term) -> Self {
        self.inequality_constraints.push(g);
        self
    }

    pub fn equality(mut self, h: Term) -> Self {
        self.equality_constraints.push(h);
        self
    }

    pub fn bounds(mut self, bounds: Vec<Bound>) -> Self {
        self.bounds = bounds;
        self
    }

    pub fn validate(&self) -> Result<(), NeuroError> {
        if self.dimension < 1 {
            return Err(NeuroError::InvalidProblem("dimension must be >= 1".into()));
        }
        if self.bounds.len() != self.dimension {
            return Err(NeuroError::InvalidProblem(format!(
                "expected {} bounds, got {}",
                self.dimension,
                self.bounds.len()
            )));
        }
        if let Some((i, b)) = self
            .bounds
            .iter()
            .enumerate()
            .find(|(_, b)| b.lo.is_nan() || b.hi.is_nan() || b.lo > b.hi)
        {
            return Err(NeuroError::InvalidProblem(format!(
                "bound {i} has lo > hi ([{}, {}])",
                b.lo, b.hi
            )));
        }
        Ok(())
    }

    fn project(&self, x: &mut [f64]) {
        for (v, b) in x.iter_mut().zip(&self.bounds) {
            *v = v.clamp(b.lo, b.hi);
        }
    }

    fn within_bounds(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.bounds)
            .all(|(v, b)| *v >= b.lo && *v <= b.hi)
    }
}

/// `max(max_i g_i(x), max_j |h_j(x)|, 0)`.
pub fn max_violation(problem: &ConstrainedProblem, x: &[f64]) -> f64 {
    let ineq = problem
        .inequality_constraints
        .iter()
        .map(|g| g.eval(x))
        .fold(0.0f64, f64::max);
    problem
        .equality_constraints
        .iter()
        .map(|h| h.eval(x).abs())
        .fold(ineq, f64::max)
}

/// `f(x) + μ·Σ max(0, g_i)² + μ·Σ h_j²`.
pub fn penalty_value(problem: &ConstrainedProblem, x: &[f64], mu: f64) -> Result<f64, NeuroError> {
    let f = problem.objective.eval(x);
    if !f.is_finite() {
        return Err(NeuroError::NonFinite {
            what: "objective",
            x: x.to_vec(),
        });
    }
    let mut penalty = 0.0;
    for g in &problem.inequality_constraints {
        let v = g.eval(x);
        if !v.is_finite() {
            return Err(NeuroError::NonFinite {
                what: "inequality constraint",
                x: x.to_vec(),
            });
        }
        let active = v.max(0.0);
        penalty += active * active;
    }
    for h in &problem.equality_constraints {
        let v = h.eval(x);
        if !v.is_finite() {
            return Err(NeuroError::NonFinite {
                what: "equality constraint",
                x: x.to_vec(),
            });
        }
        penalty += v * v;
    }
    Ok(f + mu * penalty)
}

/// Gradient of [`penalty_value`], assembled from the terms' gradients.
pub fn penalty_gradient(problem: &ConstrainedProblem, x: &[f64], mu: f64) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; n];
    problem.objective.gradient(x, &mut out);
    let mut scratch = vec![0.0; n];
    for g in &problem.inequality_constraints {
        let v = g.eval(x);
        if v > 0.0 {
            g.gradient(x, &mut scratch);
            for (o, s) in out.iter_mut().zip(&scratch) {
                *o += 2.0 * mu * v * s;
            }
        }
    }
    for h in &problem.equality_constraints {
        let v = h.eval(x);
        h.gradient(x, &mut scratch);
        for (o, s) in out.iter_mut().zip(&scratch) {
            *o += 2.0 * mu * v * s;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub constraint_tol: f64,
    pub step_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            constraint_tol: 1e-6,
            step_tol: 1e-8,
        }
    }
}

/// Penalty weight starts at `initial` and is multiplied by `growth` each outer round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySchedule {
    pub initial: f64,
    pub growth: f64,
    pub rounds: usize,
}

impl Default for PenaltySchedule {
    fn default() -> Self {
        Self {
            initial: 1.0,
            growth: 10.0,
            rounds: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub max_violation: f64,
    /// False when the returned point violates a constraint by more than `constraint_tol`.
    pub feasible: bool,
    /// Set when some outer round hit the iteration budget before its step fell below `step_tol`.
    pub budget_exhausted: bool,
    pub rounds: usize,
    pub iterations: usize,
}

/// Minimizes with the default penalty schedule. `budget` caps the inner
/// gradient iterations of each outer round.
pub fn minimize_constrained(
    problem: &ConstrainedProblem,
    start: &[f64],
    tolerances: Tolerances,
    budget: usize,
) -> Result<Solution, NeuroError> {
    minimize_constrained_with(
        problem,
        start,
        tolerances,
        budget,
        PenaltySchedule::default(),
    )
}

const ARMIJO_C1: f64 = 1e-4;
const MIN_TRIAL_STEP: f64 = 1e-20;

pub fn minimize_constrained_with(
    problem: &ConstrainedProblem,
    start: &[f64],
    tolerances: Tolerances,
    budget: usize,
    schedule: PenaltySchedule,
) -> Result<Solution, NeuroError> {
    problem.validate()?;
    if start.len() != problem.dimension {
        return Err(NeuroError::InvalidProblem(format!(
            "start has length {}, expected {}",
            start.len(),
            problem.dimension
        )));
    }
    if !problem.within_bounds(start) {
        return Err(NeuroError::InvalidProblem(format!(
            "start {start:?} lies outside the bounds"
        )));
    }
    if budget < 1 {
        return Err(NeuroError::InvalidProblem("budget must be >= 1".into()));
    }
    if schedule.rounds < 1 || !(schedule.initial > 0.0) || !(schedule.growth >= 1.0) {
        return Err(NeuroError::InvalidProblem(format!(
            "invalid penalty schedule {schedule:?}"
        )));
    }

    let start_objective = problem.objective.eval(start);
    if !start_objective.is_finite() {
        return Err(NeuroError::NonFinite {
            what: "objective",
            x: start.to_vec(),
        });
    }
    // Candidates are (x, f, violation); the start competes when it is feasible.
    let mut best: Option<(Vec<f64>, f64, f64)> = None;
    let start_violation = max_violation(problem, start);
    if start_violation <= tolerances.constraint_tol {
        best = Some((start.to_vec(), start_objective, start_violation));
    }

    let mut x = start.to_vec();
    let mut mu = schedule.initial;
    let mut total_iterations = 0;
    let mut budget_exhausted = false;
    let mut rounds = 0;
    for round in 0..schedule.rounds {
        rounds = round + 1;
        let (iterations, converged) = descend(problem, &mut x, mu, tolerances.step_tol, budget)?;
        total_iterations += iterations;
        budget_exhausted |= !converged;

        let f = problem.objective.eval(&x);
        let violation = max_violation(problem, &x);
        best = Some(pick_better(
            best,
            (x.clone(), f, violation),
            tolerances.constraint_tol,
        ));
        if violation <= tolerances.constraint_tol {
            break;
        }
        mu *= schedule.growth;
    }

    let (x, objective, violation) = best.expect("at least one round ran");
    Ok(Solution {
        feasible: violation <= tolerances.constraint_tol,
        x,
        objective,
        max_violation: violation,
        budget_exhausted,
        rounds,
        iterations: total_iterations,
    })
}

fn pick_better(
    current: Option<(Vec<f64>, f64, f64)>,
    candidate: (Vec<f64>, f64, f64),
    tol: f64,
) -> (Vec<f64>, f64, f64) {
    let Some(current) = current else {
        return candidate;
    };
    let cur_ok = current.2 <= tol;
    let cand_ok = candidate.2 <= tol;
    match (cur_ok, cand_ok) {
        (true, true) if candidate.1 < current.1 => candidate,
        (true, _) => current,
        (false, true) => candidate,
        (false, false) if candidate.2 < current.2 => candidate,
        (false, false) => current,
    }
}

/// Projected gradient descent on the penalty function with a Barzilai–Borwein
/// trial step and Armijo backtracking. Returns the iteration count and whether
/// the step size fell below `step_tol`.
fn descend(
    problem: &ConstrainedProblem,
    x: &mut [f64],
    mu: f64,
    step_tol: f64,
    budget: usize,
) -> Result<(usize, bool), NeuroError> {
    let n = x.len();
    let mut phi = penalty_value(problem, x, mu)?;
    let mut grad = penalty_gradient(problem, x, mu);
    let gnorm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let mut trial = if gnorm > 0.0 {
        1.0 / gnorm.max(1.0)
    } else {
        1.0
    };
    let mut candidate = vec![0.0; n];

    for iteration in 0..budget {
        let mut t = trial;
        let accepted = loop {
            for i in 0..n {
                candidate[i] = x[i] - t * grad[i];
            }
            problem.project(&mut candidate);
            let decrease: f64 = (0..n).map(|i| grad[i] * (candidate[i] - x[i])).sum();
            if decrease == 0.0 {
                // Projected gradient vanishes: stationary for this round.
                return Ok((iteration, true));
            }
            let phi_new = penalty_value(problem, &candidate, mu)?;
            if phi_new <= phi + ARMIJO_C1 * decrease {
                break Some(phi_new);
            }
            t *= 0.5;
            if t < MIN_TRIAL_STEP {
                break None;
            }
        };
        let Some(phi_new) = accepted else {
            return Ok((iteration, true));
        };

        let grad_new = penalty_gradient(problem, &candidate, mu);
        let mut ss = 0.0;
        let mut sy = 0.0;
        for i in 0..n {
            let s = candidate[i] - x[i];
            let y = grad_new[i] - grad[i];
            ss += s * s;
            sy += s * y;
        }
        x.copy_from_slice(&candidate);
        phi = phi_new;
        grad = grad_new;
        if ss.sqrt() < step_tol {
            return Ok((iteration + 1, true));
        }
        trial = if sy > 0.0 { ss / sy } else { t * 2.0 };
    }
    Ok((budget, false))
}

/// Named objective presets for distraction calibration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectivePreset {
    Distraction,
    DistractionMinusEngagement,
}

impl ObjectivePreset {
    pub fn name(self) -> &'static str {
        match self {
            ObjectivePreset::Distraction => "distraction",
            ObjectivePreset::DistractionMinusEngagement => "distraction_minus_engagement",
        }
    }
}

/// Offline calibration problem over the operating point `x = (C, E)` on `[0,1]²`.
///
/// The workload floor keeps cognitive load at or above the level required to get
/// work done; the ambient floor is the quietest achievable environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSpec {
    pub preset: ObjectivePreset,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_workload_floor")]
    pub workload_floor: f64,
    #[serde(default = "default_ambient_floor")]
    pub ambient_floor: f64,
}

fn default_lambda() -> f64 {
    1.0
}
fn default_workload_floor() -> f64 {
    0.3
}
fn default_ambient_floor() -> f64 {
    0.1
}

impl Default for CalibrationSpec {
    fn default() -> Self {
        Self {
            preset: ObjectivePreset::DistractionMinusEngagement,
            lambda: default_lambda(),
            workload_floor: default_workload_floor(),
            ambient_floor: default_ambient_floor(),
        }
    }
}

/// Builds the preset problem for a given mean sensitivity.
///
/// Distraction is the unclamped linear form `s·(a·C + b·E)` so that the
/// objective stays smooth; engagement is its complement.
pub fn preset_problem(
    spec: &CalibrationSpec,
    sensitivity: f64,
    weights: DistractionWeights,
) -> ConstrainedProblem {
    let (a, b) = (
        weights.cognitive * sensitivity,
        weights.environmental * sensitivity,
    );
    // f = k·D + offset
    let (k, offset) = match spec.preset {
        ObjectivePreset::Distraction => (1.0, 0.0),
        ObjectivePreset::DistractionMinusEngagement => (1.0 + spec.lambda, -spec.lambda),
    };
    let objective = Term::with_gradient(
        move |x| k * (a * x[0] + b * x[1]) + offset,
        move |_, g| {
            g[0] = k * a;
            g[1] = k * b;
        },
    );
    let workload = spec.workload_floor;
    let ambient = spec.ambient_floor;
    ConstrainedProblem::new(2, objective)
        .inequality(Term::with_gradient(
            move |x| workload - x[0],
            |_, g| {
                g[0] = -1.0;
                g[1] = 0.0;
            },
        ))
        .inequality(Term::with_gradient(
            move |x| ambient - x[1],
            |_, g| {
                g[0] = 0.0;
                g[1] = -1.0;
            },
        ))
        .bounds(vec![Bound::new(0.0, 1.0); 2])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub preset: ObjectivePreset,
    pub operating_point: Vec<f64>,
    pub objective: f64,
    /// Minimal achievable distraction at the operating point, clamped to `[0,1]`.
    pub distraction_floor: f64,
    pub max_violation: f64,
    pub feasible: bool,
}

pub fn calibrate(
    spec: &CalibrationSpec,
    sensitivity: f64,
    weights: DistractionWeights,
) -> Result<Calibration, NeuroError> {
    let problem = preset_problem(spec, sensitivity, weights);
    let solution = minimize_constrained(&problem, &[1.0, 1.0], Tolerances::default(), 500)?;
    let x = &solution.x;
    let d = sensitivity * (weights.cognitive * x[0] + weights.environmental * x[1]);
    Ok(Calibration {
        preset: spec.preset,
        distraction_floor: d.clamp(0.0, 1.0),
        operating_point: solution.x,
        objective: solution.objective,
        max_violation: solution.max_violation,
        feasible: solution.feasible,
    })
}
