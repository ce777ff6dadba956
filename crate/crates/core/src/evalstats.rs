//! Evaluation statistics: satisfaction, productivity change, OLS and one-way ANOVA,
//! plus the per-arm report assembled from a finished run.
//!
//! All sums go through [`pairwise_sum`] so results do not depend on how callers
//! batch their data.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{AgeRange, Gender, GroupLabel};

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("{what} is empty")]
    Empty { what: &'static str },
    #[error("{name} out of range {range} (got {value})")]
    OutOfRange {
        name: &'static str,
        range: &'static str,
        value: f64,
    },
    #[error("initial output must be > 0 (got {0})")]
    NonPositiveInitial(f64),
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("design matrix is rank deficient: columns {} are collinear", .columns.join(", "))]
    RankDeficient { columns: Vec<&'static str> },
    #[error("need at least 2 groups, got {0}")]
    TooFewGroups(usize),
    #[error("group {index} has {len} observation(s); at least 2 required")]
    SmallGroup { index: usize, len: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("missing artifact section: {0}")]
    Missing(String),
}

const PAIRWISE_BLOCK: usize = 8;

/// Pairwise (cascade) summation: halves are summed recursively and blocks of
/// eight or fewer are summed left to right.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= PAIRWISE_BLOCK {
        return xs.iter().fold(0.0, |acc, x| acc + x);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(pairwise_sum(xs) / xs.len() as f64)
    }
}

fn sum_map<T>(items: &[T], f: impl Fn(&T) -> f64) -> f64 {
    let v: Vec<f64> = items.iter().map(f).collect();
    pairwise_sum(&v)
}

/// Mean of ratings on `[1, 5]`.
pub fn satisfaction_score(ratings: &[f64]) -> Result<f64, StatsError> {
    if ratings.is_empty() {
        return Err(StatsError::Empty { what: "ratings" });
    }
    if let Some(&bad) = ratings.iter().find(|r| !(1.0..=5.0).contains(*r)) {
        return Err(StatsError::OutOfRange {
            name: "rating",
            range: "[1,5]",
            value: bad,
        });
    }
    // The mean can drift one ulp outside [min, max]; pin it back.
    let lo = ratings.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratings.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((pairwise_sum(ratings) / ratings.len() as f64).clamp(lo, hi))
}

/// Percentage change `(O_f − O_i) / O_i × 100`.
pub fn productivity_change(initial: f64, final_output: f64) -> Result<f64, StatsError> {
    if !(initial > 0.0) || !initial.is_finite() {
        return Err(StatsError::NonPositiveInitial(initial));
    }
    if !final_output.is_finite() {
        return Err(StatsError::NonFinite("final output"));
    }
    Ok((final_output - initial) / initial * 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionRow {
    /// Health outcome.
    pub h: f64,
    pub p: f64,
    pub s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub alpha_hat: f64,
    pub beta1_hat: f64,
    pub beta2_hat: f64,
    pub residual_variance: f64,
    pub r_squared: f64,
    pub n: usize,
}

impl RegressionFit {
    pub fn predict(&self, p: f64, s: f64) -> f64 {
        self.alpha_hat + self.beta1_hat * p + self.beta2_hat * s
    }
}

const OLS_COLUMNS: [&str; 3] = ["intercept", "P", "S"];
/// Pivot threshold on the unit-diagonal scaled normal matrix.
const RANK_TOL: f64 = 1e-10;

/// Fits `H = α + β1·P + β2·S` by least squares.
///
/// The 3×3 normal equations are scaled to unit diagonal and solved by Gaussian
/// elimination with complete pivoting. A pivot below `1e-10` marks the system
/// rank deficient and the null direction names the offending columns.
pub fn ols_fit(rows: &[RegressionRow]) -> Result<RegressionFit, StatsError> {
    if rows.len() < 4 {
        return Err(StatsError::TooFewRows {
            needed: 4,
            got: rows.len(),
        });
    }
    if rows
        .iter()
        .any(|r| !(r.h.is_finite() && r.p.is_finite() && r.s.is_finite()))
    {
        return Err(StatsError::NonFinite("regression rows"));
    }
    let design = |r: &RegressionRow| [1.0, r.p, r.s];
    let mut a = [[0.0; 3]; 3];
    let mut b = [0.0; 3];
    for i in 0..3 {
        for j in i..3 {
            a[i][j] = sum_map(rows, |r| design(r)[i] * design(r)[j]);
            a[j][i] = a[i][j];
        }
        b[i] = sum_map(rows, |r| design(r)[i] * r.h);
    }
    let scale: [f64; 3] = std::array::from_fn(|i| {
        if a[i][i] > 0.0 {
            1.0 / a[i][i].sqrt()
        } else {
            0.0
        }
    });
    for i in 0..3 {
        for j in 0..3 {
            a[i][j] *= scale[i] * scale[j];
        }
        b[i] *= scale[i];
    }
    let z = solve_complete_pivot(a, b).map_err(|columns| StatsError::RankDeficient {
        columns: columns.into_iter().map(|c| OLS_COLUMNS[c]).collect(),
    })?;
    let coef: [f64; 3] = std::array::from_fn(|i| z[i] * scale[i]);

    let fit = RegressionFit {
        alpha_hat: coef[0],
        beta1_hat: coef[1],
        beta2_hat: coef[2],
        residual_variance: 0.0,
        r_squared: 0.0,
        n: rows.len(),
    };
    let ssr = sum_map(rows, |r| {
        let e = r.h - fit.predict(r.p, r.s);
        e * e
    });
    let h_mean = sum_map(rows, |r| r.h) / rows.len() as f64;
    let sst = sum_map(rows, |r| (r.h - h_mean) * (r.h - h_mean));
    let r_squared = if sst > 0.0 {
        (1.0 - ssr / sst).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(RegressionFit {
        residual_variance: ssr / (rows.len() - 3) as f64,
        r_squared,
        ..fit
    })
}

/// Solves a 3×3 system; on a vanishing pivot returns the columns that carry
/// weight in the null direction.
fn solve_complete_pivot(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Result<[f64; 3], Vec<usize>> {
    let mut col_order = [0usize, 1, 2];
    for k in 0..3 {
        let (mut pr, mut pc, mut best) = (k, k, -1.0);
        for (i, row) in a.iter().enumerate().skip(k) {
            for (j, v) in row.iter().enumerate().skip(k) {
                if v.abs() > best {
                    best = v.abs();
                    pr = i;
                    pc = j;
                }
            }
        }
        if best <= RANK_TOL {
            return Err(null_columns(&a, &col_order, k));
        }
        a.swap(k, pr);
        b.swap(k, pr);
        for row in a.iter_mut() {
            row.swap(k, pc);
        }
        col_order.swap(k, pc);
        for i in k + 1..3 {
            let f = a[i][k] / a[k][k];
            for j in k..3 {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut y = [0.0; 3];
    for k in (0..3).rev() {
        let tail: f64 = (k + 1..3).map(|j| a[k][j] * y[j]).sum();
        y[k] = (b[k] - tail) / a[k][k];
    }
    let mut x = [0.0; 3];
    for (k, &c) in col_order.iter().enumerate() {
        x[c] = y[k];
    }
    Ok(x)
}

fn null_columns(u: &[[f64; 3]; 3], col_order: &[usize; 3], rank: usize) -> Vec<usize> {
    // Free variable: the first unpivoted column; back-substitute the pivoted ones.
    let mut z = [0.0; 3];
    z[rank] = 1.0;
    for k in (0..rank).rev() {
        let tail: f64 = (k + 1..=rank).map(|j| u[k][j] * z[j]).sum();
        z[k] = -tail / u[k][k];
    }
    let zmax = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut cols: Vec<usize> = (0..=rank)
        .filter(|&k| z[k].abs() > 1e-6 * zmax)
        .map(|k| col_order[k])
        .collect();
    cols.sort_unstable();
    cols
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub ss_between: f64,
    pub ss_within: f64,
    pub ss_total: f64,
    pub df_between: usize,
    pub df_within: usize,
    /// `+inf` when within-group variance is zero but group means differ.
    #[serde(with = "finite_or_null")]
    pub f_statistic: f64,
    pub f_infinite: bool,
}

mod finite_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// One-way ANOVA with definitional sums of squares.
pub fn anova_oneway<G: AsRef<[f64]>>(groups: &[G]) -> Result<AnovaResult, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups(groups.len()));
    }
    for (index, g) in groups.iter().enumerate() {
        let g = g.as_ref();
        if g.len() < 2 {
            return Err(StatsError::SmallGroup {
                index,
                len: g.len(),
            });
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(StatsError::NonFinite("anova group"));
        }
    }
    let all: Vec<f64> = groups
        .iter()
        .flat_map(|g| g.as_ref().iter().copied())
        .collect();
    let n = all.len();
    let grand = pairwise_sum(&all) / n as f64;
    let mut between = Vec::with_capacity(groups.len());
    let mut within = Vec::with_capacity(groups.len());
    for g in groups {
        let g = g.as_ref();
        let m = pairwise_sum(g) / g.len() as f64;
        between.push(g.len() as f64 * (m - grand) * (m - grand));
        let dev: Vec<f64> = g.iter().map(|x| (x - m) * (x - m)).collect();
        within.push(pairwise_sum(&dev));
    }
    let total: Vec<f64> = all.iter().map(|x| (x - grand) * (x - grand)).collect();
    let ss_between = pairwise_sum(&between);
    let ss_within = pairwise_sum(&within);
    let df_between = groups.len() - 1;
    let df_within = n - groups.len();
    let (f_statistic, f_infinite) = if ss_within > 0.0 {
        (
            (ss_between / df_between as f64) / (ss_within / df_within as f64),
            false,
        )
    } else if ss_between > 0.0 {
        (f64::INFINITY, true)
    } else {
        (0.0, false)
    };
    Ok(AnovaResult {
        ss_between,
        ss_within,
        ss_total: pairwise_sum(&total),
        df_between,
        df_within,
        f_statistic,
        f_infinite,
    })
}

/// Upper 1% points of the F distribution for the degrees of freedom the shipped
/// experiments produce, as `(df_between, df_within, value)`.
pub const F_CRITICAL_1PCT: &[(usize, usize, f64)] = &[
    (1, 198, 6.764614632812903),
    (1, 398, 6.69897804077782),
    (1, 998, 6.660345850341551),
    (2, 297, 4.677320109472233),
    (2, 597, 4.640877180769384),
];

pub fn f_critical_1pct(df_between: usize, df_within: usize) -> Option<f64> {
    F_CRITICAL_1PCT
        .iter()
        .find(|(a, b, _)| *a == df_between && *b == df_within)
        .map(|t| t.2)
}

/// Per-employee outcome of one arm, the input to [`build_report`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmployeeOutcome {
    pub employee_id: u64,
    pub group_label: GroupLabel,
    pub baseline_productivity: f64,
    pub final_productivity: f64,
    /// Mean health effectiveness over the run.
    pub mean_health: f64,
    /// Satisfaction rating on `[1, 5]`.
    pub satisfaction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmOutcomes {
    pub name: String,
    pub interventions_enabled: bool,
    pub effect_size: f64,
    pub interventions: usize,
    pub employees: Vec<EmployeeOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub group: GroupLabel,
    pub age_range: AgeRange,
    pub gender: Gender,
    pub reference_productivity: f64,
    pub employees: usize,
    pub mean_baseline: f64,
    pub mean_final: f64,
    pub productivity_change_pct: f64,
    pub satisfaction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub name: String,
    pub interventions_enabled: bool,
    pub effect_size: f64,
    pub employees: usize,
    pub interventions: usize,
    pub mean_baseline: f64,
    pub mean_final_productivity: f64,
    pub productivity_change_pct: f64,
    /// Change of this arm's mean final productivity relative to the first arm.
    pub change_vs_first_arm_pct: f64,
    pub satisfaction: f64,
    pub regression: Option<RegressionFit>,
    pub regression_error: Option<String>,
    pub groups: Vec<GroupRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Always `"synthetic"`: intervention effects are configured, not measured.
    pub intervention_effect_model: String,
    pub arms: Vec<ArmSummary>,
    pub anova: Option<AnovaResult>,
    pub anova_critical_1pct: Option<f64>,
}

fn summarize_arm(arm: &ArmOutcomes, reference_final: f64) -> Result<ArmSummary, StatsError> {
    if arm.employees.is_empty() {
        return Err(StatsError::Missing(format!(
            "employees for arm {}",
            arm.name
        )));
    }
    let baseline =
        sum_map(&arm.employees, |e| e.baseline_productivity) / arm.employees.len() as f64;
    let final_mean = sum_map(&arm.employees, |e| e.final_productivity) / arm.employees.len() as f64;
    let ratings: Vec<f64> = arm.employees.iter().map(|e| e.satisfaction).collect();

    let mut by_group: BTreeMap<GroupLabel, Vec<&EmployeeOutcome>> = BTreeMap::new();
    for e in &arm.employees {
        by_group.entry(e.group_label).or_default().push(e);
    }
    let groups = by_group
        .into_iter()
        .map(|(g, members)| {
            let n = members.len() as f64;
            let b = sum_map(&members, |e| e.baseline_productivity) / n;
            let f = sum_map(&members, |e| e.final_productivity) / n;
            let r: Vec<f64> = members.iter().map(|e| e.satisfaction).collect();
            Ok(GroupRow {
                group: g,
                age_range: g.age_range(),
                gender: g.gender(),
                reference_productivity: g.reference_productivity(),
                employees: members.len(),
                mean_baseline: b,
                mean_final: f,
                productivity_change_pct: productivity_change(b, f)?,
                satisfaction: satisfaction_score(&r)?,
            })
        })
        .collect::<Result<Vec<_>, StatsError>>()?;

    let rows: Vec<RegressionRow> = arm
        .employees
        .iter()
        .map(|e| RegressionRow {
            h: e.mean_health,
            p: e.final_productivity,
            s: e.satisfaction,
        })
        .collect();
    let (regression, regression_error) = match ols_fit(&rows) {
        Ok(fit) => (Some(fit), None),
        Err(e) => (None, Some(e.to_string())),
    };

    Ok(ArmSummary {
        name: arm.name.clone(),
        interventions_enabled: arm.interventions_enabled,
        effect_size: arm.effect_size,
        employees: arm.employees.len(),
        interventions: arm.interventions,
        mean_baseline: baseline,
        mean_final_productivity: final_mean,
        productivity_change_pct: productivity_change(baseline, final_mean)?,
        change_vs_first_arm_pct: productivity_change(reference_final, final_mean)?,
        satisfaction: satisfaction_score(&ratings)?,
        regression,
        regression_error,
        groups,
    })
}

/// Aggregates per-arm outcomes; ANOVA runs on final productivity when there are
/// at least two arms.
pub fn build_report(arms: &[ArmOutcomes]) -> Result<MetricsReport, StatsError> {
    let first = arms
        .first()
        .ok_or_else(|| StatsError::Missing("arms".into()))?;
    if first.employees.is_empty() {
        return Err(StatsError::Missing(format!(
            "employees for arm {}",
            first.name
        )));
    }
    let reference_final =
        sum_map(&first.employees, |e| e.final_productivity) / first.employees.len() as f64;
    let summaries = arms
        .iter()
        .map(|a| summarize_arm(a, reference_final))
        .collect::<Result<Vec<_>, _>>()?;
    let anova = if arms.len() >= 2 {
        let groups: Vec<Vec<f64>> = arms
            .iter()
            .map(|a| a.employees.iter().map(|e| e.final_productivity).collect())
            .collect();
        Some(anova_oneway(&groups)?)
    } else {
        None
    };
    Ok(MetricsReport {
        intervention_effect_model: "synthetic".into(),
        arms: summaries,
        anova_critical_1pct: anova.and_then(|a| f_critical_1pct(a.df_between, a.df_within)),
        anova,
    })
}
