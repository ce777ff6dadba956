//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use workwell_core::domain::{GroupLabel, RngState};
use workwell_core::evalstats::{anova_oneway, ols_fit, RegressionRow};
use workwell_core::neuroecon::{
    minimize_constrained, penalty_gradient, penalty_value, preset_problem, Bound, CalibrationSpec,
    ConstrainedProblem, DistractionWeights, ObjectivePreset, Term, Tolerances,
};
use workwell_core::scheduler::{
    q_update, schedule_assignments, train_policy, AssignmentInstance, LearningParams, QTable,
    StartState, TabularMdp,
};
use workwell_core::simengine::{
    compare_arms, render_artifacts, run_scenario, ArmSpec, ScenarioConfig,
};
use workwell_core::synthgen::{generate_cohort, CohortSpec, UniformRange};
use workwell_core::wellness::{fit_health_weights, HealthObservation};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(
        elapsed < limit,
        format!("took {elapsed:?}, limit {limit:?}"),
    )
}

fn cohort_means() -> Outcome {
    let start = Instant::now();
    let cohort = generate_cohort(&CohortSpec::reference_table(1000, 0.3), RngState::new(1))
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let mut worst: (f64, GroupLabel) = (0.0, GroupLabel::A);
    for g in GroupLabel::ALL {
        let xs: Vec<f64> = cohort
            .iter()
            .filter(|p| p.group_label == g)
            .map(|p| p.baseline_productivity)
            .collect();
        check(
            xs.len() == 1000,
            format!("group {g} has {} members", xs.len()),
        )?;
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let gap = (mean - g.reference_productivity()).abs();
        if gap > worst.0 {
            worst = (gap, g);
        }
    }
    check(
        worst.0 <= 0.05,
        format!("group {} off by {:.4}", worst.1, worst.0),
    )?;
    within(elapsed, Duration::from_secs(1))?;
    Ok(format!(
        "largest deviation {:.4} (group {}), {elapsed:?}",
        worst.0, worst.1
    ))
}

/// Five states in a line with a terminal goal at the right end. Actions: left,
/// right, stay. Staying in state 2 pays a little, which competes with walking on.
fn line_mdp() -> TabularMdp {
    let next = vec![
        vec![0, 1, 0],
        vec![0, 2, 1],
        vec![1, 3, 2],
        vec![2, 4, 3],
        vec![4, 4, 4],
    ];
    let rewards = vec![
        vec![-0.5, -0.1, -0.2],
        vec![-0.1, -0.1, -0.3],
        vec![-0.1, -0.1, 0.4],
        vec![-0.1, 5.0, -0.2],
        vec![0.0, 0.0, 0.0],
    ];
    TabularMdp::deterministic(
        next,
        rewards,
        vec![false, false, false, false, true],
        StartState::Uniform,
        30,
    )
    .expect("valid mdp")
}

fn value_iteration(mdp: &TabularMdp, gamma: f64, tol: f64) -> QTable {
    let (n, m) = (5, 3);
    let mut q = vec![vec![0.0; m]; n];
    loop {
        let mut delta = 0.0f64;
        let mut next = q.clone();
        for s in 0..n {
            if mdp.is_terminal(s) {
                continue;
            }
            for a in 0..m {
                let mut v = mdp.reward(s, a);
                for &(t, p) in mdp.transitions(s, a) {
                    if !mdp.is_terminal(t) {
                        v += gamma * p * q[t].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    }
                }
                delta = delta.max((v - q[s][a]).abs());
                next[s][a] = v;
            }
        }
        q = next;
        if delta < tol {
            return QTable::from_rows(q).expect("rectangular");
        }
    }
}

fn q_oracle() -> Outcome {
    let mdp = line_mdp();
    let params = LearningParams::new(0.1, 0.9, 0.1).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let learned =
        train_policy(&mdp, &params, 50_000, RngState::new(17)).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let oracle = value_iteration(&mdp, 0.9, 1e-10);
    let mut gap = 0.0f64;
    for s in 0..4 {
        for a in 0..3 {
            gap = gap.max((learned.get(s, a) - oracle.get(s, a)).abs());
        }
    }
    check(gap < 1e-3, format!("max |Q - Q*| = {gap:e}"))?;
    let lp: Vec<usize> = (0..4).map(|s| learned.greedy_action(s)).collect();
    let op: Vec<usize> = (0..4).map(|s| oracle.greedy_action(s)).collect();
    check(
        lp == op,
        format!("greedy policies differ: {lp:?} vs {op:?}"),
    )?;
    within(elapsed, Duration::from_secs(5))?;
    Ok(format!(
        "max |Q - Q*| = {gap:.2e}, policy {op:?}, {elapsed:?}"
    ))
}

fn bellman_fixed_point() -> Outcome {
    let mut rng = RngState::new(99);
    let params = LearningParams::new(0.5, 0.9, 0.0).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let states = 2 + rng.below(8) as usize;
        let actions = 1 + rng.below(5) as usize;
        let rows: Vec<Vec<f64>> = (0..states)
            .map(|_| (0..actions).map(|_| 20.0 * rng.next_f64() - 10.0).collect())
            .collect();
        let mut table = QTable::from_rows(rows).map_err(|e| e.to_string())?;
        let s = rng.below(states as u64) as usize;
        let a = rng.below(actions as u64) as usize;
        let s_next = rng.below(states as u64) as usize;
        // Choose r so that Q(s,a) = r + γ·max Q(s', ·) holds.
        let before = table.get(s, a);
        let r = before - params.gamma * table.max_value(s_next);
        let snapshot = table.clone();
        q_update(&mut table, s, a, r, s_next, &params).map_err(|e| e.to_string())?;
        let moved = (table.get(s, a) - before).abs();
        let scale = before.abs().max(table.max_value(s_next).abs()).max(1.0);
        worst = worst.max(moved / (scale * f64::EPSILON));
        for st in 0..states {
            for ac in 0..actions {
                if (st, ac) != (s, a) {
                    check(
                        table.get(st, ac) == snapshot.get(st, ac),
                        "update touched another entry",
                    )?;
                }
            }
        }
    }
    check(worst <= 4.0, format!("worst drift {worst:.1} ulps"))?;
    Ok(format!("1000 tables, worst drift {worst:.1} ulps"))
}

fn brute_force(inst: &AssignmentInstance) -> f64 {
    fn go(inst: &AssignmentInstance, j: usize, load: &mut [usize], total: f64, best: &mut f64) {
        if j == inst.tasks {
            *best = best.max(total);
            return;
        }
        go(inst, j + 1, load, total, best);
        for i in 0..inst.employees {
            for k in 0..inst.slots {
                let cell = i * inst.slots + k;
                let w = inst.weight(i, j, k);
                if w > 0.0 && load[cell] < inst.capacity {
                    load[cell] += 1;
                    go(inst, j + 1, load, total + w, best);
                    load[cell] -= 1;
                }
            }
        }
    }
    let mut best = 0.0;
    let mut load = vec![0; inst.employees * inst.slots];
    go(inst, 0, &mut load, 0.0, &mut best);
    best
}

fn assignment_optimality() -> Outcome {
    let mut rng = RngState::new(4242);
    let start = Instant::now();
    for n in 0..200 {
        let tasks = rng.below(9) as usize;
        let employees = 1 + rng.below(3) as usize;
        let slots = 1 + rng.below(2) as usize;
        let capacity = 1 + rng.below(2) as usize;
        // Integer weights keep every sum exact, so optima compare with ==.
        let inst = AssignmentInstance::from_fn(employees, tasks, slots, |_, _, _| {
            if rng.next_f64() < 0.2 {
                0.0
            } else {
                rng.below(20) as f64
            }
        })
        .with_capacity(capacity);
        let got = schedule_assignments(&inst).map_err(|e| e.to_string())?;
        let want = brute_force(&inst);
        check(got.exact, format!("instance {n} not solved exactly"))?;
        let realized: f64 = got
            .chosen
            .iter()
            .map(|a| inst.weight(a.employee, a.task, a.slot))
            .sum();
        check(
            got.objective == want && realized == want,
            format!(
                "instance {n}: solver {} (realized {realized}), brute force {want}",
                got.objective
            ),
        )?;
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(10))?;
    Ok(format!("200 instances match brute force, {elapsed:?}"))
}

fn ols_recovery() -> Outcome {
    let mut rng = RngState::new(5);
    let rows: Vec<RegressionRow> = (0..10_000)
        .map(|_| {
            let p = 1.0 + 4.0 * rng.next_f64();
            let s = 1.0 + 4.0 * rng.next_f64();
            RegressionRow {
                h: 2.0 + 0.5 * p + 1.5 * s + 0.1 * rng.next_gaussian(),
                p,
                s,
            }
        })
        .collect();
    let fit = ols_fit(&rows).map_err(|e| e.to_string())?;
    let est = [fit.alpha_hat, fit.beta1_hat, fit.beta2_hat];
    for (got, want) in est.iter().zip([2.0, 0.5, 1.5]) {
        check(
            (got - want).abs() <= 0.02,
            format!("estimate {got} vs {want}"),
        )?;
    }
    let norm_h = rows.iter().map(|r| r.h * r.h).sum::<f64>().sqrt();
    let mut worst = 0.0f64;
    for col in 0..3 {
        let dot: f64 = rows
            .iter()
            .map(|r| [1.0, r.p, r.s][col] * (r.h - fit.predict(r.p, r.s)))
            .sum();
        worst = worst.max(dot.abs() / norm_h);
    }
    check(
        worst <= 1e-8,
        format!("residual not orthogonal: {worst:e}·‖H‖"),
    )?;
    Ok(format!(
        "(α, β1, β2) = ({:.4}, {:.4}, {:.4}), orthogonality {worst:.1e}·‖H‖",
        est[0], est[1], est[2]
    ))
}

fn anova_partition() -> Outcome {
    let mut rng = RngState::new(77);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let k = 2 + rng.below(5) as usize;
        let scale = 10f64.powf(4.0 * rng.next_f64() - 2.0);
        let groups: Vec<Vec<f64>> = (0..k)
            .map(|_| {
                let n = 2 + rng.below(30) as usize;
                let shift = 5.0 * rng.next_gaussian();
                (0..n)
                    .map(|_| scale * (shift + rng.next_gaussian()))
                    .collect()
            })
            .collect();
        let a = anova_oneway(&groups).map_err(|e| e.to_string())?;
        worst = worst.max((a.ss_total - a.ss_between - a.ss_within).abs() / a.ss_total);
    }
    check(worst <= 1e-9, format!("partition gap {worst:e}"))?;
    let hand =
        anova_oneway(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).map_err(|e| e.to_string())?;
    check(
        (hand.f_statistic - 13.5).abs() <= 1e-12,
        format!("hand case F = {}", hand.f_statistic),
    )?;
    Ok(format!(
        "worst relative gap {worst:.1e}, hand case F = {}",
        hand.f_statistic
    ))
}

fn grid_argmin(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let steps = ((hi - lo) / 1e-4).round() as usize;
    (0..=steps)
        .map(|i| lo + i as f64 * 1e-4)
        .min_by(|a, b| f(*a).total_cmp(&f(*b)))
        .expect("non-empty grid")
}

fn optimizer() -> Outcome {
    let tol = Tolerances::default();
    let quad = ConstrainedProblem::new(1, Term::new(|x| x[0] * x[0]));
    let s1 = minimize_constrained(&quad, &[1.0], tol, 500).map_err(|e| e.to_string())?;
    check(s1.x[0].abs() < 1e-4, format!("x² gave {:?}", s1.x))?;

    let active = ConstrainedProblem::new(1, Term::new(|x| x[0]))
        .inequality(Term::new(|x| 1.0 - x[0]))
        .bounds(vec![Bound::new(0.0, 5.0)]);
    let s2 = minimize_constrained(&active, &[5.0], tol, 500).map_err(|e| e.to_string())?;
    let scan2 = grid_argmin(0.0, 5.0, |x| if x >= 1.0 { x } else { f64::INFINITY });
    check(
        (s2.x[0] - scan2).abs() < 1e-3,
        format!("x ≥ 1 gave {:?}, scan {scan2}", s2.x),
    )?;

    let line = ConstrainedProblem::new(2, Term::new(|x| x[0] * x[0] + x[1] * x[1]))
        .equality(Term::new(|x| x[0] + x[1] - 1.0));
    let s3 = minimize_constrained(&line, &[2.0, -3.0], tol, 1000).map_err(|e| e.to_string())?;
    let scan3 = grid_argmin(-1.0, 2.0, |x| x * x + (1.0 - x) * (1.0 - x));
    check(
        (s3.x[0] - scan3).abs() < 1e-3 && (s3.x[1] - (1.0 - scan3)).abs() < 1e-3,
        format!("x + y = 1 gave {:?}, scan {scan3}", s3.x),
    )?;

    let mut rng = RngState::new(3);
    let mut worst = 0.0f64;
    for preset in [
        ObjectivePreset::Distraction,
        ObjectivePreset::DistractionMinusEngagement,
    ] {
        let spec = CalibrationSpec {
            preset,
            ..CalibrationSpec::default()
        };
        for _ in 0..50 {
            let p = preset_problem(&spec, 0.5 + rng.next_f64(), DistractionWeights::default());
            let x = [rng.next_f64(), rng.next_f64()];
            let mu = 10f64.powi(rng.below(4) as i32);
            let g = penalty_gradient(&p, &x, mu);
            for i in 0..2 {
                let h = 1e-6;
                let (mut xp, mut xm) = (x, x);
                xp[i] += h;
                xm[i] -= h;
                let fd = (penalty_value(&p, &xp, mu).map_err(|e| e.to_string())?
                    - penalty_value(&p, &xm, mu).map_err(|e| e.to_string())?)
                    / (2.0 * h);
                worst = worst.max((g[i] - fd).abs() / g[i].abs().max(fd.abs()).max(1e-8));
            }
        }
    }
    check(worst < 1e-5, format!("gradient relative error {worst:e}"))?;
    Ok(format!(
        "x* = {:.2e}, {:.5}, ({:.5}, {:.5}); gradient error {worst:.1e}",
        s1.x[0], s2.x[0], s3.x[0], s3.x[1]
    ))
}

fn health_fit() -> Outcome {
    let planted = |n: usize, noise: f64, seed: u64| -> Vec<HealthObservation> {
        let mut rng = RngState::new(seed);
        (0..n)
            .map(|_| {
                let (p, e) = (rng.next_f64(), rng.next_f64());
                HealthObservation {
                    physiological: p,
                    environmental: e,
                    effectiveness: 0.7 * p + 0.3 * e + noise * rng.next_gaussian(),
                }
            })
            .collect()
    };
    let exact = fit_health_weights(&planted(50, 0.0, 1)).map_err(|e| e.to_string())?;
    check(
        (exact.weights.w1 - 0.7).abs() <= 1e-9 && (exact.weights.w2 - 0.3).abs() <= 1e-9,
        format!("noise-free fit {:?}", exact.weights),
    )?;
    let noisy = fit_health_weights(&planted(10_000, 0.01, 2)).map_err(|e| e.to_string())?;
    check(
        (noisy.weights.w1 - 0.7).abs() <= 0.01 && (noisy.weights.w2 - 0.3).abs() <= 0.01,
        format!("noisy fit {:?}", noisy.weights),
    )?;
    Ok(format!(
        "noisy fit ({:.4}, {:.4})",
        noisy.weights.w1, noisy.weights.w2
    ))
}

fn paired_arms() -> Outcome {
    let mut config = ScenarioConfig::example(2024);
    config.ticks = 500;
    config.cohort = CohortSpec::reference_table(20, 0.3);
    config.cohort.intervention_responsiveness = UniformRange::new(1.0, 1.0);
    config.tasks.per_tick = 10;
    config.tasks.duration_range = [1, 3];
    config.arms = vec![
        ArmSpec::new("off", false),
        ArmSpec::new("on", true).with_effect(0.05),
    ];

    let start = Instant::now();
    let first = run_scenario(&config).map_err(|e| e.to_string())?;
    let second = run_scenario(&config).map_err(|e| e.to_string())?;
    let bytes_a = render_artifacts(&first).map_err(|e| e.to_string())?;
    let bytes_b = render_artifacts(&second).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    check(bytes_a == bytes_b, "repeat run differs")?;

    let cmp = compare_arms(&first).map_err(|e| e.to_string())?;
    let (off, on) = (&cmp.arms[0], &cmp.arms[1]);
    check(
        on.mean_final_productivity > off.mean_final_productivity,
        "arm on is not ahead",
    )?;
    check(
        (cmp.anova.df_between, cmp.anova.df_within) == (1, 398),
        format!("df {:?}", (cmp.anova.df_between, cmp.anova.df_within)),
    )?;
    let critical = 6.69897804077782;
    check(
        cmp.critical_1pct == Some(critical),
        "critical value missing from table",
    )?;
    check(
        cmp.anova.f_statistic > critical,
        format!("F = {} not above {critical}", cmp.anova.f_statistic),
    )?;
    within(elapsed, Duration::from_secs(60))?;
    Ok(format!(
        "means {:.4} vs {:.4}, F(1, 398) = {:.2} > {critical}, {} interventions, two runs in {elapsed:?}",
        on.mean_final_productivity, off.mean_final_productivity, cmp.anova.f_statistic, on.interventions
    ))
}

fn read_tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).expect("readable dir") {
            let path = entry.expect("entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).expect("inside dir").to_path_buf();
                out.insert(rel, std::fs::read(&path).expect("readable file"));
            }
        }
    }
    out
}

fn determinism_sweep() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_workwell");
    let scenario = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/example.json");
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut trees = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        let run = Command::new(bin)
            .args(["run", "--quiet", "--scenario"])
            .arg(&scenario)
            .arg("--out")
            .arg(&out)
            .status()
            .map_err(|e| e.to_string())?;
        check(run.success(), format!("run exited with {run}"))?;
        let plot = Command::new(bin)
            .args(["plot", "--artifacts"])
            .arg(&out)
            .arg("--out")
            .arg(out.join("plots"))
            .status()
            .map_err(|e| e.to_string())?;
        check(plot.success(), format!("plot exited with {plot}"))?;
        trees.push(read_tree(&out));
    }
    check(!trees[0].is_empty(), "no artifacts written")?;
    let names: Vec<String> = trees[0].keys().map(|p| p.display().to_string()).collect();
    check(
        names.iter().filter(|n| n.ends_with(".svg")).count() == 3,
        format!("files: {names:?}"),
    )?;
    check(trees[0] == trees[1], "artifact directories differ")?;
    Ok(format!("{} files identical across runs", names.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (
            "1 cohort group means match the reference table",
            cohort_means,
        ),
        ("2 Q-learning matches value iteration", q_oracle),
        (
            "3 q_update is a no-op at a Bellman fixed point",
            bellman_fixed_point,
        ),
        (
            "4 assignment equals brute-force optimum",
            assignment_optimality,
        ),
        ("5 OLS recovers planted coefficients", ols_recovery),
        ("6 ANOVA partition and hand case", anova_partition),
        ("7 constrained optimizer and gradient check", optimizer),
        ("8 health-weight fit recovers planted weights", health_fit),
        ("9 paired-arm experiment", paired_arms),
        ("10 run is byte-reproducible", determinism_sweep),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        match f() {
            Ok(detail) => println!("[PASS] {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {name}: {why}");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
