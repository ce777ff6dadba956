use std::fs;

use workwell_core::simengine::{
    artifact_write_order, read_artifacts, rebuild_report, render_artifacts, run_scenario,
    write_artifacts, EngineError, ScenarioConfig, LOG_FILE, REPORT_FILE,
};

fn config() -> ScenarioConfig {
    let mut c = ScenarioConfig::example(11);
    c.ticks = 40;
    c
}

#[test]
fn round_trip_rebuilds_the_same_report() {
    let run = run_scenario(&config()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_artifacts(&run, dir.path()).unwrap();
    let stored = read_artifacts(dir.path()).unwrap();
    assert_eq!(stored.qtables.len(), run.arms.len());
    for ((name, q), arm) in stored.qtables.iter().zip(&run.arms) {
        assert_eq!(name, &arm.record.arm);
        assert_eq!(q, &arm.qtable);
    }
    let rebuilt = rebuild_report(dir.path()).unwrap();
    assert_eq!(rebuilt, run.report);
    assert_eq!(
        fs::read(dir.path().join(REPORT_FILE)).unwrap(),
        render_artifacts(&run).unwrap()[REPORT_FILE]
    );
}

#[test]
fn report_is_written_last() {
    let run = run_scenario(&config()).unwrap();
    let files = render_artifacts(&run).unwrap();
    let order = artifact_write_order(&files);
    assert_eq!(order.len(), files.len());
    assert_eq!(order.last(), Some(&REPORT_FILE));
}

#[test]
fn arms_share_decisions() {
    let run = run_scenario(&config()).unwrap();
    let (a, b) = (&run.arms[0], &run.arms[1]);
    assert_eq!(a.qtable, b.qtable);
    for (x, y) in a.log.iter().zip(&b.log) {
        assert_eq!(
            (x.tick, x.employee, x.action, x.tasks_assigned),
            (y.tick, y.employee, y.action, y.tasks_assigned)
        );
        assert_eq!(x.reward, y.reward);
    }
}

#[test]
fn corrupt_log_is_an_artifact_error() {
    let run = run_scenario(&config()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_artifacts(&run, dir.path()).unwrap();
    let path = dir.path().join(LOG_FILE);
    let mut text = fs::read_to_string(&path).unwrap();
    text.push_str("control,not-a-tick\n");
    fs::write(&path, text).unwrap();
    match rebuild_report(dir.path()) {
        Err(EngineError::Artifact { file, .. }) => assert_eq!(file, LOG_FILE),
        other => panic!("expected artifact error, got {other:?}"),
    }
}

#[test]
fn missing_directory_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        read_artifacts(&dir.path().join("absent")),
        Err(EngineError::Io { .. })
    ));
}
