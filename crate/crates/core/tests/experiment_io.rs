//! Experiment runner output: CSV layout, reproducibility, early I/O errors.

use mirs_core::experiment::{ScenarioSource, CSV_HEADER};
use mirs_core::*;

fn small_spec(out: std::path::PathBuf) -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(SweepAxis::PmaxWatt, vec![0.5, 1.0]);
    spec.n_trials = 3;
    spec.output = Some(out);
    spec
}

fn strip_time(csv: &str) -> Vec<String> {
    csv.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect()
}

#[test]
fn single_point_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.csv");
    let mut spec = ExperimentSpec::new(SweepAxis::Elements, vec![8.0]);
    spec.n_trials = 1;
    spec.schemes = vec![Scheme::NoIrs];
    spec.output = Some(path.clone());
    let result = run_experiment(&spec).unwrap();
    let text = std::fs::read_to_string(path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], CSV_HEADER);
    assert!(lines[1].starts_with("no_irs,n_elements,8"), "{}", lines[1]);
    assert_eq!(result.rows.len(), 1);
    assert_eq!(result.summary.len(), 1);
}

#[test]
fn reruns_are_byte_identical_except_timing() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    run_experiment(&small_spec(a.clone())).unwrap();
    let mut spec = small_spec(b.clone());
    spec.threads = Some(1);
    run_experiment(&spec).unwrap();
    let (ta, tb) = (std::fs::read_to_string(a).unwrap(), std::fs::read_to_string(b).unwrap());
    assert_eq!(strip_time(&ta), strip_time(&tb));
    // every (scheme, value, trial) appears exactly once
    assert_eq!(ta.lines().count(), 1 + 3 * 2 * 3);
}

#[test]
fn rows_are_sane() {
    let dir = tempfile::tempdir().unwrap();
    let result = run_experiment(&small_spec(dir.path().join("x.csv"))).unwrap();
    for r in &result.rows {
        assert!(r.wsr_nats >= 0.0);
        assert!((r.wsr_bits - r.wsr_nats / std::f64::consts::LN_2).abs() < 1e-12);
        assert!(r.outer_iters >= 1);
    }
    for t in 0..3 {
        let get = |s: Scheme| result.rows.iter().find(|r| r.scheme == s && r.trial == t && r.sweep_value == 1.0).unwrap().wsr_nats;
        assert!(get(Scheme::Proposed) >= get(Scheme::RandomPhase));
    }
    let p = result.summary_for(Scheme::Proposed);
    assert_eq!(p.len(), 2);
    assert!(p.iter().all(|s| s.n == 3));
}

#[test]
fn unwritable_output_fails_before_work() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = small_spec(dir.path().join("missing").join("out.csv"));
    spec.scenario = ScenarioSource::Full;
    spec.n_trials = 1000;
    let started = std::time::Instant::now();
    let err = run_experiment(&spec).unwrap_err();
    assert!(matches!(err, Error::Io(_)), "{err}");
    assert!(started.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn invalid_specs_are_rejected() {
    let mut spec = ExperimentSpec::new(SweepAxis::PmaxWatt, vec![1.0, 0.5]);
    assert!(matches!(run_experiment(&spec), Err(Error::Usage(_))));
    spec.values = vec![0.5];
    spec.n_trials = 0;
    assert!(matches!(run_experiment(&spec), Err(Error::Usage(_))));
}
