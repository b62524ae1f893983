use pdrvpr_core::beacons::{self, MatchMap, QueryKey};
use pdrvpr_core::fusion::{self, is_symmetric_psd, Selection, SmoothingReference};
use pdrvpr_core::synth::{self, files, Dataset, Scenario};
use pdrvpr_core::{evalkit, sensors, Error, RunConfig};

fn dense() -> (Scenario, Dataset) {
    let s = synth::closed_loop_scenario("dense").unwrap();
    let d = synth::generate(&s).unwrap();
    (s, d)
}

fn perfect() -> Dataset {
    let mut s = synth::closed_loop_scenario("dense").unwrap();
    for e in &mut s.beacon_events {
        e.gross = false;
        e.offset = [0.0, 0.0];
    }
    s.extra_beacons = synth::filler_grid([210.0, 140.0], 12.0, 21);
    // sensor noise only; the dense profile's bias and stride-scale faults are removed
    s.gyro_bias = [0.0; 3];
    s.stride_scale = 1.0;
    s.stride_jitter = 0.0;
    synth::generate(&s).unwrap()
}

#[test]
fn without_matches_fused_equals_pdr() {
    let (_, d) = dense();
    let out = fusion::run_pipeline(&d.imu, None, Some(&d.beacons), &RunConfig::default()).unwrap();
    assert_eq!(out.records.len(), 2000);
    for r in &out.records {
        assert_eq!(r.x_fused, r.x_pdr);
        assert!(!r.update_applied);
    }
    let empty = MatchMap::new();
    let again = fusion::run_pipeline(&d.imu, Some(&empty), None, &RunConfig::default()).unwrap();
    for (a, b) in again.records.iter().zip(&out.records) {
        assert_eq!(a.x_fused, b.x_fused);
    }
}

#[test]
fn every_update_passes_the_gate() {
    let (_, d) = dense();
    for cfg in [RunConfig::default(), {
        let mut c = RunConfig::default();
        c.fusion.selection = Selection::FirstPass;
        c
    }] {
        let out = fusion::run_pipeline(&d.imu, Some(&d.matches), Some(&d.beacons), &cfg).unwrap();
        let mut applied = 0;
        for r in out.records.iter().filter(|r| r.update_applied) {
            applied += 1;
            let z = r.observation.unwrap();
            assert!(z.distance(&r.x_pred) < r.threshold, "step {}", r.step);
        }
        assert_eq!(applied, 11);
    }
}

#[test]
fn updates_never_grow_the_covariance() {
    let (_, d) = dense();
    let out = fusion::run_pipeline(&d.imu, Some(&d.matches), Some(&d.beacons), &RunConfig::default()).unwrap();
    let q = out.q.trace();
    let mut prev = 0.0;
    for r in &out.records {
        // predict adds trace(Q); an update may only take it back down
        assert!(r.p_trace <= prev + q + 1e-12, "step {}", r.step);
        prev = r.p_trace;
    }
    assert!(is_symmetric_psd(&out.r, 0.0));
}

#[test]
fn perfect_matches_bound_the_error_at_beacons() {
    let d = perfect();
    let out = fusion::run_pipeline(&d.imu, Some(&d.matches), Some(&d.beacons), &RunConfig::default()).unwrap();
    let bound = out.r.trace().sqrt();
    for e in &d.events {
        let r = &out.records[e.step - 1];
        assert!(r.update_applied, "step {}", e.step);
        let err = r.x_fused.distance(&d.truth.steps[e.step - 1].position);
        assert!(err <= bound, "step {}: {err} > {bound}", e.step);
    }
}

#[test]
fn exact_fix_with_zero_noise_and_no_smoothing() {
    let d = perfect();
    let mut cfg = RunConfig::default();
    cfg.fusion.smooth_a = 1.0;
    cfg.fusion.r = Some([[0.0, 0.0], [0.0, 0.0]]);
    let out = fusion::run_pipeline(&d.imu, Some(&d.matches), Some(&d.beacons), &cfg).unwrap();
    let mut n = 0;
    for r in out.records.iter().filter(|r| r.update_applied) {
        let z = r.observation.unwrap();
        // x + (z - x) in floating point
        assert!(r.x_fused.distance(&z) <= 1e-12 * z.norm().max(1.0), "step {}", r.step);
        n += 1;
    }
    assert_eq!(n, 12);
}

#[test]
fn smoothing_reference_changes_only_update_steps() {
    let (_, d) = dense();
    let a = fusion::run_pipeline(&d.imu, Some(&d.matches), Some(&d.beacons), &RunConfig::default()).unwrap();
    let mut cfg = RunConfig::default();
    cfg.fusion.smoothing_reference = SmoothingReference::Predicted;
    let b = fusion::run_pipeline(&d.imu, Some(&d.matches), Some(&d.beacons), &cfg).unwrap();
    let first = a.records.iter().position(|r| r.update_applied).unwrap();
    assert_eq!(a.records[..first], b.records[..first]);
    assert_ne!(a.records[first].x_fused, b.records[first].x_fused);
}

#[test]
fn time_keys_map_to_the_next_step() {
    let (_, d) = dense();
    let by_time: MatchMap = d
        .matches
        .values()
        .map(|l| {
            let QueryKey::Step(s) = l.query else { unreachable!() };
            // midway between the previous step's peak and this one
            let t = d.truth.steps[s as usize - 1].t - 0.25;
            let key = QueryKey::Time(t);
            (key, beacons::MatchList::new(key, l.candidates.clone()))
        })
        .collect();
    let cfg = RunConfig::default();
    let a = fusion::run_pipeline(&d.imu, Some(&d.matches), Some(&d.beacons), &cfg).unwrap();
    let b = fusion::run_pipeline(&d.imu, Some(&by_time), Some(&d.beacons), &cfg).unwrap();
    assert_eq!(a.records, b.records);
}

#[test]
fn missing_gamma_is_a_config_error() {
    let (_, d) = dense();
    let one = sensors::BeaconDb::new(vec![d.beacons.beacons()[0].clone()]).unwrap();
    let m = beacons::read_matches_jsonl(
        format!("{{\"query\":1,\"matches\":[{{\"beacon\":\"{}\",\"sim\":1.0}}]}}", one.beacons()[0].id).as_bytes(),
        Some(&one),
    )
    .unwrap();
    let err = fusion::run_pipeline(&d.imu, Some(&m), Some(&one), &RunConfig::default()).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
    let cfg = RunConfig { gamma: Some(5.0), ..RunConfig::default() };
    assert!(fusion::run_pipeline(&d.imu, Some(&m), Some(&one), &cfg).is_ok());
    assert!(matches!(
        fusion::run_pipeline(&d.imu, Some(&m), None, &cfg),
        Err(Error::Config(_))
    ));
}

#[test]
fn dataset_files_reproduce_the_in_memory_run() {
    let (s, d) = dense();
    let dir = tempfile::tempdir().unwrap();
    synth::write_dataset(dir.path(), &s, &d).unwrap();

    let imu = sensors::load_imu_stream(dir.path().join(files::IMU)).unwrap();
    let db = sensors::load_beacons(dir.path().join(files::BEACONS), None).unwrap();
    let matches = beacons::load_matches(dir.path().join(files::MATCHES), Some(&db)).unwrap();
    let cfg = RunConfig::load(dir.path().join(files::CONFIG)).unwrap();
    let truth = synth::load_truth(dir.path().join(files::TRUTH)).unwrap();
    let events = synth::load_events(dir.path().join(files::EVENTS)).unwrap();
    assert_eq!(Scenario::load(dir.path().join(files::SCENARIO)).unwrap(), s);

    assert_eq!(imu, d.imu);
    assert_eq!(truth, d.truth);
    let from_disk = fusion::run_pipeline(&imu, Some(&matches), Some(&db), &cfg).unwrap();
    let in_memory = fusion::run_pipeline(&d.imu, Some(&d.matches), Some(&d.beacons), &RunConfig::default()).unwrap();
    assert_eq!(from_disk.records, in_memory.records);

    let rec = evalkit::recognition_stats(&from_disk.records, &events);
    assert_eq!((rec.recognized, rec.total), (11, 12));
    assert_eq!(format!("{:.1}", rec.accuracy.unwrap()), "91.7");

    let path = dir.path().join("trajectory.csv");
    fusion::save_trajectory(&path, &from_disk.records).unwrap();
    let rows = fusion::load_trajectory(&path).unwrap();
    assert_eq!(rows.len(), 2000);
    assert_eq!(rows.iter().filter(|r| r.updated).count(), 11);
}

#[test]
fn sparse_profile_recognizes_seven_of_eleven() {
    let d = synth::generate(&synth::closed_loop_scenario("sparse").unwrap()).unwrap();
    let out = fusion::run_pipeline(&d.imu, Some(&d.matches), Some(&d.beacons), &RunConfig::default()).unwrap();
    let rec = evalkit::recognition_stats(&out.records, &d.events);
    assert_eq!((rec.recognized, rec.total), (7, 11));
    assert_eq!(format!("{:.1}", rec.accuracy.unwrap()), "63.6");
}

#[test]
fn literal_sum_threshold_is_never_smaller() {
    let (_, d) = dense();
    let rec = fusion::run_pipeline(&d.imu, None, Some(&d.beacons), &RunConfig::default()).unwrap();
    let mut cfg = RunConfig::default();
    cfg.drift.threshold_mode = pdrvpr_core::deadreck::ThresholdMode::LiteralSum;
    let lit = fusion::run_pipeline(&d.imu, None, Some(&d.beacons), &cfg).unwrap();
    for (a, b) in rec.records.iter().zip(&lit.records) {
        assert!(b.threshold >= a.threshold - 1e-12);
    }
}
