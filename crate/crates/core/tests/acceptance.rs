//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero on any
//! failure. Runs entirely on generated data.

use std::time::{Duration, Instant};

use nalgebra::{Matrix2, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pdrvpr_core::deadreck::{self, DriftModel, NoiseConfig, ThresholdMode};
use pdrvpr_core::fusion::{self, FilterState, PipelineOutput};
use pdrvpr_core::orientation::{self, MdrConfig, OrientationState};
use pdrvpr_core::stride::{self, StrideConfig};
use pdrvpr_core::synth::{self, Dataset, MagZone, Scenario};
use pdrvpr_core::{evalkit, Position2D, Quaternion, RunConfig};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn run(d: &Dataset, cfg: &RunConfig, with_matches: bool) -> PipelineOutput {
    let matches = with_matches.then_some(&d.matches);
    fusion::run_pipeline(&d.imu, matches, Some(&d.beacons), cfg).expect("pipeline runs")
}

fn errors(out: &PipelineOutput, d: &Dataset, fused: bool) -> Vec<f64> {
    let est: Vec<Position2D> = out
        .records
        .iter()
        .map(|r| if fused { r.x_fused } else { r.x_pdr })
        .collect();
    evalkit::horizontal_error(&est, &d.truth.positions()).expect("step counts match truth")
}

fn p(series: &[f64], q: f64) -> f64 {
    evalkit::percentile(series, q).unwrap()
}

fn fusion_gain() -> Outcome {
    let t0 = Instant::now();
    let d = synth::generate(&synth::closed_loop_scenario("dense").unwrap()).unwrap();
    let cfg = RunConfig::default();
    let fused = run(&d, &cfg, true);
    let pdr = run(&d, &cfg, false);
    let elapsed = t0.elapsed();
    let p75_fused = p(&errors(&fused, &d, true), 75.0);
    let p75_pdr = p(&errors(&pdr, &d, false), 75.0);
    let gain = 1.0 - p75_fused / p75_pdr;
    let rec = evalkit::recognition_stats(&fused.records, &d.events);
    check(
        gain >= 0.40 && elapsed < Duration::from_secs(10) && d.truth.steps.len() == 2000,
        format!(
            "p75 MDR-PDR {p75_pdr:.2} m, fused {p75_fused:.2} m, gain {:.1}% (>= 40%), {} steps, recognized {}/{}, {elapsed:.2?}",
            gain * 100.0,
            d.truth.steps.len(),
            rec.recognized,
            rec.total
        ),
    )
}

/// Dense loop geometry and sensor noise, every event replaced by a 50 m alias.
fn all_gross_scenario() -> Scenario {
    let mut s = synth::closed_loop_scenario("dense").unwrap();
    s.gyro_bias = [0.0; 3];
    s.stride_scale = 1.0;
    s.stride_jitter = 0.0;
    for e in &mut s.beacon_events {
        e.gross = true;
        e.offset = [0.0, -50.0];
    }
    s.extra_beacons = synth::filler_grid([210.0, 140.0], 12.0, 33 - 2 * s.beacon_events.len());
    s
}

fn ges_rejection() -> Outcome {
    let t0 = Instant::now();
    let d = synth::generate(&all_gross_scenario()).unwrap();
    let cfg = RunConfig::default();
    let gated = run(&d, &cfg, true);
    let ungated = run(&d, &cfg.clone().without_ges(), true);
    let elapsed = t0.elapsed();
    let worst = gated
        .records
        .iter()
        .map(|r| r.x_fused.distance(&r.x_pdr))
        .fold(0.0, f64::max);
    let max_t = gated.records.iter().map(|r| r.threshold).fold(0.0, f64::max);
    let updates = gated.records.iter().filter(|r| r.update_applied).count();
    let p95_gated = p(&errors(&gated, &d, true), 95.0);
    let p95_ungated = p(&errors(&ungated, &d, true), 95.0);
    check(
        worst <= 1e-9 && updates == 0 && p95_ungated >= 5.0 * p95_gated && elapsed < Duration::from_secs(10),
        format!(
            "max |fused - PDR| {worst:.1e} m, {updates} updates, max T {max_t:.2} m, p95 no-GES {p95_ungated:.2} m vs GES {p95_gated:.2} m ({:.1}x), {elapsed:.2?}",
            p95_ungated / p95_gated
        ),
    )
}

fn mdr_benefit() -> Outcome {
    let t0 = Instant::now();
    let s = Scenario {
        waypoints: vec![[0.0, 0.0], [140.0, 0.0], [140.0, 70.0]],
        gyro_bias: [0.0, 0.0, 0.0035],
        mag_zones: vec![
            MagZone { center: [70.0, 0.0], radius: 20.0, offset: [60.0, 0.0, -80.0] },
            MagZone { center: [140.0, 70.0], radius: 20.0, offset: [-60.0, 0.0, -80.0] },
        ],
        rng_seed: 11,
        ..Scenario::default()
    };
    let d = synth::generate(&s).unwrap();
    let cfg = RunConfig::default();
    let heading_error = |cfg: &RunConfig| {
        let out = run(&d, cfg, false);
        let last = out.records.last().unwrap();
        let truth = d.truth.steps.last().unwrap().heading;
        let e = (last.heading - truth).rem_euclid(std::f64::consts::TAU);
        e.min(std::f64::consts::TAU - e)
    };
    let with = heading_error(&cfg);
    let without = heading_error(&cfg.clone().without_mdr());
    let elapsed = t0.elapsed();
    let offsets_ok = s.mag_zones.iter().all(|z| (Vector3::from(z.offset).norm() - 100.0).abs() < 1e-9);
    check(
        offsets_ok && with <= 0.5 * without && elapsed < Duration::from_secs(5),
        format!(
            "final heading error {:.2} deg with MDR vs {:.2} deg without ({:.1}%), {elapsed:.2?}",
            with.to_degrees(),
            without.to_degrees(),
            100.0 * with / without
        ),
    )
}

fn step_detection() -> Outcome {
    let straight = Scenario {
        waypoints: vec![[0.0, 0.0], [70.0, 0.0]],
        ..Scenario::default()
    };
    let clean = synth::generate(&straight.clone().noiseless()).unwrap();
    let clean_count = stride::detect_steps(&clean.imu, &StrideConfig::default()).len();
    let mut counts = Vec::new();
    for seed in 0..20 {
        let s = Scenario {
            noise: NoiseConfig { sigma_accel: 0.5, ..NoiseConfig::ZERO },
            rng_seed: seed,
            ..straight.clone()
        };
        let d = synth::generate(&s).unwrap();
        counts.push(stride::detect_steps(&d.imu, &StrideConfig::default()).len());
    }
    let (lo, hi) = (*counts.iter().min().unwrap(), *counts.iter().max().unwrap());
    check(
        clean_count == 100 && lo >= 95 && hi <= 105,
        format!("noiseless {clean_count} of 100; sigma 0.5 over 20 seeds: {lo}..={hi}"),
    )
}

fn kalman() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_gain: f64 = 0.0;
    for _ in 0..1000 {
        let pv: f64 = rng.gen_range(1e-3..100.0);
        let rv: f64 = rng.gen_range(1e-3..100.0);
        let x = Position2D::new(rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0));
        let d = Position2D::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0));
        let s = FilterState::new(x, Matrix2::identity() * pv);
        let out = fusion::kf_update(&s, &(x + d), &(Matrix2::identity() * rv)).unwrap();
        let g = pv / (pv + rv);
        let expect = x + d.scale(g);
        worst_gain = worst_gain.max(out.x.distance(&expect)).max((out.p[(0, 0)] - (1.0 - g) * pv).abs());
    }

    let mut s = FilterState::new(Position2D::ORIGIN, Matrix2::zeros());
    let mut worst_eig = f64::INFINITY;
    let mut worst_asym: f64 = 0.0;
    for _ in 0..10_000 {
        let a: f64 = rng.gen_range(0.0..1.0);
        let b: f64 = rng.gen_range(0.0..1.0);
        let c = rng.gen_range(-1.0..1.0) * (a * b).sqrt();
        s = fusion::predict(&s, rng.gen_range(0.0..1.2), rng.gen_range(-3.2..3.2), &Matrix2::new(a, c, c, b));
        if rng.gen_bool(0.5) {
            let r1: f64 = rng.gen_range(0.01..50.0);
            let r2: f64 = rng.gen_range(0.01..50.0);
            let rc = rng.gen_range(-0.9..0.9) * (r1 * r2).sqrt();
            let z = s.x + Position2D::new(rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0));
            s = fusion::kf_update(&s, &z, &Matrix2::new(r1, rc, rc, r2)).unwrap();
        }
        worst_asym = worst_asym.max((s.p[(0, 1)] - s.p[(1, 0)]).abs());
        worst_eig = worst_eig.min(s.p.symmetric_eigenvalues().min());
    }
    check(
        worst_gain <= 1e-12 && worst_asym == 0.0 && worst_eig >= -1e-12,
        format!("closed-form gain error {worst_gain:.1e}; 1e4 cycles: asymmetry {worst_asym:.1e}, min eigenvalue {worst_eig:.3e}"),
    )
}

fn unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if v.norm() > 0.1 && v.norm() <= 1.0 {
            return v.normalize();
        }
    }
}

/// Body-to-earth matrix of an unnormalized quaternion, written out independently.
fn rot(q: [f64; 4]) -> Matrix3<f64> {
    let [w, x, y, z] = q;
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
        2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
        2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y),
    )
}

fn orientation_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);

    // norm over 1e6 updates with random inputs, detector active
    let cfg = MdrConfig::default();
    let mut st = OrientationState::new(Quaternion::from_euler(0.3, -0.2, 1.0));
    let mut worst_norm: f64 = 0.0;
    for _ in 0..1_000_000 {
        let gyro = Vector3::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let accel = unit(&mut rng) * rng.gen_range(5.0..15.0);
        let mag = unit(&mut rng) * rng.gen_range(20.0..120.0);
        st = orientation::update(&st, &gyro, &accel, &mag, 0.01, &cfg);
        worst_norm = worst_norm.max((st.q.norm() - 1.0).abs());
    }

    // normalized gradient vs central differences of 0.5 |f|^2 with the field reference fixed
    let h = 1e-6;
    let mut worst_fd: f64 = 0.0;
    for _ in 0..1000 {
        let q = Quaternion::from_array([
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ])
        .normalized();
        let a = unit(&mut rng);
        let m = unit(&mut rng);
        let hq = rot(q.as_array()) * m;
        let b = Vector3::new(0.0, hq.x.hypot(hq.y), hq.z);
        let cost = |qa: [f64; 4]| {
            let r = rot(qa).transpose();
            let fg = r * Vector3::z() - a;
            let fb = r * b - m;
            0.5 * (fg.norm_squared() + fb.norm_squared())
        };
        let mut fd = [0.0; 4];
        for (i, slot) in fd.iter_mut().enumerate() {
            let (mut plus, mut minus) = (q.as_array(), q.as_array());
            plus[i] += h;
            minus[i] -= h;
            *slot = (cost(plus) - cost(minus)) / (2.0 * h);
        }
        let n = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
        let g = orientation::gradient_step(&q, &a, &m).as_array();
        let diff = g.iter().zip(&fd).map(|(x, y)| (x - y / n).powi(2)).sum::<f64>().sqrt();
        worst_fd = worst_fd.max(diff);
    }

    // constant yaw rate about z, 1 s at 100 Hz, gyro only
    let rate = 0.5;
    let mut q = Quaternion::IDENTITY;
    for _ in 0..100 {
        q = orientation::integrate_gyro(&q, &Vector3::new(0.0, 0.0, rate), 0.01);
    }
    let yaw_err = (orientation::to_euler(&q).2 - rate).abs();

    check(
        worst_norm <= 1e-9 && worst_fd < 1e-5 && yaw_err < 1e-4,
        format!("norm drift {worst_norm:.1e} over 1e6 updates; gradient vs FD rel err {worst_fd:.1e}; yaw error {yaw_err:.1e} rad"),
    )
}

fn drift_model() -> Outcome {
    let gamma = 6.0;
    let m0 = DriftModel::new(gamma, ThresholdMode::Recursive);
    let t0 = deadreck::ges_threshold(&m0);

    let noise = NoiseConfig { sigma_step_rel: 0.15, ..NoiseConfig::ZERO };
    let mut m = DriftModel::new(0.0, ThresholdMode::Recursive);
    let mut worst_sigma: f64 = 0.0;
    for n in 1..=1000 {
        m = deadreck::accumulate_heading_variance(&m, 1, 0.5, &noise, 0.1);
        m = deadreck::accumulate_position_variance(&m, 1.0, &noise);
        let sigma = deadreck::ges_threshold(&m);
        worst_sigma = worst_sigma.max((sigma - 0.15 * (n as f64).sqrt()).abs());
    }

    // T never decreases between accepted updates along a full fused run
    let d = synth::generate(&synth::closed_loop_scenario("dense").unwrap()).unwrap();
    let out = run(&d, &RunConfig::default(), true);
    let decreases = out
        .records
        .windows(2)
        .filter(|w| !w[0].update_applied && w[1].threshold < w[0].threshold)
        .count();
    check(
        t0 == gamma && worst_sigma <= 1e-12 && decreases == 0,
        format!("T(0) = {t0} (gamma {gamma}); |sigma - 0.15 sqrt(n)| <= {worst_sigma:.1e} over 1000 steps; {decreases} decreases between updates"),
    )
}

fn determinism() -> Outcome {
    let csv = |profile: &str| {
        let d = synth::generate(&synth::closed_loop_scenario(profile).unwrap()).unwrap();
        let out = run(&d, &RunConfig::default(), true);
        let mut buf = Vec::new();
        fusion::write_trajectory_csv(&mut buf, &out.records).unwrap();
        buf
    };
    let mut detail = Vec::new();
    let mut ok = true;
    for profile in ["dense", "sparse"] {
        let (a, b) = (csv(profile), csv(profile));
        ok &= a == b && !a.is_empty();
        detail.push(format!("{profile}: {} bytes identical={}", a.len(), a == b));
    }
    check(ok, detail.join(", "))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("end-to-end fusion gain", fusion_gain),
        ("GES rejection", ges_rejection),
        ("MDR benefit", mdr_benefit),
        ("step detection", step_detection),
        ("Kalman correctness", kalman),
        ("orientation correctness", orientation_checks),
        ("drift model", drift_model),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        match f() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
