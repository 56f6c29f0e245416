//! Acceptance checks for the complete stack: projection algebra, the
//! friction-compensation worked example, closed-loop behavior on the four
//! shipped scenarios, gradient consistency, determinism, and throughput.
//!
//! Every test prints exactly one `PASS`/`FAIL` line with the measured
//! values, so `cargo test --test acceptance -- --nocapture` doubles as a
//! conformance report.

use std::path::PathBuf;
use std::time::Instant;

use nalgebra::{Matrix3, Unit, Vector3};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, UnitSphere};

use surftrace::controller::{frame_from_normal, orientation_gradient, projections};
use surftrace::estimator::{self, EstimatorConfig, EstimatorState};
use surftrace::kinematics::{forward_kinematics, JointVector, RobotModel, DOF};
use surftrace::scenario::Scenario;
use surftrace::sim::{self, StepRecord};

/// Prints the report line and fails the test if the criterion did not hold.
fn check(name: &str, pass: bool, details: &str) {
    println!("{} {name}: {details}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{name}: {details}");
}

/// Loads one of the scenario files shipped in `scenarios/`.
fn scenario(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.cfg"));
    Scenario::load(&path, &[]).unwrap_or_else(|e| panic!("loading {name}: {e}"))
}

/// Time of the first force reading above the contact threshold.
fn engagement_time(records: &[StepRecord], threshold: f64) -> f64 {
    records.iter().find(|r| r.f_s.norm() >= threshold).expect("run never made contact").t
}

#[test]
fn projectors_split_cartesian_space_cleanly() {
    let t0 = Instant::now();
    let mut rng = StdRng::seed_from_u64(0x51ab);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n: [f64; 3] = UnitSphere.sample(&mut rng);
        let frame = frame_from_normal(&Unit::new_normalize(Vector3::from(n)));
        let pair = projections(&frame);
        let residuals = [
            pair.force + pair.motion - Matrix3::identity(),
            pair.force * pair.force - pair.force,
            pair.motion * pair.motion - pair.motion,
            pair.motion * pair.force,
        ];
        for r in residuals {
            worst = worst.max(r.amax());
        }
    }
    let wall = t0.elapsed().as_secs_f64();
    check(
        "projection algebra",
        worst < 1e-10 && wall < 1.0,
        &format!("1000 random normals, worst residual {worst:.2e}, {wall:.3} s (limit 1 s)"),
    );
}

#[test]
fn friction_removal_recovers_the_documented_example_exactly() {
    let config = EstimatorConfig { mu_initial: 0.5, ..EstimatorConfig::default() };
    let state = EstimatorState::new(&config);
    let f_s = Vector3::new(-1.0, 0.0, -2.0);
    let v_hat = Vector3::new(0.01, 0.0, 0.0);
    let (out, _) = estimator::step(&config, &state, &f_s, &v_hat).expect("sliding branch");
    let pass = out.f_n_hat == Vector3::new(0.0, 0.0, -2.0) && out.mu_k == 0.5;
    check(
        "friction worked example",
        pass,
        &format!(
            "f_s = (-1, 0, -2), v = (0.01, 0, 0), mu_avg = 0.5 -> f_n_hat = ({}, {}, {}), mu_k = {} (expected (0, 0, -2) and 0.5, exact)",
            out.f_n_hat.x, out.f_n_hat.y, out.f_n_hat.z, out.mu_k
        ),
    );
}

#[test]
fn plane_normal_estimate_beats_the_friction_bias() {
    let t0 = Instant::now();
    let outcome = sim::compare(&scenario("plane_line")).expect("plane_line must run");
    let wall = t0.elapsed().as_secs_f64();
    let on_deg = outcome.on.summary.normal_angle_error_mean.to_degrees();
    let off_deg = outcome.off.summary.normal_angle_error_mean.to_degrees();
    // With compensation off, the raw force direction is tilted by the full
    // friction cone half-angle atan(mu) = atan(0.3) = 16.70 degrees.
    let pass = on_deg < 1.0 && (off_deg - 16.70).abs() <= 1.0 && wall < 30.0;
    check(
        "plane normal accuracy",
        pass,
        &format!(
            "steady mean angle error: estimator on {on_deg:.3} deg (limit 1), off {off_deg:.3} deg (expected 16.70 +- 1), {wall:.2} s (limit 30 s)"
        ),
    );
}

#[test]
fn friction_coefficient_converges_quietly_and_under_noise() {
    let mut pass = true;
    let mut details = Vec::new();
    for (name, tol) in [("plane_line", 0.01), ("plane_line_noisy", 0.03)] {
        let sc = scenario(name);
        let out = sim::run(&sc).expect("scenario must run");
        let t_eng = engagement_time(&out.records, sc.estimator.f_min);
        let worst = out
            .records
            .iter()
            .filter(|r| r.t >= t_eng + 1.0)
            .map(|r| (r.mu_bar - sc.contact.mu).abs())
            .fold(0.0f64, f64::max);
        pass &= worst < tol;
        details.push(format!(
            "{name}: max |mu_avg - {}| = {worst:.4} after 1 s (tol {tol})",
            sc.contact.mu
        ));
    }
    check("friction convergence", pass, &details.join("; "));
}

#[test]
fn contact_force_settles_near_target_on_every_scenario() {
    let mut pass = true;
    let mut details = Vec::new();
    for name in ["plane_line", "plane_line_noisy", "sine_path", "dome_arc"] {
        let sc = scenario(name);
        let target = sc.controller.f_des.norm();
        let out = sim::run(&sc).expect("scenario must run");
        let t_eng = engagement_time(&out.records, sc.estimator.f_min);
        let trailing: Vec<f64> = out
            .records
            .iter()
            .filter(|r| r.t >= t_eng + 3.0)
            .map(|r| r.f_s.dot(&r.n_true))
            .collect();
        let mean = trailing.iter().sum::<f64>() / trailing.len() as f64;
        pass &= !trailing.is_empty() && (mean - target).abs() <= 0.05 * target;
        details.push(format!("{name}: {mean:.3} N"));
    }
    check(
        "force regulation",
        pass,
        &format!("settled normal force vs 2 N target, 5% band -> {}", details.join(", ")),
    );
}

#[test]
fn estimation_improves_tracking_on_curved_surfaces() {
    let mut pass = true;
    let mut details = Vec::new();
    for name in ["sine_path", "dome_arc"] {
        let outcome = sim::compare(&scenario(name)).expect("scenario must run");
        let on = outcome.on.summary.rms_path_error;
        let off = outcome.off.summary.rms_path_error;
        let gain = (off - on) / off;
        pass &= on < off && gain >= 0.03;
        details.push(format!(
            "{name}: rms {:.3} mm on vs {:.3} mm off ({:.1}% lower)",
            on * 1e3,
            off * 1e3,
            gain * 100.0
        ));
    }
    check("tracking improvement", pass, &details.join("; "));
}

#[test]
fn alignment_gradient_matches_finite_differences() {
    let model = RobotModel::default_arm();
    let mut rng = StdRng::seed_from_u64(0x9afe);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let q = JointVector::from_fn(|_, _| rng.gen_range(-1.5..1.5));
        let n: [f64; 3] = UnitSphere.sample(&mut rng);
        let aim = Unit::new_normalize(Vector3::from(n));
        let g = |q: &JointVector| -aim.dot(&forward_kinematics(&model, q).probe_axis);
        let analytic = orientation_gradient(&model, &q, &aim);
        let mut fd = JointVector::zeros();
        for i in 0..DOF {
            let mut hi = q;
            let mut lo = q;
            hi[i] += h;
            lo[i] -= h;
            fd[i] = (g(&hi) - g(&lo)) / (2.0 * h);
        }
        worst = worst.max((analytic - fd).norm() / fd.norm());
    }
    check(
        "alignment gradient",
        worst < 1e-5,
        &format!("100 random postures, worst relative error vs central differences {worst:.2e} (limit 1e-5)"),
    );
}

#[test]
fn probe_alignment_converges_without_disturbing_the_path() {
    let sc = scenario("plane_line");
    let out = sim::run(&sc).expect("plane_line must run");
    let t_eng = engagement_time(&out.records, sc.estimator.f_min);
    let gamma_eng =
        out.records.iter().find(|r| r.t >= t_eng).map(|r| r.gamma.to_degrees()).unwrap();
    let gamma_5s =
        out.records.iter().find(|r| r.t >= t_eng + 5.0).map(|r| r.gamma.to_degrees()).unwrap();

    let mut plain = sc.clone();
    plain.controller.orientation_enabled = false;
    let out_plain = sim::run(&plain).expect("baseline must run");
    let rel = (out.summary.rms_path_error - out_plain.summary.rms_path_error).abs()
        / out_plain.summary.rms_path_error;

    let pass = gamma_eng <= 60.0 && gamma_5s < 2.0 && rel < 0.05;
    check(
        "orientation convergence",
        pass,
        &format!(
            "probe misalignment {gamma_eng:.1} deg at contact -> {gamma_5s:.2} deg after 5 s (limit 2); path rms shift vs alignment off {:.3}% (limit 5%)",
            rel * 100.0
        ),
    );
}

#[test]
fn fixed_seed_runs_are_bitwise_identical() {
    let mut pass = true;
    let mut details = Vec::new();
    for name in ["plane_line", "plane_line_noisy", "sine_path", "dome_arc"] {
        let sc = scenario(name);
        let mut first = Vec::new();
        let mut second = Vec::new();
        sim::write_csv(&mut first, &sim::run(&sc).expect("run").records).expect("csv");
        sim::write_csv(&mut second, &sim::run(&sc).expect("run").records).expect("csv");
        pass &= first == second;
        details.push(format!("{name}: {} bytes", first.len()));
    }
    check("determinism", pass, &format!("repeated runs byte-identical -> {}", details.join(", ")));
}

#[test]
fn twenty_second_run_finishes_well_under_the_budget() {
    let mut sc = scenario("plane_line");
    sc.duration = 20.0;
    let steps = sc.step_count();
    let t0 = Instant::now();
    let out = sim::run(&sc).expect("long run must complete");
    let wall = t0.elapsed().as_secs_f64();
    let pass = steps == 20_000 && out.records.len() >= steps && wall < 60.0;
    check(
        "throughput",
        pass,
        &format!(
            "{} records ({steps} contact steps) in {wall:.2} s (limit 60 s)",
            out.records.len()
        ),
    );
}
