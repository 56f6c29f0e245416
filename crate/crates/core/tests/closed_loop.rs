//! Integration tests for the simulation harness: phase structure, failure
//! modes, metric bookkeeping, and the equivalence of the estimator-on and
//! estimator-off loops when there is no friction to compensate.

use std::path::PathBuf;

use approx::assert_relative_eq;
use nalgebra::Vector3;

use surftrace::error::Error;
use surftrace::scenario::{parse_override, KeyValue, Scenario};
use surftrace::sim::{self, MetricsOpts, StepRecord};

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.cfg"))
}

fn load(name: &str, overrides: &[KeyValue]) -> Scenario {
    Scenario::load(&scenario_path(name), overrides)
        .unwrap_or_else(|e| panic!("loading {name}: {e}"))
}

fn csv_bytes(records: &[StepRecord]) -> Vec<u8> {
    let mut buf = Vec::new();
    sim::write_csv(&mut buf, records).expect("writing to a Vec cannot fail");
    buf
}

/// With a frictionless surface there is nothing to compensate: the cleaned
/// force equals the raw force and the estimated normal equals the measured
/// direction, so running with the estimator in the loop must reproduce the
/// frozen-normal baseline bit for bit. The huge speed threshold additionally
/// pins the estimator to its pass-through branch, making the equivalence
/// independent of numerical slip noise.
#[test]
fn frictionless_plane_estimator_modes_agree_bitwise() {
    let overrides = [
        parse_override("contact.mu=0.0").expect("valid override"),
        parse_override("estimator.v_epsilon=1e9").expect("valid override"),
    ];
    let sc = load("plane_line", &overrides);
    let outcome = sim::compare(&sc).expect("comparison must run");
    assert_eq!(outcome.on.records.len(), outcome.off.records.len());
    assert_eq!(
        csv_bytes(&outcome.on.records),
        csv_bytes(&outcome.off.records),
        "estimator on/off must be indistinguishable without friction"
    );
}

#[test]
fn zero_duration_yields_an_empty_run() {
    let mut sc = load("plane_line", &[]);
    sc.duration = 0.0;
    let out = sim::run(&sc).expect("empty run is not an error");
    assert!(out.records.is_empty());
    assert_eq!(out.summary.steps, 0);
    assert_eq!(out.summary.rms_path_error, 0.0);
    assert_eq!(out.summary.mu_final, 0.0);
}

#[test]
fn unreachable_surface_reports_no_contact() {
    let text = r#"
duration = 1.0
rate = 1000.0

[surface]
kind = "plane"
point = [0.0, 0.0, -5.0]

[path]
start = [0.30, 0.0, 0.0]
end = [0.40, 0.0, 0.0]
"#;
    let sc = Scenario::from_toml(text, "abyss", &[]).expect("scenario must validate");
    match sim::run(&sc) {
        Err(Error::NoContactReached { cap_s }) => assert_eq!(cap_s, 5.0),
        other => panic!("expected a no-contact error, got {other:?}"),
    }
}

#[test]
fn time_axis_and_engagement_are_well_formed() {
    let sc = load("plane_line", &[]);
    let out = sim::run(&sc).expect("plane_line must run");
    let dt = 1.0 / sc.rate;

    assert_eq!(out.records[0].t, 0.0);
    for (k, r) in out.records.iter().enumerate() {
        assert_eq!(r.t, k as f64 * dt, "time stamps must be exact multiples of the period");
    }

    let engaged = out
        .records
        .iter()
        .position(|r| r.f_s.norm() >= sc.estimator.f_min)
        .expect("the probe must reach the surface");
    assert!(engaged > 0, "the arm starts hovering, not in contact");
    for r in &out.records[..engaged] {
        assert!(r.f_s.norm() < sc.estimator.f_min);
        assert_eq!(r.mu_bar, sc.estimator.mu_initial, "no friction data before contact");
    }
    assert_eq!(
        out.records.len(),
        engaged + sc.step_count(),
        "every contact cycle after engagement must be recorded"
    );
}

#[test]
fn joint_speeds_stay_bounded_on_all_scenarios() {
    for name in ["plane_line", "plane_line_noisy", "sine_path", "dome_arc"] {
        let sc = load(name, &[]);
        let out = sim::run(&sc).expect("scenario must run");
        let max_qd = out
            .records
            .windows(2)
            .map(|w| (w[1].q - w[0].q).norm() * sc.rate)
            .fold(0.0f64, f64::max);
        assert!(max_qd < 5.0, "{name}: joint-speed norm hit {max_qd:.2} rad/s");
    }
}

#[test]
fn summary_matches_an_independent_recomputation() {
    let sc = load("plane_line", &[]);
    let out = sim::run(&sc).expect("plane_line must run");
    let opts = MetricsOpts::for_scenario(&sc);

    // The summary attached to the run must be exactly what `summarize`
    // produces for the same records.
    let again = sim::summarize(&out.records, &opts);
    assert_eq!(out.summary.rms_path_error, again.rms_path_error);
    assert_eq!(out.summary.normal_angle_error_mean, again.normal_angle_error_mean);
    assert_eq!(out.summary.force_error_rms, again.force_error_rms);
    assert_eq!(out.summary.steps, again.steps);

    // Recompute the headline numbers straight from the documented formulas.
    let t_eng = out
        .records
        .iter()
        .find(|r| r.f_s.norm() >= opts.contact_threshold)
        .map(|r| r.t)
        .expect("must engage");
    let settled: Vec<&StepRecord> = out
        .records
        .iter()
        .filter(|r| r.f_s.norm() >= opts.contact_threshold || r.t >= t_eng)
        .filter(|r| r.t - t_eng >= 0.5)
        .collect();
    assert!(!settled.is_empty());

    let n = settled.len() as f64;
    let rms = (settled
        .iter()
        .map(|r| {
            let contact_point = r.x_ee - opts.probe_radius * r.n_true;
            (contact_point - r.x_des).norm_squared()
        })
        .sum::<f64>()
        / n)
        .sqrt();
    assert_relative_eq!(out.summary.rms_path_error, rms, max_relative = 1e-12);

    let force_rms =
        (settled.iter().map(|r| (r.f_s.dot(&r.n_true) - opts.target_force).powi(2)).sum::<f64>()
            / n)
            .sqrt();
    assert_relative_eq!(out.summary.force_error_rms, force_rms, max_relative = 1e-12);

    assert_eq!(out.summary.mu_final, out.records.last().unwrap().mu_bar);
    assert_eq!(out.summary.steps, out.records.len());
}

#[test]
fn csv_layout_matches_the_records() {
    let sc = load("plane_line", &[]);
    let out = sim::run(&sc).expect("plane_line must run");
    let text = String::from_utf8(csv_bytes(&out.records)).expect("csv is ascii");
    let mut lines = text.lines();

    let header = lines.next().expect("header line");
    assert_eq!(header, sim::CSV_HEADER);
    let columns = header.split(',').count();

    let mut rows = 0usize;
    for line in lines {
        assert_eq!(line.split(',').count(), columns, "ragged csv row");
        rows += 1;
    }
    assert_eq!(rows, out.records.len());

    // Spot-check the first data row against the first record.
    let first: Vec<f64> = text
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(|f| f.parse().expect("numeric field"))
        .collect();
    assert_eq!(first.len(), columns);
    assert_eq!(first[0], out.records[0].t);
    for i in 0..7 {
        assert_relative_eq!(first[1 + i], out.records[0].q[i], max_relative = 1e-8);
    }
    let x_ee = Vector3::new(first[8], first[9], first[10]);
    assert_relative_eq!(x_ee, out.records[0].x_ee, max_relative = 1e-8);
}

#[test]
fn comparison_runs_share_the_time_base() {
    let outcome = sim::compare(&load("sine_path", &[])).expect("sine_path must run");
    assert_eq!(outcome.on.records.len(), outcome.off.records.len());
    for (a, b) in outcome.on.records.iter().zip(&outcome.off.records) {
        assert_eq!(a.t, b.t);
    }
    assert!(
        outcome.off.summary.normal_angle_error_mean > outcome.on.summary.normal_angle_error_mean,
        "the frozen-normal baseline must not beat the estimator on a curved surface"
    );
    // The baseline always reports its configured initial friction value.
    let mu0 = outcome.off.records.first().unwrap().mu_bar;
    assert!(outcome.off.records.iter().all(|r| r.mu_bar == mu0));
}
