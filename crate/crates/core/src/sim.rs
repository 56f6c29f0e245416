//! Deterministic closed-loop simulation: kinematics, hybrid controller,
//! contact physics, and the normal estimator wired together at a fixed rate.
//!
//! A run has two phases. During the *approach*, the arm moves under plain
//! resolved-rate control toward a point slightly inside the surface at the
//! start of the reference path; the phase ends at the first force reading
//! above the estimator's contact threshold (or fails after a time cap). The
//! *hybrid* phase then executes the reference path for the configured
//! duration: force is regulated along the live control normal, motion tracks
//! the tangent-projected path velocity, and the redundancy aligns the probe
//! axis with the normal.
//!
//! The probe is a ball: physics acts at the ball surface (one radius from the
//! commanded center), so the motion reference keeps the center one radius
//! outside the contact point. The configured hover offset is added to the
//! reference and subtracted again in the tracking error - it orients the
//! standoff bookkeeping without biasing the loop.
//!
//! Everything is seed-deterministic: repeated runs of the same scenario
//! produce bitwise-identical logs.

use std::collections::VecDeque;
use std::io::{self, Write};

use nalgebra::{Unit, Vector3};
use rand::rngs::StdRng;
use rand::SeedableRng;

use crate::contact::{self, ForceReading};
use crate::controller::{
    self, admittance_velocity, alignment_angle, force_error, frame_from_normal, hover_offset,
    orientation_rho, oriented_normal, precision_term, projections, slew_normal, OffsetFrame,
    FRAME_SLEW_LIMIT,
};
use crate::error::{Error, Result};
use crate::estimator::{self, weighted_average, EstimatorState};
use crate::kinematics::{forward_kinematics, resolved_rate_step, JointVector};
use crate::scenario::Scenario;

/// Approach-phase time cap in seconds.
pub const APPROACH_CAP_S: f64 = 5.0;
/// How far past tangency the approach aims, to guarantee a firm first touch.
const APPROACH_OVERSHOOT_M: f64 = 2e-3;
/// Settling window after first contact excluded from RMS/mean metrics.
pub const TRANSIENT_EXCLUDE_S: f64 = 0.5;
/// Averaging horizon for the velocity hint handed to the normal estimator.
/// Sensor noise reaches the commanded velocity through the admittance term;
/// unfiltered, it tilts the hint out of the tangent plane and normal force
/// bleeds into the friction numerator.
const VELOCITY_HINT_FILTER_S: f64 = 0.02;
/// Position-norm bound beyond which the run is declared divergent.
const DIVERGENCE_BOUND_M: f64 = 10.0;
/// Commanded joint-speed norm above which a warning is logged.
const JOINT_SPEED_WARN: f64 = 10.0;

/// One control cycle of logged state.
#[derive(Debug, Clone)]
pub struct StepRecord {
    /// Time since the start of the run (s); increments by one control period.
    pub t: f64,
    /// Joint angles at the start of the cycle (rad).
    pub q: JointVector,
    /// Probe-center position (m).
    pub x_ee: Vector3<f64>,
    /// Contact-path point currently targeted (m).
    pub x_des: Vector3<f64>,
    /// Sensed force (N).
    pub f_s: Vector3<f64>,
    /// Friction-compensated force (equals `f_s` when the estimator is off).
    pub f_n_hat: Vector3<f64>,
    /// Normal estimate reported this cycle (unit).
    pub n_surf_hat: Vector3<f64>,
    /// Ground-truth outward normal at the contact point (unit).
    pub n_true: Vector3<f64>,
    /// Friction-coefficient window average used this cycle.
    pub mu_bar: f64,
    /// Friction-coefficient sample produced this cycle.
    pub mu_k: f64,
    /// Probe-axis misalignment angle (rad).
    pub gamma: f64,
    /// Norm of the controller tracking error (m).
    pub e_norm: f64,
}

/// Aggregate run metrics over the hybrid (in-contact) phase.
#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    /// RMS distance between the radius-corrected probe position and the
    /// desired contact path (m), excluding the settling window.
    pub rms_path_error: f64,
    /// Worst-case path distance (m), settling window included.
    pub max_path_error: f64,
    /// Mean angle between the reported and true normals (rad), excluding the
    /// settling window.
    pub normal_angle_error_mean: f64,
    /// Worst-case normal angle (rad), settling window included.
    pub normal_angle_error_max: f64,
    /// RMS deviation of the true normal force from its target (N), excluding
    /// the settling window.
    pub force_error_rms: f64,
    /// Final friction-coefficient window average.
    pub mu_final: f64,
    /// Total number of recorded steps (approach + hybrid).
    pub steps: usize,
}

/// Inputs `summarize` needs beyond the records themselves.
#[derive(Debug, Clone)]
pub struct MetricsOpts {
    /// Ball-probe radius used to project the probe center onto the surface.
    pub probe_radius: f64,
    /// Target normal-force magnitude (N).
    pub target_force: f64,
    /// Force norm that marks the start of the in-contact phase (N).
    pub contact_threshold: f64,
}

impl MetricsOpts {
    pub fn for_scenario(scenario: &Scenario) -> Self {
        Self {
            probe_radius: scenario.controller.probe_radius,
            target_force: scenario.controller.f_des.norm(),
            contact_threshold: scenario.estimator.f_min,
        }
    }
}

/// Records plus their summary.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<StepRecord>,
    pub summary: RunSummary,
}

/// Paired estimator-on / estimator-off outputs of the same scenario.
#[derive(Debug, Clone)]
pub struct CompareOutcome {
    pub on: RunOutput,
    pub off: RunOutput,
}

/// Samples the force sensor for a ball probe centered at `center`.
///
/// The contact point sits one probe radius from the center, toward the
/// surface; returns the reading and the true outward normal there.
fn sense_at(
    scenario: &Scenario,
    center: &Vector3<f64>,
    velocity: &Vector3<f64>,
    rng: &mut StdRng,
) -> Result<(ForceReading, Unit<Vector3<f64>>)> {
    let center_query = scenario.surface.query(center)?;
    let tip = center - scenario.controller.probe_radius * center_query.true_normal.into_inner();
    let reading = contact::sense(&scenario.surface, &scenario.contact, &tip, velocity, rng)?;
    let contact_query = scenario.surface.query(&tip)?;
    Ok((reading, contact_query.true_normal))
}

fn check_divergence(
    step: usize,
    t: f64,
    q: &JointVector,
    x: &Vector3<f64>,
    records: &mut Vec<StepRecord>,
) -> Result<()> {
    let reason = if q.iter().any(|v| !v.is_finite()) {
        Some("joint state is not finite".to_string())
    } else if x.iter().any(|v| !v.is_finite()) {
        Some("probe position is not finite".to_string())
    } else if x.norm() > DIVERGENCE_BOUND_M {
        Some(format!("probe position left the sane region (|x| = {:.3} m)", x.norm()))
    } else {
        None
    };
    match reason {
        Some(reason) => {
            Err(Error::SimulationDiverged { step, t, reason, partial: std::mem::take(records) })
        }
        None => Ok(()),
    }
}

/// Executes a scenario and returns every step record plus summary metrics.
pub fn run(scenario: &Scenario) -> Result<RunOutput> {
    let opts = MetricsOpts::for_scenario(scenario);
    if scenario.duration <= 0.0 {
        return Ok(RunOutput { records: Vec::new(), summary: summarize(&[], &opts) });
    }

    let dt = 1.0 / scenario.rate;
    let hybrid_steps = scenario.step_count();
    let path = scenario.surface.desired_path(&scenario.path)?;
    let model = &scenario.robot;
    let ctrl = &scenario.controller;
    let est_cfg = &scenario.estimator;

    let mut rng = StdRng::seed_from_u64(scenario.seed);
    let mut records: Vec<StepRecord> = Vec::with_capacity(hybrid_steps + 64);
    let mut q = scenario.q_init;
    let mut pose = forward_kinematics(model, &q);
    let mut v_real = Vector3::zeros();
    let mut step_index = 0usize;
    let mut warned_speed = false;
    let mut warned_range = false;

    // The initial nominal normal anchors the estimator-off baseline and the
    // world-frame offset mode.
    let n_frozen = oriented_normal(&path[0].normal, &ctrl.f_des, None);
    let mut n_ctrl = n_frozen;
    let mut n_raw_held = n_frozen; // estimator-off recorded direction, held across dropouts

    // ---- approach: plain resolved-rate toward a slightly buried target ----
    let approach_target =
        path[0].position + (ctrl.probe_radius - APPROACH_OVERSHOOT_M) * path[0].normal.into_inner();
    let approach_cap = (APPROACH_CAP_S * scenario.rate).round() as usize;
    let mut engaged: Option<(ForceReading, Unit<Vector3<f64>>)> = None;
    for _ in 0..approach_cap {
        let (reading, n_true) = sense_at(scenario, &pose.position, &v_real, &mut rng)?;
        if reading.force.norm() >= est_cfg.f_min {
            engaged = Some((reading, n_true));
            break;
        }
        let t = step_index as f64 * dt;
        records.push(StepRecord {
            t,
            q,
            x_ee: pose.position,
            x_des: path[0].position,
            f_s: reading.force,
            f_n_hat: reading.force,
            n_surf_hat: n_ctrl.into_inner(),
            n_true: n_true.into_inner(),
            mu_bar: est_cfg.mu_initial,
            mu_k: est_cfg.mu_initial,
            gamma: alignment_angle(&n_ctrl, &pose.probe_axis),
            e_norm: (approach_target - pose.position).norm(),
        });

        let phidot = resolved_rate_step(
            model,
            &q,
            &approach_target,
            &ctrl.k_motion,
            &JointVector::zeros(),
            ctrl.lambda,
        )?;
        q += phidot * dt;
        let new_pose = forward_kinematics(model, &q);
        v_real = (new_pose.position - pose.position) / dt;
        pose = new_pose;
        step_index += 1;
        check_divergence(step_index, step_index as f64 * dt, &q, &pose.position, &mut records)?;
    }
    let (mut reading, mut n_true) = match engaged {
        Some(pair) => pair,
        None => return Err(Error::NoContactReached { cap_s: APPROACH_CAP_S }),
    };

    // ---- hybrid force-motion phase ----
    let mut est_state = EstimatorState::new(est_cfg);
    // Estimator input: the full task-space velocity commanded on recent
    // cycles (none yet on the first contact cycle), averaged over a short
    // horizon. In a resolved-rate loop the command is the realized velocity,
    // so its direction is the actual slip direction; deriving it from the
    // estimated tangent instead would couple the velocity hint to the normal
    // estimate and let a consistently wrong normal mask the friction it
    // should expose. The average suppresses sensor noise relayed by the
    // admittance term, which would otherwise tilt the hint off the surface
    // and bleed normal force into the friction numerator.
    let hint_window = ((VELOCITY_HINT_FILTER_S * scenario.rate).round() as usize).max(1);
    let mut hint_history: VecDeque<Vector3<f64>> = VecDeque::with_capacity(hint_window + 1);
    let mut v_hat = Vector3::zeros();

    for k in 0..hybrid_steps {
        let t = step_index as f64 * dt;

        let (f_n_hat, n_reported, mu_bar, mu_k) = if est_cfg.enabled {
            let mu_bar = weighted_average(est_cfg, &est_state);
            let (out, next) = estimator::step(est_cfg, &est_state, &reading.force, &v_hat)?;
            est_state = next;
            (out.f_n_hat, out.n_surf_hat, mu_bar, out.mu_k)
        } else {
            // Baseline: report the raw force direction, hold across dropouts.
            if reading.force.norm() >= est_cfg.f_min {
                n_raw_held = Unit::new_normalize(reading.force);
            }
            (reading.force, n_raw_held, est_cfg.mu_initial, est_cfg.mu_initial)
        };

        // The control normal follows the estimate only when estimation is
        // enabled; the baseline keeps the initial nominal direction. The
        // frame is rate-limited so a transiently biased estimate (raw force
        // direction before the friction window converges) cannot yank the
        // force subspace around.
        n_ctrl = if est_cfg.enabled {
            let target = oriented_normal(&n_reported, &ctrl.f_des, Some(&n_ctrl));
            slew_normal(&n_ctrl, &target, FRAME_SLEW_LIMIT * dt)
        } else {
            n_frozen
        };
        let frame = frame_from_normal(&n_ctrl);
        let pair = projections(&frame);

        // Force loop: regulate the configured force magnitude along the live
        // normal. The sensed reaction is negated into the force the probe
        // applies, which is what the target describes.
        let f_des_eff = -ctrl.f_des.norm() * n_ctrl.into_inner();
        let f_err = force_error(&f_des_eff, &(-reading.force));
        let v_adm = admittance_velocity(ctrl, &f_err);

        // Motion loop: tangential feedforward along the reference path.
        let sample = &path[k.min(path.len() - 1)];
        let next_sample = &path[(k + 1).min(path.len() - 1)];
        let v_des = (next_sample.position - sample.position) * scenario.rate;

        // Tracking error: reference = contact point + hover standoff; the
        // error subtracts the standoff again except for the ball radius the
        // probe physically occupies.
        let n_offset = match ctrl.offset_frame {
            OffsetFrame::Normal => n_ctrl,
            OffsetFrame::World => n_frozen,
        };
        let hover = hover_offset(ctrl, &n_offset);
        let x_ref = sample.position + hover;
        let standoff = hover - ctrl.probe_radius * n_offset.into_inner();
        let e = (x_ref - pose.position) - standoff;
        let xi_h = precision_term(ctrl, &pair, &e, &e);

        let rho = if ctrl.orientation_enabled {
            orientation_rho(model, &q, &n_ctrl, ctrl.alpha)
        } else {
            JointVector::zeros()
        };
        let phidot = controller::command(model, &q, ctrl, &pair, &v_des, &v_adm, &xi_h, &rho)?;

        records.push(StepRecord {
            t,
            q,
            x_ee: pose.position,
            x_des: sample.position,
            f_s: reading.force,
            f_n_hat,
            n_surf_hat: n_reported.into_inner(),
            n_true: n_true.into_inner(),
            mu_bar,
            mu_k,
            gamma: alignment_angle(&n_ctrl, &pose.probe_axis),
            e_norm: e.norm(),
        });

        if !warned_speed && phidot.norm() > JOINT_SPEED_WARN {
            warned_speed = true;
            log::warn!(
                "commanded joint speed {:.2} rad/s exceeds {JOINT_SPEED_WARN} rad/s at t = {t:.3} s",
                phidot.norm()
            );
        }
        if !warned_range && q.iter().any(|qi| qi.abs() > std::f64::consts::TAU) {
            warned_range = true;
            log::warn!("a joint angle left the +-2*pi range at t = {t:.3} s");
        }

        q += phidot * dt;
        let new_pose = forward_kinematics(model, &q);
        v_real = (new_pose.position - pose.position) / dt;
        hint_history.push_back(pair.force * v_adm + pair.motion * v_des + xi_h);
        if hint_history.len() > hint_window {
            hint_history.pop_front();
        }
        v_hat = hint_history.iter().sum::<Vector3<f64>>() / hint_history.len() as f64;
        pose = new_pose;
        step_index += 1;
        check_divergence(step_index, step_index as f64 * dt, &q, &pose.position, &mut records)?;

        if k + 1 < hybrid_steps {
            let sensed = sense_at(scenario, &pose.position, &v_real, &mut rng)?;
            reading = sensed.0;
            n_true = sensed.1;
        }
    }

    let summary = summarize(&records, &opts);
    Ok(RunOutput { records, summary })
}

/// Runs the scenario twice - estimator enabled and disabled - with identical
/// seeds, concurrently (the two runs share nothing).
pub fn compare(scenario: &Scenario) -> Result<CompareOutcome> {
    let mut enabled = scenario.clone();
    enabled.estimator.enabled = true;
    let mut disabled = scenario.clone();
    disabled.estimator.enabled = false;

    let (on, off) = std::thread::scope(|scope| {
        let on = scope.spawn(|| run(&enabled));
        let off = scope.spawn(|| run(&disabled));
        (
            on.join().expect("estimator-on run panicked"),
            off.join().expect("estimator-off run panicked"),
        )
    });
    Ok(CompareOutcome { on: on?, off: off? })
}

/// Computes summary metrics from records.
///
/// Metrics cover the in-contact phase, detected as the first record whose
/// force norm reaches the contact threshold. RMS and mean metrics skip the
/// settling window ([`TRANSIENT_EXCLUDE_S`]) after that record unless the run
/// is too short to have post-transient samples; the max metrics include it.
pub fn summarize(records: &[StepRecord], opts: &MetricsOpts) -> RunSummary {
    let mut summary = RunSummary { steps: records.len(), ..Default::default() };
    let engaged = match records.iter().position(|r| r.f_s.norm() >= opts.contact_threshold) {
        Some(idx) => idx,
        None => return summary,
    };
    let t_engaged = records[engaged].t;
    let contact = &records[engaged..];
    summary.mu_final = records.last().map(|r| r.mu_bar).unwrap_or(0.0);

    let path_error = |r: &StepRecord| -> f64 {
        let corrected = r.x_ee - opts.probe_radius * r.n_true;
        (corrected - r.x_des).norm()
    };
    let angle_error = |r: &StepRecord| -> f64 {
        let denom = r.n_surf_hat.norm() * r.n_true.norm();
        if denom <= 0.0 {
            return 0.0;
        }
        (r.n_surf_hat.dot(&r.n_true) / denom).clamp(-1.0, 1.0).acos()
    };

    let mut settled: Vec<&StepRecord> =
        contact.iter().filter(|r| r.t - t_engaged >= TRANSIENT_EXCLUDE_S).collect();
    if settled.is_empty() {
        settled = contact.iter().collect();
    }

    summary.max_path_error = contact.iter().map(&path_error).fold(0.0, f64::max);
    summary.normal_angle_error_max = contact.iter().map(&angle_error).fold(0.0, f64::max);

    let n = settled.len() as f64;
    summary.rms_path_error =
        (settled.iter().map(|r| path_error(r).powi(2)).sum::<f64>() / n).sqrt();
    summary.normal_angle_error_mean = settled.iter().map(|r| angle_error(r)).sum::<f64>() / n;
    summary.force_error_rms =
        (settled.iter().map(|r| (r.f_s.dot(&r.n_true) - opts.target_force).powi(2)).sum::<f64>()
            / n)
            .sqrt();
    summary
}

/// CSV column order; one [`StepRecord`] per line.
pub const CSV_HEADER: &str = "t,q0,q1,q2,q3,q4,q5,q6,\
x_ee_x,x_ee_y,x_ee_z,x_des_x,x_des_y,x_des_z,\
f_s_x,f_s_y,f_s_z,f_n_hat_x,f_n_hat_y,f_n_hat_z,\
n_surf_hat_x,n_surf_hat_y,n_surf_hat_z,n_true_x,n_true_y,n_true_z,\
mu_bar,mu_k,gamma,e_norm";

/// Writes records as CSV with 9-significant-digit scientific notation.
/// The format is plain-text deterministic: identical records give identical
/// bytes.
pub fn write_csv<W: Write>(mut out: W, records: &[StepRecord]) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    let mut line = String::with_capacity(640);
    for r in records {
        line.clear();
        push_field(&mut line, r.t, true);
        for qi in r.q.iter() {
            push_field(&mut line, *qi, false);
        }
        for v in [&r.x_ee, &r.x_des, &r.f_s, &r.f_n_hat, &r.n_surf_hat, &r.n_true] {
            for c in v.iter() {
                push_field(&mut line, *c, false);
            }
        }
        push_field(&mut line, r.mu_bar, false);
        push_field(&mut line, r.mu_k, false);
        push_field(&mut line, r.gamma, false);
        push_field(&mut line, r.e_norm, false);
        writeln!(out, "{line}")?;
    }
    Ok(())
}

fn push_field(line: &mut String, value: f64, first: bool) {
    use std::fmt::Write as _;
    if !first {
        line.push(',');
    }
    write!(line, "{value:.8e}").expect("writing to a String cannot fail");
}

/// Flat key=value rendering of a summary.
pub fn summary_text(name: &str, summary: &RunSummary) -> String {
    format!(
        "scenario = {name}\n\
         steps = {}\n\
         rms_path_error = {:.8e}\n\
         max_path_error = {:.8e}\n\
         normal_angle_error_mean = {:.8e}\n\
         normal_angle_error_max = {:.8e}\n\
         force_error_rms = {:.8e}\n\
         mu_final = {:.8e}\n",
        summary.steps,
        summary.rms_path_error,
        summary.max_path_error,
        summary.normal_angle_error_mean,
        summary.normal_angle_error_max,
        summary.force_error_rms,
        summary.mu_final,
    )
}

/// Flat key=value rendering of an on/off comparison, with relative changes.
pub fn delta_text(name: &str, outcome: &CompareOutcome) -> String {
    let on = &outcome.on.summary;
    let off = &outcome.off.summary;
    let improvement = |on: f64, off: f64| if off > 0.0 { (off - on) / off } else { 0.0 };
    format!(
        "scenario = {name}\n\
         rms_path_error_on = {:.8e}\n\
         rms_path_error_off = {:.8e}\n\
         rms_path_error_improvement = {:.8e}\n\
         max_path_error_on = {:.8e}\n\
         max_path_error_off = {:.8e}\n\
         normal_angle_error_mean_on = {:.8e}\n\
         normal_angle_error_mean_off = {:.8e}\n\
         normal_angle_error_mean_improvement = {:.8e}\n\
         force_error_rms_on = {:.8e}\n\
         force_error_rms_off = {:.8e}\n\
         mu_final_on = {:.8e}\n\
         mu_final_off = {:.8e}\n\
         steps_on = {}\n\
         steps_off = {}\n",
        on.rms_path_error,
        off.rms_path_error,
        improvement(on.rms_path_error, off.rms_path_error),
        on.max_path_error,
        off.max_path_error,
        on.normal_angle_error_mean,
        off.normal_angle_error_mean,
        improvement(on.normal_angle_error_mean, off.normal_angle_error_mean),
        on.force_error_rms,
        off.force_error_rms,
        on.mu_final,
        off.mu_final,
        on.steps,
        off.steps,
    )
}
