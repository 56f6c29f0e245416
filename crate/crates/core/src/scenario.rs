//! Scenario files: the TOML schema tying a robot, a surface, a reference
//! path, contact physics, and the controller/estimator tuning into one
//! runnable description.
//!
//! The schema is strict - unknown keys are rejected with their full key path
//! so typos cannot silently fall back to defaults - and every semantic
//! violation is collected (not just the first) to make `validate` useful.
//!
//! ```toml
//! duration = 10.0          # hybrid-phase length (s)
//! rate = 1000.0            # control rate (Hz)
//! seed = 42                # sensor-noise seed (alias: contact.seed)
//!
//! [surface]
//! kind = "plane"           # "plane" | "sine_extrusion" | "dome"
//! point = [0.0, 0.0, 0.0]
//! normal = [0.0, 0.0, 1.0]
//!
//! [path]
//! start = [0.30, 0.0, 0.0]
//! end = [0.40, 0.0, 0.0]
//! ```
//!
//! Every other table (`robot`, `contact`, `estimator`, `controller`) is
//! optional and falls back to the defaults documented in the README.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::Deserialize;

use crate::contact::ContactParams;
use crate::controller::{ControllerConfig, OffsetFrame};
use crate::error::{Error, Result};
use crate::estimator::EstimatorConfig;
use crate::kinematics::{JointVector, RobotModel, DOF};
use crate::surface::{PathSpec, SurfaceModel};

/// One `key=value` override applied on top of the file contents.
#[derive(Debug, Clone)]
pub struct KeyValue {
    /// Dotted key path, e.g. `contact.mu`.
    pub key: String,
    /// Raw value text; parsed as TOML, falling back to a plain string.
    pub value: String,
}

/// Parses a `key=value` override argument.
pub fn parse_override(arg: &str) -> std::result::Result<KeyValue, String> {
    match arg.split_once('=') {
        Some((key, value)) if !key.trim().is_empty() => {
            Ok(KeyValue { key: key.trim().to_string(), value: value.trim().to_string() })
        }
        _ => Err(format!("override must look like key=value, got `{arg}`")),
    }
}

/// A fully validated, runnable scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    /// Output base name (the file stem for file-loaded scenarios).
    pub name: String,
    pub robot: RobotModel,
    /// Joint angles the run starts from.
    pub q_init: JointVector,
    pub surface: SurfaceModel,
    pub path: PathSpec,
    pub contact: ContactParams,
    pub estimator: EstimatorConfig,
    pub controller: ControllerConfig,
    /// Hybrid-phase duration in seconds.
    pub duration: f64,
    /// Control rate in Hz.
    pub rate: f64,
    /// Seed for the sensor-noise generator.
    pub seed: u64,
}

impl Scenario {
    /// Loads and validates a scenario file, applying overrides on top.
    pub fn load(path: &Path, overrides: &[KeyValue]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::ScenarioIo(format!("{}: {e}", path.display())))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".to_string());
        Self::from_toml(&text, &name, overrides)
    }

    /// Parses and validates scenario text. `name` becomes the output base
    /// name for CSV/summary files.
    pub fn from_toml(text: &str, name: &str, overrides: &[KeyValue]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::ScenarioInvalid(vec![e.to_string()]))?;

        let mut problems = Vec::new();
        for kv in overrides {
            if let Err(msg) = apply_override(&mut table, kv) {
                problems.push(msg);
            }
        }
        if !problems.is_empty() {
            return Err(Error::ScenarioInvalid(problems));
        }

        let raw: RawScenario = serde_path_to_error::deserialize(toml::Value::Table(table))
            .map_err(|e| {
                let path = e.path().to_string();
                let msg = e.into_inner().message().to_string();
                Error::ScenarioInvalid(vec![if path.is_empty() || path == "." {
                    msg
                } else {
                    format!("{path}: {msg}")
                }])
            })?;

        build(raw, name)
    }

    /// Number of hybrid-phase control steps.
    pub fn step_count(&self) -> usize {
        (self.duration * self.rate).round() as usize
    }
}

/// Inserts an override value at a dotted key path, creating intermediate
/// tables as needed. The value text is parsed as TOML; if that fails it is
/// taken as a plain string (so `--set surface.kind=dome` needs no quotes).
fn apply_override(table: &mut toml::Table, kv: &KeyValue) -> std::result::Result<(), String> {
    let value = parse_value_text(&kv.value);
    let segments: Vec<&str> = kv.key.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(format!("{}: override key has an empty path segment", kv.key));
    }
    let mut current = table;
    for segment in &segments[..segments.len() - 1] {
        let entry = current
            .entry(segment.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        current = entry.as_table_mut().ok_or_else(|| {
            format!("{}: `{segment}` holds a value, cannot descend into it", kv.key)
        })?;
    }
    current.insert(segments[segments.len() - 1].to_string(), value);
    Ok(())
}

fn parse_value_text(text: &str) -> toml::Value {
    let wrapped = format!("v = {text}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key v was just parsed"),
        Err(_) => toml::Value::String(text.to_string()),
    }
}

// ---------------------------------------------------------------------------
// Raw (serde) layer: everything optional, unknown keys rejected.
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    duration: Option<f64>,
    rate: Option<f64>,
    seed: Option<u64>,
    robot: Option<RawRobot>,
    surface: RawSurface,
    path: RawPath,
    contact: Option<RawContact>,
    estimator: Option<RawEstimator>,
    controller: Option<RawController>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRobot {
    q_init: Option<[f64; DOF]>,
    joints: Option<Vec<RawJoint>>,
    tool: Option<RawTool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawJoint {
    axis: [f64; 3],
    offset: [f64; 3],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTool {
    offset: [f64; 3],
    approach_axis: [f64; 3],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSurface {
    kind: String,
    // plane
    point: Option<[f64; 3]>,
    normal: Option<[f64; 3]>,
    // sine_extrusion
    amplitude: Option<f64>,
    spatial_frequency: Option<f64>,
    base_height: Option<f64>,
    extrusion_axis: Option<[f64; 3]>,
    // dome
    center: Option<[f64; 3]>,
    radius: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPath {
    start: [f64; 3],
    end: [f64; 3],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawContact {
    stiffness: Option<f64>,
    mu: Option<f64>,
    v_reg: Option<f64>,
    noise_std: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEstimator {
    window: Option<usize>,
    weights: Option<Vec<f64>>,
    v_epsilon: Option<f64>,
    mu_initial: Option<f64>,
    f_min: Option<f64>,
    enabled: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawController {
    k_m: Option<[f64; 3]>,
    k_f: Option<[f64; 3]>,
    k_adm: Option<[f64; 3]>,
    f_des: Option<[f64; 3]>,
    d_h: Option<[f64; 3]>,
    d: Option<f64>,
    alpha: Option<f64>,
    lambda: Option<f64>,
    offset_frame: Option<String>,
    orientation_enabled: Option<bool>,
}

// ---------------------------------------------------------------------------
// Domain construction + semantic validation.
// ---------------------------------------------------------------------------

fn vec3(a: [f64; 3]) -> Vector3<f64> {
    Vector3::new(a[0], a[1], a[2])
}

fn build(raw: RawScenario, name: &str) -> Result<Scenario> {
    let mut problems: Vec<String> = Vec::new();

    let duration = raw.duration.unwrap_or(10.0);
    if !duration.is_finite() || duration <= 0.0 {
        problems.push(format!("duration: must be > 0 seconds, got {duration}"));
    }
    let rate = raw.rate.unwrap_or(1000.0);
    if !rate.is_finite() || rate < 100.0 {
        problems.push(format!("rate: must be >= 100 Hz, got {rate}"));
    }

    // The seed may live at the top level or under [contact]; both name the
    // same generator, so setting both is ambiguous.
    let contact_raw = raw.contact.unwrap_or(RawContact {
        stiffness: None,
        mu: None,
        v_reg: None,
        noise_std: None,
        seed: None,
    });
    let seed = match (raw.seed, contact_raw.seed) {
        (Some(a), Some(b)) => {
            problems.push(format!(
                "seed: set both at the top level ({a}) and as contact.seed ({b}); pick one"
            ));
            a
        }
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (None, None) => 0,
    };

    let (robot, q_init) = build_robot(raw.robot, &mut problems);
    let surface = build_surface(&raw.surface, &mut problems);

    let contact = ContactParams {
        stiffness: contact_raw.stiffness.unwrap_or(5000.0),
        mu: contact_raw.mu.unwrap_or(0.3),
        v_reg: contact_raw.v_reg.unwrap_or(1e-4),
        noise_std: contact_raw.noise_std.unwrap_or(0.0),
    };
    if !contact.stiffness.is_finite() || contact.stiffness <= 0.0 {
        problems.push(format!("contact.stiffness: must be > 0 N/m, got {}", contact.stiffness));
    }
    if !contact.mu.is_finite() || contact.mu < 0.0 {
        problems.push(format!("contact.mu: must be >= 0, got {}", contact.mu));
    }
    if !contact.v_reg.is_finite() || contact.v_reg <= 0.0 {
        problems.push(format!("contact.v_reg: must be > 0 m/s, got {}", contact.v_reg));
    }
    if !contact.noise_std.is_finite() || contact.noise_std < 0.0 {
        problems.push(format!("contact.noise_std: must be >= 0 N, got {}", contact.noise_std));
    }

    let estimator = build_estimator(raw.estimator, &mut problems);
    let controller = build_controller(raw.controller, rate, &mut problems);

    let path = PathSpec { start: vec3(raw.path.start), end: vec3(raw.path.end), duration, rate };
    if (path.start - path.end).norm() <= 1e-9 {
        problems.push("path: start and end coincide; the reference path needs a direction".into());
    }
    // A coarse sampling catches endpoints the surface cannot host (e.g.
    // antipodal dome points, or points that collapse onto the same spot when
    // projected) without paying for the full-rate path.
    if let Some(surface) = &surface {
        if duration > 0.0 && (path.start - path.end).norm() > 1e-9 {
            let coarse = PathSpec { rate: (100.0 / duration).max(1.0), ..path.clone() };
            match surface.desired_path(&coarse) {
                Err(e) => problems.push(format!("path: {e}")),
                Ok(samples) => {
                    let travel = samples
                        .first()
                        .zip(samples.last())
                        .map(|(a, b)| (a.position - b.position).norm())
                        .unwrap_or(0.0);
                    if travel <= 1e-9 {
                        problems.push("path: endpoints project onto the same surface point".into());
                    }
                }
            }
        }
    }

    if problems.is_empty() {
        Ok(Scenario {
            name: name.to_string(),
            robot,
            q_init,
            surface: surface.expect("no problems implies the surface was built"),
            path,
            contact,
            estimator,
            controller,
            duration,
            rate,
            seed,
        })
    } else {
        problems.sort();
        Err(Error::ScenarioInvalid(problems))
    }
}

fn build_robot(raw: Option<RawRobot>, problems: &mut Vec<String>) -> (RobotModel, JointVector) {
    let raw = match raw {
        Some(raw) => raw,
        None => return (RobotModel::default_arm(), JointVector::zeros()),
    };

    let q_init = match raw.q_init {
        Some(q) if q.iter().all(|v| v.is_finite()) => JointVector::from_column_slice(&q),
        Some(_) => {
            problems.push("robot.q_init: entries must be finite".into());
            JointVector::zeros()
        }
        None => JointVector::zeros(),
    };

    let model = match (raw.joints, raw.tool) {
        (None, None) => RobotModel::default_arm(),
        (Some(joints), Some(tool)) => {
            let pairs = joints.into_iter().map(|j| (vec3(j.axis), vec3(j.offset))).collect();
            match RobotModel::new(pairs, vec3(tool.offset), vec3(tool.approach_axis)) {
                Ok(model) => model,
                Err(e) => {
                    problems.push(format!("robot: {e}"));
                    RobotModel::default_arm()
                }
            }
        }
        _ => {
            problems.push(
                "robot: a custom chain needs both robot.joints and robot.tool (or neither)".into(),
            );
            RobotModel::default_arm()
        }
    };
    (model, q_init)
}

fn build_surface(raw: &RawSurface, problems: &mut Vec<String>) -> Option<SurfaceModel> {
    // Keys that belong to a different surface kind are almost certainly a
    // mistake; reject them instead of ignoring them.
    let mut reject_foreign = |kind: &str, foreign: &[(&str, bool)]| {
        for (key, present) in foreign {
            if *present {
                problems.push(format!("surface.{key}: does not apply to kind \"{kind}\""));
            }
        }
    };

    match raw.kind.as_str() {
        "plane" => {
            reject_foreign(
                "plane",
                &[
                    ("amplitude", raw.amplitude.is_some()),
                    ("spatial_frequency", raw.spatial_frequency.is_some()),
                    ("base_height", raw.base_height.is_some()),
                    ("extrusion_axis", raw.extrusion_axis.is_some()),
                    ("center", raw.center.is_some()),
                    ("radius", raw.radius.is_some()),
                ],
            );
            let point = raw.point.map(vec3).unwrap_or_else(Vector3::zeros);
            let normal = raw.normal.map(vec3).unwrap_or_else(Vector3::z);
            match SurfaceModel::plane(point, normal) {
                Ok(s) => Some(s),
                Err(e) => {
                    problems.push(format!("surface: {e}"));
                    None
                }
            }
        }
        "sine_extrusion" => {
            reject_foreign(
                "sine_extrusion",
                &[
                    ("point", raw.point.is_some()),
                    ("normal", raw.normal.is_some()),
                    ("center", raw.center.is_some()),
                    ("radius", raw.radius.is_some()),
                ],
            );
            let amplitude = raw.amplitude.unwrap_or(0.02);
            let k = raw.spatial_frequency.unwrap_or(std::f64::consts::TAU / 0.1);
            let z0 = raw.base_height.unwrap_or(0.0);
            let axis = raw.extrusion_axis.map(vec3).unwrap_or_else(Vector3::y);
            match SurfaceModel::sine_extrusion(amplitude, k, z0, axis) {
                Ok(s) => Some(s),
                Err(e) => {
                    problems.push(format!("surface: {e}"));
                    None
                }
            }
        }
        "dome" => {
            reject_foreign(
                "dome",
                &[
                    ("point", raw.point.is_some()),
                    ("normal", raw.normal.is_some()),
                    ("amplitude", raw.amplitude.is_some()),
                    ("spatial_frequency", raw.spatial_frequency.is_some()),
                    ("base_height", raw.base_height.is_some()),
                    ("extrusion_axis", raw.extrusion_axis.is_some()),
                ],
            );
            let center = raw.center.map(vec3).unwrap_or_else(Vector3::zeros);
            let radius = raw.radius.unwrap_or(0.1);
            match SurfaceModel::dome(center, radius) {
                Ok(s) => Some(s),
                Err(e) => {
                    problems.push(format!("surface: {e}"));
                    None
                }
            }
        }
        other => {
            problems.push(format!(
                "surface.kind: unknown kind \"{other}\" (expected plane, sine_extrusion, or dome)"
            ));
            None
        }
    }
}

fn build_estimator(raw: Option<RawEstimator>, problems: &mut Vec<String>) -> EstimatorConfig {
    let defaults = EstimatorConfig::default();
    let raw = match raw {
        Some(raw) => raw,
        None => return defaults,
    };
    let window = raw.window.unwrap_or(defaults.window);
    let config = EstimatorConfig {
        window,
        weights: raw.weights.unwrap_or_else(|| vec![1.0; window]),
        v_epsilon: raw.v_epsilon.unwrap_or(defaults.v_epsilon),
        mu_initial: raw.mu_initial.unwrap_or(defaults.mu_initial),
        f_min: raw.f_min.unwrap_or(defaults.f_min),
        enabled: raw.enabled.unwrap_or(true),
    };
    if let Err(msgs) = config.validate() {
        problems.extend(msgs.into_iter().map(|m| format!("estimator: {m}")));
    }
    config
}

fn build_controller(
    raw: Option<RawController>,
    rate: f64,
    problems: &mut Vec<String>,
) -> ControllerConfig {
    let defaults = ControllerConfig::default();
    let raw = match raw {
        Some(raw) => raw,
        None => return ControllerConfig { rate, ..defaults },
    };
    let diag = |a: [f64; 3]| Matrix3::from_diagonal(&vec3(a));
    let offset_frame = match raw.offset_frame.as_deref() {
        None => defaults.offset_frame,
        Some("normal") => OffsetFrame::Normal,
        Some("world") => OffsetFrame::World,
        Some(other) => {
            problems.push(format!(
                "controller.offset_frame: expected \"normal\" or \"world\", got \"{other}\""
            ));
            defaults.offset_frame
        }
    };
    let config = ControllerConfig {
        k_motion: raw.k_m.map(diag).unwrap_or(defaults.k_motion),
        k_force: raw.k_f.map(diag).unwrap_or(defaults.k_force),
        k_admittance: raw.k_adm.map(diag).unwrap_or(defaults.k_admittance),
        f_des: raw.f_des.map(vec3).unwrap_or(defaults.f_des),
        d_h: raw.d_h.map(vec3).unwrap_or(defaults.d_h),
        probe_radius: raw.d.unwrap_or(defaults.probe_radius),
        alpha: raw.alpha.unwrap_or(defaults.alpha),
        rate,
        lambda: raw.lambda.unwrap_or(defaults.lambda),
        offset_frame,
        orientation_enabled: raw.orientation_enabled.unwrap_or(true),
    };
    if let Err(msgs) = config.validate() {
        problems.extend(msgs.into_iter().map(|m| {
            if m.starts_with("controller") {
                m
            } else {
                format!("controller: {m}")
            }
        }));
    }
    config
}
