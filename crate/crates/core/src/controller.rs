//! Hybrid force-motion control law.
//!
//! Cartesian space is split by a pair of complementary projectors built from
//! the (estimated) surface normal: forces are regulated along the normal
//! through an admittance loop, motion is tracked in the tangent plane, and a
//! proportional precision term tightens both channels. The combined Cartesian
//! command is mapped to joint velocities through the damped pseudoinverse,
//! and the arm's redundancy is spent - through the null-space channel - on
//! rotating the probe axis onto the surface normal by gradient ascent on
//! their alignment.

use nalgebra::{Matrix3, Matrix3x2, Rotation3, Unit, Vector3};

use crate::error::{Error, Result};
use crate::kinematics::{
    damped_pinv, forward_kinematics, jacobians, nullspace_projector, skew, JointVector, RobotModel,
};

/// Joint-space norm cap for the orientation null-space velocity (rad/s);
/// keeps the redundancy channel from chattering at high loop rates.
pub const ORIENTATION_RATE_LIMIT: f64 = 0.5;

/// Angular rate cap for moving the force/motion frame toward a new normal
/// estimate (rad/s). Estimates can jump - a raw force direction is biased by
/// the full friction angle until the friction window has learned the
/// coefficient - and snapping the frame onto a transiently wrong direction
/// leaks friction force into tangential admittance motion, which can lock
/// the loop into a friction-direction chatter cycle. Surface curvature seen
/// while tracing needs well under this rate, so a capped frame follows the
/// converged estimate with zero lag.
pub const FRAME_SLEW_LIMIT: f64 = 0.5;

/// How the configured hover offset (and the probe-radius correction that
/// accompanies it) is oriented.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OffsetFrame {
    /// Offsets follow the live force direction - curved surfaces keep the
    /// standoff perpendicular to the surface.
    Normal,
    /// Offsets are fixed world vectors (their orientation is frozen at the
    /// initial nominal normal).
    World,
}

/// Gains and geometry of the control law.
#[derive(Debug, Clone)]
pub struct ControllerConfig {
    /// Motion-channel proportional gain (diagonal).
    pub k_motion: Matrix3<f64>,
    /// Force-channel proportional gain (diagonal).
    pub k_force: Matrix3<f64>,
    /// Admittance gain mapping force error to velocity (diagonal).
    pub k_admittance: Matrix3<f64>,
    /// Desired contact force applied by the probe (N).
    pub f_des: Vector3<f64>,
    /// Hover offset of the motion reference above the contact point (m).
    pub d_h: Vector3<f64>,
    /// Ball-probe radius: the contact point sits this far from the probe
    /// center along the normal (m).
    pub probe_radius: f64,
    /// Orientation gradient-ascent scale.
    pub alpha: f64,
    /// Control loop rate (Hz); informational for consumers of the config.
    pub rate: f64,
    /// Damping for the pseudoinverse (0 = exact, errors near singularities).
    pub lambda: f64,
    /// Orientation of the hover/probe offsets.
    pub offset_frame: OffsetFrame,
    /// Whether the orientation null-space task runs.
    pub orientation_enabled: bool,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            k_motion: Matrix3::from_diagonal(&Vector3::new(10.0, 10.0, 10.0)),
            k_force: Matrix3::from_diagonal(&Vector3::new(10.0, 10.0, 10.0)),
            k_admittance: Matrix3::from_diagonal(&Vector3::new(0.1, 0.1, 0.1)),
            f_des: Vector3::new(0.0, 0.0, -2.0),
            d_h: Vector3::new(0.0, 0.0, 0.05),
            probe_radius: 0.005,
            alpha: 1.0,
            rate: 1000.0,
            lambda: 1e-3,
            offset_frame: OffsetFrame::Normal,
            orientation_enabled: true,
        }
    }
}

impl ControllerConfig {
    /// Checks the structural invariants; returns one message per violation.
    pub fn validate(&self) -> std::result::Result<(), Vec<String>> {
        let mut problems = Vec::new();
        for (name, gain) in
            [("k_m", &self.k_motion), ("k_f", &self.k_force), ("k_adm", &self.k_admittance)]
        {
            if gain.diagonal().iter().any(|g| !g.is_finite() || *g < 0.0) {
                problems
                    .push(format!("controller.{name} diagonal entries must be finite and >= 0"));
            }
        }
        if !self.f_des.iter().all(|v| v.is_finite()) || self.f_des.norm() <= 0.0 {
            problems.push("controller.f_des must be a finite non-zero vector".to_string());
        }
        if !self.d_h.iter().all(|v| v.is_finite()) {
            problems.push("controller.d_h must be finite".to_string());
        }
        if !self.probe_radius.is_finite() || self.probe_radius < 0.0 {
            problems
                .push(format!("controller.d must be finite and >= 0, got {}", self.probe_radius));
        }
        if !self.alpha.is_finite() || self.alpha <= 0.0 {
            problems.push(format!("controller.alpha must be > 0, got {}", self.alpha));
        }
        if !self.rate.is_finite() || self.rate <= 0.0 {
            problems.push(format!("controller rate must be > 0, got {}", self.rate));
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            problems
                .push(format!("controller.lambda must be finite and >= 0, got {}", self.lambda));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems)
        }
    }
}

/// Force direction plus an orthonormal tangent basis.
#[derive(Debug, Clone)]
pub struct ControlFrame {
    /// Force-controlled direction.
    pub normal: Unit<Vector3<f64>>,
    /// Motion-controlled plane, two orthonormal columns perpendicular to
    /// `normal`.
    pub tangent: Matrix3x2<f64>,
}

/// Complementary projectors onto the force direction and the tangent plane.
#[derive(Debug, Clone)]
pub struct ProjectionPair {
    pub force: Matrix3<f64>,
    pub motion: Matrix3<f64>,
}

/// Builds the control frame from a unit normal.
///
/// The tangent basis is completed deterministically: cross the normal with
/// the world axis it is least aligned with, normalize, and cross again.
pub fn frame_from_normal(normal: &Unit<Vector3<f64>>) -> ControlFrame {
    let n = normal.into_inner();
    let smallest = n.iamin(); // index of the smallest |component|
    let mut axis = Vector3::zeros();
    axis[smallest] = 1.0;
    let t1 = Unit::new_normalize(n.cross(&axis));
    let t2 = n.cross(&t1);
    ControlFrame { normal: *normal, tangent: Matrix3x2::from_columns(&[t1.into_inner(), t2]) }
}

impl ControlFrame {
    /// Builds a frame from a raw (not necessarily unit) direction.
    pub fn from_raw(direction: &Vector3<f64>) -> Result<Self> {
        let norm = direction.norm();
        if norm < 1e-12 {
            return Err(Error::DegenerateFrame { norm });
        }
        Ok(frame_from_normal(&Unit::new_normalize(*direction)))
    }
}

/// Complementary projection matrices for a control frame:
/// `force = N (N^T N)^-1 N^T` and `motion = I - force`.
pub fn projections(frame: &ControlFrame) -> ProjectionPair {
    let n = frame.normal.into_inner();
    let force = n * n.transpose() / n.dot(&n);
    ProjectionPair { force, motion: Matrix3::identity() - force }
}

/// Force error driving the admittance loop: desired minus sensed.
pub fn force_error(f_des: &Vector3<f64>, f_sensed: &Vector3<f64>) -> Vector3<f64> {
    f_des - f_sensed
}

/// Admittance: velocity proportional to the force error.
pub fn admittance_velocity(config: &ControllerConfig, f_err: &Vector3<f64>) -> Vector3<f64> {
    config.k_admittance * f_err
}

/// Precision term: the motion gain acts on the tangent-projected error, the
/// force gain on the normal-projected error.
pub fn precision_term(
    config: &ControllerConfig,
    pair: &ProjectionPair,
    e_motion: &Vector3<f64>,
    e_force: &Vector3<f64>,
) -> Vector3<f64> {
    config.k_motion * (pair.motion * e_motion) + config.k_force * (pair.force * e_force)
}

/// Combined joint-velocity command.
///
/// The desired velocity is confined to the tangent plane and the admittance
/// velocity to the force direction; their sum plus the precision term is
/// mapped through the damped pseudoinverse, and `rho` is added through the
/// null-space so it cannot disturb the Cartesian task.
///
/// Every argument is a distinct physical input to the control law; bundling
/// them into a struct would only move the list somewhere else.
#[allow(clippy::too_many_arguments)]
pub fn command(
    model: &RobotModel,
    q: &JointVector,
    config: &ControllerConfig,
    pair: &ProjectionPair,
    v_des: &Vector3<f64>,
    v_adm: &Vector3<f64>,
    xi_h: &Vector3<f64>,
    rho: &JointVector,
) -> Result<JointVector> {
    let jac = jacobians(model, q);
    let pinv = damped_pinv(&jac.position, config.lambda)?;
    let v_cmd = pair.force * v_adm + pair.motion * v_des;
    let task = pinv * (v_cmd + xi_h);
    let null = nullspace_projector(&jac.position, &pinv) * rho;
    Ok(task + null)
}

/// Gradient of the probe-alignment objective `g = n^T (-probe_axis)` with
/// respect to the joint angles: `-J_ang^T [probe_axis]x n`.
pub fn orientation_gradient(
    model: &RobotModel,
    q: &JointVector,
    n_surf: &Unit<Vector3<f64>>,
) -> JointVector {
    let pose = forward_kinematics(model, q);
    let jac = jacobians(model, q);
    -jac.orientation.transpose() * (skew(&pose.probe_axis.into_inner()) * n_surf.into_inner())
}

/// Null-space velocity for the orientation task: `alpha` times the alignment
/// gradient, capped at [`ORIENTATION_RATE_LIMIT`] in joint-space norm.
pub fn orientation_rho(
    model: &RobotModel,
    q: &JointVector,
    n_surf: &Unit<Vector3<f64>>,
    alpha: f64,
) -> JointVector {
    let mut rho = orientation_gradient(model, q, n_surf) * alpha;
    let norm = rho.norm();
    if norm > ORIENTATION_RATE_LIMIT {
        rho *= ORIENTATION_RATE_LIMIT / norm;
    }
    rho
}

/// Angle between the force direction and the negated probe axis - zero when
/// the probe points straight into the surface.
pub fn alignment_angle(normal: &Unit<Vector3<f64>>, probe_axis: &Unit<Vector3<f64>>) -> f64 {
    normal.dot(&-probe_axis.into_inner()).clamp(-1.0, 1.0).acos()
}

/// Signs a raw normal so it opposes the configured contact force (the frame
/// normal points out of the surface while the force pushes in). Near-zero
/// alignment falls back to continuity with the previous normal.
pub fn oriented_normal(
    raw: &Unit<Vector3<f64>>,
    f_des: &Vector3<f64>,
    previous: Option<&Unit<Vector3<f64>>>,
) -> Unit<Vector3<f64>> {
    let dot = raw.dot(f_des);
    let tie = dot.abs() <= 1e-12 * f_des.norm();
    let flip = if tie {
        match previous {
            Some(prev) => raw.dot(prev) < 0.0,
            None => false,
        }
    } else {
        dot > 0.0
    };
    if flip {
        Unit::new_unchecked(-raw.into_inner())
    } else {
        *raw
    }
}

/// Rotates `current` toward `target` by at most `max_angle` radians along
/// the great circle between them; reaches `target` exactly once it is within
/// the step. Degenerate (antipodal) pairs snap to the target: there is no
/// preferred arc and holding back would freeze the frame.
pub fn slew_normal(
    current: &Unit<Vector3<f64>>,
    target: &Unit<Vector3<f64>>,
    max_angle: f64,
) -> Unit<Vector3<f64>> {
    let angle = current.angle(target);
    if angle <= max_angle {
        return *target;
    }
    current.try_slerp(target, max_angle / angle, 1e-9).unwrap_or(*target)
}

/// World-frame hover offset for the given offset direction: in `Normal`
/// mode the configured offset vector is rotated so its +z axis follows the
/// normal; in `World` mode it is used as-is.
pub fn hover_offset(config: &ControllerConfig, n_offset: &Unit<Vector3<f64>>) -> Vector3<f64> {
    match config.offset_frame {
        OffsetFrame::World => config.d_h,
        OffsetFrame::Normal => {
            let z = Vector3::z_axis();
            match Rotation3::rotation_between(&z, n_offset) {
                Some(rot) => rot * config.d_h,
                // Antipodal: any half-turn perpendicular to z works.
                None => {
                    Rotation3::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI)
                        * config.d_h
                }
            }
        }
    }
}
