//! Serial-chain kinematics for a 7-DoF revolute manipulator.
//!
//! The chain is purely data-driven: each joint is a rotation axis (fixed in
//! the frame reached after applying the preceding links) plus a constant
//! origin offset from the previous joint frame. A rigid tool transform maps
//! the last joint frame to the probe tip, and a fixed approach axis gives the
//! probe's pointing direction.

use nalgebra::{Matrix3, Rotation3, SMatrix, SVector, Unit, Vector3};

use crate::error::{Error, Result};

/// Number of joints in every model handled by this crate.
pub const DOF: usize = 7;

/// Joint-space vector (positions or velocities), one entry per joint.
pub type JointVector = SVector<f64, DOF>;

/// 3 x 7 task Jacobian block (position or orientation rows).
pub type JacobianBlock = SMatrix<f64, 3, DOF>;

/// Threshold on cond(J J^T) above which an undamped pseudoinverse is refused.
pub const SINGULARITY_CONDITION_LIMIT: f64 = 1e12;

/// One revolute joint: rotation axis in the local frame and the constant
/// offset of this joint's origin from the previous frame.
#[derive(Debug, Clone)]
pub struct RevoluteJoint {
    pub axis: Unit<Vector3<f64>>,
    pub offset: Vector3<f64>,
}

/// Rigid transform from the last joint frame to the probe tip, plus the
/// probe's approach axis in that frame.
#[derive(Debug, Clone)]
pub struct ToolModel {
    pub offset: Vector3<f64>,
    pub approach_axis: Unit<Vector3<f64>>,
}

/// Data-driven 7-DoF serial chain.
#[derive(Debug, Clone)]
pub struct RobotModel {
    joints: [RevoluteJoint; DOF],
    tool: ToolModel,
}

impl RobotModel {
    /// Builds a model from per-joint axes/offsets and a tool transform.
    ///
    /// Axes are normalized here; a zero or non-finite axis, a non-finite
    /// offset, or a joint count other than 7 is rejected.
    pub fn new(
        joints: Vec<(Vector3<f64>, Vector3<f64>)>,
        tool_offset: Vector3<f64>,
        approach_axis: Vector3<f64>,
    ) -> Result<Self> {
        if joints.len() != DOF {
            return Err(Error::InvalidModel(format!(
                "expected {DOF} joints, got {}",
                joints.len()
            )));
        }
        let mut built = Vec::with_capacity(DOF);
        for (i, (axis, offset)) in joints.into_iter().enumerate() {
            if !axis.iter().all(|c| c.is_finite()) || !offset.iter().all(|c| c.is_finite()) {
                return Err(Error::InvalidModel(format!("joint {} has non-finite data", i + 1)));
            }
            let axis = Unit::try_new(axis, 1e-12).ok_or_else(|| {
                Error::InvalidModel(format!("joint {} axis is zero-length", i + 1))
            })?;
            built.push(RevoluteJoint { axis, offset });
        }
        if !tool_offset.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidModel("tool offset is non-finite".into()));
        }
        let approach_axis = Unit::try_new(approach_axis, 1e-12)
            .ok_or_else(|| Error::InvalidModel("tool approach axis is zero-length".into()))?;
        let joints: [RevoluteJoint; DOF] =
            built.try_into().map_err(|_| Error::InvalidModel("joint conversion failed".into()))?;
        Ok(Self { joints, tool: ToolModel { offset: tool_offset, approach_axis } })
    }

    /// Default arm: alternating z/y axes, vertical link stack of roughly 1 m
    /// reach, probe mounted 4 cm off the wrist axis.
    pub fn default_arm() -> Self {
        let z = Vector3::z();
        let y = Vector3::y();
        let joints = vec![
            (z, Vector3::new(0.0, 0.0, 0.20)),
            (y, Vector3::new(0.0, 0.0, 0.15)),
            (z, Vector3::new(0.0, 0.0, 0.15)),
            (y, Vector3::new(0.0, 0.0, 0.15)),
            (z, Vector3::new(0.0, 0.0, 0.15)),
            (y, Vector3::new(0.0, 0.0, 0.10)),
            (z, Vector3::new(0.0, 0.0, 0.10)),
        ];
        Self::new(joints, Vector3::new(0.04, 0.0, 0.09), Vector3::z())
            .expect("default arm is statically valid")
    }

    pub fn joints(&self) -> &[RevoluteJoint; DOF] {
        &self.joints
    }

    pub fn tool(&self) -> &ToolModel {
        &self.tool
    }
}

/// World-frame pose of the probe tip.
#[derive(Debug, Clone)]
pub struct Pose {
    /// Probe-tip (probe-center) position.
    pub position: Vector3<f64>,
    /// Orientation of the last joint frame.
    pub rotation: Rotation3<f64>,
    /// Probe approach axis expressed in the world frame.
    pub probe_axis: Unit<Vector3<f64>>,
}

/// Position and orientation Jacobian blocks at a given posture.
#[derive(Debug, Clone)]
pub struct JacobianPair {
    /// Rows map joint rates to probe-tip linear velocity.
    pub position: JacobianBlock,
    /// Rows map joint rates to tool angular velocity.
    pub orientation: JacobianBlock,
}

/// Intermediate chain state shared by FK and the Jacobians.
struct ChainState {
    joint_origins: [Vector3<f64>; DOF],
    world_axes: [Vector3<f64>; DOF],
    tip: Vector3<f64>,
    rotation: Rotation3<f64>,
}

fn propagate(model: &RobotModel, q: &JointVector) -> ChainState {
    let mut rotation = Rotation3::identity();
    let mut origin = Vector3::zeros();
    let mut joint_origins = [Vector3::zeros(); DOF];
    let mut world_axes = [Vector3::zeros(); DOF];
    for (i, joint) in model.joints.iter().enumerate() {
        origin += rotation * joint.offset;
        joint_origins[i] = origin;
        world_axes[i] = rotation * joint.axis.into_inner();
        rotation *= Rotation3::from_axis_angle(&joint.axis, q[i]);
    }
    let tip = origin + rotation * model.tool.offset;
    ChainState { joint_origins, world_axes, tip, rotation }
}

/// Probe-tip pose at joint position `q`.
pub fn forward_kinematics(model: &RobotModel, q: &JointVector) -> Pose {
    let chain = propagate(model, q);
    let probe_axis = Unit::new_unchecked(chain.rotation * model.tool.approach_axis.into_inner());
    Pose { position: chain.tip, rotation: chain.rotation, probe_axis }
}

/// Geometric Jacobian blocks at joint position `q`.
///
/// Column `i` of the position block is `a_i x (p_tip - p_i)` and column `i`
/// of the orientation block is `a_i`, with `a_i` the world-frame joint axis
/// and `p_i` the world-frame joint origin.
pub fn jacobians(model: &RobotModel, q: &JointVector) -> JacobianPair {
    let chain = propagate(model, q);
    let mut position = JacobianBlock::zeros();
    let mut orientation = JacobianBlock::zeros();
    for i in 0..DOF {
        let lever = chain.tip - chain.joint_origins[i];
        position.set_column(i, &chain.world_axes[i].cross(&lever));
        orientation.set_column(i, &chain.world_axes[i]);
    }
    JacobianPair { position, orientation }
}

/// Damped least-squares pseudoinverse `J^T (J J^T + lambda^2 I)^-1`.
///
/// With `lambda == 0` this is the exact Moore-Penrose inverse for full
/// row-rank `J`; near a singular posture (cond(J J^T) beyond
/// [`SINGULARITY_CONDITION_LIMIT`]) the undamped form is refused instead of
/// returning exploding joint rates.
pub fn damped_pinv(j: &JacobianBlock, lambda: f64) -> Result<SMatrix<f64, DOF, 3>> {
    let gram = j * j.transpose();
    if lambda == 0.0 {
        let eigen = gram.symmetric_eigenvalues();
        let max = eigen.iter().cloned().fold(f64::MIN, f64::max);
        let min = eigen.iter().cloned().fold(f64::MAX, f64::min);
        let cond = if min <= 0.0 { f64::INFINITY } else { max / min };
        if !cond.is_finite() || cond > SINGULARITY_CONDITION_LIMIT {
            return Err(Error::SingularJacobian { cond });
        }
    }
    let damped = gram + Matrix3::identity() * (lambda * lambda);
    let inverse = nalgebra::Cholesky::new(damped)
        .map(|c| c.inverse())
        .or_else(|| damped.try_inverse())
        .ok_or(Error::SingularJacobian { cond: f64::INFINITY })?;
    Ok(j.transpose() * inverse)
}

/// Null-space projector `I - J_pinv J` for redundancy resolution.
pub fn nullspace_projector(
    j: &JacobianBlock,
    j_pinv: &SMatrix<f64, DOF, 3>,
) -> SMatrix<f64, DOF, DOF> {
    SMatrix::<f64, DOF, DOF>::identity() - j_pinv * j
}

/// One resolved-rate joint-velocity command toward a Cartesian target.
///
/// Computes `J_pinv K_ee (x_des - x) + (I - J_pinv J) rho`: a proportional
/// Cartesian velocity toward `x_des` mapped through the damped pseudoinverse,
/// plus an arbitrary joint velocity `rho` projected into the task null space.
pub fn resolved_rate_step(
    model: &RobotModel,
    q: &JointVector,
    x_des: &Vector3<f64>,
    k_ee: &Matrix3<f64>,
    rho: &JointVector,
    lambda: f64,
) -> Result<JointVector> {
    let pose = forward_kinematics(model, q);
    let jac = jacobians(model, q);
    let pinv = damped_pinv(&jac.position, lambda)?;
    let projector = nullspace_projector(&jac.position, &pinv);
    let task = k_ee * (x_des - pose.position);
    Ok(pinv * task + projector * rho)
}

/// Skew-symmetric cross-product matrix: `skew(a) * b == a x b`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use nalgebra::Matrix4;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    /// Independent FK route: accumulate explicit 4x4 homogeneous transforms.
    fn homogeneous_oracle(model: &RobotModel, q: &JointVector) -> (Vector3<f64>, Matrix3<f64>) {
        let mut t = Matrix4::<f64>::identity();
        for (i, joint) in model.joints().iter().enumerate() {
            let mut step = Matrix4::<f64>::identity();
            step.fixed_view_mut::<3, 1>(0, 3).copy_from(&joint.offset);
            let rot = Rotation3::from_axis_angle(&joint.axis, q[i]);
            let mut spin = Matrix4::<f64>::identity();
            spin.fixed_view_mut::<3, 3>(0, 0).copy_from(rot.matrix());
            t = t * step * spin;
        }
        let mut tool = Matrix4::<f64>::identity();
        tool.fixed_view_mut::<3, 1>(0, 3).copy_from(&model.tool().offset);
        t *= tool;
        (t.fixed_view::<3, 1>(0, 3).into_owned(), t.fixed_view::<3, 3>(0, 0).into_owned())
    }

    fn random_posture(rng: &mut StdRng) -> JointVector {
        JointVector::from_fn(|_, _| rng.gen_range(-1.5..1.5))
    }

    /// Random posture that keeps the arm comfortably away from singularities.
    fn random_regular_posture(rng: &mut StdRng, model: &RobotModel) -> JointVector {
        loop {
            let q = random_posture(rng);
            let jac = jacobians(model, &q);
            let gram = jac.position * jac.position.transpose();
            let eigen = gram.symmetric_eigenvalues();
            let max = eigen.iter().cloned().fold(f64::MIN, f64::max);
            let min = eigen.iter().cloned().fold(f64::MAX, f64::min);
            if min > 1e-6 * max && min > 1e-9 {
                return q;
            }
        }
    }

    #[test]
    fn home_position_is_sum_of_offsets() {
        let model = RobotModel::default_arm();
        let pose = forward_kinematics(&model, &JointVector::zeros());
        let expected: Vector3<f64> =
            model.joints().iter().map(|j| j.offset).sum::<Vector3<f64>>() + model.tool().offset;
        assert_abs_diff_eq!(pose.position, expected, epsilon = 1e-15);
        assert_abs_diff_eq!(*pose.rotation.matrix(), Matrix3::identity(), epsilon = 1e-15);
    }

    #[test]
    fn base_joint_half_turn_negates_lateral_components() {
        let model = RobotModel::default_arm();
        let home = forward_kinematics(&model, &JointVector::zeros()).position;
        assert!(home.x.abs() > 1e-3, "test needs a laterally offset tool");
        let mut q = JointVector::zeros();
        q[0] = std::f64::consts::PI;
        let rotated = forward_kinematics(&model, &q).position;
        assert_abs_diff_eq!(rotated.x, -home.x, epsilon = 1e-12);
        assert_abs_diff_eq!(rotated.y, -home.y, epsilon = 1e-12);
        assert_abs_diff_eq!(rotated.z, home.z, epsilon = 1e-12);
    }

    #[test]
    fn forward_kinematics_matches_homogeneous_oracle() {
        let model = RobotModel::default_arm();
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..50 {
            let q = random_posture(&mut rng);
            let pose = forward_kinematics(&model, &q);
            let (oracle_pos, oracle_rot) = homogeneous_oracle(&model, &q);
            assert_abs_diff_eq!(pose.position, oracle_pos, epsilon = 1e-12);
            assert_abs_diff_eq!(*pose.rotation.matrix(), oracle_rot, epsilon = 1e-12);
            let probe = oracle_rot * model.tool().approach_axis.into_inner();
            assert_abs_diff_eq!(pose.probe_axis.into_inner(), probe, epsilon = 1e-12);
        }
    }

    #[test]
    fn first_orientation_column_is_world_z() {
        let model = RobotModel::default_arm();
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..10 {
            let q = random_posture(&mut rng);
            let jac = jacobians(&model, &q);
            assert_abs_diff_eq!(
                Vector3::from(jac.orientation.column(0)),
                Vector3::z(),
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn planar_lever_gives_tangential_column() {
        // Seven coincident z-axis joints with the tool 1 m out along x reduce
        // to a planar single-link arm; every position column is then z x x = y.
        let joints = vec![(Vector3::z(), Vector3::zeros()); DOF];
        let model = RobotModel::new(joints, Vector3::x(), Vector3::z()).unwrap();
        let jac = jacobians(&model, &JointVector::zeros());
        assert_abs_diff_eq!(Vector3::from(jac.position.column(0)), Vector3::y(), epsilon = 1e-15);
    }

    #[test]
    fn position_jacobian_matches_central_differences() {
        let model = RobotModel::default_arm();
        let mut rng = StdRng::seed_from_u64(42);
        let h = 1e-6;
        for _ in 0..100 {
            let q = random_posture(&mut rng);
            let jac = jacobians(&model, &q);
            for col in 0..DOF {
                let mut plus = q;
                let mut minus = q;
                plus[col] += h;
                minus[col] -= h;
                let fd = (forward_kinematics(&model, &plus).position
                    - forward_kinematics(&model, &minus).position)
                    / (2.0 * h);
                assert_abs_diff_eq!(Vector3::from(jac.position.column(col)), fd, epsilon = 1e-6);
            }
        }
    }

    /// Independent pseudoinverse route: SVD with Tikhonov-filtered singular values.
    fn svd_tikhonov_oracle(j: &JacobianBlock, lambda: f64) -> SMatrix<f64, DOF, 3> {
        let svd = j.svd(true, true);
        let u = svd.u.unwrap();
        let v_t = svd.v_t.unwrap();
        let mut filtered = SMatrix::<f64, DOF, 3>::zeros();
        for i in 0..3 {
            let sigma = svd.singular_values[i];
            let gain = sigma / (sigma * sigma + lambda * lambda);
            let vi = v_t.row(i).transpose();
            let ui = u.column(i);
            filtered += gain * vi * ui.transpose();
        }
        filtered
    }

    #[test]
    fn damped_pinv_matches_svd_oracle() {
        let model = RobotModel::default_arm();
        let mut rng = StdRng::seed_from_u64(3);
        for lambda in [0.0, 1e-3, 0.1] {
            for _ in 0..25 {
                let q = random_regular_posture(&mut rng, &model);
                let jac = jacobians(&model, &q);
                let pinv = damped_pinv(&jac.position, lambda).unwrap();
                let oracle = svd_tikhonov_oracle(&jac.position, lambda);
                assert_abs_diff_eq!(pinv, oracle, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn undamped_pinv_is_right_inverse() {
        let model = RobotModel::default_arm();
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..25 {
            let q = random_regular_posture(&mut rng, &model);
            let jac = jacobians(&model, &q);
            let pinv = damped_pinv(&jac.position, 0.0).unwrap();
            assert_abs_diff_eq!(jac.position * pinv, Matrix3::identity(), epsilon = 1e-9);
        }
    }

    #[test]
    fn damping_shrinks_joint_velocities() {
        let model = RobotModel::default_arm();
        let mut rng = StdRng::seed_from_u64(9);
        for _ in 0..25 {
            let q = random_regular_posture(&mut rng, &model);
            let jac = jacobians(&model, &q);
            let v = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let mut previous = f64::INFINITY;
            for lambda in [0.0, 1e-3, 1e-2, 1e-1, 1.0] {
                let norm = (damped_pinv(&jac.position, lambda).unwrap() * v).norm();
                assert!(norm <= previous + 1e-12, "damping must not grow the step");
                previous = norm;
            }
        }
    }

    #[test]
    fn stretched_posture_is_refused_without_damping() {
        // An arm whose tool sits exactly on the joint-axis line is collinear
        // at q = 0: z-axis columns vanish and y-axis columns are parallel, so
        // the position jacobian drops to rank 1.
        let z = Vector3::z();
        let y = Vector3::y();
        let joints = vec![
            (z, Vector3::new(0.0, 0.0, 0.20)),
            (y, Vector3::new(0.0, 0.0, 0.15)),
            (z, Vector3::new(0.0, 0.0, 0.15)),
            (y, Vector3::new(0.0, 0.0, 0.15)),
            (z, Vector3::new(0.0, 0.0, 0.15)),
            (y, Vector3::new(0.0, 0.0, 0.10)),
            (z, Vector3::new(0.0, 0.0, 0.10)),
        ];
        let model = RobotModel::new(joints, Vector3::new(0.0, 0.0, 0.09), z).unwrap();
        let jac = jacobians(&model, &JointVector::zeros());
        match damped_pinv(&jac.position, 0.0) {
            Err(Error::SingularJacobian { cond }) => assert!(cond > SINGULARITY_CONDITION_LIMIT),
            other => panic!("expected SingularJacobian, got {other:?}"),
        }
        // A small damping factor keeps the same posture usable.
        let pinv = damped_pinv(&jac.position, 1e-3).unwrap();
        assert!(pinv.iter().all(|c| c.is_finite()));
    }

    #[test]
    fn nullspace_projector_annihilates_task_motion() {
        let model = RobotModel::default_arm();
        let mut rng = StdRng::seed_from_u64(13);
        for _ in 0..25 {
            let q = random_regular_posture(&mut rng, &model);
            let jac = jacobians(&model, &q);
            let pinv = damped_pinv(&jac.position, 0.0).unwrap();
            let p = nullspace_projector(&jac.position, &pinv);
            let rho = JointVector::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            assert_abs_diff_eq!(jac.position * (p * rho), Vector3::zeros(), epsilon = 1e-9);
            assert_abs_diff_eq!(p * p, p, epsilon = 1e-9);
        }
    }

    #[test]
    fn resolved_rate_is_quiet_at_the_target() {
        let model = RobotModel::default_arm();
        let mut rng = StdRng::seed_from_u64(17);
        let q = random_regular_posture(&mut rng, &model);
        let x = forward_kinematics(&model, &q).position;
        let qdot = resolved_rate_step(
            &model,
            &q,
            &x,
            &(Matrix3::identity() * 10.0),
            &JointVector::zeros(),
            0.0,
        )
        .unwrap();
        assert_abs_diff_eq!(qdot, JointVector::zeros(), epsilon = 1e-12);
    }

    #[test]
    fn resolved_rate_step_contracts_position_error() {
        let model = RobotModel::default_arm();
        let mut rng = StdRng::seed_from_u64(19);
        let gains = Matrix3::identity() * 10.0;
        let dt = 1e-3;
        for _ in 0..50 {
            let q = random_regular_posture(&mut rng, &model);
            let x = forward_kinematics(&model, &q).position;
            let magnitude = 10f64.powf(rng.gen_range(-6.0..-1.0));
            let dir = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            )
            .normalize();
            let target = x + dir * magnitude;
            let qdot = resolved_rate_step(&model, &q, &target, &gains, &JointVector::zeros(), 1e-3)
                .unwrap();
            let moved = forward_kinematics(&model, &(q + qdot * dt)).position;
            assert!(
                (target - moved).norm() < magnitude,
                "one step must shrink the error (before {magnitude:.3e}, after {:.3e})",
                (target - moved).norm()
            );
        }
    }

    #[test]
    fn nullspace_motion_leaves_task_velocity_untouched() {
        let model = RobotModel::default_arm();
        let mut rng = StdRng::seed_from_u64(23);
        for _ in 0..25 {
            let q = random_regular_posture(&mut rng, &model);
            let target = forward_kinematics(&model, &q).position + Vector3::new(0.01, -0.02, 0.005);
            let gains = Matrix3::identity() * 10.0;
            let rho = JointVector::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let with = resolved_rate_step(&model, &q, &target, &gains, &rho, 0.0).unwrap();
            let without =
                resolved_rate_step(&model, &q, &target, &gains, &JointVector::zeros(), 0.0)
                    .unwrap();
            let jac = jacobians(&model, &q);
            assert_abs_diff_eq!(jac.position * with, jac.position * without, epsilon = 1e-9);
        }
    }

    #[test]
    fn skew_reproduces_cross_product() {
        let a = Vector3::new(0.3, -1.2, 2.0);
        let b = Vector3::new(-0.7, 0.4, 0.9);
        assert_relative_eq!(skew(&a) * b, a.cross(&b), epsilon = 1e-15);
    }

    #[test]
    fn model_validation_rejects_bad_input() {
        assert!(matches!(
            RobotModel::new(
                vec![(Vector3::z(), Vector3::zeros()); 6],
                Vector3::zeros(),
                Vector3::z()
            ),
            Err(Error::InvalidModel(_))
        ));
        let mut joints = vec![(Vector3::z(), Vector3::zeros()); DOF];
        joints[3].0 = Vector3::zeros();
        assert!(matches!(
            RobotModel::new(joints, Vector3::zeros(), Vector3::z()),
            Err(Error::InvalidModel(_))
        ));
        assert!(matches!(
            RobotModel::new(
                vec![(Vector3::z(), Vector3::zeros()); DOF],
                Vector3::zeros(),
                Vector3::zeros()
            ),
            Err(Error::InvalidModel(_))
        ));
    }
}
