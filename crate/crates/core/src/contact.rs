//! Penalty contact with regularized Coulomb friction.
//!
//! The probe tip is treated as a point against the analytic surface: while it
//! penetrates the material, a stiffness-proportional normal force pushes it
//! back out along the outward surface normal, and a friction force opposes
//! the tangential sliding velocity. The friction magnitude is the classic
//! Coulomb cone `mu * |f_n|`, smoothed near zero slip speed by
//! `|v_t| / sqrt(|v_t|^2 + v_reg^2)` so the force stays continuous when the
//! probe reverses direction. Optional zero-mean Gaussian noise models the
//! force/torque sensor; it is suppressed outside contact where a real sensor
//! would be tared.

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::surface::SurfaceModel;

/// Contact and sensor parameters.
#[derive(Debug, Clone)]
pub struct ContactParams {
    /// Penalty stiffness in N/m.
    pub stiffness: f64,
    /// True Coulomb friction coefficient.
    pub mu: f64,
    /// Slip-speed regularization in m/s; friction saturates for speeds well
    /// above this value.
    pub v_reg: f64,
    /// Standard deviation of per-axis sensor noise in N.
    pub noise_std: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        Self { stiffness: 5000.0, mu: 0.3, v_reg: 1e-4, noise_std: 0.02 }
    }
}

/// One simulated force-sensor sample: the reaction the surface exerts on the
/// probe, expressed in the world frame.
#[derive(Debug, Clone)]
pub struct ForceReading {
    pub force: Vector3<f64>,
}

impl ForceReading {
    pub fn zero() -> Self {
        Self { force: Vector3::zeros() }
    }
}

/// Samples the force sensor for a probe at `position` moving at `velocity`.
///
/// Outside the material (signed distance >= 0) the reading is exactly zero,
/// noise included. Inside, the reading is
/// `stiffness * penetration * n - mu * |f_n| * v_t / sqrt(|v_t|^2 + v_reg^2)`
/// plus optional Gaussian noise, where `n` is the outward normal and `v_t`
/// the tangential velocity.
pub fn sense<R: Rng>(
    surface: &SurfaceModel,
    params: &ContactParams,
    position: &Vector3<f64>,
    velocity: &Vector3<f64>,
    rng: &mut R,
) -> Result<ForceReading> {
    let query = surface.query(position)?;
    if query.signed_distance >= 0.0 {
        return Ok(ForceReading::zero());
    }
    let normal = query.true_normal.into_inner();
    let penetration = -query.signed_distance;
    let normal_force = normal * (params.stiffness * penetration);

    let tangential_velocity = velocity - normal * normal.dot(velocity);
    let slip = tangential_velocity.norm();
    let damp = slip / (slip * slip + params.v_reg * params.v_reg).sqrt();
    let friction = if slip > 0.0 {
        -tangential_velocity / slip * (params.mu * normal_force.norm() * damp)
    } else {
        Vector3::zeros()
    };

    let mut force = normal_force + friction;
    if params.noise_std > 0.0 {
        let gaussian = Normal::new(0.0, params.noise_std).expect("std is finite and positive");
        for axis in 0..3 {
            force[axis] += gaussian.sample(rng);
        }
    }
    Ok(ForceReading { force })
}
