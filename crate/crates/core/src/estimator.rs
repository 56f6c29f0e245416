//! Friction-compensated surface-normal estimation from force readings.
//!
//! A sliding probe measures the sum of the surface's normal reaction and a
//! Coulomb friction force that opposes the sliding direction. Because the
//! friction magnitude is proportional to the normal magnitude, the raw force
//! direction is biased away from the true normal by `atan(mu)` - for
//! mu = 0.3 that is a constant ~16.7 degree error. This module removes the
//! bias online, without knowing `mu` in advance:
//!
//! 1. project the force reading onto the commanded sliding direction and its
//!    orthogonal complement;
//! 2. the orthogonal part bounds the friction magnitude through the most
//!    recent friction-coefficient estimates (a weighted sliding window);
//! 3. subtract the reconstructed friction from the reading to expose the
//!    normal component, and update the friction-coefficient window from the
//!    ratio of the two projections.
//!
//! While the probe is (nearly) stationary there is no friction to remove and
//! the reading is already the normal direction; the window is left untouched
//! so stationary phases cannot wash out the estimate.

use std::collections::VecDeque;

use nalgebra::{Matrix3, Unit, Vector3};

use crate::error::{Error, Result};

/// Tuning for the estimator.
#[derive(Debug, Clone)]
pub struct EstimatorConfig {
    /// Length `m` of the friction-coefficient window.
    pub window: usize,
    /// Per-sample weights `w_i`, newest first; the average is
    /// `(1/m) * sum(w_i * mu_{k-i})`, so uniform weighting means all ones.
    pub weights: Vec<f64>,
    /// Speed threshold below which the probe counts as stationary (m/s).
    pub v_epsilon: f64,
    /// Initial friction coefficient used to pre-fill the window.
    pub mu_initial: f64,
    /// Force magnitude below which directions are considered unreliable (N).
    pub f_min: f64,
    /// Whether the closed loop should use the estimate (the simulator reads
    /// this; the algorithm itself always runs when stepped).
    pub enabled: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            window: 50,
            weights: vec![1.0; 50],
            v_epsilon: 1e-4,
            mu_initial: 0.0,
            f_min: 0.1,
            enabled: true,
        }
    }
}

impl EstimatorConfig {
    /// Checks the structural invariants; returns one message per violation.
    pub fn validate(&self) -> std::result::Result<(), Vec<String>> {
        let mut problems = Vec::new();
        if self.window == 0 {
            problems.push("window must be >= 1".to_string());
        }
        if self.weights.len() != self.window {
            problems.push(format!(
                "weights must have exactly window = {} entries, got {}",
                self.window,
                self.weights.len()
            ));
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            problems.push("weights must be finite".to_string());
        } else if !self.weights.is_empty() && self.window > 0 {
            let mean = self.weights.iter().sum::<f64>() / self.window as f64;
            if (mean - 1.0).abs() > 1e-9 {
                problems.push(format!(
                    "weights must average to 1 ((1/m) * sum(w) = {mean:.6}), so the window is an affine average"
                ));
            }
        }
        if !self.v_epsilon.is_finite() || self.v_epsilon <= 0.0 {
            problems.push(format!("v_epsilon must be > 0, got {}", self.v_epsilon));
        }
        if !(0.0..=MU_MAX).contains(&self.mu_initial) {
            problems.push(format!("mu_initial must lie in [0, {MU_MAX}], got {}", self.mu_initial));
        }
        if !self.f_min.is_finite() || self.f_min <= 0.0 {
            problems.push(format!("f_min must be > 0, got {}", self.f_min));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems)
        }
    }
}

/// Largest friction coefficient the estimator accepts as plausible; samples
/// implying more are treated as non-sliding contact and rejected.
pub const MU_MAX: f64 = 2.0;

/// Rolling estimator state. `step` is pure: it borrows the previous state
/// and returns the successor, which makes replay and comparison runs exact.
#[derive(Debug, Clone)]
pub struct EstimatorState {
    /// Friction-coefficient history, newest first, always `window` long.
    mu_history: VecDeque<f64>,
    /// Most recent reliable normal estimate, held across force dropouts.
    last_normal: Option<Unit<Vector3<f64>>>,
    /// Most recent friction-coefficient estimate.
    last_mu: f64,
}

impl EstimatorState {
    pub fn new(config: &EstimatorConfig) -> Self {
        Self {
            mu_history: std::iter::repeat_n(config.mu_initial, config.window).collect(),
            last_normal: None,
            last_mu: config.mu_initial,
        }
    }

    pub fn last_mu(&self) -> f64 {
        self.last_mu
    }

    pub fn last_normal(&self) -> Option<Unit<Vector3<f64>>> {
        self.last_normal
    }

    pub fn history(&self) -> impl Iterator<Item = f64> + '_ {
        self.mu_history.iter().copied()
    }
}

/// Per-step estimator output.
#[derive(Debug, Clone)]
pub struct EstimateOutput {
    /// Force reading with the reconstructed friction removed.
    pub f_n_hat: Vector3<f64>,
    /// Unit surface-normal estimate (direction of `f_n_hat`, or the held
    /// previous value when the cleaned force is too weak to normalize).
    pub n_surf_hat: Unit<Vector3<f64>>,
    /// Friction-coefficient sample produced this step.
    pub mu_k: f64,
    /// Reconstructed friction force that was subtracted.
    pub f_tau: Vector3<f64>,
    /// Whether the sliding branch ran (speed above the threshold).
    pub moving: bool,
}

/// Rank-one projector onto the direction of `v`: `v v^T / (v^T v)`.
///
/// Refuses (near-)zero vectors, where the direction is meaningless; the
/// caller decides the threshold (the estimator passes its `v_epsilon`).
pub fn velocity_projector(v: &Vector3<f64>, threshold: f64) -> Result<Matrix3<f64>> {
    let norm = v.norm();
    if norm <= threshold {
        return Err(Error::ZeroVelocity { norm, threshold });
    }
    Ok(v * v.transpose() / v.dot(v))
}

/// Weighted average of the friction window: `(1/m) * sum(w_i * mu_{k-i})`.
pub fn weighted_average(config: &EstimatorConfig, state: &EstimatorState) -> f64 {
    let m = config.window as f64;
    state.mu_history.iter().zip(&config.weights).map(|(mu, w)| mu * w).sum::<f64>() / m
}

/// One estimation step for a force reading `f_s` and commanded sliding
/// velocity `v_hat`.
///
/// Sliding branch (`|v_hat| > v_epsilon`): reconstructs the friction force as
/// `-mu_avg * |f_perp| * v_hat / |v_hat|` where `f_perp` is the reading with
/// its along-velocity part removed, subtracts it, and pushes the ratio
/// `|f_along| / |f_perp|` into the window. The window update is skipped when
/// `|f_perp| < f_min`, where the ratio would be dominated by noise, and when
/// the ratio exceeds [`MU_MAX`]: a reading tilted that far toward the motion
/// axis means the probe is indenting or impacting rather than sliding
/// (during engagement the commanded velocity points into the surface, so the
/// normal reaction itself lies along the motion), and treating it as friction
/// evidence would poison the window. Rejected samples hold the previous
/// coefficient. Stationary branch: the reading is used as-is and the window
/// is untouched.
///
/// The normal estimate is the direction of the cleaned force when its
/// magnitude reaches `f_min`; otherwise the previous normal is held. With no
/// previous normal and no usable force the step reports a no-contact error.
pub fn step(
    config: &EstimatorConfig,
    state: &EstimatorState,
    f_s: &Vector3<f64>,
    v_hat: &Vector3<f64>,
) -> Result<(EstimateOutput, EstimatorState)> {
    let mut next = state.clone();
    let moving = v_hat.norm() > config.v_epsilon;

    let (f_n_hat, f_tau, mu_k) = if moving {
        let mu_avg = weighted_average(config, state);
        let along = velocity_projector(v_hat, config.v_epsilon)?;
        let f_along = along * f_s;
        let f_perp = f_s - f_along;
        let f_tau = -v_hat / v_hat.norm() * (mu_avg * f_perp.norm());
        let f_n_hat = f_s - f_tau;
        let ratio = f_along.norm() / f_perp.norm();
        let mu_k = if f_perp.norm() >= config.f_min && ratio <= MU_MAX {
            next.mu_history.push_front(ratio);
            next.mu_history.pop_back();
            ratio
        } else {
            state.last_mu
        };
        (f_n_hat, f_tau, mu_k)
    } else {
        (*f_s, Vector3::zeros(), state.last_mu)
    };

    let n_surf_hat = if f_n_hat.norm() >= config.f_min {
        let normal = Unit::new_normalize(f_n_hat);
        next.last_normal = Some(normal);
        normal
    } else if let Some(held) = state.last_normal {
        held
    } else {
        return Err(Error::NoContact { force_norm: f_s.norm(), f_min: config.f_min });
    };

    next.last_mu = mu_k;
    Ok((EstimateOutput { f_n_hat, n_surf_hat, mu_k, f_tau, moving }, next))
}
