use crate::sim::StepRecord;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A robot model failed structural validation (non-unit axis, bad joint
    /// count, non-finite offset).
    #[error("invalid robot model: {0}")]
    InvalidModel(String),

    /// `J J^T` is numerically singular and no damping was requested.
    #[error("jacobian is singular at the queried posture (cond(JJ^T) = {cond:.3e})")]
    SingularJacobian { cond: f64 },

    /// A surface description failed validation (zero normal, non-positive
    /// radius, vertical extrusion axis, ...).
    #[error("invalid surface: {0}")]
    InvalidSurface(String),

    /// A surface query has no well-defined answer (e.g. the exact center of
    /// a dome has no unique closest point).
    #[error("degenerate surface query at ({x:.6}, {y:.6}, {z:.6}): {reason}")]
    DegenerateQuery { x: f64, y: f64, z: f64, reason: &'static str },

    /// A requested path cannot be realized on the surface.
    #[error("path cannot be placed on the surface: {0}")]
    PathOffSurface(String),

    /// A velocity projector was requested for a (near-)zero velocity.
    #[error("velocity projector undefined: |v| = {norm:.3e} below threshold {threshold:.3e}")]
    ZeroVelocity { norm: f64, threshold: f64 },

    /// The estimator has no usable force signal and no previously held
    /// normal to fall back on.
    #[error("no contact: |f| = {force_norm:.3e} N is below f_min = {f_min:.3e} N and no prior normal is held")]
    NoContact { force_norm: f64, f_min: f64 },

    /// A control frame was requested for a (near-)zero normal vector.
    #[error("degenerate control frame: |N| = {norm:.3e}")]
    DegenerateFrame { norm: f64 },

    /// The closed loop left the sane region (NaN state or runaway position).
    /// Carries every record produced before the abort.
    #[error("simulation diverged at step {step} (t = {t:.4} s): {reason}")]
    SimulationDiverged { step: usize, t: f64, reason: String, partial: Vec<StepRecord> },

    /// The approach phase failed to touch the surface within its time cap.
    #[error("no contact reached within {cap_s:.1} s of approach")]
    NoContactReached { cap_s: f64 },

    /// Scenario file could not be read or parsed.
    #[error("cannot read scenario: {0}")]
    ScenarioIo(String),

    /// Scenario contents violate the schema. Each entry is one violation,
    /// prefixed with the offending key path.
    #[error("invalid scenario:\n{}", .0.join("\n"))]
    ScenarioInvalid(Vec<String>),
}

pub type Result<T> = std::result::Result<T, Error>;
