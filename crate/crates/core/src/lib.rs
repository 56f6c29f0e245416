//! Force-guided surface tracing for a 7-DoF manipulator.
//!
//! The crate simulates a velocity-controlled arm whose spherical probe tip
//! slides along an analytic workpiece surface while a hybrid force-motion
//! controller regulates the contact force and tracks a desired path. The
//! centerpiece is a friction-compensated surface-normal estimator that
//! recovers the contact normal from raw force readings while the probe is
//! sliding, so the force-controlled direction can follow curved, unmodeled
//! geometry.
//!
//! Module map:
//! - [`kinematics`]: serial-chain model, forward kinematics, Jacobians,
//!   damped pseudoinverse, and resolved-rate stepping.
//! - [`surface`]: analytic surfaces (plane, sine extrusion, dome) with
//!   signed-distance queries and on-surface path generation.
//! - [`contact`]: penalty contact with regularized Coulomb friction and
//!   optional seeded sensor noise.
//! - [`estimator`]: sliding-window friction estimation and normal recovery
//!   from force/velocity pairs.
//! - [`controller`]: complementary force/motion projections, admittance and
//!   precision terms, null-space orientation objective, joint-velocity
//!   command assembly.
//! - [`scenario`]: plain-text scenario files (dotted keys), validation, and
//!   `--set` style overrides.
//! - [`sim`]: the fixed-step closed loop, per-step records, run summaries,
//!   and estimator on/off comparisons.

pub mod contact;
pub mod controller;
pub mod error;
pub mod estimator;
pub mod kinematics;
pub mod scenario;
pub mod sim;
pub mod surface;

pub use error::{Error, Result};
