//! SE2(3) inertial navigation kinematics and exact log-linear propagation of
//! left- and right-invariant navigation errors.
//!
//! - [`group`]: SO(3)/SE2(3) exp, log, Jacobians, adjoint and the flow `Φ_t`.
//! - [`ins`]: ECEF strapdown mechanization as a group-affine system, RK4
//!   integration and the `χ_e Φ_t(χ₀) χ_b` decomposition.
//! - [`error_dynamics`]: invariant errors, the `F_l`/`F_r` models and their
//!   closed-form solutions.
//! - [`scenario`]: analytic trajectories, IMU synthesis and configuration.
//! - [`experiment`]: the verification experiments driven by the CLI.

pub mod config;
pub mod error;
pub mod group;
pub mod identities;
pub mod error_dynamics;
pub mod experiment;
pub mod ins;
pub mod scenario;

pub use error::{Error, Result};
pub use group::{ExtendedPose, Mat3, Mat5, Mat9, Rotation, Tangent, Vec3, Vec9};
