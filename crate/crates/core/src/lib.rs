//! Uplink pilot and data power control for multi-cell Massive MIMO.
//!
//! The crate generates random network drops, evaluates the closed-form
//! MRC spectral efficiency, and runs two fixed-point power-control
//! algorithms (joint pilot+data, and data only) that keep working when the
//! requested SEs cannot all be met. Global-optimum references (a log-domain
//! geometric program, a linear program, and a brute-force oracle) and a
//! Monte-Carlo campaign driver are included.

pub mod campaign;
pub mod cdf;
pub mod config;
pub mod error;
pub mod gp;
pub mod lp;
pub mod mc;
pub mod netgen;
pub mod oracle;
pub mod output;
pub mod se;
pub mod solvers;

pub use campaign::{run_campaign, Algorithm, DropOutcome, RunSpec, RunStatus};
pub use config::SystemConfig;
pub use error::{Error, Result};
pub use netgen::{generate_drop, NetworkRealization};
pub use gp::{gp_solve, GpResult, GpStatus};
pub use lp::lp_data_solve;
pub use se::{PowerAllocation, SinrTargets};
pub use solvers::{algorithm1_joint, algorithm2_data, DropLabel, SolverOptions, SolverResult};
