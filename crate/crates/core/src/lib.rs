//! Modelling toolkit for a modular dexterous finger with two motors and
//! four degrees of freedom: a gear differential at the MCP joint, a
//! gear-coupled flexion chain made compliant by serial and parallel springs,
//! and the hand built from five such fingers.

pub mod config;
pub mod contact;
pub mod drive;
pub mod error;
pub mod format;
pub mod grasp;
pub mod hand;
pub mod kinematics;
pub mod params;
pub mod qp;
pub mod ucm;
pub mod workspace;

pub use error::{Error, Result};
pub use params::{default_params, DriveState, FingerParams, JointState, PlanetaryState};
