//! Structural parameters and state vectors shared by every other module.
//!
//! Units are fixed across the crate: radians, millimetres, newtons. Spring
//! stiffnesses act on the transmission variables (arc lengths in mm), so the
//! elastic energy comes out in N·mm and contact multipliers in N.

use nalgebra::Vector3;

use crate::drive::DifferentialTrain;
use crate::error::{Error, Result};

/// Spring constants of the compliant transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Springs {
    /// Serial spring between the drive and the flexion chain.
    pub k_s: f64,
    /// Parallel springs on the coupling side, one per transmission variable T_p1..T_p3.
    pub k_p: [f64; 3],
}

impl Default for Springs {
    fn default() -> Self {
        Springs {
            k_s: 50.0,
            k_p: [100.0, 100.0, 100.0],
        }
    }
}

/// Per-joint `[min, max]` ranges in radians, ordered `q_aa, q1, q2, q3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointLimits(pub [[f64; 2]; 4]);

impl JointLimits {
    pub fn aa(&self) -> [f64; 2] {
        self.0[0]
    }

    /// Flexion limit of joint `i` in `1..=3`.
    pub fn flexion(&self, i: usize) -> [f64; 2] {
        self.0[i]
    }

    pub fn lower_flexion(&self) -> Vector3<f64> {
        Vector3::new(self.0[1][0], self.0[2][0], self.0[3][0])
    }

    pub fn upper_flexion(&self) -> Vector3<f64> {
        Vector3::new(self.0[1][1], self.0[2][1], self.0[3][1])
    }

    pub fn contains(&self, q: &JointState, tol: f64) -> bool {
        q.as_array()
            .iter()
            .zip(self.0.iter())
            .all(|(v, [lo, hi])| *v >= lo - tol && *v <= hi + tol)
    }
}

impl Default for JointLimits {
    fn default() -> Self {
        let d = std::f64::consts::PI / 180.0;
        JointLimits([
            [-20.0 * d, 20.0 * d],
            [0.0, 100.0 * d],
            [0.0, 100.0 * d],
            [0.0, 100.0 * d],
        ])
    }
}

/// Every structural quantity of one modular finger.
///
/// Fields are public so that diagnostic (deliberately invalid) parameter sets
/// can be built by hand; anything that comes from a config document passes
/// through [`FingerParams::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct FingerParams {
    /// Drive-chain teeth `z1, z2, z3` (MCP, PIP, DIP).
    pub drive_teeth: [u32; 3],
    /// Drive-chain gear radii `r_d1..r_d3` in mm.
    pub drive_radii: [f64; 3],
    /// Coupling-chain gear radii `r_c1..r_c3` in mm.
    pub coupling_radii: [f64; 3],
    pub differential: DifferentialTrain,
    pub springs: Springs,
    /// Phalanx lengths `L1, L2, L3` in mm (proximal, middle, distal).
    pub link_lengths: [f64; 3],
    /// Capsule radius of each phalanx in mm.
    pub link_radii: [f64; 3],
    pub joint_limits: JointLimits,
}

impl Default for FingerParams {
    fn default() -> Self {
        default_params()
    }
}

/// Reference finger: gear teeth (22, 20, 16) on a half-millimetre-per-tooth
/// module, coupling radii (7, 6, 10) whose zero-deflection line is 6 : 7 : 4.2.
pub fn default_params() -> FingerParams {
    FingerParams {
        drive_teeth: [22, 20, 16],
        drive_radii: [11.0, 10.0, 8.0],
        coupling_radii: [7.0, 6.0, 10.0],
        differential: DifferentialTrain::default(),
        springs: Springs::default(),
        link_lengths: [45.0, 25.0, 20.0],
        link_radii: [7.0, 6.0, 5.0],
        joint_limits: JointLimits::default(),
    }
}

/// Alternate preset built on the 14 : 12 : 20 teeth ratio quoted alongside
/// the coupling ratio. Never used as a default.
pub fn text_ratio_params() -> FingerParams {
    FingerParams {
        drive_teeth: [14, 12, 20],
        drive_radii: [7.0, 6.0, 10.0],
        ..default_params()
    }
}

/// Springs used by the enveloping scenes: soft distal return spring so that
/// free motion tracks the rigid coupling line.
pub fn grasp_params() -> FingerParams {
    FingerParams {
        springs: Springs {
            k_s: 50.0,
            k_p: [100.0, 100.0, 0.01],
        },
        ..default_params()
    }
}

/// Look up a built-in preset by name.
pub fn preset(name: &str) -> Option<FingerParams> {
    match name {
        "default" => Some(default_params()),
        "text-ratio" => Some(text_ratio_params()),
        "grasp" => Some(grasp_params()),
        _ => None,
    }
}

impl FingerParams {
    pub fn validate(&self) -> Result<()> {
        for (i, z) in self.drive_teeth.iter().enumerate() {
            if *z < 1 {
                return Err(Error::invalid(
                    "teeth",
                    format!("z{} must be at least 1", i + 1),
                ));
            }
        }
        positive("drive_radii_mm", &self.drive_radii)?;
        positive("coupling_radii_mm", &self.coupling_radii)?;
        positive("links_mm", &self.link_lengths)?;
        positive("link_radii_mm", &self.link_radii)?;
        positive("springs.k_s", &[self.springs.k_s])?;
        positive("springs.k_p", &self.springs.k_p)?;
        for (name, [lo, hi]) in ["aa", "q1", "q2", "q3"].iter().zip(self.joint_limits.0) {
            if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
                return Err(Error::invalid(
                    format!("limits.{name}"),
                    format!("need finite min < max, got [{lo}, {hi}]"),
                ));
            }
        }
        self.differential.validate()
    }

    /// `z1/z2` and `z1/z3` teeth ratios.
    pub fn teeth_ratios(&self) -> (f64, f64) {
        let [z1, z2, z3] = self.drive_teeth.map(f64::from);
        (z1 / z2, z1 / z3)
    }

    /// `L1 + L2 + L3`.
    pub fn reach(&self) -> f64 {
        self.link_lengths.iter().sum()
    }
}

fn positive(field: &str, values: &[f64]) -> Result<()> {
    for (i, v) in values.iter().enumerate() {
        if !(v.is_finite() && *v > 0.0) {
            let name = if values.len() > 1 {
                format!("{field}[{i}]")
            } else {
                field.to_string()
            };
            return Err(Error::invalid(name, format!("must be > 0, got {v}")));
        }
    }
    Ok(())
}

/// Joint-space vector `q = [q_aa, q1, q2, q3]` in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointState {
    pub q_aa: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
}

impl JointState {
    pub fn new(q_aa: f64, q1: f64, q2: f64, q3: f64) -> Self {
        JointState { q_aa, q1, q2, q3 }
    }

    pub fn from_flexion(q_aa: f64, q_fe: &Vector3<f64>) -> Self {
        JointState::new(q_aa, q_fe[0], q_fe[1], q_fe[2])
    }

    pub fn flexion(&self) -> Vector3<f64> {
        Vector3::new(self.q1, self.q2, self.q3)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.q_aa, self.q1, self.q2, self.q3]
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }
}

/// Motor output angles `a = [a1, a2]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DriveState {
    pub a1: f64,
    pub a2: f64,
}

/// Planetary-gear revolution/rotation angles `θ = [θ1, θ2]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlanetaryState {
    pub theta1: f64,
    pub theta2: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        default_params().validate().unwrap();
        text_ratio_params().validate().unwrap();
        grasp_params().validate().unwrap();
    }

    #[test]
    fn default_radii_are_half_module() {
        let p = default_params();
        for (z, r) in p.drive_teeth.iter().zip(p.drive_radii) {
            assert_eq!(f64::from(*z) / 2.0, r);
        }
    }

    #[test]
    fn rejects_negative_link() {
        let mut p = default_params();
        p.link_lengths[1] = -5.0;
        let err = p.validate().unwrap_err();
        assert!(err.to_string().contains("links_mm[1]"), "{err}");
    }

    #[test]
    fn rejects_inverted_limits() {
        let mut p = default_params();
        p.joint_limits.0[2] = [1.0, 0.5];
        assert!(p.validate().unwrap_err().to_string().contains("limits.q2"));
    }

    #[test]
    fn rejects_zero_teeth() {
        let mut p = default_params();
        p.drive_teeth[2] = 0;
        assert!(p.validate().is_err());
    }
}
