//! Two-motor differential at the MCP joint and the rigid flexion coupling.

use nalgebra::{Matrix2, Matrix2x3, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::params::{DriveState, PlanetaryState};

/// Gear differential `θ = R_z · R · R_z' · a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifferentialTrain {
    /// Gear c to output.
    pub r_z: Matrix2<f64>,
    /// Double-layer bevel gears to gear c.
    pub r: Matrix2<f64>,
    /// Motor gears to the bevel pair. The 13/24 default is carried as data.
    pub r_z_prime: Matrix2<f64>,
    /// Assign the sum mode to flexion and the difference mode to abduction
    /// instead of the as-printed `q = θ`.
    pub swap_modes: bool,
}

impl Default for DifferentialTrain {
    fn default() -> Self {
        DifferentialTrain {
            r_z: Matrix2::identity(),
            r: Matrix2::new(0.5, 0.5, 0.5, -0.5),
            r_z_prime: Matrix2::from_diagonal_element(13.0 / 24.0),
            swap_modes: false,
        }
    }
}

impl DifferentialTrain {
    /// Composite `J_z = R_z · R · R_z'`.
    pub fn j_z(&self) -> Matrix2<f64> {
        self.r_z * self.r * self.r_z_prime
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self
            .r_z
            .iter()
            .chain(self.r.iter())
            .chain(self.r_z_prime.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("differential", "entries must be finite"));
        }
        if self.j_z().try_inverse().is_none() {
            return Err(Error::SingularTrain);
        }
        Ok(())
    }
}

/// MCP composite-joint angles produced by the differential.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct McpAngles {
    pub q_aa: f64,
    pub q_fe: f64,
}

pub fn drive_to_mcp(a: DriveState, train: &DifferentialTrain) -> (PlanetaryState, McpAngles) {
    let theta = train.j_z() * Vector2::new(a.a1, a.a2);
    let planetary = PlanetaryState {
        theta1: theta[0],
        theta2: theta[1],
    };
    let mcp = if train.swap_modes {
        McpAngles {
            q_aa: theta[1],
            q_fe: theta[0],
        }
    } else {
        McpAngles {
            q_aa: theta[0],
            q_fe: theta[1],
        }
    };
    (planetary, mcp)
}

pub fn mcp_to_drive(mcp: McpAngles, train: &DifferentialTrain) -> Result<DriveState> {
    let inv = train.j_z().try_inverse().ok_or(Error::SingularTrain)?;
    let theta = if train.swap_modes {
        Vector2::new(mcp.q_fe, mcp.q_aa)
    } else {
        Vector2::new(mcp.q_aa, mcp.q_fe)
    };
    let a = inv * theta;
    Ok(DriveState { a1: a[0], a2: a[1] })
}

/// Rigid gear coupling of the three flexion joints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingModel {
    /// 2×3 coupling coefficient matrix; its null direction is `rigid_ratio`.
    pub j_s: Matrix2x3<f64>,
    pub rigid_ratio: Vector3<f64>,
}

impl Default for CouplingModel {
    fn default() -> Self {
        CouplingModel {
            j_s: Matrix2x3::new(7.0, -6.0, 0.0, 0.0, 6.0, -10.0),
            rigid_ratio: Vector3::new(6.0, 7.0, 4.2),
        }
    }
}

impl CouplingModel {
    pub fn new(j_s: Matrix2x3<f64>, rigid_ratio: Vector3<f64>) -> Result<Self> {
        let residual = j_s * rigid_ratio;
        if residual.amax() > 1e-12 {
            return Err(Error::DegenerateCoupling(format!(
                "J_s does not annihilate the rigid ratio (residual {:e})",
                residual.amax()
            )));
        }
        Ok(CouplingModel { j_s, rigid_ratio })
    }

    /// Unit vector along the rigid-coupling line.
    pub fn direction(&self) -> Vector3<f64> {
        self.rigid_ratio.normalize()
    }
}

/// `(q2, q3)` on the rigid-coupling line for a given proximal angle.
pub fn rigid_coupled_flexion(q1: f64, coupling: &CouplingModel) -> Result<(f64, f64)> {
    let r = &coupling.rigid_ratio;
    if r[0] == 0.0 {
        return Err(Error::DegenerateCoupling(
            "leading ratio entry is zero".into(),
        ));
    }
    Ok((q1 * r[1] / r[0], q1 * r[2] / r[0]))
}

/// `J_s · q_fe`; zero exactly on the rigid-coupling line.
pub fn coupling_residual(q_fe: &Vector3<f64>, coupling: &CouplingModel) -> Vector2<f64> {
    coupling.j_s * q_fe
}

/// Largest relative error of `q2/q1` and `q3/q1` against the rigid ratio.
pub fn ratio_error(q_fe: &Vector3<f64>, coupling: &CouplingModel) -> f64 {
    let r = &coupling.rigid_ratio;
    let e2 = (q_fe[1] / q_fe[0]) / (r[1] / r[0]) - 1.0;
    let e3 = (q_fe[2] / q_fe[0]) / (r[2] / r[0]) - 1.0;
    e2.abs().max(e3.abs())
}

/// Distance of `q_fe` from the coupling line relative to `‖q_fe‖`.
pub fn coupling_deviation(q_fe: &Vector3<f64>, coupling: &CouplingModel) -> f64 {
    let d = coupling.direction();
    let off = q_fe - d * d.dot(q_fe);
    off.norm() / q_fe.norm()
}
