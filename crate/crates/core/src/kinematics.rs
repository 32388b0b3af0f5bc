//! Denavit–Hartenberg forward kinematics of the 4-DoF finger.
//!
//! Finger base frame: `x` points along the straight finger, `y` is the palm
//! normal (the side the finger curls towards), `z` completes the right-handed
//! frame. The D-H root frame is the base rotated by −90° about `x`, so the
//! first D-H axis (abduction) coincides with the palm normal.
//!
//! | link | θ        | d | a  | α    |
//! |------|----------|---|----|------|
//! | 0    | q_aa     | 0 | 0  | +90° |
//! | 1    | q1       | 0 | L1 | 0    |
//! | 2    | q2       | 0 | L2 | 0    |
//! | 3    | q3       | 0 | L3 | 0    |

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Isometry3, Point3, Translation3, UnitQuaternion, Vector3};

use crate::params::{FingerParams, JointState};

/// Standard D-H link parameters (θ supplied by the joint).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DhLink {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
}

/// `Rot_z(θ) · Trans_z(d) · Trans_x(a) · Rot_x(α)`.
pub fn dh_transform(theta: f64, link: &DhLink) -> Isometry3<f64> {
    let rz = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), theta);
    let rx = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), link.alpha);
    let offset = rz * Vector3::new(link.a, 0.0, link.d);
    Isometry3::from_parts(Translation3::from(offset), rz * rx)
}

pub fn finger_dh_table(params: &FingerParams) -> [DhLink; 4] {
    let [l1, l2, l3] = params.link_lengths;
    [
        DhLink {
            a: 0.0,
            alpha: FRAC_PI_2,
            d: 0.0,
        },
        DhLink {
            a: l1,
            alpha: 0.0,
            d: 0.0,
        },
        DhLink {
            a: l2,
            alpha: 0.0,
            d: 0.0,
        },
        DhLink {
            a: l3,
            alpha: 0.0,
            d: 0.0,
        },
    ]
}

fn dh_root() -> Isometry3<f64> {
    Isometry3::rotation(Vector3::x() * -FRAC_PI_2)
}

/// World-frame poses of one finger.
#[derive(Debug, Clone, PartialEq)]
pub struct FingerPoseChain {
    pub base: Isometry3<f64>,
    /// D-H frames after links 0..3. Frame `i` (for `i` in 0..3) sits on
    /// flexion joint `i + 1` with its `z` axis along that joint's axis;
    /// frame 3 is the fingertip frame.
    pub frames: [Isometry3<f64>; 4],
}

impl FingerPoseChain {
    /// MCP, PIP, DIP and fingertip positions.
    pub fn joint_points(&self) -> [Point3<f64>; 4] {
        self.frames.map(|f| Point3::from(f.translation.vector))
    }

    pub fn mcp(&self) -> Point3<f64> {
        Point3::from(self.frames[0].translation.vector)
    }

    pub fn fingertip(&self) -> Point3<f64> {
        Point3::from(self.frames[3].translation.vector)
    }

    pub fn fingertip_orientation(&self) -> UnitQuaternion<f64> {
        self.frames[3].rotation
    }

    /// Unit axis of flexion joint `j` in `1..=3`.
    pub fn flexion_axis(&self, j: usize) -> Vector3<f64> {
        self.frames[j - 1].rotation * Vector3::z()
    }

    /// Axis segment of phalanx `i` in `1..=3`.
    pub fn phalanx_segment(&self, i: usize) -> (Point3<f64>, Point3<f64>) {
        let p = self.joint_points();
        (p[i - 1], p[i])
    }

    /// Velocity of `point` (rigidly attached to phalanx `phalanx`) per unit
    /// rate of flexion joint `j`; zero for joints distal to the phalanx.
    pub fn point_jacobian_column(
        &self,
        phalanx: usize,
        j: usize,
        point: &Point3<f64>,
    ) -> Vector3<f64> {
        if j > phalanx {
            return Vector3::zeros();
        }
        let origin = Point3::from(self.frames[j - 1].translation.vector);
        self.flexion_axis(j).cross(&(point - origin))
    }
}

pub fn forward_kinematics(
    q: &JointState,
    params: &FingerParams,
    base: &Isometry3<f64>,
) -> FingerPoseChain {
    let table = finger_dh_table(params);
    let angles = q.as_array();
    let mut current = base * dh_root();
    let mut frames = [Isometry3::identity(); 4];
    for (k, (link, theta)) in table.iter().zip(angles).enumerate() {
        current *= dh_transform(theta, link);
        frames[k] = current;
    }
    FingerPoseChain {
        base: *base,
        frames,
    }
}

/// Fingertip position in the finger base frame.
pub fn fingertip(q: &JointState, params: &FingerParams) -> Point3<f64> {
    forward_kinematics(q, params, &Isometry3::identity()).fingertip()
}
