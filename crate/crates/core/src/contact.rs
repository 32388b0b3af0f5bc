//! Capsule-vs-object distance queries for the three phalanges.

use nalgebra::{Point3, Unit, Vector3};

use crate::error::{Error, Result};
use crate::kinematics::FingerPoseChain;
use crate::params::FingerParams;

/// Default gap below which a phalanx becomes a contact candidate (mm).
pub const ACTIVATION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RigidObject {
    Sphere {
        center: Point3<f64>,
        radius: f64,
    },
    /// Solid occupying `n·(x − point) ≤ 0`, with `n` the outward unit normal.
    HalfSpace {
        point: Point3<f64>,
        normal: Unit<Vector3<f64>>,
    },
}

impl RigidObject {
    pub fn sphere(center: Point3<f64>, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) || !center.coords.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid(
                "sphere",
                format!("radius must be > 0, got {radius}"),
            ));
        }
        Ok(RigidObject::Sphere { center, radius })
    }

    pub fn half_space(point: Point3<f64>, normal: Vector3<f64>) -> Result<Self> {
        let normal = Unit::try_new(normal, 1e-12)
            .ok_or_else(|| Error::invalid("half_space", "normal must be non-zero"))?;
        Ok(RigidObject::HalfSpace { point, normal })
    }

    /// Same object moved by `delta`.
    pub fn translated(&self, delta: &Vector3<f64>) -> Self {
        match *self {
            RigidObject::Sphere { center, radius } => RigidObject::Sphere {
                center: center + delta,
                radius,
            },
            RigidObject::HalfSpace { point, normal } => RigidObject::HalfSpace {
                point: point + delta,
                normal,
            },
        }
    }
}

/// Closest-feature data between one phalanx capsule and the object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    /// Phalanx index, 1 = proximal .. 3 = distal.
    pub phalanx: usize,
    /// Witness point on the phalanx axis, rigidly attached to the phalanx.
    pub axis_point: Point3<f64>,
    /// Witness point on the object surface.
    pub point: Point3<f64>,
    /// Unit normal from the object towards the phalanx; the direction of the
    /// contact force acting on the finger.
    pub normal: Vector3<f64>,
    /// Signed clearance between capsule surface and object (mm).
    pub gap: f64,
    /// Normal force magnitude (N); zero for unsolved candidates.
    pub force: f64,
}

impl Contact {
    /// `∂gap/∂(q1, q2, q3)`, treating the axis witness point as body-fixed.
    pub fn gap_gradient(&self, chain: &FingerPoseChain) -> Vector3<f64> {
        Vector3::from_fn(|j, _| {
            self.normal
                .dot(&chain.point_jacobian_column(self.phalanx, j + 1, &self.axis_point))
        })
    }
}

/// Closest-feature query for phalanx `i` in `1..=3`.
pub fn phalanx_query(
    chain: &FingerPoseChain,
    params: &FingerParams,
    object: &RigidObject,
    i: usize,
) -> Contact {
    let (a, b) = chain.phalanx_segment(i);
    let capsule_r = params.link_radii[i - 1];
    match *object {
        RigidObject::Sphere { center, radius } => {
            let ab = b - a;
            let t = ((center - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
            let axis_point = a + ab * t;
            let offset = axis_point - center;
            let dist = offset.norm();
            let normal = if dist > 1e-12 {
                offset / dist
            } else {
                // Centre on the axis: any direction normal to the link will do.
                chain.flexion_axis(i).cross(&ab).normalize()
            };
            Contact {
                phalanx: i,
                axis_point,
                point: center + normal * radius,
                normal,
                gap: dist - radius - capsule_r,
                force: 0.0,
            }
        }
        RigidObject::HalfSpace { point, normal } => {
            let da = normal.dot(&(a - point));
            let db = normal.dot(&(b - point));
            let (axis_point, sd) = if da <= db { (a, da) } else { (b, db) };
            Contact {
                phalanx: i,
                axis_point,
                point: axis_point - normal.into_inner() * sd,
                normal: normal.into_inner(),
                gap: sd - capsule_r,
                force: 0.0,
            }
        }
    }
}

/// Phalanges whose gap is at most `threshold`, in phalanx order.
pub fn detect_contacts_within(
    chain: &FingerPoseChain,
    params: &FingerParams,
    object: &RigidObject,
    threshold: f64,
) -> Vec<Contact> {
    (1..=3)
        .map(|i| phalanx_query(chain, params, object, i))
        .filter(|c| c.gap <= threshold)
        .collect()
}

/// Contact candidates at the default activation threshold.
pub fn detect_contacts(
    chain: &FingerPoseChain,
    params: &FingerParams,
    object: &RigidObject,
) -> Vec<Contact> {
    detect_contacts_within(chain, params, object, ACTIVATION_THRESHOLD)
}
