//! Compliant transmission model of the flexion chain.
//!
//! One serial spring sits between the drive coordinate `a` and the joints,
//! three parallel springs act on the coupling gears:
//!
//! ```text
//! T_s  = a − r_d1·q1 − (z1/z2)·r_d2·q2 − (z1/z3)·r_d3·q3
//! T_p1 = r_c2·q2 − r_c1·q1
//! T_p2 = r_c3·q3 − r_c2·q2
//! T_p3 = r_c3·q3
//! ```
//!
//! The map is linear, so all Jacobians and stiffness matrices depend on the
//! structural parameters only.

use nalgebra::{Matrix3, Matrix4x3, RowVector3, SymmetricEigen, Vector3};

use crate::error::{Error, Result};
use crate::params::FingerParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmissionState {
    pub t_s: f64,
    pub t_p: [f64; 3],
}

pub fn transmission_state(q: &Vector3<f64>, a: f64, params: &FingerParams) -> TransmissionState {
    let [rd1, rd2, rd3] = params.drive_radii;
    let [rc1, rc2, rc3] = params.coupling_radii;
    let (z12, z13) = params.teeth_ratios();
    TransmissionState {
        t_s: a - rd1 * q[0] - z12 * rd2 * q[1] - z13 * rd3 * q[2],
        t_p: [rc2 * q[1] - rc1 * q[0], rc3 * q[2] - rc2 * q[1], rc3 * q[2]],
    }
}

/// Structural Jacobians of the transmission variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmissionJacobians {
    /// `∂T_s/∂q`.
    pub j_s1: RowVector3<f64>,
    /// `∂T_s/∂a`, always 1.
    pub j_s2: f64,
    /// `∂T_p/∂q`.
    pub j_p: Matrix3<f64>,
}

impl TransmissionJacobians {
    /// `[J_s1; J_p]`, the 4×3 stacked constraint matrix.
    pub fn stacked(&self) -> Matrix4x3<f64> {
        let mut m = Matrix4x3::zeros();
        m.row_mut(0).copy_from(&self.j_s1);
        m.fixed_rows_mut::<3>(1).copy_from(&self.j_p);
        m
    }
}

pub fn transmission_jacobians(params: &FingerParams) -> TransmissionJacobians {
    let [rd1, rd2, rd3] = params.drive_radii;
    let [rc1, rc2, rc3] = params.coupling_radii;
    let (z12, z13) = params.teeth_ratios();
    TransmissionJacobians {
        j_s1: RowVector3::new(-rd1, -z12 * rd2, -z13 * rd3),
        j_s2: 1.0,
        #[rustfmt::skip]
        j_p: Matrix3::new(
            -rc1, rc2, 0.0,
            0.0, -rc2, rc3,
            0.0, 0.0, rc3,
        ),
    }
}

/// Singular values below this fraction of the largest count as zero.
pub const RANK_RTOL: f64 = 1e-10;

/// Numerical rank of the stacked constraint matrix `[J_s1; J_p]`.
pub fn constraint_rank(params: &FingerParams) -> usize {
    let m = transmission_jacobians(params).stacked();
    let sv = m.singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > RANK_RTOL * max).count()
}

/// Full column rank: the springs constrain every flexion joint.
pub fn is_stable(params: &FingerParams) -> bool {
    constraint_rank(params) == 3
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpringPolicy {
    /// Every spring strictly positive.
    Strict,
    /// Zero springs allowed, e.g. to isolate the parallel term with `k_s = 0`.
    Diagnostic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StiffnessSet {
    pub k_q: Matrix3<f64>,
    pub k_a: f64,
    pub k_qa: Vector3<f64>,
    pub k_s: f64,
    pub k_p: Matrix3<f64>,
    /// Cholesky factorization of `K_q` succeeded.
    pub positive_definite: bool,
    pub min_eigenvalue: f64,
}

pub fn stiffness_matrices(params: &FingerParams) -> Result<StiffnessSet> {
    stiffness_matrices_with(params, SpringPolicy::Strict)
}

pub fn stiffness_matrices_with(
    params: &FingerParams,
    policy: SpringPolicy,
) -> Result<StiffnessSet> {
    let s = &params.springs;
    let springs =
        std::iter::once(("springs.k_s", s.k_s)).chain(s.k_p.iter().map(|k| ("springs.k_p", *k)));
    for (name, k) in springs {
        let ok = match policy {
            SpringPolicy::Strict => k > 0.0,
            SpringPolicy::Diagnostic => k >= 0.0,
        };
        if !(ok && k.is_finite()) {
            return Err(Error::invalid(
                name,
                format!("spring stiffness {k} not allowed"),
            ));
        }
    }
    let j = transmission_jacobians(params);
    let k_p = Matrix3::from_diagonal(&Vector3::from(s.k_p));
    let k_q = j.j_s1.transpose() * s.k_s * j.j_s1 + j.j_p.transpose() * k_p * j.j_p;
    // Bitwise symmetric; the triple products round differently per entry.
    let k_q = (k_q + k_q.transpose()) * 0.5;
    let k_a = j.j_s2 * s.k_s * j.j_s2;
    let k_qa = j.j_s1.transpose() * s.k_s * j.j_s2;
    let positive_definite = k_q.cholesky().is_some();
    let min_eigenvalue = SymmetricEigen::new(k_q).eigenvalues.min();
    Ok(StiffnessSet {
        k_q,
        k_a,
        k_qa,
        k_s: s.k_s,
        k_p,
        positive_definite,
        min_eigenvalue,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionSubspaces {
    /// Unit active-motion direction per unit drive increment.
    pub dq_active: Vector3<f64>,
    /// `−K_q⁻¹·K_qa` before normalization.
    pub active_gain: Vector3<f64>,
    /// Normal of the passive-motion plane.
    pub pms_normal: Vector3<f64>,
    /// Orthonormal basis of the passive-motion plane.
    pub pms_basis: [Vector3<f64>; 2],
    /// Active force row.
    pub tau_a: RowVector3<f64>,
}

impl MotionSubspaces {
    /// `n · δq` for the passive-motion plane normal `n`.
    pub fn pms_residual(&self, dq: &Vector3<f64>) -> f64 {
        self.pms_normal.dot(dq)
    }
}

pub fn motion_subspaces(params: &FingerParams) -> Result<MotionSubspaces> {
    let stiff = stiffness_matrices(params)?;
    let chol = stiff.k_q.cholesky().ok_or(Error::SingularStiffness)?;
    let [rd1, rd2, rd3] = params.drive_radii;
    let [rc1, rc2, rc3] = params.coupling_radii;
    let [z1, z2, z3] = params.drive_teeth.map(f64::from);

    let drive_arm = Vector3::new(rd1, z1 / z2 * rd2, z1 / z3 * rd3);
    let dq_active = chol.solve(&drive_arm).normalize();
    let active_gain = -chol.solve(&stiff.k_qa);

    let pms_normal = Vector3::new(rc1 * z1 / z3, rc2 * z2 / z3, rc3);
    let pms_basis = plane_basis(&pms_normal);
    let tau_a = RowVector3::new(z1 / z3 * rd1, z2 / z3 * rd2, rd3);
    Ok(MotionSubspaces {
        dq_active,
        active_gain,
        pms_normal,
        pms_basis,
        tau_a,
    })
}

/// Orthonormal basis of the plane `n·x = 0`: first vector is the projection
/// of the first coordinate axis not parallel to `n`, second is `n̂ × b1`.
pub fn plane_basis(normal: &Vector3<f64>) -> [Vector3<f64>; 2] {
    let n = normal.normalize();
    let b1 = [Vector3::x(), Vector3::y(), Vector3::z()]
        .iter()
        .map(|e| e - n * n.dot(e))
        .find(|v| v.norm() > 1e-6)
        .expect("some axis is not parallel to n")
        .normalize();
    [b1, n.cross(&b1)]
}
