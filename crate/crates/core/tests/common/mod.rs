//! Independent oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use dexfinger::contact::RigidObject;
use dexfinger::grasp::equilibrium_solve;
use dexfinger::kinematics::forward_kinematics;
use dexfinger::params::{FingerParams, JointState};
use nalgebra::{Isometry3, Point3, Vector3};
use rand_chacha::rand_core::RngCore;
use rand_chacha::ChaCha8Rng;

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

/// Energy straight from the spring elongations, no matrices involved.
pub fn energy_oracle(q: &Vector3<f64>, a: f64, p: &FingerParams) -> f64 {
    let [z1, z2, z3] = p.drive_teeth.map(f64::from);
    let [rd1, rd2, rd3] = p.drive_radii;
    let [rc1, rc2, rc3] = p.coupling_radii;
    let ts = a - rd1 * q[0] - z1 / z2 * rd2 * q[1] - z1 / z3 * rd3 * q[2];
    let tp = [rc2 * q[1] - rc1 * q[0], rc3 * q[2] - rc2 * q[1], rc3 * q[2]];
    let k = &p.springs;
    0.5 * k.k_s * ts * ts + (0..3).map(|i| 0.5 * k.k_p[i] * tp[i] * tp[i]).sum::<f64>()
}

pub fn planar_oracle(q: &JointState, lengths: [f64; 3]) -> Point3<f64> {
    let mut angle = 0.0;
    let (mut u, mut v) = (0.0, 0.0);
    for (l, qi) in lengths.iter().zip([q.q1, q.q2, q.q3]) {
        angle += qi;
        u += l * angle.cos();
        v += l * angle.sin();
    }
    Point3::new(u * q.q_aa.cos(), v, -u * q.q_aa.sin())
}

/// Free posture at drive `a0` plus a sphere of radius `r` touching the
/// fingertip, tilted by `tilt` in the flexion plane from the link normal.
pub fn touching_tip(p: &FingerParams, a0: f64, r: f64, tilt: f64) -> (JointState, RigidObject) {
    let free = equilibrium_solve(a0, &JointState::default(), p, None, &Default::default()).unwrap();
    let chain = forward_kinematics(&free.q, p, &Isometry3::identity());
    let (dip, tip) = chain.phalanx_segment(3);
    let axis = chain.flexion_axis(3);
    let ahead = forward_kinematics(
        &equilibrium_solve(a0 + 1e-3, &free.q, p, None, &Default::default())
            .unwrap()
            .q,
        p,
        &Isometry3::identity(),
    )
    .fingertip()
        - tip;
    let mut n = axis.cross(&(tip - dip)).normalize();
    if n.dot(&ahead) < 0.0 {
        n = -n;
    }
    // Tilt towards the free end of the link so the tip stays the witness point.
    let along = (tip - dip).normalize();
    let n = (n * tilt.cos() + along * tilt.sin()).normalize();
    let center = tip + n * (r + p.link_radii[2]);
    (free.q, RigidObject::sphere(center, r).unwrap())
}
