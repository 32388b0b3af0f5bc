use dexfinger::drive::{rigid_coupled_flexion, CouplingModel};
use dexfinger::kinematics::fingertip;
use dexfinger::params::{default_params, JointState};
use dexfinger::workspace::*;
use nalgebra::{Matrix3, SymmetricEigen};

fn csv(cloud: &WorkspaceCloud) -> Vec<u8> {
    let mut buf = Vec::new();
    write_cloud_csv(&mut buf, &cloud.points).unwrap();
    buf
}

#[test]
fn coupled_projection_is_an_annulus() {
    let p = default_params();
    let coupling = CouplingModel::default();
    let [lo, hi] = coupled_q1_range(&p.joint_limits, &coupling).unwrap();
    // Fingertip radius along the coupled flexion range with the finger in plane.
    let radii: Vec<f64> = (0..=20_000)
        .map(|i| {
            let q1 = lo + (hi - lo) * i as f64 / 20_000.0;
            let (q2, q3) = rigid_coupled_flexion(q1, &coupling).unwrap();
            fingertip(&JointState::new(0.0, q1, q2, q3), &p)
                .coords
                .norm()
        })
        .collect();
    let inner = radii.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(inner > 0.0);

    let cloud = sample_workspace(&p, 20_000, 0, SamplingMode::Coupled).unwrap();
    let flat = project_workspace(&cloud, Plane::Xoy).unwrap();
    assert_eq!(flat.len(), cloud.len());
    let aa_max = p.joint_limits.aa()[1]
        .abs()
        .max(p.joint_limits.aa()[0].abs());
    for [u, v] in &flat {
        let r = u.hypot(*v);
        assert!(r <= 90.0 + 1e-9);
        assert!(r >= inner * aa_max.cos() - 1e-9, "{r} < {inner}");
    }
}

#[test]
fn identical_seed_gives_identical_csv() {
    let p = default_params();
    let a = sample_workspace(&p, 5000, 9, SamplingMode::Coupled).unwrap();
    let b = sample_workspace_parallel(&p, 5000, 9, SamplingMode::Coupled, 4).unwrap();
    assert_eq!(csv(&a), csv(&b));
}

#[test]
fn coupled_cloud_is_locally_two_dimensional() {
    let p = default_params();
    let cloud = sample_workspace(&p, 20_000, 1, SamplingMode::Coupled).unwrap();
    for centre in cloud.points.iter().step_by(400) {
        let mut near: Vec<_> = cloud
            .points
            .iter()
            .map(|x| ((x - centre).norm(), x))
            .collect();
        near.sort_by(|a, b| a.0.total_cmp(&b.0));
        let local: Vec<_> = near[..30].iter().map(|(_, x)| x.coords).collect();
        let mean = local.iter().sum::<nalgebra::Vector3<f64>>() / local.len() as f64;
        let cov = local
            .iter()
            .map(|x| (x - mean) * (x - mean).transpose())
            .sum::<Matrix3<f64>>();
        let mut ev: Vec<f64> = SymmetricEigen::new(cov)
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        assert!(ev[0] < 0.05 * ev[2], "{ev:?}");
    }
}

#[test]
fn full_mode_spans_three_dimensions() {
    let p = default_params();
    let cloud = sample_workspace(&p, 2000, 1, SamplingMode::Full).unwrap();
    let zs = cloud.points.iter().map(|x| x.z.abs()).fold(0.0, f64::max);
    assert!(zs > 1.0);
    assert!(cloud.points.iter().all(|x| x.coords.norm() <= 90.0 + 1e-9));
}
