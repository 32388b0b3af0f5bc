use dexfinger::config::*;
use dexfinger::params::{default_params, FingerParams, JointLimits, Springs};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = FingerParams> {
    (
        prop::array::uniform3(1u32..60),
        prop::array::uniform3(0.5..30.0f64),
        prop::array::uniform3(0.5..30.0f64),
        prop::array::uniform3(5.0..80.0f64),
        (0.01..1e4f64, prop::array::uniform3(0.01..1e4f64)),
        prop::array::uniform4((-1.5..0.0f64, 0.1..2.0f64)),
    )
        .prop_map(|(teeth, rd, rc, links, (k_s, k_p), lim)| FingerParams {
            drive_teeth: teeth,
            drive_radii: rd,
            coupling_radii: rc,
            link_lengths: links,
            link_radii: links.map(|l| l / 10.0),
            springs: Springs { k_s, k_p },
            joint_limits: JointLimits(lim.map(|(lo, hi)| [lo, hi])),
            ..default_params()
        })
}

proptest! {
    #[test]
    fn document_round_trip(p in params()) {
        let text = to_toml(&p);
        prop_assert_eq!(load_params(&text).unwrap(), p);
    }
}

#[test]
fn reference_document_loads_to_defaults() {
    assert_eq!(load_params(REFERENCE_DOCUMENT).unwrap(), default_params());
}

#[test]
fn degree_strings_and_unknown_keys() {
    let p = load_params("[limits]\nq1 = [\"0deg\", \"90deg\"]").unwrap();
    assert!((p.joint_limits.flexion(1)[1] - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    assert!(load_params("colour = 3").is_err());
    assert!(load_params("[springs]\nk_q = 1.0").is_err());
}
