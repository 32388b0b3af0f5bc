//! Five modular fingers on a palm.
//!
//! Thumb, index and middle are full modules driven through the differential.
//! Ring and little are auxiliary fingers: the same coupled flexion chain, with
//! abduction left to a passive spring instead of a motor.

use std::path::Path;

use nalgebra::{Isometry3, Point3, Translation3, Unit, UnitQuaternion, Vector3};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::config::{Angle, ParamsDoc, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::kinematics::{forward_kinematics, FingerPoseChain};
use crate::params::{default_params, preset, FingerParams, JointState};
use crate::workspace::{sample_workspace, SamplingMode};

pub const FINGER_COUNT: usize = 5;

/// Reference layout document; loading it yields [`default_layout`].
pub const DEFAULT_LAYOUT_DOCUMENT: &str = include_str!("../schema/hand-layout.v1.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FingerKind {
    ActiveModular,
    AuxiliaryPassiveAa,
}

impl FingerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FingerKind::ActiveModular => "active-modular",
            FingerKind::AuxiliaryPassiveAa => "auxiliary-passive-aa",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FingerEntry {
    pub name: String,
    /// Finger base frame in the hand frame.
    pub base: Isometry3<f64>,
    pub kind: FingerKind,
    pub params: FingerParams,
    /// Passive abduction stiffness (N·mm/rad); auxiliary fingers only.
    pub aa_spring: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HandLayout {
    pub fingers: Vec<FingerEntry>,
}

impl HandLayout {
    pub fn validate(&self) -> Result<()> {
        if self.fingers.len() != FINGER_COUNT {
            return Err(Error::Arity {
                expected: FINGER_COUNT,
                got: self.fingers.len(),
            });
        }
        for (i, f) in self.fingers.iter().enumerate() {
            let field = |k: &str| format!("fingers[{i}].{k}");
            if f.name.is_empty() {
                return Err(Error::invalid(field("name"), "must not be empty"));
            }
            if self.fingers[..i].iter().any(|g| g.name == f.name) {
                return Err(Error::invalid(
                    field("name"),
                    format!("duplicate name {:?}", f.name),
                ));
            }
            match (f.kind, f.aa_spring) {
                (FingerKind::AuxiliaryPassiveAa, Some(k)) if k.is_finite() && k > 0.0 => {}
                (FingerKind::AuxiliaryPassiveAa, k) => {
                    return Err(Error::invalid(
                        field("aa_spring"),
                        format!("auxiliary finger needs a spring > 0, got {k:?}"),
                    ))
                }
                (FingerKind::ActiveModular, Some(_)) => {
                    return Err(Error::invalid(
                        field("aa_spring"),
                        "only auxiliary fingers carry a passive spring",
                    ))
                }
                (FingerKind::ActiveModular, None) => {}
            }
            f.params.validate()?;
        }
        Ok(())
    }

    pub fn finger(&self, name: &str) -> Option<&FingerEntry> {
        self.fingers.iter().find(|f| f.name == name)
    }
}

/// Four parallel fingers on a 20 mm pitch, thumb set back and turned 90°
/// about the finger axis so that it curls towards the others.
pub fn default_layout() -> HandLayout {
    let entry = |name: &str, z: f64, kind: FingerKind| FingerEntry {
        name: name.into(),
        base: Isometry3::translation(0.0, 0.0, z),
        kind,
        params: default_params(),
        aa_spring: (kind == FingerKind::AuxiliaryPassiveAa).then_some(100.0),
    };
    let thumb = FingerEntry {
        base: Isometry3::from_parts(
            Translation3::new(-30.0, 0.0, 50.0),
            UnitQuaternion::from_axis_angle(&Vector3::x_axis(), -std::f64::consts::FRAC_PI_2),
        ),
        ..entry("thumb", 0.0, FingerKind::ActiveModular)
    };
    HandLayout {
        fingers: vec![
            thumb,
            entry("index", 30.0, FingerKind::ActiveModular),
            entry("middle", 10.0, FingerKind::ActiveModular),
            entry("ring", -10.0, FingerKind::AuxiliaryPassiveAa),
            entry("little", -30.0, FingerKind::AuxiliaryPassiveAa),
        ],
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BaseDoc {
    translation_mm: [f64; 3],
    #[serde(default)]
    axis: Option<[f64; 3]>,
    #[serde(default)]
    angle: Option<Angle>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FingerDoc {
    name: String,
    kind: String,
    base: BaseDoc,
    #[serde(default)]
    preset: Option<String>,
    #[serde(default)]
    params: Option<ParamsDoc>,
    #[serde(default)]
    aa_spring: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayoutDoc {
    #[serde(default)]
    schema_version: Option<u32>,
    fingers: Vec<FingerDoc>,
}

fn base_transform(doc: &BaseDoc, field: &str) -> Result<Isometry3<f64>> {
    let angle = doc
        .angle
        .as_ref()
        .map(|a| {
            a.to_radians()
                .map_err(|e| Error::invalid(format!("{field}.angle"), e))
        })
        .transpose()?
        .unwrap_or(0.0);
    let rotation = match doc.axis {
        _ if angle == 0.0 => UnitQuaternion::identity(),
        Some(axis) => {
            let axis = Unit::try_new(Vector3::from(axis), 1e-12)
                .ok_or_else(|| Error::invalid(format!("{field}.axis"), "must be non-zero"))?;
            UnitQuaternion::from_axis_angle(&axis, angle)
        }
        None => {
            return Err(Error::invalid(
                format!("{field}.axis"),
                "a non-zero angle needs an axis",
            ))
        }
    };
    let t = doc.translation_mm;
    if !t.iter().chain([angle].iter()).all(|v| v.is_finite()) {
        return Err(Error::invalid(field, "entries must be finite"));
    }
    Ok(Isometry3::from_parts(
        Translation3::new(t[0], t[1], t[2]),
        rotation,
    ))
}

pub fn load_layout(source: &str) -> Result<HandLayout> {
    let doc: LayoutDoc = toml::from_str(source).map_err(|e| Error::Parse(e.to_string()))?;
    if let Some(v) = doc.schema_version {
        if v != SCHEMA_VERSION {
            return Err(Error::invalid(
                "schema_version",
                format!("unsupported version {v}, expected {SCHEMA_VERSION}"),
            ));
        }
    }
    let mut fingers = Vec::with_capacity(doc.fingers.len());
    for (i, f) in doc.fingers.into_iter().enumerate() {
        let field = |k: &str| format!("fingers[{i}].{k}");
        let kind = match f.kind.as_str() {
            "active-modular" => FingerKind::ActiveModular,
            "auxiliary-passive-aa" => FingerKind::AuxiliaryPassiveAa,
            other => {
                return Err(Error::invalid(
                    field("kind"),
                    format!(
                        "unknown kind {other:?} (expected active-modular or auxiliary-passive-aa)"
                    ),
                ))
            }
        };
        let start = match &f.preset {
            Some(name) => preset(name).ok_or_else(|| {
                Error::invalid(field("preset"), format!("unknown preset {name:?}"))
            })?,
            None => default_params(),
        };
        let params = match f.params {
            Some(doc) => doc.resolve(start)?,
            None => start,
        };
        fingers.push(FingerEntry {
            name: f.name,
            base: base_transform(&f.base, &field("base"))?,
            kind,
            params,
            aa_spring: f.aa_spring,
        });
    }
    let layout = HandLayout { fingers };
    layout.validate()?;
    Ok(layout)
}

pub fn load_layout_file(path: impl AsRef<Path>) -> Result<HandLayout> {
    load_layout(&std::fs::read_to_string(path)?)
}

/// `default` or a path to a layout document.
pub fn resolve_layout(spec: &str) -> Result<HandLayout> {
    if spec == "default" {
        Ok(default_layout())
    } else {
        load_layout_file(spec)
    }
}

/// Per-finger forward kinematics in the hand frame, in layout order.
pub fn hand_fk(states: &[JointState], layout: &HandLayout) -> Result<Vec<FingerPoseChain>> {
    if states.len() != layout.fingers.len() {
        return Err(Error::Arity {
            expected: layout.fingers.len(),
            got: states.len(),
        });
    }
    Ok(states
        .iter()
        .zip(&layout.fingers)
        .map(|(q, f)| forward_kinematics(q, &f.params, &f.base))
        .collect())
}

/// Passive abduction of an auxiliary finger under a lateral torque.
pub fn auxiliary_aa_deflection(torque: f64, k: f64, limit: f64) -> Result<f64> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::invalid("aa_spring", format!("must be > 0, got {k}")));
    }
    if !(limit.is_finite() && limit >= 0.0) {
        return Err(Error::invalid(
            "limit",
            format!("must be >= 0, got {limit}"),
        ));
    }
    Ok((torque / k).clamp(-limit, limit))
}

/// Seed of finger `index`'s own sample stream.
pub fn finger_seed(seed: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_word_pos(2 * index as u128);
    rng.next_u64()
}

/// Union of the five fingertip clouds in the hand frame, `n` samples per
/// finger, each drawn from its own sub-seed.
pub fn hand_workspace(
    layout: &HandLayout,
    n: usize,
    seed: u64,
    mode: SamplingMode,
) -> Result<Vec<(usize, Point3<f64>)>> {
    let mut points = Vec::with_capacity(n * layout.fingers.len());
    for (i, f) in layout.fingers.iter().enumerate() {
        let cloud = sample_workspace(&f.params, n, finger_seed(seed, i), mode)?;
        points.extend(cloud.points.iter().map(|p| (i, f.base * p)));
    }
    Ok(points)
}
