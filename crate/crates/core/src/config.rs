//! TOML configuration documents for [`FingerParams`].
//!
//! Every key is optional; missing keys take the values of
//! [`default_params`]. Unknown keys are rejected. Angles accept either a raw
//! number (radians) or a string with an explicit unit, e.g. `"20deg"`.

use std::path::Path;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{default_params, preset, FingerParams, JointLimits, Springs};

pub const SCHEMA_VERSION: u32 = 1;

/// Reference document for schema version 1. Loading it yields the defaults.
pub const REFERENCE_DOCUMENT: &str = include_str!("../schema/finger-params.v1.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Angle {
    Radians(f64),
    Text(String),
}

impl Angle {
    pub fn to_radians(&self) -> std::result::Result<f64, String> {
        match self {
            Angle::Radians(v) => Ok(*v),
            Angle::Text(s) => parse_angle(s),
        }
    }
}

/// Parse `"20deg"`, `"0.35rad"` or a bare number in radians.
pub fn parse_angle(s: &str) -> std::result::Result<f64, String> {
    let t = s.trim();
    let (num, scale) = if let Some(n) = t.strip_suffix("deg") {
        (n, std::f64::consts::PI / 180.0)
    } else if let Some(n) = t.strip_suffix("rad") {
        (n, 1.0)
    } else {
        (t, 1.0)
    };
    num.trim()
        .parse::<f64>()
        .map(|v| v * scale)
        .map_err(|_| format!("cannot parse angle {s:?}"))
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct SpringsDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_p: Option<[f64; 3]>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct LimitsDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aa: Option<[Angle; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q1: Option<[Angle; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q2: Option<[Angle; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q3: Option<[Angle; 2]>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct DifferentialDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_z: Option<[[f64; 2]; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<[[f64; 2]; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_z_prime: Option<[[f64; 2]; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub swap_modes: Option<bool>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct ParamsDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schema_version: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub teeth: Option<[u32; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drive_radii_mm: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupling_radii_mm: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub links_mm: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub link_radii_mm: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub springs: Option<SpringsDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limits: Option<LimitsDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub differential: Option<DifferentialDoc>,
}

fn mat2(rows: [[f64; 2]; 2]) -> Matrix2<f64> {
    Matrix2::new(rows[0][0], rows[0][1], rows[1][0], rows[1][1])
}

fn rows2(m: &Matrix2<f64>) -> [[f64; 2]; 2] {
    [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]
}

impl ParamsDoc {
    /// Fill missing keys from `base` and validate.
    pub(crate) fn resolve(self, base: FingerParams) -> Result<FingerParams> {
        if let Some(v) = self.schema_version {
            if v != SCHEMA_VERSION {
                return Err(Error::invalid(
                    "schema_version",
                    format!("unsupported version {v}, expected {SCHEMA_VERSION}"),
                ));
            }
        }
        let mut p = base;
        if let Some(t) = self.teeth {
            p.drive_teeth = t;
        }
        if let Some(r) = self.drive_radii_mm {
            p.drive_radii = r;
        }
        if let Some(r) = self.coupling_radii_mm {
            p.coupling_radii = r;
        }
        if let Some(l) = self.links_mm {
            p.link_lengths = l;
        }
        if let Some(r) = self.link_radii_mm {
            p.link_radii = r;
        }
        if let Some(s) = self.springs {
            p.springs = Springs {
                k_s: s.k_s.unwrap_or(p.springs.k_s),
                k_p: s.k_p.unwrap_or(p.springs.k_p),
            };
        }
        if let Some(l) = self.limits {
            let entries = [l.aa, l.q1, l.q2, l.q3];
            for (i, (name, entry)) in ["aa", "q1", "q2", "q3"].iter().zip(entries).enumerate() {
                if let Some([lo, hi]) = entry {
                    let conv = |a: &Angle| {
                        a.to_radians()
                            .map_err(|e| Error::invalid(format!("limits.{name}"), e))
                    };
                    p.joint_limits.0[i] = [conv(&lo)?, conv(&hi)?];
                }
            }
        }
        if let Some(d) = self.differential {
            if let Some(m) = d.r_z {
                p.differential.r_z = mat2(m);
            }
            if let Some(m) = d.r {
                p.differential.r = mat2(m);
            }
            if let Some(m) = d.r_z_prime {
                p.differential.r_z_prime = mat2(m);
            }
            if let Some(s) = d.swap_modes {
                p.differential.swap_modes = s;
            }
        }
        p.validate()?;
        Ok(p)
    }

    pub(crate) fn from_params(p: &FingerParams) -> Self {
        let JointLimits(lim) = p.joint_limits;
        let pair = |[lo, hi]: [f64; 2]| Some([Angle::Radians(lo), Angle::Radians(hi)]);
        ParamsDoc {
            schema_version: Some(SCHEMA_VERSION),
            teeth: Some(p.drive_teeth),
            drive_radii_mm: Some(p.drive_radii),
            coupling_radii_mm: Some(p.coupling_radii),
            links_mm: Some(p.link_lengths),
            link_radii_mm: Some(p.link_radii),
            springs: Some(SpringsDoc {
                k_s: Some(p.springs.k_s),
                k_p: Some(p.springs.k_p),
            }),
            limits: Some(LimitsDoc {
                aa: pair(lim[0]),
                q1: pair(lim[1]),
                q2: pair(lim[2]),
                q3: pair(lim[3]),
            }),
            differential: Some(DifferentialDoc {
                r_z: Some(rows2(&p.differential.r_z)),
                r: Some(rows2(&p.differential.r)),
                r_z_prime: Some(rows2(&p.differential.r_z_prime)),
                swap_modes: Some(p.differential.swap_modes),
            }),
        }
    }
}

/// Parse and validate a configuration document.
pub fn load_params(source: &str) -> Result<FingerParams> {
    let doc: ParamsDoc = toml::from_str(source).map_err(|e| Error::Parse(e.to_string()))?;
    doc.resolve(default_params())
}

pub fn load_params_file(path: impl AsRef<Path>) -> Result<FingerParams> {
    let text = std::fs::read_to_string(path)?;
    load_params(&text)
}

/// A preset name (`default`, `text-ratio`, `grasp`) or a path to a document.
pub fn resolve_params(spec: &str) -> Result<FingerParams> {
    match preset(spec) {
        Some(p) => Ok(p),
        None => load_params_file(spec),
    }
}

/// Fully populated document for `params`; angles written in radians.
pub fn to_toml(params: &FingerParams) -> String {
    toml::to_string(&ParamsDoc::from_params(params)).expect("params document serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn teeth_only_document() {
        let p = load_params("teeth = [22, 20, 16]").unwrap();
        assert_eq!(p.drive_teeth, [22, 20, 16]);
        assert_eq!(p, default_params());
    }

    #[test]
    fn missing_springs_use_defaults() {
        let p = load_params("links_mm = [40.0, 30.0, 20.0]").unwrap();
        assert_eq!(p.springs.k_s, 50.0);
        assert_eq!(p.springs.k_p, [100.0, 100.0, 100.0]);
    }

    #[test]
    fn partial_springs_table() {
        let p = load_params("[springs]\nk_s = 7.5").unwrap();
        assert_eq!(p.springs.k_s, 7.5);
        assert_eq!(p.springs.k_p, [100.0; 3]);
    }

    #[test]
    fn negative_link_is_a_validation_error() {
        let err = load_params("links_mm = [45.0, -5.0, 20.0]").unwrap_err();
        assert!(matches!(err, Error::Validation { .. }));
        assert!(err.to_string().contains("links_mm"));
    }

    #[test]
    fn unknown_key_is_a_parse_error() {
        let err = load_params("teeth = [22, 20, 16]\nwheels = 4").unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
        assert!(err.to_string().contains("wheels"), "{err}");
    }

    #[test]
    fn wrong_type_names_the_field() {
        let err = load_params("teeth = \"many\"").unwrap_err();
        assert!(err.to_string().contains("teeth"), "{err}");
    }

    #[test]
    fn degree_limits() {
        let p = load_params("[limits]\nq1 = [\"0deg\", \"90deg\"]\naa = [-0.1, 0.1]").unwrap();
        assert!((p.joint_limits.0[1][1] - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert_eq!(p.joint_limits.0[0], [-0.1, 0.1]);
    }

    #[test]
    fn bad_angle_text() {
        let err = load_params("[limits]\nq1 = [\"0deg\", \"ninety\"]").unwrap_err();
        assert!(err.to_string().contains("limits.q1"), "{err}");
    }

    #[test]
    fn schema_version_checked() {
        assert!(load_params("schema_version = 1").is_ok());
        assert!(load_params("schema_version = 2").is_err());
    }

    #[test]
    fn reference_document_is_the_default() {
        assert_eq!(load_params(REFERENCE_DOCUMENT).unwrap(), default_params());
    }

    #[test]
    fn presets_resolve() {
        assert_eq!(
            resolve_params("text-ratio").unwrap().drive_teeth,
            [14, 12, 20]
        );
        assert!(resolve_params("/nonexistent/finger.toml").is_err());
    }

    #[test]
    fn angle_parsing() {
        assert_eq!(parse_angle("0.5").unwrap(), 0.5);
        assert_eq!(parse_angle("0.5rad").unwrap(), 0.5);
        assert!((parse_angle("180deg").unwrap() - std::f64::consts::PI).abs() < 1e-15);
        assert!(parse_angle("deg").is_err());
    }
}
