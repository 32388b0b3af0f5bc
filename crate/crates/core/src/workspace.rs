//! Monte Carlo workspace sampling and planar projections.
//!
//! Joint samples come from a ChaCha8 stream seeded with
//! `ChaCha8Rng::seed_from_u64(seed)`. Each uniform draw consumes one `u64`
//! and maps it to `[0, 1)` as `(u >> 11) · 2⁻⁵³`, then affinely onto the
//! joint range. Draw order per sample is `q_aa, q1, q2, q3` (full mode) or
//! `q_aa, q1` (coupled mode). Because every sample consumes a fixed number of
//! stream words, partitions can seek directly to their first sample and the
//! concatenated output equals the single-stream order.

use std::io::Write;

use nalgebra::{Isometry3, Point3};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::drive::{rigid_coupled_flexion, CouplingModel};
use crate::error::{Error, Result};
use crate::format::sig9;
use crate::kinematics::forward_kinematics;
use crate::params::{FingerParams, JointLimits, JointState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMode {
    /// Independent uniform samples of all four joints.
    Full,
    /// `q_aa` and `q1` sampled; `q2, q3` on the rigid-coupling line.
    Coupled,
}

impl SamplingMode {
    fn draws(self) -> u128 {
        match self {
            SamplingMode::Full => 4,
            SamplingMode::Coupled => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkspaceCloud {
    pub seed: u64,
    pub mode: SamplingMode,
    pub limits: JointLimits,
    /// Fingertip positions in the finger base frame (mm).
    pub points: Vec<Point3<f64>>,
}

impl WorkspaceCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plane {
    Xoy,
    Xoz,
    Yoz,
}

impl std::str::FromStr for Plane {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "xoy" => Ok(Plane::Xoy),
            "xoz" => Ok(Plane::Xoz),
            "yoz" => Ok(Plane::Yoz),
            _ => Err(format!("unknown plane {s:?} (expected xoy, xoz or yoz)")),
        }
    }
}

/// Range of `q1` for which the coupled `q2, q3` stay inside their limits.
pub fn coupled_q1_range(limits: &JointLimits, coupling: &CouplingModel) -> Result<[f64; 2]> {
    let r = coupling.rigid_ratio;
    if r.iter().any(|v| *v <= 0.0) {
        return Err(Error::DegenerateCoupling(
            "coupled sampling needs a strictly positive ratio".into(),
        ));
    }
    let [l1, h1] = limits.flexion(1);
    let [l2, h2] = limits.flexion(2);
    let [l3, h3] = limits.flexion(3);
    let lo = l1.max(l2 * r[0] / r[1]).max(l3 * r[0] / r[2]);
    let hi = h1.min(h2 * r[0] / r[1]).min(h3 * r[0] / r[2]);
    if lo > hi {
        return Err(Error::DegenerateCoupling(
            "joint limits admit no coupled posture".into(),
        ));
    }
    Ok([lo, hi])
}

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn between(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    lo + (hi - lo) * unit(rng)
}

struct Sampler<'a> {
    params: &'a FingerParams,
    mode: SamplingMode,
    coupling: CouplingModel,
    q1_range: [f64; 2],
}

impl<'a> Sampler<'a> {
    fn new(params: &'a FingerParams, mode: SamplingMode) -> Result<Self> {
        let coupling = CouplingModel::default();
        let q1_range = match mode {
            SamplingMode::Full => params.joint_limits.flexion(1),
            SamplingMode::Coupled => coupled_q1_range(&params.joint_limits, &coupling)?,
        };
        Ok(Sampler {
            params,
            mode,
            coupling,
            q1_range,
        })
    }

    fn joint_sample(&self, rng: &mut ChaCha8Rng) -> JointState {
        let lim = &self.params.joint_limits;
        let q_aa = between(rng, lim.aa());
        let q1 = between(rng, self.q1_range);
        match self.mode {
            SamplingMode::Full => {
                let q2 = between(rng, lim.flexion(2));
                let q3 = between(rng, lim.flexion(3));
                JointState::new(q_aa, q1, q2, q3)
            }
            SamplingMode::Coupled => {
                let (q2, q3) =
                    rigid_coupled_flexion(q1, &self.coupling).expect("ratio checked positive");
                JointState::new(q_aa, q1, q2, q3)
            }
        }
    }

    /// Samples `start..start + count` of the stream.
    fn run(&self, seed: u64, start: usize, count: usize) -> Vec<Point3<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_word_pos(2 * self.mode.draws() * start as u128);
        let base = Isometry3::identity();
        (0..count)
            .map(|_| {
                let q = self.joint_sample(&mut rng);
                forward_kinematics(&q, self.params, &base).fingertip()
            })
            .collect()
    }
}

/// Draw `n` fingertip positions from i.i.d. uniform joint samples.
pub fn sample_workspace(
    params: &FingerParams,
    n: usize,
    seed: u64,
    mode: SamplingMode,
) -> Result<WorkspaceCloud> {
    sample_workspace_parallel(params, n, seed, mode, 1)
}

/// As [`sample_workspace`], split across `workers` threads. The result is
/// identical to the single-threaded stream for any worker count.
pub fn sample_workspace_parallel(
    params: &FingerParams,
    n: usize,
    seed: u64,
    mode: SamplingMode,
    workers: usize,
) -> Result<WorkspaceCloud> {
    if n == 0 {
        return Err(Error::invalid("n", "sample count must be at least 1"));
    }
    let sampler = Sampler::new(params, mode)?;
    let workers = workers.clamp(1, n);
    let points = if workers == 1 {
        sampler.run(seed, 0, n)
    } else {
        let chunk = n.div_ceil(workers);
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let start = w * chunk;
                    let count = chunk.min(n.saturating_sub(start));
                    let sampler = &sampler;
                    s.spawn(move || sampler.run(seed, start, count))
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("sampling worker panicked"))
                .collect()
        })
    };
    Ok(WorkspaceCloud {
        seed,
        mode,
        limits: params.joint_limits,
        points,
    })
}

pub fn project_workspace(cloud: &WorkspaceCloud, plane: Plane) -> Result<Vec<[f64; 2]>> {
    project_points(&cloud.points, plane)
}

pub fn project_points(points: &[Point3<f64>], plane: Plane) -> Result<Vec<[f64; 2]>> {
    if points.is_empty() {
        return Err(Error::EmptyInput("workspace cloud has no points"));
    }
    Ok(points
        .iter()
        .map(|p| match plane {
            Plane::Xoy => [p.x, p.y],
            Plane::Xoz => [p.x, p.z],
            Plane::Yoz => [p.y, p.z],
        })
        .collect())
}

pub fn write_cloud_csv<W: Write>(mut w: W, points: &[Point3<f64>]) -> std::io::Result<()> {
    writeln!(w, "x_mm,y_mm,z_mm")?;
    for p in points {
        writeln!(w, "{},{},{}", sig9(p.x), sig9(p.y), sig9(p.z))?;
    }
    Ok(())
}

pub fn write_projection_csv<W: Write>(mut w: W, points: &[[f64; 2]]) -> std::io::Result<()> {
    writeln!(w, "u_mm,v_mm")?;
    for [u, v] in points {
        writeln!(w, "{},{}", sig9(*u), sig9(*v))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::default_params;

    #[test]
    fn zero_samples_rejected() {
        let err = sample_workspace(&default_params(), 0, 1, SamplingMode::Full).unwrap_err();
        assert!(err.to_string().contains("`n`"));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let p = default_params();
        let a = sample_workspace(&p, 1000, 42, SamplingMode::Full).unwrap();
        let b = sample_workspace(&p, 1000, 42, SamplingMode::Full).unwrap();
        assert_eq!(a, b);
        let c = sample_workspace(&p, 1000, 43, SamplingMode::Full).unwrap();
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn parallel_matches_single_stream() {
        let p = default_params();
        for mode in [SamplingMode::Full, SamplingMode::Coupled] {
            let single = sample_workspace(&p, 1001, 7, mode).unwrap();
            for workers in [2, 3, 8] {
                let par = sample_workspace_parallel(&p, 1001, 7, mode, workers).unwrap();
                assert_eq!(single.points, par.points, "{mode:?} x{workers}");
            }
        }
    }

    #[test]
    fn prefix_property() {
        let p = default_params();
        let small = sample_workspace(&p, 100, 3, SamplingMode::Coupled).unwrap();
        let large = sample_workspace(&p, 250, 3, SamplingMode::Coupled).unwrap();
        assert_eq!(small.points[..], large.points[..100]);
    }

    #[test]
    fn reach_bound() {
        let p = default_params();
        let cloud = sample_workspace(&p, 1000, 42, SamplingMode::Full).unwrap();
        assert!(cloud.points.iter().all(|x| x.coords.norm() <= 90.0 + 1e-9));
    }

    #[test]
    fn coupled_range_for_defaults() {
        let lim = default_params().joint_limits;
        let [lo, hi] = coupled_q1_range(&lim, &CouplingModel::default()).unwrap();
        assert_eq!(lo, 0.0);
        // q2 = 7/6 q1 saturates first.
        assert!((hi - lim.flexion(2)[1] * 6.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn projections() {
        let pts = [Point3::new(1.0, 2.0, 3.0)];
        assert_eq!(project_points(&pts, Plane::Xoy).unwrap(), vec![[1.0, 2.0]]);
        assert_eq!(project_points(&pts, Plane::Xoz).unwrap(), vec![[1.0, 3.0]]);
        assert_eq!(project_points(&pts, Plane::Yoz).unwrap(), vec![[2.0, 3.0]]);
        assert!(matches!(
            project_points(&[], Plane::Xoy),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn csv_header_and_rows() {
        let mut buf = Vec::new();
        write_cloud_csv(&mut buf, &[Point3::new(90.0, 0.0, -1.0 / 3.0)]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "x_mm,y_mm,z_mm\n90,0,-0.333333333\n"
        );
    }
}
