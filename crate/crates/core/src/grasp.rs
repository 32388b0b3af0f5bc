//! Quasi-static grasp equilibrium of the compliant flexion chain.
//!
//! For a drive value `a` the joints settle where the elastic energy
//!
//! ```text
//! E(q; a) = ½·k_s·T_s² + ½·Σ k_pi·T_pi²
//! ```
//!
//! is minimal subject to joint limits and non-penetration of the phalanx
//! capsules with a rigid object. `E` is a convex quadratic in the flexion
//! angles; the contact gaps are not, so the solver linearizes them around the
//! current iterate, solves the resulting QP exactly with the active-set kernel
//! in [`crate::qp`], and repeats. Constraint curvature from the previous
//! multipliers is folded into the QP Hessian when that keeps it positive
//! definite. Phalanges that are not yet candidates are handled by conservative
//! advancement: a step is cut where it would first bring one of them into
//! contact, so no link can tunnel through the object.
//!
//! Steps are accepted by an Armijo search on the ℓ1 penalty merit
//! `E + ν·Σ max(0, −gap)`. When the curvature test finds a direction of
//! negative curvature along the loaded contact surfaces and the QP step has
//! stalled, the iterate sits near a saddle (typically a link balanced on the
//! crest of the object); it then slides along that direction, projected back
//! onto the loaded surfaces, before the next QP.
//!
//! The abduction angle is held at its initial value throughout.

use nalgebra::{DMatrix, DVector, Isometry3, Matrix3, SymmetricEigen, Vector3};

use crate::contact::{phalanx_query, Contact, RigidObject, ACTIVATION_THRESHOLD};
use crate::error::{Error, Result};
use crate::kinematics::{forward_kinematics, FingerPoseChain};
use crate::params::{FingerParams, JointState};
use crate::qp::solve_qp;
use crate::ucm::{
    stiffness_matrices, transmission_jacobians, transmission_state, StiffnessSet, TransmissionState,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Gap (mm) at or below which a phalanx enters the linearized problem.
    pub activation_threshold: f64,
    pub max_outer_iterations: usize,
    /// Largest initial penetration (mm) the solver will repair.
    pub recovery_tolerance: f64,
    /// Outer loop stops once a full step is shorter than this (rad, ∞-norm).
    pub step_tolerance: f64,
    /// Gap (mm) within which an unloaded phalanx still counts as touching.
    pub touch_tolerance: f64,
    /// Per-phalanx relaxation of the non-penetration constraint,
    /// `gap_i + offset_i ≥ 0`; equivalent to retreating the object by
    /// `offset_i` along that contact normal.
    pub gap_offsets: [f64; 3],
    /// Include constraint curvature in the QP Hessian.
    pub curvature: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            activation_threshold: ACTIVATION_THRESHOLD,
            max_outer_iterations: 20,
            recovery_tolerance: 1e-3,
            step_tolerance: 1e-12,
            touch_tolerance: 1e-6,
            gap_offsets: [0.0; 3],
            curvature: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    NonConverged,
}

/// First-order optimality measures at a returned iterate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktReport {
    /// `‖∇E − Σ λ_i ∇gap_i − μ‖` with `μ` the joint-limit multipliers.
    pub stationarity: f64,
    pub gradient_norm: f64,
    /// `max_i λ_i · |gap_i|` (N·mm).
    pub complementarity: f64,
    /// Smallest gap over the three phalanges (mm); `+∞` without an object.
    pub min_gap: f64,
}

/// Relative stationarity tolerance, against `1 + ‖∇E‖`.
pub const STATIONARITY_RTOL: f64 = 1e-8;
/// Largest accepted penetration (mm).
pub const PENETRATION_TOL: f64 = 1e-6;
/// Largest accepted `force · |gap|` (N·mm).
pub const COMPLEMENTARITY_TOL: f64 = 1e-6;

impl KktReport {
    pub fn stationarity_ok(&self) -> bool {
        self.stationarity <= STATIONARITY_RTOL * (1.0 + self.gradient_norm)
    }

    /// Stationarity, penetration and complementarity all within tolerance.
    pub fn ok(&self) -> bool {
        self.stationarity_ok()
            && self.min_gap >= -PENETRATION_TOL
            && self.complementarity <= COMPLEMENTARITY_TOL
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub a: f64,
    pub q: JointState,
    pub transmission: TransmissionState,
    /// Touching or loaded phalanges, in phalanx order.
    pub contacts: Vec<Contact>,
    pub energy: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    pub kkt: KktReport,
    /// Multipliers of the lower and upper flexion limits.
    pub limit_multipliers: [[f64; 2]; 3],
}

impl Equilibrium {
    /// Contacts carrying a normal force above `min_force`.
    pub fn loaded_contacts(&self, min_force: f64) -> impl Iterator<Item = &Contact> {
        self.contacts.iter().filter(move |c| c.force > min_force)
    }

    pub fn contact_on(&self, phalanx: usize) -> Option<&Contact> {
        self.contacts.iter().find(|c| c.phalanx == phalanx)
    }
}

pub fn elastic_energy(q: &Vector3<f64>, a: f64, params: &FingerParams) -> f64 {
    let t = transmission_state(q, a, params);
    let s = &params.springs;
    0.5 * s.k_s * t.t_s * t.t_s
        + 0.5
            * s.k_p
                .iter()
                .zip(t.t_p.iter())
                .map(|(k, tp)| k * tp * tp)
                .sum::<f64>()
}

/// `∇_q E = k_s·T_s·J_s1ᵀ + J_pᵀ·K_p·T_p`.
pub fn energy_gradient(q: &Vector3<f64>, a: f64, params: &FingerParams) -> Vector3<f64> {
    let t = transmission_state(q, a, params);
    let j = transmission_jacobians(params);
    let kp_tp = Vector3::from(params.springs.k_p).component_mul(&Vector3::from(t.t_p));
    j.j_s1.transpose() * (params.springs.k_s * t.t_s) + j.j_p.transpose() * kp_tp
}

struct Problem<'a> {
    a: f64,
    q_aa: f64,
    params: &'a FingerParams,
    object: Option<&'a RigidObject>,
    settings: &'a SolverSettings,
    stiffness: StiffnessSet,
    lower: Vector3<f64>,
    upper: Vector3<f64>,
}

impl Problem<'_> {
    fn chain(&self, q: &Vector3<f64>) -> FingerPoseChain {
        forward_kinematics(
            &JointState::from_flexion(self.q_aa, q),
            self.params,
            &Isometry3::identity(),
        )
    }

    fn gradient(&self, q: &Vector3<f64>) -> Vector3<f64> {
        self.stiffness.k_q * q + self.stiffness.k_qa * self.a
    }

    /// All three phalanx queries with the configured offsets applied to `gap`.
    fn queries(&self, q: &Vector3<f64>) -> Option<(FingerPoseChain, [Contact; 3])> {
        let object = self.object?;
        let chain = self.chain(q);
        let contacts = [1, 2, 3].map(|i| {
            let mut c = phalanx_query(&chain, self.params, object, i);
            c.gap += self.settings.gap_offsets[i - 1];
            c
        });
        Some((chain, contacts))
    }

    fn gap_gradient_at(&self, q: &Vector3<f64>, phalanx: usize) -> Vector3<f64> {
        let (chain, c) = self.queries(q).expect("object present");
        c[phalanx - 1].gap_gradient(&chain)
    }

    /// Central-difference Hessian of one gap, symmetrized.
    fn gap_hessian(&self, q: &Vector3<f64>, phalanx: usize) -> Matrix3<f64> {
        let h = 1e-6;
        let mut m = Matrix3::zeros();
        for j in 0..3 {
            let mut qp = *q;
            qp[j] += h;
            let mut qm = *q;
            qm[j] -= h;
            let col = (self.gap_gradient_at(&qp, phalanx) - self.gap_gradient_at(&qm, phalanx))
                / (2.0 * h);
            m.set_column(j, &col);
        }
        (m + m.transpose()) * 0.5
    }

    /// Exact-penalty merit `E + ν·Σ max(0, −gap_i)`.
    fn merit(&self, q: &Vector3<f64>, penalty: f64) -> f64 {
        let violation = self
            .queries(q)
            .map_or(0.0, |(_, c)| c.iter().map(|c| (-c.gap).max(0.0)).sum());
        elastic_energy(q, self.a, self.params) + penalty * violation
    }

    /// Backtracking from `reach` until the merit decreases sufficiently.
    fn line_search(
        &self,
        q: &Vector3<f64>,
        step: &Vector3<f64>,
        candidates: &[(Contact, Vector3<f64>)],
        reach: f64,
        penalty: f64,
    ) -> f64 {
        let violation: f64 = candidates.iter().map(|(c, _)| (-c.gap).max(0.0)).sum();
        let slope = self.gradient(q).dot(step) - penalty * violation;
        if slope >= 0.0 {
            return reach;
        }
        let start = self.merit(q, penalty);
        let mut alpha = reach;
        for _ in 0..40 {
            if self.merit(&(q + step * alpha), penalty) <= start + 1e-4 * alpha * slope {
                break;
            }
            alpha *= 0.5;
        }
        alpha
    }

    /// Largest fraction of `step` that keeps the gap of every `(phalanx,
    /// floor)` in `watch` at or above its floor.
    fn advance(&self, q: &Vector3<f64>, step: &Vector3<f64>, watch: &[(usize, f64)]) -> f64 {
        if watch.is_empty() || self.object.is_none() {
            return 1.0;
        }
        // Most negative gap-minus-floor; crossing zero marks the cut.
        let min_gap = |t: f64| {
            let Some((_, gaps)) = self.queries(&(q + step * t)) else {
                return f64::INFINITY;
            };
            watch
                .iter()
                .map(|&(i, floor)| gaps[i - 1].gap - floor)
                .fold(f64::INFINITY, f64::min)
        };
        const SAMPLES: usize = 32;
        let mut lo = 0.0;
        for k in 1..=SAMPLES {
            let t = k as f64 / SAMPLES as f64;
            if min_gap(t) < 0.0 {
                let mut hi = t;
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if min_gap(mid) < 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return lo;
            }
            lo = t;
        }
        1.0
    }
}

/// KKT tolerances met at `q` itself, with the multipliers of the step solved
/// there. QP stationarity gives `∇E − Σ λ_i ∇gap_i − μ = −H·step`, so the
/// residual needs no extra evaluation.
fn kkt_certified(
    problem: &Problem<'_>,
    q: &Vector3<f64>,
    candidates: &[(Contact, Vector3<f64>)],
    hessian: &Matrix3<f64>,
    sol: &StepSolution,
) -> bool {
    let grad_norm = problem.gradient(q).norm();
    let stationary = (hessian * sol.step).norm() <= 0.5 * STATIONARITY_RTOL * (1.0 + grad_norm);
    let contacts_ok = candidates
        .iter()
        .zip(&sol.contact_multipliers)
        .all(|((c, _), (_, l))| {
            c.gap >= -0.1 * PENETRATION_TOL && l * c.gap.abs() <= 0.1 * COMPLEMENTARITY_TOL
        });
    stationary && contacts_ok
}

enum Curvature {
    /// No loaded contact; `K_q` is exact.
    Flat,
    Positive(Matrix3<f64>),
    /// Unit direction of negative curvature in the tangent space of the
    /// loaded contacts and limits: the iterate cannot be a local minimum.
    Negative(Vector3<f64>),
    /// Indefinite, but no usable direction either; fall back to `K_q`.
    Unknown,
}

/// `K_q − Σ λ_i ∇²gap_i`, made positive definite if necessary by adding a
/// penalty `ρ·n nᵀ` along the loaded contact normals and active limit axes.
/// The penalty leaves the curvature along the remaining free directions
/// untouched, so it can
/// only work when that curvature is positive; otherwise the tangent direction
/// of negative curvature is returned.
fn curvature(
    problem: &Problem<'_>,
    q: &Vector3<f64>,
    candidates: &[(Contact, Vector3<f64>)],
    multipliers: &[(usize, f64)],
    limit_multipliers: &[[f64; 2]; 3],
) -> Curvature {
    let mut curved = problem.stiffness.k_q;
    let mut normals = Matrix3::zeros();
    for &(phalanx, lambda) in multipliers {
        let Some((_, grad)) = candidates.iter().find(|(c, _)| c.phalanx == phalanx) else {
            continue;
        };
        if lambda > 0.0 {
            curved -= problem.gap_hessian(q, phalanx) * lambda;
            let n = grad.normalize();
            normals += n * n.transpose();
        }
    }
    if normals == Matrix3::zeros() {
        return Curvature::Flat;
    }
    if curved.cholesky().is_some() {
        return Curvature::Positive(curved);
    }
    let mut blocked = normals;
    for (j, [lo, hi]) in limit_multipliers.iter().enumerate() {
        if *lo > 0.0 || *hi > 0.0 {
            blocked[(j, j)] += 1.0;
        }
    }
    let scale = curved.norm();
    if let Some(h) = (0..8)
        .map(|k| curved + blocked * (scale * 10f64.powi(k)))
        .find(|h| h.cholesky().is_some())
    {
        return Curvature::Positive(h);
    }

    let eig = SymmetricEigen::new(blocked);
    let tol = 1e-9 * eig.eigenvalues.amax();
    let mut best: Option<(f64, Vector3<f64>)> = None;
    let free: Vec<Vector3<f64>> = (0..3)
        .filter(|&k| eig.eigenvalues[k] <= tol)
        .map(|k| eig.eigenvectors.column(k).into_owned())
        .collect();
    if free.is_empty() {
        return Curvature::Unknown;
    }
    // Reduced Hessian on the free subspace, at most 2×2 here.
    let z = DMatrix::from_fn(3, free.len(), |i, k| free[k][i]);
    let hc = DMatrix::from_column_slice(3, 3, curved.as_slice());
    let reduced = z.transpose() * &hc * &z;
    let red = SymmetricEigen::new(reduced);
    for k in 0..free.len() {
        let v = &z * red.eigenvectors.column(k);
        let value = red.eigenvalues[k];
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, Vector3::new(v[0], v[1], v[2])));
        }
    }
    match best {
        Some((value, d)) if value < -1e-9 * scale => Curvature::Negative(d.normalize()),
        _ => Curvature::Unknown,
    }
}

/// Shortest and longest step along a negative-curvature direction (rad).
const ESCAPE_STEP: [f64; 2] = [0.05, 1.0];

/// Step along `±d`, signed downhill for the energy (towards more flexion on a
/// tie). The length minimizes the energy along the line within
/// [`ESCAPE_STEP`] and is clipped to the joint limits.
fn escape_step(problem: &Problem<'_>, q: &Vector3<f64>, d: &Vector3<f64>) -> Vector3<f64> {
    let grad = problem.gradient(q);
    let slope = grad.dot(d);
    let tie = slope.abs() <= 1e-12 * (1.0 + grad.norm());
    let first = if (tie && d.sum() < 0.0) || (!tie && slope > 0.0) {
        -d
    } else {
        *d
    };
    let reach = |dir: &Vector3<f64>| {
        let curvature = dir.dot(&(problem.stiffness.k_q * dir));
        let along = (-grad.dot(dir) / curvature).clamp(ESCAPE_STEP[0], ESCAPE_STEP[1]);
        (0..3).fold(along, |t: f64, j| {
            if dir[j] > 0.0 {
                t.min((problem.upper[j] - q[j]) / dir[j])
            } else if dir[j] < 0.0 {
                t.min((problem.lower[j] - q[j]) / dir[j])
            } else {
                t
            }
        })
    };
    let t = reach(&first);
    if t > 1e-9 {
        first * t
    } else {
        -first * reach(&-first)
    }
}

/// Move off a saddle along the negative-curvature tangent `d` while keeping
/// the `loaded` contacts closed: a tangent step, then minimum-norm
/// Gauss–Newton corrections back onto their gap surfaces. Halves the step
/// until the energy drops with no penetration along the way; `None` if that
/// never happens.
fn escape(
    problem: &Problem<'_>,
    q: &Vector3<f64>,
    d: &Vector3<f64>,
    loaded: &[usize],
) -> Option<Vector3<f64>> {
    let step = escape_step(problem, q, d);
    let start = elastic_energy(q, problem.a, problem.params);
    let free: Vec<(usize, f64)> = (1..=3)
        .filter(|i| !loaded.contains(i))
        .map(|i| (i, 0.0))
        .collect();
    let mut t = 1.0;
    for _ in 0..12 {
        let mut x = q + step * t;
        for _ in 0..8 {
            let (chain, gaps) = problem.queries(&x)?;
            let rows: Vec<(f64, Vector3<f64>)> = loaded
                .iter()
                .map(|&i| (gaps[i - 1].gap, gaps[i - 1].gap_gradient(&chain)))
                .collect();
            if rows.iter().all(|(g, _)| g.abs() <= 1e-12) {
                break;
            }
            let jac = DMatrix::from_fn(rows.len(), 3, |r, j| rows[r].1[j]);
            let rhs = DVector::from_fn(rows.len(), |r, _| -rows[r].0);
            let y = (&jac * jac.transpose()).lu().solve(&rhs)?;
            let delta = jac.transpose() * y;
            x += Vector3::new(delta[0], delta[1], delta[2]);
            x = x.sup(&problem.lower).inf(&problem.upper);
        }
        let closed = problem.queries(&x).is_some_and(|(_, gaps)| {
            loaded
                .iter()
                .all(|&i| gaps[i - 1].gap >= -0.1 * PENETRATION_TOL)
        });
        if closed
            && elastic_energy(&x, problem.a, problem.params) < start
            && problem.advance(q, &(x - q), &free) == 1.0
        {
            return Some(x);
        }
        t *= 0.5;
    }
    None
}

/// Advancement floors: zero for phalanges outside the linearized problem,
/// `min(gap, 0) + allowance` for candidates.
fn floors(candidates: &[(Contact, Vector3<f64>)], allowance: f64) -> Vec<(usize, f64)> {
    (1..=3)
        .map(|i| match candidates.iter().find(|(c, _)| c.phalanx == i) {
            Some((c, _)) => (i, c.gap.min(0.0) + allowance),
            None => (i, 0.0),
        })
        .collect()
}

struct StepSolution {
    step: Vector3<f64>,
    /// `(phalanx, multiplier)` for each linearized contact row.
    contact_multipliers: Vec<(usize, f64)>,
    limit_multipliers: [[f64; 2]; 3],
}

fn solve_step(
    problem: &Problem<'_>,
    q: &Vector3<f64>,
    candidates: &[(Contact, Vector3<f64>)],
    hessian: &Matrix3<f64>,
) -> Option<StepSolution> {
    let rows = 6 + candidates.len();
    let mut a_mat = DMatrix::zeros(rows, 3);
    let mut b = DVector::zeros(rows);
    for j in 0..3 {
        a_mat[(2 * j, j)] = 1.0;
        b[2 * j] = problem.lower[j] - q[j];
        a_mat[(2 * j + 1, j)] = -1.0;
        b[2 * j + 1] = q[j] - problem.upper[j];
    }
    for (k, (c, grad)) in candidates.iter().enumerate() {
        for j in 0..3 {
            a_mat[(6 + k, j)] = grad[j];
        }
        b[6 + k] = -c.gap;
    }
    let h = DMatrix::from_column_slice(3, 3, hessian.as_slice());
    let g = DVector::from_column_slice(problem.gradient(q).as_slice());
    let sol = solve_qp(&h, &g, &a_mat, &b).ok()?;
    let mu = &sol.multipliers;
    Some(StepSolution {
        step: Vector3::new(sol.x[0], sol.x[1], sol.x[2]),
        contact_multipliers: candidates
            .iter()
            .enumerate()
            .map(|(k, (c, _))| (c.phalanx, mu[6 + k]))
            .collect(),
        limit_multipliers: [[mu[0], mu[1]], [mu[2], mu[3]], [mu[4], mu[5]]],
    })
}

/// Solve for the equilibrium flexion at drive value `a`, starting from `q_init`.
///
/// Non-convergence is reported through [`SolveStatus::NonConverged`] with
/// the last iterate; an initial penetration beyond the recovery tolerance is
/// an error.
pub fn equilibrium_solve(
    a: f64,
    q_init: &JointState,
    params: &FingerParams,
    object: Option<&RigidObject>,
    settings: &SolverSettings,
) -> Result<Equilibrium> {
    if !q_init.is_finite() || !params.joint_limits.contains(q_init, 1e-12) {
        return Err(Error::Precondition(
            "initial joint state outside the joint limits".into(),
        ));
    }
    let stiffness = stiffness_matrices(params)?;
    if !stiffness.positive_definite {
        return Err(Error::SingularStiffness);
    }
    let problem = Problem {
        a,
        q_aa: q_init.q_aa,
        params,
        object,
        settings,
        stiffness,
        lower: params.joint_limits.lower_flexion(),
        upper: params.joint_limits.upper_flexion(),
    };

    let mut q = q_init.flexion().sup(&problem.lower).inf(&problem.upper);
    if let Some((_, gaps)) = problem.queries(&q) {
        if let Some(worst) = gaps
            .iter()
            .filter(|c| c.gap < -settings.recovery_tolerance)
            .min_by(|l, r| l.gap.total_cmp(&r.gap))
        {
            return Err(Error::InfeasibleStart {
                phalanx: worst.phalanx,
                penetration: -worst.gap,
            });
        }
    }

    let mut previous: Vec<(usize, f64)> = Vec::new();
    let mut previous_limits = [[0.0; 2]; 3];
    let mut penalty: f64 = 0.0;
    let mut converged = None;
    let mut iterations = 0;
    while iterations < settings.max_outer_iterations {
        iterations += 1;
        let candidates: Vec<(Contact, Vector3<f64>)> = match problem.queries(&q) {
            Some((chain, all)) => all
                .iter()
                .filter(|c| c.gap <= settings.activation_threshold)
                .map(|c| (*c, c.gap_gradient(&chain)))
                .collect(),
            None => Vec::new(),
        };

        let mut hessian = problem.stiffness.k_q;
        let mut unstable = None;
        if settings.curvature && !candidates.is_empty() {
            if previous.is_empty() {
                if let Some(first) = solve_step(&problem, &q, &candidates, &hessian) {
                    previous = first.contact_multipliers;
                    previous_limits = first.limit_multipliers;
                }
            }
            match curvature(&problem, &q, &candidates, &previous, &previous_limits) {
                Curvature::Positive(h) => hessian = h,
                Curvature::Negative(d) => unstable = Some(d),
                Curvature::Flat | Curvature::Unknown => {}
            }
        }

        let Some(sol) = solve_step(&problem, &q, &candidates, &hessian) else {
            break;
        };
        if let Some(d) = unstable.filter(|_| sol.step.amax() < ESCAPE_STEP[0]) {
            // Stalled next to a saddle: slide off it along the tangent.
            let loaded: Vec<usize> = previous
                .iter()
                .filter(|(_, l)| *l > 0.0)
                .map(|(p, _)| *p)
                .collect();
            if let Some(x) = escape(&problem, &q, &d, &loaded) {
                q = x;
                previous.clear();
                continue;
            }
        }
        // Linearized candidates may still overshoot by the second-order
        // error of the step, at most about ½·reach·‖step‖² (mm).
        let slack = 0.5 * params.reach() * sol.step.norm_squared();
        let watch = floors(&candidates, -slack - 0.1 * PENETRATION_TOL);
        let reach = problem.advance(&q, &sol.step, &watch);
        if reach == 1.0
            && (sol.step.amax() <= settings.step_tolerance
                || kkt_certified(&problem, &q, &candidates, &hessian, &sol))
        {
            converged = Some(sol);
            break;
        }
        let largest = sol
            .contact_multipliers
            .iter()
            .map(|(_, l)| *l)
            .fold(0.0, f64::max);
        penalty = penalty.max(2.0 * largest + 1.0);
        let alpha = problem.line_search(&q, &sol.step, &candidates, reach, penalty);
        previous = sol.contact_multipliers.clone();
        previous_limits = sol.limit_multipliers;
        q += sol.step * alpha;
    }

    let status = if converged.is_some() {
        SolveStatus::Converged
    } else {
        SolveStatus::NonConverged
    };
    Ok(finish(&problem, q, converged, status, iterations))
}

fn finish(
    problem: &Problem<'_>,
    q: Vector3<f64>,
    solution: Option<StepSolution>,
    status: SolveStatus,
    iterations: usize,
) -> Equilibrium {
    let settings = problem.settings;
    let grad = problem.gradient(&q);
    let mut residual = grad;
    let mut complementarity: f64 = 0.0;
    let mut contacts = Vec::new();
    let mut min_gap = f64::INFINITY;
    let multiplier = |phalanx: usize| {
        solution
            .as_ref()
            .and_then(|s| s.contact_multipliers.iter().find(|(p, _)| *p == phalanx))
            .map_or(0.0, |(_, l)| *l)
    };
    if let Some((chain, all)) = problem.queries(&q) {
        for mut c in all {
            min_gap = min_gap.min(c.gap);
            c.force = multiplier(c.phalanx);
            residual -= c.gap_gradient(&chain) * c.force;
            complementarity = complementarity.max(c.force * c.gap.abs());
            if c.force > 0.0 || c.gap <= settings.touch_tolerance {
                contacts.push(c);
            }
        }
    }
    let limit_multipliers = solution
        .as_ref()
        .map_or([[0.0; 2]; 3], |s| s.limit_multipliers);
    for (j, [lo, hi]) in limit_multipliers.iter().enumerate() {
        residual[j] -= lo - hi;
    }
    Equilibrium {
        a: problem.a,
        q: JointState::from_flexion(problem.q_aa, &q),
        transmission: transmission_state(&q, problem.a, problem.params),
        contacts,
        energy: elastic_energy(&q, problem.a, problem.params),
        status,
        iterations,
        kkt: KktReport {
            stationarity: residual.norm(),
            gradient_norm: grad.norm(),
            complementarity,
            min_gap,
        },
        limit_multipliers,
    }
}

/// Monotone drive schedule, optionally removing the object from a given step on.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveSchedule {
    pub values: Vec<f64>,
    /// Index of the first step solved without the object.
    pub release_at: Option<usize>,
}

impl DriveSchedule {
    /// `a_max · k / steps` for `k = 1..=steps`.
    pub fn linear(a_max: f64, steps: usize) -> Self {
        DriveSchedule {
            values: (1..=steps)
                .map(|k| a_max * k as f64 / steps as f64)
                .collect(),
            release_at: None,
        }
    }

    pub fn with_release(mut self, step: usize) -> Self {
        self.release_at = Some(step);
        self
    }

    pub fn object_present(&self, step: usize) -> bool {
        self.release_at.is_none_or(|r| step < r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Completed,
    Ejected,
    LimitSaturated,
    NonConverged,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Completed => "completed",
            Termination::Ejected => "ejected",
            Termination::LimitSaturated => "limit-saturated",
            Termination::NonConverged => "non-converged",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub step: usize,
    pub object_present: bool,
    pub equilibrium: Equilibrium,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumTrace {
    pub steps: Vec<TraceStep>,
    pub termination: Termination,
}

impl EquilibriumTrace {
    pub fn last(&self) -> Option<&Equilibrium> {
        self.steps.last().map(|s| &s.equilibrium)
    }
}

/// Object lost: at least two contacts before, none now, drive still increasing.
pub fn contact_loss(prev_contacts: usize, contacts: usize, prev_a: f64, a: f64) -> bool {
    prev_contacts >= 2 && contacts == 0 && a > prev_a
}

/// Every flexion joint held at a limit by a positive limit multiplier.
pub fn limits_saturated(eq: &Equilibrium) -> bool {
    eq.limit_multipliers
        .iter()
        .all(|[lo, hi]| *lo > 0.0 || *hi > 0.0)
}

/// Warm-started equilibrium solves along `schedule`.
pub fn envelop_sweep(
    schedule: &DriveSchedule,
    params: &FingerParams,
    object: &RigidObject,
    settings: &SolverSettings,
) -> Result<EquilibriumTrace> {
    if schedule.values.is_empty() {
        return Err(Error::EmptyInput("drive schedule has no steps"));
    }
    if schedule.values.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Precondition(
            "drive schedule must be monotone".into(),
        ));
    }
    let lim = &params.joint_limits;
    let [aa_lo, aa_hi] = lim.aa();
    let mut q = JointState::new(
        0.0f64.clamp(aa_lo, aa_hi),
        lim.flexion(1)[0],
        lim.flexion(2)[0],
        lim.flexion(3)[0],
    );
    let mut steps: Vec<TraceStep> = Vec::with_capacity(schedule.values.len());
    let mut termination = Termination::Completed;
    for (k, &a) in schedule.values.iter().enumerate() {
        let present = schedule.object_present(k);
        let eq =
            equilibrium_solve(a, &q, params, present.then_some(object), settings).map_err(|e| {
                Error::Sweep {
                    step: k,
                    source: Box::new(e),
                }
            })?;
        q = eq.q;
        let non_converged = eq.status == SolveStatus::NonConverged;
        let ejected = match steps.last() {
            Some(prev) if prev.object_present && present => contact_loss(
                prev.equilibrium.contacts.len(),
                eq.contacts.len(),
                prev.equilibrium.a,
                a,
            ),
            _ => false,
        };
        let saturated = limits_saturated(&eq);
        steps.push(TraceStep {
            step: k,
            object_present: present,
            equilibrium: eq,
        });
        if non_converged {
            termination = Termination::NonConverged;
            break;
        }
        if ejected {
            termination = Termination::Ejected;
            break;
        }
        if saturated {
            termination = Termination::LimitSaturated;
            break;
        }
    }
    Ok(EquilibriumTrace { steps, termination })
}

/// Normal force on the distal phalanx at the equilibrium reached from `q`.
pub fn fingertip_force(
    a: f64,
    q: &JointState,
    params: &FingerParams,
    object: &RigidObject,
    settings: &SolverSettings,
) -> Result<f64> {
    let eq = equilibrium_solve(a, q, params, Some(object), settings)?;
    if eq.status != SolveStatus::Converged {
        return Err(Error::Precondition("equilibrium did not converge".into()));
    }
    let distal: Vec<_> = eq.contacts.iter().filter(|c| c.phalanx == 3).collect();
    match distal.as_slice() {
        [c] => Ok(c.force),
        _ => Err(Error::Precondition("no distal contact".into())),
    }
}
