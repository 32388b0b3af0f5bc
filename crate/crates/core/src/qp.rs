//! Small dense strictly convex quadratic programs.
//!
//! ```text
//!     minimize    ½ xᵀ H x + gᵀ x
//!     subject to  aᵢᵀ x ≥ bᵢ     i = 1..m
//! ```
//!
//! Dual active-set method in the style of Goldfarb and Idnani: start from the
//! unconstrained minimum and add the most violated constraint, dropping
//! active constraints whose multiplier would turn negative. No feasible
//! starting point is required. Projections are recomputed from scratch at
//! every step, which is fine for the handful of variables used here.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// One multiplier per constraint row; zero for inactive rows.
    pub multipliers: DVector<f64>,
    pub active: Vec<usize>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpError {
    /// `H` is not positive definite.
    NotPositiveDefinite,
    /// No point satisfies every constraint.
    Infeasible,
    /// Iteration cap hit (degenerate cycling).
    IterationLimit,
}

impl std::fmt::Display for QpError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            QpError::NotPositiveDefinite => write!(f, "Hessian is not positive definite"),
            QpError::Infeasible => write!(f, "constraints are infeasible"),
            QpError::IterationLimit => write!(f, "active-set iteration limit reached"),
        }
    }
}

impl std::error::Error for QpError {}

/// Solve the QP. Rows of `a` are constraint normals.
pub fn solve_qp(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
) -> Result<QpSolution, QpError> {
    let n = h.nrows();
    let m = a.nrows();
    debug_assert_eq!(a.ncols(), n);
    debug_assert_eq!(b.len(), m);

    let chol: Cholesky<f64, Dyn> = h.clone().cholesky().ok_or(QpError::NotPositiveDefinite)?;
    let mut x = -chol.solve(g);
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let max_iter = 50 * (m + n + 1);
    let mut iterations = 0;

    let slack = |x: &DVector<f64>, i: usize| a.row(i).transpose().dot(x) - b[i];
    let tol = |x: &DVector<f64>, i: usize| {
        1e-12 * (1.0 + b[i].abs() + a.row(i).transpose().abs().dot(&x.abs()))
    };

    loop {
        // Most violated inactive constraint.
        let candidate = (0..m)
            .filter(|i| !active.contains(i))
            .map(|i| (i, slack(&x, i)))
            .filter(|&(i, s)| s < -tol(&x, i))
            .min_by(|l, r| l.1.total_cmp(&r.1));
        let Some((p, _)) = candidate else {
            break;
        };
        let np = a.row(p).transpose();
        let mut u_plus = 0.0;

        loop {
            iterations += 1;
            if iterations > max_iter {
                return Err(QpError::IterationLimit);
            }
            let hinv_np = chol.solve(&np);
            let (z, r) = if active.is_empty() {
                (hinv_np.clone(), DVector::zeros(0))
            } else {
                let nmat = DMatrix::from_fn(n, active.len(), |row, col| a[(active[col], row)]);
                let hinv_n = chol.solve(&nmat);
                let m_mat = nmat.transpose() * &hinv_n;
                let rhs = nmat.transpose() * &hinv_np;
                let r = m_mat.lu().solve(&rhs).ok_or(QpError::Infeasible)?;
                (&hinv_np - &hinv_n * &r, r)
            };

            // Dual step bound: first active multiplier to reach zero.
            let mut t1 = f64::INFINITY;
            let mut drop_at = None;
            for (k, (&uk, &rk)) in u.iter().zip(r.iter()).enumerate() {
                if rk > 1e-14 {
                    let t = uk / rk;
                    if t < t1 {
                        t1 = t;
                        drop_at = Some(k);
                    }
                }
            }
            // Primal step to make constraint p tight.
            let zn = z.dot(&np);
            let t2 = if zn > 1e-14 * np.dot(&hinv_np).max(f64::MIN_POSITIVE) {
                -slack(&x, p) / zn
            } else {
                f64::INFINITY
            };

            if t1.is_infinite() && t2.is_infinite() {
                return Err(QpError::Infeasible);
            }
            if t2.is_infinite() {
                for (uk, rk) in u.iter_mut().zip(r.iter()) {
                    *uk -= t1 * rk;
                }
                u_plus += t1;
                let k = drop_at.expect("finite t1 has an index");
                active.remove(k);
                u.remove(k);
                continue;
            }
            let t = t1.min(t2);
            x += &z * t;
            for (uk, rk) in u.iter_mut().zip(r.iter()) {
                *uk -= t * rk;
            }
            u_plus += t;
            if t2 <= t1 {
                active.push(p);
                u.push(u_plus);
                break;
            }
            let k = drop_at.expect("t1 < t2 has an index");
            active.remove(k);
            u.remove(k);
        }
    }

    let mut multipliers = DVector::zeros(m);
    for (&i, &ui) in active.iter().zip(&u) {
        multipliers[i] = ui.max(0.0);
    }
    let objective = 0.5 * x.dot(&(h * &x)) + g.dot(&x);
    Ok(QpSolution {
        x,
        multipliers,
        active,
        objective,
        iterations,
    })
}
