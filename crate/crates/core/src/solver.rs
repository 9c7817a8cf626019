//! Fischer-Burmeister semismooth Newton method for mixed nonlinear
//! complementarity problems.
//!
//! A problem supplies its equation rows followed by complementarity pairs
//! `0 ≤ x ⊥ y ≥ 0`, each given as two consecutive rows `(x, y)`. Pairs are
//! folded into `fb(x, y) = √(x² + y²) - x - y`, which is zero exactly at
//! complementary points, and the resulting square system is solved by damped
//! Newton steps with Armijo backtracking on `½‖Φ‖²`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Residual values and Jacobian of an MNCP. The first `num_equations` rows
/// are equations; the rest come in `(x, y)` pairs.
#[derive(Debug, Clone)]
pub struct MncpEval {
    pub values: DVector<f64>,
    pub jacobian: DMatrix<f64>,
    pub num_equations: usize,
}

impl MncpEval {
    pub fn num_pairs(&self) -> usize {
        (self.values.len() - self.num_equations) / 2
    }

    /// `(x, y)` of pair `k`.
    pub fn pair(&self, k: usize) -> (f64, f64) {
        let r = self.num_equations + 2 * k;
        (self.values[r], self.values[r + 1])
    }
}

/// A square mixed complementarity problem.
pub trait Mncp {
    fn dim(&self) -> usize;
    fn evaluate(&self, z: &DVector<f64>) -> crate::Result<MncpEval>;
}

/// Fischer-Burmeister function.
pub fn fb(a: f64, b: f64) -> f64 {
    a.hypot(b) - a - b
}

/// Element of the generalized gradient of [`fb`]. At the kink `(0, 0)` the
/// fixed choice `(1/√2 - 1)(1, 1)` is returned.
pub fn fb_gradient(a: f64, b: f64) -> (f64, f64) {
    let r = a.hypot(b);
    if r == 0.0 {
        (FRAC_1_SQRT_2 - 1.0, FRAC_1_SQRT_2 - 1.0)
    } else {
        (a / r - 1.0, b / r - 1.0)
    }
}

/// Square nonsmooth system `Φ(z)` and an element of its generalized Jacobian.
pub fn reformulate(eval: &MncpEval) -> (DVector<f64>, DMatrix<f64>) {
    let ne = eval.num_equations;
    let np = eval.num_pairs();
    let n = ne + np;
    let cols = eval.jacobian.ncols();
    let mut phi = DVector::zeros(n);
    let mut jac = DMatrix::zeros(n, cols);
    phi.rows_mut(0, ne).copy_from(&eval.values.rows(0, ne));
    jac.view_mut((0, 0), (ne, cols))
        .copy_from(&eval.jacobian.view((0, 0), (ne, cols)));
    for k in 0..np {
        let r = ne + 2 * k;
        let (a, b) = (eval.values[r], eval.values[r + 1]);
        phi[ne + k] = fb(a, b);
        let (da, db) = fb_gradient(a, b);
        let row = eval.jacobian.row(r) * da + eval.jacobian.row(r + 1) * db;
        jac.row_mut(ne + k).copy_from(&row);
    }
    (phi, jac)
}

/// Newton iteration controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Convergence threshold on `‖Φ‖∞`.
    pub residual_tol: f64,
    pub max_iters: usize,
    pub armijo_c: f64,
    pub backtrack_factor: f64,
    pub min_step: f64,
    /// Added to the diagonal of `JᵀJ` when the Newton system is singular.
    pub regularization: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            residual_tol: 1e-10,
            max_iters: 500,
            armijo_c: 1e-4,
            backtrack_factor: 0.5,
            min_step: 1e-12,
            regularization: 1e-10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let positive = [
            self.residual_tol,
            self.armijo_c,
            self.min_step,
            self.regularization,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) || self.max_iters == 0 {
            return Err(crate::Error::InvalidParameter("solver settings must be positive".into()));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(crate::Error::InvalidParameter(
                "backtrack_factor must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    /// `‖Φ‖∞` at the returned iterate.
    pub final_residual: f64,
    pub line_search_failures: usize,
    /// `½‖Φ‖²` after every accepted step, starting with the initial point.
    pub merit_history: Vec<f64>,
}

/// Newton iteration gave up; carries the best iterate seen.
#[derive(Debug, Clone, Error)]
pub struct StepFailure {
    pub best: DVector<f64>,
    pub report: SolveReport,
    pub reason: String,
}

impl fmt::Display for StepFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "MNCP solve failed after {} iterations (residual {:e}): {}",
            self.report.iterations, self.report.final_residual, self.reason
        )
    }
}

fn merit(phi: &DVector<f64>) -> f64 {
    0.5 * phi.norm_squared()
}

fn newton_direction(jac: &DMatrix<f64>, phi: &DVector<f64>) -> Option<DVector<f64>> {
    let d = jac.clone().lu().solve(&(-phi))?;
    if !d.iter().all(|v| v.is_finite()) {
        return None;
    }
    // Reject directions from numerically singular factorizations.
    let lin = jac * &d + phi;
    if lin.norm() > 1e-6 * phi.norm().max(1e-300) {
        return None;
    }
    Some(d)
}

fn lm_direction(jac: &DMatrix<f64>, phi: &DVector<f64>, lambda: f64) -> Option<DVector<f64>> {
    let jt = jac.transpose();
    let mut normal = &jt * jac;
    for i in 0..normal.nrows() {
        normal[(i, i)] += lambda;
    }
    let rhs = -(&jt * phi);
    let d = normal.clone().cholesky().map(|c| c.solve(&rhs)).or_else(|| normal.lu().solve(&rhs))?;
    d.iter().all(|v| v.is_finite()).then_some(d)
}

/// Solves `Φ(z) = 0` starting from `z0`.
pub fn solve<P: Mncp + ?Sized>(
    problem: &P,
    z0: &DVector<f64>,
    config: &SolverConfig,
) -> Result<(DVector<f64>, SolveReport), StepFailure> {
    let mut report = SolveReport::default();
    let fail = |z: DVector<f64>, report: SolveReport, reason: String| StepFailure {
        best: z,
        report,
        reason,
    };
    if !z0.iter().all(|v| v.is_finite()) || z0.len() != problem.dim() {
        return Err(fail(z0.clone(), report, "initial point is not finite or has wrong size".into()));
    }
    let eval_at = |z: &DVector<f64>| -> Option<(DVector<f64>, DMatrix<f64>)> {
        let e = problem.evaluate(z).ok()?;
        let (phi, jac) = reformulate(&e);
        phi.iter().all(|v| v.is_finite()).then_some((phi, jac))
    };

    let mut z = z0.clone();
    let Some((mut phi, mut jac)) = eval_at(&z) else {
        return Err(fail(z, report, "residual is not finite at the initial point".into()));
    };
    let mut theta = merit(&phi);
    report.merit_history.push(theta);

    for iter in 0..=config.max_iters {
        report.iterations = iter;
        report.final_residual = phi.amax();
        if report.final_residual <= config.residual_tol {
            report.converged = true;
            return Ok((z, report));
        }
        if iter == config.max_iters {
            break;
        }

        let grad = jac.transpose() * &phi;
        let mut accepted = None;
        // Damping proportional to the squared residual keeps steps short far
        // from a solution and vanishes near one, also when solutions are not
        // isolated.
        let mut lambda = config.regularization.max(2.0 * theta);
        let mut candidates = 0;
        // Newton first, then Levenberg-Marquardt with growing damping.
        while accepted.is_none() && candidates < 14 {
            let dir = if candidates == 0 {
                newton_direction(&jac, &phi)
            } else {
                let d = lm_direction(&jac, &phi, lambda);
                lambda *= 100.0;
                d
            };
            candidates += 1;
            let Some(d) = dir else { continue };
            let slope = grad.dot(&d);
            if !(slope < 0.0) {
                continue;
            }
            let mut t = 1.0;
            while t >= config.min_step {
                let trial = &z + &d * t;
                if let Some((p, j)) = eval_at(&trial) {
                    let th = merit(&p);
                    if th <= theta + config.armijo_c * t * slope {
                        log::trace!(
                            "iter {iter}: merit {theta:e} -> {th:e}, candidate {}, step {t:e}",
                            candidates - 1
                        );
                        accepted = Some((trial, p, j, th));
                        break;
                    }
                }
                t *= config.backtrack_factor;
            }
            if accepted.is_none() {
                report.line_search_failures += 1;
            }
        }
        let Some((zn, pn, jn, thn)) = accepted else {
            report.final_residual = phi.amax();
            return Err(fail(z, report, "line search failed for every search direction".into()));
        };
        z = zn;
        phi = pn;
        jac = jn;
        theta = thn;
        report.merit_history.push(theta);
    }
    report.final_residual = phi.amax();
    Err(fail(z, report, format!("no convergence within {} iterations", config.max_iters)))
}
