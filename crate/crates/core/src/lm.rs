//! Damped least squares (Levenberg-Marquardt) with the classic
//! accept/reject damping schedule.
//!
//! Each iteration solves `[JᵀJ + μI] δ = −Jᵀr`. The iteration stops as soon
//! as `‖δ‖ < ε`. Otherwise the step is accepted only if it strictly lowers
//! the sum of squared residuals, in which case `μ ← μ / v`. A rejected step
//! leaves `β` untouched, sets `μ ← μ · v` and re-solves with the same `J`
//! and `r`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    /// Initial damping. `None` picks `1e-3 · mean(diag(JᵀJ))` at `β₀`.
    pub mu0: Option<f64>,
    /// Damping factor `v > 1`.
    pub damping_factor: f64,
    /// Step-norm convergence threshold.
    pub eps: f64,
    /// Maximum number of accepted iterations.
    pub max_iters: usize,
    /// Consecutive rejections tolerated within one iteration.
    pub max_rejections: usize,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            mu0: None,
            damping_factor: 10.0,
            eps: 1e-8,
            max_iters: 200,
            max_rejections: 50,
        }
    }
}

impl LmOptions {
    pub fn validate(&self) -> Result<()> {
        if let Some(mu) = self.mu0 {
            if !(mu > 0.0) {
                return Err(Error::NonPositiveParameter { name: "mu0", value: mu });
            }
        }
        if !(self.damping_factor > 1.0) {
            return Err(Error::NonPositiveParameter {
                name: "damping_factor (must exceed 1)",
                value: self.damping_factor,
            });
        }
        if !(self.eps > 0.0) {
            return Err(Error::NonPositiveParameter {
                name: "eps",
                value: self.eps,
            });
        }
        if self.max_iters == 0 {
            return Err(Error::NonPositiveParameter {
                name: "max_iters",
                value: 0.0,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// `‖δ‖ < ε`.
    StepBelowTolerance,
    MaxIterations,
    RejectionLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmResult {
    /// Last accepted parameter vector.
    pub beta: DVector<f64>,
    /// Number of accepted steps.
    pub iterations: usize,
    pub final_ssr: f64,
    pub converged: bool,
    pub termination: Termination,
    /// SSR at `β₀` followed by the SSR after every accepted step.
    pub trajectory: Vec<f64>,
    /// `β₀` followed by every accepted iterate.
    pub iterates: Vec<DVector<f64>>,
}

/// Solve the damped normal equations `[JᵀJ + μI] δ = −Jᵀr`.
///
/// `mu = 0` gives the Gauss-Newton step and fails with
/// [`Error::SingularSystem`] when `J` is rank deficient.
pub fn solve_damped_step(jac: &DMatrix<f64>, res: &DVector<f64>, mu: f64) -> Result<DVector<f64>> {
    if jac.nrows() != res.len() {
        return Err(Error::LengthMismatch {
            expected: jac.nrows(),
            found: res.len(),
        });
    }
    if !(mu >= 0.0) {
        return Err(Error::NonPositiveParameter { name: "mu", value: mu });
    }
    let p = jac.ncols();
    let jt = jac.transpose();
    let lhs = &jt * jac + DMatrix::<f64>::identity(p, p) * mu;
    let rhs = -(&jt * res);
    if let Some(chol) = lhs.clone().cholesky() {
        let step = chol.solve(&rhs);
        if step.iter().all(|v| v.is_finite()) {
            return Ok(step);
        }
    }
    lhs.lu()
        .solve(&rhs)
        .filter(|s| s.iter().all(|v| v.is_finite()))
        .ok_or(Error::SingularSystem)
}

fn ssr(r: &DVector<f64>) -> f64 {
    r.norm_squared()
}

/// Minimize `‖r(β)‖²` starting from `beta0`.
///
/// Non-convergence is reported through [`LmResult::converged`] with the best
/// iterate still returned; a non-finite residual is an error.
pub fn lm_minimize<R, J>(residual_fn: R, jacobian_fn: J, beta0: DVector<f64>, opts: &LmOptions) -> Result<LmResult>
where
    R: Fn(&DVector<f64>) -> DVector<f64>,
    J: Fn(&DVector<f64>) -> DMatrix<f64>,
{
    opts.validate()?;
    if beta0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteParameter { name: "beta0" });
    }
    let mut beta = beta0;
    let mut res = residual_fn(&beta);
    if res.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteResidual { iteration: 0 });
    }
    let mut cost = ssr(&res);
    let mut jac = jacobian_fn(&beta);
    let mut mu = match opts.mu0 {
        Some(mu) => mu,
        None => {
            let p = jac.ncols().max(1) as f64;
            let diag: f64 = jac.column_iter().map(|c| c.norm_squared()).sum::<f64>() / p;
            if diag > 0.0 {
                1e-3 * diag
            } else {
                1e-3
            }
        }
    };
    let mut trajectory = vec![cost];
    let mut iterates = vec![beta.clone()];

    let finish = |beta: DVector<f64>, iterations, cost, termination, trajectory, iterates| LmResult {
        beta,
        iterations,
        final_ssr: cost,
        converged: termination == Termination::StepBelowTolerance,
        termination,
        trajectory,
        iterates,
    };

    for iteration in 0..opts.max_iters {
        let mut rejections = 0;
        loop {
            let step = solve_damped_step(&jac, &res, mu)?;
            if step.norm() < opts.eps {
                return Ok(finish(
                    beta,
                    iteration,
                    cost,
                    Termination::StepBelowTolerance,
                    trajectory,
                    iterates,
                ));
            }
            let candidate = &beta + &step;
            let cand_res = residual_fn(&candidate);
            if cand_res.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteResidual { iteration });
            }
            let cand_cost = ssr(&cand_res);
            if cand_cost < cost {
                beta = candidate;
                res = cand_res;
                cost = cand_cost;
                mu = (mu / opts.damping_factor).max(f64::MIN_POSITIVE);
                jac = jacobian_fn(&beta);
                trajectory.push(cost);
                iterates.push(beta.clone());
                break;
            }
            mu *= opts.damping_factor;
            rejections += 1;
            if rejections >= opts.max_rejections || !mu.is_finite() {
                return Ok(finish(
                    beta,
                    iteration,
                    cost,
                    Termination::RejectionLimit,
                    trajectory,
                    iterates,
                ));
            }
        }
    }
    Ok(finish(
        beta,
        opts.max_iters,
        cost,
        Termination::MaxIterations,
        trajectory,
        iterates,
    ))
}
