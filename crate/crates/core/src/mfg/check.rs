use crate::config::SolverConfig;
use crate::error::Result;
use crate::grid::{Field, Trajectory};
use crate::model::ModelSpec;

use super::adjoint::adjoint_solve;
use super::forward::forward_solve;
use super::gradient::{control_inner_product, gradient_field};
use super::objective::evaluate_objective;

/// One line of a finite-difference gradient check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheckRow {
    pub epsilon: f64,
    pub finite_difference: f64,
    pub adjoint: f64,
    pub relative_error: f64,
}

/// `I(forward(v), v)`.
pub fn reduced_objective(
    v: &Trajectory,
    rho0: &Field,
    spec: &ModelSpec,
    cfg: &SolverConfig,
) -> Result<f64> {
    let rho = forward_solve(v, rho0, spec, cfg)?;
    Ok(evaluate_objective(&rho, v, spec))
}

/// Compares central differences of the reduced objective along `direction`
/// with the adjoint directional derivative `<gradient_field, direction>`.
pub fn check_gradient(
    rho0: &Field,
    spec: &ModelSpec,
    cfg: &SolverConfig,
    v: &Trajectory,
    direction: &Trajectory,
    epsilons: &[f64],
) -> Result<Vec<GradientCheckRow>> {
    let rho = forward_solve(v, rho0, spec, cfg)?;
    let phi = adjoint_solve(&rho, v, spec)?;
    let grad = gradient_field(&rho, &phi, v, spec);
    let adjoint = control_inner_product(&grad, direction);
    epsilons
        .iter()
        .map(|&eps| {
            let plus = reduced_objective(&v.axpy(eps, direction), rho0, spec, cfg)?;
            let minus = reduced_objective(&v.axpy(-eps, direction), rho0, spec, cfg)?;
            let fd = (plus - minus) / (2.0 * eps);
            let diff = (fd - adjoint).abs();
            let relative_error = if diff == 0.0 {
                0.0
            } else {
                diff / adjoint.abs().max(f64::MIN_POSITIVE)
            };
            Ok(GradientCheckRow {
                epsilon: eps,
                finite_difference: fd,
                adjoint,
                relative_error,
            })
        })
        .collect()
}
