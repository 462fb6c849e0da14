//! Mean-field optimal control of a crowd: forward density solve, backward
//! adjoint solve, objective, reduced gradient and the steepest-descent loop.
//!
//! Time discretization: the control frame `v^k` (k >= 1) drives the implicit
//! step from `t_{k-1}` to `t_k`. The objective is the right-endpoint sum
//! `dt h sum_{k>=1} sum_i (F(rho^k) |v^k|^2 + E(rho^k)) / 2`, and the adjoint is
//! the exact transpose of the linearized forward step, so that
//! `<gradient_field, dv>` is the derivative of the discrete reduced objective.
//! Frame 0 of the control never enters the dynamics.

mod adjoint;
mod check;
mod descent;
mod forward;
mod gradient;
mod objective;

pub use adjoint::adjoint_solve;
pub use check::{check_gradient, reduced_objective, GradientCheckRow};
pub use descent::{initial_velocity, run_descent, run_descent_from, DescentReport};
pub use forward::{face_velocities, forward_solve, forward_solve_with_stats, ForwardStats};
pub use gradient::{
    control_inner_product, control_norm, gradient_field, stationary_velocity, transport_term,
};
pub use objective::{evaluate_objective, evaluate_objective_form, ObjectiveForm};

use crate::grid::Trajectory;
use crate::model::ModelSpec;

/// Convective flux frames `G(rho) v`.
pub fn momentum(rho: &Trajectory, v: &Trajectory, spec: &ModelSpec) -> Trajectory {
    let frames = rho
        .frames()
        .iter()
        .zip(v.frames())
        .map(|(r, u)| {
            r.iter()
                .zip(u)
                .map(|(&r, &u)| spec.mobility(r) * u)
                .collect()
        })
        .collect();
    Trajectory::new(*rho.grid(), rho.dt(), frames).expect("aligned frames")
}
