use crate::error::{Result, SolverError};
use crate::flux::FluxOperator;
use crate::grid::Trajectory;
use crate::model::ModelSpec;

use super::forward::face_velocities;

/// Backward implicit solve of
/// `-phi_t - sigma^2/2 phi_xx - G'(rho) v phi_x = -F'(rho) |v|^2 / 2 - E'(rho) / 2`
/// with `sigma^2/2 phi_x n + beta phi = 0` on exits, zero Neumann on walls and
/// `phi(., T) = 0`.
///
/// Each step applies the transpose of the forward Newton matrix at the
/// converged state, which makes the adjoint exact for the discrete problem.
pub fn adjoint_solve(rho: &Trajectory, v: &Trajectory, spec: &ModelSpec) -> Result<Trajectory> {
    if !rho.is_aligned_with(v) {
        return Err(SolverError::InvalidInput(
            "density and velocity trajectories are not aligned".into(),
        ));
    }
    let grid = *rho.grid();
    let n = grid.n_cells();
    let dt = rho.dt();
    let steps = rho.steps();
    let op = FluxOperator::new(&grid, spec);
    let mut frames = vec![vec![0.0; n]; steps + 1];
    for k in (1..=steps).rev() {
        let (r, u) = (rho.frame(k), v.frame(k));
        let div = op.divergence(r, &face_velocities(u));
        let mut jac = div.jacobian;
        jac.add_to_diagonal(1.0 / dt);
        let rhs: Vec<f64> = (0..n)
            .map(|i| {
                let source = 0.5 * spec.mobility_derivative(r[i]) * u[i] * u[i]
                    + 0.5 * spec.eval_energy(r[i]).1;
                frames[k][i] / dt - source
            })
            .collect();
        frames[k - 1] = jac.transpose().solve(&rhs)?;
    }
    Trajectory::new(grid, dt, frames)
}
