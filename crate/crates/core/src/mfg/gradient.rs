use crate::grid::{Grid, Trajectory};
use crate::hughes::centered_gradient;
use crate::model::ModelSpec;

use super::forward::face_velocities;
use crate::flux::FluxOperator;

/// Discrete `G(rho) phi_x` term of the reduced gradient at one time level.
///
/// Each interior face contributes its Engquist-Osher velocity sensitivity times
/// the face difference of `phi`, split equally between the two cells that
/// share the face.
pub fn transport_term(
    grid: &Grid,
    spec: &ModelSpec,
    rho: &[f64],
    v: &[f64],
    phi: &[f64],
) -> Vec<f64> {
    let n = grid.n_cells();
    let h = grid.h();
    let div = FluxOperator::new(grid, spec).divergence(rho, &face_velocities(v));
    let mut out = vec![0.0; n];
    for f in 0..n - 1 {
        let c = 0.5 * div.face_mobility[f] * (phi[f + 1] - phi[f]) / h;
        out[f] += c;
        out[f + 1] += c;
    }
    out
}

/// Reduced gradient `F(rho) v - G(rho) phi_x` frame by frame.
///
/// Frame `k >= 1` pairs the state and control at `t_k` with the adjoint at
/// `t_{k-1}`; frame 0 is identically zero because `v^0` does not enter the
/// discrete problem.
pub fn gradient_field(
    rho: &Trajectory,
    phi: &Trajectory,
    v: &Trajectory,
    spec: &ModelSpec,
) -> Trajectory {
    let grid = *rho.grid();
    let n = grid.n_cells();
    let mut frames = Vec::with_capacity(rho.len());
    frames.push(vec![0.0; n]);
    for k in 1..rho.len() {
        let r = rho.frame(k);
        let u = v.frame(k);
        let t = transport_term(&grid, spec, r, u, phi.frame(k - 1));
        frames.push((0..n).map(|i| spec.mobility(r[i]) * u[i] - t[i]).collect());
    }
    Trajectory::new(grid, rho.dt(), frames).expect("aligned frames")
}

/// Velocity at which the pointwise gradient vanishes for a given adjoint frame,
/// `v_i = T_i / F(rho_i)` with `T` from [`transport_term`] evaluated at `guess`
/// (only the sign of the face velocities of `guess` matters). Where `F`
/// vanishes the centered gradient of `phi` is used.
pub fn stationary_velocity(
    grid: &Grid,
    spec: &ModelSpec,
    rho: &[f64],
    phi: &[f64],
    guess: &[f64],
) -> Vec<f64> {
    let t = transport_term(grid, spec, rho, guess, phi);
    let g = centered_gradient(grid, phi);
    (0..grid.n_cells())
        .map(|i| {
            let f = spec.mobility(rho[i]);
            if f > 0.0 {
                t[i] / f
            } else {
                g[i]
            }
        })
        .collect()
}

/// Space-time inner product `dt h sum_{k>=1} sum_i a b` over the control frames.
pub fn control_inner_product(a: &Trajectory, b: &Trajectory) -> f64 {
    let w = a.dt() * a.grid().h();
    (1..a.len())
        .map(|k| {
            a.frame(k)
                .iter()
                .zip(b.frame(k))
                .map(|(x, y)| x * y)
                .sum::<f64>()
        })
        .sum::<f64>()
        * w
}

pub fn control_norm(a: &Trajectory) -> f64 {
    control_inner_product(a, a).sqrt()
}
