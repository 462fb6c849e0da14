use crate::config::SolverConfig;
use crate::error::{Result, SolverError};
use crate::grid::{Field, Trajectory};
use crate::hughes::{centered_gradient, solve_eikonal, EikonalProblem};
use crate::model::ModelSpec;

use super::adjoint::adjoint_solve;
use super::forward::forward_solve;
use super::gradient::{control_inner_product, control_norm, gradient_field};
use super::objective::evaluate_objective;

const ARMIJO_SHRINK: f64 = 0.5;
const ARMIJO_DECREASE: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 50;
const MAX_STEP: f64 = 1e8;
/// Cells with `F(rho) <= VACUUM * max F` count as empty.
const VACUUM: f64 = 1e-6;
/// Empty-cell controls are reset when they differ from the extension by more.
const VACUUM_RESET_TOL: f64 = 1e-3;

/// Outcome of a steepest-descent run.
#[derive(Debug, Clone)]
pub struct DescentReport {
    /// Objective at each visited iterate.
    pub objective_history: Vec<f64>,
    /// `|F(rho) v - G(rho) phi_x|` in the space-time L2 norm at each iterate.
    pub gradient_norm_history: Vec<f64>,
    /// Accepted step sizes, one per update.
    pub step_history: Vec<f64>,
    pub rho: Trajectory,
    pub v: Trajectory,
    pub phi: Trajectory,
    pub converged: bool,
    /// The Armijo search could not find a decreasing step.
    pub stalled: bool,
    pub iterations: usize,
}

impl DescentReport {
    pub fn final_objective(&self) -> f64 {
        *self.objective_history.last().unwrap()
    }

    pub fn final_gradient_norm(&self) -> f64 {
        *self.gradient_norm_history.last().unwrap()
    }
}

/// Eikonal-based starting control: the Hughes potential of the initial crowd,
/// with the sign flipped to the mean-field convention (`phi <= 0`, drift
/// `+phi_x`), and `v = (G / F) phi_x` with the ratio taken as 1 where `F = 0`.
pub fn initial_velocity(rho0: &Field, spec: &ModelSpec, cfg: &SolverConfig) -> Result<Trajectory> {
    let grid = *rho0.grid();
    let phi_h = solve_eikonal(&EikonalProblem::hughes(
        grid,
        rho0.values(),
        spec,
        cfg.eikonal_floor,
    )?)?;
    let phi: Vec<f64> = phi_h.values().iter().map(|p| -p).collect();
    let grad = centered_gradient(&grid, &phi);
    // all presets share one mobility for F and G, so G / F = 1 wherever F > 0
    let v = Field::new(grid, grad)?;
    Trajectory::constant_in_time(&v, cfg.dt, cfg.steps())
}

pub fn run_descent(rho0: &Field, spec: &ModelSpec, cfg: &SolverConfig) -> Result<DescentReport> {
    let v0 = initial_velocity(rho0, spec, cfg)?;
    run_descent_from(rho0, v0, spec, cfg)
}

/// Diagonal metric `F(rho) + floor * max F` frame by frame.
fn preconditioner(rho: &Trajectory, spec: &ModelSpec, floor: f64) -> Trajectory {
    let peak = spec.mobility(spec.mobility_peak());
    let shift = floor * if peak > 0.0 { peak } else { 1.0 };
    rho.map(|r| spec.mobility(r) + shift)
}

fn scale_frames(a: &Trajectory, m: &Trajectory, f: impl Fn(f64, f64) -> f64) -> Trajectory {
    let frames = a
        .frames()
        .iter()
        .zip(m.frames())
        .map(|(x, w)| x.iter().zip(w).map(|(p, q)| f(*p, *q)).collect())
        .collect();
    Trajectory::new(*a.grid(), a.dt(), frames).expect("aligned frames")
}

/// The gradient is `O(F)` in empty cells, so descent never updates the control
/// there, yet that control still enters the adjoint through `F'(0) |v|^2 / 2`.
/// Returns the control with empty cells set to `phi_x` (the stationary value
/// with `G / F` extended by 1) when that differs noticeably from `v`.
fn vacuum_extension(
    rho: &Trajectory,
    phi: &Trajectory,
    v: &Trajectory,
    spec: &ModelSpec,
) -> Option<Trajectory> {
    let grid = *rho.grid();
    let empty = VACUUM * spec.mobility(spec.mobility_peak());
    let scale = 1.0
        + v.frames()
            .iter()
            .flatten()
            .fold(0.0_f64, |m, x| m.max(x.abs()));
    let mut out = v.clone();
    let mut worst = 0.0_f64;
    for k in 1..rho.len() {
        let g = centered_gradient(&grid, phi.frame(k - 1));
        let r = rho.frame(k);
        let frame = out.frame_mut(k);
        for i in 0..grid.n_cells() {
            if spec.mobility(r[i]) <= empty {
                worst = worst.max((frame[i] - g[i]).abs());
                frame[i] = g[i];
            }
        }
    }
    (worst > VACUUM_RESET_TOL * scale).then_some(out)
}

fn at_iteration(iteration: usize) -> impl Fn(SolverError) -> SolverError {
    move |e| SolverError::Descent {
        iteration,
        source: Box::new(e),
    }
}

/// Steepest descent on the reduced objective: forward solve, adjoint solve,
/// `v <- v - tau (F v - G phi_x)`, until the relative objective change drops
/// below `descent_tol` (and, when set, the gradient is below `gradient_tol`).
///
/// With `armijo` the step starts from a Barzilai-Borwein estimate and is halved
/// until the sufficient-decrease condition holds, so the objective history is
/// non-increasing. The optional diagonal preconditioner divides the gradient
/// by `F(rho) + floor * max F`. Controls in empty cells are reset to `phi_x`
/// whenever that does not raise the objective.
pub fn run_descent_from(
    rho0: &Field,
    v_init: Trajectory,
    spec: &ModelSpec,
    cfg: &SolverConfig,
) -> Result<DescentReport> {
    spec.validate()?;
    cfg.validate()?;
    let mut v = v_init;
    let mut rho = forward_solve(&v, rho0, spec, cfg).map_err(at_iteration(0))?;
    let mut objective = evaluate_objective(&rho, &v, spec);

    let mut objective_history = Vec::new();
    let mut gradient_norm_history = Vec::new();
    let mut step_history = Vec::new();
    let mut previous: Option<(Trajectory, Trajectory)> = None;
    let mut tau = cfg.tau;
    let mut converged = false;
    let mut stalled = false;

    let phi = loop {
        let iteration = objective_history.len() + 1;
        let mut phi = adjoint_solve(&rho, &v, spec).map_err(at_iteration(iteration))?;
        if let Some(ext) = vacuum_extension(&rho, &phi, &v, spec) {
            // kept only if the objective does not go up
            if let Ok(ext_rho) = forward_solve(&ext, rho0, spec, cfg) {
                let ext_obj = evaluate_objective(&ext_rho, &ext, spec);
                if ext_obj <= objective {
                    v = ext;
                    rho = ext_rho;
                    objective = ext_obj;
                    previous = None;
                    phi = adjoint_solve(&rho, &v, spec).map_err(at_iteration(iteration))?;
                }
            }
        }
        let grad = gradient_field(&rho, &phi, &v, spec);
        let grad_sq = control_inner_product(&grad, &grad);
        let grad_norm = grad_sq.sqrt();
        let v_norm = control_norm(&v);

        let rel_change = objective_history.last().map(|&prev: &f64| {
            let scale = prev.abs().max(f64::MIN_POSITIVE);
            (prev - objective).abs() / scale
        });
        objective_history.push(objective);
        gradient_norm_history.push(grad_norm);

        let grad_ok = cfg
            .gradient_tol
            .is_none_or(|tol| grad_norm <= tol * (1.0 + v_norm));
        if grad_norm == 0.0 || (rel_change.is_some_and(|r| r < cfg.descent_tol) && grad_ok) {
            converged = true;
            break phi;
        }
        if iteration >= cfg.descent_max_iter {
            break phi;
        }

        if !cfg.armijo {
            let next_v = v.axpy(-cfg.tau, &grad);
            rho = forward_solve(&next_v, rho0, spec, cfg).map_err(at_iteration(iteration))?;
            v = next_v;
            objective = evaluate_objective(&rho, &v, spec);
            step_history.push(cfg.tau);
            continue;
        }

        let (direction, metric) = match cfg.precondition_floor {
            Some(floor) => {
                let metric = preconditioner(&rho, spec, floor);
                (scale_frames(&grad, &metric, |g, m| g / m), Some(metric))
            }
            None => (grad.clone(), None),
        };
        let slope = control_inner_product(&grad, &direction);

        if let Some((pv, pg)) = &previous {
            let s = v.axpy(-1.0, pv);
            let y = grad.axpy(-1.0, pg);
            let sy = control_inner_product(&s, &y);
            // Barzilai-Borwein in the metric the direction was scaled by
            let ss = match &metric {
                Some(m) => control_inner_product(&s, &scale_frames(&s, m, |a, w| a * w)),
                None => control_inner_product(&s, &s),
            };
            tau = if sy > 0.0 { ss / sy } else { 2.0 * tau };
        }
        tau = tau.min(MAX_STEP);

        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial_v = v.axpy(-tau, &direction);
            // a failed forward solve counts as a rejected step
            if let Ok(trial_rho) = forward_solve(&trial_v, rho0, spec, cfg) {
                let trial_obj = evaluate_objective(&trial_rho, &trial_v, spec);
                if trial_obj <= objective - ARMIJO_DECREASE * tau * slope {
                    accepted = Some((trial_v, trial_rho, trial_obj));
                    break;
                }
            }
            tau *= ARMIJO_SHRINK;
        }
        match accepted {
            Some((trial_v, trial_rho, trial_obj)) => {
                previous = Some((std::mem::replace(&mut v, trial_v), grad));
                rho = trial_rho;
                objective = trial_obj;
                step_history.push(tau);
            }
            None => {
                stalled = true;
                break phi;
            }
        }
    };

    // frame 0 of the control is inert; mirror the first active frame for output
    if v.len() > 1 {
        let first = v.frame(1).to_vec();
        v.frame_mut(0).copy_from_slice(&first);
    }
    let iterations = objective_history.len();
    Ok(DescentReport {
        objective_history,
        gradient_norm_history,
        step_history,
        rho,
        v,
        phi,
        converged,
        stalled,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::model::Mobility;

    #[test]
    fn empty_room_converges_immediately() {
        let g = Grid::symmetric_room(20).unwrap();
        let rho0 = Field::constant(g, 0.0).unwrap();
        let r = run_descent(&rho0, &ModelSpec::default(), &SolverConfig::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        assert_eq!(r.final_objective(), 0.0);
    }

    #[test]
    fn initial_velocity_points_to_the_exits() {
        let g = Grid::symmetric_room(20).unwrap();
        let rho0 = Field::constant(g, 0.3).unwrap();
        let v = initial_velocity(&rho0, &ModelSpec::default(), &SolverConfig::default()).unwrap();
        for (x, u) in g.centers().iter().zip(v.frame(0)) {
            assert!(x * u > 0.0);
        }
    }

    #[test]
    fn descent_decreases_objective_and_stays_symmetric() {
        let g = Grid::symmetric_room(40).unwrap();
        let spec = ModelSpec {
            mobility: Mobility::LinearDensity,
            alpha: 3.0,
            ..ModelSpec::default()
        };
        let cfg = SolverConfig {
            dt: 0.1,
            t_final: 1.0,
            descent_max_iter: 30,
            newton_tol: 1e-10,
            ..Default::default()
        };
        let rho0 = Field::new(g, g.indicator_averages(-0.4, 0.4, 0.5)).unwrap();
        let r = run_descent(&rho0, &spec, &cfg).unwrap();
        assert!(r.objective_history.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.final_objective() < r.objective_history[0]);
        let n = g.n_cells();
        for k in 0..r.rho.len() {
            for i in 0..n {
                let j = n - 1 - i;
                assert!((r.rho.frame(k)[i] - r.rho.frame(k)[j]).abs() < 1e-9);
                assert!((r.phi.frame(k)[i] - r.phi.frame(k)[j]).abs() < 1e-9);
                assert!((r.v.frame(k)[i] + r.v.frame(k)[j]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn fixed_step_mode_takes_the_given_step() {
        let g = Grid::symmetric_room(20).unwrap();
        let cfg = SolverConfig {
            armijo: false,
            tau: 0.3,
            descent_max_iter: 4,
            t_final: 0.5,
            ..Default::default()
        };
        let rho0 = Field::constant(g, 0.3).unwrap();
        let r = run_descent(&rho0, &ModelSpec::default(), &cfg).unwrap();
        assert_eq!(r.iterations, 4);
        assert!(r.step_history.iter().all(|&t| t == 0.3));
        assert_eq!(r.objective_history.len(), r.gradient_norm_history.len());
    }
}
