use crate::config::SolverConfig;
use crate::error::{Result, SolverError};
use crate::flux::FluxOperator;
use crate::grid::{Field, Trajectory};
use crate::hughes::check_admissible;
use crate::model::ModelSpec;

/// Interior face velocities as averages of the adjacent cell values.
pub fn face_velocities(v: &[f64]) -> Vec<f64> {
    v.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

/// Newton iteration counts and final residuals, one entry per time step.
#[derive(Debug, Clone, Default)]
pub struct ForwardStats {
    pub newton_iterations: Vec<usize>,
    pub residuals: Vec<f64>,
}

pub fn forward_solve(
    v: &Trajectory,
    rho0: &Field,
    spec: &ModelSpec,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    forward_solve_with_stats(v, rho0, spec, cfg).map(|(rho, _)| rho)
}

/// Implicit Euler in time for `rho_t + (G(rho) v)_x = sigma^2/2 rho_xx`, each
/// step solved by damped Newton on the discrete residual.
pub fn forward_solve_with_stats(
    v: &Trajectory,
    rho0: &Field,
    spec: &ModelSpec,
    cfg: &SolverConfig,
) -> Result<(Trajectory, ForwardStats)> {
    let grid = *rho0.grid();
    if *v.grid() != grid {
        return Err(SolverError::InvalidInput(
            "velocity and initial density live on different grids".into(),
        ));
    }
    if v.steps() != cfg.steps() || (v.dt() - cfg.dt).abs() > 1e-9 * cfg.dt {
        return Err(SolverError::InvalidInput(format!(
            "velocity has {} steps of {} but the solver expects {} steps of {}",
            v.steps(),
            v.dt(),
            cfg.steps(),
            cfg.dt
        )));
    }
    check_admissible(rho0, spec)?;
    let op = FluxOperator::new(&grid, spec);
    let mut frames = Vec::with_capacity(v.len());
    frames.push(rho0.values().to_vec());
    let mut stats = ForwardStats::default();
    for k in 1..v.len() {
        let faces = face_velocities(v.frame(k));
        let (next, iters, res) = implicit_step(&op, &frames[k - 1], &faces, cfg, k)?;
        stats.newton_iterations.push(iters);
        stats.residuals.push(res);
        frames.push(next);
    }
    Ok((Trajectory::new(grid, cfg.dt, frames)?, stats))
}

fn residual(
    op: &FluxOperator,
    rho: &[f64],
    old: &[f64],
    faces: &[f64],
    dt: f64,
) -> (Vec<f64>, f64, crate::flux::Divergence) {
    let div = op.divergence(rho, faces);
    let r: Vec<f64> = rho
        .iter()
        .zip(old)
        .zip(&div.values)
        .map(|((n, o), d)| (n - o) / dt + d)
        .collect();
    let norm = (r.iter().map(|x| x * x).sum::<f64>() * op.grid.h()).sqrt();
    (r, norm, div)
}

/// One implicit Euler step. Plain Newton from the previous frame first; if
/// that fails, continuation in the velocity scale `s` from 0 (a linear heat
/// step) to 1, each stage starting from the previous stage's solution. The
/// result solves the same discrete equation either way.
fn implicit_step(
    op: &FluxOperator,
    old: &[f64],
    faces: &[f64],
    cfg: &SolverConfig,
    step: usize,
) -> Result<(Vec<f64>, usize, f64)> {
    const MIN_STAGE: f64 = 1.0 / 1024.0;
    let first = match newton(op, old, old.to_vec(), faces, cfg, step) {
        Ok(done) => return Ok(done),
        Err(e) => e,
    };
    let mut total = match &first {
        SolverError::NewtonDiverged { iterations, .. } => *iterations,
        _ => return Err(first),
    };
    let mut guess = old.to_vec();
    let mut s = 0.0_f64;
    let mut ds = 0.25_f64;
    while s < 1.0 {
        let target = (s + ds).min(1.0);
        let scaled: Vec<f64> = faces.iter().map(|f| f * target).collect();
        match newton(op, old, guess.clone(), &scaled, cfg, step) {
            Ok((x, it, res)) => {
                total += it;
                guess = x;
                s = target;
                ds *= 2.0;
                if s >= 1.0 {
                    return Ok((guess, total, res));
                }
            }
            Err(SolverError::NewtonDiverged { iterations, .. }) if ds > MIN_STAGE => {
                total += iterations;
                ds *= 0.5;
            }
            Err(_) => return Err(first),
        }
    }
    unreachable!("the continuation loop returns once s reaches 1")
}

/// Damped Newton from `rho` on the residual of one implicit step.
fn newton(
    op: &FluxOperator,
    old: &[f64],
    mut rho: Vec<f64>,
    faces: &[f64],
    cfg: &SolverConfig,
    step: usize,
) -> Result<(Vec<f64>, usize, f64)> {
    const MAX_HALVINGS: usize = 20;
    let dt = cfg.dt;
    // the monotone scheme keeps the exact step inside [0, upper]; projecting
    // the iterates keeps Newton away from the flat extension of the mobility
    let upper = if op.spec.mobility(op.spec.rho_max) == 0.0 {
        op.spec.rho_max
    } else {
        f64::INFINITY
    };
    let (mut r, mut norm, mut div) = residual(op, &rho, old, faces, dt);
    for it in 0..cfg.newton_max_iter {
        if norm <= cfg.newton_tol {
            return Ok((rho, it, norm));
        }
        let mut jac = div.jacobian;
        jac.add_to_diagonal(1.0 / dt);
        let delta = jac.solve(&r)?;
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = rho
                .iter()
                .zip(&delta)
                .map(|(x, d)| (x - lambda * d).clamp(0.0, upper))
                .collect();
            let (tr, tn, td) = residual(op, &trial, old, faces, dt);
            if tn < norm {
                accepted = Some((trial, tr, tn, td));
                break;
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((t, tr, tn, td)) => {
                rho = t;
                r = tr;
                norm = tn;
                div = td;
            }
            None => {
                return Err(SolverError::NewtonDiverged {
                    step,
                    iterations: it + 1,
                    residual: norm,
                    iterate: rho,
                })
            }
        }
    }
    if norm <= cfg.newton_tol {
        Ok((rho, cfg.newton_max_iter, norm))
    } else {
        Err(SolverError::NewtonDiverged {
            step,
            iterations: cfg.newton_max_iter,
            residual: norm,
            iterate: rho,
        })
    }
}
