//! Classical Hughes model: density-dependent Eikonal equation solved by fast
//! sweeping, coupled to an explicit finite-volume conservation law.

use crate::config::SolverConfig;
use crate::error::{Result, SolverError};
use crate::flux::{mobility_lipschitz, FluxOperator};
use crate::grid::{BoundaryTag, Field, Grid, Trajectory};
use crate::model::ModelSpec;

/// Eikonal problem `|phi'| = cost` with `phi = 0` on the exit endpoints of the grid.
#[derive(Debug, Clone)]
pub struct EikonalProblem {
    pub grid: Grid,
    pub cost: Vec<f64>,
}

impl EikonalProblem {
    pub fn new(grid: Grid, cost: Vec<f64>) -> Result<Self> {
        if cost.len() != grid.n_cells() {
            return Err(SolverError::InvalidInput(format!(
                "cost has {} values but grid has {} cells",
                cost.len(),
                grid.n_cells()
            )));
        }
        if !grid.has_exit() {
            return Err(SolverError::InvalidInput(
                "eikonal problem needs at least one exit".into(),
            ));
        }
        if let Some((cell, &value)) = cost
            .iter()
            .enumerate()
            .find(|(_, c)| !(c.is_finite() && **c > 0.0))
        {
            return Err(SolverError::EikonalCost { cell, value });
        }
        Ok(Self { grid, cost })
    }

    /// Hughes cost `1 / f(rho)` with `f` floored at `floor`.
    pub fn hughes(grid: Grid, rho: &[f64], spec: &ModelSpec, floor: f64) -> Result<Self> {
        let cost = rho
            .iter()
            .map(|&r| 1.0 / spec.hughes_speed(r).max(floor))
            .collect();
        Self::new(grid, cost)
    }
}

/// Eikonal solution together with the number of sweeps that changed it.
#[derive(Debug, Clone)]
pub struct EikonalSolution {
    pub phi: Field,
    pub sweeps: usize,
}

/// Fast sweeping: alternating left-to-right and right-to-left Gauss-Seidel
/// passes of the upwind update `phi_i = min(phi_{i-1}, phi_{i+1}) + h c_i`
/// until a pass leaves the solution unchanged.
pub fn fast_sweep(p: &EikonalProblem) -> EikonalSolution {
    let n = p.grid.n_cells();
    let h = p.grid.h();
    let left_exit = p.grid.left() == BoundaryTag::Exit;
    let right_exit = p.grid.right() == BoundaryTag::Exit;
    let mut phi = vec![f64::INFINITY; n];

    let update = |phi: &mut [f64], i: usize| -> bool {
        let from_left = if i == 0 {
            if left_exit {
                0.5 * h * p.cost[0]
            } else {
                f64::INFINITY
            }
        } else {
            phi[i - 1] + h * p.cost[i]
        };
        let from_right = if i == n - 1 {
            if right_exit {
                0.5 * h * p.cost[n - 1]
            } else {
                f64::INFINITY
            }
        } else {
            phi[i + 1] + h * p.cost[i]
        };
        let candidate = from_left.min(from_right);
        if candidate < phi[i] {
            phi[i] = candidate;
            true
        } else {
            false
        }
    };

    let mut sweeps = 0;
    // one sweep in each direction always suffices in 1D; the cap is a guard
    for pass in 0..4 {
        let mut changed = false;
        if pass % 2 == 0 {
            for i in 0..n {
                changed |= update(&mut phi, i);
            }
        } else {
            for i in (0..n).rev() {
                changed |= update(&mut phi, i);
            }
        }
        if !changed {
            break;
        }
        sweeps += 1;
    }
    EikonalSolution {
        phi: Field::new(p.grid, phi).expect("eikonal solution is finite"),
        sweeps,
    }
}

pub fn solve_eikonal(p: &EikonalProblem) -> Result<Field> {
    Ok(fast_sweep(p).phi)
}

/// Interior face speeds `-(phi_{i+1} - phi_i) / h`.
pub fn face_speeds(grid: &Grid, phi: &[f64]) -> Vec<f64> {
    let h = grid.h();
    phi.windows(2).map(|w| -(w[1] - w[0]) / h).collect()
}

/// Largest explicit step for which the update stays monotone.
pub fn stable_time_step(rho: &[f64], phi: &[f64], grid: &Grid, spec: &ModelSpec) -> f64 {
    let n = grid.n_cells();
    let h = grid.h();
    let dh = spec.diffusion() / h;
    let speeds = face_speeds(grid, phi);
    let mut rate = vec![0.0; n];
    for f in 0..n - 1 {
        let c = (speeds[f].abs() * mobility_lipschitz(spec, rho[f], rho[f + 1]) + dh) / h;
        rate[f] += c;
        rate[f + 1] += c;
    }
    if grid.left() == BoundaryTag::Exit {
        rate[0] += spec.beta / h;
    }
    if grid.right() == BoundaryTag::Exit {
        rate[n - 1] += spec.beta / h;
    }
    let max_rate = rate.iter().copied().fold(0.0, f64::max);
    if max_rate == 0.0 {
        f64::INFINITY
    } else {
        1.0 / max_rate
    }
}

/// One explicit step of `rho_t - (rho f(rho)^2 phi_x)_x = sigma^2/2 rho_xx`.
pub fn hughes_step(rho: &Field, phi: &Field, spec: &ModelSpec, dt: f64) -> Result<Field> {
    hughes_step_indexed(rho, phi, spec, dt, 0)
}

fn hughes_step_indexed(
    rho: &Field,
    phi: &Field,
    spec: &ModelSpec,
    dt: f64,
    step: usize,
) -> Result<Field> {
    let grid = rho.grid();
    let limit = stable_time_step(rho.values(), phi.values(), grid, spec);
    if dt > limit {
        return Err(SolverError::Cfl { step, dt, limit });
    }
    let speeds = face_speeds(grid, phi.values());
    let div = FluxOperator::new(grid, spec).divergence(rho.values(), &speeds);
    let next = rho
        .values()
        .iter()
        .zip(&div.values)
        .map(|(r, d)| r - dt * d)
        .collect();
    Field::new(*grid, next)
}

/// Cell-centered Hughes flux `-H(rho) phi_x` with a centered gradient
/// (one-sided at the boundary cells).
pub fn hughes_flux(rho: &[f64], phi: &[f64], grid: &Grid, spec: &ModelSpec) -> Vec<f64> {
    let grad = centered_gradient(grid, phi);
    rho.iter()
        .zip(&grad)
        .map(|(&r, &g)| -spec.mobility(r) * g)
        .collect()
}

/// Centered difference at interior cells, one-sided at the two boundary cells.
pub fn centered_gradient(grid: &Grid, phi: &[f64]) -> Vec<f64> {
    let n = phi.len();
    let h = grid.h();
    (0..n)
        .map(|i| {
            if i == 0 {
                (phi[1] - phi[0]) / h
            } else if i == n - 1 {
                (phi[n - 1] - phi[n - 2]) / h
            } else {
                (phi[i + 1] - phi[i - 1]) / (2.0 * h)
            }
        })
        .collect()
}

/// Density and potential frames of a Hughes run.
#[derive(Debug, Clone)]
pub struct HughesSolution {
    pub rho: Trajectory,
    pub phi: Trajectory,
}

impl HughesSolution {
    /// Flux frames `-H(rho) phi_x`.
    pub fn flux(&self, spec: &ModelSpec) -> Trajectory {
        let grid = *self.rho.grid();
        let frames = self
            .rho
            .frames()
            .iter()
            .zip(self.phi.frames())
            .map(|(r, p)| hughes_flux(r, p, &grid, spec))
            .collect();
        Trajectory::new(grid, self.rho.dt(), frames).expect("aligned frames")
    }
}

/// Alternates the Eikonal solve and the explicit step up to `cfg.t_final`,
/// storing every `cfg.record_every`-th step.
pub fn run_hughes(rho0: &Field, spec: &ModelSpec, cfg: &SolverConfig) -> Result<HughesSolution> {
    spec.validate()?;
    cfg.validate()?;
    check_admissible(rho0, spec)?;
    let grid = *rho0.grid();
    let steps = cfg.steps();
    let mut rho_frames = Vec::new();
    let mut phi_frames = Vec::new();
    let mut rho = rho0.clone();
    for k in 0..=steps {
        let phi = solve_eikonal(&EikonalProblem::hughes(
            grid,
            rho.values(),
            spec,
            cfg.eikonal_floor,
        )?)?;
        if k % cfg.record_every == 0 {
            rho_frames.push(rho.values().to_vec());
            phi_frames.push(phi.values().to_vec());
        }
        if k == steps {
            break;
        }
        rho = hughes_step_indexed(&rho, &phi, spec, cfg.dt, k)?;
    }
    let frame_dt = cfg.dt * cfg.record_every as f64;
    Ok(HughesSolution {
        rho: Trajectory::new(grid, frame_dt, rho_frames)?,
        phi: Trajectory::new(grid, frame_dt, phi_frames)?,
    })
}

pub(crate) fn check_admissible(rho0: &Field, spec: &ModelSpec) -> Result<()> {
    let tol = 1e-12 * spec.rho_max;
    if rho0.min() < -tol || rho0.max() > spec.rho_max + tol {
        return Err(SolverError::InvalidInput(format!(
            "initial density must lie in [0, {}], found range [{}, {}]",
            spec.rho_max,
            rho0.min(),
            rho0.max()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::cmp::Ordering;
    use std::collections::BinaryHeap;

    /// Dijkstra on the cell graph: neighbouring centers joined by edges of
    /// length `h * (c_i + c_j) / 2`, exit endpoints joined to their boundary
    /// cell by `h / 2 * c`.
    fn dijkstra(grid: &Grid, cost: &[f64]) -> Vec<f64> {
        #[derive(PartialEq)]
        struct Node(f64, usize);
        impl Eq for Node {}
        impl Ord for Node {
            fn cmp(&self, o: &Self) -> Ordering {
                o.0.partial_cmp(&self.0).unwrap()
            }
        }
        impl PartialOrd for Node {
            fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
                Some(self.cmp(o))
            }
        }
        let n = cost.len();
        let h = grid.h();
        let mut dist = vec![f64::INFINITY; n];
        let mut heap = BinaryHeap::new();
        if grid.left() == BoundaryTag::Exit {
            dist[0] = 0.5 * h * cost[0];
            heap.push(Node(dist[0], 0));
        }
        if grid.right() == BoundaryTag::Exit {
            let d = 0.5 * h * cost[n - 1];
            if d < dist[n - 1] {
                dist[n - 1] = d;
                heap.push(Node(d, n - 1));
            }
        }
        while let Some(Node(d, i)) = heap.pop() {
            if d > dist[i] {
                continue;
            }
            for j in [i.wrapping_sub(1), i + 1] {
                if j < n {
                    let nd = d + 0.5 * h * (cost[i] + cost[j]);
                    if nd < dist[j] {
                        dist[j] = nd;
                        heap.push(Node(nd, j));
                    }
                }
            }
        }
        dist
    }

    fn room(n: usize) -> Grid {
        Grid::symmetric_room(n).unwrap()
    }

    #[test]
    fn unit_cost_gives_distance_to_exits() {
        let g = room(40);
        let sol = fast_sweep(&EikonalProblem::new(g, vec![1.0; 40]).unwrap());
        for (x, p) in g.centers().iter().zip(sol.phi.values()) {
            assert!((p - (1.0 - x.abs())).abs() < 1e-14);
        }
        assert!(sol.sweeps <= 2);
    }

    #[test]
    fn constant_crowd_scales_distance() {
        let g = room(50);
        let spec = ModelSpec::default();
        let rho = vec![1.0 / 3.0; 50];
        let p = EikonalProblem::hughes(g, &rho, &spec, 1e-6).unwrap();
        assert!(p.cost.iter().all(|c| (c - 1.5).abs() < 1e-14));
        let phi = solve_eikonal(&p).unwrap();
        let oracle = dijkstra(&g, &p.cost);
        for ((x, p), d) in g.centers().iter().zip(phi.values()).zip(&oracle) {
            assert!((p - 1.5 * (1.0 - x.abs())).abs() < 1e-13);
            assert!((p - d).abs() < 1e-13);
        }
    }

    #[test]
    fn one_sided_exit() {
        let g = Grid::new(-1.0, 1.0, 20, BoundaryTag::Wall, BoundaryTag::Exit).unwrap();
        let phi = solve_eikonal(&EikonalProblem::new(g, vec![1.0; 20]).unwrap()).unwrap();
        for (x, p) in g.centers().iter().zip(phi.values()) {
            assert!((p - (1.0 - x)).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_costs_and_closed_rooms() {
        let g = room(4);
        assert!(matches!(
            EikonalProblem::new(g, vec![1.0, 0.0, 1.0, 1.0]),
            Err(SolverError::EikonalCost { cell: 1, .. })
        ));
        let closed = Grid::new(0.0, 1.0, 4, BoundaryTag::Wall, BoundaryTag::Wall).unwrap();
        assert!(EikonalProblem::new(closed, vec![1.0; 4]).is_err());
    }

    #[test]
    fn smooth_cost_matches_dijkstra_to_first_order() {
        for n in [50, 100, 200] {
            let g = room(n);
            let cost: Vec<f64> = g
                .centers()
                .iter()
                .map(|x| 1.0 + 0.5 * (3.0 * x).sin().powi(2))
                .collect();
            let phi = solve_eikonal(&EikonalProblem::new(g, cost.clone()).unwrap()).unwrap();
            let d = dijkstra(&g, &cost);
            let err = phi
                .values()
                .iter()
                .zip(&d)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 2.0 * g.h(), "n = {n}: err = {err}");
        }
    }

    #[test]
    fn zero_density_is_a_fixed_point() {
        let g = room(20);
        let spec = ModelSpec::default();
        let rho = Field::constant(g, 0.0).unwrap();
        let phi =
            solve_eikonal(&EikonalProblem::hughes(g, rho.values(), &spec, 1e-6).unwrap()).unwrap();
        let next = hughes_step(&rho, &phi, &spec, 1e-4).unwrap();
        assert!(next.values().iter().all(|&r| r == 0.0));
    }

    #[test]
    fn cfl_violation_is_reported() {
        let g = room(40);
        let spec = ModelSpec::default();
        let rho = Field::constant(g, 0.3).unwrap();
        let phi =
            solve_eikonal(&EikonalProblem::hughes(g, rho.values(), &spec, 1e-6).unwrap()).unwrap();
        assert!(matches!(
            hughes_step(&rho, &phi, &spec, 0.5),
            Err(SolverError::Cfl { .. })
        ));
    }

    #[test]
    fn zero_initial_density_gives_zero_run() {
        let g = room(20);
        let cfg = SolverConfig {
            dt: 1e-3,
            t_final: 0.1,
            ..Default::default()
        };
        let sol = run_hughes(
            &Field::constant(g, 0.0).unwrap(),
            &ModelSpec::default(),
            &cfg,
        )
        .unwrap();
        assert_eq!(sol.rho.len(), 101);
        assert!(sol.rho.max_abs() == 0.0);
    }

    #[test]
    fn vacuum_forms_at_the_center() {
        let g = room(40);
        let spec = ModelSpec::default();
        let cfg = SolverConfig {
            dt: 1e-4,
            t_final: 0.7,
            record_every: 100,
            ..Default::default()
        };
        let sol = run_hughes(&Field::constant(g, 1.0 / 3.0).unwrap(), &spec, &cfg).unwrap();
        let last = sol.rho.frame(sol.rho.steps());
        let center = last[19];
        assert!(center < last[10] && center < last[30]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn step_balances_mass(
            rho in proptest::collection::vec(0.0f64..1.0, 30),
            beta in 0.0f64..3.0,
            left_exit in any::<bool>(),
        ) {
            let left = if left_exit { BoundaryTag::Exit } else { BoundaryTag::Wall };
            let g = Grid::new(-1.0, 1.0, 30, left, BoundaryTag::Exit).unwrap();
            let spec = ModelSpec { beta, ..ModelSpec::default() };
            let rho = Field::new(g, rho).unwrap();
            let phi = solve_eikonal(&EikonalProblem::hughes(g, rho.values(), &spec, 1e-6).unwrap()).unwrap();
            let dt = 0.5 * stable_time_step(rho.values(), phi.values(), &g, &spec);
            let next = hughes_step(&rho, &phi, &spec, dt).unwrap();
            let out = FluxOperator::new(&g, &spec).exit_outflow(rho.values());
            let balance = next.integral() - rho.integral() + dt * out;
            prop_assert!(balance.abs() <= 1e-12 * rho.integral().max(1e-3));
            prop_assert!(next.min() >= -1e-12 && next.max() <= 1.0 + 1e-12);
        }
    }
}
