//! Monte Carlo particle oracle.
//!
//! Particles follow `dX = v(X, t) dt + sigma dW` with Euler-Maruyama steps.
//! Walls reflect specularly; exits either reflect too (the `beta = 0`
//! analogue) or absorb (the `beta -> infinity` analogue). The empirical
//! density is a histogram on the continuum grid, so the two can be compared
//! cell by cell.

use rand::distributions::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SolverError};
use crate::grid::{BoundaryTag, Field, Grid, Trajectory};
use crate::model::ModelSpec;

/// Particles per independently seeded block. Fixed so results do not depend
/// on the number of worker threads.
const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    /// Every boundary point reflects, so no particle ever leaves.
    ReflectAll,
    /// Exit boundaries absorb, walls reflect.
    AbsorbAtExits,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    /// Final positions. Absorbed particles keep the exit coordinate.
    pub positions: Vec<f64>,
    pub alive: Vec<bool>,
    /// Exit time of each absorbed particle, `None` while inside.
    pub exit_times: Vec<Option<f64>>,
    /// Accumulated `1/2 int |v(X, t)|^2 dt` along each path, up to exit or horizon.
    pub kinetic: Vec<f64>,
    pub horizon: f64,
    pub seed: u64,
    pub sigma: f64,
    /// Total initial mass represented by the ensemble.
    pub mass: f64,
}

impl ParticleEnsemble {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn alive_count(&self) -> usize {
        self.alive.iter().filter(|a| **a).count()
    }
}

struct Chunk {
    positions: Vec<f64>,
    alive: Vec<bool>,
    exit_times: Vec<Option<f64>>,
    kinetic: Vec<f64>,
    counts: Vec<Vec<u64>>,
}

/// Velocity sampled from a trajectory: piecewise constant in time (frame `k`
/// acts on `(t_{k-1}, t_k]`, as in the implicit forward solve) and linear in
/// space between cell centers, constant beyond the outer centers.
fn sample_velocity(grid: &Grid, frame: &[f64], x: f64) -> f64 {
    let h = grid.h();
    let s = (x - grid.x_min()) / h - 0.5;
    let n = frame.len();
    if n == 1 || s <= 0.0 {
        return frame[0];
    }
    let i = s.floor() as usize;
    if i >= n - 1 {
        return frame[n - 1];
    }
    let w = s - i as f64;
    (1.0 - w) * frame[i] + w * frame[i + 1]
}

/// Outcome of moving a particle from `x` to `y` within one step.
enum Move {
    Inside(f64),
    /// Absorbed after the given fraction of the step at the given boundary point.
    Exited(f64, f64),
}

fn resolve_boundary(grid: &Grid, mode: BoundaryMode, x: f64, mut y: f64) -> Move {
    let (a, b) = (grid.x_min(), grid.x_max());
    let absorbs =
        |tag: BoundaryTag| mode == BoundaryMode::AbsorbAtExits && tag == BoundaryTag::Exit;
    // fold until inside; a step longer than the domain only matters for huge sigma
    loop {
        if y < a {
            if absorbs(grid.left()) {
                return Move::Exited(crossing_fraction(x, y, a), a);
            }
            y = 2.0 * a - y;
        } else if y > b {
            if absorbs(grid.right()) {
                return Move::Exited(crossing_fraction(x, y, b), b);
            }
            y = 2.0 * b - y;
        } else {
            return Move::Inside(y);
        }
    }
}

fn crossing_fraction(x: f64, y: f64, wall: f64) -> f64 {
    let d = y - x;
    if d == 0.0 {
        return 1.0;
    }
    ((wall - x) / d).clamp(0.0, 1.0)
}

/// Simulates `n` particles drawn from `rho0` under the velocity trajectory `v`
/// up to its final time, with Euler-Maruyama substeps no longer than `dt_sde`.
///
/// Returns the empirical density on the grid of `v`, normalized so that
/// `sum(rho_i) h` equals the initial mass times the alive fraction, together
/// with the ensemble. Output is bit-identical for a fixed seed regardless of
/// the thread count: particles are split into fixed blocks, each with its own
/// ChaCha stream, and histograms are reduced in integer arithmetic.
pub fn simulate_particles(
    v: &Trajectory,
    rho0: &Field,
    spec: &ModelSpec,
    n: usize,
    dt_sde: f64,
    seed: u64,
    mode: BoundaryMode,
) -> Result<(Trajectory, ParticleEnsemble)> {
    let grid = *v.grid();
    if *rho0.grid() != grid {
        return Err(SolverError::InvalidInput(
            "velocity and initial density live on different grids".into(),
        ));
    }
    if n == 0 {
        return Err(SolverError::InvalidInput(
            "particle count must be at least 1".into(),
        ));
    }
    if !(dt_sde > 0.0 && dt_sde.is_finite()) {
        return Err(SolverError::InvalidInput(format!(
            "particle time step must be positive, got {dt_sde}"
        )));
    }
    if rho0.min() < 0.0 {
        return Err(SolverError::InvalidInput(
            "initial density must be nonnegative".into(),
        ));
    }
    let mass = rho0.integral();
    if mass <= 0.0 {
        return Err(SolverError::InvalidInput(
            "initial density has no mass".into(),
        ));
    }
    let sigma = spec.sigma;
    let h = grid.h();

    // cumulative cell masses for inverse-transform sampling of the start points
    let mut cdf = Vec::with_capacity(grid.n_cells());
    let mut acc = 0.0;
    for r in rho0.values() {
        acc += r * h;
        cdf.push(acc);
    }

    let dt = v.dt();
    let substeps = if v.steps() == 0 {
        0
    } else {
        (dt / dt_sde).ceil().max(1.0) as usize
    };
    let ds = if substeps == 0 {
        0.0
    } else {
        dt / substeps as f64
    };
    let frames = v.len();

    let run_chunk = |c: usize| -> Chunk {
        let lo = c * CHUNK;
        let count = CHUNK.min(n - lo);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        let mut positions = Vec::with_capacity(count);
        for _ in 0..count {
            let u: f64 = rng.gen::<f64>() * acc;
            let i = cdf.partition_point(|&m| m <= u).min(grid.n_cells() - 1);
            let left = grid.x_min() + i as f64 * h;
            positions.push(left + rng.gen::<f64>() * h);
        }
        let mut alive = vec![true; count];
        let mut exit_times = vec![None; count];
        let mut kinetic = vec![0.0; count];
        let mut counts = vec![vec![0u64; grid.n_cells()]; frames];
        let tally = |row: &mut Vec<u64>, positions: &[f64], alive: &[bool]| {
            for (x, a) in positions.iter().zip(alive) {
                if *a {
                    row[grid.nearest_cell(*x)] += 1;
                }
            }
        };
        tally(&mut counts[0], &positions, &alive);
        let noise = sigma * ds.sqrt();
        for k in 1..frames {
            let vel = v.frame(k);
            for s in 0..substeps {
                let t0 = (k - 1) as f64 * dt + s as f64 * ds;
                for p in 0..count {
                    if !alive[p] {
                        continue;
                    }
                    let x = positions[p];
                    let w = sample_velocity(&grid, vel, x);
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let y = x + w * ds + noise * z;
                    match resolve_boundary(&grid, mode, x, y) {
                        Move::Inside(y) => {
                            positions[p] = y;
                            kinetic[p] += 0.5 * w * w * ds;
                        }
                        Move::Exited(theta, at) => {
                            positions[p] = at;
                            alive[p] = false;
                            exit_times[p] = Some(t0 + theta * ds);
                            kinetic[p] += 0.5 * w * w * theta * ds;
                        }
                    }
                }
            }
            tally(&mut counts[k], &positions, &alive);
        }
        Chunk {
            positions,
            alive,
            exit_times,
            kinetic,
            counts,
        }
    };

    let chunks: Vec<Chunk> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(run_chunk)
        .collect();

    let mut counts = vec![vec![0u64; grid.n_cells()]; frames];
    let mut ensemble = ParticleEnsemble {
        positions: Vec::with_capacity(n),
        alive: Vec::with_capacity(n),
        exit_times: Vec::with_capacity(n),
        kinetic: Vec::with_capacity(n),
        horizon: v.final_time(),
        seed,
        sigma,
        mass,
    };
    for c in chunks {
        for (total, part) in counts.iter_mut().zip(&c.counts) {
            for (t, p) in total.iter_mut().zip(part) {
                *t += p;
            }
        }
        ensemble.positions.extend(c.positions);
        ensemble.alive.extend(c.alive);
        ensemble.exit_times.extend(c.exit_times);
        ensemble.kinetic.extend(c.kinetic);
    }
    let scale = mass / (n as f64 * h);
    let density = counts
        .iter()
        .map(|row| row.iter().map(|&c| c as f64 * scale).collect())
        .collect();
    Ok((Trajectory::new(grid, dt, density)?, ensemble))
}

/// Per-particle average of `1/2 int_0^{T_exit} |v|^2 dt + (alpha / 2) T_exit`,
/// with `T_exit` truncated at the horizon for particles still inside.
///
/// Multiplying by `ensemble.mass` gives the continuum objective for a linear
/// mobility and `E = alpha rho`.
pub fn empirical_cost(ensemble: &ParticleEnsemble, alpha: f64) -> f64 {
    if ensemble.is_empty() {
        return 0.0;
    }
    let total: f64 = ensemble
        .kinetic
        .iter()
        .zip(&ensemble.exit_times)
        .map(|(k, t)| k + 0.5 * alpha * t.unwrap_or(ensemble.horizon))
        .sum();
    total / ensemble.len() as f64
}

/// Standard error of the per-particle cost, for sizing tolerances.
pub fn empirical_cost_std_error(ensemble: &ParticleEnsemble, alpha: f64) -> f64 {
    let n = ensemble.len();
    if n < 2 {
        return f64::INFINITY;
    }
    let mean = empirical_cost(ensemble, alpha);
    let var: f64 = ensemble
        .kinetic
        .iter()
        .zip(&ensemble.exit_times)
        .map(|(k, t)| {
            let c = k + 0.5 * alpha * t.unwrap_or(ensemble.horizon);
            (c - mean).powi(2)
        })
        .sum::<f64>()
        / (n - 1) as f64;
    (var / n as f64).sqrt()
}

/// Expected-size bound for the discrete L1 distance between a histogram of
/// `n` samples and the density it estimates: the sum over cells of the
/// binomial standard deviation, with cell probabilities `rho_i h / mass`.
pub fn binomial_l1_bound(density: &[f64], grid: &Grid, mass: f64, n: usize) -> f64 {
    let h = grid.h();
    let nf = n as f64;
    let sum: f64 = density
        .iter()
        .map(|r| {
            let p = (r * h / mass).clamp(0.0, 1.0);
            (nf * p * (1.0 - p)).sqrt()
        })
        .sum();
    mass / nf * sum
}

/// Discrete L1 distance `h sum |a_i - b_i|`.
pub fn l1_distance(a: &[f64], b: &[f64], grid: &Grid) -> f64 {
    grid.h() * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}
