//! Monte Carlo cost of absorbed particles against the continuum objective.

use crowd_mfg::cli::InitialDatum;
use crowd_mfg::mfg::{evaluate_objective, run_descent};
use crowd_mfg::oracle::{
    empirical_cost, empirical_cost_std_error, simulate_particles, BoundaryMode,
};
use crowd_mfg::{Energy, Grid, Mobility, ModelSpec, SolverConfig};

#[test]
fn absorbed_particle_cost_matches_continuum_objective() {
    let grid = Grid::symmetric_room(200).unwrap();
    let spec = ModelSpec {
        mobility: Mobility::LinearDensity,
        energy: Energy::Linear,
        alpha: 1.0,
        sigma: 0.1,
        beta: 1e3,
        ..ModelSpec::default()
    };
    let cfg = SolverConfig {
        dt: 0.01,
        t_final: 1.0,
        gradient_tol: Some(1e-6),
        descent_max_iter: 1000,
        ..SolverConfig::default()
    };
    let rho0 = InitialDatum::default_bump().on_grid(&grid).unwrap();
    let run = run_descent(&rho0, &spec, &cfg).unwrap();
    let objective = evaluate_objective(&run.rho, &run.v, &spec);

    let (_, ensemble) = simulate_particles(
        &run.v,
        &rho0,
        &spec,
        100_000,
        1e-3,
        7,
        BoundaryMode::AbsorbAtExits,
    )
    .unwrap();
    let cost = empirical_cost(&ensemble, spec.alpha) * ensemble.mass;
    let err = empirical_cost_std_error(&ensemble, spec.alpha) * ensemble.mass;
    println!("particle cost {cost:.6} +- {err:.1e}, continuum objective {objective:.6}");
    assert!(3.0 * err < 0.05 * objective);
    assert!((cost - objective).abs() < 0.05 * objective);
}
