use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::grid::{Grid, Trajectory};
use crate::hughes::{run_hughes, HughesSolution};
use crate::mfg::{
    check_gradient, evaluate_objective, forward_solve, momentum, run_descent, DescentReport,
    GradientCheckRow,
};
use crate::model::{Energy, ModelSpec};
use crate::oracle::{
    binomial_l1_bound, empirical_cost, empirical_cost_std_error, l1_distance, simulate_particles,
    BoundaryMode,
};

use super::config::{ExperimentConfig, ExperimentKind, OracleVelocity};
use super::output::{
    num, write_frame_csv, write_mass_csv, write_probe_csv, write_snapshot_csv, write_svg,
    write_text, FrameChannels, Manifest,
};
use super::CliError;

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub output_dir: PathBuf,
    /// Emitted files relative to `output_dir`, manifest last.
    pub files: Vec<PathBuf>,
    /// False when a descent stopped at its iteration cap; `failure.json` then
    /// describes it.
    pub converged: bool,
    pub wall_time_seconds: f64,
}

/// Collects the relative paths of emitted files.
#[derive(Debug, Default)]
struct Emitted {
    root: PathBuf,
    files: Vec<PathBuf>,
}

impl Emitted {
    fn new(root: &Path) -> Self {
        Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        }
    }

    fn path(&mut self, rel: impl AsRef<Path>) -> PathBuf {
        self.files.push(rel.as_ref().to_path_buf());
        self.root.join(rel)
    }

    fn merge(&mut self, prefix: &Path, other: Emitted) {
        self.files
            .extend(other.files.into_iter().map(|f| prefix.join(f)));
    }
}

/// Result of one member run: files written and, when descent hit its cap,
/// the matching failure.
struct Member {
    emitted: Emitted,
    unconverged: Option<CliError>,
}

/// Runs the configured experiment, writing everything below `cfg.output_dir`
/// together with `manifest.json`, and `failure.json` when something failed.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    config_file: Option<&Path>,
) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let root = cfg.output_dir.clone();
    let mut emitted = Emitted::new(&root);
    let result = dispatch(cfg, &mut emitted);

    let (status, failure) = match &result {
        Ok(None) => ("converged", None),
        Ok(Some(e)) => ("not_converged", Some(e.failure_record())),
        Err(e) => ("failed", Some(e.failure_record())),
    };
    if let Some(record) = &failure {
        let text = serde_json::to_string_pretty(record).expect("record serializes");
        let path = emitted.path("failure.json");
        write_text(&path, &(text + "\n"))?;
    } else {
        // a stale record from an earlier run in the same directory would mislead
        let _ = std::fs::remove_file(root.join("failure.json"));
    }
    let wall_time_seconds = start.elapsed().as_secs_f64();
    let path = emitted.path("manifest.json");
    Manifest {
        experiment: cfg.experiment.name().to_string(),
        config_file: config_file.map(Path::to_path_buf),
        seed: cfg.seed,
        parameters: parameters(cfg),
        status: status.to_string(),
        files: emitted.files.clone(),
        wall_time_seconds,
    }
    .write(&path)?;

    let unconverged = result?;
    Ok(RunReport {
        output_dir: root,
        files: emitted.files,
        converged: unconverged.is_none(),
        wall_time_seconds,
    })
}

fn parameters(cfg: &ExperimentConfig) -> Vec<(String, String)> {
    vec![
        ("grid".into(), format!("{:?}", cfg.grid)),
        ("model".into(), format!("{:?}", cfg.model)),
        ("solver".into(), format!("{:?}", cfg.solver)),
        ("hughes".into(), format!("{:?}", cfg.hughes)),
        ("initial_datum".into(), format!("{:?}", cfg.initial_datum)),
        ("probes".into(), format!("{:?}", cfg.probes)),
        ("betas".into(), format!("{:?}", cfg.betas)),
        ("oracle".into(), format!("{:?}", cfg.oracle)),
        ("output".into(), format!("{:?}", cfg.output)),
    ]
}

/// Runs the experiment; `Ok(Some(_))` means outputs were written but a
/// descent did not converge.
fn dispatch(cfg: &ExperimentConfig, emitted: &mut Emitted) -> Result<Option<CliError>, CliError> {
    let root = emitted.root.clone();
    match cfg.experiment {
        ExperimentKind::Hughes => {
            let (_, e) = hughes_member(cfg, &root)?;
            emitted.merge(Path::new(""), e);
            Ok(None)
        }
        ExperimentKind::Mfg => {
            let (_, m) = mfg_member(cfg, &root)?;
            emitted.merge(Path::new(""), m.emitted);
            Ok(m.unconverged)
        }
        ExperimentKind::Compare => {
            let m = compare_member(cfg, &root)?;
            emitted.merge(Path::new(""), m.emitted);
            Ok(m.unconverged)
        }
        ExperimentKind::Oracle => oracle_run(cfg, emitted),
        ExperimentKind::BetaSweep => beta_sweep(cfg, emitted),
        ExperimentKind::EnergyCompare => energy_compare(cfg, emitted),
    }
}

fn hughes_member(
    cfg: &ExperimentConfig,
    dir: &Path,
) -> Result<(HughesSolution, Emitted), CliError> {
    let grid = cfg.hughes_grid()?;
    let rho0 = cfg.initial_datum.on_grid(&grid)?;
    let sol = run_hughes(&rho0, &cfg.model, &cfg.hughes_solver())?;
    let j = sol.flux(&cfg.model);
    let channels = FrameChannels {
        rho: &sol.rho,
        phi: Some(&sol.phi),
        v: None,
        j: Some(&j),
    };
    let mut e = Emitted::new(dir);
    write_frame_csv(channels, &e.path("frames.csv"))?;
    if !cfg.probes.is_empty() {
        write_probe_csv(channels, &cfg.probes, &e.path("probes.csv"))?;
    }
    write_mass_csv(&[("hughes".into(), &sol.rho)], &e.path("mass.csv"))?;
    maybe_svg(cfg, &mut e, "hughes", &sol.rho)?;
    Ok((sol, e))
}

fn mfg_member(cfg: &ExperimentConfig, dir: &Path) -> Result<(DescentReport, Member), CliError> {
    let grid = cfg.grid.build()?;
    let rho0 = cfg.initial_datum.on_grid(&grid)?;
    let report = run_descent(&rho0, &cfg.model, &cfg.solver)?;
    let j = momentum(&report.rho, &report.v, &cfg.model);
    let channels = FrameChannels {
        rho: &report.rho,
        phi: Some(&report.phi),
        v: Some(&report.v),
        j: Some(&j),
    };
    let mut e = Emitted::new(dir);
    write_frame_csv(channels, &e.path("frames.csv"))?;
    if !cfg.probes.is_empty() {
        write_probe_csv(channels, &cfg.probes, &e.path("probes.csv"))?;
    }
    write_descent_csv(&report, &e.path("descent.csv"))?;
    write_mass_csv(&[("mfg".into(), &report.rho)], &e.path("mass.csv"))?;
    maybe_svg(cfg, &mut e, "mfg", &report.rho)?;
    let unconverged = (!report.converged).then(|| CliError::NotConverged {
        module: "mfg",
        iterations: report.iterations,
        residual: report.final_gradient_norm(),
    });
    Ok((
        report,
        Member {
            emitted: e,
            unconverged,
        },
    ))
}

/// Hughes and mean-field runs side by side in `hughes/` and `mfg/`, plus
/// their density snapshots at the output times.
fn compare_member(cfg: &ExperimentConfig, dir: &Path) -> Result<Member, CliError> {
    let (h, he) = hughes_member(cfg, &dir.join("hughes"))?;
    let (m, me) = mfg_member(cfg, &dir.join("mfg"))?;
    let mut e = Emitted::new(dir);
    e.merge(Path::new("hughes"), he);
    e.merge(Path::new("mfg"), me.emitted);
    let runs = [("hughes".to_string(), &h.rho), ("mfg".to_string(), &m.rho)];
    write_snapshot_csv(&runs, &cfg.output.times, &e.path("snapshots.csv"))?;
    Ok(Member {
        emitted: e,
        unconverged: me.unconverged,
    })
}

fn beta_sweep(cfg: &ExperimentConfig, emitted: &mut Emitted) -> Result<Option<CliError>, CliError> {
    let root = emitted.root.clone();
    let members: Vec<(String, ExperimentConfig)> = cfg
        .betas
        .iter()
        .map(|&b| {
            let mut c = cfg.clone();
            c.model.beta = b;
            (format!("beta_{b}"), c)
        })
        .collect();
    let results: Vec<Result<(HughesSolution, DescentReport, Member), CliError>> = members
        .par_iter()
        .map(|(name, c)| {
            let dir = root.join(name);
            let (h, he) = hughes_member(c, &dir.join("hughes"))?;
            let (m, me) = mfg_member(c, &dir.join("mfg"))?;
            let mut e = Emitted::new(&dir);
            e.merge(Path::new("hughes"), he);
            e.merge(Path::new("mfg"), me.emitted);
            Ok((
                h,
                m,
                Member {
                    emitted: e,
                    unconverged: me.unconverged,
                },
            ))
        })
        .collect();
    let mut runs = Vec::new();
    let mut unconverged = None;
    for ((name, _), r) in members.iter().zip(results) {
        let (h, m, member) = r?;
        emitted.merge(Path::new(name), member.emitted);
        unconverged = unconverged.or(member.unconverged);
        runs.push((name.clone(), h, m));
    }
    let labelled: Vec<(String, &Trajectory)> = runs
        .iter()
        .flat_map(|(name, h, m)| {
            [
                (format!("hughes_{name}"), &h.rho),
                (format!("mfg_{name}"), &m.rho),
            ]
        })
        .collect();
    write_snapshot_csv(&labelled, &cfg.output.times, &emitted.path("snapshots.csv"))?;
    Ok(unconverged)
}

fn energy_compare(
    cfg: &ExperimentConfig,
    emitted: &mut Emitted,
) -> Result<Option<CliError>, CliError> {
    let root = emitted.root.clone();
    let members: Vec<(&str, ExperimentConfig)> = [
        ("linear", Energy::Linear),
        ("exponential", Energy::Exponential),
    ]
    .into_iter()
    .map(|(name, energy)| {
        let mut c = cfg.clone();
        c.model.energy = energy;
        (name, c)
    })
    .collect();
    let results: Vec<Result<(DescentReport, Member), CliError>> = members
        .par_iter()
        .map(|(name, c)| mfg_member(c, &root.join(name)))
        .collect();
    let mut runs = Vec::new();
    let mut unconverged = None;
    for ((name, _), r) in members.iter().zip(results) {
        let (report, member) = r?;
        emitted.merge(Path::new(name), member.emitted);
        unconverged = unconverged.or(member.unconverged);
        runs.push((name.to_string(), report));
    }
    let labelled: Vec<(String, &Trajectory)> =
        runs.iter().map(|(n, r)| (n.clone(), &r.rho)).collect();
    write_mass_csv(&labelled, &emitted.path("mass.csv"))?;
    write_snapshot_csv(&labelled, &cfg.output.times, &emitted.path("snapshots.csv"))?;
    Ok(unconverged)
}

/// Particle simulation next to the continuum solve for the same control,
/// with the per-frame L1 discrepancy and the cost comparison.
fn oracle_run(cfg: &ExperimentConfig, emitted: &mut Emitted) -> Result<Option<CliError>, CliError> {
    let grid = cfg.grid.build()?;
    let rho0 = cfg.initial_datum.on_grid(&grid)?;
    let mut unconverged = None;
    let v = match cfg.oracle.velocity {
        OracleVelocity::Zero => Trajectory::zeros(grid, cfg.solver.dt, cfg.solver.steps())?,
        OracleVelocity::Descent => {
            let report = run_descent(&rho0, &cfg.model, &cfg.solver)?;
            if !report.converged {
                unconverged = Some(CliError::NotConverged {
                    module: "mfg",
                    iterations: report.iterations,
                    residual: report.final_gradient_norm(),
                });
            }
            report.v
        }
    };
    // reflecting everywhere is the closed-room limit of the Robin condition
    let continuum_spec = match cfg.oracle.boundary {
        BoundaryMode::ReflectAll => ModelSpec {
            beta: 0.0,
            ..cfg.model.clone()
        },
        BoundaryMode::AbsorbAtExits => cfg.model.clone(),
    };
    let continuum = forward_solve(&v, &rho0, &continuum_spec, &cfg.solver)?;
    let n = cfg.oracle.particles;
    let (empirical, ensemble) = simulate_particles(
        &v,
        &rho0,
        &cfg.model,
        n,
        cfg.oracle.dt,
        cfg.seed,
        cfg.oracle.boundary,
    )?;

    write_frame_csv(
        FrameChannels {
            v: Some(&v),
            ..FrameChannels::density(&empirical)
        },
        &emitted.path("particles.csv"),
    )?;
    write_frame_csv(
        FrameChannels {
            v: Some(&v),
            ..FrameChannels::density(&continuum)
        },
        &emitted.path("continuum.csv"),
    )?;

    let mass0 = rho0.integral();
    let mut out = String::from("t,l1,binomial_bound,ratio,particle_mass,continuum_mass\n");
    for (k, &t) in continuum.times().iter().enumerate() {
        let l1 = l1_distance(empirical.frame(k), continuum.frame(k), &grid);
        let bound = binomial_l1_bound(continuum.frame(k), &grid, mass0, n);
        let ratio = if bound > 0.0 { l1 / bound } else { 0.0 };
        let h = grid.h();
        let pm: f64 = empirical.frame(k).iter().sum::<f64>() * h;
        let cm: f64 = continuum.frame(k).iter().sum::<f64>() * h;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            num(t),
            num(l1),
            num(bound),
            num(ratio),
            num(pm),
            num(cm)
        );
    }
    write_text(&emitted.path("discrepancy.csv"), &out)?;

    let alpha = cfg.model.alpha;
    let cost = empirical_cost(&ensemble, alpha) * ensemble.mass;
    let err = empirical_cost_std_error(&ensemble, alpha) * ensemble.mass;
    let objective = evaluate_objective(&continuum, &v, &continuum_spec);
    let alive = ensemble.alive_count() as f64 / ensemble.len() as f64;
    let text = format!(
        "particle_cost,std_error,continuum_objective,alive_fraction\n{},{},{},{}\n",
        num(cost),
        num(err),
        num(objective),
        num(alive)
    );
    write_text(&emitted.path("cost.csv"), &text)?;
    maybe_svg(cfg, emitted, "particles", &empirical)?;
    Ok(unconverged)
}

fn write_descent_csv(report: &DescentReport, path: &Path) -> Result<(), CliError> {
    let mut out = String::from("iteration,objective,gradient_norm,step\n");
    for (i, (o, g)) in report
        .objective_history
        .iter()
        .zip(&report.gradient_norm_history)
        .enumerate()
    {
        // step i moved iterate i to iterate i + 1
        let step = report
            .step_history
            .get(i)
            .map(|s| num(*s))
            .unwrap_or_default();
        let _ = writeln!(out, "{i},{},{},{step}", num(*o), num(*g));
    }
    write_text(path, &out)
}

fn maybe_svg(
    cfg: &ExperimentConfig,
    e: &mut Emitted,
    name: &str,
    rho: &Trajectory,
) -> Result<(), CliError> {
    if !cfg.output.svg {
        return Ok(());
    }
    let series: Vec<(String, Vec<f64>)> = cfg
        .output
        .times
        .iter()
        .map(|&t| {
            let k = rho.frame_index_at(t);
            (format!("t = {:.2}", rho.times()[k]), rho.frame(k).to_vec())
        })
        .collect();
    write_svg(
        &e.path(format!("{name}.svg")),
        &format!("{name}: density"),
        rho.grid(),
        &series,
    )
}

/// Uniform random control in `[-amplitude, amplitude]`, with frame 0 zero
/// since it never enters the dynamics.
pub fn random_control(
    grid: Grid,
    dt: f64,
    steps: usize,
    amplitude: f64,
    seed: u64,
) -> Result<Trajectory, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = Trajectory::zeros(grid, dt, steps)?;
    for k in 1..=steps {
        for x in v.frame_mut(k) {
            *x = amplitude * rng.gen_range(-1.0..=1.0);
        }
    }
    Ok(v)
}

/// Control at which finite differences are taken: magnitude in [0.1, 0.2],
/// one random sign per time step. The upwind flux has a kink where a face
/// velocity (the mean of two cells) vanishes, and no face velocity of this
/// control comes near zero.
pub fn gradient_check_control(
    grid: Grid,
    dt: f64,
    steps: usize,
    seed: u64,
) -> Result<Trajectory, CliError> {
    let mut v = random_control(grid, dt, steps, 0.1, seed)?;
    for k in 1..=steps {
        let frame = v.frame_mut(k);
        let sign = frame[0].signum();
        for x in frame {
            *x = sign * (0.1 + x.abs());
        }
    }
    Ok(v)
}

#[derive(Debug, Clone)]
pub struct GradientCheckReport {
    pub rows: Vec<GradientCheckRow>,
    pub csv: PathBuf,
}

/// Finite-difference check of the adjoint gradient at a random control along
/// a random direction (both drawn from `cfg.seed`). Writes
/// `gradient_check.csv` to the output directory.
pub fn run_gradient_check(cfg: &ExperimentConfig) -> Result<GradientCheckReport, CliError> {
    let grid = cfg.grid.build()?;
    let rho0 = cfg.initial_datum.on_grid(&grid)?;
    let steps = cfg.solver.steps();
    let v = gradient_check_control(grid, cfg.solver.dt, steps, cfg.seed)?;
    let dir = random_control(grid, cfg.solver.dt, steps, 1.0, cfg.seed.wrapping_add(1))?;
    let rows = check_gradient(&rho0, &cfg.model, &cfg.solver, &v, &dir, &cfg.epsilons)?;
    let mut out = String::from("epsilon,finite_difference,adjoint,relative_error\n");
    for r in &rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            num(r.epsilon),
            num(r.finite_difference),
            num(r.adjoint),
            num(r.relative_error)
        );
    }
    let csv = cfg.output_dir.join("gradient_check.csv");
    write_text(&csv, &out)?;
    Ok(GradientCheckReport { rows, csv })
}
