use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::config::SolverConfig;
use crate::error::SolverError;
use crate::grid::{BoundaryTag, Field, Grid};
use crate::model::{Energy, Mobility, ModelSpec, TabulatedMobility};
use crate::oracle::BoundaryMode;

use super::CliError;

/// Prefix of environment variables that override configuration keys.
pub const ENV_PREFIX: &str = "CROWDMFG_";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Hughes,
    Mfg,
    Compare,
    Oracle,
    BetaSweep,
    EnergyCompare,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Hughes => "hughes",
            ExperimentKind::Mfg => "mfg",
            ExperimentKind::Compare => "compare",
            ExperimentKind::Oracle => "oracle",
            ExperimentKind::BetaSweep => "beta_sweep",
            ExperimentKind::EnergyCompare => "energy_compare",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialDatum {
    Constant(f64),
    ThreeGroups,
    Bump {
        lo: f64,
        hi: f64,
        height: f64,
    },
    /// Samples loaded from a file: either one density per cell, or `x, rho`
    /// pairs interpolated linearly onto the cell centers.
    Tabulated {
        path: PathBuf,
        rows: Vec<Vec<f64>>,
    },
}

impl InitialDatum {
    /// The bump datum of the energy comparison, 0.5 on [-0.25, 0.4].
    pub fn default_bump() -> Self {
        InitialDatum::Bump {
            lo: -0.25,
            hi: 0.4,
            height: 0.5,
        }
    }

    /// Exact cell averages of the datum.
    pub fn on_grid(&self, grid: &Grid) -> Result<Field, SolverError> {
        let values = match self {
            InitialDatum::Constant(c) => vec![*c; grid.n_cells()],
            InitialDatum::ThreeGroups => {
                let parts = [
                    grid.indicator_averages(-0.8, -0.6, 0.8),
                    grid.indicator_averages(-0.3, 0.3, 0.6),
                    grid.indicator_averages(0.4, 0.8, 0.95),
                ];
                (0..grid.n_cells())
                    .map(|i| parts.iter().map(|p| p[i]).sum())
                    .collect()
            }
            InitialDatum::Bump { lo, hi, height } => grid.indicator_averages(*lo, *hi, *height),
            InitialDatum::Tabulated { path, rows } => tabulated_on_grid(path, rows, grid)?,
        };
        Field::new(*grid, values)
    }
}

fn tabulated_on_grid(path: &Path, rows: &[Vec<f64>], grid: &Grid) -> Result<Vec<f64>, SolverError> {
    let bad = |msg: String| SolverError::InvalidInput(format!("{}: {msg}", path.display()));
    if rows.iter().all(|r| r.len() == 1) {
        if rows.len() != grid.n_cells() {
            return Err(bad(format!(
                "{} values for {} cells",
                rows.len(),
                grid.n_cells()
            )));
        }
        return Ok(rows.iter().map(|r| r[0]).collect());
    }
    if rows.iter().any(|r| r.len() != 2) || rows.len() < 2 {
        return Err(bad("expected one value per line or `x, rho` pairs".into()));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(bad("x values must be strictly increasing".into()));
    }
    Ok(grid
        .centers()
        .iter()
        .map(|&x| {
            let j = xs.partition_point(|&s| s <= x);
            if j == 0 {
                rows[0][1]
            } else if j == xs.len() {
                rows[j - 1][1]
            } else {
                let w = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
                (1.0 - w) * rows[j - 1][1] + w * rows[j][1]
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub n_cells: usize,
    pub left: BoundaryTag,
    pub right: BoundaryTag,
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid, SolverError> {
        self.with_cells(self.n_cells)
    }

    pub fn with_cells(&self, n: usize) -> Result<Grid, SolverError> {
        Grid::new(self.x_min, self.x_max, n, self.left, self.right)
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            x_min: -1.0,
            x_max: 1.0,
            n_cells: 200,
            left: BoundaryTag::Exit,
            right: BoundaryTag::Exit,
        }
    }
}

/// Settings of the explicit Hughes baseline. The horizon is `solver.t_final`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HughesConfig {
    pub dt: f64,
    /// Cells of the Hughes grid; the main grid when unset.
    pub n_cells: Option<usize>,
    /// Stored step stride; when unset, frames are stored every `solver.dt`.
    pub record_every: Option<usize>,
}

impl Default for HughesConfig {
    fn default() -> Self {
        Self {
            dt: 1e-5,
            n_cells: None,
            record_every: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleVelocity {
    Zero,
    Descent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    pub particles: usize,
    pub dt: f64,
    pub boundary: BoundaryMode,
    pub velocity: OracleVelocity,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            particles: 100_000,
            dt: 0.01,
            boundary: BoundaryMode::ReflectAll,
            velocity: OracleVelocity::Zero,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub svg: bool,
    /// Snapshot times for comparison tables and plots.
    pub times: Vec<f64>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            svg: false,
            times: vec![0.1, 0.7, 1.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub grid: GridConfig,
    pub model: ModelSpec,
    pub solver: SolverConfig,
    pub hughes: HughesConfig,
    pub initial_datum: InitialDatum,
    pub probes: Vec<f64>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub betas: Vec<f64>,
    pub oracle: OracleConfig,
    pub output: OutputConfig,
    pub epsilons: Vec<f64>,
}

impl ExperimentConfig {
    /// Defaults for everything except the experiment and the initial datum.
    pub fn new(experiment: ExperimentKind, initial_datum: InitialDatum) -> Self {
        Self {
            experiment,
            grid: GridConfig::default(),
            model: ModelSpec::default(),
            solver: SolverConfig::default(),
            hughes: HughesConfig::default(),
            initial_datum,
            probes: Vec::new(),
            output_dir: PathBuf::from("output"),
            seed: 0,
            betas: vec![0.1, 1.0, 10.0],
            oracle: OracleConfig::default(),
            output: OutputConfig::default(),
            epsilons: (1..=7).map(|k| 10f64.powi(-k)).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let invalid = |key: &str, e: SolverError| CliError::Invalid {
            key: key.to_string(),
            message: e.to_string(),
        };
        let grid = self.grid.build().map_err(|e| invalid("grid", e))?;
        self.model.validate().map_err(|e| invalid("model", e))?;
        self.solver.validate().map_err(|e| invalid("solver", e))?;
        let rho0 = self
            .initial_datum
            .on_grid(&grid)
            .map_err(|e| invalid("initial_datum", e))?;
        if rho0.min() < 0.0 || rho0.max() > self.model.rho_max {
            return Err(CliError::Invalid {
                key: "initial_datum".into(),
                message: format!("density must lie in [0, {}]", self.model.rho_max),
            });
        }
        for &x in &self.probes {
            if !grid.contains(x) {
                return Err(CliError::Invalid {
                    key: "probes".into(),
                    message: format!(
                        "probe {x} lies outside [{}, {}]",
                        grid.x_min(),
                        grid.x_max()
                    ),
                });
            }
        }
        if !(self.hughes.dt > 0.0 && self.hughes.dt.is_finite()) {
            return Err(CliError::Invalid {
                key: "hughes.dt".into(),
                message: format!("must be positive, got {}", self.hughes.dt),
            });
        }
        if self.hughes.n_cells == Some(0) || self.hughes.record_every == Some(0) {
            return Err(CliError::Invalid {
                key: "hughes".into(),
                message: "n_cells and record_every must be at least 1".into(),
            });
        }
        let ratio = self.solver.t_final / self.hughes.dt;
        if (ratio - ratio.round()).abs() > 1e-6 * ratio {
            return Err(CliError::Invalid {
                key: "hughes.dt".into(),
                message: format!(
                    "horizon {} is not a multiple of {}",
                    self.solver.t_final, self.hughes.dt
                ),
            });
        }
        if self.oracle.particles == 0 || !(self.oracle.dt > 0.0) {
            return Err(CliError::Invalid {
                key: "oracle".into(),
                message: "particles and dt must be positive".into(),
            });
        }
        if self.experiment == ExperimentKind::BetaSweep && self.betas.is_empty() {
            return Err(CliError::Invalid {
                key: "sweep.betas".into(),
                message: "needs at least one value".into(),
            });
        }
        if self.betas.iter().any(|b| !(*b >= 0.0 && b.is_finite())) {
            return Err(CliError::Invalid {
                key: "sweep.betas".into(),
                message: "values must be nonnegative".into(),
            });
        }
        if self.epsilons.iter().any(|e| !(*e > 0.0)) {
            return Err(CliError::Invalid {
                key: "gradient.epsilons".into(),
                message: "values must be positive".into(),
            });
        }
        Ok(())
    }

    /// Solver settings of the Hughes baseline.
    pub fn hughes_solver(&self) -> SolverConfig {
        let stride = self
            .hughes
            .record_every
            .unwrap_or_else(|| ((self.solver.dt / self.hughes.dt).round() as usize).max(1));
        SolverConfig {
            dt: self.hughes.dt,
            record_every: stride,
            ..self.solver.clone()
        }
    }

    pub fn hughes_grid(&self) -> Result<Grid, SolverError> {
        self.grid
            .with_cells(self.hughes.n_cells.unwrap_or(self.grid.n_cells))
    }
}

/// Where a configuration value came from, for error messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Env(String),
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::Env(name) => write!(f, "environment variable {name}"),
        }
    }
}

const SECTIONS: [&str; 8] = [
    "grid", "model", "solver", "hughes", "sweep", "oracle", "output", "gradient",
];

/// Parses configuration text. Relative file references resolve against the
/// current directory.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    parse_config_with(text, Path::new("."), std::iter::empty())
}

/// Reads a configuration file and applies `CROWDMFG_<SECTION>_<KEY>`
/// overrides from the process environment.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_with(&text, base, std::env::vars())
}

/// Parses `text`, resolving relative paths against `base`, then applies the
/// overrides among `env` (pairs of variable name and value).
pub fn parse_config_with(
    text: &str,
    base: &Path,
    env: impl IntoIterator<Item = (String, String)>,
) -> Result<ExperimentConfig, CliError> {
    let mut entries: BTreeMap<String, (String, Origin)> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Syntax {
                origin: Origin::Line(line_no),
                message: format!("expected `key = value`, found `{line}`"),
            });
        };
        let key = key.trim().to_string();
        if entries.contains_key(&key) {
            return Err(CliError::Key {
                origin: Origin::Line(line_no),
                key,
                message: "duplicate key".into(),
            });
        }
        entries.insert(key, (value.trim().to_string(), Origin::Line(line_no)));
    }
    let mut overrides: Vec<(String, String)> = env
        .into_iter()
        .filter(|(k, _)| k.starts_with(ENV_PREFIX))
        .collect();
    overrides.sort();
    for (name, value) in overrides {
        let key = env_key(&name).ok_or_else(|| CliError::Key {
            origin: Origin::Env(name.clone()),
            key: name.clone(),
            message: "does not name a configuration key".into(),
        })?;
        entries.insert(key, (value.trim().to_string(), Origin::Env(name)));
    }
    build(entries, base)
}

/// `CROWDMFG_SOLVER_NEWTON_TOL` -> `solver.newton_tol`, `CROWDMFG_SEED` -> `seed`.
fn env_key(name: &str) -> Option<String> {
    let rest = name.strip_prefix(ENV_PREFIX)?.to_ascii_lowercase();
    if rest.is_empty() {
        return None;
    }
    for section in SECTIONS {
        if let Some(key) = rest.strip_prefix(section).and_then(|r| r.strip_prefix('_')) {
            if !key.is_empty() {
                return Some(format!("{section}.{key}"));
            }
        }
    }
    Some(rest)
}

fn build(
    entries: BTreeMap<String, (String, Origin)>,
    base: &Path,
) -> Result<ExperimentConfig, CliError> {
    let required = |key: &str| {
        entries.get(key).ok_or_else(|| CliError::Missing {
            key: key.to_string(),
        })
    };
    let (kind_text, kind_origin) = required("experiment")?;
    let experiment = parse_kind(kind_text).map_err(|m| key_error(kind_origin, "experiment", m))?;
    let (datum_text, datum_origin) = required("initial_datum")?;
    let initial_datum =
        parse_datum(datum_text, base).map_err(|m| key_error(datum_origin, "initial_datum", m))?;

    let mut cfg = ExperimentConfig::new(experiment, initial_datum);
    // a tabulated mobility is sampled on [0, rho_max], so rho_max goes first
    let ordered = entries
        .iter()
        .filter(|(k, _)| *k == "model.rho_max")
        .chain(entries.iter().filter(|(k, _)| *k != "model.rho_max"));
    for (key, (value, origin)) in ordered {
        if key == "experiment" || key == "initial_datum" {
            continue;
        }
        apply(&mut cfg, key, value, base).map_err(|m| key_error(origin, key, m))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn key_error(origin: &Origin, key: &str, message: String) -> CliError {
    CliError::Key {
        origin: origin.clone(),
        key: key.to_string(),
        message,
    }
}

fn apply(cfg: &mut ExperimentConfig, key: &str, value: &str, base: &Path) -> Result<(), String> {
    match key {
        "probes" => cfg.probes = list(value)?,
        "output_dir" => cfg.output_dir = PathBuf::from(value),
        "seed" => cfg.seed = integer(value)?,

        "grid.x_min" => cfg.grid.x_min = number(value)?,
        "grid.x_max" => cfg.grid.x_max = number(value)?,
        "grid.n_cells" => cfg.grid.n_cells = integer(value)?,
        "grid.left" => cfg.grid.left = boundary(value)?,
        "grid.right" => cfg.grid.right = boundary(value)?,

        "model.mobility" => cfg.model.mobility = mobility(value, base, cfg.model.rho_max)?,
        "model.energy" => cfg.model.energy = energy(value)?,
        "model.sigma" => cfg.model.sigma = number(value)?,
        "model.beta" => cfg.model.beta = number(value)?,
        "model.alpha" => cfg.model.alpha = number(value)?,
        "model.a" => cfg.model.a = number(value)?,
        "model.rho_max" => cfg.model.rho_max = number(value)?,

        "solver.dt" => cfg.solver.dt = number(value)?,
        "solver.t_final" => cfg.solver.t_final = number(value)?,
        "solver.newton_tol" => cfg.solver.newton_tol = number(value)?,
        "solver.newton_max_iter" => cfg.solver.newton_max_iter = integer(value)?,
        "solver.tau" => cfg.solver.tau = number(value)?,
        "solver.descent_tol" => cfg.solver.descent_tol = number(value)?,
        "solver.descent_max_iter" => cfg.solver.descent_max_iter = integer(value)?,
        "solver.armijo" => cfg.solver.armijo = boolean(value)?,
        "solver.gradient_tol" => cfg.solver.gradient_tol = optional_number(value)?,
        "solver.precondition_floor" => cfg.solver.precondition_floor = optional_number(value)?,
        "solver.record_every" => cfg.solver.record_every = integer(value)?,
        "solver.eikonal_floor" => cfg.solver.eikonal_floor = number(value)?,

        "hughes.dt" => cfg.hughes.dt = number(value)?,
        "hughes.n_cells" => cfg.hughes.n_cells = Some(integer(value)?),
        "hughes.record_every" => cfg.hughes.record_every = Some(integer(value)?),

        "sweep.betas" => cfg.betas = list(value)?,

        "oracle.particles" => cfg.oracle.particles = integer(value)?,
        "oracle.dt" => cfg.oracle.dt = number(value)?,
        "oracle.boundary" => {
            cfg.oracle.boundary = match value {
                "reflect" | "reflect_all" => BoundaryMode::ReflectAll,
                "absorb" | "absorb_at_exits" => BoundaryMode::AbsorbAtExits,
                _ => return Err(format!("expected `reflect` or `absorb`, found `{value}`")),
            }
        }
        "oracle.velocity" => {
            cfg.oracle.velocity = match value {
                "zero" => OracleVelocity::Zero,
                "descent" => OracleVelocity::Descent,
                _ => return Err(format!("expected `zero` or `descent`, found `{value}`")),
            }
        }

        "output.svg" => cfg.output.svg = boolean(value)?,
        "output.times" => cfg.output.times = list(value)?,

        "gradient.epsilons" => cfg.epsilons = list(value)?,

        _ => return Err("unknown key".into()),
    }
    Ok(())
}

fn number(value: &str) -> Result<f64, String> {
    value
        .parse::<f64>()
        .map_err(|_| format!("expected a number, found `{value}`"))
}

fn optional_number(value: &str) -> Result<Option<f64>, String> {
    if value == "none" {
        Ok(None)
    } else {
        number(value).map(Some)
    }
}

fn integer<T: std::str::FromStr>(value: &str) -> Result<T, String> {
    value
        .parse::<T>()
        .map_err(|_| format!("expected a nonnegative integer, found `{value}`"))
}

fn boolean(value: &str) -> Result<bool, String> {
    match value {
        "true" | "on" | "yes" => Ok(true),
        "false" | "off" | "no" => Ok(false),
        _ => Err(format!("expected true or false, found `{value}`")),
    }
}

/// Comma separated numbers, optionally in square brackets.
fn list(value: &str) -> Result<Vec<f64>, String> {
    let inner = value
        .strip_prefix('[')
        .and_then(|v| v.strip_suffix(']'))
        .unwrap_or(value)
        .trim();
    if inner.is_empty() {
        return Ok(Vec::new());
    }
    inner.split(',').map(|s| number(s.trim())).collect()
}

fn boundary(value: &str) -> Result<BoundaryTag, String> {
    match value {
        "exit" => Ok(BoundaryTag::Exit),
        "wall" => Ok(BoundaryTag::Wall),
        _ => Err(format!("expected `exit` or `wall`, found `{value}`")),
    }
}

fn parse_kind(value: &str) -> Result<ExperimentKind, String> {
    Ok(match value {
        "hughes" => ExperimentKind::Hughes,
        "mfg" => ExperimentKind::Mfg,
        "compare" => ExperimentKind::Compare,
        "oracle" => ExperimentKind::Oracle,
        "beta_sweep" => ExperimentKind::BetaSweep,
        "energy_compare" => ExperimentKind::EnergyCompare,
        _ => return Err(format!("unknown experiment `{value}`")),
    })
}

/// Splits `name(args)` into the name and the argument text.
fn call(value: &str) -> (&str, Option<&str>) {
    match value.split_once('(') {
        Some((name, rest)) => (name.trim(), rest.strip_suffix(')').map(str::trim)),
        None => (value, None),
    }
}

fn parse_datum(value: &str, base: &Path) -> Result<InitialDatum, String> {
    match call(value) {
        ("three_groups", None) => Ok(InitialDatum::ThreeGroups),
        ("bump", None) => Ok(InitialDatum::default_bump()),
        ("constant", Some(args)) => Ok(InitialDatum::Constant(number(args)?)),
        ("bump", Some(args)) => match list(args)?.as_slice() {
            [lo, hi, height] => Ok(InitialDatum::Bump {
                lo: *lo,
                hi: *hi,
                height: *height,
            }),
            _ => Err("bump takes (lo, hi, height)".into()),
        },
        ("tabulated", Some(file)) => {
            let path = base.join(file);
            let rows = read_table(&path)?;
            Ok(InitialDatum::Tabulated { path, rows })
        }
        _ => Err(format!(
            "expected constant(c), three_groups, bump(lo, hi, height) or tabulated(file), found `{value}`"
        )),
    }
}

fn read_table(path: &Path) -> Result<Vec<Vec<f64>>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(str::parse::<f64>)
            .collect();
        // a non-numeric first line is a header
        match row {
            Ok(r) => rows.push(r),
            Err(_) if rows.is_empty() && i == 0 => {}
            Err(_) => return Err(format!("{}:{}: not a number", path.display(), i + 1)),
        }
    }
    if rows.is_empty() {
        return Err(format!("{} holds no data", path.display()));
    }
    Ok(rows)
}

fn mobility(value: &str, base: &Path, rho_max: f64) -> Result<Mobility, String> {
    match call(value) {
        ("hughes_cubic", None) => Ok(Mobility::HughesCubic),
        ("linear_density", None) => Ok(Mobility::LinearDensity),
        ("tabulated", Some(file)) => {
            let path = base.join(file);
            let samples: Vec<f64> = read_table(&path)?.into_iter().flatten().collect();
            TabulatedMobility::new(samples, rho_max)
                .map(Mobility::Tabulated)
                .map_err(|e| e.to_string())
        }
        _ => Err(format!(
            "expected hughes_cubic, linear_density or tabulated(file), found `{value}`"
        )),
    }
}

fn energy(value: &str) -> Result<Energy, String> {
    match value {
        "linear" => Ok(Energy::Linear),
        "exponential" => Ok(Energy::Exponential),
        _ => Err(format!(
            "expected `linear` or `exponential`, found `{value}`"
        )),
    }
}
