use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::grid::{Grid, Trajectory};

use super::CliError;

/// Header shared by every per-frame CSV file.
pub const FRAME_HEADER: &str = "t,x,rho,phi,v,j";

/// The channels of one frame CSV. Only `rho` is required; missing channels
/// are written as empty fields so the schema never changes.
#[derive(Debug, Clone, Copy)]
pub struct FrameChannels<'a> {
    pub rho: &'a Trajectory,
    pub phi: Option<&'a Trajectory>,
    pub v: Option<&'a Trajectory>,
    pub j: Option<&'a Trajectory>,
}

impl<'a> FrameChannels<'a> {
    pub fn density(rho: &'a Trajectory) -> Self {
        Self {
            rho,
            phi: None,
            v: None,
            j: None,
        }
    }

    fn check(&self) -> Result<(), CliError> {
        for (name, c) in [("phi", self.phi), ("v", self.v), ("j", self.j)] {
            if let Some(c) = c {
                if !self.rho.is_aligned_with(c) {
                    return Err(CliError::Invalid {
                        key: name.into(),
                        message: "channel is not aligned with the density frames".into(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// One parsed row of a frame CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameRow {
    pub t: f64,
    pub x: f64,
    pub rho: f64,
    pub phi: Option<f64>,
    pub v: Option<f64>,
    pub j: Option<f64>,
}

/// `{:.15e}` keeps 16 significant digits, enough for an exact round trip
/// through the text.
pub(crate) fn num(x: f64) -> String {
    format!("{x:.15e}")
}

fn opt(c: Option<&Trajectory>, k: usize, i: usize) -> String {
    c.map(|c| num(c.frame(k)[i])).unwrap_or_default()
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| CliError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes one row per (frame, cell), ordered by time and then by position.
pub fn write_frame_csv(channels: FrameChannels<'_>, path: &Path) -> Result<(), CliError> {
    channels.check()?;
    let rho = channels.rho;
    let grid = rho.grid();
    let mut out = String::new();
    out.push_str(FRAME_HEADER);
    out.push('\n');
    for (k, &t) in rho.times().iter().enumerate() {
        for (i, x) in grid.centers().into_iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                num(t),
                num(x),
                num(rho.frame(k)[i]),
                opt(channels.phi, k, i),
                opt(channels.v, k, i),
                opt(channels.j, k, i),
            );
        }
    }
    write_text(path, &out)
}

pub fn read_frame_csv(path: &Path) -> Result<Vec<FrameRow>, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let bad = |line: usize, message: &str| CliError::Invalid {
        key: format!("{}:{line}", path.display()),
        message: message.to_string(),
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == FRAME_HEADER => {}
        _ => return Err(bad(1, "unexpected header")),
    }
    let field = |s: &str| -> Result<Option<f64>, std::num::ParseFloatError> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some)
        }
    };
    lines
        .map(|(idx, line)| {
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 6 {
                return Err(bad(idx + 1, "expected 6 fields"));
            }
            let vals: Result<Vec<Option<f64>>, _> = parts.iter().map(|s| field(s)).collect();
            let vals = vals.map_err(|_| bad(idx + 1, "not a number"))?;
            match (vals[0], vals[1], vals[2]) {
                (Some(t), Some(x), Some(rho)) => Ok(FrameRow {
                    t,
                    x,
                    rho,
                    phi: vals[3],
                    v: vals[4],
                    j: vals[5],
                }),
                _ => Err(bad(idx + 1, "t, x and rho are required")),
            }
        })
        .collect()
}

/// Nearest-cell time series at each probe position.
pub(crate) fn write_probe_csv(
    channels: FrameChannels<'_>,
    probes: &[f64],
    path: &Path,
) -> Result<(), CliError> {
    channels.check()?;
    let rho = channels.rho;
    let grid = rho.grid();
    let mut out = String::from("probe,x_cell,t,rho,phi,v,j\n");
    for &p in probes {
        let i = grid.nearest_cell(p);
        for (k, &t) in rho.times().iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                num(p),
                num(grid.center(i)),
                num(t),
                num(rho.frame(k)[i]),
                opt(channels.phi, k, i),
                opt(channels.v, k, i),
                opt(channels.j, k, i),
            );
        }
    }
    write_text(path, &out)
}

/// Density profiles of several labelled runs at the requested times.
pub(crate) fn write_snapshot_csv(
    runs: &[(String, &Trajectory)],
    times: &[f64],
    path: &Path,
) -> Result<(), CliError> {
    let mut out = String::from("label,t,x,rho\n");
    for (label, rho) in runs {
        for &t in times {
            let k = rho.frame_index_at(t);
            for (x, r) in rho.grid().centers().into_iter().zip(rho.frame(k)) {
                let _ = writeln!(
                    out,
                    "{label},{},{},{}",
                    num(rho.times()[k]),
                    num(x),
                    num(*r)
                );
            }
        }
    }
    write_text(path, &out)
}

/// Remaining mass of several labelled runs, one row per run and frame.
pub(crate) fn write_mass_csv(runs: &[(String, &Trajectory)], path: &Path) -> Result<(), CliError> {
    let mut out = String::from("label,t,mass\n");
    for (label, rho) in runs {
        for (t, m) in rho.times().iter().zip(rho.masses()) {
            let _ = writeln!(out, "{label},{},{}", num(*t), num(m));
        }
    }
    write_text(path, &out)
}

/// Line plot of profiles on a grid, one polyline per series.
pub fn write_svg(
    path: &Path,
    title: &str,
    grid: &Grid,
    series: &[(String, Vec<f64>)],
) -> Result<(), CliError> {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 40.0;
    const COLORS: [&str; 6] = [
        "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
    ];
    let xs = grid.centers();
    let (lo, hi) = series
        .iter()
        .flat_map(|(_, v)| v.iter())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| {
            (a.min(y), b.max(y))
        });
    let (lo, hi) = match (lo.is_finite(), hi > lo) {
        (false, _) => (0.0, 1.0),
        (true, false) => (lo - 0.5, lo + 0.5),
        (true, true) => (lo, hi),
    };
    let sx = |x: f64| PAD + (x - grid.x_min()) / (grid.x_max() - grid.x_min()) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - lo) / (hi - lo) * (H - 2.0 * PAD);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{PAD}" y="20" font-size="14">{title}</text>"#
    );
    let _ = writeln!(
        out,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let _ = writeln!(
        out,
        r#"<text x="4" y="{}" font-size="10">{hi:.3}</text>"#,
        PAD + 4.0
    );
    let _ = writeln!(
        out,
        r#"<text x="4" y="{}" font-size="10">{lo:.3}</text>"#,
        H - PAD
    );
    for (n, (label, ys)) in series.iter().enumerate() {
        let color = COLORS[n % COLORS.len()];
        let points: Vec<String> = xs
            .iter()
            .zip(ys)
            .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="11" fill="{color}">{label}</text>"#,
            W - PAD - 120.0,
            PAD + 14.0 * (n + 1) as f64
        );
    }
    out.push_str("</svg>\n");
    write_text(path, &out)
}

/// Run manifest: what ran, with which parameters, and which files it wrote.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub experiment: String,
    pub config_file: Option<PathBuf>,
    pub seed: u64,
    pub parameters: Vec<(String, String)>,
    pub status: String,
    /// Paths relative to the output directory.
    pub files: Vec<PathBuf>,
    pub wall_time_seconds: f64,
}

impl Manifest {
    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_text(path, &(text + "\n"))
    }
}
