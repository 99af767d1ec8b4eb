//! Plot-ready CSV extracted from a finished run directory.
//!
//! | kind | header |
//! |---|---|
//! | `spectrum` | `i,mu` |
//! | `convergence` | `solution,` followed by the iterate-log columns |
//! | `path_profile` | `s,J` for the mountain-pass solution |
//! | `solution_trace` | `solution,arc_length,u` walking each boundary loop |

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::functional::{parse_iterate_log, ITERATE_LOG_HEADER};
use crate::mesh::{dist, Mesh};
use crate::report::RunReport;
use crate::run::{load_function, spectrum_from_report};

const MODULE: &str = "cli";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Convergence,
    PathProfile,
    SolutionTrace,
    Spectrum,
}

impl PlotKind {
    pub const ALL: [PlotKind; 4] = [PlotKind::Convergence, PlotKind::PathProfile, PlotKind::SolutionTrace, PlotKind::Spectrum];

    pub fn name(&self) -> &'static str {
        match self {
            PlotKind::Convergence => "convergence",
            PlotKind::PathProfile => "path_profile",
            PlotKind::SolutionTrace => "solution_trace",
            PlotKind::Spectrum => "spectrum",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        PlotKind::ALL.into_iter().find(|k| k.name() == s)
    }
}

impl fmt::Display for PlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn solution_count(report: &RunReport) -> usize {
    report.get_usize("solution.count").unwrap_or(0)
}

fn no_data(kind: PlotKind, what: &str) -> Error {
    Error::param(MODULE, format!("report has no data for `{kind}`: {what}"))
}

/// CSV text for `kind`. Sidecar files are resolved against `base`.
pub fn plot_data(report: &RunReport, base: &Path, kind: PlotKind) -> Result<String> {
    let mut out = String::new();
    match kind {
        PlotKind::Spectrum => {
            let mus = spectrum_from_report(report).map_err(|_| no_data(kind, "no spectrum"))?;
            out.push_str("i,mu\n");
            for (i, mu) in mus.iter().enumerate() {
                let _ = writeln!(out, "{},{mu:e}", i + 1);
            }
        }
        PlotKind::Convergence => {
            let n = solution_count(report);
            if n == 0 {
                return Err(no_data(kind, "no solutions"));
            }
            let _ = writeln!(out, "solution,{ITERATE_LOG_HEADER}");
            for i in 1..=n {
                let path = base.join(report.require(&format!("solution.{i}.log"))?);
                let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                // validates the sidecar before copying it through
                parse_iterate_log(&text)?;
                for line in text.lines().skip(1).filter(|l| !l.is_empty()) {
                    let _ = writeln!(out, "{i},{line}");
                }
            }
        }
        PlotKind::PathProfile => {
            let i = (1..=solution_count(report))
                .find(|i| report.get(&format!("solution.{i}.path_profile")).is_some())
                .ok_or_else(|| no_data(kind, "no mountain-pass solution"))?;
            let path = base.join(report.require(&format!("solution.{i}.path_profile"))?);
            out = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        }
        PlotKind::SolutionTrace => {
            let n = solution_count(report);
            if n == 0 {
                return Err(no_data(kind, "no solutions"));
            }
            let mesh = Mesh::load(base.join(report.require("artifacts.mesh")?))?;
            let loops = mesh.boundary_loops();
            out.push_str("solution,arc_length,u\n");
            for i in 1..=n {
                let u = load_function(base.join(report.require(&format!("solution.{i}.file"))?))?;
                if u.len() != mesh.n_nodes() {
                    return Err(Error::DimensionMismatch { module: MODULE, expected: mesh.n_nodes(), got: u.len() });
                }
                let mut s = 0.0;
                for lp in &loops {
                    for (k, &node) in lp.iter().enumerate() {
                        if k > 0 {
                            s += dist(mesh.nodes()[lp[k - 1]], mesh.nodes()[node]);
                        }
                        let _ = writeln!(out, "{i},{s:e},{:e}", u[node]);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Writes `plot_<kind>.csv` into `out_dir` (default: the report's directory).
pub fn emit_plot_data(report_path: &Path, kind: PlotKind, out_dir: Option<&Path>) -> Result<PathBuf> {
    let report = RunReport::load(report_path)?;
    let base = report_path.parent().unwrap_or(Path::new("."));
    let csv = plot_data(&report, base, kind)?;
    let dir = out_dir.unwrap_or(base);
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(format!("plot_{kind}.csv"));
    std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
