//! Scenario orchestration: mesh, operators, spectrum, audit, finders, report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::assembly::OperatorTriple;
use crate::config::{RunConfig, Scenario, Shape};
use crate::critical::{
    minimize_global, minimize_halfspace, mountain_pass, probe_local_linking, probe_mountain_pass_geometry,
    probe_saddle_geometry, CriticalPoint, HalfSpaceConstraint, ProbeOptions, SolverOptions,
};
use crate::error::{Error, Result};
use crate::functional::{iterate_log_csv, norm2, EnergyContext};
use crate::mesh::{generate_disk, generate_square, refine, Mesh, NodeCap};
use crate::nonlinearity::{audit, AuditOptions, HypothesisAudit};
use crate::report::RunReport;
use crate::steklov::{decompose, solve_steklov};

const MODULE: &str = "cli";

pub const REPORT_FILE: &str = "report.txt";
pub const MESH_FILE: &str = "mesh.txt";
pub const SPECTRUM_FILE: &str = "spectrum.txt";
pub const FUNCTION_HEADER: &str = "steklov-function v1";

/// Solutions closer than this in the boundary norm count as the same one.
pub const DISTINCT_TOL: f64 = 0.1;
/// Solutions with smaller boundary norm count as trivial.
pub const TRIVIAL_TOL: f64 = 1e-6;

const SPHERE_RADII: [f64; 8] = [0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.75, 1.0];
const COMPLEMENT_NORMS: [f64; 5] = [1.0, 2.0, 5.0, 10.0, 20.0];
const LINKING_DELTAS: [f64; 8] = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0];

/// `±0.25, ±0.5, …, ±20` along `φ₁`.
fn ray_grid() -> Vec<f64> {
    let pos: Vec<f64> = (1..=80).map(|i| 0.25 * i as f64).collect();
    pos.iter().rev().map(|t| -t).chain(pos.iter().copied()).collect()
}

/// Exit status of a finished run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    /// Some finder stopped at `max_iters` or its result failed re-verification.
    Incomplete,
}

impl RunStatus {
    pub fn name(&self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::Incomplete => "incomplete",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            RunStatus::Ok => 0,
            RunStatus::Incomplete => 2,
        }
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub report_path: PathBuf,
    pub status: RunStatus,
}

/// Mesh described by the domain section, refined `refinements` times.
pub fn build_mesh(cfg: &RunConfig, cap: NodeCap) -> Result<Mesh> {
    let d = &cfg.domain;
    let mut mesh = match d.shape {
        Shape::Disk => generate_disk(d.size, d.h, cap)?,
        Shape::Square => generate_square(d.size, d.h, cap)?,
        Shape::File => Mesh::load(d.path.as_ref().expect("validated"))?,
    };
    for _ in 0..d.refinements {
        mesh = refine(&mesh, cap)?;
    }
    Ok(mesh)
}

struct Artifacts<'a> {
    dir: &'a Path,
}

impl Artifacts<'_> {
    fn write(&self, name: &str, text: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(path, e))
    }
}

struct Stopwatch {
    start: Instant,
    laps: Vec<(&'static str, f64)>,
}

impl Stopwatch {
    fn lap(&mut self, name: &'static str) {
        let now = Instant::now();
        self.laps.push((name, (now - self.start).as_secs_f64()));
        self.start = now;
    }
}

/// Executes the scenario and writes the report and sidecar files into
/// `cfg.output_dir`.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let total = Instant::now();
    let mut clock = Stopwatch { start: Instant::now(), laps: Vec::new() };
    let dir = cfg.output_dir.as_path();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = Artifacts { dir };

    let mut report = RunReport::new();
    for (k, v) in cfg.entries() {
        report.set(format!("config.{k}"), v);
    }

    let mesh = build_mesh(cfg, NodeCap::from_env())?;
    log::info!("mesh: {} nodes, {} triangles", mesh.n_nodes(), mesh.n_triangles());
    report.set("mesh.n_nodes", mesh.n_nodes());
    report.set("mesh.n_triangles", mesh.n_triangles());
    report.set("mesh.n_boundary_edges", mesh.boundary_edges().len());
    report.set_f64("mesh.max_edge", mesh.max_edge_length());
    report.set_f64("mesh.boundary_length", mesh.boundary_length());
    files.write(MESH_FILE, &mesh.to_text())?;
    report.set("artifacts.mesh", MESH_FILE);
    clock.lap("mesh");

    let ops = OperatorTriple::assemble(&mesh, &cfg.coefficient_field()?)?;
    clock.lap("assembly");
    let spectrum = solve_steklov(&mesh, &ops, cfg.solver.n_eigs)?;
    log::info!("spectrum: mu1 = {}", spectrum.mu(1));
    report.set("spectrum.k", spectrum.k());
    for (i, mu) in spectrum.eigenvalues().iter().enumerate() {
        report.set_f64(format!("spectrum.mu.{}", i + 1), *mu);
    }
    report.set_f64("spectrum.max_residual", spectrum.max_residual());
    report.set_f64("spectrum.max_orthogonality_error", spectrum.max_orthogonality_error());
    files.write(SPECTRUM_FILE, &spectrum.to_text())?;
    report.set("artifacts.spectrum", SPECTRUM_FILE);
    clock.lap("spectrum");

    let mut status = RunStatus::Ok;
    if cfg.scenario != Scenario::SpectrumOnly {
        let nl = cfg.build_nonlinearity()?;
        let audit_opts = AuditOptions {
            u_max: cfg.audit.u_max,
            n_samples: cfg.audit.n_samples,
            growth_exponent: cfg.audit.growth_exponent,
            growth_convention: cfg.audit.growth_convention,
        };
        let hyp = audit(&nl, Some(&spectrum), Some(&mesh), &audit_opts)?;
        write_audit(&mut report, &hyp);
        clock.lap("audit");

        if cfg.scenario != Scenario::AuditOnly {
            let ctx = EnergyContext::new(&mesh, &ops, &spectrum, nl)?;
            let solutions = run_scenario(cfg, &ctx, &hyp, &mut report)?;
            clock.lap("finders");
            for (i, (label, cp)) in solutions.iter().enumerate() {
                if !write_solution(&mut report, &files, &ctx, i + 1, label, cp, cfg.solver.tol)? {
                    status = RunStatus::Incomplete;
                }
            }
            report.set("solution.count", solutions.len());
            write_distances(&mut report, &ctx, &solutions)?;
            summarize(cfg.scenario, &mut report, &ctx, &solutions)?;
        }
    }

    report.set("status", status.name());
    for (name, secs) in &clock.laps {
        report.set_f64(format!("timing.{name}_seconds"), *secs);
    }
    report.set_f64("timing.total_seconds", total.elapsed().as_secs_f64());
    let report_path = dir.join(REPORT_FILE);
    report.save(&report_path)?;
    Ok(RunOutcome { report, report_path, status })
}

fn write_audit(report: &mut RunReport, hyp: &HypothesisAudit) {
    report.set("audit.label", &hyp.label);
    report.set_f64("audit.u_max", hyp.u_max);
    report.set("audit.n_samples", hyp.n_samples);
    report.set("audit.growth_convention", hyp.growth_convention);
    for e in &hyp.entries {
        let key = e.condition.key();
        report.set(format!("audit.{key}.verdict"), e.verdict.name());
        report.set(format!("audit.{key}.witness"), &e.witness);
        if !e.note.is_empty() {
            report.set(format!("audit.{key}.note"), &e.note);
        }
    }
}

/// `s·φ₁ + w·φ₂`.
fn start_point(ctx: &EnergyContext, s: f64, w: f64) -> Vec<f64> {
    let spec = ctx.spectrum();
    spec.phi(1).iter().zip(spec.phi(2)).map(|(a, b)| s * a + w * b).collect()
}

type Labelled = (&'static str, CriticalPoint);

fn run_scenario(
    cfg: &RunConfig,
    ctx: &EnergyContext,
    hyp: &HypothesisAudit,
    report: &mut RunReport,
) -> Result<Vec<Labelled>> {
    let opts = SolverOptions { tol: cfg.solver.tol, max_iters: cfg.solver.max_iters };
    let probe = ProbeOptions { samples: cfg.probe.samples, seed: cfg.seed };
    let (s, w) = (cfg.start.phi1.abs(), cfg.start.phi2);
    match cfg.scenario {
        Scenario::Thm1 => {
            let u0 = start_point(ctx, cfg.start.phi1, w);
            Ok(vec![("u_min", minimize_global(ctx, &u0, &opts)?)])
        }
        Scenario::Thm2 => {
            // BH2 amplitudes give starting points inside the two negative wells
            let (a_minus, a_plus) = hyp.bh2_amplitudes().ok_or_else(|| {
                Error::param(MODULE, "thm2 needs a nonlinearity satisfying BH2 (no amplitudes a- < 0 < a+ found)")
            })?;
            report.set_f64("summary.thm2.a_minus", a_minus);
            report.set_f64("summary.thm2.a_plus", a_plus);
            let mp = probe_mountain_pass_geometry(ctx, &SPHERE_RADII, &ray_grid(), &probe)?;
            write_mountain_pass_probe(report, &mp);
            let e: Vec<f64> = ctx.spectrum().phi(1).iter().map(|p| a_plus * p).collect();
            let up = start_point(ctx, a_plus, w);
            let um = start_point(ctx, a_minus, w);
            let (plus, minus, pass) = std::thread::scope(|sc| {
                let plus = sc.spawn(|| minimize_halfspace(ctx, HalfSpaceConstraint::Plus, &up, &opts));
                let minus = sc.spawn(|| minimize_halfspace(ctx, HalfSpaceConstraint::Minus, &um, &opts));
                let pass = mountain_pass(ctx, &e, cfg.solver.n_path, &opts);
                (plus.join().expect("finder thread"), minus.join().expect("finder thread"), pass)
            });
            Ok(vec![("u_plus", plus?), ("u_minus", minus?), ("u_1", pass?)])
        }
        Scenario::Thm3Probe => {
            let sp = probe_saddle_geometry(ctx, &ray_grid(), &COMPLEMENT_NORMS, &probe)?;
            write_saddle_probe(report, ctx, &sp);
            halfspace_pair(ctx, s, w, &opts)
        }
        Scenario::Thm4 => {
            let ll = probe_local_linking(ctx, &LINKING_DELTAS, &probe)?;
            for (i, row) in ll.rows.iter().enumerate() {
                report.set(
                    format!("probe.linking.{}", i + 1),
                    format!("{:?},{},{}", row.delta, row.complement_violations, row.eigenspace_violations),
                );
            }
            match ll.largest_clean_delta {
                Some(d) => report.set_f64("probe.linking.largest_clean_delta", d),
                None => report.set("probe.linking.largest_clean_delta", "none"),
            }
            halfspace_pair(ctx, s, w, &opts)
        }
        Scenario::SpectrumOnly | Scenario::AuditOnly => Ok(Vec::new()),
    }
}

fn halfspace_pair(ctx: &EnergyContext, s: f64, w: f64, opts: &SolverOptions) -> Result<Vec<Labelled>> {
    let up = start_point(ctx, s, w);
    let um = start_point(ctx, -s, w);
    let (plus, minus) = std::thread::scope(|sc| {
        let plus = sc.spawn(|| minimize_halfspace(ctx, HalfSpaceConstraint::Plus, &up, opts));
        let minus = minimize_halfspace(ctx, HalfSpaceConstraint::Minus, &um, opts);
        (plus.join().expect("finder thread"), minus)
    });
    Ok(vec![("u_plus", plus?), ("u_minus", minus?)])
}

fn pairs(rows: &[(f64, f64)]) -> String {
    rows.iter().map(|(a, b)| format!("{a:?}:{b:?}")).collect::<Vec<_>>().join(";")
}

fn write_mountain_pass_probe(report: &mut RunReport, mp: &crate::critical::MountainPassProbe) {
    report.set("probe.mountain_pass.sphere", pairs(&mp.sphere));
    report.set("probe.mountain_pass.ray", pairs(&mp.ray));
    match &mp.certificate {
        Some(c) => report.set(
            "probe.mountain_pass.certificate",
            format!("alpha={:?},rho={:?},t={:?},J_e={:?}", c.alpha, c.rho, c.t, c.j_e),
        ),
        None => report.set("probe.mountain_pass.certificate", "none"),
    }
}

fn write_saddle_probe(report: &mut RunReport, ctx: &EnergyContext, sp: &crate::critical::SaddleProbe) {
    report.set("probe.saddle.ray", pairs(&sp.ray));
    report.set_f64("probe.saddle.max_ray", sp.max_ray);
    match ctx.nonlinearity().asymptotics().potential_bound {
        Some(fb) => {
            let bound = fb * ctx.mesh().boundary_length();
            report.set_f64("probe.saddle.ray_bound", bound);
            report.set("probe.saddle.ray_bounded", sp.max_ray <= bound + 1e-8);
        }
        None => report.set("probe.saddle.ray_bound", "none"),
    }
    report.set("probe.saddle.complement", pairs(&sp.complement));
    let increasing = sp.complement.windows(2).all(|w| w[1].1 >= w[0].1);
    report.set("probe.saddle.complement_increasing", increasing);
}

/// Writes one solution block and its sidecar files. Returns whether the
/// solution is converged and passes re-verification.
fn write_solution(
    report: &mut RunReport,
    files: &Artifacts,
    ctx: &EnergyContext,
    i: usize,
    label: &str,
    cp: &CriticalPoint,
    tol: f64,
) -> Result<bool> {
    let p = format!("solution.{i}");
    let u = cp.u.coefficients();
    let morse = cp.morse.expect("finders attach a Morse index");
    // re-verification from the stored coefficients
    let grad = norm2(&ctx.grad_j(u)?);
    let reverified = grad * (1.0 + ctx.c_norm(u)?);
    let verified = cp.converged && !cp.constraint_active && reverified <= tol;
    report.set(format!("{p}.label"), label);
    report.set(format!("{p}.finder"), cp.finder.name());
    report.set_f64(format!("{p}.J"), cp.j_value);
    report.set_f64(format!("{p}.grad_norm"), cp.grad_norm);
    report.set_f64(format!("{p}.cerami_metric"), cp.cerami_metric);
    report.set(format!("{p}.converged"), cp.converged);
    report.set(format!("{p}.iterations"), cp.iterations);
    report.set(format!("{p}.constraint_active"), cp.constraint_active);
    report.set(format!("{p}.morse.negatives"), morse.negatives);
    report.set(format!("{p}.morse.near_zeros"), morse.near_zeros);
    report.set_f64(format!("{p}.t_coefficient"), decompose(u, ctx.spectrum())?.t);
    report.set_f64(format!("{p}.boundary_norm"), ctx.boundary_norm(u)?);
    report.set_f64(format!("{p}.tol"), tol);
    report.set_f64(format!("{p}.reverified_grad_norm"), grad);
    report.set_f64(format!("{p}.reverified_cerami_metric"), reverified);
    report.set(format!("{p}.verified"), verified);

    let mut text = format!("{FUNCTION_HEADER}\n{}\n", u.len());
    for c in u {
        let _ = writeln!(text, "{c:?}");
    }
    let name = format!("solution_{i}.txt");
    files.write(&name, &text)?;
    report.set(format!("{p}.file"), name);
    let name = format!("solution_{i}_log.csv");
    files.write(&name, &iterate_log_csv(&cp.iterate_log))?;
    report.set(format!("{p}.log"), name);
    if !cp.path_profile.is_empty() {
        let mut csv = String::from("s,J\n");
        for (s, j) in &cp.path_profile {
            let _ = writeln!(csv, "{s:e},{j:e}");
        }
        let name = format!("solution_{i}_path.csv");
        files.write(&name, &csv)?;
        report.set(format!("{p}.path_profile"), name);
    }
    if !verified {
        log::warn!("{label}: converged={} constraint_active={} residual={reverified:e}", cp.converged, cp.constraint_active);
    }
    Ok(verified)
}

fn write_distances(report: &mut RunReport, ctx: &EnergyContext, sols: &[Labelled]) -> Result<()> {
    for i in 0..sols.len() {
        for j in i + 1..sols.len() {
            let d: Vec<f64> =
                sols[i].1.u.coefficients().iter().zip(sols[j].1.u.coefficients()).map(|(a, b)| a - b).collect();
            report.set_f64(format!("distance.{}.{}", i + 1, j + 1), ctx.boundary_norm(&d)?);
        }
    }
    Ok(())
}

fn summarize(scenario: Scenario, report: &mut RunReport, ctx: &EnergyContext, sols: &[Labelled]) -> Result<()> {
    let mut min_distance = f64::INFINITY;
    for i in 0..sols.len() {
        for j in i + 1..sols.len() {
            min_distance = min_distance.min(report.get_f64(&format!("distance.{}.{}", i + 1, j + 1))?);
        }
    }
    let signs: String = sols.iter().map(|(_, cp)| if cp.j_value < 0.0 { '-' } else { '+' }).collect();
    let morse: Vec<String> = sols.iter().map(|(_, cp)| cp.morse.map_or(0, |m| m.negatives).to_string()).collect();
    report.set("summary.sign_pattern", &signs);
    report.set("summary.morse_pattern", morse.join(","));
    if sols.len() > 1 {
        report.set_f64("summary.min_distance", min_distance);
    }
    let nontrivial = sols
        .iter()
        .map(|(_, cp)| ctx.boundary_norm(cp.u.coefficients()).map(|b| b > TRIVIAL_TOL && cp.converged))
        .collect::<Result<Vec<bool>>>()?;
    report.set("summary.nontrivial_converged", nontrivial.iter().filter(|&&b| b).count());
    match scenario {
        Scenario::Thm1 => {
            report.set("summary.thm1.negative_energy", sols[0].1.j_value < 0.0);
        }
        Scenario::Thm2 => {
            let morse_ok = sols[0].1.morse.is_some_and(|m| m.negatives == 0)
                && sols[1].1.morse.is_some_and(|m| m.negatives == 0)
                && sols[2].1.morse.is_some_and(|m| m.negatives >= 1);
            report.set("summary.thm2.sign_pattern_ok", signs == "--+");
            report.set("summary.thm2.distinct", min_distance > DISTINCT_TOL);
            report.set("summary.thm2.morse_ok", morse_ok);
        }
        Scenario::Thm3Probe | Scenario::Thm4 => {
            report.set("summary.distinct", min_distance > DISTINCT_TOL);
        }
        Scenario::SpectrumOnly | Scenario::AuditOnly => {}
    }
    Ok(())
}

/// Reads a `steklov-function v1` sidecar.
pub fn load_function(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    if lines.next().map(|(_, l)| l.trim()) != Some(FUNCTION_HEADER) {
        return Err(Error::Parse { line: 1, detail: format!("expected `{FUNCTION_HEADER}`") });
    }
    let n: usize = lines
        .next()
        .and_then(|(_, l)| l.trim().parse().ok())
        .ok_or_else(|| Error::Parse { line: 2, detail: "expected a length".into() })?;
    let values = lines
        .map(|(i, l)| l.trim().parse::<f64>().map_err(|_| Error::Parse { line: i + 1, detail: format!("bad value `{l}`") }))
        .collect::<Result<Vec<f64>>>()?;
    if values.len() != n {
        return Err(Error::Parse { line: values.len() + 2, detail: format!("expected {n} values, got {}", values.len()) });
    }
    Ok(values)
}

/// Spectrum read back from a run directory.
pub fn spectrum_from_report(report: &RunReport) -> Result<Vec<f64>> {
    let k = report.get_usize("spectrum.k")?;
    (1..=k).map(|i| report.get_f64(&format!("spectrum.mu.{i}"))).collect()
}
