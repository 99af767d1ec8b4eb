//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use steklov::assembly::{CoefficientField, OperatorTriple};
use steklov::config::RunConfig;
use steklov::critical::{
    minimize_global, probe_mountain_pass_geometry, probe_saddle_geometry, ProbeOptions, SolverOptions,
};
use steklov::functional::EnergyContext;
use steklov::mesh::{generate_disk, generate_square, refine, Mesh, NodeCap};
use steklov::nonlinearity::{bounded_gaussian, builtin, quartic_well, zero, Nonlinearity, BUILTIN_NAMES};
use steklov::report::{strip_timing, RunReport};
use steklov::run::run;
use steklov::steklov::{decompose, solve_steklov};

/// `I_n(1) = Σ_k (1/2)^{2k+n} / (k! (k+n)!)`.
fn bessel_i_at_one(n: u32) -> f64 {
    let mut term = 0.5f64.powi(n as i32) / (1..=n).map(f64::from).product::<f64>();
    let mut sum = 0.0;
    for k in 0..40u32 {
        sum += term;
        term *= 0.25 / (f64::from(k + 1) * f64::from(k + 1 + n));
    }
    sum
}

/// Steklov `μ₁` of the unit disk with `c ≡ 1`: the radial mode `I₀(r)`
/// gives `μ = I₀′(1)/I₀(1) = I₁(1)/I₀(1)`.
fn bessel_mu1() -> f64 {
    bessel_i_at_one(1) / bessel_i_at_one(0)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn context(mesh: &Mesh, nl: Nonlinearity) -> EnergyContext {
    let ops = OperatorTriple::assemble(mesh, &CoefficientField::constant(1.0)).unwrap();
    let spec = solve_steklov(mesh, &ops, 6).unwrap();
    EnergyContext::new(mesh, &ops, &spec, nl).unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let oracle = bessel_mu1();
    let mesh = generate_disk(1.0, 0.05, NodeCap::default()).unwrap();
    let fine = refine(&mesh, NodeCap::default()).unwrap();
    let err = |m: &Mesh| {
        let ops = OperatorTriple::assemble(m, &CoefficientField::constant(1.0)).unwrap();
        let mu = solve_steklov(m, &ops, 2).unwrap().mu(1);
        (mu - oracle).abs() / oracle
    };
    let (e0, e1) = (err(&mesh), err(&fine));
    let ratio = e0 / e1;
    let secs = start.elapsed().as_secs_f64();
    outcome(
        e0 < 0.02 && (3.0..=5.0).contains(&ratio) && secs < 60.0,
        format!("rel err {e0:.3e} (limit 2e-2), refined {e1:.3e}, ratio {ratio:.3} (in [3, 5]), {secs:.1} s (< 60 s)"),
    )
}

fn criterion_2() -> Outcome {
    let mesh = generate_disk(1.0, 0.1, NodeCap::default()).unwrap();
    let ops = OperatorTriple::assemble(&mesh, &CoefficientField::constant(1.0)).unwrap();
    let spec = solve_steklov(&mesh, &ops, 4).unwrap();
    let mu1 = spec.mu(1);
    let phi = spec.phi(1);
    let n = mesh.n_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut violations, mut mismatches, mut equal_count, mut near_count) = (0, 0, 0, 0);
    for i in 0..1000 {
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u: Vec<f64> = if i % 2 == 0 {
            r
        } else {
            // a·φ₁ plus a perturbation of relative c-size in [1e-9, 1e-5]
            let a: f64 = rng.random_range(0.5..5.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let s = 10f64.powf(rng.random_range(-9.0..-5.0));
            let scale = s * a.abs() * ops.c_norm(phi).unwrap() / ops.c_norm(&r).unwrap();
            phi.iter().zip(&r).map(|(p, x)| a * p + scale * x).collect()
        };
        let c2 = ops.c_norm(&u).unwrap().powi(2);
        let b2 = ops.boundary_norm(&u).unwrap().powi(2);
        if mu1 * b2 > c2 * (1.0 + 1e-10) {
            violations += 1;
        }
        let w = decompose(&u, &spec).unwrap().w;
        let fraction = ops.c_norm(&w).unwrap() / c2.sqrt();
        let equal = (c2 - mu1 * b2).abs() <= 1e-8 * c2;
        let near = fraction < 1e-3;
        equal_count += usize::from(equal);
        near_count += usize::from(near);
        if equal != near {
            mismatches += 1;
        }
    }
    outcome(
        violations == 0 && mismatches == 0 && equal_count > 0,
        format!(
            "1000 samples: {violations} inequality violations (slack 1e-10), {equal_count} equalities (1e-8), \
             {near_count} with complement fraction < 1e-3, {mismatches} mismatches"
        ),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mesh = generate_disk(1.0, 0.1, NodeCap::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let defaults: BTreeMap<&str, (&str, f64)> =
        [("quartic-well", ("delta", 0.1)), ("bounded-gaussian", ("beta", 1.0)), ("linear", ("slope", 1.0))].into();
    let (mut worst_g, mut worst_h) = (0.0f64, 0.0f64);
    let eps = 1e-5;
    for name in BUILTIN_NAMES {
        let params: BTreeMap<String, f64> = defaults.get(name).map(|(k, v)| (k.to_string(), *v)).into_iter().collect();
        let ctx = context(&mesh, builtin(name, &params).unwrap());
        let n = ctx.dim();
        for _ in 0..100 {
            let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let plus: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + eps * b).collect();
            let minus: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - eps * b).collect();
            let fd = (ctx.eval_j(&plus).unwrap() - ctx.eval_j(&minus).unwrap()) / (2.0 * eps);
            let exact = dot(&ctx.grad_j(&u).unwrap(), &v);
            worst_g = worst_g.max((fd - exact).abs() / exact.abs().max(1.0));

            let gp = ctx.grad_j(&plus).unwrap();
            let gm = ctx.grad_j(&minus).unwrap();
            let h = ctx.hess_apply(&u, &v).unwrap();
            let err: f64 = gp.iter().zip(&gm).zip(&h).map(|((a, b), c)| ((a - b) / (2.0 * eps) - c).powi(2)).sum();
            worst_h = worst_h.max(err.sqrt() / dot(&h, &h).sqrt().max(1.0));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst_g <= 1e-6 && worst_h <= 1e-5 && secs < 30.0,
        format!(
            "{} nonlinearities x 100 probes: grad rel err {worst_g:.2e} (1e-6), Hessian rel err {worst_h:.2e} (1e-5), {secs:.1} s (< 30 s)",
            BUILTIN_NAMES.len()
        ),
    )
}

/// Dense `n×n` matrix of a sparse operator, row-major.
fn dense(op: &steklov::sparse::SymmetricSparseOperator) -> Vec<Vec<f64>> {
    let n = op.dim();
    (0..n).map(|i| (0..n).map(|j| op.get(i, j)).collect()).collect()
}

/// Lower Cholesky factor of an SPD matrix.
fn cholesky(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for j in 0..n {
        let d = a[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        assert!(d > 0.0, "not positive definite");
        l[j][j] = d.sqrt();
        for i in j + 1..n {
            l[i][j] = (a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>()) / l[j][j];
        }
    }
    l
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        let diag: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum();
        if off <= 1e-30 * diag {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

/// Smallest `k` finite eigenvalues of `(A+C)x = μBx` on the full node set.
/// With `A+C = LLᵀ` the pencil becomes `L⁻¹BL⁻ᵀ y = (1/μ) y`; interior
/// modes give the zero eigenvalues.
fn dense_pencil(ops: &OperatorTriple, k: usize) -> Vec<f64> {
    let l = cholesky(&dense(&ops.energy_operator()));
    let b = dense(&ops.boundary_mass);
    let n = l.len();
    // X = L⁻¹B, then M = L⁻¹Xᵀ = L⁻¹BL⁻ᵀ
    let forward = |rhs: &[f64]| {
        let mut x = vec![0.0; n];
        for i in 0..n {
            x[i] = (rhs[i] - (0..i).map(|j| l[i][j] * x[j]).sum::<f64>()) / l[i][i];
        }
        x
    };
    let cols: Vec<Vec<f64>> = (0..n).map(|j| forward(&(0..n).map(|i| b[i][j]).collect::<Vec<_>>())).collect();
    // cols[j] = L⁻¹ B e_j, i.e. column j of X; rows of Xᵀ are these columns
    let m_cols: Vec<Vec<f64>> = (0..n).map(|i| forward(&(0..n).map(|j| cols[j][i]).collect::<Vec<_>>())).collect();
    let m: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| 0.5 * (m_cols[j][i] + m_cols[i][j])).collect()).collect();
    let mut lambdas = jacobi_eigenvalues(m);
    lambdas.sort_by(|a, b| b.total_cmp(a));
    lambdas[..k].iter().map(|l| 1.0 / l).collect()
}

fn criterion_4() -> Outcome {
    let meshes = [
        ("disk h=0.2", generate_disk(1.0, 0.2, NodeCap::default()).unwrap()),
        ("disk h=0.1", generate_disk(1.0, 0.1, NodeCap::default()).unwrap()),
        ("square h=0.1", generate_square(1.0, 0.1, NodeCap::default()).unwrap()),
    ];
    let mut worst = 0.0f64;
    let mut sizes = Vec::new();
    let mut all_small = true;
    for (name, mesh) in &meshes {
        all_small &= mesh.n_nodes() <= 500;
        sizes.push(format!("{name}: {} nodes", mesh.n_nodes()));
        for c in [CoefficientField::constant(1.0), CoefficientField::radial(0.5, 2.0)] {
            let ops = OperatorTriple::assemble(mesh, &c).unwrap();
            let schur = solve_steklov(mesh, &ops, 5).unwrap();
            let brute = dense_pencil(&ops, 5);
            for (a, b) in schur.eigenvalues().iter().zip(&brute) {
                worst = worst.max((a - b).abs() / b.abs());
            }
        }
    }
    outcome(all_small && worst <= 1e-9, format!("worst rel diff {worst:.2e} (1e-9) over {}", sizes.join(", ")))
}

fn scenario_config(text: &str, dir: &std::path::Path) -> RunConfig {
    let mut cfg = RunConfig::parse(text).unwrap();
    cfg.output_dir = dir.to_path_buf();
    cfg
}

const THM1: &str = "scenario=thm1\ndomain.shape=disk\ndomain.h=0.1\nnonlinearity.name=bounded-gaussian\nnonlinearity.beta=1\nsolver.tol=1e-6\n";
const THM2: &str = "scenario=thm2\ndomain.shape=disk\ndomain.h=0.1\nnonlinearity.name=quartic-well\nnonlinearity.delta=0.1\nsolver.tol=1e-8\nseed=7\n";

fn criterion_5() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&scenario_config(THM1, dir.path())).unwrap();
    // reread from disk so the check is on the persisted report
    let r = RunReport::load(&out.report_path).unwrap();
    let cerami = r.get_f64("solution.1.cerami_metric").unwrap();
    let reverified = r.get_f64("solution.1.reverified_cerami_metric").unwrap();
    let j = r.get_f64("solution.1.J").unwrap();
    let converged = r.get_bool("solution.1.converged").unwrap();
    let verified = r.get_bool("solution.1.verified").unwrap();
    outcome(
        converged && cerami < 1e-6 && reverified < 1e-6 && verified && j < 0.0,
        format!("converged={converged}, cerami {cerami:.2e}, re-verified {reverified:.2e} (< 1e-6), J = {j:.6}"),
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let out = run(&scenario_config(THM2, dir.path())).unwrap();
    let r = RunReport::load(&out.report_path).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let n = r.get_usize("solution.count").unwrap();
    let get = |i: usize, k: &str| r.get(&format!("solution.{i}.{k}")).unwrap().to_string();
    let converged = (1..=n).all(|i| get(i, "converged") == "true" && get(i, "verified") == "true");
    let js: Vec<f64> = (1..=n).map(|i| get(i, "J").parse().unwrap()).collect();
    let morse: Vec<usize> = (1..=n).map(|i| get(i, "morse.negatives").parse().unwrap()).collect();
    let dists: Vec<f64> = [(1, 2), (1, 3), (2, 3)].iter().map(|(a, b)| r.get_f64(&format!("distance.{a}.{b}")).unwrap()).collect();
    let pass = n == 3
        && converged
        && js[0] < 0.0
        && js[1] < 0.0
        && js[2] > 0.0
        && dists.iter().all(|d| *d > 0.1)
        && morse[0] == 0
        && morse[1] == 0
        && morse[2] >= 1
        && secs < 600.0;
    outcome(
        pass,
        format!(
            "{n} solutions, all converged: {converged}, J = ({:.5}, {:.5}, {:.5}), distances ({:.3}, {:.3}, {:.3}) (> 0.1), Morse {:?}, {secs:.1} s (< 600 s)",
            js[0], js[1], js[2], dists[0], dists[1], dists[2], morse
        ),
    )
}

fn criterion_7() -> Outcome {
    let mesh = generate_disk(1.0, 0.1, NodeCap::default()).unwrap();
    let alphas = [0.05, 0.1, 0.2, 0.3, 0.4, 0.5];
    let ts: Vec<f64> = (1..=40).map(|i| 0.25 * i as f64).collect();
    let opts = ProbeOptions { samples: 200, seed: 7 };
    let m1 = probe_mountain_pass_geometry(&context(&mesh, quartic_well(0.1)), &alphas, &ts, &opts).unwrap();
    let flat = probe_mountain_pass_geometry(&context(&mesh, zero()), &alphas, &ts, &opts).unwrap();
    let ray: Vec<f64> = (-80..=80).map(|i| 0.25 * i as f64).collect();
    let saddle = probe_saddle_geometry(&context(&mesh, bounded_gaussian(1.0)), &ray, &[1.0, 10.0], &opts).unwrap();
    // F̃ = β/2 for the bounded gaussian
    let bound = 0.5 * mesh.boundary_length();
    let pass = m1.certificate.is_some() && flat.certificate.is_none() && saddle.max_ray <= bound + 1e-8;
    let cert = m1.certificate.map_or("none".to_string(), |c| format!("alpha={}, rho={:.3e}, t={}", c.alpha, c.rho, c.t));
    outcome(
        pass,
        format!(
            "quartic-well certificate: {cert}; zero: {}; bounded-gaussian max_t J(t phi1) = {:.6} <= {bound:.6} + 1e-8",
            if flat.certificate.is_none() { "none" } else { "found" },
            saddle.max_ray
        ),
    )
}

fn criterion_8() -> Outcome {
    let mesh = generate_disk(1.0, 0.1, NodeCap::default()).unwrap();
    let ctx = context(&mesh, bounded_gaussian(1.0));
    let floor = -0.5 * mesh.boundary_length() - 1e-8;
    let n = ctx.dim();
    let phi = ctx.spectrum().phi(1).to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut lowest = f64::INFINITY;
    let mut count = 0;
    for i in 0..2000 {
        let scale = 10f64.powf(rng.random_range(-2.0..3.0));
        let u: Vec<f64> = match i % 3 {
            0 => (0..n).map(|_| scale * rng.random_range(-1.0..1.0)).collect(),
            1 => phi.iter().map(|p| scale * p * if i % 2 == 0 { 1.0 } else { -1.0 }).collect(),
            _ => {
                let w = rng.random_range(-0.1..0.1);
                phi.iter().map(|p| scale * p + w * rng.random_range(-1.0..1.0)).collect()
            }
        };
        lowest = lowest.min(ctx.eval_j(&u).unwrap());
        count += 1;
    }
    let u0: Vec<f64> = phi.iter().map(|p| 0.5 * p).collect();
    let min = minimize_global(&ctx, &u0, &SolverOptions { tol: 1e-6, max_iters: 5000 }).unwrap();
    lowest = lowest.min(min.j_value);
    for rec in &min.iterate_log {
        lowest = lowest.min(rec.cerami.j_value);
        count += 1;
    }
    outcome(lowest >= floor, format!("{count} samples incl. descent iterates: min J = {lowest:.12} >= {floor:.12}"))
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario_config(THM2, dir.path());
    let first = run(&cfg).unwrap();
    let text_a = std::fs::read_to_string(&first.report_path).unwrap();
    let second = run(&cfg).unwrap();
    let text_b = std::fs::read_to_string(&second.report_path).unwrap();
    let (a, b) = (strip_timing(&text_a), strip_timing(&text_b));
    let differing = a.lines().zip(b.lines()).filter(|(x, y)| x != y).count() + a.lines().count().abs_diff(b.lines().count());
    outcome(a == b && !a.is_empty(), format!("two thm2 runs, {} report lines compared, {differing} differ", a.lines().count()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("Steklov spectrum vs Bessel oracle", criterion_1),
        ("discrete boundary trace inequality", criterion_2),
        ("gradient and Hessian consistency", criterion_3),
        ("Schur complement vs dense pencil", criterion_4),
        ("global minimizer, bounded gaussian", criterion_5),
        ("three critical points, quartic well", criterion_6),
        ("geometry probes", criterion_7),
        ("energy lower bound, bounded gaussian", criterion_8),
        ("determinism of thm2 reports", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        failed += usize::from(!o.pass);
        println!("criterion {} {}: {name}: {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
