use super::morse::morse_index;
use super::{CriticalPoint, Finder, SolverOptions, ARMIJO, MAX_STEP, MIN_STEP, MODULE};
use crate::error::{check_dim, Error, Result};
use crate::functional::{norm2, EnergyContext};
use crate::mesh::DiscreteFunction;
use crate::steklov::{axpy, dot};

/// Bisection steps used to locate the maximum of `J` along a path segment.
const REFINE_STEPS: usize = 60;

/// Path-deformation mountain pass between `0` and `e`.
///
/// The segment `0 → e` is discretized into `n_path` points. Each iteration
/// locates the path maximizer, sharpens it along the neighbouring segments,
/// pushes it down the preconditioned gradient with the path tangent removed,
/// and re-spaces both halves of the path by arc length. Endpoints stay fixed.
pub fn mountain_pass(ctx: &EnergyContext, e: &[f64], n_path: usize, opts: &SolverOptions) -> Result<CriticalPoint> {
    check_dim(MODULE, ctx.dim(), e.len())?;
    if !(opts.tol > 0.0) {
        return Err(Error::param(MODULE, format!("tolerance must be positive, got {}", opts.tol)));
    }
    if n_path < 3 {
        return Err(Error::param(MODULE, format!("path needs at least 3 points, got {n_path}")));
    }
    let e_norm = ctx.c_norm(e)?;
    if e_norm == 0.0 {
        return Err(Error::param(MODULE, "endpoint e must be nonzero"));
    }
    let je = ctx.eval_j(e)?;
    // J(e) ≈ 0 is let through: flat geometry is reported by the path itself
    if je > 1e-10 * (1.0 + e_norm * e_norm) {
        return Err(Error::param(MODULE, format!("endpoint must satisfy J(e) < 0, got J(e) = {je}")));
    }

    let mut path: Vec<Vec<f64>> = (0..n_path)
        .map(|i| {
            let s = i as f64 / (n_path - 1) as f64;
            e.iter().map(|x| s * x).collect()
        })
        .collect();
    let mut jv = path.iter().map(|p| ctx.eval_j(p)).collect::<Result<Vec<f64>>>()?;
    let mut log = Vec::new();
    let mut alpha: f64 = 1.0;
    let mut converged = false;
    let mut step = 0;
    let (mut k, mut grad_norm, mut cerami);
    loop {
        k = peak(ctx, &mut path, &mut jv)?;
        let u = &path[k];
        let g = ctx.grad_j(u)?;
        let record = ctx.record_from(step, u, jv[k], norm2(&g))?;
        log.push(record);
        grad_norm = record.cerami.grad_norm;
        cerami = record.cerami.cerami_metric;
        if cerami <= opts.tol {
            converged = true;
            break;
        }
        if step >= opts.max_iters {
            break;
        }

        // d = −K⁻¹g + (τᵀg / τᵀKτ) τ is K-orthogonal to the tangent τ
        let tangent: Vec<f64> = path[k + 1].iter().zip(&path[k - 1]).map(|(a, b)| a - b).collect();
        let k_tangent = ctx.ops().energy_operator().apply(&tangent);
        let mut d = ctx.riesz(&g)?;
        d.iter_mut().for_each(|x| *x = -*x);
        let tkt = dot(&tangent, &k_tangent);
        if tkt > 0.0 {
            axpy(dot(&tangent, &g) / tkt, &tangent, &mut d);
        }
        let slope = dot(&g, &d);
        if slope < 0.0 {
            alpha = (2.0 * alpha).min(MAX_STEP);
            while alpha >= MIN_STEP {
                let s: Vec<f64> = d.iter().map(|x| alpha * x).collect();
                if ctx.energy_difference(u, &s)? <= ARMIJO * alpha * slope {
                    let trial: Vec<f64> = u.iter().zip(&s).map(|(a, b)| a + b).collect();
                    jv[k] = ctx.eval_j(&trial)?;
                    path[k] = trial;
                    break;
                }
                alpha *= 0.5;
            }
            if alpha < MIN_STEP {
                log::debug!("mountain pass: line search stalled at step {step}");
                alpha = 1.0;
            }
        }
        redistribute(ctx, &mut path, k)?;
        for i in 1..n_path - 1 {
            if i != k {
                jv[i] = ctx.eval_j(&path[i])?;
            }
        }
        step += 1;
    }

    let lengths = segment_lengths(ctx, &path)?;
    let total: f64 = lengths.iter().sum();
    let mut s = 0.0;
    let mut profile = vec![(0.0, jv[0])];
    for (i, l) in lengths.iter().enumerate() {
        s += l;
        profile.push((if total > 0.0 { s / total } else { 0.0 }, jv[i + 1]));
    }
    let u = DiscreteFunction::new(ctx.mesh(), path[k].clone())?;
    let morse = morse_index(ctx, u.coefficients())?;
    Ok(CriticalPoint {
        u,
        j_value: jv[k],
        grad_norm,
        cerami_metric: cerami,
        finder: Finder::MountainPass,
        converged,
        iterations: step,
        constraint_active: false,
        morse: Some(morse),
        iterate_log: log,
        path_profile: profile,
    })
}

/// Index of the interior path maximum after sharpening it along the two
/// adjacent segments. Fails if the maximum sits on an endpoint.
fn peak(ctx: &EnergyContext, path: &mut [Vec<f64>], jv: &mut [f64]) -> Result<usize> {
    let n = path.len();
    let mut k = 0;
    for i in 1..n {
        if jv[i] > jv[k] {
            k = i;
        }
    }
    let ends = jv[0].max(jv[n - 1]);
    let margin = 1e-12 * (1.0 + jv.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    if k == 0 || k == n - 1 || jv[k] <= ends + margin {
        let endpoint = if jv[0] >= jv[n - 1] { "origin" } else { "e" };
        return Err(Error::Geometry { endpoint });
    }
    for nb in [k + 1, k - 1] {
        let dir: Vec<f64> = path[nb].iter().zip(&path[k]).map(|(a, b)| a - b).collect();
        let slope_at = |s: f64| -> Result<f64> {
            let mut p = path[k].clone();
            axpy(s, &dir, &mut p);
            Ok(dot(&ctx.grad_j(&p)?, &dir))
        };
        if slope_at(0.0)? <= 0.0 {
            continue;
        }
        // J rises leaving path[k] towards path[nb]; the segment maximum is the
        // last sign change of the directional derivative on [0, 1]
        let (mut lo, mut hi) = (0.0, 1.0);
        if slope_at(1.0)? > 0.0 {
            lo = 1.0;
        } else {
            for _ in 0..REFINE_STEPS {
                let mid = 0.5 * (lo + hi);
                if slope_at(mid)? > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        let mut p = path[k].clone();
        axpy(lo, &dir, &mut p);
        let jp = ctx.eval_j(&p)?;
        if jp > jv[k] && lo < 1.0 {
            path[k] = p;
            jv[k] = jp;
            break;
        }
    }
    Ok(k)
}

fn segment_lengths(ctx: &EnergyContext, path: &[Vec<f64>]) -> Result<Vec<f64>> {
    path.windows(2)
        .map(|w| {
            let d: Vec<f64> = w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect();
            ctx.c_norm(&d)
        })
        .collect()
}

/// Re-spaces `path[0..=k]` and `path[k..]` uniformly in c-norm arc length.
fn redistribute(ctx: &EnergyContext, path: &mut [Vec<f64>], k: usize) -> Result<()> {
    let n = path.len();
    for (lo, hi) in [(0, k), (k, n - 1)] {
        if hi - lo < 2 {
            continue;
        }
        let part: Vec<Vec<f64>> = path[lo..=hi].to_vec();
        let lengths = segment_lengths(ctx, &part)?;
        let total: f64 = lengths.iter().sum();
        if !(total > 0.0) {
            continue;
        }
        let mut cum = vec![0.0];
        for l in &lengths {
            cum.push(cum.last().unwrap() + l);
        }
        let m = hi - lo;
        let mut seg = 0;
        for j in 1..m {
            let target = total * j as f64 / m as f64;
            while seg + 1 < lengths.len() && cum[seg + 1] < target {
                seg += 1;
            }
            let s = if lengths[seg] > 0.0 { ((target - cum[seg]) / lengths[seg]).clamp(0.0, 1.0) } else { 0.0 };
            path[lo + j] = part[seg].iter().zip(&part[seg + 1]).map(|(a, b)| a + s * (b - a)).collect();
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{CoefficientField, OperatorTriple};
    use crate::mesh::{generate_disk, NodeCap};
    use crate::nonlinearity::{quartic_well, zero, Nonlinearity};
    use crate::steklov::solve_steklov;

    fn setup(nl: Nonlinearity) -> EnergyContext {
        let mesh = generate_disk(1.0, 0.2, NodeCap::default()).unwrap();
        let ops = OperatorTriple::assemble(&mesh, &CoefficientField::constant(1.0)).unwrap();
        let spec = solve_steklov(&mesh, &ops, 3).unwrap();
        EnergyContext::new(&mesh, &ops, &spec, nl).unwrap()
    }

    fn ray(ctx: &EnergyContext, t: f64) -> Vec<f64> {
        ctx.spectrum().phi(1).iter().map(|p| t * p).collect()
    }

    #[test]
    fn saddle_of_quartic_well() {
        let ctx = setup(quartic_well(0.1));
        // boundary trace of φ₁ is about 1/√(2π); the wells sit near |u| ≈ 1.12
        let e = ray(&ctx, 2.8);
        assert!(ctx.eval_j(&e).unwrap() < 0.0);
        let cp = mountain_pass(&ctx, &e, 21, &SolverOptions { tol: 1e-8, max_iters: 2000 }).unwrap();
        assert!(cp.converged, "cerami {} after {}", cp.cerami_metric, cp.iterations);
        assert!(cp.j_value > 0.0);
        assert!(cp.morse.unwrap().negatives >= 1);
        let interior_max = cp.path_profile[1..cp.path_profile.len() - 1].iter().map(|p| p.1).fold(f64::MIN, f64::max);
        assert!(interior_max > cp.path_profile[0].1 && interior_max > cp.path_profile.last().unwrap().1);
    }

    #[test]
    fn flat_geometry_fails() {
        let ctx = setup(zero());
        let err = mountain_pass(&ctx, &ray(&ctx, 2.0), 11, &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Geometry { .. }), "{err:?}");
    }

    #[test]
    fn positive_endpoint_rejected() {
        let ctx = setup(quartic_well(0.1));
        let e = ray(&ctx, 0.5);
        assert!(ctx.eval_j(&e).unwrap() > 0.0);
        assert!(matches!(mountain_pass(&ctx, &e, 11, &SolverOptions::default()), Err(Error::Parameter { .. })));
        assert!(mountain_pass(&ctx, &ray(&ctx, 2.8), 2, &SolverOptions::default()).is_err());
    }
}
