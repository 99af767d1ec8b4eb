use super::{CriticalPoint, Finder, HalfSpaceConstraint, SolverOptions, ARMIJO, MIN_STEP, MODULE};
use crate::error::{check_dim, Error, Result};
use crate::functional::{norm2, EnergyContext};
use crate::mesh::DiscreteFunction;
use crate::steklov::{axpy, dot};

use super::morse::morse_index;

/// Preconditioned steepest descent on `J` with Armijo backtracking.
///
/// Directions are `−(A+C)⁻¹J′(u)`; the stopping test uses the Euclidean
/// Cerami metric. Hitting `max_iters` returns a point flagged non-converged.
pub fn minimize_global(ctx: &EnergyContext, u0: &[f64], opts: &SolverOptions) -> Result<CriticalPoint> {
    descend(ctx, u0, opts, None)
}

/// Projected descent over `A±`: after every step the `φ₁` coefficient is
/// clamped to the feasible sign.
pub fn minimize_halfspace(
    ctx: &EnergyContext,
    constraint: HalfSpaceConstraint,
    u0: &[f64],
    opts: &SolverOptions,
) -> Result<CriticalPoint> {
    descend(ctx, u0, opts, Some(constraint))
}

fn check_options(opts: &SolverOptions) -> Result<()> {
    if !(opts.tol > 0.0) || !opts.tol.is_finite() {
        return Err(Error::param(MODULE, format!("tolerance must be positive, got {}", opts.tol)));
    }
    Ok(())
}

/// Relative `φ₁` curvature treated as zero.
const FLAT_CURVATURE: f64 = 1e-10;

struct Face {
    constraint: HalfSpaceConstraint,
}

impl Face {
    /// Clamps `t` to the feasible sign; reports whether the clamp fired.
    fn project(&self, ctx: &EnergyContext, u: &mut [f64]) -> bool {
        let t = dot(ctx.spectrum().weighted_phi(1), u);
        if self.constraint.is_feasible(t) {
            return false;
        }
        axpy(-t, ctx.spectrum().phi(1), u);
        true
    }
}

/// Armijo search along `d` from `u`, starting from twice the previous step
/// (or from exactly `start` when given).
#[allow(clippy::too_many_arguments)]
fn line_search(
    ctx: &EnergyContext,
    u: &[f64],
    g: &[f64],
    d: &[f64],
    step: &mut f64,
    start: Option<f64>,
    cap: f64,
    face: Option<&Face>,
) -> Result<Option<(Vec<f64>, bool)>> {
    *step = start.unwrap_or(2.0 * *step).min(cap);
    while *step >= MIN_STEP {
        let mut trial = u.to_vec();
        axpy(*step, d, &mut trial);
        let clamped = face.is_some_and(|f| f.project(ctx, &mut trial));
        let moved: Vec<f64> = trial.iter().zip(u).map(|(a, b)| a - b).collect();
        let predicted = dot(g, &moved);
        if predicted < 0.0 && ctx.energy_difference(u, &moved)? <= ARMIJO * predicted {
            return Ok(Some((trial, clamped)));
        }
        *step *= 0.5;
    }
    *step = 1.0;
    Ok(None)
}

/// Block descent. Each iteration takes
///
/// * a preconditioned step `−(A+C)⁻¹J′(u)` with its `φ₁` part removed, and
/// * a step along `±φ₁`, the kernel of the quadratic part: Newton in `t`
///   when `φ₁ᵀJ″(u)φ₁ > 0`, otherwise a growing Armijo step.
///
/// The split matters because the preconditioned gradient sees curvature of
/// order one across the complement but only `f_u` along `φ₁`: a shared step
/// length either crawls along the valley or oscillates across it.
fn descend(
    ctx: &EnergyContext,
    u0: &[f64],
    opts: &SolverOptions,
    constraint: Option<HalfSpaceConstraint>,
) -> Result<CriticalPoint> {
    check_options(opts)?;
    check_dim(MODULE, ctx.dim(), u0.len())?;
    let phi = ctx.spectrum().phi(1);
    let normal = ctx.spectrum().weighted_phi(1);
    let normal_sq = dot(normal, normal);
    let face = constraint.map(|constraint| Face { constraint });
    let finder = constraint.map_or(Finder::GlobalMin, |c| c.finder());

    let mut u = u0.to_vec();
    if let Some(f) = &face {
        f.project(ctx, &mut u);
    }
    let mut log = Vec::new();
    let (mut alpha, mut beta): (f64, f64) = (1.0, 1.0);
    let mut converged = false;
    let mut stationarity;
    let mut active;
    let mut step = 0;
    loop {
        let g = ctx.grad_j(&u)?;
        let slope_t = dot(&g, phi);
        let t = dot(normal, &u);
        // on the face with descent pointing out of A±: measure the KKT residual
        active = face.as_ref().is_some_and(|f| {
            t.abs() <= 1e-12 * (1.0 + norm2(&u)) && !f.constraint.is_feasible(-slope_t)
        });
        stationarity = if active {
            let lambda = dot(&g, normal) / normal_sq;
            let mut r = g.clone();
            axpy(-lambda, normal, &mut r);
            norm2(&r)
        } else {
            norm2(&g)
        };
        let record = ctx.record_from(step, &u, ctx.eval_j(&u)?, norm2(&g))?;
        log.push(record);
        if stationarity * (1.0 + record.cerami.u_norm) <= opts.tol {
            converged = true;
            break;
        }
        if step >= opts.max_iters {
            break;
        }

        let mut d = ctx.riesz(&g)?;
        d.iter_mut().for_each(|x| *x = -*x);
        let dt = dot(normal, &d);
        axpy(-dt, phi, &mut d);
        let mut moved = false;
        if dot(&g, &d) < 0.0 {
            // unit cap: (A+C)⁻¹(A+C−μ₁B) has spectrum in [1 − μ₁/μ₂, 1] off φ₁,
            // so longer steps reflect the stiff modes instead of damping them
            if let Some((trial, _)) = line_search(ctx, &u, &g, &d, &mut alpha, None, 1.0, None)? {
                u = trial;
                moved = true;
            }
        }

        let g = ctx.grad_j(&u)?;
        let slope_t = dot(&g, phi);
        if slope_t != 0.0 {
            let dir: Vec<f64> = phi.iter().map(|p| -slope_t.signum() * p).collect();
            let curvature = dot(phi, &ctx.hess_apply(&u, phi)?);
            // φ₁ᵀ(A+C)φ₁ = μ₁ sets the scale; below it the ray is flat to rounding
            let flat = curvature.abs() <= FLAT_CURVATURE * ctx.mu1();
            let newton = (curvature > 0.0).then(|| slope_t.abs() / curvature);
            // at most doubling |t|: far out the rounding of φ₁ᵀ(A+C−μ₁B)φ₁ takes over
            let cap = dot(normal, &u).abs().max(1.0);
            let found =
                if flat { None } else { line_search(ctx, &u, &g, &dir, &mut beta, newton, cap, face.as_ref())? };
            if let Some((trial, _)) = found {
                u = trial;
                moved = true;
            }
        }
        if !moved {
            log::debug!("{}: line searches stalled at step {step}", finder.name());
            break;
        }
        step += 1;
    }

    let last = *log.last().expect("log holds the initial iterate");
    let u = DiscreteFunction::new(ctx.mesh(), u)?;
    let morse = morse_index(ctx, u.coefficients())?;
    Ok(CriticalPoint {
        u,
        j_value: last.cerami.j_value,
        grad_norm: stationarity,
        cerami_metric: stationarity * (1.0 + last.cerami.u_norm),
        finder,
        converged,
        iterations: step,
        constraint_active: active,
        morse: Some(morse),
        iterate_log: log,
        path_profile: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{CoefficientField, OperatorTriple};
    use crate::mesh::{generate_disk, NodeCap};
    use crate::nonlinearity::{bounded_gaussian, quartic_well, zero, Nonlinearity};
    use crate::steklov::solve_steklov;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(nl: Nonlinearity, h: f64) -> EnergyContext {
        let mesh = generate_disk(1.0, h, NodeCap::default()).unwrap();
        let ops = OperatorTriple::assemble(&mesh, &CoefficientField::constant(1.0)).unwrap();
        let spec = solve_steklov(&mesh, &ops, 4).unwrap();
        EnergyContext::new(&mesh, &ops, &spec, nl).unwrap()
    }

    fn combo(ctx: &EnergyContext, a: f64, b: f64) -> Vec<f64> {
        let mut u = vec![0.0; ctx.dim()];
        axpy(a, ctx.spectrum().phi(1), &mut u);
        axpy(b, ctx.spectrum().phi(2), &mut u);
        u
    }

    fn assert_monotone(cp: &CriticalPoint) {
        for w in cp.iterate_log.windows(2) {
            assert!(w[1].cerami.j_value <= w[0].cerami.j_value + 1e-12, "{} > {}", w[1].cerami.j_value, w[0].cerami.j_value);
        }
    }

    #[test]
    fn flat_valley_without_nonlinearity() {
        let ctx = setup(zero(), 0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u0: Vec<f64> = (0..ctx.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cp = minimize_global(&ctx, &u0, &SolverOptions { tol: 1e-8, max_iters: 2000 }).unwrap();
        assert!(cp.converged);
        assert!(cp.grad_norm <= 1e-8);
        assert!(cp.j_value.abs() < 1e-10);
        // the limit lies on the φ₁ ray
        let last = cp.iterate_log.last().unwrap();
        assert!(last.w_norm < 1e-6 * (1.0 + last.t_coefficient.abs()));
        assert_monotone(&cp);
    }

    #[test]
    fn bounded_gaussian_minimum_is_negative() {
        let ctx = setup(bounded_gaussian(1.0), 0.2);
        let u0 = combo(&ctx, 0.5, 0.0);
        let cp = minimize_global(&ctx, &u0, &SolverOptions { tol: 1e-6, max_iters: 5000 }).unwrap();
        assert!(cp.converged, "cerami {}", cp.cerami_metric);
        assert!(cp.j_value < ctx.eval_j(&u0).unwrap());
        assert!(cp.j_value < 0.0);
        assert_eq!(cp.morse.unwrap().negatives, 0);
        assert_monotone(&cp);
    }

    #[test]
    fn iteration_cap_flags_non_convergence() {
        let ctx = setup(quartic_well(0.1), 0.2);
        let u0 = combo(&ctx, 5.0, 3.0);
        let cp = minimize_global(&ctx, &u0, &SolverOptions { tol: 1e-8, max_iters: 1 }).unwrap();
        assert!(!cp.converged);
        assert_eq!(cp.iterations, 1);
        assert!(minimize_global(&ctx, &u0, &SolverOptions { tol: 0.0, max_iters: 1 }).is_err());
    }

    #[test]
    fn half_space_minimizers_are_distinct() {
        let ctx = setup(quartic_well(0.1), 0.2);
        let opts = SolverOptions { tol: 1e-8, max_iters: 5000 };
        let plus = minimize_halfspace(&ctx, HalfSpaceConstraint::Plus, &combo(&ctx, 3.0, 0.1), &opts).unwrap();
        let minus = minimize_halfspace(&ctx, HalfSpaceConstraint::Minus, &combo(&ctx, -3.0, 0.1), &opts).unwrap();
        for cp in [&plus, &minus] {
            assert!(cp.converged && !cp.constraint_active);
            assert!(cp.j_value < 0.0);
            assert_eq!(cp.morse.unwrap().negatives, 0);
            assert_monotone(cp);
        }
        assert!(plus.iterate_log.iter().all(|r| r.t_coefficient >= -1e-12));
        assert!(minus.iterate_log.iter().all(|r| r.t_coefficient <= 1e-12));
        let diff: Vec<f64> =
            plus.u.coefficients().iter().zip(minus.u.coefficients()).map(|(a, b)| a - b).collect();
        assert!(ctx.boundary_norm(&diff).unwrap() > 0.1);
    }

    #[test]
    fn infeasible_start_is_projected() {
        let ctx = setup(zero(), 0.2);
        let u0 = combo(&ctx, -1.0, 0.5);
        let cp = minimize_halfspace(&ctx, HalfSpaceConstraint::Plus, &u0, &SolverOptions::default()).unwrap();
        assert!(cp.iterate_log[0].t_coefficient.abs() < 1e-12);
        assert!(cp.iterate_log.iter().all(|r| r.t_coefficient >= -1e-12));
        assert!(cp.converged);
        assert!(cp.j_value.abs() < 1e-10);
    }
}
