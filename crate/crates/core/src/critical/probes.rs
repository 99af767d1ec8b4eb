use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::functional::EnergyContext;
use crate::steklov::{axpy, dot};

use super::MODULE;

/// Smallest energy barrier accepted as a positive `ρ`.
pub const RHO_MIN: f64 = 1e-10;
/// Relative slack on the sign tests of the local-linking probe.
pub const LINKING_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeOptions {
    /// Random directions per grid value.
    pub samples: usize,
    pub seed: u64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions { samples: 200, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MountainPassCertificate {
    pub alpha: f64,
    pub rho: f64,
    /// `e = tφ₁` with `J(e) < 0` and `‖e‖_∂ = |t| > α`.
    pub t: f64,
    pub j_e: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MountainPassProbe {
    /// `(α, inf J over sampled ‖u‖_∂ = α)`.
    pub sphere: Vec<(f64, f64)>,
    /// `(t, J(tφ₁))`.
    pub ray: Vec<(f64, f64)>,
    pub certificate: Option<MountainPassCertificate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleProbe {
    pub ray: Vec<(f64, f64)>,
    pub max_ray: f64,
    /// `(r, min J over sampled w ⊥ φ₁ with ‖w‖_c = r)`.
    pub complement: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalLinkingRow {
    pub delta: f64,
    /// Samples `w ⊥ φ₁`, `‖w‖_c ≤ δ`, with `J(w) < 0`.
    pub complement_violations: usize,
    /// Samples `tφ₁`, `‖tφ₁‖_c ≤ δ`, with `J(tφ₁) > 0`.
    pub eigenspace_violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalLinkingProbe {
    pub rows: Vec<LocalLinkingRow>,
    pub largest_clean_delta: Option<f64>,
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::param(MODULE, format!("{name} grid must be non-empty and finite")));
    }
    Ok(())
}

/// A random direction: either a mixture of computed eigenfunctions or a
/// random nodal vector. With `complement` the `φ₁` part is removed.
fn random_direction(ctx: &EnergyContext, rng: &mut ChaCha8Rng, trial: usize, complement: bool) -> Vec<f64> {
    let spec = ctx.spectrum();
    let first = if complement { 2 } else { 1 };
    let mut v = vec![0.0; ctx.dim()];
    if trial % 2 == 0 && spec.k() >= first {
        for i in first..=spec.k() {
            axpy(rng.random_range(-1.0..1.0), spec.phi(i), &mut v);
        }
    } else {
        v.iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
    }
    if complement {
        let t = dot(spec.weighted_phi(1), &v);
        axpy(-t, spec.phi(1), &mut v);
    }
    v
}

fn scaled(v: &[f64], s: f64) -> Vec<f64> {
    v.iter().map(|x| s * x).collect()
}

fn ray_profile(ctx: &EnergyContext, t_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    t_grid.iter().map(|&t| Ok((t, ctx.eval_j(&scaled(ctx.spectrum().phi(1), t))?))).collect()
}

/// Samples `J` on boundary spheres `‖u‖_∂ = α` and along the `φ₁` ray, and
/// looks for `α`, `ρ > 0` and `e = tφ₁` with `J ≥ ρ` on the sphere,
/// `J(e) < 0` and `‖e‖_∂ > α`. The `±φ₁` directions are always sampled.
pub fn probe_mountain_pass_geometry(
    ctx: &EnergyContext,
    alpha_grid: &[f64],
    t_grid: &[f64],
    opts: &ProbeOptions,
) -> Result<MountainPassProbe> {
    check_grid("alpha", alpha_grid)?;
    check_grid("t", t_grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let phi = ctx.spectrum().phi(1).to_vec();
    let mut sphere = Vec::with_capacity(alpha_grid.len());
    for &alpha in alpha_grid {
        let mut inf = f64::INFINITY;
        for trial in 0..opts.samples + 2 {
            let dir = match trial {
                0 => phi.clone(),
                1 => scaled(&phi, -1.0),
                _ => random_direction(ctx, &mut rng, trial, false),
            };
            let b = ctx.boundary_norm(&dir)?;
            if b == 0.0 {
                continue;
            }
            inf = inf.min(ctx.eval_j(&scaled(&dir, alpha / b))?);
        }
        sphere.push((alpha, inf));
    }
    let ray = ray_profile(ctx, t_grid)?;
    let mut certificate: Option<MountainPassCertificate> = None;
    for &(alpha, rho) in &sphere {
        if !(rho > RHO_MIN) {
            continue;
        }
        // φ₁ is B-normalized, so ‖tφ₁‖_∂ = |t|
        let e = ray.iter().filter(|(t, j)| t.abs() > alpha && *j < 0.0).min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some(&(t, j_e)) = e {
            if certificate.is_none_or(|c| rho > c.rho) {
                certificate = Some(MountainPassCertificate { alpha, rho, t, j_e });
            }
        }
    }
    Ok(MountainPassProbe { sphere, ray, certificate })
}

/// `J` along the `φ₁` ray and its minimum over random `w ⊥ φ₁` of growing
/// c-norm.
pub fn probe_saddle_geometry(
    ctx: &EnergyContext,
    t_grid: &[f64],
    w_norms: &[f64],
    opts: &ProbeOptions,
) -> Result<SaddleProbe> {
    check_grid("t", t_grid)?;
    check_grid("w norm", w_norms)?;
    let ray = ray_profile(ctx, t_grid)?;
    let max_ray = ray.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut complement = Vec::with_capacity(w_norms.len());
    for &r in w_norms {
        let mut min = f64::INFINITY;
        for trial in 0..opts.samples {
            let w = random_direction(ctx, &mut rng, trial, true);
            let c = ctx.c_norm(&w)?;
            if c == 0.0 {
                continue;
            }
            min = min.min(ctx.eval_j(&scaled(&w, r / c))?);
        }
        complement.push((r, min));
    }
    Ok(SaddleProbe { ray, max_ray, complement })
}

/// Counts sign violations of `J ≥ 0` on `{w ⊥ φ₁, ‖w‖_c ≤ δ}` and `J ≤ 0` on
/// `{tφ₁, ‖tφ₁‖_c ≤ δ}` for each `δ`.
pub fn probe_local_linking(ctx: &EnergyContext, delta_grid: &[f64], opts: &ProbeOptions) -> Result<LocalLinkingProbe> {
    check_grid("delta", delta_grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let phi = ctx.spectrum().phi(1).to_vec();
    let phi_c = ctx.c_norm(&phi)?;
    let mut rows = Vec::with_capacity(delta_grid.len());
    for &delta in delta_grid {
        let mut row = LocalLinkingRow { delta, complement_violations: 0, eigenspace_violations: 0 };
        for trial in 0..opts.samples {
            let w = random_direction(ctx, &mut rng, trial, true);
            let c = ctx.c_norm(&w)?;
            if c > 0.0 {
                let r = delta * rng.random_range(0.0..1.0f64).max(1e-3);
                if ctx.eval_j(&scaled(&w, r / c))? < -LINKING_SLACK * (1.0 + r * r) {
                    row.complement_violations += 1;
                }
            }
            // evenly spread over [−δ, δ] without the origin
            let s = -1.0 + 2.0 * (trial as f64 + 0.5) / opts.samples as f64;
            let r = delta * s;
            if ctx.eval_j(&scaled(&phi, r / phi_c))? > LINKING_SLACK * (1.0 + r * r) {
                row.eigenspace_violations += 1;
            }
        }
        rows.push(row);
    }
    let largest_clean_delta = rows
        .iter()
        .filter(|r| r.complement_violations == 0 && r.eigenspace_violations == 0)
        .map(|r| r.delta)
        .fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.max(d))));
    Ok(LocalLinkingProbe { rows, largest_clean_delta })
}
