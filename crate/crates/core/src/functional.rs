//! The discrete energy
//!
//! ```text
//! J(u) = ½(uᵀAu + uᵀCu − μ₁uᵀBu) − Σ_q w_q F(x_q, u_h(x_q))
//! ```
//!
//! with its gradient, Hessian action and the Cerami diagnostic.

use std::fmt::Write as _;
use std::io;
use std::sync::OnceLock;

use crate::assembly::{BoundaryQuadrature, OperatorTriple};
use crate::error::{check_dim, Error, Result};
use crate::mesh::{DiscreteFunction, Mesh};
use crate::nonlinearity::{nemytskii_apply, Nonlinearity, Which};
use crate::sparse::{EnvelopeCholesky, SymmetricSparseOperator};
use crate::steklov::{dot, BoundaryCondensation, SteklovSpectrum};

const MODULE: &str = "functional";

/// Tolerance on `Σ w_q − |∂Ω|`.
pub const QUADRATURE_WEIGHT_TOL: f64 = 1e-10;

/// Increments below this (relative) use the Hermite rule in
/// [`EnergyContext::energy_difference`]; its error is `O(b⁵)`.
const HERMITE_STEP: f64 = 1e-3;

/// Everything needed to evaluate `J` on one mesh. Immutable once built.
#[derive(Debug, Clone)]
pub struct EnergyContext {
    mesh: Mesh,
    ops: OperatorTriple,
    spectrum: SteklovSpectrum,
    nl: Nonlinearity,
    quad: BoundaryQuadrature,
    /// `A + C − μ₁B`.
    quadratic: SymmetricSparseOperator,
    /// Factor of `A + C`, used for preconditioned directions.
    riesz: EnvelopeCholesky,
    condensation: OnceLock<BoundaryCondensation>,
}

impl EnergyContext {
    pub fn new(mesh: &Mesh, ops: &OperatorTriple, spectrum: &SteklovSpectrum, nl: Nonlinearity) -> Result<Self> {
        check_dim(MODULE, mesh.n_nodes(), ops.dim())?;
        if spectrum.mesh_id() != mesh.id() {
            return Err(Error::Invariant {
                invariant: "spectrum-provenance",
                detail: format!("spectrum built on mesh {:016x}, context mesh is {:016x}", spectrum.mesh_id(), mesh.id()),
            });
        }
        let quad = BoundaryQuadrature::new(mesh);
        let (total, len) = (quad.total_weight(), mesh.boundary_length());
        if (total - len).abs() > QUADRATURE_WEIGHT_TOL || quad.points().iter().any(|p| !(p.weight > 0.0)) {
            return Err(Error::Invariant {
                invariant: "quadrature-weights",
                detail: format!("weights sum to {total}, boundary length is {len}"),
            });
        }
        let mu1 = spectrum.mu(1);
        let quadratic = SymmetricSparseOperator::combine(&[
            (1.0, &ops.stiffness),
            (1.0, &ops.domain_mass),
            (-mu1, &ops.boundary_mass),
        ]);
        let riesz = EnvelopeCholesky::factor(&ops.energy_operator())?;
        Ok(EnergyContext { mesh: mesh.clone(), ops: ops.clone(), spectrum: spectrum.clone(), nl, quad, quadratic, riesz, condensation: OnceLock::new() })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn ops(&self) -> &OperatorTriple {
        &self.ops
    }

    pub fn spectrum(&self) -> &SteklovSpectrum {
        &self.spectrum
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nl
    }

    pub fn quadrature(&self) -> &BoundaryQuadrature {
        &self.quad
    }

    pub fn mu1(&self) -> f64 {
        self.spectrum.mu(1)
    }

    pub fn dim(&self) -> usize {
        self.mesh.n_nodes()
    }

    /// `A + C − μ₁B`.
    pub fn quadratic_operator(&self) -> &SymmetricSparseOperator {
        &self.quadratic
    }

    /// Checks that `u` lives on this context's mesh.
    pub fn check(&self, u: &DiscreteFunction) -> Result<()> {
        if u.mesh_id() != self.mesh.id() {
            return Err(Error::validation(MODULE, "function belongs to a different mesh"));
        }
        check_dim(MODULE, self.dim(), u.len())
    }

    /// `½ uᵀ(A + C − μ₁B)u`, nonnegative up to rounding.
    pub fn quadratic_part(&self, u: &[f64]) -> Result<f64> {
        check_dim(MODULE, self.dim(), u.len())?;
        Ok(0.5 * self.quadratic.quadratic(u))
    }

    /// `Σ_q w_q F(x_q, u_h(x_q))`.
    pub fn potential_integral(&self, u: &[f64]) -> Result<f64> {
        let f = nemytskii_apply(&self.nl, &self.quad, u, Which::Potential)?;
        Ok(self.quad.integrate(&f))
    }

    pub fn eval_j(&self, u: &[f64]) -> Result<f64> {
        Ok(self.quadratic_part(u)? - self.potential_integral(u)?)
    }

    /// `J(u + s) − J(u)` without forming either value, so the difference keeps
    /// its relative accuracy when both energies are large.
    pub fn energy_difference(&self, u: &[f64], s: &[f64]) -> Result<f64> {
        check_dim(MODULE, self.dim(), u.len())?;
        check_dim(MODULE, self.dim(), s.len())?;
        let qs = self.quadratic.apply(s);
        let quad = dot(&qs, u) + 0.5 * dot(&qs, s);
        let tu = self.quad.trace(u);
        let ts = self.quad.trace(s);
        let mut pot = 0.0;
        for ((p, a), b) in self.quad.points().iter().zip(&tu).zip(&ts) {
            let d = if b.abs() <= HERMITE_STEP * (1.0 + a.abs()) {
                // Hermite rule for ∫f over [a, a+b]; avoids cancelling two F values
                let (f0, f1) = (self.nl.value(p.x, *a), self.nl.value(p.x, a + b));
                let (s0, s1) = (self.nl.slope(p.x, *a), self.nl.slope(p.x, a + b));
                0.5 * b * (f0 + f1) + b * b * (s0 - s1) / 12.0
            } else {
                self.nl.potential(p.x, a + b) - self.nl.potential(p.x, *a)
            };
            if !d.is_finite() {
                return Err(Error::validation(
                    MODULE,
                    format!("{} evaluated to a non-finite value near u = {}", self.nl.label(), a + b),
                ));
            }
            pot += p.weight * d;
        }
        Ok(quad - pot)
    }

    /// `(A + C − μ₁B)u − b_f(u)` in the Euclidean dual basis.
    pub fn grad_j(&self, u: &[f64]) -> Result<Vec<f64>> {
        let f = nemytskii_apply(&self.nl, &self.quad, u, Which::Value)?;
        let mut g = self.quad.load(&f);
        g.iter_mut().for_each(|v| *v = -*v);
        self.quadratic.apply_add(1.0, u, &mut g);
        Ok(g)
    }

    /// `(A + C − μ₁B)v − B_{f_u(u)} v`.
    pub fn hess_apply(&self, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        check_dim(MODULE, self.dim(), v.len())?;
        let fu = nemytskii_apply(&self.nl, &self.quad, u, Which::Slope)?;
        let tv = self.quad.trace(v);
        let weighted: Vec<f64> = fu.iter().zip(&tv).map(|(a, b)| a * b).collect();
        let mut h = self.quad.load(&weighted);
        h.iter_mut().for_each(|x| *x = -*x);
        self.quadratic.apply_add(1.0, v, &mut h);
        Ok(h)
    }

    /// The assembled Hessian at `u` as a sparse operator.
    pub fn hessian(&self, u: &[f64]) -> Result<SymmetricSparseOperator> {
        let fu = nemytskii_apply(&self.nl, &self.quad, u, Which::Slope)?;
        let bfu = self.quad.weighted_mass(&fu);
        Ok(SymmetricSparseOperator::combine(&[(1.0, &self.quadratic), (-1.0, &bfu)]))
    }

    /// `(A + C)⁻¹ g`: the gradient represented in the c-inner product.
    pub fn riesz(&self, g: &[f64]) -> Result<Vec<f64>> {
        check_dim(MODULE, self.dim(), g.len())?;
        Ok(self.riesz.solve(g))
    }

    pub fn c_norm(&self, u: &[f64]) -> Result<f64> {
        self.ops.c_norm(u)
    }

    pub fn boundary_norm(&self, u: &[f64]) -> Result<f64> {
        self.ops.boundary_norm(u)
    }

    pub fn cerami_record(&self, u: &[f64]) -> Result<CeramiRecord> {
        let j = self.eval_j(u)?;
        let g = self.grad_j(u)?;
        Ok(CeramiRecord::new(j, norm2(&g), self.c_norm(u)?))
    }

    /// Cerami record plus the `u = tφ₁ + w` split, for iterate logs.
    pub fn iterate_record(&self, step: usize, u: &[f64]) -> Result<IterateRecord> {
        let j = self.eval_j(u)?;
        let g = self.grad_j(u)?;
        self.record_from(step, u, j, norm2(&g))
    }

    /// As [`Self::iterate_record`] with `J(u)` and `‖J′(u)‖` already known.
    pub fn record_from(&self, step: usize, u: &[f64], j: f64, grad_norm: f64) -> Result<IterateRecord> {
        let cerami = CeramiRecord::new(j, grad_norm, self.c_norm(u)?);
        let t = dot(self.spectrum.weighted_phi(1), u);
        let w: Vec<f64> = u.iter().zip(self.spectrum.phi(1)).map(|(a, p)| a - t * p).collect();
        Ok(IterateRecord { step, cerami, t_coefficient: t, w_norm: self.c_norm(&w)? })
    }

    /// Interior elimination of `A + C`, built on first use.
    pub fn condensation(&self) -> Result<&BoundaryCondensation> {
        if let Some(c) = self.condensation.get() {
            return Ok(c);
        }
        let c = BoundaryCondensation::new(&self.mesh, &self.ops)?;
        Ok(self.condensation.get_or_init(|| c))
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Euclidean `‖J′(u)‖`, c-norm `‖u‖` and `‖J′(u)‖(1 + ‖u‖)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CeramiRecord {
    pub j_value: f64,
    pub grad_norm: f64,
    pub u_norm: f64,
    pub cerami_metric: f64,
}

impl CeramiRecord {
    pub fn new(j_value: f64, grad_norm: f64, u_norm: f64) -> Self {
        CeramiRecord { j_value, grad_norm, u_norm, cerami_metric: grad_norm * (1.0 + u_norm) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterateRecord {
    pub step: usize,
    pub cerami: CeramiRecord,
    pub t_coefficient: f64,
    /// c-norm of the φ₁-complement part.
    pub w_norm: f64,
}

pub const ITERATE_LOG_HEADER: &str = "step,J,grad_norm,u_norm,cerami_metric,t_coefficient,w_norm";

pub fn iterate_log_csv(log: &[IterateRecord]) -> String {
    let mut out = String::from(ITERATE_LOG_HEADER);
    out.push('\n');
    for r in log {
        let c = &r.cerami;
        let _ = writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{:e},{:e}",
            r.step, c.j_value, c.grad_norm, c.u_norm, c.cerami_metric, r.t_coefficient, r.w_norm
        );
    }
    out
}

pub fn write_iterate_log(log: &[IterateRecord], mut w: impl io::Write) -> io::Result<()> {
    w.write_all(iterate_log_csv(log).as_bytes())
}

/// Parses a log produced by [`iterate_log_csv`].
pub fn parse_iterate_log(text: &str) -> Result<Vec<IterateRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == ITERATE_LOG_HEADER => {}
        _ => return Err(Error::Parse { line: 1, detail: format!("expected header `{ITERATE_LOG_HEADER}`") }),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |detail: String| Error::Parse { line: i + 1, detail };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(bad(format!("expected 7 fields, got {}", f.len())));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(format!("`{s}`: {e}")));
        let step = f[0].trim().parse::<usize>().map_err(|e| bad(format!("`{}`: {e}", f[0])))?;
        out.push(IterateRecord {
            step,
            cerami: CeramiRecord {
                j_value: num(f[1])?,
                grad_norm: num(f[2])?,
                u_norm: num(f[3])?,
                cerami_metric: num(f[4])?,
            },
            t_coefficient: num(f[5])?,
            w_norm: num(f[6])?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::CoefficientField;
    use crate::mesh::{generate_disk, NodeCap};
    use crate::nonlinearity::{bounded_gaussian, quartic_well, zero};
    use crate::steklov::solve_steklov;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(nl: Nonlinearity) -> EnergyContext {
        let mesh = generate_disk(1.0, 0.25, NodeCap::default()).unwrap();
        let ops = OperatorTriple::assemble(&mesh, &CoefficientField::constant(1.0)).unwrap();
        let spec = solve_steklov(&mesh, &ops, 4).unwrap();
        EnergyContext::new(&mesh, &ops, &spec, nl).unwrap()
    }

    fn random(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-scale..scale)).collect()
    }

    #[test]
    fn zero_function() {
        let ctx = setup(quartic_well(0.1));
        let u = vec![0.0; ctx.dim()];
        assert_eq!(ctx.eval_j(&u).unwrap(), 0.0);
        assert!(ctx.grad_j(&u).unwrap().iter().all(|g| *g == 0.0));
        let r = ctx.cerami_record(&u).unwrap();
        assert_eq!(r, CeramiRecord { j_value: 0.0, grad_norm: 0.0, u_norm: 0.0, cerami_metric: 0.0 });
    }

    #[test]
    fn first_eigenfunction_ray() {
        let ctx = setup(zero());
        for t in [-3.0, 0.5, 10.0] {
            let u: Vec<f64> = ctx.spectrum().phi(1).iter().map(|p| t * p).collect();
            assert!(ctx.eval_j(&u).unwrap().abs() < 1e-8 * (1.0 + t * t));
        }
        let phi = ctx.spectrum().phi(1);
        let g = ctx.grad_j(phi).unwrap();
        let scale = norm2(&ctx.ops().energy_operator().apply(phi));
        assert!(norm2(&g) <= 1e-8 * scale);

        let ctx = setup(bounded_gaussian(1.0));
        for t in [-2.0, 0.7, 3.0] {
            let u: Vec<f64> = ctx.spectrum().phi(1).iter().map(|p| t * p).collect();
            let j = ctx.eval_j(&u).unwrap();
            // oracle: −Σ w_q (1 − exp(−s_q²))/2 evaluated directly
            let tr = ctx.quadrature().trace(&u);
            let qf: f64 = ctx.quadrature().points().iter().zip(&tr).map(|(p, s)| p.weight * 0.5 * (1.0 - (-s * s).exp())).sum();
            assert!(j < 0.0);
            assert!((j + qf).abs() < 1e-8 * (1.0 + qf));
        }
    }

    #[test]
    fn finite_difference_gradient_and_hessian() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for nl in [quartic_well(0.1), bounded_gaussian(1.0), zero()] {
            let ctx = setup(nl);
            let n = ctx.dim();
            let eps = 1e-5;
            for _ in 0..20 {
                let u = random(&mut rng, n, 1.5);
                let v = random(&mut rng, n, 1.0);
                let plus: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + eps * b).collect();
                let minus: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - eps * b).collect();
                let fd = (ctx.eval_j(&plus).unwrap() - ctx.eval_j(&minus).unwrap()) / (2.0 * eps);
                let exact = dot(&ctx.grad_j(&u).unwrap(), &v);
                assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "{fd} vs {exact}");

                let gp = ctx.grad_j(&plus).unwrap();
                let gm = ctx.grad_j(&minus).unwrap();
                let fd: Vec<f64> = gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * eps)).collect();
                let h = ctx.hess_apply(&u, &v).unwrap();
                let err: Vec<f64> = fd.iter().zip(&h).map(|(a, b)| a - b).collect();
                assert!(norm2(&err) <= 1e-5 * norm2(&h).max(1.0));
            }
        }
    }

    #[test]
    fn energy_difference_matches_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for nl in [quartic_well(0.1), bounded_gaussian(1.0)] {
            let ctx = setup(nl);
            for scale in [1.0, 1e-2, 1e-5] {
                let u = random(&mut rng, ctx.dim(), 1.5);
                let s = random(&mut rng, ctx.dim(), scale);
                let v: Vec<f64> = u.iter().zip(&s).map(|(a, b)| a + b).collect();
                let direct = ctx.eval_j(&v).unwrap() - ctx.eval_j(&u).unwrap();
                let diff = ctx.energy_difference(&u, &s).unwrap();
                assert!((diff - direct).abs() <= 1e-12 + 1e-8 * direct.abs(), "{diff} vs {direct}");
            }
        }
    }

    #[test]
    fn hessian_symmetry_and_assembled_form() {
        let ctx = setup(quartic_well(0.1));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = ctx.dim();
        let u = random(&mut rng, n, 1.0);
        let v = random(&mut rng, n, 1.0);
        let w = random(&mut rng, n, 1.0);
        let a = dot(&w, &ctx.hess_apply(&u, &v).unwrap());
        let b = dot(&v, &ctx.hess_apply(&u, &w).unwrap());
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        let h = ctx.hessian(&u).unwrap().apply(&v);
        let hv = ctx.hess_apply(&u, &v).unwrap();
        assert!(h.iter().zip(&hv).all(|(x, y)| (x - y).abs() < 1e-12));
    }

    #[test]
    fn quadratic_part_nonnegative() {
        let ctx = setup(zero());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let u = random(&mut rng, ctx.dim(), 1.0);
            let c = ctx.c_norm(&u).unwrap();
            assert!(ctx.quadratic_part(&u).unwrap() >= -1e-10 * c * c);
        }
    }

    #[test]
    fn wrong_mesh_rejected() {
        let ctx = setup(zero());
        let other = generate_disk(1.0, 0.15, NodeCap::default()).unwrap();
        assert!(ctx.check(&DiscreteFunction::zeros(&other)).is_err());
        assert!(ctx.eval_j(&[0.0; 3]).is_err());
        let ops = OperatorTriple::assemble(&other, &CoefficientField::constant(1.0)).unwrap();
        assert!(matches!(
            EnergyContext::new(&other, &ops, ctx.spectrum(), zero()),
            Err(Error::Invariant { .. }) | Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn iterate_log_round_trip() {
        let ctx = setup(quartic_well(0.1));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let log: Vec<IterateRecord> =
            (0..4).map(|s| ctx.iterate_record(s, &random(&mut rng, ctx.dim(), 1.0)).unwrap()).collect();
        let text = iterate_log_csv(&log);
        assert!(text.starts_with(ITERATE_LOG_HEADER));
        assert_eq!(parse_iterate_log(&text).unwrap(), log);
        assert!(matches!(parse_iterate_log("step,J\n"), Err(Error::Parse { line: 1, .. })));
        for r in &log {
            assert!(r.cerami.cerami_metric >= r.cerami.grad_norm);
        }
    }
}
