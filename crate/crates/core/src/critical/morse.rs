use nalgebra::SymmetricEigen;

use crate::error::{check_dim, Result};
use crate::functional::EnergyContext;
use crate::nonlinearity::{nemytskii_apply, Which};

use super::MODULE;

/// Inertia of the discrete Hessian. Degenerate points have index somewhere in
/// `[negatives, negatives + near_zeros]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MorseIndex {
    pub negatives: usize,
    pub near_zeros: usize,
    pub threshold: f64,
}

/// Relative threshold on the Hessian diagonal scale.
pub const NEAR_ZERO_REL: f64 = 1e-8;

/// Counts negative and near-zero eigenvalues of `H = A + C − μ₁B − B_{f_u(u)}`.
///
/// The nonlinear term only touches boundary rows and the interior block of
/// `H` is the SPD `(A+C)_II`, so by Sylvester's law the inertia of `H` is that
/// of its boundary Schur complement `S − μ₁B_ΓΓ − (B_{f_u})_ΓΓ`.
pub fn morse_index(ctx: &EnergyContext, u: &[f64]) -> Result<MorseIndex> {
    check_dim(MODULE, ctx.dim(), u.len())?;
    let fu = nemytskii_apply(ctx.nonlinearity(), ctx.quadrature(), u, Which::Slope)?;
    let bfu = ctx.quadrature().weighted_mass(&fu);
    let cond = ctx.condensation()?;
    let boundary = cond.boundary_nodes();
    let reduced = cond.schur() - ctx.mu1() * cond.boundary_mass() - bfu.dense_block(boundary, boundary);
    let reduced = 0.5 * (&reduced + reduced.transpose());

    let diag_scale = ctx
        .quadratic_operator()
        .diagonal()
        .iter()
        .zip(bfu.diagonal())
        .map(|(q, b)| (q - b).abs())
        .fold(0.0, f64::max);
    let threshold = NEAR_ZERO_REL * diag_scale;
    let eig = SymmetricEigen::new(reduced);
    let negatives = eig.eigenvalues.iter().filter(|&&l| l < -threshold).count();
    let near_zeros = eig.eigenvalues.iter().filter(|&&l| l.abs() <= threshold).count();
    Ok(MorseIndex { negatives, near_zeros, threshold })
}
