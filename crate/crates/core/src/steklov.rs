//! Discrete Steklov spectrum `(A + C) x = μ B x` by boundary condensation.
//!
//! `B` vanishes on interior rows, so interior unknowns are eliminated with
//! the SPD block `(A + C)_II`. The reduced pencil `S y = μ B_ΓΓ y` on the
//! boundary nodes is symmetric-definite and dense.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::OperatorTriple;
use crate::error::{check_dim, Error, Result};
use crate::mesh::{DiscreteFunction, Mesh};
use crate::sparse::{EnvelopeCholesky, SymmetricSparseOperator};

const MODULE: &str = "steklov";

pub const RESIDUAL_TOL: f64 = 1e-8;
pub const ORTHOGONALITY_TOL: f64 = 1e-8;

/// Interior elimination of an SPD operator onto the boundary nodes.
#[derive(Debug, Clone)]
pub struct BoundaryCondensation {
    n_nodes: usize,
    boundary: Vec<usize>,
    interior: Vec<usize>,
    /// `(A+C)_II⁻¹ (A+C)_IΓ`, interior rows by boundary columns.
    extension: DMatrix<f64>,
    /// Schur complement `S = K_ΓΓ − K_ΓI K_II⁻¹ K_IΓ`.
    schur: DMatrix<f64>,
    boundary_mass: DMatrix<f64>,
}

impl BoundaryCondensation {
    pub fn new(mesh: &Mesh, ops: &OperatorTriple) -> Result<Self> {
        let k = ops.energy_operator();
        Self::from_operators(mesh, &k, &ops.boundary_mass)
    }

    pub fn from_operators(
        mesh: &Mesh,
        energy: &SymmetricSparseOperator,
        boundary_mass: &SymmetricSparseOperator,
    ) -> Result<Self> {
        check_dim(MODULE, mesh.n_nodes(), energy.dim())?;
        check_dim(MODULE, mesh.n_nodes(), boundary_mass.dim())?;
        let mask = mesh.boundary_mask();
        let boundary: Vec<usize> = (0..mesh.n_nodes()).filter(|&i| mask[i]).collect();
        let interior: Vec<usize> = (0..mesh.n_nodes()).filter(|&i| !mask[i]).collect();
        let (nb, ni) = (boundary.len(), interior.len());

        let mut extension = DMatrix::zeros(ni, nb);
        let mut schur = energy.dense_block(&boundary, &boundary);
        if ni > 0 {
            let kii = energy.principal_submatrix(&interior);
            let chol = EnvelopeCholesky::factor(&kii).map_err(|e| match e {
                Error::Definiteness { row, pivot, .. } => {
                    Error::Definiteness { module: MODULE, row: interior[row], pivot }
                }
                other => other,
            })?;
            let kib = energy.dense_block(&interior, &boundary);
            for c in 0..nb {
                let col: Vec<f64> = kib.column(c).iter().copied().collect();
                let z = chol.solve(&col);
                extension.column_mut(c).copy_from_slice(&z);
            }
            schur -= kib.transpose() * &extension;
        }
        let schur = 0.5 * (&schur + schur.transpose());
        let boundary_mass = boundary_mass.dense_block(&boundary, &boundary);
        Ok(BoundaryCondensation { n_nodes: mesh.n_nodes(), boundary, interior, extension, schur, boundary_mass })
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior
    }

    pub fn schur(&self) -> &DMatrix<f64> {
        &self.schur
    }

    pub fn boundary_mass(&self) -> &DMatrix<f64> {
        &self.boundary_mass
    }

    /// Lifts boundary values `y` to the full node vector whose interior part
    /// minimizes the energy form: `x_I = −K_II⁻¹ K_IΓ y`.
    pub fn extend(&self, y: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n_nodes];
        for (k, &b) in self.boundary.iter().enumerate() {
            x[b] = y[k];
        }
        if !self.interior.is_empty() {
            let xi = -(&self.extension * DVector::from_column_slice(y));
            for (k, &i) in self.interior.iter().enumerate() {
                x[i] = xi[k];
            }
        }
        x
    }

    /// The `k` smallest eigenpairs of `S y = μ B_ΓΓ y`, ascending, with
    /// `yᵀ B_ΓΓ y = 1`.
    pub fn reduced_eigenpairs(&self, k: usize) -> Result<(Vec<f64>, Vec<DVector<f64>>)> {
        let nb = self.boundary.len();
        if k == 0 || k > nb {
            return Err(Error::param(MODULE, format!("requested {k} eigenpairs, boundary has {nb} nodes")));
        }
        let chol = self.boundary_mass.clone().cholesky().ok_or(Error::Definiteness {
            module: MODULE,
            row: 0,
            pivot: 0.0,
        })?;
        let l = chol.l();
        // M = L⁻¹ S L⁻ᵀ
        let linv_s = l.solve_lower_triangular(&self.schur).expect("triangular factor is nonsingular");
        let m = l.solve_lower_triangular(&linv_s.transpose()).expect("triangular factor is nonsingular");
        let m = 0.5 * (&m + m.transpose());
        let eig = SymmetricEigen::new(m);
        let mut order: Vec<usize> = (0..nb).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
        let lt = l.transpose();
        let mut values = Vec::with_capacity(k);
        let mut vectors = Vec::with_capacity(k);
        for &idx in order.iter().take(k) {
            let z = eig.eigenvectors.column(idx).into_owned();
            let y = lt.solve_upper_triangular(&z).expect("triangular factor is nonsingular");
            values.push(eig.eigenvalues[idx]);
            vectors.push(y);
        }
        Ok((values, vectors))
    }
}

#[derive(Debug, Clone)]
pub struct SteklovSpectrum {
    eigenvalues: Vec<f64>,
    eigenvectors: Vec<DiscreteFunction>,
    /// `B φᵢ`, cached for projections.
    weighted: Vec<Vec<f64>>,
    mesh_id: u64,
    max_residual: f64,
    max_orthogonality_error: f64,
}

impl SteklovSpectrum {
    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &[DiscreteFunction] {
        &self.eigenvectors
    }

    /// `μ_i`, one-based.
    pub fn mu(&self, i: usize) -> f64 {
        self.eigenvalues[i - 1]
    }

    /// `φ_i`, one-based.
    pub fn phi(&self, i: usize) -> &[f64] {
        self.eigenvectors[i - 1].coefficients()
    }

    pub fn weighted_phi(&self, i: usize) -> &[f64] {
        &self.weighted[i - 1]
    }

    pub fn mesh_id(&self) -> u64 {
        self.mesh_id
    }

    pub fn n_nodes(&self) -> usize {
        self.eigenvectors.first().map_or(0, |v| v.len())
    }

    /// Largest `‖(A+C)φ − μBφ‖ / ‖(A+C)φ‖` over the computed pairs.
    pub fn max_residual(&self) -> f64 {
        self.max_residual
    }

    pub fn max_orthogonality_error(&self) -> f64 {
        self.max_orthogonality_error
    }

    /// Spectral gap `μ₂ − μ₁` (requires two pairs).
    pub fn gap(&self) -> Option<f64> {
        (self.k() >= 2).then(|| self.eigenvalues[1] - self.eigenvalues[0])
    }

    /// Pairs whose relative separation is below `rel_tol`.
    pub fn near_degenerate(&self, rel_tol: f64) -> Vec<(usize, usize)> {
        self.eigenvalues
            .windows(2)
            .enumerate()
            .filter(|(_, w)| (w[1] - w[0]).abs() <= rel_tol * w[1].abs())
            .map(|(i, _)| (i + 1, i + 2))
            .collect()
    }

    /// `steklov-spec v1` dump.
    pub fn to_text(&self) -> String {
        let mut out = String::from("steklov-spec v1\n");
        let _ = writeln!(out, "{} {}", self.k(), self.n_nodes());
        for (i, (mu, v)) in self.eigenvalues.iter().zip(&self.eigenvectors).enumerate() {
            let _ = writeln!(out, "mu_{} {}", i + 1, mu);
            for c in v.coefficients() {
                let _ = writeln!(out, "{c}");
            }
        }
        out
    }
}

/// Parses a `steklov-spec v1` dump into `(eigenvalues, eigenvectors)`.
pub fn parse_spectrum_text(text: &str) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l.trim()));
    let perr = |line, detail: String| Error::Parse { line, detail };
    match lines.next() {
        Some((_, "steklov-spec v1")) => {}
        Some((line, l)) => return Err(perr(line, format!("bad header `{l}`"))),
        None => return Err(perr(1, "empty file".into())),
    }
    let (line, l) = lines.next().ok_or_else(|| perr(2, "missing `k n_nodes`".into()))?;
    let f: Vec<&str> = l.split_whitespace().collect();
    let (k, n): (usize, usize) = match f.as_slice() {
        [a, b] => (
            a.parse().map_err(|_| perr(line, format!("bad count `{a}`")))?,
            b.parse().map_err(|_| perr(line, format!("bad count `{b}`")))?,
        ),
        _ => return Err(perr(line, format!("expected `k n_nodes`, found `{l}`"))),
    };
    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    let mut last = line;
    for i in 0..k {
        let (line, l) = lines.next().ok_or_else(|| perr(last + 1, "unexpected end of file".into()))?;
        let want = format!("mu_{}", i + 1);
        let mut it = l.split_whitespace();
        let mu = match (it.next(), it.next(), it.next()) {
            (Some(tag), Some(v), None) if tag == want => v.parse().map_err(|_| perr(line, format!("bad value `{v}`")))?,
            _ => return Err(perr(line, format!("expected `{want} <value>`, found `{l}`"))),
        };
        values.push(mu);
        let mut v = Vec::with_capacity(n);
        last = line;
        for _ in 0..n {
            let (line, l) = lines.next().ok_or_else(|| perr(last + 1, "unexpected end of file".into()))?;
            v.push(l.parse().map_err(|_| perr(line, format!("bad coefficient `{l}`")))?);
            last = line;
        }
        vectors.push(v);
    }
    Ok((values, vectors))
}

/// The `k` smallest finite Steklov eigenpairs on `mesh`.
pub fn solve_steklov(mesh: &Mesh, ops: &OperatorTriple, k: usize) -> Result<SteklovSpectrum> {
    let cond = BoundaryCondensation::new(mesh, ops)?;
    solve_with_condensation(mesh, ops, &cond, k)
}

pub fn solve_with_condensation(
    mesh: &Mesh,
    ops: &OperatorTriple,
    cond: &BoundaryCondensation,
    k: usize,
) -> Result<SteklovSpectrum> {
    let energy = ops.energy_operator();
    // full factorization doubles as the definiteness check on A + C
    EnvelopeCholesky::factor(&energy).map_err(|e| match e {
        Error::Definiteness { row, pivot, .. } => Error::Definiteness { module: MODULE, row, pivot },
        other => other,
    })?;
    let (values, reduced) = cond.reduced_eigenpairs(k)?;
    if let Some(&mu) = values.first() {
        if !(mu > 0.0) {
            return Err(Error::Definiteness { module: MODULE, row: 0, pivot: mu });
        }
    }

    let b = &ops.boundary_mass;
    let mut eigenvectors = Vec::with_capacity(k);
    let mut weighted = Vec::with_capacity(k);
    for y in &reduced {
        let mut x = cond.extend(y.as_slice());
        normalize_sign(&mut x, cond.boundary_nodes());
        weighted.push(b.apply(&x));
        eigenvectors.push(DiscreteFunction::new(mesh, x)?);
    }
    // μ₁ as the Rayleigh quotient of φ₁ on the full operators, so that
    // A + C − μ₁B cancels to rounding level along φ₁. μ₁ is simple; the
    // higher pairs keep the reduced values to preserve their order.
    let mut values = values;
    if let (Some(mu), Some(v)) = (values.first_mut(), eigenvectors.first()) {
        *mu = energy.quadratic(v.coefficients()) / dot(v.coefficients(), &weighted[0]);
    }

    let mut max_residual = 0.0f64;
    let mut max_orth = 0.0f64;
    for (i, (mu, v)) in values.iter().zip(&eigenvectors).enumerate() {
        let kv = energy.apply(v.coefficients());
        let res: f64 = kv.iter().zip(&weighted[i]).map(|(a, b)| (a - mu * b).powi(2)).sum::<f64>().sqrt();
        let scale = kv.iter().map(|a| a * a).sum::<f64>().sqrt();
        max_residual = max_residual.max(res / scale);
        for (j, w) in weighted.iter().enumerate() {
            let ip: f64 = v.coefficients().iter().zip(w).map(|(a, b)| a * b).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            max_orth = max_orth.max((ip - target).abs());
        }
    }
    if max_residual > RESIDUAL_TOL {
        return Err(Error::Invariant {
            invariant: "eigen-residual",
            detail: format!("relative residual {max_residual:e} exceeds {RESIDUAL_TOL:e}"),
        });
    }
    if max_orth > ORTHOGONALITY_TOL {
        return Err(Error::Invariant {
            invariant: "B-orthonormality",
            detail: format!("deviation {max_orth:e} exceeds {ORTHOGONALITY_TOL:e}"),
        });
    }
    Ok(SteklovSpectrum {
        eigenvalues: values,
        eigenvectors,
        weighted,
        mesh_id: mesh.id(),
        max_residual,
        max_orthogonality_error: max_orth,
    })
}

/// First boundary value that is not negligible is made positive.
fn normalize_sign(x: &mut [f64], boundary: &[usize]) {
    let scale = boundary.iter().map(|&i| x[i].abs()).fold(0.0, f64::max);
    if let Some(&i) = boundary.iter().find(|&&i| x[i].abs() > 1e-8 * scale) {
        if x[i] < 0.0 {
            x.iter_mut().for_each(|v| *v = -*v);
        }
    }
}

/// `u = t φ₁ + w` with `w` B-orthogonal to `φ₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub t: f64,
    pub w: Vec<f64>,
}

pub fn decompose(u: &[f64], spectrum: &SteklovSpectrum) -> Result<EigenDecomposition> {
    check_dim(MODULE, spectrum.n_nodes(), u.len())?;
    let t = dot(spectrum.weighted_phi(1), u);
    let phi = spectrum.phi(1);
    let w = u.iter().zip(phi).map(|(a, p)| a - t * p).collect();
    Ok(EigenDecomposition { t, w })
}

/// `uᵀ(A+C)u / uᵀBu`; functions with no boundary trace are rejected.
pub fn rayleigh_quotient(u: &[f64], ops: &OperatorTriple) -> Result<f64> {
    check_dim(MODULE, ops.dim(), u.len())?;
    let den = ops.boundary_mass.quadratic(u);
    let num = ops.stiffness.quadratic(u) + ops.domain_mass.quadratic(u);
    if !(den > 0.0) {
        return Err(Error::DivisionGuard {
            module: MODULE,
            detail: "Rayleigh quotient is +inf: function has zero boundary trace".into(),
        });
    }
    Ok(num / den)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenspaceReport {
    pub j: usize,
    pub trials: usize,
    /// Smallest `(μ_j‖v‖∂² − ‖v‖c²) / (μ_j‖v‖∂²)` over `v ∈ span(φ₁..φ_j)`.
    pub worst_lower_margin: f64,
    /// Smallest `(‖w‖c² − μ_{j+1}‖w‖∂²) / (μ_{j+1}‖w‖∂²)` over the complement.
    pub worst_upper_margin: f64,
    pub violations: usize,
}

pub const EIGENSPACE_SLACK: f64 = 1e-8;

/// Randomized check of `‖v‖c² ≤ μ_j‖v‖∂²` on `span(φ₁..φ_j)` and
/// `‖w‖c² ≥ μ_{j+1}‖w‖∂²` on its B-orthogonal complement.
///
/// Even trials draw `w` from `span(φ_{j+1}..φ_k)`, odd trials project a
/// random nodal vector.
pub fn verify_eigenspace_inequalities(
    spectrum: &SteklovSpectrum,
    ops: &OperatorTriple,
    j: usize,
    trials: usize,
    seed: u64,
) -> Result<EigenspaceReport> {
    let k = spectrum.k();
    if k < 2 || j == 0 || j >= k {
        return Err(Error::param(MODULE, format!("need 1 <= j < k with k >= 2, got j = {j}, k = {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spectrum.n_nodes();
    let energy = |u: &[f64]| ops.stiffness.quadratic(u) + ops.domain_mass.quadratic(u);
    let mu_j = spectrum.mu(j);
    let mu_next = spectrum.mu(j + 1);
    let mut report = EigenspaceReport {
        j,
        trials,
        worst_lower_margin: f64::INFINITY,
        worst_upper_margin: f64::INFINITY,
        violations: 0,
    };
    for trial in 0..trials {
        let mut v = vec![0.0; n];
        for i in 1..=j {
            axpy(rng.random_range(-1.0..1.0), spectrum.phi(i), &mut v);
        }
        let bv = ops.boundary_mass.quadratic(&v);
        if bv > 0.0 {
            let margin = (mu_j * bv - energy(&v)) / (mu_j * bv);
            report.worst_lower_margin = report.worst_lower_margin.min(margin);
            if margin < -EIGENSPACE_SLACK {
                report.violations += 1;
            }
        }

        let mut w = vec![0.0; n];
        if trial % 2 == 0 {
            for i in j + 1..=k {
                axpy(rng.random_range(-1.0..1.0), spectrum.phi(i), &mut w);
            }
        } else {
            w.iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
            for i in 1..=j {
                let c = dot(spectrum.weighted_phi(i), &w);
                axpy(-c, spectrum.phi(i), &mut w);
            }
        }
        let bw = ops.boundary_mass.quadratic(&w);
        if bw > 0.0 {
            let margin = (energy(&w) - mu_next * bw) / (mu_next * bw);
            report.worst_upper_margin = report.worst_upper_margin.min(margin);
            if margin < -EIGENSPACE_SLACK {
                report.violations += 1;
            }
        }
    }
    Ok(report)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::CoefficientField;
    use crate::mesh::{generate_disk, generate_square, NodeCap};

    fn disk_setup(h: f64) -> (Mesh, OperatorTriple) {
        let mesh = generate_disk(1.0, h, NodeCap::default()).unwrap();
        let ops = OperatorTriple::assemble(&mesh, &CoefficientField::constant(1.0)).unwrap();
        (mesh, ops)
    }

    #[test]
    fn spectrum_invariants_hold() {
        let (mesh, ops) = disk_setup(0.15);
        let s = solve_steklov(&mesh, &ops, 6).unwrap();
        assert!(s.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
        assert!(s.eigenvalues()[0] > 0.0);
        assert!(s.max_residual() <= 1e-8);
        let k = ops.energy_operator();
        for i in 1..=6 {
            for j in 1..=6 {
                let kij = k.bilinear(s.phi(i), s.phi(j));
                let target = if i == j { s.mu(i) } else { 0.0 };
                assert!((kij - target).abs() < 1e-6);
            }
        }
        // first eigenfunction keeps one sign on the boundary
        assert!(mesh.boundary_nodes().iter().all(|&b| s.phi(1)[b] > 0.0));
        // rotational double eigenvalue
        assert!((s.mu(2) - s.mu(3)).abs() / s.mu(3) < 0.01);
        assert!(!s.near_degenerate(0.01).is_empty());
    }

    #[test]
    fn k_is_bounded_by_boundary_nodes() {
        let mesh = generate_square(1.0, 0.5, NodeCap::default()).unwrap();
        let ops = OperatorTriple::assemble(&mesh, &CoefficientField::constant(1.0)).unwrap();
        assert!(matches!(solve_steklov(&mesh, &ops, 9), Err(Error::Parameter { .. })));
        assert!(solve_steklov(&mesh, &ops, 8).is_ok());
    }

    #[test]
    fn zero_coefficient_is_not_definite() {
        let mesh = generate_square(1.0, 0.25, NodeCap::default()).unwrap();
        let ops = OperatorTriple::assemble(&mesh, &CoefficientField::constant(0.0)).unwrap();
        assert!(matches!(solve_steklov(&mesh, &ops, 2), Err(Error::Definiteness { .. })));
    }

    #[test]
    fn decomposition_of_eigenvectors() {
        let (mesh, ops) = disk_setup(0.2);
        let s = solve_steklov(&mesh, &ops, 4).unwrap();
        let three_phi: Vec<f64> = s.phi(1).iter().map(|v| 3.0 * v).collect();
        let d = decompose(&three_phi, &s).unwrap();
        assert!((d.t - 3.0).abs() < 1e-10);
        assert!(d.w.iter().map(|x| x * x).sum::<f64>().sqrt() <= 1e-10);

        let d2 = decompose(s.phi(2), &s).unwrap();
        assert!(d2.t.abs() < 1e-8);
        for (a, b) in d2.w.iter().zip(s.phi(2)) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!(decompose(&[1.0], &s).is_err());
    }

    #[test]
    fn rayleigh_quotient_at_eigenvectors() {
        let (mesh, ops) = disk_setup(0.2);
        let s = solve_steklov(&mesh, &ops, 3).unwrap();
        assert!((rayleigh_quotient(s.phi(1), &ops).unwrap() - s.mu(1)).abs() < 1e-8);
        assert!((rayleigh_quotient(s.phi(2), &ops).unwrap() - s.mu(2)).abs() < 1e-8);
        let mask = mesh.boundary_mask();
        let bubble: Vec<f64> = (0..mesh.n_nodes()).map(|i| if mask[i] { 0.0 } else { 1.0 }).collect();
        assert!(matches!(rayleigh_quotient(&bubble, &ops), Err(Error::DivisionGuard { .. })));
    }

    #[test]
    fn eigenspace_inequalities_and_equality_cases() {
        let (mesh, ops) = disk_setup(0.2);
        let s = solve_steklov(&mesh, &ops, 6).unwrap();
        let r = verify_eigenspace_inequalities(&s, &ops, 1, 500, 7).unwrap();
        assert_eq!(r.violations, 0);
        // span(φ₁) is one-dimensional: every v is an equality case
        assert!(r.worst_lower_margin.abs() < 1e-8);
        let k = ops.energy_operator();
        let phi2 = s.phi(2);
        assert!((k.quadratic(phi2) - s.mu(2) * ops.boundary_mass.quadratic(phi2)).abs() < 1e-8);
        assert!(verify_eigenspace_inequalities(&s, &ops, 6, 10, 0).is_err());
    }

    #[test]
    fn spectrum_text_round_trip() {
        let (mesh, ops) = disk_setup(0.3);
        let s = solve_steklov(&mesh, &ops, 3).unwrap();
        let (vals, vecs) = parse_spectrum_text(&s.to_text()).unwrap();
        assert_eq!(vals, s.eigenvalues());
        assert_eq!(vecs[2], s.phi(3));
    }
}
