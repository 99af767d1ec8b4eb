//! Piecewise-linear assembly of the stiffness, weighted domain mass and
//! boundary mass operators, plus boundary quadrature and load vectors.

use std::fmt;
use std::sync::Arc;

use crate::error::{check_dim, Error, Result};
use crate::mesh::{Mesh, Point};
use crate::sparse::{OperatorKind, SymmetricSparseOperator};

const MODULE: &str = "assembly";

/// Nonnegative coefficient `c(x)` of the zeroth-order domain term.
#[derive(Clone)]
pub struct CoefficientField {
    evaluator: Arc<dyn Fn(Point) -> f64 + Send + Sync>,
    description: String,
}

impl CoefficientField {
    pub fn new(description: impl Into<String>, f: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        CoefficientField { evaluator: Arc::new(f), description: description.into() }
    }

    pub fn constant(value: f64) -> Self {
        CoefficientField::new(format!("constant({value})"), move |_| value)
    }

    /// `c(x) = base + slope·|x|²`.
    pub fn radial(base: f64, slope: f64) -> Self {
        CoefficientField::new(format!("radial({base}, {slope})"), move |p| base + slope * (p[0] * p[0] + p[1] * p[1]))
    }

    pub fn eval(&self, p: Point) -> f64 {
        (self.evaluator)(p)
    }

    pub fn description(&self) -> &str {
        &self.description
    }
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField").field("description", &self.description).finish()
    }
}

/// Per-triangle quadrature used for the weighted domain mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainQuadrature {
    Centroid,
    ThreePoint,
}

impl DomainQuadrature {
    pub fn from_points(n: usize) -> Result<Self> {
        match n {
            1 => Ok(DomainQuadrature::Centroid),
            3 => Ok(DomainQuadrature::ThreePoint),
            _ => Err(Error::param(MODULE, format!("quadrature order must be 1 or 3 points, got {n}"))),
        }
    }

    /// Barycentric coordinates and weights (fractions of the triangle area).
    fn rule(self) -> &'static [([f64; 3], f64)] {
        const CENTROID: [([f64; 3], f64); 1] = [([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 1.0)];
        const THREE: [([f64; 3], f64); 3] = [
            ([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0], 1.0 / 3.0),
            ([1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0], 1.0 / 3.0),
            ([1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0], 1.0 / 3.0),
        ];
        match self {
            DomainQuadrature::Centroid => &CENTROID,
            DomainQuadrature::ThreePoint => &THREE,
        }
    }
}

/// One boundary quadrature point: position, weight and the two linear shape
/// values of its edge endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub edge: usize,
    pub nodes: [usize; 2],
    pub shape: [f64; 2],
    pub x: Point,
    pub weight: f64,
}

/// Two-point Gauss rule on every boundary edge.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryQuadrature {
    points: Vec<BoundaryPoint>,
    n_nodes: usize,
}

impl BoundaryQuadrature {
    pub fn new(mesh: &Mesh) -> Self {
        let g = 0.5 / 3f64.sqrt();
        let params = [0.5 - g, 0.5 + g];
        let mut points = Vec::with_capacity(2 * mesh.boundary_edges().len());
        for (e, &[i, j]) in mesh.boundary_edges().iter().enumerate() {
            let (a, b) = (mesh.nodes()[i], mesh.nodes()[j]);
            let len = mesh.edge_length(i, j);
            for &s in &params {
                points.push(BoundaryPoint {
                    edge: e,
                    nodes: [i, j],
                    shape: [1.0 - s, s],
                    x: [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])],
                    weight: 0.5 * len,
                });
            }
        }
        BoundaryQuadrature { points, n_nodes: mesh.n_nodes() }
    }

    pub fn points(&self) -> &[BoundaryPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn total_weight(&self) -> f64 {
        self.points.iter().map(|p| p.weight).sum()
    }

    /// Trace of the nodal function `u` at every quadrature point.
    pub fn trace(&self, u: &[f64]) -> Vec<f64> {
        self.points.iter().map(|p| p.shape[0] * u[p.nodes[0]] + p.shape[1] * u[p.nodes[1]]).collect()
    }

    /// `Σ_q w_q g_q`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.points.iter().zip(values).map(|(p, v)| p.weight * v).sum()
    }

    /// Load vector `b_i = Σ_q w_q g_q ψ_i(x_q)` from values at the points.
    pub fn load(&self, values: &[f64]) -> Vec<f64> {
        let mut b = vec![0.0; self.n_nodes];
        for (p, v) in self.points.iter().zip(values) {
            b[p.nodes[0]] += p.weight * v * p.shape[0];
            b[p.nodes[1]] += p.weight * v * p.shape[1];
        }
        b
    }

    /// Boundary mass weighted by `values` at the quadrature points.
    pub fn weighted_mass(&self, values: &[f64]) -> SymmetricSparseOperator {
        let mut t = Vec::with_capacity(3 * self.points.len());
        for (p, v) in self.points.iter().zip(values) {
            let [i, j] = p.nodes;
            let [si, sj] = p.shape;
            let w = p.weight * v;
            t.push((i, i, w * si * si));
            t.push((i, j, w * si * sj));
            t.push((j, j, w * sj * sj));
        }
        SymmetricSparseOperator::from_triplets(self.n_nodes, OperatorKind::BoundaryMassWeighted, t)
    }
}

/// `∫ ∇u·∇v`, exact for piecewise-linear functions.
pub fn assemble_stiffness(mesh: &Mesh) -> SymmetricSparseOperator {
    let mut t = Vec::with_capacity(6 * mesh.n_triangles());
    for (k, tri) in mesh.triangles().iter().enumerate() {
        let grads = shape_gradients(mesh, tri);
        let area = mesh.triangle_area(k);
        for a in 0..3 {
            for b in a..3 {
                let v = area * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]);
                t.push((tri[a], tri[b], v));
            }
        }
    }
    SymmetricSparseOperator::from_triplets(mesh.n_nodes(), OperatorKind::Stiffness, t)
}

/// Constant gradients of the three barycentric shape functions.
fn shape_gradients(mesh: &Mesh, tri: &[usize; 3]) -> [[f64; 2]; 3] {
    let p = tri.map(|i| mesh.nodes()[i]);
    let twice_area = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let mut g = [[0.0; 2]; 3];
    for a in 0..3 {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        g[a] = [(p[b][1] - p[c][1]) / twice_area, (p[c][0] - p[b][0]) / twice_area];
    }
    g
}

/// `∫ c u v` under the chosen per-triangle rule.
pub fn assemble_domain_mass_weighted(
    mesh: &Mesh,
    c: &CoefficientField,
    quad: DomainQuadrature,
) -> Result<SymmetricSparseOperator> {
    let rule = quad.rule();
    let mut t = Vec::with_capacity(6 * mesh.n_triangles());
    for (k, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.triangle_area(k);
        let p = tri.map(|i| mesh.nodes()[i]);
        let mut local = [[0.0; 3]; 3];
        for (bary, w) in rule {
            let x = [
                bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0],
                bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1],
            ];
            let cv = c.eval(x);
            if !cv.is_finite() || cv < 0.0 {
                return Err(Error::validation(
                    MODULE,
                    format!("coefficient `{}` is {cv} at ({}, {}) in triangle {k}", c.description(), x[0], x[1]),
                ));
            }
            for a in 0..3 {
                for b in a..3 {
                    local[a][b] += w * area * cv * bary[a] * bary[b];
                }
            }
        }
        for a in 0..3 {
            for b in a..3 {
                t.push((tri[a], tri[b], local[a][b]));
            }
        }
    }
    Ok(SymmetricSparseOperator::from_triplets(mesh.n_nodes(), OperatorKind::DomainMassWeighted, t))
}

/// `∫_∂ u v`, assembled edge by edge from the exact `L/6·[[2,1],[1,2]]` block.
pub fn assemble_boundary_mass(mesh: &Mesh) -> SymmetricSparseOperator {
    let mut t = Vec::with_capacity(3 * mesh.boundary_edges().len());
    for &[i, j] in mesh.boundary_edges() {
        let l = mesh.edge_length(i, j);
        t.push((i, i, l / 3.0));
        t.push((j, j, l / 3.0));
        t.push((i, j, l / 6.0));
    }
    SymmetricSparseOperator::from_triplets(mesh.n_nodes(), OperatorKind::BoundaryMass, t)
}

/// `b_i ≈ ∫_∂ g ψ_i` by two-point Gauss on each edge.
pub fn assemble_boundary_load(mesh: &Mesh, g: impl Fn(Point) -> f64) -> Result<Vec<f64>> {
    let quad = BoundaryQuadrature::new(mesh);
    let mut values = Vec::with_capacity(quad.len());
    for p in quad.points() {
        let v = g(p.x);
        if !v.is_finite() {
            return Err(Error::validation(MODULE, format!("load is {v} at ({}, {})", p.x[0], p.x[1])));
        }
        values.push(v);
    }
    Ok(quad.load(&values))
}

/// The three operators behind the c-norm and the boundary norm.
#[derive(Debug, Clone)]
pub struct OperatorTriple {
    pub stiffness: SymmetricSparseOperator,
    pub domain_mass: SymmetricSparseOperator,
    pub boundary_mass: SymmetricSparseOperator,
    pub coefficient: String,
}

impl OperatorTriple {
    pub fn assemble(mesh: &Mesh, c: &CoefficientField) -> Result<Self> {
        Ok(OperatorTriple {
            stiffness: assemble_stiffness(mesh),
            domain_mass: assemble_domain_mass_weighted(mesh, c, DomainQuadrature::ThreePoint)?,
            boundary_mass: assemble_boundary_mass(mesh),
            coefficient: c.description().to_string(),
        })
    }

    pub fn dim(&self) -> usize {
        self.stiffness.dim()
    }

    /// `A + C`, the Gram operator of the c-inner product.
    pub fn energy_operator(&self) -> SymmetricSparseOperator {
        SymmetricSparseOperator::combine(&[(1.0, &self.stiffness), (1.0, &self.domain_mass)])
    }

    pub fn c_norm(&self, u: &[f64]) -> Result<f64> {
        c_norm(u, &self.stiffness, &self.domain_mass)
    }

    pub fn boundary_norm(&self, u: &[f64]) -> Result<f64> {
        boundary_norm(u, &self.boundary_mass)
    }
}

/// `√(uᵀAu + uᵀCu)`.
pub fn c_norm(u: &[f64], a: &SymmetricSparseOperator, c: &SymmetricSparseOperator) -> Result<f64> {
    check_dim(MODULE, a.dim(), u.len())?;
    check_dim(MODULE, c.dim(), u.len())?;
    Ok((a.quadratic(u) + c.quadratic(u)).max(0.0).sqrt())
}

/// `√(uᵀBu)`.
pub fn boundary_norm(u: &[f64], b: &SymmetricSparseOperator) -> Result<f64> {
    check_dim(MODULE, b.dim(), u.len())?;
    Ok(b.quadratic(u).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_disk, generate_square, NodeCap};
    use std::f64::consts::PI;

    fn unit_square(h: f64) -> Mesh {
        generate_square(1.0, h, NodeCap::default()).unwrap()
    }

    fn xs(mesh: &Mesh) -> Vec<f64> {
        mesh.nodes().iter().map(|p| p[0]).collect()
    }

    #[test]
    fn stiffness_kills_constants_and_integrates_x() {
        let m = unit_square(0.25);
        let a = assemble_stiffness(&m);
        let ones = vec![1.0; m.n_nodes()];
        assert!(a.apply(&ones).iter().all(|v| v.abs() < 1e-13));
        assert!((a.quadratic(&xs(&m)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stiffness_matches_element_formula() {
        // two-triangle square: gradients read off the right-angle legs
        let m = unit_square(1.0);
        let a = assemble_stiffness(&m);
        let u = [0.3, -1.2, 0.7, 2.1];
        // triangles (0,1,3) and (0,3,2); energy = Σ_T area·|∇u|²
        let grad = |p: [usize; 3]| {
            let g = shape_gradients(&m, &p);
            let gx: f64 = (0..3).map(|k| g[k][0] * u[p[k]]).sum();
            let gy: f64 = (0..3).map(|k| g[k][1] * u[p[k]]).sum();
            0.5 * (gx * gx + gy * gy)
        };
        let expected = grad([0, 1, 3]) + grad([0, 3, 2]);
        // the same quantity by direct finite differences of the linear pieces
        let t1 = 0.5 * ((u[1] - u[0]).powi(2) + (u[3] - u[1]).powi(2));
        let t2 = 0.5 * ((u[3] - u[2]).powi(2) + (u[2] - u[0]).powi(2));
        assert!((expected - (t1 + t2)).abs() < 1e-14);
        assert!((a.quadratic(&u) - (t1 + t2)).abs() < 1e-14);
    }

    #[test]
    fn mass_of_constants_and_x_squared() {
        let m = unit_square(0.25);
        let c1 = CoefficientField::constant(1.0);
        let c = assemble_domain_mass_weighted(&m, &c1, DomainQuadrature::ThreePoint).unwrap();
        let ones = vec![1.0; m.n_nodes()];
        assert!((c.quadratic(&ones) - 1.0).abs() < 1e-12);
        assert!((c.quadratic(&xs(&m)) - 1.0 / 3.0).abs() < 1e-12);

        let zero = assemble_domain_mass_weighted(&m, &CoefficientField::constant(0.0), DomainQuadrature::ThreePoint)
            .unwrap();
        assert!(zero.upper_entries().all(|(_, _, v)| v == 0.0));
    }

    #[test]
    fn negative_coefficient_is_rejected() {
        let m = unit_square(0.5);
        let bad = CoefficientField::new("x - 0.5", |p| p[0] - 0.5);
        assert!(matches!(
            assemble_domain_mass_weighted(&m, &bad, DomainQuadrature::ThreePoint),
            Err(Error::Validation { .. })
        ));
        assert!(DomainQuadrature::from_points(2).is_err());
    }

    #[test]
    fn boundary_mass_perimeters() {
        let m = unit_square(0.25);
        let b = assemble_boundary_mass(&m);
        let ones = vec![1.0; m.n_nodes()];
        assert!((b.quadratic(&ones) - 4.0).abs() < 1e-12);

        let mask = m.boundary_mask();
        let interior: Vec<f64> = (0..m.n_nodes()).map(|i| if mask[i] { 0.0 } else { 1.0 + i as f64 }).collect();
        assert!(b.apply(&interior).iter().all(|&v| v == 0.0));

        let d = generate_disk(1.0, 0.05, NodeCap::default()).unwrap();
        let bd = assemble_boundary_mass(&d);
        let perim = bd.quadratic(&vec![1.0; d.n_nodes()]);
        assert!((perim - 2.0 * PI).abs() / (2.0 * PI) < 1e-3);
    }

    #[test]
    fn boundary_load_consistency() {
        let m = generate_disk(1.0, 0.3, NodeCap::default()).unwrap();
        let ones = assemble_boundary_load(&m, |_| 1.0).unwrap();
        assert!((ones.iter().sum::<f64>() - m.boundary_length()).abs() < 1e-12);
        assert!(assemble_boundary_load(&m, |_| 0.0).unwrap().iter().all(|&v| v == 0.0));
        assert!(assemble_boundary_load(&m, |_| f64::NAN).is_err());

        // linear g equal to the trace of u_h reproduces B u
        let u: Vec<f64> = m.nodes().iter().map(|p| 0.3 + 2.0 * p[0] - p[1]).collect();
        let b = assemble_boundary_mass(&m);
        let via_load = assemble_boundary_load(&m, |p| 0.3 + 2.0 * p[0] - p[1]).unwrap();
        for (x, y) in via_load.iter().zip(b.apply(&u)) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn norms_of_constants() {
        let m = unit_square(0.25);
        let ops = OperatorTriple::assemble(&m, &CoefficientField::constant(1.0)).unwrap();
        let zero = vec![0.0; m.n_nodes()];
        assert_eq!(ops.c_norm(&zero).unwrap(), 0.0);
        assert_eq!(ops.boundary_norm(&zero).unwrap(), 0.0);
        let ones = vec![1.0; m.n_nodes()];
        assert!((ops.c_norm(&ones).unwrap() - 1.0).abs() < 1e-12);
        assert!((ops.boundary_norm(&ones).unwrap() - 2.0).abs() < 1e-12);
        assert!(ops.c_norm(&[1.0]).is_err());
    }

    #[test]
    fn quadrature_weights_sum_to_perimeter() {
        let m = generate_disk(1.0, 0.2, NodeCap::default()).unwrap();
        let q = BoundaryQuadrature::new(&m);
        assert!((q.total_weight() - m.boundary_length()).abs() < 1e-12);
        assert!(q.points().iter().all(|p| p.weight > 0.0));
    }
}
