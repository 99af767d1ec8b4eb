//! Symmetric sparse storage and an envelope Cholesky factorization.

use std::collections::VecDeque;
use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Stiffness,
    DomainMassWeighted,
    BoundaryMass,
    /// Boundary mass weighted pointwise by a sampled function.
    BoundaryMassWeighted,
    Combination,
}

impl OperatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            OperatorKind::Stiffness => "stiffness",
            OperatorKind::DomainMassWeighted => "domain_mass_weighted",
            OperatorKind::BoundaryMass => "boundary_mass",
            OperatorKind::BoundaryMassWeighted => "boundary_mass_weighted",
            OperatorKind::Combination => "combination",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "stiffness" => OperatorKind::Stiffness,
            "domain_mass_weighted" => OperatorKind::DomainMassWeighted,
            "boundary_mass" => OperatorKind::BoundaryMass,
            "boundary_mass_weighted" => OperatorKind::BoundaryMassWeighted,
            "combination" => OperatorKind::Combination,
            _ => return None,
        })
    }
}

/// Symmetric matrix storing only its upper triangle in compressed rows.
///
/// Symmetry is structural: `(i, j)` and `(j, i)` read the same stored value.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricSparseOperator {
    dim: usize,
    kind: OperatorKind,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SymmetricSparseOperator {
    /// Sums `(i, j, v)` contributions. Entries below the diagonal are mirrored
    /// into the upper triangle; duplicates are summed in input order.
    pub fn from_triplets(dim: usize, kind: OperatorKind, triplets: Vec<(usize, usize, f64)>) -> Self {
        let mut t: Vec<(usize, usize, f64)> =
            triplets.into_iter().map(|(i, j, v)| if i <= j { (i, j, v) } else { (j, i, v) }).collect();
        // stable sort keeps the summation order deterministic
        t.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(t.len());
        let mut vals: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in t {
            assert!(j < dim, "triplet ({i}, {j}) outside dimension {dim}");
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        SymmetricSparseOperator { dim, kind, row_ptr, cols, vals }
    }

    pub fn zeros(dim: usize, kind: OperatorKind) -> Self {
        SymmetricSparseOperator { dim, kind, row_ptr: vec![0; dim + 1], cols: vec![], vals: vec![] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    /// Number of stored (upper-triangle) entries.
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Upper-triangle entries `(i, j, value)` with `i <= j`.
    pub fn upper_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (i, self.cols[k], self.vals[k]))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[range.clone()].binary_search(&c) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.apply_add(1.0, x, &mut y);
        y
    }

    /// `y += alpha * Op x`.
    pub fn apply_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for i in 0..self.dim {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k];
                let v = self.vals[k];
                acc += v * x[j];
                if j != i {
                    y[j] += alpha * v * x[i];
                }
            }
            y[i] += alpha * acc;
        }
    }

    pub fn checked_apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("assembly", self.dim, x.len())?;
        Ok(self.apply(x))
    }

    /// `xᵀ Op y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k];
                let v = self.vals[k];
                s += v * x[i] * y[j];
                if j != i {
                    s += v * x[j] * y[i];
                }
            }
        }
        s
    }

    pub fn quadratic(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    /// `Σ cₖ Opₖ` over operators of equal dimension.
    pub fn combine(terms: &[(f64, &SymmetricSparseOperator)]) -> Self {
        let dim = terms.first().map_or(0, |(_, op)| op.dim);
        let mut triplets = Vec::new();
        for (c, op) in terms {
            assert_eq!(op.dim, dim, "operator dimensions differ");
            triplets.extend(op.upper_entries().map(|(i, j, v)| (i, j, c * v)));
        }
        let kind = match terms {
            [(c, op)] if *c == 1.0 => op.kind,
            _ => OperatorKind::Combination,
        };
        SymmetricSparseOperator::from_triplets(dim, kind, triplets)
    }

    /// Principal submatrix on `idx` (in the given order).
    pub fn principal_submatrix(&self, idx: &[usize]) -> Self {
        let mut pos = vec![usize::MAX; self.dim];
        for (new, &old) in idx.iter().enumerate() {
            pos[old] = new;
        }
        let triplets = self
            .upper_entries()
            .filter(|&(i, j, _)| pos[i] != usize::MAX && pos[j] != usize::MAX)
            .map(|(i, j, v)| (pos[i], pos[j], v))
            .collect();
        SymmetricSparseOperator::from_triplets(idx.len(), self.kind, triplets)
    }

    /// Dense `rows × cols` block `Op[rows, cols]`.
    pub fn dense_block(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        let mut rpos = vec![usize::MAX; self.dim];
        let mut cpos = vec![usize::MAX; self.dim];
        for (k, &r) in rows.iter().enumerate() {
            rpos[r] = k;
        }
        for (k, &c) in cols.iter().enumerate() {
            cpos[c] = k;
        }
        let mut m = DMatrix::zeros(rows.len(), cols.len());
        for (i, j, v) in self.upper_entries() {
            if rpos[i] != usize::MAX && cpos[j] != usize::MAX {
                m[(rpos[i], cpos[j])] += v;
            }
            if i != j && rpos[j] != usize::MAX && cpos[i] != usize::MAX {
                m[(rpos[j], cpos[i])] += v;
            }
        }
        m
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let all: Vec<usize> = (0..self.dim).collect();
        self.dense_block(&all, &all)
    }

    /// `steklov-op v1` dump of the upper triangle.
    pub fn to_text(&self) -> String {
        let mut out = String::from("steklov-op v1\n");
        let _ = writeln!(out, "{} {} {}", self.dim, self.kind.name(), self.nnz());
        for (i, j, v) in self.upper_entries() {
            let _ = writeln!(out, "{i} {j} {v}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l.trim()));
        let parse_err = |line, detail: String| Error::Parse { line, detail };
        match lines.next() {
            Some((_, "steklov-op v1")) => {}
            Some((line, l)) => return Err(parse_err(line, format!("bad header `{l}`"))),
            None => return Err(parse_err(1, "empty file".into())),
        }
        let (line, l) = lines.next().ok_or_else(|| parse_err(2, "missing `dim kind nnz` line".into()))?;
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 3 {
            return Err(parse_err(line, format!("expected `dim kind nnz`, found `{l}`")));
        }
        let dim: usize = f[0].parse().map_err(|_| parse_err(line, format!("bad dimension `{}`", f[0])))?;
        let kind = OperatorKind::from_name(f[1]).ok_or_else(|| parse_err(line, format!("unknown kind `{}`", f[1])))?;
        let nnz: usize = f[2].parse().map_err(|_| parse_err(line, format!("bad nnz `{}`", f[2])))?;
        let mut triplets = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            let (line, l) = lines.next().ok_or_else(|| parse_err(line + 1, "unexpected end of file".into()))?;
            let f: Vec<&str> = l.split_whitespace().collect();
            let parsed = (f.len() == 3)
                .then(|| Some((f[0].parse().ok()?, f[1].parse().ok()?, f[2].parse().ok()?)))
                .flatten();
            match parsed {
                Some((i, j, v)) if i <= j && j < dim => triplets.push((i, j, v)),
                _ => return Err(parse_err(line, format!("bad entry `{l}`"))),
            }
        }
        Ok(SymmetricSparseOperator::from_triplets(dim, kind, triplets))
    }
}

/// Reverse Cuthill–McKee ordering of the operator's sparsity graph.
pub fn reverse_cuthill_mckee(op: &SymmetricSparseOperator) -> Vec<usize> {
    let n = op.dim();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j, _) in op.upper_entries() {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for a in adj.iter_mut() {
        a.sort_unstable();
        a.dedup();
    }
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (adj[v].len(), v));
    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(seed, &adj);
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            nbrs.sort_by_key(|&w| (adj[w].len(), w));
            for w in nbrs {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn pseudo_peripheral(seed: usize, adj: &[Vec<usize>]) -> usize {
    let mut start = seed;
    let mut ecc = 0;
    for _ in 0..8 {
        let levels = bfs_levels(start, adj);
        let (far, depth) = levels
            .iter()
            .enumerate()
            .filter_map(|(v, l)| l.map(|l| (v, l)))
            .max_by_key(|&(v, l)| (l, std::cmp::Reverse(adj[v].len()), std::cmp::Reverse(v)))
            .unwrap();
        if depth <= ecc {
            break;
        }
        ecc = depth;
        start = far;
    }
    start
}

fn bfs_levels(start: usize, adj: &[Vec<usize>]) -> Vec<Option<usize>> {
    let mut level = vec![None; adj.len()];
    level[start] = Some(0);
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        let l = level[v].unwrap();
        for &w in &adj[v] {
            if level[w].is_none() {
                level[w] = Some(l + 1);
                queue.push_back(w);
            }
        }
    }
    level
}

/// Envelope (skyline) Cholesky factor `P A Pᵀ = L Lᵀ` under an RCM ordering.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    perm: Vec<usize>,
    first: Vec<usize>,
    offset: Vec<usize>,
    data: Vec<f64>,
}

/// Pivots below this fraction of the largest diagonal entry are rejected.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

impl EnvelopeCholesky {
    pub fn factor(op: &SymmetricSparseOperator) -> Result<Self> {
        let n = op.dim();
        let perm = reverse_cuthill_mckee(op);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }

        // first[i] = smallest permuted column in row i of the lower triangle
        let mut first: Vec<usize> = (0..n).collect();
        for (i, j, _) in op.upper_entries() {
            let (a, b) = (inv[i], inv[j]);
            let (r, c) = if a >= b { (a, b) } else { (b, a) };
            first[r] = first[r].min(c);
        }
        let mut offset = vec![0usize; n + 1];
        for i in 0..n {
            offset[i + 1] = offset[i] + (i - first[i] + 1);
        }
        let mut data = vec![0.0; offset[n]];
        for (i, j, v) in op.upper_entries() {
            let (a, b) = (inv[i], inv[j]);
            let (r, c) = if a >= b { (a, b) } else { (b, a) };
            data[offset[r] + (c - first[r])] = v;
        }

        let max_diag = op.diagonal().iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let floor = PIVOT_TOLERANCE * max_diag.max(f64::MIN_POSITIVE);
        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let mut s = data[offset[i] + (j - fi)];
                for k in k0..j {
                    s -= data[offset[i] + (k - fi)] * data[offset[j] + (k - fj)];
                }
                let ljj = data[offset[j] + (j - fj)];
                data[offset[i] + (j - fi)] = s / ljj;
            }
            let mut d = data[offset[i] + (i - fi)];
            for k in fi..i {
                let l = data[offset[i] + (k - fi)];
                d -= l * l;
            }
            if !(d > floor) {
                return Err(Error::Definiteness { module: "factorization", row: perm[i], pivot: d });
            }
            data[offset[i] + (i - fi)] = d.sqrt();
        }
        Ok(EnvelopeCholesky { perm, first, offset, data })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            let mut s = y[i];
            for k in fi..i {
                s -= row[k - fi] * y[k];
            }
            y[i] = s / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            y[i] /= row[i - fi];
            let yi = y[i];
            for k in fi..i {
                y[k] -= row[k - fi] * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    /// Stored envelope size, a proxy for factorization cost.
    pub fn envelope_len(&self) -> usize {
        self.data.len()
    }
}
