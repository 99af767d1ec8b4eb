//! Triangular meshes of the domain with an explicit, oriented boundary.
//!
//! Triangles are stored counterclockwise and boundary edges are stored in the
//! direction that keeps the domain on the left, so every boundary edge appears
//! as a directed edge of exactly one triangle.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::hash::{Hash, Hasher};
use std::path::Path;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

pub const DEFAULT_NODE_CAP: usize = 200_000;
pub const NODE_CAP_ENV: &str = "STEKLOV_NODE_CAP";

const MODULE: &str = "mesh";

/// Upper bound on the number of nodes a generator or refinement may produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeCap(pub usize);

impl NodeCap {
    /// Reads `STEKLOV_NODE_CAP`, falling back to the default cap.
    pub fn from_env() -> Self {
        std::env::var(NODE_CAP_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .map(NodeCap)
            .unwrap_or_default()
    }

    fn check(self, requested: usize) -> Result<()> {
        if requested > self.0 {
            return Err(Error::ResourceLimit {
                module: MODULE,
                detail: format!("{requested} nodes requested, cap is {}", self.0),
            });
        }
        Ok(())
    }
}

impl Default for NodeCap {
    fn default() -> Self {
        NodeCap(DEFAULT_NODE_CAP)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainTag {
    Disk { radius: f64 },
    Square { side: f64 },
    File,
}

impl DomainTag {
    pub fn name(&self) -> &'static str {
        match self {
            DomainTag::Disk { .. } => "disk",
            DomainTag::Square { .. } => "square",
            DomainTag::File => "file",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<[usize; 2]>,
    domain: DomainTag,
    id: u64,
}

impl Mesh {
    /// Builds a mesh after checking every structural invariant.
    pub fn new(
        nodes: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<[usize; 2]>,
        domain: DomainTag,
    ) -> Result<Self> {
        validate(&nodes, &triangles, &boundary_edges)?;
        let id = fingerprint(&nodes, &triangles, &boundary_edges);
        Ok(Mesh { nodes, triangles, boundary_edges, domain, id })
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[[usize; 2]] {
        &self.boundary_edges
    }

    pub fn domain(&self) -> DomainTag {
        self.domain
    }

    /// Content fingerprint; equal meshes share an id.
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        let mut edges: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| (0..3).map(move |k| sorted_pair(t[k], t[(k + 1) % 3])))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(self.nodes[a], self.nodes[b], self.nodes[c])
    }

    pub fn edge_length(&self, i: usize, j: usize) -> f64 {
        dist(self.nodes[i], self.nodes[j])
    }

    pub fn max_edge_length(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|t| (0..3).map(move |k| (t[k], t[(k + 1) % 3])))
            .map(|(i, j)| self.edge_length(i, j))
            .fold(0.0, f64::max)
    }

    pub fn boundary_length(&self) -> f64 {
        self.boundary_edges.iter().map(|&[i, j]| self.edge_length(i, j)).sum()
    }

    /// Flags nodes touched by a boundary edge.
    pub fn boundary_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.nodes.len()];
        for &[i, j] in &self.boundary_edges {
            mask[i] = true;
            mask[j] = true;
        }
        mask
    }

    /// Boundary node indices in ascending order.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        let mask = self.boundary_mask();
        (0..self.nodes.len()).filter(|&i| mask[i]).collect()
    }

    /// Boundary loops as node sequences, each starting at its smallest node
    /// and following edge orientation. The closing node is not repeated.
    pub fn boundary_loops(&self) -> Vec<Vec<usize>> {
        let next: HashMap<usize, usize> = self.boundary_edges.iter().map(|&[i, j]| (i, j)).collect();
        let mut starts: Vec<usize> = next.keys().copied().collect();
        starts.sort_unstable();
        let mut visited = HashMap::new();
        let mut loops = Vec::new();
        for s in starts {
            if visited.contains_key(&s) {
                continue;
            }
            let mut lp = vec![s];
            visited.insert(s, ());
            let mut cur = next[&s];
            while cur != s {
                visited.insert(cur, ());
                lp.push(cur);
                cur = next[&cur];
            }
            loops.push(lp);
        }
        loops
    }

    /// Writes the `steklov-mesh v1` text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("steklov-mesh v1\n");
        let _ = writeln!(out, "nodes {}", self.nodes.len());
        for p in &self.nodes {
            let _ = writeln!(out, "{} {}", p[0], p[1]);
        }
        let _ = writeln!(out, "triangles {}", self.triangles.len());
        for t in &self.triangles {
            let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
        }
        let _ = writeln!(out, "boundary {}", self.boundary_edges.len());
        for e in &self.boundary_edges {
            let _ = writeln!(out, "{} {}", e[0], e[1]);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let mut next_line = |what: &str| -> Result<(usize, &str)> {
            lines.next().ok_or_else(|| Error::Parse {
                line: text.lines().count() + 1,
                detail: format!("unexpected end of file, expected {what}"),
            })
        };
        let (line, header) = if text.trim().is_empty() {
            return Err(Error::Parse { line: 1, detail: "empty file".into() });
        } else {
            next_line("header")?
        };
        if header != "steklov-mesh v1" {
            return Err(Error::Parse { line, detail: format!("bad header `{header}`") });
        }

        let n_nodes = parse_count(next_line("`nodes N`")?, "nodes")?;
        let mut nodes = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let (line, l) = next_line("node coordinates")?;
            let v: [f64; 2] = parse_fields(line, l)?;
            nodes.push(v);
        }
        let n_tri = parse_count(next_line("`triangles M`")?, "triangles")?;
        let mut triangles = Vec::with_capacity(n_tri);
        for _ in 0..n_tri {
            let (line, l) = next_line("triangle indices")?;
            triangles.push(parse_fields::<usize, 3>(line, l)?);
        }
        let n_bnd = parse_count(next_line("`boundary K`")?, "boundary")?;
        let mut boundary = Vec::with_capacity(n_bnd);
        for _ in 0..n_bnd {
            let (line, l) = next_line("boundary edge")?;
            boundary.push(parse_fields::<usize, 2>(line, l)?);
        }
        Mesh::new(nodes, triangles, boundary, DomainTag::File)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Mesh::from_text(&text)
    }
}

fn parse_count((line, l): (usize, &str), keyword: &str) -> Result<usize> {
    let mut it = l.split_whitespace();
    match (it.next(), it.next(), it.next()) {
        (Some(k), Some(n), None) if k == keyword => n.parse().map_err(|_| Error::Parse {
            line,
            detail: format!("bad count `{n}`"),
        }),
        _ => Err(Error::Parse { line, detail: format!("expected `{keyword} <count>`, found `{l}`") }),
    }
}

fn parse_fields<T: std::str::FromStr + Copy + Default, const N: usize>(line: usize, l: &str) -> Result<[T; N]> {
    let mut out = [T::default(); N];
    let mut it = l.split_whitespace();
    for slot in out.iter_mut() {
        let tok = it
            .next()
            .ok_or_else(|| Error::Parse { line, detail: format!("expected {N} fields, found `{l}`") })?;
        *slot = tok.parse().map_err(|_| Error::Parse { line, detail: format!("cannot parse `{tok}`") })?;
    }
    if it.next().is_some() {
        return Err(Error::Parse { line, detail: format!("expected {N} fields, found `{l}`") });
    }
    Ok(out)
}

pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

pub fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn sorted_pair(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

fn fingerprint(nodes: &[Point], triangles: &[[usize; 3]], boundary: &[[usize; 2]]) -> u64 {
    let mut h = DefaultHasher::new();
    for p in nodes {
        p[0].to_bits().hash(&mut h);
        p[1].to_bits().hash(&mut h);
    }
    triangles.hash(&mut h);
    boundary.hash(&mut h);
    h.finish()
}

fn invariant(invariant: &'static str, detail: String) -> Error {
    Error::Invariant { invariant, detail }
}

fn validate(nodes: &[Point], triangles: &[[usize; 3]], boundary: &[[usize; 2]]) -> Result<()> {
    let n = nodes.len();
    if triangles.is_empty() {
        return Err(invariant("non-empty", "mesh has no triangles".into()));
    }
    for (k, p) in nodes.iter().enumerate() {
        if !p[0].is_finite() || !p[1].is_finite() {
            return Err(invariant("finite-coordinates", format!("node {k} is not finite")));
        }
    }
    for (k, t) in triangles.iter().enumerate() {
        if t.iter().any(|&i| i >= n) {
            return Err(invariant("triangle-index-range", format!("triangle {k} {t:?} references a node >= {n}")));
        }
        let area = signed_area(nodes[t[0]], nodes[t[1]], nodes[t[2]]);
        if !(area > 0.0) {
            return Err(invariant(
                "positive-area",
                format!("triangle {k} {t:?} has signed area {area:e}"),
            ));
        }
    }

    // directed edge -> owning triangle
    let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
    let mut undirected: HashMap<(usize, usize), u32> = HashMap::new();
    for (k, t) in triangles.iter().enumerate() {
        for e in 0..3 {
            let (i, j) = (t[e], t[(e + 1) % 3]);
            if directed.insert((i, j), k).is_some() {
                return Err(invariant("edge-manifold", format!("directed edge ({i}, {j}) used twice")));
            }
            *undirected.entry(sorted_pair(i, j)).or_default() += 1;
        }
    }
    let mut on_boundary: HashMap<(usize, usize), ()> = HashMap::new();
    for (k, &[i, j]) in boundary.iter().enumerate() {
        if i >= n || j >= n || i == j {
            return Err(invariant("boundary-index-range", format!("boundary edge {k} ({i}, {j}) is invalid")));
        }
        if !directed.contains_key(&(i, j)) {
            return Err(invariant(
                "boundary-orientation",
                format!("boundary edge {k} ({i}, {j}) is not a counterclockwise triangle edge"),
            ));
        }
        if undirected.get(&sorted_pair(i, j)) != Some(&1) {
            return Err(invariant("boundary-single-triangle", format!("boundary edge {k} ({i}, {j}) is shared")));
        }
        if on_boundary.insert(sorted_pair(i, j), ()).is_some() {
            return Err(invariant("boundary-unique", format!("boundary edge {k} ({i}, {j}) listed twice")));
        }
    }
    for (&(i, j), &count) in &undirected {
        if count == 1 && !on_boundary.contains_key(&(i, j)) {
            return Err(invariant("boundary-complete", format!("edge ({i}, {j}) is free but not tagged boundary")));
        }
    }

    let mut out_deg = vec![0u32; n];
    let mut in_deg = vec![0u32; n];
    for &[i, j] in boundary {
        out_deg[i] += 1;
        in_deg[j] += 1;
    }
    if let Some(v) = (0..n).find(|&v| out_deg[v] != in_deg[v] || out_deg[v] > 1) {
        return Err(invariant("boundary-closed-loops", format!("boundary is not a union of closed loops at node {v}")));
    }
    Ok(())
}

/// Concentric-ring triangulation of the disk centered at the origin.
///
/// Ring `k` carries `6k` equally spaced nodes at radius `k·radius/n_rings`
/// with `n_rings = ceil(radius / h)`; neighbouring rings are stitched by an
/// angular merge.
pub fn generate_disk(radius: f64, h: f64, cap: NodeCap) -> Result<Mesh> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::param(MODULE, format!("disk radius must be positive, got {radius}")));
    }
    if !(h > 0.0 && h < radius) {
        return Err(Error::param(MODULE, format!("need 0 < h < radius, got h = {h}, radius = {radius}")));
    }
    let rings_f = (radius / h).ceil();
    if rings_f > 1e6 {
        return Err(Error::ResourceLimit { module: MODULE, detail: format!("h = {h} needs {rings_f} rings") });
    }
    let rings = rings_f as usize;
    cap.check(1 + 3 * rings * (rings + 1))?;

    let mut nodes = vec![[0.0, 0.0]];
    let mut ring_start = vec![0usize];
    for k in 1..=rings {
        ring_start.push(nodes.len());
        let r = radius * k as f64 / rings as f64;
        let m = 6 * k;
        for j in 0..m {
            let theta = 2.0 * PI * j as f64 / m as f64;
            let (s, c) = theta.sin_cos();
            if k == rings {
                nodes.push([radius * c, radius * s]);
            } else {
                nodes.push([r * c, r * s]);
            }
        }
    }

    let mut triangles = Vec::with_capacity(6 * rings * rings);
    for k in 1..=rings {
        let outer: Vec<usize> = (0..6 * k).map(|j| ring_start[k] + j).collect();
        let inner: Vec<usize> = if k == 1 { vec![0] } else { (0..6 * (k - 1)).map(|j| ring_start[k - 1] + j).collect() };
        stitch_rings(&nodes, &inner, &outer, &mut triangles);
    }

    let bstart = ring_start[rings];
    let m = 6 * rings;
    let boundary = (0..m).map(|j| [bstart + j, bstart + (j + 1) % m]).collect();
    Mesh::new(nodes, triangles, boundary, DomainTag::Disk { radius })
}

fn stitch_rings(nodes: &[Point], inner: &[usize], outer: &[usize], triangles: &mut Vec<[usize; 3]>) {
    let (m, n) = (inner.len(), outer.len());
    if m == 1 {
        for j in 0..n {
            push_ccw(nodes, triangles, [inner[0], outer[j], outer[(j + 1) % n]]);
        }
        return;
    }
    let (mut i, mut j) = (0usize, 0usize);
    while i < m || j < n {
        // advance the side that yields the shorter new diagonal
        let advance_outer = if i == m {
            true
        } else if j == n {
            false
        } else {
            let via_outer = dist(nodes[inner[i % m]], nodes[outer[(j + 1) % n]]);
            let via_inner = dist(nodes[inner[(i + 1) % m]], nodes[outer[j % n]]);
            via_outer <= via_inner
        };
        if advance_outer {
            push_ccw(nodes, triangles, [inner[i % m], outer[j % n], outer[(j + 1) % n]]);
            j += 1;
        } else {
            push_ccw(nodes, triangles, [inner[i % m], outer[j % n], inner[(i + 1) % m]]);
            i += 1;
        }
    }
}

fn push_ccw(nodes: &[Point], triangles: &mut Vec<[usize; 3]>, t: [usize; 3]) {
    if signed_area(nodes[t[0]], nodes[t[1]], nodes[t[2]]) < 0.0 {
        triangles.push([t[0], t[2], t[1]]);
    } else {
        triangles.push(t);
    }
}

/// Structured square `[0, side]²` with `ceil(side/h)` cells per side, each
/// cell cut along its rising diagonal.
pub fn generate_square(side: f64, h: f64, cap: NodeCap) -> Result<Mesh> {
    if !(side > 0.0 && side.is_finite()) {
        return Err(Error::param(MODULE, format!("square side must be positive, got {side}")));
    }
    if !(h > 0.0 && h <= side) {
        return Err(Error::param(MODULE, format!("need 0 < h <= side, got h = {h}, side = {side}")));
    }
    let cells_f = (side / h - 1e-9).ceil().max(1.0);
    if cells_f > 1e6 {
        return Err(Error::ResourceLimit { module: MODULE, detail: format!("h = {h} needs {cells_f} cells per side") });
    }
    let cells = cells_f as usize;
    cap.check((cells + 1) * (cells + 1))?;

    let idx = |i: usize, j: usize| j * (cells + 1) + i;
    let step = side / cells as f64;
    let coord = |i: usize| if i == cells { side } else { i as f64 * step };
    let mut nodes = Vec::with_capacity((cells + 1) * (cells + 1));
    for j in 0..=cells {
        for i in 0..=cells {
            nodes.push([coord(i), coord(j)]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * cells * cells);
    for j in 0..cells {
        for i in 0..cells {
            let (p00, p10, p01, p11) = (idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1));
            triangles.push([p00, p10, p11]);
            triangles.push([p00, p11, p01]);
        }
    }
    let mut boundary = Vec::with_capacity(4 * cells);
    for i in 0..cells {
        boundary.push([idx(i, 0), idx(i + 1, 0)]);
    }
    for j in 0..cells {
        boundary.push([idx(cells, j), idx(cells, j + 1)]);
    }
    for i in (1..=cells).rev() {
        boundary.push([idx(i, cells), idx(i - 1, cells)]);
    }
    for j in (1..=cells).rev() {
        boundary.push([idx(0, j), idx(0, j - 1)]);
    }
    Mesh::new(nodes, triangles, boundary, DomainTag::Square { side })
}

/// Uniform red refinement. Existing nodes keep their indices; edge midpoints
/// are appended in first-visit order. Boundary midpoints of disk meshes are
/// projected back onto the circle.
pub fn refine(mesh: &Mesh, cap: NodeCap) -> Result<Mesh> {
    let n_new = mesh.n_nodes() + mesh.n_edges();
    cap.check(n_new)?;

    let mut nodes = mesh.nodes.clone();
    nodes.reserve(n_new - nodes.len());
    let mut mid: HashMap<(usize, usize), usize> = HashMap::with_capacity(mesh.n_edges());
    let mut midpoint = |i: usize, j: usize, nodes: &mut Vec<Point>| -> usize {
        *mid.entry(sorted_pair(i, j)).or_insert_with(|| {
            let (a, b) = (nodes[i], nodes[j]);
            nodes.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
            nodes.len() - 1
        })
    };

    let mut triangles = Vec::with_capacity(4 * mesh.n_triangles());
    for &[a, b, c] in &mesh.triangles {
        let ab = midpoint(a, b, &mut nodes);
        let bc = midpoint(b, c, &mut nodes);
        let ca = midpoint(c, a, &mut nodes);
        triangles.push([a, ab, ca]);
        triangles.push([ab, b, bc]);
        triangles.push([ca, bc, c]);
        triangles.push([ab, bc, ca]);
    }
    let mut boundary = Vec::with_capacity(2 * mesh.boundary_edges.len());
    for &[i, j] in &mesh.boundary_edges {
        let m = midpoint(i, j, &mut nodes);
        if let DomainTag::Disk { radius } = mesh.domain {
            let p = nodes[m];
            let r = p[0].hypot(p[1]);
            nodes[m] = [p[0] * radius / r, p[1] * radius / r];
        }
        boundary.push([i, m]);
        boundary.push([m, j]);
    }
    Mesh::new(nodes, triangles, boundary, mesh.domain)
}

/// Nodal values of a piecewise-linear function on a specific mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteFunction {
    coefficients: Vec<f64>,
    mesh_id: u64,
}

impl DiscreteFunction {
    pub fn new(mesh: &Mesh, coefficients: Vec<f64>) -> Result<Self> {
        crate::error::check_dim("mesh", mesh.n_nodes(), coefficients.len())?;
        if let Some(k) = coefficients.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(MODULE, format!("coefficient {k} is not finite")));
        }
        Ok(DiscreteFunction { coefficients, mesh_id: mesh.id() })
    }

    pub fn zeros(mesh: &Mesh) -> Self {
        DiscreteFunction { coefficients: vec![0.0; mesh.n_nodes()], mesh_id: mesh.id() }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn into_coefficients(self) -> Vec<f64> {
        self.coefficients
    }

    pub fn mesh_id(&self) -> u64 {
        self.mesh_id
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }
}
