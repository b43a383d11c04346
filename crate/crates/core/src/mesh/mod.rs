//! Structured triangulations of the computational rectangle.
//!
//! A [`Mesh`] is immutable: marking regions or moving nodes returns a new
//! mesh. Boundary edges are stored counter-clockwise as a single closed loop
//! starting at the lower-left corner, each with its outward unit normal.

mod inclusion;
pub mod io;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use inclusion::{InclusionSpec, Overlap, Primitive};

/// Axis-aligned rectangle `[xmin, xmax] × [ymin, ymax]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Rect {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Result<Self> {
        if !(xmax > xmin && ymax > ymin) || ![xmin, xmax, ymin, ymax].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("degenerate rectangle"));
        }
        Ok(Self { xmin, xmax, ymin, ymax })
    }

    /// The square `[-0.5, 0.5]²`.
    pub fn centered_unit() -> Self {
        Self { xmin: -0.5, xmax: 0.5, ymin: -0.5, ymax: 0.5 }
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn perimeter(&self) -> f64 {
        2.0 * (self.width() + self.height())
    }

    pub fn contains_strictly(&self, p: [f64; 2]) -> bool {
        p[0] > self.xmin && p[0] < self.xmax && p[1] > self.ymin && p[1] < self.ymax
    }

    pub fn approx_eq(&self, other: &Rect, tol: f64) -> bool {
        (self.xmin - other.xmin).abs() <= tol
            && (self.xmax - other.xmax).abs() <= tol
            && (self.ymin - other.ymin).abs() <= tol
            && (self.ymax - other.ymax).abs() <= tol
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub normal: [f64; 2],
}

/// Edge of the region interface ∂ω, oriented counter-clockwise around ω,
/// with the unit normal pointing out of ω.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterfaceEdge {
    pub vertices: [usize; 2],
    pub normal: [f64; 2],
    pub length: f64,
}

/// Per-vertex displacement field.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub values: Vec<[f64; 2]>,
}

impl VectorField {
    pub fn zeros(n: usize) -> Self {
        Self { values: vec![[0.0; 2]; n] }
    }

    pub fn from_fn(mesh: &Mesh, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        Self { values: mesh.vertices.iter().map(|&p| f(p)).collect() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { values: self.values.iter().map(|v| [s * v[0], s * v[1]]).collect() }
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max)
    }
}

/// Returned by [`Mesh::mark_region`] when no element barycenter falls in ω.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegionWarning {
    EmptyRegion,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    element_region: Vec<bool>,
    bounds: Rect,
}

pub fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

/// Normalized shape quality `2 r_in / R_circ`, equal to 1 for an equilateral
/// triangle and 0 for a degenerate one.
pub fn triangle_quality(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    let area = signed_area(a, b, c);
    if area <= 0.0 {
        return 0.0;
    }
    let la = dist(b, c);
    let lb = dist(c, a);
    let lc = dist(a, b);
    16.0 * area * area / ((la + lb + lc) * la * lb * lc)
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Structured `nx × ny` triangulation of `bounds`. Each cell is split along
/// a diagonal whose direction alternates with the cell parity, so for even
/// `nx`, `ny` the mesh is invariant under the reflections of the rectangle.
pub fn build_rect_mesh(nx: usize, ny: usize, bounds: Rect) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::invalid(format!("mesh resolution must be positive, got {nx}×{ny}")));
    }
    let bounds = Rect::new(bounds.xmin, bounds.xmax, bounds.ymin, bounds.ymax)?;
    let hx = bounds.width() / nx as f64;
    let hy = bounds.height() / ny as f64;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        // pin the last row/column to the exact bound so reflections match bitwise
        let y = if j == ny { bounds.ymax } else { bounds.ymin + j as f64 * hy };
        for i in 0..=nx {
            let x = if i == nx { bounds.xmax } else { bounds.xmin + i as f64 * hx };
            vertices.push([x, y]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v01, v11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            if (i + j) % 2 == 0 {
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            } else {
                triangles.push([v00, v10, v01]);
                triangles.push([v10, v11, v01]);
            }
        }
    }
    Mesh::from_parts(vertices, triangles, bounds)
}

impl Mesh {
    /// Assembles a mesh from raw connectivity, orienting triangles
    /// counter-clockwise and extracting the boundary loop.
    pub fn from_parts(vertices: Vec<[f64; 2]>, mut triangles: Vec<[usize; 3]>, bounds: Rect) -> Result<Self> {
        let nv = vertices.len();
        for (k, t) in triangles.iter_mut().enumerate() {
            if t.iter().any(|&v| v >= nv) {
                return Err(Error::invalid(format!("triangle {k} references a missing vertex")));
            }
            let area = signed_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            if area == 0.0 {
                return Err(Error::InvertedElement { triangle: k, area, floor: 0.0 });
            }
            if area < 0.0 {
                t.swap(1, 2);
            }
        }
        let boundary_edges = extract_boundary(&vertices, &triangles)?;
        let element_region = vec![false; triangles.len()];
        Ok(Self { vertices, triangles, boundary_edges, element_region, bounds })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn element_region(&self) -> &[bool] {
        &self.element_region
    }

    pub fn bounds(&self) -> Rect {
        self.bounds
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn corners(&self, k: usize) -> [[f64; 2]; 3] {
        let t = self.triangles[k];
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    pub fn triangle_area(&self, k: usize) -> f64 {
        let [a, b, c] = self.corners(k);
        signed_area(a, b, c)
    }

    pub fn barycenter(&self, k: usize) -> [f64; 2] {
        let [a, b, c] = self.corners(k);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|k| self.triangle_area(k)).sum()
    }

    pub fn tagged_area(&self) -> f64 {
        (0..self.num_triangles())
            .filter(|&k| self.element_region[k])
            .map(|k| self.triangle_area(k))
            .sum()
    }

    pub fn num_tagged(&self) -> usize {
        self.element_region.iter().filter(|&&t| t).count()
    }

    pub fn boundary_vertex_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.num_vertices()];
        for e in &self.boundary_edges {
            mask[e.vertices[0]] = true;
            mask[e.vertices[1]] = true;
        }
        mask
    }

    /// Mesh spacing estimate: the longest edge.
    pub fn max_edge_length(&self) -> f64 {
        (0..self.num_triangles())
            .flat_map(|k| {
                let [a, b, c] = self.corners(k);
                [dist(a, b), dist(b, c), dist(c, a)]
            })
            .fold(0.0, f64::max)
    }

    /// Tags every triangle whose barycenter lies in `spec`.
    pub fn mark_region(&self, spec: &InclusionSpec) -> (Mesh, Option<RegionWarning>) {
        let element_region: Vec<bool> =
            (0..self.num_triangles()).map(|k| spec.contains(self.barycenter(k))).collect();
        let warning = if element_region.iter().any(|&t| t) {
            None
        } else {
            log::warn!("inclusion covers no element barycenter; region left empty");
            Some(RegionWarning::EmptyRegion)
        };
        (Mesh { element_region, ..self.clone() }, warning)
    }

    pub fn with_region(&self, element_region: Vec<bool>) -> Result<Mesh> {
        if element_region.len() != self.num_triangles() {
            return Err(Error::invalid("region tag count differs from triangle count"));
        }
        Ok(Mesh { element_region, ..self.clone() })
    }

    pub fn clear_region(&self) -> Mesh {
        Mesh { element_region: vec![false; self.num_triangles()], ..self.clone() }
    }

    /// Moves every vertex `x ↦ x + t·θ(x)`. Fails when any triangle's signed
    /// area drops to `1e-3` of its current value or below.
    pub fn deform(&self, theta: &VectorField, t: f64) -> Result<Mesh> {
        if theta.len() != self.num_vertices() {
            return Err(Error::invalid("deformation field length differs from vertex count"));
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::invalid(format!("step must be nonnegative, got {t}")));
        }
        let vertices: Vec<[f64; 2]> = self
            .vertices
            .iter()
            .zip(&theta.values)
            .map(|(p, v)| [p[0] + t * v[0], p[1] + t * v[1]])
            .collect();
        for (k, tri) in self.triangles.iter().enumerate() {
            let old = self.triangle_area(k);
            let new = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            let floor = INVERSION_FLOOR * old;
            if new <= floor {
                return Err(Error::InvertedElement { triangle: k, area: new, floor });
            }
        }
        Ok(Mesh { vertices, ..self.clone() })
    }

    pub fn min_triangle_quality(&self) -> f64 {
        (0..self.num_triangles())
            .map(|k| {
                let [a, b, c] = self.corners(k);
                triangle_quality(a, b, c)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Edges separating tagged from untagged triangles. A tagged triangle
    /// touching ∂Ω does not contribute there: ω is assumed compactly inside.
    pub fn interface_edges(&self) -> Vec<InterfaceEdge> {
        let mut owner: HashMap<(usize, usize), (usize, [usize; 2])> = HashMap::new();
        let mut shared = Vec::new();
        for (k, t) in self.triangles.iter().enumerate() {
            for e in 0..3 {
                let a = t[e];
                let b = t[(e + 1) % 3];
                let key = (a.min(b), a.max(b));
                if let Some((other, _)) = owner.remove(&key) {
                    shared.push((k, other, [a, b]));
                } else {
                    owner.insert(key, (k, [a, b]));
                }
            }
        }
        let mut edges = Vec::new();
        for (k, other, [a, b]) in shared {
            let (tk, to) = (self.element_region[k], self.element_region[other]);
            if tk == to {
                continue;
            }
            // [a, b] is counter-clockwise in triangle k
            let dir = if tk { [a, b] } else { [b, a] };
            let p = self.vertices[dir[0]];
            let q = self.vertices[dir[1]];
            let length = dist(p, q);
            let normal = [(q[1] - p[1]) / length, (p[0] - q[0]) / length];
            edges.push(InterfaceEdge { vertices: dir, normal, length });
        }
        edges.sort_by_key(|e| (e.vertices[0], e.vertices[1]));
        edges
    }

    /// Vertex-to-vertex adjacency through triangle edges, sorted.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut nbrs = vec![Vec::new(); self.num_vertices()];
        for t in &self.triangles {
            for e in 0..3 {
                let a = t[e];
                let b = t[(e + 1) % 3];
                nbrs[a].push(b);
                nbrs[b].push(a);
            }
        }
        for n in &mut nbrs {
            n.sort_unstable();
            n.dedup();
        }
        nbrs
    }
}

/// Signed-area floor, relative to the pre-deformation area.
pub const INVERSION_FLOOR: f64 = 1e-3;

fn extract_boundary(vertices: &[[f64; 2]], triangles: &[[usize; 3]]) -> Result<Vec<BoundaryEdge>> {
    let mut count: HashMap<(usize, usize), (usize, usize, u8)> = HashMap::new();
    for t in triangles {
        for e in 0..3 {
            let a = t[e];
            let b = t[(e + 1) % 3];
            let entry = count.entry((a.min(b), a.max(b))).or_insert((a, b, 0));
            entry.2 += 1;
        }
    }
    let mut next: HashMap<usize, usize> = HashMap::new();
    for &(a, b, n) in count.values() {
        if n == 1 && next.insert(a, b).is_some() {
            return Err(Error::invalid("boundary is not a simple loop"));
        }
    }
    if next.is_empty() {
        return Err(Error::invalid("mesh has no boundary"));
    }
    // start at the lowest-leftmost boundary vertex
    let start = *next
        .keys()
        .min_by(|&&a, &&b| {
            let (pa, pb) = (vertices[a], vertices[b]);
            (pa[1], pa[0]).partial_cmp(&(pb[1], pb[0])).unwrap()
        })
        .unwrap();
    let mut edges = Vec::with_capacity(next.len());
    let mut a = start;
    loop {
        let b = next[&a];
        let (p, q) = (vertices[a], vertices[b]);
        let len = dist(p, q);
        edges.push(BoundaryEdge { vertices: [a, b], normal: [(q[1] - p[1]) / len, (p[0] - q[0]) / len] });
        a = b;
        if a == start {
            break;
        }
        if edges.len() > next.len() {
            return Err(Error::invalid("boundary loop does not close"));
        }
    }
    if edges.len() != next.len() {
        return Err(Error::invalid("boundary consists of several loops"));
    }
    Ok(edges)
}
