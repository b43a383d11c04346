use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Lagrange element order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Degree {
    P1,
    P2,
}

impl Degree {
    pub fn local_dofs(self) -> usize {
        match self {
            Degree::P1 => 3,
            Degree::P2 => 6,
        }
    }

    pub fn facet_dofs(self) -> usize {
        match self {
            Degree::P1 => 2,
            Degree::P2 => 3,
        }
    }
}

impl TryFrom<u8> for Degree {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Degree::P1),
            2 => Ok(Degree::P2),
            other => Err(format!("element degree must be 1 or 2, got {other}")),
        }
    }
}

impl From<Degree> for u8 {
    fn from(d: Degree) -> u8 {
        match d {
            Degree::P1 => 1,
            Degree::P2 => 2,
        }
    }
}

impl fmt::Display for Degree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", u8::from(*self))
    }
}

/// Boundary facet: endpoint dofs and, for P2, the midpoint dof.
#[derive(Clone, Copy, Debug)]
pub struct Facet {
    pub dofs: [usize; 3],
    pub length: f64,
}

/// Global numbering of Lagrange nodes on a mesh. Vertex dofs come first and
/// share the vertex numbering; P2 edge midpoints follow in order of first
/// appearance.
#[derive(Clone, Debug)]
pub struct DofMap {
    mesh: Mesh,
    degree: Degree,
    points: Vec<[f64; 2]>,
    cells: Vec<[usize; 6]>,
    facets: Vec<Facet>,
    boundary_loop: Vec<usize>,
    arclength: Vec<f64>,
}

impl DofMap {
    pub fn new(mesh: &Mesh, degree: Degree) -> Self {
        let mut points = mesh.vertices().to_vec();
        let mut cells = Vec::with_capacity(mesh.num_triangles());
        let mut edge_dof: HashMap<(usize, usize), usize> = HashMap::new();
        for t in mesh.triangles() {
            let mut cell = [t[0], t[1], t[2], usize::MAX, usize::MAX, usize::MAX];
            if degree == Degree::P2 {
                for e in 0..3 {
                    let (a, b) = (t[e], t[(e + 1) % 3]);
                    let key = (a.min(b), a.max(b));
                    let id = *edge_dof.entry(key).or_insert_with(|| {
                        let (p, q) = (mesh.vertices()[a], mesh.vertices()[b]);
                        points.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
                        points.len() - 1
                    });
                    cell[3 + e] = id;
                }
            }
            cells.push(cell);
        }
        let mut facets = Vec::with_capacity(mesh.boundary_edges().len());
        let mut boundary_loop = Vec::new();
        let mut arclength = Vec::new();
        let mut s = 0.0;
        for e in mesh.boundary_edges() {
            let [a, b] = e.vertices;
            let (p, q) = (mesh.vertices()[a], mesh.vertices()[b]);
            let length = (q[0] - p[0]).hypot(q[1] - p[1]);
            let mid = match degree {
                Degree::P1 => usize::MAX,
                Degree::P2 => edge_dof[&(a.min(b), a.max(b))],
            };
            facets.push(Facet { dofs: [a, b, mid], length });
            boundary_loop.push(a);
            arclength.push(s);
            if degree == Degree::P2 {
                boundary_loop.push(mid);
                arclength.push(s + 0.5 * length);
            }
            s += length;
        }
        Self { mesh: mesh.clone(), degree, points, cells, facets, boundary_loop, arclength }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn degree(&self) -> Degree {
        self.degree
    }

    pub fn num_dofs(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    /// Local-to-global map of triangle `k` (`degree.local_dofs()` entries).
    pub fn cell(&self, k: usize) -> &[usize] {
        &self.cells[k][..self.degree.local_dofs()]
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    /// Boundary dofs in counter-clockwise order, starting at the lower-left
    /// corner.
    pub fn boundary_loop(&self) -> &[usize] {
        &self.boundary_loop
    }

    /// Arclength of each boundary-loop node from the loop start.
    pub fn arclength(&self) -> &[f64] {
        &self.arclength
    }

    pub fn perimeter(&self) -> f64 {
        self.facets.iter().map(|f| f.length).sum()
    }

    /// Scatters boundary-loop values into a nodal vector (zero inside).
    pub fn scatter_boundary(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.boundary_loop.len() {
            return Err(Error::invalid(format!(
                "boundary data has {} values, mesh boundary has {} nodes",
                values.len(),
                self.boundary_loop.len()
            )));
        }
        let mut out = vec![0.0; self.num_dofs()];
        for (&d, &v) in self.boundary_loop.iter().zip(values) {
            out[d] = v;
        }
        Ok(out)
    }

    pub fn gather_boundary(&self, nodal: &[f64]) -> Vec<f64> {
        self.boundary_loop.iter().map(|&d| nodal[d]).collect()
    }

    /// Node adjacency through shared cells: P1 uses mesh edges, P2 connects
    /// the nodes of each sub-triangle of the uniform 4-way split.
    pub fn node_neighbors(&self) -> Vec<Vec<usize>> {
        let mut nbrs = vec![Vec::new(); self.num_dofs()];
        let mut link = |a: usize, b: usize| {
            nbrs[a].push(b);
            nbrs[b].push(a);
        };
        for k in 0..self.cells.len() {
            let c = self.cells[k];
            match self.degree {
                Degree::P1 => {
                    link(c[0], c[1]);
                    link(c[1], c[2]);
                    link(c[2], c[0]);
                }
                Degree::P2 => {
                    // vertices 0,1,2; midpoints 3 (01), 4 (12), 5 (20)
                    for (a, b) in [(0, 3), (3, 1), (1, 4), (4, 2), (2, 5), (5, 0), (3, 4), (4, 5), (5, 3)] {
                        link(c[a], c[b]);
                    }
                }
            }
        }
        for n in &mut nbrs {
            n.sort_unstable();
            n.dedup();
        }
        nbrs
    }

    /// Interpolates a function at the nodes.
    pub fn interpolate(&self, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        self.points.iter().map(|&p| f(p)).collect()
    }

    pub fn same_space(&self, other: &DofMap) -> bool {
        std::ptr::eq(self, other)
            || (self.degree == other.degree
                && self.num_dofs() == other.num_dofs()
                && self.mesh.triangles() == other.mesh.triangles())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_rect_mesh, Rect};

    #[test]
    fn p2_counts_and_boundary() {
        let m = build_rect_mesh(3, 2, Rect::centered_unit()).unwrap();
        let p1 = DofMap::new(&m, Degree::P1);
        assert_eq!(p1.num_dofs(), 12);
        assert_eq!(p1.boundary_loop().len(), 10);
        let p2 = DofMap::new(&m, Degree::P2);
        assert_eq!(p2.num_dofs(), 7 * 5);
        assert_eq!(p2.boundary_loop().len(), 20);
        assert!((p2.perimeter() - 4.0).abs() < 1e-14);
        let s = p2.arclength();
        assert!(s.windows(2).all(|w| w[1] > w[0]));
        // midpoints sit halfway between their endpoints
        for (k, &d) in p2.boundary_loop().iter().enumerate().skip(1).step_by(2) {
            let a = p2.points()[p2.boundary_loop()[k - 1]];
            let b = p2.points()[p2.boundary_loop()[(k + 1) % 20]];
            let mid = p2.points()[d];
            assert!((mid[0] - 0.5 * (a[0] + b[0])).abs() < 1e-15);
            assert!((mid[1] - 0.5 * (a[1] + b[1])).abs() < 1e-15);
        }
    }

    #[test]
    fn degree_serde() {
        assert_eq!(Degree::try_from(2u8).unwrap(), Degree::P2);
        assert!(Degree::try_from(3u8).is_err());
    }
}
