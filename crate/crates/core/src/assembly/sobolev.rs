//! Riesz representative of the shape gradient in a Sobolev metric:
//! `(∇θ,∇φ) + (θ,φ) = −⟨Gν, φ⟩_{∂ω}` with `θ = 0` on ∂Ω, each component
//! solved with the same P1 operator.

use super::dofs::{Degree, DofMap};
use super::sparse::{refined_solve, CholFactor, CsrMatrix};
use super::system::{assemble_mass, assemble_stiffness, SOLVE_TOL};
use crate::error::{Error, Result};
use crate::mesh::{InterfaceEdge, Mesh, VectorField};

/// Factorized `K + M` restricted to interior vertices.
pub struct SobolevOperator {
    full: CsrMatrix,
    interior: Vec<usize>,
    /// Vertex → interior index, `usize::MAX` on ∂Ω.
    slot: Vec<usize>,
    reduced: CsrMatrix,
    chol: CholFactor,
}

impl SobolevOperator {
    pub fn new(mesh: &Mesh) -> Result<Self> {
        let dofs = DofMap::new(mesh, Degree::P1);
        let full = assemble_stiffness(&dofs).add(&assemble_mass(&dofs));
        let on_boundary = mesh.boundary_vertex_mask();
        let interior: Vec<usize> = (0..mesh.num_vertices()).filter(|&v| !on_boundary[v]).collect();
        if interior.is_empty() {
            return Err(Error::invalid("mesh has no interior vertices"));
        }
        let mut slot = vec![usize::MAX; mesh.num_vertices()];
        for (k, &v) in interior.iter().enumerate() {
            slot[v] = k;
        }
        let entries = full
            .iter()
            .filter(|&(i, j, _)| slot[i] != usize::MAX && slot[j] != usize::MAX)
            .map(|(i, j, v)| (slot[i], slot[j], v))
            .collect();
        let reduced = CsrMatrix::from_triplets(interior.len(), entries);
        let chol = CholFactor::new(&reduced)?;
        Ok(Self { full, interior, slot, reduced, chol })
    }

    /// `K + M` on all vertices.
    pub fn matrix(&self) -> &CsrMatrix {
        &self.full
    }

    /// Solves for `θ` given the nodal load of each component.
    pub fn solve(&self, load: &[[f64; 2]]) -> Result<VectorField> {
        let n = self.slot.len();
        if load.len() != n {
            return Err(Error::MeshMismatch);
        }
        let mut values = vec![[0.0; 2]; n];
        for c in 0..2 {
            let rhs: Vec<f64> = self.interior.iter().map(|&v| load[v][c]).collect();
            let x = refined_solve(|x| self.reduced.mul_vec(x), |r| self.chol.solve_in_place(r), &rhs, SOLVE_TOL, self.reduced.frobenius_norm())?;
            for (&v, xv) in self.interior.iter().zip(x) {
                values[v][c] = xv;
            }
        }
        Ok(VectorField { values })
    }
}

/// Nodal load of `−⟨Gν, φ⟩_{∂ω}` for a vertex density `G` that is linear
/// along each interface edge. Each edge uses its own normal.
pub fn interface_load(num_vertices: usize, interface: &[InterfaceEdge], g: &[f64]) -> Vec<[f64; 2]> {
    let mut load = vec![[0.0; 2]; num_vertices];
    for e in interface {
        let [a, b] = e.vertices;
        let wa = e.length / 6.0 * (2.0 * g[a] + g[b]);
        let wb = e.length / 6.0 * (g[a] + 2.0 * g[b]);
        for c in 0..2 {
            load[a][c] -= wa * e.normal[c];
            load[b][c] -= wb * e.normal[c];
        }
    }
    load
}

/// `θ` from the interface density `G` (vertex values). The interface must
/// stay away from ∂Ω; loads on boundary vertices are discarded.
pub fn solve_sobolev_extension(mesh: &Mesh, interface: &[InterfaceEdge], g: &[f64]) -> Result<VectorField> {
    if g.len() != mesh.num_vertices() {
        return Err(Error::MeshMismatch);
    }
    SobolevOperator::new(mesh)?.solve(&interface_load(mesh.num_vertices(), interface, g))
}

/// `⟨Gν, θ⟩_{∂ω}` with `G` and `θ` linear along each edge.
pub fn interface_pairing(interface: &[InterfaceEdge], g: &[f64], theta: &VectorField) -> f64 {
    interface
        .iter()
        .map(|e| {
            let [a, b] = e.vertices;
            let ta = theta.values[a][0] * e.normal[0] + theta.values[a][1] * e.normal[1];
            let tb = theta.values[b][0] * e.normal[0] + theta.values[b][1] * e.normal[1];
            e.length / 6.0 * (2.0 * g[a] * ta + g[a] * tb + g[b] * ta + 2.0 * g[b] * tb)
        })
        .sum()
}

/// `‖∇θ‖² + ‖θ‖²` for a P1 vertex field.
pub fn h1_norm_sq(op: &SobolevOperator, theta: &VectorField) -> f64 {
    (0..2)
        .map(|c| {
            let x: Vec<f64> = theta.values.iter().map(|v| v[c]).collect();
            op.matrix().form(&x, &x)
        })
        .sum()
}
